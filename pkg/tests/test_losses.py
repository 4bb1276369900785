"""Tests for empirical and total loss functionals."""

import math

import numpy as np
import pytest

from kcompress.indexing import (
    NONPARTITE,
    PARTITE,
    OrderChoice,
    Sample,
    canonical_order_choice,
)
from kcompress.losses import (
    CI99_MULTIPLIER,
    LossSpec,
    _empirical_loss_nonpartite_generic,
    _pair_sum_upper_tail,
    empirical_loss_nonpartite,
    empirical_loss_partite,
    total_loss_exact_rectangles,
    total_loss_exact_sum_threshold,
    total_loss_monte_carlo,
    zero_one_nonpartite,
    zero_one_partite,
)
from kcompress.samples import (
    FiniteDiscrete,
    Hypothesis,
    HypothesisClass,
    ProductMeasure,
    label_sample,
    spawn_rng,
)

UNIT_BOX = Hypothesis.rectangle([(0.0, 1.0), (0.0, 1.0)])
HALF_BOX = Hypothesis.rectangle([(0.0, 0.5), (0.0, 0.5)])


def test_zero_one_specs():
    lp = zero_one_partite()
    assert (lp.mode, lp.kind, lp.sup_norm) == (PARTITE, "zero-one", 1.0)
    assert lp.fn((0.1, 0.2), 1, 1) == 0.0
    assert lp.fn((0.1, 0.2), 1, 0) == 1.0
    ln = zero_one_nonpartite()
    assert ln.fn((0.1, 0.2), (1, 0), (1, 0)) == 0.0
    assert ln.fn((0.1, 0.2), (1, 0), (1, 1)) == 1.0
    with pytest.raises(ValueError):
        LossSpec(PARTITE, "zero-one", 0.0, lambda *a: 0.0)


def test_empirical_partite_three_quarters():
    x = Sample.partite([[0.1, 0.9], [0.2, 0.8]])
    z = label_sample(Hypothesis.constant(2, 1), x)
    assert empirical_loss_partite(z, HALF_BOX, zero_one_partite()) == 0.75


def test_empirical_partite_empty_sample():
    x = Sample.partite([[], []])
    z = label_sample(Hypothesis.constant(2, 1), x)
    assert empirical_loss_partite(z, HALF_BOX, zero_one_partite()) == 0.0


def test_empirical_partite_self_consistency():
    rng = spawn_rng(3)
    for _ in range(5):
        F = HypothesisClass.rectangles(2).sample_hypothesis(rng)
        x = Sample.partite([rng.random(6), rng.random(6)])
        z = label_sample(F, x)
        assert empirical_loss_partite(z, F, zero_one_partite()) == 0.0


def test_empirical_partite_custom_loss():
    const_loss = LossSpec(PARTITE, "const", 1.0, lambda xs, g, t: 0.25)
    x = Sample.partite([[0.1, 0.9], [0.2, 0.8]])
    z = label_sample(Hypothesis.constant(2, 1), x)
    assert empirical_loss_partite(z, HALF_BOX, const_loss) == 0.25


def test_empirical_partite_guards():
    x = Sample.partite([[0.1], [0.2]])
    z = label_sample(Hypothesis.constant(2, 1), x)
    with pytest.raises(ValueError):
        empirical_loss_partite(z, HALF_BOX, zero_one_nonpartite())
    with pytest.raises(ValueError):
        empirical_loss_partite(z, Hypothesis.sum_threshold(3, 1.0), zero_one_partite())


def test_empirical_nonpartite_one_third():
    # truth from t=1.0 labels pair sums 0.7, 1.1, 1.4 as 0, 1, 1;
    # a t=1.3 rule flips only the middle pair
    x = Sample.nonpartite([0.2, 0.5, 0.9], k=2)
    z = label_sample(Hypothesis.sum_threshold(2, 1.0), x)
    H = Hypothesis.sum_threshold(2, 1.3)
    loss = empirical_loss_nonpartite(z, H, zero_one_nonpartite(), canonical_order_choice(3, 2))
    assert loss == pytest.approx(1.0 / 3.0)


def test_empirical_nonpartite_small_m():
    x = Sample.nonpartite([0.2], k=2)
    z = label_sample(Hypothesis.sum_threshold(2, 1.0), x)
    H = Hypothesis.constant(2, 1)
    assert empirical_loss_nonpartite(z, H, zero_one_nonpartite(), canonical_order_choice(1, 2)) == 0.0


def test_empirical_nonpartite_self_consistency():
    rng = spawn_rng(4)
    for _ in range(5):
        F = HypothesisClass.sum_thresholds(2).sample_hypothesis(rng)
        x = Sample.nonpartite(rng.random(6), k=2)
        z = label_sample(F, x)
        oc = canonical_order_choice(6, 2)
        assert empirical_loss_nonpartite(z, F, zero_one_nonpartite(), oc) == 0.0


def test_empirical_nonpartite_order_choice_invariance():
    # zero-one bundle loss ignores which ordering each subset is read in
    rng = spawn_rng(8)
    x = Sample.nonpartite(rng.random(7), k=2)
    z = label_sample(Hypothesis.sum_threshold(2, 0.9), x)
    H = Hypothesis.sum_threshold(2, 1.2)
    ref = empirical_loss_nonpartite(z, H, zero_one_nonpartite(), canonical_order_choice(7, 2))
    for j in range(3):
        oc = OrderChoice.random(7, 2, spawn_rng(100, j))
        fast = empirical_loss_nonpartite(z, H, zero_one_nonpartite(), oc)
        slow = _empirical_loss_nonpartite_generic(z, H, zero_one_nonpartite(), oc)
        assert fast == ref
        assert slow == ref


def test_empirical_nonpartite_custom_bundle_loss():
    # charge 0.5 whenever the identity orientation disagrees, ignore the swap
    fn = lambda xs, guess, truth: 0.5 if guess[0] != truth[0] else 0.0
    loss = LossSpec(NONPARTITE, "first-orientation", 0.5, fn)
    x = Sample.nonpartite([0.2, 0.5, 0.9], k=2)
    z = label_sample(Hypothesis.sum_threshold(2, 1.0), x)
    H = Hypothesis.sum_threshold(2, 1.3)
    got = empirical_loss_nonpartite(z, H, loss, canonical_order_choice(3, 2))
    assert got == pytest.approx(0.5 / 3.0)


def test_empirical_nonpartite_guards():
    x = Sample.nonpartite([0.1, 0.2], k=2)
    z = label_sample(Hypothesis.sum_threshold(2, 1.0), x)
    with pytest.raises(ValueError):
        empirical_loss_nonpartite(z, HALF_BOX, zero_one_partite(), canonical_order_choice(2, 2))
    with pytest.raises(ValueError):
        empirical_loss_nonpartite(z, Hypothesis.sum_threshold(2, 1.0), zero_one_nonpartite(), canonical_order_choice(3, 2))


# ---------------------------------------------------------------------------
# exact total losses


def test_exact_rectangles_three_quarters():
    mu = ProductMeasure.uniform(PARTITE, 2)
    assert total_loss_exact_rectangles(mu, UNIT_BOX, HALF_BOX) == 0.75
    assert total_loss_exact_rectangles(mu, HALF_BOX, UNIT_BOX) == 0.75
    assert total_loss_exact_rectangles(mu, HALF_BOX, HALF_BOX) == 0.0
    empty = Hypothesis.empty_rectangle(2)
    assert total_loss_exact_rectangles(mu, HALF_BOX, empty) == 0.25
    assert total_loss_exact_rectangles(mu, empty, empty) == 0.0


def test_exact_rectangles_clips_to_unit_cube():
    mu = ProductMeasure.uniform(PARTITE, 2)
    wide = Hypothesis.rectangle([(-1.0, 2.0), (-1.0, 2.0)])
    assert total_loss_exact_rectangles(mu, wide, UNIT_BOX) == 0.0


def test_exact_rectangles_guards():
    with pytest.raises(ValueError):
        total_loss_exact_rectangles(ProductMeasure.uniform(NONPARTITE, 2), UNIT_BOX, HALF_BOX)
    mu = ProductMeasure(PARTITE, 2, (FiniteDiscrete((0.5,), (1.0,)),) * 2)
    with pytest.raises(ValueError):
        total_loss_exact_rectangles(mu, UNIT_BOX, HALF_BOX)


def test_pair_sum_upper_tail_values():
    assert _pair_sum_upper_tail(-0.5) == 1.0
    assert _pair_sum_upper_tail(0.0) == 1.0
    assert _pair_sum_upper_tail(0.5) == 0.875
    assert _pair_sum_upper_tail(1.0) == 0.5
    assert _pair_sum_upper_tail(1.5) == 0.125
    assert _pair_sum_upper_tail(2.0) == 0.0
    assert _pair_sum_upper_tail(2.5) == 0.0
    assert _pair_sum_upper_tail(math.inf) == 0.0
    assert _pair_sum_upper_tail(-math.inf) == 1.0


def test_exact_sum_threshold_values():
    mu = ProductMeasure.uniform(NONPARTITE, 2)
    F = Hypothesis.sum_threshold(2, 0.5)
    H = Hypothesis.sum_threshold(2, 1.5)
    assert total_loss_exact_sum_threshold(mu, F, H) == 0.75
    assert total_loss_exact_sum_threshold(mu, F, F) == 0.0
    zero = Hypothesis.constant(2, 0)
    one = Hypothesis.constant(2, 1)
    assert total_loss_exact_sum_threshold(mu, zero, one) == 1.0
    assert total_loss_exact_sum_threshold(mu, F, zero) == 0.875


def test_exact_sum_threshold_guards():
    mu3 = ProductMeasure.uniform(NONPARTITE, 3)
    F = Hypothesis.sum_threshold(3, 1.0)
    with pytest.raises(ValueError):
        total_loss_exact_sum_threshold(mu3, F, F)
    mu = ProductMeasure.uniform(NONPARTITE, 2)
    with pytest.raises(ValueError):
        total_loss_exact_sum_threshold(mu, Hypothesis.constant(2, 0.5), Hypothesis.constant(2, 0))


# ---------------------------------------------------------------------------
# Monte Carlo estimation


def test_monte_carlo_matches_exact_rectangles():
    mu = ProductMeasure.uniform(PARTITE, 2)
    rng = spawn_rng(21)
    for trial in range(5):
        F = HypothesisClass.rectangles(2).sample_hypothesis(rng)
        H = HypothesisClass.rectangles(2).sample_hypothesis(rng)
        exact = total_loss_exact_rectangles(mu, F, H)
        est, half = total_loss_monte_carlo(mu, F, H, zero_one_partite(), 20000, seed=trial)
        assert abs(est - exact) <= max(half, 1e-12)


def test_monte_carlo_matches_exact_thresholds():
    mu = ProductMeasure.uniform(NONPARTITE, 2)
    rng = spawn_rng(22)
    for trial in range(5):
        F = HypothesisClass.sum_thresholds(2).sample_hypothesis(rng)
        H = HypothesisClass.sum_thresholds(2).sample_hypothesis(rng)
        exact = total_loss_exact_sum_threshold(mu, F, H)
        est, half = total_loss_monte_carlo(mu, F, H, zero_one_nonpartite(), 20000, seed=trial)
        assert abs(est - exact) <= max(half, 1e-12)


def test_monte_carlo_identical_hypotheses():
    mu = ProductMeasure.uniform(PARTITE, 2)
    est, half = total_loss_monte_carlo(mu, HALF_BOX, HALF_BOX, zero_one_partite(), 500, seed=0)
    assert est == 0.0 and half == 0.0


def test_monte_carlo_half_width_capped():
    # find a 2-draw seed whose draws straddle 0.5 so the sample spread is
    # maximal and the normal interval would exceed the sup norm
    mu = ProductMeasure(PARTITE, 1, (ProductMeasure.uniform(PARTITE, 1).distributions[0],))
    F = Hypothesis.rectangle([(0.0, 0.5)])
    H = Hypothesis.empty_rectangle(1)
    seed = next(
        s for s in range(100)
        if np.sum(spawn_rng(s, 0).random(2) <= 0.5) == 1
    )
    est, half = total_loss_monte_carlo(mu, F, H, zero_one_partite(), 2, seed=seed)
    assert est == 0.5
    assert half == 1.0  # capped at the sup norm


def test_monte_carlo_nonpartite_bundle_semantics():
    # an asymmetric table vs a symmetric rule: disagreement shows up in
    # some orientation of almost every draw
    mu = ProductMeasure.uniform(NONPARTITE, 2)
    F = Hypothesis.constant(2, 0)
    H = Hypothesis.sum_threshold(2, -1.0)  # constant 1 on all pairs
    est, _ = total_loss_monte_carlo(mu, F, H, zero_one_nonpartite(), 100, seed=0)
    assert est == 1.0


def test_monte_carlo_guards():
    mu = ProductMeasure.uniform(PARTITE, 2)
    with pytest.raises(ValueError):
        total_loss_monte_carlo(mu, UNIT_BOX, HALF_BOX, zero_one_partite(), 0, seed=0)
    with pytest.raises(ValueError):
        total_loss_monte_carlo(mu, UNIT_BOX, HALF_BOX, zero_one_nonpartite(), 10, seed=0)
    with pytest.raises(ValueError):
        total_loss_monte_carlo(mu, Hypothesis.sum_threshold(3, 1.0), HALF_BOX, zero_one_partite(), 10, seed=0)


def test_ci_multiplier_is_99_percent():
    assert CI99_MULTIPLIER == 2.576
