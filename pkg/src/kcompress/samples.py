"""Product measures, deterministic sample generation, hypotheses, and ERM.

Randomness is counter-based: every stream is a Philox generator keyed by
a master seed plus an integer path, so any draw is reproducible from
(seed, path) alone and independent streams never overlap.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .indexing import (
    DEFAULT_CELL_BUDGET,
    MAX_ARITY,
    NONPARTITE,
    PARTITE,
    SENTINEL,
    CellBudgetError,
    LabelTensor,
    LabeledSample,
    OrderChoice,
    Sample,
    increasing_mask,
    injective_mask,
    enumerate_permutations,
)

BINARY_ALPHABET = (0, 1)


def spawn_rng(seed: int, *path: int) -> np.random.Generator:
    """Independent generator derived from (seed, path), counter-based."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *path: int) -> int:
    """A 64-bit child seed derived from (seed, path)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class Uniform01:
    """Uniform distribution on the unit interval."""

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.random(n)


@dataclass(frozen=True)
class FiniteDiscrete:
    """Finite distribution over explicit atoms with explicit weights."""

    values: tuple
    weights: tuple

    def __post_init__(self):
        if len(self.values) != len(self.weights) or not self.values:
            raise ValueError("values and weights must be nonempty and equal-length")
        if len(set(self.values)) != len(self.values):
            raise ValueError("atoms must be distinct")
        w = np.asarray(self.weights, dtype=float)
        if (w < 0).any() or abs(float(w.sum()) - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        idx = rng.choice(len(self.values), size=n, p=np.asarray(self.weights, dtype=float))
        return np.asarray(self.values)[idx]


@dataclass(frozen=True, eq=False)
class ProductMeasure:
    """k per-side distributions (partite) or one ground distribution."""

    mode: str
    k: int
    distributions: tuple

    def __post_init__(self):
        expected = self.k if self.mode == PARTITE else 1
        if len(self.distributions) != expected:
            raise ValueError(
                f"{self.mode} measure needs {expected} distribution(s), got {len(self.distributions)}"
            )

    @classmethod
    def uniform(cls, mode: str, k: int) -> "ProductMeasure":
        n = k if mode == PARTITE else 1
        return cls(mode, k, (Uniform01(),) * n)

    def distribution(self, side: int):
        if self.mode == PARTITE:
            return self.distributions[side]
        return self.distributions[0]


def draw_sample(mu: ProductMeasure, m: int, seed: int) -> Sample:
    """m independent points per side (partite) or m points total (nonpartite).

    Side i draws from the stream (seed, i), so the draw is fully
    determined by the seed and point index.
    """
    if m < 0:
        raise ValueError("sample size m must be >= 0")
    if mu.mode == PARTITE:
        sides = tuple(
            mu.distributions[i].draw(spawn_rng(seed, i), m) for i in range(mu.k)
        )
    else:
        sides = (mu.distributions[0].draw(spawn_rng(seed, 0), m),)
    return Sample(mu.mode, mu.k, sides)


# ---------------------------------------------------------------------------
# Hypotheses


@dataclass(frozen=True, eq=False)
class Hypothesis:
    """Total evaluation rule from a k-tuple of points to a label.

    Kinds:
      rectangle      label 1 inside a closed box, 0 outside; intervals None
                     is the empty box (constant 0 within the family)
      sum-threshold  label 1 iff the coordinate sum is >= threshold
      constant       always const_value
      table          explicit lookup over finite per-coordinate supports
    """

    kind: str
    k: int
    intervals: tuple | None = None
    threshold: float | None = None
    const_value: object = None
    table_support: tuple | None = None
    table_labels: tuple | None = None

    @classmethod
    def rectangle(cls, intervals) -> "Hypothesis":
        if intervals is None:
            raise ValueError("use empty_rectangle for the empty box")
        ivs = tuple((float(lo), float(hi)) for lo, hi in intervals)
        for lo, hi in ivs:
            if lo > hi:
                raise ValueError(f"interval [{lo}, {hi}] is empty; use empty_rectangle")
        return cls("rectangle", len(ivs), intervals=ivs)

    @classmethod
    def empty_rectangle(cls, k: int) -> "Hypothesis":
        return cls("rectangle", k, intervals=None)

    @classmethod
    def sum_threshold(cls, k: int, threshold: float) -> "Hypothesis":
        return cls("sum-threshold", k, threshold=float(threshold))

    @classmethod
    def constant(cls, k: int, value) -> "Hypothesis":
        return cls("constant", k, const_value=value)

    @classmethod
    def table(cls, k: int, support, labels) -> "Hypothesis":
        """Lookup table.

        support: one tuple of point values per coordinate (a single tuple
        shared by all coordinates is accepted for nonpartite use).
        labels: row-major tuple of length prod(|support_i|).
        """
        sup = tuple(tuple(s) for s in support)
        if len(sup) == 1 and k > 1:
            sup = sup * k
        if len(sup) != k:
            raise ValueError(f"need {k} supports, got {len(sup)}")
        total = math.prod(len(s) for s in sup)
        labs = tuple(labels)
        if len(labs) != total:
            raise ValueError(f"table needs {total} labels, got {len(labs)}")
        return cls("table", k, table_support=sup, table_labels=labs)

    # -- evaluation ---------------------------------------------------------

    def value(self, xs: Sequence):
        """Label of one k-tuple of points."""
        if len(xs) != self.k:
            raise ValueError(f"expected {self.k} points, got {len(xs)}")
        if self.kind == "rectangle":
            if self.intervals is None:
                return 0
            return int(all(lo <= x <= hi for (lo, hi), x in zip(self.intervals, xs)))
        if self.kind == "sum-threshold":
            return int(float(sum(xs)) >= self.threshold)
        if self.kind == "constant":
            return self.const_value
        if self.kind == "table":
            flat = 0
            for i, x in enumerate(xs):
                sup = self.table_support[i]
                flat = flat * len(sup) + sup.index(x)
            return self.table_labels[flat]
        raise ValueError(f"unknown hypothesis kind {self.kind!r}")

    def eval_columns(self, cols: Sequence[np.ndarray]) -> np.ndarray:
        """Vectorized evaluation on n tuples given as k aligned columns."""
        if len(cols) != self.k:
            raise ValueError(f"expected {self.k} columns, got {len(cols)}")
        n = len(cols[0])
        if self.kind == "rectangle":
            if self.intervals is None:
                return np.zeros(n, dtype=np.int64)
            out = np.ones(n, dtype=bool)
            for (lo, hi), c in zip(self.intervals, cols):
                out &= (c >= lo) & (c <= hi)
            return out.astype(np.int64)
        if self.kind == "sum-threshold":
            total = np.zeros(n, dtype=float)
            for c in cols:
                total = total + np.asarray(c, dtype=float)
            return (total >= self.threshold).astype(np.int64)
        if self.kind == "constant":
            return np.full(n, self.const_value)
        if self.kind == "table":
            flat = np.zeros(n, dtype=np.int64)
            for i, c in enumerate(cols):
                flat = flat * len(self.table_support[i]) + _support_indices(
                    c, self.table_support[i]
                )
            return np.asarray(self.table_labels, dtype=object)[flat]
        raise ValueError(f"unknown hypothesis kind {self.kind!r}")

    def label_grid(self, sides: Sequence[np.ndarray]) -> np.ndarray:
        """Labels on the full product grid of the given sides, shape (m1,...,mk)."""
        if len(sides) != self.k:
            raise ValueError(f"expected {self.k} sides, got {len(sides)}")
        k = self.k
        shape = tuple(len(s) for s in sides)
        if self.kind == "rectangle":
            if self.intervals is None:
                return np.zeros(shape, dtype=np.int64)
            out = np.ones(shape, dtype=bool)
            for i, ((lo, hi), s) in enumerate(zip(self.intervals, sides)):
                mask = (s >= lo) & (s <= hi)
                out &= mask.reshape(_axis_shape(i, k, len(s)))
            return out.astype(np.int64)
        if self.kind == "sum-threshold":
            total = np.zeros(shape, dtype=float)
            for i, s in enumerate(sides):
                total = total + np.asarray(s, dtype=float).reshape(
                    _axis_shape(i, k, len(s))
                )
            return (total >= self.threshold).astype(np.int64)
        if self.kind == "constant":
            return np.full(shape, self.const_value)
        if self.kind == "table":
            flat = np.zeros(shape, dtype=np.int64)
            for i, s in enumerate(sides):
                idx = _support_indices(s, self.table_support[i])
                flat = flat * len(self.table_support[i]) + idx.reshape(
                    _axis_shape(i, k, len(s))
                )
            return np.asarray(self.table_labels, dtype=object)[flat]
        raise ValueError(f"unknown hypothesis kind {self.kind!r}")

    def describe(self) -> str:
        if self.kind == "rectangle":
            if self.intervals is None:
                return "rectangle(empty)"
            ivs = ", ".join(f"[{lo:.6g}, {hi:.6g}]" for lo, hi in self.intervals)
            return f"rectangle({ivs})"
        if self.kind == "sum-threshold":
            return f"sum-threshold(t={self.threshold:.6g})"
        if self.kind == "constant":
            return f"constant({self.const_value!r})"
        return f"table(k={self.k})"


def _axis_shape(i: int, k: int, n: int) -> tuple[int, ...]:
    shape = [1] * k
    shape[i] = n
    return tuple(shape)


def _support_indices(points: np.ndarray, support: tuple) -> np.ndarray:
    lookup = {v: i for i, v in enumerate(support)}
    try:
        return np.asarray([lookup[p] for p in np.asarray(points).tolist()], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"point {exc.args[0]!r} not in the table support") from exc


def encode_labels(values: np.ndarray, alphabet: tuple) -> np.ndarray:
    """Map label values to int64 codes into the alphabet."""
    if alphabet == BINARY_ALPHABET:
        arr = np.asarray(values)
        codes = arr.astype(np.int64)
        if not np.array_equal(codes, arr) or (codes < 0).any() or (codes > 1).any():
            raise ValueError("labels outside the binary alphabet (0, 1)")
        return codes
    lookup = {v: i for i, v in enumerate(alphabet)}
    flat = np.asarray(values).ravel()
    try:
        codes = np.asarray([lookup[v] for v in flat.tolist()], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"label {exc.args[0]!r} not in the alphabet") from exc
    return codes.reshape(np.asarray(values).shape)


def label_sample(
    F: Hypothesis,
    x: Sample,
    alphabet: tuple = BINARY_ALPHABET,
    budget: int = DEFAULT_CELL_BUDGET,
) -> LabeledSample:
    """Labels of F on every tuple of x (injective tuples only, nonpartite).

    Nonpartite samples with m < k get an all-sentinel tensor.
    """
    if F.k != x.k:
        raise ValueError(f"hypothesis arity {F.k} does not match sample arity {x.k}")
    m, k = x.m, x.k
    if m**k > budget:
        raise CellBudgetError(f"m**k = {m**k} exceeds budget {budget}")
    sides = list(x.sides) if x.mode == PARTITE else [x.sides[0]] * k
    if m == 0:
        codes = np.zeros((m,) * k, dtype=np.int64)
    else:
        codes = encode_labels(F.label_grid(sides), tuple(alphabet))
    if x.mode == NONPARTITE and m > 0:
        codes = codes.copy()
        codes[~injective_mask(m, k)] = SENTINEL
    tensor = LabelTensor(x.mode, k, m, tuple(alphabet), codes)
    return LabeledSample(x, tensor)


# ---------------------------------------------------------------------------
# Hypothesis classes


@dataclass(frozen=True, eq=False)
class HypothesisClass:
    """A family of hypotheses with membership testing and parameter sampling."""

    class_id: str
    mode: str
    k: int
    members: tuple | None = None
    threshold_range: tuple | None = None

    @classmethod
    def rectangles(cls, k: int) -> "HypothesisClass":
        """Closed axis-aligned boxes in the unit cube, plus the empty box."""
        return cls("rectangle", PARTITE, k)

    @classmethod
    def sum_thresholds(cls, k: int) -> "HypothesisClass":
        """Nonpartite rules 1[sum of coordinates >= t], plus the constant 0."""
        return cls("sum-threshold", NONPARTITE, k, threshold_range=(0.0, float(k)))

    @classmethod
    def table_list(cls, mode: str, k: int, members) -> "HypothesisClass":
        """An explicit finite list of hypotheses."""
        return cls("table-list", mode, k, members=tuple(members))

    def contains(self, H: Hypothesis) -> bool:
        if H.k != self.k:
            return False
        if self.class_id == "rectangle":
            return H.kind == "rectangle"
        if self.class_id == "sum-threshold":
            return H.kind == "sum-threshold" or (
                H.kind == "constant" and H.const_value == 0
            )
        return any(H is member for member in self.members)

    def sample_hypothesis(self, rng: np.random.Generator) -> Hypothesis:
        """One random member; parameter distributions cover degenerate cases."""
        if self.class_id == "rectangle":
            intervals = []
            for _ in range(self.k):
                a, b = rng.random(2)
                intervals.append((min(a, b), max(a, b)))
            return Hypothesis.rectangle(intervals)
        if self.class_id == "sum-threshold":
            lo, hi = self.threshold_range
            return Hypothesis.sum_threshold(self.k, rng.uniform(lo, hi))
        idx = int(rng.integers(len(self.members)))
        return self.members[idx]


# ---------------------------------------------------------------------------
# Exact empirical risk minimization for the built-in families


def _positive_code(alphabet: tuple) -> int:
    if 1 not in alphabet or 0 not in alphabet:
        raise ValueError("built-in ERM expects an alphabet containing 0 and 1")
    return alphabet.index(1)


def minimal_enclosing_box(labeled: LabeledSample) -> Hypothesis:
    """Smallest closed box containing every positive tuple; empty box if none."""
    if labeled.mode != PARTITE:
        raise ValueError("minimal_enclosing_box expects a partite sample")
    pos = labeled.labels.codes == _positive_code(labeled.labels.alphabet)
    if not pos.any():
        return Hypothesis.empty_rectangle(labeled.k)
    intervals = []
    for i in range(labeled.k):
        axes = tuple(j for j in range(labeled.k) if j != i)
        participating = pos.any(axis=axes) if axes else pos
        coords = labeled.sample.sides[i][participating]
        intervals.append((float(coords.min()), float(coords.max())))
    return Hypothesis.rectangle(intervals)


def _threshold_set_masks(labeled: LabeledSample):
    """Per-k-subset masks over increasing tuples: all-positive, all-negative, mixed."""
    m, k = labeled.m, labeled.k
    codes = labeled.labels.codes
    pos_code = _positive_code(labeled.labels.alphabet)
    pos = codes == pos_code
    neg = (codes != pos_code) & (codes != SENTINEL)
    any_pos = np.zeros((m,) * k, dtype=bool)
    any_neg = np.zeros((m,) * k, dtype=bool)
    for perm in enumerate_permutations(k):
        any_pos |= pos.transpose(perm)
        any_neg |= neg.transpose(perm)
    inc = increasing_mask(m, k)
    return inc & any_pos & ~any_neg, inc & any_neg & ~any_pos, inc & any_pos & any_neg


def _subset_sums(sample: Sample, k: int) -> np.ndarray:
    pts = np.asarray(sample.sides[0], dtype=float)
    total = np.zeros((len(pts),) * k, dtype=float)
    for i in range(k):
        total = total + pts.reshape(_axis_shape(i, k, len(pts)))
    return total


def erm_realizability_check(
    klass: HypothesisClass,
    labeled: LabeledSample,
    loss,
    order: OrderChoice | None = None,
) -> tuple[bool, Hypothesis | None]:
    """Exact ERM: is there a member with zero empirical loss, and which one.

    Supports the built-in families under the zero-one loss.  For
    rectangles the witness candidate is the minimal enclosing box of the
    positive tuples; the sample is realizable iff no negative tuple falls
    inside it.  For sum thresholds it is realizable iff every orientation
    bundle is constant and the minimal positive subset sum exceeds the
    maximal negative one; the witness threshold is the minimal positive
    sum.  Table lists are checked member by member.
    """
    if getattr(loss, "kind", None) != "zero-one":
        raise ValueError("exact ERM is only implemented for the zero-one loss")
    if klass.mode != labeled.mode or klass.k != labeled.k:
        raise ValueError("hypothesis class does not match the sample")

    if klass.class_id == "rectangle":
        box = minimal_enclosing_box(labeled)
        if box.intervals is None:
            return True, box
        grid = box.label_grid(list(labeled.sample.sides))
        mismatch = grid.astype(np.int64) != (
            labeled.labels.codes == _positive_code(labeled.labels.alphabet)
        ).astype(np.int64)
        return (not mismatch.any()), (box if not mismatch.any() else None)

    if klass.class_id == "sum-threshold":
        m, k = labeled.m, labeled.k
        if m < k:
            return True, Hypothesis.constant(k, 0)
        pos_sets, neg_sets, mixed = _threshold_set_masks(labeled)
        if mixed.any():
            return False, None
        if not pos_sets.any():
            return True, Hypothesis.constant(k, 0)
        sums = _subset_sums(labeled.sample, k)
        min_pos = float(sums[pos_sets].min())
        if neg_sets.any() and float(sums[neg_sets].max()) >= min_pos:
            return False, None
        return True, Hypothesis.sum_threshold(k, min_pos)

    if klass.class_id == "table-list":
        for member in klass.members:
            if _zero_loss_everywhere(member, labeled):
                return True, member
        return False, None

    raise ValueError(f"unsupported class kind {klass.class_id!r}")


def _zero_loss_everywhere(H: Hypothesis, labeled: LabeledSample) -> bool:
    m, k = labeled.m, labeled.k
    if m == 0 or (labeled.mode == NONPARTITE and m < k):
        return True
    sides = list(labeled.sample.sides) if labeled.mode == PARTITE else [
        labeled.sample.sides[0]
    ] * k
    codes = encode_labels(H.label_grid(sides), labeled.labels.alphabet)
    if labeled.mode == PARTITE:
        return bool((codes == labeled.labels.codes).all())
    inj = injective_mask(m, k)
    return bool((codes[inj] == labeled.labels.codes[inj]).all())


# ---------------------------------------------------------------------------
# Serialization: one JSON document per labeled sample

LABEL_SENTINEL_TEXT = "·"


def _to_plain(v):
    if isinstance(v, np.generic):
        return v.item()
    return v


def labeled_sample_to_json(labeled: LabeledSample) -> str:
    """Schema: {mode, k, m, Y, points, labels}; labels row-major with a
    sentinel character on non-injective cells.  Floats round-trip exactly."""
    x, t = labeled.sample, labeled.labels
    points = (
        [[_to_plain(p) for p in side] for side in x.sides]
        if x.mode == PARTITE
        else [_to_plain(p) for p in x.sides[0]]
    )
    labels = [
        LABEL_SENTINEL_TEXT if c == SENTINEL else _to_plain(t.alphabet[c])
        for c in t.codes.ravel().tolist()
    ]
    doc = {
        "mode": x.mode,
        "k": x.k,
        "m": x.m,
        "Y": [_to_plain(y) for y in t.alphabet],
        "points": points,
        "labels": labels,
    }
    return json.dumps(doc, sort_keys=True)


def labeled_sample_from_json(text: str, budget: int = DEFAULT_CELL_BUDGET) -> LabeledSample:
    doc = json.loads(text)
    mode, k, m = doc["mode"], int(doc["k"]), int(doc["m"])
    alphabet = tuple(doc["Y"])
    if mode == PARTITE:
        sample = Sample.partite([np.asarray(side) for side in doc["points"]])
    else:
        sample = Sample.nonpartite(np.asarray(doc["points"]), k)
    if sample.m != m:
        raise ValueError(f"declared m={m} does not match {sample.m} points")
    labels = doc["labels"]
    if len(labels) != m**k:
        raise ValueError(f"expected {m**k} label cells, got {len(labels)}")
    lookup = {v: i for i, v in enumerate(alphabet)}
    codes = np.asarray(
        [SENTINEL if v == LABEL_SENTINEL_TEXT else lookup[v] for v in labels],
        dtype=np.int64,
    ).reshape((m,) * k)
    tensor = LabelTensor.from_codes(mode, k, m, alphabet, codes, budget=budget)
    return LabeledSample(sample, tensor)
