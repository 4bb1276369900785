"""Combinatorial index calculus for k-partite and k-ary samples.

A size-m sample either has m points on each of k independent sides
("partite" mode) or m points in one shared ground set ("nonpartite"
mode).  Labels live on index tuples: all of [m]^k in partite mode, only
the injective tuples in nonpartite mode.  This module provides the
tuple machinery everything else is built on: point selection along a
tuple, subsampling along injections, order choices over k-subsets, and
orientation bundles.

Conventions, fixed here once for the whole package:

* indices are 0-based,
* dense label tensors are stored row-major (last coordinate fastest),
* nonpartite cells with a repeated index hold the sentinel code -1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

PARTITE = "partite"
NONPARTITE = "nonpartite"
MODES = (PARTITE, NONPARTITE)

#: Operations that enumerate S_k refuse arities beyond this (k! blowup).
MAX_ARITY = 8

#: Default ceiling on the number of dense tensor cells m**k.
DEFAULT_CELL_BUDGET = 100_000_000

#: Code stored in nonpartite tensor cells whose index tuple repeats an index.
SENTINEL = -1


class CellBudgetError(ValueError):
    """A dense m**k tensor would exceed the configured cell budget."""


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}, expected one of {MODES}")


def falling_factorial(n: int, k: int) -> int:
    """Number of injective k-tuples from an n-element set: n(n-1)...(n-k+1).

    Returns 1 when k == 0 and 0 when k > n.
    """
    if n < 0 or k < 0:
        raise ValueError("falling_factorial requires n >= 0 and k >= 0")
    return math.perm(n, k)


def enumerate_permutations(k: int) -> list[tuple[int, ...]]:
    """All permutations of range(k) in lexicographic order.

    The returned order indexes orientation bundles everywhere in the
    package, so it must never change.
    """
    if k < 1:
        raise ValueError("arity k must be >= 1")
    if k > MAX_ARITY:
        raise ValueError(f"arity k={k} exceeds the supported maximum {MAX_ARITY}")
    return list(itertools.permutations(range(k)))


def check_index_tuple(
    entries: Sequence[int], k: int, m: int, injective: bool = False
) -> tuple[int, ...]:
    """Validate a k-tuple of indices into range(m) and return it as a tuple."""
    idx = tuple(int(e) for e in entries)
    if len(idx) != k:
        raise ValueError(f"index tuple {idx} has length {len(idx)}, expected k={k}")
    for e in idx:
        if not 0 <= e < m:
            raise IndexError(f"index {e} out of range for m={m}")
    if injective and len(set(idx)) != k:
        raise ValueError(f"index tuple {idx} is not injective")
    return idx


@dataclass(frozen=True, eq=False)
class Sample:
    """Unlabeled sample: k point lists (partite) or one point list (nonpartite)."""

    mode: str
    k: int
    sides: tuple[np.ndarray, ...]

    def __post_init__(self):
        _check_mode(self.mode)
        if not 1 <= self.k <= MAX_ARITY:
            raise ValueError(f"arity k={self.k} outside [1, {MAX_ARITY}]")
        expected = self.k if self.mode == PARTITE else 1
        if len(self.sides) != expected:
            raise ValueError(
                f"{self.mode} sample needs {expected} side(s), got {len(self.sides)}"
            )
        sizes = {len(s) for s in self.sides}
        if len(sizes) > 1:
            raise ValueError(f"sides have unequal sizes {sorted(sizes)}")

    @classmethod
    def partite(cls, sides: Iterable[Sequence]) -> "Sample":
        arrs = tuple(np.asarray(s) for s in sides)
        return cls(PARTITE, len(arrs), arrs)

    @classmethod
    def nonpartite(cls, points: Sequence, k: int) -> "Sample":
        return cls(NONPARTITE, k, (np.asarray(points),))

    @property
    def m(self) -> int:
        return len(self.sides[0])

    def side(self, i: int) -> np.ndarray:
        """Points of side i (partite); the single ground set otherwise."""
        if self.mode == PARTITE:
            return self.sides[i]
        return self.sides[0]


def tuple_points(sample: Sample, idx: Sequence[int]) -> tuple:
    """Points selected by an index tuple.

    Partite: entry i indexes side i.  Nonpartite: every entry indexes the
    one ground set and the tuple must be injective.
    """
    injective = sample.mode == NONPARTITE
    t = check_index_tuple(idx, sample.k, sample.m, injective=injective)
    if sample.mode == PARTITE:
        return tuple(sample.sides[i][t[i]] for i in range(sample.k))
    pts = sample.sides[0]
    return tuple(pts[e] for e in t)


@lru_cache(maxsize=32)
def _index_grids(m: int, k: int) -> tuple[np.ndarray, ...]:
    grids = np.indices((m,) * k)
    grids.setflags(write=False)
    return tuple(grids)


def injective_mask(m: int, k: int, budget: int = DEFAULT_CELL_BUDGET) -> np.ndarray:
    """Boolean (m,)*k grid, True where all coordinates are pairwise distinct."""
    if m**k > budget:
        raise CellBudgetError(f"m**k = {m**k} exceeds budget {budget}")
    grids = _index_grids(m, k)
    mask = np.ones((m,) * k, dtype=bool)
    for i in range(k):
        for j in range(i + 1, k):
            mask &= grids[i] != grids[j]
    return mask


def increasing_mask(m: int, k: int, budget: int = DEFAULT_CELL_BUDGET) -> np.ndarray:
    """Boolean (m,)*k grid, True on strictly increasing index tuples."""
    if m**k > budget:
        raise CellBudgetError(f"m**k = {m**k} exceeds budget {budget}")
    grids = _index_grids(m, k)
    mask = np.ones((m,) * k, dtype=bool)
    for i in range(k - 1):
        mask &= grids[i] < grids[i + 1]
    return mask


@dataclass(frozen=True, eq=False)
class LabelTensor:
    """Dense labels on index tuples, stored as codes into a finite alphabet.

    codes has shape (m,)*k with dtype int64.  Valid cells hold an index
    into alphabet; in nonpartite mode every non-injective cell holds
    SENTINEL and every injective cell a valid code.
    """

    mode: str
    k: int
    m: int
    alphabet: tuple
    codes: np.ndarray

    def __post_init__(self):
        _check_mode(self.mode)
        if not 1 <= self.k <= MAX_ARITY:
            raise ValueError(f"arity k={self.k} outside [1, {MAX_ARITY}]")
        if len(set(self.alphabet)) != len(self.alphabet) or not self.alphabet:
            raise ValueError("alphabet must be a nonempty tuple of distinct labels")
        if self.codes.shape != (self.m,) * self.k:
            raise ValueError(
                f"codes shape {self.codes.shape} does not match (m,)*k = {(self.m,) * self.k}"
            )
        n = len(self.alphabet)
        if self.m > 0:
            if self.mode == PARTITE:
                if self.codes.min(initial=0) < 0 or self.codes.max(initial=0) >= n:
                    raise ValueError("partite tensor has codes outside the alphabet")
            else:
                inj = injective_mask(self.m, self.k)
                on = self.codes[inj]
                if on.size and (on.min() < 0 or on.max() >= n):
                    raise ValueError("nonpartite tensor has codes outside the alphabet")
                if not np.all(self.codes[~inj] == SENTINEL):
                    raise ValueError("non-injective cells must hold the sentinel")

    @classmethod
    def from_codes(
        cls,
        mode: str,
        k: int,
        m: int,
        alphabet: Sequence,
        codes: np.ndarray,
        budget: int = DEFAULT_CELL_BUDGET,
    ) -> "LabelTensor":
        if m**k > budget:
            raise CellBudgetError(f"m**k = {m**k} exceeds budget {budget}")
        arr = np.ascontiguousarray(np.asarray(codes, dtype=np.int64))
        return cls(mode, k, m, tuple(alphabet), arr)

    @property
    def num_cells(self) -> int:
        return self.m**self.k

    def code_at(self, idx: Sequence[int]) -> int:
        t = check_index_tuple(idx, self.k, self.m)
        return int(self.codes[t])

    def value_at(self, idx: Sequence[int]):
        """Label value at an index tuple; nonpartite tuples must be injective."""
        injective = self.mode == NONPARTITE
        t = check_index_tuple(idx, self.k, self.m, injective=injective)
        c = int(self.codes[t])
        return self.alphabet[c]


@dataclass(frozen=True, eq=False)
class LabeledSample:
    """A sample together with a label tensor of matching shape."""

    sample: Sample
    labels: LabelTensor

    def __post_init__(self):
        s, t = self.sample, self.labels
        if (s.mode, s.k, s.m) != (t.mode, t.k, t.m):
            raise ValueError(
                f"sample {(s.mode, s.k, s.m)} and labels {(t.mode, t.k, t.m)} disagree"
            )

    @property
    def mode(self) -> str:
        return self.sample.mode

    @property
    def k(self) -> int:
        return self.sample.k

    @property
    def m(self) -> int:
        return self.sample.m


@dataclass(frozen=True, eq=False)
class InjectionVector:
    """A tuple of injections into range(m): k of them (partite) or one.

    Subsampling a size-m sample along an InjectionVector of size s yields
    a size-s sample; maps[i][v] is the source index of target index v.
    """

    mode: str
    m: int
    maps: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        _check_mode(self.mode)
        if self.mode == NONPARTITE and len(self.maps) != 1:
            raise ValueError("nonpartite injection vector carries exactly one map")
        if self.mode == PARTITE and not 1 <= len(self.maps) <= MAX_ARITY:
            raise ValueError("partite injection vector needs 1..MAX_ARITY maps")
        sizes = {len(mp) for mp in self.maps}
        if len(sizes) > 1:
            raise ValueError("injection maps have unequal sizes")
        for mp in self.maps:
            check_index_tuple(mp, len(mp), self.m, injective=True)

    @property
    def size(self) -> int:
        return len(self.maps[0])

    @classmethod
    def identity(cls, mode: str, k: int, m: int) -> "InjectionVector":
        n = k if mode == PARTITE else 1
        ident = tuple(range(m))
        return cls(mode, m, (ident,) * n)

    @classmethod
    def top(cls, mode: str, k: int, m: int, s: int) -> "InjectionVector":
        """Injection onto the s largest indices, ascending, on every side."""
        if not 0 <= s <= m:
            raise ValueError(f"size s={s} outside [0, m={m}]")
        n = k if mode == PARTITE else 1
        mp = tuple(range(m - s, m))
        return cls(mode, m, (mp,) * n)

    @classmethod
    def random(
        cls, mode: str, k: int, m: int, s: int, rng: np.random.Generator
    ) -> "InjectionVector":
        if not 0 <= s <= m:
            raise ValueError(f"size s={s} outside [0, m={m}]")
        n = k if mode == PARTITE else 1
        maps = tuple(
            tuple(int(v) for v in rng.choice(m, size=s, replace=False))
            for _ in range(n)
        )
        return cls(mode, m, maps)

    def compose(self, inner: "InjectionVector") -> "InjectionVector":
        """self o inner, sidewise: (self o inner).maps[i][v] = self.maps[i][inner.maps[i][v]]."""
        if inner.mode != self.mode or len(inner.maps) != len(self.maps):
            raise ValueError("injection vectors are not composable")
        if inner.m != self.size:
            raise ValueError(
                f"inner target size {inner.m} does not match outer source size {self.size}"
            )
        maps = tuple(
            tuple(outer[v] for v in inner.maps[i])
            for i, outer in enumerate(self.maps)
        )
        return InjectionVector(self.mode, self.m, maps)


def _subsample_sides(sample: Sample, inj: InjectionVector) -> Sample:
    if sample.mode == PARTITE:
        sides = tuple(
            sample.sides[i][np.asarray(inj.maps[i], dtype=np.intp)]
            for i in range(sample.k)
        )
    else:
        sides = (sample.sides[0][np.asarray(inj.maps[0], dtype=np.intp)],)
    return Sample(sample.mode, sample.k, sides)


def _subsample_labels(tensor: LabelTensor, inj: InjectionVector) -> LabelTensor:
    if tensor.mode == PARTITE:
        maps = [np.asarray(mp, dtype=np.intp) for mp in inj.maps]
    else:
        maps = [np.asarray(inj.maps[0], dtype=np.intp)] * tensor.k
    if tensor.m == 0 or inj.size == 0:
        codes = np.empty((inj.size,) * tensor.k, dtype=np.int64)
        if tensor.mode == NONPARTITE and inj.size > 0:
            codes[~injective_mask(inj.size, tensor.k)] = SENTINEL
    else:
        codes = tensor.codes[np.ix_(*maps)]
    # An injective map composed with an injective tuple stays injective, so
    # sentinels land exactly on the subsample's non-injective cells.
    return LabelTensor(tensor.mode, tensor.k, inj.size, tensor.alphabet, codes)


def subsample(obj, inj: InjectionVector):
    """Restrict a Sample, LabelTensor, or LabeledSample along an InjectionVector.

    Index v of the result is index inj.maps[i][v] of the input (per side in
    partite mode); label cells pull back coordinatewise the same way.
    """
    if isinstance(obj, LabeledSample):
        if obj.mode != inj.mode or inj.m != obj.m:
            raise ValueError("injection vector does not match the labeled sample")
        if obj.mode == PARTITE and len(inj.maps) != obj.k:
            raise ValueError("injection vector arity does not match the sample")
        return LabeledSample(
            _subsample_sides(obj.sample, inj), _subsample_labels(obj.labels, inj)
        )
    if isinstance(obj, Sample):
        if obj.mode != inj.mode or inj.m != obj.m:
            raise ValueError("injection vector does not match the sample")
        if obj.mode == PARTITE and len(inj.maps) != obj.k:
            raise ValueError("injection vector arity does not match the sample")
        return _subsample_sides(obj, inj)
    if isinstance(obj, LabelTensor):
        if obj.mode != inj.mode or inj.m != obj.m:
            raise ValueError("injection vector does not match the tensor")
        if obj.mode == PARTITE and len(inj.maps) != obj.k:
            raise ValueError("injection vector arity does not match the tensor")
        return _subsample_labels(obj, inj)
    raise TypeError(f"cannot subsample object of type {type(obj).__name__}")


@dataclass(frozen=True, eq=False)
class OrderChoice:
    """For every k-subset U of range(m), one ordering of U.

    orders maps the sorted tuple of U to a tuple listing U in the chosen
    order.  Iteration order of orders follows itertools.combinations and
    is deterministic.
    """

    m: int
    k: int
    orders: dict

    def __post_init__(self):
        if not 1 <= self.k <= MAX_ARITY:
            raise ValueError(f"arity k={self.k} outside [1, {MAX_ARITY}]")
        expected = math.comb(self.m, self.k)
        if len(self.orders) != expected:
            raise ValueError(
                f"order choice has {len(self.orders)} subsets, expected C({self.m},{self.k})={expected}"
            )
        for key, val in self.orders.items():
            if tuple(sorted(val)) != key:
                raise ValueError(f"ordering {val} is not a permutation of subset {key}")

    @classmethod
    def canonical(cls, m: int, k: int) -> "OrderChoice":
        """Ascending order on every subset."""
        orders = {u: u for u in itertools.combinations(range(m), k)}
        return cls(m, k, orders)

    @classmethod
    def random(cls, m: int, k: int, rng: np.random.Generator) -> "OrderChoice":
        orders = {}
        for u in itertools.combinations(range(m), k):
            perm = rng.permutation(k)
            orders[u] = tuple(u[p] for p in perm)
        return cls(m, k, orders)

    def order_of(self, subset: Iterable[int]) -> tuple[int, ...]:
        key = tuple(sorted(int(i) for i in subset))
        return self.orders[key]


def canonical_order_choice(m: int, k: int) -> OrderChoice:
    return OrderChoice.canonical(m, k)


def bundle_orientations(tensor: LabelTensor, order: OrderChoice) -> dict:
    """Orientation bundles of a nonpartite tensor.

    Maps each sorted k-subset U to the tuple of label values
    (y[order_of(U) o pi] for pi in enumerate_permutations(k)).  Empty when
    m < k.
    """
    if tensor.mode != NONPARTITE:
        raise ValueError("orientation bundles are defined for nonpartite tensors")
    if (order.m, order.k) != (tensor.m, tensor.k):
        raise ValueError("order choice shape does not match the tensor")
    perms = enumerate_permutations(tensor.k)
    out = {}
    for u, ordering in order.orders.items():
        out[u] = tuple(
            tensor.alphabet[int(tensor.codes[tuple(ordering[p] for p in perm)])]
            for perm in perms
        )
    return out
