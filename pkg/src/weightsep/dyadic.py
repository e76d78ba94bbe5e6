"""Exact dyadic-interval combinatorics and piecewise-constant weights on [0,1).

The half-open interval [k 2^{-level}, (k+1) 2^{-level}) is represented by the
integer pair (level, index); all tree operations (parent, children, nesting)
are integer arithmetic and therefore exact.  Weights are step functions with
cells of width 2^{-base_level} carrying double-precision values, optionally
extended 1-periodically to the whole line.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "DyadicInterval",
    "StepWeight1D",
    "HaarCoefficientTable",
    "doubling_ratio",
    "dyadic_level",
    "unit_interval",
]


@dataclass(frozen=True, order=True)
class DyadicInterval:
    """Half-open dyadic interval [index*2^-level, (index+1)*2^-level).

    Negative levels (length > 1) and negative indices are permitted; every
    operation is closed over all integers.
    """

    level: int
    index: int

    @property
    def length(self) -> Fraction:
        return Fraction(1, 1) * Fraction(2) ** (-self.level)

    @property
    def left(self) -> Fraction:
        return self.index * self.length

    @property
    def right(self) -> Fraction:
        return (self.index + 1) * self.length

    def parent(self) -> "DyadicInterval":
        # floor division handles negative indices correctly
        return DyadicInterval(self.level - 1, self.index >> 1)

    def children(self) -> tuple["DyadicInterval", "DyadicInterval"]:
        """Left and right halves (I_minus, I_plus); they partition self."""
        return (
            DyadicInterval(self.level + 1, 2 * self.index),
            DyadicInterval(self.level + 1, 2 * self.index + 1),
        )

    def sibling(self) -> "DyadicInterval":
        return DyadicInterval(self.level, self.index ^ 1)

    def is_right_child(self) -> bool:
        return bool(self.index & 1)

    def contains(self, other: "DyadicInterval") -> bool:
        """Nesting test: self contains other (possibly equal)."""
        if other.level < self.level:
            return False
        return (other.index >> (other.level - self.level)) == self.index

    def disjoint(self, other: "DyadicInterval") -> bool:
        return not (self.contains(other) or other.contains(self))

    def ancestor(self, levels_up: int) -> "DyadicInterval":
        if levels_up < 0:
            raise ValueError("levels_up must be nonnegative")
        return DyadicInterval(self.level - levels_up, self.index >> levels_up)

    def child_bits_of(self, descendant: "DyadicInterval") -> list[int]:
        """The left/right (0/1) choices leading from self down to descendant."""
        if not self.contains(descendant):
            raise ValueError("not a descendant")
        n = descendant.level - self.level
        return [(descendant.index >> (n - 1 - i)) & 1 for i in range(n)]

    def descendant(self, bits: Sequence[int]) -> "DyadicInterval":
        idx = self.index
        for b in bits:
            idx = 2 * idx + (b & 1)
        return DyadicInterval(self.level + len(bits), idx)

    def subintervals(self, depth: int) -> list["DyadicInterval"]:
        """All 2^depth descendants exactly depth levels below, left to right."""
        if depth < 0:
            raise ValueError("depth must be nonnegative")
        base = self.index << depth
        return [DyadicInterval(self.level + depth, base + j) for j in range(2**depth)]

    def mod_unit(self) -> "DyadicInterval":
        """Translate by an integer so the result lies in [0,1); needs level >= 0."""
        if self.level < 0:
            raise ValueError("interval longer than the period")
        return DyadicInterval(self.level, self.index % (1 << self.level))

    def __repr__(self) -> str:  # pragma: no cover - debug aid
        return f"[{self.left}, {self.right})"


def unit_interval() -> DyadicInterval:
    return DyadicInterval(0, 0)


def dyadic_level(level: int, within: DyadicInterval | None = None) -> list[DyadicInterval]:
    """All intervals of length 2^-level inside `within` (default [0,1))."""
    root = within if within is not None else unit_interval()
    return root.subintervals(level - root.level)


class StepWeight1D:
    """Step function on [0,1) with 2^base_level equal cells.

    Positive-valued instances model weights; signed values are allowed so the
    same carrier serves as a test-function type.  When `periodic` is set the
    function extends 1-periodically to the line and masses of intervals
    outside [0,1) are defined through that extension; otherwise the function
    is 0 outside [0,1).
    """

    __slots__ = ("base_level", "values", "periodic", "_prefix")

    def __init__(self, base_level: int, values: Sequence[float], periodic: bool = False):
        if base_level < 0:
            raise ValueError("base_level must be nonnegative")
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape != (1 << base_level,):
            raise ValueError(
                f"expected {1 << base_level} cell values, got {arr.shape}"
            )
        self.base_level = int(base_level)
        self.values = arr
        self.values.setflags(write=False)
        self.periodic = bool(periodic)
        # prefix sums make arbitrary dyadic masses O(1)
        self._prefix = np.concatenate(([0.0], np.cumsum(arr)))

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, value: float, base_level: int = 0, periodic: bool = False) -> "StepWeight1D":
        return cls(base_level, np.full(1 << base_level, float(value)), periodic)

    @classmethod
    def from_json_dict(cls, d: dict) -> "StepWeight1D":
        return cls(int(d["base_level"]), d["values"], bool(d["periodic"]))

    def to_json_dict(self) -> dict:
        return {
            "base_level": self.base_level,
            "values": [float(v) for v in self.values],
            "periodic": self.periodic,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    # -- basic queries -------------------------------------------------------

    def require_weight(self) -> "StepWeight1D":
        """Assert strict positivity (weight semantics); returns self."""
        if not np.all(self.values > 0.0):
            raise ValueError("weight must be strictly positive on every cell")
        return self

    def integral(self) -> float:
        """Integral over one period [0,1) = mean of cell values."""
        return float(self._prefix[-1]) / (1 << self.base_level)

    def value_at(self, x: float) -> float:
        """Pointwise value; periodic extension or 0 outside [0,1)."""
        if self.periodic:
            x = x - math.floor(x)
        if not (0.0 <= x < 1.0):
            return 0.0
        i = min(int(x * (1 << self.base_level)), (1 << self.base_level) - 1)
        return float(self.values[i])

    def _cell_range_sum(self, i0: int, i1: int) -> float:
        """Sum of cell values over base-cell indices [i0, i1), with extension."""
        n = 1 << self.base_level
        if i0 >= i1:
            return 0.0
        if self.periodic:
            total = float(self._prefix[-1])
            full, r0 = divmod(i0, n)
            full1, r1 = divmod(i1, n)
            return (full1 - full) * total + float(self._prefix[r1] - self._prefix[r0])
        i0 = max(i0, 0)
        i1 = min(i1, n)
        if i0 >= i1:
            return 0.0
        return float(self._prefix[i1] - self._prefix[i0])

    def mass(self, I: DyadicInterval) -> float:
        """Integral of the step function over I (exact cell arithmetic)."""
        if I.level >= self.base_level:
            # I sits inside a single cell
            shift = I.level - self.base_level
            cell = I.index >> shift
            n = 1 << self.base_level
            if self.periodic:
                cell %= n
            elif not (0 <= cell < n):
                return 0.0
            return float(self.values[cell]) * 2.0 ** (-I.level)
        # I is a union of whole cells
        k = self.base_level - I.level
        return self._cell_range_sum(I.index << k, (I.index + 1) << k) * 2.0 ** (-self.base_level)

    def average(self, I: DyadicInterval) -> float:
        return self.mass(I) * 2.0 ** I.level

    def _cell_value(self, i: int) -> float:
        n = 1 << self.base_level
        if self.periodic:
            return float(self.values[i % n])
        if 0 <= i < n:
            return float(self.values[i])
        return 0.0

    def range_mass(self, a: float, b: float) -> float:
        """Integral over the real interval [a, b), endpoints not necessarily dyadic."""
        if b <= a:
            return 0.0
        if not self.periodic:
            a, b = max(a, 0.0), min(b, 1.0)
            if b <= a:
                return 0.0
        n = 1 << self.base_level
        ia, ib = math.floor(a * n), math.floor(b * n)
        if ia == ib:
            return (b - a) * self._cell_value(ia)
        head = ((ia + 1) / n - a) * self._cell_value(ia)
        tail = (b - ib / n) * self._cell_value(ib)
        mid = self._cell_range_sum(ia + 1, ib) / n
        return head + mid + tail

    # -- martingale structure --------------------------------------------------

    def martingale_project(self, t: int) -> "StepWeight1D":
        """E_t: replace the function by its averages on the level-t tiling."""
        if t < 0:
            raise ValueError("t must be nonnegative")
        if t >= self.base_level:
            return self
        k = self.base_level - t
        coarse = self.values.reshape(1 << t, 1 << k).mean(axis=1)
        return StepWeight1D(t, coarse, self.periodic)

    def refine(self, t: int) -> "StepWeight1D":
        """Re-express on the finer level-t tiling (values repeated)."""
        if t < self.base_level:
            raise ValueError("refine target coarser than base_level")
        if t == self.base_level:
            return self
        rep = np.repeat(self.values, 1 << (t - self.base_level))
        return StepWeight1D(t, rep, self.periodic)

    def haar_coefficient(self, I: DyadicInterval) -> float:
        """<G, h_I> with h_I = |I|^{-1/2} (1_{I_+} - 1_{I_-})."""
        if not self.periodic and not unit_interval().contains(I):
            raise ValueError("interval outside [0,1) for a non-periodic weight")
        lo, hi = I.children()
        scale = 2.0 ** (I.level / 2.0)  # |I|^{-1/2}
        return scale * (self.mass(hi) - self.mass(lo))

    def with_periodic(self, periodic: bool = True) -> "StepWeight1D":
        return StepWeight1D(self.base_level, self.values, periodic)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, StepWeight1D)
            and self.base_level == other.base_level
            and self.periodic == other.periodic
            and bool(np.array_equal(self.values, other.values))
        )

    def __repr__(self) -> str:  # pragma: no cover - debug aid
        return f"StepWeight1D(base_level={self.base_level}, periodic={self.periodic})"


class HaarCoefficientTable:
    """All Haar coefficients <G, h_I> for I at levels < base_level.

    Together with the mean this is an exact re-encoding of the step function:
    `reconstruct` inverts it to relative error ~1e-16 per cell.
    """

    def __init__(self, coefficients: dict[DyadicInterval, float], mean: float, base_level: int):
        self.coefficients = dict(coefficients)
        self.mean = float(mean)
        self.base_level = int(base_level)

    @classmethod
    def build(cls, G: StepWeight1D) -> "HaarCoefficientTable":
        coeffs: dict[DyadicInterval, float] = {}
        for lev in range(G.base_level):
            for I in dyadic_level(lev):
                coeffs[I] = G.haar_coefficient(I)
        return cls(coeffs, G.integral(), G.base_level)

    def reconstruct(self) -> StepWeight1D:
        n = 1 << self.base_level
        vals = np.full(n, self.mean, dtype=np.float64)
        for I, c in self.coefficients.items():
            # h_I takes value -/+ |I|^{-1/2} on the left/right child
            amp = c * 2.0 ** (I.level / 2.0)
            k = self.base_level - I.level - 1
            lo, hi = I.children()
            vals[lo.index << k : (lo.index + 1) << k] -= amp
            vals[hi.index << k : (hi.index + 1) << k] += amp
        return StepWeight1D(self.base_level, vals)


def doubling_ratio(G: StepWeight1D, family: Iterable[DyadicInterval]) -> float:
    """Max over the family of the sibling-children mass ratio (both ways).

    Finite max, exact in cell arithmetic.  Raises on an empty family.
    """
    best = None
    for J in family:
        lo, hi = J.children()
        a, b = G.mass(lo), G.mass(hi)
        if a <= 0.0 or b <= 0.0:
            ratio = math.inf
        else:
            ratio = max(a / b, b / a)
        best = ratio if best is None else max(best, ratio)
    if best is None:
        raise ValueError("empty interval family")
    return best


def iter_all_dyadic(max_level: int, within: DyadicInterval | None = None) -> Iterator[DyadicInterval]:
    """Every dyadic interval of level 0..max_level inside `within` ([0,1) default)."""
    root = within if within is not None else unit_interval()
    for lev in range(root.level, max_level + 1):
        yield from root.subintervals(lev - root.level)


def averages_at(G: StepWeight1D, lev: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Averages of G over the dyadic intervals (lev[i], idx[i]), vectorized.

    Intervals must lie inside [0,1) (indices in range at their level).
    Coarse averages come from a pairwise-summed pyramid so each result is
    accurate relative to its own magnitude; a single global prefix would
    leak rounding error from large cells into small ones.
    """
    Gb = G.base_level
    vals = np.asarray(G.values, dtype=np.float64)
    out = np.empty(lev.shape, dtype=np.float64)
    fine = lev >= Gb
    if np.any(fine):
        li, ii = lev[fine], idx[fine]
        out[fine] = vals[ii >> (li - Gb)]
    coarse = ~fine
    if np.any(coarse):
        tier = vals
        for q in range(Gb - 1, -1, -1):
            tier = tier[0::2] + tier[1::2]
            take = coarse & (lev == q)
            if np.any(take):
                out[take] = tier[idx[take]] / float(1 << (Gb - q))
    return out
