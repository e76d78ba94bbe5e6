"""Transition-interval remodeling of dyadic step weights.

Level-k parity stopping relocates the two child averages of each dyadic
interval onto alternating blocks of much finer cells.  At each refinement
the two outermost fine cells at each end of a surviving cell are declared
transition cells: they freeze at the parent's value instead of oscillating,
which smooths the jumps across cell boundaries and makes the output weight
doubling over arbitrary (not only dyadic) intervals, with constant tending
to that of Lebesgue measure as the input's dyadic doubling tends to 1.

Averages transfer exactly: every surviving cell carries the average of the
weight over the dyadic interval its parity address spells out (its
supervisor), so dyadic Muckenhoupt quantities survive the remodeling.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .characteristics import quadratic_ap_functional
from .dyadic import (
    DyadicInterval,
    StepWeight1D,
    averages_at,
    unit_interval,
)
from .seed import SeedPair

__all__ = [
    "ScheduleK",
    "TransitionLedger",
    "OscFunction",
    "level_stopping",
    "transition_family",
    "supervisor_of",
    "osc_build",
    "remodel_weight",
    "RemodelTransplant",
    "remodel_transplant_check",
    "locally_constant_witness",
    "tau_doubling_weight",
    "sampled_doubling_ratio",
    "tensor_doubling_sample",
    "choose_schedule",
]

# per-level refinement cap and total materialized depth guard
K_CAP = 20
TOTAL_LEVEL_CAP = 22


@dataclass(frozen=True)
class ScheduleK:
    """Refinement schedule: level t splits each cell into 2^k[t] subcells.

    k[0] is always 0 (the unit cell itself); m is the step level of the
    weights being remodeled (they are constant on cells of length 2^-m).
    """

    k: tuple[int, ...]
    m: int

    def __init__(self, k: Sequence[int], m: int):
        object.__setattr__(self, "k", tuple(int(v) for v in k))
        object.__setattr__(self, "m", int(m))
        if not self.k or self.k[0] != 0:
            raise ValueError("schedule must start with k[0] = 0")
        if any(v < 1 for v in self.k[1:]):
            raise ValueError("refinement depths must be positive")
        if any(v > K_CAP for v in self.k[1:]):
            raise ValueError(f"refinement depth exceeds cap {K_CAP}")
        if self.m < 0:
            raise ValueError("step level m must be nonnegative")

    @property
    def depth(self) -> int:
        return len(self.k) - 1

    def cumulative(self, t: int) -> int:
        """Dyadic level of the grid at stage t."""
        if not 0 <= t <= self.depth:
            raise ValueError("stage outside the schedule")
        return sum(self.k[: t + 1])

    def to_json_dict(self) -> dict:
        return {"k": list(self.k), "m": self.m}

    @classmethod
    def from_json_dict(cls, d: dict) -> "ScheduleK":
        return cls(d["k"], d["m"])


def level_stopping(
    I: DyadicInterval, k: int
) -> tuple[list[DyadicInterval], list[DyadicInterval]]:
    """Depth-k cells of I split by parity: left children first, right second."""
    if k < 1:
        raise ValueError("k must be at least 1")
    cells = I.subintervals(k)
    return cells[0::2], cells[1::2]


def _transition_positions(k: int) -> tuple[int, int, int, int]:
    # the two cells at each end of the 2^k block
    return (0, 1, (1 << k) - 2, (1 << k) - 1)


def transition_family(
    surviving: Sequence[DyadicInterval], k_next: int
) -> tuple[list[DyadicInterval], list[DyadicInterval]]:
    """Split the depth-k_next children of surviving cells into transitions and keepers.

    Transitions are the two outermost children at each end of every surviving
    cell (their dyadic parents touch its boundary).  k_next = 2 is degenerate
    (every child is a transition, nothing survives) but well defined.
    """
    if k_next < 2:
        raise ValueError("refinement depth below 2 leaves no transition structure")
    tset = set(_transition_positions(k_next))
    transitions: list[DyadicInterval] = []
    keepers: list[DyadicInterval] = []
    for Q in surviving:
        for pos, child in enumerate(Q.subintervals(k_next)):
            if pos in tset:
                transitions.append(child)
            else:
                keepers.append(child)
    return transitions, keepers


@dataclass
class TransitionLedger:
    """Surviving grid and transition cells per stage, within [0,1).

    khat[t] and transitions[t] hold cell indices at dyadic level
    schedule.cumulative(t); transitions[0] is empty by convention.
    """

    schedule: ScheduleK
    khat: list[np.ndarray] = field(default_factory=list)
    transitions: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def build(cls, schedule: ScheduleK, depth: int | None = None) -> "TransitionLedger":
        if depth is None:
            depth = schedule.depth
        if depth > schedule.depth:
            raise ValueError("ledger depth exceeds the schedule")
        if schedule.cumulative(depth) > TOTAL_LEVEL_CAP:
            raise ValueError(
                f"grid level {schedule.cumulative(depth)} exceeds cap {TOTAL_LEVEL_CAP}"
            )
        khat = [np.zeros(1, dtype=np.int64)]
        transitions = [np.empty(0, dtype=np.int64)]
        for t in range(1, depth + 1):
            k = schedule.k[t]
            if k < 2:
                raise ValueError("refinement depth below 2 has no transition structure")
            parents = khat[t - 1]
            offs = np.arange(1 << k, dtype=np.int64)
            cells = ((parents[:, None] << k) + offs[None, :]).ravel()
            pos = cells & ((1 << k) - 1)
            is_trans = (pos <= 1) | (pos >= (1 << k) - 2)
            transitions.append(cells[is_trans])
            khat.append(cells[~is_trans])
        return cls(schedule=schedule, khat=khat, transitions=transitions)

    @property
    def depth(self) -> int:
        return len(self.khat) - 1

    def khat_intervals(self, t: int) -> list[DyadicInterval]:
        lev = self.schedule.cumulative(t)
        return [DyadicInterval(lev, int(i)) for i in self.khat[t]]

    def transition_intervals(self, t: int) -> list[DyadicInterval]:
        lev = self.schedule.cumulative(t)
        return [DyadicInterval(lev, int(i)) for i in self.transitions[t]]

    def transition_mass(self) -> float:
        total = 0.0
        for t in range(1, self.depth + 1):
            total += self.transitions[t].size * 2.0 ** (-self.schedule.cumulative(t))
        return total

    def to_json_dict(self) -> dict:
        return {
            "schedule": self.schedule.to_json_dict(),
            "levels": [
                {
                    "t": t,
                    "grid_level": self.schedule.cumulative(t),
                    "surviving_count": int(self.khat[t].size),
                    "transitions": [int(i) for i in self.transitions[t]],
                }
                for t in range(self.depth + 1)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def _supervisor_chain(
    n: np.ndarray, schedule: ScheduleK, ell: int, L: int
) -> tuple[np.ndarray, np.ndarray]:
    """Supervisor level and index per cell index n at dyadic level L.

    Follows parity bits through the grid stages; a cell whose stage-t
    ancestor is a transition cell freezes at the stage-(t-1) supervisor.
    """
    sup_idx = np.zeros(n.shape, dtype=np.int64)
    sup_lev = np.full(n.shape, 0, dtype=np.int64)
    frozen = np.zeros(n.shape, dtype=bool)
    for t in range(1, ell + 1):
        k = schedule.k[t]
        K_t = schedule.cumulative(t)
        anc = n >> (L - K_t)
        pos = anc & ((1 << k) - 1)
        is_trans = (~frozen) & ((pos <= 1) | (pos >= (1 << k) - 2))
        frozen |= is_trans  # supervisor stays at the parent stage
        live = ~frozen
        sup_idx[live] = (sup_idx[live] << 1) | (anc[live] & 1)
        sup_lev[live] = t
    return sup_lev, sup_idx


def supervisor_of(J: DyadicInterval, schedule: ScheduleK, t: int) -> DyadicInterval:
    """Supervisor of a stage-t grid cell (reduced mod 1 for periodic queries)."""
    K_t = schedule.cumulative(t)
    if J.level != K_t:
        raise ValueError("cell level does not match the stage grid")
    J = J.mod_unit()
    lev, idx = _supervisor_chain(
        np.array([J.index], dtype=np.int64), schedule, t, K_t
    )
    if int(lev[0]) != t:
        raise ValueError("cell lies inside a transition cell; no stage-t supervisor")
    return DyadicInterval(t, int(idx[0]))


@dataclass
class OscFunction:
    """One stage's oscillation pattern below a single dyadic root.

    Values live in {-1, 0, +1} on the next stage's cells: -1/+1 alternate on
    the surviving cells supervised by the root, 0 on transition cells and
    everywhere else.  Extends 1-periodically.
    """

    root: DyadicInterval
    stage: int
    weight: StepWeight1D

    def integral(self) -> float:
        return self.weight.integral()

    def to_csv_rows(self) -> list[tuple[float, float]]:
        n = 1 << self.weight.base_level
        return [(i / n, float(v)) for i, v in enumerate(self.weight.values)]


def osc_build(R: DyadicInterval, ledger: TransitionLedger, t: int) -> OscFunction:
    """Oscillation pattern at stage t+1 over the stage-t cells supervised by R."""
    schedule = ledger.schedule
    if not 0 <= t <= ledger.depth - 1:
        raise ValueError("ledger not built through the requested stage")
    if R.level != t or not unit_interval().contains(R):
        raise ValueError("root must be a level-t dyadic subinterval of [0,1)")
    k = schedule.k[t + 1]
    L_next = schedule.cumulative(t + 1)
    vals = np.zeros(1 << L_next, dtype=np.float64)
    cells = ledger.khat[t]
    lev, sup = _supervisor_chain(cells, schedule, t, schedule.cumulative(t))
    mine = cells[sup == R.index]
    tset = _transition_positions(k)
    pattern = np.empty(1 << k, dtype=np.float64)
    pattern[0::2] = -1.0
    pattern[1::2] = +1.0
    pattern[list(tset)] = 0.0
    for c in mine:
        vals[(c << k) : ((c + 1) << k)] = pattern
    return OscFunction(root=R, stage=t, weight=StepWeight1D(L_next, vals, periodic=True))


def remodel_weight(G: StepWeight1D, schedule: ScheduleK, ell: int) -> StepWeight1D:
    """The remodeled weight after ell stages, as a periodic step function.

    Every cell's value is the average of G over the supervisor its parity
    address spells out; cells below a transition cell keep the value frozen
    at the transition's parent stage.  Raises if the result is not strictly
    positive (only possible for signed input).
    """
    if not 0 <= ell <= schedule.depth:
        raise ValueError("stage outside the schedule")
    L = schedule.cumulative(ell)
    if L > TOTAL_LEVEL_CAP:
        raise ValueError(f"grid level {L} exceeds cap {TOTAL_LEVEL_CAP}")
    n = np.arange(1 << L, dtype=np.int64)
    sup_lev, sup_idx = _supervisor_chain(n, schedule, ell, L)
    vals = averages_at(G, sup_lev, sup_idx)
    if np.any(vals <= 0.0):
        raise ValueError("remodeled weight not strictly positive")
    return StepWeight1D(L, vals, periodic=True)


@dataclass
class RemodelTransplant:
    """Both sides of the coefficient-transplant identity after remodeling."""

    value_remodeled: float
    value_reference: float
    value_seed: float
    fractions: list[float]
    fractions_analytic: list[float]

    @property
    def rel_err(self) -> float:
        return abs(self.value_remodeled - self.value_reference) / abs(
            self.value_reference
        )

    @property
    def eps_meas(self) -> float:
        return 1.0 - min(self.fractions)

    def retention_holds(self, p: float, eps: float | None = None) -> bool:
        budget = (1.0 - min(self.fractions)) ** (1.0 / p) if eps is None else 1.0 - eps
        return self.value_remodeled >= budget * self.value_seed


def _surviving_fractions_analytic(schedule: ScheduleK, depth: int) -> list[float]:
    # per stage, a surviving cell keeps 2^(k-1) - 2 of its 2^k children on
    # each parity side: the supervised fraction shrinks by 1 - 2^(2-k)
    fracs = []
    f = 1.0
    for t in range(1, depth + 1):
        f *= 1.0 - 2.0 ** (2 - schedule.k[t])
        fracs.append(f)
    return fracs


def remodel_transplant_check(
    sigma: StepWeight1D,
    omega: StepWeight1D,
    schedule: ScheduleK,
    p: float,
    family: list[DyadicInterval],
    coeffs: list[float],
) -> RemodelTransplant:
    """Evaluate the transplanted quadratic ratio on the remodeled pair two ways.

    The remodeled side runs the production functional on the remodeled
    weights over all surviving cells supervised by the (nested, descending)
    family, each cell inheriting its supervisor's coefficient.  The reference
    side is the closed form in the original masses scaled by the surviving
    fractions.  Also reports the plain functional value on the input pair,
    for retention comparisons.
    """
    if not family:
        raise ValueError("empty coefficient family")
    for j, I in enumerate(family):
        if I.level != j + 1:
            raise ValueError("family member j must sit at dyadic level j+1")
    for A, B in zip(family, family[1:]):
        if not A.contains(B):
            raise ValueError("family must be nested, coarse to fine")
    depth = len(family)
    if depth > schedule.depth:
        raise ValueError("family deeper than the schedule")
    ledger = TransitionLedger.build(schedule, depth)
    sigma_hat = remodel_weight(sigma, schedule, depth)
    omega_hat = remodel_weight(omega, schedule, depth)

    flat_intervals: list[DyadicInterval] = []
    flat_coeffs: list[float] = []
    fractions: list[float] = []
    for j, (I, a) in enumerate(zip(family, coeffs), start=1):
        cells = ledger.khat[j]
        lev = schedule.cumulative(j)
        _, sup = _supervisor_chain(cells, schedule, j, lev)
        mine = cells[sup == I.index]
        if mine.size == 0:
            raise ValueError("no surviving cells supervised by a family member")
        flat_intervals.extend(DyadicInterval(lev, int(c)) for c in mine)
        flat_coeffs.extend([a] * mine.size)
        fractions.append(mine.size * 2.0 ** (-lev) / float(I.length))

    remodeled = quadratic_ap_functional(
        sigma_hat, omega_hat, p, flat_intervals, flat_coeffs
    ).value
    seed_value = quadratic_ap_functional(sigma, omega, p, family, coeffs).value

    c = [a * a * sigma.average(I) ** 2 for a, I in zip(coeffs, family)]
    t_ = [a * a for a in coeffs]
    w_masses = [fractions[j] * omega.mass(family[j]) for j in range(depth)] + [0.0]
    s_masses = [fractions[j] * sigma.mass(family[j]) for j in range(depth)] + [0.0]
    num_p = den_p = 0.0
    run_c = run_t = 0.0
    for j in range(depth):
        run_c += c[j]
        run_t += t_[j]
        num_p += run_c ** (p / 2.0) * (w_masses[j] - w_masses[j + 1])
        den_p += run_t ** (p / 2.0) * (s_masses[j] - s_masses[j + 1])
    reference = (num_p ** (1.0 / p)) / (den_p ** (1.0 / p))
    return RemodelTransplant(
        value_remodeled=remodeled,
        value_reference=reference,
        value_seed=seed_value,
        fractions=fractions,
        fractions_analytic=_surviving_fractions_analytic(schedule, depth),
    )


def _intersecting_transitions(
    ledger: TransitionLedger, a: float, length: float, t_hi: int
) -> list[tuple[int, DyadicInterval]]:
    """Transition cells of stages 1..t_hi meeting [a, a+length) mod 1, with stage."""
    pieces = []
    a -= math.floor(a)
    b = a + length
    if b <= 1.0:
        pieces.append((a, b))
    else:
        pieces.append((a, 1.0))
        pieces.append((0.0, b - 1.0))
    found = []
    for t in range(1, t_hi + 1):
        lev = ledger.schedule.cumulative(t)
        h = 2.0**-lev
        for i in ledger.transitions[t]:
            lo, hi = i * h, (i + 1) * h
            for pa, pb in pieces:
                if lo < pb and pa < hi:
                    found.append((t, DyadicInterval(lev, int(i))))
                    break
    return found


def locally_constant_witness(
    Q: tuple[float, float], schedule: ScheduleK, ledger: TransitionLedger | None = None
) -> DyadicInterval:
    """A grid cell whose supervisor average matches the remodeled weight on Q.

    Q is an arbitrary real interval (a, b).  The returned cell Q* satisfies:
    every value the stage-t remodeled weight takes on Q is the average of the
    input over a dyadic interval within three generations of supr(Q*), where
    t is the first stage whose cells are no longer than Q.
    """
    a, b = float(Q[0]), float(Q[1])
    if not b > a:
        raise ValueError("empty interval")
    length = b - a
    t = 0
    while 2.0 ** (-schedule.cumulative(t)) > length and t < schedule.depth:
        t += 1
    if t <= 1:
        return unit_interval()
    if ledger is None:
        ledger = TransitionLedger.build(schedule, t)
    hits = _intersecting_transitions(ledger, a, length, t - 1)
    if not hits:
        lev = schedule.cumulative(t - 2)
        start = a - math.floor(a)
        cell = DyadicInterval(lev, int(start * (1 << lev)))
        return cell
    if len(hits) == 1:
        s, T = hits[0]
        return T.ancestor(schedule.k[s])  # grid parent of the transition cell
    # two (or more) transition cells: take the lowest common grid ancestor
    parents = [T.ancestor(schedule.k[s]) for s, T in hits]
    common = parents[0]
    for P in parents[1:]:
        while not common.contains(P):
            if common.level == 0:
                return unit_interval()
            # climb grid stages
            stage = next(
                u for u in range(schedule.depth + 1)
                if schedule.cumulative(u) == common.level
            )
            if stage == 0:
                return unit_interval()
            common = common.ancestor(schedule.k[stage])
    return common


def tau_doubling_weight(tau: float, base_level: int, rng: np.random.Generator) -> StepWeight1D:
    """A random weight whose child averages differ from the parent by at most tau.

    Multiplicative cascade: each child average is the parent's times
    1 +- tau*u with u uniform in [0,1), independently per cell.
    """
    if not 0.0 <= tau < 0.5:
        raise ValueError("tau must lie in [0, 1/2)")
    vals = np.ones(1, dtype=np.float64)
    for _ in range(base_level):
        u = tau * rng.uniform(0.0, 1.0, size=vals.size)
        out = np.empty(2 * vals.size, dtype=np.float64)
        out[0::2] = vals * (1.0 - u)
        out[1::2] = vals * (1.0 + u)
        vals = out
    return StepWeight1D(base_level, vals, periodic=True)


def sampled_doubling_ratio(
    G: StepWeight1D,
    n_samples: int,
    rng: np.random.Generator,
    min_len: float | None = None,
    max_len: float = 0.25,
) -> float:
    """Max of mass(2Q)/mass(Q) over sampled concentric interval pairs.

    Centers are uniform, lengths log-uniform; endpoints are generically
    non-dyadic, probing the continuous doubling behavior.
    """
    if not G.periodic:
        raise ValueError("continuous doubling needs the periodic extension")
    if min_len is None:
        min_len = 2.0 ** (-G.base_level)
    centers = rng.uniform(0.0, 1.0, size=n_samples)
    lengths = np.exp(
        rng.uniform(math.log(min_len), math.log(max_len), size=n_samples)
    )
    worst = 1.0
    for c, h in zip(centers, lengths):
        small = G.range_mass(c - h / 2.0, c + h / 2.0)
        big = G.range_mass(c - h, c + h)
        if small > 0.0:
            worst = max(worst, big / small)
    return worst


def tensor_doubling_sample(
    G: StepWeight1D,
    n_samples: int,
    rng: np.random.Generator,
    min_len: float | None = None,
    max_len: float = 0.25,
) -> float:
    """Max sampled doubling ratio of the planar product weight G(x1) dx1 dx2.

    Doubling a square doubles the vertical side exactly, so each sample
    contributes twice the horizontal mass ratio; the Lebesgue value is 4.
    """
    if not G.periodic:
        raise ValueError("continuous doubling needs the periodic extension")
    if min_len is None:
        min_len = 2.0 ** (-G.base_level)
    centers = rng.uniform(0.0, 1.0, size=n_samples)
    lengths = np.exp(
        rng.uniform(math.log(min_len), math.log(max_len), size=n_samples)
    )
    worst = 1.0
    for c, h in zip(centers, lengths):
        small = G.range_mass(c - h / 2.0, c + h / 2.0)
        big = G.range_mass(c - h, c + h)
        if small > 0.0:
            worst = max(worst, 2.0 * big / small)
    return worst


def choose_schedule(
    pair: SeedPair,
    p: float,
    eps: float,
    t_max: int,
    checks: Sequence[Callable[[ScheduleK], bool]],
    k_cap: int = K_CAP,
) -> ScheduleK:
    """Greedy schedule search: smallest refinement passing every check per stage.

    Candidates double from 2 up to the cap.  A candidate is accepted when the
    transplanted quadratic ratio provably retains a (1 - eps) share of the
    input value (via the surviving-fraction closed form) and every supplied
    evaluator approves the partial schedule.  Raises if the cap is reached
    with a failing check.
    """
    if t_max < 1:
        raise ValueError("t_max must be at least 1")
    seed_value = quadratic_ap_functional(
        pair.sigma, pair.omega, p, pair.I, pair.a
    ).value
    k: list[int] = [0]
    candidates = [2, 4, 8, 16]
    if k_cap not in candidates:
        candidates = [c for c in candidates if c < k_cap] + [k_cap]
    for t in range(1, t_max + 1):
        accepted = None
        failure = ""
        for cand in candidates:
            trial = ScheduleK(k + [cand], pair.sigma.base_level)
            fracs = _surviving_fractions_analytic(trial, t)
            # retention lower bound: the numerator keeps at least the worst
            # surviving fraction and the denominator never grows
            retained = min(fracs) ** (1.0 / p) * seed_value
            if retained < (1.0 - eps) * seed_value:
                failure = f"stage {t}: retention bound below 1 - eps at k = {cand}"
                continue
            bad = next(
                (i for i, chk in enumerate(checks) if not chk(trial)), None
            )
            if bad is not None:
                failure = f"stage {t}: evaluator {bad} rejected k = {cand}"
                continue
            accepted = cand
            break
        if accepted is None:
            raise RuntimeError(
                f"no refinement depth up to {k_cap} passes all checks ({failure})"
            )
        k.append(accepted)
    return ScheduleK(k, pair.sigma.base_level)
