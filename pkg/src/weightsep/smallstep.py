"""Random-walk disarrangement that preserves dyadic averages.

A simple walk on the subtree below a root interval stops at first passage to
+-d; each stopped cell receives an affinely transplanted copy of the weight
over the left or right half of a source interval, and the construction
recurses inside the stopped cells.  Iterated stopped cells (roofs) carry the
exact average of the source recorded by the supervisor bookkeeping, while
sibling mass ratios contract toward 1 as d grows.

The construction is materialized as the exact martingale truncation of the
limiting object at a chosen resolution: every cell average is computed in
closed form from first-passage probabilities (a ruin chain on {-d..d}), so no
sampling is involved.  Finite exploration budgets switch the map to the
identity inside a corona, exactly as the unresolved branch prescribes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .characteristics import quadratic_ap_functional
from .dyadic import DyadicInterval, StepWeight1D, averages_at, unit_interval

__all__ = [
    "truncated_walk",
    "first_passage_tail",
    "ForestEntry",
    "StoppingForest",
    "stopping_family",
    "psi_apply",
    "SupervisorMap",
    "smallstep_disarrange",
    "walk_doubling_ratio",
    "TransplantCheck",
    "transplant_check",
]

# int64 cell indices bound the dense tree depth
MAX_TREE_DEPTH = 60
DEFAULT_NODE_CAP = 4_000_000


def truncated_walk(I: DyadicInterval, k: int) -> np.ndarray:
    """Walk values on the 2^k depth-k cells of I: +1 per right turn, -1 per left."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > MAX_TREE_DEPTH:
        raise ValueError("k too deep for dense enumeration")
    m = np.arange(1 << k, dtype=np.int64)
    pop = np.zeros(1 << k, dtype=np.int64)
    for j in range(k):
        pop += (m >> j) & 1
    return 2 * pop - k


def first_passage_tail(d: int, n: int) -> float:
    """P(|walk| stays below d for n steps), exactly (dyadic rationals).

    The chain lives on {-d+1, ..., d-1}; mass reaching +-d leaves.
    """
    if d < 1 or n < 0:
        raise ValueError("d must be positive and n nonnegative")
    states = 2 * d - 1
    mass = [Fraction(0)] * states
    mass[d - 1] = Fraction(1)  # walk starts at 0
    half = Fraction(1, 2)
    for _ in range(n):
        nxt = [Fraction(0)] * states
        for i, m in enumerate(mass):
            if m == 0:
                continue
            if i - 1 >= 0:
                nxt[i - 1] += m * half
            if i + 1 < states:
                nxt[i + 1] += m * half
        mass = nxt
    return float(sum(mass))


# --------------------------------------------------------------- forests


@dataclass
class ForestEntry:
    """First-passage stopping family below one root."""

    root: DyadicInterval
    d: int
    n_explore: int
    stop_minus: list[DyadicInterval]
    stop_plus: list[DyadicInterval]
    unresolved: list[DyadicInterval]

    @property
    def members(self) -> list[tuple[DyadicInterval, int]]:
        return [(J, -1) for J in self.stop_minus] + [(J, +1) for J in self.stop_plus]

    @property
    def unresolved_mass(self) -> float:
        return float(sum(J.length for J in self.unresolved))

    def resolved_masses(self) -> tuple[float, float]:
        lo = float(sum(J.length for J in self.stop_minus))
        hi = float(sum(J.length for J in self.stop_plus))
        return lo, hi

    def to_json_dict(self) -> dict:
        def enc(J: DyadicInterval) -> dict:
            return {"level": J.level, "index": J.index}

        return {
            "root": enc(self.root),
            "d": self.d,
            "n_explore": self.n_explore,
            "members": [
                {"interval": enc(J), "sign": s} for J, s in self.members
            ],
            "unresolved": [enc(J) for J in self.unresolved],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ForestEntry":
        def dec(e: dict) -> DyadicInterval:
            return DyadicInterval(e["level"], e["index"])

        minus = [dec(m["interval"]) for m in d["members"] if m["sign"] == -1]
        plus = [dec(m["interval"]) for m in d["members"] if m["sign"] == +1]
        return cls(
            root=dec(d["root"]),
            d=d["d"],
            n_explore=d["n_explore"],
            stop_minus=minus,
            stop_plus=plus,
            unresolved=[dec(e) for e in d["unresolved"]],
        )


@dataclass
class StoppingForest:
    """Stopping families per root, sharing a threshold and exploration depth."""

    d: int
    n_explore: int
    entries: dict[DyadicInterval, ForestEntry] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "d": self.d,
            "n_explore": self.n_explore,
            "entries": [e.to_json_dict() for e in self.entries.values()],
        }


def stopping_family(
    I: DyadicInterval,
    d: int,
    n_explore: int,
    node_cap: int = DEFAULT_NODE_CAP,
) -> ForestEntry:
    """Enumerate the first-passage families below I to the exploration depth."""
    if d < 1:
        raise ValueError("threshold d must be positive")
    if n_explore < d:
        raise ValueError("n_explore must be at least d")
    if n_explore > MAX_TREE_DEPTH:
        raise ValueError("n_explore too deep for dense enumeration")
    idx = np.zeros(1, dtype=np.int64)
    v = np.zeros(1, dtype=np.int64)
    minus: list[DyadicInterval] = []
    plus: list[DyadicInterval] = []

    def cells(depth: int, rel: np.ndarray) -> list[DyadicInterval]:
        base = I.index << depth
        return [DyadicInterval(I.level + depth, int(base + r)) for r in rel]

    for depth in range(1, n_explore + 1):
        idx2 = np.empty(2 * idx.size, dtype=np.int64)
        v2 = np.empty(2 * idx.size, dtype=np.int64)
        idx2[0::2] = 2 * idx
        idx2[1::2] = 2 * idx + 1
        v2[0::2] = v - 1
        v2[1::2] = v + 1
        hit_m = v2 == -d
        hit_p = v2 == d
        minus.extend(cells(depth, idx2[hit_m]))
        plus.extend(cells(depth, idx2[hit_p]))
        alive = ~(hit_m | hit_p)
        idx, v = idx2[alive], v2[alive]
        if idx.size + len(minus) + len(plus) > node_cap:
            raise ValueError(
                f"stopping enumeration exceeded {node_cap} nodes at depth {depth}"
            )
        if idx.size == 0:
            break
    return ForestEntry(
        root=I,
        d=d,
        n_explore=n_explore,
        stop_minus=minus,
        stop_plus=plus,
        unresolved=cells(n_explore, idx) if idx.size else [],
    )


# --------------------------------------------------------------- transplant map


_avg_at = averages_at


def psi_apply(I: DyadicInterval, entry: ForestEntry, G: StepWeight1D) -> StepWeight1D:
    """One generation of the transplant map below I: G composed with psi_I.

    Stopped cells receive the affine copy of G over the matching half of I;
    unresolved cells keep G unchanged (identity branch).  Cells outside I are
    untouched.  The result's resolution is refined enough to hold every copy
    exactly.
    """
    if entry.root != I:
        raise ValueError("forest entry was built for a different root")
    members = entry.members
    deepest = max((J.level for J, _ in members), default=I.level + 1)
    rel_detail = max(G.base_level - (I.level + 1), 0)
    L = max(G.base_level, deepest + rel_detail)
    vals = G.refine(L).values.copy()
    halves = I.children()
    for J, sign in members:
        src = halves[0] if sign < 0 else halves[1]
        w = L - J.level
        q = src.level + w
        src_idx = (np.int64(src.index) << w) + np.arange(1 << w, dtype=np.int64)
        copy = _avg_at(G, np.full(src_idx.shape, q, dtype=np.int64), src_idx)
        t0 = J.index << w
        vals[t0 : t0 + (1 << w)] = copy
    return StepWeight1D(L, vals, periodic=G.periodic)


# --------------------------------------------------------------- supervisors


@dataclass
class SupervisorMap:
    """Roof bookkeeping for a finite-resolution disarrangement.

    roof_source maps each corona roof to the seed interval whose average it
    carries; roofs_by_source groups them; corona_parent maps a roof to the
    roof whose stopping family produced it (None for the whole line).
    unresolved_tail bounds the mass on which first passage exceeds the
    exploration budget.
    """

    d: int
    generations: int
    n_explore: int
    resolution: int
    roof_source: dict[DyadicInterval, DyadicInterval]
    roofs_by_source: dict[DyadicInterval, list[DyadicInterval]]
    corona_parent: dict[DyadicInterval, DyadicInterval | None]
    # walk_active[j][i]: the subdivision of cell i at level j is walk-driven
    # (not an affine transplant of source detail)
    walk_active: list[np.ndarray]
    unresolved_tail: float

    def roofs_of(self, I: DyadicInterval) -> list[DyadicInterval]:
        return list(self.roofs_by_source.get(I, []))

    def supervisor_of(self, J: DyadicInterval) -> DyadicInterval | None:
        return self.roof_source.get(J)

    def to_json_dict(self) -> dict:
        def enc(J: DyadicInterval) -> dict:
            return {"level": J.level, "index": J.index}

        return {
            "d": self.d,
            "generations": self.generations,
            "n_explore": self.n_explore,
            "resolution": self.resolution,
            "unresolved_tail": self.unresolved_tail,
            "roofs": [
                {
                    "roof": enc(J),
                    "source": enc(S),
                    "corona_parent": enc(self.corona_parent[J])
                    if self.corona_parent.get(J) is not None
                    else None,
                }
                for J, S in self.roof_source.items()
            ],
        }


def smallstep_disarrange(
    G: StepWeight1D,
    d: int = 8,
    generations: int = 2,
    n_explore: int | None = None,
    resolution: int | None = None,
) -> tuple[StepWeight1D, SupervisorMap]:
    """Finite-resolution disarrangement of G with supervisor bookkeeping.

    Returns the exact martingale truncation of the disarranged weight at the
    chosen resolution together with the roof map.  Each resolved roof J with
    source I satisfies E_J of the result = E_I G in exact cell arithmetic;
    cells strictly inside a corona carry the closed-form ruin mixture of the
    two child averages of their source.
    """
    if d < 1 or generations < 0:
        raise ValueError("d must be positive and generations nonnegative")
    if n_explore is None:
        n_explore = 8 * d * d
    if n_explore < d:
        raise ValueError("n_explore must be at least d")
    if resolution is None:
        resolution = min(max(G.base_level, 2 * d, 12), 20)
    L = resolution
    if L > MAX_TREE_DEPTH:
        raise ValueError("resolution too deep for dense materialization")

    # per-cell state, level by level
    src_lev = np.zeros(1, dtype=np.int64)
    src_idx = np.zeros(1, dtype=np.int64)
    v = np.zeros(1, dtype=np.int64)
    depth = np.zeros(1, dtype=np.int64)
    rel = np.zeros(1, dtype=np.int64)
    gens = np.zeros(1, dtype=np.int64)
    affine = np.zeros(1, dtype=bool)
    root_lev = np.zeros(1, dtype=np.int64)
    root_idx = np.zeros(1, dtype=np.int64)
    if generations == 0:
        affine[:] = True

    unit = unit_interval()
    roof_source: dict[DyadicInterval, DyadicInterval] = {unit: unit}
    roofs_by_source: dict[DyadicInterval, list[DyadicInterval]] = {unit: [unit]}
    corona_parent: dict[DyadicInterval, DyadicInterval | None] = {unit: None}

    walk_active: list[np.ndarray] = []
    for j in range(L):
        n = src_lev.size
        walk_active.append(~affine)

        def split(a: np.ndarray) -> np.ndarray:
            out = np.empty(2 * n, dtype=a.dtype)
            out[0::2] = a
            out[1::2] = a
            return out

        b = np.tile(np.array([0, 1], dtype=np.int64), n)
        src_lev, src_idx = split(src_lev), split(src_idx)
        v, depth, rel = split(v), split(depth), split(rel)
        gens, affine = split(gens), split(affine)
        root_lev, root_idx = split(root_lev), split(root_idx)

        live = ~affine
        # affine branch: descend the source in lockstep
        src_idx[affine] = 2 * src_idx[affine] + b[affine]
        src_lev[affine] += 1
        # walking branch
        v[live] += 2 * b[live] - 1
        depth[live] += 1
        rel[live] = 2 * rel[live] + b[live]

        hit = live & (np.abs(v) == d)
        if np.any(hit):
            side = (v[hit] > 0).astype(np.int64)
            new_src_idx = 2 * src_idx[hit] + side
            new_src_lev = src_lev[hit] + 1
            cell_idx = np.nonzero(hit)[0]
            for c, slv, sid in zip(cell_idx, new_src_lev, new_src_idx):
                roof = DyadicInterval(j + 1, int(c))
                source = DyadicInterval(int(slv), int(sid))
                parent_root = DyadicInterval(int(root_lev[c]), int(root_idx[c]))
                roof_source[roof] = source
                roofs_by_source.setdefault(source, []).append(roof)
                corona_parent[roof] = parent_root
            src_idx[hit] = new_src_idx
            src_lev[hit] = new_src_lev
            v[hit] = 0
            depth[hit] = 0
            rel[hit] = 0
            gens[hit] += 1
            root_lev[hit] = j + 1
            root_idx[hit] = np.nonzero(hit)[0]
            affine[hit] = gens[hit] == generations

        exhausted = live & ~hit & (depth == n_explore)
        if np.any(exhausted):
            # identity inside the corona: jump to the matching source subcell
            src_idx[exhausted] = (src_idx[exhausted] << depth[exhausted]) + rel[
                exhausted
            ]
            src_lev[exhausted] += depth[exhausted]
            affine[exhausted] = True

    # cell averages at the final level
    out = np.empty(src_lev.size, dtype=np.float64)
    aff = affine
    if np.any(aff):
        out[aff] = _avg_at(G, src_lev[aff], src_idx[aff])
    mid = ~aff
    if np.any(mid):
        left = _avg_at(G, src_lev[mid] + 1, 2 * src_idx[mid])
        right = _avg_at(G, src_lev[mid] + 1, 2 * src_idx[mid] + 1)
        vm = v[mid].astype(np.float64)
        out[mid] = ((d - vm) * left + (d + vm) * right) / (2.0 * d)

    tilde = StepWeight1D(L, out, periodic=G.periodic)
    sup = SupervisorMap(
        d=d,
        generations=generations,
        n_explore=n_explore,
        resolution=L,
        roof_source=roof_source,
        roofs_by_source=roofs_by_source,
        corona_parent=corona_parent,
        walk_active=walk_active,
        unresolved_tail=first_passage_tail(d, min(n_explore, 4096)),
    )
    return tilde, sup


def walk_doubling_ratio(tilde: StepWeight1D, sup: SupervisorMap) -> float:
    """Worst sibling mass ratio over walk-driven subdivisions only.

    Affine regions reproduce source detail verbatim, so their sibling ratios
    are those of the input weight regardless of d; the walk's own ratios
    contract toward 1 as d grows, and this measurement isolates them.
    """
    L = sup.resolution
    if tilde.base_level != L:
        raise ValueError("weight resolution does not match the supervisor map")
    tier = np.asarray(tilde.values, dtype=np.float64)
    masses = [tier]
    for _ in range(L):
        tier = tier[0::2] + tier[1::2]
        masses.append(tier)
    masses.reverse()  # masses[j]: cell sums at level j
    worst = 1.0
    for j, active in enumerate(sup.walk_active):
        if not np.any(active):
            continue
        kids = masses[j + 1]
        left = kids[0::2][active]
        right = kids[1::2][active]
        r = np.maximum(left / right, right / left)
        worst = max(worst, float(np.max(r)))
    return worst


# --------------------------------------------------------------- transplant check


@dataclass
class TransplantCheck:
    """Both sides of the coefficient-transplant identity for the quadratic ratio."""

    value_disarranged: float
    value_reference: float
    resolved_fractions: list[float]
    family_depth: int

    @property
    def rel_err(self) -> float:
        ref = self.value_reference
        return abs(self.value_disarranged - ref) / abs(ref)


def transplant_check(
    sigma: StepWeight1D,
    omega: StepWeight1D,
    tilde_sigma: StepWeight1D,
    tilde_omega: StepWeight1D,
    sup: SupervisorMap,
    p: float,
    family: list[DyadicInterval],
    coeffs: list[float],
) -> TransplantCheck:
    """Evaluate the transplanted quadratic ratio two independent ways.

    The disarranged side runs the production functional on the materialized
    weights over all resolved roofs of the (nested, descending) family, with
    each roof inheriting its source's coefficient.  The reference side is the
    closed form in seed masses, with each family member's contribution scaled
    by its resolved roof fraction.  The two agree in exact arithmetic.
    """
    if not family:
        raise ValueError("empty coefficient family")
    for A, B in zip(family, family[1:]):
        if not A.contains(B) or B.level <= A.level:
            raise ValueError("family must be strictly nested, coarse to fine")
    roofsets = []
    trimmed_family = []
    trimmed_coeffs = []
    for I, a in zip(family, coeffs):
        roofs = sup.roofs_of(I)
        if not roofs:
            break
        roofsets.append(roofs)
        trimmed_family.append(I)
        trimmed_coeffs.append(a)
    if not roofsets:
        raise ValueError("no resolved roofs for any family member")

    flat_intervals = [J for roofs in roofsets for J in roofs]
    flat_coeffs = [
        a for roofs, a in zip(roofsets, trimmed_coeffs) for _ in roofs
    ]
    disarranged = quadratic_ap_functional(
        tilde_sigma, tilde_omega, p, flat_intervals, flat_coeffs
    ).value

    fractions = [
        float(sum(J.length for J in roofs)) / float(I.length)
        for roofs, I in zip(roofsets, trimmed_family)
    ]
    m = len(trimmed_family)
    c = [
        a * a * sigma.average(I) ** 2 for a, I in zip(trimmed_coeffs, trimmed_family)
    ]
    t = [a * a for a in trimmed_coeffs]
    w_masses = [
        fractions[i] * omega.mass(trimmed_family[i]) for i in range(m)
    ] + [0.0]
    s_masses = [
        fractions[i] * sigma.mass(trimmed_family[i]) for i in range(m)
    ] + [0.0]
    num_p = 0.0
    den_p = 0.0
    run_c = 0.0
    run_t = 0.0
    for i in range(m):
        run_c += c[i]
        run_t += t[i]
        num_p += run_c ** (p / 2.0) * (w_masses[i] - w_masses[i + 1])
        den_p += run_t ** (p / 2.0) * (s_masses[i] - s_masses[i + 1])
    reference = (num_p ** (1.0 / p)) / (den_p ** (1.0 / p))
    return TransplantCheck(
        value_disarranged=disarranged,
        value_reference=reference,
        resolved_fractions=fractions,
        family_depth=m,
    )
