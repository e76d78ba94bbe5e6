"""Seed weight pair on [0,1): a logarithmically singular density against a
logarithmically regular one.

The densities live on (0, 1/2),

    singular(x)    = 1 / (x * ln(1/x)^(1+alpha)),
    regular(x; r)  = (x * ln(1/x)^alpha)^(r-1),

and are rescaled to [0,1) by x -> x/2 and truncated to the level-M dyadic
martingale.  The pair keeps the scalar Muckenhoupt ratio bounded while the
quadratic functional on the nested family I_k = [0, 2^-k), a_k = k^eta grows
without bound as M grows; the decisive exponent is the conjugate q = p/(p-1),
and the pair for exponent p is the role swap of the pair built at q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .characteristics import quadratic_ap_functional
from .dyadic import DyadicInterval, StepWeight1D

__all__ = [
    "SeedConfig",
    "SeedPair",
    "SeedBuildResult",
    "sawi_density",
    "density_singular",
    "density_regular",
    "truncated_density_weight",
    "build_seed_pair",
    "build_maximal_pair",
]

QUAD_ABS_TOL = 1e-12


def density_singular(x: float, alpha: float) -> float:
    """1/(x ln(1/x)^(1+alpha)) on (0, 1/2); 0 at and beyond 1/2."""
    if x <= 0.0:
        raise ValueError("density undefined at x <= 0")
    if x >= 0.5:
        return 0.0
    u = math.log(1.0 / x)
    return 1.0 / (x * u ** (1.0 + alpha))


def density_regular(x: float, alpha: float, r: float) -> float:
    """(x ln(1/x)^alpha)^(r-1) on (0, 1/2); 0 at and beyond 1/2."""
    if x <= 0.0:
        raise ValueError("density undefined at x <= 0")
    if x >= 0.5:
        return 0.0
    u = math.log(1.0 / x)
    return (x * u**alpha) ** (r - 1.0)


@dataclass(frozen=True)
class SeedConfig:
    """Parameters of the seed construction.

    p is the final (even) exponent; the quadratic demonstration runs at the
    conjugate q = p/(p-1).  eps defaults to alpha/10 when not given.
    """

    p: int
    alpha: float
    eps: float | None = None
    M_max: int = 12
    Gamma_target: float = 3.0

    def __post_init__(self):
        if self.p < 4 or self.p % 2 != 0:
            raise ValueError("p must be an even integer >= 4")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must lie in (0,1)")
        if self.eps is None:
            object.__setattr__(self, "eps", self.alpha / 10.0)
        if not (0.0 < self.eps < self.alpha):
            raise ValueError("eps must lie in (0, alpha)")
        if self.M_max < 1:
            raise ValueError("M_max must be positive")
        if self.Gamma_target < 0.0:
            raise ValueError("Gamma_target must be nonnegative")

    @property
    def q(self) -> float:
        """Conjugate exponent p/(p-1), the demonstration exponent in (1,2)."""
        return self.p / (self.p - 1.0)

    @property
    def eta(self) -> float:
        """Coefficient growth exponent: 2*eta + 1 = (alpha - eps) * 2/q."""
        return ((self.alpha - self.eps) * 2.0 / self.q - 1.0) / 2.0


def sawi_density(x: float, role: str, cfg: SeedConfig, exponent: float | None = None) -> float:
    """Evaluate the seed density at x in (0, 1/2).

    role "sigma" is the singular density; role "omega" is the regular one at
    the given exponent (default: cfg.p, so omega(e^-1) = (e^-1)^(p-1)).
    Returns the zero branch for x >= 1/2; raises only for x <= 0.
    """
    if role == "sigma":
        return density_singular(x, cfg.alpha)
    if role == "omega":
        r = cfg.p if exponent is None else exponent
        return density_regular(x, cfg.alpha, r)
    raise ValueError(f"unknown role {role!r}")


def _cell_mass_u_substitution(f_of_u: Callable[[float], float], x_lo: float, x_hi: float) -> float:
    """Integral of f(ln(1/x)) dx over (x_lo, x_hi) via u = ln(1/x).

    The integrand handed in is already the transformed one, i.e. the caller
    supplies g(u) with integral(g, ln(1/x_hi), ln(1/x_lo)); x_lo = 0 maps to
    an infinite upper limit.  The substitution removes the x -> 0 endpoint
    singularity of both densities.
    """
    u_lo = math.log(1.0 / x_hi)
    u_hi = math.inf if x_lo == 0.0 else math.log(1.0 / x_lo)
    val, _err = quad(f_of_u, u_lo, u_hi, epsabs=QUAD_ABS_TOL, epsrel=1e-11, limit=300)
    return val


def _transformed_singular(alpha: float) -> Callable[[float], float]:
    # x = e^-u: dx = -e^-u du and 1/(x u^{1+alpha}) e^-u = u^{-(1+alpha)}
    return lambda u: u ** -(1.0 + alpha)


def _transformed_regular(alpha: float, r: float) -> Callable[[float], float]:
    # (e^-u u^alpha)^{r-1} e^-u = e^{-u r} u^{alpha (r-1)}
    beta = alpha * (r - 1.0)
    return lambda u: math.exp(-u * r) * u**beta


def truncated_density_weight(kind: str, alpha: float, M: int, r: float | None = None) -> StepWeight1D:
    """Level-M martingale of the rescaled density as a step weight on [0,1).

    kind "singular" or "regular" (the latter needs r).  Rescaling x -> x/2
    carries the density from [0,1/2) onto [0,1); each cell mass is computed
    by adaptive quadrature with the u = ln(1/x) substitution (abs tol 1e-12)
    and the cell value is the mass divided by the cell length.
    """
    if kind == "singular":
        g = _transformed_singular(alpha)
    elif kind == "regular":
        if r is None:
            raise ValueError("regular density needs an exponent r")
        g = _transformed_regular(alpha, r)
    else:
        raise ValueError(f"unknown density kind {kind!r}")
    n = 1 << M
    masses = np.empty(n, dtype=np.float64)
    for i in range(n):
        # rescaled cell [i,i+1)*2^-M pulls back to [i,i+1)*2^-(M+1), mass x2
        x_lo = i / (2.0 * n)
        x_hi = (i + 1) / (2.0 * n)
        masses[i] = 2.0 * _cell_mass_u_substitution(g, x_lo, x_hi)
    return StepWeight1D(M, masses * n).require_weight()


@dataclass
class SeedPair:
    """Truncated seed pair with its extremal family.

    sigma is the singular truncation, omega the regular one at exponent q;
    the quadratic functional is certified at exponent q on (sigma, omega).
    The exponent-p pipeline uses the swapped roles (omega, sigma).
    """

    sigma: StepWeight1D
    omega: StepWeight1D
    M: int
    a: list[float]
    I: list[DyadicInterval]
    eta: float
    functional_exponent: float

    def swapped(self) -> "SeedPair":
        """The pair with roles exchanged, certified at the conjugate exponent."""
        e = self.functional_exponent
        return replace(
            self,
            sigma=self.omega,
            omega=self.sigma,
            functional_exponent=e / (e - 1.0),
        )


@dataclass
class SeedBuildResult:
    pair: SeedPair
    success: bool
    functional_by_M: dict[int, float] = field(default_factory=dict)

    @property
    def achieved(self) -> float:
        return max(self.functional_by_M.values())


def _extremal_family(M: int, eta: float) -> tuple[list[DyadicInterval], list[float]]:
    intervals = [DyadicInterval(k, 0) for k in range(1, M + 1)]
    coeffs = [float(k) ** eta for k in range(1, M + 1)]
    return intervals, coeffs


def seed_functional_value(sigma: StepWeight1D, omega: StepWeight1D, M: int, eta: float, exponent: float) -> float:
    """Quadratic functional on (I_k = [0,2^-k), a_k = k^eta), k = 1..M."""
    intervals, coeffs = _extremal_family(M, eta)
    report = quadratic_ap_functional(sigma, omega, exponent, intervals, coeffs)
    return report.value


def build_seed_pair(cfg: SeedConfig) -> SeedBuildResult:
    """Smallest truncation level M <= M_max whose functional exceeds the target.

    The densities are integrated once at level M_max; coarser truncations are
    exact martingale projections of that grid.  When no level reaches the
    target the result reports success=False and carries the best pair.
    """
    q = cfg.q
    sigma_fine = truncated_density_weight("singular", cfg.alpha, cfg.M_max)
    omega_fine = truncated_density_weight("regular", cfg.alpha, cfg.M_max, r=q)
    values: dict[int, float] = {}
    chosen: int | None = None
    for M in range(1, cfg.M_max + 1):
        s = sigma_fine.martingale_project(M)
        w = omega_fine.martingale_project(M)
        values[M] = seed_functional_value(s, w, M, cfg.eta, q)
        if values[M] > cfg.Gamma_target:
            chosen = M
            break
    success = chosen is not None
    if chosen is None:
        chosen = max(values, key=values.get)
    sigma = sigma_fine.martingale_project(chosen)
    omega = omega_fine.martingale_project(chosen)
    intervals, coeffs = _extremal_family(chosen, cfg.eta)
    pair = SeedPair(
        sigma=sigma,
        omega=omega,
        M=chosen,
        a=coeffs,
        I=intervals,
        eta=cfg.eta,
        functional_exponent=q,
    )
    return SeedBuildResult(pair=pair, success=success, functional_by_M=values)


def build_maximal_pair(cfg: SeedConfig, M: int) -> tuple[StepWeight1D, StepWeight1D]:
    """Seed pair for the maximal-operator lower bound: regular part at r = p.

    Returns (sigma, omega) = (singular, regular(p)) truncated at level M; the
    maximal function of sigma * indicator(I_k) grows in the L^p(omega) norm.
    """
    sigma = truncated_density_weight("singular", cfg.alpha, M)
    omega = truncated_density_weight("regular", cfg.alpha, M, r=float(cfg.p))
    return sigma, omega
