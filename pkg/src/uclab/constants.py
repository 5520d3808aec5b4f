"""Explicit constants of the quantitative unique-continuation estimates.

Every function is a pure evaluation of a printed formula: admissibility
margins, the Carleman weight parameters (mu, mu1, rho), the Carleman constant
and admissible exponent floor, Cacciopoli prefactors, the local
mass-fraction constant ``C_qUC`` with its exponent budget ``alpha_star``, the
scale-free sampling constant ``C_sfUC`` and the spectral half-width ``gamma``.

The tiny constants underflow double precision for realistic parameters (their
natural logs reach -1e9), so each one is computed in log-space and reported
both ways.  Dimension-dependent prefactors the theory leaves abstract are
exposed in :class:`FreeConstants`; all claims are relative to a choice of
those.

``c_sfuc``/``gamma_window`` are written so that the length scale ``G`` enters
only through the products ``G*theta2``, ``G*norm_b``, ``G^2*norm_c``,
``G^2*norm_V`` and the ratio ``delta/G``.  Rescaling to unit cell size with
:func:`scale_parameters` therefore reproduces them bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace, asdict
from typing import Literal, Optional

__all__ = [
    "ModelParams",
    "FreeConstants",
    "UcConstantReport",
    "admissibility_epsilon",
    "side_length_T",
    "carleman_mu_rho",
    "carleman_constants",
    "cacciopoli_prefactor",
    "alpha_star",
    "log_c_quc",
    "c_quc",
    "log_c_quc_lower_bound",
    "c_quc_lower_bound",
    "log_c_sfuc",
    "c_sfuc",
    "c_sfuc_exponent",
    "log_gamma_window",
    "gamma_window",
    "scale_parameters",
    "sampling_report",
]

EULER = math.e

EpsilonContext = Literal["qUC", "sampling_unit", "sampling_G"]


@dataclass(frozen=True)
class ModelParams:
    """Model parameters of the elliptic operator and the sampling geometry.

    ``R``, ``D0``, ``beta`` and ``K_V`` belong to the local estimate; they are
    optional because the sampling route derives them (``R = sqrt(d)+2``,
    ``D0 = R/2``, ``beta = 2*T^d``, ``K_V = norm_V``) while the raw local
    route takes them from the caller.
    """

    d: int
    theta1: float = 1.0
    theta2: float = 0.0
    norm_V: float = 0.0
    norm_b: float = 0.0
    norm_c: float = 0.0
    G: float = 1.0
    delta: float = 0.25
    L: float = 3.0
    R: Optional[float] = None
    D0: Optional[float] = None
    K_V: Optional[float] = None
    beta: float = 1.0

    def __post_init__(self):
        if self.d < 1 or int(self.d) != self.d:
            raise ValueError("dimension must be a positive integer")
        if self.theta1 < 1.0:
            raise ValueError("ellipticity constant must be >= 1")
        if self.theta2 < 0.0:
            raise ValueError("Lipschitz constant must be >= 0")
        for name in ("norm_V", "norm_b", "norm_c"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")
        if self.G <= 0.0 or self.delta <= 0.0 or self.L <= 0.0:
            raise ValueError("G, delta and L must be positive")
        if self.beta < 1.0:
            raise ValueError("norm-ratio bound beta must be >= 1")

    def with_sampling_geometry(self) -> "ModelParams":
        """Fill the local-estimate radii the way the sampling route does."""
        T = side_length_T(self.d, self.theta1)
        R = math.sqrt(self.d) + 2.0
        return replace(
            self,
            R=R,
            D0=R / 2.0,
            beta=2.0 * float(T) ** self.d,
            K_V=self.norm_V,
        )


@dataclass(frozen=True)
class FreeConstants:
    """Dimension-dependent prefactors the theory does not pin down.

    Defaults are 1.0; every reported bound is relative to this choice.
    """

    K1: float = 1.0
    K2: float = 1.0
    M: float = 1.0
    Cprime: float = 1.0

    def __post_init__(self):
        for name in ("K1", "K2"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.M < 1.0:
            raise ValueError("cutoff derivative bound M must be >= 1")
        if self.Cprime < 1.0:
            raise ValueError("Cacciopoli constant Cprime must be >= 1")


def admissibility_epsilon(p: ModelParams, context: EpsilonContext) -> float:
    """Admissibility margin; <= 0 is a legal flagged return, not an error."""
    if context == "qUC":
        if p.R is None:
            raise ValueError("qUC context needs the annulus radius R")
        return 1.0 - 33.0 * EULER * p.d * p.R * p.theta1**6 * p.theta2
    if context == "sampling_unit":
        return (
            1.0
            - 33.0 * EULER * p.d * (math.sqrt(p.d) + 2.0) * p.theta1**6 * p.theta2
        )
    if context == "sampling_G":
        # G enters only via the product G*theta2 (scaling canonical form).
        return (
            1.0
            - 33.0
            * EULER
            * p.d
            * (math.sqrt(p.d) + 2.0)
            * p.theta1**6
            * (p.G * p.theta2)
        )
    raise ValueError(f"unknown epsilon context {context!r}")


def side_length_T(d: int, theta1: float) -> int:
    """Side length of the comparison window in the dominating-site argument."""
    if theta1 < 1.0:
        raise ValueError("theta1 must be >= 1")
    return math.ceil(2.0 * (math.sqrt(d) + 2.0) * (2.0 * EULER * theta1 + 1.0))


def carleman_mu_rho(p: ModelParams, eps0: float) -> tuple[float, float, float]:
    """Weight parameters (mu, mu1, rho) used by the local estimate."""
    if eps0 <= 0.0:
        raise ValueError("admissibility margin eps0 must be positive")
    if p.R is None or p.D0 is None:
        raise ValueError("R and D0 must be set (with_sampling_geometry or caller)")
    rho = 2.0 * EULER * p.theta1 * p.R + 2.0 * p.D0
    mu = 33.0 * p.d * rho * p.theta1**5.5 * p.theta2 + rho * eps0 / (
        2.0 * EULER * p.R * math.sqrt(p.theta1)
    )
    root = math.sqrt(p.theta1) * mu
    mu1 = math.exp(root) if root <= 1.0 else EULER * root
    return mu, mu1, rho


def carleman_constants(
    p: ModelParams, rho: float, mu: float, mu1: float
) -> tuple[float, float]:
    """Upper bounds (C, alpha0) admissible in the weighted inequality."""
    c_mu = mu - 33.0 * p.d * p.theta1**5.5 * p.theta2 * rho
    if c_mu <= 0.0:
        raise ValueError("mu must exceed 33*d*theta1^(11/2)*theta2*rho")
    sq = math.sqrt(p.theta1)
    c_tilde = (
        2.0
        * p.d**2
        * p.theta1**8
        * math.exp(4.0 * mu * sq)
        * mu1**4
        * (3.0 * mu**2 + (9.0 * rho * p.theta2 + 3.0) * mu + 1.0)
        / c_mu
    )
    alpha0_tilde = (
        11.0
        * p.d**4
        * p.theta1**16.5
        * math.exp(6.0 * mu * sq)
        * mu1**6
        * (3.0 * rho * p.theta2 + mu + 1.0) ** 2
        * (1.0 + mu * (mu + 1.0) / c_mu)
    )
    C = 6.0 * c_tilde
    alpha0 = max(
        alpha0_tilde,
        C * rho**2 * p.norm_b**2 * p.theta1**1.5,
        C ** (1.0 / 3.0) * rho ** (4.0 / 3.0) * p.norm_c ** (2.0 / 3.0) * sq,
    )
    return C, alpha0


def cacciopoli_prefactor(
    r: float,
    norm_V: float = 0.0,
    norm_b: float = 0.0,
    norm_c: float = 0.0,
    theta1: float = 1.0,
    cprime: float = 1.0,
) -> float:
    """Prefactor of the interior gradient estimate on a fattened annulus."""
    if r <= 0.0:
        raise ValueError("fattening radius r must be positive")
    return (
        2.0 * norm_V**2
        + 1.0
        + 2.0 * norm_b**2
        + 8.0 * theta1**2 * cprime / r**2
        + 2.0 * norm_c
    )


def alpha_star(
    p: ModelParams,
    fc: FreeConstants,
    carleman_C: float,
    alpha0: float,
    mu: float,
    mu1: float,
    rho: float,
) -> tuple[float, float, float]:
    """Exponent budget: returns (alpha1, alpha3, alpha_star).

    alpha2 == 1 is implicit in the max.  alpha3 is clamped at 0 when its
    logarithm argument drops below 1 (the max with 1 makes that vacuous).
    """
    if p.R is None or p.D0 is None or p.K_V is None:
        raise ValueError("R, D0, K_V must be set")
    gap = rho / (math.sqrt(p.theta1) * EULER * p.R * mu)
    if gap <= 1.0:
        raise ValueError("rho/(sqrt(theta1)*e*R*mu) must exceed 1 (needs eps0 > 0)")
    alpha1 = (16.0 * rho**4 * carleman_C * p.K_V**2 * p.theta1**1.5) ** (1.0 / 3.0)
    cac = cacciopoli_prefactor(
        p.D0 / 2.0, p.norm_V, p.norm_b, p.norm_c, p.theta1, fc.Cprime
    )
    bracket = (
        3.0 * p.theta1**2
        + 3.0 * p.theta1**2 * p.d**2 / (2.0 * EULER * p.theta1 * p.R) ** 2
        + 3.0 * (p.theta2 * p.d**2 + p.norm_b) ** 2
        + 4.0 * p.theta1 * cac
    )
    log_arg = (
        math.log(8.0 * carleman_C * rho**3 * math.sqrt(p.theta1) * p.R * p.beta)
        - 2.0
        - 2.0 * math.log(mu)
        + 4.0 * math.log(fc.M / p.D0)
        + math.log(bracket)
    )
    alpha3 = max(0.0, log_arg / (2.0 * math.log(gap)))
    a_star = max(alpha0, alpha1, 1.0, alpha3)
    return alpha1, alpha3, a_star


def log_c_quc(
    p: ModelParams,
    fc: FreeConstants,
    mu: float,
    mu1: float,
    rho: float,
    carleman_C: float,
    a_star: float,
) -> float:
    """Natural log of the local mass-fraction constant."""
    if p.R is None:
        raise ValueError("R must be set")
    if not 0.0 < p.delta < 2.0 * p.R:
        raise ValueError("delta must lie in (0, 2R)")
    cac = cacciopoli_prefactor(
        p.delta / 2.0, p.norm_V, p.norm_b, p.norm_c, p.theta1, fc.Cprime
    )
    denom = (
        3.0 * p.theta1**2
        + 768.0 * p.theta1**2 * p.d**2 / p.delta**2
        + 3.0 * (p.theta2 * p.d**2 + p.norm_b) ** 2
        + 4.0 * p.theta1 * cac
    )
    log_t1 = (
        math.log(4.0 * mu1**2 * math.sqrt(p.theta1))
        + 2.0 * math.log(p.delta)
        - math.log(3.0 * p.R * rho * carleman_C * fc.M**4)
        - math.log(denom)
    )
    return log_t1 + 2.0 * a_star * math.log(p.delta / (4.0 * mu1 * p.theta1 * p.R))


def c_quc(
    p: ModelParams,
    fc: FreeConstants,
    mu: float,
    mu1: float,
    rho: float,
    carleman_C: float,
    a_star: float,
) -> float:
    """Value of the local constant; underflows to 0.0 when the log is < -745."""
    return math.exp(log_c_quc(p, fc, mu, mu1, rho, carleman_C, a_star))


def log_c_quc_lower_bound(p: ModelParams, fc: FreeConstants) -> float:
    """Natural log of the closed-form lower bound on the local constant.

    Valid only in the regime 2*D0 = R >= 1, delta < 2, eps0 > 0.
    """
    if p.R is None or p.D0 is None:
        raise ValueError("R and D0 must be set")
    if not math.isclose(2.0 * p.D0, p.R, rel_tol=1e-12) or p.R < 1.0:
        raise ValueError("lower-bound regime needs 2*D0 = R >= 1")
    if p.delta >= 2.0:
        raise ValueError("lower-bound regime needs delta < 2")
    eps0 = admissibility_epsilon(p, "qUC")
    if eps0 <= 0.0:
        raise ValueError("inadmissible parameters: eps0 <= 0")
    t1, t2 = p.theta1, p.theta2
    log_C1 = (
        math.log(fc.K1)
        - 15.5 * math.log(t1)
        - 10.0 * t1
        - math.log((1.0 + t2) * (t1 + t2**2))
    )
    C2 = 10.0 * EULER * t1**2
    C3 = fc.K1 * t1**25 * math.exp(15.0 * t1) * (1.0 + t2) ** 2
    expo = (
        C3
        / eps0
        * (1.0 + p.norm_V ** (2.0 / 3.0) + p.norm_b**2 + p.norm_c ** (2.0 / 3.0))
        * p.R**3
        - math.log(eps0)
        + math.log(p.beta)
    )
    return log_C1 + expo * math.log(p.delta / (C2 * p.R))


def c_quc_lower_bound(p: ModelParams, fc: FreeConstants) -> float:
    return math.exp(log_c_quc_lower_bound(p, fc))


def _sfuc_pieces(p: ModelParams, fc: FreeConstants) -> tuple[float, float, float, float]:
    """(eps2, log_D1, D2, D3) in the G-canonical arithmetic."""
    g_t2 = p.G * p.theta2
    eps2 = (
        1.0
        - 33.0 * EULER * p.d * (math.sqrt(p.d) + 2.0) * p.theta1**6 * g_t2
    )
    log_D1 = (
        math.log(fc.K2)
        + (-15.5 - p.d) * math.log(p.theta1)
        - 10.0 * p.theta1
        - math.log((1.0 + g_t2) * (p.theta1 + g_t2**2))
    )
    D2 = fc.K2 * p.theta1**2
    D3 = fc.K2 * p.theta1**25 * math.exp(15.0 * p.theta1) * (1.0 + g_t2) ** 2
    return eps2, log_D1, D2, D3


def c_sfuc_exponent(p: ModelParams, fc: FreeConstants, energy: Optional[float] = None) -> float:
    """Exponent of the sampling constant; with ``energy`` set, the spectral
    variant that replaces the potential norm by |energy|."""
    eps2, _, _, D3 = _sfuc_pieces(p, fc)
    if eps2 <= 0.0:
        raise ValueError("inadmissible parameters: eps2 <= 0")
    v_term = (p.G * p.G * p.norm_V) ** (2.0 / 3.0) if energy is None else (
        p.G * p.G * abs(energy)
    ) ** (2.0 / 3.0)
    return (
        D3
        / eps2
        * (
            1.0
            + v_term
            + (p.G * p.norm_b) ** 2
            + (p.G * p.G * p.norm_c) ** (2.0 / 3.0)
        )
        - math.log(eps2)
    )


def log_c_sfuc(p: ModelParams, fc: FreeConstants, energy: Optional[float] = None) -> float:
    """Natural log of the scale-free sampling constant."""
    if not 0.0 < p.delta < p.G / 2.0:
        raise ValueError("delta must lie in (0, G/2)")
    eps2, log_D1, D2, _ = _sfuc_pieces(p, fc)
    if eps2 <= 0.0:
        raise ValueError("inadmissible parameters: eps2 <= 0")
    expo = c_sfuc_exponent(p, fc, energy)
    return log_D1 + expo * math.log((p.delta / p.G) / D2)


def c_sfuc(p: ModelParams, fc: FreeConstants, energy: Optional[float] = None) -> float:
    return math.exp(log_c_sfuc(p, fc, energy))


def log_gamma_window(p: ModelParams, fc: FreeConstants, energy: float) -> float:
    """Natural log of the admissible spectral half-width around ``energy``."""
    if not 0.0 < p.delta < p.G / 2.0:
        raise ValueError("delta must lie in (0, G/2)")
    eps2, log_D1, D2, _ = _sfuc_pieces(p, fc)
    if eps2 <= 0.0:
        raise ValueError("inadmissible parameters: eps2 <= 0")
    expo = c_sfuc_exponent(p, fc, energy)
    log_gamma_sq = log_D1 - 4.0 * math.log(p.G) + expo * math.log((p.delta / p.G) / D2)
    return 0.5 * log_gamma_sq


def gamma_window(p: ModelParams, fc: FreeConstants, energy: float) -> float:
    return math.exp(log_gamma_window(p, fc, energy))


def scale_parameters(p: ModelParams) -> ModelParams:
    """Rescale to unit cell size; identity when G == 1.

    Lengths divide by G, the Lipschitz constant and lower-order norms pick up
    the matching powers of G.  The arithmetic matches the canonical forms in
    :func:`c_sfuc`, so the sampling constant is reproduced bit for bit.
    """
    return replace(
        p,
        G=1.0,
        delta=p.delta / p.G,
        L=p.L / p.G,
        theta2=p.G * p.theta2,
        norm_b=p.G * p.norm_b,
        norm_c=p.G * p.G * p.norm_c,
        norm_V=p.G * p.G * p.norm_V,
        R=None if p.R is None else p.R / p.G,
        D0=None if p.D0 is None else p.D0 / p.G,
        K_V=None if p.K_V is None else p.G * p.G * p.K_V,
    )


@dataclass(frozen=True)
class UcConstantReport:
    """Every intermediate constant of one evaluation, plus log-space values
    for the ones that underflow doubles."""

    epsilon: float
    T: int
    mu: float = math.nan
    mu1: float = math.nan
    rho: float = math.nan
    carleman_C: float = math.nan
    carleman_alpha0: float = math.nan
    alpha1: float = math.nan
    alpha2: float = 1.0
    alpha3: float = math.nan
    alpha_star: float = math.nan
    cac_delta_half: float = math.nan
    cac_D0_half: float = math.nan
    c_quc: float = math.nan
    c_quc_lower: float = math.nan
    c_sfuc: float = math.nan
    gamma: float = math.nan
    log_c_quc: float = math.nan
    log_c_quc_lower: float = math.nan
    log_c_sfuc: float = math.nan
    log_gamma: float = math.nan
    sfuc_exponent: float = math.nan
    admissible: bool = True
    params: dict = field(default_factory=dict)
    free_constants: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        """Flat JSON-ready mapping with every intermediate value."""
        out = {}
        for k, v in asdict(self).items():
            if k in ("params", "free_constants"):
                for kk, vv in v.items():
                    out[f"{k}.{kk}"] = vv
            else:
                out[k] = v
        return out


def sampling_report(
    p: ModelParams, fc: FreeConstants = FreeConstants(), energy: float = 0.0
) -> UcConstantReport:
    """End-to-end constant evaluation along the sampling route.

    Rescales to unit cell size, fills the derived radii, and evaluates the
    whole chain.  Inadmissible parameters (epsilon <= 0) yield a flagged
    report with NaN constants rather than an exception, so sweeps can chart
    the admissibility boundary.
    """
    if not 0.0 < p.delta < p.G / 2.0:
        raise ValueError("delta must lie in (0, G/2)")
    T = side_length_T(p.d, p.theta1)
    eps2 = admissibility_epsilon(p, "sampling_G")
    base = dict(
        epsilon=eps2,
        T=T,
        params={k: v for k, v in asdict(p).items()},
        free_constants=asdict(fc),
    )
    if eps2 <= 0.0:
        return UcConstantReport(admissible=False, **base)

    ps = scale_parameters(p).with_sampling_geometry()
    mu, mu1, rho = carleman_mu_rho(ps, eps2)
    C, alpha0 = carleman_constants(ps, rho, mu, mu1)
    a1, a3, a_star = alpha_star(ps, fc, C, alpha0, mu, mu1, rho)
    lq = log_c_quc(ps, fc, mu, mu1, rho, C, a_star)
    lq_lower = log_c_quc_lower_bound(ps, fc) if ps.delta < 2.0 else math.nan
    ls = log_c_sfuc(p, fc)
    lg = log_gamma_window(p, fc, energy)
    return UcConstantReport(
        mu=mu,
        mu1=mu1,
        rho=rho,
        carleman_C=C,
        carleman_alpha0=alpha0,
        alpha1=a1,
        alpha3=a3,
        alpha_star=a_star,
        cac_delta_half=cacciopoli_prefactor(
            ps.delta / 2.0, ps.norm_V, ps.norm_b, ps.norm_c, ps.theta1, fc.Cprime
        ),
        cac_D0_half=cacciopoli_prefactor(
            ps.D0 / 2.0, ps.norm_V, ps.norm_b, ps.norm_c, ps.theta1, fc.Cprime
        ),
        c_quc=math.exp(lq),
        c_quc_lower=math.exp(lq_lower) if not math.isnan(lq_lower) else math.nan,
        c_sfuc=math.exp(ls),
        gamma=math.exp(lg),
        log_c_quc=lq,
        log_c_quc_lower=lq_lower,
        log_c_sfuc=ls,
        log_gamma=lg,
        sfuc_exponent=c_sfuc_exponent(p, fc),
        **base,
    )
