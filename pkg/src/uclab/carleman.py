"""Carleman weight, radial cutoffs, and a log-space checker for the weighted
inequality.

The weight is w(x) = phi(sigma(x/rho)) with sigma the anisotropic radius of a
frozen coefficient matrix and phi a log-damped radial profile.  For the
admissible exponents alpha (often 1e4..1e8) the weight powers span thousands
of orders of magnitude, so all integrals are accumulated with log-sum-exp and
the two sides of the inequality are compared through their logarithms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import logsumexp

from uclab.constants import EULER, ModelParams, carleman_constants
from uclab.discretization import apply_operator
from uclab.fields import constant_spd_field

__all__ = [
    "ein",
    "phi",
    "log_phi",
    "WeightFunction",
    "RadialCutoff",
    "build_radial_cutoff",
    "cutoff_operator_value",
    "check_pointwise_cutoff_bound",
    "CarlemanCheck",
    "check_carleman_inequality",
    "annular_bump",
    "carleman_trial",
    "mu_one",
]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)
_SERIES_CUT = 1e-4


def ein(x: np.ndarray | float) -> np.ndarray | float:
    """Entire integral of (1 - exp(-t))/t from 0 to x, vectorized.

    Series below the cut (removable singularity), adaptive composite
    Gauss-Legendre above it; absolute error well under 1e-12.
    """
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x_arr < 0.0):
        raise ValueError("ein is evaluated on x >= 0 only")
    out = np.empty_like(x_arr)
    small = x_arr <= _SERIES_CUT
    xs = x_arr[small]
    out[small] = xs * (1.0 - xs / 4.0 + xs * xs / 18.0)
    xb = x_arr[~small]
    if xb.size:
        head = _SERIES_CUT * (1.0 - _SERIES_CUT / 4.0 + _SERIES_CUT**2 / 18.0)
        panels = 4
        prev = None
        while True:
            edges = _SERIES_CUT + (xb - _SERIES_CUT)[:, None] * (
                np.arange(panels + 1) / panels
            )
            mid = 0.5 * (edges[:, 1:] + edges[:, :-1])
            half = 0.5 * (edges[:, 1:] - edges[:, :-1])
            t = mid[:, :, None] + half[:, :, None] * _GL_NODES
            vals = -np.expm1(-t) / t
            integral = (half[:, :, None] * vals * _GL_WEIGHTS).sum(axis=(1, 2))
            if prev is not None and np.max(np.abs(integral - prev)) <= 1e-13 * (
                1.0 + np.max(np.abs(integral))
            ):
                break
            if panels >= 256:
                break
            prev = integral
            panels *= 2
        out[~small] = head + integral
    return out if np.ndim(x) else float(out[0])


def phi(r: np.ndarray | float, mu: float) -> np.ndarray | float:
    """Log-damped radial profile r * exp(-ein(mu r)); 0 <= phi(r) <= r."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0.0):
        raise ValueError("radial profile is defined for r >= 0")
    out = r_arr * np.exp(-ein(mu * r_arr))
    return out if np.ndim(r) else float(out)


def log_phi(r: np.ndarray, mu: float) -> np.ndarray:
    """log(phi(r)); -inf at r = 0."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(r) - ein(mu * r)


def mu_one(theta1: float, mu: float) -> float:
    """Profile distortion bound: exp(sqrt(theta1)*mu) below the knee,
    e*sqrt(theta1)*mu above it."""
    root = math.sqrt(theta1) * mu
    return math.exp(root) if root <= 1.0 else EULER * root


@dataclass(frozen=True)
class WeightFunction:
    """w(x) = phi(sigma(x)/rho) with sigma the A0^{-1} quadratic-form radius."""

    rho: float
    mu: float
    A0: np.ndarray
    theta1: float
    mu1: float = field(init=False)
    _A0_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.rho <= 0.0 or self.mu <= 0.0:
            raise ValueError("rho and mu must be positive")
        A0 = np.asarray(self.A0, dtype=float)
        if A0.ndim != 2 or A0.shape[0] != A0.shape[1]:
            raise ValueError("A0 must be a square matrix")
        if not np.allclose(A0, A0.T, atol=1e-12):
            raise ValueError("A0 must be symmetric")
        w = np.linalg.eigvalsh(A0)
        if w[0] <= 0.0:
            raise ValueError("A0 must be positive definite")
        if w[0] < 1.0 / self.theta1 - 1e-10 or w[-1] > self.theta1 + 1e-10:
            raise ValueError("A0 spectrum must lie within [1/theta1, theta1]")
        object.__setattr__(self, "A0", A0)
        object.__setattr__(self, "mu1", mu_one(self.theta1, self.mu))
        object.__setattr__(self, "_A0_inv", np.linalg.inv(A0))

    @property
    def d(self) -> int:
        return self.A0.shape[0]

    def sigma(self, x: np.ndarray) -> np.ndarray:
        """Anisotropic radius, vectorized over leading axes of x."""
        x = np.asarray(x, dtype=float)
        q = np.einsum("...i,ij,...j->...", x, self._A0_inv, x)
        return np.sqrt(np.maximum(q, 0.0))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return phi(self.sigma(x) / self.rho, self.mu)

    def log_weight(self, x: np.ndarray) -> np.ndarray:
        return log_phi(self.sigma(x) / self.rho, self.mu)

    def bound_slacks(self, x: np.ndarray) -> dict:
        """Slack of the printed envelope bounds at the given points.

        Returns the minimum of (w - sigma/(rho*mu1)) and (sigma/rho - w) over
        points inside the euclidean rho-ball, plus the slack of the constant
        floor 1/(e*mu) on the outer region |x| >= sqrt(theta1)*rho/mu (NaN
        when no sample lands there).
        """
        x = np.asarray(x, dtype=float)
        r_eucl = np.sqrt((x**2).sum(axis=-1))
        inside = r_eucl < self.rho
        sig = self.sigma(x[inside])
        w = phi(sig / self.rho, self.mu)
        lower = w - sig / (self.rho * self.mu1)
        upper = sig / self.rho - w
        outer = inside & (
            np.sqrt((x**2).sum(axis=-1)) >= math.sqrt(self.theta1) * self.rho / self.mu
        )
        if np.any(outer):
            w_out = phi(self.sigma(x[outer]) / self.rho, self.mu)
            floor = float((w_out - 1.0 / (EULER * self.mu)).min())
        else:
            floor = math.nan
        return {
            "lower": float(lower.min()) if lower.size else math.nan,
            "upper": float(upper.min()) if upper.size else math.nan,
            "outer_floor": floor,
            "n_inside": int(inside.sum()),
        }


def _smoothstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t**2)


def _smoothstep_d1(t: np.ndarray) -> np.ndarray:
    inside = (t > 0.0) & (t < 1.0)
    t = np.clip(t, 0.0, 1.0)
    return np.where(inside, 30.0 * t**2 * (1.0 - t) ** 2, 0.0)


def _smoothstep_d2(t: np.ndarray) -> np.ndarray:
    inside = (t > 0.0) & (t < 1.0)
    t = np.clip(t, 0.0, 1.0)
    return np.where(inside, 60.0 * t - 180.0 * t**2 + 120.0 * t**3, 0.0)


@dataclass(frozen=True)
class RadialCutoff:
    """Radial plateau cutoff: 0 near the origin and far out, 1 on the working
    annulus, quintic-smoothstep transitions (twice continuously
    differentiable)."""

    delta: float
    R: float
    D0: float
    theta1: float
    d: int
    r1: float
    r2: float
    r3: float
    r4: float
    measured_M: float

    def value(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        up = _smoothstep((s - self.r1) / (self.r2 - self.r1))
        down = _smoothstep((self.r4 - s) / (self.r4 - self.r3))
        return np.where(s <= self.r2, up, 1.0) * np.where(s >= self.r3, down, 1.0)

    def radial_derivative(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        w_up = self.r2 - self.r1
        w_dn = self.r4 - self.r3
        der = _smoothstep_d1((s - self.r1) / w_up) / w_up
        der = der - _smoothstep_d1((self.r4 - s) / w_dn) / w_dn
        return der

    def radial_second_derivative(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        w_up = self.r2 - self.r1
        w_dn = self.r4 - self.r3
        der2 = _smoothstep_d2((s - self.r1) / w_up) / w_up**2
        der2 = der2 + _smoothstep_d2((self.r4 - s) / w_dn) / w_dn**2
        return der2

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        s = np.sqrt((x**2).sum(axis=-1))
        der = self.radial_derivative(s)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(s[..., None] > 0.0, x / s[..., None], 0.0)
        return der[..., None] * unit

    def laplacian(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        s = np.sqrt((x**2).sum(axis=-1))
        with np.errstate(invalid="ignore", divide="ignore"):
            lap = self.radial_second_derivative(s) + np.where(
                s > 0.0, (self.d - 1) * self.radial_derivative(s) / s, 0.0
            )
        return lap

    def hessian(self, x: np.ndarray) -> np.ndarray:
        """Full Hessian from the radial profile (points away from 0)."""
        x = np.asarray(x, dtype=float)
        s = np.sqrt((x**2).sum(axis=-1))
        der = self.radial_derivative(s)
        der2 = self.radial_second_derivative(s)
        unit = x / s[..., None]
        outer = unit[..., :, None] * unit[..., None, :]
        eye = np.eye(self.d)
        return (
            der2[..., None, None] * outer
            + (der / s)[..., None, None] * (eye - outer)
        )


def build_radial_cutoff(
    delta: float, R: float, D0: float, theta1: float, d: int = 1
) -> RadialCutoff:
    """Cutoff vanishing on B(delta/4) and outside B(2 e theta1 R + D0), equal
    to one on the annulus between delta/2 and 2 e theta1 R."""
    if delta > D0 or delta > 2.0 * EULER * theta1 * R:
        raise ValueError("radius ordering requires delta <= D0 and delta <= 2e*theta1*R")
    r1, r2 = delta / 4.0, delta / 2.0
    r3 = 2.0 * EULER * theta1 * R
    r4 = r3 + D0
    if not (r1 < r2 < r3 < r4):
        raise ValueError("cutoff radii must be strictly ordered")
    cut = RadialCutoff(
        delta=delta, R=R, D0=D0, theta1=theta1, d=d,
        r1=r1, r2=r2, r3=r3, r4=r4, measured_M=math.nan,
    )
    measured = 0.0
    for lo, hi, scale in ((r1, r2, delta), (r3, r4, D0)):
        s = np.linspace(lo, hi, 4001)
        grad = np.abs(cut.radial_derivative(s))
        lap = np.abs(
            cut.radial_second_derivative(s) + (d - 1) * cut.radial_derivative(s) / s
        )
        measured = max(measured, scale * math.sqrt(float(np.maximum(grad, lap).max())))
    object.__setattr__(cut, "measured_M", measured)
    return cut


@dataclass(frozen=True)
class CutoffBoundCheck:
    worst_slack: float
    flagged: int


def cutoff_operator_value(
    cutoff: RadialCutoff,
    A: Callable[[np.ndarray], np.ndarray],
    points: np.ndarray,
    b: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    dA: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    fd_step: float = 1e-6,
) -> np.ndarray:
    """-div(A grad eta) + b.grad eta at the points, from the closed-form
    cutoff derivatives; coefficient derivatives by analytic callable or
    centered finite differences."""
    pts = np.asarray(points, dtype=float)
    d = cutoff.d
    grad = cutoff.gradient(pts)
    hess = cutoff.hessian(pts)
    Axx = A(pts)
    if dA is not None:
        dA_val = dA(pts)
    else:
        dA_val = np.empty(pts.shape[:-1] + (d, d, d))
        for i in range(d):
            e = np.zeros(d)
            e[i] = fd_step
            dA_val[..., i, :, :] = (A(pts + e) - A(pts - e)) / (2.0 * fd_step)
    div_A_grad = np.einsum("...iij->...j", dA_val)  # sum_i d_i a[i,j]
    op_c = -np.einsum("...j,...j->...", div_A_grad, grad)
    op_c = op_c - np.einsum("...ij,...ij->...", Axx, hess)
    if b is not None:
        op_c = op_c + np.einsum("...j,...j->...", b(pts), grad)
    return op_c


def check_pointwise_cutoff_bound(
    cutoff: RadialCutoff,
    A: Callable[[np.ndarray], np.ndarray],
    points: np.ndarray,
    theta1: float,
    theta2: float,
    norm_b: float = 0.0,
    b: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    dA: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    fd_step: float = 1e-6,
) -> CutoffBoundCheck:
    """Slack of the pointwise bound on the cutoff under the principal part:

        |Op_c eta|^2 <= 3 t1^2 |lap eta|^2 + 3 t1^2 (2d-1)^2 |grad eta|^2/|x|^2
                        + 3 (t2 d^2 + |b|_inf)^2 |grad eta|^2

    ``A`` (and optionally ``b``, ``dA``) are smooth synthetic fields given as
    callables on point arrays; coefficient derivatives default to centered
    finite differences of ``A``.  Points within one finite-difference step of
    the profile breakpoints are flagged (one-sided second derivatives there).
    """
    pts = np.asarray(points, dtype=float)
    d = cutoff.d
    s = np.sqrt((pts**2).sum(axis=-1))
    if np.any(s <= 0.0):
        raise ValueError("sample points must avoid the origin")
    grad = cutoff.gradient(pts)
    lap = cutoff.laplacian(pts)
    op_c = cutoff_operator_value(cutoff, A, pts, b=b, dA=dA, fd_step=fd_step)
    lhs = np.abs(op_c) ** 2
    g2 = (grad**2).sum(axis=-1)
    rhs = (
        3.0 * theta1**2 * lap**2
        + 3.0 * theta1**2 * (2.0 * d - 1.0) ** 2 * g2 / s**2
        + 3.0 * (theta2 * d**2 + norm_b) ** 2 * g2
    )
    slack = rhs - lhs
    breakpoints = np.array([cutoff.r1, cutoff.r2, cutoff.r3, cutoff.r4])
    flagged = np.min(np.abs(s[..., None] - breakpoints), axis=-1) < 2.0 * fd_step
    return CutoffBoundCheck(
        worst_slack=float(slack[~flagged].min() if np.any(~flagged) else slack.min()),
        flagged=int(flagged.sum()),
    )


@dataclass(frozen=True)
class CarlemanCheck:
    """Both sides of the weighted inequality in log space."""

    lhs_log: float
    rhs_log: float
    ratio: float
    h: float
    alpha: float

    @property
    def lhs(self) -> float:
        return math.exp(self.lhs_log) if math.isfinite(self.lhs_log) else 0.0

    @property
    def rhs(self) -> float:
        return math.exp(self.rhs_log) if math.isfinite(self.rhs_log) else 0.0


def _logsum(terms_log: np.ndarray, weights: np.ndarray) -> float:
    mask = weights > 0.0
    if not np.any(mask):
        return -math.inf
    return float(logsumexp(terms_log[mask], b=weights[mask]))


def check_carleman_inequality(
    u: np.ndarray,
    A: np.ndarray,
    b: Optional[np.ndarray],
    c: Optional[np.ndarray],
    h: float,
    weight: WeightFunction,
    alpha: float,
    carleman_C: float,
    alpha0: Optional[float] = None,
    support_tol: float = 1e-12,
) -> CarlemanCheck:
    """Compare both sides of the weighted inequality on a cube grid.

    ``u`` lives on the cell-centered grid of a cube centered at the origin and
    must vanish outside the euclidean rho-ball, in a punctured neighborhood of
    the origin (radius 2h), and on a margin of two cells at the cube boundary
    (the stencil wraps).  Derivatives are centered, integrals are midpoint
    sums accumulated by log-sum-exp, and the two sides are compared through
    logs; the ratio is exp(lhs_log - rhs_log).
    """
    d = u.ndim
    n = u.shape[0]
    if alpha0 is not None and alpha < alpha0:
        raise ValueError("alpha must be at least the admissible floor alpha0")
    rho = weight.rho
    side = n * h
    ax = -side / 2.0 + (np.arange(n) + 0.5) * h
    pts = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1)
    r = np.sqrt((pts**2).sum(axis=-1))

    umax = float(np.abs(u).max())
    if umax == 0.0:
        return CarlemanCheck(-math.inf, -math.inf, 0.0, h, alpha)
    u = u / umax  # ratio is scale-invariant; normalize for conditioning
    outside = r >= rho
    if np.any(np.abs(u[outside]) > support_tol):
        raise ValueError("u must vanish outside the rho-ball")
    near0 = r <= 2.0 * h
    if np.any(np.abs(u[near0]) > support_tol):
        raise ValueError("u must vanish in a punctured neighborhood of the origin")
    edge = np.zeros_like(u, dtype=bool)
    for axd in range(d):
        sl = [slice(None)] * d
        sl[axd] = [0, 1, -2, -1]
        edge[tuple(sl)] = True
    if np.any(np.abs(u[edge]) > support_tol):
        raise ValueError("u must vanish on a two-cell margin at the cube boundary")

    grad = np.stack([_roll_diff_local(u, axd, h) for axd in range(d)], axis=-1)
    grad_energy = np.real(
        np.einsum("...i,...ij,...j->...", np.conj(grad), A, grad)
    )
    op_u = apply_operator(A, b, c, None, u, h)
    op_sq = np.abs(op_u) ** 2
    u_sq = np.abs(u) ** 2

    active = (grad_energy > 0.0) | (op_sq > 0.0) | (u_sq > 0.0)
    lw = weight.log_weight(pts[active])
    ge, us, os_ = grad_energy[active], u_sq[active], op_sq[active]

    log_cell = d * math.log(h)
    lhs1 = _logsum((1.0 - 2.0 * alpha) * lw, ge) + math.log(alpha * rho**2) + log_cell
    lhs2 = _logsum((-1.0 - 2.0 * alpha) * lw, us) + 3.0 * math.log(alpha) + log_cell
    lhs_log = float(np.logaddexp(lhs1, lhs2))
    rhs_log = _logsum(
        (2.0 - 2.0 * alpha) * lw, os_
    ) + math.log(carleman_C * rho**4) + log_cell
    ratio = math.exp(lhs_log - rhs_log) if math.isfinite(rhs_log) else 0.0
    return CarlemanCheck(lhs_log, rhs_log, ratio, h, alpha)


def _roll_diff_local(u: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (np.roll(u, -1, axis=axis) - np.roll(u, 1, axis=axis)) / (2.0 * h)


def annular_bump(
    pts: np.ndarray, r_in: float, r_out: float, rise_frac: float = 0.4
) -> np.ndarray:
    """Smooth radial bump supported on the annulus [r_in, r_out]."""
    r = np.sqrt((pts**2).sum(axis=-1))
    w = rise_frac * (r_out - r_in)
    return _smoothstep((r - r_in) / w) * _smoothstep((r_out - r) / w)


def carleman_trial(
    seed: int,
    d: int,
    h: float,
    rho: Optional[float] = None,
    mu: Optional[float] = None,
    alpha_mult: Optional[float] = None,
) -> dict:
    """One seeded trial of the weighted inequality.

    Draws a constant elliptic matrix (occasionally a gently varying diagonal
    one), a smooth annular bump away from the origin, weight parameters with
    a comfortable admissibility margin, and alpha at (or just above) the
    admissible floor; returns the check plus the drawn configuration.
    ``rho``, ``mu`` and the alpha multiplier can be pinned by the caller
    (the CLI flags); unset ones are drawn from the seed.
    """
    rng = np.random.default_rng(seed)
    theta1 = 1.0 + 0.12 * rng.random()
    rho = (0.8 + 0.45 * rng.random()) if rho is None else float(rho)
    variable_A = rng.random() < 0.25
    theta2 = 4e-4 * rng.random() if variable_A else 0.0
    mu_floor = 33.0 * d * theta1**5.5 * theta2 * rho
    if mu is None:
        mu = mu_floor + 0.03 + 0.08 * rng.random()
    elif mu <= mu_floor:
        theta2, variable_A = 0.0, False  # pinned mu keeps admissibility
    mu = float(mu)
    with_drift = rng.random() < 0.3
    norm_b = 0.25 * rng.random() if with_drift else 0.0
    norm_c = 0.25 * rng.random() if with_drift else 0.0

    side = 2.0 * rho * 1.08
    n = int(math.ceil(side / h / 2.0)) * 2
    ax = (np.arange(n) + 0.5 - n / 2.0) * h
    pts = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1)

    from uclab.geometry import CubeDomain

    dom = CubeDomain(d, n * h, h, "periodic")
    if variable_A:
        amp = theta2 * 2.0 * rho / math.pi  # slope pi/(2 rho) times amp
        base = 0.5 * (theta1 + 1.0 / theta1)
        a_scalar = base + amp * np.sin(math.pi * pts[..., 0] / (2.0 * rho))
        A = np.zeros(pts.shape[:-1] + (d, d))
        idx = np.arange(d)
        A[..., idx, idx] = a_scalar[..., None]
        A0 = np.eye(d) * base
    else:
        A = constant_spd_field(seed, dom, theta1)
        A0 = A[(0,) * d]
    b = None
    c = None
    if with_drift:
        b = np.full(pts.shape[:-1] + (d,), 0.0, dtype=complex)
        direction = rng.standard_normal(d)
        direction /= np.linalg.norm(direction)
        b += norm_b * direction
        c = np.full(pts.shape[:-1], norm_c + 0.0j)

    r_in = (0.45 + 0.08 * rng.random()) * rho
    r_out = (0.78 + 0.07 * rng.random()) * rho
    u = annular_bump(pts, r_in, r_out)
    if d >= 2:
        u = u * (1.0 + 0.3 * np.cos(2.0 * math.pi * pts[..., 0] / rho))

    mu1 = mu_one(theta1, mu)
    p = ModelParams(d=d, theta1=theta1, theta2=theta2, norm_b=norm_b, norm_c=norm_c)
    C, alpha0 = carleman_constants(p, rho, mu, mu1)
    if alpha_mult is None:
        alpha_mult = 1.0 + 0.02 * rng.random()
    if alpha_mult < 1.0:
        raise ValueError("alpha multiplier must be >= 1 (alpha >= alpha0)")
    alpha = alpha0 * alpha_mult
    weight = WeightFunction(rho=rho, mu=mu, A0=A0, theta1=theta1)
    chk = check_carleman_inequality(u, A, b, c, h, weight, alpha, C, alpha0=alpha0)
    return {
        "seed": seed, "d": d, "h": h, "theta1": theta1, "theta2": theta2,
        "rho": rho, "mu": mu, "alpha": alpha, "alpha0": alpha0,
        "carleman_C": C, "norm_b": norm_b, "norm_c": norm_c,
        "lhs_log": chk.lhs_log, "rhs_log": chk.rhs_log, "ratio": chk.ratio,
    }
