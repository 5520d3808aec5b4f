"""Coefficient fields: construction, validation, and the self-adjoint form.

A field holds grids of the matrix ``A``, drift ``b``, zeroth-order ``c`` and
potential ``V`` on the cell-centered cube grid, together with declared
ellipticity/Lipschitz constants.  Matrix norms follow the row-sum convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from uclab.geometry import CubeDomain

__all__ = [
    "CoefficientField",
    "estimate_ellipticity",
    "estimate_lipschitz",
    "divergence_centered",
    "make_self_adjoint",
    "check_boundary_conditions",
    "constant_spd_field",
    "save_field",
    "load_field",
    "synthesize_dir_cross_field",
    "synthesize_random_field",
]


@dataclass(frozen=True)
class CoefficientField:
    """Grids of (A, b, c, V) with declared constants and cached sup norms."""

    domain: CubeDomain
    A: np.ndarray          # shape + (d, d), real symmetric
    b: np.ndarray          # shape + (d,), complex
    c: np.ndarray          # shape, complex
    V: np.ndarray          # shape, real
    declared_theta1: float
    declared_theta2: float

    def __post_init__(self):
        shape = self.domain.shape
        d = self.domain.d
        if self.A.shape != shape + (d, d):
            raise ValueError("A grid shape mismatch")
        if self.b.shape != shape + (d,):
            raise ValueError("b grid shape mismatch")
        if self.c.shape != shape or self.V.shape != shape:
            raise ValueError("c/V grid shape mismatch")
        if not np.allclose(self.A, np.swapaxes(self.A, -1, -2), atol=0.0):
            raise ValueError("A must be exactly symmetric cellwise")

    @property
    def norm_V(self) -> float:
        return float(np.abs(self.V).max())

    @property
    def norm_b(self) -> float:
        return float(np.sqrt((np.abs(self.b) ** 2).sum(axis=-1)).max())

    @property
    def norm_c(self) -> float:
        return float(np.abs(self.c).max())

    def is_real(self) -> bool:
        return (
            not np.iscomplexobj(self.b) or not self.b.any()
        ) and (not np.iscomplexobj(self.c) or not self.c.imag.any())


def estimate_ellipticity(A: np.ndarray) -> float:
    """max over cells of max(lambda_max, 1/lambda_min), clamped to >= 1.

    Raises when any cell fails positive definiteness.
    """
    w = np.linalg.eigvalsh(A)
    lo = w[..., 0]
    hi = w[..., -1]
    bad = int(np.count_nonzero(lo <= 0.0))
    if bad:
        raise ValueError(f"{bad} cells are not positive definite")
    return max(1.0, float(hi.max()), float((1.0 / lo).max()))


def estimate_lipschitz(A: np.ndarray, h: float) -> float:
    """max over axis-adjacent cell pairs of ||dA||_rowsum / h (a lower bound
    on the true constant, converging under refinement for C^1 fields)."""
    d = A.shape[-1]
    worst = 0.0
    for ax in range(A.ndim - 2):
        diff = np.abs(np.diff(A, axis=ax))
        rowsum = diff.sum(axis=-1).max(axis=-1)  # row-sum norm per pair
        if rowsum.size:
            worst = max(worst, float(rowsum.max()))
    return worst / h


def divergence_centered(
    bgrid: np.ndarray, h: float, bc: Literal["dirichlet", "periodic"]
) -> np.ndarray:
    """Centered-difference divergence of a vector grid, one-sided (second
    order) at Dirichlet faces, wrapped at periodic ones.

    The operator assembly subtracts exactly this quantity, so self-adjoint
    fields built by :func:`make_self_adjoint` produce exactly real diagonals.
    """
    d = bgrid.shape[-1]
    out = np.zeros(bgrid.shape[:-1], dtype=bgrid.dtype)
    for ax in range(d):
        comp = bgrid[..., ax]
        if bc == "periodic":
            der = (np.roll(comp, -1, axis=ax) - np.roll(comp, 1, axis=ax)) / (2 * h)
        else:
            der = np.empty_like(comp)
            sl = [slice(None)] * comp.ndim

            def at(i):
                s = sl.copy()
                s[ax] = i
                return tuple(s)

            der[at(slice(1, -1))] = (
                comp[at(slice(2, None))] - comp[at(slice(0, -2))]
            ) / (2 * h)
            der[at(0)] = (
                -3 * comp[at(0)] + 4 * comp[at(1)] - comp[at(2)]
            ) / (2 * h)
            der[at(-1)] = (
                3 * comp[at(-1)] - 4 * comp[at(-2)] + comp[at(-3)]
            ) / (2 * h)
        out = out + der
    return out


def make_self_adjoint(
    b_tilde: np.ndarray,
    c_tilde: np.ndarray,
    h: float,
    bc: Literal["dirichlet", "periodic"] = "periodic",
) -> tuple[np.ndarray, np.ndarray]:
    """Self-adjoint lower-order coefficients: b = i*b_tilde and
    c = c_tilde + i*div(b_tilde)/2 with the centered discrete divergence."""
    b_tilde = np.asarray(b_tilde, dtype=float)
    c_tilde = np.asarray(c_tilde, dtype=float)
    b = 1j * b_tilde
    c = c_tilde + 0.5j * divergence_centered(b_tilde, h, bc)
    return b, c


def check_boundary_conditions(field: CoefficientField, bc: str) -> dict:
    """Report worst violations of the coefficient boundary conditions.

    Dirichlet-compatibility requires the off-diagonal entries of A to vanish
    on the faces; periodic compatibility requires every entry's opposite-face
    traces to differ by at most one Lipschitz step across the seam.
    """
    dom = field.domain
    d, h, t2 = dom.d, dom.h, field.declared_theta2
    tol = 10.0 * h * max(t2, 1e-12)
    report: dict = {"bc": bc, "tolerance": tol}
    worst = 0.0
    if bc == "dirichlet":
        for ax in range(d):
            sl_lo = [slice(None)] * d
            sl_lo[ax] = 0
            sl_hi = [slice(None)] * d
            sl_hi[ax] = -1
            for face in (tuple(sl_lo), tuple(sl_hi)):
                offdiag = field.A[face].copy()
                idx = np.arange(d)
                offdiag[..., idx, idx] = 0.0
                worst = max(worst, float(np.abs(offdiag).max()))
        report["kind"] = "offdiagonal_face_trace"
    elif bc == "periodic":
        # only the second-order coefficients carry the periodicity condition
        for ax in range(d):
            first = np.take(field.A, 0, axis=ax)
            last = np.take(field.A, -1, axis=ax)
            jump = float(np.abs(first - last).max())
            worst = max(worst, jump - h * t2)
        worst = max(worst, 0.0)
        report["kind"] = "wraparound_jump_excess"
    else:
        raise ValueError(f"unknown boundary condition {bc!r}")
    report["worst_violation"] = worst
    report["ok"] = bool(worst <= tol)
    return report


def save_field(path, field: CoefficientField) -> None:
    """Self-describing field file: header (d, L, h, bc, layout row-major,
    declared constants) plus the raw grids."""
    dom = field.domain
    np.savez(
        path,
        header_d=dom.d, header_L=dom.L, header_h=dom.h,
        header_bc=dom.bc, header_layout="row-major",
        declared_theta1=field.declared_theta1,
        declared_theta2=field.declared_theta2,
        A=field.A, b=field.b, c=field.c, V=field.V,
    )


def load_field(path) -> CoefficientField:
    """Exact (bit-for-bit) inverse of :func:`save_field`."""
    with np.load(path, allow_pickle=False) as data:
        dom = CubeDomain(
            int(data["header_d"]), float(data["header_L"]),
            float(data["header_h"]), str(data["header_bc"]),
        )
        return CoefficientField(
            domain=dom, A=data["A"], b=data["b"], c=data["c"], V=data["V"],
            declared_theta1=float(data["declared_theta1"]),
            declared_theta2=float(data["declared_theta2"]),
        )


def _phase(domain: CubeDomain, k: np.ndarray, phase: float) -> np.ndarray:
    """cos(2 pi k.x / L + phase) on the grid; integer k keeps it periodic."""
    pts = domain.center_grid()
    arg = 2.0 * math.pi * np.tensordot(pts, k, axes=([-1], [0])) / domain.L
    return np.cos(arg + phase)


def constant_spd_field(
    seed: int,
    domain: CubeDomain,
    theta1: float,
    diagonal_only: bool = False,
) -> np.ndarray:
    """Constant symmetric positive-definite A grid with the spectrum pinned
    to [1/theta1, theta1] (so the ellipticity estimate is exactly theta1,
    when theta1 > 1).  ``diagonal_only`` keeps it Dirichlet-compatible."""
    rng = np.random.default_rng(seed)
    d = domain.d
    lam = np.exp(rng.uniform(-math.log(theta1), math.log(theta1), size=d)) \
        if theta1 > 1.0 else np.ones(d)
    if theta1 > 1.0:
        lam[0] = theta1
        if d > 1:
            lam[1] = 1.0 / theta1
    if diagonal_only or d == 1:
        A0 = np.diag(lam)
    else:
        Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        A0 = Q @ np.diag(lam) @ Q.T
        A0 = 0.5 * (A0 + A0.T)
    return np.broadcast_to(A0, domain.shape + (d, d)).copy()


def synthesize_dir_cross_field(
    seed: int,
    domain: CubeDomain,
    theta1: float,
    norm_V: float = 0.0,
) -> CoefficientField:
    """Dirichlet-compatible field with genuinely nonzero off-diagonal
    coefficients shaped to vanish on every face (d >= 2).

    Eigenvalues are mid +/- s(x) with the envelope peaking near 1, so the
    measured ellipticity sits at theta1 up to grid quantization; the declared
    Lipschitz constant is measured from the realized grid.
    """
    if domain.d < 2:
        raise ValueError("cross-coefficient construction needs d >= 2")
    if theta1 <= 1.0:
        raise ValueError("needs theta1 > 1 to make room for off-diagonals")
    rng = np.random.default_rng(seed)
    d, L = domain.d, domain.L
    pts = domain.center_grid()
    envelope = np.ones(domain.shape)
    for ax in range(d):
        envelope = envelope * np.sin(math.pi * (pts[..., ax] + L / 2.0) / L)
    mid = 0.5 * (theta1 + 1.0 / theta1)
    smax = 0.5 * (theta1 - 1.0 / theta1)
    A = np.zeros(domain.shape + (d, d))
    idx = np.arange(d)
    A[..., idx, idx] = mid
    A[..., 0, 1] = smax * envelope
    A[..., 1, 0] = smax * envelope
    V = rng.uniform(-norm_V, norm_V, size=domain.shape) if norm_V > 0 else np.zeros(domain.shape)
    field = CoefficientField(
        domain=domain, A=A,
        b=np.zeros(domain.shape + (d,), dtype=complex),
        c=np.zeros(domain.shape, dtype=complex),
        V=V,
        declared_theta1=estimate_ellipticity(A),
        declared_theta2=estimate_lipschitz(A, domain.h),
    )
    return field


def synthesize_random_field(
    seed: int,
    domain: CubeDomain,
    target_theta1: float = 1.0,
    target_theta2: float = 0.0,
    norm_V: float = 0.0,
    norm_b: float = 0.0,
    norm_c: float = 0.0,
    bc: Literal["dirichlet", "periodic"] = "periodic",
    sa: bool = False,
    tol: float = 0.05,
) -> CoefficientField:
    """Low-frequency trigonometric synthesis hitting the declared constants.

    With a zero Lipschitz target A is a constant matrix whose spectrum pins
    the ellipticity target exactly.  Otherwise the log-amplitude of a scalar
    (diagonal) A is a two-mode cosine along a random axis: the amplitude hits
    the ellipticity target exactly and the mode mixture is bisected until the
    measured Lipschitz constant lands within ``tol`` of its target.  Raises
    when the Lipschitz target is unreachable at the grid's frequency
    resolution.  Deterministic per seed.
    """
    if target_theta1 < 1.0:
        raise ValueError("ellipticity target must be >= 1")
    rng = np.random.default_rng(seed)
    d, n, h, L = domain.d, domain.n, domain.h, domain.L
    shape = domain.shape
    beta = math.log(target_theta1)

    if target_theta2 == 0.0 or beta == 0.0:
        if target_theta2 > 0.0:
            raise ValueError("cannot vary A with unit ellipticity target")
        A = constant_spd_field(
            seed, domain, target_theta1, diagonal_only=(bc == "dirichlet")
        )
    else:
        axis = int(rng.integers(d))
        k1 = np.zeros(d)
        k1[axis] = 1.0
        phase = 0.0 if bc == "dirichlet" else float(rng.uniform(0, 2 * math.pi))

        def profile(wmix: float, kbase: int) -> np.ndarray:
            f = wmix * _phase(domain, kbase * k1, phase) + (1.0 - wmix) * _phase(
                domain, 2 * kbase * k1, 2 * phase
            )
            return np.exp(beta * f)

        def measured(wmix: float, kbase: int) -> float:
            a = profile(wmix, kbase)
            return float(np.abs(np.diff(a, axis=axis)).max()) / h

        kmax = max(1, n // 8)
        c1 = measured(1.0, 1)
        if target_theta2 < c1 * (1.0 - tol):
            raise ValueError(
                f"Lipschitz target {target_theta2} below the k=1 floor {c1:.3g}"
            )
        kbase = max(1, int(target_theta2 / c1))
        while kbase > 1 and measured(1.0, kbase) > target_theta2:
            kbase -= 1
        while measured(0.0, kbase) < target_theta2:
            kbase += 1
            if kbase > kmax:
                raise ValueError(
                    f"Lipschitz target {target_theta2} above the frequency cutoff"
                )
        lo_val, hi_val = measured(1.0, kbase), measured(0.0, kbase)
        wlo, whi = 0.0, 1.0
        for _ in range(40):
            wmid = 0.5 * (wlo + whi)
            if measured(wmid, kbase) < target_theta2:
                whi = wmid
            else:
                wlo = wmid
        a = profile(0.5 * (wlo + whi), kbase)
        A = np.zeros(shape + (d, d))
        idx = np.arange(d)
        A[..., idx, idx] = a[..., None]

    V = rng.uniform(-norm_V, norm_V, size=shape) if norm_V > 0 else np.zeros(shape)

    if norm_b > 0.0:
        kb = np.zeros(d)
        kb[int(rng.integers(d))] = 1.0
        prof = _phase(domain, kb, float(rng.uniform(0, 2 * math.pi)) if bc == "periodic" else 0.0)
        direction = rng.standard_normal(d)
        direction /= np.linalg.norm(direction)
        b_tilde = norm_b * prof[..., None] * direction
    else:
        b_tilde = np.zeros(shape + (d,))

    if norm_c > 0.0:
        kc = np.zeros(d)
        kc[int(rng.integers(d))] = 1.0
        c_tilde = norm_c * _phase(
            domain, kc, float(rng.uniform(0, 2 * math.pi)) if bc == "periodic" else 0.0
        )
    else:
        c_tilde = np.zeros(shape)

    if sa:
        b, c = make_self_adjoint(b_tilde, c_tilde, h, bc)
    else:
        b, c = b_tilde.astype(complex), c_tilde.astype(complex)

    field = CoefficientField(
        domain=domain, A=A, b=b, c=c, V=V,
        declared_theta1=target_theta1, declared_theta2=target_theta2,
    )
    got1 = estimate_ellipticity(field.A)
    if abs(got1 - target_theta1) > tol * target_theta1:
        raise ValueError(f"ellipticity target missed: {got1} vs {target_theta1}")
    if target_theta2 > 0.0:
        got2 = estimate_lipschitz(field.A, h)
        if abs(got2 - target_theta2) > tol * target_theta2:
            raise ValueError(f"Lipschitz target missed: {got2} vs {target_theta2}")
    return field
