"""End-to-end observability experiments.

Each trial builds a coefficient field, assembles the operator, draws a
solution (eigenfunction, spectral-projector sample, or the constant one),
measures the mass fraction captured by the union of delta-balls, and compares
it against the theoretical lower bound evaluated at the same parameters.

The bounds underflow double precision by design (their logs reach -1e6), so
records carry both the float bound (usually 0.0) and its log.  The margin is
``ratio - bound`` on the mask mass alone; the residual term
``delta^2 G^2 ||zeta||^2`` is computed and reported separately so trials
where it dominates the left-hand side are distinguishable from genuine mask
mass.  Records are reproducible bit for bit from (config, seed).
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from uclab.constants import (
    FreeConstants,
    ModelParams,
    c_sfuc_exponent,
    log_c_sfuc,
    log_gamma_window,
)
from uclab.discretization import assemble, residual_inequality_check
from uclab.fields import CoefficientField, constant_spd_field
from uclab.geometry import CubeDomain, EquidistributedSequence, generate_sequence, mask
from uclab.spectral import SpectrumSlice, eigensolve, projector_sample

__all__ = [
    "ObservabilityRecord",
    "TrialConfig",
    "dominating_site_report",
    "observability_ratio",
    "benchmark_field",
    "run_trial",
    "benchmark_configs",
    "verify_equidistribution",
    "SweepResult",
    "delta_sweep",
    "L_independence",
    "scaling_identity",
    "cacciopoli_check",
    "write_records_jsonl",
    "write_summary_csv",
]

_SUITE_ENTROPY = 743829124


@dataclass(frozen=True)
class ObservabilityRecord:
    """One experiment: measured mask fraction against the theoretical bound."""

    psi_kind: str
    d: int
    bc: str
    G: float
    delta: float
    L: float
    h: float
    theta1: float
    theta2: float
    norm_V: float
    energy: float
    eigen_index: int
    seed: int
    ratio: float
    bound: float
    log_bound: float
    margin: float
    zeta_norm_sq: float
    zeta_term: float
    zeta_dominates: bool
    residual_violation: float
    log_gamma: float = math.nan
    free_constants: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            if k == "free_constants":
                for kk, vv in v.items():
                    out[f"fc.{kk}"] = vv
            elif isinstance(v, (np.floating, np.integer)):
                out[k] = v.item()
            else:
                out[k] = v
        return out


@dataclass(frozen=True)
class TrialConfig:
    """Benchmark trial: constant-A field, random bounded potential."""

    d: int
    bc: str
    L_over_G: int
    norm_V: float
    delta_over_G: float
    seed: int
    G: float = 1.0
    h_per_G: int = 32
    theta1_range: tuple[float, float] = (1.0, 1.4)

    @property
    def L(self) -> float:
        return self.L_over_G * self.G

    @property
    def h(self) -> float:
        return self.G / self.h_per_G

    @property
    def delta(self) -> float:
        return self.delta_over_G * self.G

    def field_key(self) -> tuple:
        """Cache key: everything the field depends on (not delta)."""
        return (self.d, self.bc, self.L_over_G, self.norm_V, self.seed,
                self.G, self.h_per_G, self.theta1_range)

    def int_key(self) -> tuple[int, ...]:
        """Integer-only key for seed-sequence spawning."""
        return (
            self.d,
            0 if self.bc == "dirichlet" else 1,
            self.L_over_G,
            int(round(self.norm_V * 64)),
            self.seed,
            int(round(self.G * 1024)),
            self.h_per_G,
        )


def observability_ratio(
    psi: np.ndarray, seq: EquidistributedSequence, domain: CubeDomain
) -> float:
    """Mass fraction of psi captured by the union of delta-balls."""
    total = domain.norm_sq(psi)
    if total == 0.0:
        raise ValueError("zero grid function has no observability ratio")
    return domain.norm_sq(psi, where=mask(seq, domain)) / total


def benchmark_field(tc: TrialConfig) -> CoefficientField:
    """Constant elliptic matrix plus an i.i.d. bounded potential, seeded."""
    ss = np.random.SeedSequence(entropy=_SUITE_ENTROPY, spawn_key=tc.int_key())
    rng = np.random.default_rng(ss)
    dom = CubeDomain(tc.d, tc.L, tc.h, tc.bc)
    lo, hi = tc.theta1_range
    theta1 = lo + (hi - lo) * rng.random()
    A = constant_spd_field(
        int(rng.integers(2**31)), dom, theta1,
        diagonal_only=(tc.bc == "dirichlet"),
    )
    V = (
        rng.uniform(-tc.norm_V, tc.norm_V, size=dom.shape)
        if tc.norm_V > 0
        else np.zeros(dom.shape)
    )
    return CoefficientField(
        domain=dom, A=A,
        b=np.zeros(dom.shape + (tc.d,)),
        c=np.zeros(dom.shape),
        V=V,
        declared_theta1=theta1,
        declared_theta2=0.0,
    )


def _record(
    tc: TrialConfig,
    fc: FreeConstants,
    psi_kind: str,
    psi: np.ndarray,
    zeta: np.ndarray,
    energy: float,
    eigen_index: int,
    norm_V_bound: float,
    log_bound: float,
    seq: EquidistributedSequence,
    dom: CubeDomain,
    theta1: float,
    residual_violation: float,
    log_gamma: float = math.nan,
) -> ObservabilityRecord:
    total = dom.norm_sq(psi)
    ratio = observability_ratio(psi, seq, dom)
    zeta_sq = dom.norm_sq(zeta) / total
    zeta_term = tc.delta**2 * tc.G**2 * zeta_sq
    bound = math.exp(log_bound)
    return ObservabilityRecord(
        psi_kind=psi_kind, d=tc.d, bc=tc.bc, G=tc.G, delta=tc.delta, L=tc.L,
        h=tc.h, theta1=theta1, theta2=0.0, norm_V=norm_V_bound, energy=energy,
        eigen_index=eigen_index, seed=tc.seed,
        ratio=float(ratio), bound=bound, log_bound=float(log_bound),
        margin=float(ratio - bound),
        zeta_norm_sq=float(zeta_sq), zeta_term=float(zeta_term),
        zeta_dominates=bool(zeta_term > ratio),
        residual_violation=float(residual_violation),
        log_gamma=float(log_gamma),
        free_constants=asdict(fc),
    )


def run_trial(
    tc: TrialConfig,
    fc: FreeConstants = FreeConstants(),
    cache: Optional[dict] = None,
    eigen_count: int = 6,
) -> list[ObservabilityRecord]:
    """Inequality-path and projector-path records for one configuration."""
    key = tc.field_key()
    if cache is not None and key in cache:
        fld, H, sl = cache[key]
    else:
        fld = benchmark_field(tc)
        H = assemble(fld)
        sl = eigensolve(H, count=eigen_count, seed=tc.seed)
        if cache is not None:
            cache[key] = (fld, H, sl)
    dom = fld.domain
    rng = np.random.default_rng(
        np.random.SeedSequence(
            entropy=_SUITE_ENTROPY + 1,
            spawn_key=tc.int_key() + (int(round(tc.delta_over_G * 1024)),),
        )
    )
    seq = generate_sequence(
        tc.G, tc.delta, tc.L, tc.d, "uniform_random", seed=int(rng.integers(2**31))
    )

    records = []

    # inequality path: eigenfunction of H, compared against the potential
    idx = int(rng.integers(0, min(4, len(sl))))
    lam = float(sl.eigenvalues[idx])
    psi = sl.grid_vector(idx)
    op_psi = H.apply(psi)
    zeta = op_psi - fld.V * psi
    viol = residual_inequality_check(psi, fld.V, np.abs(zeta), op_psi)
    p = ModelParams(
        d=tc.d, theta1=fld.declared_theta1, theta2=0.0, norm_V=tc.norm_V,
        G=tc.G, delta=tc.delta, L=tc.L,
    )
    records.append(
        _record(tc, fc, "inequality_pair", psi, zeta, lam, idx, tc.norm_V,
                log_c_sfuc(p, fc), seq, dom, fld.declared_theta1, viol)
    )

    # projector path: combination of slice members at E, window from the
    # spectral half-width (its float form underflows, so the numerical
    # degeneracy tolerance provides the working floor)
    E = lam
    lg = log_gamma_window(p, fc, E)
    gamma = math.exp(lg)
    atol = max(gamma, 1e-8 * (1.0 + abs(E)))
    members = np.nonzero(np.abs(sl.eigenvalues - E) <= atol)[0]
    coeff = rng.standard_normal(len(members))
    sub = SpectrumSlice(
        eigenvalues=sl.eigenvalues[members],
        eigenvectors=sl.eigenvectors[:, members],
        window=(E - atol, E + atol),
        residual_bound=sl.residual_bound,
        shape=sl.shape,
    )
    psi2 = projector_sample(sub, coefficients=coeff)
    zeta2 = H.apply(psi2) - E * psi2
    viol2 = residual_inequality_check(psi2, E, np.abs(zeta2), H.apply(psi2))
    log_bound2 = log_c_sfuc(p, fc, energy=E) - math.log(2.0)
    rec2 = _record(tc, fc, "projector_sample", psi2, zeta2, E, idx, tc.norm_V,
                   log_bound2, seq, dom, fld.declared_theta1, viol2,
                   log_gamma=lg)
    records.append(rec2)
    return records


def benchmark_configs(
    ds: Sequence[int] = (1, 2),
    norm_Vs: Sequence[float] = (0.0, 1.0),
    bcs: Sequence[str] = ("dirichlet", "periodic"),
    L_over_Gs: Sequence[int] = (3, 5),
    delta_over_Gs: Sequence[float] = (0.125, 0.25),
    seeds: Sequence[int] = range(5),
    G: float = 1.0,
    h_per_G: int = 32,
) -> list[TrialConfig]:
    out = []
    for d in ds:
        for nv in norm_Vs:
            for bc in bcs:
                for lg in L_over_Gs:
                    for dg in delta_over_Gs:
                        for seed in seeds:
                            out.append(TrialConfig(
                                d=d, bc=bc, L_over_G=lg, norm_V=nv,
                                delta_over_G=dg, seed=seed, G=G,
                                h_per_G=h_per_G,
                            ))
    return out


def verify_equidistribution(
    configs: Iterable[TrialConfig],
    fc: FreeConstants = FreeConstants(),
    dump_dir=None,
    workers: int = 1,
) -> list[ObservabilityRecord]:
    """Run every config, reusing eigensolves across delta values.

    Trials are independent jobs; with ``workers > 1`` they execute on a
    thread pool grouped by shared field (each group keeps its own cache), and
    records are assembled in configuration order, so the output is identical
    to the serial run.  ``dump_dir`` enables the eigenpair dump: one CSV/NPY
    pair per distinct field in the suite.
    """
    configs = list(configs)
    cache: dict = {}
    if workers <= 1:
        records: list[ObservabilityRecord] = []
        for tc in configs:
            records.extend(run_trial(tc, fc, cache=cache))
    else:
        from concurrent.futures import ThreadPoolExecutor

        groups: dict[tuple, list[int]] = {}
        for i, tc in enumerate(configs):
            groups.setdefault(tc.field_key(), []).append(i)

        def run_group(indices: list[int]) -> dict[int, list[ObservabilityRecord]]:
            local_cache: dict = {}
            out = {}
            for i in indices:
                out[i] = run_trial(configs[i], fc, cache=local_cache)
            cache.update(local_cache)
            return out

        by_index: dict[int, list[ObservabilityRecord]] = {}
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for chunk in pool.map(run_group, groups.values()):
                by_index.update(chunk)
        records = [r for i in range(len(configs)) for r in by_index[i]]
    if dump_dir is not None:
        from pathlib import Path as _Path

        base = _Path(dump_dir)
        base.mkdir(parents=True, exist_ok=True)
        for i, (_, _, sl) in enumerate(cache.values()):
            sl.dump(base / f"eigenpairs_{i:03d}")
    return records


@dataclass(frozen=True)
class SweepResult:
    slope: float
    intercept: float
    r_squared: float
    exponent_bound: float
    deltas: list
    ratios: list
    degenerate: bool

    def slope_in_bracket(self, d: int, fit_tol: float = 0.02) -> bool:
        return d * (1.0 - fit_tol) <= self.slope <= self.exponent_bound


def _ols_loglog(deltas: np.ndarray, ratios: np.ndarray) -> tuple[float, float, float]:
    x = np.log(deltas)
    y = np.log(ratios)
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    yhat = A @ coef
    ss_res = float(((y - yhat) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), float(coef[1]), r2


def delta_sweep(
    psi: np.ndarray,
    domain: CubeDomain,
    G: float,
    deltas: Sequence[float],
    p: ModelParams,
    fc: FreeConstants = FreeConstants(),
    seq_mode: str = "centered",
    seq_seeds: Sequence[int] = (0,),
) -> SweepResult:
    """Fit log(ratio) against log(delta) for a fixed grid function.

    Ratios are averaged over the sequence seeds at each delta before the
    ordinary-least-squares fit.  The theoretical exponent upper-bounds the
    vanishing order; the mask-volume floor is the dimension.
    """
    if len(deltas) < 4:
        raise ValueError("need at least 4 delta values")
    ratios = []
    degenerate = False
    for delta in deltas:
        vals = []
        for s in seq_seeds:
            seq = generate_sequence(G, delta, domain.L, domain.d, seq_mode, seed=s)
            vals.append(observability_ratio(psi, seq, domain))
        r = float(np.mean(vals))
        if r <= 0.0:
            degenerate = True
        ratios.append(r)
    expo = c_sfuc_exponent(p, fc)
    if degenerate:
        return SweepResult(math.nan, math.nan, math.nan, expo,
                           list(deltas), ratios, True)
    slope, intercept, r2 = _ols_loglog(np.asarray(deltas), np.asarray(ratios))
    return SweepResult(slope, intercept, r2, expo, list(deltas), ratios, False)


def L_independence(
    tc_base: TrialConfig,
    L_over_Gs: Sequence[int],
    fc: FreeConstants = FreeConstants(),
) -> dict:
    """The bound is the same number at every L; margins collected per L.

    The ellipticity constant is pinned across the family (the statement is
    about one model observed at growing cube sides, not a fresh draw per L).
    """
    bounds = []
    min_margin = math.inf
    records = []
    cache: dict = {}
    mid = 0.5 * (tc_base.theta1_range[0] + tc_base.theta1_range[1])
    for lg in L_over_Gs:
        if lg % 2 != 1:
            raise ValueError("L/G must be odd")
        tc = TrialConfig(**{
            **asdict(tc_base), "L_over_G": lg, "theta1_range": (mid, mid),
        })
        recs = run_trial(tc, fc, cache=cache)
        records.extend(recs)
        bounds.append(recs[0].log_bound)
        min_margin = min(min_margin, min(r.margin for r in recs))
    return {
        "log_bounds": bounds,
        "bound_spread": max(bounds) - min(bounds),
        "min_margin": min_margin,
        "records": records,
    }


def scaling_identity(
    seed: int,
    d: int,
    G: float,
    delta: float,
    L_over_G: int = 3,
    h_per_G: int = 16,
    fc: FreeConstants = FreeConstants(),
) -> dict:
    """Norm and constant sides of the rescaling identity on commensurate
    grids: the mask is index-identical, so the defect is pure float
    bookkeeping of the cell volumes."""
    from uclab.constants import scale_parameters

    L = L_over_G * G
    h = G / h_per_G
    dom = CubeDomain(d, L, h, "periodic")
    rng = np.random.default_rng(seed)
    psi = rng.standard_normal(dom.shape)
    seq = generate_sequence(G, delta, L, d, "uniform_random", seed=seed)
    m = mask(seq, dom)
    mass = dom.norm_sq(psi, where=m)
    dom_scaled = CubeDomain(d, L / G, h / G, "periodic")
    mass_scaled = dom_scaled.norm_sq(psi, where=m)
    norm_defect = abs(mass - G**d * mass_scaled) / max(mass, 1e-300)

    p = ModelParams(d=d, theta1=1.0, theta2=0.0, G=G, delta=delta, L=L)
    la = log_c_sfuc(p, fc)
    lb = log_c_sfuc(scale_parameters(p), fc)
    return {
        "norm_defect": float(norm_defect),
        "constant_log_diff": abs(la - lb),
        "mass": float(mass),
    }


def cacciopoli_check(
    psi: np.ndarray,
    fld: CoefficientField,
    r1: float,
    r2: float,
    r: float,
    zeta: Optional[np.ndarray] = None,
    cprime: float = 1.0,
) -> dict:
    """Gradient energy over an annulus against the prefactor times the mass
    of the fattened annulus (plus the residual term).

    Reports both sides and the smallest constant that would make the
    inequality hold, as a diagnostic for the configured choice.
    """
    from uclab.constants import cacciopoli_prefactor

    dom = fld.domain
    if r2 + r + 2.0 * dom.h >= dom.L / 2.0:
        raise ValueError("fattened annulus must stay inside the cube")
    pts = dom.center_grid()
    s = np.sqrt((pts**2).sum(axis=-1))
    S = (s > r1) & (s < r2)
    S_plus = (s > max(r1 - r, 0.0)) & (s < r2 + r)
    grad = np.stack(
        [
            (np.roll(psi, -1, axis=ax) - np.roll(psi, 1, axis=ax)) / (2.0 * dom.h)
            for ax in range(dom.d)
        ],
        axis=-1,
    )
    energy = np.real(np.einsum("...i,...ij,...j->...", np.conj(grad), fld.A, grad))
    lhs = dom.cell_volume * float(energy[S].sum())
    mass_plus = dom.norm_sq(psi, where=S_plus)
    zeta_plus = 0.0 if zeta is None else 2.0 * dom.norm_sq(zeta, where=S_plus)
    cac = cacciopoli_prefactor(
        r, fld.norm_V, fld.norm_b, fld.norm_c, fld.declared_theta1, cprime
    )
    rhs = cac * mass_plus + zeta_plus
    base = (
        2.0 * fld.norm_V**2 + 1.0 + 2.0 * fld.norm_b**2 + 2.0 * fld.norm_c
    )
    grad_coeff = 8.0 * fld.declared_theta1**2 / r**2
    min_cprime = (lhs - zeta_plus - base * mass_plus) / (grad_coeff * mass_plus) \
        if mass_plus > 0 else math.nan
    return {
        "lhs": lhs,
        "rhs": rhs,
        "prefactor": cac,
        "holds": bool(lhs <= rhs),
        "min_cprime": float(min_cprime),
    }


def dominating_site_report(
    psi_ext: np.ndarray,
    T: int,
    L: int,
    h: float,
    seq: EquidistributedSequence,
) -> dict:
    """Per-site skeleton of the dominating-site argument.

    For every site: its unit-cube and window masses, the dominating flag, and
    the mass of the ball at the shifted neighbor's center over the unit-cube
    mass (the per-site ratio the local estimate bounds from below with
    constants too conservative to assert directly; recorded for inspection).
    The assertable pieces are returned as the mass-splitting checks.
    """
    from uclab.geometry import classify_sites, near_neighbor

    d = psi_ext.ndim
    dec = classify_sites(psi_ext, T, L, h)
    cells = round(1.0 / h)
    n_ext = 3 * L * cells
    ax = -1.5 * L + (np.arange(n_ext) + 0.5) * h
    grids = np.meshgrid(*([ax] * d), indexing="ij")
    dens = (np.abs(psi_ext) ** 2) * h**d
    sites = []
    m = L
    k0 = -(L - 1) // 2
    for idx in np.ndindex(*(m,) * d):
        k = tuple(int(k0 + i) for i in idx)
        kp = near_neighbor(k, L=L)
        z = seq.centers[tuple(int(c - k0) for c in kp)] if seq is not None else np.array(kp, float)
        dist2 = sum((g - zc) ** 2 for g, zc in zip(grids, z))
        ball_mass = float(dens[dist2 < seq.delta**2].sum())
        unit = float(dec.unit_mass[idx])
        sites.append({
            "site": list(k),
            "neighbor": list(kp),
            "dominating": bool(dec.dominating[idx]),
            "unit_mass": unit,
            "window_mass": float(dec.window_mass[idx]),
            "ball_mass": ball_mass,
            "ball_over_unit": ball_mass / unit if unit > 0 else math.nan,
        })
    total = dec.total_mass()
    return {
        "sites": sites,
        "weak_mass_below_half": bool(dec.weak_mass() < 0.5 * total + 1e-12),
        "dominating_mass_above_half": bool(2.0 * dec.dominating_mass() > total - 1e-12),
    }


def write_records_jsonl(path, records: Sequence[ObservabilityRecord],
                        config: Optional[dict] = None) -> None:
    """Header line carries the timestamp (and config echo); every other line
    is one record, key-sorted for byte stability."""
    with open(path, "w") as fh:
        header = {"created_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
                  "config": config or {}}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")


def write_summary_csv(path, records: Sequence[ObservabilityRecord]) -> None:
    if not records:
        with open(path, "w") as fh:
            fh.write("")
        return
    keys = sorted(records[0].to_dict().keys())
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        for rec in records:
            writer.writerow(rec.to_dict())
