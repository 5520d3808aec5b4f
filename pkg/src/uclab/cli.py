"""Command-line front end.

Subcommands: ``constants``, ``verify``, ``sweep``, ``carleman-check``,
``cacciopoli-check``, ``extend-check``, ``weight``.  Configuration comes from
a flat-key JSON file (keys mirror the parameter dataclasses, e.g.
``model.delta``, ``free.K2``) with command-line flags taking precedence.

Exit codes: 0 when the run completed and every hard assertion passed
(reporting an inadmissible epsilon is a completed run), 1 when an assertion
failed (the message points at the offending record), 2 on configuration or
usage errors.

Outputs land in ``--out``: ``report.json`` (resolved config plus aggregates,
no timestamp), ``records.jsonl`` (timestamp isolated in the header line),
``summary.csv``, and optionally ``plot.csv``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from uclab.constants import (
    FreeConstants,
    ModelParams,
    admissibility_epsilon,
    sampling_report,
)

__all__ = ["ExperimentConfig", "main"]


@dataclass
class ExperimentConfig:
    """Resolved configuration of one CLI run."""

    model: ModelParams
    free: FreeConstants
    h_per_G: int = 32
    bc: str = "dirichlet"
    seeds: tuple[int, ...] = (0,)
    ds: tuple[int, ...] = (1,)
    norm_Vs: tuple[float, ...] = (0.0,)
    L_over_Gs: tuple[int, ...] = (3,)
    deltas_over_G: tuple[float, ...] = (0.25,)
    bcs: tuple[str, ...] = ("dirichlet",)
    energy: float = 0.0
    rho: Optional[float] = None
    mu: Optional[float] = None
    alpha_mult: float = 1.0
    trials: int = 4
    grids: tuple[float, ...] = (1 / 64,)
    emit_plot_data: bool = False
    allow_inadmissible: bool = False
    dump_eigenpairs: bool = False
    field_file: Optional[str] = None

    def to_dict(self) -> dict:
        out = {}
        for key, val in asdict(self.model).items():
            out[f"model.{key}"] = val
        for key, val in asdict(self.free).items():
            out[f"free.{key}"] = val
        for key in (
            "h_per_G", "bc", "seeds", "ds", "norm_Vs", "L_over_Gs",
            "deltas_over_G", "bcs", "energy", "rho", "mu", "alpha_mult",
            "trials", "grids", "emit_plot_data", "allow_inadmissible",
            "dump_eigenpairs", "field_file",
        ):
            val = getattr(self, key)
            out[key] = list(val) if isinstance(val, tuple) else val
        return out

    def validate(self, require_admissible: bool = True) -> list[str]:
        problems = []
        m = self.model
        if not 0.0 < m.delta < m.G / 2.0:
            problems.append(f"delta={m.delta} not in (0, G/2={m.G / 2})")
        ratio = m.L / m.G
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) % 2 != 1:
            problems.append(f"L/G={ratio} is not an odd integer")
        if require_admissible and not self.allow_inadmissible:
            eps = admissibility_epsilon(m, "sampling_G")
            if eps <= 0.0:
                problems.append(
                    f"epsilon={eps:.4g} <= 0 (pass --allow-inadmissible to chart)"
                )
        return problems


_CONFIG_KEYS = {
    "model": set(ModelParams.__dataclass_fields__),
    "free": set(FreeConstants.__dataclass_fields__),
}


def load_config(path: Optional[str], overrides: dict) -> ExperimentConfig:
    """Flat-key JSON plus overrides (flags win)."""
    raw: dict = {}
    if path is not None:
        with open(path) as fh:
            raw = json.load(fh)
    raw.update({k: v for k, v in overrides.items() if v is not None})
    model_kwargs, free_kwargs, rest = {}, {}, {}
    for key, val in raw.items():
        if key.startswith("model."):
            name = key.split(".", 1)[1]
            if name not in _CONFIG_KEYS["model"]:
                raise KeyError(f"unknown model parameter {name!r}")
            model_kwargs[name] = val
        elif key.startswith("free."):
            name = key.split(".", 1)[1]
            if name not in _CONFIG_KEYS["free"]:
                raise KeyError(f"unknown free constant {name!r}")
            free_kwargs[name] = val
        else:
            rest[key] = val
    cfg = ExperimentConfig(
        model=ModelParams(**{"d": 1, **model_kwargs}),
        free=FreeConstants(**free_kwargs),
    )
    for key, val in rest.items():
        if not hasattr(cfg, key):
            raise KeyError(f"unknown configuration key {key!r}")
        current = getattr(cfg, key)
        if isinstance(current, tuple) and not isinstance(val, tuple):
            val = tuple(val) if isinstance(val, (list, np.ndarray)) else (val,)
        setattr(cfg, key, val)
    return cfg


def _write_report(out: Path, payload: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_constants(cfg: ExperimentConfig, out: Path) -> int:
    rep = sampling_report(cfg.model, cfg.free, energy=cfg.energy)
    payload = {"config": cfg.to_dict(), "report": rep.to_dict()}
    _write_report(out, payload)
    flag = "" if rep.admissible else "  [inadmissible: epsilon <= 0]"
    print(f"epsilon = {rep.epsilon:.6g}{flag}")
    print(f"T = {rep.T}")
    if rep.admissible:
        print(f"log_c_sfuc = {rep.log_c_sfuc:.6e}")
        print(f"log_c_quc  = {rep.log_c_quc:.6e}")
    return 0


def cmd_verify(cfg: ExperimentConfig, out: Path) -> int:
    from uclab.verifier import (
        TrialConfig,
        verify_equidistribution,
        write_records_jsonl,
        write_summary_csv,
    )

    configs = [
        TrialConfig(
            d=d, bc=bc, L_over_G=lg, norm_V=nv, delta_over_G=dg, seed=seed,
            G=cfg.model.G, h_per_G=cfg.h_per_G,
        )
        for d in cfg.ds
        for nv in cfg.norm_Vs
        for bc in cfg.bcs
        for lg in cfg.L_over_Gs
        for dg in cfg.deltas_over_G
        for seed in cfg.seeds
    ]
    records = verify_equidistribution(
        configs, cfg.free, dump_dir=(out / "eigenpairs") if cfg.dump_eigenpairs else None
    )
    write_records_jsonl(out / "records.jsonl", records, config=cfg.to_dict())
    write_summary_csv(out / "summary.csv", records)
    worst = min(records, key=lambda r: r.margin)
    _write_report(out, {
        "config": cfg.to_dict(),
        "n_records": len(records),
        "min_margin": worst.margin,
        "worst_record": worst.to_dict(),
    })
    print(f"{len(records)} records, min margin {worst.margin:.6g}")
    if worst.margin <= 0.0:
        print(
            f"FAIL: margin <= 0 for record (kind={worst.psi_kind}, d={worst.d}, "
            f"bc={worst.bc}, L={worst.L}, delta={worst.delta}, seed={worst.seed})",
            file=sys.stderr,
        )
        return 1
    return 0


def cmd_sweep(cfg: ExperimentConfig, out: Path) -> int:
    from uclab.geometry import CubeDomain
    from uclab.verifier import delta_sweep

    d = cfg.ds[0]
    dom = CubeDomain(d, cfg.model.L, cfg.model.G / cfg.h_per_G, "periodic")
    psi = np.ones(dom.shape)
    deltas = [dg * cfg.model.G for dg in cfg.deltas_over_G]
    if len(deltas) < 4:
        deltas = [cfg.model.G * x for x in (0.125, 0.175, 0.25, 0.35, 0.45)]
    res = delta_sweep(
        psi, dom, cfg.model.G, deltas, cfg.model, cfg.free,
        seq_mode="uniform_random", seq_seeds=cfg.seeds,
    )
    _write_report(out, {
        "config": cfg.to_dict(),
        "slope": res.slope,
        "intercept": res.intercept,
        "r_squared": res.r_squared,
        "exponent_bound": res.exponent_bound,
        "deltas": res.deltas,
        "ratios": res.ratios,
    })
    if cfg.emit_plot_data:
        with open(out / "plot.csv", "w") as fh:
            fh.write("delta,ratio,log_bound\n")
            from uclab.constants import log_c_sfuc
            from dataclasses import replace
            for dd, rr in zip(res.deltas, res.ratios):
                lb = log_c_sfuc(replace(cfg.model, delta=dd), cfg.free)
                fh.write(f"{dd},{rr},{lb}\n")
    ok = res.slope_in_bracket(d) and res.r_squared >= 0.99 and not res.degenerate
    print(f"slope {res.slope:.4f} (floor {d}, cap {res.exponent_bound:.4g}), "
          f"R^2 {res.r_squared:.6f}")
    if not ok:
        print("FAIL: sweep slope outside bracket or degenerate fit", file=sys.stderr)
        return 1
    return 0


def cmd_carleman_check(cfg: ExperimentConfig, out: Path) -> int:
    from uclab.verifier import write_records_jsonl  # noqa: F401  (layout parity)
    from uclab.carleman import carleman_trial

    rows = []
    worst_by_h: dict[float, float] = {}
    for h in cfg.grids:
        for i in range(cfg.trials):
            for d in cfg.ds:
                rec = carleman_trial(
                    cfg.seeds[0] + i, d, h,
                    rho=cfg.rho, mu=cfg.mu,
                    alpha_mult=cfg.alpha_mult if cfg.alpha_mult != 1.0 else None,
                )
                rows.append(rec)
                worst_by_h[h] = max(worst_by_h.get(h, 0.0), rec["ratio"])
    with open(out / "records.jsonl", "w") as fh:
        import time as _time

        fh.write(json.dumps({"created_at": _time.strftime("%Y-%m-%dT%H:%M:%S"),
                             "config": cfg.to_dict()}, sort_keys=True) + "\n")
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    with open(out / "summary.csv", "w") as fh:
        fh.write("h,worst_ratio,allowed\n")
        for h in sorted(worst_by_h, reverse=True):
            fh.write(f"{h},{worst_by_h[h]},{1.0 + 10.0 * h}\n")
    _write_report(out, {"config": cfg.to_dict(),
                        "worst_by_h": {str(k): v for k, v in worst_by_h.items()}})
    bad = [(h, w) for h, w in worst_by_h.items() if w > 1.0 + 10.0 * h]
    for h in sorted(worst_by_h, reverse=True):
        print(f"h={h:.6g}: worst ratio {worst_by_h[h]:.3e} "
              f"(allowed {1.0 + 10.0 * h:.4f})")
    if bad:
        print(f"FAIL: ratio exceeded tolerance at h={bad[0][0]}", file=sys.stderr)
        return 1
    return 0


def cmd_cacciopoli_check(cfg: ExperimentConfig, out: Path) -> int:
    from uclab.fields import CoefficientField
    from uclab.geometry import CubeDomain
    from uclab.verifier import cacciopoli_check

    if cfg.field_file is not None:
        from uclab.fields import load_field
        from uclab.discretization import assemble
        from uclab.spectral import eigensolve

        fld = load_field(cfg.field_file)
        dom = fld.domain
        L = dom.L
        sl = eigensolve(assemble(fld), count=1, seed=cfg.seeds[0])
        psi = sl.grid_vector(0)
    else:
        L, h = cfg.model.L, cfg.model.G / cfg.h_per_G
        d = cfg.ds[0]
        dom = CubeDomain(d, L, h, "dirichlet")
        x = dom.center_grid()
        k = 2
        psi = np.prod(np.sin(k * math.pi * (x + L / 2.0) / L), axis=-1)
        fld = CoefficientField(
            domain=dom,
            A=np.broadcast_to(np.eye(d), dom.shape + (d, d)).copy(),
            b=np.zeros(dom.shape + (d,)), c=np.zeros(dom.shape),
            V=np.zeros(dom.shape),
            declared_theta1=1.0, declared_theta2=0.0,
        )
    res = cacciopoli_check(psi, fld, 0.1 * L, 0.27 * L, 0.13 * L,
                           cprime=cfg.free.Cprime)
    _write_report(out, {"config": cfg.to_dict(), "check": res})
    print(f"lhs {res['lhs']:.6g} <= rhs {res['rhs']:.6g}: {res['holds']}; "
          f"min C' {res['min_cprime']:.4g}")
    return 0 if res["holds"] else 1


def cmd_extend_check(cfg: ExperimentConfig, out: Path) -> int:
    from uclab.discretization import (
        assemble,
        extend_dirichlet_reflection,
        apply_operator,
        residual_inequality_check,
    )
    from uclab.fields import synthesize_dir_cross_field
    from uclab.geometry import CubeDomain
    from uclab.spectral import eigensolve

    if cfg.field_file is not None:
        from uclab.fields import load_field

        loaded = load_field(cfg.field_file)
    else:
        loaded = None
    d = loaded.domain.d if loaded is not None else max(cfg.ds[0], 2)
    dom = loaded.domain if loaded is not None else CubeDomain(
        d, cfg.model.L, cfg.model.G / cfg.h_per_G, "dirichlet"
    )
    worst = {"symmetry": 0.0, "interface_jump_rel": 0.0, "residual": -math.inf}
    for seed in cfg.seeds:
        fld = loaded if loaded is not None else synthesize_dir_cross_field(
            seed, dom, theta1=1.0 + 0.5 * (1 + seed % 3) / 3
        )
        H = assemble(fld)
        sl = eigensolve(H, count=2, seed=seed)
        psi = sl.grid_vector(0)
        lam = float(sl.eigenvalues[0])
        zeta = H.apply(psi) - lam * psi
        ext = extend_dirichlet_reflection(psi, fld, zeta=np.abs(zeta))
        worst["symmetry"] = max(
            worst["symmetry"],
            float(np.abs(ext.A - np.swapaxes(ext.A, -1, -2)).max()),
        )
        n = dom.n
        grad = max(
            float(np.abs(np.diff(psi, axis=ax)).max()) / dom.h for ax in range(d)
        )
        jump = float(
            np.abs(np.take(ext.psi, n - 1, axis=0) - np.take(ext.psi, n, axis=0)).max()
        )
        worst["interface_jump_rel"] = max(
            worst["interface_jump_rel"], jump / (10.0 * dom.h * grad)
        )
        op_ext = apply_operator(ext.A, None, None, ext.V, ext.psi, dom.h)
        viol = residual_inequality_check(
            ext.psi, lam, ext.zeta, op_ext, interior_margin=2
        )
        worst["residual"] = max(worst["residual"],
                                viol / max(abs(lam), 1.0))
    _write_report(out, {"config": cfg.to_dict(), "worst": worst})
    ok = (
        worst["symmetry"] == 0.0
        and worst["interface_jump_rel"] <= 1.0
        and worst["residual"] <= 1e-8
    )
    print(f"extension symmetry defect {worst['symmetry']:.3g}, interface jump "
          f"{worst['interface_jump_rel']:.3f} of allowance, residual excess "
          f"{worst['residual']:.3g}")
    return 0 if ok else 1


def cmd_weight(cfg: ExperimentConfig, out: Path) -> int:
    from uclab.carleman import WeightFunction, phi

    rho = cfg.rho if cfg.rho is not None else 1.0
    mu = cfg.mu if cfg.mu is not None else 1.0
    d = cfg.ds[0]
    wf = WeightFunction(rho=rho, mu=mu, A0=np.eye(d), theta1=cfg.model.theta1)
    rs = np.linspace(0.0, math.sqrt(cfg.model.theta1), 201)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "summary.csv", "w") as fh:
        fh.write("r,phi\n")
        for r, p in zip(rs, phi(rs, mu)):
            fh.write(f"{r},{p}\n")
    rng = np.random.default_rng(cfg.seeds[0])
    pts = rng.uniform(-rho, rho, size=(4000, d))
    slacks = wf.bound_slacks(pts)
    _write_report(out, {"config": cfg.to_dict(), "bound_slacks": slacks})
    print(f"weight bound slacks: lower {slacks['lower']:.3e} "
          f"upper {slacks['upper']:.3e}")
    ok = slacks["lower"] >= -1e-10 and slacks["upper"] >= -1e-10
    return 0 if ok else 1


_COMMANDS = {
    "constants": cmd_constants,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "carleman-check": cmd_carleman_check,
    "cacciopoli-check": cmd_cacciopoli_check,
    "extend-check": cmd_extend_check,
    "weight": cmd_weight,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uclab",
        description="Numerical laboratory for unique-continuation and "
                    "equidistribution estimates of elliptic operators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=str, default=None,
                        help="flat-key JSON configuration file")
        sp.add_argument("--seed", type=int, default=None,
                        help="override: single seed")
        sp.add_argument("--out", type=str, default="uclab-out",
                        help="output directory")
        sp.add_argument("--h", type=float, default=None,
                        help="override: grid spacing (converted to h_per_G)")
        sp.add_argument("--emit-plot-data", action="store_true")
        sp.add_argument("--allow-inadmissible", action="store_true")
        if name == "verify":
            sp.add_argument("--dump-eigenpairs", action="store_true")
        if name in ("cacciopoli-check", "extend-check"):
            sp.add_argument("--field-file", type=str, default=None,
                            help="load the coefficient field from a saved file")
        if name == "carleman-check":
            sp.add_argument("--d", type=int, default=None)
            sp.add_argument("--grid", type=float, action="append", default=None)
            sp.add_argument("--rho", type=float, default=None)
            sp.add_argument("--mu", type=float, default=None)
            sp.add_argument("--alpha-mult", type=float, default=None)
            sp.add_argument("--trials", type=int, default=None)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides: dict = {}
    if args.seed is not None:
        overrides["seeds"] = (args.seed,)
    if args.h is not None:
        overrides["h_per_G"] = None  # resolved below once model.G is known
    if args.emit_plot_data:
        overrides["emit_plot_data"] = True
    if args.allow_inadmissible:
        overrides["allow_inadmissible"] = True
    if getattr(args, "dump_eigenpairs", False):
        overrides["dump_eigenpairs"] = True
    if getattr(args, "field_file", None) is not None:
        overrides["field_file"] = args.field_file
    for extra in ("d", "rho", "mu", "trials"):
        if getattr(args, extra, None) is not None:
            overrides["ds" if extra == "d" else extra] = (
                (args.d,) if extra == "d" else getattr(args, extra)
            )
    if getattr(args, "grid", None):
        overrides["grids"] = tuple(args.grid)
    if getattr(args, "alpha_mult", None) is not None:
        overrides["alpha_mult"] = args.alpha_mult
    try:
        cfg = load_config(args.config, overrides)
        if args.h is not None:
            ratio = cfg.model.G / args.h
            if abs(ratio - round(ratio)) > 1e-9:
                raise ValueError("--h must divide the lattice scale G")
            cfg.h_per_G = round(ratio)
        problems = cfg.validate(
            require_admissible=(args.command not in ("constants", "weight"))
        )
        if problems:
            for p in problems:
                print(f"config error: {p}", file=sys.stderr)
            return 2
    except (KeyError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return _COMMANDS[args.command](cfg, out)


if __name__ == "__main__":
    sys.exit(main())
