"""End-to-end observability experiment tests."""

import math

import numpy as np
import pytest

from uclab.constants import FreeConstants, ModelParams, log_c_sfuc
from uclab.fields import CoefficientField
from uclab.geometry import CubeDomain, generate_sequence, mask
from uclab.verifier import (
    ObservabilityRecord,
    TrialConfig,
    cacciopoli_check,
    delta_sweep,
    L_independence,
    observability_ratio,
    run_trial,
    scaling_identity,
    verify_equidistribution,
    write_records_jsonl,
    write_summary_csv,
)


class TestObservabilityRatio:
    def test_support_inside_one_ball_gives_one(self):
        dom = CubeDomain(1, 3.0, 1 / 64, "periodic")
        seq = generate_sequence(1.0, 0.25, 3.0, 1, "centered")
        x = dom.centers_1d()
        psi = np.where(np.abs(x) < 0.2, 1.0, 0.0)
        assert observability_ratio(psi, seq, dom) == 1.0

    def test_vanishing_on_mask_gives_zero(self):
        dom = CubeDomain(1, 3.0, 1 / 64, "periodic")
        seq = generate_sequence(1.0, 0.25, 3.0, 1, "centered")
        m = mask(seq, dom)
        psi = np.where(m, 0.0, 1.0)
        assert observability_ratio(psi, seq, dom) == 0.0

    def test_constant_function_recovers_area_fraction(self):
        target = math.pi / 16.0
        errs = []
        for h in (1 / 32, 1 / 64, 1 / 128):
            dom = CubeDomain(2, 3.0, h, "periodic")
            seq = generate_sequence(1.0, 0.25, 3.0, 2, "centered")
            r = observability_ratio(np.ones(dom.shape), seq, dom)
            errs.append(abs(r - target))
        assert errs[-1] < 0.01 and errs[-1] <= errs[0]

    def test_zero_function_rejected(self):
        dom = CubeDomain(1, 3.0, 1 / 16, "periodic")
        seq = generate_sequence(1.0, 0.25, 3.0, 1, "centered")
        with pytest.raises(ValueError):
            observability_ratio(np.zeros(dom.shape), seq, dom)


class TestTrials:
    def test_dirichlet_ground_state_cross_checked_against_direct_sum(self):
        # pipeline ratio for the ground state of the plain second-difference
        # operator equals a direct summation of the sampled sine mode
        from uclab.discretization import assemble
        from uclab.spectral import eigensolve

        L, h = 3.0, 1 / 32
        dom = CubeDomain(1, L, h, "dirichlet")
        fld = CoefficientField(
            dom, np.ones(dom.shape + (1, 1)), np.zeros(dom.shape + (1,)),
            np.zeros(dom.shape), np.zeros(dom.shape), 1.0, 0.0,
        )
        H = assemble(fld)
        sl = eigensolve(H, count=1)
        psi = sl.grid_vector(0)
        lam = float(sl.eigenvalues[0])
        assert abs(lam - math.pi**2 / L**2) < 5e-3
        seq = generate_sequence(1.0, 0.25, L, 1, "uniform_random", seed=4)
        pipeline = observability_ratio(psi, seq, dom)
        x = dom.centers_1d()
        sine = np.sin(math.pi * (x + L / 2) / L)
        inside = np.zeros(dom.shape, dtype=bool)
        for z in seq.centers.ravel():
            inside |= np.abs(x - z) < seq.delta
        direct = (sine[inside] ** 2).sum() / (sine**2).sum()
        assert abs(pipeline - direct) < 1e-10
        p = ModelParams(d=1, theta1=1.0, theta2=0.0, G=1.0, delta=0.25, L=L)
        bound_log = log_c_sfuc(p, FreeConstants())
        assert pipeline - math.exp(bound_log) > 0.0

    def test_trial_margins_positive_with_exact_residual(self):
        tc = TrialConfig(d=1, bc="dirichlet", L_over_G=3, norm_V=0.0,
                         delta_over_G=0.25, seed=0)
        recs = run_trial(tc)
        for r in recs:
            assert r.margin > 0.0
            assert r.residual_violation <= 1e-10

    def test_records_reproducible_bit_for_bit(self):
        tc = TrialConfig(d=2, bc="periodic", L_over_G=3, norm_V=1.0,
                         delta_over_G=0.125, seed=1)
        a = [r.to_dict() for r in run_trial(tc)]
        b = [r.to_dict() for r in run_trial(tc)]
        assert a == b

    def test_zeta_term_reported_separately(self):
        tc = TrialConfig(d=1, bc="periodic", L_over_G=3, norm_V=1.0,
                         delta_over_G=0.25, seed=2)
        recs = run_trial(tc)
        for r in recs:
            assert r.zeta_term >= 0.0
            assert isinstance(r.zeta_dominates, bool)
        proj = next(r for r in recs if r.psi_kind == "projector_sample")
        # projector pairs have solver-residual zeta only
        assert proj.zeta_norm_sq < 1e-16

    def test_margin_positive_across_small_suite(self):
        cfgs = [
            TrialConfig(d=d, bc=bc, L_over_G=3, norm_V=nv, delta_over_G=0.25,
                        seed=s, h_per_G=16)
            for d in (1, 2) for bc in ("dirichlet", "periodic")
            for nv in (0.0, 1.0) for s in (0, 1)
        ]
        recs = verify_equidistribution(cfgs)
        assert len(recs) == 2 * len(cfgs)
        assert all(r.margin > 0.0 for r in recs)
        assert all(r.residual_violation <= 1e-10 for r in recs)


class TestDeltaSweep:
    def test_constant_function_slope_is_dimension(self):
        dom = CubeDomain(2, 3.0, 1 / 128, "periodic")
        p = ModelParams(d=2, theta1=1.0, theta2=0.0, G=1.0, delta=0.2, L=3.0)
        res = delta_sweep(
            np.ones(dom.shape), dom, 1.0, [0.125, 0.175, 0.25, 0.35, 0.45], p,
            seq_mode="uniform_random", seq_seeds=range(5),
        )
        assert res.r_squared >= 0.99
        assert res.slope_in_bracket(2)
        assert abs(res.slope - 2.0) < 0.05

    def test_slope_invariant_under_function_scaling(self):
        dom = CubeDomain(1, 3.0, 1 / 128, "periodic")
        p = ModelParams(d=1, theta1=1.0, theta2=0.0, G=1.0, delta=0.2, L=3.0)
        x = dom.centers_1d()
        psi = 1.3 + np.sin(2 * math.pi * x / 3.0)
        deltas = [0.1, 0.15, 0.22, 0.33, 0.45]
        r1 = delta_sweep(psi, dom, 1.0, deltas, p)
        r2 = delta_sweep(2.0 * psi, dom, 1.0, deltas, p)
        assert r1.slope == r2.slope

    def test_ground_state_slope_in_bracket(self):
        L = 3.0
        dom = CubeDomain(1, L, 1 / 128, "dirichlet")
        x = dom.centers_1d()
        psi = np.sin(math.pi * (x + L / 2) / L)
        p = ModelParams(d=1, theta1=1.0, theta2=0.0, G=1.0, delta=0.2, L=L)
        res = delta_sweep(psi, dom, 1.0, [0.1, 0.15, 0.22, 0.33, 0.45], p,
                          seq_mode="uniform_random", seq_seeds=range(5))
        assert res.slope_in_bracket(1)
        assert res.slope <= res.exponent_bound

    def test_needs_four_points(self):
        dom = CubeDomain(1, 3.0, 1 / 32, "periodic")
        p = ModelParams(d=1, G=1.0, delta=0.2, L=3.0)
        with pytest.raises(ValueError):
            delta_sweep(np.ones(dom.shape), dom, 1.0, [0.1, 0.2, 0.3], p)

    def test_degenerate_flagged(self):
        dom = CubeDomain(1, 3.0, 1 / 32, "periodic")
        seq = generate_sequence(1.0, 0.45, 3.0, 1, "centered")
        psi = np.where(mask(seq, dom), 0.0, 1.0)
        p = ModelParams(d=1, G=1.0, delta=0.2, L=3.0)
        res = delta_sweep(psi, dom, 1.0, [0.41, 0.43, 0.44, 0.45], p)
        assert res.degenerate


class TestLIndependence:
    def test_bound_identical_and_margins_positive(self):
        tc = TrialConfig(d=1, bc="dirichlet", L_over_G=3, norm_V=0.0,
                         delta_over_G=0.25, seed=0, h_per_G=16)
        out = L_independence(tc, (3, 5, 7))
        assert out["bound_spread"] == 0.0  # L never enters the constant
        assert out["min_margin"] > 0.0

    def test_mask_fraction_L_independent_exactly(self):
        fr = []
        for L in (3, 5, 7):
            dom = CubeDomain(1, float(L), 1 / 32, "periodic")
            seq = generate_sequence(1.0, 0.25, float(L), 1, "centered")
            fr.append(observability_ratio(np.ones(dom.shape), seq, dom))
        assert fr[0] == fr[1] == fr[2]

    def test_odd_ratio_enforced(self):
        tc = TrialConfig(d=1, bc="dirichlet", L_over_G=3, norm_V=0.0,
                         delta_over_G=0.25, seed=0)
        with pytest.raises(ValueError):
            L_independence(tc, (3, 4))


class TestScalingIdentity:
    def test_unit_scale_is_exact_zero(self):
        out = scaling_identity(0, 1, G=1.0, delta=0.25)
        assert out["norm_defect"] == 0.0
        assert out["constant_log_diff"] == 0.0

    def test_general_scale_within_float_bookkeeping(self):
        for seed in range(5):
            out = scaling_identity(seed, 2, G=2.0, delta=0.4)
            assert out["norm_defect"] <= 1e-12
            assert out["constant_log_diff"] == 0.0

    def test_hundred_point_parameter_sweep(self):
        import random

        rng = random.Random(3)
        E = math.e
        for _ in range(100):
            d = rng.choice([1, 2, 3])
            t1 = 1.0 + rng.random()
            G = 0.25 * rng.randint(1, 12)
            cap = 1.0 / (33.0 * E * d * (math.sqrt(d) + 2.0) * t1**6 * G)
            p = ModelParams(
                d=d, theta1=t1, theta2=rng.random() * 0.9 * cap, G=G,
                delta=G * (0.02 + 0.45 * rng.random()),
                norm_V=rng.random(), norm_b=rng.random(), norm_c=rng.random(),
            )
            from uclab.constants import scale_parameters

            assert log_c_sfuc(p, FreeConstants()) == log_c_sfuc(
                scale_parameters(p), FreeConstants()
            )


class TestCacciopoli:
    def d1_setup(self, k=2, h=1 / 256):
        L = 3.0
        dom = CubeDomain(1, L, h, "dirichlet")
        x = dom.centers_1d()
        psi = np.sin(k * math.pi * (x + L / 2) / L)
        fld = CoefficientField(
            dom, np.ones(dom.shape + (1, 1)), np.zeros(dom.shape + (1,)),
            np.zeros(dom.shape), np.zeros(dom.shape), 1.0, 0.0,
        )
        return dom, psi, fld, L

    def test_constant_function_trivial(self):
        dom = CubeDomain(1, 3.0, 1 / 64, "dirichlet")
        fld = CoefficientField(
            dom, np.ones(dom.shape + (1, 1)), np.zeros(dom.shape + (1,)),
            np.zeros(dom.shape), np.zeros(dom.shape), 1.0, 0.0,
        )
        res = cacciopoli_check(np.ones(dom.shape), fld, 0.3, 0.8, 0.4)
        assert res["lhs"] == 0.0 and res["holds"]

    def test_sine_mode_against_closed_form(self):
        # both sides are elementary integrals of sin^2/cos^2; the annulus
        # radii sit on cell edges so the midpoint sums see clean boundaries
        h = 1 / 4096
        dom, psi, fld, L = self.d1_setup(k=2, h=h)
        r1, r2, r = 1280 * h, 3328 * h, 1664 * h  # 0.3125, 0.8125, 0.40625
        res = cacciopoli_check(psi, fld, r1, r2, r)
        w = 2.0 * math.pi / L  # frequency of sin(k pi (x+L/2)/L), k=2

        def int_cos2(a, b):
            # integral of cos(w x + phi)^2 over the two annulus components
            return sum(
                0.5 * (t - s) + (math.sin(2 * (w * t + w * L / 2))
                                 - math.sin(2 * (w * s + w * L / 2))) / (4 * w)
                for s, t in ((-b, -a), (a, b))
            )

        def int_sin2(a, b):
            return sum(
                0.5 * (t - s) - (math.sin(2 * (w * t + w * L / 2))
                                 - math.sin(2 * (w * s + w * L / 2))) / (4 * w)
                for s, t in ((-b, -a), (a, b))
            )

        lhs_exact = w**2 * int_cos2(r1, r2)
        mass_exact = int_sin2(max(r1 - r, 0.0), r2 + r)
        assert abs(res["lhs"] - lhs_exact) < 1e-6
        assert abs(res["rhs"] - res["prefactor"] * mass_exact) < 1e-6
        assert res["holds"]

    def test_homogeneity(self):
        dom, psi, fld, L = self.d1_setup(k=1, h=1 / 64)
        a = cacciopoli_check(psi, fld, 0.3, 0.8, 0.4)
        b = cacciopoli_check(2.0 * psi, fld, 0.3, 0.8, 0.4)
        assert abs(b["lhs"] - 4.0 * a["lhs"]) < 1e-12 * max(1.0, b["lhs"])
        assert abs(b["rhs"] - 4.0 * a["rhs"]) < 1e-12 * max(1.0, b["rhs"])

    def test_annulus_must_fit(self):
        dom, psi, fld, L = self.d1_setup(h=1 / 32)
        with pytest.raises(ValueError):
            cacciopoli_check(psi, fld, 0.5, 1.3, 0.3)


class TestRecordIO:
    def test_jsonl_roundtrip_and_header_isolation(self, tmp_path):
        tc = TrialConfig(d=1, bc="dirichlet", L_over_G=3, norm_V=0.0,
                         delta_over_G=0.25, seed=0, h_per_G=16)
        recs = run_trial(tc)
        path = tmp_path / "records.jsonl"
        write_records_jsonl(path, recs, config={"note": 1})
        import json

        lines = path.read_text().splitlines()
        assert "created_at" in json.loads(lines[0])
        assert len(lines) == 1 + len(recs)
        body = [json.loads(ln) for ln in lines[1:]]
        assert body[0]["psi_kind"] == recs[0].psi_kind
        assert not any("created_at" in b for b in body)

    def test_summary_csv(self, tmp_path):
        tc = TrialConfig(d=1, bc="dirichlet", L_over_G=3, norm_V=0.0,
                         delta_over_G=0.25, seed=0, h_per_G=16)
        recs = run_trial(tc)
        path = tmp_path / "summary.csv"
        write_summary_csv(path, recs)
        rows = path.read_text().splitlines()
        assert len(rows) == 1 + len(recs)
        assert "margin" in rows[0]


class TestDominatingSiteReport:
    def test_per_site_skeleton(self):
        from uclab.verifier import dominating_site_report

        L, h, T = 5, 1 / 8, 3
        rng = np.random.default_rng(3)
        psi = np.tile(rng.standard_normal(L * 8), 3)
        seq = generate_sequence(1.0, 0.25, float(L), 1, "uniform_random", seed=1)
        rep = dominating_site_report(psi, T, L, h, seq)
        assert len(rep["sites"]) == L
        assert rep["weak_mass_below_half"]
        assert rep["dominating_mass_above_half"]
        for site in rep["sites"]:
            assert site["ball_mass"] >= 0.0
            assert site["window_mass"] >= site["unit_mass"] - 1e-12


class TestWorkQueue:
    def test_parallel_records_identical_to_serial(self):
        cfgs = [
            TrialConfig(d=1, bc=bc, L_over_G=3, norm_V=nv, delta_over_G=dg,
                        seed=s, h_per_G=16)
            for bc in ("dirichlet", "periodic") for nv in (0.0, 1.0)
            for dg in (0.125, 0.25) for s in (0, 1)
        ]
        serial = [r.to_dict() for r in verify_equidistribution(cfgs)]
        parallel = [r.to_dict() for r in verify_equidistribution(cfgs, workers=4)]
        assert serial == parallel
