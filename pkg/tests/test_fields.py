"""Coefficient-field construction and validation tests."""

import math

import numpy as np
import pytest

from uclab.discretization import assemble
from uclab.fields import (
    CoefficientField,
    check_boundary_conditions,
    constant_spd_field,
    divergence_centered,
    estimate_ellipticity,
    estimate_lipschitz,
    make_self_adjoint,
    synthesize_dir_cross_field,
    synthesize_random_field,
)
from uclab.geometry import CubeDomain


def laplacian_field(dom, V=None):
    d = dom.d
    return CoefficientField(
        dom,
        np.broadcast_to(np.eye(d), dom.shape + (d, d)).copy(),
        np.zeros(dom.shape + (d,), dtype=complex),
        np.zeros(dom.shape, dtype=complex),
        V if V is not None else np.zeros(dom.shape),
        1.0,
        0.0,
    )


class TestEllipticity:
    def test_identity(self):
        dom = CubeDomain(2, 3.0, 1 / 8)
        assert estimate_ellipticity(laplacian_field(dom).A) == 1.0

    def test_explicit_diagonal(self):
        dom = CubeDomain(2, 3.0, 1 / 8)
        A = np.broadcast_to(np.diag([2.0, 0.5]), dom.shape + (2, 2)).copy()
        assert estimate_ellipticity(A) == 2.0

    def test_matches_rayleigh_sampling(self):
        rng = np.random.default_rng(0)
        dom = CubeDomain(2, 3.0, 1 / 4)
        fld = synthesize_random_field(5, dom, 1.6, 1.2)
        got = estimate_ellipticity(fld.A)
        xi = rng.standard_normal((1000, 2))
        xi /= np.linalg.norm(xi, axis=1, keepdims=True)
        quad = np.einsum("ki,...ij,kj->...k", xi, fld.A, xi)
        brute = max(float(quad.max()), float((1.0 / quad).max()))
        assert brute <= got + 1e-6
        assert got - brute < 0.05 * got  # 1000 directions nearly exhaust the extremes

    def test_flags_indefinite_cells(self):
        dom = CubeDomain(1, 3.0, 1 / 4)
        A = np.ones(dom.shape + (1, 1))
        A[0] = -1.0
        with pytest.raises(ValueError):
            estimate_ellipticity(A)


class TestLipschitz:
    def test_constant_field_zero(self):
        dom = CubeDomain(2, 3.0, 1 / 8)
        assert estimate_lipschitz(laplacian_field(dom).A, dom.h) == 0.0

    def test_linear_slope_recovered(self):
        dom = CubeDomain(1, 3.0, 1 / 128)
        x = dom.centers_1d()
        eps = 0.173
        A = (1.0 + eps * x)[:, None, None].copy()
        got = estimate_lipschitz(A, dom.h)
        assert abs(got - eps) < dom.h

    def test_row_sum_convention(self):
        dom = CubeDomain(2, 2.0, 1.0)
        A = np.zeros(dom.shape + (2, 2))
        A[..., 0, 0] = 1.0
        A[..., 1, 1] = 1.0
        A[1, :, 0, 1] = 0.25  # jump of 0.25 in both off-diagonal slots of row 0
        A[1, :, 1, 0] = 0.25
        # row-sum norm of the difference matrix is 0.25 (one off-diag per row)
        assert abs(estimate_lipschitz(A, dom.h) - 0.25) < 1e-12

    def test_monotone_under_refinement(self):
        vals = []
        for h in (1 / 16, 1 / 32, 1 / 64):
            dom = CubeDomain(1, 3.0, h)
            x = dom.centers_1d()
            A = np.exp(0.3 * np.sin(2 * math.pi * x / 3.0))[:, None, None].copy()
            vals.append(estimate_lipschitz(A, h))
        assert vals[0] <= vals[1] + 1e-8 <= vals[2] + 2e-8


class TestSelfAdjoint:
    def test_zero_drift_keeps_c_real(self):
        dom = CubeDomain(2, 3.0, 1 / 8)
        b, c = make_self_adjoint(
            np.zeros(dom.shape + (2,)), np.ones(dom.shape), dom.h
        )
        assert not b.any()
        assert not c.imag.any()

    def test_analytic_divergence(self):
        L = 3.0
        dom = CubeDomain(1, L, 1 / 128)
        x = dom.centers_1d()
        bt = np.sin(2 * math.pi * x / L)[:, None]
        _, c = make_self_adjoint(bt, np.zeros(dom.shape), dom.h, "periodic")
        exact = (math.pi / L) * np.cos(2 * math.pi * x / L)
        assert np.abs(c.imag - exact).max() < 2e-4  # O(h^2)

    def test_assembled_hermiticity_defect_vanishes_under_refinement(self):
        defects = []
        for h_per in (8, 16, 32):
            dom = CubeDomain(1, 3.0, 1.0 / h_per, "periodic")
            fld = synthesize_random_field(
                3, dom, 1.2, 0.4, norm_b=0.7, norm_c=0.3, sa=True
            )
            defects.append(assemble(fld).hermiticity_defect())
        scale = 1.0 / (1.0 / 32) ** 2
        assert all(dd <= 1e-12 * scale for dd in defects)


class TestBoundaryConditions:
    def test_diagonal_passes_dirichlet(self):
        dom = CubeDomain(2, 3.0, 1 / 8)
        rep = check_boundary_conditions(laplacian_field(dom), "dirichlet")
        assert rep["ok"] and rep["worst_violation"] == 0.0

    def test_constant_passes_periodic(self):
        dom = CubeDomain(2, 3.0, 1 / 8)
        fld = CoefficientField(
            dom, constant_spd_field(1, dom, 1.5),
            np.zeros(dom.shape + (2,)), np.zeros(dom.shape), np.zeros(dom.shape),
            1.5, 0.0,
        )
        rep = check_boundary_conditions(fld, "periodic")
        assert rep["ok"] and rep["worst_violation"] == 0.0

    def test_face_vanishing_profile_passes_dirichlet(self):
        dom = CubeDomain(2, 3.0, 1 / 16)
        fld = synthesize_dir_cross_field(2, dom, 1.4)
        rep = check_boundary_conditions(fld, "dirichlet")
        assert rep["ok"]
        assert np.abs(fld.A[..., 0, 1]).max() > 0.1  # genuinely non-diagonal

    def test_rotated_constant_fails_dirichlet(self):
        dom = CubeDomain(2, 3.0, 1 / 8)
        A = constant_spd_field(3, dom, 2.0)
        assert np.abs(A[..., 0, 1]).max() > 0.0
        fld = CoefficientField(
            dom, A, np.zeros(dom.shape + (2,)), np.zeros(dom.shape),
            np.zeros(dom.shape), 2.0, 0.0,
        )
        rep = check_boundary_conditions(fld, "dirichlet")
        assert not rep["ok"]


class TestSynthesis:
    def test_zero_lipschitz_target_gives_constant(self):
        dom = CubeDomain(2, 3.0, 1 / 8)
        fld = synthesize_random_field(9, dom, 1.3, 0.0)
        assert estimate_lipschitz(fld.A, dom.h) == 0.0
        assert abs(estimate_ellipticity(fld.A) - 1.3) < 1e-12

    def test_seed_reproducibility_bit_identical(self):
        dom = CubeDomain(2, 3.0, 1 / 16)
        a = synthesize_random_field(11, dom, 1.4, 0.8, norm_V=0.5, sa=True)
        b = synthesize_random_field(11, dom, 1.4, 0.8, norm_V=0.5, sa=True)
        assert np.array_equal(a.A, b.A)
        assert np.array_equal(a.V, b.V)
        assert np.array_equal(a.c, b.c)

    def test_targets_hit_within_band(self):
        dom = CubeDomain(2, 3.0, 1 / 32)
        for seed_, t1, t2 in ((1, 1.4, 0.8), (2, 1.2, 0.5), (3, 1.7, 2.0)):
            fld = synthesize_random_field(seed_, dom, t1, t2)
            assert abs(estimate_ellipticity(fld.A) - t1) <= 0.05 * t1
            assert abs(estimate_lipschitz(fld.A, dom.h) - t2) <= 0.05 * t2

    def test_unreachable_target_rejected(self):
        dom = CubeDomain(1, 3.0, 1 / 8)
        with pytest.raises(ValueError):
            synthesize_random_field(1, dom, 1.0001, 50.0)

    def test_potential_bounded_by_norm(self):
        dom = CubeDomain(1, 3.0, 1 / 8)
        fld = synthesize_random_field(4, dom, 1.0, 0.0, norm_V=0.7)
        assert np.abs(fld.V).max() <= 0.7

    def test_symmetry_exact_after_synthesis(self):
        dom = CubeDomain(2, 3.0, 1 / 16)
        for seed_ in range(4):
            fld = synthesize_random_field(seed_, dom, 1.3, 0.0)
            assert np.array_equal(fld.A, np.swapaxes(fld.A, -1, -2))
            fld2 = synthesize_dir_cross_field(seed_, dom, 1.3)
            assert np.array_equal(fld2.A, np.swapaxes(fld2.A, -1, -2))


class TestDivergence:
    def test_periodic_wraps(self):
        dom = CubeDomain(1, 2.0, 1 / 4)
        b = np.arange(8.0)[:, None]
        div = divergence_centered(b, dom.h, "periodic")
        assert div[0] == (b[1, 0] - b[-1, 0]) / (2 * dom.h)

    def test_one_sided_second_order_at_faces(self):
        dom = CubeDomain(1, 2.0, 1 / 64)
        x = dom.centers_1d()
        b = (x**2)[:, None]
        div = divergence_centered(b, dom.h, "dirichlet")
        assert np.abs(div.ravel() - 2 * x).max() < 1e-10  # exact for quadratics


class TestFieldFiles:
    def test_save_load_roundtrip_bit_for_bit(self, tmp_path):
        dom = CubeDomain(2, 3.0, 1 / 8, "periodic")
        fld = synthesize_random_field(1, dom, 1.2, 0.5, norm_V=0.4,
                                      norm_b=0.3, sa=True)
        path = tmp_path / "field.npz"
        from uclab.fields import load_field, save_field

        save_field(path, fld)
        back = load_field(path)
        assert back.domain == fld.domain
        assert np.array_equal(back.A, fld.A)
        assert np.array_equal(back.b, fld.b)
        assert np.array_equal(back.c, fld.c)
        assert np.array_equal(back.V, fld.V)
        assert back.declared_theta1 == fld.declared_theta1
