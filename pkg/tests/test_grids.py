import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from cylinvert.grids import (
    Geometry,
    GridSpec,
    fz_forward,
    fz_inverse,
    make_grids,
    modal_norm2,
    phi_series,
    phi_synthesis,
    physical_norm2,
    to_modal,
    to_physical,
    trapezoid_weights,
)


class TestGeometry:
    def test_defaults(self):
        g = Geometry()
        assert (g.a, g.r0, g.b, g.z_half) == (1.0, 3.0, 4.0, 2.0)

    @pytest.mark.parametrize("kw", [{"a": 0.0}, {"r0": 0.5}, {"r0": 5.0}, {"z_half": 0.0}, {"b": 2.0}])
    def test_rejects_bad_ordering(self, kw):
        with pytest.raises(ValueError):
            Geometry(**kw)

    @pytest.mark.parametrize("kw", [{"Nr": 1}, {"Nz": 0}, {"Nphi": -4}, {"Nrp": 1}])
    def test_rejects_small_counts(self, kw):
        with pytest.raises(ValueError):
            GridSpec(**kw)


class TestMakeGrids:
    def test_default_z_and_omega(self, grids):
        assert grids.dz == pytest.approx(0.0625)
        assert np.abs(grids.Omega).max() == pytest.approx(np.pi / 0.0625)
        assert np.abs(grids.Omega).max() == pytest.approx(50.265, abs=1e-3)
        assert grids.Omega.min() == pytest.approx(-np.pi / grids.dz)
        assert grids.Omega.max() < np.pi / grids.dz

    def test_radial_grids(self, grids):
        assert grids.rp[0] == 0.0 and grids.rp[-1] == 1.0
        assert np.allclose(np.diff(grids.rp), 1 / 32)
        assert grids.r[0] == 3.0 and grids.r[-1] == 4.0
        assert np.allclose(np.diff(grids.r), 1 / 31)

    def test_phi_and_modes(self, grids):
        assert grids.phi.size == 90 and grids.phi[0] == 0.0
        assert grids.n[0] == 0 and grids.n.min() == -45 and grids.n.max() == 44

    def test_trapezoid_integrates_linear_exactly(self):
        x = np.linspace(0, 1, 33)
        assert trapezoid_weights(x) @ x == pytest.approx(0.5, rel=1e-14)


class TestFz:
    def test_zero(self, grids):
        assert np.all(fz_forward(np.zeros(grids.spec.Nz), grids) == 0)
        assert np.all(fz_inverse(np.zeros(grids.spec.Nz), grids) == 0)

    def test_gaussian_against_quadrature(self, grids):
        # stated example on the default window [-2, 2); the tails beyond it carry sqrt(pi) erfc(2) ~ 8e-3
        oracle, _ = quad(lambda t: np.exp(-t * t), -np.inf, np.inf)
        F = fz_forward(np.exp(-grids.z**2), grids)
        assert oracle == pytest.approx(1.77245, abs=1e-5)
        assert abs(F[0] - oracle) < 1e-6

    def test_gaussian_truncated_window(self, grids):
        oracle, _ = quad(lambda t: np.exp(-t * t), -grids.geom.z_half, grids.geom.z_half)
        F = fz_forward(np.exp(-grids.z**2), grids)
        # composite trapezoid error, h^2/12 * |f'(2) - f'(-2)| ~ 5e-5
        assert abs(F[0] - oracle) < 1e-4

    def test_gaussian_wide_window(self):
        g = make_grids(Geometry(z_half=6.0), GridSpec(Nz=64))
        oracle, _ = quad(lambda t: np.exp(-t * t), -np.inf, np.inf)
        F = fz_forward(np.exp(-g.z**2), g)
        assert abs(F[0] - oracle) < 1e-6

    def test_shifted_gaussian_phase(self):
        # transform of exp(-(z-c)^2) is sqrt(pi) exp(-Omega^2/4) exp(i Omega c)
        g = make_grids(Geometry(z_half=6.0), GridSpec(Nz=64))
        c = 0.3
        F = fz_forward(np.exp(-(g.z - c) ** 2), g)
        exact = np.sqrt(np.pi) * np.exp(-g.Omega**2 / 4) * np.exp(1j * g.Omega * c)
        assert np.abs(F - exact).max() < 1e-6

    def test_impulse_round_trip(self, grids):
        f = np.zeros(grids.spec.Nz)
        f[17] = 1.0
        assert np.allclose(fz_inverse(fz_forward(f, grids), grids), f, atol=1e-14)

    def test_axis_argument(self, small_grids, rng):
        f = rng.standard_normal((3, small_grids.spec.Nz, 2))
        F = fz_forward(f, small_grids, axis=1)
        assert np.allclose(F[1, :, 0], fz_forward(f[1, :, 0], small_grids))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31), st.floats(-3, 3), st.floats(-3, 3))
    def test_linearity(self, seed, alpha, beta):
        g = make_grids(Geometry(), GridSpec(Nz=32))
        rng = np.random.default_rng(seed)
        f, h = rng.standard_normal((2, 32)) + 1j * rng.standard_normal((2, 32))
        lhs = fz_forward(alpha * f + beta * h, g)
        rhs = alpha * fz_forward(f, g) + beta * fz_forward(h, g)
        assert np.allclose(lhs, rhs, atol=1e-12 * (1 + np.abs(lhs).max()))


class TestPhiSeries:
    def test_single_harmonic(self, grids):
        c = phi_series(np.exp(3j * grids.phi))
        expected = np.zeros(grids.spec.Nphi, complex)
        expected[3] = 1.0
        assert np.abs(c - expected).max() <= 1e-13

    def test_constant(self, grids):
        c = phi_series(np.ones(grids.spec.Nphi))
        assert c[0] == pytest.approx(1.0, abs=1e-15)
        assert np.abs(c[1:]).max() <= 1e-15

    def test_negative_harmonic_wraps(self, grids):
        c = phi_series(np.exp(-2j * grids.phi))
        assert abs(c[grids.n == -2][0] - 1) < 1e-13

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31))
    def test_round_trip_and_conjugate_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        f = rng.standard_normal(16)
        c = phi_series(f)
        assert np.allclose(phi_synthesis(c), f, atol=1e-13)
        assert np.allclose(np.roll(c[::-1], 1), c.conj(), atol=1e-15)


class TestNorms:
    def test_parseval_physical_vs_modal(self, small_grids, rng):
        g = small_grids
        f = rng.standard_normal((g.spec.Nrp, g.spec.Nphi, g.spec.Nz)) + 0j
        m = to_modal(f, g)
        assert physical_norm2(f, g, "X") == pytest.approx(modal_norm2(m, g, "X"), rel=1e-12)
        assert np.allclose(to_physical(m, g), f, atol=1e-13)

    def test_modal_layout(self, small_grids, rng):
        g = small_grids
        f = rng.standard_normal((g.spec.Nr, g.spec.Nphi, g.spec.Nz))
        assert to_modal(f, g).shape == (g.spec.Nphi, g.spec.Nz, g.spec.Nr)
