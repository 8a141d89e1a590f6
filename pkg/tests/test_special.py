import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from cylinvert import checks
from cylinvert.special import besseli, besselj, besselk, bessely

EULER_GAMMA = 0.5772156649015329


def j_series(n, x, terms=40):
    """Plain ascending series, used as an independent oracle for small x."""
    return sum((-1) ** k * (x / 2) ** (n + 2 * k) / (math.factorial(k) * math.factorial(n + k))
               for k in range(terms))


class TestBesselJ:
    def test_origin(self):
        v, d = besselj(0, 0.0)
        assert v == 1.0 and d == 0.0
        v, d = besselj(1, 0.0)
        assert v == 0.0 and d == pytest.approx(0.5)

    def test_first_zero_of_j0(self):
        assert abs(besselj(0, 2.404825557695773).value) < 1e-9
        assert abs(j_series(0, 2.404825557695773)) < 1e-9

    @pytest.mark.parametrize("n,x", [(0, 0.7), (3, 1.2), (5, 2.5), (10, 0.3)])
    def test_matches_series(self, n, x):
        assert besselj(n, x).value == pytest.approx(j_series(n, x), rel=1e-12)

    def test_deep_underflow_region_resolved(self):
        # values near 1e-300 are still representable and must not flush to zero
        for n, x in [(63, 1e-3), (64, 1e-3)]:
            lead = math.exp(n * math.log(x / 2) - math.lgamma(n + 1))
            v, d = besselj(n, x)
            assert v == pytest.approx(lead, rel=1e-6)
            assert d == pytest.approx(n / x * lead, rel=1e-6)

    def test_negative_order(self):
        assert besselj(-3, 1.4).value == pytest.approx(-besselj(3, 1.4).value)
        assert besselj(-2, 1.4).value == pytest.approx(besselj(2, 1.4).value)

    def test_domain(self):
        with pytest.raises(ValueError):
            besselj(0, -1.0)
        with pytest.raises(ValueError):
            besselj(0.5, 1.0)


class TestBesselY:
    def test_wronskian_point(self):
        J, Jp = besselj(3, 1.7)
        Y, Yp = bessely(3, 1.7)
        assert (J * Yp - Jp * Y) == pytest.approx(2 / (np.pi * 1.7), rel=1e-12)

    def test_small_argument(self):
        x = 1e-4
        oracle = 2 / np.pi * np.log(x / 2) + 2 * EULER_GAMMA / np.pi
        assert abs(bessely(0, x).value - oracle) <= 1e-6

    def test_first_zero_of_y0(self):
        assert abs(bessely(0, 0.893576966279167).value) < 1e-9

    def test_domain(self):
        with pytest.raises(ValueError):
            bessely(0, 0.0)


class TestBesselIK:
    def test_origin(self):
        v, d = besseli(0, 0.0)
        assert v == 1.0 and d == 0.0

    def test_wronskian_point(self):
        I, Ip = besseli(2, 3.3)
        K, Kp = besselk(2, 3.3)
        assert (I * Kp - Ip * K) == pytest.approx(-1 / 3.3, rel=1e-12)

    def test_k0_integral_representation(self):
        oracle, _ = quad(lambda t: np.exp(-np.cosh(t)), 0, 30)  # integrand underflows past t = 30
        assert abs(besselk(0, 1.0).value - oracle) < 1e-8
        assert oracle == pytest.approx(0.421024438, abs=1e-8)

    def test_overflow_is_explicit(self):
        with pytest.raises(OverflowError):
            besseli(0, 800.0)
        with pytest.raises(OverflowError):
            besselk(0, 800.0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 30), st.floats(0.05, 600))
    def test_scaled_pairs(self, n, x):
        I, Ip = besseli(n, x)
        Is, Ips = besseli(n, x, scaled=True)
        K, Kp = besselk(n, x)
        Ks, Kps = besselk(n, x, scaled=True)
        if np.isfinite(I) and I > 1e-290:
            assert Is == pytest.approx(I * np.exp(-x), rel=1e-10)
            assert Ips == pytest.approx(Ip * np.exp(-x), rel=1e-10)
        if np.isfinite(K) and 1e-290 < K < 1e290:
            assert Ks == pytest.approx(K * np.exp(x), rel=1e-10)
            assert Kps == pytest.approx(Kp * np.exp(x), rel=1e-10)

    def test_domain(self):
        with pytest.raises(ValueError):
            besseli(0, -0.1)
        with pytest.raises(ValueError):
            besselk(0, 0.0)


class TestSweep:
    def test_wronskians(self):
        wjy, wik, _ = checks.wronskian_errors()
        assert wjy <= 1e-10 and wik <= 1e-10

    def test_recurrences(self):
        rec, der = checks.recurrence_errors()
        assert rec <= 1e-9
        assert der <= 1e-10

    def test_vectorised_shapes(self):
        n = np.arange(4)[:, None]
        x = np.linspace(0.1, 2, 5)[None, :]
        assert besselj(n, x).value.shape == (4, 5)
        assert besselk(n, x, scaled=True).derivative.shape == (4, 5)
