"""Integer-order cylinder functions J, Y, I, K with first derivatives.

Values come from :mod:`scipy.special` (AMOS/Cephes). This module adds the
domain checks, negative-order mapping, derivative pairing and the
exponentially scaled variants used by the Green's function module.

Real arguments are checked against each function's domain. Complex
arguments (used only by the damped Green's function path) are passed
through unchecked.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy import special as sp

# largest argument for which unscaled I_n / K_n stay representable
_EXP_LIMIT = 700.0


class CylinderFunValue(NamedTuple):
    value: np.ndarray
    derivative: np.ndarray


def _prep(n, x):
    n = np.asarray(n)
    if not np.issubdtype(n.dtype, np.integer):
        if np.any(n != np.round(n)):
            raise ValueError("only integer orders are supported")
        n = n.astype(int)
    x = np.asarray(x)
    if not np.iscomplexobj(x):
        x = x.astype(float)
        if np.any(np.isnan(x)):
            raise ValueError("NaN argument")
    return n, x


def _check(x, *, strict: bool, name: str):
    if np.iscomplexobj(x):
        return
    bad = x <= 0 if strict else x < 0
    if np.any(bad):
        rel = ">" if strict else ">="
        raise ValueError(f"{name}: argument must be {rel} 0")


def _sign(n):
    # (-1)^n for negative orders of J and Y
    return np.where((n < 0) & (np.abs(n) % 2 == 1), -1.0, 1.0)


def _j_series(m, x, terms: int = 20):
    """Ascending series of J_m and J_m' for small real x, prefactor in log space."""
    m = np.asarray(m, float)
    x = np.asarray(x, float)
    q = -(x / 2) ** 2
    val = np.zeros(np.broadcast(m, x).shape)
    der = np.zeros_like(val)
    t = np.ones_like(val)  # (-x^2/4)^k / (k! (m+1)_k)
    for k in range(terms):
        val = val + t
        der = der + (m + 2 * k) * t
        t = t * q / ((k + 1) * (m + k + 1))
    with np.errstate(divide="ignore"):
        lead = np.exp(m * np.log(x / 2) - sp.gammaln(m + 1))
    return lead * val, lead * der / x


def besselj(n, x) -> CylinderFunValue:
    """J_n(x) and J_n'(x)."""
    n, x = _prep(n, x)
    _check(x, strict=False, name="besselj")
    m = np.abs(n)
    s = _sign(n)
    v, d = sp.jv(m, x), sp.jvp(m, x)
    if not np.iscomplexobj(x):
        # the library flushes J to zero around 1e-290; the series still resolves it
        lost = (x > 0) & (x < 1) & ((v == 0) | (d == 0))
        if np.any(lost):
            v, d = np.array(v, float), np.array(d, float)
            mm, xx = np.broadcast_arrays(m, x)
            sv, sd = _j_series(mm[lost], xx[lost])
            v[lost], d[lost] = sv, sd
    return CylinderFunValue(s * v, s * d)


def bessely(n, x) -> CylinderFunValue:
    """Y_n(x) and Y_n'(x) for x > 0."""
    n, x = _prep(n, x)
    _check(x, strict=True, name="bessely")
    m = np.abs(n)
    s = _sign(n)
    return CylinderFunValue(s * sp.yv(m, x), s * sp.yvp(m, x))


def besseli(n, x, scaled: bool = False) -> CylinderFunValue:
    """I_n(x) and I_n'(x); with ``scaled`` both are multiplied by exp(-|Re x|)."""
    n, x = _prep(n, x)
    _check(x, strict=False, name="besseli")
    m = np.abs(n)
    if scaled:
        v = sp.ive(m, x)
        d = 0.5 * (sp.ive(m - 1, x) + sp.ive(m + 1, x))
        return CylinderFunValue(v, d)
    if np.any(np.abs(np.real(x)) > _EXP_LIMIT):
        raise OverflowError("besseli: argument too large, use scaled=True")
    return CylinderFunValue(sp.iv(m, x), sp.ivp(m, x))


def besselk(n, x, scaled: bool = False) -> CylinderFunValue:
    """K_n(x) and K_n'(x) for x > 0; with ``scaled`` both are multiplied by exp(x)."""
    n, x = _prep(n, x)
    _check(x, strict=True, name="besselk")
    m = np.abs(n)
    if scaled:
        v = sp.kve(m, x)
        d = -0.5 * (sp.kve(m - 1, x) + sp.kve(m + 1, x))
        return CylinderFunValue(v, d)
    if np.any(np.real(x) > _EXP_LIMIT):
        raise OverflowError("besselk: argument too large (underflow), use scaled=True")
    return CylinderFunValue(sp.kv(m, x), sp.kvp(m, x))
