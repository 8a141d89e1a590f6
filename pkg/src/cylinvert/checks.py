"""Invariant suites for the cylinder functions and the modal Green's kernel.

Each check returns a :class:`CheckResult`; :func:`run_all` bundles them
for the ``greens-check`` command and the test suite.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import jnp_zeros

from .grids import Grids
from .greens import (
    RESONANCE_RTOL,
    build_kernel_table,
    kappa_squared,
    radial_kernel,
    scan_resonances,
)
from .special import besseli, besselj, besselk, bessely


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    limit: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"{tag}  {self.name}: {self.value:.3e} (limit {self.limit:.1e}){extra}"


def _result(name, value, limit, detail=""):
    value = float(value)
    return CheckResult(name, bool(np.isfinite(value) and value <= limit), value, limit, detail)


def sweep_points(n_max: int = 64, count: int = 200, lo: float = 1e-3, hi: float = 1e2):
    n = np.arange(n_max + 1)[:, None]
    x = np.logspace(np.log10(lo), np.log10(hi), count)[None, :]
    return n, x


def _finite(*arrays):
    mask = np.ones(np.broadcast(*arrays).shape, bool)
    for a in arrays:
        mask &= np.isfinite(a)
    return mask


def wronskian_errors(n_max: int = 64, count: int = 200):
    """Relative errors of J Y' - J' Y = 2/(pi x) and I K' - I' K = -1/x.

    Points where a product leaves the double range are skipped and counted.
    """
    n, x = sweep_points(n_max, count)
    J, Jp = besselj(n, x)
    Y, Yp = bessely(n, x)
    I, Ip = besseli(n, x)
    K, Kp = besselk(n, x)
    with np.errstate(all="ignore"):
        # relative to the size of the two products, which is what roundoff sees
        wjy = np.abs(J * Yp - Jp * Y - 2 / (np.pi * x)) / (2 / (np.pi * x))
        wik = np.abs(I * Kp - Ip * K + 1 / x) / (1 / x)
    okj = _finite(wjy)
    oki = _finite(wik)
    skipped = int((~okj).sum() + (~oki).sum())
    return float(wjy[okj].max()), float(wik[oki].max()), skipped


def recurrence_errors(n_max: int = 64, count: int = 200):
    """Three-term recurrences and derivative identities, n = 0..n_max.

    Returns ``(recurrence, derivative)`` maximum relative errors.  Errors
    are scaled by the largest term so that zeros of J and Y do not divide.
    """
    n, x = sweep_points(n_max, count)
    nn = np.broadcast_to(n, np.broadcast(n, x).shape)
    xx = np.broadcast_to(x, nn.shape)
    rec, der = [], []
    with np.errstate(all="ignore"):
        for fun, sgn_rec, dsign in ((besselj, 1, 1), (bessely, 1, 1), (besseli, -1, 1), (besselk, -1, -1)):
            lo, _ = fun(nn - 1, xx)
            mid, dmid = fun(nn, xx)
            hi, _ = fun(nn + 1, xx)
            if fun is besselk:
                lhs = hi - lo
            else:
                lhs = lo + sgn_rec * hi
            rhs = 2 * nn / xx * mid
            scale = np.maximum.reduce([np.abs(lo), np.abs(hi), np.abs(rhs)])
            e = np.abs(lhs - rhs) / scale
            # J' = J_{n-1} - n/x J_n (same for Y, I); K' = -K_{n-1} - n/x K_n
            dref = dsign * lo - nn / xx * mid
            d = np.abs(dmid - dref) / np.maximum(np.abs(lo), np.abs(nn / xx * mid))
            # n = 0 has no lower neighbour in the recurrence (2n/x C_n = 0 holds trivially by symmetry)
            rec.append(e[1:][_finite(e[1:])])
            der.append(d[_finite(d)])
    return float(max(r.max() for r in rec)), float(max(d.max() for d in der))


def special_suite(n_max: int = 64, count: int = 200) -> list:
    wjy, wik, skipped = wronskian_errors(n_max, count)
    rec, der = recurrence_errors(n_max, count)
    note = f"{skipped} points outside double range" if skipped else ""
    return [
        _result("wronskian J/Y", wjy, 1e-10, note),
        _result("wronskian I/K", wik, 1e-10, note),
        _result("recurrence J/Y/I/K", rec, 1e-9),
        _result("derivative identities", der, 1e-10),
    ]


def _sample_modes(grids: Grids, count: int, seed: int):
    rng = np.random.default_rng(seed)
    i = rng.integers(0, grids.spec.Nphi, count)
    m = rng.integers(0, grids.spec.Nz, count)
    return [(int(grids.n[a]), float(grids.Omega[b]), int(a), int(b)) for a, b in zip(i, m)]


def symmetry_error(table) -> float:
    """max |g(r'_i, r'_j) - g(r'_j, r'_i)| / max |g| over the X block."""
    GX = table.GX
    return float(np.abs(GX - np.swapaxes(GX, -1, -2)).max() / np.abs(GX).max())


def neumann_residual(n, Omega, omega, grids: Grids, eps: float, h: float = 1e-5) -> float:
    """|d g/d r| at r = b by a one-sided 3-point stencil, over max |g| on Y x X."""
    b = grids.geom.b
    g = radial_kernel(n, Omega, omega, grids.geom, eps)
    rp = grids.rp
    rows = np.array([b - 2 * h, b - h, b])
    vals = g(rows[:, None], rp[None, :])
    d = (3 * vals[2] - 4 * vals[1] + vals[0]) / (2 * h)
    scale = np.abs(g(grids.r[:, None], rp[None, :])).max()
    return float(np.abs(d).max() / scale) if scale > 0 else 0.0


def _rate(n, k2, r):
    # local radial variation rate of g: sqrt(|kappa^2| + n^2 / r^2)
    return np.sqrt(abs(k2) + n**2 / np.asarray(r, float) ** 2)


def derivative_jump(n, Omega, omega, rp: float, geom, eps: float = 0.0, h: float | None = None) -> float:
    """g'(r'+) - g'(r'-) from second-order one-sided differences.

    The default step is 1e-4 shrunk by the local variation rate of the mode.
    """
    if h is None:
        h = 1e-4 / max(1.0, float(_rate(n, kappa_squared(Omega, omega, eps), rp)))
    g = radial_kernel(n, Omega, omega, geom, eps)
    pts = rp + h * np.arange(-2, 3)
    v = g(pts, np.full(5, rp))
    right = (-3 * v[2] + 4 * v[3] - v[4]) / (2 * h)
    left = (3 * v[2] - 4 * v[1] + v[0]) / (2 * h)
    return complex(right - left).real


def jump_error(n, Omega, omega, rp: float, geom, eps: float = 0.0, h: float | None = None) -> float:
    """Relative deviation of the derivative jump from 1/(2 pi r')."""
    target = 1 / (2 * np.pi * rp)
    return abs(derivative_jump(n, Omega, omega, rp, geom, eps, h) - target) / target


def ode_residual(n, Omega, omega, grids: Grids, eps: float) -> float:
    """Relative residual of the radial operator applied to g away from r = r'."""
    k2 = kappa_squared(Omega, omega, eps)
    g = radial_kernel(n, Omega, omega, grids.geom, eps)
    rp = grids.rp[1:-1:4]
    rr = np.concatenate([grids.r, grids.rp[1:]])
    R, RP = np.meshgrid(rr, rp, indexing="ij")
    h = 1e-3 / np.maximum(1.0, _rate(n, k2, R))
    keep = np.abs(R - RP) > 3 * h
    R, RP, h = R[keep], RP[keep], h[keep]
    g0, gp, gm = g(R, RP), g(R + h, RP), g(R - h, RP)
    d2 = (gp - 2 * g0 + gm) / h**2
    d1 = (gp - gm) / (2 * h) / R
    t3 = n**2 / R**2 * g0
    t4 = k2 * g0
    res = np.abs(d2 + d1 - t3 + t4)
    scale = np.abs(d2) + np.abs(d1) + np.abs(t3) + np.abs(t4)
    # values deep in the subnormal range carry no relative precision
    ok = (scale > 0) & (np.abs(g0) > 1e-250)
    return float((res[ok] / scale[ok]).max()) if ok.any() else 0.0


def neumann_eigen_omega(n: int = 1, b: float = 4.0) -> float:
    """omega placing the (n, Omega = 0) pair on the first Neumann eigenvalue."""
    return float(jnp_zeros(abs(n), 1)[0] / b) if n else float(jnp_zeros(0, 2)[1] / b)


def mode_decay_violations(table, n_start: int = 10) -> int:
    """Count (m, |n|) steps past ``n_start`` where max |G_n| over the X block grows."""
    n = np.abs(table.grids.n)
    order = np.array([np.flatnonzero(n == k)[0] for k in range(n_start, n.max() + 1)], dtype=int)
    if order.size < 2:
        return 0
    peak = np.abs(table.GX[order]).max(axis=(-1, -2))  # (|n|, m)
    return int((np.diff(peak, axis=0) > 0).sum())


def resonance_scan(omega: float, grids: Grids, eps: float):
    """Return ``(flagged (n, m) pairs, table or None)``; the table is built only when usable."""
    flagged = scan_resonances(omega, grids, eps)
    if flagged and eps == 0:
        return flagged, None
    return flagged, build_kernel_table(omega, grids, eps, check=False)


def greens_suite(grids: Grids, omega: float, eps: float, modes: int = 20, seed: int = 0) -> list:
    """Kernel invariants on the configured grids at one frequency."""
    out = []
    flagged, table = resonance_scan(omega, grids, eps)
    if flagged:
        shown = ", ".join(f"(n={n}, m={m})" for n, m in flagged[:10])
        # with damping the kernel stays finite; flagged pairs are reported, not fatal
        out.append(CheckResult("resonance scan", table is not None, float(len(flagged)), 0.0,
                               f"Neumann resonance at omega={omega}: {shown}"))
        if table is None:
            return out
    else:
        out.append(CheckResult("resonance scan", True, 0.0, 0.0, "no flagged modes"))
    finite = bool(np.isfinite(table.GX).all() and np.isfinite(table.GY).all())
    out.append(CheckResult("finite table", finite, 0.0 if finite else 1.0, 0.0))
    out.append(_result("symmetry", symmetry_error(table), 1e-10))

    sample = _sample_modes(grids, modes, seed)
    neu = max(neumann_residual(n, Om, omega, grids, eps) for n, Om, _, _ in sample)
    out.append(_result("neumann boundary", neu, 1e-3))

    jumps = []
    for n, Om, _, _ in sample:
        for rp in grids.rp[2:-2:8]:
            jumps.append(jump_error(n, Om, omega, rp, grids.geom, eps))
    out.append(_result("derivative jump", max(jumps), 1e-3))

    ode = max(ode_residual(n, Om, omega, grids, eps) for n, Om, _, _ in sample)
    out.append(_result("modal ODE residual", ode, 1e-4))

    out.append(_result("mode decay violations", mode_decay_violations(table), 0.0))

    # evanescent decay: |g_n(b, r')| shrinks as Omega grows past omega
    m_far = int(np.argmax(np.abs(grids.Omega)))
    i0 = int(np.argmin(np.abs(grids.n)))
    ratio = np.abs(table.GY[i0, m_far]).max() / np.abs(table.GY[i0, 0]).max()
    out.append(_result("evanescent decay (far/near)", ratio, 1e-6))
    return out


def run_all(grids: Grids, omegas, eps: float, modes: int = 20, seed: int = 0) -> list:
    results = special_suite()
    for omega in omegas:
        for r in greens_suite(grids, omega, eps, modes, seed):
            r.name = f"omega={omega:g} {r.name}"
            results.append(r)
    return results


__all__ = [
    "CheckResult",
    "RESONANCE_RTOL",
    "derivative_jump",
    "greens_suite",
    "jump_error",
    "mode_decay_violations",
    "neumann_eigen_omega",
    "neumann_residual",
    "ode_residual",
    "recurrence_errors",
    "resonance_scan",
    "run_all",
    "special_suite",
    "symmetry_error",
    "wronskian_errors",
]
