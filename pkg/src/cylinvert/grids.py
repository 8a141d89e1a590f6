"""Discrete grids and Fourier transforms in z and phi.

Conventions (fixed here, used by every other module):

    F(Omega_m) = dz * sum_j f(z_j) exp(+i Omega_m z_j)
    f(z_j)     = dOmega / (2 pi) * sum_m F(Omega_m) exp(-i Omega_m z_j)
    f_n        = 1/Nphi * sum_j f(phi_j) exp(-i n phi_j)
    f(phi_j)   = sum_n f_n exp(+i n phi_j)

Physical fields are stored with axes ``(r, phi, z)``; modal fields with
axes ``(n, m, r)``, where ``n`` and ``m`` follow the standard DFT index
layout (non-negative indices first, negative ones wrapped to the end).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Geometry:
    """Radii of the scatterer cylinder X, the measurement layer Y and z extent."""

    a: float = 1.0
    r0: float = 3.0
    b: float = 4.0
    z_half: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.a < self.r0 < self.b:
            raise ValueError(
                f"geometry requires 0 < a < r0 < b, got a={self.a}, r0={self.r0}, b={self.b}"
            )
        if not self.z_half > 0.0:
            raise ValueError(f"z_half must be positive, got {self.z_half}")


@dataclass(frozen=True)
class GridSpec:
    Nr: int = 32
    Nrp: int = 33
    Nphi: int = 90
    Nz: int = 64

    def __post_init__(self):
        for name in ("Nr", "Nrp", "Nphi", "Nz"):
            value = getattr(self, name)
            if int(value) != value or value < 2:
                raise ValueError(f"{name} must be an integer >= 2, got {value}")


@dataclass(frozen=True)
class Grids:
    """All coordinate arrays for one (Geometry, GridSpec) pair."""

    geom: Geometry
    spec: GridSpec
    r: np.ndarray
    rp: np.ndarray
    phi: np.ndarray
    z: np.ndarray
    Omega: np.ndarray
    n: np.ndarray

    @property
    def dz(self) -> float:
        return 2.0 * self.geom.z_half / self.spec.Nz

    @property
    def dOmega(self) -> float:
        return 2.0 * np.pi / (self.spec.Nz * self.dz)

    @property
    def dphi(self) -> float:
        return 2.0 * np.pi / self.spec.Nphi

    @property
    def mu_r(self) -> np.ndarray:
        return trapezoid_weights(self.r)

    @property
    def mu_rp(self) -> np.ndarray:
        return trapezoid_weights(self.rp)

    def radial(self, region: str) -> np.ndarray:
        if region == "X":
            return self.rp
        if region == "Y":
            return self.r
        raise ValueError(f"unknown region {region!r}")

    def radial_weights(self, region: str) -> np.ndarray:
        """Trapezoid weight times radius, i.e. the discrete ``r dr`` measure."""
        rr = self.radial(region)
        return trapezoid_weights(rr) * rr


def trapezoid_weights(x: np.ndarray) -> np.ndarray:
    """Composite trapezoid weights on a uniform grid including both endpoints."""
    h = x[1] - x[0]
    w = np.full(x.shape, h)
    w[0] = w[-1] = 0.5 * h
    return w


def make_grids(geom: Geometry, spec: GridSpec) -> Grids:
    """Build the r, r', phi, z and Omega grids.

    >>> g = make_grids(Geometry(), GridSpec())
    >>> float(g.dz), round(float(-g.Omega.min()), 3)
    (0.0625, 50.265)
    """
    if min(spec.Nr, spec.Nrp, spec.Nphi, spec.Nz) <= 0:
        raise ValueError("grid counts must be positive")
    r = np.linspace(geom.r0, geom.b, spec.Nr)
    rp = np.linspace(0.0, geom.a, spec.Nrp)
    phi = 2.0 * np.pi * np.arange(spec.Nphi) / spec.Nphi
    dz = 2.0 * geom.z_half / spec.Nz
    z = -geom.z_half + dz * np.arange(spec.Nz)
    Omega = 2.0 * np.pi * np.fft.fftfreq(spec.Nz, d=dz)
    n = np.fft.fftfreq(spec.Nphi, d=1.0 / spec.Nphi).round().astype(int)
    return Grids(geom=geom, spec=spec, r=r, rp=rp, phi=phi, z=z, Omega=Omega, n=n)


def _phase(grids: Grids) -> np.ndarray:
    # accounts for the grid starting at -z_half instead of 0
    return np.exp(-1j * grids.Omega * grids.geom.z_half)


def fz_forward(f: np.ndarray, grids: Grids, axis: int = -1) -> np.ndarray:
    """Approximate the continuous transform with kernel exp(+i Omega z)."""
    f = np.asarray(f)
    if f.shape[axis] != grids.spec.Nz:
        raise ValueError(f"expected {grids.spec.Nz} z samples on axis {axis}, got {f.shape[axis]}")
    F = np.fft.ifft(f, axis=axis, norm="forward") * grids.dz
    shape = [1] * F.ndim
    shape[axis] = -1
    return F * _phase(grids).reshape(shape)


def fz_inverse(F: np.ndarray, grids: Grids, axis: int = -1) -> np.ndarray:
    """Exact discrete inverse of :func:`fz_forward`."""
    F = np.asarray(F)
    if F.shape[axis] != grids.spec.Nz:
        raise ValueError(f"expected {grids.spec.Nz} Omega samples on axis {axis}, got {F.shape[axis]}")
    shape = [1] * F.ndim
    shape[axis] = -1
    G = F * np.conj(_phase(grids)).reshape(shape)
    # dOmega / (2 pi) * sum_m == 1 / (Nz dz) * sum_m
    return np.fft.fft(G, axis=axis) / (grids.spec.Nz * grids.dz)


def phi_series(f: np.ndarray, axis: int = -1) -> np.ndarray:
    """Fourier-series coefficients f_n, DFT index layout along ``axis``."""
    return np.fft.fft(f, axis=axis, norm="forward")


def phi_synthesis(fn: np.ndarray, axis: int = -1) -> np.ndarray:
    """Sum the Fourier series back onto the phi grid."""
    return np.fft.ifft(fn, axis=axis, norm="forward")


def to_modal(field: np.ndarray, grids: Grids) -> np.ndarray:
    """Physical ``(r, phi, z)`` array to modal ``(n, m, r)`` array."""
    F = fz_forward(field, grids, axis=2)
    Fn = phi_series(F, axis=1)
    return np.ascontiguousarray(np.transpose(Fn, (1, 2, 0)))


def to_physical(modal: np.ndarray, grids: Grids) -> np.ndarray:
    """Modal ``(n, m, r)`` array to physical ``(r, phi, z)`` array."""
    F = np.transpose(modal, (2, 0, 1))
    f = phi_synthesis(F, axis=1)
    return np.ascontiguousarray(fz_inverse(f, grids, axis=2))


def physical_norm2(field: np.ndarray, grids: Grids, region: str) -> float:
    """Squared discrete L2 norm with the cylindrical measure r dr dphi dz."""
    w = grids.radial_weights(region)
    return float(np.einsum("i,ijk->", w, np.abs(field) ** 2) * grids.dphi * grids.dz)


def modal_norm2(modal: np.ndarray, grids: Grids, region: str) -> float:
    """Squared norm sum_n ||f_n||^2 over (r, Omega) with measure r dr dOmega."""
    w = grids.radial_weights(region)
    return float(np.einsum("k,ijk->", w, np.abs(modal) ** 2) * grids.dOmega)
