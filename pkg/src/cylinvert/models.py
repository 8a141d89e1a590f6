"""Model scatterers, the contrast measure and the data-noise protocol."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .grids import Grids, physical_norm2

MODEL_DEFAULT_A0 = {"model1": 0.545, "model2": 0.2}

# ellipsoid centres of the two inclusions
CENTER_1 = (0.4, 0.0, -0.1)
CENTER_2 = (-0.4, 0.4, 0.2)


@dataclass(frozen=True)
class ModelSpec:
    id: str = "model1"
    A0: Optional[float] = None
    func: Optional[Callable] = None

    def __post_init__(self):
        if self.id not in ("model1", "model2", "custom", "zero"):
            raise ValueError(f"unknown model id {self.id!r}")
        if self.id == "custom" and self.func is None:
            raise ValueError("custom model needs func(x, y, z)")
        if self.A0 is None:
            object.__setattr__(self, "A0", MODEL_DEFAULT_A0.get(self.id, 1.0))
        if not self.A0 > 0:
            raise ValueError("A0 must be positive")


def _q1(x, y, z):
    return (x - 0.4) ** 2 + y**2 + 0.125 * (z + 0.1) ** 2 <= 1.3**2


def _q2(x, y, z):
    return (x + 0.4) ** 2 + (y - 0.4) ** 2 + 0.125 * (z - 0.2) ** 2 <= 0.5**2


def eval_xi(model: ModelSpec, x, y, z) -> np.ndarray:
    """Sound-speed perturbation xi = c0^-2 - c^-2 at Cartesian points.

    Model 1 is a sum of two truncated Gaussians.  Model 2 is piecewise
    constant: 2*A0 inside the second ellipsoid and A0 in the rest of the
    first one.
    """
    x, y, z = np.broadcast_arrays(*(np.asarray(t, float) for t in (x, y, z)))
    A0 = model.A0
    if model.id == "zero":
        return np.zeros(x.shape)
    if model.id == "custom":
        return np.asarray(model.func(x, y, z), float) * np.ones(x.shape)
    in1, in2 = _q1(x, y, z), _q2(x, y, z)
    if model.id == "model1":
        R1 = 5 * (x - 0.4) ** 2 + 5 * y**2 + 0.125 * (z + 0.1) ** 2
        R2 = 5 * (x + 0.4) ** 2 + 5 * (y - 0.4) ** 2 + 0.125 * (z - 0.2) ** 2
        return np.where(in1, A0 * np.exp(-30 * R1), 0.0) + np.where(in2, 2 * A0 * np.exp(-30 * R2), 0.0)
    return np.where(in2, 2 * A0, np.where(in1, A0, 0.0))


def sample_xi(model: ModelSpec, grids: Grids) -> np.ndarray:
    """xi on the X grid, shape (Nrp, Nphi, Nz); zero outside r <= a by construction."""
    R, P, Z = np.meshgrid(grids.rp, grids.phi, grids.z, indexing="ij")
    return eval_xi(model, R * np.cos(P), R * np.sin(P), Z)


def clipped_mass(model: ModelSpec, grids: Grids, r_max: float | None = None) -> float:
    """Integral of |xi| over a < r <= r_max that is dropped by restricting to X."""
    a = grids.geom.a
    r_max = grids.geom.r0 if r_max is None else r_max
    h = grids.rp[1] - grids.rp[0]
    r = np.arange(a + h, r_max + 0.5 * h, h)
    if r.size == 0:
        return 0.0
    R, P, Z = np.meshgrid(r, grids.phi, grids.z, indexing="ij")
    xi = eval_xi(model, R * np.cos(P), R * np.sin(P), Z)
    return float(np.einsum("i,ijk->", r * h, np.abs(xi)) * grids.dphi * grids.dz)


@dataclass(frozen=True)
class ContrastResult:
    value: float
    peak_xi: float
    violation: bool
    n_violations: int


def contrast(xi: np.ndarray, c0: float = 1.0) -> ContrastResult:
    """max 1/sqrt(1 - c0^2 xi) - 1 over the points where the root is defined.

    Points with 1 - c0^2 xi <= 0 are counted and flagged, not included.
    """
    xi = np.real(np.asarray(xi, float))
    arg = 1.0 - c0**2 * xi
    ok = arg > 0
    n_bad = int(np.count_nonzero(~ok))
    value = float(np.max(1.0 / np.sqrt(arg[ok])) - 1.0) if ok.any() else float("nan")
    return ContrastResult(value=value, peak_xi=float(xi.max()), violation=n_bad > 0, n_violations=n_bad)


@dataclass(frozen=True)
class NoiseSpec:
    delta: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be non-negative")


def add_noise(w: np.ndarray, grids: Grids, spec: NoiseSpec) -> np.ndarray:
    """Add complex Gaussian noise of relative L2(Y) size exactly ``spec.delta``."""
    if spec.delta == 0:
        return w
    norm_w = np.sqrt(physical_norm2(w, grids, "Y"))
    if norm_w == 0:
        raise ValueError("relative noise level undefined for an all-zero field")
    rng = np.random.default_rng(spec.seed)
    e = rng.standard_normal(w.shape) + 1j * rng.standard_normal(w.shape)
    e *= spec.delta * norm_w / np.sqrt(physical_norm2(e, grids, "Y"))
    return w + e


def relative_perturbation(noisy: np.ndarray, clean: np.ndarray, grids: Grids) -> float:
    return float(np.sqrt(physical_norm2(noisy - clean, grids, "Y") / physical_norm2(clean, grids, "Y")))
