"""Synthetic measurement data by fixed-point iteration of the modal system.

Per mode (n, Omega) the incident field is corrected by

    u_n <- u0_n + 2 pi omega^2 int_0^a G_n(r, r') v_n(r') r' dr',

where v = xi * u is formed pointwise in physical space.  After
convergence the scattered field on the measurement layer is
w_n = 2 pi omega^2 int_0^a G_n(r, r') v_n(r') r' dr' for r in [r0, b].
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .grids import Grids, modal_norm2, to_modal, to_physical
from .greens import ModalKernelTable, SourceSet, build_kernel_table, incident_modal


class NoConvergence(RuntimeError):
    """Iteration hit ``max_iter`` above tolerance; the partial result is attached."""

    def __init__(self, result):
        self.result = result
        last = result.history[-1] if result.history else float("nan")
        super().__init__(f"no convergence after {result.iterations} iterations (last delta {last:.3e})")


@dataclass(frozen=True)
class ForwardSettings:
    max_iter: int = 200
    tol: float = 1e-13
    record_history: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class ForwardResult:
    omega: float
    u_modal: np.ndarray
    v_modal: np.ndarray
    w_modal: np.ndarray
    w_phys: np.ndarray
    u0_modal: np.ndarray
    iterations: int
    history: list = field(default_factory=list)
    wall_time: float = 0.0
    converged: bool = True


def apply_modal_kernel(table: ModalKernelTable, v_modal: np.ndarray, target: str = "X") -> np.ndarray:
    """2 pi omega^2 sum_j mu_j G_n(r_i, r'_j) v_n(r'_j) r'_j for every (n, m)."""
    grids = table.grids
    if v_modal.shape != (grids.spec.Nphi, grids.spec.Nz, grids.spec.Nrp):
        raise ValueError(f"v_modal shape {v_modal.shape} does not match the X modal grid")
    if target == "X":
        G = table.GX
    elif target == "Y":
        G = table.GY
    else:
        raise ValueError(f"unknown target {target!r}")
    wv = v_modal * grids.radial_weights("X")
    return 2 * np.pi * table.omega**2 * np.matmul(G, wv[..., None])[..., 0]


def contrast_source(u_modal: np.ndarray, xi_phys: np.ndarray, grids: Grids) -> np.ndarray:
    """v_n = modal transform of xi * u."""
    return to_modal(xi_phys * to_physical(u_modal, grids), grids)


def born_iteration(u_modal, xi_phys, table: ModalKernelTable, u0_modal):
    """One fixed-point step; returns ``(u_next, v)`` with v formed from the input u."""
    v = contrast_source(u_modal, xi_phys, table.grids)
    return u0_modal + apply_modal_kernel(table, v, "X"), v


def run_forward(
    xi_phys: np.ndarray,
    sources: SourceSet,
    omega: float,
    grids: Grids,
    settings: ForwardSettings = ForwardSettings(),
    eps: float = 1e-6,
    table: ModalKernelTable | None = None,
    raise_on_failure: bool = True,
) -> ForwardResult:
    """Iterate to a fixed point and compute the scattered field on Y."""
    t0 = time.perf_counter()
    xi_phys = np.asarray(xi_phys)
    if np.iscomplexobj(xi_phys):
        if np.abs(xi_phys.imag).max() > 0:
            raise ValueError("xi must be real")
        xi_phys = xi_phys.real
    expected = (grids.spec.Nrp, grids.spec.Nphi, grids.spec.Nz)
    if xi_phys.shape != expected:
        raise ValueError(f"xi shape {xi_phys.shape} != {expected}")
    if table is None:
        table = build_kernel_table(omega, grids, eps)
    elif table.omega != omega:
        raise ValueError("kernel table was built for a different omega")

    u0 = incident_modal(sources, omega, grids, table.eps)
    ref = np.sqrt(modal_norm2(u0, grids, "X"))
    u = u0
    history = []
    converged = False
    k = 0
    for k in range(1, settings.max_iter + 1):
        u_next, _ = born_iteration(u, xi_phys, table, u0)
        diff = np.sqrt(modal_norm2(u_next - u, grids, "X"))
        delta = diff / ref if ref > 0 else 0.0
        history.append(float(delta))
        u = u_next
        if delta <= settings.tol:
            converged = True
            break
        if not np.isfinite(delta):
            break
    v = contrast_source(u, xi_phys, grids)
    w_modal = apply_modal_kernel(table, v, "Y")
    result = ForwardResult(
        omega=omega,
        u_modal=u,
        v_modal=v,
        w_modal=w_modal,
        w_phys=to_physical(w_modal, grids),
        u0_modal=u0,
        iterations=k,
        history=history if settings.record_history else history[-1:],
        wall_time=time.perf_counter() - t0,
        converged=converged,
    )
    if not converged and raise_on_failure:
        raise NoConvergence(result)
    return result
