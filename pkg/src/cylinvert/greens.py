"""Modal Green's function of the Neumann cylinder and the incident field.

For each azimuthal order n and axial frequency Omega the radial kernel
g_n(r, r') solves

    (1/r)(r g')' - (n^2/r^2) g + kappa^2 g = delta(r - r') / (2 pi r),
    kappa^2 = omega^2 (1 + i eps)^2 - Omega^2,

regular on the axis and with g' = 0 at r = b.  It is assembled as
``u1(r_<) u2(r_>) / (2 pi r' W)``.  Three branches are used:

* propagating (Re kappa^2 > 0): J_n / Y_n pair,
* evanescent (Re kappa^2 <= 0): I_n / K_n pair, evaluated with scaled
  functions so that tau * b of a few hundred does not overflow,
* static (|kappa| < 1e-6): r^n / r^-n pair.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .grids import Geometry, Grids, to_physical
from .special import besseli, besselj, besselk, bessely

logger = logging.getLogger(__name__)

RESONANCE_RTOL = 1e-8
STATIC_KAPPA = 1e-6


class ResonanceError(RuntimeError):
    """Raised when a (n, m) pair sits on a Neumann eigenvalue of the cylinder."""

    def __init__(self, modes, omega):
        self.modes = [tuple(int(v) for v in nm) for nm in modes]
        self.omega = omega
        shown = ", ".join(f"(n={n}, m={m})" for n, m in self.modes[:20])
        more = "" if len(self.modes) <= 20 else f" and {len(self.modes) - 20} more"
        super().__init__(
            f"Neumann resonance at omega={omega}: {shown}{more}; retry with eps > 0"
        )


@dataclass(frozen=True)
class SourceSet:
    """Point sources A_s * delta(x - x_s) given in cylindrical coordinates."""

    amplitude: np.ndarray
    r: np.ndarray
    phi: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        arrays = [np.atleast_1d(np.asarray(getattr(self, k))) for k in ("amplitude", "r", "phi", "z")]
        if len({a.shape for a in arrays}) != 1 or arrays[0].ndim != 1:
            raise ValueError("source arrays must be 1-D and of equal length")
        if np.any(arrays[1] <= 0):
            raise ValueError("source radii must be positive")
        object.__setattr__(self, "amplitude", arrays[0].astype(complex))
        for k, a in zip(("r", "phi", "z"), arrays[1:]):
            object.__setattr__(self, k, a.astype(float))

    def __len__(self):
        return self.r.size

    @classmethod
    def empty(cls):
        return cls(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0))


def default_sources() -> SourceSet:
    """Eight unit sources just outside the cylinder wall, two rings at z = -1, 1."""
    h = np.pi / 2
    phi = [0.0, h, -h, np.pi, 0.0, h, -h, np.pi]
    z = [-1.0] * 4 + [1.0] * 4
    return SourceSet(np.ones(8), np.full(8, 4.01), np.array(phi), np.array(z))


def kappa_squared(Omega, omega: float, eps: float = 0.0):
    k2 = (omega * (1 + 1j * eps)) ** 2 - np.asarray(Omega, dtype=float) ** 2
    return k2 if eps else k2.real


def _radial_block(nabs: np.ndarray, k2, rows: np.ndarray, cols: np.ndarray, b: float):
    """g_n(rows_i, cols_j) for all orders in ``nabs`` at one kappa^2.

    Returns ``(G, ratio)`` with G of shape (len(nabs), len(rows), len(cols))
    and ``ratio`` the per-order resonance indicator |J_n'(kb)| / |(J_n', Y_n')|
    (NaN where the test does not apply).
    """
    nn = nabs[:, None]
    radii, inv = np.unique(np.concatenate([rows, cols]), return_inverse=True)
    ii = inv[: rows.size][:, None]
    jj = inv[rows.size:][None, :]
    lt_idx = np.where(radii[ii] <= radii[jj], ii, jj)
    gt_idx = np.where(radii[ii] <= radii[jj], jj, ii)
    lt = radii[lt_idx][None]
    gt = radii[gt_idx][None]
    safe = np.where(radii > 0, radii, 1.0)
    ratio = np.full(nabs.shape, np.nan)
    cplx = np.iscomplexobj(k2)
    kappa = np.sqrt(k2 + 0j)

    with np.errstate(all="ignore"):
        if abs(kappa) < STATIC_KAPPA:
            n3 = nabs[:, None, None]
            n_safe = np.maximum(n3, 1)
            G = -(lt**n3 / (4 * np.pi * n_safe)) * (gt**n3 / b ** (2 * n3) + gt ** (-n3))
            G = np.where(n3 == 0, 0.0, G)
            ratio = np.where(nabs == 0, 0.0, np.nan)
        elif np.real(k2) > 0:
            kap = kappa if cplx else kappa.real
            Jb = besselj(nabs, kap * b)
            Yb = bessely(nabs, kap * b)
            J = besselj(nn, kap * radii).value
            Y = bessely(nn, kap * safe).value
            c = (Yb.derivative / Jb.derivative)[:, None]
            u2 = (Y - c * J) / 4.0
            G = J[:, lt_idx] * u2[:, gt_idx]
            applies = np.real(kap) * b >= nabs
            env = np.hypot(np.abs(Jb.derivative), np.abs(Yb.derivative))
            ratio = np.where(applies, np.abs(Jb.derivative) / env, np.nan)
        else:
            tau = np.sqrt(-k2 + 0j) if cplx else np.sqrt(-k2)
            tre = np.real(tau)
            Ib = besseli(nabs, tau * b, scaled=True)
            Kb = besselk(nabs, tau * b, scaled=True)
            Is = besseli(nn, tau * radii, scaled=True).value
            Ks = besselk(nn, tau * safe, scaled=True).value
            c = (Kb.derivative / Ib.derivative)[:, None, None]
            # I(t r<) I(t r>) K'(tb)/I'(tb) and I(t r<) K(t r>) with exponents restored
            e_ii = np.exp(tre * (lt + gt) - tau * b - tre * b)
            e_ik = np.exp(tre * lt - tau * gt)
            G = Is[:, lt_idx] * (c * Is[:, gt_idx] * e_ii - Ks[:, gt_idx] * e_ik) / (2 * np.pi)
        # r_< = r_> = 0 only on the axis diagonal, a node whose r' weight is zero
        G = np.where(gt > 0, G, 0.0)
    if not cplx:
        G = np.real(G)
    return G, ratio


def radial_kernel(n: int, Omega: float, omega: float, geom: Geometry, eps: float = 0.0):
    """Return a vectorized callable ``g(r, rp)`` for one mode.

    Raises :class:`ResonanceError` for ``eps == 0`` on a Neumann eigenvalue.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    k2 = kappa_squared(Omega, omega, eps)
    nabs = np.array([abs(int(n))])
    _, ratio = _radial_block(nabs, k2, np.array([geom.b]), np.array([geom.b]), geom.b)
    if eps == 0 and np.nan_to_num(ratio, nan=1.0)[0] < RESONANCE_RTOL:
        raise ResonanceError([(n, 0)], omega)

    def g(r, rp):
        r, rp = np.broadcast_arrays(np.asarray(r, float), np.asarray(rp, float))
        ur, ir = np.unique(r, return_inverse=True)
        urp, irp = np.unique(rp, return_inverse=True)
        block = _radial_block(nabs, k2, ur, urp, geom.b)[0][0]
        return block[ir.reshape(r.shape), irp.reshape(rp.shape)]

    return g


@dataclass
class ModalKernelTable:
    """G_n(r_i, r'_j, Omega_m) for the Y (measurement) and X (scatterer) radii.

    ``GY`` has shape (Nphi, Nz, Nr, Nrp) and ``GX`` (Nphi, Nz, Nrp, Nrp).
    """

    omega: float
    eps: float
    grids: Grids
    GY: np.ndarray
    GX: np.ndarray
    flags: np.ndarray
    ratio: np.ndarray = field(repr=False)

    @property
    def flagged_modes(self):
        return [(int(self.grids.n[i]), int(j)) for i, j in zip(*np.nonzero(self.flags))]


def build_kernel_table(omega: float, grids: Grids, eps: float = 1e-6, check: bool = True) -> ModalKernelTable:
    """Evaluate the modal kernels on every (n, m) pair of the grid.

    With ``eps == 0`` and ``check`` set, resonant pairs raise
    :class:`ResonanceError` listing all of them.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    b = grids.geom.b
    nabs_all = np.abs(grids.n)
    nabs = np.unique(nabs_all)
    pick = np.searchsorted(nabs, nabs_all)
    Nz = grids.spec.Nz
    dtype = complex if eps else float
    GY = np.empty((grids.spec.Nphi, Nz, grids.spec.Nr, grids.spec.Nrp), dtype=dtype)
    GX = np.empty((grids.spec.Nphi, Nz, grids.spec.Nrp, grids.spec.Nrp), dtype=dtype)
    ratio = np.full((grids.spec.Nphi, Nz), np.nan)
    k2 = kappa_squared(grids.Omega, omega, eps)
    for m in range(Nz):
        gy, rat = _radial_block(nabs, k2[m], grids.r, grids.rp, b)
        gx, _ = _radial_block(nabs, k2[m], grids.rp, grids.rp, b)
        GY[:, m] = gy[pick]
        GX[:, m] = gx[pick]
        ratio[:, m] = rat[pick]
    flags = np.nan_to_num(ratio, nan=1.0) < RESONANCE_RTOL
    if not (np.all(np.isfinite(GY)) and np.all(np.isfinite(GX))):
        raise FloatingPointError("non-finite kernel entries; grid too fine for double range")
    table = ModalKernelTable(omega=omega, eps=eps, grids=grids, GY=GY, GX=GX, flags=flags, ratio=ratio)
    if flags.any():
        if check and eps == 0:
            raise ResonanceError(table.flagged_modes, omega)
        logger.warning("omega=%g: %d near-resonant modes flagged", omega, int(flags.sum()))
    return table


def scan_resonances(omega: float, grids: Grids, eps: float = 0.0) -> list:
    """Flagged (n, m) pairs from the boundary indicator alone, without building the table."""
    nabs = np.unique(np.abs(grids.n))
    b = np.array([grids.geom.b])
    k2 = kappa_squared(grids.Omega, omega, eps)
    bad = []
    for m in range(grids.spec.Nz):
        _, rat = _radial_block(nabs, k2[m], b, b, grids.geom.b)
        hit = set(nabs[np.nan_to_num(rat, nan=1.0) < RESONANCE_RTOL].tolist())
        bad.extend((int(n), m) for n in grids.n if abs(n) in hit)
    return bad


def incident_modal(sources: SourceSet, omega: float, grids: Grids, eps: float = 1e-6,
                   radii: np.ndarray | None = None) -> np.ndarray:
    """Modal incident field u0_n(r, Omega) on ``radii`` (default: the X grid).

    u0_n(r, Omega) = sum_s A_s g_n(r, r_s; Omega) exp(-i n phi_s) exp(i Omega z_s)
    """
    rr = grids.rp if radii is None else np.asarray(radii, float)
    out = np.zeros((grids.spec.Nphi, grids.spec.Nz, rr.size), dtype=complex)
    if len(sources) == 0:
        return out
    b = grids.geom.b
    nabs_all = np.abs(grids.n)
    nabs = np.unique(nabs_all)
    pick = np.searchsorted(nabs, nabs_all)
    rs, inv = np.unique(sources.r, return_inverse=True)
    ang = np.exp(-1j * np.outer(grids.n, sources.phi))  # (Nphi, S)
    k2 = kappa_squared(grids.Omega, omega, eps)
    for m in range(grids.spec.Nz):
        g, rat = _radial_block(nabs, k2[m], rr, rs, b)
        if eps == 0 and np.any(np.nan_to_num(rat, nan=1.0) < RESONANCE_RTOL):
            bad = nabs[np.nan_to_num(rat, nan=1.0) < RESONANCE_RTOL]
            raise ResonanceError([(n, m) for n in bad], omega)
        g = g[pick][:, :, inv]  # (Nphi, Nr, S)
        coef = sources.amplitude * np.exp(1j * grids.Omega[m] * sources.z)  # (S,)
        out[:, m, :] = np.einsum("nrs,ns,s->nr", g, ang, coef)
    return out


def incident_field(sources: SourceSet, omega: float, grids: Grids, eps: float = 1e-6):
    """Incident field on X as ``(modal (n, m, r'), physical (r', phi, z))``."""
    u0 = incident_modal(sources, omega, grids, eps)
    return u0, to_physical(u0, grids)


def evaluate_modal(modal: np.ndarray, grids: Grids, phi, z) -> np.ndarray:
    """Evaluate the trigonometric interpolant of a modal field at arbitrary (phi, z).

    Returns an array of shape (Nr, len(phi)) for paired points ``(phi_k, z_k)``.
    """
    phi = np.atleast_1d(np.asarray(phi, float))
    z = np.atleast_1d(np.asarray(z, float))
    ein = np.exp(1j * np.outer(grids.n, phi))  # (N, K)
    eoz = np.exp(-1j * np.outer(grids.Omega, z)) * grids.dOmega / (2 * np.pi)  # (M, K)
    return np.einsum("nmr,nk,mk->rk", modal, ein, eoz)


__all__ = [
    "ResonanceError",
    "scan_resonances",
    "SourceSet",
    "default_sources",
    "kappa_squared",
    "radial_kernel",
    "ModalKernelTable",
    "build_kernel_table",
    "incident_modal",
    "incident_field",
    "evaluate_modal",
]
