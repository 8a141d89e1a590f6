"""Reconstruction of xi from scattered-field data on the measurement layer.

Pipeline for one frequency:

1. per (n, Omega) solve the first-kind system A V = W with
   A_ij = mu_j G_n(r_i, r'_j) r'_j and W = w_n / (2 pi omega^2), by TSVD
   or Tikhonov;
2. u_n = u0_n + 2 pi omega^2 int G_n v_n r' dr' on X;
3. synthesize v and u in physical space;
4. xi = v / u where |u| > tol, else 0.
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np

from .forward import apply_modal_kernel
from .grids import Grids, to_modal, to_physical
from .greens import ModalKernelTable, SourceSet, build_kernel_table, incident_modal

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RegSettings:
    """Regularization knobs.

    ``rank_rule`` selects the TSVD truncation: ``"threshold"`` keeps
    sigma_k >= tsvd_rel_threshold * sigma_1 of the mode, ``"discrepancy"``
    picks the largest rank whose residual still reaches the per-mode
    noise level, ``"auto"`` uses the threshold for exact data and the
    discrepancy rule when ``noise_delta > 0``.
    """

    method: str = "tsvd"
    tsvd_rel_threshold: float = 1e-10
    rank_rule: str = "auto"
    tikhonov_alpha: Optional[float] = None
    noise_delta: float = 0.0
    discrepancy_tau: float = 1.0
    div_tol: float = 1e-12
    omega_combine: str = "single"
    workers: int = 1

    def __post_init__(self):
        if self.method not in ("tsvd", "tikhonov"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.rank_rule not in ("auto", "threshold", "discrepancy"):
            raise ValueError(f"unknown rank_rule {self.rank_rule!r}")
        if not 0 < self.tsvd_rel_threshold < 1:
            raise ValueError("tsvd_rel_threshold must lie in (0, 1)")
        if self.tikhonov_alpha is not None and not self.tikhonov_alpha > 0:
            raise ValueError("tikhonov_alpha must be positive")
        if self.noise_delta < 0:
            raise ValueError("noise_delta must be non-negative")
        if not self.div_tol > 0:
            raise ValueError("div_tol must be positive")
        if self.omega_combine not in ("single", "mean"):
            raise ValueError(f"unknown omega_combine {self.omega_combine!r}")
        if self.method == "tikhonov" and self.tikhonov_alpha is None and self.noise_delta == 0:
            raise ValueError("tikhonov needs tikhonov_alpha or a positive noise_delta")


@dataclass
class RadialOperator:
    """Dense system matrix of one (n, m) mode with its thin SVD."""

    A: np.ndarray
    U: np.ndarray
    s: np.ndarray
    Vh: np.ndarray
    n: int = 0
    m: int = 0

    @classmethod
    def from_matrix(cls, A, n: int = 0, m: int = 0):
        U, s, Vh = np.linalg.svd(A, full_matrices=False)
        return cls(A=A, U=U, s=s, Vh=Vh, n=n, m=m)


@dataclass
class OperatorBank:
    """All (n, m) operators of one frequency, stored as stacked arrays."""

    A: np.ndarray  # (Nphi, Nz, Nr, Nrp)
    U: np.ndarray
    s: np.ndarray
    Vh: np.ndarray
    n: np.ndarray
    flags: np.ndarray

    def __len__(self):
        return self.A.shape[0] * self.A.shape[1]

    def __getitem__(self, idx) -> RadialOperator:
        i, m = idx
        return RadialOperator(self.A[i, m], self.U[i, m], self.s[i, m], self.Vh[i, m], int(self.n[i]), int(m))

    def operators(self) -> list:
        return [self[i, m] for i in range(self.A.shape[0]) for m in range(self.A.shape[1])]


def _batched_svd(A: np.ndarray, workers: int = 1):
    if workers <= 1:
        return np.linalg.svd(A, full_matrices=False)
    chunks = np.array_split(np.arange(A.shape[0]), workers)
    with ThreadPoolExecutor(workers) as pool:
        parts = list(pool.map(lambda idx: np.linalg.svd(A[idx], full_matrices=False), chunks))
    return tuple(np.concatenate([p[k] for p in parts]) for k in range(3))


def assemble_operators(table: ModalKernelTable, workers: int = 1) -> OperatorBank:
    """Form A = mu_j G_n(r_i, r'_j) r'_j for every mode and factor it."""
    A = table.GY * table.grids.radial_weights("X")
    U, s, Vh = _batched_svd(A, workers)
    return OperatorBank(A=A, U=U, s=s, Vh=Vh, n=table.grids.n.copy(), flags=table.flags.copy())


def tsvd_solve(op: RadialOperator, rhs: np.ndarray, threshold_rel: float = 1e-10,
               rank: Optional[int] = None):
    """Truncated-SVD solution; returns ``(V, rank)``.

    Keeps sigma_k >= threshold_rel * sigma_1 unless an explicit ``rank`` is given.
    The result is the minimum-norm least-squares solution of the truncated system.
    """
    rhs = np.asarray(rhs)
    if rhs.shape != (op.A.shape[0],):
        raise ValueError(f"rhs must have length {op.A.shape[0]}")
    if rank is None:
        rank = int(np.count_nonzero(op.s >= threshold_rel * op.s[0])) if op.s[0] > 0 else 0
    if rank == 0:
        return np.zeros(op.A.shape[1], dtype=np.result_type(op.A, rhs)), 0
    beta = op.U[:, :rank].conj().T @ rhs
    return op.Vh[:rank].conj().T @ (beta / op.s[:rank]), rank


def tsvd_residuals(op: RadialOperator, rhs: np.ndarray) -> np.ndarray:
    """||A V_k - rhs|| for k = 0..len(s)."""
    beta2 = np.abs(op.U.conj().T @ rhs) ** 2
    total = float(np.vdot(rhs, rhs).real)
    return np.sqrt(np.maximum(total - np.concatenate([[0.0], np.cumsum(beta2)]), 0.0))


@dataclass
class TikhonovResult:
    V: np.ndarray
    alpha: float
    residual: float
    flagged: bool = False


def _tikhonov_apply(op, beta, alpha):
    return op.Vh.conj().T @ (op.s / (op.s**2 + alpha) * beta)


def tikhonov_solve(op: RadialOperator, rhs: np.ndarray, alpha: Optional[float] = None,
                   delta: Optional[float] = None, rtol: float = 0.05, max_iter: int = 200) -> TikhonovResult:
    """Solve (A*A + alpha I) V = A* rhs through SVD filter factors.

    With ``delta`` the parameter alpha is found by bisection in log(alpha)
    so that ||A V - rhs|| matches ``delta * ||rhs||`` within ``rtol``.
    An unattainable target returns the bracket-edge solution with ``flagged``.
    """
    rhs = np.asarray(rhs)
    beta = op.U.conj().T @ rhs
    rnorm = float(np.linalg.norm(rhs))
    # part of rhs outside the range of U, invariant in alpha
    out2 = max(rnorm**2 - float(np.sum(np.abs(beta) ** 2)), 0.0)

    def residual(al):
        f = al / (op.s**2 + al)
        return float(np.sqrt(out2 + np.sum(np.abs(f * beta) ** 2)))

    if alpha is not None:
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        return TikhonovResult(_tikhonov_apply(op, beta, alpha), alpha, residual(alpha))
    if delta is None or delta < 0:
        raise ValueError("give alpha > 0 or delta >= 0")

    target = delta * rnorm
    s1 = op.s[0] if op.s.size and op.s[0] > 0 else 1.0
    lo, hi = 1e-30 * s1**2, 1e10 * s1**2
    if rnorm == 0:
        return TikhonovResult(np.zeros(op.A.shape[1], dtype=complex), hi, 0.0)
    if residual(lo) >= target:
        return TikhonovResult(_tikhonov_apply(op, beta, lo), lo, residual(lo), flagged=True)
    if residual(hi) <= target:
        return TikhonovResult(_tikhonov_apply(op, beta, hi), hi, residual(hi), flagged=True)
    llo, lhi = np.log(lo), np.log(hi)
    for _ in range(max_iter):
        mid = 0.5 * (llo + lhi)
        res = residual(np.exp(mid))
        if abs(res - target) <= rtol * target:
            break
        if res < target:
            llo = mid
        else:
            lhi = mid
    al = float(np.exp(mid))
    return TikhonovResult(_tikhonov_apply(op, beta, al), al, residual(al))


@dataclass
class ModeDiagnostics:
    rank: np.ndarray
    sigma1: np.ndarray
    residual: np.ndarray
    alpha: Optional[np.ndarray] = None
    flagged: Optional[np.ndarray] = None


def _noise_level_per_mode(W: np.ndarray, delta: float) -> float:
    # white noise spreads evenly over the (n, m) modes
    n_modes = W.shape[0] * W.shape[1]
    return delta * float(np.linalg.norm(W)) / np.sqrt(n_modes)


def solve_modes(bank: OperatorBank, W: np.ndarray, settings: RegSettings):
    """Regularized solve of every (n, m) system; returns ``(V, diagnostics)``."""
    Nphi, Nz, Nr, Nrp = bank.A.shape
    beta = np.einsum("nmik,nmi->nmk", bank.U.conj(), W)
    s = bank.s
    s1 = s[..., :1]
    wnorm = np.linalg.norm(W, axis=-1)
    rule = settings.rank_rule
    if rule == "auto":
        rule = "discrepancy" if settings.noise_delta > 0 else "threshold"
    eta = settings.discrepancy_tau * _noise_level_per_mode(W, settings.noise_delta)

    if settings.method == "tsvd":
        keep = (s >= settings.tsvd_rel_threshold * s1) & (s1 > 0)
        if rule == "discrepancy":
            total = wnorm**2
            res = np.sqrt(np.maximum(total[..., None] - np.concatenate(
                [np.zeros((Nphi, Nz, 1)), np.cumsum(np.abs(beta) ** 2, axis=-1)], axis=-1), 0.0))
            # largest k whose residual is still >= eta (residuals fall with k)
            above = res >= eta
            last = res.shape[-1] - 1 - np.argmax(above[..., ::-1], axis=-1)
            k_dp = np.where(above.any(axis=-1), last, 0)
            keep &= np.arange(s.shape[-1]) < k_dp[..., None]
        coef = np.where(keep, beta / np.where(s > 0, s, 1.0), 0.0)
        rank = keep.sum(axis=-1)
        alpha = None
        flagged = rank == 0
    else:
        if settings.noise_delta > 0:
            alpha = np.empty((Nphi, Nz))
            flagged = np.zeros((Nphi, Nz), bool)
            coef = np.empty_like(beta)
            for i in range(Nphi):
                for m in range(Nz):
                    op = bank[i, m]
                    d = eta / wnorm[i, m] if wnorm[i, m] > 0 else 0.0
                    if d >= 1.0:
                        coef[i, m] = 0.0
                        alpha[i, m] = np.inf
                        flagged[i, m] = True
                        continue
                    r = tikhonov_solve(op, W[i, m], delta=d)
                    alpha[i, m] = r.alpha
                    flagged[i, m] = r.flagged
                    coef[i, m] = op.s / (op.s**2 + r.alpha) * beta[i, m]
        else:
            alpha = settings.tikhonov_alpha * s1[..., 0] ** 2
            coef = s / (s**2 + alpha[..., None]) * beta
            flagged = np.zeros((Nphi, Nz), bool)
        rank = np.count_nonzero(s > 0, axis=-1)
    V = np.einsum("nmkj,nmk->nmj", bank.Vh.conj(), coef)
    AV = np.einsum("nmij,nmj->nmi", bank.A, V)
    rel_res = np.linalg.norm(AV - W, axis=-1) / np.where(wnorm > 0, wnorm, 1.0)
    diag = ModeDiagnostics(rank=rank, sigma1=s[..., 0], residual=rel_res, alpha=alpha, flagged=flagged | bank.flags)
    return V, diag


def recover_fields(bank: OperatorBank, w_modal: np.ndarray, u0_modal: np.ndarray,
                   table: ModalKernelTable, settings: RegSettings = RegSettings()):
    """Steps 1 and 2: regularized v_n from w_n, then u_n on X."""
    W = w_modal / (2 * np.pi * table.omega**2)
    v, diag = solve_modes(bank, W, settings)
    u = u0_modal + apply_modal_kernel(table, v, "X")
    return v, u, diag


def divide_fields(v_phys: np.ndarray, u_phys: np.ndarray, div_tol: float = 1e-12):
    """Pointwise xi = v / u where |u| > tol, 0 elsewhere.

    Returns ``(xi_real, imag_residue)`` with the residue ||Im xi|| / ||xi||.
    """
    mask = np.abs(u_phys) > div_tol
    xi = np.zeros(np.broadcast(v_phys, u_phys).shape, dtype=complex)
    np.divide(np.asarray(v_phys, complex), np.asarray(u_phys, complex), out=xi, where=mask)
    total = np.linalg.norm(xi)
    residue = float(np.linalg.norm(xi.imag) / total) if total > 0 else 0.0
    return xi.real.copy(), residue


def speed_from_xi(xi: np.ndarray, c0: float = 1.0):
    """c = (c0^-2 - xi)^(-1/2); NaN and flagged where c0^-2 - xi <= 0."""
    arg = c0**-2 - xi
    ok = arg > 0
    c = np.full(xi.shape, np.nan)
    c[ok] = arg[ok] ** -0.5
    return c, ~ok


@dataclass
class ReconstructionResult:
    xi: np.ndarray
    c: np.ndarray
    c_invalid: np.ndarray
    omegas: list
    xi_per_omega: list
    v_phys: list
    u_phys: list
    diagnostics: list
    imag_residue: list
    step1_time: float
    wall_time: float
    settings: dict = field(default_factory=dict)


def invert_single(w_modal: np.ndarray, u0_modal: np.ndarray, table: ModalKernelTable,
                  settings: RegSettings = RegSettings(), bank: OperatorBank | None = None):
    """Steps 1-4 at one frequency; returns ``(xi, v_phys, u_phys, diag, residue, t_step1)``."""
    grids = table.grids
    t0 = time.perf_counter()
    if bank is None:
        bank = assemble_operators(table, settings.workers)
    v, u, diag = recover_fields(bank, w_modal, u0_modal, table, settings)
    t_step1 = time.perf_counter() - t0
    v_phys = to_physical(v, grids)
    u_phys = to_physical(u, grids)
    xi, residue = divide_fields(v_phys, u_phys, settings.div_tol)
    return xi, v_phys, u_phys, diag, residue, t_step1


def run_inverse(
    data: Sequence[np.ndarray],
    sources: SourceSet,
    omegas: Sequence[float],
    grids: Grids,
    settings: RegSettings = RegSettings(),
    eps: float = 1e-6,
    modal: bool = False,
    tables: Optional[Sequence[ModalKernelTable]] = None,
) -> ReconstructionResult:
    """Full reconstruction from scattered-field data at one or more frequencies.

    ``data`` holds one array per frequency: physical ``(Nr, Nphi, Nz)``
    fields on Y, or modal ``(Nphi, Nz, Nr)`` arrays when ``modal`` is set.
    """
    t0 = time.perf_counter()
    omegas = [float(o) for o in omegas]
    if len(data) != len(omegas):
        raise ValueError("need one data array per frequency")
    xis, vs, us, diags, residues = [], [], [], [], []
    step1 = 0.0
    for k, omega in enumerate(omegas):
        table = tables[k] if tables is not None else build_kernel_table(omega, grids, eps)
        w_modal = np.asarray(data[k]) if modal else to_modal(np.asarray(data[k]), grids)
        if w_modal.shape != (grids.spec.Nphi, grids.spec.Nz, grids.spec.Nr):
            raise ValueError(f"data for omega={omega} has wrong shape {w_modal.shape}")
        u0 = incident_modal(sources, omega, grids, table.eps)
        xi, v_phys, u_phys, diag, residue, t1 = invert_single(w_modal, u0, table, settings)
        step1 += t1
        xis.append(xi)
        vs.append(v_phys)
        us.append(u_phys)
        diags.append(diag)
        residues.append(residue)
    if settings.omega_combine == "mean" or len(xis) == 1:
        xi = np.mean(xis, axis=0)
    else:
        xi = xis[-1]
    c, bad = speed_from_xi(xi)
    return ReconstructionResult(
        xi=xi, c=c, c_invalid=bad, omegas=omegas, xi_per_omega=xis, v_phys=vs, u_phys=us,
        diagnostics=diags, imag_residue=residues, step1_time=step1,
        wall_time=time.perf_counter() - t0, settings=asdict(settings),
    )
