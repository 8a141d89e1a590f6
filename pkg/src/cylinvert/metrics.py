"""Per-slice reconstruction error and the inverse-solver timing study."""
from __future__ import annotations

import csv
import os
import platform
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .forward import ForwardSettings, run_forward
from .grids import Geometry, GridSpec, Grids, make_grids, to_physical
from .greens import SourceSet, build_kernel_table, default_sources, incident_modal
from .inverse import RegSettings, assemble_operators, divide_fields, recover_fields
from .models import ModelSpec, sample_xi


@dataclass
class SliceErrorTable:
    z: np.ndarray
    delta: np.ndarray
    meta: dict

    @property
    def max(self) -> float:
        return float(self.delta.max())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["z", "delta_L2"])
            for z, d in zip(self.z, self.delta):
                out.writerow([repr(float(z)), repr(float(d))])


def section_norms(xi: np.ndarray, grids: Grids) -> np.ndarray:
    """L2 norm over each disc section z = const with the r dr dphi measure."""
    w = grids.radial_weights("X")
    return np.sqrt(np.einsum("i,ijk->k", w, np.abs(xi) ** 2) * grids.dphi)


def slice_error(xi_appr: np.ndarray, xi_exact: np.ndarray, grids: Grids, meta: dict | None = None) -> SliceErrorTable:
    """||xi_appr - xi_exact||(z) / max_z ||xi_exact||(z)."""
    if xi_appr.shape != xi_exact.shape:
        raise ValueError("fields must share the grid")
    denom = section_norms(xi_exact, grids).max()
    if denom == 0:
        raise ValueError("exact solution vanishes identically; relative error undefined")
    return SliceErrorTable(z=grids.z.copy(), delta=section_norms(xi_appr - xi_exact, grids) / denom, meta=meta or {})


@dataclass
class BenchRecord:
    Nr: int
    Nphi: int
    Nz: int
    omega: float
    T_total: float
    T_step1: float
    parallel: int
    hardware: str


BENCH_HEADER = [f.name for f in fields(BenchRecord)]


def hardware_note() -> str:
    return f"{platform.machine()} {platform.processor() or 'cpu'} x{os.cpu_count()} {platform.python_implementation()}"


def time_inverse(w_modal, sources: SourceSet, omega: float, grids: Grids, settings: RegSettings,
                 eps: float = 1e-6, repeats: int = 1):
    """Wall time of a full inversion and of its per-mode solve step (best of ``repeats``)."""
    t0 = time.perf_counter()
    table = build_kernel_table(omega, grids, eps)
    u0 = incident_modal(sources, omega, grids, eps)
    step1 = np.inf
    for _ in range(max(repeats, 1)):
        t1 = time.perf_counter()
        bank = assemble_operators(table, settings.workers)
        v, u, _ = recover_fields(bank, w_modal, u0, table, settings)
        step1 = min(step1, time.perf_counter() - t1)
    divide_fields(to_physical(v, grids), to_physical(u, grids), settings.div_tol)
    total = time.perf_counter() - t0 - step1 * (max(repeats, 1) - 1)
    return total, step1


def run_bench(grid_list: Iterable[GridSpec], omega: float, settings: RegSettings = RegSettings(),
              geom: Geometry = Geometry(), model: ModelSpec = ModelSpec("model1"),
              sources: SourceSet | None = None, eps: float = 1e-6, repeats: int = 3,
              forward: ForwardSettings = ForwardSettings()) -> list:
    """Time the inverse solver on synthetic exact data for each grid size."""
    sources = default_sources() if sources is None else sources
    records = []
    for spec in grid_list:
        grids = make_grids(geom, spec)
        xi = sample_xi(model, grids)
        data = run_forward(xi, sources, omega, grids, forward, eps=eps)
        total, step1 = time_inverse(data.w_modal, sources, omega, grids, settings, eps, repeats)
        records.append(BenchRecord(spec.Nr, spec.Nphi, spec.Nz, float(omega), total, step1,
                                   settings.workers, hardware_note()))
    return records


def append_bench_csv(records: Sequence[BenchRecord], path) -> None:
    """Append rows; the header is written once and must match on later appends."""
    path = Path(path)
    exists = path.exists() and path.stat().st_size > 0
    if exists:
        with open(path, newline="") as fh:
            header = next(csv.reader(fh))
        if header != BENCH_HEADER:
            raise ValueError(f"{path} has an incompatible header {header}")
    with open(path, "a", newline="") as fh:
        out = csv.writer(fh)
        if not exists:
            out.writerow(BENCH_HEADER)
        for rec in records:
            out.writerow([v if not isinstance(v, float) else repr(v) for v in asdict(rec).values()])
