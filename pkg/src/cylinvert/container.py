"""Plain-directory field container: ``meta.json`` plus a raw ``payload.bin``.

The payload is little-endian float64, complex values interleaved as
(re, im), row-major in the axis order recorded in the metadata.  Real
fields are stored with a zero imaginary part and ``value_type = "real"``.
A SHA-256 of the payload is checked on every load.
"""
from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .grids import Geometry, GridSpec, Grids, make_grids
from .greens import ModalKernelTable

FORMAT = "cylinvert-field/1"
AXES = {
    "physical": ["r", "phi", "z"],
    "modal": ["n", "m", "r"],
    "kernel": ["n", "m", "r", "rp"],
}


class ContainerError(IOError):
    pass


def grids_meta(grids: Grids) -> dict:
    g, s = grids.geom, grids.spec
    return {"geometry": {"a": g.a, "r0": g.r0, "b": g.b, "z_half": g.z_half},
            "grid": {"Nr": s.Nr, "Nrp": s.Nrp, "Nphi": s.Nphi, "Nz": s.Nz}}


def grids_from_meta(meta: dict) -> Grids:
    return make_grids(Geometry(**meta["geometry"]), GridSpec(**meta["grid"]))


def write_field(path, values: np.ndarray, *, layout: str, region: str, grids: Grids | None = None,
                omega: float | None = None, extra: dict | None = None) -> Path:
    """Write one array as a container directory; returns the directory path."""
    path = Path(path)
    values = np.asarray(values)
    if layout not in AXES:
        raise ValueError(f"unknown layout {layout!r}")
    if values.ndim != len(AXES[layout]):
        raise ValueError(f"{layout} layout needs {len(AXES[layout])} axes, got shape {values.shape}")
    is_real = not np.iscomplexobj(values)
    payload = np.ascontiguousarray(values.astype("<c16")).tobytes()
    meta = {
        "format": FORMAT,
        "shape": list(values.shape),
        "axis_order": AXES[layout],
        "layout": layout,
        "region": region,
        "omega": omega,
        "value_type": "real" if is_real else "complex",
        "dtype": "float64 interleaved (re, im)",
        "endianness": "little",
        "sha256": hashlib.sha256(payload).hexdigest(),
    }
    if grids is not None:
        meta.update(grids_meta(grids))
    if extra:
        meta["extra"] = extra
    path.mkdir(parents=True, exist_ok=True)
    tmp = path / "payload.bin.tmp"
    tmp.write_bytes(payload)
    os.replace(tmp, path / "payload.bin")
    (path / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return path


def read_meta(path) -> dict:
    path = Path(path)
    try:
        return json.loads((path / "meta.json").read_text())
    except FileNotFoundError as exc:
        raise ContainerError(f"{path} is not a field container (no meta.json)") from exc


def read_field(path, verify: bool = True):
    """Load a container; returns ``(values, meta)``."""
    path = Path(path)
    meta = read_meta(path)
    try:
        payload = (path / "payload.bin").read_bytes()
    except FileNotFoundError as exc:
        raise ContainerError(f"{path} has no payload.bin") from exc
    count = int(np.prod(meta["shape"]))
    if len(payload) != 16 * count:
        raise ContainerError(f"{path}: payload has {len(payload)} bytes, expected {16 * count}")
    if verify and hashlib.sha256(payload).hexdigest() != meta["sha256"]:
        raise ContainerError(f"{path}: content hash mismatch")
    values = np.frombuffer(payload, dtype="<c16").reshape(meta["shape"]).astype(complex)
    if meta.get("value_type") == "real":
        values = values.real.copy()
    return values, meta


def write_table(path, table: ModalKernelTable) -> Path:
    path = Path(path)
    extra = {"eps": table.eps, "flags": np.argwhere(table.flags).tolist()}
    write_field(path / "GY", table.GY, layout="kernel", region="Y", grids=table.grids, omega=table.omega, extra=extra)
    write_field(path / "GX", table.GX, layout="kernel", region="X", grids=table.grids, omega=table.omega, extra=extra)
    return path


def read_table(path) -> ModalKernelTable:
    path = Path(path)
    GY, meta = read_field(path / "GY")
    GX, _ = read_field(path / "GX")
    grids = grids_from_meta(meta)
    flags = np.zeros(GY.shape[:2], bool)
    for i, m in meta["extra"]["flags"]:
        flags[i, m] = True
    return ModalKernelTable(omega=meta["omega"], eps=meta["extra"]["eps"], grids=grids, GY=GY, GX=GX,
                            flags=flags, ratio=np.full(GY.shape[:2], np.nan))
