"""Command-line entry point: ``cylinvert <command> [options]``.

Exit codes: 0 ok, 2 validation, 3 no convergence, 4 resonance, 5 I/O.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import checks, container
from .config import RunConfig, format_validation_error, load_config
from .forward import NoConvergence, run_forward
from .greens import ResonanceError, build_kernel_table, scan_resonances
from .inverse import run_inverse
from .metrics import append_bench_csv, run_bench, slice_error
from .models import NoiseSpec, add_noise, relative_perturbation, sample_xi

EXIT_OK, EXIT_VALIDATION, EXIT_NOCONV, EXIT_RESONANCE, EXIT_IO = 0, 2, 3, 4, 5

log = logging.getLogger("cylinvert")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _suffix(k: int, count: int) -> str:
    return f"_{k}" if count > 1 else ""


def _load(args) -> RunConfig:
    if args.config is None:
        return RunConfig()
    path = Path(args.config)
    if not path.is_file():
        raise CliError(EXIT_IO, f"config file not found: {path}")
    try:
        return load_config(path)
    except ValidationError as exc:
        raise CliError(EXIT_VALIDATION, "invalid config:\n" + format_validation_error(exc))
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_VALIDATION, f"config is not valid JSON: {exc}")


def _eps(args, cfg: RunConfig) -> float:
    eps = cfg.greens.eps if getattr(args, "eps", None) is None else args.eps
    if eps < 0:
        raise CliError(EXIT_VALIDATION, "eps must be >= 0")
    return eps


def _out_dir(args, cfg: RunConfig) -> Path:
    return Path(args.out if args.out is not None else cfg.io.output_dir)


def _read_manifest(data: Path) -> dict:
    if not data.is_dir():
        raise CliError(EXIT_IO, f"data directory not found: {data}")
    try:
        return json.loads((data / "manifest.json").read_text())
    except FileNotFoundError:
        raise CliError(EXIT_IO, f"{data} has no manifest.json")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True))


def cmd_forward(args) -> int:
    cfg = _load(args)
    eps = _eps(args, cfg)
    grids = cfg.make_grids()
    sources = cfg.sources.build()
    settings = cfg.forward.build()
    xi = sample_xi(cfg.model.build(), grids)
    if eps == 0:
        for omega in cfg.omegas:
            bad = scan_resonances(omega, grids, eps)
            if bad:
                raise ResonanceError(bad, omega)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)

    count = len(cfg.omegas)
    status = EXIT_OK
    container.write_field(out / "xi", xi, layout="physical", region="X", grids=grids,
                          extra={"model": cfg.model.model_dump()})
    entries = []
    for k, omega in enumerate(cfg.omegas):
        sfx = _suffix(k, count)
        table = build_kernel_table(omega, grids, eps)
        try:
            res = run_forward(xi, sources, omega, grids, settings, eps=eps, table=table)
        except NoConvergence as exc:
            res = exc.result
            log.error("%s", exc)
            status = EXIT_NOCONV
        with open(out / f"convergence{sfx}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "delta"])
            for i, d in enumerate(res.history, 1):
                w.writerow([i, repr(d)])
        meta = {"iterations": res.iterations, "converged": res.converged, "eps": eps}
        container.write_field(out / f"w{sfx}", res.w_phys, layout="physical", region="Y",
                              grids=grids, omega=omega, extra=meta)
        container.write_field(out / f"w_modal{sfx}", res.w_modal, layout="modal", region="Y",
                              grids=grids, omega=omega, extra=meta)
        container.write_field(out / f"u0{sfx}", res.u0_modal, layout="modal", region="X",
                              grids=grids, omega=omega)
        if cfg.io.save_table:
            container.write_table(out / f"table{sfx}", table)
        entries.append({"omega": omega, "suffix": sfx, "iterations": res.iterations,
                        "converged": res.converged})
        print(f"omega={omega:g}: {res.iterations} iterations, converged={res.converged}")
    _write_json(out / "manifest.json", {"kind": "forward", "omegas": list(cfg.omegas), "eps": eps,
                                        "entries": entries, "truth": "xi", "noise": None})
    return status


def cmd_noise(args) -> int:
    if args.delta is None or args.delta < 0:
        raise CliError(EXIT_VALIDATION, "--delta must be given and >= 0")
    if args.out is None:
        raise CliError(EXIT_VALIDATION, "--out is required")
    data = Path(args.data)
    manifest = _read_manifest(data)
    spec = NoiseSpec(args.delta, args.seed)
    out = Path(args.out)
    fields = []
    for e in manifest["entries"]:
        w, meta = container.read_field(data / f"w{e['suffix']}")
        fields.append((e, w, meta))
    record = {"delta": args.delta, "seed": args.seed, "measured": []}
    noisy_fields = []
    for k, (e, w, meta) in enumerate(fields):
        grids = container.grids_from_meta(meta)
        try:
            noisy = add_noise(w, grids, NoiseSpec(spec.delta, spec.seed + k))
        except ValueError as exc:
            raise CliError(EXIT_VALIDATION, str(exc))
        rel = relative_perturbation(noisy, w, grids) if args.delta > 0 else 0.0
        record["measured"].append({"omega": e["omega"], "relative_norm": rel})
        noisy_fields.append((e, noisy, meta, grids))
    out.mkdir(parents=True, exist_ok=True)
    for (e, noisy, meta, grids), m in zip(noisy_fields, record["measured"]):
        container.write_field(out / f"w{e['suffix']}", noisy, layout="physical", region="Y",
                              grids=grids, omega=meta["omega"], extra=meta.get("extra"))
        print(f"omega={e['omega']:g}: measured relative perturbation {m['relative_norm']:.3e}")
    if manifest.get("truth") and (data / manifest["truth"]).is_dir():
        xi, meta = container.read_field(data / manifest["truth"])
        container.write_field(out / manifest["truth"], xi, layout="physical", region="X",
                              grids=container.grids_from_meta(meta), extra=meta.get("extra"))
    _write_json(out / "noise.json", record)
    _write_json(out / "manifest.json", {**manifest, "kind": "noise", "noise": record})
    return EXIT_OK


def cmd_invert(args) -> int:
    cfg = _load(args)
    eps = _eps(args, cfg)
    if args.parallel is not None and args.parallel < 1:
        raise CliError(EXIT_VALIDATION, "--parallel must be >= 1")
    data = Path(args.data)
    manifest = _read_manifest(data)
    if [float(o) for o in manifest["omegas"]] != [float(o) for o in cfg.omegas]:
        raise CliError(EXIT_VALIDATION,
                       f"config omegas {cfg.omegas} do not match data omegas {manifest['omegas']}")
    grids = cfg.make_grids()
    delta = cfg.regularization.noise_delta
    if manifest.get("noise"):
        delta = manifest["noise"]["delta"]
    if args.delta is not None:
        delta = args.delta
    override = {"noise_delta": delta}
    if args.parallel is not None:
        override["workers"] = args.parallel
    try:
        settings = cfg.regularization.build(**override)
    except ValueError as exc:
        raise CliError(EXIT_VALIDATION, str(exc))

    # exact modal data is preferred: a physical round trip adds roundoff that weak modes amplify
    arrays, modal = [], True
    for e in manifest["entries"]:
        p = data / f"w_modal{e['suffix']}"
        if not p.is_dir():
            modal = False
            break
    for e in manifest["entries"]:
        name = f"w_modal{e['suffix']}" if modal else f"w{e['suffix']}"
        values, meta = container.read_field(data / name)
        if container.grids_from_meta(meta).spec != grids.spec:
            raise CliError(EXIT_VALIDATION, f"{name} was produced on a different grid")
        arrays.append(values)

    t0 = time.perf_counter()
    res = run_inverse(arrays, cfg.sources.build(), cfg.omegas, grids, settings, eps=eps, modal=modal)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    count = len(cfg.omegas)
    container.write_field(out / "xi", res.xi, layout="physical", region="X", grids=grids,
                          extra={"omegas": res.omegas, "combine": settings.omega_combine})
    container.write_field(out / "c", np.nan_to_num(res.c), layout="physical", region="X", grids=grids,
                          extra={"invalid_points": int(res.c_invalid.sum())})
    with open(out / "diagnostics.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["omega", "n", "m", "rank", "sigma1", "residual", "flagged"])
        for k, omega in enumerate(res.omegas):
            sfx = _suffix(k, count)
            if count > 1:
                container.write_field(out / f"xi{sfx}", res.xi_per_omega[k], layout="physical",
                                      region="X", grids=grids, omega=omega)
            container.write_field(out / f"u{sfx}", res.u_phys[k], layout="physical", region="X",
                                  grids=grids, omega=omega)
            container.write_field(out / f"v{sfx}", res.v_phys[k], layout="physical", region="X",
                                  grids=grids, omega=omega)
            d = res.diagnostics[k]
            for i, n in enumerate(grids.n):
                for m in range(grids.spec.Nz):
                    w.writerow([omega, int(n), m, int(d.rank[i, m]), repr(float(d.sigma1[i, m])),
                                repr(float(d.residual[i, m])), int(bool(d.flagged[i, m]))])
    _write_json(out / "timing.json", {"wall_time": time.perf_counter() - t0, "step1_time": res.step1_time,
                                      "imag_residue": res.imag_residue, "modal_input": modal,
                                      "settings": res.settings})
    truth = manifest.get("truth")
    if truth and (data / truth).is_dir():
        xi_true, _ = container.read_field(data / truth)
        table = slice_error(res.xi, xi_true, grids)
        table.to_csv(out / "delta_L2.csv")
        print(f"max_z delta_L2 = {table.max:.6g}")
    print(f"reconstruction written to {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if args.truth is None or args.recon is None:
        raise CliError(EXIT_VALIDATION, "--truth and --recon are required")
    xi_true, meta_t = container.read_field(args.truth)
    xi_rec, meta_r = container.read_field(args.recon)
    grids = container.grids_from_meta(meta_t)
    if container.grids_from_meta(meta_r).spec != grids.spec or xi_true.shape != xi_rec.shape:
        raise CliError(EXIT_VALIDATION, "truth and reconstruction live on different grids")
    try:
        table = slice_error(np.real(xi_rec), np.real(xi_true), grids)
    except ValueError as exc:
        raise CliError(EXIT_VALIDATION, str(exc))
    out = Path(args.out) if args.out else Path("delta_L2.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(out)
    print(f"max_z delta_L2 = {table.max:.6g}")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _load(args)
    eps = _eps(args, cfg)
    if args.parallel is not None and args.parallel < 1:
        raise CliError(EXIT_VALIDATION, "--parallel must be >= 1")
    try:
        settings = cfg.regularization.build(workers=args.parallel or 1)
    except ValueError as exc:
        raise CliError(EXIT_VALIDATION, str(exc))
    specs = [g.build() for g in cfg.bench.grids]
    out = Path(args.out) if args.out else _out_dir(args, cfg) / "bench.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    records = run_bench(specs, cfg.bench.omega, settings, cfg.geometry.build(), cfg.model.build(),
                        cfg.sources.build(), eps, cfg.bench.repeats, cfg.forward.build())
    try:
        append_bench_csv(records, out)
    except ValueError as exc:
        raise CliError(EXIT_IO, str(exc))
    for r in records:
        print(f"Nr={r.Nr} Nphi={r.Nphi} Nz={r.Nz}: total {r.T_total:.3f} s, step 1 {r.T_step1:.3f} s")
    return EXIT_OK


def cmd_greens_check(args) -> int:
    cfg = _load(args)
    eps = _eps(args, cfg)
    grids = cfg.make_grids()
    results = checks.run_all(grids, cfg.omegas, eps)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    if any(r.name.endswith("resonance scan") for r in failed):
        return EXIT_RESONANCE
    return EXIT_VALIDATION if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cylinvert", description="Acoustic sounding in a cylindrical waveguide.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, data=False):
        sp.add_argument("--config", metavar="PATH")
        sp.add_argument("--out", metavar="DIR")
        sp.add_argument("--eps", type=float, metavar="R")
        if data:
            sp.add_argument("--data", metavar="DIR", required=True)

    sp = sub.add_parser("forward", help="synthesize scattered-field data")
    common(sp)
    sp.set_defaults(func=cmd_forward)

    sp = sub.add_parser("noise", help="perturb forward data with relative Gaussian noise")
    sp.add_argument("--data", metavar="DIR", required=True)
    sp.add_argument("--out", metavar="DIR")
    sp.add_argument("--delta", type=float, metavar="R")
    sp.add_argument("--seed", type=int, default=0, metavar="N")
    sp.set_defaults(func=cmd_noise)

    sp = sub.add_parser("invert", help="reconstruct xi from data")
    common(sp, data=True)
    sp.add_argument("--delta", type=float, metavar="R", help="noise level for the discrepancy rule")
    sp.add_argument("--parallel", type=int, metavar="N")
    sp.set_defaults(func=cmd_invert)

    sp = sub.add_parser("evaluate", help="per-slice relative error table")
    sp.add_argument("--truth", metavar="DIR")
    sp.add_argument("--recon", metavar="DIR")
    sp.add_argument("--out", metavar="CSV")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("bench", help="time the inverse solver over a grid list")
    common(sp)
    sp.add_argument("--parallel", type=int, metavar="N")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("greens-check", help="run the kernel and special-function invariant suites")
    common(sp)
    sp.set_defaults(func=cmd_greens_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ResonanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESONANCE
    except (container.ContainerError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
