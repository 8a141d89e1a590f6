import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from cylinvert import checks
from cylinvert.cli import main
from cylinvert.container import read_field

SMALL = {"grid": {"Nr": 8, "Nrp": 9, "Nphi": 16, "Nz": 16}, "omegas": [2.0]}


def write_config(path, **sections):
    cfg = json.loads(json.dumps(SMALL))
    cfg.update(sections)
    path.write_text(json.dumps(cfg))
    return str(path)


def payload_hashes(root):
    return {p.parent.name: json.loads(p.read_text())["sha256"] for p in sorted(root.glob("*/meta.json"))}


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = write_config(root / "cfg.json")
    assert main(["forward", "--config", cfg, "--out", str(root / "fw")]) == 0
    return root, cfg


class TestForward:
    def test_default_config_shape(self, tmp_path):
        assert main(["forward", "--out", str(tmp_path / "fw")]) == 0
        w, meta = read_field(tmp_path / "fw" / "w")
        assert w.shape == (32, 90, 64)
        assert meta["region"] == "Y" and meta["omega"] == 3.0
        rows = list(csv.reader(open(tmp_path / "fw" / "convergence.csv")))
        assert rows[0] == ["iteration", "delta"] and float(rows[-1][1]) <= 1e-13

    def test_zero_model_gives_zero_data(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", model={"id": "zero"})
        assert main(["forward", "--config", cfg, "--out", str(tmp_path / "fw")]) == 0
        w, _ = read_field(tmp_path / "fw" / "w")
        assert not w.any()

    def test_invalid_geometry(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json", geometry={"r0": 5.0})
        assert main(["forward", "--config", cfg, "--out", str(tmp_path / "fw")]) == 2
        assert "r0" in capsys.readouterr().err
        assert not (tmp_path / "fw").exists()

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json", grid={"Nrr": 4})
        assert main(["forward", "--config", cfg, "--out", str(tmp_path / "fw")]) == 2
        assert "grid.Nrr" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert main(["forward", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path / "fw")]) == 5

    def test_no_convergence_exit(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", forward={"max_iter": 2})
        assert main(["forward", "--config", cfg, "--out", str(tmp_path / "fw")]) == 3
        manifest = json.loads((tmp_path / "fw" / "manifest.json").read_text())
        assert manifest["entries"][0]["converged"] is False

    def test_save_table(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", io={"save_table": True})
        assert main(["forward", "--config", cfg, "--out", str(tmp_path / "fw")]) == 0
        assert (tmp_path / "fw" / "table" / "GY" / "payload.bin").exists()

    def test_resonance_exit(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json", omegas=[checks.neumann_eigen_omega(1)])
        assert main(["forward", "--config", cfg, "--eps", "0", "--out", str(tmp_path / "fw")]) == 4
        assert "(n=1, m=0)" in capsys.readouterr().err
        assert not (tmp_path / "fw").exists()

    def test_determinism(self, small_run, tmp_path):
        root, cfg = small_run
        assert main(["forward", "--config", cfg, "--out", str(tmp_path / "again")]) == 0
        assert payload_hashes(tmp_path / "again") == payload_hashes(root / "fw")


class TestNoise:
    def test_zero_delta_unchanged(self, small_run, tmp_path):
        root, cfg = small_run
        assert main(["noise", "--data", str(root / "fw"), "--delta", "0", "--out", str(tmp_path / "n")]) == 0
        assert np.array_equal(read_field(tmp_path / "n" / "w")[0], read_field(root / "fw" / "w")[0])

    def test_level_and_record(self, small_run, tmp_path):
        root, _ = small_run
        assert main(["noise", "--data", str(root / "fw"), "--delta", "1e-2", "--seed", "5",
                     "--out", str(tmp_path / "n")]) == 0
        rec = json.loads((tmp_path / "n" / "noise.json").read_text())
        assert rec["delta"] == 1e-2 and rec["seed"] == 5
        assert abs(rec["measured"][0]["relative_norm"] - 1e-2) <= 1e-12

    def test_seeds(self, small_run, tmp_path):
        root, _ = small_run
        outs = []
        for name, seed in [("a", 1), ("b", 1), ("c", 2)]:
            assert main(["noise", "--data", str(root / "fw"), "--delta", "1e-3", "--seed", str(seed),
                         "--out", str(tmp_path / name)]) == 0
            outs.append(read_field(tmp_path / name / "w")[0])
        assert np.array_equal(outs[0], outs[1]) and not np.array_equal(outs[0], outs[2])

    def test_zero_field_rejected(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", model={"id": "zero"})
        assert main(["forward", "--config", cfg, "--out", str(tmp_path / "fw")]) == 0
        assert main(["noise", "--data", str(tmp_path / "fw"), "--delta", "1e-3", "--out", str(tmp_path / "n")]) == 2
        assert not (tmp_path / "n").exists()

    def test_missing_delta(self, small_run, tmp_path):
        root, _ = small_run
        assert main(["noise", "--data", str(root / "fw"), "--out", str(tmp_path / "n")]) == 2


class TestInvert:
    def test_pipeline_outputs(self, small_run, tmp_path, capsys):
        root, cfg = small_run
        assert main(["invert", "--config", cfg, "--data", str(root / "fw"), "--out", str(tmp_path / "inv")]) == 0
        xi, meta = read_field(tmp_path / "inv" / "xi")
        assert not np.iscomplexobj(xi) and meta["region"] == "X"
        for name in ("u", "v", "c"):
            assert (tmp_path / "inv" / name / "meta.json").exists()
        rows = list(csv.reader(open(tmp_path / "inv" / "delta_L2.csv")))
        assert rows[0] == ["z", "delta_L2"] and len(rows) == 17
        diag = list(csv.reader(open(tmp_path / "inv" / "diagnostics.csv")))
        assert diag[0][:6] == ["omega", "n", "m", "rank", "sigma1", "residual"] and len(diag) == 1 + 16 * 16
        assert "step1_time" in json.loads((tmp_path / "inv" / "timing.json").read_text())
        assert "max" in capsys.readouterr().out

    def test_missing_data_dir(self, tmp_path):
        assert main(["invert", "--data", str(tmp_path / "nope"), "--out", str(tmp_path / "inv")]) == 5

    def test_grid_mismatch(self, small_run, tmp_path):
        root, _ = small_run
        other = write_config(tmp_path / "c.json", grid={"Nr": 8, "Nrp": 9, "Nphi": 16, "Nz": 8})
        assert main(["invert", "--config", other, "--data", str(root / "fw"), "--out", str(tmp_path / "inv")]) == 2

    def test_multi_frequency_mean(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", omegas=[1.0, 2.0], regularization={"omega_combine": "mean"})
        assert main(["forward", "--config", cfg, "--out", str(tmp_path / "fw")]) == 0
        assert main(["invert", "--config", cfg, "--data", str(tmp_path / "fw"), "--out", str(tmp_path / "inv")]) == 0
        xi = read_field(tmp_path / "inv" / "xi")[0]
        parts = [read_field(tmp_path / "inv" / f"xi_{k}")[0] for k in range(2)]
        assert np.allclose(xi, 0.5 * (parts[0] + parts[1]))

    def test_several_omegas_need_mean(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", omegas=[1.0, 2.0])
        assert main(["forward", "--config", cfg, "--out", str(tmp_path / "fw")]) == 2

    def test_noisy_data_uses_recorded_delta(self, small_run, tmp_path):
        root, cfg = small_run
        assert main(["noise", "--data", str(root / "fw"), "--delta", "1e-3", "--out", str(tmp_path / "n")]) == 0
        assert main(["invert", "--config", cfg, "--data", str(tmp_path / "n"), "--out", str(tmp_path / "inv")]) == 0
        timing = json.loads((tmp_path / "inv" / "timing.json").read_text())
        assert timing["settings"]["noise_delta"] == 1e-3


class TestEvaluate:
    def test_exact_and_zero(self, small_run, tmp_path, capsys):
        root, _ = small_run
        truth = str(root / "fw" / "xi")
        assert main(["evaluate", "--truth", truth, "--recon", truth, "--out", str(tmp_path / "e.csv")]) == 0
        rows = list(csv.reader(open(tmp_path / "e.csv")))
        assert all(float(r[1]) == 0.0 for r in rows[1:])
        assert "max" in capsys.readouterr().out

    def test_missing_args(self):
        assert main(["evaluate"]) == 2


class TestBench:
    def test_appends_rows(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", bench={"grids": [{"Nr": 4, "Nrp": 5, "Nphi": 8, "Nz": 8}],
                                                       "omega": 2.0, "repeats": 1})
        out = str(tmp_path / "b.csv")
        assert main(["bench", "--config", cfg, "--out", out]) == 0
        assert main(["bench", "--config", cfg, "--out", out, "--parallel", "2"]) == 0
        rows = list(csv.reader(open(out)))
        assert len(rows) == 3 and rows[0][0] == "Nr" and rows[2][6] == "2"


class TestGreensCheck:
    def test_default_passes(self, capsys):
        assert main(["greens-check"]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out and "PASS" in out

    def test_resonance_detected(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json", omegas=[checks.neumann_eigen_omega(1)])
        assert main(["greens-check", "--config", cfg, "--eps", "0"]) == 4
        assert "(n=1, m=0)" in capsys.readouterr().out

    def test_damped_resonance_passes(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", omegas=[checks.neumann_eigen_omega(1)])
        assert main(["greens-check", "--config", cfg, "--eps", "1e-6"]) == 0


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cylinvert.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("forward", "noise", "invert", "evaluate", "bench", "greens-check"):
        assert cmd in proc.stdout
