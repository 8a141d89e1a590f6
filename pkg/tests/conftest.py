import functools

import numpy as np
import pytest

from cylinvert.forward import ForwardSettings, run_forward
from cylinvert.greens import build_kernel_table, default_sources, incident_modal
from cylinvert.grids import Geometry, GridSpec, make_grids, to_modal
from cylinvert.inverse import RegSettings, assemble_operators, invert_single
from cylinvert.metrics import slice_error
from cylinvert.models import ModelSpec, NoiseSpec, add_noise, sample_xi

ACCEPTANCE_LINES = []


class Workbench:
    """Session cache for the expensive default-grid objects."""

    def __init__(self, grids):
        self.grids = grids
        self.sources = default_sources()
        self._tables = {}
        self._forward = {}
        self._bank = (None, None)

    def table(self, omega):
        if omega not in self._tables:
            self._tables[omega] = build_kernel_table(omega, self.grids, 1e-6)
        return self._tables[omega]

    def xi(self, model="model1"):
        return sample_xi(ModelSpec(model), self.grids)

    def forward(self, omega, model="model1"):
        key = (omega, model)
        if key not in self._forward:
            self._forward[key] = run_forward(self.xi(model), self.sources, omega, self.grids,
                                             ForwardSettings(), eps=1e-6, table=self.table(omega))
        return self._forward[key]

    def bank(self, omega):
        if self._bank[0] != omega:
            self._bank = (None, None)
            self._bank = (omega, assemble_operators(self.table(omega)))
        return self._bank[1]

    @functools.lru_cache(maxsize=None)
    def reconstruct(self, omega, model="model1", delta=0.0, seed=7):
        fw = self.forward(omega, model)
        if delta > 0:
            w_modal = to_modal(add_noise(fw.w_phys, self.grids, NoiseSpec(delta, seed)), self.grids)
        else:
            w_modal = fw.w_modal
        settings = RegSettings(noise_delta=delta)
        u0 = incident_modal(self.sources, omega, self.grids, 1e-6)
        xi, v, u, diag, residue, t1 = invert_single(w_modal, u0, self.table(omega), settings, self.bank(omega))
        err = slice_error(xi, self.xi(model), self.grids)
        return {"xi": xi, "diag": diag, "residue": residue, "step1": t1, "error": err}


@pytest.fixture(scope="session")
def grids():
    return make_grids(Geometry(), GridSpec())


@pytest.fixture(scope="session")
def small_grids():
    return make_grids(Geometry(), GridSpec(Nr=12, Nrp=13, Nphi=16, Nz=16))


@pytest.fixture(scope="session")
def bench(grids):
    return Workbench(grids)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def report():
    def add(number, passed, text):
        ACCEPTANCE_LINES.append(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {text}")
    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
