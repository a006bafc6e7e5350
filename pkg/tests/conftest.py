"""Shared fixtures: cached optimal modes and solver helpers.

The kernel eigenproblems are deterministic pure functions of the depth, so
the session-scoped caches below just avoid recomputing them test by test.
"""

import numpy as np
import pytest

from lambdamem import optimizer
from lambdamem.model import Grid, Params, SpinWave, gaussian_like_input
from lambdamem import solver


@pytest.fixture(scope="session")
def backward_mode():
    cache = {}

    def get(d: float):
        if d not in cache:
            cache[d] = optimizer.optimal_backward_mode(d, mode_tol=1e-7)
        return cache[d]

    return get


@pytest.fixture(scope="session")
def forward_mode():
    cache = {}

    def get(d: float):
        if d not in cache:
            cache[d] = optimizer.optimal_forward_mode(d, mode_tol=1e-7)
        return cache[d]

    return get


@pytest.fixture()
def flat_wave():
    def make(nz: int = 201) -> SpinWave:
        return SpinWave.from_function(lambda z: np.ones_like(z), nz).renormalized()

    return make


@pytest.fixture()
def ramp_wave():
    def make(nz: int = 201) -> SpinWave:
        return SpinWave.from_function(lambda z: np.sqrt(3.0) * z, nz).renormalized()

    return make


def l2(a: np.ndarray, b: np.ndarray, dx: float) -> float:
    return float(np.sqrt(np.trapezoid(np.abs(a - b) ** 2, dx=dx)))


def mode_distance(a: SpinWave, b: SpinWave) -> float:
    """L2 distance up to a global sign."""
    return min(l2(s * a.samples, b.samples, b.dz) for s in (1.0, -1.0))


@pytest.fixture(scope="session")
def run_complete_retrieval():
    """Simulate complete retrieval of a spin wave; returns the SimResult."""

    def run(d, spin, delta=0.0, shape="flat", t_win=25.0, nt=None, nz=None,
            factor=None, direction="forward"):
        params = Params(d=d, delta=delta)
        factor = factor if factor is not None else (10.0 if abs(delta) < 1 else 80.0)
        nz = nz or spin.nz
        h_total = factor * (d**2 + delta**2) / d
        omega = np.sqrt(h_total / t_win)
        nt = nt or max(2000, solver.suggested_nt(params, t_win, omega))
        grid = Grid(nz=nz, nt=nt, t_win=t_win)
        ctrl = solver.complete_retrieval_control(params, t_win, nt, shape,
                                                 complete_factor=factor)
        kind = "retrieval-backward" if direction == "backward" else "retrieval-forward"
        return solver.simulate(params, grid, solver.StageSpec(kind, control=ctrl,
                                                              spin=spin))

    return run
