import numpy as np
import pytest

from lambdamem.model import (
    ControlField,
    FieldMode,
    Grid,
    Params,
    SpinWave,
    ValidationError,
    flip_spin_wave,
    gaussian_like_input,
    time_reverse,
)


def test_params_validation():
    Params(d=10.0, delta=-3.0, gamma_s=0.0, dk=0.0)
    with pytest.raises(ValidationError):
        Params(d=0.0)
    with pytest.raises(ValidationError):
        Params(d=10.0, gamma_s=-1.0)
    with pytest.raises(ValidationError):
        Params(d=np.inf)


def test_grid_validation():
    g = Grid(nz=11, nt=21, t_win=2.0)
    assert g.z[0] == 0.0 and g.z[-1] == 1.0
    assert g.t[-1] == 2.0
    assert np.allclose(np.diff(g.z), g.dz)
    with pytest.raises(ValidationError):
        Grid(nz=1, nt=10, t_win=1.0)
    with pytest.raises(ValidationError):
        Grid(nz=10, nt=10, t_win=0.0)


def test_normalized_flag_enforced():
    with pytest.raises(ValidationError):
        SpinWave(np.ones(11) * 2.0, normalized=True)
    s = SpinWave(np.ones(11) * 2.0).renormalized()
    assert s.normalized
    assert abs(s.norm_sq - 1.0) < 1e-10


def test_gaussian_like_input_examples():
    grid = Grid(nz=11, nt=2001, t_win=1.0)
    mode = gaussian_like_input(1.0, grid)
    # vanishes exactly at both window edges
    assert mode.samples[0] == 0.0
    assert mode.samples[-1] == 0.0
    assert abs(mode.norm_sq - 1.0) < 1e-10
    # normalization constant of the continuous shape (oracle value 2.0921...)
    peak = np.abs(mode.samples).max()
    ampl = peak / (1.0 - np.exp(-7.5))
    assert abs(ampl - 2.09) < 0.01
    # symmetric about the window center
    assert np.allclose(mode.samples, mode.samples[::-1], atol=1e-12)


def test_gaussian_like_input_rejects_bad_window():
    grid = Grid(nz=11, nt=64, t_win=1.0)
    with pytest.raises(ValidationError):
        gaussian_like_input(-1.0, grid)


def test_time_reverse_examples():
    grid = Grid(nz=11, nt=801, t_win=3.0)
    mode = gaussian_like_input(3.0, grid)
    # real symmetric mode maps to itself
    assert np.allclose(time_reverse(mode).samples, mode.samples)
    # phase ramp: e^{i w t} -> e^{i w (t - T)}
    w = 2.1
    ramp = FieldMode(np.exp(1j * w * mode.t), 3.0)
    rev = time_reverse(ramp)
    assert np.allclose(rev.samples, np.exp(1j * w * (mode.t - 3.0)), atol=1e-12)
    # involution, bitwise on the grid
    assert np.array_equal(time_reverse(time_reverse(ramp)).samples, ramp.samples)
    # exact norm preservation
    assert time_reverse(ramp).norm_sq == ramp.norm_sq


def test_flip_spin_wave_examples():
    z = np.linspace(0.0, 1.0, 101)
    ramp = SpinWave(np.sqrt(3.0) * z)
    flipped = flip_spin_wave(ramp)
    assert np.allclose(flipped.samples, np.sqrt(3.0) * (1.0 - z))
    flat = SpinWave(np.ones(101))
    assert np.array_equal(flip_spin_wave(flat).samples, flat.samples)
    phased = flip_spin_wave(flat, dk=np.pi)
    assert np.allclose(phased.samples, np.exp(-2j * np.pi * z))
    # dk = 0 double flip is the identity bitwise
    assert np.array_equal(flip_spin_wave(flip_spin_wave(ramp)).samples, ramp.samples)


def test_control_field_cumulative_energy():
    t_win = 4.0
    ctrl = ControlField.from_function(lambda t: 2.0 * np.ones_like(t), t_win, 201)
    assert ctrl.h_cum[0] == 0.0
    assert np.all(np.diff(ctrl.h_cum) >= 0.0)
    assert abs(ctrl.h_total - 4.0 * t_win) < 1e-12
    rev = ctrl.time_reversed()
    assert abs(rev.h_total - ctrl.h_total) < 1e-12


def test_control_clipping_preserves_phase():
    t = np.linspace(0, 1, 101)
    ctrl = ControlField(10.0 * np.exp(1j * t), 1.0)
    clipped = ctrl.clipped(3.0)
    assert np.abs(clipped.samples).max() <= 3.0 + 1e-12
    assert np.allclose(np.angle(clipped.samples), np.angle(ctrl.samples))


def test_samples_are_immutable():
    s = SpinWave(np.ones(11))
    with pytest.raises(ValueError):
        s.samples[0] = 2.0
