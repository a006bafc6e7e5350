"""Dimensionless domain types, grids, and normalization utilities.

Everything in this package works in the scaled variables of the one-dimensional
Lambda-system propagation problem: position z in [0, 1] (optical-depth
coordinate), time t in units of the excited-state coherence decay, Rabi
frequencies in the same units.  The physical configuration is reduced to four
dimensionless numbers collected in :class:`Params`.

Conventions used throughout the package:

* norms and inner products of sampled modes use the trapezoid rule on the
  uniform grid the mode lives on;
* normalization is explicit -- constructors never renormalize, and the
  ``normalized`` flag is only set by :meth:`SpinWave.renormalized` (and the
  FieldMode equivalent), which also validates the unit norm;
* grids are uniform and include both endpoints, so reflections such as
  z -> 1 - z are exact index reversals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline


class ValidationError(ValueError):
    """Invalid physical parameters, grids, or stage configuration."""


class GridResolutionError(RuntimeError):
    """A simulation grid is too coarse to resolve the requested dynamics."""


class ConvergenceError(RuntimeError):
    """An iterative procedure did not meet its tolerance within its cap."""


class NumericalError(RuntimeError):
    """A numerical result is unusable (NaN, failed bracket, ...)."""


NORM_TOL = 1e-10


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


# ---------------------------------------------------------------------------
# quadrature helpers
# ---------------------------------------------------------------------------

def trapezoid_norm_sq(samples: np.ndarray, dx: float) -> float:
    """Trapezoid-rule integral of |samples|^2 on a uniform grid."""
    return float(np.trapezoid(np.abs(samples) ** 2, dx=dx))


def trapezoid_inner(a: np.ndarray, b: np.ndarray, dx: float) -> complex:
    """Trapezoid-rule L2 inner product <a, b> = int conj(a) b dx."""
    return complex(np.trapezoid(np.conj(a) * b, dx=dx))


def gauss_legendre_panels(a: float, b: float, n_panels: int, order: int = 10):
    """Composite Gauss-Legendre nodes and weights on [a, b].

    ``n_panels`` equal panels with an ``order``-point rule per panel.  This is
    the quadrature used for every closed-form kernel integral in the package;
    the kernels are smooth, so high order per panel keeps node counts small.
    """
    if b <= a:
        raise ValidationError(f"empty quadrature interval [{a}, {b}]")
    x0, w0 = leggauss(order)
    edges = np.linspace(a, b, n_panels + 1)
    half = np.diff(edges) / 2.0
    mid = (edges[:-1] + edges[1:]) / 2.0
    nodes = (mid[:, None] + half[:, None] * x0[None, :]).ravel()
    weights = (half[:, None] * w0[None, :]).ravel()
    return nodes, weights


def l2_distance(a: np.ndarray, b: np.ndarray, dx: float) -> float:
    """Trapezoid L2 distance between two sampled modes on the same grid."""
    return np.sqrt(max(trapezoid_norm_sq(a - b, dx), 0.0))


# ---------------------------------------------------------------------------
# configuration and grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Params:
    """Dimensionless physical configuration.

    d        -- resonant optical depth (> 0); a resonant probe with the
                control off attenuates in intensity by exp(-2 d).
    delta    -- one-photon detuning in linewidth units.
    gamma_s  -- spin-coherence decay rate in linewidth units (>= 0).
    dk       -- momentum written on the spin wave by the splitting of the two
                lower levels, in inverse-medium-length units (>= 0).  It enters
                backward retrieval as the phase exp(-2i dk z).
    """

    d: float
    delta: float = 0.0
    gamma_s: float = 0.0
    dk: float = 0.0

    def __post_init__(self):
        vals = (self.d, self.delta, self.gamma_s, self.dk)
        if not all(np.isfinite(v) for v in vals):
            raise ValidationError(f"non-finite parameter in {vals}")
        if self.d <= 0:
            raise ValidationError(f"optical depth must be positive, got {self.d}")
        if self.gamma_s < 0:
            raise ValidationError(f"spin decay must be >= 0, got {self.gamma_s}")
        if self.dk < 0:
            raise ValidationError(f"dk must be >= 0, got {self.dk}")


@dataclass(frozen=True)
class Grid:
    """Uniform space-time grid: nz points on z in [0,1], nt points on [0, t_win]."""

    nz: int
    nt: int
    t_win: float

    def __post_init__(self):
        if self.nz < 2 or self.nt < 2:
            raise ValidationError(f"grid needs nz, nt >= 2, got {self.nz}x{self.nt}")
        if not (np.isfinite(self.t_win) and self.t_win > 0):
            raise ValidationError(f"t_win must be positive, got {self.t_win}")

    @cached_property
    def z(self) -> np.ndarray:
        return _freeze(np.linspace(0.0, 1.0, self.nz))

    @cached_property
    def t(self) -> np.ndarray:
        return _freeze(np.linspace(0.0, self.t_win, self.nt))

    @property
    def dz(self) -> float:
        return 1.0 / (self.nz - 1)

    @property
    def dt(self) -> float:
        return self.t_win / (self.nt - 1)


# ---------------------------------------------------------------------------
# sampled modes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpinWave:
    """Complex spin-wave amplitude S(z) sampled on the uniform grid of [0, 1]."""

    samples: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "samples", _freeze(np.asarray(self.samples, dtype=complex)))
        if self.samples.ndim != 1 or self.samples.size < 2:
            raise ValidationError("SpinWave needs a 1-d array of >= 2 samples")
        if self.normalized and abs(self.norm_sq - 1.0) > NORM_TOL:
            raise ValidationError(
                f"spin wave flagged normalized but ||S||^2 = {self.norm_sq!r}")

    @property
    def nz(self) -> int:
        return self.samples.size

    @property
    def dz(self) -> float:
        return 1.0 / (self.samples.size - 1)

    @cached_property
    def z(self) -> np.ndarray:
        return _freeze(np.linspace(0.0, 1.0, self.samples.size))

    @property
    def norm_sq(self) -> float:
        return trapezoid_norm_sq(self.samples, self.dz)

    def renormalized(self) -> "SpinWave":
        n = np.sqrt(self.norm_sq)
        if n == 0.0:
            raise NumericalError("cannot normalize a zero spin wave")
        return SpinWave(self.samples / n, normalized=True)

    def interpolator(self) -> CubicSpline:
        """Cubic-spline interpolant of the samples (optimal modes are smooth)."""
        return CubicSpline(self.z, self.samples)

    @classmethod
    def from_function(cls, fn, nz: int) -> "SpinWave":
        z = np.linspace(0.0, 1.0, nz)
        return cls(np.asarray(fn(z), dtype=complex))


@dataclass(frozen=True)
class FieldMode:
    """Complex temporal envelope E(t) sampled uniformly on the window [0, t_win]."""

    samples: np.ndarray
    t_win: float
    normalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "samples", _freeze(np.asarray(self.samples, dtype=complex)))
        if self.samples.ndim != 1 or self.samples.size < 2:
            raise ValidationError("FieldMode needs a 1-d array of >= 2 samples")
        if not (np.isfinite(self.t_win) and self.t_win > 0):
            raise ValidationError(f"window length must be positive, got {self.t_win}")
        if self.normalized and abs(self.norm_sq - 1.0) > NORM_TOL:
            raise ValidationError(
                f"field mode flagged normalized but ||E||^2 = {self.norm_sq!r}")

    @property
    def nt(self) -> int:
        return self.samples.size

    @property
    def dt(self) -> float:
        return self.t_win / (self.samples.size - 1)

    @cached_property
    def t(self) -> np.ndarray:
        return _freeze(np.linspace(0.0, self.t_win, self.samples.size))

    @property
    def norm_sq(self) -> float:
        return trapezoid_norm_sq(self.samples, self.dt)

    def renormalized(self) -> "FieldMode":
        n = np.sqrt(self.norm_sq)
        if n == 0.0:
            raise NumericalError("cannot normalize a zero field mode")
        return FieldMode(self.samples / n, self.t_win, normalized=True)

    def interpolator(self) -> CubicSpline:
        return CubicSpline(self.t, self.samples)

    def overlap(self, other: "FieldMode") -> float:
        """|<self, other>| for modes on the same window, trapezoid rule."""
        if other.nt != self.nt or abs(other.t_win - self.t_win) > 1e-12 * self.t_win:
            raise ValidationError("overlap requires matching windows")
        sq = self.norm_sq * other.norm_sq
        if sq == 0.0:
            return 0.0
        return abs(trapezoid_inner(self.samples, other.samples, self.dt)) / np.sqrt(sq)


@dataclass(frozen=True)
class ControlField:
    """Complex control Rabi envelope Omega(t) with its cumulative energy integral.

    h_cum[i] = int_0^{t_i} |Omega|^2 dt  (trapezoid rule); this reparameterized
    time is the variable in which the adiabatic propagators become
    control-independent, so it is precomputed once here.
    """

    samples: np.ndarray
    t_win: float
    h_cum: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "samples", _freeze(np.asarray(self.samples, dtype=complex)))
        if self.samples.ndim != 1 or self.samples.size < 2:
            raise ValidationError("ControlField needs a 1-d array of >= 2 samples")
        if not (np.isfinite(self.t_win) and self.t_win > 0):
            raise ValidationError(f"window length must be positive, got {self.t_win}")
        power = np.abs(self.samples) ** 2
        h = np.concatenate(([0.0], np.cumsum((power[1:] + power[:-1]) * (self.dt / 2.0))))
        object.__setattr__(self, "h_cum", _freeze(h))

    @property
    def nt(self) -> int:
        return self.samples.size

    @property
    def dt(self) -> float:
        return self.t_win / (self.samples.size - 1)

    @cached_property
    def t(self) -> np.ndarray:
        return _freeze(np.linspace(0.0, self.t_win, self.samples.size))

    @property
    def h_total(self) -> float:
        return float(self.h_cum[-1])

    def time_reversed(self) -> "ControlField":
        """Omega*(T - t), the control that drives the inverse process."""
        return ControlField(np.conj(self.samples[::-1]), self.t_win)

    def clipped(self, omega_cap: float) -> "ControlField":
        """Clip |Omega| at omega_cap, preserving the phase."""
        mag = np.abs(self.samples)
        over = mag > omega_cap
        if not np.any(over):
            return self
        out = self.samples.copy()
        out[over] *= omega_cap / mag[over]
        return ControlField(out, self.t_win)

    @classmethod
    def from_function(cls, fn, t_win: float, nt: int) -> "ControlField":
        t = np.linspace(0.0, t_win, nt)
        return cls(np.asarray(fn(t), dtype=complex), t_win)


DECAYLESS_NORM_TOL = 1e-8


@dataclass(frozen=True)
class DecaylessMode:
    """Auxiliary stored mode s(z) on [0, z_max], z_max >= 1.

    This is the mode the input maps onto when polarization decay and leakage
    are switched off; the map from the input envelope is unitary and the
    physical spin wave is recovered by a lossy Bessel dressing kernel.
    """

    samples: np.ndarray
    z_max: float
    normalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "samples", _freeze(np.asarray(self.samples, dtype=complex)))
        if self.samples.ndim != 1 or self.samples.size < 2:
            raise ValidationError("DecaylessMode needs a 1-d array of >= 2 samples")
        if self.z_max < 1.0:
            raise ValidationError(f"z_max must be >= 1, got {self.z_max}")
        if self.normalized and abs(self.norm_sq - 1.0) > DECAYLESS_NORM_TOL:
            raise ValidationError(
                f"decayless mode flagged normalized but ||s||^2 = {self.norm_sq!r}")

    @property
    def dz(self) -> float:
        return self.z_max / (self.samples.size - 1)

    @cached_property
    def z(self) -> np.ndarray:
        return _freeze(np.linspace(0.0, self.z_max, self.samples.size))

    @property
    def norm_sq(self) -> float:
        return trapezoid_norm_sq(self.samples, self.dz)

    def renormalized(self) -> "DecaylessMode":
        n = np.sqrt(self.norm_sq)
        if n == 0.0:
            raise NumericalError("cannot normalize a zero mode")
        return DecaylessMode(self.samples / n, self.z_max, normalized=True)

    def interpolator(self) -> CubicSpline:
        return CubicSpline(self.z, self.samples)


# ---------------------------------------------------------------------------
# canonical shapes and elementary mode operations
# ---------------------------------------------------------------------------

def gaussian_like_input(t_win: float, grid: Grid) -> FieldMode:
    """Smooth input envelope A (exp(-30 (t/T - 1/2)^2) - exp(-7.5)) / sqrt(T).

    The offset makes the envelope vanish exactly at both window edges.  The
    amplitude A is recomputed from the grid norm rather than hard-coded
    (A ~ 2.09 for the continuous shape), so the returned mode has unit
    trapezoid norm at any resolution.
    """
    if not (np.isfinite(t_win) and t_win > 0):
        raise ValidationError(f"t_win must be positive, got {t_win}")
    t = np.linspace(0.0, t_win, grid.nt)
    x = t / t_win
    raw = (np.exp(-30.0 * (x - 0.5) ** 2) - np.exp(-7.5)) / np.sqrt(t_win)
    raw[0] = 0.0
    raw[-1] = 0.0
    return FieldMode(raw.astype(complex), t_win).renormalized()


def time_reverse(mode: FieldMode) -> FieldMode:
    """Conjugate time reversal about the window: E(t) -> E*(T - t)."""
    return FieldMode(np.conj(mode.samples[::-1]), mode.t_win, normalized=mode.normalized)


def flip_spin_wave(s: SpinWave, dk: float = 0.0) -> SpinWave:
    """Reflect the spin wave for backward retrieval: S(z) -> S(1-z) e^{-2i dk z}.

    The reflection is an index reversal (uniform grid with both endpoints), so
    repeating it with dk = 0 restores the original samples bitwise.
    """
    flipped = s.samples[::-1]
    if dk != 0.0:
        z = np.linspace(0.0, 1.0, s.samples.size)
        flipped = flipped * np.exp(-2j * dk * z)
        return SpinWave(flipped)
    return SpinWave(flipped, normalized=s.normalized)
