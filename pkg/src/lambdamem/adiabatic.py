"""Closed-form adiabatic propagators and optimal control shaping.

For smooth pulses the polarization follows the fields adiabatically and the
propagation integrates to a one-kernel map.  With the complex scale
c = 1 + i delta and the cumulative control energy h, both directions use

    m_c(h, z) = (1/c) exp(-(h + d z)/c) I0(2 sqrt(h d z)/c),

retrieval as E(1,t) = -sqrt(d) Omega(t) int m_c(h(0,t), z) S(1-z) dz and
storage as its time reverse.  Dropping the decay part of c (c -> i delta)
makes the input-to-stored-mode map unitary; that "decayless" mode s(z) lives
on [0, z_max >= 1], determines the physical spin wave through the
depth-dressing kernel

    D(z, z') = d exp(-d(z+z')) I0(2 d sqrt(z z')),

and is the natural variable for shaping the storage control.  Composing the
dressing with itself reproduces the retrieval kernel, D o D = kr, which is
the identity behind all the efficiency bookkeeping here.

Control shaping inverts the cumulative-energy equation: both sides of the
|.|^2-integrated map are monotone in time, so h(t) follows from a
piecewise-linear inversion of a densely cached cumulative integral, and the
control is read off pointwise, magnitude and phase together.  At true
resonance the unitary kernel degenerates to a delta line h = d z (ideal
group-velocity propagation) and the same machinery runs on that limit
directly; this path is taken for |delta| below RESONANT_DELTA.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ive, j0

from . import kernels
from .model import (
    ControlField,
    DecaylessMode,
    FieldMode,
    NumericalError,
    Params,
    SpinWave,
    ValidationError,
    gauss_legendre_panels,
    trapezoid_norm_sq,
)

__all__ = [
    "ShapingConfig",
    "EitWindowDiagnostics",
    "adiabatic_retrieve",
    "adiabatic_store",
    "decayless_store",
    "decayless_invert",
    "decay_dress",
    "optimal_decayless_mode",
    "default_z_max",
    "shape_retrieval_control",
    "shape_storage_control",
    "optimal_storage_control",
    "storage_interval_decay",
    "eit_window_diagnostics",
]

#: below this |delta| the decayless machinery uses the resonant (delta-line)
#: limit of the unitary kernel instead of the 1/delta form
RESONANT_DELTA = 1e-3

_H_CACHE_NODES = 4096


@dataclass(frozen=True)
class ShapingConfig:
    """Knobs for control shaping.

    h_total         -- total control pulse energy; None picks
                       complete_factor * |d + i delta|^2 / d, the working
                       complete-retrieval threshold, and extends it until the
                       cached cumulative saturates.
    omega_cap       -- |Omega| clip level for the returned control.
    eps_div         -- zero the control where the shaping denominator falls
                       below eps_div times its peak (the formally divergent
                       sign-flip points; harmless to truncate).
    complete_factor -- required ratio d h / |d + i delta|^2 for the automatic
                       h_total.
    """

    h_total: float | None = None
    omega_cap: float = 1e3
    eps_div: float = 1e-6
    complete_factor: float = 10.0

    def __post_init__(self):
        if self.h_total is not None and not (np.isfinite(self.h_total) and self.h_total > 0):
            raise ValidationError(f"h_total must be positive, got {self.h_total}")
        if self.complete_factor < 1.0:
            raise ValidationError("complete_factor must be >= 1")
        if self.omega_cap <= 0 or self.eps_div <= 0:
            raise ValidationError("omega_cap and eps_div must be positive")

    def auto_h_total(self, params: Params) -> float:
        if self.h_total is not None:
            return self.h_total
        return self.complete_factor * (params.d**2 + params.delta**2) / params.d


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

def _m_kernel(h, z, d: float, c: complex):
    """Scaled propagator kernel (1/c) e^{-(h+dz)/c} I0(2 sqrt(h d z)/c).

    h and z broadcast; valid for Re c >= 0 (the physical c = 1 + i delta and
    the unitary c = i delta alike) with the real part of the combined
    exponent always <= 0.
    """
    h = np.asarray(h, dtype=float)
    z = np.asarray(z, dtype=float)
    root = 2.0 * np.sqrt(np.maximum(h * d * z, 0.0))
    w = root / c
    return (1.0 / c) * np.exp(-(h + d * z) / c + np.abs(w.real)) * ive(0, w)


def _dress_kernel(z, zp, d: float):
    """Depth-dressing kernel d e^{-d(z+z')} I0(2 d sqrt(z z')), scaled form."""
    z = np.asarray(z, dtype=float)
    zp = np.asarray(zp, dtype=float)
    rz, rzp = np.sqrt(z), np.sqrt(zp)
    return d * np.exp(-d * (rz - rzp) ** 2) * ive(0, 2.0 * d * rz * rzp)


def _medium_nodes(d: float, delta: float):
    """Quadrature nodes on [0, 1] for the adiabatic z-integrals.

    Reuses the kernel layout (geometric near 0, ~1/sqrt(d) panels) and adds
    panels when the refractive phase d z delta/(1+delta^2) oscillates fast.
    """
    rate = d * abs(delta) / (1.0 + delta**2)
    n_extra = int(np.ceil(rate / 6.0))
    if n_extra <= 1:
        return kernels.kernel_nodes(d)
    base = max(10, int(np.ceil(np.sqrt(d) / 4.0)))
    return gauss_legendre_panels(0.0, 1.0, base + n_extra, order=10)


def default_z_max(d: float) -> float:
    """Default support end for decayless modes: 1 + 6/sqrt(max(d, 1))."""
    return 1.0 + 6.0 / np.sqrt(max(d, 1.0))


def _support_nodes(z_max: float, d: float):
    """Nodes on [0, z_max] resolving the sqrt(1/d)-wide dressing ridge."""
    n = max(12, int(np.ceil(0.8 * np.sqrt(max(d, 1.0)) * z_max)),
            int(np.ceil(z_max / 6.0)))
    return gauss_legendre_panels(0.0, z_max, n, order=10)


# ---------------------------------------------------------------------------
# adiabatic propagators
# ---------------------------------------------------------------------------

def adiabatic_retrieve(s: SpinWave, control: ControlField, params: Params) -> FieldMode:
    """Output field of adiabatic retrieval from s with the given control.

    E(1,t) = -sqrt(d) Omega(t) int_0^1 m_c(h(0,t), z) S(1-z) dz, times
    exp(-gamma_s t) when the spin wave decays during readout.  The emitted
    energy equals the kernel efficiency of s once the control energy satisfies
    the completeness condition, independent of the control shape and detuning.
    """
    d, c = params.d, 1.0 + 1j * params.delta
    nodes, weights = _medium_nodes(d, params.delta)
    f = np.asarray(s.interpolator()(1.0 - nodes), dtype=complex)
    mk = _m_kernel(control.h_cum[:, None], nodes[None, :], d, c)
    out = -np.sqrt(d) * control.samples * (mk @ (weights * f))
    if params.gamma_s > 0:
        out = out * np.exp(-params.gamma_s * control.t)
    return FieldMode(out, control.t_win)


def adiabatic_store(e_in: FieldMode, control: ControlField, params: Params,
                    nz: int = 201) -> SpinWave:
    """Spin wave stored from e_in by the given control, adiabatic limit.

    S(z, T) = -sqrt(d) int_0^T Omega*(t) m_c(h(t,T), z) E_in(t) dt with the
    spin decay factor e^{-gamma_s (T - t)} inside the integrand.  The result
    is un-normalized: its norm squared is the storage efficiency.
    """
    if e_in.nt != control.nt or abs(e_in.t_win - control.t_win) > 1e-12 * control.t_win:
        raise ValidationError("input mode and control must share the window")
    d, c = params.d, 1.0 + 1j * params.delta
    h_back = control.h_total - control.h_cum  # h(t, T)
    z = np.linspace(0.0, 1.0, nz)
    integrand_t = np.conj(control.samples) * e_in.samples
    if params.gamma_s > 0:
        integrand_t = integrand_t * np.exp(-params.gamma_s * (control.t_win - control.t))
    mk = _m_kernel(h_back[:, None], z[None, :], d, c)
    vals = -np.sqrt(d) * np.trapezoid(integrand_t[:, None] * mk, dx=e_in.dt, axis=0)
    return SpinWave(vals)


# ---------------------------------------------------------------------------
# decayless machinery
# ---------------------------------------------------------------------------

def _h_back(control: ControlField) -> np.ndarray:
    return control.h_total - control.h_cum


def _resonant_h_of_z(control: ControlField, d: float, z: np.ndarray):
    """Map z to the time where the remaining control energy h(t,T) = d z."""
    hb = _h_back(control)
    # hb decreases with t; invert on the reversed axis
    t_of_h = lambda hq: np.interp(hq, hb[::-1], control.t[::-1])
    return t_of_h(d * z)


def decayless_store(e_in: FieldMode, control: ControlField, d: float, delta: float,
                    z_max: float | None = None) -> DecaylessMode:
    """Mode stored by the control with decay and leakage switched off.

    The map e_in -> s is unitary once the control energy is complete, which
    makes s the right variable for storage shaping.  Away from resonance s is
    the 1/delta oscillatory integral of the input; at resonance it degenerates
    to ideal group-velocity reparameterization along h(t,T) = d z.  The
    support [0, z_max] is grown automatically until the tail mass is below
    1e-6 (a warning reports an incomplete control instead of growing forever).
    """
    if e_in.nt != control.nt or abs(e_in.t_win - control.t_win) > 1e-12 * control.t_win:
        raise ValidationError("input mode and control must share the window")
    if d <= 0:
        raise ValidationError(f"optical depth must be positive, got {d}")
    h_tot = control.h_total
    if d * h_tot < 10.0 * (d**2 + delta**2):
        warnings.warn("control energy below the completeness threshold; "
                      "the decayless map is not unitary", stacklevel=2)

    z_end = z_max if z_max is not None else default_z_max(d)
    # with finite control energy the mode cannot extend past h_total/d
    z_end = min(max(z_end, 1.0), max(1.0, h_tot / d))

    prev_norm = None
    for _ in range(12):
        nz = max(240, int(np.ceil(z_end * np.sqrt(max(d, 1.0)) * 12)),
                 int(np.ceil(z_end * 4)))
        nz = min(nz, 4000)
        z = np.linspace(0.0, z_end, nz)
        if abs(delta) < RESONANT_DELTA:
            hb = _h_back(control)
            t_z = np.interp(d * z, hb[::-1], control.t[::-1])
            om_z = np.interp(t_z, control.t, control.samples.real) \
                + 1j * np.interp(t_z, control.t, control.samples.imag)
            e_z = np.interp(t_z, control.t, e_in.samples.real) \
                + 1j * np.interp(t_z, control.t, e_in.samples.imag)
            mag2 = np.abs(om_z) ** 2
            vals = np.where(mag2 > 0,
                            -np.sqrt(d) * np.conj(om_z) * e_z / np.where(mag2 > 0, mag2, 1.0),
                            0.0)
            vals = np.where(d * z <= h_tot, vals, 0.0)
        else:
            hb = _h_back(control)[:, None]
            phase = np.exp(1j * (hb + d * z[None, :]) / delta)
            bessel = j0(2.0 * np.sqrt(hb * d * z[None, :]) / abs(delta))
            q = (1j * np.sqrt(d) / delta) * np.conj(control.samples)[:, None] * phase * bessel
            vals = np.trapezoid(q * e_in.samples[:, None], dx=e_in.dt, axis=0)
        mode = DecaylessMode(vals, z_end)
        tail_lo = max(1.0, 0.9 * z_end)
        tail = trapezoid_norm_sq(vals[z >= tail_lo], mode.dz)
        norm = mode.norm_sq
        gained = None if prev_norm is None else norm - prev_norm
        # stop once the tail is negligible, the support hit the energy cap, or
        # extending stopped recovering mass (a truncated control never will)
        if tail < 1e-6 or d * z_end >= h_tot or (gained is not None and gained < 1e-6):
            return mode
        prev_norm = norm
        z_end *= 1.6
    warnings.warn(f"decayless tail mass {tail:.2e} above 1e-6 at z_max={z_end:.1f}",
                  stacklevel=2)
    return mode


def decayless_invert(s: DecaylessMode, control: ControlField, d: float,
                     delta: float) -> FieldMode:
    """Inverse of `decayless_store`: the input that maps onto s under the control."""
    if abs(delta) < RESONANT_DELTA:
        hb = _h_back(control)
        z_t = hb / d
        interp = s.interpolator()
        s_t = np.where(z_t <= s.z_max, interp(np.minimum(z_t, s.z_max)), 0.0)
        out = -control.samples * s_t / np.sqrt(d)
    else:
        z, wz = _support_nodes(s.z_max, d)
        sv = np.asarray(s.interpolator()(z), dtype=complex)
        hb = _h_back(control)[:, None]
        phase = np.exp(-1j * (hb + d * z[None, :]) / delta)
        bessel = j0(2.0 * np.sqrt(hb * d * z[None, :]) / abs(delta))
        qc = (-1j * np.sqrt(d) / delta) * control.samples[:, None] * phase * bessel
        out = qc @ (wz * sv)
    return FieldMode(out, control.t_win)


def decay_dress(s: DecaylessMode, d: float, nz: int = 201) -> SpinWave:
    """Physical spin wave from a decayless mode: S = int D(z, z') s(z') dz'.

    The dressing is lossy (norm can only shrink); dressing the optimal
    decayless mode yields sqrt(eta_max) times the optimal storage wave.
    """
    tail = trapezoid_norm_sq(s.samples[s.z >= 0.97 * s.z_max], s.dz)
    if tail > 1e-6:
        warnings.warn(f"decayless mode carries {tail:.2e} mass near z_max; "
                      "the dressed wave may be truncated", stacklevel=2)
    zq, wq = _support_nodes(s.z_max, d)
    sv = np.asarray(s.interpolator()(zq), dtype=complex)
    z = np.linspace(0.0, 1.0, nz)
    mat = _dress_kernel(z[:, None], zq[None, :], d)
    return SpinWave(mat @ (wq * sv))


def optimal_decayless_mode(d: float, tol: float = 1e-10, *,
                           mode_tol: float = 1e-8, max_iter: int = 500,
                           z_max: float | None = None) -> DecaylessMode:
    """Decayless mode maximizing the physical storage efficiency.

    Power iteration of the symmetric composition dress -> restrict to the
    medium -> dress back (whose quadratic form is the stored energy, since the
    dressing kernel is the operator square root of the retrieval kernel).
    Dressing the result gives the optimal storage spin wave and its eigenvalue
    is the optimal retrieval efficiency.
    """
    from .optimizer import _iterate  # local import to avoid a cycle

    z_end = z_max if z_max is not None else default_z_max(d)
    for _ in range(16):
        x, wx = _support_nodes(z_end, d)
        y, wy = kernels.kernel_nodes(d)
        dyx = _dress_kernel(y[:, None], x[None, :], d)

        def apply_m(f):
            return dyx.T @ (wy * (dyx @ (wx * f)))

        def eig_of(f):
            return float(np.real(np.sum(wx * np.conj(f) * apply_m(f))))

        f, lam, it, res = _iterate(lambda f: apply_m(apply_m(f)), eig_of,
                                   np.exp(-x), wx, tol, mode_tol, max_iter)
        tail = float(np.sum(wx[x >= max(1.0, 0.9 * z_end)]
                            * np.abs(f[x >= max(1.0, 0.9 * z_end)]) ** 2))
        if tail < 1e-6:
            break
        z_end *= 1.6
    nz = max(240, int(np.ceil(z_end * 80)))
    from scipy.interpolate import CubicSpline

    zu = np.linspace(0.0, z_end, min(nz, 4000))
    vals = CubicSpline(x, f)(zu)
    if np.trapezoid(np.real(vals), zu) < 0:
        vals = -vals
    return DecaylessMode(np.real(vals).astype(complex), z_end).renormalized()


# ---------------------------------------------------------------------------
# control shaping
# ---------------------------------------------------------------------------

def _h_cache_grid(h_total: float) -> np.ndarray:
    """Dense h grid on [0, h_total], geometric near both ends."""
    n_half = _H_CACHE_NODES // 2
    lo = np.geomspace(h_total * 1e-9, h_total * 0.5, n_half)
    hi = h_total - np.geomspace(h_total * 1e-7, h_total * 0.5, n_half)[::-1]
    return np.unique(np.concatenate(([0.0], lo, hi, [h_total])))


def _strict_increase(c: np.ndarray) -> np.ndarray:
    bump = (abs(c[-1]) + 1.0) * 1e-15 * np.arange(c.size)
    return np.maximum.accumulate(c) + bump


def _gamma_s_rescaled_target(target: FieldMode, gamma_s: float) -> FieldMode:
    if gamma_s == 0.0:
        return target
    return FieldMode(target.samples * np.exp(gamma_s * target.t),
                     target.t_win).renormalized()


def _gamma_s_rescaled_input(e_in: FieldMode, gamma_s: float) -> FieldMode:
    if gamma_s == 0.0:
        return e_in
    return FieldMode(e_in.samples * np.exp(-gamma_s * (e_in.t_win - e_in.t)),
                     e_in.t_win).renormalized()


def _finalize_control(omega: np.ndarray, denom_small: np.ndarray,
                      energy_weight: np.ndarray, t: np.ndarray,
                      cfg: ShapingConfig, t_win: float) -> ControlField:
    """Zero the divergence intervals, clip at the cap, police the cap budget."""
    omega = np.where(denom_small, 0.0, omega)
    mag = np.abs(omega)
    over = mag > cfg.omega_cap
    if np.any(over):
        capped_energy = float(np.sum(energy_weight[over]))
        total_energy = float(np.sum(energy_weight))
        if total_energy > 0 and capped_energy > 0.02 * total_energy:
            lo, hi = t[over].min(), t[over].max()
            raise ValidationError(
                f"target too fast: the shaping equation demands |Omega| above "
                f"{cfg.omega_cap:g} over t in [{lo:.4g}, {hi:.4g}] carrying "
                f"{100 * capped_energy / total_energy:.1f}% of the mode energy")
        omega = np.where(over, omega * (cfg.omega_cap / np.where(over, mag, 1.0)), omega)
    return ControlField(omega, t_win)


def shape_retrieval_control(s: SpinWave, target: FieldMode, params: Params,
                            cfg: ShapingConfig | None = None) -> ControlField:
    """Control that retrieves the spin wave s into the normalized target mode.

    Solves the monotone cumulative-energy equation

        eta_r int_0^t |E2|^2 dt' = int_0^{h(0,t)} d |D(h')|^2 dh',
        D(h) = int_0^1 m_c(h, z) S(1-z) dz,

    for h(0,t) by piecewise-linear inversion of a dense cached cumulative
    (resolution better than 1e-10 of the total), then reads the control off
    pointwise as Omega(t) = -sqrt(eta_r) E2(t) / (sqrt(d) D(h(0,t))), which
    fixes magnitude and phase together.  Sign-flip divergences are zeroed and
    the magnitude is clipped at the cap; with spin decay the target is
    pre-compensated by exp(gamma_s t) and renormalized.
    """
    cfg = cfg or ShapingConfig()
    target = _gamma_s_rescaled_target(target, params.gamma_s)
    d, c = params.d, 1.0 + 1j * params.delta
    eta_r = kernels.retrieval_efficiency(s, d)

    nodes, weights = _medium_nodes(d, params.delta)
    f = weights * np.asarray(s.interpolator()(1.0 - nodes), dtype=complex)

    h_total = cfg.auto_h_total(params)
    for _ in range(5):
        hgrid = _h_cache_grid(h_total)
        dint = _m_kernel(hgrid[:, None], nodes[None, :], d, c) @ f
        w_of_h = d * np.abs(dint) ** 2
        cum = np.concatenate(([0.0], np.cumsum(
            0.5 * (w_of_h[1:] + w_of_h[:-1]) * np.diff(hgrid))))
        if cfg.h_total is not None or cum[-1] >= eta_r * (1.0 - 1e-6):
            break
        h_total *= 2.0
    cum = _strict_increase(cum)

    e2 = target.samples
    de = np.abs(e2) ** 2
    f2 = eta_r * np.concatenate(([0.0], np.cumsum(0.5 * (de[1:] + de[:-1]) * target.dt)))
    f2 = np.minimum(f2, cum[-1])
    h_of_t = np.interp(f2, cum, hgrid)

    dint_t = np.interp(h_of_t, hgrid, dint.real) + 1j * np.interp(h_of_t, hgrid, dint.imag)
    peak = np.max(np.abs(dint))
    small = np.abs(dint_t) < cfg.eps_div * peak
    omega = -np.sqrt(eta_r) * e2 / (np.sqrt(d) * np.where(small, 1.0, dint_t))
    return _finalize_control(omega, small, np.abs(e2) ** 2, target.t, cfg, target.t_win)


def shape_storage_control(e_in: FieldMode, s: DecaylessMode, params: Params,
                          cfg: ShapingConfig | None = None) -> ControlField:
    """Control that stores e_in into the decayless mode s.

    The cumulative-energy equation here runs backward in time,

        int_0^t |E_in|^2 dt' = int_{h(t,T)}^{h(0,T)} (d/delta^2) |Q(h')|^2 dh',
        Q(h) = int e^{-i d z/delta} J0(2 sqrt(h d z)/|delta|) s(z) dz,

    with h(0,T) truncated at the configured total energy; at resonance the
    unitary kernel collapses to the line h(t,T) = d z and the inversion runs
    on the cumulative mass of s directly.  The control is read off pointwise
    from the defining integral (magnitude and phase together), divergences are
    zeroed, and the cap is enforced.  Spin decay rescales the input by
    exp(-gamma_s (T - t)) before shaping.
    """
    cfg = cfg or ShapingConfig()
    e_in = _gamma_s_rescaled_input(e_in, params.gamma_s)
    d, delta = params.d, params.delta
    t = e_in.t
    de = np.abs(e_in.samples) ** 2
    f_in = np.concatenate(([0.0], np.cumsum(0.5 * (de[1:] + de[:-1]) * e_in.dt)))

    h_total = cfg.auto_h_total(params)

    if abs(delta) < RESONANT_DELTA:
        h_total = min(h_total, d * s.z_max)
        zs = np.linspace(0.0, s.z_max, max(s.samples.size, 2000))
        sv = np.asarray(s.interpolator()(zs), dtype=complex)
        dens = np.abs(sv) ** 2
        cdf = np.concatenate(([0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(zs))))
        tail_mass = _strict_increase(cdf[-1] - cdf[::-1])  # mass beyond x, x descending
        # G(x) = mass beyond x is decreasing; invert via the reversed axis
        x_desc = zs[::-1]
        x_of_f = np.interp(np.minimum(f_in, tail_mass[-1]), tail_mass, x_desc)
        hb = np.minimum(d * x_of_f, h_total)
        s_at = np.asarray(s.interpolator()(np.minimum(hb / d, s.z_max)), dtype=complex)
        peak = np.max(np.abs(sv))
        small = np.abs(s_at) < cfg.eps_div * peak
        omega = -np.sqrt(d) * e_in.samples / np.where(small, 1.0, s_at)
        return _finalize_control(omega, small, de, t, cfg, e_in.t_win)

    zq, wz = _support_nodes(s.z_max, d)
    sv = wz * np.asarray(s.interpolator()(zq), dtype=complex)
    hgrid = _h_cache_grid(h_total)
    phase = np.exp(-1j * d * zq / delta)[None, :]
    bess = j0(2.0 * np.sqrt(hgrid[:, None] * d * zq[None, :]) / abs(delta))
    q_of_h = (phase * bess) @ sv
    w_of_h = (d / delta**2) * np.abs(q_of_h) ** 2
    cum = np.concatenate(([0.0], np.cumsum(0.5 * (w_of_h[1:] + w_of_h[:-1]) * np.diff(hgrid))))
    cum = _strict_increase(cum)
    hb = np.interp(np.maximum(cum[-1] - f_in, 0.0), cum, hgrid)

    q_t = np.interp(hb, hgrid, q_of_h.real) + 1j * np.interp(hb, hgrid, q_of_h.imag)
    peak = np.max(np.abs(q_of_h))
    small = np.abs(q_t) < cfg.eps_div * peak
    omega = (1j * delta / np.sqrt(d)) * e_in.samples * np.exp(1j * hb / delta) \
        / np.where(small, 1.0, q_t)
    return _finalize_control(omega, small, de, t, cfg, e_in.t_win)


def storage_interval_decay(gamma_s: float, wait: float) -> float:
    """Efficiency factor for holding the spin wave for a time `wait`.

    Spin decay during the hold between storage and retrieval multiplies the
    total efficiency by exp(-2 gamma_s wait); nothing else changes.
    """
    if wait < 0 or gamma_s < 0:
        raise ValidationError("hold time and decay rate must be >= 0")
    return float(np.exp(-2.0 * gamma_s * wait))


@lru_cache(maxsize=32)
def _cached_optimal_decayless(d: float) -> DecaylessMode:
    return optimal_decayless_mode(d)


def optimal_storage_control(e_in: FieldMode, params: Params,
                            cfg: ShapingConfig | None = None) -> ControlField:
    """Shaped control that stores e_in with the maximum efficiency at this d.

    Convenience wrapper: computes the optimal decayless mode once (cached per
    depth) and shapes the storage control for it.  The same control is optimal
    for storage alone and for storage followed by backward retrieval.
    """
    return shape_storage_control(e_in, _cached_optimal_decayless(params.d),
                                 params, cfg)


# ---------------------------------------------------------------------------
# transparency-window diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EitWindowDiagnostics:
    """Gaussian-window efficiency estimate and the window width per depth.

    tau is the reparameterized propagation distance; the spin wave's momentum
    content outside the window of width sqrt(d/tau) is absorbed, which is why
    smooth compact modes lose ~1/d while modes with steps lose ~1/sqrt(d).
    """

    tau: np.ndarray
    window_width: np.ndarray
    efficiency_estimate: float
    leakage_estimate: float


def eit_window_diagnostics(s: SpinWave, d: float) -> EitWindowDiagnostics:
    """Resonant transparency-window estimate of the retrieval efficiency.

    eta ~ int_0^inf dtau | sqrt(d/(4 pi tau)) int_0^1 S(z)
                            e^{-d (1 - tau - z)^2/(4 tau)} dz |^2,
    the momentum-space Gaussian filter written in real space.
    """
    interp = s.interpolator()
    tau_end = 1.0 + max(0.5, 8.0 / np.sqrt(d))
    tq, wt = gauss_legendre_panels(1e-9, tau_end, 64, order=8)
    n_z = max(24, int(np.ceil(np.sqrt(d) / 2.0)))
    zq, wz = gauss_legendre_panels(0.0, 1.0, n_z, order=10)
    sz = np.asarray(interp(zq), dtype=complex)

    gauss = np.exp(-d * (1.0 - tq[:, None] - zq[None, :]) ** 2 / (4.0 * tq[:, None]))
    g = np.sqrt(d / (4.0 * np.pi * tq)) * (gauss @ (wz * sz))
    eta = float(np.sum(wt * np.abs(g) ** 2))
    return EitWindowDiagnostics(tau=tq, window_width=np.sqrt(d / tq),
                                efficiency_estimate=eta,
                                leakage_estimate=max(1.0 - eta, 0.0))
