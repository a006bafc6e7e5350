"""Optimal spin-wave modes by kernel iteration, and its physical realization.

Three eigenproblems share one engine.  Retrieval efficiency is a quadratic
form of the kernel kr, so the best mode to retrieve from solves

    eta f(z) = int kr(z, z') f(z') dz'          (f is the flipped mode S(1-z)),

the best mode for storage followed by forward retrieval solves the
flipped-kernel problem

    lambda S(z) = int kr(z, 1-z') S(z') dz',     total efficiency lambda^2,

and when the two lower atomic levels are split by momentum dk the mode for
storage followed by backward retrieval solves the antilinear problem

    lambda S(z) = int kr(z, z') e^{-2i dk z'} S*(z') dz',   total |lambda|^2.

All are solved by iterating the integral operator from a positive trial mode.
One iteration applies the operator twice, which is also what one physical
round trip (retrieve, time-reverse, store) does; the pairing makes the
iteration monotone even when the subdominant eigenvalue is negative or the
eigenvalue of the antilinear problem settles into a two-cycle of conjugate
phases.  The same optimization executed through the full solver, rather than
the kernel, is `time_reversal_iterate`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from . import kernels, solver
from .model import (
    ControlField,
    ConvergenceError,
    FieldMode,
    Grid,
    NumericalError,
    Params,
    SpinWave,
    ValidationError,
    time_reverse,
    trapezoid_norm_sq,
)

__all__ = [
    "OptimResult",
    "TimeReversalResult",
    "optimal_backward_mode",
    "optimal_forward_mode",
    "optimal_nondegenerate_mode",
    "halfwidth_dk",
    "time_reversal_iterate",
]

DEFAULT_EIG_TOL = 1e-10
DEFAULT_MODE_TOL = 1e-8
DEFAULT_MAX_ITER = 500


@dataclass(frozen=True)
class OptimResult:
    """Converged dominant eigenpair of one of the efficiency eigenproblems.

    mode        -- normalized optimal spin wave on the uniform grid (real and
                   positive-mean for the degenerate problems; complex with the
                   largest-|S| sample rotated to the real positive axis for
                   dk > 0).
    eigenvalue  -- dominant eigenvalue of the discretized operator.
    efficiency  -- eta for backward retrieval, lambda^2 for forward,
                   |lambda|^2 for the nondegenerate problem.
    """

    mode: SpinWave
    eigenvalue: complex
    efficiency: float
    iterations: int
    residual: float


def _iterate(apply_pair, eig_of, f0, weights, eig_tol, mode_tol, max_iter, phase_fix=None):
    """Generic double-application power iteration in the weighted L2 metric."""
    w = weights
    f = f0 / np.sqrt(np.sum(w * np.abs(f0) ** 2))
    lam_prev = None
    for it in range(1, max_iter + 1):
        g = apply_pair(f)
        norm = np.sqrt(np.sum(w * np.abs(g) ** 2))
        if norm == 0.0:
            raise NumericalError("iteration collapsed to the zero mode")
        g = g / norm
        if phase_fix is not None:
            g = phase_fix(g)
        lam = eig_of(g)
        residual = np.sqrt(np.sum(w * np.abs(g - f) ** 2))
        f = g
        if lam_prev is not None and abs(lam - lam_prev) <= eig_tol and residual <= mode_tol:
            return f, lam, it, residual
        lam_prev = lam
    raise ConvergenceError(
        f"eigen-iteration did not converge in {max_iter} iterations "
        f"(last mode change {residual:.3e}); loosen mode_tol or raise max_iter")


def _nodes_to_uniform(nodes, f, nz, flip):
    spline = CubicSpline(nodes, f)
    z = np.linspace(0.0, 1.0, nz)
    vals = spline(1.0 - z) if flip else spline(z)
    return np.asarray(vals, dtype=complex)


def _positive_mean_real(samples, dz):
    out = np.real(samples)
    if np.trapezoid(out, dx=dz) < 0:
        out = -out
    return out


def optimal_backward_mode(d: float, tol: float = DEFAULT_EIG_TOL, *,
                          mode_tol: float = DEFAULT_MODE_TOL,
                          max_iter: int = DEFAULT_MAX_ITER,
                          nz: int = 201) -> OptimResult:
    """Optimal mode to retrieve from (forward), equivalently the flipped
    optimal mode for backward retrieval and for storage.

    The efficiency reported is the kernel quadratic form of the returned mode
    itself, so it is self-consistent with `kernels.retrieval_efficiency` by
    construction; the eigenvalue is the converged Nystrom estimate.
    """
    nodes, weights, mat = kernels._kernel_matrix_raw(float(d))
    kw = mat * weights[None, :]

    def apply_pair(f):
        return kw @ (kw @ f)

    def eig_of(f):
        return float(np.real(np.sum(weights * np.conj(f) * (kw @ f))))

    f, lam, it, res = _iterate(apply_pair, eig_of, np.ones_like(nodes),
                               weights, tol, mode_tol, max_iter)
    samples = _positive_mean_real(_nodes_to_uniform(nodes, f, nz, flip=True),
                                  1.0 / (nz - 1))
    mode = SpinWave(samples).renormalized()
    return OptimResult(mode=mode, eigenvalue=lam,
                       efficiency=kernels.retrieval_efficiency(mode, d),
                       iterations=it, residual=res)


def optimal_forward_mode(d: float, tol: float = DEFAULT_EIG_TOL, *,
                         mode_tol: float = DEFAULT_MODE_TOL,
                         max_iter: int = DEFAULT_MAX_ITER,
                         nz: int = 201) -> OptimResult:
    """Optimal spin wave for storage followed by forward retrieval.

    The eigenvector is the stored mode itself (no flip).  The total efficiency
    of the optimal combined process is the square of the eigenvalue; storage
    alone does better than lambda, retrieval alone worse.
    """
    nodes, weights, _ = kernels._kernel_matrix_raw(float(d))
    kw = kernels.kr(nodes[:, None], 1.0 - nodes[None, :], d) * weights[None, :]

    def apply_pair(f):
        return kw @ (kw @ f)

    def eig_of(f):
        return float(np.real(np.sum(weights * np.conj(f) * (kw @ f))))

    f, lam, it, res = _iterate(apply_pair, eig_of, np.ones_like(nodes),
                               weights, tol, mode_tol, max_iter)
    samples = _positive_mean_real(_nodes_to_uniform(nodes, f, nz, flip=False),
                                  1.0 / (nz - 1))
    mode = SpinWave(samples).renormalized()
    return OptimResult(mode=mode, eigenvalue=lam, efficiency=lam**2,
                       iterations=it, residual=res)


def _fix_phase_max(samples: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(samples)))
    ref = samples[i]
    if ref == 0:
        return samples
    return samples * (np.conj(ref) / abs(ref))


def optimal_nondegenerate_mode(d: float, dk: float,
                               tol: float = DEFAULT_EIG_TOL, *,
                               mode_tol: float = DEFAULT_MODE_TOL,
                               max_iter: int = DEFAULT_MAX_ITER,
                               nz: int = 201) -> OptimResult:
    """Optimal stored mode for storage plus backward retrieval at momentum dk.

    The single application is antilinear (it conjugates the mode), so the
    eigenvalue only converges up to a conjugate-phase two-cycle; iterating in
    pairs and fixing the global phase of the mode resolves both, and |lambda|
    is reported through |lambda|^2 = total efficiency.  At dk = 0 this reduces
    exactly to the backward-retrieval optimum.
    """
    if dk < 0:
        raise ValidationError(f"dk must be >= 0, got {dk}")
    nodes, weights, mat = kernels._kernel_matrix_raw(float(d))
    phase = np.exp(-2j * dk * nodes)
    kwp = mat * (weights * phase)[None, :]

    def apply_once(f):
        return kwp @ np.conj(f)

    def apply_pair(f):
        return apply_once(apply_once(f))

    def eig_of(f):
        # |lambda| from one antilinear application of the normalized mode
        return float(np.sqrt(np.sum(weights * np.abs(apply_once(f)) ** 2)))

    f0 = np.ones_like(nodes, dtype=complex)
    f, lam_abs, it, res = _iterate(apply_pair, eig_of, f0, weights,
                                   tol, mode_tol, max_iter,
                                   phase_fix=_fix_phase_max)
    samples = _fix_phase_max(_nodes_to_uniform(nodes, f, nz, flip=False))
    if dk == 0.0:
        samples = _positive_mean_real(samples, 1.0 / (nz - 1))
    mode = SpinWave(samples).renormalized()
    return OptimResult(mode=mode, eigenvalue=lam_abs, efficiency=lam_abs**2,
                       iterations=it, residual=res)


def halfwidth_dk(s: SpinWave, d: float, tol: float = 1e-4,
                 bracket_factor: float = 20.0) -> float:
    """Momentum at which the retrieval efficiency of s e^{-2i dk z} halves.

    Found by bisection on [0, bracket_factor * sqrt(d)].  For a fixed spin
    wave this halfwidth scales as sqrt(d); reoptimizing the mode at each dk
    (see `optimal_nondegenerate_mode`) turns the scaling linear in d.
    """
    interp = s.interpolator()
    eta0 = kernels.retrieval_efficiency_fn(interp, d)
    if eta0 <= 0:
        raise NumericalError("zero base efficiency; halfwidth undefined")

    def ratio(k):
        if k == 0.0:
            return 1.0
        return kernels.retrieval_efficiency_fn(
            lambda z: interp(z) * np.exp(-2j * k * z), d) / eta0

    lo, hi = 0.0, bracket_factor * np.sqrt(d)
    if ratio(hi) > 0.5:
        raise NumericalError(
            f"halfwidth bracket [0, {hi:.3g}] does not contain the 50% crossing")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ratio(mid) > 0.5:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# physical time-reversal iteration through the exact solver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeReversalResult:
    """Fixed point of store -> retrieve -> conjugate-reverse -> renormalize."""

    input_mode: FieldMode
    spin_wave: SpinWave            # normalized stored wave at the fixed point
    total_efficiency: float
    efficiencies: tuple
    iterations: int


def time_reversal_iterate(params: Params, grid: Grid,
                          storage_control: ControlField,
                          retrieval_control: ControlField,
                          seed_input: FieldMode,
                          direction: str = "backward",
                          max_iters: int = 30,
                          tol: float = 1e-3,
                          monotonic_slack: float = 1e-6) -> TimeReversalResult:
    """Optimize the input mode for a given pair of controls, physically.

    One cycle stores the current input, retrieves it (backward or forward),
    conjugate-reverses the emitted field, and renormalizes it into the next
    input.  Time reversal applies to the whole procedure, so consecutive
    cycles run with the conjugate-reversed controls in swapped roles; a pair
    of cycles therefore applies the storage-retrieval map followed by its
    adjoint, the singular-vector iteration whose cycle efficiencies are
    nondecreasing.  For controls strong enough for complete retrieval the
    fixed-point spin wave is the kernel optimum regardless of control shape.

    Convergence is declared when inputs one period (two cycles) apart change
    by less than tol in L2; a decreasing efficiency beyond monotonic_slack
    means the solver grid cannot support the iteration and raises.
    """
    if direction not in ("backward", "forward"):
        raise ValidationError(f"direction must be backward or forward, got {direction!r}")
    if abs(seed_input.norm_sq - 1.0) > 1e-8:
        raise ValidationError("seed input must be normalized")
    retrieval_kind = "retrieval-" + direction
    pairs = ((storage_control, retrieval_control),
             (retrieval_control.time_reversed(), storage_control.time_reversed()))

    prev_same_parity = [None, None]
    current = seed_input
    efficiencies = []
    spin = None
    for it in range(1, max_iters + 1):
        ctrl_s, ctrl_r = pairs[(it - 1) % 2]
        stored = solver.simulate(params, grid,
                                 solver.StageSpec("storage", control=ctrl_s,
                                                  input=current))
        spin = stored.final_spin_wave()
        retrieved = solver.simulate(params, grid,
                                    solver.StageSpec(retrieval_kind,
                                                     control=ctrl_r, spin=spin))
        total = retrieved.eta
        if efficiencies and total < efficiencies[-1] - monotonic_slack:
            raise NumericalError(
                f"total efficiency dropped from {efficiencies[-1]:.6f} to "
                f"{total:.6f} at cycle {it}; the solver grid is too coarse "
                "for the iteration to be a contraction")
        efficiencies.append(total)

        nxt = time_reverse(retrieved.output_mode()).renormalized()
        nxt = FieldMode(_fix_phase_max(nxt.samples), nxt.t_win, normalized=True)
        prev = prev_same_parity[it % 2]
        if prev is not None:
            change = np.sqrt(trapezoid_norm_sq(nxt.samples - prev.samples, nxt.dt))
            if change < tol:
                return TimeReversalResult(
                    input_mode=current,
                    spin_wave=spin.renormalized(),
                    total_efficiency=total,
                    efficiencies=tuple(efficiencies),
                    iterations=it)
        prev_same_parity[it % 2] = nxt
        current = nxt
    raise ConvergenceError(
        f"time-reversal iteration did not settle in {max_iters} cycles "
        f"(last efficiency {efficiencies[-1]:.6f})")
