import numpy as np
import pytest

from lambdamem import kernels, optimizer, solver
from lambdamem.model import (
    ConvergenceError,
    Grid,
    Params,
    SpinWave,
    ValidationError,
    flip_spin_wave,
    gaussian_like_input,
)
from conftest import l2, mode_distance


class TestBackwardOptimum:
    def test_large_depth_limit_shape(self):
        r = optimizer.optimal_backward_mode(1000.0, mode_tol=1e-6)
        ref = np.sqrt(3.0) * r.mode.z
        assert l2(r.mode.samples.real, ref, r.mode.dz) < 0.1

    def test_small_depth_limit_is_flat(self):
        r = optimizer.optimal_backward_mode(0.01)
        assert l2(r.mode.samples.real, np.ones(r.mode.nz), r.mode.dz) < 0.05

    def test_error_scaling_at_100(self, backward_mode):
        err = 1.0 - backward_mode(100.0).efficiency
        assert abs(err - 0.029) <= 0.15 * 0.029

    def test_self_consistency(self, backward_mode):
        r = backward_mode(10.0)
        assert abs(r.efficiency
                   - kernels.retrieval_efficiency(r.mode, 10.0)) < 1e-10
        # the Nystrom eigenvalue and the quadratic form agree closely too
        assert abs(r.eigenvalue - r.efficiency) < 1e-4

    def test_rayleigh_quotient_nondecreasing(self):
        # instrumented power iteration on the raw kernel matrix
        nodes, weights, mat = kernels._kernel_matrix_raw(25.0)
        kw = mat * weights[None, :]
        f = np.ones_like(nodes)
        rayleighs = []
        for _ in range(40):
            f = kw @ f
            f /= np.sqrt(np.sum(weights * f**2))
            rayleighs.append(float(np.sum(weights * f * (kw @ f))))
        assert np.all(np.diff(rayleighs) > -1e-13)

    def test_convergence_error_reports_residual(self):
        with pytest.raises(ConvergenceError, match="mode change"):
            optimizer.optimal_backward_mode(1000.0, max_iter=3)


class TestForwardOptimum:
    def test_parabola_limit(self, forward_mode):
        r = optimizer.optimal_forward_mode(1000.0, mode_tol=1e-6)
        z = r.mode.z
        ref = np.sqrt(15.0 / 8.0) * (1.0 - 4.0 * (z - 0.5) ** 2)
        assert l2(r.mode.samples.real, ref, r.mode.dz) < 0.1

    def test_error_scaling_at_1000(self):
        r = optimizer.optimal_forward_mode(1000.0, mode_tol=1e-6)
        assert abs((1.0 - r.efficiency) - 19.0 / 1000.0) <= 0.2 * 19.0 / 1000.0

    def test_small_depth_agrees_with_backward(self, backward_mode):
        rf = optimizer.optimal_forward_mode(0.01)
        rb = optimizer.optimal_backward_mode(0.01)
        assert abs(rf.eigenvalue - rb.eigenvalue) < 1e-3

    @pytest.mark.parametrize("d", [0.5, 10.0, 200.0])
    def test_forward_total_below_backward_total(self, d, backward_mode, forward_mode):
        back_total = backward_mode(d).efficiency ** 2
        assert forward_mode(d).efficiency <= back_total + 1e-12


class TestNondegenerate:
    def test_degenerate_limit_reproduces_backward(self, backward_mode):
        rn = optimizer.optimal_nondegenerate_mode(10.0, 0.0)
        rb = backward_mode(10.0)
        assert abs(rn.eigenvalue - rb.efficiency) < 1e-8
        assert abs(rn.efficiency - rb.efficiency**2) < 1e-8
        assert mode_distance(rn.mode, flip_spin_wave(rb.mode)) < 1e-4

    def test_mode_concentrates_with_momentum(self):
        # the optimal mode retreats monotonically toward the ensemble end
        # where the accumulated momentum phase costs least
        cents = []
        for dk in (0.0, 2.0, 4.0, 8.0, 12.0):
            m = optimizer.optimal_nondegenerate_mode(20.0, dk, mode_tol=1e-6).mode
            w = np.abs(m.samples) ** 2
            cents.append(float(np.trapezoid(m.z * w, m.z) / np.trapezoid(w, m.z)))
        assert np.all(np.diff(cents) < 0.0)

    def test_phase_fixed_and_normalized(self):
        r = optimizer.optimal_nondegenerate_mode(20.0, 5.0, mode_tol=1e-6)
        i = np.argmax(np.abs(r.mode.samples))
        assert abs(np.angle(r.mode.samples[i])) < 1e-8
        assert abs(r.mode.norm_sq - 1.0) < 1e-9
        assert 0.0 < r.efficiency < 1.0

    def test_efficiency_decreases_with_momentum(self):
        effs = [optimizer.optimal_nondegenerate_mode(20.0, dk, mode_tol=1e-6).efficiency
                for dk in (0.0, 3.0, 9.0)]
        assert effs[0] > effs[1] > effs[2]


class TestHalfwidth:
    def test_zero_momentum_needs_no_search(self, flat_wave):
        s = flat_wave()
        eta0 = kernels.retrieval_efficiency(s, 25.0)
        interp = s.interpolator()
        eta_at0 = kernels.retrieval_efficiency_fn(
            lambda z: interp(z) * np.exp(-2j * 0.0 * z), 25.0)
        assert abs(eta_at0 / eta0 - 1.0) < 1e-14

    def test_sqrt_depth_scaling_constants(self, flat_wave, ramp_wave):
        # proportionality constants of the sqrt(d) law, fitted over the range
        ds = np.array([25.0, 100.0, 400.0])
        for make, const in ((flat_wave, 0.46), (ramp_wave, 0.67)):
            s = make(201)
            hw = np.array([optimizer.halfwidth_dk(s, d) for d in ds])
            fitted = float(np.sum(np.sqrt(ds) * hw) / np.sum(ds))
            assert abs(fitted - const) <= 0.05

    def test_bracket_failure_raises(self, flat_wave):
        with pytest.raises(Exception, match="bracket"):
            optimizer.halfwidth_dk(flat_wave(), 25.0, bracket_factor=1e-4)


class TestTimeReversalIterate:
    @pytest.fixture(scope="class")
    def converged(self):
        d = 10.0
        params = Params(d=d)
        t_win, nz, nt = 15.0, 151, 3000
        grid = Grid(nz=nz, nt=nt, t_win=t_win)
        ctrl_s = solver.complete_retrieval_control(params, t_win, nt, "sine2")
        ctrl_r = solver.complete_retrieval_control(params, t_win, nt, "flat")
        seed = gaussian_like_input(t_win, grid)
        res = optimizer.time_reversal_iterate(params, grid, ctrl_s, ctrl_r, seed,
                                              "backward", max_iters=30, tol=1e-3,
                                              monotonic_slack=1e-4)
        return d, params, grid, ctrl_s, ctrl_r, res

    def test_converges_to_kernel_prediction(self, converged, backward_mode):
        d, *_, res = converged
        eta_max = backward_mode(d).efficiency
        assert abs(res.total_efficiency - eta_max**2) < 1e-2
        assert res.iterations <= 30

    def test_fixed_point_spin_wave(self, converged, backward_mode):
        d, *_, res = converged
        ref = flip_spin_wave(
            optimizer.optimal_backward_mode(d, nz=res.spin_wave.nz).mode)
        assert mode_distance(res.spin_wave, ref) < 0.05

    def test_efficiency_sequence_grows(self, converged):
        *_, res = converged
        assert all(np.diff(res.efficiencies) > -1e-4)

    def test_restart_from_fixed_point_stays_put(self, converged):
        d, params, grid, ctrl_s, ctrl_r, res = converged
        again = optimizer.time_reversal_iterate(params, grid, ctrl_s, ctrl_r,
                                                res.input_mode, "backward",
                                                max_iters=30, tol=1e-3,
                                                monotonic_slack=1e-4)
        assert again.iterations <= 3
        assert abs(again.total_efficiency - res.total_efficiency) < 1e-4

    def test_seed_must_be_normalized(self, converged):
        d, params, grid, ctrl_s, ctrl_r, _ = converged
        bad = gaussian_like_input(grid.t_win, grid)
        bad = bad.renormalized()
        import lambdamem.model as m

        unnorm = m.FieldMode(2.0 * bad.samples, bad.t_win)
        with pytest.raises(ValidationError):
            optimizer.time_reversal_iterate(params, grid, ctrl_s, ctrl_r, unnorm,
                                            "backward")
