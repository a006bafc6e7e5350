import numpy as np
import pytest

from lambdamem import kernels
from lambdamem.model import SpinWave, ValidationError

# independent arbitrary-precision oracle values (mpmath, 40 digits)
FLAT_ERR = {
    0.5: 0.80145607363402177,
    1.0: 0.67367002294334889,
    10.0: 0.24909601854788413,
    100.0: 0.079688532324226935,
    400.0: 0.039881755240843532,
}
I0_2P5 = 3.289839144050123
I1_3P7 = 7.4357457965353369
J0_5P2 = -0.11029043979098648
I0_3P4J = -3.3924877882755196 - 1.3239458916287265j
ASYMPTOTE_100 = 0.079788456080286536  # sqrt(2/pi)/sqrt(100)


class TestBessel:
    def test_series_origin(self):
        assert kernels.bessel("I0", 0.0) == 1.0
        assert kernels.bessel("I1", 0.0) == 0.0
        assert kernels.bessel("J0", 0.0) == 1.0

    def test_real_values_against_oracle(self):
        assert abs(kernels.bessel("I0", 2.5) - I0_2P5) < 1e-12 * I0_2P5
        assert abs(kernels.bessel("I1", 3.7) - I1_3P7) < 1e-12 * I1_3P7
        assert abs(kernels.bessel("J0", 5.2) - J0_5P2) < 1e-12

    def test_scaled_form_matches_oracle_at_100(self):
        val = kernels.flat_wave_error(100.0)
        assert abs(val - FLAT_ERR[100.0]) < 1e-12
        # approaches sqrt(2/pi)/sqrt(d)
        assert abs(val - ASYMPTOTE_100) / ASYMPTOTE_100 < 0.002

    def test_complex_argument(self):
        val = kernels.bessel("I0", 3.0 + 4.0j)
        assert abs(val - I0_3P4J) < 1e-10 * abs(I0_3P4J)

    @pytest.mark.parametrize("x", [0.5, 2.0, 10.0])
    def test_j0_equals_i0_of_ix(self, x):
        assert abs(kernels.bessel("J0", x) - kernels.bessel("I0", 1j * x)) < 1e-10

    def test_overflow_raises(self):
        with pytest.raises(OverflowError):
            kernels.bessel("I0", 750.0)

    def test_bad_kind_and_argument(self):
        with pytest.raises(ValidationError):
            kernels.bessel("K0", 1.0)
        with pytest.raises(ValidationError):
            kernels.bessel("I0", np.nan)


class TestKr:
    def test_origin_value(self):
        for d in (0.3, 5.0, 1e4):
            assert abs(kernels.kr(0.0, 0.0, d) - d / 2.0) < 1e-12 * d

    def test_symmetry(self):
        rng = np.random.default_rng(7)
        z, zp = rng.random(50), rng.random(50)
        a = kernels.kr(z, zp, 37.0)
        b = kernels.kr(zp, z, 37.0)
        assert np.array_equal(a, b)

    def test_survives_huge_depth(self):
        val = kernels.kr(0.3, 0.9, 1e4)
        assert np.isfinite(val) and val >= 0.0

    def test_double_integral_is_flat_wave_efficiency(self):
        eta = kernels.retrieval_efficiency_fn(lambda z: np.ones_like(z), 10.0)
        assert abs(eta - (1.0 - FLAT_ERR[10.0])) < 1e-9

    def test_domain_validation(self):
        with pytest.raises(ValidationError):
            kernels.kr(1.5, 0.5, 10.0)
        with pytest.raises(ValidationError):
            kernels.kr(0.5, 0.5, -1.0)


class TestRetrievalEfficiency:
    @pytest.mark.parametrize("d", [1.0, 10.0, 100.0])
    def test_flat_matches_closed_form(self, d, flat_wave):
        eta = kernels.retrieval_efficiency(flat_wave(401), d)
        assert abs(eta - (1.0 - FLAT_ERR[d])) < 1e-6

    def test_optimal_mode_error_scaling(self, backward_mode):
        eta = backward_mode(100.0).efficiency
        assert abs((1.0 - eta) - 0.029) < 0.15 * 0.029

    def test_vanishes_at_zero_depth(self, flat_wave):
        assert kernels.retrieval_efficiency(flat_wave(), 1e-9) < 1e-8

    def test_bounded_by_norm(self, ramp_wave):
        s = ramp_wave()
        for d in (0.5, 20.0, 300.0):
            eta = kernels.retrieval_efficiency(s, d)
            assert 0.0 < eta < s.norm_sq

    def test_invariant_under_conjugation(self):
        z = np.linspace(0, 1, 201)
        s = SpinWave((z + 0.2) * np.exp(1j * 1.3 * z)).renormalized()
        sc = SpinWave(np.conj(s.samples), normalized=True)
        a = kernels.retrieval_efficiency(s, 25.0)
        b = kernels.retrieval_efficiency(sc, 25.0)
        assert abs(a - b) < 1e-12


class TestFlatWaveError:
    def test_zero_depth(self):
        assert kernels.flat_wave_error(0.0) == 1.0

    @pytest.mark.parametrize("d", sorted(FLAT_ERR))
    def test_against_series_oracle(self, d):
        assert abs(kernels.flat_wave_error(d) - FLAT_ERR[d]) < 1e-14

    @pytest.mark.parametrize("d", [1.0, 10.0, 100.0])
    def test_quadrature_agreement(self, d):
        eta = kernels.retrieval_efficiency_fn(lambda z: np.ones_like(z), d)
        assert abs((1.0 - eta) - kernels.flat_wave_error(d)) < 1e-6


class TestKernelMatrix:
    def test_symmetric_and_contractive(self):
        km = kernels.KernelMatrix.build(30.0)
        assert np.array_equal(km.entries, km.entries.T)
        assert np.all(km.entries >= 0.0)
        top = np.linalg.eigvalsh(km.entries)[-1]
        assert 0.0 < top < 1.0


class TestLossDensity:
    def test_integrates_to_total_error(self, ramp_wave):
        s = ramp_wave(1001)
        total = kernels.loss_total(s, 10.0)
        eta = kernels.retrieval_efficiency(s, 10.0)
        assert abs(total + eta - 1.0) < 1e-6

    def test_zero_depth_limit_is_local_density(self, ramp_wave):
        s = ramp_wave(801)
        l = kernels.loss_density(s, 1e-6)
        assert np.max(np.abs(l - np.abs(s.samples) ** 2)) < 1e-4

    def test_profile_nonnegative(self, flat_wave):
        l = kernels.loss_density(flat_wave(101), 8.0)
        assert np.all(l > -1e-10)


class TestStepError:
    def test_flat_wave_asymptote(self):
        # a unit step at z = 0 reproduces the flat-wave error constant
        est = kernels.step_error_estimate(1.0, 0.0, 100.0)
        assert abs(est - ASYMPTOTE_100) < 1e-12

    def test_vanishes_at_output_face(self):
        assert kernels.step_error_estimate(0.7, 1.0, 50.0) == 0.0

    def test_mid_ensemble_step_against_quadratic_form(self):
        # parabola plus a plateau: the normalized mode carries a step of
        # height l at z0 = 0.5 and, because the parabola vanishes at z = 0,
        # an equal step at the input edge; the asymptotic estimate must
        # account for both (edge steps at z = 1 would be free instead)
        d, height, z0 = 400.0, 0.3, 0.5
        base = lambda z: np.sqrt(15.0 / 8.0) * (1.0 - 4.0 * (z - 0.5) ** 2)

        def stepped(z):
            return base(z) + height * (np.asarray(z) < z0)

        zf = np.linspace(0, 1, 40001)
        norm = np.sqrt(np.trapezoid(stepped(zf) ** 2, zf))
        eta_base = kernels.retrieval_efficiency_fn(base, d)
        eta_step = kernels.retrieval_efficiency_fn(lambda z: stepped(z) / norm, d)
        extra = (1.0 - eta_step) - (1.0 - eta_base)
        predicted = (kernels.step_error_estimate(height / norm, z0, d)
                     + kernels.step_error_estimate(height / norm, 0.0, d))
        assert abs(extra - predicted) < 0.25 * predicted
