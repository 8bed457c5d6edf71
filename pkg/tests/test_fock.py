import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from heraldtomo import fock
from heraldtomo.exceptions import ConfigurationError, DimensionError

from conftest import random_density_matrix


def squeezing_generator_oracle(lam, d):
    # exp(r (a^+ b^+ - a b)) |0,0> with r = artanh(lam), on a roomy cutoff
    a = fock.annihilation_operator(d)
    eye = np.eye(d)
    a_s, a_t = np.kron(a, eye), np.kron(eye, a)
    gen = a_s.conj().T @ a_t.conj().T - a_s @ a_t
    vac = np.zeros(d * d, dtype=complex)
    vac[0] = 1.0
    return expm(math.atanh(lam) * gen) @ vac


class TestOperators:
    def test_annihilation_small(self):
        np.testing.assert_array_equal(fock.annihilation_operator(2), [[0, 1], [0, 0]])
        a3 = fock.annihilation_operator(3)
        assert a3[0, 1] == 1 and a3[1, 2] == pytest.approx(math.sqrt(2))
        assert np.count_nonzero(a3) == 2

    def test_number_operator(self):
        a = fock.annihilation_operator(7)
        np.testing.assert_allclose(np.diag(a.conj().T @ a).real, np.arange(7))
        np.testing.assert_allclose(fock.number_operator(7), a.conj().T @ a)

    @pytest.mark.parametrize("bad", [1, 0, 2.5, True])
    def test_bad_cutoff(self, bad):
        with pytest.raises(ConfigurationError):
            fock.check_cutoff(bad)

    def test_fock_outside_cutoff(self):
        with pytest.raises(DimensionError):
            fock.fock_dm(4, 4)


class TestDensityMatrixChecks:
    def test_accepts_valid(self, rng):
        fock.check_density_matrix(random_density_matrix(5, rng), 5)

    def test_rejects_wrong_dimension(self, rng):
        with pytest.raises(DimensionError):
            fock.check_density_matrix(random_density_matrix(5, rng), 6)

    def test_rejects_non_hermitian(self):
        rho = fock.vacuum(3)
        rho[0, 1] = 0.1
        with pytest.raises(ConfigurationError, match="Hermitian"):
            fock.check_density_matrix(rho)

    def test_rejects_trace(self):
        with pytest.raises(ConfigurationError, match="trace"):
            fock.check_density_matrix(2 * fock.vacuum(3))

    def test_rejects_negative(self):
        rho = np.diag([1.2, -0.2, 0.0])
        with pytest.raises(ConfigurationError, match="positive"):
            fock.check_density_matrix(rho)


class TestTwoModeSqueezedState:
    def test_zero_squeezing_is_vacuum(self):
        psi = fock.two_mode_squeezed_state(0.0, 5)
        assert psi[0] == 1 and np.count_nonzero(psi) == 1

    def test_amplitudes_match_generator_exponential(self):
        lam, d = 0.2, 14
        oracle = squeezing_generator_oracle(lam, d).reshape(d, d)
        psi = fock.two_mode_squeezed_state(lam, d).reshape(d, d)
        assert abs(psi[1, 1]) == pytest.approx(math.sqrt(1 - 0.04) * 0.2, abs=1e-12)
        # compare the low-photon block where the oracle is untouched by truncation
        np.testing.assert_allclose(np.abs(psi[:6, :6]), np.abs(oracle[:6, :6]), atol=1e-10)

    def test_population_ratio(self):
        psi = fock.two_mode_squeezed_state(0.1, 12)
        p = np.abs(psi.reshape(12, 12).diagonal()) ** 2
        assert p[1] / p[0] == pytest.approx(0.01, rel=1e-12)

    def test_leakage_rejected(self):
        with pytest.raises(ConfigurationError, match="cutoff"):
            fock.two_mode_squeezed_state(0.5, 5)
        with pytest.raises(ConfigurationError):
            fock.check_squeezing(1.0, 10)

    def test_leakage_formula(self):
        lam, d = 0.3, 6
        assert fock.truncation_leakage(lam, d) == pytest.approx(lam ** (2 * d), rel=1e-9)


class TestSqueezedVacuum:
    def test_matches_generator_exponential(self):
        lam, d = 0.15, 30
        a = fock.annihilation_operator(d)
        r = math.atanh(lam)
        # S(z) = exp((z* a^2 - z a^+2)/2); real positive z squeezes the phi=0 quadrature
        s = expm(0.5 * r * (a @ a - a.conj().T @ a.conj().T))
        psi = s[:, 0]
        rho = fock.squeezed_vacuum(lam, 12, squeezed_phase=0.0)
        np.testing.assert_allclose(rho, np.outer(psi[:12], psi[:12].conj()), atol=1e-12)

    def test_even_support(self):
        rho = fock.squeezed_vacuum(0.2, 10)
        assert np.abs(np.diag(rho)[1::2]).max() == 0


class TestBeamSplitter:
    def test_reflectivity_from_angle(self):
        thetas = np.radians([0, 11.25, 16, 19, 22.5, 45])
        np.testing.assert_allclose(fock.reflectivity(thetas), np.cos(2 * thetas) ** 2, rtol=0, atol=1e-15)
        assert fock.reflectivity(np.radians(16)) == pytest.approx(0.71919, abs=1e-5)

    def test_from_reflectivity_roundtrip(self):
        for r in (0.0, 0.3, 0.5, 1.0):
            assert fock.BeamSplitterSetting.from_reflectivity(r).reflectivity == pytest.approx(r, abs=1e-15)

    @pytest.mark.parametrize("convention", ["symmetric", "real"])
    def test_zero_reflectivity_is_identity(self, convention):
        u = fock.beam_splitter_unitary(0.0, 4, convention)
        np.testing.assert_allclose(u, np.eye(16), atol=1e-14)

    @pytest.mark.parametrize("convention", ["symmetric", "real"])
    def test_balanced_single_photon(self, convention):
        d = 3
        u = fock.beam_splitter_unitary(0.5, d, convention)
        psi = np.zeros(d * d, dtype=complex)
        psi[1 * d + 0] = 1
        out = u @ psi
        assert abs(out[1 * d + 0]) ** 2 == pytest.approx(0.5, abs=1e-12)
        assert abs(out[0 * d + 1]) ** 2 == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("convention", ["symmetric", "real"])
    def test_hong_ou_mandel(self, convention):
        # two photons meeting on a 50:50 splitter: |1,1> -> (|2,0> + e^{i..}|0,2>)/sqrt2,
        # from the combinatorics of (a^+ + b^+)(a^+ - b^+)/2 acting on vacuum
        d = 4
        u = fock.beam_splitter_unitary(0.5, d, convention)
        psi = np.zeros(d * d, dtype=complex)
        psi[1 * d + 1] = 1
        out = u @ psi
        assert abs(out[1 * d + 1]) < 1e-12
        assert abs(out[2 * d + 0]) ** 2 == pytest.approx(0.5, abs=1e-12)
        assert abs(out[0 * d + 2]) ** 2 == pytest.approx(0.5, abs=1e-12)

    def test_unknown_convention(self):
        with pytest.raises(ConfigurationError):
            fock.beam_splitter_unitary(0.5, 3, "weird")

    @given(st.floats(0, 1), st.integers(2, 8), st.sampled_from(["symmetric", "real"]))
    def test_unitarity(self, r, d, convention):
        u = fock.beam_splitter_unitary(r, d, convention)
        assert np.abs(u.conj().T @ u - np.eye(d * d)).max() < 1e-9

    def test_unitarity_large_cutoff(self):
        u = fock.beam_splitter_unitary(0.37, 20)
        assert np.abs(u.conj().T @ u - np.eye(400)).max() < 1e-9

    def test_squeezed_input_even_marginals(self):
        d = 10
        psi = fock.two_mode_squeezed_state(0.1, d)
        out = fock.beam_splitter_unitary(0.5, d) @ psi
        for keep in (fock.SIGNAL, fock.TRIGGER):
            p = np.diag(fock.partial_trace(out, keep)).real
            assert p[1::2].max() < 1e-10


class TestApplyUnitary:
    def test_identity(self, rng):
        rho = random_density_matrix(3, rng)
        np.testing.assert_allclose(fock.apply_unitary(rho, np.eye(3)), rho)

    def test_inverse_roundtrip(self, rng):
        u = fock.beam_splitter_unitary(0.3, 3)
        rho = random_density_matrix(9, rng)
        back = fock.apply_unitary(fock.apply_unitary(rho, u), u.conj().T)
        np.testing.assert_allclose(back, rho, atol=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            fock.apply_unitary(np.ones(4), np.eye(9))


class TestPartialTrace:
    def test_product_state(self, rng):
        a, b = random_density_matrix(3, rng), random_density_matrix(3, rng)
        prod = np.kron(a, b)
        np.testing.assert_allclose(fock.partial_trace(prod, fock.SIGNAL), a, atol=1e-12)
        np.testing.assert_allclose(fock.partial_trace(prod, fock.TRIGGER), b, atol=1e-12)

    def test_thermal_marginal(self):
        lam, d = 0.2, 12
        psi = fock.two_mode_squeezed_state(lam, d)
        # direct index contraction on the pure-state coefficients
        c = psi.reshape(d, d)
        oracle = np.array([[sum(c[i, m] * c[j, m].conj() for m in range(d)) for j in range(d)] for i in range(d)])
        red = fock.partial_trace(np.outer(psi, psi.conj()), fock.SIGNAL)
        np.testing.assert_allclose(red, oracle, atol=1e-14)
        thermal = (1 - lam**2) * lam ** (2 * np.arange(d))
        np.testing.assert_allclose(np.diag(red).real, thermal / thermal.sum(), atol=1e-14)

    def test_vector_and_matrix_agree(self, rng):
        psi = rng.normal(size=16) + 1j * rng.normal(size=16)
        psi /= np.linalg.norm(psi)
        for keep in (fock.SIGNAL, fock.TRIGGER):
            np.testing.assert_allclose(
                fock.partial_trace(psi, keep), fock.partial_trace(np.outer(psi, psi.conj()), keep), atol=1e-14
            )

    @given(st.integers(2, 5), st.integers(0, 2**31))
    def test_trace_preserved(self, d, seed):
        rho = random_density_matrix(d * d, np.random.default_rng(seed))
        assert np.trace(fock.partial_trace(rho)).real == pytest.approx(1.0, abs=1e-9)

    def test_bad_shape(self):
        with pytest.raises(DimensionError):
            fock.partial_trace(np.eye(5))


@given(st.floats(-10, 10), st.integers(0, 2**31))
def test_rotation_preserves_populations(phi, seed):
    rho = random_density_matrix(5, np.random.default_rng(seed))
    rot = fock.rotate(rho, phi)
    np.testing.assert_allclose(np.diag(rot), np.diag(rho), atol=1e-14)
    np.testing.assert_allclose(fock.rotate(rot, -phi), rho, atol=1e-12)
