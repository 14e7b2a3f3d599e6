import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_field
from oracles import dirac_symbol_eigvec, pointwise_currents
from csdlab.dirac import (GAMMA, IDENTITY, bilinears, check_gamma_algebra, dirac_current,
                          dirac_current_matrix, dirac_operator, free_propagator, half_wave,
                          half_wave_projectors, propagator_symbol)
from csdlab.spectral import Grid, l2_norm

G16 = Grid(16)


class TestGammaAlgebra:
    def test_all_relations_hold(self):
        report = check_gamma_algebra()
        assert len(report) == 12 and all(report.values())

    def test_squares(self):
        assert np.array_equal(GAMMA[0] @ GAMMA[0], IDENTITY)
        assert np.array_equal(GAMMA[1] @ GAMMA[1], -IDENTITY)
        assert np.array_equal(GAMMA[2] @ GAMMA[2], -IDENTITY)

    def test_anticommute_12(self):
        assert not np.any(GAMMA[1] @ GAMMA[2] + GAMMA[2] @ GAMMA[1])

    def test_corrupted_set_is_detected(self):
        bad = GAMMA.copy()
        bad[2, 1, 0] = 1
        report = check_gamma_algebra(bad)
        assert not all(report.values())
        assert not report["anticomm[2,2]"]


class TestCurrents:
    def test_unit_spinor(self):
        psi = np.zeros((2, 8, 8), complex)
        psi[0] = 1
        J = dirac_current(psi)
        assert np.all(J[0] == 1) and not J[1:].any()

    def test_zero(self):
        assert not dirac_current(np.zeros((2, 8, 8), complex)).any()

    def test_matches_pointwise_matrices(self, rng):
        psi = random_field(rng, (2, 6, 6))
        ref = pointwise_currents(psi)
        assert np.max(np.abs(ref.imag)) < 1e-12
        assert np.max(np.abs(dirac_current(psi) - ref.real)) < 1e-12
        assert np.max(np.abs(dirac_current_matrix(psi) - ref)) < 1e-12

    def test_charge_density_is_modulus(self, rng):
        psi = random_field(rng, (2, 8, 8))
        assert np.allclose(dirac_current(psi)[0], np.sum(np.abs(psi) ** 2, axis=0), atol=1e-12)

    def test_bilinears_diagonal_are_currents(self, rng):
        psi = random_field(rng, (2, 8, 8))
        assert np.allclose(bilinears(psi, psi), dirac_current(psi), atol=1e-12)


class TestHalfWave:
    def test_identity_at_zero(self, rng):
        f = random_field(rng, G16.shape)
        assert np.allclose(half_wave(f, G16, 0.0), f, atol=1e-13)

    @pytest.mark.parametrize("sign", [1, -1])
    def test_plane_wave_phase(self, sign):
        x1, x2 = G16.x
        f = np.exp(1j * (3 * x1 + 4 * x2))
        t = 0.37
        assert np.allclose(half_wave(f, G16, t, sign), np.exp(sign * 1j * t * 5) * f, atol=1e-12)

    @given(st.integers(0, 2 ** 32 - 1), st.floats(-10, 10))
    def test_unitary_and_group_law(self, seed, t):
        f = random_field(np.random.default_rng(seed), (2, 16, 16))
        u = half_wave(f, G16, t)
        assert abs(float(l2_norm(u, G16, 1)) - float(l2_norm(f, G16, 1))) < 1e-12 * float(l2_norm(f, G16, 1))
        assert np.allclose(half_wave(u, G16, 0.5), half_wave(f, G16, t + 0.5), atol=1e-10)

    def test_bad_sign(self):
        with pytest.raises(ValueError):
            half_wave(np.ones(G16.shape), G16, 1.0, sign=2)


class TestPropagator:
    def test_identity_at_zero(self, rng):
        f = random_field(rng, (2, 16, 16))
        assert np.allclose(free_propagator(f, G16, 0.0), f, atol=1e-13)

    @pytest.mark.parametrize("k", [(1, 0), (2, -3), (0, 5)])
    def test_positive_eigenvector_gets_pure_phase(self, k):
        xi = (k[0], k[1])  # L = 2 pi
        v = dirac_symbol_eigvec(*xi, sign=1)
        x1, x2 = G16.x
        f = v[:, None, None] * np.exp(1j * (xi[0] * x1 + xi[1] * x2))
        t = 0.81
        r = np.hypot(*xi)
        assert np.allclose(free_propagator(f, G16, t), np.exp(1j * t * r) * f, atol=1e-12)

    @given(st.integers(0, 2 ** 32 - 1), st.floats(-5, 5), st.floats(-5, 5))
    def test_unitary_and_group_law(self, seed, t, s):
        f = random_field(np.random.default_rng(seed), (2, 16, 16))
        n0 = float(l2_norm(f, G16, 1))
        assert abs(float(l2_norm(free_propagator(f, G16, t), G16, 1)) - n0) < 1e-12 * n0
        two = free_propagator(free_propagator(f, G16, s), G16, t)
        assert float(l2_norm(two - free_propagator(f, G16, t + s), G16, 1)) < 1e-10 * n0

    def test_projector_algebra(self):
        lp, lm = half_wave_projectors(G16)
        mul = lambda a, b: np.einsum("ab...,bc...->ac...", a, b)
        keep = ~G16.zero_mode
        eye = np.eye(2)[:, :, None, None]
        for expr in (mul(lp, lp) - lp, mul(lm, lm) - lm, mul(lp, lm), mul(lm, lp), lp + lm - eye):
            assert np.max(np.abs(expr[..., keep])) < 1e-12

    def test_symbol_is_unitary_pointwise(self):
        E = propagator_symbol(G16, 1.3)
        prod = np.einsum("ba...,bc...->ac...", E.conj(), E)
        assert np.max(np.abs(prod - np.eye(2)[:, :, None, None])) < 1e-12

    def test_dirac_residual_second_order(self, rng):
        f = np.fft.ifft2(np.fft.fft2(random_field(rng, (2, 16, 16))) * np.exp(-G16.xi_sq / 8))
        errs = []
        for dt in (0.02, 0.01):
            times = np.arange(0, 0.2 + 1e-12, dt)
            snaps = np.stack([free_propagator(f, G16, t) for t in times])
            errs.append(float(np.max(l2_norm(dirac_operator(snaps, times, G16), G16, 1))))
        assert 3.5 < errs[0] / errs[1] < 4.5
