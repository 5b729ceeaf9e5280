import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from decolab.errors import NonNormalizedInputError
from decolab.measurement import (
    IDENTITY2,
    SIGMA_X,
    SIGMA_Z,
    correlated_density,
    decohere_via_environment,
    detector_basis,
    entropy_gain,
    is_pointer_observable,
    partial_trace,
    premeasure,
    reduce,
    rotate_detector_basis,
)
from decolab.state import von_neumann_entropy

R2 = 1 / math.sqrt(2)
UP = np.array([1, 0], dtype=complex)
DOWN = np.array([0, 1], dtype=complex)


def _purity(rho):
    return float(np.real(np.trace(rho @ rho)))


amplitudes = st.floats(0.0, math.pi / 2).map(lambda a: (math.cos(a), math.sin(a)))


class TestPremeasure:
    def test_definite_input(self):
        assert np.allclose(premeasure(1, 0), [1, 0, 0, 0])

    def test_anticorrelated_pair(self):
        assert np.allclose(premeasure(R2, -R2), np.array([1, 0, 0, -1]) / math.sqrt(2))

    def test_schmidt_coefficients(self):
        phi = premeasure(math.sqrt(0.8), math.sqrt(0.2))
        # oracle: singular values of the system x detector coefficient matrix
        sv = np.linalg.svd(phi.reshape(2, 2), compute_uv=False)
        assert np.allclose(sorted(sv**2, reverse=True), [0.8, 0.2])

    def test_rejects_unnormalized(self):
        with pytest.raises(NonNormalizedInputError):
            premeasure(1, 1)


class TestCorrelatedDensity:
    def test_rank_one(self):
        rho = correlated_density(premeasure(R2, -R2))
        assert np.linalg.matrix_rank(rho, tol=1e-10) == 1
        assert _purity(rho) == pytest.approx(1.0, abs=1e-12)

    def test_coherence_block(self):
        a, b = 0.6, 0.8j
        rho = correlated_density(premeasure(a, b))
        assert rho[0, 3] == pytest.approx(a * np.conj(b))

    def test_product_projector(self):
        assert np.allclose(correlated_density(premeasure(1, 0)), np.diag([1, 0, 0, 0]))


class TestReduce:
    def test_half_half(self):
        assert np.allclose(reduce(correlated_density(premeasure(R2, R2))), np.diag([0.5, 0, 0, 0.5]))

    def test_idempotent(self):
        r = reduce(correlated_density(premeasure(0.6, 0.8)))
        assert np.allclose(reduce(r), r)

    def test_eigenvalues(self):
        r = reduce(correlated_density(premeasure(math.sqrt(0.8), math.sqrt(0.2))))
        assert np.allclose(sorted(np.linalg.eigvalsh(r)), [0, 0, 0.2, 0.8], atol=1e-12)

    @given(amplitudes)
    @settings(max_examples=30, deadline=None)
    def test_trace_preserving(self, ab):
        r = reduce(correlated_density(premeasure(*ab)))
        assert np.trace(r).real == pytest.approx(1.0, abs=1e-12)


class TestRotateDetectorBasis:
    def test_sigma_x_basis_of_anticorrelated_pair(self):
        phi = premeasure(R2, -R2)
        branches = rotate_detector_basis(phi, math.pi / 2, 0.0)
        assert np.allclose(branches.probabilities, [0.5, 0.5])
        # partner system states are the sigma_x eigenstates
        plus, minus = (UP + DOWN) * R2, (UP - DOWN) * R2
        s0, s1 = branches.system_states
        overlaps = sorted([abs(np.vdot(plus, s0)), abs(np.vdot(minus, s0))])
        assert overlaps == pytest.approx([0.0, 1.0], abs=1e-12)
        assert abs(np.vdot(s0, s1)) < 1e-12
        assert np.allclose(branches.reassemble(), phi)

    @pytest.mark.parametrize("theta", [0.3, 1.1, 2.5])
    def test_product_state_branches(self, theta):
        branches = rotate_detector_basis(premeasure(1, 0), theta, 0.7)
        # oracle: |<d_k|d_up>|^2 from explicit 2-vector algebra
        d0, d1 = detector_basis(theta, 0.7)
        expected = [abs(d0[0]) ** 2, abs(d1[0]) ** 2]
        assert np.allclose(branches.probabilities, expected)
        assert np.allclose(expected, [math.cos(theta / 2) ** 2, math.sin(theta / 2) ** 2])
        for s in branches.system_states:
            assert abs(abs(np.vdot(UP, s)) - 1.0) < 1e-12

    def test_identity_rotation(self):
        phi = premeasure(R2, -R2)
        branches = rotate_detector_basis(phi, 0.0, 0.0)
        assert np.allclose(branches.system_states[0], UP)
        assert np.allclose(branches.system_states[1], -DOWN)

    @given(st.floats(0, math.pi), st.floats(0, 2 * math.pi))
    @settings(max_examples=40, deadline=None)
    def test_bell_branches_are_always_even(self, theta, azimuth):
        branches = rotate_detector_basis(premeasure(R2, -R2), theta, azimuth)
        assert np.allclose(branches.probabilities, [0.5, 0.5], atol=1e-12)


def _explicit_environment_trace(alpha, beta, z):
    """Oracle: build the 8-dimensional S (x) D (x) E pure state and trace out E."""
    e_up = np.array([1.0, 0.0], dtype=complex)
    # |E_down> with <E_up|E_down> = z
    e_down = np.array([z, math.sqrt(max(0.0, 1 - abs(z) ** 2))], dtype=complex)
    psi = alpha * np.kron(np.kron(UP, UP), e_up) + beta * np.kron(np.kron(DOWN, DOWN), e_down)
    full = np.outer(psi, psi.conj()).reshape(4, 2, 4, 2)
    return np.einsum("iaja->ij", full)


class TestDecohere:
    def test_zero_overlap_is_reduce(self):
        rho = correlated_density(premeasure(0.6, 0.8))
        assert np.allclose(decohere_via_environment(rho, 0.0), reduce(rho))

    def test_unit_overlap_is_identity(self):
        rho = correlated_density(premeasure(0.6, 0.8))
        assert np.allclose(decohere_via_environment(rho, 1.0), rho)

    def test_half_overlap(self):
        rho = correlated_density(premeasure(R2, R2))
        oracle = _explicit_environment_trace(R2, R2, 0.5)
        assert abs(oracle[0, 3]) == pytest.approx(0.25)
        assert np.allclose(decohere_via_environment(rho, 0.5), oracle)

    @pytest.mark.parametrize("z", [0.3j, 0.2 + 0.5j, -0.7])
    def test_complex_overlap_matches_oracle(self, z):
        rho = correlated_density(premeasure(0.6, 0.8))
        assert np.allclose(decohere_via_environment(rho, z), _explicit_environment_trace(0.6, 0.8, z))

    @given(amplitudes, st.floats(0.0, 0.99))
    @settings(max_examples=30, deadline=None)
    def test_purity_drops(self, ab, z):
        rho = correlated_density(premeasure(*ab))
        after = _purity(decohere_via_environment(rho, z))
        if ab[0] * ab[1] > 1e-6:
            assert after < 1.0 - 1e-12
        else:
            assert after == pytest.approx(1.0)


class TestEntropyGain:
    def test_symmetric(self):
        assert entropy_gain(R2, R2) == pytest.approx(1.0, abs=1e-12)

    def test_definite(self):
        assert entropy_gain(1, 0) == 0.0

    def test_09_01(self):
        oracle = -(0.9 * math.log2(0.9) + 0.1 * math.log2(0.1))
        assert entropy_gain(math.sqrt(0.9), math.sqrt(0.1)) == pytest.approx(oracle, abs=1e-12)
        assert oracle == pytest.approx(0.4690, abs=1e-3)

    @given(amplitudes)
    @settings(max_examples=40, deadline=None)
    def test_equals_entropy_of_reduced_state(self, ab):
        reduced = reduce(correlated_density(premeasure(*ab)))
        assert entropy_gain(*ab) == pytest.approx(von_neumann_entropy(reduced), abs=1e-8)


def _coupling(g):
    return g * np.kron(np.diag([1, 0]).astype(complex), SIGMA_X)


class TestPointerObservable:
    def test_commuting(self):
        ok, norm = is_pointer_observable(SIGMA_X, _coupling(0.7))
        assert ok and norm < 1e-12

    @pytest.mark.parametrize("g", [0.5, -1.3])
    def test_non_commuting_norm(self, g):
        ok, norm = is_pointer_observable(SIGMA_Z, _coupling(g))
        # oracle: explicit commutator, largest singular value
        big = np.kron(IDENTITY2, SIGMA_Z)
        comm = big @ _coupling(g) - _coupling(g) @ big
        assert not ok
        assert norm == pytest.approx(np.linalg.svd(comm, compute_uv=False)[0])
        assert norm == pytest.approx(2 * abs(g))

    def test_zero_interaction(self):
        assert is_pointer_observable(SIGMA_Z, np.zeros((4, 4)))[0]

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            is_pointer_observable(np.array([[0, 1], [0, 0]]), np.zeros((4, 4)))

    @pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
    def test_pointer_states_survive_the_interaction(self, t):
        h = _coupling(0.9)
        assert is_pointer_observable(SIGMA_X, h)[0]
        plus = np.array([1, 1]) / math.sqrt(2)
        for s in (UP, DOWN):
            state = np.kron(s, plus)
            evolved = expm(-1j * h * t) @ state
            # remains in the +1 eigenspace of I (x) sigma_x
            projector = np.kron(IDENTITY2, (IDENTITY2 + SIGMA_X) / 2)
            assert np.linalg.norm(projector @ evolved - evolved) < 1e-12


def test_partial_traces():
    rho = correlated_density(premeasure(0.6, 0.8))
    assert np.allclose(partial_trace(rho, "system"), np.diag([0.36, 0.64]))
    assert np.allclose(partial_trace(rho, "detector"), np.diag([0.36, 0.64]))
    with pytest.raises(ValueError):
        partial_trace(rho, "environment")
