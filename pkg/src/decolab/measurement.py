"""Two-qubit von Neumann measurement model: system S (spin) and detector D.

Basis ordering of every 4-vector and 4x4 matrix is
``|up,d_up>, |up,d_down>, |down,d_up>, |down,d_down>`` (system index major).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonNormalizedInputError
from .state import entropy_from_eigenvalues

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY2 = np.eye(2, dtype=complex)

POINTER_TOLERANCE = 1e-10


def _as_pair_pure(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=complex).reshape(4)
    if abs(np.vdot(phi, phi).real - 1.0) > 1e-12:
        raise NonNormalizedInputError("qubit-pair state must have unit norm")
    return phi


def _as_pair_density(rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError(f"expected a 4x4 density matrix, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > 1e-10:
        raise NonNormalizedInputError("density matrix must have unit trace")
    return rho


def premeasure(alpha: complex, beta: complex) -> np.ndarray:
    """Correlate the detector with the spin: (a|up> + b|down>)|d_down> -> a|up,d_up> + b|down,d_down>."""
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1.0) > 1e-10:
        raise NonNormalizedInputError("|alpha|^2 + |beta|^2 must equal 1")
    return np.array([alpha, 0.0, 0.0, beta], dtype=complex)


def correlated_density(phi) -> np.ndarray:
    phi = _as_pair_pure(phi)
    return np.outer(phi, phi.conj())


def reduce(rho) -> np.ndarray:
    """Drop coherences between different detector records, keeping each record's block."""
    return decohere_via_environment(rho, 0.0)


def decohere_via_environment(rho, overlap: complex) -> np.ndarray:
    """Trace out an environment that records the detector pointer state.

    The environment ends in |E_up> or |E_down> with ``overlap = <E_up|E_down>``.
    The element |.,d_up><.,d_down| acquires <E_down|E_up> = conj(overlap) and its
    Hermitian partner acquires ``overlap``.
    """
    rho = _as_pair_density(rho)
    if abs(overlap) > 1.0 + 1e-12:
        raise ValueError("environment overlap must satisfy |z| <= 1")
    z = complex(overlap)
    record = np.array([[1.0, np.conj(z)], [z, 1.0]])
    return rho * np.kron(np.ones((2, 2)), record)


def entropy_gain(alpha: complex, beta: complex) -> float:
    """Entropy (bits) created by cancelling the record coherences of a premeasured state."""
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1.0) > 1e-10:
        raise NonNormalizedInputError("|alpha|^2 + |beta|^2 must equal 1")
    return entropy_from_eigenvalues(np.array([abs(alpha) ** 2, abs(beta) ** 2]))


def detector_basis(theta: float, phi: float) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal detector states at Bloch angles (theta, phi); theta = 0 is {d_up, d_down}."""
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    d0 = np.array([c, np.exp(1j * phi) * s], dtype=complex)
    d1 = np.array([-np.exp(-1j * phi) * s, c], dtype=complex)
    return d0, d1


@dataclass(frozen=True)
class BranchDecomposition:
    """|Phi> = sum_k sqrt(p_k) |s_k> |d_k> in a chosen detector basis."""

    probabilities: np.ndarray
    system_states: tuple[np.ndarray, np.ndarray]
    detector_states: tuple[np.ndarray, np.ndarray]

    def reassemble(self) -> np.ndarray:
        return sum(
            np.sqrt(p) * np.kron(s, d)
            for p, s, d in zip(self.probabilities, self.system_states, self.detector_states)
        )


def rotate_detector_basis(phi, theta: float, azimuth: float) -> BranchDecomposition:
    """Re-express a pure pair state in the detector basis at Bloch angles (theta, azimuth)."""
    phi = _as_pair_pure(phi).reshape(2, 2)  # [system, detector]
    dets = detector_basis(theta, azimuth)
    probs, systems = [], []
    for d in dets:
        s = phi @ d.conj()
        p = float(np.vdot(s, s).real)
        probs.append(p)
        systems.append(s / np.sqrt(p) if p > 1e-15 else np.zeros(2, dtype=complex))
    return BranchDecomposition(np.array(probs), tuple(systems), dets)


def is_pointer_observable(observable, interaction) -> tuple[bool, float]:
    """Whether I (x) observable commutes with the interaction Hamiltonian.

    Returns ``(commutes, norm)`` where ``norm`` is the spectral norm of the
    commutator; ``commutes`` is ``norm < 1e-10``.
    """
    lam = np.asarray(observable, dtype=complex)
    h = np.asarray(interaction, dtype=complex)
    if lam.shape != (2, 2) or h.shape != (4, 4):
        raise ValueError("observable must be 2x2 and interaction 4x4")
    for name, m in (("observable", lam), ("interaction", h)):
        if np.max(np.abs(m - m.conj().T)) > 1e-12:
            raise ValueError(f"{name} is not Hermitian")
    big = np.kron(IDENTITY2, lam)
    comm = big @ h - h @ big
    norm = float(np.linalg.norm(comm, 2))
    return norm < POINTER_TOLERANCE, norm


def partial_trace(rho, keep: str) -> np.ndarray:
    """Reduced 2x2 state of ``'system'`` or ``'detector'``."""
    r = np.asarray(rho, dtype=complex).reshape(2, 2, 2, 2)
    if keep == "system":
        return np.einsum("ajbj->ab", r)
    if keep == "detector":
        return np.einsum("iaib->ab", r)
    raise ValueError("keep must be 'system' or 'detector'")
