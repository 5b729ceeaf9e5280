"""Mutual information and quantum discord for system-detector qubit pairs.

Measurements are rank-1 projective measurements on the detector only.  For a
detector basis {|d_k>} the discord is

    delta = H(D) + sum_k p_k H(rho_S|k) - H(S, D)

with von Neumann entropies in bits, p_k the outcome probabilities and rho_S|k
the post-measurement conditional states of the system.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import OptimizerNotConvergedWarning
from .measurement import detector_basis, partial_trace
from .state import von_neumann_entropy

COARSE_STEP = math.radians(5.0)
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class MeasurementBasis:
    theta: float
    phi: float

    def states(self) -> tuple[np.ndarray, np.ndarray]:
        return detector_basis(self.theta, self.phi)

    def projectors(self) -> tuple[np.ndarray, np.ndarray]:
        return tuple(np.outer(d, d.conj()) for d in self.states())


POINTER_BASIS = MeasurementBasis(0.0, 0.0)


def mutual_information(rho) -> float:
    rho = np.asarray(rho, dtype=complex)
    h_s = von_neumann_entropy(partial_trace(rho, "system"))
    h_d = von_neumann_entropy(partial_trace(rho, "detector"))
    return h_s + h_d - von_neumann_entropy(rho)


def _entropy_2x2_batch(m: np.ndarray) -> np.ndarray:
    """Entropies (bits) of a stack of 2x2 Hermitian PSD matrices with arbitrary trace <= 1.

    Each matrix is p_k * rho_k; returns p_k * H(rho_k), using p*H(rho) = -sum l lg l + p lg p.
    """
    lam = np.clip(np.linalg.eigvalsh(m), 0.0, None)
    p = lam.sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(lam > 0, lam * np.log2(np.where(lam > 0, lam, 1.0)), 0.0)
        plogp = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=-1) + plogp


def _discord_grid(rho: np.ndarray, thetas: np.ndarray, phis: np.ndarray) -> np.ndarray:
    """Discord for arrays of Bloch angles (broadcast together)."""
    thetas, phis = np.broadcast_arrays(np.asarray(thetas, float), np.asarray(phis, float))
    c, s = np.cos(thetas / 2.0), np.sin(thetas / 2.0)
    e = np.exp(1j * phis)
    d0 = np.stack([c, e * s], axis=-1)
    d1 = np.stack([-np.conj(e) * s, c], axis=-1)
    r = rho.reshape(2, 2, 2, 2)  # [s, d, s', d']
    conditional = 0.0
    for d in (d0, d1):
        # unnormalized conditional system state <d|rho|d> traced over the detector
        block = np.einsum("...j,ajbk,...k->...ab", d.conj(), r, d)
        conditional = conditional + _entropy_2x2_batch(block)
    h_d = von_neumann_entropy(partial_trace(rho, "detector"))
    h_sd = von_neumann_entropy(rho)
    return h_d + conditional - h_sd


def discord_in_basis(rho, basis: MeasurementBasis) -> float:
    rho = np.asarray(rho, dtype=complex)
    return float(_discord_grid(rho, np.array(basis.theta), np.array(basis.phi)))


@dataclass(frozen=True)
class MinDiscord:
    value: float
    basis: MeasurementBasis
    converged: bool


def _golden_section(f, lo: float, hi: float, tol: float = 1e-9, max_iter: int = 200):
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    # endpoints matter: the minimum often sits on theta = 0 or pi exactly
    candidates = [(fc, c), (fd, d), (f(lo), lo), (f(hi), hi)]
    fx, x = min(candidates)
    return x, fx, b - a < tol


def min_discord(rho, max_sweeps: int = 20) -> MinDiscord:
    """Minimize discord over detector bases: 5-degree grid, then coordinate golden-section."""
    rho = np.asarray(rho, dtype=complex)
    thetas = np.arange(0.0, math.pi + 1e-12, COARSE_STEP)
    phis = np.arange(0.0, 2.0 * math.pi - 1e-12, COARSE_STEP)
    grid = _discord_grid(rho, thetas[:, None], phis[None, :])
    i, j = np.unravel_index(np.argmin(grid), grid.shape)
    theta, phi, best = float(thetas[i]), float(phis[j]), float(grid[i, j])

    def value(t, p):
        return float(_discord_grid(rho, np.array(t), np.array(p)))

    converged = False
    for _ in range(max_sweeps):
        previous = best
        lo, hi = max(0.0, theta - COARSE_STEP), min(math.pi, theta + COARSE_STEP)
        t_new, f_new, ok_t = _golden_section(lambda t: value(t, phi), lo, hi)
        if f_new <= best:
            theta, best = t_new, f_new
        p_new, f_new, ok_p = _golden_section(lambda p: value(theta, p), phi - COARSE_STEP, phi + COARSE_STEP)
        if f_new <= best:
            phi, best = p_new % (2.0 * math.pi), f_new
        if ok_t and ok_p and previous - best < 1e-12:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"discord minimization did not converge; best value {best:.6g} bits",
            OptimizerNotConvergedWarning,
            stacklevel=2,
        )
    if math.sin(theta) < 1e-12:
        phi = 0.0  # azimuth is meaningless at the poles
    return MinDiscord(best, MeasurementBasis(theta, phi), converged)


def bell_state() -> np.ndarray:
    """Density matrix of (|up,d_up> - |down,d_down>)/sqrt(2)."""
    phi = np.array([1.0, 0.0, 0.0, -1.0], dtype=complex) / math.sqrt(2.0)
    return np.outer(phi, phi.conj())


def reduced_state(p_up: float = 0.5) -> np.ndarray:
    return np.diag([p_up, 0.0, 0.0, 1.0 - p_up]).astype(complex)


def product_state() -> np.ndarray:
    return np.diag([1.0, 0.0, 0.0, 0.0]).astype(complex)


NAMED_STATES = {"bell": bell_state, "reduced": reduced_state, "product": product_state}
