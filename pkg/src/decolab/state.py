"""Position-grid states: wave functions, density matrices and their scalar diagnostics.

Units are natural throughout (hbar = k_B = 1).  A :class:`DensityMatrix` stores the
kernel rho(x_i, x_j) in units of 1/length, so the trace is ``sum(diag) * dx`` and the
matrix of the operator in the orthonormal lattice basis is ``entries * dx``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    MomentumAliasingError,
    NonNormalizedInputError,
    PacketTooWideError,
    SignificantNegativityError,
)

HBAR = 1.0

NEGATIVITY_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice x_j = -L + j*dx on [-L, L)."""

    n: int
    half_extent: float

    def __post_init__(self):
        n = int(self.n)
        if n < 16 or n & (n - 1):
            raise ValueError(f"grid size must be a power of two >= 16, got {self.n}")
        if not self.half_extent > 0:
            raise ValueError("half_extent must be positive")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "half_extent", float(self.half_extent))

    @property
    def dx(self) -> float:
        return 2.0 * self.half_extent / self.n

    @property
    def x(self) -> np.ndarray:
        return -self.half_extent + self.dx * np.arange(self.n)

    @property
    def dp(self) -> float:
        return 2.0 * np.pi * HBAR / (2.0 * self.half_extent)

    @property
    def p_nyquist(self) -> float:
        return np.pi * HBAR / self.dx

    @property
    def p(self) -> np.ndarray:
        """Momentum lattice in ascending order, spanning [-pi hbar/dx, pi hbar/dx)."""
        return self.dp * (np.arange(self.n) - self.n // 2)

    @property
    def k_fft(self) -> np.ndarray:
        """Momenta in FFT ordering (matches ``numpy.fft.fft`` output)."""
        return 2.0 * np.pi * HBAR * np.fft.fftfreq(self.n, d=self.dx)

    def wrapped(self, displacement: np.ndarray) -> np.ndarray:
        """Minimum-image version of a coordinate difference on the periodic lattice."""
        period = 2.0 * self.half_extent
        return (displacement + self.half_extent) % period - self.half_extent


@dataclass(frozen=True)
class GaussianSpec:
    """Gaussian packet parameters.

    ``width`` is the position standard deviation of |psi|^2 for ``squeeze == 1``;
    the squeeze multiplies the position variance, so the effective standard
    deviation is ``width * sqrt(squeeze)``.
    """

    center: float = 0.0
    momentum: float = 0.0
    width: float = 1.0
    squeeze: float = 1.0

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("width must be positive")
        if not self.squeeze > 0:
            raise ValueError("squeeze must be positive")

    @property
    def sigma(self) -> float:
        return self.width * np.sqrt(self.squeeze)


@dataclass(frozen=True, eq=False)
class WaveFunction:
    grid: Grid
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} amplitudes, got shape {amps.shape}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.dx)

    def probability(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def expectation_x(self, power: int = 1) -> float:
        return float(np.sum(self.probability() * self.grid.x**power) * self.grid.dx)

    def momentum_amplitudes(self) -> np.ndarray:
        """Amplitudes on the ascending momentum lattice, normalized so sum |phi|^2 dp = 1."""
        g = self.grid
        phase = np.exp(-1j * g.k_fft * g.x[0] / HBAR)
        phi = np.fft.fft(self.amplitudes) * phase * g.dx / np.sqrt(2.0 * np.pi * HBAR)
        return np.fft.fftshift(phi)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    grid: Grid
    entries: np.ndarray
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        rho = np.asarray(self.entries, dtype=complex)
        n = self.grid.n
        if rho.shape != (n, n):
            raise ValueError(f"expected ({n}, {n}) entries, got {rho.shape}")
        if self.check:
            scale = max(1.0, float(np.max(np.abs(rho))))
            if np.max(np.abs(rho - rho.conj().T)) > 1e-10 * scale:
                raise ValueError("density matrix is not Hermitian")
            tr = trace(rho, self.grid)
            if abs(tr - 1.0) > 1e-8:
                raise NonNormalizedInputError(f"trace is {tr!r}, expected 1")
        rho.setflags(write=False)
        object.__setattr__(self, "entries", rho)

    @property
    def operator(self) -> np.ndarray:
        """Matrix of rho in the orthonormal lattice basis (dimensionless)."""
        return self.entries * self.grid.dx

    @property
    def trace(self) -> float:
        return trace(self.entries, self.grid)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.operator)


def trace(entries: np.ndarray, grid: Grid) -> float:
    return float(np.real(np.trace(entries)) * grid.dx)


def _gaussian_amplitudes(grid: Grid, center: float, momentum: float, sigma: float) -> np.ndarray:
    d = grid.wrapped(grid.x - center)
    norm = (2.0 * np.pi * sigma**2) ** -0.25
    return norm * np.exp(-(d**2) / (4.0 * sigma**2) + 1j * momentum * d / HBAR)


def make_gaussian(spec: GaussianSpec, grid: Grid) -> WaveFunction:
    """Normalized Gaussian packet exp[-(x-x0)^2/4 sigma^2 + i p0 (x-x0)/hbar].

    The distance to the centre is taken modulo the period, so translating the
    centre by a lattice multiple is an exact circular shift of the amplitudes.
    """
    sigma = spec.sigma
    if 4.0 * sigma >= grid.half_extent:
        raise PacketTooWideError(f"4*sigma = {4 * sigma:g} does not fit in L = {grid.half_extent:g}")
    if abs(spec.momentum) >= 0.8 * grid.p_nyquist:
        raise MomentumAliasingError(
            f"|p0| = {abs(spec.momentum):g} exceeds 0.8 * Nyquist = {0.8 * grid.p_nyquist:g}"
        )
    amps = _gaussian_amplitudes(grid, spec.center, spec.momentum, sigma)
    return WaveFunction(grid, _renormalize(amps, grid))


def make_cat(separation: float, width: float, phase: float, grid: Grid) -> WaveFunction:
    """Superposition (chi+ + e^{i phase} chi-)/N of two packets at -/+ separation/2.

    N includes the overlap of the two branches exactly:
    N^2 = 2 (1 + cos(phase) exp(-separation^2 / 8 width^2)).
    """
    if separation < 0 or not width > 0:
        raise ValueError("separation must be >= 0 and width > 0")
    if separation + 4.0 * width >= grid.half_extent:
        raise PacketTooWideError(
            f"separation + 4*width = {separation + 4 * width:g} does not fit in L = {grid.half_extent:g}"
        )
    plus = _gaussian_amplitudes(grid, -separation / 2.0, 0.0, width)
    minus = _gaussian_amplitudes(grid, separation / 2.0, 0.0, width)
    overlap = np.exp(-(separation**2) / (8.0 * width**2))
    norm_sq = 2.0 * (1.0 + np.cos(phase) * overlap)
    if norm_sq < 1e-14:
        raise ValueError("branches cancel exactly; the superposition has zero norm")
    amps = (plus + np.exp(1j * phase) * minus) / np.sqrt(norm_sq)
    return WaveFunction(grid, _renormalize(amps, grid))


def _renormalize(amps: np.ndarray, grid: Grid) -> np.ndarray:
    # analytic normalization is already exact to quadrature accuracy; this check
    # catches packets that are under-resolved on the lattice
    norm = np.sum(np.abs(amps) ** 2) * grid.dx
    if abs(norm - 1.0) > 1e-10:
        raise PacketTooWideError(f"packet is not resolved on the grid (discrete norm {norm:.12g})")
    return amps


def density_of(psi: WaveFunction) -> DensityMatrix:
    if abs(psi.norm - 1.0) > 1e-10:
        raise NonNormalizedInputError(f"wave function norm is {psi.norm!r}")
    a = psi.amplitudes
    return DensityMatrix(psi.grid, np.outer(a, a.conj()))


def mixture(components: Iterable[tuple[float, WaveFunction]]) -> DensityMatrix:
    """Convex combination sum_k w_k |psi_k><psi_k|; weights must sum to one."""
    components = list(components)
    if not components:
        raise ValueError("mixture needs at least one component")
    weights = np.array([w for w, _ in components], dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise NonNormalizedInputError("mixture weights must be nonnegative and sum to 1")
    grid = components[0][1].grid
    rho = np.zeros((grid.n, grid.n), dtype=complex)
    for w, psi in components:
        if psi.grid != grid:
            raise ValueError("all components must share one grid")
        rho += w * np.outer(psi.amplitudes, psi.amplitudes.conj())
    return DensityMatrix(grid, rho)


def purity(rho: DensityMatrix) -> float:
    """Tr rho^2 = sum_ij |rho(x_i, x_j)|^2 dx^2."""
    return float(np.sum(np.abs(rho.entries) ** 2) * rho.grid.dx**2)


def _operator_matrix(rho) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        return rho.operator
    return np.asarray(rho, dtype=complex)


def entropy_from_eigenvalues(eigenvalues: np.ndarray) -> float:
    lam = np.asarray(eigenvalues, dtype=float)
    lam = lam[lam > 0]
    # rounding can push a unit eigenvalue just above 1
    return max(0.0, float(-np.sum(lam * np.log2(lam))))


def von_neumann_entropy(rho) -> float:
    """-Tr rho lg rho in bits.

    Accepts a :class:`DensityMatrix` or a plain unit-trace operator matrix (e.g.
    a 4x4 qubit-pair state).  Eigenvalues in [-1e-6, 0) are treated as zero.
    """
    lam = np.linalg.eigvalsh(_operator_matrix(rho))
    if lam.min() < -NEGATIVITY_TOLERANCE:
        raise SignificantNegativityError(f"minimum eigenvalue {lam.min():.3e} < -{NEGATIVITY_TOLERANCE:g}")
    return entropy_from_eigenvalues(lam)


def position_marginal(rho: DensityMatrix) -> np.ndarray:
    return np.real(np.diag(rho.entries)).copy()


def moments(rho: DensityMatrix) -> dict[str, float]:
    """First and second phase-space moments <x>, <p>, <x^2>, <p^2>, <(xp+px)/2>."""
    g = rho.grid
    x = g.x
    diag = np.real(np.diag(rho.entries)) * g.dx
    # momentum-space kernel: fft along rows, inverse fft along columns
    rho_p = np.fft.fft(np.fft.ifft(rho.entries, axis=1), axis=0)
    k = g.k_fft
    # rho(p,p) up to normalization; normalize by its sum so Tr = 1 in p
    pdiag = np.real(np.diag(rho_p))
    pdiag = pdiag / pdiag.sum() * rho.trace
    # <(xp + px)/2> = Re Tr(x p rho); p rho via spectral derivative along rows
    dk = np.fft.ifft(1j * k[:, None] * np.fft.fft(rho.entries, axis=0), axis=0)
    p_rho = -1j * HBAR * dk
    xp = float(np.real(np.sum(x * np.diag(p_rho))) * g.dx)
    return {
        "x": float(np.sum(x * diag)),
        "p": float(np.sum(k * pdiag)),
        "x2": float(np.sum(x**2 * diag)),
        "p2": float(np.sum(k**2 * pdiag)),
        "xp": xp,
    }


def shift_circular(psi: WaveFunction, steps: int) -> WaveFunction:
    return WaveFunction(psi.grid, np.roll(psi.amplitudes, steps))


def combine_pure(weights: Sequence[complex], states: Sequence[WaveFunction]) -> WaveFunction:
    """Normalized coherent superposition of wave functions on a common grid."""
    grid = states[0].grid
    amps = sum(w * s.amplitudes for w, s in zip(weights, states))
    norm = np.sqrt(np.sum(np.abs(amps) ** 2) * grid.dx)
    return WaveFunction(grid, amps / norm)
