"""Wigner transforms on the square (x, p) lattice, closed forms and phase-space diagnostics.

Convention: W(x, p) = (1/2 pi hbar) int exp(i p y/hbar) rho(x - y/2, x + y/2) dy.

The discrete transform samples the anti-diagonal coordinate y at spacing dx.
Even multiples of dx land on lattice points of rho; odd multiples need rho at
half-cell offsets, which are obtained by band-limited (spectral) interpolation
of rho shifted by dx/2 along both arguments.  Index pairs outside the lattice
are treated as zero rather than wrapped.  The momentum axis equals the grid's
momentum lattice, so W is an n x n array with rows indexed by x and columns by
ascending p.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoFringeDetectedError
from .state import HBAR, DensityMatrix, GaussianSpec, Grid

FRINGE_THRESHOLD = 1e-6


@dataclass(frozen=True, eq=False)
class WignerGrid:
    grid: Grid
    values: np.ndarray
    imag_residue: float = 0.0

    def __post_init__(self):
        w = np.asarray(self.values, dtype=float)
        if w.shape != (self.grid.n, self.grid.n):
            raise ValueError(f"expected ({self.grid.n}, {self.grid.n}) values, got {w.shape}")
        w.setflags(write=False)
        object.__setattr__(self, "values", w)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def p(self) -> np.ndarray:
        return self.grid.p

    @property
    def cell(self) -> float:
        return self.grid.dx * self.grid.dp

    def integral(self) -> float:
        return float(self.values.sum() * self.cell)


def _half_shift(a: np.ndarray, axis: int, direction: float) -> np.ndarray:
    """Band-limited shift by ``direction`` * dx/2 along ``axis`` (index units)."""
    n = a.shape[axis]
    kappa = 2.0 * np.pi * np.fft.fftfreq(n)
    factor = np.exp(1j * kappa * direction / 2.0)
    # keep the interpolation kernel real: the Nyquist mode has no definite sign
    factor[n // 2] = np.cos(np.pi * direction / 2.0)
    shape = [1] * a.ndim
    shape[axis] = n
    return np.fft.ifft(np.fft.fft(a, axis=axis) * factor.reshape(shape), axis=axis)


def _antidiagonal_indices(n: int):
    i = np.arange(n)[:, None]
    m = np.arange(-n, n)[None, :]
    odd = (m % 2) == 1
    a = np.where(odd, i - (m + 1) // 2, i - m // 2)
    b = np.where(odd, i + (m - 1) // 2, i + m // 2)
    valid = (a >= 0) & (a < n) & (b >= 0) & (b < n) & (m > -n)
    return a, b, odd, valid


def _chord_samples(rho: np.ndarray) -> np.ndarray:
    """f[i, r] = sum over m = r (mod n) of rho(x_i - m dx/2, x_i + m dx/2)."""
    n = rho.shape[0]
    shifted = _half_shift(_half_shift(rho, 0, 1.0), 1, 1.0)
    a, b, odd, valid = _antidiagonal_indices(n)
    ac, bc = np.clip(a, 0, n - 1), np.clip(b, 0, n - 1)
    f = np.where(odd, shifted[ac, bc], rho[ac, bc])
    f = np.where(valid, f, 0.0)
    return f[:, :n] + f[:, n:]


def wigner_of_density(rho: DensityMatrix) -> WignerGrid:
    grid = rho.grid
    n = grid.n
    g = _chord_samples(np.asarray(rho.entries, dtype=complex))
    w = np.fft.fftshift(np.fft.ifft(g, axis=1), axes=1) * (n * grid.dx / (2.0 * np.pi * HBAR))
    return WignerGrid(grid, w.real, float(np.max(np.abs(w.imag))))


def density_of_wigner(w: WignerGrid) -> DensityMatrix:
    """Inverse transform; assumes coherences vanish beyond |x - x'| >= L."""
    grid = w.grid
    n = grid.n
    g = np.fft.fft(np.fft.ifftshift(w.values, axes=1), axis=1) * (2.0 * np.pi * HBAR / (n * grid.dx))
    rho = np.zeros((n, n), dtype=complex)
    shifted = np.zeros((n, n), dtype=complex)
    a, b, odd, valid = _antidiagonal_indices(n)
    m = np.broadcast_to(np.arange(-n, n)[None, :], a.shape)
    keep = valid & (np.abs(m) < n // 2)
    r = m % n
    rows = np.broadcast_to(np.arange(n)[:, None], a.shape)
    vals = g[rows, r]
    even_sel = keep & ~odd
    odd_sel = keep & odd
    rho[a[even_sel], b[even_sel]] = vals[even_sel]
    shifted[a[odd_sel], b[odd_sel]] = vals[odd_sel]
    # odd-sum sublattice: shifted holds rho half a cell further along the diagonal
    idx = np.arange(n)
    for offset in range(1, n // 2, 2):
        for sign in (1, -1):
            cols = (idx + sign * offset) % n
            line = shifted[idx, cols]
            rho[idx, cols] = _half_shift(line, 0, -1.0)
    return DensityMatrix(grid, rho, check=False)


def gaussian_wigner_closed_form(spec: GaussianSpec, grid: Grid) -> WignerGrid:
    """(1/pi hbar) exp[-(x-x0)^2 / 2 sigma^2 - 2 sigma^2 (p-p0)^2 / hbar^2].

    ``sigma`` is the position standard deviation of the packet built by
    :func:`decolab.state.make_gaussian` from the same spec; in the
    width convention where |psi|^2 ~ exp(-(x-x0)^2/delta^2) this is delta = sqrt(2) sigma.
    """
    s = spec.sigma
    dx = grid.wrapped(grid.x - spec.center)[:, None]
    dp = (grid.p - spec.momentum)[None, :]
    w = np.exp(-(dx**2) / (2.0 * s**2) - 2.0 * s**2 * dp**2 / HBAR**2) / (np.pi * HBAR)
    return WignerGrid(grid, w)


def cat_wigner_closed_form(separation: float, width: float, grid: Grid, phase: float = 0.0) -> WignerGrid:
    """Wigner function of the exactly normalized two-packet superposition.

    Two Gaussian lobes at x = -/+ separation/2 plus the interference term
    2 exp[-x^2/2 w^2 - 2 w^2 p^2/hbar^2] cos(p separation/hbar - phase)/(pi hbar),
    all divided by N^2 = 2 (1 + cos(phase) exp(-separation^2 / 8 w^2)).
    """
    s = width
    x = grid.x[:, None]
    p = grid.p[None, :]
    momentum_env = np.exp(-2.0 * s**2 * p**2 / HBAR**2)
    lobes = np.exp(-((x + separation / 2.0) ** 2) / (2.0 * s**2)) + np.exp(-((x - separation / 2.0) ** 2) / (2.0 * s**2))
    fringe = 2.0 * np.exp(-(x**2) / (2.0 * s**2)) * np.cos(p * separation / HBAR - phase)
    norm_sq = 2.0 * (1.0 + np.cos(phase) * np.exp(-(separation**2) / (8.0 * s**2)))
    return WignerGrid(grid, (lobes + fringe) * momentum_env / (np.pi * HBAR * norm_sq))


def marginals(w: WignerGrid) -> tuple[np.ndarray, np.ndarray]:
    """(P(x), P(p)) by Riemann sums over the other axis."""
    return w.values.sum(axis=1) * w.grid.dp, w.values.sum(axis=0) * w.grid.dx


def negativity_volume(w: WignerGrid) -> float:
    return float(np.sum(np.clip(-w.values, 0.0, None)) * w.cell)


def purity_from_wigner(w: WignerGrid) -> float:
    return float(2.0 * np.pi * HBAR * np.sum(w.values**2) * w.cell)


def fringe_wavelength(w: WignerGrid, x: float = 0.0) -> float:
    """Dominant momentum-direction oscillation period of the slice nearest ``x``.

    The slice W(x, .) is the discrete Fourier image of rho(x - y/2, x + y/2), so its
    spectrum is indexed by the chord length y = m dx; the strongest secondary peak
    beyond the central lobe gives the wavelength 2 pi hbar / y.
    """
    grid = w.grid
    i = int(np.argmin(np.abs(grid.x - x)))
    spectrum = np.abs(np.fft.fft(w.values[i]))[: grid.n // 2 + 1]
    if spectrum[0] <= 0:
        raise NoFringeDetectedError("slice carries no weight")
    m = 1
    while m < len(spectrum) - 1 and spectrum[m + 1] < spectrum[m]:
        m += 1
    if m >= len(spectrum) - 1:
        raise NoFringeDetectedError("slice spectrum decays monotonically")
    peak = m + int(np.argmax(spectrum[m:]))
    if spectrum[peak] < FRINGE_THRESHOLD * spectrum[0] or peak >= len(spectrum) - 1:
        raise NoFringeDetectedError("no oscillatory component above threshold")
    return 2.0 * np.pi * HBAR / (peak * grid.dx)


def sub_planck_action(action: float) -> float:
    """Smallest phase-space structure a ~ hbar^2/A for a state of classical action A."""
    if not action > 0:
        raise ValueError("action must be positive")
    return HBAR**2 / action


@dataclass(frozen=True)
class PhaseSpaceDiagnostics:
    negativity: float
    fringe_wavelength: float | None
    sub_planck_action: float | None
    purity: float


def diagnostics(w: WignerGrid, action: float | None = None, x: float = 0.0) -> PhaseSpaceDiagnostics:
    try:
        wavelength = fringe_wavelength(w, x)
    except NoFringeDetectedError:
        wavelength = None
    return PhaseSpaceDiagnostics(
        negativity_volume(w),
        wavelength,
        sub_planck_action(action) if action is not None else None,
        purity_from_wigner(w),
    )
