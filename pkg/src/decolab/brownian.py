"""High-temperature quantum Brownian motion on the position grid.

The master equation for rho(x, x') is

    d rho/dt = -(i/hbar)[H, rho] - gamma (x - x')(d/dx - d/dx') rho - (D/hbar^2)(x - x')^2 rho

with D = 2 m gamma k_B T.  :func:`evolve` integrates it with a symmetric
(second-order) splitting: potential and decoherence factors are diagonal in
(x, x') and applied exactly, the kinetic factor is diagonal in (p, p') and
applied exactly through FFTs, and the friction term is integrated with a
fourth-order Runge-Kutta substep in the mixed Fourier representation.
"""
from __future__ import annotations

import csv
import io
import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.constants
import scipy.fft as sfft

from .errors import GridEscapeError, HighTemperatureValidityWarning, StepTooLargeError
from .state import HBAR, DensityMatrix, Grid, entropy_from_eigenvalues, trace

ESCAPE_CELLS = 4
ESCAPE_TOLERANCE = 1e-6
TRACE_TOLERANCE = 1e-6

HBAR_SI = scipy.constants.hbar
KB_SI = scipy.constants.k


def fft_workers() -> int:
    """Thread cap for FFTs, from DECOLAB_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("DECOLAB_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class BathParams:
    """Particle mass and bath coupling.

    Either give ``temperature`` (then D = 2 m gamma T) or give ``diffusion``
    directly, e.g. to switch friction off while keeping decoherence.
    ``mass = inf`` removes the kinetic term.
    """

    mass: float = 1.0
    gamma: float = 0.0
    temperature: float | None = None
    diffusion: float | None = None

    def __post_init__(self):
        if not self.mass > 0 or self.gamma < 0:
            raise ValueError("mass must be positive and gamma nonnegative")
        if self.temperature is not None and self.temperature < 0:
            raise ValueError("temperature must be nonnegative")
        derived = None
        if self.temperature is not None and math.isfinite(self.mass):
            derived = 2.0 * self.mass * self.gamma * self.temperature
        if self.diffusion is None:
            object.__setattr__(self, "diffusion", derived if derived is not None else 0.0)
        elif derived is not None and not math.isclose(self.diffusion, derived, rel_tol=1e-12, abs_tol=1e-300):
            raise ValueError(f"diffusion {self.diffusion} disagrees with 2 m gamma T = {derived}")
        if self.diffusion < 0:
            raise ValueError("diffusion must be nonnegative")

    @classmethod
    def from_temperature(cls, mass: float, gamma: float, temperature: float) -> "BathParams":
        return cls(mass=mass, gamma=gamma, temperature=temperature)

    @property
    def viscosity(self) -> float:
        return 2.0 * self.mass * self.gamma

    def scaled(self, factor: float) -> "BathParams":
        """Same bath with gamma and D both multiplied by ``factor``."""
        if self.temperature is not None:
            return BathParams(self.mass, self.gamma * factor, self.temperature)
        return BathParams(self.mass, self.gamma * factor, diffusion=self.diffusion * factor)


@dataclass(frozen=True)
class PotentialSpec:
    """V(x, t) = sum_k c_k x^k + F x cos(omega t), k <= 4."""

    coefficients: tuple[float, ...] = (0.0,)
    drive_amplitude: float = 0.0
    drive_frequency: float = 0.0

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        if len(coeffs) > 5:
            raise ValueError("at most quartic potentials are supported")
        if not all(math.isfinite(c) for c in coeffs):
            raise ValueError("potential coefficients must be finite")
        object.__setattr__(self, "coefficients", coeffs or (0.0,))

    @classmethod
    def harmonic(cls, mass: float, omega: float, **drive) -> "PotentialSpec":
        return cls((0.0, 0.0, 0.5 * mass * omega**2), **drive)

    @classmethod
    def double_well(cls, a: float, b: float, drive_amplitude: float = 0.0, drive_frequency: float = 0.0):
        """-a x^2 + b x^4 + F x cos(omega t)."""
        return cls((0.0, 0.0, -a, 0.0, b), drive_amplitude, drive_frequency)

    @property
    def driven(self) -> bool:
        return self.drive_amplitude != 0.0

    def static(self, x) -> np.ndarray:
        return np.polynomial.polynomial.polyval(x, self.coefficients)

    def derivative(self, x, order: int = 1) -> np.ndarray:
        """Derivative of the static (undriven) part."""
        c = np.polynomial.polynomial.polyder(self.coefficients, order)
        if len(c) == 0:
            c = [0.0]
        return np.polynomial.polynomial.polyval(x, c) * np.ones_like(np.asarray(x, dtype=float))

    def drive(self, t: float) -> float:
        return self.drive_amplitude * math.cos(self.drive_frequency * t)

    def value(self, x, t: float = 0.0) -> np.ndarray:
        return self.static(x) + self.drive(t) * np.asarray(x)

    def force(self, x, t: float = 0.0) -> np.ndarray:
        return -(self.derivative(x, 1) + self.drive(t))

    def drive_integral(self, t0: float, t1: float) -> float:
        """Integral of F cos(omega t) over [t0, t1]."""
        if self.drive_frequency == 0.0:
            return self.drive_amplitude * (t1 - t0)
        w = self.drive_frequency
        return self.drive_amplitude * (math.sin(w * t1) - math.sin(w * t0)) / w

    def is_quadratic(self) -> bool:
        return all(c == 0.0 for c in self.coefficients[3:])


@dataclass
class EvolutionResult:
    times: np.ndarray
    states: list[DensityMatrix]
    diagnostics: dict[str, np.ndarray] = field(default_factory=dict)
    dt: float = 0.0
    state_times: np.ndarray | None = None

    def __post_init__(self):
        if self.state_times is None:
            self.state_times = np.asarray(self.times)[: len(self.states)]

    def __len__(self):
        return len(self.times)

    def final(self) -> DensityMatrix:
        return self.states[-1]

    def series(self) -> dict[str, np.ndarray]:
        return {"t": self.times, **self.diagnostics}


def max_stable_dt(grid: Grid, bath: BathParams, potential: PotentialSpec) -> float:
    """Largest dt allowed by the resolution precondition.

    dt <= 0.1 min(1/omega_max, hbar^2/(D (2L)^2), 1/gamma), where omega_max is
    the fastest classical frequency the potential can impose on the grid
    (sqrt(max|V''|/m)) or the drive frequency, whichever is larger.
    """
    limits = []
    if math.isfinite(bath.mass):
        curvature = float(np.max(np.abs(potential.derivative(grid.x, 2))))
        omega_max = max(math.sqrt(curvature / bath.mass), abs(potential.drive_frequency))
        if omega_max > 0:
            limits.append(1.0 / omega_max)
    if bath.diffusion > 0:
        limits.append(HBAR**2 / (bath.diffusion * (2.0 * grid.half_extent) ** 2))
    if bath.gamma > 0:
        limits.append(1.0 / bath.gamma)
        # RK4 friction substep: keep gamma * dt * |x - x'| * |k + k'| well inside the stability region
        limits.append(1.0 / (bath.gamma * 2.0 * grid.half_extent * 2.0 * grid.p_nyquist / HBAR))
    return 0.1 * min(limits) if limits else math.inf


def _check_bath(bath: BathParams) -> None:
    if bath.temperature is not None and bath.gamma > 0 and HBAR * bath.gamma > 0.1 * bath.temperature:
        warnings.warn(
            f"hbar*gamma = {HBAR * bath.gamma:g} is not small against k_B T = {bath.temperature:g}; "
            "the high-temperature master equation may be inaccurate",
            HighTemperatureValidityWarning,
            stacklevel=3,
        )


class _Stepper:
    """Split-step propagator for one (grid, bath, potential, dt) combination."""

    def __init__(self, grid: Grid, bath: BathParams, potential: PotentialSpec, dt: float):
        self.grid, self.bath, self.potential, self.dt = grid, bath, potential, dt
        x = grid.x
        k = grid.k_fft
        self.workers = fft_workers()
        v = x[:, None] - x[None, :]
        self.v = v
        self.k_sum = 1j * (k[:, None] + k[None, :])
        if math.isfinite(bath.mass):
            e = k**2 / (2.0 * bath.mass * HBAR)
            self.kinetic = np.exp(-1j * dt * (e[:, None] - e[None, :]))
            self.kinetic_half = np.exp(-0.5j * dt * (e[:, None] - e[None, :]))
        else:
            self.kinetic = self.kinetic_half = None
        D = bath.diffusion
        self.deco_half = np.exp(-D * v**2 * (dt / 2.0) / HBAR**2) if D > 0 else None
        self.deco_full = self.deco_half**2 if D > 0 else None
        self.v_static = potential.static(x)

    def _potential_factor(self, t0: float, t1: float, decoherence) -> np.ndarray:
        phase = self.v_static * (t1 - t0) + self.grid.x * self.potential.drive_integral(t0, t1)
        u = np.exp(-1j * phase / HBAR)
        factor = np.outer(u, u.conj())
        if decoherence is not None:
            factor *= decoherence
        return factor

    def _to_momentum(self, rho):
        return sfft.fft(sfft.ifft(rho, axis=1, workers=self.workers), axis=0, workers=self.workers)

    def _from_momentum(self, rho_p):
        return sfft.ifft(sfft.fft(rho_p, axis=1, workers=self.workers), axis=0, workers=self.workers)

    def _friction_rhs(self, rho):
        grad = self._from_momentum(self.k_sum * self._to_momentum(rho))
        return -self.bath.gamma * self.v * grad

    def _friction(self, rho, h):
        f = self._friction_rhs
        k1 = f(rho)
        k2 = f(rho + 0.5 * h * k1)
        k3 = f(rho + 0.5 * h * k2)
        k4 = f(rho + h * k3)
        return rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def advance(self, rho: np.ndarray, t: float, nsteps: int) -> np.ndarray:
        """Advance ``nsteps`` steps from time ``t``; the half-step potential factors
        of adjacent steps are merged."""
        dt = self.dt
        friction = self.bath.gamma > 0
        rho = rho * self._potential_factor(t, t + dt / 2.0, self.deco_half)
        for step in range(nsteps):
            t0 = t + step * dt
            if friction:
                if self.kinetic is not None:
                    rho = self._from_momentum(self.kinetic_half * self._to_momentum(rho))
                rho = self._friction(rho, dt)
                if self.kinetic is not None:
                    rho = self._from_momentum(self.kinetic_half * self._to_momentum(rho))
            elif self.kinetic is not None:
                rho = self._from_momentum(self.kinetic * self._to_momentum(rho))
            if step < nsteps - 1:
                rho *= self._potential_factor(t0 + dt / 2.0, t0 + 1.5 * dt, self.deco_full)
            else:
                rho *= self._potential_factor(t0 + dt / 2.0, t0 + dt, self.deco_half)
        return rho


def energy(rho: np.ndarray, grid: Grid, bath: BathParams, potential: PotentialSpec, t: float) -> float:
    """<H> = Tr(rho (p^2/2m + V(x, t)))."""
    diag = np.real(np.diag(rho)) * grid.dx
    e = float(np.sum(diag * potential.value(grid.x, t)))
    if math.isfinite(bath.mass):
        k = grid.k_fft
        rho_p = np.fft.fft(np.fft.ifft(rho, axis=1), axis=0)
        pdiag = np.real(np.diag(rho_p)) * grid.dx
        e += float(np.sum(k**2 / (2.0 * bath.mass) * pdiag))
    return e


def boundary_probability(rho: np.ndarray, grid: Grid) -> float:
    diag = np.real(np.diag(rho)) * grid.dx
    return float(diag[:ESCAPE_CELLS].sum() + diag[-ESCAPE_CELLS:].sum())


def snapshot_diagnostics(
    rho: np.ndarray, grid: Grid, bath: BathParams, potential: PotentialSpec, t: float, spectral: bool = True
) -> dict[str, float]:
    out = {
        "purity": float(np.sum(np.abs(rho) ** 2) * grid.dx**2),
        "trace_error": abs(trace(rho, grid) - 1.0),
        "hermiticity_error": float(np.max(np.abs(rho - rho.conj().T))),
        "energy": energy(rho, grid, bath, potential, t),
    }
    if spectral:
        lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T) * grid.dx)
        out["min_eigenvalue"] = float(lam[0])
        out["entropy"] = entropy_from_eigenvalues(lam)
    return out


def evolve(
    rho0: DensityMatrix,
    bath: BathParams,
    potential: PotentialSpec,
    t_final: float,
    dt: float | None = None,
    save_every: int | None = None,
    spectral_diagnostics: bool = True,
    check_escape: bool = True,
    keep_states: bool | int = True,
) -> EvolutionResult:
    """Integrate the master equation from ``rho0`` to ``t_final``.

    ``dt`` defaults to the largest step allowed by :func:`max_stable_dt`; the
    step is shrunk so that an integer number of steps reaches ``t_final``.
    Diagnostics are recorded every ``save_every`` steps (default: start and end only).
    ``keep_states`` keeps every snapshot (True), only the final one (False) or
    every k-th snapshot (an integer k); the final state is always kept.
    """
    grid = rho0.grid
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    bound = max_stable_dt(grid, bath, potential)
    if dt is None:
        dt = min(bound, t_final)
    if dt <= 0:
        raise ValueError("dt must be positive")
    if dt > bound * (1.0 + 1e-12):
        raise StepTooLargeError(f"dt = {dt:g} exceeds the resolution bound {bound:g}")
    _check_bath(bath)
    nsteps = max(1, math.ceil(t_final / dt - 1e-9))
    dt = t_final / nsteps
    save_every = nsteps if save_every is None else max(1, int(save_every))

    stepper = _Stepper(grid, bath, potential, dt)
    rho = np.array(rho0.entries, dtype=complex)
    stride = 1 if keep_states is True else (0 if keep_states is False else max(1, int(keep_states)))
    times = [0.0]
    states = [rho0]
    state_times = [0.0]
    diag = [snapshot_diagnostics(rho, grid, bath, potential, 0.0, spectral_diagnostics)]
    done = 0
    while done < nsteps:
        chunk = min(save_every, nsteps - done)
        rho = stepper.advance(rho, done * dt, chunk)
        done += chunk
        t = done * dt
        if not np.all(np.isfinite(rho)):
            raise FloatingPointError(f"non-finite density matrix at t = {t:g}")
        if check_escape and boundary_probability(rho, grid) > ESCAPE_TOLERANCE:
            raise GridEscapeError(
                f"probability {boundary_probability(rho, grid):.3e} within {ESCAPE_CELLS} cells of the boundary at t = {t:g}"
            )
        times.append(t)
        index = len(times) - 1
        if done == nsteps or (stride and index % stride == 0):
            states.append(DensityMatrix(grid, rho.copy(), check=False))
            state_times.append(t)
        diag.append(snapshot_diagnostics(rho, grid, bath, potential, t, spectral_diagnostics))
    keys = diag[0].keys()
    diagnostics = {key: np.array([d[key] for d in diag]) for key in keys}
    return EvolutionResult(np.array(times), states, diagnostics, dt, np.array(state_times))


def master_generator(rho: np.ndarray, grid: Grid, bath: BathParams, potential: PotentialSpec, t: float = 0.0):
    """Right-hand side d rho/dt of the master equation, evaluated spectrally."""
    x = grid.x
    k = grid.k_fft
    rho = np.asarray(rho, dtype=complex)
    v = x[:, None] - x[None, :]
    pot = potential.value(x, t)
    out = -1j / HBAR * (pot[:, None] - pot[None, :]) * rho
    rho_p = np.fft.fft(np.fft.ifft(rho, axis=1), axis=0)
    if math.isfinite(bath.mass):
        e = k**2 / (2.0 * bath.mass)
        out += np.fft.ifft(np.fft.fft(-1j / HBAR * (e[:, None] - e[None, :]) * rho_p, axis=1), axis=0)
    if bath.gamma > 0:
        grad = np.fft.ifft(np.fft.fft(1j * (k[:, None] + k[None, :]) * rho_p, axis=1), axis=0)
        out -= bath.gamma * v * grad
    out -= bath.diffusion / HBAR**2 * v**2 * rho
    return out


def fringe_decay_rate(bath: BathParams, separation: float) -> float:
    """Decay rate 2 m gamma k_B T (dx)^2 / hbar^2 = D dx^2 / hbar^2 of the off-diagonal peaks."""
    if separation < 0:
        raise ValueError("separation must be nonnegative")
    return bath.diffusion * separation**2 / HBAR**2


@dataclass(frozen=True)
class DecoherenceTimescale:
    tau_d: float
    thermal_wavelength: float
    ratio: float


def decoherence_time(mass: float, temperature: float, relaxation_time: float, separation: float) -> DecoherenceTimescale:
    """Decoherence time in SI units: tau_D = tau_R (lambda_dB / dx)^2."""
    for name, value in (("mass", mass), ("temperature", temperature), ("relaxation_time", relaxation_time), ("separation", separation)):
        if not value > 0:
            raise ValueError(f"{name} must be positive")
    lam = HBAR_SI / math.sqrt(2.0 * mass * KB_SI * temperature)
    ratio = (lam / separation) ** 2
    return DecoherenceTimescale(relaxation_time * ratio, lam, ratio)


@dataclass(frozen=True)
class Scenario:
    name: str
    mass: float
    temperature: float
    relaxation_time: float
    separation: float


DEFAULT_SCENARIOS = (
    Scenario("gram_centimeter_300K", 1e-3, 300.0, 1e17, 1e-2),
    Scenario("electron_atomic_300K", 1e-30, 300.0, 1e17, 1e-10),
)

TIMESCALE_COLUMNS = ("name", "mass_kg", "temperature_K", "tau_R_s", "separation_m", "lambda_dB_m", "tau_D_s", "ratio")


def timescale_rows(scenarios: Iterable[Scenario]) -> list[dict]:
    rows = []
    for s in scenarios:
        r = decoherence_time(s.mass, s.temperature, s.relaxation_time, s.separation)
        rows.append(
            dict(
                name=s.name,
                mass_kg=s.mass,
                temperature_K=s.temperature,
                tau_R_s=s.relaxation_time,
                separation_m=s.separation,
                lambda_dB_m=r.thermal_wavelength,
                tau_D_s=r.tau_d,
                ratio=r.ratio,
            )
        )
    return rows


def timescale_report(scenarios: Sequence[Scenario]) -> str:
    """CSV table of decoherence timescales, one row per scenario."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(TIMESCALE_COLUMNS)
    for row in timescale_rows(scenarios):
        writer.writerow([row[c] if isinstance(row[c], str) else f"{row[c]:.17g}" for c in TIMESCALE_COLUMNS])
    return buf.getvalue()
