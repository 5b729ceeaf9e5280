"""Phase-space dynamics: open quantum evolution seen through the Wigner function,
a classical Langevin comparator, and the driven double-well chaos experiment.

Quantum runs always evolve rho(x, x') with :func:`decolab.brownian.evolve` and
transform snapshots to phase space.  The phase-space equation

    dW/dt = -(p/m) dW/dx + V'(x) dW/dp + 2 gamma d(pW)/dp + D d^2W/dp^2

is only used as a residual check, where it is exact (quadratic V).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.ndimage import gaussian_filter

from . import kernels
from .brownian import BathParams, EvolutionResult, PotentialSpec, evolve, master_generator, max_stable_dt
from .errors import StepTooLargeError, ThirdDerivativeVanishesError
from .state import HBAR, DensityMatrix, GaussianSpec, Grid, density_of, make_gaussian
from .wigner import WignerGrid, negativity_volume, wigner_of_density

NOISE_CHUNK = 32
NOISE_STREAM = 1


@dataclass(frozen=True)
class ChaosConfig:
    """Driven double well H = p^2/2m - a x^2 + b x^4 + F x cos(omega t).

    ``initial_width`` defaults to the coherent width sqrt(hbar / 2 m omega_well)
    of the linearized well.  ``a`` may be negative (with ``b = 0``) to obtain a
    confining harmonic well.
    """

    mass: float = 1.0
    a: float = 10.0
    b: float = 0.5
    drive_amplitude: float = 10.0
    drive_frequency: float = 6.07
    diffusion: float = 0.025
    n_periods: int = 8
    grid_points: int = 512
    half_extent: float = 8.0
    ensemble_size: int = 100_000
    initial_center: float = 0.0
    initial_momentum: float = 0.0
    initial_width: float | None = None
    seed: int = 0
    smoothing_cells: float = 1.0
    lyapunov_periods: int = 200
    lyapunov_transient: int = 10
    lyapunov_samples: int = 20
    lyapunov_steps_per_period: int = 400
    classical_steps_per_period: int = 200
    transient_periods: float = 2.0
    entropy_samples_per_period: int = 8
    chi_point: float = 1.0

    def __post_init__(self):
        if not (self.mass > 0 and self.drive_frequency > 0 and self.n_periods > 0):
            raise ValueError("mass, drive frequency and period count must be positive")
        if self.diffusion < 0 or self.drive_amplitude < 0 or self.b < 0:
            raise ValueError("diffusion, drive amplitude and quartic coefficient must be nonnegative")
        if self.b == 0 and self.a >= 0:
            raise ValueError("potential must confine: need b > 0 or a < 0")
        if self.ensemble_size < 1 or self.lyapunov_samples < 1:
            raise ValueError("ensemble sizes must be positive")

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.drive_frequency

    @property
    def grid(self) -> Grid:
        return Grid(self.grid_points, self.half_extent)

    def potential(self) -> PotentialSpec:
        return PotentialSpec.double_well(self.a, self.b, self.drive_amplitude, self.drive_frequency)

    def bath(self, diffusion: float | None = None) -> BathParams:
        return BathParams(self.mass, 0.0, diffusion=self.diffusion if diffusion is None else diffusion)

    @property
    def well_frequency(self) -> float:
        if self.b > 0 and self.a > 0:
            curvature = 8.0 * self.a  # V'' at the minima x^2 = a / 2b
        else:
            curvature = -2.0 * self.a
        return math.sqrt(curvature / self.mass)

    def initial_spec(self) -> GaussianSpec:
        width = self.initial_width or math.sqrt(HBAR / (2.0 * self.mass * self.well_frequency))
        return GaussianSpec(self.initial_center, self.initial_momentum, width)


@dataclass
class ClassicalEnsemble:
    """Equal-weight phase-space samples."""

    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.x = np.ascontiguousarray(self.x, dtype=float)
        self.p = np.ascontiguousarray(self.p, dtype=float)
        if self.x.shape != self.p.shape or self.x.ndim != 1:
            raise ValueError("x and p must be equal-length vectors")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.p))):
            raise ValueError("ensemble coordinates must be finite")

    def __len__(self):
        return len(self.x)

    @classmethod
    def from_gaussian(cls, spec: GaussianSpec, size: int, seed: int = 0) -> "ClassicalEnsemble":
        """Samples of the (positive) Wigner function of the Gaussian packet ``spec``."""
        rng = np.random.default_rng(seed)
        sigma = spec.sigma
        x = rng.normal(spec.center, sigma, size)
        p = rng.normal(spec.momentum, HBAR / (2.0 * sigma), size)
        return cls(x, p)

    def copy(self) -> "ClassicalEnsemble":
        return ClassicalEnsemble(self.x.copy(), self.p.copy())

    def moments(self) -> dict[str, float]:
        return {
            "x": float(self.x.mean()),
            "p": float(self.p.mean()),
            "x2": float(np.mean(self.x**2)),
            "p2": float(np.mean(self.p**2)),
            "xp": float(np.mean(self.x * self.p)),
        }

    def density_on(self, grid: Grid, smoothing_cells: float = 1.0) -> WignerGrid:
        """Histogram on the Wigner lattice, smoothed by a Gaussian of ``smoothing_cells`` cells."""
        x_edges = np.append(grid.x - grid.dx / 2.0, grid.x[-1] + grid.dx / 2.0)
        p_edges = np.append(grid.p - grid.dp / 2.0, grid.p[-1] + grid.dp / 2.0)
        counts, _, _ = np.histogram2d(self.x, self.p, bins=(x_edges, p_edges))
        if smoothing_cells > 0:
            counts = gaussian_filter(counts, smoothing_cells, mode="constant")
        return WignerGrid(grid, counts / (len(self) * grid.dx * grid.dp))


@dataclass
class ClassicalSeries:
    times: np.ndarray
    ensembles: list[ClassicalEnsemble]
    dt: float

    def final(self) -> ClassicalEnsemble:
        return self.ensembles[-1]


def classical_dt_bound(potential: PotentialSpec, mass: float, gamma: float, reach: float) -> float:
    """0.1 min(1/omega_max, 1/gamma) with omega_max from |V''| over |x| <= reach and the drive."""
    xs = np.linspace(-reach, reach, 2001)
    omega = max(math.sqrt(float(np.max(np.abs(potential.derivative(xs, 2)))) / mass), abs(potential.drive_frequency))
    limits = [1.0 / omega] if omega > 0 else []
    if gamma > 0:
        limits.append(1.0 / gamma)
    return 0.1 * min(limits) if limits else math.inf


def _force_coefficients(potential: PotentialSpec, order: int) -> np.ndarray:
    coeffs = np.polynomial.polynomial.polyder(np.asarray(potential.coefficients, dtype=float), order)
    return np.ascontiguousarray(coeffs if len(coeffs) else [0.0], dtype=float)


def evolve_classical(
    ensemble0: ClassicalEnsemble,
    bath: BathParams,
    potential: PotentialSpec,
    t_final: float,
    seed: int = 0,
    dt: float | None = None,
    save_every: int | None = None,
    backend: str = "auto",
) -> ClassicalSeries:
    """Langevin ensemble: dx = p/m dt, dp = (-V' - 2 gamma p) dt + sqrt(2D) dW.

    Integrated with the BAOAB splitting (exact Ornstein-Uhlenbeck momentum
    substep); with gamma = D = 0 it is the symplectic velocity Verlet map.
    Identical inputs and seed give bit-identical output on a given backend.
    """
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    impl = kernels.get_backend(backend)
    reach = max(1.0, 2.0 * float(np.max(np.abs(ensemble0.x))))
    bound = classical_dt_bound(potential, bath.mass, bath.gamma, reach)
    if dt is None:
        dt = min(bound, t_final)
    if dt > bound * (1.0 + 1e-12):
        raise StepTooLargeError(f"dt = {dt:g} exceeds the stability bound {bound:g}")
    nsteps = max(1, math.ceil(t_final / dt - 1e-9))
    dt = t_final / nsteps
    save_every = nsteps if save_every is None else max(1, int(save_every))
    force = _force_coefficients(potential, 1)
    # child stream, so the noise never repeats draws made by from_gaussian(seed)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(NOISE_STREAM,)))
    state = ensemble0.copy()
    times, ensembles = [0.0], [ensemble0.copy()]
    done = 0
    while done < nsteps:
        target = min(nsteps, (done // save_every + 1) * save_every)
        while done < target:
            chunk = min(NOISE_CHUNK, target - done)
            noise = rng.standard_normal((chunk, len(state)))
            impl.langevin_steps(
                state.x, state.p, noise, done * dt, dt, bath.mass, bath.gamma, bath.diffusion,
                force, potential.drive_amplitude, potential.drive_frequency,
            )
            done += chunk
        if not (np.all(np.isfinite(state.x)) and np.all(np.isfinite(state.p))):
            raise FloatingPointError(f"non-finite trajectory at t = {done * dt:g}")
        times.append(done * dt)
        ensembles.append(state.copy())
    return ClassicalSeries(np.array(times), ensembles, dt)


def evolve_open_quantum(
    rho0: DensityMatrix,
    bath: BathParams,
    potential: PotentialSpec,
    t_final: float,
    **kwargs,
) -> tuple[EvolutionResult, list[WignerGrid]]:
    """Evolve rho(x, x') and return the Wigner function of every kept snapshot."""
    result = evolve(rho0, bath, potential, t_final, **kwargs)
    return result, [wigner_of_density(s) for s in result.states]


def _spectral_derivative(values: np.ndarray, spacing: float, axis: int, order: int) -> np.ndarray:
    n = values.shape[axis]
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=spacing)
    factor = (1j * k) ** order
    if order % 2:
        factor[n // 2] = 0.0
    shape = [1] * values.ndim
    shape[axis] = n
    return np.real(np.fft.ifft(np.fft.fft(values, axis=axis) * factor.reshape(shape), axis=axis))


def phase_space_rhs(w: WignerGrid, bath: BathParams, potential: PotentialSpec, t: float = 0.0) -> np.ndarray:
    """Right-hand side of the phase-space equation (Liouville, friction, momentum diffusion)."""
    grid = w.grid
    values = w.values
    x = grid.x[:, None]
    p = grid.p[None, :]
    d_dx = _spectral_derivative(values, grid.dx, 0, 1)
    d_dp = _spectral_derivative(values, grid.dp, 1, 1)
    slope = potential.derivative(grid.x, 1)[:, None] + potential.drive_amplitude * math.cos(potential.drive_frequency * t)
    out = slope * d_dp
    if math.isfinite(bath.mass):
        out = out - p / bath.mass * d_dx
    if bath.gamma > 0:
        out = out + 2.0 * bath.gamma * _spectral_derivative(p * values, grid.dp, 1, 1)
    if bath.diffusion > 0:
        out = out + bath.diffusion * _spectral_derivative(values, grid.dp, 1, 2)
    return out


def phase_space_residual(rho: DensityMatrix, bath: BathParams, potential: PotentialSpec, t: float = 0.0) -> float:
    """Relative sup-norm mismatch between the transformed master-equation generator
    and the phase-space equation evaluated on W; zero (to discretization) for quadratic V."""
    generator = master_generator(rho.entries, rho.grid, bath, potential, t)
    exact = wigner_of_density(DensityMatrix(rho.grid, generator, check=False)).values
    approx = phase_space_rhs(wigner_of_density(rho), bath, potential, t)
    return float(np.max(np.abs(exact - approx)) / np.max(np.abs(exact)))


def l1_distance(a: WignerGrid, b: WignerGrid) -> float:
    return float(np.sum(np.abs(a.values - b.values)) * a.cell)


@dataclass(frozen=True)
class LyapunovEstimate:
    value: float
    stderr: float
    samples: np.ndarray


def lyapunov_exponent(cfg: ChaosConfig, backend: str = "auto") -> LyapunovEstimate:
    """Largest classical Lyapunov exponent (gamma = D = 0), Benettin style.

    Initial conditions are drawn from the Wigner function of the initial packet.
    Each trajectory carries a tangent vector renormalized once per driving
    period; the first ``lyapunov_transient`` periods are discarded.
    """
    impl = kernels.get_backend(backend)
    potential = cfg.potential()
    start = ClassicalEnsemble.from_gaussian(cfg.initial_spec(), cfg.lyapunov_samples, cfg.seed + 1)
    dt = cfg.period / cfg.lyapunov_steps_per_period
    counted = cfg.lyapunov_periods - cfg.lyapunov_transient
    if counted < 1:
        raise ValueError("lyapunov_periods must exceed the transient")
    logs = impl.tangent_log_growth(
        start.x, start.p, 0.0, dt, cfg.lyapunov_steps_per_period, cfg.lyapunov_periods, cfg.lyapunov_transient,
        cfg.mass, _force_coefficients(potential, 1), _force_coefficients(potential, 2),
        potential.drive_amplitude, potential.drive_frequency,
    )
    rates = np.asarray(logs) / (counted * cfg.period)
    stderr = float(rates.std(ddof=1) / math.sqrt(len(rates))) if len(rates) > 1 else math.nan
    return LyapunovEstimate(float(rates.mean()), stderr, rates)


def coherence_length(diffusion: float, lyapunov: float) -> float:
    """l_C = hbar / sqrt(2 D lambda)."""
    if not (diffusion > 0 and lyapunov > 0):
        raise ValueError("diffusion and Lyapunov exponent must be positive")
    return HBAR / math.sqrt(2.0 * diffusion * lyapunov)


def nonlinearity_scale(potential: PotentialSpec, x: float) -> float:
    """chi = sqrt(|V'(x) / V'''(x)|), the length over which V departs from quadratic."""
    third = float(potential.derivative(x, 3))
    if third == 0.0:
        raise ThirdDerivativeVanishesError(f"V''' vanishes at x = {x:g}")
    return math.sqrt(abs(float(potential.derivative(x, 1)) / third))


def _quantum_steps_per_period(cfg: ChaosConfig, bath: BathParams) -> int:
    bound = max_stable_dt(cfg.grid, bath, cfg.potential())
    return max(1, math.ceil(cfg.period / bound))


@dataclass
class QuantumRun:
    diffusion: float
    result: EvolutionResult
    wigner: list[WignerGrid]
    negativity: np.ndarray
    linear_entropy: np.ndarray

    @property
    def final_wigner(self) -> WignerGrid:
        return self.wigner[-1]


def run_quantum(cfg: ChaosConfig, diffusion: float, samples_per_period: int = 1) -> QuantumRun:
    """Quantum run from the configured packet; Wigner snapshots once per period,
    purity ``samples_per_period`` times per period."""
    bath = cfg.bath(diffusion)
    steps = _quantum_steps_per_period(cfg, bath)
    steps = math.ceil(steps / samples_per_period) * samples_per_period
    rho0 = density_of(make_gaussian(cfg.initial_spec(), cfg.grid))
    result = evolve(
        rho0, bath, cfg.potential(), cfg.n_periods * cfg.period,
        dt=cfg.period / steps, save_every=steps // samples_per_period,
        spectral_diagnostics=False, keep_states=samples_per_period,
    )
    wigner = [wigner_of_density(s) for s in result.states]
    negativity = np.array([negativity_volume(w) for w in wigner])
    return QuantumRun(diffusion, result, wigner, negativity, 1.0 - result.diagnostics["purity"])


def run_classical(cfg: ChaosConfig, diffusion: float, backend: str = "auto") -> ClassicalSeries:
    start = ClassicalEnsemble.from_gaussian(cfg.initial_spec(), cfg.ensemble_size, cfg.seed)
    dt = cfg.period / cfg.classical_steps_per_period
    return evolve_classical(
        start, cfg.bath(diffusion), cfg.potential(), cfg.n_periods * cfg.period,
        seed=cfg.seed, dt=dt, save_every=cfg.classical_steps_per_period, backend=backend,
    )


@dataclass
class CorrespondenceReport:
    diffusion: float
    times: np.ndarray
    l1_decohered: float
    l1_unitary: float
    negativity: dict[str, np.ndarray]
    linear_entropy: dict[str, np.ndarray]
    coherence_length: float | None
    nonlinearity_scale: float | None
    lyapunov: LyapunovEstimate | None
    portraits: dict[str, WignerGrid] = field(default_factory=dict)
    smoothing_cells: float = 1.0


def double_well_experiment(cfg: ChaosConfig, with_lyapunov: bool = True, backend: str = "auto") -> CorrespondenceReport:
    """Unitary, decohered and classical portraits after ``n_periods`` from one Gaussian."""
    unitary = run_quantum(cfg, 0.0)
    decohered = run_quantum(cfg, cfg.diffusion)
    classical_series = run_classical(cfg, cfg.diffusion, backend)
    grid = cfg.grid
    classical = [e.density_on(grid, cfg.smoothing_cells) for e in classical_series.ensembles]
    l1_d = l1_distance(decohered.final_wigner, classical[-1])
    l1_u = l1_distance(unitary.final_wigner, classical[-1])
    lyap = lyapunov_exponent(cfg, backend) if with_lyapunov else None
    try:
        chi = nonlinearity_scale(cfg.potential(), cfg.chi_point)
    except ThirdDerivativeVanishesError:
        chi = None
    ell = coherence_length(cfg.diffusion, lyap.value) if (lyap and lyap.value > 0 and cfg.diffusion > 0) else None
    return CorrespondenceReport(
        diffusion=cfg.diffusion,
        times=decohered.result.state_times,
        l1_decohered=l1_d,
        l1_unitary=l1_u,
        negativity={
            "unitary": unitary.negativity,
            "decohered": decohered.negativity,
            "classical": np.array([negativity_volume(w) for w in classical]),
        },
        linear_entropy={"unitary": unitary.linear_entropy, "decohered": decohered.linear_entropy},
        coherence_length=ell,
        nonlinearity_scale=chi,
        lyapunov=lyap,
        portraits={"unitary": unitary.final_wigner, "decohered": decohered.final_wigner, "classical": classical[-1]},
        smoothing_cells=cfg.smoothing_cells,
    )


def linear_entropy_rate(times: np.ndarray, linear_entropy: np.ndarray, start: float) -> float:
    """Least-squares slope of 1 - Tr rho^2 over samples with t >= start."""
    sel = np.asarray(times) >= start - 1e-12
    if sel.sum() < 2:
        raise ValueError("post-transient window holds fewer than two samples")
    slope, _ = np.polyfit(np.asarray(times)[sel], np.asarray(linear_entropy)[sel], 1)
    return float(slope)


@dataclass
class EntropyProductionTable:
    diffusions: np.ndarray
    rates: np.ndarray
    regular_rates: np.ndarray | None
    window_start: float
    series: dict[float, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    @property
    def spread(self) -> float:
        """max/min of the chaotic rates."""
        positive = self.rates[self.rates > 0]
        return float(positive.max() / positive.min()) if len(positive) == len(self.rates) else math.inf

    def rows(self) -> list[dict[str, float]]:
        out = []
        for i, d in enumerate(self.diffusions):
            row = {"D": float(d), "rate": float(self.rates[i])}
            if self.regular_rates is not None:
                row["regular_rate"] = float(self.regular_rates[i])
            out.append(row)
        return out


def entropy_production(cfg: ChaosConfig, diffusions, include_regular: bool = True) -> EntropyProductionTable:
    """Post-transient growth rate of the linear entropy for each D.

    With ``include_regular`` the same runs are repeated without the drive.
    """
    diffusions = np.asarray(sorted(float(d) for d in diffusions))
    positive = diffusions[diffusions > 0]
    if len(positive) >= 2 and positive.max() / positive.min() < 4.0 - 1e-12:
        raise ValueError("D values must span at least a factor of 4")
    start = cfg.transient_periods * cfg.period
    series: dict[float, tuple[np.ndarray, np.ndarray]] = {}
    rates = []
    for d in diffusions:
        run = run_quantum(cfg, d, cfg.entropy_samples_per_period)
        series[float(d)] = (run.result.times, run.linear_entropy)
        rates.append(linear_entropy_rate(run.result.times, run.linear_entropy, start))
    regular = None
    if include_regular:
        quiet = replace(cfg, drive_amplitude=0.0)
        regular = []
        for d in diffusions:
            run = run_quantum(quiet, d, cfg.entropy_samples_per_period)
            regular.append(linear_entropy_rate(run.result.times, run.linear_entropy, start))
        regular = np.array(regular)
    return EntropyProductionTable(diffusions, np.array(rates), regular, start, series)
