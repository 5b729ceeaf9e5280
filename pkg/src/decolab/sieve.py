"""Predictability sieve over squeezed Gaussians in a weakly damped harmonic oscillator.

Each candidate starts as a Gaussian whose position variance is ``s`` times the
coherent-state variance hbar/2m omega, displaced to a common point.  Candidates
are ranked by purity Tr rho^2 at each sample time; the von Neumann entropy is
recorded alongside.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .brownian import BathParams, PotentialSpec, evolve
from .errors import TimeNotSampledError
from .state import HBAR, GaussianSpec, Grid, density_of, make_gaussian

DEFAULT_SQUEEZES = (0.25, 0.5, 1.0, 2.0, 4.0)
PURITY_TIE_DECIMALS = 9


@dataclass(frozen=True)
class SieveConfig:
    """Temperature is in units of hbar omega; gamma = gamma_ratio * omega."""

    omega: float = 1.0
    mass: float = 1.0
    gamma_ratio: float = 1e-4
    temperature: float = 10.0
    squeezes: tuple[float, ...] = DEFAULT_SQUEEZES
    horizon_periods: int = 10
    samples_per_period: int = 1
    steps_per_period: int = 96
    center: float = 2.0
    grid_points: int = 256
    half_extent: float = 12.0

    def __post_init__(self):
        if not (self.omega > 0 and self.mass > 0):
            raise ValueError("omega and mass must be positive")
        if self.gamma_ratio < 0 or self.temperature < 0:
            raise ValueError("gamma ratio and temperature must be nonnegative")
        if not self.squeezes or any(not s > 0 for s in self.squeezes):
            raise ValueError("squeeze parameters must be positive")
        if self.horizon_periods < 1 or self.samples_per_period < 1:
            raise ValueError("horizon and sampling must be positive")
        if self.steps_per_period % self.samples_per_period:
            raise ValueError("steps_per_period must be a multiple of samples_per_period")
        object.__setattr__(self, "squeezes", tuple(float(s) for s in self.squeezes))

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    @property
    def coherent_width(self) -> float:
        return math.sqrt(HBAR / (2.0 * self.mass * self.omega))

    def bath(self) -> BathParams:
        return BathParams.from_temperature(self.mass, self.gamma_ratio * self.omega, self.temperature * HBAR * self.omega)

    def grid(self) -> Grid:
        return Grid(self.grid_points, self.half_extent)

    def initial_spec(self, squeeze: float) -> GaussianSpec:
        return GaussianSpec(self.center, 0.0, self.coherent_width, squeeze)


@dataclass
class SieveResult:
    squeezes: tuple[float, ...]
    times: np.ndarray
    purity: dict[float, np.ndarray]
    entropy: dict[float, np.ndarray] = field(default_factory=dict)
    period: float = 2.0 * math.pi

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def ranking(self, t: float) -> list[float]:
        return rank_pointer_candidates(self, t)

    @property
    def winner(self) -> float:
        return self.ranking(self.horizon)[0]

    def rankings(self) -> list[list[float]]:
        return [self.ranking(t) for t in self.times]


def _sort_key(purity: float, squeeze: float):
    return (-round(purity, PURITY_TIE_DECIMALS), abs(math.log2(squeeze)), squeeze)


def rank_pointer_candidates(result: SieveResult, t: float) -> list[float]:
    """Squeeze values by descending purity at sample time ``t``.

    Purities equal to 1e-9 count as tied; ties go to the s closer to 1 in
    |log2 s|, then to the smaller s.
    """
    times = np.asarray(result.times)
    hits = np.flatnonzero(np.abs(times - t) <= 1e-9 * max(1.0, abs(t)))
    if len(hits) == 0:
        raise TimeNotSampledError(t)
    i = int(hits[0])
    return sorted(result.squeezes, key=lambda s: _sort_key(float(result.purity[s][i]), s))


def run_sieve(cfg: SieveConfig, with_entropy: bool = True) -> SieveResult:
    grid = cfg.grid()
    bath = cfg.bath()
    potential = PotentialSpec.harmonic(cfg.mass, cfg.omega)
    dt = cfg.period / cfg.steps_per_period
    t_final = cfg.horizon_periods * cfg.period
    save_every = cfg.steps_per_period // cfg.samples_per_period
    purity, entropy = {}, {}
    times = None
    for s in cfg.squeezes:
        rho0 = density_of(make_gaussian(cfg.initial_spec(s), grid))
        run = evolve(
            rho0, bath, potential, t_final, dt=dt, save_every=save_every,
            spectral_diagnostics=with_entropy, keep_states=False,
        )
        times = run.times
        purity[s] = run.diagnostics["purity"]
        if with_entropy:
            entropy[s] = run.diagnostics["entropy"]
    return SieveResult(cfg.squeezes, np.asarray(times), purity, entropy, cfg.period)
