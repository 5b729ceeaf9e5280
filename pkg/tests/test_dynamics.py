import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decolab import kernels
from decolab.brownian import BathParams, PotentialSpec, evolve, master_generator
from decolab.dynamics import (
    ChaosConfig,
    ClassicalEnsemble,
    coherence_length,
    double_well_experiment,
    entropy_production,
    evolve_classical,
    evolve_open_quantum,
    l1_distance,
    linear_entropy_rate,
    lyapunov_exponent,
    nonlinearity_scale,
    phase_space_residual,
)
from decolab.errors import StepTooLargeError, ThirdDerivativeVanishesError
from decolab.state import DensityMatrix, GaussianSpec, Grid, density_of, make_cat, make_gaussian, moments, position_marginal
from decolab.wigner import negativity_volume, wigner_of_density

HARMONIC = PotentialSpec.harmonic(1.0, 1.0)
TINY_CHAOS = ChaosConfig(grid_points=128, n_periods=1, ensemble_size=2000, entropy_samples_per_period=4, transient_periods=0.5)


def _energies(ens: ClassicalEnsemble) -> np.ndarray:
    return 0.5 * ens.p**2 + 0.5 * ens.x**2


class TestEnsemble:
    def test_sampled_moments(self):
        ens = ClassicalEnsemble.from_gaussian(GaussianSpec(1.0, -0.5, 0.5), 200_000, seed=3)
        m = ens.moments()
        assert m["x"] == pytest.approx(1.0, abs=0.01)
        assert m["p"] == pytest.approx(-0.5, abs=0.01)
        assert np.var(ens.x) * np.var(ens.p) == pytest.approx(0.25, rel=0.02)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            ClassicalEnsemble(np.array([np.nan]), np.array([0.0]))

    def test_density_normalized_and_positive(self):
        grid = Grid(64, 8.0)
        w = ClassicalEnsemble.from_gaussian(GaussianSpec(), 20_000).density_on(grid)
        assert w.integral() == pytest.approx(1.0, abs=1e-3)
        assert negativity_volume(w) == 0.0


class TestEvolveClassical:
    def test_harmonic_energy_and_rotation(self):
        ens = ClassicalEnsemble.from_gaussian(GaussianSpec(2.0, 0.0, 0.5), 10_000, seed=1)
        period = 2 * math.pi
        series = evolve_classical(ens, BathParams(1.0, 0.0), HARMONIC, period, dt=period / 1000, save_every=250)
        e0 = _energies(ens)
        for snap in series.ensembles[1:]:
            assert np.max(np.abs(_energies(snap) - e0) / e0.mean()) < 1e-4
        # a quarter period swaps position and momentum spreads
        quarter = series.ensembles[1]
        assert np.var(quarter.p) == pytest.approx(np.var(ens.x), rel=1e-3)
        assert np.allclose(series.final().x, ens.x, atol=1e-3)

    def test_damped_energy(self):
        gamma = 0.01
        ens = ClassicalEnsemble.from_gaussian(GaussianSpec(3.0, 0.0, 0.5), 20_000, seed=2)
        period = 2 * math.pi
        series = evolve_classical(ens, BathParams(1.0, gamma, diffusion=0.0), HARMONIC, 10 * period, dt=period / 200, save_every=200)
        e0 = _energies(ens).mean()
        for t, snap in zip(series.times[1:], series.ensembles[1:]):
            assert _energies(snap).mean() / e0 == pytest.approx(math.exp(-2 * gamma * t), rel=0.02)

    def test_free_diffusion(self):
        d = 0.5
        ens = ClassicalEnsemble(np.zeros(100_000), np.zeros(100_000))
        series = evolve_classical(ens, BathParams(1.0, 0.0, diffusion=d), PotentialSpec(), 10.0, seed=4, dt=0.05, save_every=50)
        for t, snap in zip(series.times[1:], series.ensembles[1:]):
            assert np.mean(snap.p**2) == pytest.approx(2 * d * t, rel=0.02)

    def test_seed_reproducible(self):
        ens = ClassicalEnsemble.from_gaussian(GaussianSpec(), 1000, seed=5)
        bath = BathParams(1.0, 0.1, diffusion=0.3)
        a = evolve_classical(ens, bath, HARMONIC, 3.0, seed=9, dt=0.01).final()
        b = evolve_classical(ens, bath, HARMONIC, 3.0, seed=9, dt=0.01).final()
        c = evolve_classical(ens, bath, HARMONIC, 3.0, seed=10, dt=0.01).final()
        assert np.array_equal(a.x, b.x) and np.array_equal(a.p, b.p)
        assert not np.array_equal(a.x, c.x)

    @pytest.mark.skipif(not kernels.COMPILED_AVAILABLE, reason="compiled kernels not built")
    def test_backends_agree(self):
        ens = ClassicalEnsemble.from_gaussian(GaussianSpec(0.5, 0.0, 0.4), 2000, seed=6)
        cfg = ChaosConfig()
        bath = BathParams(1.0, 0.05, diffusion=0.025)
        args = (ens, bath, cfg.potential(), cfg.period)
        fast = evolve_classical(*args, seed=1, dt=cfg.period / 200, backend="compiled").final()
        slow = evolve_classical(*args, seed=1, dt=cfg.period / 200, backend="python").final()
        assert np.allclose(fast.x, slow.x, rtol=1e-12, atol=1e-12)
        assert np.allclose(fast.p, slow.p, rtol=1e-12, atol=1e-12)

    def test_step_too_large(self):
        ens = ClassicalEnsemble.from_gaussian(GaussianSpec(), 10)
        with pytest.raises(StepTooLargeError):
            evolve_classical(ens, BathParams(1.0, 0.0), HARMONIC, 1.0, dt=0.5)


class TestPhaseSpaceEquation:
    @pytest.mark.parametrize("gamma,diffusion", [(0.0, 0.0), (0.05, 0.2), (0.1, 1.0)])
    def test_exact_for_quadratic_potential(self, gamma, diffusion):
        grid = Grid(128, 12.0)
        rho = density_of(make_cat(3.0, 0.7, 0.3, grid))
        pot = PotentialSpec.harmonic(1.0, 1.0, drive_amplitude=0.5, drive_frequency=2.0)
        assert phase_space_residual(rho, BathParams(1.0, gamma, diffusion=diffusion), pot, t=0.3) < 1e-4

    def test_quartic_needs_corrections(self):
        grid = Grid(128, 8.0)
        rho = density_of(make_cat(3.0, 0.5, 0.0, grid))
        assert phase_space_residual(rho, BathParams(1.0, 0.0), PotentialSpec.double_well(10.0, 0.5)) > 1e-3

    def test_snapshots_are_wigner_transforms(self):
        grid = Grid(64, 8.0)
        rho = density_of(make_cat(3.0, 0.7, 0.0, grid))
        result, frames = evolve_open_quantum(rho, BathParams(1.0, 0.0, diffusion=0.1), HARMONIC, 0.5, dt=0.002, save_every=50)
        assert len(frames) == len(result.states)
        assert np.allclose(frames[-1].values, wigner_of_density(result.final()).values)


class TestDecoherenceInPhaseSpace:
    def test_fringes_vanish_before_lobes_merge(self):
        grid = Grid(256, 16.0)
        rho = density_of(make_cat(8.0, 1.0, 0.0, grid))
        result, frames = evolve_open_quantum(rho, BathParams(1.0, 0.0, diffusion=1.0), PotentialSpec(), 0.1)
        assert negativity_volume(frames[-1]) < 0.05 * negativity_volume(frames[0])
        marginal = position_marginal(result.final())
        centre, lobe = marginal[np.argmin(np.abs(grid.x))], marginal[np.argmin(np.abs(grid.x - 4))]
        assert centre < 1e-2 * lobe

    def test_momentum_superposition_decays_slowly_at_first(self):
        grid = Grid(256, 16.0)
        bath = BathParams(1.0, 0.0, diffusion=1.0)
        x = grid.x
        envelope = np.exp(-(x**2) / 4.0)
        momentum_cat = envelope * np.cos(4.0 * x)
        momentum_cat /= np.sqrt(np.sum(momentum_cat**2) * grid.dx)
        states = {
            "position": density_of(make_cat(8.0, 1.0, 0.0, grid)),
            "momentum": DensityMatrix(grid, np.outer(momentum_cat, momentum_cat).astype(complex)),
        }
        i0, j0 = np.argmin(np.abs(grid.x)), np.argmin(np.abs(grid.p))
        rates = {}
        for name, rho in states.items():
            w0 = wigner_of_density(rho).values[i0, j0]
            dw = wigner_of_density(DensityMatrix(grid, master_generator(rho.entries, grid, bath, PotentialSpec()), check=False))
            rates[name] = -dw.values[i0, j0] / w0
        assert rates["position"] == pytest.approx(64.0 + 4.0, rel=0.02)
        assert rates["momentum"] > 0
        assert rates["position"] > 10 * rates["momentum"]


class TestQuadraticCorrespondence:
    def test_moments_agree(self):
        grid = Grid(64, 10.0)
        bath = BathParams(1.0, 0.05, diffusion=0.02)
        spec = GaussianSpec(2.0, 0.5, math.sqrt(0.5))
        period = 2 * math.pi
        result = evolve(density_of(make_gaussian(spec, grid)), bath, HARMONIC, period, dt=period / 1300, save_every=325)
        ens = ClassicalEnsemble.from_gaussian(spec, 200_000, seed=7)
        series = evolve_classical(ens, bath, HARMONIC, period, seed=7, dt=period / 1300, save_every=325)
        for rho, cl in zip(result.states, series.ensembles):
            q, c = moments(rho), cl.moments()
            scale = math.sqrt(q["x2"] + q["p2"])
            for key in ("x", "p"):
                assert abs(q[key] - c[key]) < 0.02 * scale
            for key in ("x2", "p2"):
                assert c[key] == pytest.approx(q[key], rel=0.02)


class TestLyapunov:
    def test_default_is_chaotic(self):
        est = lyapunov_exponent(ChaosConfig())
        assert est.value == pytest.approx(0.5, abs=0.2)
        assert len(est.samples) >= 20 and est.stderr > 0

    def test_undriven_is_regular(self):
        assert lyapunov_exponent(ChaosConfig(drive_amplitude=0.0)).value <= 0.05

    def test_harmonic_is_linear(self):
        assert lyapunov_exponent(ChaosConfig(a=-1.0, b=0.0)).value <= 0.01

    @pytest.mark.skipif(not kernels.COMPILED_AVAILABLE, reason="compiled kernels not built")
    def test_backends_agree(self):
        cfg = ChaosConfig(lyapunov_periods=40, lyapunov_samples=5)
        a = lyapunov_exponent(cfg, backend="compiled").samples
        b = lyapunov_exponent(cfg, backend="python").samples
        assert np.allclose(a, b, rtol=1e-10)

    def test_transient_must_be_shorter(self):
        with pytest.raises(ValueError):
            lyapunov_exponent(ChaosConfig(lyapunov_periods=5, lyapunov_transient=10))


class TestScales:
    def test_coherence_length(self):
        assert coherence_length(0.025, 0.5) == pytest.approx(1 / math.sqrt(0.025))
        assert coherence_length(0.025, 0.5) == pytest.approx(6.32, abs=0.01)

    @given(st.floats(1e-3, 10.0), st.floats(1e-3, 10.0))
    def test_coherence_length_scaling(self, d, lam):
        assert coherence_length(4 * d, lam) == pytest.approx(coherence_length(d, lam) / 2)
        assert coherence_length(d, 4 * lam) == pytest.approx(coherence_length(d, lam) / 2)

    def test_nonlinearity_scale(self):
        pot = PotentialSpec.double_well(10.0, 0.5)
        assert nonlinearity_scale(pot, 1.0) == pytest.approx(math.sqrt(18 / 12))
        assert nonlinearity_scale(pot, math.sqrt(10.0)) == pytest.approx(0.0, abs=1e-7)

    def test_quadratic_has_no_scale(self):
        with pytest.raises(ThirdDerivativeVanishesError):
            nonlinearity_scale(HARMONIC, 1.0)


class TestConfig:
    def test_defaults(self):
        cfg = ChaosConfig()
        assert (cfg.mass, cfg.a, cfg.b, cfg.drive_amplitude, cfg.drive_frequency) == (1.0, 10.0, 0.5, 10.0, 6.07)
        assert cfg.well_frequency == pytest.approx(math.sqrt(80.0))

    @pytest.mark.parametrize("kwargs", [{"mass": 0.0}, {"diffusion": -1.0}, {"a": 1.0, "b": 0.0}, {"ensemble_size": 0}])
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            ChaosConfig(**kwargs)


@pytest.fixture(scope="module")
def report():
    return double_well_experiment(TINY_CHAOS, with_lyapunov=False)


class TestSmallExperiment:
    def test_fields(self, report):
        assert report.l1_decohered >= 0 and report.l1_unitary >= 0
        assert np.all(report.negativity["classical"] == 0)
        assert report.nonlinearity_scale == pytest.approx(math.sqrt(1.5))
        assert report.lyapunov is None and report.coherence_length is None
        assert set(report.portraits) == {"unitary", "decohered", "classical"}

    def test_unitary_stays_pure(self, report):
        assert np.max(np.abs(report.linear_entropy["unitary"])) < 1e-6
        assert report.linear_entropy["decohered"][-1] > 0

    def test_distance_is_symmetric(self, report):
        a, b = report.portraits["unitary"], report.portraits["classical"]
        assert l1_distance(a, b) == pytest.approx(l1_distance(b, a))


class TestEntropyProduction:
    def test_zero_diffusion_has_zero_rate(self):
        table = entropy_production(TINY_CHAOS, [0.0], include_regular=False)
        assert abs(table.rates[0]) < 1e-8

    def test_requires_span(self):
        with pytest.raises(ValueError):
            entropy_production(TINY_CHAOS, [0.02, 0.04])

    def test_rate_fit(self):
        t = np.linspace(0, 5, 11)
        assert linear_entropy_rate(t, 0.3 * t + 0.1, 1.0) == pytest.approx(0.3)
        with pytest.raises(ValueError):
            linear_entropy_rate(t, t, 10.0)

    def test_table_rows(self):
        table = entropy_production(TINY_CHAOS, [0.0125, 0.05])
        rows = table.rows()
        assert [r["D"] for r in rows] == [0.0125, 0.05]
        assert all("regular_rate" in r for r in rows)
        assert table.spread >= 1.0
