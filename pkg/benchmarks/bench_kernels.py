"""Compare the compiled and pure-Python classical kernels.

    python benchmarks/bench_kernels.py [--ensemble 100000] [--steps 200] [--repeat 3]
"""
import argparse
import timeit

import numpy as np

from decolab import kernels
from decolab.dynamics import ChaosConfig, _force_coefficients


def _langevin_case(impl, cfg, ensemble, steps):
    rng = np.random.default_rng(0)
    x0, p0 = rng.normal(size=ensemble), rng.normal(size=ensemble)
    noise = rng.normal(size=(steps, ensemble))
    potential = cfg.potential()
    coeffs = _force_coefficients(potential, 1)
    dt = cfg.period / cfg.classical_steps_per_period

    def run():
        impl.langevin_steps(x0.copy(), p0.copy(), noise, 0.0, dt, cfg.mass, 0.0, cfg.diffusion, coeffs,
                            potential.drive_amplitude, potential.drive_frequency)

    return run


def _tangent_case(impl, cfg, samples, periods):
    rng = np.random.default_rng(1)
    x0, p0 = rng.normal(0.0, 0.2, size=samples), rng.normal(0.0, 0.2, size=samples)
    potential = cfg.potential()
    steps = cfg.lyapunov_steps_per_period

    def run():
        impl.tangent_log_growth(x0.copy(), p0.copy(), 0.0, cfg.period / steps, steps, periods, 1, cfg.mass,
                                _force_coefficients(potential, 1), _force_coefficients(potential, 2),
                                potential.drive_amplitude, potential.drive_frequency)

    return run


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--ensemble", type=int, default=100_000)
    parser.add_argument("--steps", type=int, default=200)
    parser.add_argument("--samples", type=int, default=20)
    parser.add_argument("--periods", type=int, default=20)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    cfg = ChaosConfig()
    backends = ["python"] + (["compiled"] if kernels.COMPILED_AVAILABLE else [])
    print(f"{'kernel':<20}{'backend':<10}{'best [s]':>10}{'speedup':>10}")
    for label, make in (
        (f"langevin {args.ensemble}x{args.steps}", lambda impl: _langevin_case(impl, cfg, args.ensemble, args.steps)),
        (f"tangent {args.samples}x{args.periods}", lambda impl: _tangent_case(impl, cfg, args.samples, args.periods)),
    ):
        timings = {}
        for name in backends:
            run = make(kernels.get_backend(name))
            run()  # warm up
            timings[name] = min(timeit.repeat(run, number=1, repeat=args.repeat))
        for name, seconds in timings.items():
            print(f"{label:<20}{name:<10}{seconds:>10.4f}{timings['python'] / seconds:>10.2f}")
    if not kernels.COMPILED_AVAILABLE:
        print("compiled extension not built; only the Python backend was timed")


if __name__ == "__main__":
    main()
