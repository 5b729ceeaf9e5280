"""Batch experiment runner.

Each subcommand reads parameters from an optional flat ``key = value`` file
(``--config``) and from command-line flags, flags taking precedence.  Results
go to ``--out``: CSV series, WGRD grid files and a ``manifest.json`` written
last.  Exit codes: 0 success, 2 invalid configuration, 3 solver failure,
4 I/O error.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__, kernels
from .errors import ConfigError, DecolabError, GridEscapeError, SolverFailure
from .io import encode_grid, series_text

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4
LOCK_NAME = ".decolab.lock"
MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class Param:
    name: str
    kind: str  # float | int | str | bool | floats
    default: Any
    help: str = ""


def _convert(param: Param, raw: Any) -> Any:
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if param.kind == "float":
            value = float(text)
            if not math.isfinite(value):
                raise ValueError
            return value
        if param.kind == "int":
            return int(text)
        if param.kind == "bool":
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if param.kind == "floats":
            values = tuple(float(v) for v in text.split(",") if v.strip())
            if not values:
                raise ValueError
            return values
        return text
    except ValueError:
        raise ConfigError(f"{param.name}: cannot parse {raw!r} as {param.kind}") from None


def parse_config_text(text: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out


@dataclass
class ExperimentConfig:
    command: str
    params: dict[str, Any]
    out_dir: Path
    seed: int = 0
    gnuplot: bool = False

    def to_json(self) -> dict:
        return {"command": self.command, "seed": self.seed, "params": _jsonable(self.params)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else str(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


class ArtifactWriter:
    """Writes files into the output directory and records their checksums."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.checksums: dict[str, str] = {}
        self.diagnostics: dict[str, Any] = {}
        self.plots: list[str] = []

    def _put(self, name: str, data: bytes) -> None:
        (self.out_dir / name).write_bytes(data)
        self.checksums[name] = hashlib.sha256(data).hexdigest()

    def series(self, name: str, columns: dict) -> None:
        self._put(name, series_text(columns).encode())
        self.plots.append(name)

    def grid(self, name: str, values, extents=(0.0, 0.0, 0.0, 0.0)) -> None:
        self._put(name, encode_grid(values, extents))

    def note(self, **items) -> None:
        self.diagnostics.update(_jsonable(items))


# ---------------------------------------------------------------- experiments


def _run_timescales(cfg: ExperimentConfig, out: ArtifactWriter) -> None:
    from .brownian import DEFAULT_SCENARIOS, TIMESCALE_COLUMNS, Scenario, timescale_rows

    p = cfg.params
    if p["mass"] > 0:
        scenarios = [Scenario("custom", p["mass"], p["temperature"], p["tau_R"], p["separation"])]
    else:
        scenarios = list(DEFAULT_SCENARIOS)
    rows = timescale_rows(scenarios)
    out.series("timescales.csv", {c: [r[c] for r in rows] for c in TIMESCALE_COLUMNS})
    out.note(ratios={r["name"]: r["ratio"] for r in rows})


def _pair_state(p):
    from .measurement import correlated_density, decohere_via_environment, premeasure

    beta = p["beta"] * complex(math.cos(p["phase"]), math.sin(p["phase"]))
    rho = correlated_density(premeasure(p["alpha"], beta))
    return rho, decohere_via_environment(rho, p["overlap"])


def _run_measure(cfg: ExperimentConfig, out: ArtifactWriter) -> None:
    from .measurement import entropy_gain, reduce
    from .state import von_neumann_entropy

    p = cfg.params
    rho, traced = _pair_state(p)
    reduced = reduce(rho)
    out.grid("premeasured.wgrd", rho)
    out.grid("environment_traced.wgrd", traced)
    out.grid("reduced.wgrd", reduced)
    out.series(
        "entropy.csv",
        {
            "state": ["premeasured", "environment_traced", "reduced"],
            "entropy_bits": [von_neumann_entropy(rho), von_neumann_entropy(traced), von_neumann_entropy(reduced)],
        },
    )
    out.note(entropy_gain=entropy_gain(p["alpha"], p["beta"]))


def _run_discord(cfg: ExperimentConfig, out: ArtifactWriter) -> None:
    from .discord import NAMED_STATES, _discord_grid, min_discord, mutual_information

    p = cfg.params
    if p["state"] == "premeasured":
        rho, _ = _pair_state(p)
    elif p["state"] == "environment_traced":
        _, rho = _pair_state(p)
    else:
        rho = NAMED_STATES[p["state"]]()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        best = min_discord(rho)
    step = math.radians(p["landscape_step_deg"])
    thetas = np.linspace(0.0, math.pi, int(round(math.pi / step)) + 1)
    phis = np.linspace(0.0, 2.0 * math.pi, int(round(2.0 * math.pi / step)) + 1)
    landscape = _discord_grid(rho, thetas[:, None], phis[None, :])
    out.grid("discord_landscape.wgrd", landscape, (thetas[0], thetas[-1], phis[0], phis[-1]))
    out.series(
        "discord.csv",
        {
            "mutual_information": [mutual_information(rho)],
            "min_discord": [best.value],
            "theta": [best.basis.theta],
            "phi": [best.basis.phi],
            "converged": [best.converged],
        },
    )
    out.note(optimizer_warnings=len(caught), landscape_min=float(landscape.min()))


def _evolution_outputs(out: ArtifactWriter, result, prefix: str = "") -> None:
    from .wigner import wigner_of_density

    for k, (t, state) in enumerate(zip(result.state_times, result.states)):
        g = state.grid
        out.grid(f"{prefix}rho_{k:03d}.wgrd", state.entries, (g.x[0], g.x[-1], g.x[0], g.x[-1]))
        w = wigner_of_density(state)
        out.grid(f"{prefix}wigner_{k:03d}.wgrd", w.values, (g.x[0], g.x[-1], g.p[0], g.p[-1]))
    out.series(f"{prefix}series.csv", result.series())
    d = result.diagnostics
    out.note(max_trace_error=float(np.max(d["trace_error"])))
    if "min_eigenvalue" in d:
        out.note(min_eigenvalue=float(np.min(d["min_eigenvalue"])))


def _run_cat(cfg: ExperimentConfig, out: ArtifactWriter) -> None:
    from .brownian import BathParams, PotentialSpec, evolve, fringe_decay_rate, max_stable_dt
    from .state import Grid, density_of, make_cat

    p = cfg.params
    grid = Grid(p["n"], p["L"])
    rho0 = density_of(make_cat(p["dx"], p["delta"], p["phase"], grid))
    bath = BathParams(p["mass"], p["gamma"], diffusion=p["D"])
    potential = PotentialSpec.harmonic(p["mass"], p["omega"], drive_amplitude=p["drive"], drive_frequency=p["drive_omega"])
    dt = p["dt"] or min(max_stable_dt(grid, bath, potential), p["t"])
    nsteps = max(1, math.ceil(p["t"] / dt - 1e-9))
    result = evolve(rho0, bath, potential, p["t"], dt=dt, save_every=max(1, nsteps // p["snapshots"]))
    # off-diagonal peak of rho at (x, x') = (-dx/2, +dx/2)
    i = int(np.argmin(np.abs(grid.x + p["dx"] / 2.0)))
    j = int(np.argmin(np.abs(grid.x - p["dx"] / 2.0)))
    coherence = [abs(s.entries[i, j]) for s in result.states]
    out.series("coherence.csv", {"t": result.state_times, "offdiagonal_abs": coherence})
    _evolution_outputs(out, result)
    out.note(predicted_decay_rate=fringe_decay_rate(bath, p["dx"]), steps=nsteps, dt=result.dt)


def _run_wigner(cfg: ExperimentConfig, out: ArtifactWriter) -> None:
    from .state import GaussianSpec, Grid, density_of, make_cat, make_gaussian, mixture
    from .wigner import (
        cat_wigner_closed_form, diagnostics, gaussian_wigner_closed_form, marginals, wigner_of_density,
    )

    p = cfg.params
    grid = Grid(p["n"], p["L"])
    closed = None
    if p["state"] == "gaussian":
        spec = GaussianSpec(p["x0"], p["p0"], p["width"], p["squeeze"])
        rho = density_of(make_gaussian(spec, grid))
        closed = gaussian_wigner_closed_form(spec, grid)
    elif p["state"] == "cat":
        rho = density_of(make_cat(p["dx"], p["delta"], p["phase"], grid))
        closed = cat_wigner_closed_form(p["dx"], p["delta"], grid, p["phase"])
    else:
        left = make_gaussian(GaussianSpec(-p["dx"] / 2.0, 0.0, p["delta"]), grid)
        right = make_gaussian(GaussianSpec(p["dx"] / 2.0, 0.0, p["delta"]), grid)
        rho = mixture([(0.5, left), (0.5, right)])
    w = wigner_of_density(rho)
    extents = (grid.x[0], grid.x[-1], grid.p[0], grid.p[-1])
    out.grid("wigner.wgrd", w.values, extents)
    px, pp = marginals(w)
    out.series("marginal_x.csv", {"x": grid.x, "P": px})
    out.series("marginal_p.csv", {"p": grid.p, "P": pp})
    diag = diagnostics(w, p["action"] if p["action"] > 0 else None)
    columns = {
        "negativity": [diag.negativity],
        "fringe_wavelength": [diag.fringe_wavelength if diag.fringe_wavelength is not None else "none"],
        "purity": [diag.purity],
        "integral": [w.integral()],
        "imag_residue": [w.imag_residue],
    }
    if closed is not None:
        out.grid("closed_form.wgrd", closed.values, extents)
        columns["closed_form_sup_error"] = [float(np.max(np.abs(w.values - closed.values)))]
    if diag.sub_planck_action is not None:
        columns["sub_planck_action"] = [diag.sub_planck_action]
    out.series("diagnostics.csv", columns)


def _run_sieve(cfg: ExperimentConfig, out: ArtifactWriter) -> None:
    from .sieve import run_sieve

    sieve_cfg = _sieve_config(cfg.params)
    result = run_sieve(sieve_cfg)
    for s in result.squeezes:
        cols = {"t": result.times, "purity": result.purity[s]}
        if result.entropy:
            cols["entropy_bits"] = result.entropy[s]
        out.series(f"purity_s{s:g}.csv", cols)
    rankings = result.rankings()
    cols = {"t": result.times}
    for r in range(len(result.squeezes)):
        cols[f"rank{r + 1}"] = [ranking[r] for ranking in rankings]
    out.series("ranking.csv", cols)
    out.note(winner=result.winner, temperature_hbar_omega=sieve_cfg.temperature)


def _chaos_config(p: dict, seed: int):
    from .dynamics import ChaosConfig

    return ChaosConfig(
        mass=p["mass"], a=p["A"], b=p["B"], drive_amplitude=p["F"], drive_frequency=p["omega"],
        diffusion=p["D"], n_periods=p["periods"], grid_points=p["n"], half_extent=p["L"],
        ensemble_size=p["ensemble"], initial_center=p["x0"], initial_momentum=p["p0"],
        initial_width=p["width"] or None, seed=seed, smoothing_cells=p["smoothing_cells"],
        lyapunov_periods=p["lyapunov_periods"], lyapunov_samples=p["lyapunov_samples"],
        transient_periods=p["transient_periods"],
    )


def _sieve_config(p: dict):
    from .sieve import SieveConfig

    return SieveConfig(
        omega=p["omega"], gamma_ratio=p["gamma_ratio"], temperature=p["temperature"], squeezes=p["squeezes"],
        horizon_periods=p["horizon_periods"], steps_per_period=p["steps_per_period"], center=p["x0"],
        grid_points=p["n"], half_extent=p["L"],
    )


def _run_chaos(cfg: ExperimentConfig, out: ArtifactWriter) -> None:
    from .dynamics import double_well_experiment

    chaos = _chaos_config(cfg.params, cfg.seed)
    report = double_well_experiment(chaos, with_lyapunov=cfg.params["lyapunov"], backend=cfg.params["backend"])
    g = chaos.grid
    extents = (g.x[0], g.x[-1], g.p[0], g.p[-1])
    for name, w in report.portraits.items():
        out.grid(f"portrait_{name}.wgrd", w.values, extents)
    out.series("negativity.csv", {"t": report.times, **report.negativity})
    out.series("linear_entropy.csv", {"t": report.times, **report.linear_entropy})
    summary = {"D": [report.diffusion], "l1_decohered_classical": [report.l1_decohered], "l1_unitary_classical": [report.l1_unitary]}
    if report.lyapunov is not None:
        summary["lyapunov"] = [report.lyapunov.value]
        summary["lyapunov_stderr"] = [report.lyapunov.stderr]
    if report.coherence_length is not None:
        summary["coherence_length"] = [report.coherence_length]
    if report.nonlinearity_scale is not None:
        summary["nonlinearity_scale"] = [report.nonlinearity_scale]
    out.series("summary.csv", summary)
    out.note(smoothing_cells=report.smoothing_cells, kernel_backend=kernels.get_backend(cfg.params["backend"]).__name__)


def _run_entropy_production(cfg: ExperimentConfig, out: ArtifactWriter) -> None:
    from .dynamics import entropy_production

    chaos = _chaos_config(cfg.params, cfg.seed)
    table = entropy_production(chaos, cfg.params["D_values"], include_regular=cfg.params["regular"])
    rows = table.rows()
    out.series("rates.csv", {k: [r[k] for r in rows] for k in rows[0]})
    for d, (t, s) in table.series.items():
        out.series(f"linear_entropy_D{d:g}.csv", {"t": t, "linear_entropy": s})
    out.note(spread=table.spread, window_start=table.window_start)


_GRID = [Param("n", "int", 256, "grid points"), Param("L", "float", 16.0, "half extent of the position grid")]

_PAIR = [
    Param("alpha", "float", math.sqrt(0.5), "amplitude of |up>"),
    Param("beta", "float", math.sqrt(0.5), "modulus of the |down> amplitude"),
    Param("phase", "float", 0.0, "phase of the |down> amplitude"),
    Param("overlap", "float", 0.0, "environment overlap <E_up|E_down>"),
]

_CHAOS = [
    Param("mass", "float", 1.0), Param("A", "float", 10.0), Param("B", "float", 0.5),
    Param("F", "float", 10.0, "drive amplitude"), Param("omega", "float", 6.07, "drive frequency"),
    Param("D", "float", 0.025, "momentum diffusion"), Param("periods", "int", 8),
    Param("n", "int", 512), Param("L", "float", 8.0), Param("ensemble", "int", 100_000),
    Param("x0", "float", 0.0), Param("p0", "float", 0.0), Param("width", "float", 0.0, "0 selects the coherent width"),
    Param("smoothing_cells", "float", 1.0), Param("lyapunov_periods", "int", 200),
    Param("lyapunov_samples", "int", 20), Param("transient_periods", "float", 2.0),
    Param("backend", "str", "auto", "classical kernel backend: auto, python or compiled"),
]


@dataclass
class Experiment:
    name: str
    run: Callable[[ExperimentConfig, ArtifactWriter], None]
    params: list[Param]
    validate: Callable[[ExperimentConfig], None] = lambda cfg: None
    help: str = ""


def _validate_pair(cfg):
    p = cfg.params
    if abs(p["alpha"] ** 2 + p["beta"] ** 2 - 1.0) > 1e-10:
        raise ConfigError("alpha^2 + beta^2 must equal 1")
    if not 0.0 <= p["overlap"] <= 1.0:
        raise ConfigError("overlap must lie in [0, 1]")


def _validate_discord(cfg):
    from .discord import NAMED_STATES

    if cfg.params["state"] not in (*NAMED_STATES, "premeasured", "environment_traced"):
        raise ConfigError(f"unknown state {cfg.params['state']!r}")
    if not 0 < cfg.params["landscape_step_deg"] <= 90:
        raise ConfigError("landscape_step_deg must lie in (0, 90]")
    _validate_pair(cfg)


def _validate_grid_state(cfg):
    from .state import Grid

    p = cfg.params
    Grid(p["n"], p["L"])


def _validate_cat(cfg):
    _validate_grid_state(cfg)
    p = cfg.params
    if p["t"] <= 0 or p["D"] < 0 or p["gamma"] < 0 or p["snapshots"] < 1 or p["dx"] < 0 or p["delta"] <= 0:
        raise ConfigError("need t > 0, D >= 0, gamma >= 0, snapshots >= 1, dx >= 0, delta > 0")


def _validate_wigner(cfg):
    _validate_grid_state(cfg)
    if cfg.params["state"] not in ("gaussian", "cat", "mixture"):
        raise ConfigError("state must be gaussian, cat or mixture")


def _validate_chaos(cfg):
    _chaos_config(cfg.params, cfg.seed)
    if cfg.params["backend"] not in ("auto", "python", "compiled"):
        raise ConfigError("backend must be auto, python or compiled")
    if "D_values" in cfg.params:
        d = [v for v in cfg.params["D_values"] if v > 0]
        if any(v < 0 for v in cfg.params["D_values"]):
            raise ConfigError("D values must be nonnegative")
        if len(d) >= 2 and max(d) / min(d) < 4.0 - 1e-12:
            raise ConfigError("D values must span at least a factor of 4")


EXPERIMENTS: dict[str, Experiment] = {
    e.name: e
    for e in [
        Experiment(
            "timescales", _run_timescales,
            [Param("mass", "float", 0.0, "kg; 0 runs the built-in scenarios"), Param("temperature", "float", 300.0, "K"),
             Param("tau_R", "float", 1e17, "relaxation time in s"), Param("separation", "float", 1e-2, "m")],
            help="decoherence time versus relaxation time (SI units)",
        ),
        Experiment("measure", _run_measure, _PAIR, _validate_pair, help="premeasurement and environment-induced decoherence"),
        Experiment(
            "discord", _run_discord,
            [Param("state", "str", "bell", "bell, reduced, product, premeasured or environment_traced"),
             Param("landscape_step_deg", "float", 5.0), *_PAIR],
            _validate_discord, help="mutual information and minimized discord",
        ),
        Experiment(
            "cat", _run_cat,
            [Param("dx", "float", 8.0, "separation"), Param("delta", "float", 1.0, "packet width"),
             Param("phase", "float", 0.0), Param("D", "float", 1.0, "momentum diffusion"),
             Param("gamma", "float", 0.0), Param("mass", "float", 1.0), Param("omega", "float", 0.0),
             Param("drive", "float", 0.0), Param("drive_omega", "float", 0.0), Param("t", "float", 0.1),
             Param("dt", "float", 0.0, "0 selects the largest stable step"), Param("snapshots", "int", 4), *_GRID],
            _validate_cat, help="evolve a two-packet superposition under the master equation",
        ),
        Experiment(
            "wigner", _run_wigner,
            [Param("state", "str", "cat", "gaussian, cat or mixture"), Param("x0", "float", 0.0), Param("p0", "float", 0.0),
             Param("width", "float", 1.0), Param("squeeze", "float", 1.0), Param("dx", "float", 8.0),
             Param("delta", "float", 1.0), Param("phase", "float", 0.0),
             Param("action", "float", 0.0, "classical action for the sub-Planck scale (0: skip)"), *_GRID],
            _validate_wigner, help="Wigner transform, closed form and phase-space diagnostics",
        ),
        Experiment(
            "sieve", _run_sieve,
            [Param("omega", "float", 1.0), Param("gamma_ratio", "float", 1e-4),
             Param("temperature", "float", 10.0, "in units of hbar omega"),
             Param("squeezes", "floats", (0.25, 0.5, 1.0, 2.0, 4.0)), Param("horizon_periods", "int", 10),
             Param("steps_per_period", "int", 96), Param("x0", "float", 2.0),
             Param("n", "int", 256), Param("L", "float", 12.0)],
            lambda cfg: _sieve_config(cfg.params), help="predictability sieve over squeezed states",
        ),
        Experiment(
            "chaos", _run_chaos, [*_CHAOS, Param("lyapunov", "bool", True)], _validate_chaos,
            help="driven double well: quantum, decohered and classical portraits",
        ),
        Experiment(
            "entropy-production", _run_entropy_production,
            [*(p if p.name != "x0" else Param("x0", "float", math.sqrt(10.0), "initial centre (default: right well minimum)") for p in _CHAOS),
             Param("D_values", "floats", (0.0125, 0.025, 0.05)), Param("regular", "bool", True, "also run with F = 0")],
            _validate_chaos, help="post-transient linear-entropy growth rate versus D",
        ),
    ]
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="decolab", description=__doc__.splitlines()[0], allow_abbrev=False)
    parser.add_argument("--version", action="version", version=f"decolab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for exp in EXPERIMENTS.values():
        sp = sub.add_parser(exp.name, help=exp.help, description=exp.help, allow_abbrev=False)
        sp.add_argument("--config", type=Path, help="flat key = value file")
        sp.add_argument("--out", type=Path, default=Path(f"decolab-{exp.name}"), help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="64-bit unsigned seed (default 0)")
        sp.add_argument("--gnuplot", action="store_true", help="also emit plot.gp")
        for prm in exp.params:
            sp.add_argument(f"--{prm.name}", dest=f"param_{prm.name}", default=None, metavar=prm.kind.upper(),
                            help=f"{prm.help} (default {prm.default})".strip())
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    exp = EXPERIMENTS[args.command]
    file_values: dict[str, str] = {}
    if args.config is not None:
        try:
            file_values = parse_config_text(args.config.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    known = {p.name: p for p in exp.params}
    seed = file_values.pop("seed", None)
    unknown = sorted(set(file_values) - set(known))
    if unknown:
        raise ConfigError(f"unknown keys for {exp.name}: {', '.join(unknown)}")
    params = {}
    for prm in exp.params:
        raw = getattr(args, f"param_{prm.name}")
        if raw is None:
            raw = file_values.get(prm.name, prm.default)
        params[prm.name] = _convert(prm, raw)
    if args.seed is not None:
        seed = args.seed
    try:
        seed = int(seed) if seed is not None else 0
    except ValueError:
        raise ConfigError(f"seed must be an integer, got {seed!r}") from None
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    cfg = ExperimentConfig(exp.name, params, args.out, seed, args.gnuplot)
    try:
        exp.validate(cfg)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def _gnuplot_script(names: list[str]) -> str:
    lines = ["set datafile separator ','", "set key autotitle columnhead", "set terminal pngcairo size 900,600"]
    for name in names:
        stem = name.rsplit(".", 1)[0]
        lines.append(f"set output '{stem}.png'")
        lines.append(f"plot for [i=2:*] '{name}' using 1:i with lines")
    return "\n".join(lines) + "\n"


def _timestamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def _write_manifest(cfg: ExperimentConfig, out: ArtifactWriter, status: str, started: str, error: str | None = None):
    manifest = {
        "tool": "decolab",
        "version": __version__,
        "status": status,
        "config": cfg.to_json(),
        "started": started,
        "finished": _timestamp(),
        "outputs": dict(sorted(out.checksums.items())),
        "diagnostics": out.diagnostics,
    }
    if error is not None:
        manifest["error"] = error
    (cfg.out_dir / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def run(cfg: ExperimentConfig) -> int:
    """Execute a validated experiment; returns the process exit status."""
    exp = EXPERIMENTS[cfg.command]
    try:
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        lock = cfg.out_dir / LOCK_NAME
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
    except FileExistsError:
        print(f"error: {cfg.out_dir} is locked by another run", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: cannot prepare output directory: {exc}", file=sys.stderr)
        return EXIT_IO
    started = _timestamp()
    out = ArtifactWriter(cfg.out_dir)
    try:
        try:
            exp.run(cfg, out)
            if cfg.gnuplot and out.plots:
                out._put("plot.gp", _gnuplot_script(out.plots).encode())
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        except (SolverFailure, GridEscapeError, FloatingPointError, np.linalg.LinAlgError, DecolabError, ValueError) as exc:
            print(f"solver failure: {exc}", file=sys.stderr)
            try:
                _write_manifest(cfg, out, "failed", started, f"{type(exc).__name__}: {exc}")
            except OSError:
                return EXIT_IO
            return EXIT_SOLVER
        try:
            _write_manifest(cfg, out, "ok", started)
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        return EXIT_OK
    finally:
        try:
            lock.unlink()
        except OSError:
            pass


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
