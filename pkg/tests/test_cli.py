import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from decolab.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_SOLVER, LOCK_NAME, MANIFEST_NAME, main, parse_config_text
from decolab.errors import ConfigError
from decolab.io import read_grid, read_series


def _files(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.name != MANIFEST_NAME}


def _manifest(directory):
    return json.loads((directory / MANIFEST_NAME).read_text())


class TestConfigParsing:
    def test_key_values_and_comments(self):
        assert parse_config_text("a = 1\n# note\n b=x # trailing\n\n") == {"a": "1", "b": "x"}

    @pytest.mark.parametrize("text", ["novalue", " = 3"])
    def test_malformed(self, text):
        with pytest.raises(ConfigError):
            parse_config_text(text)


class TestTimescales:
    def test_macroscopic_row(self, tmp_path):
        out = tmp_path / "ts"
        assert main(["timescales", "--out", str(out)]) == EXIT_OK
        cols = read_series(out / "timescales.csv")
        gram = cols["name"].index("gram_centimeter_300K")
        assert 1e-41 < float(cols["ratio"][gram]) < 1e-39
        manifest = _manifest(out)
        assert manifest["status"] == "ok"
        assert not (out / LOCK_NAME).exists()

    def test_manifest_checksums(self, tmp_path):
        out = tmp_path / "ts"
        main(["timescales", "--out", str(out), "--gnuplot"])
        manifest = _manifest(out)
        assert "plot.gp" in manifest["outputs"]
        for name, digest in manifest["outputs"].items():
            assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
        assert set(manifest["outputs"]) == set(_files(out))


class TestConfigErrors:
    def test_unknown_key_leaves_nothing(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("bogus = 1\n")
        out = tmp_path / "never"
        assert main(["measure", "--config", str(cfg), "--out", str(out)]) == EXIT_CONFIG
        assert not out.exists()

    @pytest.mark.parametrize(
        "argv",
        [
            ["measure", "--alpha", "0.9", "--beta", "0.9"],
            ["cat", "--t", "-1"],
            ["cat", "--n", "100"],
            ["discord", "--state", "nonsense"],
            ["entropy-production", "--D_values", "0.02,0.03"],
            ["sieve", "--squeezes", "0,1"],
            ["chaos", "--backend", "gpu"],
            ["wigner", "--width", "abc"],
        ],
    )
    def test_invalid_values(self, tmp_path, argv):
        out = tmp_path / "never"
        assert main([*argv, "--out", str(out)]) == EXIT_CONFIG
        assert not out.exists()

    def test_unknown_flag(self, tmp_path):
        with pytest.raises(SystemExit) as info:
            main(["measure", "--nope", "1", "--out", str(tmp_path / "x")])
        assert info.value.code == 2


class TestPrecedence:
    def test_flags_override_file(self, tmp_path):
        cfg = tmp_path / "m.cfg"
        cfg.write_text("alpha = 0.6\nbeta = 0.8\noverlap = 0.5\nseed = 11\n")
        out = tmp_path / "m"
        assert main(["measure", "--config", str(cfg), "--overlap", "0.25", "--out", str(out)]) == EXIT_OK
        config = _manifest(out)["config"]
        assert config["params"]["alpha"] == 0.6
        assert config["params"]["overlap"] == 0.25
        assert config["seed"] == 11
        out2 = tmp_path / "m2"
        main(["measure", "--config", str(cfg), "--seed", "3", "--out", str(out2)])
        assert _manifest(out2)["config"]["seed"] == 3


class TestMeasureAndDiscord:
    def test_measure_entropies(self, tmp_path):
        out = tmp_path / "m"
        assert main(["measure", "--out", str(out)]) == EXIT_OK
        values = [float(v) for v in read_series(out / "entropy.csv")["entropy_bits"]]
        assert values == pytest.approx([0.0, 1.0, 1.0], abs=1e-10)
        assert read_grid(out / "reduced.wgrd").values.shape == (4, 4)

    def test_discord_bell(self, tmp_path):
        out = tmp_path / "d"
        assert main(["discord", "--state", "bell", "--landscape_step_deg", "10", "--out", str(out)]) == EXIT_OK
        cols = read_series(out / "discord.csv")
        assert float(cols["mutual_information"][0]) == pytest.approx(2.0)
        assert float(cols["min_discord"][0]) == pytest.approx(1.0, abs=1e-3)


class TestCat:
    ARGS = ["cat", "--dx", "8", "--delta", "1", "--D", "1", "--t", "0.01", "--n", "128", "--L", "14", "--snapshots", "2"]

    def test_off_diagonal_decay_and_determinism(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main([*self.ARGS, "--out", str(a)]) == EXIT_OK
        assert main([*self.ARGS, "--out", str(b)]) == EXIT_OK
        assert _files(a) == _files(b)
        assert _manifest(a)["outputs"] == _manifest(b)["outputs"]
        cols = read_series(a / "coherence.csv")
        t = np.array(cols["t"], dtype=float)
        c = np.array(cols["offdiagonal_abs"], dtype=float)
        rate = -np.polyfit(t, np.log(c), 1)[0]
        assert rate == pytest.approx(_manifest(a)["diagnostics"]["predicted_decay_rate"], rel=0.05)
        assert (a / "rho_000.wgrd").exists() and (a / "wigner_002.wgrd").exists()

    def test_solver_failure_writes_failed_manifest(self, tmp_path):
        out = tmp_path / "f"
        argv = ["cat", "--dx", "2", "--delta", "0.3", "--D", "0", "--t", "20", "--n", "64", "--L", "6", "--out", str(out)]
        assert main(argv) == EXIT_SOLVER
        manifest = _manifest(out)
        assert manifest["status"] == "failed"
        assert "GridEscapeError" in manifest["error"]
        assert not (out / LOCK_NAME).exists()


class TestLocking:
    def test_held_lock(self, tmp_path):
        out = tmp_path / "locked"
        out.mkdir()
        (out / LOCK_NAME).write_text("123")
        assert main(["timescales", "--out", str(out)]) == EXIT_IO
        assert not (out / MANIFEST_NAME).exists()

    def test_unwritable_target(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert main(["timescales", "--out", str(blocker / "sub")]) == EXIT_IO


class TestWigner:
    def test_cat_diagnostics(self, tmp_path):
        out = tmp_path / "w"
        assert main(["wigner", "--state", "cat", "--action", "16", "--out", str(out)]) == EXIT_OK
        cols = read_series(out / "diagnostics.csv")
        assert float(cols["negativity"][0]) > 1e-2
        assert float(cols["fringe_wavelength"][0]) == pytest.approx(np.pi / 4)
        assert float(cols["closed_form_sup_error"][0]) < 1e-6
        assert float(cols["sub_planck_action"][0]) == pytest.approx(1 / 16)

    def test_gaussian_has_no_fringe(self, tmp_path):
        out = tmp_path / "g"
        assert main(["wigner", "--state", "gaussian", "--out", str(out)]) == EXIT_OK
        assert read_series(out / "diagnostics.csv")["fringe_wavelength"] == ["none"]


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "decolab.cli", "timescales", "--out", str(tmp_path / "s")], capture_output=True
    )
    assert proc.returncode == 0
