import os

import numpy as np
import pytest

from drivenwell.cli import main
from drivenwell.config import (
    ConfigError,
    RunConfig,
    parse_config,
    serialize_config,
    with_overrides,
)
from drivenwell.experiments import resolve_threads, run, write_csv


SMALL_SPECTRUM = """
experiment = spectrum
N = 32
n_f = 6
sweep_min = 1.48
sweep_max = 1.52
sweep_points = 5
steps_per_period = 256
samples_per_period = 128
K = 24
threads = 1
"""


class TestParseConfig:
    def test_empty_document_gives_headline_defaults(self):
        c = parse_config("")
        assert c.experiment == "spectrum"
        assert c.model.D == 2.0
        assert c.model.F == 1e-3
        assert c.model.omega == 1.5
        assert c.model.N == 64
        assert c.bath.gamma == 1e-6
        assert c.bath.temperature == 1e-4

    def test_temperature_key_reaches_bath(self):
        c = parse_config("temperature = 1e-4")
        assert c.bath.temperature == 1e-4

    def test_comments_and_blank_lines(self):
        c = parse_config("# header\n\nD = 3.5  # inline\n")
        assert c.model.D == 3.5

    def test_unknown_key_names_line(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config("D = 2\nwidth = 7\n")

    def test_bad_experiment_names_line(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config("experiment = fly")

    def test_out_of_range_named_line(self):
        with pytest.raises(ConfigError, match="line 3"):
            parse_config("D = 2\nF = 0\nN = 4\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("D = 2\nD = 3\n")

    def test_non_numeric_value(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config("D = two")

    def test_cross_field_checks(self):
        with pytest.raises(ConfigError, match="multiple"):
            parse_config("steps_per_period = 500\nsamples_per_period = 256")
        with pytest.raises(ConfigError, match="n_f"):
            parse_config("N = 8\nn_f = 10")

    def test_round_trip_identity(self):
        original = parse_config(SMALL_SPECTRUM)
        again = parse_config(serialize_config(original))
        assert again == original

    def test_round_trip_of_defaults(self):
        c = RunConfig()
        assert parse_config(serialize_config(c)) == c

    def test_overrides_revalidate(self):
        c = parse_config("")
        c2 = with_overrides(c, experiment="dynamics", output="x.csv", threads=2)
        assert (c2.experiment, c2.output, c2.threads) == ("dynamics", "x.csv", 2)
        with pytest.raises(ConfigError):
            with_overrides(c, experiment="fly")


class TestThreadResolution:
    def test_config_knob_wins(self, monkeypatch):
        monkeypatch.setenv("FLOQUET_THREADS", "7")
        c = parse_config("threads = 3")
        assert resolve_threads(c) == 3

    def test_env_used_when_config_silent(self, monkeypatch):
        monkeypatch.setenv("FLOQUET_THREADS", "5")
        assert resolve_threads(parse_config("")) == 5

    def test_default_is_cpu_count(self, monkeypatch):
        monkeypatch.delenv("FLOQUET_THREADS", raising=False)
        assert resolve_threads(parse_config("")) == (os.cpu_count() or 1)


class TestCsvContract:
    @pytest.fixture(scope="class")
    def spectrum_file(self, tmp_path_factory):
        path = tmp_path_factory.mktemp("out") / "spectrum.csv"
        config = with_overrides(parse_config(SMALL_SPECTRUM), output=str(path))
        assert run(config) == 0
        return path, config

    def test_row_count_and_header(self, spectrum_file):
        path, config = spectrum_file
        lines = path.read_text(encoding="utf-8").splitlines()
        meta = [ln for ln in lines if ln.startswith("#")]
        data = [ln for ln in lines if not ln.startswith("#")]
        assert data[0] == "omega,state,quasienergy,mean_energy,parity"
        assert len(data) - 1 == config.sweep_points * config.bath.n_f
        assert meta[0].startswith("# drivenwell ")

    def test_metadata_echo_reparses_to_same_config(self, spectrum_file):
        path, config = spectrum_file
        lines = path.read_text(encoding="utf-8").splitlines()
        echo = "\n".join(ln[2:] for ln in lines[1:] if ln.startswith("# "))
        assert parse_config(echo) == config

    def test_column_count_constant(self, spectrum_file):
        path, _ = spectrum_file
        rows = [ln for ln in path.read_text().splitlines()
                if not ln.startswith("#")]
        widths = {len(r.split(",")) for r in rows}
        assert widths == {5}

    def test_deterministic_output(self, tmp_path):
        config = parse_config(SMALL_SPECTRUM)
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        assert run(with_overrides(config, output=str(a))) == 0
        assert run(with_overrides(config, output=str(b))) == 0

        def body(path):  # identical up to the echoed output path
            return [ln for ln in path.read_text(encoding="utf-8").splitlines()
                    if not ln.startswith("# output =")]

        assert body(a) == body(b)

    def test_lf_line_endings(self, spectrum_file):
        path, _ = spectrum_file
        raw = path.read_bytes()
        assert b"\r" not in raw

    def test_write_csv_cleans_up_on_failure(self, tmp_path):
        path = tmp_path / "x.csv"

        def rows():
            yield (1.0, 2.0)
            raise RuntimeError("boom")

        with pytest.raises(RuntimeError):
            write_csv(str(path), RunConfig(), ("a", "b"), rows())
        assert not path.exists()
        assert not (tmp_path / "x.csv.tmp").exists()


class TestRunFailures:
    def test_unwritable_output_fails_cleanly(self):
        config = with_overrides(
            parse_config(SMALL_SPECTRUM), output="/nonexistent-dir/x.csv"
        )
        assert run(config) == 1

    def test_unidentifiable_regime_fails_cleanly(self, tmp_path, capsys):
        # far off resonance there is no level one driving quantum up
        config = parse_config(
            "experiment = dynamics\nomega = 0.6\nthreads = 1\n"
        )
        config = with_overrides(config, output=str(tmp_path / "dyn.csv"))
        assert run(config) == 1
        assert not (tmp_path / "dyn.csv").exists()
        assert "error" in capsys.readouterr().err


class TestCliEntry:
    def test_cli_runs_config_with_overrides(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(SMALL_SPECTRUM, encoding="utf-8")
        out = tmp_path / "cli.csv"
        status = main([str(cfg), "--out", str(out), "--threads", "1"])
        assert status == 0
        assert out.exists()

    def test_cli_experiment_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "omega = 1.45\nn_f = 6\ngamma = 1e-5\nthreads = 1\n", encoding="utf-8"
        )
        out = tmp_path / "asym.csv"
        status = main([str(cfg), "--experiment", "asymptotic", "--out", str(out)])
        assert status == 0
        header = [ln for ln in out.read_text().splitlines()
                  if not ln.startswith("#")][0]
        assert header.startswith("state,")

    def test_cli_missing_config(self, capsys):
        assert main(["/no/such/file.cfg"]) == 2
        assert "cannot read" in capsys.readouterr().err

    def test_cli_bad_config(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("experiment = fly\n", encoding="utf-8")
        assert main([str(cfg)]) == 2
        assert "line 1" in capsys.readouterr().err
