"""Round trips for CSV/JSON/checkpoint files and the config grammar."""

import json

import numpy as np
import pytest

from cnslab.config import ConfigError, DEFAULT_CONFIG, config_hash, parse_config
from cnslab.diagnostics import DiagnosticSeries
from cnslab.io import (
    CheckpointError,
    read_checkpoint,
    read_series,
    write_checkpoint,
    write_plot_data,
    write_series,
    write_summary,
)
from cnslab.solver import FlowState, PhysicalParams
from cnslab.spectral import VectorField, make_grid, random_field

PARAMS = PhysicalParams(mu=1.0, lam=0.0, gamma=1.4)


def _random_series(seed=0, n=7):
    rng = np.random.default_rng(seed)
    series = DiagnosticSeries()
    for i in range(n):
        series.append(
            float(i) * 0.5,
            {"E": rng.uniform(), "l2_a": rng.uniform(), "a:besov:s=0.5,p=2,r=1": rng.uniform()},
        )
    return series


class TestSeriesCsv:
    def test_round_trip_exact(self, tmp_path):
        series = _random_series()
        path = tmp_path / "series.csv"
        write_series(path, series, "abc123")
        back = read_series(path)
        assert back.times == series.times
        assert back.metadata["config_hash"] == "abc123"
        for key in series.columns:
            assert back.columns[key] == series.columns[key]

    def test_norm_key_columns_with_commas_survive(self, tmp_path):
        series = _random_series()
        path = tmp_path / "series.csv"
        write_series(path, series)
        header = read_series(path).header
        assert "a:besov:s=0.5,p=2,r=1" in header

    def test_fault_annotation_round_trip(self, tmp_path):
        series = _random_series()
        series.fault = {"type": "PositivityFault", "time": 1.5, "message": "boom"}
        path = tmp_path / "series.csv"
        write_series(path, series)
        back = read_series(path)
        assert back.fault == series.fault

    def test_malformed_csv_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("nonsense,header\n1,2\n")
        with pytest.raises(ValueError):
            read_series(path)


class TestSummaryAndPlots:
    def test_summary_is_sorted_deterministic_json(self, tmp_path):
        path = tmp_path / "summary.json"
        write_summary(path, {"b": 1, "a": {"z": 2.5, "y": None}})
        text = path.read_text()
        assert text == json.dumps({"a": {"y": None, "z": 2.5}, "b": 1},
                                  sort_keys=True, indent=2) + "\n"

    def test_plot_data_two_columns(self, tmp_path):
        path = tmp_path / "plot.dat"
        write_plot_data(path, [0.0, 1.0], [2.0, 3.0], label="t y", config_hash="ff")
        lines = path.read_text().splitlines()
        assert lines[0] == "# config_hash=ff"
        assert lines[-1].split() == ["1", "3"]


class TestCheckpoint:
    def _state(self, seed=0):
        grid = make_grid(8, 2.0 * np.pi, 3)
        a = 0.05 * random_field(grid, seed=seed, band=(0.5, 2.0))
        u = VectorField([0.05 * random_field(grid, seed=seed + 1 + i, band=(0.5, 2.0))
                         for i in range(3)])
        return FlowState(0.75, a, u, PARAMS)

    def test_round_trip_bit_exact(self, tmp_path):
        state = self._state()
        path = tmp_path / "state.ckpt"
        write_checkpoint(path, state, "cafe01")
        back, chash = read_checkpoint(path)
        assert chash == "cafe01"
        assert back.t == state.t
        assert back.params == PARAMS
        assert np.array_equal(back.a.data, state.a.data)
        for x, y in zip(back.u, state.u):
            assert np.array_equal(x.data, y.data)

    def test_truncated_file_names_expected_bytes(self, tmp_path):
        state = self._state(seed=5)
        path = tmp_path / "state.ckpt"
        write_checkpoint(path, state)
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) // 2])
        with pytest.raises(CheckpointError, match=str(len(raw))):
            read_checkpoint(path)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bogus.ckpt"
        path.write_bytes(b"NOTMAGIC" + b"\0" * 200)
        with pytest.raises(CheckpointError, match="magic"):
            read_checkpoint(path)


class TestConfigGrammar:
    def test_default_config_parses(self):
        cfg = parse_config(DEFAULT_CONFIG)
        assert cfg.grid_n == 32
        assert cfg.params.gamma == 1.4
        assert cfg.scenario.kind == "equilibrium_perturbation"
        assert cfg.diagnostics.p0_list == [1.0, 2.0]
        assert len(cfg.diagnostics.norms) == 2

    def test_unknown_key_is_error(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config("[grid]\nn = 16\nresolution = 8\n")

    def test_unknown_section_is_error(self):
        with pytest.raises(ConfigError, match="unknown section"):
            parse_config("[mesh]\nn = 16\n")

    def test_all_problems_reported_at_once(self):
        bad = "[grid]\nn = 10\n[params]\nmu = -1\n[solver]\nscheme = rk9\n"
        with pytest.raises(ConfigError) as err:
            parse_config(bad)
        assert len(err.value.problems) >= 3

    def test_strict_mode_viscosity_check(self):
        text = "[params]\nmu = 1.0\nlambda = 3.0\n[solver]\nstrict_mode = true\n"
        with pytest.raises(ConfigError, match="mu > lambda/2"):
            parse_config(text)

    def test_hash_stable(self):
        assert config_hash("x = 1\n") == config_hash("x = 1\n")
        assert config_hash("x = 1\n") != config_hash("x = 2\n")

    def test_lyapunov_constants_literal(self):
        text = "[diagnostics]\nlyapunov = 1, 2, 3, 4, 5, 6\n"
        cfg = parse_config(text)
        assert cfg.diagnostics.lyapunov.A4 == 4.0

    def test_comments_and_blank_lines_ignored(self):
        text = "# header\n\n[grid]\nn = 16  # points\n"
        assert parse_config(text).grid_n == 16
