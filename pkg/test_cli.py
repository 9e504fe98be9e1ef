"""Tests for main.py, cli/ and the configuration and data-file layers."""

import json
import logging
import math

import numpy as np
import pytest

from analysis.predictions import (
    form_factor_prediction,
    predict_r2_large,
    small_x_constant_quadrature,
)
from analysis.statistics import fitted_small_x_slope
from cli.commands import ConstantReport, cmd_compare, cmd_constant_c, mean_large_x_deviation
from cli.experiments import ExperimentConfig, ExperimentRunner
from graphs.secular import GraphKind
from main import main
from utils.config import Config
from utils.datafile import format_number, format_table, read_table, write_table
from utils.errors import DataFileError, UsageError


@pytest.fixture(autouse=True)
def restore_logging():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


def run(tmp_path, *argv):
    return main(list(argv) + ["--out", str(tmp_path / "run"), "--threads", "1", "--log-level", "WARNING"])


def data_rows(path):
    return [line for line in path.read_text().splitlines() if not line.startswith("#")]


SMALL_ROSE = ("--bonds", "5", "--eigenvalues", "2000", "--realisations", "2")


class TestSpectrumCommand:
    def test_single_bond_roots(self, tmp_path):
        code = run(
            tmp_path, "spectrum", "--bonds", "1", "--lengths", "1", "--angles", repr(math.pi / 2),
            "--eigenvalues", "50", "--realisations", "2",
        )
        assert code == 0
        header, frame = read_table(tmp_path / "run_spectrum_000.dat")
        np.testing.assert_allclose(frame[1], (np.arange(1, 51) - 0.5) * math.pi, atol=1e-9)
        assert list(frame[0]) == list(range(1, 51))
        assert header["graph"] == "dirac-rose"
        assert header["realisation"] == "0"
        assert header["provenance"].startswith("rosespec")

        manifest = json.loads((tmp_path / "run_manifest.json").read_text())
        assert len(manifest["realisations"]) == 2
        assert manifest["config"]["bonds"] == 1
        assert (tmp_path / "run_spectrum_001.dat").exists()

    def test_neumann_rose_marks_bond_points(self, tmp_path):
        code = run(
            tmp_path, "spectrum", "--graph", "neumann-rose", "--bonds", "1", "--lengths", "1",
            "--eigenvalues", "10", "--realisations", "1",
        )
        assert code == 0
        header, frame = read_table(tmp_path / "run_spectrum_000.dat")
        assert header["columns"] == "n k bond_point"
        np.testing.assert_allclose(frame[1], 2 * math.pi * np.arange(1, 11), atol=1e-9)
        assert np.all(frame[2] == 1.0)

    def test_rerun_is_byte_identical(self, tmp_path):
        argv = ("spectrum", "--bonds", "4", "--eigenvalues", "300", "--realisations", "3", "--seed", "9")
        assert run(tmp_path, *argv) == 0
        first = (tmp_path / "run_spectrum_002.dat").read_bytes()
        assert run(tmp_path, *argv) == 0
        assert (tmp_path / "run_spectrum_002.dat").read_bytes() == first

    def test_poisson_has_no_spectra(self, tmp_path):
        assert run(tmp_path, "spectrum", "--poisson", *SMALL_ROSE) == 2


class TestStatisticsCommands:
    def test_paircorr_file(self, tmp_path):
        assert run(tmp_path, "paircorr", *SMALL_ROSE) == 0
        header, frame = read_table(tmp_path / "run_paircorr.dat")
        assert len(frame) == 200
        np.testing.assert_allclose(frame[0][:2], [0.025, 0.075])
        assert np.all(frame[1] >= 0.0)
        assert header["bin_width"] == "0.05"
        assert int(header["levels"]) > 0

    def test_paircorr_independent_of_threads(self, tmp_path):
        out = str(tmp_path / "run")
        assert main(["paircorr", *SMALL_ROSE, "--out", out, "--threads", "1"]) == 0
        serial = data_rows(tmp_path / "run_paircorr.dat")
        assert main(["paircorr", *SMALL_ROSE, "--out", out, "--threads", "3"]) == 0
        assert data_rows(tmp_path / "run_paircorr.dat") == serial

    def test_formfactor_files(self, tmp_path):
        code = run(
            tmp_path, "formfactor", *SMALL_ROSE, "--tau-min", "0.5", "--tau-max", "1.0", "--tau-step", "0.1",
        )
        assert code == 0
        header, empirical = read_table(tmp_path / "run_formfactor.dat")
        _, predicted = read_table(tmp_path / "run_formfactor_predicted.dat")
        assert len(empirical) == len(predicted) == 6
        np.testing.assert_allclose(predicted[1], form_factor_prediction(predicted[0].to_numpy()), rtol=1e-12)
        assert float(header["window_half_width"]) > 0.0

    def test_poisson_paircorr(self, tmp_path):
        assert run(tmp_path, "paircorr", "--poisson", "--eigenvalues", "5000", "--realisations", "4") == 0
        _, frame = read_table(tmp_path / "run_paircorr.dat")
        assert abs(frame[1][frame[0] > 1.0].mean() - 1.0) < 0.05

    def test_compare_star_rose(self, tmp_path):
        assert run(tmp_path, "compare", "--mode", "star-rose", *SMALL_ROSE) == 0
        header, frame = read_table(tmp_path / "run_compare_star-rose.dat")
        assert header["columns"] == "x R2_rose R2_star"
        assert frame.shape == (200, 3)

    def test_compare_rejects_poisson(self):
        with pytest.raises(UsageError):
            cmd_compare(ExperimentConfig(poisson=True))


class TestPredictCommand:
    def test_rose_large(self, tmp_path):
        assert run(tmp_path, "predict", "--family", "rose-large") == 0
        header, frame = read_table(tmp_path / "run_predict_rose-large.dat")
        x = frame[0].to_numpy()
        assert len(x) == 181
        expected = 1 + 2 / (math.pi ** 2 * x ** 2) - 13 / (8 * math.pi ** 4 * x ** 4)
        np.testing.assert_allclose(frame[1], expected, rtol=1e-12)
        assert header["columns"] == "x R2"

    def test_rose_small_records_constant(self, tmp_path):
        assert run(tmp_path, "predict", "--family", "rose-small", "--start", "0", "--stop", "0.3") == 0
        header, frame = read_table(tmp_path / "run_predict_rose-small.dat")
        c = float(header["c"])
        assert c == pytest.approx(small_x_constant_quadrature())
        np.testing.assert_allclose(frame[1], math.pi * c / 6.0 * frame[0], rtol=1e-12)

    def test_large_family_out_of_domain(self, tmp_path):
        assert run(tmp_path, "predict", "--family", "rose-large", "--start", "0.2") == 2


class TestConstantCommand:
    def test_report(self, capsys):
        report = cmd_constant_c(ExperimentConfig(samples=20_000, threads=1))
        assert report.quadrature == pytest.approx(6.781, abs=0.005)
        assert report.passed
        assert "Verdict: PASS" in capsys.readouterr().out

    def test_decision_rule(self):
        assert ConstantReport(6.781, 6.785, 0.0033).verdict == "PASS"
        failed = ConstantReport(6.78, 6.79, 0.001)
        assert not failed.passed
        assert failed.verdict == "FAIL"
        assert failed.difference == pytest.approx(0.01)


class TestExitCodes:
    @pytest.mark.parametrize(
        "argv",
        [
            ["spectrum", "--bonds", "0"],
            ["paircorr", "--bin-width", "2"],
            ["paircorr", "--x-max", "0.5"],
            ["paircorr", "--bin-width", "0.3"],
            ["spectrum", "--bonds", "2", "--lengths", "1"],
            ["spectrum", "--graph", "neumann-star", "--bonds", "1", "--angles", "1"],
            ["frobnicate"],
            ["spectrum", "--graph", "triangle"],
        ],
    )
    def test_usage_errors(self, tmp_path, argv):
        assert run(tmp_path, *argv) == 2

    def test_missing_config_file(self, tmp_path):
        assert run(tmp_path, "spectrum", "--config", str(tmp_path / "missing.txt")) == 4

    def test_unknown_config_key(self, tmp_path):
        config_file = tmp_path / "experiment.txt"
        config_file.write_text("bondz=3\n")
        assert run(tmp_path, "spectrum", "--config", str(config_file)) == 2


class TestConfig:
    def test_defaults(self):
        experiment = Config().to_experiment()
        assert experiment == ExperimentConfig()
        assert experiment.graph is GraphKind.DIRAC_ROSE
        assert experiment.compare_bonds == (21, 61, 101)

    def test_precedence(self, tmp_path):
        config_file = tmp_path / "experiment.txt"
        config_file.write_text("# demo\nbonds=7\nseed=3\nresample-lengths=yes\n")
        config = Config(config_file)
        assert config.get("bonds") == 7
        assert config.get("resample_lengths") is True
        config.apply_overrides({"bonds": 9, "seed": None})
        experiment = config.to_experiment()
        assert (experiment.bonds, experiment.seed) == (9, 3)

    def test_flags_override_file(self, tmp_path):
        config_file = tmp_path / "experiment.txt"
        config_file.write_text(
            f"bonds=1\nlengths=1\nangles={math.pi / 2!r}\neigenvalues=20\nrealisations=1\n"
        )
        assert run(tmp_path, "spectrum", "--config", str(config_file), "--eigenvalues", "30") == 0
        _, frame = read_table(tmp_path / "run_spectrum_000.dat")
        assert len(frame) == 30

    @pytest.mark.parametrize("key, value", [("bondz", "3"), ("bonds", "many"), ("poisson", "maybe")])
    def test_bad_values(self, key, value):
        with pytest.raises(UsageError):
            Config().set(key, value)

    def test_export(self, tmp_path):
        config = Config()
        config.set("x-max", "8")
        exported = json.loads(config.export_config(tmp_path / "config.json").read_text())
        assert exported["x_max"] == 8.0


class TestExperimentConfig:
    @pytest.mark.parametrize(
        "changes",
        [
            {"bonds": 0},
            {"realisations": -1},
            {"threads": -1},
            {"bin_width": 1.5},
            {"x_max": 0.5},
            {"bin_width": 0.3},
            {"bin_width": 0.25, "x_max": 10.1},
            {"bonds": 2, "lengths": "1.0"},
            {"graph": "neumann-star", "bonds": 1, "angles": "1.0"},
            {"window": 0.6},
            {"family": "rose-medium"},
            {"start": 5.0, "stop": 1.0},
            {"tau_min": 0.0},
            {"mode": "all"},
            {"compare_bonds": "0"},
            {"graph": "triangle"},
            {"lengths": "1,x", "bonds": 2},
        ],
    )
    def test_invalid(self, changes):
        with pytest.raises(UsageError):
            ExperimentConfig(**changes)

    def test_grids(self):
        config = ExperimentConfig()
        assert config.tau_grid().size == 200
        assert config.prediction_grid()[-1] == pytest.approx(10.0)

    def test_length_protocol(self):
        assert ExperimentConfig().fixed_lengths
        assert not ExperimentConfig(resample_lengths=True).fixed_lengths
        assert not ExperimentConfig(graph="neumann-star").fixed_lengths
        assert ExperimentConfig(graph="neumann-star", bonds=1, lengths="1").fixed_lengths

    def test_fixed_lengths_shared_across_realisations(self):
        runner = ExperimentRunner(ExperimentConfig(bonds=6))
        np.testing.assert_array_equal(runner.bond_lengths(0).lengths, runner.bond_lengths(5).lengths)
        resampling = ExperimentRunner(ExperimentConfig(bonds=6, resample_lengths=True))
        assert not np.array_equal(resampling.bond_lengths(0).lengths, resampling.bond_lengths(5).lengths)

    def test_replace(self):
        config = ExperimentConfig().replace(bonds=21, graph=GraphKind.NEUMANN_STAR)
        assert config.bonds == 21
        assert config.graph is GraphKind.NEUMANN_STAR


class TestDataFiles:
    def test_round_trip_is_byte_identical(self, tmp_path):
        path = write_table(
            tmp_path / "table.dat",
            {"provenance": "rosespec 0.1.0", "bin_width": 0.05, "bonds": (21, 61)},
            [np.arange(1, 6), np.linspace(0.0, 1.0, 5) / 3.0],
        )
        text = path.read_text()
        header, frame = read_table(path)
        assert header["bonds"] == "21,61"
        assert format_table(header, [frame[c] for c in frame.columns]) == text

    def test_command_output_round_trips(self, tmp_path):
        assert run(tmp_path, "paircorr", *SMALL_ROSE) == 0
        path = tmp_path / "run_paircorr.dat"
        header, frame = read_table(path)
        assert format_table(header, [frame[c] for c in frame.columns]) == path.read_text()

    def test_values_read_back_exactly(self, tmp_path):
        values = np.array([math.pi, 1.0 / 3.0, 12345.678901234567, 1e-300, 2.0, -0.025])
        path = write_table(tmp_path / "exact.dat", {"columns": "v"}, [values])
        _, frame = read_table(path)
        np.testing.assert_array_equal(frame[0].to_numpy(), values)

    @pytest.mark.parametrize("value, text", [(3.0, "3"), (0.025, "0.025"), (-0.0, "0"), (1e20, "1e+20"), (float("nan"), "nan")])
    def test_format_number(self, value, text):
        assert format_number(value) == text

    def test_ragged_columns(self):
        with pytest.raises(DataFileError):
            format_table({}, [[1.0, 2.0], [1.0]])

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataFileError):
            read_table(tmp_path / "absent.dat")


@pytest.mark.slow
def test_desk_scale_statistics():
    rose = ExperimentRunner(ExperimentConfig(bonds=101, eigenvalues=20_000, realisations=20))
    histogram = rose.pair_correlation()
    expected_slope = math.pi * small_x_constant_quadrature() / 6.0
    assert fitted_small_x_slope(histogram, 0.05, 0.3) == pytest.approx(expected_slope, rel=0.1)

    mask = histogram.select(3.0, 8.0)
    prediction = np.mean([predict_r2_large(x, "rose") for x in histogram.centres[mask]])
    assert abs(np.mean(histogram.values[mask]) - prediction) < 0.01

    taus = np.arange(0.08, 0.1201, 0.001)
    curve = rose.form_factor(taus)
    assert abs(np.mean(curve.values) - np.mean(form_factor_prediction(taus))) < 0.1

    star = ExperimentRunner(ExperimentConfig(graph="neumann-star", bonds=101, eigenvalues=20_000, realisations=20))
    star_slope = fitted_small_x_slope(star.pair_correlation(), 0.05, 0.3)
    assert star_slope == pytest.approx(math.pi * math.sqrt(3.0) / 2.0, rel=0.1)


@pytest.mark.slow
def test_deviation_decreases_with_bond_count(tmp_path):
    config = ExperimentConfig(mode="bonds", compare_bonds=(21, 61, 101), out=str(tmp_path / "trend"))
    path = cmd_compare(config)
    header, _ = read_table(path)
    deviations = [float(header[f"mean_deviation_B{b}"]) for b in (21, 61, 101)]
    assert deviations[0] > deviations[1] > deviations[2]

    histogram = ExperimentRunner(config.replace(bonds=101)).pair_correlation()
    assert mean_large_x_deviation(histogram) == pytest.approx(deviations[2])
