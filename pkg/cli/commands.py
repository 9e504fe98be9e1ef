"""
CLI Commands

Each cmd_* function takes a validated ExperimentConfig, does the work,
writes its data files under the config's output prefix and returns the
paths (or, for constant-c, a report).
"""

import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List

import numpy as np

from analysis.predictions import (
    form_factor_prediction,
    predict_r2_large,
    prediction_curve,
    small_x_constant_montecarlo,
    small_x_constant_quadrature,
)
from analysis.statistics import Histogram, mean_absolute_deviation
from cli.experiments import ExperimentConfig, ExperimentRunner
from graphs.sampling import RngStream
from graphs.secular import GraphKind
from utils.datafile import write_manifest, write_table
from utils.errors import UsageError
from utils.helpers import format_duration, get_provenance, get_system_info

logger = logging.getLogger(__name__)

LARGE_X_FROM = 0.5
DEVIATION_WINDOW = (2.0, 10.0)


def _path(config: ExperimentConfig, suffix: str) -> Path:
    return Path(f"{config.out}_{suffix}")


def _header(config: ExperimentConfig, **extra: Any) -> Dict[str, Any]:
    header = {"provenance": get_provenance()}
    header.update(config.header())
    header.update(extra)
    return header


def cmd_spectrum(config: ExperimentConfig) -> List[Path]:
    """One root file per realisation plus a JSON manifest."""
    started = time.perf_counter()
    runner = ExperimentRunner(config)
    spectra = runner.spectra()

    written = []
    realisations = []
    for index, spectrum in enumerate(spectra):
        columns = [np.arange(1, len(spectrum) + 1), spectrum.roots]
        extra = {"realisation": index, "columns": "n k"}
        if spectrum.origins is not None:
            columns.append((spectrum.origins == "bond").astype(float))
            extra["columns"] = "n k bond_point"
        extra.update(spectrum.diagnostics())
        path = write_table(_path(config, f"spectrum_{index:03d}.dat"), _header(config, **extra), columns)
        written.append(path)
        realisations.append({
            "file": str(path),
            "seeds": spectrum.provenance,
            "diagnostics": spectrum.diagnostics(),
        })

    manifest = {
        "provenance": get_provenance(),
        "config": config.as_dict(),
        "system": get_system_info(),
        "elapsed": format_duration(time.perf_counter() - started),
        "realisations": realisations,
    }
    manifest_path = write_manifest(_path(config, "manifest.json"), manifest)
    print(f"✅ Wrote {len(written)} spectra and {manifest_path}")
    return written


def cmd_paircorr(config: ExperimentConfig) -> Path:
    """Ensemble-averaged R2 histogram as (bin centre, R2)."""
    histogram = ExperimentRunner(config).pair_correlation()
    header = _header(
        config,
        columns="x R2",
        pairs=histogram.pair_count,
        levels=histogram.level_count,
    )
    path = write_table(_path(config, "paircorr.dat"), header, [histogram.centres, histogram.values])
    print(f"✅ Wrote pair correlation to {path}")
    return path


def cmd_formfactor(config: ExperimentConfig) -> List[Path]:
    """Empirical and predicted K(tau) on the configured tau grid."""
    taus = config.tau_grid()
    curve = ExperimentRunner(config).form_factor(taus)
    predicted = form_factor_prediction(taus)

    empirical_path = write_table(
        _path(config, "formfactor.dat"),
        _header(config, columns="tau K", window_half_width=curve.window_half_width),
        [curve.taus, curve.values],
    )
    predicted_path = write_table(
        _path(config, "formfactor_predicted.dat"),
        _header(config, columns="tau K_predicted"),
        [taus, predicted],
    )
    print(f"✅ Wrote form factors to {empirical_path} and {predicted_path}")
    return [empirical_path, predicted_path]


def cmd_predict(config: ExperimentConfig) -> Path:
    """Sample one prediction family over [start, stop]."""
    grid = config.prediction_grid()
    extra: Dict[str, Any] = {"columns": "tau K" if config.family == "formfactor" else "x R2"}
    c = None
    if config.family == "rose-small":
        c = small_x_constant_quadrature(config.tolerance)
        extra["c"] = c
    curve = prediction_curve(config.family, grid, c)
    path = write_table(_path(config, f"predict_{config.family}.dat"), _header(config, **extra), [curve.grid, curve.values])
    print(f"✅ Wrote {config.family} prediction to {path}")
    return path


@dataclass(frozen=True)
class ConstantReport:
    """Quadrature and Monte Carlo estimates of the small-x constant."""

    quadrature: float
    montecarlo_mean: float
    montecarlo_stderr: float

    @property
    def difference(self) -> float:
        return abs(self.quadrature - self.montecarlo_mean)

    @property
    def passed(self) -> bool:
        return self.difference < 4.0 * self.montecarlo_stderr

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"


def cmd_constant_c(config: ExperimentConfig) -> ConstantReport:
    """Compute c both ways and print the agreement verdict."""
    started = time.perf_counter()
    quadrature = small_x_constant_quadrature(config.tolerance)
    mean, stderr = small_x_constant_montecarlo(
        config.samples,
        RngStream(config.seed, 0, "montecarlo"),
        threads=config.worker_count,
    )
    report = ConstantReport(quadrature, mean, stderr)

    print("📐 Small-x constant c")
    print(f"   Quadrature:   {report.quadrature:.6f} (tolerance {config.tolerance:g})")
    print(f"   Monte Carlo:  {report.montecarlo_mean:.6f} ± {report.montecarlo_stderr:.3e} ({config.samples} samples)")
    print(f"   |difference|: {report.difference:.3e} (limit {4.0 * report.montecarlo_stderr:.3e})")
    print(f"{'✅' if report.passed else '❌'} Verdict: {report.verdict} in {format_duration(time.perf_counter() - started)}")
    return report


def _large_x_prediction(histogram: Histogram) -> np.ndarray:
    """Rose large-x prediction per bin; NaN where the series does not apply."""
    prediction = np.full(histogram.centres.size, np.nan)
    for i, x in enumerate(histogram.centres):
        if x > LARGE_X_FROM:
            prediction[i] = predict_r2_large(float(x), "rose")
    return prediction


def _large_x_deviation(histogram: Histogram) -> np.ndarray:
    mask = histogram.centres > LARGE_X_FROM
    return np.abs(histogram.values[mask] - _large_x_prediction(histogram)[mask])


def mean_large_x_deviation(histogram: Histogram) -> float:
    """Mean |R2 - rose large-x prediction| over bins centred in the deviation window."""
    return mean_absolute_deviation(histogram, _large_x_prediction(histogram), *DEVIATION_WINDOW)


def cmd_compare(config: ExperimentConfig) -> Path:
    """
    Comparison tables.

    bonds:     x and |R2 - rose large-x prediction| for each B in compare_bonds
    star-rose: x, R2 of the Dirac rose, R2 of the Neumann star (same B)
    lengths:   x, R2 with fixed lengths, R2 with lengths resampled per realisation
    """
    if config.poisson:
        raise UsageError("compare does not accept --poisson")

    if config.mode == "bonds":
        histograms = [
            ExperimentRunner(config.replace(bonds=b, graph=GraphKind.DIRAC_ROSE)).pair_correlation()
            for b in config.compare_bonds
        ]
        centres = histograms[0].centres
        columns = [centres[centres > LARGE_X_FROM]] + [_large_x_deviation(h) for h in histograms]
        deviations = {f"mean_deviation_B{b}": mean_large_x_deviation(h) for b, h in zip(config.compare_bonds, histograms)}
        extra: Dict[str, Any] = {"columns": "x " + " ".join(f"dR2_B{b}" for b in config.compare_bonds)}
        extra.update(deviations)
        for name, value in deviations.items():
            print(f"📊 {name} = {value:.5f}")
    elif config.mode == "star-rose":
        rose = ExperimentRunner(config.replace(graph=GraphKind.DIRAC_ROSE)).pair_correlation()
        star = ExperimentRunner(config.replace(graph=GraphKind.NEUMANN_STAR)).pair_correlation()
        columns = [rose.centres, rose.values, star.values]
        extra = {"columns": "x R2_rose R2_star"}
    else:
        fixed = ExperimentRunner(config.replace(graph=GraphKind.DIRAC_ROSE, resample_lengths=False)).pair_correlation()
        resampled = ExperimentRunner(config.replace(graph=GraphKind.DIRAC_ROSE, resample_lengths=True)).pair_correlation()
        columns = [fixed.centres, fixed.values, resampled.values]
        extra = {"columns": "x R2_fixed_lengths R2_resampled_lengths"}

    path = write_table(_path(config, f"compare_{config.mode}.dat"), _header(config, **extra), columns)
    print(f"✅ Wrote comparison to {path}")
    return path
