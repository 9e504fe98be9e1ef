"""
Spectral Statistics for RoseSpec

Learning Notes:
- Spectra are unfolded to unit mean spacing using the pole density
  sum_b L_b / pi (one root per pole interval)
- R2(x) is estimated by binning ordered pair separations and dividing by
  N * bin_width, so a Poisson sequence gives R2 = 1 and a lattice gives
  1 / bin_width in the bins holding integers
- The empirical form factor is a Hann-windowed power spectrum of the
  unfolded levels, normalised so an uncorrelated sequence gives K = 1
- Ensemble averages are reduced in realisation order, so results do not
  depend on how many workers produced the pieces
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from graphs.sampling import RngStream
from graphs.secular import Spectrum
from utils.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

MIN_UNFOLD_ROOTS = 100
MIN_PAIRCORR_POINTS = 1000
SPACING_TOLERANCE = 0.02
DEFAULT_BIN_WIDTH = 0.05
DEFAULT_X_MAX = 10.0
DEFAULT_WINDOW_FRACTION = 0.45
TAU_CHUNK = 64
BIN_RATIO_TOLERANCE = 1.0e-9


@dataclass(frozen=True)
class UnfoldedSpectrum:
    """Levels rescaled to unit mean spacing."""

    points: np.ndarray
    unfolding_constant: float = 1.0
    source: Optional[Spectrum] = field(default=None, repr=False, compare=False)
    rescaled: bool = False

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float).copy()
        if points.ndim != 1:
            raise InvalidArgumentError("unfolded points must be one-dimensional")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return int(self.points.size)

    def mean_spacing(self) -> float:
        if self.points.size < 2:
            return float("nan")
        return float((self.points[-1] - self.points[0]) / (self.points.size - 1))


@dataclass(frozen=True)
class Histogram:
    """Binned R2 estimate; bin b covers [b * bin_width, (b + 1) * bin_width)."""

    bin_width: float
    x_max: float
    values: np.ndarray
    pair_count: int
    level_count: int
    realisation_count: int = 1

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).copy()
        if np.any(values < 0.0):
            raise InvalidArgumentError("histogram values must be non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def edges(self) -> np.ndarray:
        return np.arange(self.values.size + 1) * self.bin_width

    @property
    def centres(self) -> np.ndarray:
        return (np.arange(self.values.size) + 0.5) * self.bin_width

    def select(self, x_lo: float, x_hi: float) -> np.ndarray:
        centres = self.centres
        return (centres >= x_lo) & (centres <= x_hi)

    def mean_over(self, x_lo: float, x_hi: float) -> float:
        mask = self.select(x_lo, x_hi)
        if not np.any(mask):
            raise InvalidArgumentError(f"no bins with centres in [{x_lo}, {x_hi}]")
        return float(np.mean(self.values[mask]))


@dataclass(frozen=True)
class FormFactorCurve:
    """Empirical K(tau) on a tau grid."""

    taus: np.ndarray
    values: np.ndarray
    realisation_count: int
    window_half_width: float


def unfold(spec: Spectrum) -> UnfoldedSpectrum:
    """x_n = k_n * total_length / pi, rescaled empirically if the mean spacing drifts."""
    if len(spec) < MIN_UNFOLD_ROOTS:
        raise InvalidArgumentError(
            f"unfolding needs at least {MIN_UNFOLD_ROOTS} roots, got {len(spec)}"
        )
    constant = spec.total_length / math.pi
    points = spec.roots * constant
    unfolded = UnfoldedSpectrum(points, constant, spec)

    spacing = unfolded.mean_spacing()
    if abs(spacing - 1.0) > SPACING_TOLERANCE:
        factor = points.size / points[-1]
        logger.warning(
            f"Mean spacing {spacing:.4f} outside tolerance; rescaling by {factor:.6f}"
        )
        unfolded = UnfoldedSpectrum(points * factor, constant * factor, spec, rescaled=True)
    return unfolded


def poisson_surrogate(n_levels: int, rng: RngStream) -> UnfoldedSpectrum:
    """Sorted i.i.d. uniform points on [0, n_levels]: the uncorrelated baseline."""
    if n_levels < 2:
        raise InvalidArgumentError(f"n_levels must be >= 2, got {n_levels}")
    points = np.sort(rng.generator().uniform(0.0, float(n_levels), size=n_levels))
    return UnfoldedSpectrum(points)


def bin_count(bin_width: float, x_max: float) -> int:
    """Number of bins of width bin_width tiling [0, x_max]; x_max must be a whole number of bins."""
    if not bin_width > 0:
        raise InvalidArgumentError(f"bin width must be positive, got {bin_width!r}")
    if not x_max >= bin_width:
        raise InvalidArgumentError(f"x_max must be >= bin width, got {x_max!r}")
    ratio = x_max / bin_width
    n_bins = int(round(ratio))
    if abs(ratio - n_bins) > BIN_RATIO_TOLERANCE * ratio:
        raise InvalidArgumentError(
            f"x_max {x_max!r} is not a whole number of bins of width {bin_width!r}"
        )
    return n_bins


def pair_correlation_single(
    uspec: UnfoldedSpectrum,
    bin_width: float = DEFAULT_BIN_WIDTH,
    x_max: float = DEFAULT_X_MAX,
) -> Histogram:
    """
    R2 histogram of one unfolded spectrum.

    Only levels inside [x_1 + x_max, x_N - x_max] take part, both as
    reference and as partner, and N is the number of those levels.
    """
    n_bins = bin_count(bin_width, x_max)
    x = uspec.points
    if x.size < MIN_PAIRCORR_POINTS:
        raise InvalidArgumentError(
            f"pair correlation needs at least {MIN_PAIRCORR_POINTS} levels, got {x.size}"
        )
    inside = (x >= x[0] + x_max) & (x <= x[-1] - x_max)
    y = x[inside]
    if y.size < 2:
        raise InvalidArgumentError("spectrum too short for the requested x_max")

    counts = np.zeros(n_bins, dtype=np.int64)
    for offset in range(1, y.size):
        gaps = y[offset:] - y[:-offset]
        near = gaps[gaps < x_max]
        if near.size == 0:
            break
        # round away representation error so integer gaps land in their own bin;
        # gaps a rounding step below x_max stay in the last bin
        bins = np.floor(np.round(near / bin_width, 9)).astype(np.int64)
        counts += np.bincount(np.minimum(bins, n_bins - 1), minlength=n_bins)

    return Histogram(
        bin_width=bin_width,
        x_max=x_max,
        values=counts / (y.size * bin_width),
        pair_count=int(counts.sum()),
        level_count=int(y.size),
    )


def ensemble_average(histograms: Sequence[Histogram]) -> Histogram:
    """Average histograms in the given order."""
    if len(histograms) == 0:
        raise InvalidArgumentError("cannot average an empty ensemble")
    first = histograms[0]
    total = np.zeros_like(first.values)
    for histogram in histograms:
        if histogram.values.shape != first.values.shape or histogram.bin_width != first.bin_width:
            raise InvalidArgumentError("histograms in an ensemble must share their binning")
        total = total + histogram.values
    return Histogram(
        bin_width=first.bin_width,
        x_max=first.x_max,
        values=total / len(histograms),
        pair_count=sum(h.pair_count for h in histograms),
        level_count=sum(h.level_count for h in histograms),
        realisation_count=sum(h.realisation_count for h in histograms),
    )


def pair_correlation(
    ensemble: Sequence[UnfoldedSpectrum],
    bin_width: float = DEFAULT_BIN_WIDTH,
    x_max: float = DEFAULT_X_MAX,
) -> Histogram:
    """Ensemble-averaged R2 histogram."""
    if len(ensemble) == 0:
        raise InvalidArgumentError("pair correlation of an empty ensemble")
    return ensemble_average([pair_correlation_single(u, bin_width, x_max) for u in ensemble])


def hann_window(points: np.ndarray, centre: float, half_width: float) -> np.ndarray:
    """cos^2(pi (x - centre) / (2 half_width)) inside the window, 0 outside."""
    offset = (points - centre) / half_width
    weights = np.cos(0.5 * np.pi * offset) ** 2
    return np.where(np.abs(offset) < 1.0, weights, 0.0)


def form_factor_single(
    uspec: UnfoldedSpectrum,
    taus: np.ndarray,
    half_width: Optional[float] = None,
) -> np.ndarray:
    """|sum_n w(x_n) e^{2 pi i x_n tau}|^2 / sum_n w(x_n)^2 for one spectrum."""
    taus = np.asarray(taus, dtype=float)
    if taus.ndim != 1 or taus.size == 0 or np.any(taus <= 0.0):
        raise InvalidArgumentError("tau grid must be a non-empty sequence of positive values")
    x = uspec.points
    if x.size < 2:
        raise InvalidArgumentError("form factor needs at least two levels")
    span = x[-1] - x[0]
    if half_width is None:
        half_width = DEFAULT_WINDOW_FRACTION * span
    centre = 0.5 * (x[0] + x[-1])
    if not half_width > 0 or centre - half_width < x[0] or centre + half_width > x[-1]:
        raise InvalidArgumentError(
            f"window half-width {half_width!r} does not fit inside the spectrum (span {span:.6g})"
        )

    weights = hann_window(x, centre, half_width)
    keep = weights > 0.0
    if np.count_nonzero(keep) < 2:
        raise InvalidArgumentError("window holds fewer than two levels")
    xw, w = x[keep] - centre, weights[keep]
    norm = float(np.sum(w * w))

    values = np.empty(taus.size)
    for start in range(0, taus.size, TAU_CHUNK):
        phase = 2.0 * np.pi * np.outer(taus[start:start + TAU_CHUNK], xw)
        real = np.cos(phase) @ w
        imag = np.sin(phase) @ w
        values[start:start + TAU_CHUNK] = (real * real + imag * imag) / norm
    return values


def average_form_factor(
    curves: Sequence[np.ndarray],
    taus: np.ndarray,
    half_width: float,
) -> FormFactorCurve:
    """Combine per-realisation form factors in order."""
    if len(curves) == 0:
        raise InvalidArgumentError("cannot average an empty ensemble")
    total = np.zeros(len(taus))
    for curve in curves:
        total = total + curve
    return FormFactorCurve(np.asarray(taus, dtype=float), total / len(curves), len(curves), float(half_width))


def empirical_form_factor(
    ensemble: Sequence[UnfoldedSpectrum],
    taus: np.ndarray,
    half_width: Optional[float] = None,
) -> FormFactorCurve:
    """Ensemble-averaged Hann-windowed form factor."""
    if len(ensemble) == 0:
        raise InvalidArgumentError("form factor of an empty ensemble")
    if half_width is None:
        half_width = min(DEFAULT_WINDOW_FRACTION * (u.points[-1] - u.points[0]) for u in ensemble)
    curves = [form_factor_single(u, taus, half_width) for u in ensemble]
    return average_form_factor(curves, taus, half_width)


def fitted_small_x_slope(histogram: Histogram, x_lo: float, x_hi: float) -> float:
    """Least-squares slope of R2 through the origin over bins centred in [x_lo, x_hi]."""
    mask = histogram.select(x_lo, x_hi)
    if not np.any(mask):
        raise InvalidArgumentError(f"no bins with centres in [{x_lo}, {x_hi}]")
    x = histogram.centres[mask]
    y = histogram.values[mask]
    return float(np.dot(x, y) / np.dot(x, x))


def mean_absolute_deviation(histogram: Histogram, prediction: np.ndarray, x_lo: float, x_hi: float) -> float:
    """Mean |R2 - prediction| over bins centred in [x_lo, x_hi]; prediction is per bin."""
    mask = histogram.select(x_lo, x_hi)
    return float(np.mean(np.abs(histogram.values[mask] - np.asarray(prediction)[mask])))
