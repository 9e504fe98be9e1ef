"""
Ensemble Experiments

Learning Notes:
- ExperimentConfig is the frozen, validated description of one run
- ExperimentRunner turns a realisation index into a spectrum, an unfolded
  spectrum or a histogram, and fans indices out over a thread pool
- Every realisation owns its own RngStream keyed by (seed, index, purpose),
  and executor.map returns results in index order, so averages do not
  depend on the number of threads
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple, TypeVar

import numpy as np

from analysis.statistics import (
    DEFAULT_WINDOW_FRACTION,
    FormFactorCurve,
    Histogram,
    UnfoldedSpectrum,
    average_form_factor,
    bin_count,
    ensemble_average,
    form_factor_single,
    pair_correlation_single,
    poisson_surrogate,
    unfold,
)
from graphs.sampling import BondLengths, RngStream, sample_bond_lengths, sample_spin_configuration
from graphs.secular import (
    GraphKind,
    Spectrum,
    dirac_rose_spectrum,
    neumann_rose_spectrum,
    neumann_star_spectrum,
)
from utils.errors import InvalidArgumentError, UsageError
from utils.helpers import default_thread_count

logger = logging.getLogger(__name__)

T = TypeVar("T")

PREDICT_FAMILIES = ("rose-small", "rose-large", "star-small", "star-large", "formfactor")
COMPARE_MODES = ("bonds", "star-rose", "lengths")


def _parse_list(value: Any, cast: Callable[[str], Any]) -> Optional[Tuple[Any, ...]]:
    if value is None or value == "" or value == ():
        return None
    if isinstance(value, (list, tuple)):
        return tuple(cast(v) for v in value)
    try:
        return tuple(cast(v.strip()) for v in str(value).split(",") if v.strip())
    except ValueError as e:
        raise UsageError(f"cannot parse list {value!r}: {e}") from e


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One validated experiment.

    Counts are positive, 0 < bin_width <= 1 and x_max >= 1. lengths and
    angles are debug overrides; poisson swaps every spectrum for an
    uncorrelated surrogate with the same number of levels.
    """

    graph: GraphKind = GraphKind.DIRAC_ROSE
    bonds: int = 101
    eigenvalues: int = 20000
    realisations: int = 20
    seed: int = 1
    bin_width: float = 0.05
    x_max: float = 10.0
    out: str = "rosespec"
    resample_lengths: bool = False
    threads: int = 0
    lengths: Optional[Tuple[float, ...]] = None
    angles: Optional[Tuple[float, ...]] = None
    poisson: bool = False
    tau_min: float = 0.01
    tau_max: float = 2.0
    tau_step: float = 0.01
    window: float = DEFAULT_WINDOW_FRACTION
    family: str = "rose-large"
    start: float = 1.0
    stop: float = 10.0
    step: float = 0.05
    samples: int = 1_000_000
    tolerance: float = 1.0e-8
    mode: str = "bonds"
    compare_bonds: Tuple[int, ...] = (21, 61, 101)

    def __post_init__(self):
        try:
            object.__setattr__(self, "graph", GraphKind(self.graph))
        except ValueError as e:
            raise UsageError(f"unknown graph kind {self.graph!r}") from e
        object.__setattr__(self, "lengths", _parse_list(self.lengths, float))
        object.__setattr__(self, "angles", _parse_list(self.angles, float))
        object.__setattr__(self, "compare_bonds", _parse_list(self.compare_bonds, int) or ())
        self.validate()

    def validate(self) -> None:
        for name in ("bonds", "eigenvalues", "realisations", "samples"):
            if getattr(self, name) <= 0:
                raise UsageError(f"{name} must be positive, got {getattr(self, name)}")
        if self.threads < 0:
            raise UsageError(f"threads must be >= 0, got {self.threads}")
        if not 0.0 < self.bin_width <= 1.0:
            raise UsageError(f"bin_width must lie in (0, 1], got {self.bin_width}")
        if not self.x_max >= 1.0:
            raise UsageError(f"x_max must be >= 1, got {self.x_max}")
        try:
            bin_count(self.bin_width, self.x_max)
        except InvalidArgumentError as exc:
            raise UsageError(str(exc)) from exc
        if self.lengths is not None and len(self.lengths) != self.bonds:
            raise UsageError(f"--lengths gives {len(self.lengths)} values for {self.bonds} bonds")
        if self.angles is not None:
            if len(self.angles) != self.bonds:
                raise UsageError(f"--angles gives {len(self.angles)} values for {self.bonds} bonds")
            if self.graph is not GraphKind.DIRAC_ROSE:
                raise UsageError("--angles only applies to the dirac-rose graph")
        if not 0.0 < self.tau_min <= self.tau_max or self.tau_step <= 0.0:
            raise UsageError("tau range needs 0 < tau_min <= tau_max and tau_step > 0")
        if not 0.0 < self.window <= 0.5:
            raise UsageError(f"window must lie in (0, 0.5], got {self.window}")
        if self.family not in PREDICT_FAMILIES:
            raise UsageError(f"family must be one of {PREDICT_FAMILIES}, got {self.family!r}")
        if self.start > self.stop or self.step <= 0.0:
            raise UsageError("prediction range needs start <= stop and step > 0")
        if self.mode not in COMPARE_MODES:
            raise UsageError(f"mode must be one of {COMPARE_MODES}, got {self.mode!r}")
        if not self.compare_bonds or any(b <= 0 for b in self.compare_bonds):
            raise UsageError("compare_bonds must list positive bond counts")

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in values.items() if k in names})

    def replace(self, **changes) -> "ExperimentConfig":
        values = self.as_dict()
        values.update(changes)
        return ExperimentConfig.from_mapping(values)

    def as_dict(self) -> Dict[str, Any]:
        values = asdict(self)
        values["graph"] = self.graph.value
        return values

    def header(self) -> Dict[str, Any]:
        """The config as data-file header entries (unset overrides omitted)."""
        return {k: v for k, v in self.as_dict().items() if v is not None}

    @property
    def worker_count(self) -> int:
        return self.threads or default_thread_count()

    @property
    def fixed_lengths(self) -> bool:
        """True when one set of lengths serves every realisation."""
        if self.lengths is not None:
            return True
        return self.graph is GraphKind.DIRAC_ROSE and not self.resample_lengths

    def tau_grid(self) -> np.ndarray:
        count = int(math.floor((self.tau_max - self.tau_min) / self.tau_step + 1e-9)) + 1
        return self.tau_min + self.tau_step * np.arange(count)

    def prediction_grid(self) -> np.ndarray:
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return self.start + self.step * np.arange(count)


@dataclass
class ExperimentRunner:
    """
    Runs one ExperimentConfig realisation by realisation.

    This class provides:
    1. Per-realisation spectra with reproducible random streams
    2. Unfolding, R2 histograms and form factors per realisation
    3. Ordered ensemble reductions over a thread pool
    """

    config: ExperimentConfig
    logger: logging.Logger = field(default_factory=lambda: logging.getLogger(__name__), repr=False)

    def stream(self, purpose: str, index: int) -> RngStream:
        return RngStream(self.config.seed, index, purpose)

    def bond_lengths(self, index: int) -> BondLengths:
        if self.config.lengths is not None:
            return BondLengths(self.config.lengths)
        stream_index = 0 if self.config.fixed_lengths else index
        return sample_bond_lengths(self.config.bonds, self.stream("lengths", stream_index))

    def provenance(self, index: int) -> Dict[str, Any]:
        lengths_index = 0 if self.config.fixed_lengths else index
        record = {
            "master_seed": self.config.seed,
            "realisation": index,
            "lengths_stream": "override" if self.config.lengths is not None else lengths_index,
        }
        if self.config.graph is GraphKind.DIRAC_ROSE:
            record["spins_stream"] = "override" if self.config.angles is not None else index
        return record

    def spectrum(self, index: int) -> Spectrum:
        """Eigenvalues of realisation `index`."""
        config = self.config
        lengths = self.bond_lengths(index)
        provenance = self.provenance(index)
        if config.graph is GraphKind.DIRAC_ROSE:
            if config.angles is not None:
                angles = np.asarray(config.angles, dtype=float)
            else:
                angles = sample_spin_configuration(config.bonds, self.stream("spins", index)).angles
            spectrum = dirac_rose_spectrum(lengths, angles, config.eigenvalues, provenance)
        elif config.graph is GraphKind.NEUMANN_STAR:
            spectrum = neumann_star_spectrum(lengths, config.eigenvalues, provenance)
        else:
            spectrum = neumann_rose_spectrum(lengths, config.eigenvalues, provenance)
        self.logger.info(
            f"Realisation {index}: {len(spectrum)} roots up to k={spectrum.k_max:.6g}"
        )
        return spectrum

    def unfolded(self, index: int) -> UnfoldedSpectrum:
        if self.config.poisson:
            return poisson_surrogate(self.config.eigenvalues, self.stream("poisson", index))
        return unfold(self.spectrum(index))

    def histogram(self, index: int) -> Histogram:
        return pair_correlation_single(self.unfolded(index), self.config.bin_width, self.config.x_max)

    def map(self, func: Callable[[int], T]) -> List[T]:
        """func over every realisation index, results in index order."""
        indices = range(self.config.realisations)
        workers = min(self.config.worker_count, self.config.realisations)
        if workers <= 1:
            return [func(i) for i in indices]
        with ThreadPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(func, indices))

    def spectra(self) -> List[Spectrum]:
        if self.config.poisson:
            raise UsageError("--poisson produces unfolded surrogates, not spectra")
        return self.map(self.spectrum)

    def pair_correlation(self) -> Histogram:
        self.logger.info(
            f"Pair correlation: {self.config.graph.value}, B={self.config.bonds}, "
            f"{self.config.realisations} x {self.config.eigenvalues} levels"
        )
        return ensemble_average(self.map(self.histogram))

    def form_factor(self, taus: Optional[np.ndarray] = None) -> FormFactorCurve:
        """Windowed form factor; the half-width is a fraction of each realisation's span."""
        taus = self.config.tau_grid() if taus is None else np.asarray(taus, dtype=float)

        def one(index: int) -> Tuple[np.ndarray, float]:
            uspec = self.unfolded(index)
            half_width = self.config.window * float(uspec.points[-1] - uspec.points[0])
            return form_factor_single(uspec, taus, half_width), half_width

        results = self.map(one)
        mean_half_width = float(np.mean([h for _, h in results]))
        return average_form_factor([curve for curve, _ in results], taus, mean_half_width)
