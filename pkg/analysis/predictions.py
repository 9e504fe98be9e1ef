"""
Analytic Predictions for RoseSpec

Learning Notes:
- Everything the ensemble statistics are compared against lives here: the
  small-x slope constant c, the small- and large-x R2 asymptotics of the
  rose and star families, and the closed-form diagonal form factor
- c is always recomputed (quadrature with a tail bound, or Monte Carlo);
  6.781 is an acceptance target, never an input
- Large-x R2 coefficients follow from the small-tau Maclaurin coefficients
  of the form factor through a fixed linear map; the exact (rational)
  version of that map is available for checks
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special as sp

from graphs.sampling import RngStream
from numerics.special import gamma_ratio, hyp1f1, integrate_adaptive
from utils.errors import InvalidArgumentError, NumericalFailureError, OutOfDomainError

logger = logging.getLogger(__name__)

FAMILIES = ("rose-small", "rose-large", "star-small", "star-large", "formfactor")
GRAPH_FAMILIES = ("rose", "star")

MIN_NU = -0.5
MIN_C_TOLERANCE = 1.0e-10
DEFAULT_C_TOLERANCE = 1.0e-8
MIN_TRUNCATION = 20.0
I_NU_QUAD_TOL = 1.0e-12

MIN_MC_SAMPLES = 1000
MC_CHUNK = 100_000
INVERSE_CDF_STEPS = 200
INVERSE_CDF_TOL = 1.0e-14

LARGE_X_MIN = 0.5

# Coefficients of x^-p in the large-x expansions, as multiples of pi^-p.
ROSE_LARGE_RATIONALS = {2: Fraction(2), 4: Fraction(-13, 8)}
STAR_LARGE_RATIONALS = {
    2: Fraction(2),
    4: Fraction(76),
    6: Fraction(-1088),
    8: Fraction(9280),
    10: Fraction(-64000),
}


def _to_floats(rationals: Mapping[int, Fraction]) -> Dict[int, float]:
    return {p: float(r) / math.pi ** p for p, r in rationals.items()}


ROSE_LARGE_COEFFICIENTS = _to_floats(ROSE_LARGE_RATIONALS)
STAR_LARGE_COEFFICIENTS = _to_floats(STAR_LARGE_RATIONALS)


@dataclass(frozen=True)
class PredictionCurve:
    """A prediction family evaluated on a grid of abscissae."""

    family: str
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidArgumentError(f"unknown prediction family {self.family!r}")
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.shape != values.shape:
            raise InvalidArgumentError("grid and values must have the same shape")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class AmplitudeSample:
    """One triple (A1, A2, A3) of bounce amplitudes, each in (0, 2]."""

    values: Tuple[float, float, float]

    def __post_init__(self):
        values = tuple(float(a) for a in self.values)
        if len(values) != 3:
            raise InvalidArgumentError("an amplitude sample is a triple")
        if any(not 0.0 < a <= 2.0 for a in values):
            raise InvalidArgumentError(f"amplitudes must lie in (0, 2], got {values}")
        object.__setattr__(self, "values", values)

    def statistic(self) -> float:
        return float(small_x_statistic(np.array(self.values)))


def _check_family(family: str) -> str:
    if family not in GRAPH_FAMILIES:
        raise InvalidArgumentError(f"family must be one of {GRAPH_FAMILIES}, got {family!r}")
    return family


# ---------------------------------------------------------------------------
# Amplitude moments
# ---------------------------------------------------------------------------

def I_nu(nu: float, x: float) -> float:
    """
    E[A^nu exp(-A x^2)] for the semicircle amplitude law.

    Closed form (2^(nu+2)/sqrt(pi)) Gamma(nu+3/2)/Gamma(nu+3) 1F1(nu+3/2; nu+3; -2x^2).
    """
    if nu < MIN_NU:
        raise InvalidArgumentError(f"I_nu diverges for nu < -1/2, got {nu!r}")
    prefactor = 2.0 ** (nu + 2.0) / math.sqrt(math.pi) * gamma_ratio(nu + 1.5, nu + 3.0)
    return prefactor * hyp1f1(nu + 1.5, nu + 3.0, -2.0 * x * x)


def I_nu_quadrature(nu: float, x: float, tol: float = I_NU_QUAD_TOL) -> float:
    """(2/pi) int_0^2 y^(nu+1/2) (2-y)^(1/2) exp(-y x^2) dy by adaptive quadrature."""
    if nu < MIN_NU:
        raise InvalidArgumentError(f"I_nu diverges for nu < -1/2, got {nu!r}")
    x2 = float(x) * float(x)
    result = integrate_adaptive(
        lambda y: 2.0 / math.pi * math.exp(-y * x2),
        0.0,
        2.0,
        tol=tol,
        endpoint_powers=(nu + 0.5, 0.5),
    )
    if not result.converged:
        raise NumericalFailureError(
            "I_nu quadrature did not converge",
            {"nu": nu, "x": x, "error_estimate": result.error_estimate},
        )
    return result.value


def small_x_integrand(x: float) -> float:
    """I_{3/2} I_{-1/2}^2 + 2 I_{1/2}^2 I_{-1/2}; decays like x^-10."""
    i_minus = I_nu(-0.5, x)
    i_half = I_nu(0.5, x)
    i_three_halves = I_nu(1.5, x)
    return i_three_halves * i_minus * i_minus + 2.0 * i_half * i_half * i_minus


def truncation_point(tolerance: float) -> float:
    return max(MIN_TRUNCATION, (1.0 / tolerance) ** (1.0 / 9.0))


@lru_cache(maxsize=8)
def small_x_constant_quadrature(tolerance: float = DEFAULT_C_TOLERANCE) -> float:
    """
    The slope constant c = (3/sqrt(pi)) int_R [I_{3/2} I_{-1/2}^2 + 2 I_{1/2}^2 I_{-1/2}] dx.

    Integrated as twice the half line, truncated where the x^-10 tail
    drops below the tolerance.
    """
    if not tolerance >= MIN_C_TOLERANCE:
        raise InvalidArgumentError(f"tolerance must be >= {MIN_C_TOLERANCE}, got {tolerance!r}")
    upper = truncation_point(tolerance)
    result = integrate_adaptive(small_x_integrand, 0.0, upper, tol=tolerance / 2.0)
    if not result.converged:
        raise NumericalFailureError(
            "quadrature for the small-x constant did not converge",
            {
                "upper": upper,
                "value": result.value,
                "error_estimate": result.error_estimate,
                "evaluations": result.evaluations,
            },
        )
    c = 3.0 / math.sqrt(math.pi) * 2.0 * result.value
    logger.info(f"Small-x constant c = {c:.6f} (X = {upper:g}, {result.evaluations} evaluations)")
    return c


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def amplitude_density(y):
    """(2/pi) sqrt(y (2 - y)) on [0, 2], zero elsewhere."""
    y = np.asarray(y, dtype=float)
    inside = (y >= 0.0) & (y <= 2.0)
    return np.where(inside, 2.0 / np.pi * np.sqrt(np.clip(y * (2.0 - y), 0.0, None)), 0.0)


def inverse_sine_squared_cdf(u: np.ndarray) -> np.ndarray:
    """
    Solve (2 phi - sin 2 phi) / (2 pi) = u for phi in [0, pi].

    Newton on a shrinking bracket; a step that leaves the bracket is
    replaced by the midpoint.
    """
    u = np.asarray(u, dtype=float)
    target = 2.0 * np.pi * u
    lo = np.zeros_like(u)
    hi = np.full_like(u, np.pi)
    phi = np.pi * u
    for _ in range(INVERSE_CDF_STEPS):
        g = 2.0 * phi - np.sin(2.0 * phi) - target
        below = g < 0.0
        lo = np.where(below, phi, lo)
        hi = np.where(below, hi, phi)
        slope = 4.0 * np.sin(phi) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            step = phi - g / slope
        ok = np.isfinite(step) & (step > lo) & (step < hi)
        new_phi = np.where(ok, step, 0.5 * (lo + hi))
        new_phi = np.where(g == 0.0, phi, new_phi)
        change = np.max(np.abs(new_phi - phi)) if new_phi.size else 0.0
        phi = new_phi
        if change < INVERSE_CDF_TOL:
            break
    return phi


def sample_amplitudes(n: int, rng: RngStream) -> np.ndarray:
    """n i.i.d. amplitudes A = 1 - cos(theta), theta sine-squared distributed."""
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    # 1 - U lies in (0, 1], keeping every amplitude strictly positive
    u = 1.0 - rng.generator().random(n)
    return 1.0 - np.cos(inverse_sine_squared_cdf(u))


def small_x_statistic(amplitudes) -> np.ndarray:
    """(A1 + A2 + A3)^(3/2) / sqrt(A1 A2 A3) along the last axis."""
    a = np.asarray(amplitudes, dtype=float)
    if a.shape[-1] != 3:
        raise InvalidArgumentError("amplitudes must come in triples along the last axis")
    return np.sum(a, axis=-1) ** 1.5 / np.sqrt(np.prod(a, axis=-1))


def _montecarlo_chunk(args: Tuple[RngStream, int]) -> Tuple[float, float, int]:
    stream, count = args
    values = small_x_statistic(sample_amplitudes(3 * count, stream).reshape(count, 3))
    return float(np.sum(values)), float(np.sum(values * values)), count


def small_x_constant_montecarlo(
    n_samples: int,
    rng: RngStream,
    threads: int = 1,
    chunk_size: int = MC_CHUNK,
) -> Tuple[float, float]:
    """
    Monte Carlo estimate of c with its standard error.

    Chunk i always uses sub-stream rng.spawn(i) and the partial sums are
    combined in chunk order, so the result does not depend on `threads`.
    """
    if n_samples < MIN_MC_SAMPLES:
        raise InvalidArgumentError(f"n_samples must be >= {MIN_MC_SAMPLES}, got {n_samples}")
    sizes = [chunk_size] * (n_samples // chunk_size)
    if n_samples % chunk_size:
        sizes.append(n_samples % chunk_size)
    jobs = [(rng.spawn(i), size) for i, size in enumerate(sizes)]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            partials = list(executor.map(_montecarlo_chunk, jobs))
    else:
        partials = [_montecarlo_chunk(job) for job in jobs]

    total = 0.0
    total_sq = 0.0
    count = 0
    for s, s2, m in partials:
        total += s
        total_sq += s2
        count += m
    mean = total / count
    variance = max(total_sq / count - mean * mean, 0.0) * count / (count - 1)
    stderr = math.sqrt(variance / count)
    logger.info(f"Monte Carlo c = {mean:.5f} +- {stderr:.2e} ({count} samples)")
    return mean, stderr


# ---------------------------------------------------------------------------
# R2 asymptotics
# ---------------------------------------------------------------------------

def small_x_slope(family: str, c: Optional[float] = None) -> float:
    """pi c / 6 for the rose, pi sqrt(3) / 2 for the star."""
    if _check_family(family) == "star":
        return math.pi * math.sqrt(3.0) / 2.0
    if c is None:
        c = small_x_constant_quadrature()
    return math.pi * c / 6.0


def predict_r2_small(x: float, family: str, c: Optional[float] = None) -> float:
    if x < 0:
        raise InvalidArgumentError(f"x must be >= 0, got {x!r}")
    return small_x_slope(family, c) * x


def r2_tail_series(coefficients: Mapping[int, float], x: float) -> float:
    """1 + sum_p coefficients[p] x^-p."""
    return 1.0 + sum(float(c) * x ** (-p) for p, c in sorted(coefficients.items()))


def predict_r2_large(x: float, family: str) -> float:
    """Large-x asymptotic series; only meaningful for x > 0.5."""
    if not x > LARGE_X_MIN:
        raise OutOfDomainError(f"large-x asymptotics need x > {LARGE_X_MIN}, got {x!r}")
    coefficients = ROSE_LARGE_COEFFICIENTS if _check_family(family) == "rose" else STAR_LARGE_COEFFICIENTS
    return r2_tail_series(coefficients, x)


# ---------------------------------------------------------------------------
# Form factor
# ---------------------------------------------------------------------------

def _check_tau(tau) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0.0):
        raise InvalidArgumentError("tau must be >= 0")
    return tau


def _scalar_or_array(value: np.ndarray):
    return float(value) if value.ndim == 0 else value


def form_factor_prediction(tau):
    """(1 - tau - 4 tau^2) e^(-4 tau) + tau e^tau."""
    t = _check_tau(tau)
    return _scalar_or_array((1.0 - t - 4.0 * t * t) * np.exp(-4.0 * t) + t * np.exp(t))


def form_factor_term(j: int, tau):
    """Contribution of orbit pairs with j bounce classes."""
    if int(j) != j or j < 1:
        raise InvalidArgumentError(f"j must be an integer >= 1, got {j!r}")
    t = _check_tau(tau)
    if j == 1:
        return _scalar_or_array((1.0 + t * t) * np.exp(-4.0 * t))
    with np.errstate(divide="ignore"):
        log_term = (j + 1) * np.log(t) - 4.0 * t + j * math.log(5.0) - sp.gammaln(j + 1)
    return _scalar_or_array(np.where(t > 0.0, np.exp(log_term), 0.0))


def form_factor_maclaurin(order: int) -> List[Fraction]:
    """Exact Maclaurin coefficients a_0 .. a_order of the closed-form K(tau)."""
    if order < 0:
        raise InvalidArgumentError(f"order must be >= 0, got {order}")

    def exp4(n: int) -> Fraction:
        if n < 0:
            return Fraction(0)
        return Fraction((-4) ** n, math.factorial(n))

    coefficients = []
    for n in range(order + 1):
        a = exp4(n) - exp4(n - 1) - 4 * exp4(n - 2)
        if n >= 1:
            a += Fraction(1, math.factorial(n - 1))
        coefficients.append(a)
    return coefficients


def _real_power_of_minus_i(p: int) -> int:
    """Re[(-i)^p]: 1, 0, -1, 0 for p mod 4 = 0, 1, 2, 3."""
    return (1, 0, -1, 0)[p % 4]


def r2_tail_rationals(a: Sequence[Union[Fraction, int]], order: int) -> List[Fraction]:
    """Exact tail coefficients: entry k times pi^-(k+1) multiplies x^-(k+1)."""
    if order > len(a):
        raise InvalidArgumentError(f"order {order} exceeds the {len(a)} coefficients given")
    return [
        Fraction(2 * _real_power_of_minus_i(k + 1) * math.factorial(k), 2 ** (k + 1)) * Fraction(a[k])
        for k in range(order)
    ]


def form_factor_to_r2_tail(a: Sequence[float], order: int) -> List[float]:
    """Entry k is the coefficient of x^-(k+1): 2 Re[(-i/2pi)^(k+1)] a_k k!."""
    if order > len(a):
        raise InvalidArgumentError(f"order {order} exceeds the {len(a)} coefficients given")
    return [
        2.0 * _real_power_of_minus_i(k + 1) * float(a[k]) * math.factorial(k) / (2.0 * math.pi) ** (k + 1)
        for k in range(order)
    ]


def tail_coefficients(tail: Iterable[float]) -> Dict[int, float]:
    """Turn a form_factor_to_r2_tail list into a power -> coefficient map."""
    return {k + 1: c for k, c in enumerate(tail) if c != 0.0}


# ---------------------------------------------------------------------------
# Curves
# ---------------------------------------------------------------------------

def prediction_curve(family: str, grid: Sequence[float], c: Optional[float] = None) -> PredictionCurve:
    """Evaluate one prediction family on a grid."""
    if family not in FAMILIES:
        raise InvalidArgumentError(f"family must be one of {FAMILIES}, got {family!r}")
    grid = np.asarray(grid, dtype=float)
    if family == "formfactor":
        values = np.asarray(form_factor_prediction(grid), dtype=float).reshape(grid.shape)
    else:
        graph, regime = family.split("-")
        if regime == "small":
            slope = small_x_slope(graph, c)
            if np.any(grid < 0.0):
                raise InvalidArgumentError("x must be >= 0")
            values = slope * grid
        else:
            values = np.array([predict_r2_large(float(x), graph) for x in grid])
    return PredictionCurve(family, grid, values)
