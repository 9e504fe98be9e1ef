"""
Special Functions and Quadrature for RoseSpec

Learning Notes:
- Gamma values come from scipy.special; this module only adds the domain
  checks the rest of the package relies on
- The confluent hypergeometric function 1F1 is summed here because the
  amplitude integrals need it at large negative arguments, where the plain
  Taylor series cancels catastrophically
- Adaptive quadrature wraps QUADPACK (scipy.integrate.quad) and reports its
  bookkeeping as a QuadratureResult instead of warnings
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

from scipy import integrate, special

from utils.errors import InvalidArgumentError, NumericalFailureError

logger = logging.getLogger(__name__)

# Below this |z| the Taylor series is summed directly; negative z beyond it
# goes through the Kummer transformation.
TAYLOR_LIMIT = 1.0
MAX_ABS_Z = 1.0e4
SERIES_EPS = 1.0e-16
SERIES_MAX_TERMS = 100_000
MIN_QUAD_TOL = 1.0e-12


@dataclass(frozen=True)
class QuadratureResult:
    """Outcome of one adaptive integration."""

    value: float
    error_estimate: float
    evaluations: int
    converged: bool

    def __float__(self) -> float:
        return self.value


def gamma_fn(x: float) -> float:
    """Gamma function for positive real arguments."""
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise InvalidArgumentError(f"gamma_fn needs x > 0, got {x!r}")
    return float(special.gamma(x))


def gamma_ratio(a: float, b: float) -> float:
    """Gamma(a) / Gamma(b) via log-gamma, safe for large arguments."""
    if a <= 0.0 or b <= 0.0:
        raise InvalidArgumentError(f"gamma_ratio needs positive arguments, got {a!r}, {b!r}")
    return math.exp(float(special.gammaln(a)) - float(special.gammaln(b)))


def _is_nonpositive_integer(value: float) -> bool:
    return value <= 0.0 and float(value).is_integer()


def _taylor_series(a: float, b: float, z: float) -> float:
    """Sum 1F1(a; b; z) = sum (a)_n / (b)_n z^n / n! term by term."""
    total = 1.0
    term = 1.0
    for n in range(SERIES_MAX_TERMS):
        ratio = (a + n) / (b + n) * z / (n + 1)
        term *= ratio
        total += term
        if term == 0.0:
            return total
        if abs(ratio) < 1.0 and abs(term) < SERIES_EPS * abs(total):
            return total
    raise NumericalFailureError(
        "1F1 Taylor series did not converge",
        {"a": a, "b": b, "z": z, "terms": SERIES_MAX_TERMS},
    )


def _kummer_series(a: float, b: float, z: float) -> float:
    """
    Evaluate 1F1(a; b; z) for z < 0 as exp(z) * 1F1(b - a; b; -z).

    The transformed series is summed in log space with the exp(z) factor
    folded into every term, so neither factor overflows for |z| up to 1e4.
    """
    w = -z
    c = b - a
    log_term = 0.0
    sign = 1.0
    total = math.exp(log_term - w)
    for n in range(SERIES_MAX_TERMS):
        numerator = c + n
        if numerator == 0.0:
            return total
        ratio = numerator / (b + n) * w / (n + 1)
        if ratio < 0.0:
            sign = -sign
        log_term += math.log(abs(ratio))
        term = sign * math.exp(log_term - w)
        total += term
        if abs(ratio) < 1.0 and abs(term) <= SERIES_EPS * abs(total):
            return total
    raise NumericalFailureError(
        "1F1 Kummer series did not converge",
        {"a": a, "b": b, "z": z, "terms": SERIES_MAX_TERMS},
    )


def hyp1f1(a: float, b: float, z: float) -> float:
    """
    Confluent hypergeometric function 1F1(a; b; z) for real arguments.

    Taylor series near the origin and for positive z; the Kummer
    transformation for z < -TAYLOR_LIMIT.
    """
    a, b, z = float(a), float(b), float(z)
    if _is_nonpositive_integer(b):
        raise InvalidArgumentError(f"1F1 has a parameter pole at b={b!r}")
    if not math.isfinite(z) or abs(z) > MAX_ABS_Z:
        raise InvalidArgumentError(f"1F1 argument out of range: z={z!r}")
    if z == 0.0 or a == 0.0:
        return 1.0
    if z < -TAYLOR_LIMIT:
        value = _kummer_series(a, b, z)
    else:
        value = _taylor_series(a, b, z)
    if not math.isfinite(value):
        raise NumericalFailureError("1F1 overflowed", {"a": a, "b": b, "z": z})
    return value


def integrate_adaptive(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1.0e-10,
    limit: int = 500,
    endpoint_powers: Optional[Tuple[float, float]] = None,
) -> QuadratureResult:
    """
    Integrate f over [a, b] with an adaptive Gauss-Kronrod rule.

    Learning Notes:
    - QUADPACK bisects the interval with the largest error estimate first,
      always in the same order, so results are reproducible
    - endpoint_powers=(alpha, beta) integrates f(y) (y-a)^alpha (b-y)^beta
      with the algebraic weight built into the rule
    - A non-converged integration is reported through the flag, never raised
    """
    if tol < MIN_QUAD_TOL:
        raise InvalidArgumentError(f"quadrature tolerance must be >= {MIN_QUAD_TOL}, got {tol!r}")

    options = {"epsabs": tol, "epsrel": 0.0, "limit": limit, "full_output": 1}
    if endpoint_powers is not None:
        options.update(weight="alg", wvar=tuple(endpoint_powers))
    output = integrate.quad(f, a, b, **options)
    value, error, info = output[0], output[1], output[2]
    warned = len(output) > 3
    converged = (not warned) and error <= tol
    if not converged:
        message = output[3] if warned else "error estimate above tolerance"
        logger.warning(f"Quadrature on [{a}, {b}] did not converge: {message}")

    return QuadratureResult(
        value=float(value),
        error_estimate=float(error),
        evaluations=int(info.get("neval", 0)),
        converged=converged,
    )
