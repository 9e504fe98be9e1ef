"""
Secular Equations and Spectra for Rose and Star Graphs

Learning Notes:
- The Dirac rose secular function Z(k) = sum_b (cos theta_b - cos kL_b) / sin kL_b
  is increasing between its poles k = m pi / L_b, so each pole interval holds
  exactly one eigenvalue; the Neumann star function sum_b tan(k l_b) has the
  same structure with poles at (m + 1/2) pi / l_b
- Roots are found for all intervals at once with numpy: a vectorised
  bisection down to a 1e-6 bracket, then Newton steps guarded by the bracket
- Spectra hold distinct roots only; the Kramers partner of every Dirac rose
  eigenvalue is not duplicated
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterator, Optional, Sequence, Tuple, Union

import numpy as np

from graphs.sampling import BondLengths, SpinConfiguration
from utils.errors import (
    InvalidArgumentError,
    InvalidConfigurationError,
    NumericalFailureError,
    PoleProximityError,
)

logger = logging.getLogger(__name__)

POLE_TOL = 1.0e-13
BRACKET_OFFSET = 1.0e-10
BISECTION_WIDTH = 1.0e-6
ROOT_TOL = 1.0e-12
COINCIDENCE_TOL = 1.0e-9
MAX_NEWTON_STEPS = 100
CHUNK = 4096

LengthsLike = Union[BondLengths, Sequence[float], np.ndarray]
AnglesLike = Union[SpinConfiguration, Sequence[float], np.ndarray]


class GraphKind(str, Enum):
    DIRAC_ROSE = "dirac-rose"
    NEUMANN_STAR = "neumann-star"
    NEUMANN_ROSE = "neumann-rose"


@dataclass(frozen=True)
class Pole:
    """A pole k = m pi / L_b of the Dirac rose secular function."""

    position: float
    bond_index: int
    integer_index: int


@dataclass(frozen=True)
class PoleStream:
    """Poles merged across bonds, sorted ascending, stored column-wise."""

    positions: np.ndarray
    bond_indices: np.ndarray
    integer_indices: np.ndarray

    def __len__(self) -> int:
        return int(self.positions.size)

    def __getitem__(self, i: int) -> Pole:
        return Pole(float(self.positions[i]), int(self.bond_indices[i]), int(self.integer_indices[i]))

    def __iter__(self) -> Iterator[Pole]:
        for i in range(len(self)):
            yield self[i]


@dataclass(frozen=True)
class Spectrum:
    """
    The first n positive eigenvalues of one graph, Kramers partners not repeated.

    total_length is the sum of the lengths entering the secular function;
    it fixes the mean level density total_length / pi used for unfolding.
    """

    roots: np.ndarray
    kind: GraphKind
    bonds: int
    total_length: float
    k_max: float
    provenance: Dict[str, object] = field(default_factory=dict)
    skipped_intervals: int = 0
    coincidences: int = 0
    origins: Optional[np.ndarray] = None

    def __post_init__(self):
        roots = np.asarray(self.roots, dtype=float).copy()
        roots.setflags(write=False)
        object.__setattr__(self, "roots", roots)

    def __len__(self) -> int:
        return int(self.roots.size)

    def count_below(self, k: float) -> int:
        return int(np.searchsorted(self.roots, k, side="left"))

    def diagnostics(self) -> Dict[str, object]:
        return {
            "kind": self.kind.value,
            "bonds": self.bonds,
            "roots": len(self),
            "k_max": self.k_max,
            "skipped_intervals": self.skipped_intervals,
            "coincidences": self.coincidences,
        }


def _as_lengths(L: LengthsLike) -> np.ndarray:
    if isinstance(L, BondLengths):
        return L.lengths
    lengths = np.asarray(L, dtype=float)
    if lengths.ndim != 1 or lengths.size < 1 or np.any(lengths <= 0.0):
        raise InvalidArgumentError("bond lengths must be a non-empty sequence of positive reals")
    return lengths


def _as_angles(theta: AnglesLike, B: int) -> np.ndarray:
    if isinstance(theta, SpinConfiguration):
        angles = theta.angles
    else:
        angles = np.atleast_1d(np.asarray(theta, dtype=float))
    if angles.shape != (B,):
        raise InvalidArgumentError(f"expected {B} angles, got shape {angles.shape}")
    return angles


def _check_pole(k: float, lengths: np.ndarray) -> None:
    phases = k * lengths / math.pi
    distance = np.abs(phases - np.round(phases))
    near = np.nonzero(distance < POLE_TOL)[0]
    if near.size:
        raise PoleProximityError(k, int(near[0]))


def z_eval(x: float, theta: float) -> float:
    """z(x, theta) = (cos theta - cos x) / sin x."""
    r = x / math.pi
    if abs(r - round(r)) < POLE_TOL:
        raise PoleProximityError(x, -1, f"z evaluated at a pole x={x!r}")
    return (math.cos(theta) - math.cos(x)) / math.sin(x)


def z_pole_expansion(x: float, theta: float, terms: int = 10_000) -> float:
    """
    Regularised pole expansion of z(x, theta), truncated at |m| <= terms.

    sum_m ((-1)^m cos theta - 1) (1 / (x + pi m) - m pi / (1 + m^2 pi^2))
    converges absolutely; the truncation error is O(1 / terms).
    """
    if terms < 0:
        raise InvalidArgumentError(f"terms must be >= 0, got {terms}")
    r = x / math.pi
    if abs(r - round(r)) < POLE_TOL:
        raise PoleProximityError(x, -1, f"z evaluated at a pole x={x!r}")
    m = np.arange(-terms, terms + 1, dtype=float)
    weights = np.where(m % 2 == 0, 1.0, -1.0) * math.cos(theta) - 1.0
    regular = 1.0 / (x + math.pi * m) - m * math.pi / (1.0 + (m * math.pi) ** 2)
    return float(np.sum(weights * regular))


def secular_eval(k: float, L: LengthsLike, theta: AnglesLike) -> Tuple[float, float]:
    """Z(k) and Z'(k) for a Dirac rose graph; Z'(k) >= 0 everywhere."""
    lengths = _as_lengths(L)
    angles = _as_angles(theta, lengths.size)
    _check_pole(k, lengths)
    value, derivative = _dirac_terms(np.array([k], dtype=float), lengths, np.cos(angles), True)
    return float(value[0]), float(derivative[0])


def star_eval(k: float, lengths: LengthsLike) -> Tuple[float, float]:
    """sum_b tan(k l_b) and its derivative sum_b l_b / cos^2(k l_b)."""
    lengths = _as_lengths(lengths)
    phases = k * lengths / math.pi - 0.5
    distance = np.abs(phases - np.round(phases))
    near = np.nonzero(distance < POLE_TOL)[0]
    if near.size:
        raise PoleProximityError(k, int(near[0]))
    value, derivative = _star_terms(np.array([k], dtype=float), lengths, True)
    return float(value[0]), float(derivative[0])


def _dirac_terms(k: np.ndarray, lengths: np.ndarray, cos_theta: np.ndarray, with_derivative: bool):
    value = np.empty_like(k)
    derivative = np.empty_like(k) if with_derivative else None
    for start in range(0, k.size, CHUNK):
        phase = np.outer(k[start:start + CHUNK], lengths)
        s = np.sin(phase)
        c = np.cos(phase)
        value[start:start + CHUNK] = np.sum((cos_theta - c) / s, axis=1)
        if with_derivative:
            derivative[start:start + CHUNK] = np.sum(lengths * (1.0 - c * cos_theta) / (s * s), axis=1)
    return value, derivative


def _star_terms(k: np.ndarray, lengths: np.ndarray, with_derivative: bool):
    value = np.empty_like(k)
    derivative = np.empty_like(k) if with_derivative else None
    for start in range(0, k.size, CHUNK):
        phase = np.outer(k[start:start + CHUNK], lengths)
        value[start:start + CHUNK] = np.sum(np.tan(phase), axis=1)
        if with_derivative:
            c = np.cos(phase)
            derivative[start:start + CHUNK] = np.sum(lengths / (c * c), axis=1)
    return value, derivative


def _pole_lattice(lengths: np.ndarray, k_max: float, offset: float) -> PoleStream:
    """All (m + offset) pi / L_b in (0, k_max], stably merged across bonds."""
    positions, bonds, integers = [], [], []
    for b, length in enumerate(lengths):
        m_max = int(math.floor(k_max * length / math.pi - offset))
        m = np.arange(0 if offset > 0 else 1, m_max + 1)
        if m.size == 0:
            continue
        positions.append((m + offset) * math.pi / length)
        bonds.append(np.full(m.size, b))
        integers.append(m)
    if not positions:
        empty = np.empty(0)
        return PoleStream(empty, empty.astype(int), empty.astype(int))
    positions = np.concatenate(positions)
    order = np.argsort(positions, kind="stable")
    return PoleStream(
        positions[order],
        np.concatenate(bonds)[order],
        np.concatenate(integers)[order],
    )


def pole_stream(L: LengthsLike, k_max: float) -> PoleStream:
    """All poles m pi / L_b of Z in (0, k_max], sorted."""
    if not k_max > 0:
        raise InvalidArgumentError(f"k_max must be positive, got {k_max!r}")
    return _pole_lattice(_as_lengths(L), k_max, 0.0)


def _solve_intervals(
    lefts: np.ndarray,
    rights: np.ndarray,
    func: Callable[[np.ndarray, bool], Tuple[np.ndarray, Optional[np.ndarray]]],
) -> np.ndarray:
    """
    One root of an increasing function in each open interval (lefts, rights).

    Learning Notes:
    - Bisection on every interval in parallel until the bracket is 1e-6 wide
    - Newton steps from there; a step leaving the bracket falls back to the
      midpoint, and a probe 0.4 * ROOT_TOL (relative for k > 1) past each iterate
      towards the root lets the bracket itself close below that width
    """
    widths = rights - lefts
    lo = lefts + BRACKET_OFFSET * widths
    hi = rights - BRACKET_OFFSET * widths

    active = np.nonzero(hi - lo > BISECTION_WIDTH)[0]
    while active.size:
        mid = 0.5 * (lo[active] + hi[active])
        value, _ = func(mid, False)
        negative = value < 0.0
        lo[active[negative]] = mid[negative]
        hi[active[~negative]] = mid[~negative]
        active = active[hi[active] - lo[active] > BISECTION_WIDTH]

    x = 0.5 * (lo + hi)
    scale = ROOT_TOL * np.maximum(1.0, np.abs(hi))
    active = np.nonzero(hi - lo >= scale)[0]
    steps = 0
    while active.size:
        steps += 1
        if steps > MAX_NEWTON_STEPS:
            raise NumericalFailureError(
                "root refinement did not converge",
                {"unconverged": int(active.size), "widest": float(np.max(hi[active] - lo[active]))},
            )
        xa = x[active]
        value, derivative = func(xa, True)
        exact = value == 0.0
        negative = value < 0.0
        lo[active[negative | exact]] = xa[negative | exact]
        hi[active[~negative]] = xa[~negative]

        probe = xa - np.sign(value) * 0.4 * scale[active]
        probe = np.clip(probe, lo[active], hi[active])
        probe_value, _ = func(probe, False)
        probe_negative = probe_value < 0.0
        lo[active[probe_negative]] = np.maximum(lo[active[probe_negative]], probe[probe_negative])
        hi[active[~probe_negative]] = np.minimum(hi[active[~probe_negative]], probe[~probe_negative])

        with np.errstate(divide="ignore", invalid="ignore"):
            newton = xa - value / derivative
        inside = np.isfinite(newton) & (newton > lo[active]) & (newton < hi[active])
        x[active] = np.where(inside, newton, 0.5 * (lo[active] + hi[active]))
        active = active[hi[active] - lo[active] >= scale[active]]

    logger.debug(f"Refined {lefts.size} roots in {steps} Newton steps")
    return 0.5 * (lo + hi)


def _usable_intervals(boundaries: np.ndarray) -> Tuple[np.ndarray, np.ndarray, int]:
    lefts = boundaries[:-1]
    rights = boundaries[1:]
    usable = (rights - lefts) >= POLE_TOL
    return lefts[usable], rights[usable], int(np.count_nonzero(~usable))


def _check_count(n_roots: int) -> None:
    if int(n_roots) != n_roots or n_roots < 1:
        raise InvalidArgumentError(f"n_roots must be a positive integer, got {n_roots!r}")


def dirac_rose_spectrum(
    L: LengthsLike,
    theta: AnglesLike,
    n_roots: int,
    provenance: Optional[Dict[str, object]] = None,
) -> Spectrum:
    """The first n_roots positive solutions of Z(k) = 0, one per pole interval."""
    _check_count(n_roots)
    lengths = _as_lengths(L)
    angles = _as_angles(theta, lengths.size)
    if np.any(angles <= 1.0e-12) or np.any(angles >= math.pi - 1.0e-12):
        raise InvalidConfigurationError("theta_b in {0, pi} (w_b = +-id) has no generic secular equation")

    total = float(np.sum(lengths))
    k_max = math.pi * (n_roots + lengths.size + 2) / total
    while True:
        poles = _pole_lattice(lengths, k_max, 0.0)
        boundaries = np.concatenate(([0.0], poles.positions))
        lefts, rights, _ = _usable_intervals(boundaries)
        if lefts.size >= n_roots:
            break
        k_max *= 1.25

    lefts, rights = lefts[:n_roots], rights[:n_roots]
    skipped = int(np.count_nonzero(np.diff(boundaries[boundaries <= rights[-1]]) < POLE_TOL))
    if skipped:
        logger.warning(f"Skipped {skipped} pole intervals narrower than {POLE_TOL}")

    cos_theta = np.cos(angles)
    roots = _solve_intervals(lefts, rights, lambda k, d: _dirac_terms(k, lengths, cos_theta, d))
    return Spectrum(
        roots=roots,
        kind=GraphKind.DIRAC_ROSE,
        bonds=int(lengths.size),
        total_length=total,
        k_max=float(rights[-1]),
        provenance=dict(provenance or {}),
        skipped_intervals=skipped,
    )


def neumann_star_spectrum(
    L_half: LengthsLike,
    n_roots: int,
    provenance: Optional[Dict[str, object]] = None,
) -> Spectrum:
    """
    The first n_roots positive solutions of sum_b tan(k l_b) = 0.

    l_b are the star's own bond lengths; a Neumann rose with lengths L_b
    shares these roots when l_b = L_b / 2.
    """
    _check_count(n_roots)
    lengths = _as_lengths(L_half)
    total = float(np.sum(lengths))
    k_max = math.pi * (n_roots + lengths.size + 2) / total
    while True:
        poles = _pole_lattice(lengths, k_max, 0.5)
        lefts, rights, _ = _usable_intervals(poles.positions)
        if lefts.size >= n_roots:
            break
        k_max *= 1.25

    lefts, rights = lefts[:n_roots], rights[:n_roots]
    boundaries = poles.positions[poles.positions <= rights[-1]]
    skipped = int(np.count_nonzero(np.diff(boundaries) < POLE_TOL))
    if skipped:
        logger.warning(f"Skipped {skipped} pole intervals narrower than {POLE_TOL}")

    roots = _solve_intervals(lefts, rights, lambda k, d: _star_terms(k, lengths, d))
    return Spectrum(
        roots=roots,
        kind=GraphKind.NEUMANN_STAR,
        bonds=int(lengths.size),
        total_length=total,
        k_max=float(rights[-1]),
        provenance=dict(provenance or {}),
        skipped_intervals=skipped,
    )


def bond_points(L: LengthsLike, k_max: float) -> PoleStream:
    """Neumann rose eigenvalues 2 m pi / L_b in (0, k_max] supported on a single bond."""
    lengths = _as_lengths(L)
    return _pole_lattice(lengths / 2.0, k_max, 0.0)


def neumann_rose_spectrum(
    L: LengthsLike,
    n_roots: int,
    provenance: Optional[Dict[str, object]] = None,
) -> Spectrum:
    """
    The first n_roots points of a Neumann rose spectrum.

    Merges the secular roots of sum_b tan(k L_b / 2) = 0 (origin "secular")
    with the single-bond points 2 m pi / L_b (origin "bond"). A secular root
    within COINCIDENCE_TOL of a bond point is dropped and counted.
    """
    _check_count(n_roots)
    lengths = _as_lengths(L)
    total = float(np.sum(lengths))
    n_secular = n_roots // 2 + lengths.size + 2

    while True:
        star = neumann_star_spectrum(lengths / 2.0, n_secular)
        points = bond_points(lengths, star.roots[-1])
        merged = np.concatenate((star.roots, points.positions))
        origins = np.concatenate((
            np.full(star.roots.size, "secular", dtype=object),
            np.full(points.positions.size, "bond", dtype=object),
        ))
        order = np.argsort(merged, kind="stable")
        merged, origins = merged[order], origins[order]

        close = np.diff(merged) < COINCIDENCE_TOL * np.maximum(1.0, merged[1:])
        drop = np.zeros(merged.size, dtype=bool)
        for i in np.nonzero(close)[0]:
            # two bond points from different bonds are a genuine double eigenvalue
            if origins[i] == origins[i + 1]:
                continue
            drop[i if origins[i] == "secular" else i + 1] = True
        dropped = merged[drop]
        merged, origins = merged[~drop], origins[~drop]
        if merged.size >= n_roots:
            break
        n_secular = int(n_secular * 1.5) + 1

    merged, origins = merged[:n_roots], origins[:n_roots]
    coincidences = int(np.count_nonzero(dropped <= merged[-1] + COINCIDENCE_TOL * max(1.0, merged[-1])))
    if coincidences:
        logger.info(f"Merged {coincidences} secular roots coinciding with bond points")
    return Spectrum(
        roots=merged,
        kind=GraphKind.NEUMANN_ROSE,
        bonds=int(lengths.size),
        total_length=total,
        k_max=float(merged[-1]),
        provenance=dict(provenance or {}),
        skipped_intervals=star.skipped_intervals,
        coincidences=coincidences,
        origins=np.array(origins, dtype=object),
    )
