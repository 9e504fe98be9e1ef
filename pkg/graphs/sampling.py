"""
Random Graph Configurations for RoseSpec

Learning Notes:
- Every random draw comes from an RngStream: an immutable
  (master_seed, stream_index, purpose) triple that builds a fresh
  counter-based Philox generator on demand, so realisation i is the same no
  matter how many realisations run or in which order
- Bond lengths are uniform on [1 - 1/(2B), 1 + 1/(2B)]
- Spin matrices are Haar-distributed on SU(2): a uniform point on the unit
  3-sphere read as quaternion coordinates
"""

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

from utils.errors import InvalidArgumentError, InvalidConfigurationError

logger = logging.getLogger(__name__)

MIN_LENGTH_GAP = 1.0e-9
TRACE_EXCLUSION = 1.0e-9
MATRIX_TOL = 1.0e-12


def _purpose_code(purpose: str) -> int:
    """Stable 32-bit code for a purpose tag (hash() is salted per process)."""
    digest = hashlib.sha256(purpose.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


@dataclass(frozen=True)
class RngStream:
    """
    Immutable handle on one reproducible random sequence.

    Identical (master_seed, stream_index, purpose) triples give identical
    draws; distinct stream indices give independent sequences.
    """

    master_seed: int
    stream_index: int = 0
    purpose: str = "default"

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(
            entropy=int(self.master_seed) & 0xFFFFFFFFFFFFFFFF,
            spawn_key=(int(self.stream_index), _purpose_code(self.purpose)),
        )

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        return np.random.Generator(np.random.Philox(self.seed_sequence()))

    def spawn(self, index: int) -> "RngStream":
        """Sub-stream `index` of this stream (used for parallel Monte Carlo chunks)."""
        return RngStream(
            master_seed=self.master_seed,
            stream_index=self.stream_index,
            purpose=f"{self.purpose}/{index}",
        )

    def with_purpose(self, purpose: str) -> "RngStream":
        return RngStream(self.master_seed, self.stream_index, purpose)

    def provenance(self) -> dict:
        return {
            "master_seed": int(self.master_seed),
            "stream_index": int(self.stream_index),
            "purpose": self.purpose,
        }


@dataclass(frozen=True)
class BondLengths:
    """B positive, pairwise distinct bond lengths."""

    lengths: np.ndarray

    def __post_init__(self):
        lengths = np.asarray(self.lengths, dtype=float).copy()
        if lengths.ndim != 1 or lengths.size < 1:
            raise InvalidArgumentError("BondLengths needs a non-empty 1-D sequence")
        if not np.all(np.isfinite(lengths)) or np.any(lengths <= 0.0):
            raise InvalidArgumentError("bond lengths must be finite and positive")
        lengths.setflags(write=False)
        object.__setattr__(self, "lengths", lengths)

    @property
    def B(self) -> int:
        return int(self.lengths.size)

    @property
    def total(self) -> float:
        return float(np.sum(self.lengths))

    def __len__(self) -> int:
        return self.B

    def __iter__(self):
        return iter(self.lengths.tolist())

    def min_gap(self) -> float:
        if self.B < 2:
            return float("inf")
        return float(np.min(np.diff(np.sort(self.lengths))))

    def in_interval(self) -> bool:
        """True if every length lies in [1 - 1/(2B), 1 + 1/(2B)]."""
        half_width = 1.0 / (2 * self.B)
        return bool(np.all(np.abs(self.lengths - 1.0) <= half_width))

    def scaled(self, factor: float) -> "BondLengths":
        return BondLengths(self.lengths * factor)


def length_interval(B: int) -> Tuple[float, float]:
    """The admissible length interval for a B-bond graph."""
    if B < 1:
        raise InvalidArgumentError(f"B must be >= 1, got {B}")
    return 1.0 - 1.0 / (2 * B), 1.0 + 1.0 / (2 * B)


def sample_bond_lengths(B: int, rng: RngStream) -> BondLengths:
    """Draw B distinct lengths uniformly from the admissible interval."""
    low, high = length_interval(B)
    generator = rng.generator()
    attempts = 0
    while True:
        attempts += 1
        lengths = generator.uniform(low, high, size=B)
        if B == 1 or np.min(np.diff(np.sort(lengths))) >= MIN_LENGTH_GAP:
            break
        logger.debug(f"Resampling bond lengths (attempt {attempts}): near-coincident pair")
    return BondLengths(lengths)


def angle_from_matrix(w: np.ndarray) -> float:
    """theta in [0, pi] with Tr w = 2 cos theta."""
    half_trace = float(np.real(np.trace(w))) / 2.0
    return float(np.arccos(np.clip(half_trace, -1.0, 1.0)))


def quaternion_to_su2(q: np.ndarray) -> np.ndarray:
    """Map unit quaternions (..., 4) onto SU(2) matrices (..., 2, 2)."""
    a, b, c, d = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    w = np.empty(q.shape[:-1] + (2, 2), dtype=complex)
    w[..., 0, 0] = a + 1j * b
    w[..., 0, 1] = c + 1j * d
    w[..., 1, 0] = -c + 1j * d
    w[..., 1, 1] = a - 1j * b
    return w


def _haar_quaternions(generator: np.random.Generator, count: int) -> np.ndarray:
    q = generator.standard_normal((count, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    return q


@dataclass(frozen=True)
class SpinConfiguration:
    """Per-bond SU(2) matrices w_b together with their angles theta_b."""

    matrices: np.ndarray
    angles: np.ndarray = field(default=None)

    def __post_init__(self):
        matrices = np.asarray(self.matrices, dtype=complex).copy()
        if matrices.ndim != 3 or matrices.shape[1:] != (2, 2) or matrices.shape[0] < 1:
            raise InvalidArgumentError("SpinConfiguration needs an array of shape (B, 2, 2)")
        if self.angles is None:
            angles = np.array([angle_from_matrix(w) for w in matrices])
        else:
            angles = np.asarray(self.angles, dtype=float).copy()
        matrices.setflags(write=False)
        angles.setflags(write=False)
        object.__setattr__(self, "matrices", matrices)
        object.__setattr__(self, "angles", angles)
        self.validate()

    @property
    def B(self) -> int:
        return int(self.angles.size)

    @classmethod
    def from_angles(cls, angles: Sequence[float]) -> "SpinConfiguration":
        """Canonical representatives diag(e^{i theta}, e^{-i theta})."""
        angles = np.asarray(angles, dtype=float)
        matrices = np.zeros((angles.size, 2, 2), dtype=complex)
        matrices[:, 0, 0] = np.exp(1j * angles)
        matrices[:, 1, 1] = np.exp(-1j * angles)
        return cls(matrices, angles)

    def validate(self) -> None:
        """Check unitarity, det 1, trace/angle consistency and w != +-id."""
        if self.angles.shape != (self.matrices.shape[0],):
            raise InvalidArgumentError("one angle per matrix is required")
        if np.any(self.angles < 0.0) or np.any(self.angles > np.pi):
            raise InvalidArgumentError("angles must lie in [0, pi]")
        identity = np.eye(2)
        products = np.einsum("bji,bjk->bik", self.matrices.conj(), self.matrices)
        if np.max(np.abs(products - identity)) > MATRIX_TOL * 10:
            raise InvalidArgumentError("spin matrices must be unitary")
        if np.max(np.abs(np.linalg.det(self.matrices) - 1.0)) > MATRIX_TOL * 10:
            raise InvalidArgumentError("spin matrices must have determinant 1")
        traces = np.trace(self.matrices, axis1=1, axis2=2)
        if np.max(np.abs(traces.imag)) > MATRIX_TOL * 10:
            raise InvalidArgumentError("spin matrix traces must be real")
        if np.max(np.abs(traces.real - 2.0 * np.cos(self.angles))) > MATRIX_TOL * 10:
            raise InvalidArgumentError("angles do not match the matrix traces")
        if np.any(np.abs(np.abs(traces.real) - 2.0) <= 0.0):
            raise InvalidConfigurationError("spin configuration contains w_b = +-id")


def sample_spin_configuration(B: int, rng: RngStream) -> SpinConfiguration:
    """Draw B Haar-random SU(2) matrices, redrawing any with |Tr w| near 2."""
    if B < 1:
        raise InvalidArgumentError(f"B must be >= 1, got {B}")
    generator = rng.generator()
    q = _haar_quaternions(generator, B)
    while True:
        bad = np.abs(np.abs(2.0 * q[:, 0]) - 2.0) < TRACE_EXCLUSION
        if not np.any(bad):
            break
        logger.debug(f"Redrawing {int(bad.sum())} spin matrices close to +-id")
        q[bad] = _haar_quaternions(generator, int(bad.sum()))
    matrices = quaternion_to_su2(q)
    angles = np.arccos(np.clip(q[:, 0], -1.0, 1.0))
    return SpinConfiguration(matrices, angles)


def sine_squared_cdf(theta):
    """P(theta_b < x) = (2/pi) int_0^x sin^2 = (2x - sin 2x) / (2 pi)."""
    theta = np.asarray(theta, dtype=float)
    return (2.0 * theta - np.sin(2.0 * theta)) / (2.0 * np.pi)


def semicircle_cdf(t):
    """P(Tr w < t) for the semicircle law on [-2, 2]."""
    t = np.clip(np.asarray(t, dtype=float), -2.0, 2.0)
    return 0.5 + (t * np.sqrt(4.0 - t * t) / 4.0 + np.arcsin(t / 2.0)) / np.pi


def sample_angles(n: int, rng: RngStream) -> np.ndarray:
    """n i.i.d. spin angles (Haar SU(2)), used by distribution checks."""
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    q = _haar_quaternions(rng.generator(), n)
    return np.arccos(np.clip(q[:, 0], -1.0, 1.0))


def trace_second_moment(n: int, rng: RngStream) -> Tuple[float, float]:
    """Sample mean and standard error of (Tr w)^2 over n Haar draws (expected 1)."""
    if n < 2:
        raise InvalidArgumentError(f"n must be >= 2, got {n}")
    q = _haar_quaternions(rng.generator(), n)
    squares = (2.0 * q[:, 0]) ** 2
    return float(np.mean(squares)), float(np.std(squares, ddof=1) / np.sqrt(n))
