"""Uniform sampling, symmetric sampling and the sample-size rules."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._rng import Stream
from .errors import DimensionMismatchError, InvalidParameterError, ResourceLimitError
from .geometry import as_points, as_vector, ceil_count

MAX_SYMMETRIC_BITS = 22


def _generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, Stream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return Stream(int(rng)).generator()
    raise TypeError("rng must be a Stream, a numpy Generator or an integer seed")


@dataclass(frozen=True, eq=False)
class Sample:
    points: np.ndarray
    source_indices: np.ndarray

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """Means of every nonempty subset of ``S ∪ -S``.

    Bit ``i`` of a mask (``i < r``) selects ``s_i``; bit ``r + i`` selects
    its reflection ``2o - s_i``.
    """

    points: np.ndarray
    masks: np.ndarray
    r: int

    def __len__(self) -> int:
        return self.points.shape[0]

    def reflected_mask(self, mask: int) -> int:
        low = mask & ((1 << self.r) - 1)
        high = mask >> self.r
        return (low << self.r) | high


def uniform_sample(P, r: int, rng) -> Sample:
    """Draw ``r`` points of ``P`` independently and uniformly (with replacement)."""
    if r < 1:
        raise InvalidParameterError("sample size must be >= 1")
    X = as_points(P)
    idx = _generator(rng).integers(0, X.shape[0], size=int(r))
    return Sample(X[idx], idx)


def symmetric_sampling(S, o) -> CandidateSet:
    """Enumerate the mean of every nonempty subset of ``S ∪ (2o - S)``.

    ``S`` may be a :class:`Sample` or an ``(r, d)`` array.  The result has
    ``2**(2r) - 1`` points: the empty subset has no mean and is skipped.
    """
    pts = S.points if isinstance(S, Sample) else as_points(S, name="S")
    o = as_vector(o, name="o")
    if pts.shape[1] != o.shape[0]:
        raise DimensionMismatchError("sample and centre differ in dimension")
    r = pts.shape[0]
    nbits = 2 * r
    if nbits > MAX_SYMMETRIC_BITS:
        raise ResourceLimitError(f"symmetric sampling of r={r} points needs 2^{nbits} subsets")
    both = np.vstack([pts, 2.0 * o - pts])
    masks = np.arange(1, 1 << nbits, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(nbits)) & 1).astype(float)
    means = (bits @ both) / bits.sum(axis=1, keepdims=True)
    return CandidateSet(means, masks, r)


def mean(P) -> np.ndarray:
    X = as_points(P)
    return X.mean(axis=0)


def sample_size_single(j: int, gamma: float, eps: float, log_arg: str = "j") -> int:
    """Sample size ``ceil(4 j^2 / (gamma eps) * ln(j / eps))`` for one rotation step.

    ``log_arg="j2"`` uses ``ln(j^2 / eps)`` instead, the variant used when
    the step is repeated ``j`` times with ``eps`` replaced by ``eps / j``.
    """
    if not 0 < gamma <= 1:
        raise InvalidParameterError("gamma must be in (0, 1]")
    if not eps > 0:
        raise InvalidParameterError("eps must be positive")
    if j < 1:
        raise InvalidParameterError("j must be >= 1")
    arg = {"j": j / eps, "j2": j * j / eps}.get(log_arg)
    if arg is None:
        raise InvalidParameterError("log_arg must be 'j' or 'j2'")
    if arg <= 1:
        raise InvalidParameterError("eps too large: logarithm argument is <= 1")
    return max(1, ceil_count(4.0 * j * j / (gamma * eps) * math.log(arg)))


def sample_size_clustering(k: int, j: int, gamma: float, eps: float):
    """``(t, r)`` with ``t = 8 j^2/(gamma eps) ln(k j^2/eps)``, ``r = (2kt/gamma) ln(2kt)``.

    Both are rounded up and clamped below at 1.
    """
    if k < 1 or j < 1:
        raise InvalidParameterError("k and j must be >= 1")
    if not 0 < gamma <= 1 or not eps > 0:
        raise InvalidParameterError("need 0 < gamma <= 1 and eps > 0")
    arg = k * j * j / eps
    if arg < 1:
        raise InvalidParameterError("k j^2 / eps < 1 makes the logarithm negative")
    t = max(1, ceil_count(8.0 * j * j / (gamma * eps) * math.log(arg)))
    r = max(1, ceil_count(2.0 * k * t / gamma * math.log(2 * k * t)))
    return t, r
