"""Synthetic instances with known flats."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .._rng import Stream, as_stream
from ..errors import InvalidParameterError
from ..geometry import Flat, flat_distance, orthogonal_complement, random_orthonormal

DISTRIBUTIONS = ("gaussian", "erlang")


@dataclass(eq=False)
class PlantedInstance:
    points: np.ndarray
    true_flats: list
    true_assignment: np.ndarray
    noise_sigma: float
    outlier_fraction: float
    echo: dict = field(default_factory=dict)

    @property
    def outlier_mask(self) -> np.ndarray:
        return self.true_assignment < 0


def _in_flat_coords(gen, size, distribution, spread):
    if distribution == "gaussian":
        return spread * gen.standard_normal(size)
    # Erlang with shape 2, centred
    return spread * (gen.gamma(2.0, 1.0, size) - 2.0)


def gen_planted(d: int, j: int, k: int, n: int, noise_sigma: float = 0.0,
                outlier_fraction: float = 0.0, distribution: str = "gaussian", rng=0, *,
                spread: float = 1.0, anchor_scale: float = 3.0,
                min_separation: float = 0.0) -> PlantedInstance:
    """``k`` random ``j``-flats in ``R^d`` with points scattered along them.

    In-flat coordinates follow ``distribution`` scaled by ``spread``; noise
    is ``N(0, noise_sigma^2)`` in each of the ``d - j`` normal directions.
    ``round(outlier_fraction * n)`` points are replaced by uniform draws
    from a box ten times the half-extent of the inliers; they are labelled
    ``-1``.  Flat anchors are redrawn until every pair of flats is at least
    ``min_separation`` apart.  The result's ``echo`` regenerates it exactly.
    """
    if distribution not in DISTRIBUTIONS:
        raise InvalidParameterError(f"distribution must be one of {DISTRIBUTIONS}")
    if not 0 <= j <= d or k < 1:
        raise InvalidParameterError("need 0 <= j <= d and k >= 1")
    if n < k:
        raise InvalidParameterError("need n >= k")
    if noise_sigma < 0 or not 0 <= outlier_fraction < 1:
        raise InvalidParameterError("need noise_sigma >= 0 and 0 <= outlier_fraction < 1")
    stream = as_stream(rng)
    echo = dict(d=d, j=j, k=k, n=n, noise_sigma=float(noise_sigma),
                outlier_fraction=float(outlier_fraction), distribution=distribution,
                spread=float(spread), anchor_scale=float(anchor_scale),
                min_separation=float(min_separation), seed=stream.seed, key=list(stream.key))
    gen = stream.generator()

    flats = None
    for _ in range(1000):
        cand = [Flat(anchor_scale * gen.standard_normal(d), random_orthonormal(d, j, gen))
                for _ in range(k)]
        if all(flat_distance(cand[a], cand[b]) >= min_separation
               for a in range(k) for b in range(a + 1, k)):
            flats = cand
            break
    if flats is None:
        raise InvalidParameterError("could not place flats with the requested separation")

    n_out = int(round(outlier_fraction * n))
    n_in = n - n_out
    labels = np.arange(n_in) % k
    X = np.empty((n_in, d))
    for l, F in enumerate(flats):
        idx = np.flatnonzero(labels == l)
        C = _in_flat_coords(gen, (idx.size, j), distribution, spread)
        N = orthogonal_complement(F.basis, d)
        E = noise_sigma * gen.standard_normal((idx.size, d - j))
        X[idx] = F.anchor + C @ F.basis + E @ N
    if n_out:
        lo, hi = X.min(axis=0), X.max(axis=0)
        mid, half = (lo + hi) / 2, np.maximum((hi - lo) / 2, 1e-12)
        O = mid + 10 * half * gen.uniform(-1, 1, (n_out, d))
        X = np.vstack([X, O])
        labels = np.concatenate([labels, -np.ones(n_out, dtype=int)])
    perm = gen.permutation(n)
    return PlantedInstance(X[perm], flats, labels[perm].astype(np.int64), float(noise_sigma),
                           float(outlier_fraction), echo)


def regenerate(echo: dict) -> PlantedInstance:
    e = dict(echo)
    stream = Stream(e.pop("seed"), tuple(e.pop("key")))
    return gen_planted(rng=stream, **e)


def assignment_accuracy(truth, pred, k: int) -> float:
    """Agreement on points that are inliers in both labelings, best label matching."""
    truth, pred = np.asarray(truth), np.asarray(pred)
    both = (truth >= 0) & (pred >= 0)
    if not np.any(both):
        return 0.0
    t, p = truth[both], pred[both]
    best = 0
    for perm in itertools.permutations(range(k)):
        best = max(best, int(np.count_nonzero(np.asarray(perm)[p] == t)))
    return best / t.size
