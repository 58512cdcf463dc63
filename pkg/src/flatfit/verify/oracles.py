"""Exact oracles for tiny instances."""
from __future__ import annotations

import itertools

import numpy as np

from ..errors import DegenerateError, InvalidParameterError
from ..geometry import Flat, as_points, orthonormalize

MAX_BRUTE_N = 10


def set_partitions(n: int, k: int):
    """Restricted-growth labelings of ``n`` items into at most ``k`` blocks."""
    labels = [0] * n

    def rec(i, used):
        if i == n:
            yield tuple(labels)
            return
        for b in range(min(used + 1, k)):
            labels[i] = b
            yield from rec(i + 1, max(used, b + 1))

    if n == 0:
        yield ()
        return
    yield from rec(1, 1)


def _pca_flat(X: np.ndarray, j: int) -> Flat:
    mu = X.mean(axis=0)
    _, _, Vt = np.linalg.svd(X - mu, full_matrices=True)
    return Flat(mu, Vt[:j])


def _hull_flats(X: np.ndarray, j: int):
    """Affine hulls of ``(j+1)``-subsets (full rank only)."""
    for idx in itertools.combinations(range(X.shape[0]), j + 1):
        pts = X[list(idx)]
        try:
            B = orthonormalize(pts[1:] - pts[0]) if j else np.zeros((0, X.shape[1]))
        except DegenerateError:
            continue
        yield Flat(pts[0], B)


def _objective(X, flats, tau):
    D = np.column_stack([F.distances(X) for F in flats])
    return float(np.mean(D.min(axis=1) ** tau))


def brute_force_clustering(P, k: int, j: int, tau: int = 2):
    """Global optimum of the untrimmed objective by enumerating partitions.

    For ``tau == 2`` every block gets its least-squares flat, which is
    exact.  For other ``tau`` flats are restricted to affine hulls of
    ``j + 1`` input points (an upper bound on the optimum).  Returns
    ``(flats, objective)``; limited to ``n <= 10``.
    """
    X = as_points(P)
    n, d = X.shape
    if n > MAX_BRUTE_N:
        raise InvalidParameterError(f"brute force is limited to n <= {MAX_BRUTE_N}")
    if k < 1 or not 0 <= j <= d:
        raise InvalidParameterError("need k >= 1 and 0 <= j <= d")
    if tau != 2:
        hulls = list(_hull_flats(X, j))
        if not hulls:
            raise DegenerateError("no full-rank point subset spans a j-flat")
        D = np.array([F.distances(X) ** tau for F in hulls])
        best, best_val = None, np.inf
        for combo in itertools.combinations_with_replacement(range(len(hulls)), min(k, len(hulls))):
            val = float(np.mean(D[list(combo)].min(axis=0)))
            if val < best_val:
                best, best_val = combo, val
        return [hulls[i] for i in best], best_val

    best, best_val = None, np.inf
    for labels in set_partitions(n, k):
        lab = np.array(labels)
        flats = [_pca_flat(X[lab == b], j) for b in range(lab.max() + 1)]
        cost = float(sum(np.sum(F.distances(X[lab == b]) ** 2) for b, F in enumerate(flats)) / n)
        if cost < best_val:
            best, best_val = flats, cost
    # nearest-flat reassignment can only lower the cost
    return best, min(best_val, _objective(X, best, 2))
