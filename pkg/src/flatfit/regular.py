"""Regular mode: inputs whose projections have a bounded coefficient of variation.

For such inputs a sample of ``m = ceil((omega^2 - 1) (j/eps)^2)`` points
suffices and no points need to be trimmed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._rng import as_stream
from .cluster import ClusterConfig, GridConfig, run_clustering
from .errors import DegenerateError, InvalidParameterError
from .fitting import FitConfig, FitResult, fit_single_flat, optimal_flat_tau2
from .geometry import Flat, as_points, ceil_count


@dataclass(eq=False)
class RegularStats:
    omega: float
    directions_tested: int
    per_direction_cv: np.ndarray


def coefficient_of_variation(xs, tau: int = 2) -> float:
    """``(mean |x - mu|^tau)^(1/tau) / mean |x - mu|``."""
    x = np.asarray(xs, dtype=float).ravel()
    if x.size < 2:
        raise InvalidParameterError("need at least two values")
    if tau < 1:
        raise InvalidParameterError("tau must be >= 1")
    dev = np.abs(x - x.mean())
    den = dev.mean()
    if den <= 1e-12 * max(1.0, float(np.max(np.abs(x)))):
        raise DegenerateError("constant data has no coefficient of variation")
    return float(np.mean(dev ** tau) ** (1.0 / tau) / den)


def regular_factor(P, F: Flat, n_directions: int = 64, rng=0, tau: int = 2) -> RegularStats:
    """Estimate the regular factor as the largest CV over random directions in ``F``.

    Directions are uniform on the unit sphere of ``F``'s span; directions
    along which the projections are constant are skipped.
    """
    X = as_points(P)
    if n_directions < 1:
        raise InvalidParameterError("n_directions must be >= 1")
    if F.dim == 0:
        raise InvalidParameterError("a 0-flat has no directions")
    gen = as_stream(rng).child("directions").generator()
    C = gen.standard_normal((n_directions, F.dim))
    V = (C / np.linalg.norm(C, axis=1, keepdims=True)) @ F.basis
    proj = (X - X.mean(axis=0)) @ V.T
    cvs = []
    for col in proj.T:
        try:
            cvs.append(coefficient_of_variation(col, tau))
        except DegenerateError:
            continue
    if not cvs:
        raise DegenerateError("every sampled direction is degenerate")
    cvs = np.array(cvs)
    return RegularStats(float(cvs.max()), n_directions, cvs)


def regular_sample_size(omega: float, eps: float, j: int) -> int:
    """``ceil((omega^2 - 1) (j / eps)^2)``, at least 1."""
    if not eps > 0:
        raise InvalidParameterError("eps must be positive")
    if omega < 1:
        raise InvalidParameterError("omega must be >= 1")
    return max(1, ceil_count((omega * omega - 1) * (j / eps) ** 2))


def regular_bound(omega: float, eps: float, j: int) -> float:
    """Approximation factor ``(1 + 5 sqrt(j) omega / (1 - sqrt(eps)))^(2j)``."""
    return (1 + 5 * math.sqrt(j) * omega / (1 - math.sqrt(eps))) ** (2 * j)


def fit_regular(P, j: int, eps: float = 0.5, tau: int = 2, rng=0, cfg: FitConfig | None = None,
                omega: float | None = None, max_r: int | None = None) -> FitResult:
    """Fit a ``j``-flat to every point of a regular input.

    The tree sample size is ``regular_sample_size(omega, eps, j)``, capped at
    ``max_r`` because the leaf count grows as ``4^(r j)``.  The default cap
    is 8, lowered so that the tree fits in ``max_paths`` leaves.  ``omega`` is
    estimated on the least-squares flat when not given.  The anchor is the
    mean of ``P`` unless ``cfg`` says otherwise.
    """
    X = as_points(P)
    stream = as_stream(rng)
    if omega is None:
        try:
            omega = regular_factor(X, optimal_flat_tau2(X, j), rng=stream.child("omega"),
                                   tau=tau).omega
        except DegenerateError:
            omega = 1.0
    base = cfg or FitConfig(anchor="exact_mean")
    if max_r is None:
        max_r = min(8, max(1, int(math.log(base.max_paths) / (j * math.log(4)))))
    r = base.r or min(max_r, regular_sample_size(omega, eps, j))
    fcfg = FitConfig(r=r, log_arg=base.log_arg, center_mode=base.center_mode, anchor=base.anchor,
                     center_samples=base.center_samples, max_paths=base.max_paths,
                     dedup_tol=base.dedup_tol)
    res = fit_single_flat(X, j, gamma=0.0, eps=eps, tau=tau, rng=stream, config=fcfg)
    res.info["omega"] = float(omega)
    return res


def fit_regular_clustering(P, k: int, j: int, eps: float = 0.5, omega: float = 1.5,
                           min_cluster_fraction: float = 0.25, tau: int = 2, seed: int = 0,
                           grid: GridConfig | None = None, max_r: int = 4, **kw):
    """Regular clustering: :func:`run_clustering` with no trimming.

    Each tree sample must catch ``m`` points of a cluster holding at least a
    ``min_cluster_fraction`` share, so ``r = ceil(m / min_cluster_fraction)``
    (capped at ``max_r``).
    """
    if not 0 < min_cluster_fraction <= 1:
        raise InvalidParameterError("min_cluster_fraction must be in (0, 1]")
    m = regular_sample_size(omega, eps, j)
    r = min(max_r, ceil_count(m / min_cluster_fraction))
    cfg = ClusterConfig(k=k, j=j, tau=tau, eps=eps, gamma=0.0, seed=seed, r_override=r,
                        grid=grid or GridConfig(enabled=False), **kw)
    return run_clustering(P, cfg)
