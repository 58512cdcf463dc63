"""(k, j)-projective clustering with global outlier trimming.

Pipeline: optional dimension reduction; ``k`` pools of candidate flats
(each pool is the leaf set of one or more rotation trees); exhaustive
enumeration of one flat per pool, scored by the trimmed objective; a second
round whose trees carry grid siblings around every candidate point; lift
back to the input space.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._parallel import ordered_map
from ._rng import Stream, as_stream
from .errors import DimensionMismatchError, InvalidParameterError, ResourceLimitError
from .fitting import FitConfig, grow_trees, path_pool, trimmed_mean
from .geometry import Flat, as_points, as_vector, ceil_count, orthonormalize
from .sampling import sample_size_clustering

OUTLIER = -1


@dataclass
class GridConfig:
    enabled: bool = True
    per_axis_resolution: int = 3
    radius_scale: float = 1.0
    max_points: int = 10_000

    def __post_init__(self):
        if self.per_axis_resolution < 1:
            raise InvalidParameterError("per_axis_resolution must be >= 1")
        if not self.radius_scale > 0:
            raise InvalidParameterError("radius_scale must be positive")


@dataclass
class ClusterConfig:
    """Parameters of :func:`run_clustering`.

    ``reduction`` is ``"identity"`` or ``"rp:<d'>"``.  ``anchor`` and
    ``center_samples`` choose the tree centres as in
    :class:`flatfit.fitting.FitConfig`; the default tries every subset mean
    of a 3-point sample, since a single sample mean straddles clusters.
    """

    k: int = 2
    j: int = 1
    tau: int = 2
    eps: float = 0.5
    gamma: float = 0.1
    seed: int = 0
    r_override: int | None = None
    grid: GridConfig = field(default_factory=GridConfig)
    reduction: str = "identity"
    center_samples: int | None = 3
    anchor: str = "subset_means"
    center_mode: str = "given"
    max_paths: int = 1_000_000
    max_combinations: int = 10_000_000
    content_addressed: bool = False

    def __post_init__(self):
        if isinstance(self.grid, dict):
            self.grid = GridConfig(**self.grid)
        if self.k < 1 or self.j < 0:
            raise InvalidParameterError("need k >= 1 and j >= 0")
        if self.tau < 1:
            raise InvalidParameterError("tau must be >= 1")
        if not 0 <= self.gamma < 1:
            raise InvalidParameterError("gamma must be in [0, 1)")
        if not self.eps > 0:
            raise InvalidParameterError("eps must be positive")
        if self.gamma == 0 and self.r_override is None:
            raise InvalidParameterError("gamma=0 needs r_override")
        if self.r_override is not None and self.r_override < 1:
            raise InvalidParameterError("r_override must be >= 1")
        parse_reduction(self.reduction)
        # validates anchor / center_mode
        FitConfig(anchor=self.anchor, center_mode=self.center_mode,
                  center_samples=self.center_samples)

    def echo(self) -> dict:
        return asdict(self)


@dataclass(eq=False)
class ClusteringResult:
    flats: list
    assignment: np.ndarray
    outlier_indices: np.ndarray
    objective: float
    step4_objective: float
    step6_objective: float | None
    grid_best_objective: float | None
    config: dict
    seed: int
    r: int
    t: int | None
    r_B: float | None
    eps0: float | None
    n_candidates: list
    n_combinations: int
    used_grid: bool


# ---------------------------------------------------------------- reduction

def parse_reduction(mode) -> int | None:
    """``None`` for identity, else the target dimension of ``"rp:<d'>"``."""
    if mode in (None, "identity"):
        return None
    if isinstance(mode, str) and mode.startswith("rp:"):
        try:
            dp = int(mode[3:])
        except ValueError:
            raise InvalidParameterError(f"bad reduction {mode!r}") from None
        if dp < 1:
            raise InvalidParameterError("reduced dimension must be >= 1")
        return dp
    raise InvalidParameterError(f"reduction must be 'identity' or 'rp:<d>', got {mode!r}")


@dataclass(eq=False)
class BackMap:
    """Maps flats between the reduced and the input space.

    ``y = scale * W (x - mu)`` with ``W`` having orthonormal rows; identity
    when ``W`` is ``None``.
    """

    W: np.ndarray | None = None
    mu: np.ndarray | None = None
    scale: float = 1.0

    def points(self, X) -> np.ndarray:
        X = as_points(X)
        if self.W is None:
            return X
        return self.scale * (X - self.mu) @ self.W.T

    def lift(self, F: Flat) -> Flat:
        if self.W is None:
            return F
        anchor = self.mu + (F.anchor @ self.W) / self.scale
        return Flat(anchor, F.basis @ self.W)

    def project_flat(self, F: Flat) -> Flat:
        """Image of a flat under the reduction map (basis re-orthonormalised)."""
        if self.W is None:
            return F
        a = self.points(F.anchor[None, :])[0]
        if F.dim == 0:
            return Flat(a, np.zeros((0, self.W.shape[0])))
        return Flat(a, orthonormalize(F.basis @ self.W.T))


def reduce_dimension(P, mode="identity", rng=0):
    """Return ``(Y, back_map)``; ``"rp:<d'>"`` uses a seeded random orthonormal map.

    The map is scaled by ``sqrt(d / d')`` so squared distances are preserved
    in expectation.
    """
    X = as_points(P)
    dp = parse_reduction(mode)
    if dp is None:
        return X, BackMap()
    d = X.shape[1]
    if dp > d:
        raise InvalidParameterError(f"cannot reduce d={d} to d'={dp}")
    gen = as_stream(rng).child("reduce").generator()
    G = gen.standard_normal((d, dp))
    Q, R = np.linalg.qr(G)
    Q = Q * np.sign(np.diag(R))
    bm = BackMap(Q.T.copy(), X.mean(axis=0), math.sqrt(d / dp))
    return bm.points(X), bm


# ---------------------------------------------------------------- scoring

def outlier_count(n: int, gamma: float) -> int:
    return min(ceil_count(gamma * n), n - 1)


def assign_and_trim(P, flats, tau: int = 2, gamma: float = 0.0):
    """Assign points to their nearest flat and drop the worst ``ceil(gamma n)``.

    Returns ``(assignment, outliers, objective)``.  Outliers carry label
    ``-1``.  Among equal distances the lower index is kept.
    """
    X = as_points(P)
    if not flats:
        raise InvalidParameterError("need at least one flat")
    n = X.shape[0]
    for F in flats:
        if F.ambient_dim != X.shape[1]:
            raise DimensionMismatchError("flat and points differ in dimension")
    dist = np.column_stack([F.distances(X) for F in flats])
    assignment = np.argmin(dist, axis=1)
    vals = dist[np.arange(n), assignment] ** tau
    n_out = outlier_count(n, gamma)
    order = np.lexsort((np.arange(n), vals))
    outliers = np.sort(order[n - n_out:])
    assignment = assignment.astype(np.int64)
    assignment[outliers] = OUTLIER
    return assignment, outliers, trimmed_mean(vals, n - n_out)


def grid_candidates(center, r_B: float, grid_cfg: GridConfig, ambient_dim: int | None = None,
                    directions=None) -> np.ndarray:
    """Grid points of the cube inscribed in the ball ``B(center, r_B)``.

    The grid is axis-aligned in the coordinates given by the rows of
    ``directions`` (default: the standard basis of ``ambient_dim``
    dimensions).  An odd resolution includes ``center``.
    """
    c = as_vector(center, name="center")
    if not r_B > 0:
        raise InvalidParameterError("r_B must be positive")
    if directions is None:
        m = ambient_dim if ambient_dim is not None else c.shape[0]
        if m != c.shape[0]:
            raise DimensionMismatchError("ambient_dim differs from centre dimension")
        directions = np.eye(m)
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    m = directions.shape[0]
    res = grid_cfg.per_axis_resolution
    if m == 0:
        return c[None, :].copy()
    if res ** m > grid_cfg.max_points:
        raise ResourceLimitError(
            f"grid of {res}^{m} points exceeds max_points={grid_cfg.max_points}")
    half = r_B / math.sqrt(m)
    axis = np.linspace(-half, half, res) if res > 1 else np.zeros(1)
    offs = np.array(list(itertools.product(axis, repeat=m)))
    offs = offs[np.linalg.norm(offs, axis=1) <= r_B * (1 + 1e-12)]
    return c + offs @ directions


def _trimmed_scores(M: np.ndarray, keep: int) -> np.ndarray:
    if keep == M.shape[-1]:
        return M.mean(axis=-1)
    return np.partition(M, keep - 1, axis=-1)[..., :keep].mean(axis=-1)


def enumerate_combinations(pools, keep: int, max_combinations: int = 10_000_000,
                           block_elems: int = 4_000_000):
    """Best choice of one row per pool under the trimmed-min objective.

    ``pools`` is a list of ``(N_l, n)`` arrays of ``distance ** tau``.
    Combinations are ranked lexicographically (last pool fastest); the
    first minimiser wins.  Returns ``(indices, score, count)``.
    """
    sizes = [p.shape[0] for p in pools]
    total = math.prod(sizes)
    if total == 0:
        raise InvalidParameterError("a candidate pool is empty")
    if total > max_combinations:
        raise ResourceLimitError(
            f"{total} combinations exceed max_combinations={max_combinations}")
    n = pools[0].shape[1]
    last = pools[-1]
    prefixes = list(itertools.product(*[range(s) for s in sizes[:-1]]))
    step = max(1, block_elems // max(1, last.shape[0] * n))
    blocks = [prefixes[s:s + step] for s in range(0, len(prefixes), step)]

    def score(block):
        if len(pools) == 1:
            base = np.full((1, n), np.inf)
        else:
            base = np.stack([np.min(np.stack([pools[l][i] for l, i in enumerate(pre)]), axis=0)
                             for pre in block])
        S = _trimmed_scores(np.minimum(base[:, None, :], last[None, :, :]), keep)
        flat_idx = int(np.argmin(S))
        return flat_idx, float(S.reshape(-1)[flat_idx])

    best, best_val = None, math.inf
    for block, (fi, val) in zip(blocks, ordered_map(score, blocks)):
        if val < best_val:
            b, i = divmod(fi, last.shape[0])
            best, best_val = tuple(block[b]) + (i,), val
    if best is None:
        raise InvalidParameterError("no finite combination")
    return best, best_val, total


# ---------------------------------------------------------------- pipeline

def _pool_stream(stream: Stream, l: int) -> Stream:
    # pool 0 shares the single-flat stream so k=1 matches fit_single_flat
    return stream if l == 0 else stream.child("pool", l)


def _build_pools(Y, cfg: ClusterConfig, r: int, fcfg: FitConfig, stream: Stream, augment=None):
    def one(l):
        trees = grow_trees(Y, cfg.j, r, fcfg, _pool_stream(stream, l), augment=augment)
        anchors, bases, Ds = [], [], []
        for t in trees:
            B, _, D = path_pool(t, Y, cfg.tau)
            anchors.append(np.repeat(t.o[None, :], B.shape[0], axis=0))
            bases.append(B)
            Ds.append(D)
        return np.concatenate(anchors), np.concatenate(bases), np.concatenate(Ds)

    return ordered_map(one, range(cfg.k))


def _flats_of(pools, combo):
    return [Flat(pools[l][0][i], pools[l][1][i]) for l, i in enumerate(combo)]


def run_clustering(P, cfg: ClusterConfig, rng=None) -> ClusteringResult:
    """Cluster ``P`` around ``cfg.k`` flats of dimension ``cfg.j``.

    ``rng`` defaults to ``Stream(cfg.seed)``.  The returned objective is the
    trimmed mean of ``distance ** tau`` over inliers in the input space,
    recomputed from the chosen flats.  The grid round never makes it worse:
    its best combination replaces the first-round one only when its
    recomputed objective is not larger.
    """
    X0 = as_points(P)
    n, d = X0.shape
    if n < cfg.k:
        raise InvalidParameterError("need at least k points")
    if not 1 <= cfg.j <= d:
        raise InvalidParameterError(f"need 1 <= j <= d, got j={cfg.j}, d={d}")
    stream = as_stream(cfg.seed if rng is None else rng)
    perm = np.lexsort(X0.T[::-1]) if cfg.content_addressed else np.arange(n)
    X = X0[perm]
    Y, back = reduce_dimension(X, cfg.reduction, stream)
    if cfg.j > Y.shape[1]:
        raise InvalidParameterError("j exceeds the reduced dimension")

    try:
        t, r_formula = sample_size_clustering(cfg.k, cfg.j, cfg.gamma, cfg.eps)
    except InvalidParameterError:
        if cfg.r_override is None:
            raise
        t, r_formula = None, None
    r = cfg.r_override or r_formula
    fcfg = FitConfig(r=r, center_mode=cfg.center_mode, anchor=cfg.anchor,
                     center_samples=cfg.center_samples, max_paths=cfg.max_paths)
    keep = n - outlier_count(n, cfg.gamma)
    eps0 = None if t is None else cfg.eps / (4 * cfg.j * (1 + 5 * math.sqrt(cfg.j) * r) ** cfg.j * t)

    pools = _build_pools(Y, cfg, r, fcfg, stream)
    combo, _, count = enumerate_combinations([p[2] for p in pools], keep, cfg.max_combinations)
    flats4 = [back.lift(F) for F in _flats_of(pools, combo)]
    a4, o4, L = assign_and_trim(X, flats4, cfg.tau, cfg.gamma)
    sizes = [p[2].shape[0] for p in pools]

    flats, assignment, outliers, objective = flats4, a4, o4, L
    r_B, obj6, raw6, used_grid = None, None, None, False
    if cfg.grid.enabled and L > 0:
        # L is measured in the input space; the grid lives in the reduced one
        r_B = 5 * math.sqrt(cfg.j) * r * L ** (1.0 / cfg.tau) * cfg.grid.radius_scale
        if back.W is not None:
            r_B *= back.scale

        def augment(tp, dirs):
            return grid_candidates(tp, r_B, cfg.grid, directions=dirs)

        pools6 = _build_pools(Y, cfg, r, fcfg, stream, augment=augment)
        combo6, _, count6 = enumerate_combinations([p[2] for p in pools6], keep,
                                                    cfg.max_combinations)
        count += count6
        sizes = [p[2].shape[0] for p in pools6]
        flats6 = [back.lift(F) for F in _flats_of(pools6, combo6)]
        a6, o6, raw6 = assign_and_trim(X, flats6, cfg.tau, cfg.gamma)
        if raw6 <= L:
            flats, assignment, outliers, objective, used_grid = flats6, a6, o6, raw6, True
        obj6 = objective

    inv = np.empty(n, dtype=np.int64)
    inv[perm] = np.arange(n)
    assignment = assignment[inv]
    outliers = np.sort(perm[outliers])
    return ClusteringResult(
        flats=flats, assignment=assignment, outlier_indices=outliers, objective=float(objective),
        step4_objective=float(L), step6_objective=None if obj6 is None else float(obj6),
        grid_best_objective=None if raw6 is None else float(raw6),
        config=cfg.echo(), seed=stream.seed, r=int(r), t=t, r_B=r_B, eps0=eps0,
        n_candidates=sizes, n_combinations=int(count), used_grid=used_grid)
