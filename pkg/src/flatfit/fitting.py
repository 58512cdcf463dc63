"""Single j-flat fitting by recursive projection.

A rotation tree has height ``j``.  Every internal node owns a subspace
``f_v`` through the centre ``o``; it projects the data onto ``f_v``, draws
a uniform sample of size ``r``, and creates one child per symmetric-sampling
candidate ``t``.  The child's subspace is the part of ``f_v`` orthogonal to
``t - o``.  Each root-to-leaf path ``t_1, ..., t_j`` spans a candidate flat
through ``o``; :func:`best_path` scores every path by its trimmed objective.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ._rng import Stream, as_stream
from .errors import DegenerateError, InvalidParameterError, ResourceLimitError
from .geometry import (
    Flat,
    as_points,
    as_vector,
    ceil_count,
    orthogonal_complement,
    orthonormalize,
)
from .sampling import sample_size_single, symmetric_sampling, uniform_sample

RANK_RTOL = 1e-10
CENTER_MODES = ("given", "literal")
ANCHORS = ("sample_mean", "subset_means", "exact_mean")


class RotationNode:
    """Node of a rotation tree.

    ``point`` is the candidate ``t_v`` (``None`` at the root); the node's
    subspace is ``center + span(normals)^⊥``; ``pivot`` is the centre used
    when this node is expanded (equal to ``center`` unless the tree was
    built with ``center_mode="literal"``).
    """

    __slots__ = ("point", "center", "pivot", "_normals", "depth", "children", "key", "parent")

    def __init__(self, point, center, normals, depth, key, parent=None):
        self.point = point
        self.center = center
        self.pivot = center
        self._normals = normals
        self.depth = depth
        self.children = []
        self.key = key
        self.parent = parent

    @property
    def normals(self) -> np.ndarray:
        if self._normals is None:
            # leaves compute their normals on demand
            p = self.parent
            v = self.point - p.pivot
            v = v - (v @ p.normals.T) @ p.normals
            self._normals = np.vstack([p.normals, v / np.linalg.norm(v)])
        return self._normals

    @property
    def subspace(self) -> Flat:
        d = self.center.shape[0]
        return Flat(self.center, orthogonal_complement(self.normals, d))

    def is_leaf(self) -> bool:
        return not self.children

    def __repr__(self):
        return f"RotationNode(depth={self.depth}, children={len(self.children)})"


@dataclass(eq=False)
class RotationTree:
    root: RotationNode
    o: np.ndarray
    r: int
    j: int
    n_leaves: int = 0

    def leaves(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.depth == self.j:
                yield node
            else:
                stack.extend(reversed(node.children))

    def leaf_parents(self):
        """Internal nodes at depth ``j - 1`` in depth-first order."""
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.depth == self.j - 1:
                yield node
            elif node.depth < self.j - 1:
                stack.extend(reversed(node.children))

    def path_to(self, node: RotationNode) -> list:
        out = []
        while node.parent is not None:
            out.append(node)
            node = node.parent
        return out[::-1]


@dataclass(eq=False)
class FitResult:
    flat: Flat
    inlier_indices: np.ndarray
    trimmed_objective: float
    path: np.ndarray
    tau: int = 2
    gamma: float = 0.0
    r: int = 0
    n_paths: int = 0
    center: np.ndarray | None = None
    info: dict = field(default_factory=dict)


@dataclass
class FitConfig:
    """Knobs for :func:`fit_single_flat`.

    r : sample size per tree node; ``None`` uses :func:`sample_size_single`.
    log_arg : ``"j2"`` (default) or ``"j"``, the logarithm argument of the
        sample-size rule.
    center_mode : ``"given"`` keeps ``o`` fixed in the whole tree;
        ``"literal"`` re-centres every node at the mean of its sample.
    anchor : how ``o`` is chosen: mean of a uniform sample
        (``"sample_mean"``), every nonempty subset mean of that sample, one
        tree each (``"subset_means"``), or the mean of all points
        (``"exact_mean"``).
    center_samples : size of the anchor sample; ``None`` means ``r``.
    """

    r: int | None = None
    log_arg: str = "j2"
    center_mode: str = "given"
    anchor: str = "sample_mean"
    center_samples: int | None = None
    max_paths: int = 1_000_000
    dedup_tol: float = 1e-12

    def __post_init__(self):
        if self.center_mode not in CENTER_MODES:
            raise InvalidParameterError(f"center_mode must be one of {CENTER_MODES}")
        if self.anchor not in ANCHORS:
            raise InvalidParameterError(f"anchor must be one of {ANCHORS}")
        if self.r is not None and self.r < 1:
            raise InvalidParameterError("r must be >= 1")
        if self.center_samples is not None and self.center_samples < 1:
            raise InvalidParameterError("center_samples must be >= 1")


def _dedup(points: np.ndarray, tol: float) -> np.ndarray:
    """Indices of the first member of every group of near-identical rows."""
    if points.shape[0] < 2:
        return np.arange(points.shape[0])
    pairs = cKDTree(points).query_pairs(tol, output_type="ndarray")
    if pairs.size == 0:
        return np.arange(points.shape[0])
    drop = np.zeros(points.shape[0], dtype=bool)
    for i, k in pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]:
        if not drop[i]:
            drop[k] = True
    return np.flatnonzero(~drop)


def build_tree(P, o, j: int, r: int, rng, center_mode: str = "given", *,
               augment=None, max_paths: int = 1_000_000, dedup_tol: float = 1e-12) -> RotationTree:
    """Grow the rotation tree of height ``j`` for centre ``o``.

    Parameters
    ----------
    P : (n, d) array
    o : (d,) array
        Centre every subspace passes through.
    j, r : int
        Tree height and sample size per node.
    rng : Stream or int
        Node samples are drawn from ``rng.child("node", *node.key)``, so a
        node's subtree is the same whatever siblings it has.
    center_mode : {"given", "literal"}
    augment : callable, optional
        ``augment(t, directions) -> (m, d) array`` of extra sibling points
        for candidate ``t``; ``directions`` spans the node's subspace.  Used
        for grid refinement.
    max_paths : int
        Hard cap on the number of leaves.

    Candidates equal to the centre are skipped and near-duplicate
    candidates (within ``dedup_tol`` times the data scale) are merged.
    """
    X = as_points(P)
    n, d = X.shape
    o = as_vector(o, name="o")
    if not 1 <= j <= d:
        raise InvalidParameterError(f"need 1 <= j <= d, got j={j}, d={d}")
    if r < 1:
        raise InvalidParameterError("r must be >= 1")
    if center_mode not in CENTER_MODES:
        raise InvalidParameterError(f"center_mode must be one of {CENTER_MODES}")
    stream = as_stream(rng)
    scale = max(1.0, float(np.max(np.abs(X - o))))
    tol = dedup_tol * scale

    root = RotationNode(None, o, np.zeros((0, d)), 0, ())
    tree = RotationTree(root, o, int(r), int(j))
    level = [root]
    for depth in range(j):
        nxt = []
        last = depth == j - 1
        for node in level:
            gen = stream.child("node", *node.key).generator()
            idx = gen.integers(0, n, size=r)
            U = node.normals
            Q = X[idx]
            Q = Q - ((Q - node.center) @ U.T) @ U
            node.pivot = Q.mean(axis=0) if center_mode == "literal" else node.center
            cands = symmetric_sampling(Q, node.pivot).points
            keep = np.flatnonzero(np.linalg.norm(cands - node.pivot, axis=1) > tol)
            keep = keep[_dedup(cands[keep], tol)]
            pts, keys = [cands[keep]], [(int(ci), 0) for ci in keep]
            if augment is not None and keep.size:
                dirs = orthogonal_complement(U, d)
                for ci in keep:
                    extra = augment(cands[ci], dirs)
                    if extra.shape[0] == 0:
                        continue
                    ok = (np.linalg.norm(extra - cands[ci], axis=1) > tol) & (
                        np.linalg.norm(extra - node.pivot, axis=1) > tol)
                    g = np.flatnonzero(ok)
                    pts.append(extra[g])
                    keys.extend((int(ci), int(gi) + 1) for gi in g)
            T = np.vstack(pts)
            if last:
                tree.n_leaves += T.shape[0]
                if tree.n_leaves > max_paths:
                    raise ResourceLimitError(
                        f"rotation tree exceeds max_paths={max_paths} leaves")
            for t, key in zip(T, keys):
                child = RotationNode(t, node.pivot, None, depth + 1, node.key + key, node)
                if not last:
                    child.normals  # materialise; children project through it
                node.children.append(child)
            nxt.extend(node.children)
        level = nxt
    return tree


def flat_from_path(path, o, pivots=None) -> Flat:
    """Flat through ``o`` spanned by ``t_l - o`` (or ``t_l - pivots[l]``).

    Raises :class:`DegenerateError` for a rank-deficient path.
    """
    T = np.atleast_2d(np.asarray(path, dtype=float))
    o = as_vector(o, name="o")
    base = o if pivots is None else np.atleast_2d(np.asarray(pivots, dtype=float))
    D = T - base
    if np.any(np.linalg.norm(D, axis=1) == 0):
        raise DegenerateError("a path point coincides with the centre")
    return Flat(o, orthonormalize(D, rtol=RANK_RTOL))


def trimmed_mean(values: np.ndarray, keep: int) -> float:
    """Mean of the ``keep`` smallest entries (canonical summation order)."""
    v = np.sort(np.asarray(values, dtype=float))[:keep]
    return float(np.sum(v) / keep)


def keep_count(n: int, gamma: float) -> int:
    """``ceil((1 - gamma) n)``, at least 1."""
    return max(1, min(n, ceil_count((1.0 - gamma) * n)))


def _leaf_blocks(tree: RotationTree, X: np.ndarray, tau: int, chunk_elems: int = 4_000_000):
    """Yield ``(parent, bases, dists)`` per leaf parent, in depth-first order.

    ``bases`` is ``(m, j, d)``, ``dists`` is ``(m, n)`` holding
    ``distance ** tau`` with ``inf`` rows for rank-deficient paths.
    """
    n, d = X.shape
    j = tree.j
    Y = X - tree.o
    for parent in tree.leaf_parents():
        kids = parent.children
        if not kids:
            continue
        chain = tree.path_to(parent)
        T = np.array([c.point for c in kids])
        m = T.shape[0]
        if chain:
            dirs = np.array([c.point - c.parent.pivot for c in chain])
            big = float(np.max(np.linalg.norm(dirs, axis=1)))
            try:
                Qp = orthonormalize(dirs, rtol=RANK_RTOL)
            except DegenerateError:
                yield parent, np.full((m, j, d), np.nan), np.full((m, n), np.inf)
                continue
        else:
            Qp = np.zeros((0, d))
            big = 0.0
        V = T - parent.pivot
        raw = np.linalg.norm(V, axis=1)
        V = V - (V @ Qp.T) @ Qp
        norms = np.linalg.norm(V, axis=1)
        valid = norms > RANK_RTOL * np.maximum(raw, big)
        E = np.zeros_like(V)
        E[valid] = V[valid] / norms[valid, None]
        Rp = Y - (Y @ Qp.T) @ Qp
        out = np.empty((m, n))
        step = max(1, chunk_elems // max(1, n * d))
        for s in range(0, m, step):
            Eb = E[s:s + step]
            coef = Eb @ Rp.T
            R = Rp[None, :, :] - coef[:, :, None] * Eb[:, None, :]
            dist = np.sqrt(np.einsum("mnd,mnd->mn", R, R))
            out[s:s + step] = dist if tau == 1 else dist ** tau
        out[~valid] = np.inf
        bases = np.empty((m, j, d))
        bases[:, : j - 1, :] = Qp
        bases[:, j - 1, :] = E
        yield parent, bases, out


def path_pool(tree: RotationTree, X, tau: int = 2):
    """All leaf flats of ``tree`` with their ``distance ** tau`` rows.

    Returns ``(bases, paths, D)`` with rank-deficient paths removed.
    """
    X = as_points(X)
    bases, paths, blocks = [], [], []
    for parent, B, D in _leaf_blocks(tree, X, tau):
        ok = np.isfinite(D[:, 0])
        if not np.any(ok):
            continue
        prefix = [c.point for c in tree.path_to(parent)]
        for i in np.flatnonzero(ok):
            paths.append(np.array(prefix + [parent.children[i].point]))
        bases.append(B[ok])
        blocks.append(D[ok])
    d = X.shape[1]
    if not blocks:
        return np.zeros((0, tree.j, d)), np.zeros((0, tree.j, d)), np.zeros((0, X.shape[0]))
    return np.concatenate(bases), np.array(paths), np.concatenate(blocks)


def best_path(tree: RotationTree, P, tau: int = 2, gamma: float = 0.0) -> FitResult:
    """Score every root-to-leaf path; return the one with least trimmed objective.

    The trimmed objective of a flat is the mean of the ``ceil((1-gamma) n)``
    smallest values of ``distance ** tau``.  Ties go to the first path in
    depth-first order.
    """
    if not 0 <= gamma < 1:
        raise InvalidParameterError("gamma must be in [0, 1)")
    X = as_points(P)
    n = X.shape[0]
    keep = keep_count(n, gamma)
    best_val, best = math.inf, None
    count = 0
    for parent, B, D in _leaf_blocks(tree, X, tau):
        count += D.shape[0]
        if keep == n:
            scores = D.mean(axis=1)
        else:
            scores = np.partition(D, keep - 1, axis=1)[:, :keep].mean(axis=1)
        i = int(np.argmin(scores))
        if scores[i] < best_val:
            best_val, best = float(scores[i]), (parent, i, B[i])
    if best is None:
        raise DegenerateError("every path in the tree is rank-deficient")
    parent, i, basis = best
    flat = Flat(tree.o, basis)
    path = np.array([c.point for c in tree.path_to(parent)] + [parent.children[i].point])
    return _finish(flat, X, tau, gamma, path, tree.r, count, tree.o)


def _finish(flat, X, tau, gamma, path, r, count, center) -> FitResult:
    vals = flat.distances(X) ** tau
    keep = keep_count(X.shape[0], gamma)
    order = np.lexsort((np.arange(vals.size), vals))
    inliers = np.sort(order[:keep])
    return FitResult(flat, inliers, trimmed_mean(vals, keep), path, tau=tau, gamma=gamma,
                     r=r, n_paths=count, center=center)


def optimal_flat_tau2(P, j: int, through=None) -> Flat:
    """Least-squares ``j``-flat: top principal directions about the mean (or ``through``).

    Among all ``j``-flats through the anchor this minimises the mean squared
    distance.  Basis signs are normalised so each vector's largest-magnitude
    component is positive.
    """
    X = as_points(P)
    n, d = X.shape
    if not 0 <= j <= d:
        raise InvalidParameterError("need 0 <= j <= d")
    if n < j:
        raise InvalidParameterError("need at least j points")
    anchor = X.mean(axis=0) if through is None else as_vector(through, name="through")
    Y = X - anchor
    _, _, Vt = np.linalg.svd(Y, full_matrices=True)
    B = Vt[:j].copy()
    for row in B:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1
    return Flat(anchor, B)


def _anchor_candidates(X, cfg: FitConfig, r: int, stream: Stream) -> np.ndarray:
    if cfg.anchor == "exact_mean":
        return X.mean(axis=0)[None, :]
    size = cfg.center_samples or r
    S = uniform_sample(X, size, stream.child("center"))
    if cfg.anchor == "sample_mean":
        return S.points.mean(axis=0)[None, :]
    if size > 16:
        raise ResourceLimitError("subset_means anchors need center_samples <= 16")
    masks = np.arange(1, 1 << size, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(size)) & 1).astype(float)
    C = (bits @ S.points) / bits.sum(axis=1, keepdims=True)
    scale = max(1.0, float(np.max(np.abs(X))))
    return C[_dedup(C, cfg.dedup_tol * scale)]


def grow_trees(X, j: int, r: int, cfg: FitConfig, stream: Stream, augment=None) -> list:
    """One rotation tree per anchor candidate; streams keyed by anchor index."""
    trees = []
    budget = cfg.max_paths
    for ci, o in enumerate(_anchor_candidates(X, cfg, r, stream)):
        t = build_tree(X, o, j, r, stream.child("tree", ci), cfg.center_mode,
                       augment=augment, max_paths=budget, dedup_tol=cfg.dedup_tol)
        budget -= t.n_leaves
        trees.append(t)
    return trees


def fit_single_flat(P, j: int, gamma: float = 0.1, eps: float = 0.5, tau: int = 2,
                    rng=0, config: FitConfig | None = None) -> FitResult:
    """Fit one ``j``-flat to all but a ``gamma`` fraction of ``P``.

    Picks the anchor(s) per ``config.anchor``, grows a rotation tree for
    each, and returns the best root-to-leaf flat by trimmed objective.
    ``gamma=0`` is allowed only together with an explicit ``config.r``.
    """
    cfg = config or FitConfig()
    X = as_points(P)
    if tau < 1:
        raise InvalidParameterError("tau must be >= 1")
    if not 0 <= gamma < 1:
        raise InvalidParameterError("gamma must be in [0, 1)")
    if cfg.r is None and gamma == 0:
        raise InvalidParameterError("gamma=0 needs an explicit sample size r")
    r = cfg.r or sample_size_single(j, gamma, eps, cfg.log_arg)
    stream = as_stream(rng)
    best, total = None, 0
    for tree in grow_trees(X, j, r, cfg, stream):
        try:
            res = best_path(tree, X, tau, gamma)
        except DegenerateError:
            continue
        total += res.n_paths
        if best is None or res.trimmed_objective < best.trimmed_objective:
            best = res
    if best is None:
        raise DegenerateError("no tree produced a full-rank path")
    best.n_paths = total
    return best
