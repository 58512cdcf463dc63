"""Affine flats, slabs, hyperboxes and slab partitions.

Points are plain ``numpy`` arrays: a single point is a 1-D array of length
``d`` and a point set is an ``(n, d)`` array.  A :class:`Flat` stores an
anchor point and a ``(j, d)`` array of orthonormal spanning directions; the
zero-dimensional flat (a single point) is allowed.

Everything here is deterministic and side-effect free.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateError, DimensionMismatchError, InvalidParameterError

RTOL = 1e-9
ATOL = 1e-12
ORTHO_TOL = 1e-10
# residuals below this multiple of |p - anchor| are rounding noise
DIST_FLOOR = 16 * np.finfo(float).eps


def as_points(P, *, name: str = "P") -> np.ndarray:
    """Validate and return ``P`` as a finite ``(n, d)`` float array, ``n >= 1``."""
    X = np.asarray(P, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DimensionMismatchError(f"{name} must be a 2-D array of points")
    if X.shape[0] < 1:
        raise InvalidParameterError(f"{name} is empty")
    if not np.all(np.isfinite(X)):
        raise InvalidParameterError(f"{name} contains NaN or Inf")
    return X


def as_vector(v, *, name: str = "vector") -> np.ndarray:
    x = np.asarray(v, dtype=float).reshape(-1)
    if not np.all(np.isfinite(x)):
        raise InvalidParameterError(f"{name} contains NaN or Inf")
    return x


def ceil_count(x: float) -> int:
    """``ceil`` that ignores float noise just above an integer (``0.9 * 200``)."""
    return int(math.ceil(x - 1e-9 * max(1.0, abs(x))))


def floor_count(x: float) -> int:
    return int(math.floor(x + 1e-9 * max(1.0, abs(x))))


def orthonormalize(vectors, *, rtol: float = 1e-10) -> np.ndarray:
    """Orthonormal rows spanning ``vectors`` (Gram-Schmidt order preserved).

    Raises :class:`DegenerateError` when the rows are linearly dependent, in
    the sense that some row has a component orthogonal to its predecessors
    smaller than ``rtol`` times the largest row norm.
    """
    V = np.atleast_2d(np.asarray(vectors, dtype=float))
    if V.shape[0] == 0:
        return V.reshape(0, V.shape[1] if V.ndim == 2 else 0)
    Q, R = np.linalg.qr(V.T)
    diag = np.abs(np.diag(R))
    scale = max(float(np.max(np.linalg.norm(V, axis=1))), np.finfo(float).tiny)
    if np.any(diag <= rtol * scale):
        raise DegenerateError("vectors are linearly dependent")
    # fix signs so each basis vector points along its generating vector
    signs = np.sign(np.diag(R))
    return (Q * signs).T


def orthogonal_complement(basis: np.ndarray, d: int) -> np.ndarray:
    """Orthonormal rows spanning the orthogonal complement of ``basis`` in R^d."""
    B = np.asarray(basis, dtype=float).reshape(-1, d)
    if B.shape[0] == 0:
        return np.eye(d)
    if B.shape[0] >= d:
        return np.zeros((0, d))
    # full QR of the column matrix; trailing columns span the complement
    Q, _ = np.linalg.qr(B.T, mode="complete")
    return Q[:, B.shape[0]:].T.copy()


def random_orthonormal(d: int, j: int, gen: np.random.Generator) -> np.ndarray:
    """``j`` Haar-random orthonormal rows in R^d."""
    if j == 0:
        return np.zeros((0, d))
    G = gen.standard_normal((d, j))
    Q, R = np.linalg.qr(G)
    return (Q * np.sign(np.diag(R))).T


@dataclass(frozen=True, eq=False)
class Flat:
    """A ``j``-dimensional affine flat ``anchor + span(basis)``.

    Parameters
    ----------
    anchor : array of shape (d,)
        Any point on the flat.
    basis : array of shape (j, d)
        Orthonormal spanning directions, ``0 <= j <= d``.
    """

    anchor: np.ndarray
    basis: np.ndarray

    def __post_init__(self):
        a = as_vector(self.anchor, name="anchor")
        d = a.shape[0]
        B = np.asarray(self.basis, dtype=float)
        if B.size == 0:
            B = np.zeros((0, d))
        B = np.atleast_2d(B)
        if B.shape[1] != d:
            raise DimensionMismatchError("basis vectors and anchor differ in dimension")
        if B.shape[0] > d:
            raise InvalidParameterError("flat dimension exceeds ambient dimension")
        G = B @ B.T
        if B.shape[0] and np.max(np.abs(G - np.eye(B.shape[0]))) > ORTHO_TOL:
            raise InvalidParameterError("basis is not orthonormal")
        object.__setattr__(self, "anchor", a)
        object.__setattr__(self, "basis", B)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.anchor.shape[0]

    @classmethod
    def from_directions(cls, anchor, directions) -> "Flat":
        """Flat through ``anchor`` spanned by (not necessarily orthonormal) directions."""
        a = as_vector(anchor, name="anchor")
        D = np.asarray(directions, dtype=float).reshape(-1, a.shape[0])
        return cls(a, orthonormalize(D) if D.shape[0] else D)

    def coordinates(self, X) -> np.ndarray:
        """Coordinates of the projections of ``X`` in the flat's basis."""
        return (np.asarray(X, dtype=float) - self.anchor) @ self.basis.T

    def project(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return self.anchor + self.coordinates(X) @ self.basis

    def residuals(self, X) -> np.ndarray:
        Y = np.asarray(X, dtype=float) - self.anchor
        return Y - (Y @ self.basis.T) @ self.basis

    def distances(self, X) -> np.ndarray:
        """Residual norms; values within rounding error of zero are reported as 0."""
        Y = np.asarray(X, dtype=float) - self.anchor
        R = Y - (Y @ self.basis.T) @ self.basis
        dist = np.linalg.norm(R, axis=-1)
        floor = DIST_FLOOR * np.linalg.norm(Y, axis=-1)
        return np.where(dist <= floor, 0.0, dist)

    def contains(self, p, tol: float = RTOL) -> bool:
        p = as_vector(p)
        scale = max(1.0, float(np.linalg.norm(p - self.anchor)))
        return bool(self.distances(p) <= tol * scale)

    def same_span(self, other: "Flat", tol: float = RTOL) -> bool:
        if self.dim != other.dim or self.ambient_dim != other.ambient_dim:
            return False
        P1 = self.basis.T @ self.basis
        P2 = other.basis.T @ other.basis
        return bool(np.max(np.abs(P1 - P2), initial=0.0) <= tol)

    def __repr__(self) -> str:
        return f"Flat(dim={self.dim}, ambient_dim={self.ambient_dim}, anchor={self.anchor!r})"


def _check_dim(p: np.ndarray, F: Flat):
    if p.shape[-1] != F.ambient_dim:
        raise DimensionMismatchError(
            f"point has dimension {p.shape[-1]}, flat lives in R^{F.ambient_dim}"
        )


def project_onto_flat(p, F: Flat) -> np.ndarray:
    """Orthogonal projection of a point (or an ``(n, d)`` array) onto ``F``."""
    x = np.asarray(p, dtype=float)
    _check_dim(x, F)
    return F.project(x)


def distance_to_flat(p, F: Flat):
    """Euclidean distance from ``p`` to the closest point of ``F``.

    Computed from the explicit residual vector rather than by Pythagoras, so
    points lying on the flat give 0 rather than the square root of a
    rounding error.
    """
    x = np.asarray(p, dtype=float)
    _check_dim(x, F)
    dist = F.distances(x)
    return float(dist) if np.ndim(dist) == 0 else dist


def power_objective(P, F: Flat, tau: int = 2) -> float:
    """Mean of ``distance(p, F) ** tau`` over the rows of ``P``."""
    if tau < 1:
        raise InvalidParameterError("tau must be >= 1")
    X = np.asarray(P, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InvalidParameterError("P is empty")
    _check_dim(X, F)
    return float(np.mean(F.distances(X) ** tau))


def _scale(*vs) -> float:
    return max([1.0] + [float(np.linalg.norm(v)) for v in vs])


def rotate_flat(F: Flat, o, u, tol: float = RTOL):
    """Rotate ``F`` about ``o`` towards the point ``u``.

    The rotated flat is spanned by ``u - o`` together with the
    ``(j-1)``-dimensional part of ``F`` orthogonal to ``Proj(u) - o``.

    Returns
    -------
    (Flat, float)
        The rotated flat (anchored at ``o``) and the rotation angle in
        ``[0, pi/2]``, i.e. the angle between ``u - o`` and ``Proj(u) - o``.

    Raises
    ------
    DegenerateError
        If ``u == o`` or ``Proj(u) == o`` (the rotation axis is undefined).
    """
    o = as_vector(o, name="o")
    u = as_vector(u, name="u")
    _check_dim(o, F)
    _check_dim(u, F)
    scale = _scale(o, u, F.anchor)
    if F.distances(o) > tol * scale:
        raise InvalidParameterError("o does not lie on F")
    w = u - o
    if np.linalg.norm(w) <= ATOL * scale:
        raise DegenerateError("u coincides with o")
    if F.dim == 0:
        raise DegenerateError("a 0-flat has no direction to rotate")
    c = F.basis @ w  # coordinates of Proj(u) - o
    along = float(np.linalg.norm(c))
    if along <= ATOL * scale:
        raise DegenerateError("Proj(u) coincides with o; rotation axis undefined")
    off = float(np.linalg.norm(w - c @ F.basis))
    if off <= tol * scale:
        return Flat(o, F.basis), 0.0
    theta = math.atan2(off, along)
    c = c / along
    # orthonormal complement of c inside the flat's coordinate space
    Q, _ = np.linalg.qr(np.column_stack([c, np.eye(F.dim)]))
    face = Q[:, 1:F.dim].T @ F.basis
    new_basis = orthonormalize(np.vstack([face, w]))
    return Flat(o, new_basis), theta


def delta_of_rotation(P, F: Flat, o, u, tau: int = 2):
    """Smallest ``Delta`` for which the rotation induced by ``u`` is a Delta-rotation.

    ``h`` is the tau-mean absolute projection of ``p - o`` on the rotation
    direction ``(Proj(u) - o) / |Proj(u) - o|``; the rotation is a
    Delta-rotation iff ``theta <= arctan(Delta / h)``, so the minimal value is
    ``Delta = h * tan(theta)``.

    Returns ``(Delta, h, theta)``.
    """
    X = as_points(P)
    _, theta = rotate_flat(F, o, u)
    o = as_vector(o)
    c = F.basis @ (as_vector(u) - o)
    e = (c / np.linalg.norm(c)) @ F.basis
    up = np.abs((X - o) @ e)
    h = float(np.mean(up ** tau) ** (1.0 / tau))
    return h * math.tan(theta), h, theta


@dataclass(frozen=True, eq=False)
class Slab:
    """Region ``|<x - center, direction>| <= halfwidth``."""

    center: np.ndarray
    direction: np.ndarray
    halfwidth: float

    def __post_init__(self):
        c = as_vector(self.center, name="center")
        v = as_vector(self.direction, name="direction")
        if c.shape != v.shape:
            raise DimensionMismatchError("slab center and direction differ in dimension")
        if abs(np.linalg.norm(v) - 1.0) > ORTHO_TOL:
            raise InvalidParameterError("slab direction must be a unit vector")
        if not self.halfwidth > 0:
            raise InvalidParameterError("slab halfwidth must be positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "direction", v)
        object.__setattr__(self, "halfwidth", float(self.halfwidth))

    @classmethod
    def determined_by(cls, o, s) -> "Slab":
        """The slab bounded by the hyperplanes through ``s`` and ``2o - s``
        perpendicular to ``s - o``."""
        o = as_vector(o)
        v = as_vector(s) - o
        n = float(np.linalg.norm(v))
        if n == 0.0:
            raise DegenerateError("slab direction undefined: s coincides with o")
        return cls(o, v / n, n)

    def amplified(self, factor: float) -> "Slab":
        return Slab(self.center, self.direction, self.halfwidth * factor)

    def offsets(self, X) -> np.ndarray:
        return np.abs((np.asarray(X, dtype=float) - self.center) @ self.direction)


def slab_contains(S: Slab, p):
    """Membership test; accepts a single point or an ``(n, d)`` array."""
    x = np.asarray(p, dtype=float)
    if x.shape[-1] != S.center.shape[0]:
        raise DimensionMismatchError("point and slab differ in dimension")
    inside = S.offsets(x) <= S.halfwidth + ATOL
    return bool(inside) if np.ndim(inside) == 0 else inside


@dataclass(frozen=True, eq=False)
class Hyperbox:
    """Box with ``center``, orthonormal ``axes`` (j, d) and full ``side_lengths`` (j,)."""

    center: np.ndarray
    axes: np.ndarray
    side_lengths: np.ndarray

    def __post_init__(self):
        c = as_vector(self.center, name="center")
        A = np.atleast_2d(np.asarray(self.axes, dtype=float))
        a = as_vector(self.side_lengths, name="side_lengths")
        if A.shape != (a.shape[0], c.shape[0]):
            raise DimensionMismatchError("axes must have shape (len(side_lengths), dim(center))")
        if np.max(np.abs(A @ A.T - np.eye(A.shape[0]))) > ORTHO_TOL:
            raise InvalidParameterError("hyperbox axes are not orthonormal")
        if np.any(a <= 0):
            raise InvalidParameterError("hyperbox side lengths must be positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "axes", A)
        object.__setattr__(self, "side_lengths", a)

    @property
    def dim(self) -> int:
        return self.axes.shape[0]

    def corners(self) -> np.ndarray:
        signs = np.array(list(itertools.product((-1.0, 1.0), repeat=self.dim)))
        return self.center + (signs * (self.side_lengths / 2.0)) @ self.axes


def minimal_amplification(S: Slab, Q) -> float:
    """Smallest factor by which ``S`` must be amplified to contain ``Q``.

    ``Q`` is a point array or a :class:`Hyperbox` (its corners are used;
    a slab contains a box iff it contains all corners).
    """
    pts = Q.corners() if isinstance(Q, Hyperbox) else as_points(Q, name="Q")
    if pts.shape[1] != S.center.shape[0]:
        raise DimensionMismatchError("points and slab differ in dimension")
    return float(np.max(S.offsets(pts)) / S.halfwidth)


def hyperbox_witness(H: Hyperbox, rho, tol: float = RTOL):
    """Pick the facet point whose slab needs the least amplification to cover ``H``.

    ``rho[l]`` must lie on one of the two facets of ``H`` normal to
    ``H.axes[l]``.  Returns ``(l0, lam)`` with a 0-based index ``l0``; the
    hyperbox lemma guarantees ``lam <= sqrt(j)``.
    """
    R = np.atleast_2d(np.asarray(rho, dtype=float))
    if R.shape != (H.dim, H.center.shape[0]):
        raise DimensionMismatchError("need one facet point per box axis")
    half = H.side_lengths / 2.0
    coords = (R - H.center) @ H.axes.T
    scale = max(1.0, float(np.max(half)))
    for l in range(H.dim):
        on_plane = abs(abs(coords[l, l]) - half[l]) <= tol * scale
        inside = np.all(np.abs(coords[l]) <= half + tol * scale)
        in_span = np.linalg.norm((R[l] - H.center) - coords[l] @ H.axes) <= tol * scale
        if not (on_plane and inside and in_span):
            raise InvalidParameterError(f"rho[{l}] is not on a facet normal to axis {l}")
    corners = H.corners()
    lams = [minimal_amplification(Slab.determined_by(H.center, R[l]), corners) for l in range(H.dim)]
    l0 = int(np.argmin(lams))
    return l0, float(lams[l0])


@dataclass(frozen=True, eq=False)
class SlabPartition:
    """Nested regions ``Pi_l = Pi_{l-1} ∩ R_l`` built from axis slabs.

    ``members[l]`` holds the input indices of the points in ``Pi_l``
    (``members[0]`` is everything), ``region_counts[l] == len(members[l])``.
    """

    slabs: list
    region_counts: list
    members: list = field(repr=False)
    coords: np.ndarray = field(repr=False)

    def box(self) -> Hyperbox:
        """``Pi_j`` as a hyperbox in the partition's coordinate space."""
        j = len(self.slabs)
        half = np.array([s.halfwidth for s in self.slabs])
        return Hyperbox(np.zeros(j), np.eye(j), 2.0 * half)


def slab_partition(P, F: Flat | None = None, gamma: float = 0.1, j: int | None = None) -> SlabPartition:
    """Peel ``gamma / j**2`` of the remaining points off along each flat axis.

    Points are first expressed in ``F``'s coordinates (``F=None`` means
    ``P`` already is an ``(n, j)`` coordinate array about the origin).  At
    level ``l`` the ``ceil((1 - gamma/j**2) * count)`` points of smallest
    absolute ``l``-th coordinate are retained, ties going to the lower input
    index; the slab halfwidth is the largest retained absolute coordinate.
    Slabs are returned in ambient space when ``F`` is given.
    """
    if not 0 < gamma <= 1:
        raise InvalidParameterError("gamma must be in (0, 1]")
    X = as_points(P)
    if F is not None:
        if X.shape[1] != F.ambient_dim:
            raise DimensionMismatchError("P and F differ in ambient dimension")
        C = F.coordinates(X)
        centre, axes = F.anchor, F.basis
    else:
        C = X
        centre, axes = np.zeros(X.shape[1]), np.eye(X.shape[1])
    jj = C.shape[1] if j is None else int(j)
    if jj < 1 or jj > C.shape[1]:
        raise InvalidParameterError("j must be between 1 and the flat dimension")
    frac = gamma / jj ** 2
    diam = float(np.max(np.ptp(C, axis=0))) if C.shape[0] > 1 else 0.0
    tiny = 1e-12 * (diam if diam > 0 else 1.0)

    idx = np.arange(C.shape[0])
    members = [idx]
    slabs = []
    for l in range(jj):
        a = np.abs(C[idx, l])
        keep = max(1, ceil_count((1.0 - frac) * idx.size))
        order = np.lexsort((idx, a))
        idx = np.sort(idx[order[:keep]])
        hw = float(np.max(np.abs(C[idx, l])))
        if hw <= 0.0:
            hw = tiny
        slabs.append(Slab(centre, axes[l], hw))
        members.append(idx)
    return SlabPartition(slabs, [m.size for m in members], members, C)


def translate_flat(F: Flat, new_anchor) -> Flat:
    a = as_vector(new_anchor, name="new_anchor")
    _check_dim(a, F)
    return Flat(a, F.basis)


def translation_distance(F: Flat, G: Flat, tol: float = RTOL) -> float:
    """Distance between two parallel flats (``G`` a translate of ``F``)."""
    if not F.same_span(G, tol=tol):
        raise InvalidParameterError("flats are not translates of each other")
    return float(F.distances(G.anchor))


def flat_distance(F: Flat, G: Flat) -> float:
    """Minimum distance between two affine flats (need not be parallel)."""
    if F.ambient_dim != G.ambient_dim:
        raise DimensionMismatchError("flats live in different spaces")
    M = np.vstack([F.basis, -G.basis]).T
    rhs = G.anchor - F.anchor
    if M.shape[1] == 0:
        return float(np.linalg.norm(rhs))
    coef, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    return float(np.linalg.norm(M @ coef - rhs))
