"""Parallelotope geometry of point tuples.

Minimal height (``Width``) of a tuple ``a_1 .. a_m`` in ``R^n`` is the
smallest distance from some ``a_j`` to the span of the others.  It is
computed as a quotient of Gram volumes, ``vol_m / max_j vol_{m-1}``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .algebra import project_abelianization
from .errors import InvalidInputError, SingularConfigurationError

#: Relative threshold below which a Gram volume counts as zero.
DEGENERACY_RTOL = 1e-12


def _as_tuple(P):
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if P.ndim != 2 or P.shape[0] == 0:
        raise InvalidInputError("expected a nonempty tuple of vectors")
    return P


def gram_volume(P):
    """m-dimensional volume of the parallelotope spanned by the rows of ``P``.

    This is ``sqrt(det(P P^T))``, evaluated as the product of singular values
    so that nearly dependent tuples get volumes near roundoff rather than
    near its square root.
    """
    P = np.asarray(P, dtype=float)
    if P.shape[-2] == 0:
        return np.ones(P.shape[:-2])
    return np.prod(np.linalg.svd(P, compute_uv=False), axis=-1)


def _scale(P):
    return float(np.max(np.linalg.norm(P, axis=-1), initial=0.0))


def min_height(P, return_index=False):
    """Minimal height of the parallelotope spanned by the rows of ``P``.

    With ``return_index`` also returns the (lowest) index ``j`` attaining the
    minimum, i.e. the vertex closest to the span of the others.
    """
    P = _as_tuple(P)
    m, n = P.shape
    if m > n:
        raise InvalidInputError(f"{m} vectors in R^{n}: the tuple is necessarily dependent")
    scale = _scale(P)
    vol = gram_volume(P)
    if scale == 0.0 or vol <= DEGENERACY_RTOL * scale**m:
        tol = 1e-12 * scale if scale else 1.0
        full = np.linalg.matrix_rank(P, tol=tol)
        idx = next(j for j in range(m) if np.linalg.matrix_rank(np.delete(P, j, axis=0), tol=tol) == full)
        return (0.0, idx) if return_index else 0.0
    faces = np.array([gram_volume(np.delete(P, j, axis=0)) for j in range(m)])
    heights = vol / faces
    idx = int(np.argmin(heights))
    val = float(heights[idx])
    return (val, idx) if return_index else val


def distance_to_span(a, S):
    """Euclidean distance from ``a`` to the linear span of the rows of ``S``."""
    a = np.asarray(a, dtype=float)
    S = np.atleast_2d(np.asarray(S, dtype=float))
    if S.size == 0:
        return float(np.linalg.norm(a))
    coef, *_ = np.linalg.lstsq(S.T, a, rcond=None)
    return float(np.linalg.norm(a - S.T @ coef))


def increments(A, points):
    """Consecutive abelianized increments ``pi(g_j) - pi(g_{j-1})``."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise InvalidInputError("a configuration needs at least two points")
    h = project_abelianization(A, pts)
    return np.diff(h, axis=0)


def size(A, points):
    """Size of a configuration: minimal height of its abelianized increments."""
    inc = increments(A, points)
    if inc.shape[0] > A.rank:
        raise InvalidInputError(
            f"configuration of {inc.shape[0] + 1} points exceeds rank + 1 = {A.rank + 1}"
        )
    return min_height(inc)


def inverse_with_bound(M):
    """Inverse of ``M`` with the entrywise bound ``1 / Width(columns of M)``."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {M.shape}")
    w = min_height(M.T)
    if w == 0.0:
        raise SingularConfigurationError("columns are linearly dependent (zero width)")
    return np.linalg.inv(M), 1.0 / w


@dataclass(frozen=True)
class Hyperplane:
    """A linear subspace through the origin, given by orthonormal rows."""

    basis: np.ndarray
    support: tuple[int, ...] = ()

    @property
    def dim(self):
        return self.basis.shape[0]

    def project(self, points):
        pts = np.asarray(points, dtype=float)
        return pts @ self.basis.T @ self.basis

    def distance(self, points):
        pts = np.asarray(points, dtype=float)
        return np.linalg.norm(pts - self.project(pts), axis=-1)


def _orthonormal_rows(S, k):
    """``k`` orthonormal rows whose span contains span(S) (or lies in it)."""
    _, _, Vt = np.linalg.svd(S, full_matrices=True)
    return Vt[:k]


def fit_hyperplane(points, m, exhaustive_limit=12):
    """Fit an (m-1)-dimensional linear subspace to a point set.

    The subspace is spanned by an (m-1)-subtuple of maximal volume; every
    point then lies within ``K = max distance`` of it, and ``K`` is bounded by
    the largest minimal height over m-subtuples.  Fitting is linear (through
    the origin); recentre data first if an affine fit is wanted.

    Returns ``(Hyperplane, K)``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise InvalidInputError("fit_hyperplane needs a nonempty point set")
    N, n = pts.shape
    if not 1 <= m <= n:
        raise InvalidInputError(f"need 1 <= m <= {n}, got m = {m}")
    k = m - 1
    if k == 0:
        plane = Hyperplane(np.zeros((0, n)))
    else:
        if N <= exhaustive_limit:
            best, best_vol = None, -1.0
            for sub in itertools.combinations(range(N), k):
                v = float(gram_volume(pts[list(sub)]))
                if v > best_vol:
                    best, best_vol = sub, v
            chosen = list(best)
        else:
            # greedy farthest-point augmentation
            chosen = [int(np.argmax(np.linalg.norm(pts, axis=1)))]
            while len(chosen) < k:
                d = np.array([distance_to_span(p, pts[chosen]) for p in pts])
                d[chosen] = -1.0
                chosen.append(int(np.argmax(d)))
        plane = Hyperplane(_orthonormal_rows(pts[chosen], k), tuple(chosen))
    K = float(np.max(plane.distance(pts)))
    return plane, K


def max_subtuple_height(points, m):
    """Largest minimal height over all m-subtuples (exhaustive)."""
    pts = np.asarray(points, dtype=float)
    return max(min_height(pts[list(sub)]) for sub in itertools.combinations(range(len(pts)), m))


def translated_tuple(A, points, ell):
    """``Gamma_ell = (pi(g_j) - pi(g_ell))`` for ``j != ell``, in index order."""
    pts = np.asarray(points, dtype=float)
    m = pts.shape[0] - 1
    if not 0 <= ell <= m:
        raise InvalidInputError(f"index {ell} out of range 0..{m}")
    h = project_abelianization(A, pts)
    return np.delete(h - h[ell], ell, axis=0)


def block_transform(ell, m):
    """Coefficient matrix of the transform ``A^ell`` acting on m increments.

    Row ``k`` (0-based for component ``k+1``) sums increments ``k+1 .. ell``
    when ``k < ell`` and ``ell+1 .. k+1`` otherwise.
    """
    T = np.zeros((m, m))
    for k in range(1, m + 1):
        if k <= ell:
            T[k - 1, k - 1 : ell] = 1.0
        else:
            T[k - 1, ell : k] = 1.0
    return T


def transform_signs(ell, m):
    """Sign relating ``A^ell(increments)`` to ``Gamma_ell`` componentwise."""
    return np.array([-1.0 if k <= ell else 1.0 for k in range(1, m + 1)])


def check_translated_tuple(A, points, ell):
    """Max deviation between ``A^ell(increments)`` and the signed ``Gamma_ell``."""
    inc = increments(A, points)
    m = inc.shape[0]
    lhs = block_transform(ell, m) @ inc
    rhs = transform_signs(ell, m)[:, None] * translated_tuple(A, points, ell)
    return float(np.max(np.abs(lhs - rhs), initial=0.0))
