"""Error correction of horizontal words by top-layer brackets.

Given points ``x_0 .. x_r`` whose abelianized increments are in general
position, any central element ``k = exp(Z)`` can be absorbed into the word
``x_0, x_0^{-1} x_1, ..., x_{r-1}^{-1} x_r`` by inserting conjugations with
small elements of layer ``s-1``.  The cost of doing so is controlled by the
size of the configuration.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.linalg import qr

from .algebra import (
    bch_product,
    bracket,
    group_inverse,
    homogeneous_norm,
    project_abelianization,
    quotient_mod_last_layer,
    project_mod_last_layer,
)
from .distance import provider_for
from .errors import (
    InvalidInputError,
    RankDeficiencyError,
    SingularConfigurationError,
    UnsupportedStepError,
)
from .hgeom import min_height, size

SUPPORT_TOL = 1e-14


@dataclass(frozen=True)
class CorrectionSolution:
    """Layer-(s-1) vectors ``Y_j`` with ``sum_j [Y_j, X_j] = Z``.

    ``K`` bounds ``max_j |Y_j| <= K |Z| / size`` (Euclidean layer norms);
    ``ratio`` is the value of ``max_j |Y_j| * size / |Z|`` actually attained.
    """

    Y: np.ndarray
    W: np.ndarray
    B: np.ndarray
    X: np.ndarray
    residual: np.ndarray
    size: float
    K: float
    ratio: float


@dataclass(frozen=True)
class PerturbationTrace:
    alphas: np.ndarray
    betas: np.ndarray
    product: np.ndarray
    target: np.ndarray
    residual: float
    added_cost: float
    cost_bound: float
    solution: CorrectionSolution


def _require_step(A):
    if A.step < 2:
        raise UnsupportedStepError("error correction needs step >= 2")


def _check_support(A, Z, what):
    Z = np.asarray(Z, dtype=float)
    if Z.shape != (A.dim,):
        raise InvalidInputError(f"{what} must be a vector of length {A.dim}")
    top = A.layer_slice(A.step)
    off = np.delete(Z, np.arange(top.start, top.stop))
    if np.any(np.abs(off) > SUPPORT_TOL * max(1.0, np.abs(Z).max())):
        raise InvalidInputError(f"{what} must be supported in the top layer")
    out = np.zeros(A.dim)
    out[top] = Z[top]
    return out


@lru_cache(maxsize=None)
def bracket_system(A):
    """Pivoted square restriction of ``(W_l) -> sum_l [W_l, e_l]``.

    Returns ``(columns, inverse)``: the chosen columns of the map on
    ``(V_{s-1})^r`` (flattened slot-major) and the inverse of the restricted
    square matrix.
    """
    s = A.step
    lo, top = A.layer_slice(s - 1), A.layer_slice(s)
    n_lo = lo.stop - lo.start
    cols = []
    for l in range(A.rank):
        e = np.zeros(A.dim)
        e[l] = 1.0
        for a in range(n_lo):
            w = np.zeros(A.dim)
            w[lo.start + a] = 1.0
            cols.append(bracket(A, w, e)[top])
    M = np.array(cols).T
    _, R, piv = qr(M, pivoting=True)
    k = top.stop - top.start
    diag = np.abs(np.diag(R))[:k]
    if len(diag) < k or diag.min(initial=np.inf) <= 1e-12 * max(1.0, diag.max(initial=0.0)):
        raise RankDeficiencyError("bracket map onto the top layer is not surjective")
    chosen = np.sort(piv[:k])
    return tuple(int(c) for c in chosen), np.linalg.inv(M[:, chosen])


def increment_logs(A, xs):
    xs = np.asarray(xs, dtype=float)
    return bch_product(A, group_inverse(A, xs[:-1]), xs[1:])


def solve_correction(A, xs, Z):
    """Solve ``sum_j [Y_j, X_j] = Z`` with ``X_j = log(x_{j-1}^{-1} x_j)``."""
    _require_step(A)
    xs = np.asarray(xs, dtype=float)
    r, s = A.rank, A.step
    if xs.shape != (r + 1, A.dim):
        raise InvalidInputError(f"need {r + 1} points of dimension {A.dim}, got shape {xs.shape}")
    Z = _check_support(A, Z, "Z")
    X = increment_logs(A, xs)
    Amat = project_abelianization(A, X).T  # column j = horizontal part of X_j
    width = min_height(Amat.T)
    if width == 0.0:
        raise SingularConfigurationError("configuration has zero size")
    B = np.linalg.inv(Amat)

    cols, Minv = bracket_system(A)
    lo, top = A.layer_slice(s - 1), A.layer_slice(s)
    n_lo = lo.stop - lo.start
    flat = np.zeros(r * n_lo)
    flat[list(cols)] = Minv @ Z[top]
    W = np.zeros((r, A.dim))
    W[:, lo] = flat.reshape(r, n_lo)
    Y = B @ W

    residual = bracket(A, Y, X).sum(axis=0) - Z
    K = r * float(np.linalg.norm(Minv, 2))
    zn = float(np.linalg.norm(Z))
    ynorm = float(np.max(np.linalg.norm(Y, axis=1)))
    ratio = ynorm * width / zn if zn > 0 else 0.0
    return CorrectionSolution(Y, W, B, X, residual, width, K, ratio)


def exact_word_residual(A, xs, sol):
    """Exact check that the perturbed word equals ``exp(sum [Y_j, X_j]) x_r``.

    The identity holds for any layer-(s-1) vectors ``Y_j``, so evaluating it
    in rational arithmetic on the float data separates the algebra from
    roundoff.  Returns the largest coordinate deviation (a Fraction).
    """
    def q(v):
        v = np.asarray(v, dtype=float)
        return np.array([Fraction(c) for c in v.ravel()], dtype=object).reshape(v.shape)

    xs, Y = q(xs), q(sol.Y)
    zero = np.array([Fraction(0)] * A.dim, dtype=object)
    X = [bch_product(A, -xs[j - 1], xs[j]) for j in range(1, len(xs))]
    alphas = [xs[0]] + X
    betas = [Y[0]] + [bch_product(A, -Y[j], Y[j + 1]) for j in range(len(Y) - 1)] + [-Y[-1]]
    prod = zero
    for a, b in zip(alphas, betas):
        prod = bch_product(A, bch_product(A, prod, a), b)
    x_r = zero
    for a in alphas:
        x_r = bch_product(A, x_r, a)
    central = zero
    for y, x in zip(Y, X):
        central = central + bracket(A, y, x)
    return max(abs(c) for c in prod - (x_r + central))


def perturbation_product(A, xs, k):
    """Build the corrected word ``prod_j alpha_j beta_j = k x_r``."""
    _require_step(A)
    xs = np.asarray(xs, dtype=float)
    k = np.asarray(k, dtype=float)
    try:
        k = _check_support(A, k, "k")
    except InvalidInputError as exc:
        raise InvalidInputError(f"k must be central: {exc}") from None
    sol = solve_correction(A, xs, k)
    r, s = A.rank, A.step
    alphas = np.vstack([xs[:1], sol.X])
    y = sol.Y
    betas = np.vstack(
        [y[:1], bch_product(A, group_inverse(A, y[:-1]), y[1:]), group_inverse(A, y[-1:])]
    )
    prod = np.zeros(A.dim)
    for a, b in zip(alphas, betas):
        prod = bch_product(A, bch_product(A, prod, a), b)
    target = bch_product(A, k, xs[-1])
    residual = float(np.max(np.abs(prod - target)))
    added = float(np.sum(homogeneous_norm(A, betas)))
    khom = float(homogeneous_norm(A, k))
    bound = 2 * (r + 1) * sol.K ** (1 / (s - 1)) * (khom**s / sol.size) ** (1 / (s - 1))
    return PerturbationTrace(alphas, betas, prod, target, residual, added, bound, sol)


def correction_constant(A):
    """Constant ``K`` of the correction bound for this group (Euclidean layer norms)."""
    _require_step(A)
    _, Minv = bracket_system(A)
    return A.rank * float(np.linalg.norm(Minv, 2))


def triangle_constant(A):
    """Constant multiplying the correction term of the modified triangle inequality."""
    s = A.step
    C = 2 * (A.rank + 1) * correction_constant(A) ** (1 / (s - 1))
    return 2 ** (s / (s - 1)) * C


def modified_triangle_rhs(A, E, ell, dist=None, K=None, details=False):
    """Both sides of the modified triangle inequality, as intervals.

    ``E`` holds ``r+3`` points ``y_0 .. y_{r+2}``.  The left side is
    ``d(y_0, y_{r+2})``; the right side replaces the step ``y_{ell-1} -> y_ell``
    by its distance in ``G / exp(V_s)`` plus a correction term scaled by the
    size of the remaining configuration.  Returns ``(rhs, lhs)`` where each is
    ``(lower, upper)``; with ``details`` also a dict of the individual terms.
    """
    _require_step(A)
    E = np.asarray(E, dtype=float)
    r, s = A.rank, A.step
    if E.shape != (r + 3, A.dim):
        raise InvalidInputError(f"need {r + 3} points of dimension {A.dim}, got shape {E.shape}")
    if not 1 <= ell <= r + 2:
        raise InvalidInputError(f"index {ell} out of range 1..{r + 2}")
    dist = dist or provider_for(A)
    K = triangle_constant(A) if K is None else K
    E_ell = np.delete(E, [ell - 1, ell], axis=0)
    sz = size(A, E_ell)
    if sz == 0.0:
        raise SingularConfigurationError("the reduced configuration has zero size")

    Q = quotient_mod_last_layer(A)
    qdist = provider_for(Q)
    q_lo, q_hi = qdist.bounds(project_mod_last_layer(A, E[ell - 1]), project_mod_last_layer(A, E[ell]))
    step_lo, step_hi = dist.bounds(E[:-1], E[1:])
    keep = np.arange(1, r + 3) != ell
    sum_lo, sum_hi = float(np.sum(step_lo[keep])), float(np.sum(step_hi[keep]))
    d_lo, d_hi = step_lo[ell - 1], step_hi[ell - 1]
    corr_lo = K * (d_lo**s / sz) ** (1 / (s - 1))
    corr_hi = K * (d_hi**s / sz) ** (1 / (s - 1))
    lhs_lo, lhs_hi = dist.bounds(E[0], E[-1])
    rhs = (float(q_lo + corr_lo + sum_lo), float(q_hi + corr_hi + sum_hi))
    lhs = (float(lhs_lo), float(lhs_hi))
    if not details:
        return rhs, lhs
    terms = {
        "size": sz,
        "K": K,
        "quotient": (float(q_lo), float(q_hi)),
        "correction": (float(corr_lo), float(corr_hi)),
        "path": (sum_lo, sum_hi),
    }
    return rhs, lhs, terms


def random_instance(A, rng, min_size=0.1, max_tries=1000):
    """Random points ``x_0 .. x_r`` with ``size >= min_size`` and a random central ``Z``."""
    _require_step(A)
    r = A.rank
    for _ in range(max_tries):
        xs = rng.normal(size=(r + 1, A.dim))
        if size(A, xs) >= min_size:
            break
    else:
        raise SingularConfigurationError(f"no configuration of size >= {min_size} found")
    Z = np.zeros(A.dim)
    Z[A.layer_slice(A.step)] = rng.normal(size=A.layer_dim(A.step))
    return xs, Z
