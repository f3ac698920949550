"""Blowups, blowdowns, lines and their distances.

Tangents and asymptotic cones are limits over subsequences and cannot be
computed as such.  Everything here is a finite sweep: a family of dilated
views, a truncated Hausdorff functional, or a residual against a candidate
asymptote, together with the diagnostics needed to judge convergence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .algebra import (
    adjoint,
    bch_product,
    dilate,
    engel,
    group_inverse,
    project_abelianization,
    project_mod_last_layer,
)
from .distance import heisenberg_distance, provider_for
from .errors import (
    InvalidInputError,
    NotQuasiGeodesicError,
    UnsupportedGroupError,
)
from .hgeom import fit_hyperplane

__all__ = [
    "Line",
    "DilatedCurveView",
    "blow",
    "sampled_source",
    "BlowdownReport",
    "blowdown_estimate",
    "EuclideanBlowdown",
    "euclidean_blowdown",
    "check_quasi_geodesic",
    "lines_finite_distance",
    "hausdorff_truncated",
    "asymptote_residual",
    "engel_asymptote",
    "lift_asymptote",
    "log_slopes",
    "TangentReport",
    "quantified_tangent_check",
    "RoughProjectionReport",
    "rough_projection_check",
    "heisenberg_distance",
]

LINE_FIT_TOL = 1e-10


# --- lines ---------------------------------------------------------------------
@dataclass(frozen=True)
class Line:
    """``L(t) = g exp(tX)``; the direction need not be horizontal."""

    algebra: object
    base: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        base = np.asarray(self.base, dtype=float)
        X = np.asarray(self.direction, dtype=float)
        if base.shape != (self.algebra.dim,) or X.shape != (self.algebra.dim,):
            raise InvalidInputError(f"line data must be vectors of length {self.algebra.dim}")
        if not np.any(X):
            raise InvalidInputError("a line needs a nonzero direction")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "direction", X)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return bch_product(self.algebra, self.base, t[..., None] * self.direction)

    @classmethod
    def through_identity(cls, A, X):
        return cls(A, np.zeros(A.dim), X)


# --- dilated views ----------------------------------------------------------
@dataclass(frozen=True)
class DilatedCurveView:
    """``gamma_h(t) = delta_{1/h}(gamma(t_bar)^{-1} gamma(t_bar + h t))``.

    ``source`` maps an array of times to an array of points; ``domain`` is
    the closed parameter interval where it may be evaluated.
    """

    algebra: object
    source: Callable
    h: float
    t_bar: float = 0.0
    domain: tuple[float, float] = (-math.inf, math.inf)

    def __post_init__(self):
        if not self.h > 0:
            raise InvalidInputError(f"dilation factor must be positive, got {self.h}")

    def __call__(self, t):
        return blow(self, t)


def blow(view, t):
    A = view.algebra
    t = np.asarray(t, dtype=float)
    s = view.t_bar + view.h * t
    lo, hi = view.domain
    if np.any(s < lo) or np.any(s > hi) or not lo <= view.t_bar <= hi:
        raise InvalidInputError(f"parameters outside the source domain [{lo}, {hi}]")
    base = np.asarray(view.source(np.array(view.t_bar)), dtype=float)
    pts = bch_product(A, group_inverse(A, base), np.asarray(view.source(s), dtype=float))
    return dilate(A, 1.0 / view.h, pts)


def sampled_source(curve):
    """Turn a sampled curve into a source callable by cubic interpolation.

    Returns ``(source, domain)``.  Evaluation outside the sample range
    raises rather than extrapolating.
    """
    t = np.asarray(curve.times, dtype=float)
    spline = CubicSpline(t, np.asarray(curve.points, dtype=float), axis=0)
    lo, hi = float(t[0]), float(t[-1])

    def source(s):
        s = np.asarray(s, dtype=float)
        if np.any(s < lo) or np.any(s > hi):
            raise InvalidInputError(f"sampled curve is only defined on [{lo}, {hi}]")
        return spline(s)

    return source, (lo, hi)


@dataclass(frozen=True)
class BlowdownReport:
    hs: np.ndarray
    window: np.ndarray
    samples: np.ndarray  # (len(hs), len(window), dim)
    cauchy: np.ndarray  # (len(hs) - 1, 2) lower/upper sup-distance of consecutive dilates
    horizontal_directions: np.ndarray

    @property
    def converging(self):
        """True when the upper Cauchy diagnostics do not increase."""
        up = self.cauchy[:, 1]
        return bool(np.all(np.diff(up) <= 1e-12 * max(1.0, up.max(initial=0.0))))


def blowdown_estimate(A, source, hs, window, provider=None, t_bar=0.0, domain=None):
    """Sample ``gamma_h`` on ``window`` for each ``h`` in an increasing sequence.

    The report holds the sup over the window of the distance between
    consecutive dilates, as an interval, and the unit abelianized direction
    of ``gamma_h`` at the right end of the window.
    """
    hs = np.asarray(hs, dtype=float)
    if hs.ndim != 1 or hs.size == 0:
        raise InvalidInputError("need a nonempty sequence of dilation factors")
    if np.any(np.diff(hs) <= 0):
        raise InvalidInputError("dilation factors must increase")
    window = np.asarray(window, dtype=float)
    provider = provider or provider_for(A)
    dom = domain or (-math.inf, math.inf)
    samples = np.array([blow(DilatedCurveView(A, source, h, t_bar, dom), window) for h in hs])
    cauchy = np.zeros((max(len(hs) - 1, 0), 2))
    for j in range(len(hs) - 1):
        lo, hi = provider.bounds(samples[j], samples[j + 1])
        cauchy[j] = (np.max(lo), np.max(hi))
    end = project_abelianization(A, samples[:, -1])
    norms = np.linalg.norm(end, axis=-1, keepdims=True)
    dirs = np.divide(end, norms, out=np.zeros_like(end), where=norms > 0)
    return BlowdownReport(hs, window, samples, cauchy, dirs)


# --- quasi-geodesics in euclidean space -----------------------------------------
def check_quasi_geodesic(times, dist, C, block=512):
    """Raise with a witness pair unless ``|t-s| - C <= d(t, s) <= |t-s| + C``.

    ``dist(i_idx, j_idx)`` returns ``(lower, upper)`` arrays for index pairs.
    A pair fails when the upper bound is below ``|t-s| - C`` or the lower
    bound exceeds ``|t-s| + C``.
    """
    t = np.asarray(times, dtype=float)
    n = len(t)
    tol = 1e-9 * max(1.0, float(np.max(np.abs(t), initial=0.0)))
    for start in range(0, n, block):
        i = np.arange(start, min(n, start + block))
        I, J = np.meshgrid(i, np.arange(n), indexing="ij")
        lo, hi = dist(I, J)
        gap = np.abs(t[I] - t[J])
        bad = (hi < gap - C - tol) | (lo > gap + C + tol)
        if np.any(bad):
            a, b = np.argwhere(bad)[0]
            a, b = int(I[a, b]), int(J[a, b])
            raise NotQuasiGeodesicError(
                f"samples at t={t[a]:.6g} and t={t[b]:.6g} violate the (1, {C:g}) bounds",
                (float(t[a]), float(t[b])),
            )


@dataclass(frozen=True)
class EuclideanBlowdown:
    v_plus: np.ndarray
    v_minus: np.ndarray
    T: float
    max_angle_excess: float  # max over checked pairs of (1 - cos) - 24/s
    pairs_checked: int
    antipodal_error: float  # |v_plus + v_minus|
    antipodal_tolerance: float

    @property
    def angle_bound_holds(self):
        return self.max_angle_excess <= 1e-9

    @property
    def is_line(self):
        return self.antipodal_error <= self.antipodal_tolerance


def _angle_excess(t, pts, sel, block=512):
    """Max of ``1 - cos angle(gamma(t), gamma(s)) - 24/s`` over ``t >= s >= 2C``."""
    ts, ps = np.abs(t[sel]), pts[sel]
    order = np.argsort(ts)
    ts, ps = ts[order], ps[order]
    norms = np.linalg.norm(ps, axis=1)
    worst, count = -math.inf, 0
    for start in range(0, len(ts), block):
        i = np.arange(start, min(len(ts), start + block))
        I, J = np.meshgrid(i, np.arange(len(ts)), indexing="ij")
        mask = J >= I  # t = ts[J] >= s = ts[I]
        if not np.any(mask):
            continue
        cos = np.einsum("ijk,ijk->ij", ps[I], ps[J]) / (norms[I] * norms[J])
        excess = (1 - cos) - 24 / ts[I]
        worst = max(worst, float(np.max(excess[mask])))
        count += int(mask.sum())
    return worst, count


def euclidean_blowdown(times, points, C, check=True):
    """Blowdown directions of a (1, C)-quasi-geodesic in R^n.

    The samples are first translated so that ``gamma(0) = 0``.
    Checks the angle bound ``1 - cos <= 24/s`` on every sampled pair with
    ``t >= s >= 2C`` on each side, estimates ``v_pm = gamma(pm T) / T`` at
    the window edge and compares ``v_minus`` with ``-v_plus`` within
    ``50 C / T``.
    """
    t = np.asarray(times, dtype=float)
    pts = np.asarray(points, dtype=float)
    if t.ndim != 1 or pts.ndim != 2 or len(t) != len(pts) or len(t) < 2:
        raise InvalidInputError("need matching 1-D times and 2-D points")
    if C < 0:
        raise InvalidInputError(f"C must be nonnegative, got {C}")
    zero = np.flatnonzero(t == 0.0)
    if zero.size == 0:
        raise InvalidInputError("samples must include the parameter t = 0")
    pts = pts - pts[zero[0]]
    if check:

        def dist(I, J):
            d = np.linalg.norm(pts[I] - pts[J], axis=-1)
            return d, d

        check_quasi_geodesic(t, dist, C)
    thresh = max(2 * C, np.finfo(float).tiny)
    worst, count = -math.inf, 0
    for sel in (t >= thresh, t <= -thresh):
        if np.count_nonzero(sel):
            w, c = _angle_excess(t, pts, sel)
            worst, count = max(worst, w), count + c
    T = float(min(t.max(), -t.min()))
    if T <= 0:
        raise InvalidInputError("samples must extend to both sides of 0")
    v_plus = np.array([np.interp(T, t, pts[:, k]) for k in range(pts.shape[1])]) / T
    v_minus = np.array([np.interp(-T, t, pts[:, k]) for k in range(pts.shape[1])]) / T
    return EuclideanBlowdown(
        v_plus,
        v_minus,
        T,
        worst if count else 0.0,
        count,
        float(np.linalg.norm(v_plus + v_minus)),
        50 * C / T,
    )


# --- lines at finite distance ---------------------------------------------------
def lines_finite_distance(A, L1, L2):
    """``(c, k)`` with ``L1(t) = L2(c t) k`` when the lines stay close, else ``None``.

    Positive half-lines ``L1 = g exp(tX)`` and ``L2 = h exp(tY)`` are at
    finite Hausdorff distance exactly when ``X = c Ad_{g^{-1}h} Y`` for some
    ``c > 0``; then ``k = h^{-1} g``.
    """
    for L in (L1, L2):
        if not np.any(L.direction):
            raise InvalidInputError("a line needs a nonzero direction")
    g_inv_h = bch_product(A, group_inverse(A, L1.base), L2.base)
    V = adjoint(A, g_inv_h) @ L2.direction
    X = L1.direction
    c = float(V @ X) / float(V @ V)
    if c <= 0 or np.linalg.norm(X - c * V) > LINE_FIT_TOL * max(1.0, np.linalg.norm(X)):
        return None
    k = bch_product(A, group_inverse(A, L2.base), L1.base)
    ts = np.array([0.0, 1.0, -1.0])
    lhs = L1(ts)
    rhs = bch_product(A, L2(c * ts), np.broadcast_to(k, lhs.shape))
    if np.max(np.abs(lhs - rhs)) > 1e-9 * max(1.0, np.max(np.abs(lhs))):
        return None
    return c, k


# --- truncated hausdorff distance -------------------------------------------
def _samples(obj):
    if hasattr(obj, "times"):
        return np.asarray(obj.times, dtype=float), np.asarray(obj.points, dtype=float)
    t, p = obj
    return np.asarray(t, dtype=float), np.asarray(p, dtype=float)


def hausdorff_truncated(setA, setB, provider, T, window=None):
    """Interval enclosing the Hausdorff distance of two sampled sets on ``[-T, T]``.

    Each set is a sampled curve (``times`` and ``points``) or a
    ``(times, points)`` pair; only samples with parameter in ``window``
    (default ``[-T, T]``) take part.  The endpoints are the Hausdorff
    functional evaluated on pairwise lower and upper distance bounds.
    """
    lo_w, hi_w = window if window is not None else (-T, T)
    ta, pa = _samples(setA)
    tb, pb = _samples(setB)
    pa = pa[(ta >= lo_w) & (ta <= hi_w)]
    pb = pb[(tb >= lo_w) & (tb <= hi_w)]
    if len(pa) == 0 or len(pb) == 0:
        raise InvalidInputError("a sample set is empty on the requested window")
    lo, hi = provider.bounds(pa[:, None, :], pb[None, :, :])
    lower = max(float(lo.min(axis=1).max()), float(lo.min(axis=0).max()))
    upper = max(float(hi.min(axis=1).max()), float(hi.min(axis=0).max()))
    return lower, upper


# --- asymptotes -------------------------------------------------------------
def asymptote_residual(A, curve, L, t):
    """``z(t) = L(t)^{-1} curve(t)``; bounded ``z`` means finite distance."""
    t = np.asarray(t, dtype=float)
    return bch_product(A, group_inverse(A, L(t)), np.asarray(curve(t), dtype=float))


def engel_asymptote(sign=+1):
    """Line ``exp(b X_112) exp(-(t + a) X_2)`` approached by the Engel geodesic.

    ``sign=+1`` is the asymptote as ``t -> +inf`` (``a = -2, b = 2/3``),
    ``sign=-1`` the one as ``t -> -inf``.
    """
    A = engel()
    a, b = (-2.0, 2.0 / 3.0) if sign > 0 else (2.0, -2.0 / 3.0)
    base = bch_product(A, np.array([0.0, 0.0, 0.0, b]), np.array([0.0, -a, 0.0, 0.0]))
    return Line(A, base, np.array([0.0, -1.0, 0.0, 0.0]))


def lift_asymptote(A, sign=+1):
    """``L_pm(t) = exp(-t (X_2 pm (2/3) X_1122))`` in the step-4 group."""
    X = np.zeros(A.dim)
    X[1] = -1.0
    X[A.index["1122"]] = -sign * 2.0 / 3.0
    return Line.through_identity(A, X)


def log_slopes(t, z, floor=1e-300):
    """Least-squares slope of ``log|z_k|`` against ``t`` for each column.

    Columns that vanish identically get ``nan``.
    """
    t = np.asarray(t, dtype=float)
    z = np.atleast_2d(np.asarray(z, dtype=float))
    out = np.full(z.shape[1], np.nan)
    for k in range(z.shape[1]):
        mag = np.abs(z[:, k])
        if np.all(mag <= floor):
            continue
        out[k] = np.polyfit(t, np.log(np.maximum(mag, floor)), 1)[0]
    return out


# --- quantified tangents --------------------------------------------------------
@dataclass(frozen=True)
class TangentReport:
    a: np.ndarray
    b: np.ndarray
    quotient_distance: np.ndarray
    upper_violations: int
    C: float
    exponent: float

    @property
    def ok(self):
        return self.upper_violations == 0 and math.isfinite(self.C)


def quantified_tangent_check(A, curve, t_bar=0.0, delta=0.5, n_pairs=200, seed=0, grid=0.01):
    """Compare distances in the Heisenberg quotient of Engel with parameter gaps.

    A geodesic ``curve`` projects to a 1-Lipschitz curve in the quotient, so
    ``d <= |a - b|``; the lower bound ``|a - b| - C |a - b|^{3/2}`` is fitted
    for the smallest ``C`` on a grid of spacing ``grid``.
    """
    if A != engel():
        raise UnsupportedGroupError("the quantified tangent check is implemented for the engel group")
    if not delta > 0 or n_pairs < 1:
        raise InvalidInputError("need delta > 0 and at least one pair")
    rng = np.random.default_rng(seed)
    a = rng.uniform(t_bar - delta, t_bar + delta, n_pairs)
    b = rng.uniform(t_bar - delta, t_bar + delta, n_pairs)
    pa = project_mod_last_layer(A, np.asarray(curve(a), dtype=float))
    pb = project_mod_last_layer(A, np.asarray(curve(b), dtype=float))
    d = heisenberg_distance(pa, pb)
    gap = np.abs(a - b)
    exponent = A.step / (A.step - 1)
    upper = int(np.count_nonzero(d > gap + 1e-9))
    with np.errstate(divide="ignore", invalid="ignore"):
        need = np.where(gap > 0, (gap - d) / gap**exponent, 0.0)
    C = math.ceil(max(float(need.max(initial=0.0)), 0.0) / grid - 1e-9) * grid
    return TangentReport(a, b, d, upper, round(C, 12), exponent)


# --- rough projections in step 2 -----------------------------------------------
@dataclass(frozen=True)
class RoughProjectionReport:
    horn: str  # "hyperplane" or "quasi-geodesic"
    C_prime: float
    K: float | None
    plane: object | None
    violation: tuple[float, float] | None
    max_slack: float


def rough_projection_check(A, times, points, C, provider=None):
    """Which alternative holds for the abelianization of a rough geodesic.

    Either the projection is a ``(1, C')``-quasi-geodesic with
    ``C' = (r+2)^{s-1} C`` (horn ``quasi-geodesic``), or it lies in a
    neighbourhood of a hyperplane (horn ``hyperplane``, with the fitted
    radius ``K``).  The input is first validated as a ``(1, C)``
    quasi-geodesic in the group.
    """
    if A.step != 2:
        raise UnsupportedGroupError("the rough projection check is for step-2 groups")
    t = np.asarray(times, dtype=float)
    pts = np.asarray(points, dtype=float)
    provider = provider or provider_for(A)
    check_quasi_geodesic(t, lambda I, J: provider.bounds(pts[I], pts[J]), C)
    Cp = (A.rank + 2) ** (A.step - 1) * C
    h = project_abelianization(A, pts)
    d = np.linalg.norm(h[:, None, :] - h[None, :, :], axis=-1)
    gap = np.abs(t[:, None] - t[None, :])
    slack = np.maximum(gap - Cp - d, d - gap - Cp)
    tol = 1e-9 * max(1.0, float(np.max(np.abs(t))))
    worst = float(slack.max())
    if worst <= tol:
        return RoughProjectionReport("quasi-geodesic", Cp, None, None, None, worst)
    i, j = np.unravel_index(int(np.argmax(slack)), slack.shape)
    plane, K = fit_hyperplane(h, A.rank)
    return RoughProjectionReport("hyperplane", Cp, K, plane, (float(t[i]), float(t[j])), worst)
