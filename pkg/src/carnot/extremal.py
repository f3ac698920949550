"""Normal extremals of the maximum principle in Carnot groups.

A covector pair ``(lambda, xi)`` with ``xi != 0`` determines the control
``u_i = lambda(Ad_{g0^{-1} x} e_i) / xi`` of a curve through ``x`` that
started at ``g0``.  Integrating ``x' = sum_i u_i X_i(x)`` with the
left-invariant frame produces the extremal.  For ``g0 = e`` this is the usual
normal equation; for other ``g0`` it is its left translate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy as sp
from scipy.linalg import expm

from .algebra import (
    adjoint,
    bch_product,
    dilate,
    frame_coefficients,
    group_inverse,
    left_invariant_frame,
)
from .errors import InvalidInputError, UnsupportedGroupError, UnsupportedModeError


@dataclass(frozen=True)
class CovectorPair:
    """Dual coefficients ``lam`` over the basis plus the multiplier ``xi``."""

    lam: np.ndarray
    xi: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "lam", np.asarray(self.lam, dtype=float))
        object.__setattr__(self, "xi", float(self.xi))

    @property
    def is_normal(self):
        return self.xi != 0.0


@dataclass(frozen=True)
class SampledCurve:
    """Samples of a horizontal curve on a strictly increasing grid."""

    times: np.ndarray
    points: np.ndarray
    controls: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or len(t) < 1 or np.any(np.diff(t) <= 0):
            raise InvalidInputError("sample times must be strictly increasing")
        if len(self.points) != len(t) or len(self.controls) != len(t):
            raise InvalidInputError("times, points and controls must have equal length")

    @property
    def speed(self):
        return np.linalg.norm(self.controls, axis=-1)

    def restrict(self, t0, t1):
        keep = (self.times >= t0) & (self.times <= t1)
        return SampledCurve(self.times[keep], self.points[keep], self.controls[keep])


def _as_pair(A, pair):
    if not isinstance(pair, CovectorPair):
        pair = CovectorPair(*pair) if isinstance(pair, tuple) else CovectorPair(pair)
    if pair.lam.shape != (A.dim,):
        raise InvalidInputError(f"covector must have {A.dim} components, got {pair.lam.shape}")
    return pair


def control(A, pair, g, g0=None, normalize=True):
    """Control ``u_i = lambda(Ad_{g0^{-1} g} e_i)``, divided by ``xi`` if asked."""
    pair = _as_pair(A, pair)
    g = np.asarray(g, dtype=float)
    x = g if g0 is None else bch_product(A, group_inverse(A, g0), g)
    u = np.einsum("k,...ki->...i", pair.lam, adjoint(A, x)[..., :, : A.rank])
    if normalize:
        if pair.xi == 0.0:
            raise UnsupportedModeError("abnormal pair (xi = 0) has no normalized control")
        u = u / pair.xi
    return u


# --- generated vector field -------------------------------------------------
@lru_cache(maxsize=None)
def _field_function(A):
    """Compiled ``(x, lam) -> x'`` for the normal equation of ``A``.

    Built symbolically once per algebra: the right-hand side is a polynomial
    in ``x`` and linear in ``lam``, so straight-line code is far cheaper per
    step than generic array arithmetic.
    """
    n = A.dim
    xs = sp.symbols(f"x0:{n}")
    ls = sp.symbols(f"l0:{n}")
    ad = sp.zeros(n, n)
    for i, j, k, v in A._full_table:
        ad[k, j] += sp.Rational(v.numerator, v.denominator) * xs[i]
    Ad = sp.eye(n)
    Fr = sp.eye(n)
    power = sp.eye(n)
    coeffs = frame_coefficients(A.step)
    for k in range(1, A.step):
        power = power * ad
        Ad += power / math.factorial(k)
        ck = coeffs[k]
        if ck:
            Fr += sp.Rational(ck.numerator, ck.denominator) * power
    u = [sum(ls[k] * Ad[k, i] for k in range(n)) for i in range(A.rank)]
    rhs = [sp.expand(sum(u[i] * Fr[m, i] for i in range(A.rank))) for m in range(n)]
    return sp.lambdify(xs + ls, rhs, modules="math", cse=True)


def _rk4(f, x0, h, nsteps, args):
    x = list(x0)
    out = [tuple(x)]
    h2 = 0.5 * h
    h6 = h / 6.0
    for _ in range(nsteps):
        k1 = f(*x, *args)
        k2 = f(*[a + h2 * b for a, b in zip(x, k1)], *args)
        k3 = f(*[a + h2 * b for a, b in zip(x, k2)], *args)
        k4 = f(*[a + h * b for a, b in zip(x, k3)], *args)
        x = [a + h6 * (p + 2 * q + 2 * r + s) for a, p, q, r, s in zip(x, k1, k2, k3, k4)]
        out.append(tuple(x))
    return np.array(out)


def _grid(t_span, step):
    t0, t1 = map(float, t_span)
    if not step > 0:
        raise InvalidInputError(f"step must be positive, got {step}")
    if t1 == t0:
        raise InvalidInputError("empty time span")
    n = max(1, int(math.ceil(abs(t1 - t0) / step - 1e-9)))
    return t0, t1, n


def integrate_extremal(A, pair, g0=None, t_span=(0.0, 1.0), step=1e-3):
    """Fixed-step RK4 integration of the normal extremal starting at ``g0``.

    The grid has ``ceil(|t1 - t0| / step)`` equal steps.  ``t1 < t0``
    integrates backwards; the returned samples are always in increasing time.
    """
    pair = _as_pair(A, pair)
    if not pair.is_normal:
        raise UnsupportedModeError("abnormal pairs (xi = 0) define no dynamics")
    g0 = np.zeros(A.dim) if g0 is None else np.asarray(g0, dtype=float)
    t0, t1, n = _grid(t_span, step)
    h = (t1 - t0) / n
    # lambda(Ad_{g0^-1} Ad_x e_i) = (Ad_{g0^-1}^T lambda)(Ad_x e_i)
    lam = adjoint(A, group_inverse(A, g0)).T @ pair.lam / pair.xi
    pts = _rk4(_field_function(A), g0, h, n, tuple(lam))
    times = t0 + h * np.arange(n + 1)
    if h < 0:
        times, pts = times[::-1], pts[::-1]
    ctrl = control(A, pair, pts, g0=g0)
    return SampledCurve(times, pts, ctrl)


def horizontality_residual(A, curve):
    """Mismatch between finite-difference velocity and the frame expansion.

    Uses central differences on interior samples; returns the max abs
    deviation of the velocity from ``sum_i xdot_i X_i(x)``.
    """
    t, x = curve.times, curve.points
    v = (x[2:] - x[:-2]) / (t[2:] - t[:-2])[:, None]
    F = left_invariant_frame(A, x[1:-1])
    pred = np.einsum("ni,nid->nd", v[:, : A.rank], F)
    return float(np.max(np.abs(v - pred)))


# --- dilations and limits of covectors ---------------------------------------
def dilate_pair(A, pair, h):
    """``(delta_h^* lambda, h xi)``: the pair certifying the dilated curve."""
    pair = _as_pair(A, pair)
    if not h > 0:
        raise InvalidInputError(f"dilation factor must be positive, got {h}")
    return CovectorPair(dilate(A, h, pair.lam), h * pair.xi)


@dataclass(frozen=True)
class AbnormalLimit:
    pair: CovectorPair
    layer: int
    is_line: bool


def abnormal_limit_pair(A, pair):
    """Limit of ``h^{-j} (delta_h^* lambda, h xi)`` as ``h -> infinity``.

    ``j`` is the top layer where ``lambda`` is nonzero.  When ``j = 1`` the
    control is constant and the curve is a line.
    """
    pair = _as_pair(A, pair)
    if not np.any(pair.lam):
        raise InvalidInputError("the covector is zero")
    j = max(A.layers[i] for i in np.flatnonzero(pair.lam))
    lam = np.zeros(A.dim)
    sl = A.layer_slice(j)
    lam[sl] = pair.lam[sl]
    return AbnormalLimit(CovectorPair(lam, 0.0), j, j == 1)


# --- step-2 groups ---------------------------------------------------------
@dataclass(frozen=True)
class Step2Data:
    """Affine ODE ``x' = A x + lam_H`` for the horizontal projection.

    ``lam_H = A c + b`` with ``b`` in the kernel of the skew matrix ``A``, so
    ``x(t) = e^{At} (x0 + c) - c + b t``.
    """

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    lam_h: np.ndarray

    def solution(self, t, x0=None):
        t = np.asarray(t, dtype=float)
        x0 = np.zeros(len(self.b)) if x0 is None else np.asarray(x0, dtype=float)
        E = np.array([expm(self.A * ti) for ti in np.ravel(t)])
        out = E @ (x0 + self.c) - self.c + np.ravel(t)[:, None] * self.b
        return out.reshape(t.shape + (len(self.b),))

    def velocity(self, x):
        return np.asarray(x) @ self.A.T + self.lam_h


def step2_ode_data(A, pair):
    """Skew matrix, kernel drift and closed-form solution in a step-2 group."""
    if A.step != 2:
        raise UnsupportedGroupError(f"step-2 ODE needs a step-2 group, got step {A.step}")
    pair = _as_pair(A, pair)
    if not pair.is_normal:
        raise UnsupportedModeError("abnormal pairs (xi = 0) define no dynamics")
    lam = pair.lam / pair.xi
    r = A.rank
    c = A.structure[:r, :r, :]
    Mat = np.einsum("jik,k->ij", c, lam)
    lam_h = lam[:r]
    cvec, *_ = np.linalg.lstsq(Mat, lam_h, rcond=None)
    b = lam_h - Mat @ cvec
    return Step2Data(Mat, b, cvec, lam_h)


# --- explicit curves ----------------------------------------------------------
def _sech(t):
    e = np.exp(-np.abs(t))
    return 2 * e / (1 + e * e)


def engel_beta(t):
    """Closed-form unit-speed Engel extremal through ``(2, 0, 0, 0)``."""
    t = np.asarray(t, dtype=float)
    s, th = _sech(t), np.tanh(t)
    return np.stack([2 * s, 2 * th - t, t * s, (2 / 3) * th - t * s * s / 3], axis=-1)


def engel_beta_velocity(t):
    t = np.asarray(t, dtype=float)
    s, th = _sech(t), np.tanh(t)
    return np.stack(
        [-2 * th * s, 1 - 2 * th * th, s - t * th * s, (s * s + 2 * t * th * s * s) / 3],
        axis=-1,
    )


def engel_residuals(t):
    """Pointwise residuals of the defining equations of the Engel curve.

    Keys: the two horizontality conditions and the two translated normal
    equations for the horizontal coordinates.
    """
    b1, b2, b12, b112 = np.moveaxis(engel_beta(t), -1, 0)
    d1, d2, d12, d112 = np.moveaxis(engel_beta_velocity(t), -1, 0)
    return {
        "horizontal_12": d12 - 0.5 * (b1 * d2 - b2 * d1),
        "horizontal_112": d112 - (b1 * b1 * d2 / 12 - (b1 * b2 / 12 + b12 / 2) * d1),
        "ode_1": d1 - (-0.5 * b1 * b2 - b12),
        "ode_2": d2 - (0.5 * b1 * b1 - 1),
    }


def _engel_translated_field(b1, b2, b12, b112):
    d1 = -0.5 * b1 * b2 - b12
    d2 = 0.5 * b1 * b1 - 1.0
    return (
        d1,
        d2,
        0.5 * (b1 * d2 - b2 * d1),
        b1 * b1 * d2 / 12 - (b1 * b2 / 12 + 0.5 * b12) * d1,
    )


def integrate_engel_translated(t_span=(0.0, 10.0), step=1e-3, start=(2.0, 0.0, 0.0, 0.0)):
    """RK4 on the printed translated Engel equation (horizontal part) plus frame."""
    t0, t1, n = _grid(t_span, step)
    h = (t1 - t0) / n
    pts = _rk4(_engel_translated_field, start, h, n, ())
    times = t0 + h * np.arange(n + 1)
    if h < 0:
        times, pts = times[::-1], pts[::-1]
    b1, b2, b12 = pts[:, 0], pts[:, 1], pts[:, 2]
    ctrl = np.stack([-0.5 * b1 * b2 - b12, 0.5 * b1 * b1 - 1.0], axis=-1)
    return SampledCurve(times, pts, ctrl)


def alpha_122(t):
    t = np.asarray(t, dtype=float)
    s, th = _sech(t), np.tanh(t)
    return (t * t + 4) * s / 6 + t * th * s / 3


def alpha_122_rate(t):
    """The horizontality expression for ``alpha_122'`` (frame of the step-4 group)."""
    b1, b2, b12, _ = np.moveaxis(engel_beta(t), -1, 0)
    d1, d2, _, _ = np.moveaxis(engel_beta_velocity(t), -1, 0)
    return b2 * b2 * d1 / 12 - (b1 * b2 / 12 - b12 / 2) * d2


def alpha_122_derivative(t):
    """Derivative of the closed form of ``alpha_122``."""
    t = np.asarray(t, dtype=float)
    s, th = _sech(t), np.tanh(t)
    return 2 * t * s**3 / 3 - (t * t + 2) * th * s / 6


def alpha_1122_rate(t):
    b1, b2, b12, b112 = np.moveaxis(engel_beta(t), -1, 0)
    d1, d2, _, _ = np.moveaxis(engel_beta_velocity(t), -1, 0)
    a122 = alpha_122(t)
    return (b12 * b2 / 12 - a122 / 2) * d1 + (b1 * b12 / 12 + b112 / 2) * d2


_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)
_PANEL = 0.5


def _integrate_from_zero(rate, t):
    """``int_0^t rate`` for each entry of ``t`` by composite Gauss-Legendre."""
    t = np.asarray(t, dtype=float)
    flat = t.ravel()
    out = np.zeros_like(flat)
    for sign in (1.0, -1.0):
        mask = sign * flat > 0
        if not np.any(mask):
            continue
        targets = np.unique(np.abs(flat[mask]))
        edges = np.concatenate([[0.0], targets])
        acc = np.zeros(len(edges))
        total = 0.0
        for n in range(1, len(edges)):
            a, b = edges[n - 1], edges[n]
            k = max(1, int(math.ceil((b - a) / _PANEL)))
            knots = np.linspace(a, b, k + 1)
            mid = 0.5 * (knots[1:] + knots[:-1])[:, None]
            half = 0.5 * (knots[1:] - knots[:-1])[:, None]
            nodes = mid + half * _GL_X
            vals = rate(sign * nodes)
            total += sign * float(np.sum(half * _GL_W * vals))
            acc[n] = total
        out[mask] = acc[1:][np.searchsorted(targets, np.abs(flat[mask]))]
    return out.reshape(t.shape)


def alpha_1122(t):
    return _integrate_from_zero(alpha_1122_rate, t)


def lift_alpha(t):
    """Horizontal lift of the Engel curve to the step-4 group from ``(2,0,0,0,2/3,0)``."""
    t = np.asarray(t, dtype=float)
    b = engel_beta(t)
    return np.concatenate([b, alpha_122(t)[..., None], alpha_1122(t)[..., None]], axis=-1)


ENGEL_COVECTOR = np.array([0.0, 1.0, 2.0, 1.0])
ENGEL_START = np.array([2.0, 0.0, 0.0, 0.0])
LIFT_START = np.array([2.0, 0.0, 0.0, 0.0, 2.0 / 3.0, 0.0])


def engel_pair():
    return CovectorPair(ENGEL_COVECTOR, 1.0)

