"""Carnot-Caratheodory distance: exact formulas where known, bounds elsewhere.

The V_1 inner product is the one making the horizontal basis orthonormal.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import qr

from .algebra import (
    StratifiedAlgebra,
    bch_product,
    bracket,
    frame_coefficients,
    group_inverse,
    heisenberg,
    project_abelianization,
)
from .errors import InvalidInputError

MODES = ("exact-abelian", "exact-heisenberg", "interval")

BISECT_TOL = 1e-10
BISECT_MAXITER = 200


def _area_ratio(phi):
    """Enclosed area over squared chord for a circular arc of turning angle ``phi``."""
    s = np.sin(phi / 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (phi - np.sin(phi)) / (8 * s * s)
    small = phi < 1e-3
    # series: (phi - sin phi) / (8 sin^2(phi/2)) = phi/12 + phi^3/720 + ...
    return np.where(small, phi / 12 + phi**3 / 720, out)


def heisenberg_norm(g):
    """``d(e, g)`` in the Heisenberg group with ``[X1, X2] = X12``.

    Geodesics are circular arcs in the horizontal plane; the vertical
    coordinate is the signed area between arc and chord.  The turning angle
    is found by bisection, then the length follows in closed form.
    """
    g = np.asarray(g, dtype=float)
    rho = np.hypot(g[..., 0], g[..., 1])
    z = np.abs(g[..., 2])
    with np.errstate(divide="ignore", invalid="ignore"):
        target = np.where(rho > 0, z / np.where(rho > 0, rho, 1.0) ** 2, np.inf)
    lo = np.zeros_like(rho)
    hi = np.full_like(rho, 2 * np.pi)
    active = np.isfinite(target) & (z > 0)
    for _ in range(BISECT_MAXITER):
        if not np.any(active & (hi - lo > BISECT_TOL)):
            break
        mid = 0.5 * (lo + hi)
        below = _area_ratio(mid) < target
        lo = np.where(active & below, mid, lo)
        hi = np.where(active & ~below, mid, hi)
    phi = np.where(np.isfinite(target), 0.5 * (lo + hi), 2 * np.pi)
    phi = np.where(z > 0, phi, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        chord_form = rho * phi / (2 * np.sin(phi / 2))
        area_form = np.sqrt(2 * phi**2 * z / (phi - np.sin(phi)))
    length = np.where(phi < 1.0, chord_form, area_form)
    return np.where(phi == 0.0, rho, length)


def heisenberg_distance(p, q):
    """Exact CC distance between Heisenberg points (exponential coordinates)."""
    H = heisenberg()
    return heisenberg_norm(bch_product(H, group_inverse(H, p), q))


# --- commutator ladders -----------------------------------------------------
# A j-fold nested group commutator of segments of length tau has length
# LADDER_FACTOR[j] * tau: [a, w] = a w a^-1 w^-1 costs 2 tau + 2 len(w).
def _ladder_factor(j):
    return 1 if j == 1 else 2 + 2 * _ladder_factor(j - 1)


def _group_commutator(A, a, b):
    return bch_product(A, bch_product(A, a, b), group_inverse(A, bch_product(A, b, a)))


@dataclass(frozen=True)
class _LadderLayer:
    words: tuple[tuple[int, ...], ...]
    solve: np.ndarray  # maps layer-j coordinates to word coefficients


def _right_nested(A, word):
    v = np.zeros(A.dim)
    v[word[-1]] = 1.0
    for i in reversed(word[:-1]):
        e = np.zeros(A.dim)
        e[i] = 1.0
        v = bracket(A, e, v)
    return v


def _ladder_layers(A):
    layers = {}
    for j in range(2, A.step + 1):
        sl = A.layer_slice(j)
        words = list(itertools.product(range(A.rank), repeat=j))
        M = np.array([_right_nested(A, w)[sl] for w in words]).T
        _, _, piv = qr(M, pivoting=True)
        k = A.layer_dim(j)
        chosen = sorted(piv[:k])
        basis = M[:, chosen]
        layers[j] = _LadderLayer(tuple(words[c] for c in chosen), np.linalg.inv(basis))
    return layers


def ladder_length(A, g, layers=None):
    """Length of an explicit horizontal path from the identity to ``g``.

    The path first runs straight along the horizontal part of ``g``, then
    corrects layer after layer with nested group commutators of coordinate
    segments.  The top-layer commutators are exact, so the endpoint is ``g``.
    """
    g = np.asarray(g, dtype=float)
    layers = layers if layers is not None else _ladder_layers(A)
    total = np.linalg.norm(project_abelianization(A, g), axis=-1)
    step = np.zeros_like(g)
    step[..., : A.rank] = g[..., : A.rank]
    rem = bch_product(A, group_inverse(A, step), g)
    for j in range(2, A.step + 1):
        data = layers[j]
        coeffs = rem[..., A.layer_slice(j)] @ data.solve.T
        prod = np.zeros_like(g)
        for n, word in enumerate(data.words):
            c = coeffs[..., n]
            tau = np.abs(c) ** (1.0 / j)
            total = total + _ladder_factor(j) * tau
            sign = np.where(c < 0, -1.0, 1.0)
            seg = np.zeros(g.shape[:-1] + (A.dim,))
            seg[..., word[-1]] = tau
            w = seg
            for pos, i in enumerate(reversed(word[:-1])):
                a = np.zeros_like(seg)
                a[..., i] = tau * (sign if pos == len(word) - 2 else 1.0)
                w = _group_commutator(A, a, w)
            prod = bch_product(A, prod, w)
        rem = bch_product(A, group_inverse(A, prod), rem)
    return total, rem


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def layer_growth_constants(A):
    """Constants ``kappa_j`` with ``|x_(j)| <= kappa_j L**j`` for horizontal paths.

    Any horizontal curve of length ``L`` from the identity ends at a point
    whose layer-j part has Euclidean norm at most ``kappa_j L**j``.  Derived
    from the frame expansion with Frobenius bounds on the bracket blocks, so
    ``max_j (|g_(j)| / kappa_j)**(1/j)`` is a valid lower bound for ``d(e, g)``.
    """
    s = A.step
    c = A.structure
    beta = np.zeros((s + 1, s + 1))
    for p in range(1, s + 1):
        for q in range(1, s + 1 - p):
            block = c[A.layer_slice(p), A.layer_slice(q), A.layer_slice(p + q)]
            beta[p, q] = np.sqrt(np.sum(block**2))
    coeffs = [abs(float(x)) for x in frame_coefficients(s)]
    kappa = np.zeros(s + 1)
    kappa[1] = 1.0
    for j in range(2, s + 1):
        total = 0.0
        for k in range(1, j):
            if coeffs[k] == 0.0:
                continue
            for comp in _compositions(j - 1, k):
                term, inner = coeffs[k], 1
                for p in reversed(comp):
                    term *= beta[p, inner] * kappa[p]
                    inner += p
                total += term
        kappa[j] = total / j
    return kappa[1:]


def layer_lower_bound(A, g, kappa=None):
    """``max_j (|g_(j)| / kappa_j)**(1/j)``; at least the abelianized norm."""
    g = np.asarray(g, dtype=float)
    kappa = layer_growth_constants(A) if kappa is None else kappa
    out = np.zeros(g.shape[:-1])
    for j in range(1, A.step + 1):
        if kappa[j - 1] == 0.0:
            continue
        nj = np.linalg.norm(g[..., A.layer_slice(j)], axis=-1)
        out = np.maximum(out, (nj / kappa[j - 1]) ** (1.0 / j))
    return out


class DistanceBoundProvider:
    """Lower and upper bounds for the CC distance of one group.

    ``exact-abelian`` and ``exact-heisenberg`` return equal bounds.  In
    ``interval`` mode the lower bound is the abelianized distance (the
    projection is 1-Lipschitz), sharpened by the layer growth estimate of
    :func:`layer_lower_bound`, and the upper bound is a commutator ladder.
    """

    def __init__(self, A: StratifiedAlgebra, mode=None):
        self.algebra = A
        self.mode = mode or default_mode(A)
        if self.mode not in MODES:
            raise InvalidInputError(f"unknown provider mode {self.mode!r}")
        if self.mode == "exact-abelian" and A.step != 1:
            raise InvalidInputError("exact-abelian mode needs a step-1 group")
        if self.mode == "exact-heisenberg" and A != heisenberg():
            raise InvalidInputError("exact-heisenberg mode needs the heisenberg algebra")

    @property
    def exact(self):
        return self.mode != "interval"

    @cached_property
    def _layers(self):
        return _ladder_layers(self.algebra)

    @cached_property
    def _kappa(self):
        return layer_growth_constants(self.algebra)

    def norm_bounds(self, g):
        A = self.algebra
        g = np.asarray(g, dtype=float)
        if self.mode == "exact-abelian":
            d = np.linalg.norm(g, axis=-1)
            return d, d
        if self.mode == "exact-heisenberg":
            d = heisenberg_norm(g)
            return d, d
        lower = layer_lower_bound(A, g, self._kappa)
        upper, _ = ladder_length(A, g, self._layers)
        return lower, np.maximum(upper, lower)

    def bounds(self, p, q):
        """``(lower, upper)`` for ``d(p, q)``, broadcasting over leading axes."""
        A = self.algebra
        return self.norm_bounds(bch_product(A, group_inverse(A, p), q))

    def distance(self, p, q):
        if not self.exact:
            raise InvalidInputError(f"no exact distance in {self.mode} mode")
        return self.bounds(p, q)[0]


def default_mode(A):
    if A.step == 1:
        return "exact-abelian"
    if A == heisenberg():
        return "exact-heisenberg"
    return "interval"


def provider_for(A, mode=None):
    return DistanceBoundProvider(A, mode)
