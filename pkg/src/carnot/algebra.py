"""Stratified nilpotent Lie algebras and their Carnot groups.

Group elements are stored in exponential coordinates: a point ``x`` of the
group is the coefficient vector of ``log(x)`` in the graded basis, so the
identity is the zero vector and the inverse is negation.  Every function
accepts arrays of shape ``(..., dim)`` and broadcasts over leading axes.

Structure constants are kept as exact :class:`fractions.Fraction` values.
Float arrays are derived from them; passing object arrays of ``Fraction``
to :func:`bracket` and :func:`bch_product` keeps the arithmetic exact.
"""
from __future__ import annotations

import functools
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, NoLastLayerError, UnsupportedStepError

#: Deepest nilpotency step handled by the generic BCH evaluator.
MAX_STEP = 8


@dataclass(frozen=True)
class StratifiedAlgebra:
    """A Carnot (stratified, bracket-generating) Lie algebra.

    ``brackets`` lists ``(i, j, k, c)`` with ``i < j`` meaning that the
    coefficient of ``e_k`` in ``[e_i, e_j]`` is ``c``.  Basis ordering is
    layer-major.  Use :meth:`build` rather than the raw constructor; it
    validates grading, antisymmetry and the Jacobi identity.
    """

    labels: tuple[str, ...]
    layers: tuple[int, ...]
    brackets: tuple[tuple[int, int, int, Fraction], ...]
    name: str = field(default="", compare=False)

    @classmethod
    def build(cls, name, layers, brackets=(), check=True):
        """Build an algebra from per-layer label lists.

        ``brackets`` is an iterable of ``(lhs, rhs, {result: coeff})`` with
        labels as strings and coefficients as anything :class:`Fraction`
        accepts (ints, ``"1/12"``, ...).  The antisymmetric completion is
        implicit.
        """
        labels = [lab for layer in layers for lab in layer]
        if len(set(labels)) != len(labels):
            raise InvalidInputError(f"duplicate basis labels in {labels}")
        if not labels or not layers[0]:
            raise InvalidInputError("the first layer must be nonempty")
        layer_of = [j + 1 for j, layer in enumerate(layers) for _ in layer]
        index = {lab: n for n, lab in enumerate(labels)}

        table = {}
        for entry in brackets:
            lhs, rhs, result = entry
            if lhs not in index or rhs not in index:
                raise InvalidInputError(f"unknown label in bracket {entry!r}")
            i, j = index[lhs], index[rhs]
            if i == j:
                if any(Fraction(c) != 0 for c in result.values()):
                    raise InvalidInputError(f"[{lhs}, {lhs}] must vanish")
                continue
            sign = 1
            if i > j:
                i, j, sign = j, i, -1
            for lab, coeff in result.items():
                if lab not in index:
                    raise InvalidInputError(f"unknown label {lab!r} in bracket {entry!r}")
                c = sign * Fraction(coeff)
                key = (i, j, index[lab])
                if key in table and table[key] != c:
                    raise InvalidInputError(f"conflicting values for [{lhs}, {rhs}]")
                table[key] = c
        entries = tuple(sorted((i, j, k, c) for (i, j, k), c in table.items() if c != 0))
        alg = cls(tuple(labels), tuple(layer_of), entries, name=name)
        if check:
            alg.validate()
        return alg

    # --- derived data -------------------------------------------------
    @property
    def dim(self):
        return len(self.labels)

    @property
    def step(self):
        return max(self.layers)

    @property
    def rank(self):
        return self.layers.count(1)

    @cached_property
    def index(self):
        return {lab: n for n, lab in enumerate(self.labels)}

    def layer_slice(self, j):
        """Index range of layer ``j`` (1-based) in the layer-major basis."""
        idx = [n for n, lay in enumerate(self.layers) if lay == j]
        if not idx:
            return slice(0, 0)
        return slice(idx[0], idx[-1] + 1)

    def layer_dim(self, j):
        return self.layers.count(j)

    @cached_property
    def degrees(self):
        return np.array(self.layers, dtype=float)

    @cached_property
    def structure_exact(self):
        """Dense ``c[i, j, k]`` tensor of Fractions, antisymmetric in ``i, j``."""
        c = np.full((self.dim,) * 3, Fraction(0), dtype=object)
        for i, j, k, v in self.brackets:
            c[i, j, k] = v
            c[j, i, k] = -v
        return c

    @cached_property
    def structure(self):
        return self.structure_exact.astype(float)

    @cached_property
    def _full_table(self):
        return [(i, j, k, v) for i, j, k, v in self.brackets] + [
            (j, i, k, -v) for i, j, k, v in self.brackets
        ]

    def basis(self, label):
        """Unit vector of the basis element ``label``."""
        e = np.zeros(self.dim)
        e[self.index[label]] = 1.0
        return e

    def vector(self, **coeffs):
        """Vector from keyword coefficients, e.g. ``A.vector(x1=1)`` for label ``'1'``.

        Labels are addressed with an ``x`` prefix since they are digits.
        """
        v = np.zeros(self.dim)
        for key, val in coeffs.items():
            v[self.index[key[1:] if key.startswith("x") else key]] = val
        return v

    # --- validation -----------------------------------------------------
    def validate(self):
        layers = list(self.layers)
        if layers != sorted(layers):
            raise InvalidInputError("basis must be ordered layer-major")
        if set(layers) != set(range(1, max(layers) + 1)):
            raise InvalidInputError("every layer 1..s must be nonempty")
        for i, j, k, _ in self.brackets:
            if self.layers[k] != self.layers[i] + self.layers[j]:
                raise InvalidInputError(
                    f"bracket [{self.labels[i]}, {self.labels[j]}] has a component on "
                    f"{self.labels[k]}, violating the grading"
                )
        if np.any(jacobi_residual(self) != 0):
            raise InvalidInputError("structure constants violate the Jacobi identity")
        if not is_bracket_generating(self):
            raise InvalidInputError("layer 1 does not generate the algebra")
        return self


def jacobi_residual(A):
    """Exact tensor ``J[a, b, c, :]`` of ``[a,[b,c]] + [b,[c,a]] + [c,[a,b]]``."""
    c = A.structure_exact
    # [e_b, e_c] = sum_m c[b,c,m] e_m ; [e_a, e_m] = sum_k c[a,m,k] e_k
    t1 = np.einsum("bcm,amk->abck", c, c)
    return t1 + np.transpose(t1, (1, 2, 0, 3)) + np.transpose(t1, (2, 0, 1, 3))


def _exact_rank(rows):
    """Rank of a list of Fraction row vectors by Gaussian elimination."""
    m = [list(r) for r in rows]
    rank = 0
    ncols = len(m[0]) if m else 0
    for col in range(ncols):
        pivot = next((r for r in range(rank, len(m)) if m[r][col] != 0), None)
        if pivot is None:
            continue
        m[rank], m[pivot] = m[pivot], m[rank]
        for r in range(len(m)):
            if r != rank and m[r][col] != 0:
                f = m[r][col] / m[rank][col]
                m[r] = [a - f * b for a, b in zip(m[r], m[rank])]
        rank += 1
    return rank


def is_bracket_generating(A):
    """True when ``[V_1, V_j]`` spans ``V_{j+1}`` for every ``j < s``."""
    c = A.structure_exact
    for j in range(1, A.step):
        v1 = range(A.layer_slice(1).start, A.layer_slice(1).stop)
        vj = range(A.layer_slice(j).start, A.layer_slice(j).stop)
        nxt = A.layer_slice(j + 1)
        rows = [list(c[a, b, nxt]) for a in v1 for b in vj]
        if _exact_rank(rows) != A.layer_dim(j + 1):
            return False
    return True


# --- arithmetic ---------------------------------------------------------
def _as_vector(A, X):
    X = np.asarray(X)
    if X.dtype != object:
        X = X.astype(float, copy=False)
    if X.ndim == 0 or X.shape[-1] != A.dim:
        raise InvalidInputError(
            f"expected vectors of length {A.dim} for {A.name or 'algebra'}, got shape {X.shape}"
        )
    return X


def bracket(A, X, Y):
    """Lie bracket ``[X, Y]`` evaluated through the structure constants."""
    X, Y = _as_vector(A, X), _as_vector(A, Y)
    if X.dtype == object or Y.dtype == object:
        shape = np.broadcast_shapes(X.shape, Y.shape)
        out = np.full(shape, Fraction(0), dtype=object)
        for i, j, k, v in A._full_table:
            out[..., k] = out[..., k] + v * X[..., i] * Y[..., j]
        return out
    return np.einsum("...i,...j,ijk->...k", X, Y, A.structure)


def _half(dtype_obj):
    return Fraction(1, 2) if dtype_obj else 0.5


def _bch_closed(A, X, Y):
    """log(exp X exp Y) truncated after degree 4."""
    obj = X.dtype == object or Y.dtype == object
    q = (lambda a, b: Fraction(a, b)) if obj else (lambda a, b: a / b)
    Z = X + Y
    if A.step < 2:
        return Z
    XY = bracket(A, X, Y)
    Z = Z + q(1, 2) * XY
    if A.step < 3:
        return Z
    XXY = bracket(A, X, XY)
    XYY = bracket(A, XY, Y)
    Z = Z + q(1, 12) * (XXY + XYY)
    if A.step < 4:
        return Z
    return Z + q(1, 24) * bracket(A, X, XYY)


# Free associative algebra on two letters, truncated by degree.  Polynomials
# are dicts mapping words (tuples over {0, 1}) to Fractions.
def _mul(p, q, depth):
    out = {}
    for w1, c1 in p.items():
        for w2, c2 in q.items():
            if len(w1) + len(w2) <= depth:
                w = w1 + w2
                out[w] = out.get(w, 0) + c1 * c2
    return {w: c for w, c in out.items() if c != 0}


def _add(p, q, scale=1):
    out = dict(p)
    for w, c in q.items():
        out[w] = out.get(w, 0) + scale * c
    return {w: c for w, c in out.items() if c != 0}


@functools.lru_cache(maxsize=None)
def bch_words(depth):
    """Coefficients of the BCH series in left-normed bracket form.

    Returns ``[(word, coeff), ...]`` such that
    ``log(exp X exp Y) = sum coeff * [...[[w1, w2], w3], ..., wn]`` up to
    degree ``depth``, with letter 0 standing for X and 1 for Y.  Derived by
    expanding the series in the free associative algebra and applying the
    Dynkin-Specht-Wever projection degree by degree.
    """
    def exp_letter(letter):
        return {(letter,) * n: Fraction(1, math.factorial(n)) for n in range(depth + 1)}

    prod = _mul(exp_letter(0), exp_letter(1), depth)
    w = {k: v for k, v in prod.items() if k}  # exp X exp Y - 1
    log, power = {}, {(): Fraction(1)}
    for n in range(1, depth + 1):
        power = _mul(power, w, depth)
        log = _add(log, power, Fraction((-1) ** (n + 1), n))
    out = []
    for word, c in sorted(log.items(), key=lambda kv: (len(kv[0]), kv[0])):
        n = len(word)
        # [x, x] = 0: words starting with a repeated letter bracket to zero.
        if n >= 2 and word[0] == word[1]:
            continue
        out.append((word, c / n))
    return tuple(out)


def _bch_generic(A, X, Y, depth):
    memo = {}

    def nested(word):
        if word in memo:
            return memo[word]
        if len(word) == 1:
            val = X if word[0] == 0 else Y
        else:
            val = bracket(A, nested(word[:-1]), Y if word[-1] else X)
        memo[word] = val
        return val

    obj = X.dtype == object or Y.dtype == object
    Z = X + Y
    for word, c in bch_words(depth):
        if len(word) == 1:
            continue
        Z = Z + (c if obj else float(c)) * nested(word)
    return Z


def bch_product(A, x, y, method="auto"):
    """Group product ``x * y`` in exponential coordinates.

    ``method='closed'`` uses the four-term formula (valid up to step 4);
    ``'series'`` uses the generic graded series (up to :data:`MAX_STEP`).
    """
    x, y = _as_vector(A, x), _as_vector(A, y)
    if method == "auto":
        method = "closed" if A.step <= 4 else "series"
    if method == "closed":
        if A.step > 4:
            raise UnsupportedStepError(f"closed BCH formula supports step <= 4, got {A.step}")
        return _bch_closed(A, x, y)
    if method == "series":
        if A.step > MAX_STEP:
            raise UnsupportedStepError(f"BCH series supports step <= {MAX_STEP}, got {A.step}")
        return _bch_generic(A, x, y, A.step)
    raise InvalidInputError(f"unknown BCH method {method!r}")


def group_inverse(A, x):
    return -_as_vector(A, x)


def word_product(A, points):
    """Ordered product of a sequence of group points."""
    it = iter(points)
    acc = _as_vector(A, next(it))
    for p in it:
        acc = bch_product(A, acc, p)
    return acc


def conjugate(A, g, x):
    """``g x g^{-1}``."""
    return bch_product(A, bch_product(A, g, x), group_inverse(A, g))


# --- dilations and automorphisms -----------------------------------------
def dilate(A, h, X):
    """Dilation ``delta_h``: layer-j coefficients scaled by ``h**j``."""
    if not h > 0:
        raise InvalidInputError(f"dilation factor must be positive, got {h}")
    return _as_vector(A, X) * np.power(float(h), A.degrees)


def flip(A, X):
    """The automorphism ``delta_{-1}``: layer-j coefficients times ``(-1)**j``."""
    signs = np.where(np.array(A.layers) % 2 == 0, 1.0, -1.0)
    return _as_vector(A, X) * signs


# --- adjoint representation -----------------------------------------------
def ad_matrix(A, X):
    """Matrix of ``ad(X)``: column ``j`` holds ``[X, e_j]``."""
    X = _as_vector(A, X)
    c = A.structure_exact if X.dtype == object else A.structure
    return np.einsum("...i,ijk->...kj", X, c)


def _matrix_series(A, g, coeffs):
    """``sum_k coeffs[k] ad(g)^k`` with the series cut at nilpotency."""
    M = ad_matrix(A, g)
    out = np.broadcast_to(np.eye(A.dim), M.shape).copy()
    power = out.copy()
    for k in range(1, A.step):
        power = power @ M
        out = out + coeffs[k] * power
    return out


def adjoint(A, g):
    """``Ad_g = exp(ad(log g))`` as a ``(dim, dim)`` matrix acting on columns."""
    return _matrix_series(A, g, [1.0 / math.factorial(k) for k in range(A.step)])


@functools.lru_cache(maxsize=None)
def _bernoulli_plus(n):
    """Bernoulli numbers with ``B_1 = +1/2``."""
    b = [Fraction(1)]
    for m in range(1, n + 1):
        b.append(-sum(math.comb(m + 1, k) * b[k] for k in range(m)) / (m + 1))
    if n >= 1:
        b[1] = Fraction(1, 2)
    return tuple(b)


def frame_coefficients(step):
    """Taylor coefficients of ``z / (1 - exp(-z))`` up to ``z**(step-1)``."""
    b = _bernoulli_plus(max(step - 1, 1))
    return [b[k] / math.factorial(k) for k in range(step)]


def left_invariant_frame(A, x):
    """Left-invariant extensions ``X_1 .. X_r`` of the horizontal basis at ``x``.

    Returns an array of shape ``(..., r, dim)`` whose row ``i`` is the
    coordinate vector ``d/dt|_0 x * exp(t e_i)``.
    """
    x = _as_vector(A, x)
    coeffs = [float(c) for c in frame_coefficients(A.step)]
    M = _matrix_series(A, x, coeffs)
    return np.swapaxes(M[..., :, : A.rank], -1, -2)


# --- projections and quotients --------------------------------------------
def project_abelianization(A, g):
    """Horizontal coordinates of ``g``; a homomorphism onto ``(R^r, +)``."""
    return _as_vector(A, g)[..., : A.rank]


def quotient_mod_last_layer(A):
    """The step ``s-1`` Carnot algebra ``g / V_s``."""
    if A.step < 2:
        raise NoLastLayerError(f"{A.name or 'algebra'} has step 1; there is no layer to drop")
    keep = A.layer_slice(A.step).start
    entries = tuple(e for e in A.brackets if e[2] < keep)
    return StratifiedAlgebra(A.labels[:keep], A.layers[:keep], entries, name=f"{A.name}/V{A.step}")


def project_mod_last_layer(A, g):
    """Image of ``g`` in ``G / exp(V_s)``: exponential coordinates truncated."""
    if A.step < 2:
        raise NoLastLayerError(f"{A.name or 'algebra'} has step 1; there is no layer to drop")
    return _as_vector(A, g)[..., : A.layer_slice(A.step).start]


def layer_component(A, X, j):
    """``X_(j)`` embedded back into the full vector (other layers zeroed)."""
    X = _as_vector(A, X)
    out = np.zeros_like(X)
    sl = A.layer_slice(j)
    out[..., sl] = X[..., sl]
    return out


def homogeneous_norm(A, X):
    """``max_j |X_(j)|_2 ** (1/j)``; 1-homogeneous under dilations."""
    X = _as_vector(A, X).astype(float)
    out = np.zeros(X.shape[:-1])
    for j in range(1, A.step + 1):
        sl = A.layer_slice(j)
        out = np.maximum(out, np.linalg.norm(X[..., sl], axis=-1) ** (1.0 / j))
    return out


# --- catalog ---------------------------------------------------------------
def euclidean(n):
    if n < 1:
        raise InvalidInputError("euclidean(n) needs n >= 1")
    return StratifiedAlgebra.build(f"euclidean({n})", [[str(i + 1) for i in range(n)]])


def heisenberg():
    return StratifiedAlgebra.build("heisenberg", [["1", "2"], ["12"]], [("1", "2", {"12": 1})])


def free_step2(r):
    """Free step-2 algebra of rank ``r`` with ``[X_i, X_j] = X_ij`` for ``i < j``."""
    if r < 2:
        raise InvalidInputError("free_step2(r) needs r >= 2")
    sep = "" if r < 10 else "."
    gens = [str(i + 1) for i in range(r)]
    pairs = list(itertools.combinations(range(1, r + 1), 2))
    top = [f"{i}{sep}{j}" for i, j in pairs]
    brackets = [(str(i), str(j), {f"{i}{sep}{j}": 1}) for i, j in pairs]
    return StratifiedAlgebra.build(f"free_step2({r})", [gens, top], brackets)


def engel():
    return StratifiedAlgebra.build(
        "engel",
        [["1", "2"], ["12"], ["112"]],
        [("1", "2", {"12": 1}), ("1", "12", {"112": 1})],
    )


def g_rank2_step4():
    """Rank-2 step-4 algebra with the Engel algebra as a quotient."""
    return StratifiedAlgebra.build(
        "g_rank2_step4",
        [["1", "2"], ["12"], ["112", "122"], ["1122"]],
        [
            ("1", "2", {"12": 1}),
            ("1", "12", {"112": 1}),
            ("12", "2", {"122": 1}),
            ("1", "122", {"1122": 1}),
            ("112", "2", {"1122": 1}),
        ],
    )


def catalog(name):
    """Look up a catalog group by name, e.g. ``'engel'`` or ``'free_step2(3)'``."""
    name = name.strip()
    simple = {"heisenberg": heisenberg, "engel": engel, "g_rank2_step4": g_rank2_step4}
    if name in simple:
        return simple[name]()
    for prefix, fn in (("euclidean", euclidean), ("free_step2", free_step2)):
        if name.startswith(prefix + "(") and name.endswith(")"):
            return fn(int(name[len(prefix) + 1 : -1]))
    raise InvalidInputError(f"unknown catalog group {name!r}")


CATALOG_NAMES = ("euclidean(n)", "heisenberg", "free_step2(r)", "engel", "g_rank2_step4")


# --- definition files ------------------------------------------------------
def algebra_from_dict(doc):
    """Build an algebra from the JSON-compatible definition document."""
    try:
        name = doc.get("name", "")
        layers = doc["layers"]
        brackets = [(lhs, rhs, dict(res)) for lhs, rhs, res in doc.get("brackets", [])]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"malformed algebra definition: {exc}") from exc
    try:
        A = StratifiedAlgebra.build(name, layers, brackets)
    except (ValueError, ZeroDivisionError) as exc:
        if isinstance(exc, InvalidInputError):
            raise
        raise InvalidInputError(f"malformed algebra definition: {exc}") from exc
    if "step" in doc and int(doc["step"]) != A.step:
        raise InvalidInputError(f"declared step {doc['step']} but layers give step {A.step}")
    return A


def algebra_to_dict(A):
    layers = [[lab for lab, lay in zip(A.labels, A.layers) if lay == j] for j in range(1, A.step + 1)]
    brackets = [
        [A.labels[i], A.labels[j], {A.labels[k]: str(c)}] for i, j, k, c in A.brackets
    ]
    return {"name": A.name, "step": A.step, "layers": layers, "brackets": brackets}


def load_algebra(path):
    with open(Path(path)) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{path}: not valid JSON ({exc})") from exc
    return algebra_from_dict(doc)


def resolve_group(spec):
    """Catalog name or path to a definition file."""
    if isinstance(spec, StratifiedAlgebra):
        return spec
    p = Path(str(spec))
    if p.suffix == ".json" or p.exists():
        return load_algebra(p)
    return catalog(str(spec))
