import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from carnot.algebra import adjoint, bch_product, engel, euclidean, g_rank2_step4, group_inverse, heisenberg
from carnot.asymptotics import (
    DilatedCurveView,
    Line,
    asymptote_residual,
    blow,
    blowdown_estimate,
    engel_asymptote,
    euclidean_blowdown,
    hausdorff_truncated,
    heisenberg_distance,
    lift_asymptote,
    lines_finite_distance,
    log_slopes,
    quantified_tangent_check,
    rough_projection_check,
    sampled_source,
)
from carnot.distance import provider_for
from carnot.errors import InvalidInputError, NotQuasiGeodesicError, UnsupportedGroupError
from carnot.extremal import CovectorPair, engel_beta, integrate_extremal, lift_alpha

E = engel()
G4 = g_rank2_step4()
H = heisenberg()


def horizontal_line(A, direction):
    X = np.zeros(A.dim)
    X[: A.rank] = direction
    return Line.through_identity(A, X)


# --- lines and dilated views ---------------------------------------------------------
def test_line_requires_direction():
    with pytest.raises(InvalidInputError):
        Line(E, np.zeros(4), np.zeros(4))
    with pytest.raises(InvalidInputError):
        Line(E, np.zeros(3), np.ones(4))


def test_line_evaluation():
    L = Line(E, [2, 0, 0, 0], [0, 1, 0, 0])
    assert np.allclose(L(3.0), [2, 3, 3, 1])


@given(st.floats(0.01, 100), st.floats(-2, 2), st.floats(-2, 2))
def test_blowup_of_horizontal_line_is_itself(h, a, b):
    if a == b == 0:
        a = 1.0
    L = horizontal_line(E, [a, b])
    t = np.linspace(-2, 2, 9)
    assert np.max(np.abs(blow(DilatedCurveView(E, L, h), t) - L(t))) < 1e-12


def test_unit_view_reproduces_source():
    t = np.linspace(-3, 3, 13)
    src = lambda s: bch_product(E, group_inverse(E, engel_beta(0.0)), engel_beta(s))
    assert np.max(np.abs(blow(DilatedCurveView(E, src, 1.0), t) - src(t))) < 1e-15
    assert np.allclose(blow(DilatedCurveView(E, engel_beta, 3.0, 1.2), 0.0), 0, atol=1e-15)


def test_blowup_of_beta_is_its_tangent_line():
    u0 = np.array([0.0, 1.0])  # initial velocity of beta
    errs = []
    for h in (1e-1, 1e-2, 1e-3):
        p = blow(DilatedCurveView(E, engel_beta, h), 1.0)
        errs.append(np.max(np.abs(p - np.r_[u0, 0, 0])))
    assert errs[-1] < 1e-2 and errs[0] > errs[1] > errs[2]


def test_view_errors():
    with pytest.raises(InvalidInputError):
        DilatedCurveView(E, engel_beta, 0.0)
    curve = integrate_extremal(E, CovectorPair([0, 1, 2, 1]), None, (0, 2), 0.01)
    src, dom = sampled_source(curve)
    view = DilatedCurveView(E, src, 1.0, 0.0, dom)
    assert np.allclose(view(1.0), curve.points[100], atol=1e-12)
    with pytest.raises(InvalidInputError):
        view(3.0)


def test_blowdown_of_line_is_stationary():
    rep = blowdown_estimate(E, horizontal_line(E, [0.6, 0.8]), [1, 10, 100], np.linspace(-1, 1, 11))
    assert np.max(np.abs(rep.samples - rep.samples[0])) < 1e-12
    # roundoff of size eps in layer j shows up as eps**(1/j) in the bounds
    assert np.max(rep.cauchy) < 1e-3


def test_blowdown_of_circle_collapses():
    lam = np.array([1.0, 0.0, 1.0])
    data_t = (-200.0, 200.0)
    pieces = [integrate_extremal(H, CovectorPair(lam), None, (0, e), 0.01) for e in data_t]
    t = np.concatenate([pieces[0].times[:-1], pieces[1].times])
    x = np.concatenate([pieces[0].points[:-1], pieces[1].points])
    src, dom = sampled_source(type(pieces[0])(t, x, np.zeros((len(t), 2))))
    rep = blowdown_estimate(H, src, [1, 10, 100], np.linspace(-1, 1, 21), domain=dom)
    horiz = np.max(np.linalg.norm(rep.samples[:, :, :2], axis=-1), axis=1)
    assert horiz[-1] < horiz[0] / 20
    assert horiz[-1] <= 2.0 / 100 + 1e-9  # the circle has radius 1


def test_blowdown_of_beta_follows_x2_axis():
    rep = blowdown_estimate(E, engel_beta, [10, 100, 1000], np.linspace(0, 1, 5))
    assert np.allclose(rep.horizontal_directions[-1], [0, -1], atol=5e-3)
    assert np.linalg.norm(rep.horizontal_directions[-1] - [0, -1]) < np.linalg.norm(
        rep.horizontal_directions[0] - [0, -1]
    )


def test_blowdown_errors():
    with pytest.raises(InvalidInputError):
        blowdown_estimate(E, engel_beta, [], [0, 1])
    with pytest.raises(InvalidInputError):
        blowdown_estimate(E, engel_beta, [2, 1], [0, 1])


# --- euclidean blowdown ---------------------------------------------------------------
def test_exact_line_blowdown():
    t = np.linspace(-50, 50, 201)
    d = np.array([0.6, 0.8])
    rep = euclidean_blowdown(t, np.outer(t, d), 0.0)
    assert np.allclose(rep.v_plus, d) and np.allclose(rep.v_minus, -d)
    assert rep.antipodal_error < 1e-12 and rep.max_angle_excess <= 1e-12


def test_noisy_line_blowdown(rng):
    C = 1.0
    t = np.linspace(-100, 100, 801)
    noise = (C / 2) * np.sin(3 * t)
    pts = np.column_stack([t, noise - noise[400]])
    rep = euclidean_blowdown(t, pts, C)
    assert rep.angle_bound_holds and rep.is_line


def test_shifted_line_blowdown():
    t = np.linspace(-20, 20, 81)
    pts = np.column_stack([t, np.full_like(t, 3.0)])
    rep = euclidean_blowdown(t, pts, 0.0)
    assert np.allclose(rep.v_plus, [1, 0]) and np.allclose(rep.v_minus, [-1, 0])


def test_not_a_quasi_geodesic():
    t = np.linspace(-10, 10, 41)
    with pytest.raises(NotQuasiGeodesicError) as info:
        euclidean_blowdown(t, np.column_stack([t, t]), 0.5)
    a, b = info.value.witness
    assert abs(np.hypot(a - b, a - b) - abs(a - b)) > 0.5
    with pytest.raises(InvalidInputError):
        euclidean_blowdown(np.array([1.0, 2.0]), np.zeros((2, 2)), 0.1)


# --- lines at finite distance -----------------------------------------------------------
def test_line_equals_itself():
    L = Line(G4, [1, 2, 0, 0, 0, 0.5], [0, 1, 0, 0, 0, 0.3])
    c, k = lines_finite_distance(G4, L, L)
    assert c == pytest.approx(1) and np.allclose(k, 0)


def test_right_translate(rng):
    for _ in range(20):
        g, X, k0 = rng.normal(size=(3, G4.dim))
        L2 = Line(G4, g, X)
        # L1(t) = L2(t) k0 = (g k0) exp(t Ad_{k0^{-1}} X)
        L1 = Line(G4, bch_product(G4, g, k0), adjoint(G4, -k0) @ X)
        c, k = lines_finite_distance(G4, L1, L2)
        assert c == pytest.approx(1) and np.allclose(k, k0, atol=1e-12)


def test_lift_asymptotes_diverge():
    assert lines_finite_distance(G4, lift_asymptote(G4, +1), lift_asymptote(G4, -1)) is None


def test_reparametrized_line():
    L2 = Line(E, [0, 0, 1, 0], [1, 1, 0, 0])
    L1 = Line(E, [0, 0, 1, 0], [3, 3, 0, 0])
    c, k = lines_finite_distance(E, L1, L2)
    assert c == pytest.approx(3) and np.allclose(k, 0)
    assert lines_finite_distance(E, Line(E, [0, 0, 1, 0], [-1, -1, 0, 0]), L2) is None


@given(st.integers(0, 2**32 - 1), st.booleans())
def test_verdict_is_symmetric(seed, related):
    rng = np.random.default_rng(seed)
    g, h, Y = rng.normal(size=(3, G4.dim))
    L2 = Line(G4, h, Y)
    if related:
        c0 = rng.uniform(0.2, 3)
        X = c0 * adjoint(G4, bch_product(G4, -g, h)) @ Y
    else:
        X = rng.normal(size=G4.dim)
    L1 = Line(G4, g, X)
    ab, ba = lines_finite_distance(G4, L1, L2), lines_finite_distance(G4, L2, L1)
    assert (ab is None) == (ba is None) == (not related)
    if related:
        assert ab[0] * ba[0] == pytest.approx(1)
        assert np.allclose(bch_product(G4, ab[1], ba[1]), 0, atol=1e-10)


# --- truncated hausdorff ---------------------------------------------------------------
def test_hausdorff_identical_sets():
    t = np.linspace(-5, 5, 21)
    pts = engel_beta(t)
    assert hausdorff_truncated((t, pts), (t, pts), provider_for(E), 5) == (0.0, 0.0)


def test_hausdorff_parallel_lines():
    R = euclidean(2)
    t = np.linspace(-10, 10, 41)
    a = np.column_stack([t, np.zeros_like(t)])
    b = np.column_stack([t, np.full_like(t, 1.5)])
    lo, hi = hausdorff_truncated((t, a), (t, b), provider_for(R), 10)
    assert lo == pytest.approx(1.5) and hi == pytest.approx(1.5)


def test_hausdorff_empty_window():
    t = np.linspace(1, 2, 3)
    with pytest.raises(InvalidInputError):
        hausdorff_truncated((t, np.zeros((3, 2))), (t, np.zeros((3, 2))), provider_for(euclidean(2)), 0.5)


def test_hausdorff_grows_for_lift_and_line():
    P = provider_for(G4)
    t = np.arange(-40, 40.01, 1.0)
    alpha = (t, lift_alpha(t))
    lows = []
    for T in (10, 20, 40):
        lo, hi = hausdorff_truncated(alpha, (t, lift_asymptote(G4, +1)(t)), P, T, window=(-T, 0))
        assert lo <= hi
        lows.append(lo)
    assert lows[0] <= lows[1] <= lows[2] and lows[2] > lows[0]


# --- asymptotes ---------------------------------------------------------------------
def test_engel_asymptote_residual_decays():
    t = np.linspace(5, 15, 101)
    for sign in (+1, -1):
        z = asymptote_residual(E, engel_beta, engel_asymptote(sign), sign * t)
        assert np.max(np.abs(z[-1])) < 1e-5
        assert np.all(log_slopes(t, z) <= -0.9)


def test_engel_asymptote_components():
    t = np.linspace(-3, 3, 13)
    z = asymptote_residual(E, engel_beta, engel_asymptote(+1), t)
    s = 1 / np.cosh(t)
    a, b = -2.0, 2 / 3
    expected = np.column_stack([2 * s, 2 * np.tanh(t) + a, -a * s, (2 / 3) * np.tanh(t) + a * s**2 / 3 - b])
    assert np.max(np.abs(z - expected)) < 1e-13


def test_lift_asymptote_residual():
    t = np.linspace(0, 40, 401)
    zp = asymptote_residual(G4, lift_alpha, lift_asymptote(G4, +1), t)
    assert np.max(np.abs(zp)) < 3
    zn = asymptote_residual(G4, lift_alpha, lift_asymptote(G4, +1), -t)
    slope = (zn[-1, 5] - zn[200, 5]) / (-t[-1] + t[200])
    assert slope == pytest.approx(4 / 3, abs=0.02)
    zm = asymptote_residual(G4, lift_alpha, lift_asymptote(G4, -1), -t)
    assert np.max(np.abs(zm)) < 3


def test_heisenberg_distance_reexport():
    assert heisenberg_distance([0, 0, 0], [2.0, 0, 0]) == pytest.approx(2.0)


# --- quantified tangents and rough projections ----------------------------------------
def test_tangent_check_on_line():
    L = horizontal_line(E, [0.6, 0.8])
    rep = quantified_tangent_check(E, L, 0.0, 0.5, 50)
    assert rep.upper_violations == 0 and rep.C == 0


def test_tangent_check_on_beta():
    rep = quantified_tangent_check(E, engel_beta, 0.0, 0.5, 200, seed=3)
    assert rep.ok and rep.C < 10
    gap = np.abs(rep.a - rep.b)
    assert np.all(rep.quotient_distance >= gap - rep.C * gap**1.5 - 1e-12)


def test_tangent_check_requires_engel():
    with pytest.raises(UnsupportedGroupError):
        quantified_tangent_check(G4, lift_alpha)


def test_rough_check_line():
    t = np.linspace(-10, 10, 41)
    pts = np.zeros((41, 3))
    pts[:, 0] = t
    rep = rough_projection_check(H, t, pts, 0.0)
    assert rep.horn == "quasi-geodesic" and rep.C_prime == 0


def test_rough_check_circle():
    curve = integrate_extremal(H, CovectorPair([1, 0, 1]), None, (0, 0.99 * 2 * np.pi), 1e-3)
    idx = np.linspace(0, len(curve.times) - 1, 40).astype(int)
    rep = rough_projection_check(H, curve.times[idx], curve.points[idx], 1e-6)
    assert rep.horn == "hyperplane" and 0 < rep.K <= 2.0 + 1e-9


def test_rough_check_noisy_line(rng):
    C = 0.5
    t = np.linspace(-20, 20, 81)
    base = np.zeros((81, 3))
    base[:, 0] = t
    noise = np.zeros((81, 3))
    noise[:, 1] = rng.uniform(-C / 2, C / 2, 81)
    pts = bch_product(H, base, noise)
    rep = rough_projection_check(H, t, pts, C)
    assert rep.horn == "quasi-geodesic" and rep.C_prime == pytest.approx(4 * C)


def test_rough_check_rejects_bad_input():
    t = np.linspace(0, 10, 11)
    pts = np.zeros((11, 3))
    pts[:, 0] = 2 * t
    with pytest.raises(NotQuasiGeodesicError):
        rough_projection_check(H, t, pts, 0.1)
    with pytest.raises(UnsupportedGroupError):
        rough_projection_check(E, t, np.zeros((11, 4)), 0.1)
