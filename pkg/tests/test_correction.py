import numpy as np
import pytest

from carnot.algebra import bch_product, bracket, engel, free_step2, g_rank2_step4, heisenberg, euclidean
from carnot.correction import (
    bracket_system,
    exact_word_residual,
    correction_constant,
    modified_triangle_rhs,
    perturbation_product,
    random_instance,
    solve_correction,
    triangle_constant,
)
from carnot.distance import DistanceBoundProvider
from carnot.errors import InvalidInputError, SingularConfigurationError, UnsupportedStepError
from carnot.extremal import engel_beta
from carnot.hgeom import size

E = engel()
G4 = g_rank2_step4()
STEPPED = [heisenberg(), free_step2(3), E, G4]
XS = np.array([[0, 0, 0, 0], [1, 0, 0, 0], [1, 1, 0, 0]], dtype=float)


def dense_solve(A, X, Z):
    """Least-norm solution of sum_j [Y_j, X_j] = Z over all of (V_{s-1})^r."""
    lo = A.layer_slice(A.step - 1)
    cols = []
    for j in range(A.rank):
        for a in range(lo.start, lo.stop):
            Y = np.zeros(A.dim)
            Y[a] = 1.0
            cols.append(bracket(A, Y, X[j]))
    M = np.array(cols).T
    sol, *_ = np.linalg.lstsq(M, Z, rcond=None)
    return M, sol


def test_worked_engel_instance():
    Z = np.array([0, 0, 0, 1.0])
    sol = solve_correction(E, XS, Z)
    assert np.allclose(sol.B, np.eye(2))
    assert np.allclose(sol.Y, [[0, 0, -1, 0], [0, 0, 0, 0]], atol=1e-15)
    assert np.array_equal(bracket(E, sol.Y[0], [1, 0, 0, 0]), Z)
    M, _ = dense_solve(E, sol.X, Z)
    flat = sol.Y[:, E.layer_slice(2)].ravel()
    assert np.allclose(M @ flat, Z)


def test_zero_rhs_gives_zero():
    sol = solve_correction(E, XS, np.zeros(4))
    assert np.all(sol.Y == 0)


def test_errors():
    with pytest.raises(SingularConfigurationError):
        solve_correction(E, [[0, 0, 0, 0], [1, 0, 0, 0], [2, 0, 0, 0]], [0, 0, 0, 1.0])
    with pytest.raises(InvalidInputError):
        solve_correction(E, XS, [0, 0, 1.0, 0])
    with pytest.raises(InvalidInputError):
        solve_correction(E, XS[:2], [0, 0, 0, 1.0])
    with pytest.raises(InvalidInputError):
        perturbation_product(E, XS, [1.0, 0, 0, 0])
    with pytest.raises(UnsupportedStepError):
        solve_correction(euclidean(2), np.zeros((3, 2)), np.zeros(2))


@pytest.mark.parametrize("A", STEPPED, ids=lambda A: A.name)
def test_identity_on_random_instances(A, rng):
    for _ in range(200):
        xs, Z = random_instance(A, rng, 0.1)
        sol = solve_correction(A, xs, Z)
        assert np.max(np.abs(sol.residual)) < 1e-10
        assert sol.ratio <= sol.K + 1e-9
        # independent check against the dense bracket map
        M, _ = dense_solve(A, sol.X, Z)
        lo = A.layer_slice(A.step - 1)
        assert np.allclose(M @ sol.Y[:, lo].ravel(), Z, atol=1e-10)


@pytest.mark.parametrize("A", [E, G4], ids=lambda A: A.name)
def test_bound_on_y_with_size(A, rng):
    for _ in range(50):
        xs, Z = random_instance(A, rng, 0.2)
        sol = solve_correction(A, xs, Z)
        ynorm = np.max(np.linalg.norm(sol.Y, axis=1))
        assert ynorm <= sol.K * np.linalg.norm(Z) / sol.size + 1e-12


@pytest.mark.parametrize("A", STEPPED, ids=lambda A: A.name)
def test_perturbation_word(A, rng):
    for _ in range(50):
        xs, k = random_instance(A, rng, 0.1)
        tr = perturbation_product(A, xs, k)
        assert tr.residual < 1e-12
        assert tr.added_cost <= tr.cost_bound + 1e-12


def test_perturbation_word_exact(rng):
    for A in (E, G4):
        for _ in range(10):
            xs, k = random_instance(A, rng, 0.1)
            sol = solve_correction(A, xs, k)
            assert exact_word_residual(A, xs, sol) == 0


def test_trivial_k_telescopes():
    tr = perturbation_product(E, XS, np.zeros(4))
    assert np.all(tr.betas == 0)
    assert np.allclose(tr.product, XS[-1], atol=1e-15)


def test_worked_word():
    tr = perturbation_product(E, XS, [0, 0, 0, 1.0])
    assert tr.residual < 1e-12


def test_degeneration_trend(rng):
    Z = np.array([0, 0, 0, 1.0])
    peaks = []
    for s in np.geomspace(1, 1e-3, 10):
        xs = np.array([[0, 0, 0, 0], [1, 0, 0, 0], [1 + 1, s, 0, 0]])
        sol = solve_correction(E, xs, Z)
        peaks.append(np.max(np.linalg.norm(sol.Y, axis=1)))
    assert np.all(np.diff(peaks) >= -1e-12)


def test_bracket_system_is_square():
    cols, Minv = bracket_system(G4)
    assert len(cols) == G4.layer_dim(4) and Minv.shape == (1, 1)
    assert correction_constant(E) > 0 and triangle_constant(G4) > 0


def test_triangle_exact_terms_in_heisenberg():
    H = heisenberg()
    E5 = np.zeros((5, 3))
    E5[:, 0] = np.arange(5.0)
    E5[2, 1] = 0.5  # keeps the reduced configuration nondegenerate
    E5[3, 1] = 0.5
    rhs, lhs = modified_triangle_rhs(H, E5, 1)
    assert lhs[0] == lhs[1] and rhs[0] == rhs[1]
    assert lhs[1] <= rhs[0] + 1e-12


def test_triangle_duplicated_slots(rng):
    for ell in (1, 2, 3, 4):
        pts = rng.normal(size=(6, 4))
        pts[ell] = pts[ell - 1]
        try:
            rhs, lhs, terms = modified_triangle_rhs(E, pts[:5], ell, details=True)
        except SingularConfigurationError:
            continue
        assert terms["quotient"] == (0.0, 0.0)
        assert terms["correction"] == (0.0, 0.0)


def test_triangle_on_engel_geodesic(rng):
    checked = 0
    while checked < 100:
        t = np.sort(rng.uniform(-2, 2, 5))
        pts = engel_beta(t)
        ell = int(rng.integers(1, 5))
        try:
            rhs, lhs = modified_triangle_rhs(E, pts, ell)
        except SingularConfigurationError:
            continue
        assert lhs[0] <= rhs[1]
        checked += 1


def test_triangle_errors():
    with pytest.raises(InvalidInputError):
        modified_triangle_rhs(E, np.zeros((4, 4)), 1)
    with pytest.raises(InvalidInputError):
        modified_triangle_rhs(E, np.zeros((5, 4)), 0)
    with pytest.raises(SingularConfigurationError):
        modified_triangle_rhs(E, np.zeros((5, 4)), 1)
