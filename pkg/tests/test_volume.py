import numpy as np
import pytest
from scipy.spatial import ConvexHull

from vortex_lab.dynamics import (DualState, QuadraticLog, Regularizer, StepSchedule, Tsallis,
                                 ftrl_primal, ftrl_step_batch, mwu_step_batch, primal_of_dual)
from vortex_lab.errors import ValidationError
from vortex_lab.games import (BimatrixGame, matching_pennies, path_graph_game, triviality_gap,
                              zero_sum_from)
from vortex_lab.volume import (Ensemble, RegionSpec, convex_hull, det, det_series_coefficients,
                               epsilon_threshold_ftrl, epsilon_threshold_graphical,
                               epsilon_threshold_zero_sum, evolve_ensemble, grid_cloud,
                               growth_rate_bound, hull_measure, in_region,
                               is_strictly_diagonally_dominant, jacobian_ftrl,
                               jacobian_graphical, jacobian_mwu, quadratic_coefficient,
                               rps_constant_step_threshold, second_order_coeff,
                               second_order_coeff_factored, second_order_coeff_ftrl,
                               second_order_coeff_graphical, shadow_distribution)

from conftest import central_jacobian, random_dual, random_simplex, random_zero_sum, trivial_matrix


def variance_form(A, x, y):
    """Var of A_jk - [Ay]_j + [B^T x]_k under x (x) y for B = -A."""
    X = A - (A @ y)[:, None] - (A.T @ x)[None, :]
    w = np.outer(x, y)
    mu = np.sum(w * X)
    return float(np.sum(w * (X - mu) ** 2))


def test_jacobian_mwu_matching_pennies():
    eps = 0.1
    M = jacobian_mwu(matching_pennies(), DualState.zeros((2, 2)), eps).M
    q = eps / 4
    assert np.allclose(M[:2, 2:], [[q, -q], [-q, q]], atol=1e-16)
    assert np.allclose(M[2:, :2], [[-q, q], [q, -q]], atol=1e-16)
    assert np.array_equal(np.diag(M), np.ones(4))


def test_jacobian_mwu_structure(rng):
    g = zero_sum_from(random_zero_sum(rng))
    n, m = g.sizes
    eps = 0.2
    M = jacobian_mwu(g, random_dual(rng, g.sizes), eps).M
    assert np.array_equal(np.diag(M), np.ones(n + m))
    assert np.all(M[:n, :n] == np.eye(n)) and np.all(M[n:, n:] == np.eye(m))
    assert np.allclose(M[:n, n:].sum(axis=1), 0, atol=1e-15)
    assert np.allclose(M[n:, :n].sum(axis=1), 0, atol=1e-15)
    off = M - np.eye(n + m)
    assert np.max(np.abs(off)) <= 2 * eps + 1e-15


def test_jacobian_mwu_finite_difference(rng):
    for _ in range(10):
        g = zero_sum_from(random_zero_sum(rng))
        r = random_dual(rng, g.sizes)
        J = jacobian_mwu(g, r, 0.15).M
        fd = central_jacobian(lambda v: mwu_step_batch(g, v, 0.15), r.vector)
        assert np.max(np.abs(J - fd)) <= 1e-6


def _regs(rng, sizes):
    comps = [QuadraticLog(0.02, 1.0), Tsallis(0.5), QuadraticLog(0.1, 0.3)]
    return tuple(Regularizer([comps[rng.integers(3)] for _ in range(n)]) for n in sizes)


def test_jacobian_ftrl_finite_difference(rng):
    for _ in range(10):
        g = zero_sum_from(random_zero_sum(rng))
        regs = _regs(rng, g.sizes)
        r = random_dual(rng, g.sizes)
        J = jacobian_ftrl(g, r, 0.1, regs).M
        fd = central_jacobian(lambda v: ftrl_step_batch(g, v, 0.1, regs), r.vector)
        assert np.max(np.abs(J - fd)) <= 1e-5
        assert np.array_equal(np.diag(J), np.ones(J.shape[0]))


def test_jacobian_ftrl_entropy_equals_mwu(rng):
    g = zero_sum_from(random_zero_sum(rng))
    regs = tuple(Regularizer.entropy(n) for n in g.sizes)
    r = random_dual(rng, g.sizes)
    assert np.allclose(jacobian_ftrl(g, r, 0.1, regs).M, jacobian_mwu(g, r, 0.1).M, atol=1e-12)


def test_jacobian_graphical(rng):
    A1, A2 = rng.uniform(-1, 1, (2, 3)), rng.uniform(-1, 1, (3, 2))
    g = path_graph_game([A1, A2])
    r = random_dual(rng, g.sizes)
    J = jacobian_graphical(g, r, 0.1).M
    fd = central_jacobian(lambda v: mwu_step_batch(g, v, 0.1), r.vector)
    assert np.max(np.abs(J - fd)) <= 1e-5
    # non-edge block (players 0 and 2) vanishes
    assert np.all(J[:2, 5:] == 0) and np.all(J[5:, :2] == 0)
    with pytest.raises(ValidationError):
        jacobian_graphical(g, r, 0.15)   # d = 2 -> eps < 1/8


def test_jacobian_graphical_single_edge(rng):
    A = rng.uniform(-1, 1, (3, 2))
    g = path_graph_game([A])
    r = random_dual(rng, g.sizes)
    assert np.allclose(jacobian_graphical(g, r, 0.1).M,
                       jacobian_mwu(zero_sum_from(A), r, 0.1).M, atol=1e-15)


def test_second_order_coeff_examples(rng):
    g = matching_pennies()
    assert second_order_coeff(g, [0.5, 0.5], [0.5, 0.5]) == pytest.approx(0.25, abs=1e-15)
    A = trivial_matrix(rng, 3, 4)
    for _ in range(10):
        x, y = random_simplex(rng, 3), random_simplex(rng, 4)
        assert abs(second_order_coeff(zero_sum_from(A), x, y)) <= 1e-10


def test_second_order_forms_agree(rng):
    for _ in range(50):
        n, m = rng.integers(2, 6, 2)
        g = BimatrixGame(rng.uniform(-1, 1, (n, m)), rng.uniform(-1, 1, (n, m)))
        x, y = random_simplex(rng, n), random_simplex(rng, m)
        assert second_order_coeff(g, x, y) == pytest.approx(second_order_coeff_factored(g, x, y),
                                                            abs=1e-12)


def test_second_order_variance_identity(rng):
    for _ in range(100):
        A = random_zero_sum(rng)
        x, y = random_simplex(rng, A.shape[0]), random_simplex(rng, A.shape[1])
        assert abs(second_order_coeff(zero_sum_from(A), x, y) - variance_form(A, x, y)) <= 1e-10


def test_cauchy_schwarz_lower_bound(rng):
    for _ in range(200):
        A = random_zero_sum(rng)
        n, m = A.shape
        delta = rng.uniform(0.01, 1 / max(n, m))
        x, y = random_simplex(rng, n, delta), random_simplex(rng, m, delta)
        c = triviality_gap(A)
        assert second_order_coeff(zero_sum_from(A), x, y) >= delta ** 2 * c ** 2 / 4 - 1e-9


def test_shadow_distribution(rng):
    x = random_simplex(rng, 4)
    assert np.allclose(shadow_distribution(x, Regularizer.entropy(4)), x, atol=1e-15)
    quad = Regularizer.uniform(QuadraticLog(c=1e-300, a=1.0), 4)
    assert np.allclose(shadow_distribution(x, quad), 0.25, atol=1e-12)
    s = shadow_distribution(x, Regularizer.uniform(Tsallis(0.4), 4))
    assert np.all(s > 0) and s.sum() == pytest.approx(1.0, abs=1e-15)


def test_second_order_ftrl(rng):
    g = zero_sum_from(random_zero_sum(rng))
    x, y = random_simplex(rng, g.n), random_simplex(rng, g.m)
    ent = tuple(Regularizer.entropy(n) for n in g.sizes)
    assert second_order_coeff_ftrl(g, x, y, ent) == pytest.approx(second_order_coeff(g, x, y),
                                                                  abs=1e-14)
    for _ in range(10):
        g = zero_sum_from(random_zero_sum(rng))
        regs = _regs(rng, g.sizes)
        r = random_dual(rng, g.sizes)
        x, y = ftrl_primal(g, r, regs)
        C = second_order_coeff_ftrl(g, x, y, regs)
        assert C >= -1e-9
        fit = quadratic_coefficient(lambda e: det(jacobian_ftrl(g, r, e, regs).M))
        assert abs(fit - C) <= 1e-6


def test_det_examples(rng):
    assert det(np.eye(5)) == 1.0
    eps = 0.1
    d = det(jacobian_mwu(matching_pennies(), DualState.zeros((2, 2)), eps).M)
    assert abs(d - 1.0025) <= 5 * eps ** 4
    g = zero_sum_from(random_zero_sum(rng))
    for e in (0.01, 0.1, 0.2, 0.249):
        assert det(jacobian_mwu(g, random_dual(rng, g.sizes), e).M) > 0


def test_quadratic_fit_and_odd_powers(rng):
    g = zero_sum_from(random_zero_sum(rng))
    r = random_dual(rng, g.sizes)
    x, y = primal_of_dual(r)
    f = lambda e: det(jacobian_mwu(g, r, e).M)
    assert abs(quadratic_coefficient(f) - second_order_coeff(g, x, y)) <= 1e-6
    odd = det_series_coefficients(f, eps0=1e-2, even=False, points=4)
    assert abs(odd[0]) <= 1e-6 and abs(odd[2]) <= 1e-3


def test_graphical_additivity(rng):
    g = path_graph_game([rng.uniform(-1, 1, (2, 3)), rng.uniform(-1, 1, (3, 2))])
    r = random_dual(rng, g.sizes)
    fit = quadratic_coefficient(lambda e: det(jacobian_graphical(g, r, e).M))
    assert abs(fit - second_order_coeff_graphical(g, primal_of_dual(r))) <= 1e-8


def test_thresholds():
    assert epsilon_threshold_zero_sum(0.1, 2, 2, 1.0) == pytest.approx(0.00125)
    assert epsilon_threshold_zero_sum(0.5, 2, 2, 1.0) == pytest.approx(1 / 512)
    assert epsilon_threshold_graphical(4, 0.25) == pytest.approx(1 / 262144)
    assert epsilon_threshold_graphical(4, 0.0) == 0.0
    assert epsilon_threshold_graphical(5, 0.25) < epsilon_threshold_graphical(4, 0.25)
    ds = np.linspace(0.01, 0.5, 30)
    v = [epsilon_threshold_zero_sum(d, 2, 3, 0.7) for d in ds]
    assert np.all(np.diff(v) >= 0)
    with pytest.raises(ValidationError):
        epsilon_threshold_zero_sum(0.0, 2, 2, 1.0)


def test_growth_rate_bound():
    assert growth_rate_bound("zero_sum", 0.00125, delta=0.1, cA=1) - 1 == pytest.approx(1.953125e-9)
    assert growth_rate_bound("zero_sum", 0.0, delta=0.1, cA=1) == 1.0
    assert growth_rate_bound("graphical", 1e-3, Cbar=0.25) - 1 == pytest.approx(1.25e-7)
    with pytest.raises(ValidationError):
        growth_rate_bound("nope", 0.1)


def test_epsilon_threshold_ftrl_entropy():
    regs = tuple(Regularizer.entropy(2) for _ in range(2))
    thr, terms, inner = epsilon_threshold_ftrl(regs, 0.2, 2, 2, 1.0)
    # entropy: shadow = x, so Delta is the smallest probability, i.e. delta
    assert inner["Delta"] == pytest.approx(0.2, abs=1e-12)
    assert inner["H_bar"] == pytest.approx(1.0, abs=1e-12)
    assert thr == min(terms.values()) > 0


def test_rps_constant_step_threshold():
    assert rps_constant_step_threshold(9, 0) == 1 / 2592
    assert rps_constant_step_threshold(5, 0.25) == pytest.approx(29.25 / (2 * 81 ** 4))


def test_diagonal_dominance(rng):
    assert is_strictly_diagonally_dominant(np.eye(3))
    for _ in range(20):
        g = zero_sum_from(random_zero_sum(rng))
        assert is_strictly_diagonally_dominant(jacobian_mwu(g, random_dual(rng, g.sizes), 0.2))
    # beyond the bound the check must agree with direct row sums
    g = zero_sum_from([[1, -1], [-1, 1]])
    for eps in (0.3, 1.5, 3.0):
        M = jacobian_mwu(g, DualState.of([0.4, 0], [0, 0.2]), eps).M
        rows = np.sum(np.abs(M), axis=1) - 1
        assert is_strictly_diagonally_dominant(M) == bool(np.all(rows < 1))
    assert not is_strictly_diagonally_dominant(jacobian_mwu(g, DualState.zeros((2, 2)), 3.0))
    assert not is_strictly_diagonally_dominant([[1, 0.6, 0.5], [0, 1, 0], [0, 0, 1]])


def test_in_region():
    assert in_region(DualState.zeros((2, 2)), RegionSpec(0.4))
    assert not in_region(DualState.of([5, 0], [0, 0]), RegionSpec(0.1))
    assert in_region(DualState.of([np.log(3), 0], [0, 0]), RegionSpec(0.25))
    with pytest.raises(ValidationError):
        RegionSpec(0.0)


def test_evolve_single_point(rng):
    g = zero_sum_from(random_zero_sum(rng))
    r = random_dual(rng, g.sizes)
    ens = evolve_ensemble(g, Ensemble.from_states([r]), StepSchedule.constant(0.1), 1)
    assert ens.multipliers[0] == pytest.approx(det(jacobian_mwu(g, r, 0.1).M), rel=1e-15)
    assert ens.t == 1


def test_evolve_snapshots_and_validation():
    g = matching_pennies()
    ens = Ensemble.from_points(np.zeros((3, 4)) + np.arange(3)[:, None] * 0.01, (2, 2))
    out = evolve_ensemble(g, ens, StepSchedule.constant(0.1), 10, snapshot_times=(0, 5, 10))
    assert [t for t, _ in out.snapshots] == [0, 5, 10]
    assert out.snapshots[0][1].shape == (3, 2)
    with pytest.raises(ValidationError):
        evolve_ensemble(g, ens, StepSchedule.constant(0.1), 10, snapshot_times=(5, 0))
    with pytest.raises(ValidationError):
        Ensemble(np.array([0, 0]), np.zeros((2, 4)), (2, 2))


def test_evolve_ftrl_multipliers_positive(rng):
    g = zero_sum_from(random_zero_sum(rng, 2, 3))
    regs = _regs(rng, g.sizes)
    pts = np.stack([random_dual(rng, g.sizes).vector for _ in range(5)])
    out = evolve_ensemble(g, Ensemble.from_points(pts, g.sizes), StepSchedule.constant(0.2), 50,
                          dynamic="ftrl", regs=regs)
    assert np.all(out.multipliers > 0)


def test_hull_measure_examples(rng):
    assert hull_measure([[0, 0], [1, 0], [1, 1], [0, 1]]) == pytest.approx(1.0)
    assert hull_measure([[0, 0], [1, 1], [2, 2], [3, 3]]) == 0.0
    assert hull_measure([[0, 0], [1, 1]]) == 0.0
    pts = rng.normal(size=(200, 2))
    a = hull_measure(pts)
    assert hull_measure(pts[rng.permutation(200)]) == pytest.approx(a, rel=1e-14)
    assert a == pytest.approx(ConvexHull(pts).volume, rel=1e-12)
    assert len(convex_hull(pts)) == len(ConvexHull(pts).vertices)


def test_grid_cloud():
    G = grid_cloud([0.2, 0.15], 0.05, 41)
    assert G.shape == (1681, 2)
    assert np.allclose(G.min(axis=0), [0.15, 0.10]) and np.allclose(G.max(axis=0), [0.25, 0.20])
