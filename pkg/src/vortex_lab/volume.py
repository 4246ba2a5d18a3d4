"""One-step Jacobians, their determinants and the volume bookkeeping built on them.

For a step ``r' = r + eps * E(r)`` the Jacobian is ``M = I + eps * dE/dr``.
Within-player blocks of ``dE/dr`` vanish, so ``M`` has unit diagonal and
only cross-player blocks; ``det(M) = 1 + C * eps^2 + O(eps^3)``.  For
bimatrix games all odd powers vanish.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import (DualState, _bind_schedules, _check_regs, _eps_at,
                       _split, ea_of_dual_batch, default_regularizers, ftrl_response,
                       make_stepper, primal_of_dual, softmax)
from .errors import NumericError, ValidationError
from .games import BimatrixGame, GraphicalGame


@dataclass(frozen=True)
class JacobianStep:
    M: np.ndarray
    eps: object
    r: np.ndarray

    @property
    def size(self):
        return self.M.shape[0]


def _payoff_pairs(game):
    """``(i, l, P)`` for every ordered adjacent pair; ``P`` is i's payoff matrix vs l."""
    if isinstance(game, BimatrixGame):
        return [(0, 1, game.A), (1, 0, game.B.T)]
    pairs = []
    for i1, i2, A in game.edges:
        pairs.append((i1, i2, A))
        pairs.append((i2, i1, -A.T))
    return pairs


def _jacobian_batch(game, weights, eps):
    """Jacobians for a batch given per-player weight arrays ``(N, n_i)``.

    ``weights`` are the unnormalized shadow weights (the mixed strategy itself
    for MWU, ``1 / h''(x)`` for FTRL).  Row block i is scaled by player i's
    step size.
    """
    sizes = tuple(game.sizes)
    off = np.concatenate([[0], np.cumsum(sizes)])
    N = weights[0].shape[0]
    d = off[-1]
    eps_players = [float(eps)] * len(sizes) if np.ndim(eps) == 0 else [float(e) for e in eps]
    J = np.zeros((N, d, d))
    J[:, np.arange(d), np.arange(d)] = 1.0
    shadows = [w / w.sum(axis=-1, keepdims=True) for w in weights]
    for i, l, P in _payoff_pairs(game):
        mean = shadows[l] @ P.T  # (N, n_i)
        block = weights[l][:, None, :] * (P[None, :, :] - mean[:, :, None])
        J[:, off[i]:off[i + 1], off[l]:off[l + 1]] += eps_players[i] * block
    return J


def _as_batch(r):
    R = r.vector if isinstance(r, DualState) else np.asarray(r, float)
    return R.reshape(1, -1) if R.ndim == 1 else R


def mwu_jacobian_batch(game, R, eps):
    primals = [softmax(b) for b in _split(R, game.sizes)]
    return _jacobian_batch(game, primals, eps)


def ftrl_weights(game, R, regs):
    weights = []
    for b, reg in zip(_split(R, game.sizes), regs):
        x = ftrl_response(b, reg)
        h2 = reg.d2(x)
        if np.any(~(h2 > 0)):
            raise ValidationError("regularizer has non-positive second derivative at an iterate",
                                  "regularizer")
        weights.append(1.0 / h2)
    return weights


def ftrl_jacobian_batch(game, R, eps, regs):
    return _jacobian_batch(game, ftrl_weights(game, R, regs), eps)


def _check_eps(eps):
    if np.any(np.asarray(eps, float) < 0):
        raise ValidationError("eps must be non-negative", "eps")


def jacobian_mwu(game, r, eps):
    """``M = I + eps * dE/dr`` for MWU at dual point ``r``."""
    _check_eps(eps)
    r.check(game)
    M = mwu_jacobian_batch(game, _as_batch(r), eps)[0]
    return JacobianStep(M, eps, r.vector)


def jacobian_ftrl(game, r, eps, regs):
    _check_eps(eps)
    r.check(game)
    _check_regs(game, regs)
    M = ftrl_jacobian_batch(game, _as_batch(r), eps, regs)[0]
    return JacobianStep(M, eps, r.vector)


def jacobian_graphical(game, r, eps):
    if not isinstance(game, GraphicalGame):
        raise ValidationError("jacobian_graphical needs a GraphicalGame", "game")
    _check_eps(eps)
    bound = 1.0 / (4 * game.max_degree)
    if np.max(eps) >= bound:
        raise ValidationError(f"eps must be below 1/(4*max_degree) = {bound:g}", "eps")
    r.check(game)
    M = mwu_jacobian_batch(game, _as_batch(r), eps)[0]
    return JacobianStep(M, eps, r.vector)


def det(M):
    """Determinant by LU with partial pivoting; accepts batches ``(..., d, d)``."""
    if isinstance(M, JacobianStep):
        M = M.M
    return np.linalg.det(np.asarray(M, float))


# --- second-order coefficient -------------------------------------------------

def _check_interior(v, name):
    v = np.asarray(v, float)
    if np.any(v <= 0):
        raise ValidationError(f"{name} must be strictly positive", name)
    return v


def second_order_coeff(game, x, y):
    """Coefficient of eps^2 in det(M) for a bimatrix game at primal point (x, y).

    Expanded four-term form; depends on (x, y) only.
    """
    x = _check_interior(x, "x")
    y = _check_interior(y, "y")
    A, B = game.A, game.B
    Ay = A @ y
    Btx = B.T @ x
    return float(
        -np.einsum("j,k,jk->", x, y, A * B)
        + np.sum(x * Ay * (B @ y))
        + np.sum(y * Btx * (x @ A))
        - np.dot(x, Ay) * np.dot(y, Btx)
    )


def second_order_coeff_factored(game, x, y):
    """Same coefficient from the unexpanded product form (cross-check)."""
    A, B = game.A, game.B
    Da = A - (A @ y)[:, None]
    Db = B - (B.T @ x)[None, :]
    return float(-np.einsum("j,k,jk->", x, y, Da * Db))


def shadow_distribution(x, reg):
    x = _check_interior(x, "x")
    h2 = reg.d2(x)
    if np.any(~(h2 > 0)):
        raise ValidationError("regularizer has non-positive second derivative", "regularizer")
    w = 1.0 / h2
    return w / w.sum()


def second_order_coeff_ftrl(game, x, y, regs):
    x = _check_interior(x, "x")
    y = _check_interior(y, "y")
    wx = 1.0 / regs[0].d2(x)
    wy = 1.0 / regs[1].d2(y)
    return float(wx.sum() * wy.sum() * second_order_coeff(game, wx / wx.sum(), wy / wy.sum()))


def second_order_coeff_graphical(game, primals):
    """Sum over edges of the pairwise zero-sum coefficients."""
    total = 0.0
    for idx, (i1, i2, A) in enumerate(game.edges):
        total += second_order_coeff(game.edge_game(idx), primals[i1], primals[i2])
    return total


def det_series_coefficients(det_fn, eps0=1e-3, even=True, points=3):
    """Fit ``det(eps) - 1`` by a polynomial without constant term.

    Samples at ``eps0 * 2**i``.  With ``even=True`` the basis is
    eps^2, eps^4, ...; otherwise eps, eps^2, ...  Returns the coefficients in
    basis order.
    """
    eps = eps0 * 2.0 ** np.arange(points)
    powers = 2 * np.arange(1, points + 1) if even else np.arange(1, points + 1)
    # scale columns by eps0**k so the system is well conditioned
    V = (eps[:, None] / eps0) ** powers[None, :]
    rhs = np.array([det_fn(e) - 1.0 for e in eps])
    coef = np.linalg.solve(V, rhs)
    return coef / eps0 ** powers


def quadratic_coefficient(det_fn, eps0=1e-3):
    """eps^2 coefficient via the three-point even fit at (eps0, 2 eps0, 4 eps0)."""
    return float(det_series_coefficients(det_fn, eps0, even=True, points=3)[0])


# --- thresholds ---------------------------------------------------------------

def epsilon_threshold_zero_sum(delta, n, m, cA):
    if min(delta, n, m, cA) <= 0:
        raise ValidationError("all arguments must be positive")
    return min(1.0 / (32.0 * n * n * m * m), delta * delta * cA * cA / 8.0)


def epsilon_threshold_graphical(n_total, Cbar):
    if n_total < 2 or Cbar < 0:
        raise ValidationError("need n_total >= 2 and Cbar >= 0")
    return min(1.0 / (64.0 * n_total ** 6), Cbar * Cbar / 8.0)


def growth_rate_bound(kind, eps, delta=None, cA=None, Cbar=None, Delta=None):
    """Guaranteed per-step volume factor ``1 + coefficient * eps^2``.

    kind: ``"zero_sum"`` (needs delta, cA), ``"graphical"`` (Cbar) or
    ``"ftrl"`` (Delta, cA).
    """
    if kind == "zero_sum":
        coeff = delta * delta * cA * cA / 8.0
    elif kind == "graphical":
        coeff = Cbar / 2.0
    elif kind == "ftrl":
        coeff = Delta * Delta * cA * cA / 8.0
    else:
        raise ValidationError(f"unknown bound kind {kind!r}", "kind")
    return 1.0 + coeff * eps * eps


def _simplex_grid(n, delta, resolution):
    """Grid points of the simplex with step ``resolution`` and every entry >= delta."""
    steps = int(round(1.0 / resolution))
    lo = int(math.ceil(delta * steps - 1e-9))
    pts = []
    for head in itertools.product(range(lo, steps + 1), repeat=n - 1):
        last = steps - sum(head)
        if last >= lo:
            pts.append(head + (last,))
    return np.array(pts, float) / steps


def ftrl_region_constants(regs, delta, resolution=0.01, max_points=200_000):
    """Grid estimates of the FTRL region constants over primal points >= delta.

    Returns ``H_bar`` (largest total shadow weight), ``Delta`` (smallest
    shadow probability) and ``min_h2`` (smallest h'' on [delta/2, 1]).
    The grid is coarsened when a player has too many strategies for the
    requested resolution; the estimate is then reported with the resolution
    actually used.
    """
    if not 0 < delta < 1.0 / max(r.n for r in regs):
        raise ValidationError("delta must lie in (0, 1/max strategies)", "delta")
    H_bar, Delta, used = 0.0, math.inf, resolution
    for reg in regs:
        res = resolution
        while math.comb(int(round(1 / res)) + reg.n - 1, reg.n - 1) > max_points:
            res *= 2
        used = max(used, res)
        X = _simplex_grid(reg.n, delta, res)
        if X.size == 0:
            X = np.full((1, reg.n), 1.0 / reg.n)
        w = 1.0 / reg.d2(X)
        H_bar = max(H_bar, float(w.sum(axis=1).max()))
        Delta = min(Delta, float((w / w.sum(axis=1, keepdims=True)).min()))
    z = np.linspace(delta / 2, 1.0, 2001)
    min_h2 = min(float(np.min(c.d2(z))) for reg in regs for c in reg.components)
    return {"H_bar": H_bar, "Delta": Delta, "min_h2": min_h2, "resolution": used}


def epsilon_threshold_ftrl(regs, delta, n, m, cA, resolution=0.01):
    """Constant-step bound for FTRL in zero-sum games, term by term.

    Uses grid estimates of the region constants (see ``ftrl_region_constants``);
    the overall threshold is the minimum over all terms and both players.
    """
    inner = ftrl_region_constants(regs, delta, resolution)
    half = ftrl_region_constants(regs, delta / 2, resolution)
    H, Dl = inner["H_bar"], inner["Delta"]
    terms = {
        "higher_order": 1.0 / (2.0 * max(2.0, H) ** 4 * n * n * m * m),
        "gap": Dl * Dl * cA * cA / 8.0,
        "injective": 1.0 / (4.0 * half["H_bar"]),
        "interior": delta / 9.0 * inner["min_h2"],
    }
    return min(terms.values()), terms, inner


def rps_constant_step_threshold(C1, C2):
    """RPS constant-step bound ``min(1/2592, (6C1 - 3C2) / (2 (1 + 4C1/C2)^4))``."""
    if C2 <= 0:
        return 1.0 / 2592.0
    return min(1.0 / 2592.0, (6 * C1 - 3 * C2) / (2.0 * (1.0 + 4.0 * C1 / C2) ** 4))


def is_strictly_diagonally_dominant(M):
    if isinstance(M, JacobianStep):
        M = M.M
    M = np.asarray(M, float)
    diag = np.abs(np.diagonal(M, axis1=-2, axis2=-1))
    off = np.sum(np.abs(M), axis=-1) - diag
    return bool(np.all(diag > off))


# --- regions ------------------------------------------------------------------

@dataclass(frozen=True)
class RegionSpec:
    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValidationError("delta must be positive", "delta")


def in_region(r, spec):
    """Closed region: every probability of G(r) is at least delta."""
    return bool(min(float(np.min(x)) for x in primal_of_dual(r)) >= spec.delta)


def in_region_batch(game, R, delta):
    mins = [softmax(b).min(axis=-1) for b in _split(np.atleast_2d(R), game.sizes)]
    return np.min(np.stack(mins, axis=-1), axis=-1) >= delta


# --- ensembles ----------------------------------------------------------------

@dataclass
class Ensemble:
    """Point cloud in dual space with per-point accumulated det multipliers."""

    ids: np.ndarray
    points: np.ndarray  # (N, d)
    sizes: tuple
    multipliers: np.ndarray = None
    snapshots: list = field(default_factory=list)  # [(t, coords (N, k))]
    t: int = 0

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.points = np.atleast_2d(np.asarray(self.points, float))
        if len(np.unique(self.ids)) != len(self.ids):
            raise ValidationError("ensemble ids must be unique", "ids")
        if self.points.shape != (len(self.ids), sum(self.sizes)):
            raise ValidationError("ensemble points do not match ids/sizes", "points")
        if self.multipliers is None:
            self.multipliers = np.ones(len(self.ids))

    @classmethod
    def from_points(cls, points, sizes):
        points = np.atleast_2d(np.asarray(points, float))
        return cls(np.arange(len(points)), points, tuple(sizes))

    @classmethod
    def from_states(cls, states):
        sizes = states[0].sizes
        return cls.from_points(np.array([s.vector for s in states]), sizes)

    def __len__(self):
        return len(self.ids)

    def state(self, i):
        return DualState.from_vector(self.points[i], self.sizes)


def snapshot_coords(game, R):
    """Reduced (Eshel-Akin) coordinates for 2x2 games, raw dual coordinates otherwise."""
    if tuple(game.sizes) == (2, 2):
        return ea_of_dual_batch(R, game.sizes)
    return np.array(R, copy=True)


def evolve_ensemble(game, ensemble, schedule, T, dynamic="mwu", snapshot_times=(), regs=None,
                    monitor=None):
    """Advance every point ``T`` steps, multiplying in det(M) at each pre-step point.

    ``monitor(t, R_pre, dets)`` is called after each step (t = 1..T) with the
    pre-step points and their determinants.  Returns a new Ensemble; snapshot
    times are relative to the input ensemble's clock.
    """
    T = int(T)
    if T < 0:
        raise ValidationError("T must be non-negative", "T")
    snaps = [int(s) for s in snapshot_times]
    if snaps != sorted(snaps) or (snaps and (snaps[0] < 0 or snaps[-1] > T)):
        raise ValidationError("snapshot times must be sorted and within [0, T]", "snapshot_times")
    if tuple(ensemble.sizes) != tuple(game.sizes):
        raise ValidationError("ensemble sizes do not match game", "ensemble")
    schedule = _bind_schedules(game, schedule)
    step = make_stepper(game, dynamic, regs)
    if dynamic == "ftrl":
        regs = default_regularizers(game) if regs is None else tuple(regs)
        jac = lambda R, e: ftrl_jacobian_batch(game, R, e, regs)
    else:
        jac = lambda R, e: mwu_jacobian_batch(game, R, e)

    R = ensemble.points.copy()
    mult = ensemble.multipliers.copy()
    out_snaps = list(ensemble.snapshots)
    want = set(snaps)
    if 0 in want:
        out_snaps.append((ensemble.t, snapshot_coords(game, R)))
    for t in range(1, T + 1):
        eps = _eps_at(schedule, ensemble.t + t)
        try:
            dets = det(jac(R, eps))
            R_next = step(R, eps)
        except NumericError as exc:
            raise NumericError(f"step {t}: {exc}", step=t, **exc.details) from exc
        bad = ~np.isfinite(R_next).all(axis=1) | ~np.isfinite(dets)
        if np.any(bad):
            raise NumericError(f"non-finite state at step {t}", step=t,
                               point_ids=ensemble.ids[bad].tolist())
        if monitor is not None:
            monitor(ensemble.t + t, R, dets)
        mult *= dets
        R = R_next
        if t in want:
            out_snaps.append((ensemble.t + t, snapshot_coords(game, R)))
    return replace(ensemble, points=R, multipliers=mult, snapshots=out_snaps, t=ensemble.t + T)


def grid_cloud(center, radius, resolution):
    """Filled ``resolution``-per-axis grid over the l-inf ball around ``center``."""
    center = np.asarray(center, float)
    axes = [np.linspace(c - radius, c + radius, resolution) for c in center]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in mesh], axis=1)


def ea_cloud_to_dual(F, sizes):
    """Lift reduced coordinates to dual points with the last coordinate of each block 0."""
    F = np.atleast_2d(np.asarray(F, float))
    parts, col = [], 0
    for n in sizes:
        parts.append(F[:, col:col + n - 1])
        parts.append(np.zeros((len(F), 1)))
        col += n - 1
    return np.concatenate(parts, axis=1)


# --- convex hull --------------------------------------------------------------

def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points):
    """Andrew's monotone chain; returns hull vertices counter-clockwise."""
    pts = sorted(set(map(tuple, np.asarray(points, float).tolist())))
    if len(pts) <= 2:
        return pts
    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def hull_measure(points_2d):
    """Area of the convex hull; 0 for fewer than three non-collinear points."""
    hull = convex_hull(points_2d)
    if len(hull) < 3:
        return 0.0
    area = 0.0
    for (x0, y0), (x1, y1) in zip(hull, hull[1:] + hull[:1]):
        area += x0 * y1 - x1 * y0
    return abs(area) / 2.0
