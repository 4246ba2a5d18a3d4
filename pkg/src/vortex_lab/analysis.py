"""Chaos measurements and closed-form specializations.

Covers the boundary-time root (exponential volume lower bound against the
polynomial hyper-box upper bound), Lyapunov time and divergence curves,
admissibility of diminishing step sizes, generalized RPS coefficients and
regions, and the reduced 2x2 analysis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import StepSchedule, make_stepper
from .errors import NumericError, ValidationError


# --- boundary time ------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryTime:
    """Root of the boundary-time equation with its bracket.

    ``lhs_log``/``rhs_log`` are both sides at ``t_star`` in log space.
    """

    t_star: float
    lhs_log: float
    rhs_log: float
    lo: float
    hi: float
    log_growth: float
    log_vol0: float
    dim: int
    eps: float
    gamma: float

    def gap(self, t):
        """log LHS - log RHS at time t."""
        return t * self.log_growth + self.log_vol0 - self.dim * math.log(2.0 * self.eps * t + self.gamma)

    def certificate(self, rel=1e-6):
        """True when LHS < RHS just before the root and LHS > RHS just after."""
        return self.gap(self.t_star * (1 - rel)) < 0 < self.gap(self.t_star * (1 + rel))


def boundary_time(vol0, delta, cA, eps, n, m, gamma, rtol=1e-9):
    """First positive root of  growth^t * vol0 = (2 eps t + gamma)^(n+m).

    ``growth = 1 + delta^2 cA^2 eps^2 / 8``.  Both sides are compared in log
    space; ``vol0 <= gamma^(n+m)`` is required (equality tolerated at
    rounding level).
    """
    if vol0 <= 0 or gamma <= 0 or eps <= 0 or delta <= 0 or cA <= 0:
        raise ValidationError("vol0, gamma, eps, delta and cA must be positive")
    d = n + m
    log_growth = math.log1p(delta * delta * cA * cA * eps * eps / 8.0)
    log_vol0 = math.log(vol0)

    def gap(t):
        return t * log_growth + log_vol0 - d * math.log(2.0 * eps * t + gamma)

    if gap(0.0) > 1e-12 * max(1.0, abs(log_vol0)):
        raise ValidationError("initial volume exceeds the enclosing box gamma^(n+m)", "vol0")
    lo = 1.0
    if gap(lo) >= 0:
        raise ValidationError("LHS already exceeds RHS after one step; parameters inconsistent", "eps")
    hi = 2.0
    while gap(hi) <= 0:
        lo = hi
        hi *= 2.0
        if hi > 2.0 ** 60:
            raise NumericError("no sign change within 2^60 steps", lo=lo)
    while hi - lo > rtol * lo:
        mid = 0.5 * (lo + hi)
        if gap(mid) <= 0:
            lo = mid
        else:
            hi = mid
    t_star = 0.5 * (lo + hi)
    return BoundaryTime(t_star, t_star * log_growth + log_vol0,
                        d * math.log(2.0 * eps * t_star + gamma), lo, hi,
                        log_growth, log_vol0, d, eps, gamma)


# --- Lyapunov time ------------------------------------------------------------

@dataclass(frozen=True)
class DivergenceCurve:
    t: np.ndarray
    distance: np.ndarray


@dataclass(frozen=True)
class LyapunovResult:
    steps: int | None
    diverged: bool
    horizon: int
    final_distance: float


def _companions(r0, radius):
    base = r0.vector
    d = base.size
    offsets = np.concatenate([np.eye(d), -np.eye(d)]) * radius
    return np.vstack([base, base + offsets])


def _max_distance(R):
    return float(np.max(np.abs(R[1:] - R[0]))) if len(R) > 1 else 0.0


def divergence_curve(game, r0, perturb_radius, eps, dynamic="mwu", T=1000, regs=None):
    """Largest l-inf distance between the base trajectory and its 2d axis companions, per step."""
    if perturb_radius < 0:
        raise ValidationError("perturb_radius must be non-negative", "perturb_radius")
    r0.check(game)
    step = make_stepper(game, dynamic, regs)
    R = _companions(r0, perturb_radius)
    dist = np.empty(T + 1)
    dist[0] = _max_distance(R)
    for t in range(1, T + 1):
        R = step(R, eps)
        if not np.all(np.isfinite(R)):
            raise NumericError(f"non-finite state at step {t}", step=t)
        dist[t] = _max_distance(R)
    return DivergenceCurve(np.arange(T + 1), dist)


def lyapunov_time(game, r0, perturb_radius, eps, dynamic="mwu", factor=2.0, horizon=10**7,
                  regs=None):
    """Steps until some axis-perturbed companion is ``factor * radius`` away from the base run.

    Returns a ``LyapunovResult``; ``diverged`` is False when the horizon is
    reached first.
    """
    if perturb_radius <= 0:
        raise ValidationError("perturb_radius must be positive", "perturb_radius")
    if factor < 2:
        raise ValidationError("factor must be at least 2", "factor")
    r0.check(game)
    step = make_stepper(game, dynamic, regs)
    R = _companions(r0, perturb_radius)
    threshold = factor * perturb_radius
    dist = _max_distance(R)
    for t in range(1, int(horizon) + 1):
        R = step(R, eps)
        dist = _max_distance(R)
        if dist >= threshold:
            return LyapunovResult(t, True, int(horizon), dist)
    return LyapunovResult(None, False, int(horizon), dist)


# --- diminishing step sizes ---------------------------------------------------

def diminishing_threshold(kind, **params):
    """Right-hand side of the limsup condition on sum(eps_t^2) / log t."""
    if kind == "zero_sum":
        return 16.0 * (params["n"] + params["m"]) / (params["delta"] ** 2 * params["cA"] ** 2)
    if kind == "ftrl":
        return 16.0 * (params["n"] + params["m"]) / (params["Delta"] ** 2 * params["cA"] ** 2)
    if kind == "graphical":
        return 4.0 * params["n_total"] / params["Cbar"]
    if kind == "rps":
        c = rps_coefficients(params["P"], params["Q"])
        return 8.0 * (1 + 4 * c.C1 / c.C2) ** 4 / (2 * c.C1 - c.C2)
    if kind == "rps_kappa_delta":
        c = rps_coefficients(params["P"], params["Q"])
        return 12.0 * (1 + 4 * c.C1 / c.C2) ** 2 / (c.C2 * params["kappa"] * params["delta"] ** 2)
    raise ValidationError(f"unknown admissibility kind {kind!r}", "kind")


def diminishing_admissible(kind, schedule, **params):
    """Check the limsup condition analytically for ``eps_t = min(c0, c1/sqrt(t))``.

    For that family ``sum_{tau<=t} eps_tau^2 ~ c1^2 log t``, so the condition
    reduces to ``c1^2 > threshold``.  Returns ``(admissible, margin)``.
    """
    if not isinstance(schedule, StepSchedule) or schedule.kind != "diminishing":
        raise ValidationError("analytic check only covers eps_t = min(c0, c1/sqrt(t)); "
                              "sum eps_t^2 numerically over a finite horizon instead", "schedule")
    margin = schedule.c1 ** 2 - diminishing_threshold(kind, **params)
    return margin > 0, margin


# --- generalized Rock-Paper-Scissors ------------------------------------------

@dataclass(frozen=True)
class RpsCoefficients:
    C1: float
    C2: float


def rps_coefficients(P, Q):
    if P < 0 or Q < 0 or (P == 0 and Q == 0):
        raise ValidationError("need P, Q >= 0, not both zero")
    return RpsCoefficients(2 * P * P + 2 * Q * Q + 5 * P * Q, (P - Q) ** 2)


def rps_threshold(r):
    """``C2 / (2 C1 + C2)`` as a function of ``r = Q / P``."""
    if r < 0:
        raise ValidationError("r must be non-negative", "r")
    return (1 - r) ** 2 / (5 + 8 * r + 5 * r * r)


def rps_ratio_bound(P, Q):
    """``C2 / (2 C1)``, the ratio level used by the region conditions."""
    c = rps_coefficients(P, Q)
    return c.C2 / (2 * c.C1)


def rps_second_order(p, q, P, Q):
    """Closed-form eps^2 coefficient of det(M) for RPS at dual point (p, q)."""
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    a, b, c = np.exp(p - p.max())
    d, e, f = np.exp(q - q.max())
    co = rps_coefficients(P, Q)
    num = (co.C1 * (a*b*d*f + a*b*e*f + a*c*d*e + a*c*e*f + b*c*d*e + b*c*d*f)
           - co.C2 * (a*b*d*e + a*c*d*f + b*c*e*f))
    return float(num / ((a + b + c) ** 2 * (d + e + f) ** 2))


def _ratios(v):
    v = np.asarray(v, float)
    r = np.array([v[0] / v[1], v[1] / v[2], v[2] / v[0]])
    return np.concatenate([r, 1.0 / r])


def rps_in_W(x, y, P, Q):
    """True when neither strategy vector has a pairwise ratio below C2/(2 C1)."""
    level = rps_ratio_bound(P, Q)
    return bool(np.all(_ratios(x) >= level) and np.all(_ratios(y) >= level))


def rps_in_W_kappa_delta(x, y, P, Q, kappa, delta):
    level = rps_ratio_bound(P, Q) + kappa
    first = np.all(_ratios(x) >= level) and np.sum(np.asarray(y) >= delta) >= 2
    second = np.all(_ratios(y) >= level) and np.sum(np.asarray(x) >= delta) >= 2
    return bool(first or second)


def rps_lower_bound_in_W(P, Q):
    """Lower bound ``(6C1 - 3C2) / (1 + 4C1/C2)^4`` on C inside W.

    Degenerate for P == Q (C2 = 0, where W is everything and the bound
    trivializes); returns +inf in that case.
    """
    c = rps_coefficients(P, Q)
    if c.C2 == 0:
        return math.inf
    return (6 * c.C1 - 3 * c.C2) / (1 + 4 * c.C1 / c.C2) ** 4


# --- 2x2 games ----------------------------------------------------------------

def twobytwo_volume_sign(R1, R2, R3, R4):
    s = -(R1 + R2) * (R3 + R4)
    if s > 0:
        return "increasing"
    if s < 0:
        return "decreasing"
    return "preserved"


def _sigma(z):
    """``e^z / (1 + e^z)^2``, the derivative of the logistic function."""
    e = math.exp(-abs(z))
    return e / (1.0 + e) ** 2


def twobytwo_jacobian(R1, R2, R3, R4, f1, g1, eps):
    return np.array([[1.0, -eps * (R1 + R2) * _sigma(g1)],
                     [-eps * (R3 + R4) * _sigma(f1), 1.0]])


def twobytwo_det(R1, R2, R3, R4, f1, g1, eps):
    """det of the reduced-coordinate one-step Jacobian of MWU on the reduced 2x2 game."""
    return 1.0 - eps * eps * (R1 + R2) * (R3 + R4) * _sigma(f1) * _sigma(g1)


def twobytwo_step(R1, R2, R3, R4, f1, g1, eps):
    """One MWU step of A = [[0, R1], [R2, 0]], B = [[0, R3], [R4, 0]] in reduced coordinates."""
    x1 = 1.0 / (1.0 + math.exp(-f1))
    y1 = 1.0 / (1.0 + math.exp(-g1))
    x2, y2 = 1.0 - x1, 1.0 - y1
    return (f1 + eps * (R1 * y2 - R2 * y1), g1 + eps * (R4 * x2 - R3 * x1))


def twobytwo_matrices(R1, R2, R3, R4):
    return np.array([[0.0, R1], [R2, 0.0]]), np.array([[0.0, R3], [R4, 0.0]])
