"""Dual-space learning dynamics.

Dual coordinates absorb the step size: a player's mixed strategy is the
softmax of its dual block (MWU) or the regularized best response to it
(FTRL), and one step is ``r' = r + eps * E(r)`` with ``E`` the vector of
expected payoffs of every pure strategy.  Dual coordinates are never
renormalized; only the softmax subtracts the block maximum.

Most functions here have a batched counterpart working on an array of flat
dual vectors of shape ``(N, d)``; the single-state API wraps those.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ValidationError
from .games import BimatrixGame, GraphicalGame

BISECTION_CAP = 200
SUM_TOL = 1e-12


# --- state --------------------------------------------------------------------

@dataclass(frozen=True)
class DualState:
    """Per-player dual (cumulative-payoff) blocks; ``p``/``q`` for two players."""

    blocks: tuple

    def __post_init__(self):
        blocks = []
        for b in self.blocks:
            b = np.array(b, dtype=float).reshape(-1)
            if not np.all(np.isfinite(b)):
                raise ValidationError("dual state has non-finite entries", "r")
            b.setflags(write=False)
            blocks.append(b)
        object.__setattr__(self, "blocks", tuple(blocks))

    @classmethod
    def of(cls, p, q):
        return cls((p, q))

    @classmethod
    def zeros(cls, sizes):
        return cls(tuple(np.zeros(s) for s in sizes))

    @classmethod
    def from_vector(cls, v, sizes):
        v = np.asarray(v, dtype=float)
        if v.shape != (sum(sizes),):
            raise ValidationError(f"vector of length {v.size} does not match sizes {tuple(sizes)}", "r")
        return cls(tuple(np.split(v, np.cumsum(sizes)[:-1])))

    @property
    def p(self):
        return self.blocks[0]

    @property
    def q(self):
        return self.blocks[1]

    @property
    def sizes(self):
        return tuple(b.size for b in self.blocks)

    @property
    def vector(self):
        return np.concatenate(self.blocks)

    def check(self, game):
        if self.sizes != tuple(game.sizes):
            raise ValidationError(f"state sizes {self.sizes} do not match game sizes {tuple(game.sizes)}", "r")
        return self


def softmax(v, axis=-1):
    v = np.asarray(v, dtype=float)
    z = np.exp(v - np.max(v, axis=axis, keepdims=True))
    return z / np.sum(z, axis=axis, keepdims=True)


def _split(R, sizes):
    return np.split(R, np.cumsum(sizes)[:-1], axis=-1)


def primal_of_dual(r):
    """Map a dual state to its mixed strategies (the normalization map G)."""
    return tuple(softmax(b) for b in r.blocks)


# --- payoffs ------------------------------------------------------------------

def payoff_field(game, primals):
    """Expected payoff of every pure strategy, per player.

    ``primals`` is a sequence of per-player arrays of shape ``(N, n_i)`` or
    ``(n_i,)``; the result has matching shapes.
    """
    if isinstance(game, BimatrixGame):
        x, y = primals
        return [y @ game.A.T, x @ game.B]
    if isinstance(game, GraphicalGame):
        out = [np.zeros_like(np.asarray(x, float)) for x in primals]
        for i1, i2, A in game.edges:
            out[i1] = out[i1] + primals[i2] @ A.T
            out[i2] = out[i2] - primals[i1] @ A
        return out
    raise TypeError(f"unsupported game type {type(game).__name__}")


def _eps_vector(eps, sizes):
    """Broadcast a scalar or per-player step size to a per-coordinate vector."""
    if np.ndim(eps) == 0:
        return float(eps)
    eps = list(eps)
    if len(eps) != len(sizes):
        raise ValidationError(f"need one step size per player, got {len(eps)}", "eps")
    return np.repeat(np.asarray(eps, float), sizes)


def mwu_field_batch(game, R):
    sizes = game.sizes
    primals = [softmax(b) for b in _split(R, sizes)]
    return np.concatenate(payoff_field(game, primals), axis=-1)


def mwu_step_batch(game, R, eps):
    return R + _eps_vector(eps, game.sizes) * mwu_field_batch(game, R)


def mwu_step(game, r, eps):
    """One MWU step in dual coordinates: ``r + eps * E(r)``."""
    r.check(game)
    v = mwu_step_batch(game, r.vector, eps)
    return DualState.from_vector(v, game.sizes)


# --- regularizers -------------------------------------------------------------

class ScalarRegularizer:
    """A strictly convex ``h(z)`` on (0, 1] with ``h'(z) -> -inf`` as ``z -> 0``.

    Subclasses provide ``h``, ``d1`` (h') and ``d2`` (h''); ``d1_inv`` falls
    back to bisection on ``log z`` when no closed form is given.
    """

    name = "scalar"

    def h(self, z):
        raise NotImplementedError

    def d1(self, z):
        raise NotImplementedError

    def d2(self, z):
        raise NotImplementedError

    def d1_inv(self, u):
        """Solve ``h'(z) = u`` for z in (0, 1]; values of u at or above h'(1) give 1."""
        u = np.asarray(u, dtype=float)
        lo = np.full(u.shape, -745.0)
        hi = np.zeros(u.shape)
        for _ in range(BISECTION_CAP):
            mid = 0.5 * (lo + hi)
            below = self.d1(np.exp(mid)) < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(hi - lo <= 1e-15 * np.maximum(1.0, np.abs(lo))):
                break
        else:
            raise NumericError("h'^-1 bisection did not converge", width=float(np.max(hi - lo)))
        z = np.exp(0.5 * (lo + hi))
        return np.where(u >= self.d1(1.0), 1.0, z)

    def to_dict(self):
        return {"kind": self.name}


class Entropy(ScalarRegularizer):
    """``scale * z ln z``; scale 1 recovers MWU, other scales rescale the step size."""

    name = "entropy"

    def __init__(self, scale=1.0):
        if scale <= 0:
            raise ValidationError("entropy scale must be positive", "regularizer.scale")
        self.scale = float(scale)

    def h(self, z):
        z = np.asarray(z, float)
        return self.scale * np.where(z > 0, z * np.log(np.where(z > 0, z, 1.0)), 0.0)

    def d1(self, z):
        return self.scale * (np.log(z) + 1.0)

    def d2(self, z):
        return self.scale / np.asarray(z, float)

    def d1_inv(self, u):
        return np.exp(np.minimum(np.asarray(u, float) / self.scale - 1.0, 0.0))

    def to_dict(self):
        return {"kind": self.name, "scale": self.scale}


class QuadraticLog(ScalarRegularizer):
    """``a z^2 / 2 - c ln z`` (log barrier keeps iterates interior)."""

    name = "quadratic_log"

    def __init__(self, c=0.01, a=1.0):
        if c <= 0 or a <= 0:
            raise ValidationError("quadratic_log needs a > 0 and c > 0", "regularizer")
        self.c, self.a = float(c), float(a)

    def h(self, z):
        z = np.asarray(z, float)
        return 0.5 * self.a * z * z - self.c * np.log(z)

    def d1(self, z):
        z = np.asarray(z, float)
        return self.a * z - self.c / z

    def d2(self, z):
        z = np.asarray(z, float)
        return self.a + self.c / (z * z)

    def d1_inv(self, u):
        u = np.asarray(u, float)
        disc = np.sqrt(u * u + 4.0 * self.a * self.c)
        # two algebraically equal roots; pick the one without cancellation
        z = np.where(u >= 0, (u + disc) / (2.0 * self.a), 2.0 * self.c / (disc - u))
        return np.minimum(z, 1.0)

    def to_dict(self):
        return {"kind": self.name, "c": self.c, "a": self.a}


class Tsallis(ScalarRegularizer):
    """``(z - z^alpha) / (1 - alpha)`` for alpha in (0, 1)."""

    name = "tsallis"

    def __init__(self, alpha=0.5):
        if not 0 < alpha < 1:
            raise ValidationError("tsallis alpha must lie in (0, 1)", "regularizer.alpha")
        self.alpha = float(alpha)

    def h(self, z):
        z = np.asarray(z, float)
        return (z - z ** self.alpha) / (1.0 - self.alpha)

    def d1(self, z):
        z = np.asarray(z, float)
        return (1.0 - self.alpha * z ** (self.alpha - 1.0)) / (1.0 - self.alpha)

    def d2(self, z):
        z = np.asarray(z, float)
        return self.alpha * z ** (self.alpha - 2.0)

    def d1_inv(self, u):
        u = np.minimum(np.asarray(u, float), 1.0)
        return np.minimum(((1.0 - (1.0 - self.alpha) * u) / self.alpha) ** (1.0 / (self.alpha - 1.0)), 1.0)

    def to_dict(self):
        return {"kind": self.name, "alpha": self.alpha}


_SCALAR_KINDS = {"entropy": Entropy, "quadratic_log": QuadraticLog, "tsallis": Tsallis}


class Regularizer:
    """Separable regularizer of one player: one scalar function per strategy."""

    def __init__(self, components):
        self.components = tuple(components)
        if not self.components:
            raise ValidationError("regularizer needs at least one component", "regularizer")

    @classmethod
    def uniform(cls, component, n):
        return cls([component] * n)

    @classmethod
    def entropy(cls, n, scale=1.0):
        return cls.uniform(Entropy(scale), n)

    @classmethod
    def from_dict(cls, doc, n):
        if isinstance(doc, str):
            doc = {"kind": doc}
        if "components" in doc:
            comps = [_scalar_from_dict(c) for c in doc["components"]]
            if len(comps) != n:
                raise ValidationError(f"regularizer has {len(comps)} components, player has {n} strategies",
                                      "regularizer.components")
            return cls(comps)
        return cls.uniform(_scalar_from_dict(doc), n)

    def to_dict(self):
        first = self.components[0]
        if all(c is first for c in self.components):
            return first.to_dict()
        return {"components": [c.to_dict() for c in self.components]}

    @property
    def n(self):
        return len(self.components)

    @property
    def is_entropy(self):
        return all(isinstance(c, Entropy) and c.scale == 1.0 for c in self.components)

    def _per_component(self, fn_name, values):
        values = np.asarray(values, float)
        first = self.components[0]
        if all(c is first for c in self.components):
            return getattr(first, fn_name)(values)
        out = np.empty_like(values)
        for j, c in enumerate(self.components):
            out[..., j] = getattr(c, fn_name)(values[..., j])
        return out

    def d1(self, x):
        return self._per_component("d1", x)

    def d2(self, x):
        return self._per_component("d2", x)

    def d1_inv(self, u):
        return self._per_component("d1_inv", u)

    def h(self, x):
        return np.sum(self._per_component("h", x), axis=-1)


def _scalar_from_dict(doc):
    if isinstance(doc, str):
        doc = {"kind": doc}
    kind = doc.get("kind")
    if kind not in _SCALAR_KINDS:
        raise ValidationError(f"unknown regularizer kind {kind!r}", "regularizer.kind")
    params = {k: v for k, v in doc.items() if k != "kind"}
    return _SCALAR_KINDS[kind](**params)


def ftrl_response(p, reg, eps=1.0):
    """Regularized best response ``argmax <eps*p, x> - h(x)`` over the simplex.

    Solves the KKT system ``eps*p_j - h'_j(x_j) = v``, ``sum x = 1`` by
    bisection on the scalar ``v``.  ``p`` may carry leading batch axes.
    """
    if eps <= 0:
        raise ValidationError("eps must be positive", "eps")
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != reg.n:
        raise ValidationError(f"payoff vector has {p.shape[-1]} entries, regularizer {reg.n}", "p")
    s = eps * p
    n = reg.n
    ones = np.ones(n)
    v_lo = np.max(s - reg.d1(ones), axis=-1)
    v_hi = np.max(s - reg.d1(ones / n), axis=-1)

    def total(v):
        return np.sum(reg.d1_inv(s - v[..., None]), axis=-1)

    for _ in range(BISECTION_CAP):
        mid = 0.5 * (v_lo + v_hi)
        over = total(mid) > 1.0
        v_lo = np.where(over, mid, v_lo)
        v_hi = np.where(over, v_hi, mid)
        if np.all(v_hi - v_lo <= 2 * np.spacing(np.maximum(np.abs(v_lo), np.abs(v_hi)))):
            break
    else:
        raise NumericError("FTRL response bisection exceeded the iteration cap",
                           width=float(np.max(v_hi - v_lo)))
    x = reg.d1_inv(s - 0.5 * (v_lo + v_hi)[..., None])
    resid = np.abs(np.sum(x, axis=-1) - 1.0)
    if np.any(resid > 1e-9) or np.any(x <= 0):
        raise NumericError("FTRL response failed to reach a fully mixed point on the simplex",
                           residual=float(np.max(resid)))
    return x / np.sum(x, axis=-1, keepdims=True)


def default_regularizers(game):
    return tuple(Regularizer.entropy(n) for n in game.sizes)


def ftrl_primal(game, r, regs):
    return tuple(ftrl_response(b, reg) for b, reg in zip(r.blocks, regs))


def ftrl_field_batch(game, R, regs):
    primals = [ftrl_response(b, reg) for b, reg in zip(_split(R, game.sizes), regs)]
    return np.concatenate(payoff_field(game, primals), axis=-1)


def ftrl_step_batch(game, R, eps, regs):
    return R + _eps_vector(eps, game.sizes) * ftrl_field_batch(game, R, regs)


def ftrl_step(game, r, eps, regs):
    """One FTRL step; ``regs`` holds one ``Regularizer`` per player."""
    r.check(game)
    _check_regs(game, regs)
    v = ftrl_step_batch(game, r.vector, eps, regs)
    return DualState.from_vector(v, game.sizes)


def _check_regs(game, regs):
    if len(regs) != len(game.sizes):
        raise ValidationError("need one regularizer per player", "regularizers")
    for i, (reg, n) in enumerate(zip(regs, game.sizes)):
        if reg.n != n:
            raise ValidationError(f"regularizer {i} has {reg.n} components, player has {n} strategies",
                                  f"regularizers[{i}]")


# --- step sizes ---------------------------------------------------------------

@dataclass(frozen=True)
class StepSchedule:
    """Constant ``eps`` or diminishing ``min(c0, c1 / sqrt(t))`` step sizes.

    Construction enforces the injectivity bound ``eps < 1 / (4 * max_degree)``.
    """

    kind: str
    epsilon: float = 0.0
    c0: float = 0.0
    c1: float = 0.0
    max_degree: int = 1

    def __post_init__(self):
        bound = 1.0 / (4.0 * self.max_degree)
        if self.kind == "constant":
            if not 0 < self.epsilon < bound:
                raise ValidationError(
                    f"constant step size must satisfy 0 < eps < 1/(4*{self.max_degree}) = {bound:g}, got {self.epsilon}",
                    "schedule.epsilon")
        elif self.kind == "diminishing":
            if not 0 < self.c0 < bound:
                raise ValidationError(f"c0 must satisfy 0 < c0 < {bound:g}, got {self.c0}", "schedule.c0")
            if self.c1 <= 0:
                raise ValidationError("c1 must be positive", "schedule.c1")
        else:
            raise ValidationError(f"unknown schedule kind {self.kind!r}", "schedule.kind")

    @classmethod
    def constant(cls, epsilon, max_degree=1):
        return cls("constant", epsilon=float(epsilon), max_degree=max_degree)

    @classmethod
    def diminishing(cls, c0, c1, max_degree=1):
        return cls("diminishing", c0=float(c0), c1=float(c1), max_degree=max_degree)

    @classmethod
    def from_dict(cls, doc, max_degree=1):
        kind = doc.get("kind", "constant")
        if kind == "constant":
            return cls.constant(doc["epsilon"], max_degree)
        if kind == "diminishing":
            return cls.diminishing(doc["c0"], doc["c1"], max_degree)
        raise ValidationError(f"unknown schedule kind {kind!r}", "schedule.kind")

    def to_dict(self):
        if self.kind == "constant":
            return {"kind": "constant", "epsilon": self.epsilon}
        return {"kind": "diminishing", "c0": self.c0, "c1": self.c1}

    def check_game(self, game):
        if game.max_degree > self.max_degree:
            return StepSchedule(self.kind, self.epsilon, self.c0, self.c1, game.max_degree)
        return self


def step_size(schedule, t):
    """Step size used for the update producing time ``t`` (t >= 1)."""
    if t < 1:
        raise ValidationError("step index starts at 1", "t")
    if schedule.kind == "constant":
        return schedule.epsilon
    return min(schedule.c0, schedule.c1 / math.sqrt(t))


def _eps_at(schedules, t):
    if isinstance(schedules, StepSchedule):
        return step_size(schedules, t)
    return [step_size(s, t) for s in schedules]


# --- trajectories -------------------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (K, d) flat dual vectors
    sizes: tuple
    stride: int = 1
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def state(self, i):
        return DualState.from_vector(self.states[i], self.sizes)

    def primal(self, i, regs=None):
        blocks = _split(self.states[i], self.sizes)
        if regs is None:
            return tuple(softmax(b) for b in blocks)
        return tuple(ftrl_response(b, reg) for b, reg in zip(blocks, regs))

    def primals(self, regs=None):
        """Per-player primal arrays of shape ``(K, n_i)``."""
        blocks = _split(self.states, self.sizes)
        if regs is None:
            return [softmax(b) for b in blocks]
        return [ftrl_response(b, reg) for b, reg in zip(blocks, regs)]


def make_stepper(game, dynamic="mwu", regs=None):
    """Return ``step(R, eps)`` advancing a batch of flat dual vectors."""
    if dynamic == "mwu":
        return lambda R, eps: mwu_step_batch(game, R, eps)
    if dynamic == "ftrl":
        regs = default_regularizers(game) if regs is None else tuple(regs)
        _check_regs(game, regs)
        return lambda R, eps: ftrl_step_batch(game, R, eps, regs)
    raise ValidationError(f"unknown dynamic {dynamic!r}", "dynamic")


def _bind_schedules(game, schedule):
    if isinstance(schedule, StepSchedule):
        return schedule.check_game(game)
    schedule = tuple(s.check_game(game) for s in schedule)
    if len(schedule) != len(game.sizes):
        raise ValidationError("need one schedule per player", "schedule")
    return schedule


def simulate(game, r0, schedule, T, dynamic="mwu", stride=1, regs=None, metadata=None):
    """Iterate the chosen dynamic for ``T`` steps, keeping every ``stride``-th state.

    ``schedule`` is a ``StepSchedule`` or one per player.  Times 0 and T are
    always recorded.
    """
    if int(T) < 1:
        raise ValidationError("T must be at least 1", "T")
    if int(stride) < 1:
        raise ValidationError("stride must be at least 1", "stride")
    T, stride = int(T), int(stride)
    r0.check(game)
    schedule = _bind_schedules(game, schedule)
    step = make_stepper(game, dynamic, regs)
    R = r0.vector
    times, states = [0], [R.copy()]
    for t in range(1, T + 1):
        try:
            R = step(R, _eps_at(schedule, t))
        except NumericError as exc:
            raise NumericError(f"step {t}: {exc}", step=t, **exc.details) from exc
        if not np.all(np.isfinite(R)):
            raise NumericError(f"non-finite dual state at step {t}", step=t)
        if t % stride == 0 or t == T:
            times.append(t)
            states.append(R.copy())
    meta = {"dynamic": dynamic, "T": T,
            "schedule": schedule.to_dict() if isinstance(schedule, StepSchedule)
            else [s.to_dict() for s in schedule]}
    meta.update(metadata or {})
    return Trajectory(np.array(times), np.array(states), tuple(game.sizes), stride, meta)


# --- Eshel-Akin coordinates and KL --------------------------------------------

def ea_forward(x):
    """Reduced coordinates ``f_j = ln x_j - ln x_n`` (last coordinate dropped)."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValidationError("Eshel-Akin transform needs a strictly positive vector", "x")
    lx = np.log(x)
    return lx[..., :-1] - lx[..., -1:]


def ea_inverse(f):
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f)):
        raise ValidationError("reduced coordinates must be finite", "f")
    pad = np.zeros(f.shape[:-1] + (1,))
    return softmax(np.concatenate([f, pad], axis=-1))


def ea_of_dual_batch(R, sizes):
    """Reduced coordinates straight from dual blocks: ``p_j - p_n`` per player."""
    parts = []
    for b in _split(np.asarray(R, float), sizes):
        parts.append(b[..., :-1] - b[..., -1:])
    return np.concatenate(parts, axis=-1)


def kl_divergence(x, x_star):
    """``sum x*_j ln(x*_j / x_j)``; +inf when x vanishes where x* does not."""
    x = np.asarray(x, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    if np.any(x_star <= 0):
        raise ValidationError("reference distribution must be strictly positive", "x_star")
    if np.any(x <= 0):
        return math.inf
    return float(np.sum(x_star * (np.log(x_star) - np.log(x))))
