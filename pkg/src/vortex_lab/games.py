"""Game families: bimatrix games, graphical (polymatrix) zero-sum games and
generalized Rock-Paper-Scissors, plus the triviality gap of a payoff matrix.

All payoffs follow the convention that every entry lies in [-1, 1]; the
step-size bounds used elsewhere (e.g. off-diagonal Jacobian entries bounded
by 2*eps) depend on it, so out-of-range input is rejected rather than clipped.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import NumericError, ValidationError

PAYOFF_BOUND = 1.0
_RANGE_SLACK = 1e-12


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _check_matrix(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValidationError(f"{name} must be a 2-D matrix, got shape {A.shape}", name)
    if A.shape[0] < 2 or A.shape[1] < 2:
        raise ValidationError(f"{name} must be at least 2x2, got {A.shape}", name)
    if not np.all(np.isfinite(A)):
        raise ValidationError(f"{name} has non-finite entries", name)
    if np.max(np.abs(A)) > PAYOFF_BOUND + _RANGE_SLACK:
        raise ValidationError(
            f"{name} has entries outside [-1, 1] (max |entry| = {np.max(np.abs(A)):g})", name)
    return A


@dataclass(frozen=True)
class BimatrixGame:
    """Two-player game; player 1 receives ``A[j, k]``, player 2 ``B[j, k]``."""

    A: np.ndarray
    B: np.ndarray
    name: str = ""

    def __post_init__(self):
        A = _check_matrix(self.A, "A")
        B = _check_matrix(self.B, "B")
        if A.shape != B.shape:
            raise ValidationError(f"A {A.shape} and B {B.shape} differ in shape", "B")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "B", _frozen(B))

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.A.shape[1]

    @property
    def sizes(self):
        return (self.n, self.m)

    @property
    def max_degree(self):
        return 1

    def is_zero_sum(self, tol=0.0):
        return bool(np.max(np.abs(self.A + self.B)) <= tol)


@dataclass(frozen=True)
class GraphicalGame:
    """Polymatrix game on an undirected graph with zero-sum edges.

    Each edge ``(i1, i2, A)`` stores player i1's payoff matrix against i2;
    player i2 receives ``-A.T`` from that edge.
    """

    strategy_counts: tuple
    edges: tuple
    name: str = ""

    def __post_init__(self):
        counts = tuple(int(c) for c in self.strategy_counts)
        if len(counts) < 2:
            raise ValidationError("a graphical game needs at least two players", "strategy_counts")
        if any(c < 2 for c in counts):
            raise ValidationError("every player needs at least two strategies", "strategy_counts")
        edges = []
        seen = set()
        for idx, edge in enumerate(self.edges):
            i1, i2, A = edge
            i1, i2 = int(i1), int(i2)
            where = f"edges[{idx}]"
            if not (0 <= i1 < len(counts) and 0 <= i2 < len(counts)):
                raise ValidationError(f"{where}: player index out of range", where)
            if i1 == i2:
                raise ValidationError(f"{where}: endpoints must be distinct players", where)
            key = frozenset((i1, i2))
            if key in seen:
                raise ValidationError(f"{where}: duplicate edge {i1}-{i2}", where)
            seen.add(key)
            A = _check_matrix(A, where)
            if A.shape != (counts[i1], counts[i2]):
                raise ValidationError(
                    f"{where}: matrix shape {A.shape} != ({counts[i1]}, {counts[i2]})", where)
            edges.append((i1, i2, _frozen(A)))
        if not edges:
            raise ValidationError("a graphical game needs at least one edge", "edges")
        object.__setattr__(self, "strategy_counts", counts)
        object.__setattr__(self, "edges", tuple(edges))

    @property
    def player_count(self):
        return len(self.strategy_counts)

    @property
    def sizes(self):
        return self.strategy_counts

    @property
    def n_total(self):
        return sum(self.strategy_counts)

    @property
    def degrees(self):
        deg = [0] * self.player_count
        for i1, i2, _ in self.edges:
            deg[i1] += 1
            deg[i2] += 1
        return deg

    @property
    def max_degree(self):
        return max(self.degrees)

    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.strategy_counts)])

    def neighbours(self, i):
        """Yield ``(other, M)`` where ``M`` is player i's payoff matrix against ``other``."""
        for i1, i2, A in self.edges:
            if i1 == i:
                yield i2, A
            elif i2 == i:
                yield i1, -A.T

    def edge_game(self, index):
        i1, i2, A = self.edges[index]
        return zero_sum_from(A)


@dataclass(frozen=True)
class RpsParams:
    P: float
    Q: float

    def __post_init__(self):
        if not (np.isfinite(self.P) and np.isfinite(self.Q)):
            raise ValidationError("P and Q must be finite")
        if self.P < 0 or self.Q < 0:
            raise ValidationError(f"P and Q must be non-negative, got P={self.P}, Q={self.Q}")
        if self.P == 0 and self.Q == 0:
            raise ValidationError("P and Q cannot both be zero")

    @property
    def ratio(self):
        return self.Q / self.P


def zero_sum_from(A, name=""):
    A = _check_matrix(A)
    return BimatrixGame(A, -A, name=name)


def matching_pennies():
    return zero_sum_from([[1.0, 0.0], [0.0, 1.0]], name="matching_pennies")


def rps_matrix(P, Q):
    return np.array([[0.0, P, -Q], [-Q, 0.0, P], [P, -Q, 0.0]])


def rps_game(params, normalize=False):
    """Generalized RPS with payoffs ``(A, A.T)``.

    With ``normalize=True`` the matrix is divided by ``max(P, Q)`` when that
    exceeds one; otherwise out-of-range entries raise.
    """
    if not isinstance(params, RpsParams):
        params = RpsParams(*params)
    A = rps_matrix(params.P, params.Q)
    scale = max(params.P, params.Q)
    if normalize and scale > 1:
        A = A / scale
    return BimatrixGame(A, A.T.copy(), name=f"rps(P={params.P:g},Q={params.Q:g})")


# --- triviality gap -----------------------------------------------------------

def _span_after_offsets(A, a, b):
    D = A - a[:, None] + b[None, :]
    return float(D.max() - D.min())


def triviality_gap(A, tol=1e-9, return_offsets=False):
    """Distance of ``A`` from the trivial family ``a_j - b_k``.

    Solves  min_{a,b} span_{j,k}(A_jk - a_j + b_k)  as the linear program
    min u - l  s.t.  l <= A_jk - a_j + b_k <= u.  The returned value is the span
    re-evaluated at the solver's offsets, so it is always an attained upper
    bound; the LP dual value is checked against it to ``tol``.
    """
    A = _check_matrix(A)
    n, m = A.shape
    # variables: a (n), b (m), u, l
    nv = n + m + 2
    c = np.zeros(nv)
    c[-2], c[-1] = 1.0, -1.0
    rows, rhs = [], []
    for j in range(n):
        for k in range(m):
            # A_jk - a_j + b_k - u <= 0
            r = np.zeros(nv)
            r[j], r[n + k], r[-2] = -1.0, 1.0, -1.0
            rows.append(r)
            rhs.append(-A[j, k])
            # l - A_jk + a_j - b_k <= 0
            r = np.zeros(nv)
            r[j], r[n + k], r[-1] = 1.0, -1.0, 1.0
            rows.append(r)
            rhs.append(A[j, k])
    # gauge: the problem is invariant under a -> a + s, b -> b + s
    A_eq = np.zeros((1, nv))
    A_eq[0, 0] = 1.0
    res = linprog(c, A_ub=np.array(rows), b_ub=np.array(rhs), A_eq=A_eq, b_eq=[0.0],
                  bounds=[(None, None)] * nv, method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10,
                           "maxiter": 10_000})
    if res.status != 0:
        raise NumericError(f"triviality-gap LP failed: {res.message}", status=res.status)
    a, b = res.x[:n], res.x[n:n + m]
    gap = _span_after_offsets(A, a, b)
    residual = abs(gap - res.fun)
    if residual > tol:
        raise NumericError("triviality-gap LP did not reach tolerance",
                           residual=residual, objective=res.fun, span=gap)
    gap = max(gap, 0.0)
    if return_offsets:
        return gap, a, b
    return gap


def is_trivial(A, tol=1e-9):
    if tol <= 0:
        raise ValidationError("tol must be positive", "tol")
    return triviality_gap(A) <= tol


# --- JSON ---------------------------------------------------------------------

def game_to_dict(game):
    if isinstance(game, GraphicalGame):
        return {
            "type": "graphical",
            "player_count": game.player_count,
            "strategy_counts": list(game.strategy_counts),
            "edges": [{"players": [i1, i2], "A": A.tolist()} for i1, i2, A in game.edges],
        }
    return {"type": "bimatrix", "A": game.A.tolist(), "B": game.B.tolist()}


_PRESETS = {
    "matching_pennies": matching_pennies,
    "rps": lambda: rps_game(RpsParams(1.0, 1.0)),
}


def game_from_dict(doc):
    """Build a game from its JSON document (see README for the schema)."""
    if isinstance(doc, str):
        if doc not in _PRESETS:
            raise ValidationError(f"unknown game preset {doc!r}", "game")
        return _PRESETS[doc]()
    kind = doc.get("type")
    if kind == "bimatrix":
        A = doc.get("A")
        if A is None:
            raise ValidationError("bimatrix game needs 'A'", "game.A")
        if doc.get("B") is None:
            return zero_sum_from(A, name=doc.get("name", ""))
        return BimatrixGame(np.asarray(A, float), np.asarray(doc["B"], float),
                            name=doc.get("name", ""))
    if kind == "rps":
        return rps_game(RpsParams(float(doc["P"]), float(doc["Q"])),
                        normalize=bool(doc.get("normalize", False)))
    if kind == "graphical":
        counts = doc["strategy_counts"]
        if "player_count" in doc and int(doc["player_count"]) != len(counts):
            raise ValidationError("player_count disagrees with strategy_counts",
                                  "game.player_count")
        edges = [(e["players"][0], e["players"][1], np.asarray(e["A"], float))
                 for e in doc["edges"]]
        return GraphicalGame(tuple(counts), tuple(edges), name=doc.get("name", ""))
    if kind in _PRESETS:
        return _PRESETS[kind]()
    raise ValidationError(f"unknown game type {kind!r}", "game.type")


def dumps_game(game):
    return json.dumps(game_to_dict(game), sort_keys=True)


def loads_game(text):
    return game_from_dict(json.loads(text))


def path_graph_game(matrices: Sequence, strategy_counts=None):
    """Graphical game on the path 0-1-...-k whose i-th edge uses ``matrices[i]``."""
    mats = [np.asarray(M, float) for M in matrices]
    if strategy_counts is None:
        strategy_counts = [mats[0].shape[0]] + [M.shape[1] for M in mats]
    edges = tuple((i, i + 1, M) for i, M in enumerate(mats))
    return GraphicalGame(tuple(strategy_counts), edges)
