"""``vortex-lab`` command-line front end.

    vortex-lab simulate  --config run.json --out outdir
    vortex-lab volume    --config cloud.json --out outdir [--seed N] [--render]
    vortex-lab figure1   --variant near_ne|off_ne --out outdir [--render]
    vortex-lab rps-table --out outdir
    vortex-lab coeff     --config coeff.json --out outdir
    vortex-lab lyapunov  --config lyap.json --out outdir

Configs are JSON.  Everything is validated before any computation starts.
Exit codes: 0 success, 2 usage/validation error, 3 numeric failure; errors
are reported as one JSON object on stderr.  Outputs are written to a staging
directory and moved into place only on success, so a failed run leaves no
partial files behind.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import math
import os
import shutil
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import reports
from .analysis import (boundary_time, divergence_curve, lyapunov_time, rps_ratio_bound,
                       rps_threshold)
from .dynamics import (DualState, Regularizer, StepSchedule, default_regularizers,
                       ftrl_primal, primal_of_dual, simulate)
from .errors import NumericError, ValidationError
from .games import BimatrixGame, GraphicalGame, game_from_dict, game_to_dict, triviality_gap
from .volume import (Ensemble, ea_cloud_to_dual, epsilon_threshold_zero_sum, evolve_ensemble,
                     grid_cloud, growth_rate_bound, hull_measure, second_order_coeff,
                     second_order_coeff_ftrl, second_order_coeff_graphical)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

FIGURE1 = {
    "near_ne": {"center": (0.0, 0.0), "times": (0, 500, 1000, 1500, 2000, 2500, 3000)},
    "off_ne": {"center": (0.2, 0.15), "times": (0, 300, 600, 900, 1200, 1500, 1800)},
}
RPS_TABLE_R = (0.5, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 2.0)
TRIVIAL_TOL = 1e-9


class UsageError(ValidationError):
    pass


# --- config parsing -----------------------------------------------------------

@contextlib.contextmanager
def _at(path):
    """Prefix the field of any ValidationError raised inside with ``path``."""
    try:
        yield
    except ValidationError as exc:
        field = exc.field
        if field is None:
            exc.field = path
        elif not (field == path or field.startswith(path + ".") or field.startswith(path + "[")):
            exc.field = f"{path}.{field}"
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed {path}: {exc!r}", path) from exc


def _check_keys(doc, allowed, where="config"):
    if not isinstance(doc, dict):
        raise ValidationError(f"{where} must be a JSON object", where)
    extra = sorted(set(doc) - set(allowed))
    if extra:
        raise ValidationError(f"unknown key(s) {extra} in {where}", f"{where}.{extra[0]}")


def load_config(path):
    if path is None:
        return {}, None
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}", "--config") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}", "--config") from exc
    if not isinstance(doc, dict):
        raise UsageError("config must be a JSON object", "config")
    return doc, path.parent


def parse_game(doc, base):
    with _at("game"):
        if doc is None:
            raise ValidationError("missing game", "game")
        if isinstance(doc, dict) and "file" in doc:
            p = Path(doc["file"])
            if not p.is_absolute() and base is not None:
                p = base / p
            try:
                doc = json.loads(p.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ValidationError(f"cannot load game file {p}: {exc}", "game.file") from exc
        return game_from_dict(doc)


def parse_regs(doc, game, dynamic):
    if doc is None:
        return default_regularizers(game) if dynamic == "ftrl" else None
    if dynamic != "ftrl":
        raise ValidationError("a regularizer only applies to dynamic 'ftrl'", "regularizer")
    with _at("regularizer"):
        if isinstance(doc, list):
            if len(doc) != len(game.sizes):
                raise ValidationError("need one regularizer per player", "regularizer")
            return tuple(Regularizer.from_dict(d, n) for d, n in zip(doc, game.sizes))
        return tuple(Regularizer.from_dict(doc, n) for n in game.sizes)


def parse_schedule(doc, game):
    with _at("schedule"):
        if doc is None:
            raise ValidationError("missing schedule", "schedule")
        if isinstance(doc, list):
            if len(doc) != len(game.sizes):
                raise ValidationError("need one schedule per player", "schedule")
            return tuple(StepSchedule.from_dict(d, game.max_degree) for d in doc)
        return StepSchedule.from_dict(doc, game.max_degree)


def parse_dynamic(doc):
    dynamic = doc.get("dynamic", "mwu")
    if dynamic not in ("mwu", "ftrl"):
        raise ValidationError(f"unknown dynamic {dynamic!r}", "dynamic")
    return dynamic


def _positive_int(doc, key, default=None, minimum=1):
    v = doc.get(key, default)
    if v is None:
        raise ValidationError(f"missing {key}", key)
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ValidationError(f"{key} must be an integer >= {minimum}", key)
    return v


def _vec(v, n, name):
    a = np.asarray(v, dtype=float)
    if a.shape != (n,) or not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} must be {n} finite numbers", name)
    return a


def _reduced_dim(game):
    return sum(n - 1 for n in game.sizes)


def _primal_to_dual(blocks, regs):
    out = []
    for i, x in enumerate(blocks):
        if np.any(x <= 0) or abs(x.sum() - 1) > 1e-9:
            raise ValidationError("primal vectors must be strictly positive and sum to 1",
                                  f"initial.primal[{i}]")
        out.append(np.log(x) if regs is None else regs[i].d1(x))
    return DualState(tuple(out))


def parse_point(doc, game, regs, where="initial"):
    """Single dual point from ``{p, q}``, ``{blocks}``, ``{x, y}``, ``{primal}``, ``{ea}`` or ``"uniform"``."""
    with _at(where):
        sizes = tuple(game.sizes)
        if doc is None or doc == "uniform":
            blocks = [np.full(n, 1.0 / n) for n in sizes]
            return _primal_to_dual(blocks, regs)
        if not isinstance(doc, dict):
            raise ValidationError("initial point must be an object or 'uniform'", where)
        if "p" in doc or "q" in doc:
            if len(sizes) != 2:
                raise ValidationError("p/q form is for two-player games; use 'blocks'", where)
            return DualState.of(_vec(doc["p"], sizes[0], "p"), _vec(doc["q"], sizes[1], "q"))
        if "blocks" in doc:
            if len(doc["blocks"]) != len(sizes):
                raise ValidationError("need one dual block per player", f"{where}.blocks")
            return DualState(tuple(_vec(b, n, f"blocks[{i}]")
                                   for i, (b, n) in enumerate(zip(doc["blocks"], sizes))))
        if "x" in doc or "y" in doc:
            if len(sizes) != 2:
                raise ValidationError("x/y form is for two-player games; use 'primal'", where)
            return _primal_to_dual([_vec(doc["x"], sizes[0], "x"),
                                    _vec(doc["y"], sizes[1], "y")], regs)
        if "primal" in doc:
            if len(doc["primal"]) != len(sizes):
                raise ValidationError("need one primal vector per player", f"{where}.primal")
            return _primal_to_dual([_vec(b, n, f"primal[{i}]")
                                    for i, (b, n) in enumerate(zip(doc["primal"], sizes))], regs)
        if "ea" in doc:
            f = _vec(doc["ea"], _reduced_dim(game), "ea")
            return DualState.from_vector(ea_cloud_to_dual(f[None, :], sizes)[0], sizes)
        raise ValidationError("unrecognised initial point; expected p/q, blocks, x/y, primal or ea",
                              where)


def parse_cloud(doc, game, rng):
    """Initial cloud from ``{grid: {...}}`` or ``{random: {...}}``; returns dual points."""
    with _at("initial"):
        if not isinstance(doc, dict) or not ({"grid", "random"} & set(doc)):
            raise ValidationError("cloud needs a 'grid' or 'random' section", "initial")
        kind = "grid" if "grid" in doc else "random"
        spec = doc[kind]
        _check_keys(spec, {"center", "radius", "resolution", "count", "coords"}, f"initial.{kind}")
        coords = spec.get("coords", "ea")
        if coords not in ("ea", "dual"):
            raise ValidationError("coords must be 'ea' or 'dual'", f"initial.{kind}.coords")
        dim = _reduced_dim(game) if coords == "ea" else sum(game.sizes)
        center = _vec(spec.get("center", [0.0] * dim), dim, f"{kind}.center")
        radius = float(spec.get("radius", 0.05))
        if not (radius > 0 and math.isfinite(radius)):
            raise ValidationError("radius must be positive", f"initial.{kind}.radius")
        if kind == "grid":
            res = _positive_int(spec, "resolution", 41, minimum=2)
            if res ** dim > 2_000_000:
                raise ValidationError("grid too large (resolution^dim > 2e6)",
                                      "initial.grid.resolution")
            pts = grid_cloud(center, radius, res)
        else:
            count = _positive_int(spec, "count", 1000)
            pts = center + rng.uniform(-radius, radius, size=(count, dim))
        if coords == "ea":
            pts = ea_cloud_to_dual(pts, game.sizes)
        return pts


def parse_seed(text):
    try:
        seed = int(text)
    except ValueError:
        raise UsageError("seed must be an unsigned 64-bit integer", "--seed") from None
    if not 0 <= seed < 2 ** 64:
        raise UsageError("seed must be an unsigned 64-bit integer", "--seed")
    return seed


# --- output staging -----------------------------------------------------------

class Outputs:
    """Collect files in a hidden staging directory; publish on success."""

    def __init__(self, out):
        self.out = Path(out)
        self.stage = None
        self.files = []

    def __enter__(self):
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise UsageError(f"cannot create output directory: {exc}", "--out") from exc
        self.stage = Path(tempfile.mkdtemp(prefix=".partial-", dir=self.out))
        return self

    def path(self, name):
        self.files.append(name)
        return self.stage / name

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            for name in self.files:
                os.replace(self.stage / name, self.out / name)
        shutil.rmtree(self.stage, ignore_errors=True)
        return False


def write_manifest(outs, command, config, seed, extra=None):
    doc = {"command": command, "version": __version__, "seed": seed, "config": config,
           "outputs": sorted(outs.files + ["manifest.json"])}
    if extra:
        doc.update(extra)
    reports.write_json(outs.path("manifest.json"), doc)


def _schedule_doc(schedule):
    if isinstance(schedule, StepSchedule):
        return schedule.to_dict()
    return [s.to_dict() for s in schedule]


def _regs_doc(regs):
    return None if regs is None else [r.to_dict() for r in regs]


# --- commands -----------------------------------------------------------------

SIMULATE_KEYS = {"game", "dynamic", "regularizer", "schedule", "T", "stride", "initial"}


def cmd_simulate(args, config, base):
    _check_keys(config, SIMULATE_KEYS)
    game = parse_game(config.get("game"), base)
    dynamic = parse_dynamic(config)
    regs = parse_regs(config.get("regularizer"), game, dynamic)
    schedule = parse_schedule(config.get("schedule"), game)
    T = _positive_int(config, "T")
    stride = _positive_int(config, "stride", 1)
    init = config.get("initial")
    if isinstance(init, dict) and ({"grid", "random"} & set(init)):
        raise ValidationError("simulate takes a single initial point; use 'volume' for clouds",
                              "initial")
    r0 = parse_point(init, game, regs)

    with Outputs(args.out) as outs:
        traj = simulate(game, r0, schedule, T, dynamic=dynamic, stride=stride, regs=regs)
        reports.write_trajectory(outs.path("trajectory.csv"), traj, regs)
        echo = {"game": game_to_dict(game), "dynamic": dynamic, "regularizer": _regs_doc(regs),
                "schedule": _schedule_doc(schedule), "T": T, "stride": stride,
                "initial": {"blocks": [b.tolist() for b in r0.blocks]}}
        write_manifest(outs, "simulate", echo, args.seed)
    print(f"wrote {len(traj)} recorded steps to {Path(args.out) / 'trajectory.csv'}")


def run_ensemble(outs, game, points, schedule, times, dynamic="mwu", regs=None, title=""):
    """Evolve a cloud, writing one snapshot CSV per time plus the hull summary.

    Returns the hull-summary rows.  Snapshot coordinates are reduced
    (``p_j - p_last`` per player) for 2x2 games, raw dual otherwise; hull areas
    are reported only when the snapshot coordinates are two-dimensional.
    """
    ens = Ensemble.from_points(points, game.sizes)
    rows, files = [], []
    prev = 0
    for t in times:
        ens = evolve_ensemble(game, ens, schedule, t - prev, dynamic=dynamic,
                              snapshot_times=(t - prev,), regs=regs)
        prev = t
        snap_t, coords = ens.snapshots[-1]
        name = f"snapshot_t{snap_t:06d}.csv"
        reports.write_snapshot(outs.path(name), snap_t, ens.ids, coords)
        files.append((snap_t, name))
        area = hull_measure(coords) if coords.shape[1] == 2 else None
        mult = ens.multipliers
        rows.append((snap_t, area, mult.min(), mult.max(), mult.mean()))
    reports.write_hull_summary(outs.path("hull_summary.csv"), rows)
    if ens.snapshots[-1][1].shape[1] == 2:
        reports.write_plot_script(outs.path("plot_snapshots.py"), files, title=title)
    return rows


def _maybe_render(args, outs):
    if not getattr(args, "render", False):
        return
    if "plot_snapshots.py" not in outs.files:
        raise UsageError("--render needs two-dimensional snapshot coordinates", "--render")
    reports.render_plot_script(outs.stage / "plot_snapshots.py", outs.path("snapshots.png"))


def _snapshot_times(config, T):
    times = config.get("snapshot_times", [0, T])
    if (not isinstance(times, list) or not times
            or any(isinstance(t, bool) or not isinstance(t, int) for t in times)):
        raise ValidationError("snapshot_times must be a non-empty list of integers",
                              "snapshot_times")
    if times != sorted(set(times)) or times[0] < 0 or times[-1] > T:
        raise ValidationError("snapshot_times must be strictly increasing within [0, T]",
                              "snapshot_times")
    return times


VOLUME_KEYS = {"game", "dynamic", "regularizer", "schedule", "T", "initial", "snapshot_times"}


def cmd_volume(args, config, base):
    _check_keys(config, VOLUME_KEYS)
    game = parse_game(config.get("game"), base)
    dynamic = parse_dynamic(config)
    regs = parse_regs(config.get("regularizer"), game, dynamic)
    schedule = parse_schedule(config.get("schedule"), game)
    T = _positive_int(config, "T")
    times = _snapshot_times(config, T)
    rng = np.random.default_rng(args.seed)
    points = parse_cloud(config.get("initial"), game, rng)

    with Outputs(args.out) as outs:
        rows = run_ensemble(outs, game, points, schedule, times, dynamic, regs,
                            title=game.name or "ensemble")
        _maybe_render(args, outs)
        echo = dict(config)
        echo.update({"game": game_to_dict(game), "dynamic": dynamic,
                     "regularizer": _regs_doc(regs), "schedule": _schedule_doc(schedule),
                     "snapshot_times": times})
        write_manifest(outs, "volume", echo, args.seed)
    for t, area, lo, hi, mean in rows:
        a = "n/a" if area is None else f"{area:.6g}"
        print(f"t={t}: hull_area={a} multiplier[min={lo:.6g}, max={hi:.6g}, mean={mean:.6g}]")


FIGURE1_KEYS = {"variant", "resolution", "radius", "epsilon"}


def cmd_figure1(args, config, base):
    _check_keys(config, FIGURE1_KEYS)
    variant = args.variant or config.get("variant", "near_ne")
    if variant not in FIGURE1:
        raise ValidationError(f"variant must be one of {sorted(FIGURE1)}", "variant")
    res = _positive_int(config, "resolution", 41, minimum=2)
    radius = float(config.get("radius", 0.05))
    if not radius > 0:
        raise ValidationError("radius must be positive", "radius")
    with _at("epsilon"):
        schedule = StepSchedule.constant(config.get("epsilon", 0.1))
    game = game_from_dict("matching_pennies")
    center, times = FIGURE1[variant]["center"], FIGURE1[variant]["times"]
    points = ea_cloud_to_dual(grid_cloud(center, radius, res), game.sizes)

    with Outputs(args.out) as outs:
        rows = run_ensemble(outs, game, points, schedule, times,
                            title=f"MWU on matching pennies, {variant}, eps={schedule.epsilon:g}")
        _maybe_render(args, outs)
        echo = {"variant": variant, "resolution": res, "radius": radius,
                "epsilon": schedule.epsilon, "center": list(center), "snapshot_times": list(times),
                "game": game_to_dict(game)}
        write_manifest(outs, "figure1", echo, args.seed)
    for t, area, lo, hi, mean in rows:
        print(f"t={t}: hull_area={area:.6g} multiplier_mean={mean:.6g}")


def _three_sig(v):
    if v == 0:
        return "0"
    return f"{v:#.3g}"


def cmd_rps_table(args, config, base):
    _check_keys(config, {"r"})
    rs = config.get("r", list(RPS_TABLE_R))
    with _at("r"):
        rs = [float(r) for r in rs]
        if any(not (r >= 0 and math.isfinite(r)) for r in rs):
            raise ValidationError("r values must be finite and non-negative", "r")
    rows = []
    for r in rs:
        thr = rps_threshold(r)
        rows.append((r, thr, _three_sig(thr), rps_ratio_bound(1.0, r)))
    with Outputs(args.out) as outs:
        reports.write_csv(outs.path("rps_table.csv"),
                          ("r", "threshold", "threshold_3sf", "ratio_bound"), rows)
        write_manifest(outs, "rps-table", {"r": rs}, args.seed)
    print("r,threshold")
    for r, _, printed, _ in rows:
        print(f"{r:g},{printed}")


COEFF_KEYS = {"game", "dynamic", "regularizer", "point", "deltas", "boundary"}


def _bimatrix_coeff(game, r, dynamic, regs):
    if dynamic == "ftrl":
        x, y = ftrl_primal(game, r, regs)
        return second_order_coeff_ftrl(game, x, y, regs), (x, y)
    x, y = primal_of_dual(r)
    return second_order_coeff(game, x, y), (x, y)


def cmd_coeff(args, config, base):
    _check_keys(config, COEFF_KEYS)
    game = parse_game(config.get("game"), base)
    dynamic = parse_dynamic(config)
    regs = parse_regs(config.get("regularizer"), game, dynamic)
    r = parse_point(config.get("point"), game, regs, where="point")
    deltas = config.get("deltas", [0.1, 0.2])
    with _at("deltas"):
        deltas = [float(d) for d in deltas]
        if any(not 0 < d < 1 for d in deltas):
            raise ValidationError("deltas must lie in (0, 1)", "deltas")
    bdoc = config.get("boundary")
    if bdoc is not None:
        _check_keys(bdoc, {"vol0", "gamma", "delta", "epsilon"}, "boundary")
    if isinstance(game, GraphicalGame):
        if dynamic == "ftrl":
            raise ValidationError("graphical coefficients are implemented for MWU only", "dynamic")
        if bdoc is not None:
            raise ValidationError("boundary time needs a two-player zero-sum game", "boundary")

    lines, quantities, thresholds = [], [], []
    if isinstance(game, BimatrixGame):
        C, (x, y) = _bimatrix_coeff(game, r, dynamic, regs)
        zero_sum = game.is_zero_sum(tol=1e-12)
        cA = triviality_gap(game.A) if zero_sum else None
        quantities += [("C", C), ("cA", cA), ("zero_sum", zero_sum)]
        lines.append(f"C = {C:.12g}")
        if zero_sum:
            lines.append(f"c(A) = {cA:.12g}")
            trivial = cA <= TRIVIAL_TOL
            quantities.append(("trivial", trivial))
            if trivial:
                lines.append("trivial — no chaos guarantee")
            n, m = game.sizes
            for d in deltas:
                if trivial:
                    thresholds.append((d, None, None, "trivial — no chaos guarantee"))
                    continue
                eps = epsilon_threshold_zero_sum(d, n, m, cA)
                bound = growth_rate_bound("zero_sum", eps, delta=d, cA=cA)
                thresholds.append((d, eps, bound, ""))
                lines.append(f"delta={d:g}: eps_bar={eps:.12g} growth_bound={bound:.17g}")
        else:
            lines.append("not zero-sum: no triviality gap or threshold")
    else:
        primals = primal_of_dual(r)
        C = second_order_coeff_graphical(game, primals)
        quantities.append(("C", C))
        lines.append(f"C = {C:.12g}")
        for idx, (i1, i2, A) in enumerate(game.edges):
            ce = second_order_coeff(game.edge_game(idx), primals[i1], primals[i2])
            ga = triviality_gap(A)
            quantities += [(f"edge{idx}_C", ce), (f"edge{idx}_cA", ga)]
            lines.append(f"edge {idx} ({i1}-{i2}): C = {ce:.12g}, c(A) = {ga:.12g}")
        if all(triviality_gap(A) <= TRIVIAL_TOL for _, _, A in game.edges):
            lines.append("trivial — no chaos guarantee")

    bt = None
    if bdoc is not None:
        with _at("boundary"):
            if not (isinstance(game, BimatrixGame) and game.is_zero_sum(tol=1e-12)):
                raise ValidationError("boundary time needs a two-player zero-sum game", "boundary")
            if cA <= TRIVIAL_TOL:
                raise ValidationError("boundary time is undefined for trivial games", "boundary")
            d = float(bdoc.get("delta", deltas[0]))
            n, m = game.sizes
            eps = float(bdoc.get("epsilon", epsilon_threshold_zero_sum(d, n, m, cA)))
            gamma = float(bdoc["gamma"])
            vol0 = float(bdoc.get("vol0", gamma ** (n + m)))
            bt = boundary_time(vol0, d, cA, eps, n, m, gamma)
            lines.append(f"boundary time t* = {bt.t_star:.12g} (certificate "
                         f"{'ok' if bt.certificate() else 'FAILED'})")

    with Outputs(args.out) as outs:
        reports.write_csv(outs.path("coeff.csv"), ("quantity", "value"), quantities)
        if thresholds:
            reports.write_csv(outs.path("thresholds.csv"),
                              ("delta", "epsilon_threshold", "growth_bound", "note"), thresholds)
        if bt is not None:
            reports.write_boundary(outs.path("boundary.csv"), bt)
        echo = dict(config)
        echo.update({"game": game_to_dict(game), "dynamic": dynamic, "regularizer": _regs_doc(regs),
                     "point": {"blocks": [b.tolist() for b in r.blocks]}, "deltas": deltas})
        write_manifest(outs, "coeff", echo, args.seed)
        (outs.path("report.txt")).write_text("\n".join(lines) + "\n")
    print("\n".join(lines))


LYAP_KEYS = {"game", "dynamic", "regularizer", "initial", "radius", "epsilons", "factor",
             "horizon", "curve_T"}


def cmd_lyapunov(args, config, base):
    _check_keys(config, LYAP_KEYS)
    game = parse_game(config.get("game"), base)
    dynamic = parse_dynamic(config)
    regs = parse_regs(config.get("regularizer"), game, dynamic)
    r0 = parse_point(config.get("initial"), game, regs)
    radius = config.get("radius", 1e-6)
    if not isinstance(radius, (int, float)) or not (radius > 0 and math.isfinite(radius)):
        raise ValidationError("radius must be positive (a zero perturbation never diverges)",
                              "radius")
    factor = float(config.get("factor", 2.0))
    if factor < 2:
        raise ValidationError("factor must be at least 2", "factor")
    horizon = _positive_int(config, "horizon", 1_000_000)
    curve_T = config.get("curve_T")
    if curve_T is not None:
        curve_T = _positive_int(config, "curve_T")
    eps_list = config.get("epsilons", [0.1, 0.05])
    with _at("epsilons"):
        if not isinstance(eps_list, list) or not eps_list:
            raise ValidationError("epsilons must be a non-empty list", "epsilons")
        # validates the injectivity bound for each step size
        eps_list = [StepSchedule.constant(e, game.max_degree).epsilon for e in eps_list]

    results = []
    with Outputs(args.out) as outs:
        summary = []
        for k, eps in enumerate(eps_list):
            res = lyapunov_time(game, r0, radius, eps, dynamic, factor, horizon, regs)
            T = curve_T or (res.steps if res.diverged else min(horizon, 10_000))
            curve = divergence_curve(game, r0, radius, eps, dynamic, T, regs)
            name = f"divergence_{k:02d}.csv"
            reports.write_divergence(outs.path(name), curve)
            summary.append((eps, res.steps, res.diverged, res.final_distance, name))
            results.append(res)
        reports.write_csv(outs.path("lyapunov_summary.csv"),
                          ("epsilon", "steps", "diverged", "final_distance", "curve_file"), summary)
        lines = []
        for (eps, steps, div, dist, _), res in zip(summary, results):
            if div:
                lines.append(f"eps={eps:g}: doubling after {steps} steps")
            else:
                lines.append(f"eps={eps:g}: no divergence within horizon ({horizon} steps)")
        ref = results[0]
        for eps, res in zip(eps_list[1:], results[1:]):
            if ref.diverged and res.diverged:
                lines.append(f"ratio t(eps={eps:g})/t(eps={eps_list[0]:g}) = "
                             f"{res.steps / ref.steps:.6g}")
        (outs.path("summary.txt")).write_text("\n".join(lines) + "\n")
        echo = dict(config)
        echo.update({"game": game_to_dict(game), "dynamic": dynamic, "regularizer": _regs_doc(regs),
                     "initial": {"blocks": [b.tolist() for b in r0.blocks]}, "radius": radius,
                     "factor": factor, "horizon": horizon, "epsilons": eps_list})
        write_manifest(outs, "lyapunov", echo, args.seed)
    print("\n".join(lines))


COMMANDS = {
    "simulate": cmd_simulate,
    "volume": cmd_volume,
    "figure1": cmd_figure1,
    "rps-table": cmd_rps_table,
    "coeff": cmd_coeff,
    "lyapunov": cmd_lyapunov,
}
NEEDS_CONFIG = {"simulate", "volume", "coeff", "lyapunov"}


def build_parser():
    ap = argparse.ArgumentParser(prog="vortex-lab",
                                 description="Volume expansion and chaos of learning in games.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=parse_seed_arg, default=0,
                       help="seed for randomized initial clouds (default 0)")
        if name in ("figure1", "volume"):
            p.add_argument("--render", action="store_true",
                           help="also render the plot script to PNG (needs matplotlib)")
        if name == "figure1":
            p.add_argument("--variant", choices=sorted(FIGURE1))
    return ap


def parse_seed_arg(text):
    try:
        return parse_seed(text)
    except UsageError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _fail(code, kind, exc):
    doc = {"error": kind, "message": str(exc)}
    field = getattr(exc, "field", None)
    if field:
        doc["field"] = field
    details = getattr(exc, "details", None)
    if details:
        doc["details"] = {k: (v if isinstance(v, (int, float, str, list, bool)) or v is None
                              else repr(v)) for k, v in details.items()}
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        if args.command in NEEDS_CONFIG and args.config is None:
            raise UsageError(f"{args.command} needs --config", "--config")
        config, base = load_config(args.config)
        COMMANDS[args.command](args, config, base)
    except ValidationError as exc:
        return _fail(EXIT_USAGE, "validation", exc)
    except NumericError as exc:
        return _fail(EXIT_NUMERIC, "numeric", exc)
    except (FloatingPointError, OverflowError, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_NUMERIC, "numeric", exc)
    # wall time goes to stderr so that output files stay byte-identical across runs
    print(f"[{args.command}] wall time {time.perf_counter() - t0:.3f} s", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
