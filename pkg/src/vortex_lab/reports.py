"""CSV writers and plotting-script generation.

Every float is written with 17 significant digits so that a CSV round-trips
to the exact double; rows are emitted in a fixed order so reruns are
byte-identical.
"""
from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from .dynamics import _split

# dark-green, orange, purple, lime, pink, blue, red
SNAPSHOT_COLORS = ("#006400", "#ffa500", "#800080", "#00ff00", "#ffc0cb", "#0000ff", "#ff0000")


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if v is None:
        return ""
    return str(v)


def write_csv(path, header, rows):
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_json(path, doc):
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


# --- schemas ------------------------------------------------------------------

TRAJECTORY_HEADER = ("t", "side", "index", "dual", "primal")
SNAPSHOT_HEADER = ("snapshot_t", "point_id", "coord_index", "value")
HULL_HEADER = ("snapshot_t", "hull_area", "min_multiplier", "max_multiplier", "mean_multiplier")
DIVERGENCE_HEADER = ("t", "max_distance")
BOUNDARY_HEADER = ("t_star", "lhs_log", "rhs_log")


def trajectory_rows(traj, regs=None):
    """One row per coordinate per recorded step; ``side`` is the player index."""
    primals = traj.primals(regs)
    duals = _split(traj.states, traj.sizes)
    for k, t in enumerate(traj.times):
        for side, (d, x) in enumerate(zip(duals, primals)):
            for j in range(d.shape[1]):
                yield (int(t), side, j, d[k, j], x[k, j])


def write_trajectory(path, traj, regs=None):
    return write_csv(path, TRAJECTORY_HEADER, trajectory_rows(traj, regs))


def snapshot_rows(t, ids, coords):
    order = np.argsort(ids, kind="stable")
    for i in order:
        for c, v in enumerate(coords[i]):
            yield (int(t), int(ids[i]), c, v)


def write_snapshot(path, t, ids, coords):
    return write_csv(path, SNAPSHOT_HEADER, snapshot_rows(t, ids, coords))


def write_hull_summary(path, rows):
    return write_csv(path, HULL_HEADER, rows)


def write_divergence(path, curve):
    return write_csv(path, DIVERGENCE_HEADER, zip(curve.t.tolist(), curve.distance.tolist()))


def write_boundary(path, bt):
    return write_csv(path, BOUNDARY_HEADER, [(bt.t_star, bt.lhs_log, bt.rhs_log)])


# --- plotting script ----------------------------------------------------------

_PLOT_TEMPLATE = '''\
"""Plot evolved snapshot regions in reduced coordinates.

Generated by vortex-lab; needs matplotlib.  Usage:
    python {script_name} [output.png]
"""
import csv
import os
import sys

import matplotlib
if len(sys.argv) > 1:
    matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
FILES = {files!r}
COLORS = {colors!r}
TITLE = {title!r}


def load(name):
    pts = {{}}
    with open(os.path.join(HERE, name), newline="") as fh:
        for row in csv.DictReader(fh):
            pts.setdefault(int(row["point_id"]), {{}})[int(row["coord_index"])] = float(row["value"])
    return [p[0] for p in pts.values()], [p[1] for p in pts.values()]


fig, ax = plt.subplots(figsize=(6, 6))
# latest snapshot first so earlier (smaller) regions stay visible on top
for (t, name), color in reversed(list(zip(FILES, COLORS))):
    f, g = load(name)
    ax.scatter(f, g, s=2, color=color, label=f"t = {{t}}", linewidths=0)
ax.set_xlabel("f1 = ln x1 - ln x2")
ax.set_ylabel("g1 = ln y1 - ln y2")
ax.set_title(TITLE)
ax.set_aspect("equal")
handles, labels = ax.get_legend_handles_labels()
ax.legend(handles[::-1], labels[::-1], markerscale=4, fontsize=8)
fig.tight_layout()
if len(sys.argv) > 1:
    fig.savefig(sys.argv[1], dpi=150, metadata={{"Software": None}})
else:
    plt.show()
'''


def write_plot_script(path, snapshot_files, title=""):
    """Standalone matplotlib script drawing each (t, csv) snapshot in its own color."""
    path = Path(path)
    files = [(int(t), os.path.basename(str(f))) for t, f in snapshot_files]
    colors = [SNAPSHOT_COLORS[i % len(SNAPSHOT_COLORS)] for i in range(len(files))]
    path.write_text(_PLOT_TEMPLATE.format(script_name=path.name, files=files, colors=colors,
                                          title=title))
    return path


def render_plot_script(script, png):
    """Run a generated plot script to produce ``png`` (matplotlib imported lazily)."""
    import runpy
    import sys

    import matplotlib
    matplotlib.use("Agg")
    argv = sys.argv
    try:
        sys.argv = [str(script), str(png)]
        runpy.run_path(str(script), run_name="__main__")
    finally:
        sys.argv = argv
        import matplotlib.pyplot as plt
        plt.close("all")
    return Path(png)
