"""The four figure families, rebuilt from a run directory's CSVs.

Families: agent training convergence (one panel per bandwidth pair),
duality gap, task-size sweep, and the bandwidth sweeps.  Input files
follow the conventions of the satedge command: metadata as leading
``# key: value`` lines, then a header row, then data rows.  A missing
family is skipped with a notice; a malformed file is an error that
names the file and line.

Outputs are deterministic: rerunning over the same inputs overwrites
byte-identical images.
"""

import argparse
import math
import os
import re
import sys

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "satedge-plots"

import matplotlib.pyplot as plt  # noqa: E402

_TRAIN_NAME = re.compile(
    r"train-(classical|hybrid)-([0-9.e+-]+)-([0-9.e+-]+)\.csv$")


class PlotDataError(Exception):
    """An input CSV that cannot be plotted."""


def read_table(path):
    """Returns (metadata, header, rows); rows keep their line numbers."""
    meta, header, rows = {}, None, []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    key, value = body.split(":", 1)
                    meta[key.strip()] = value.strip()
                continue
            cells = line.split(",")
            if header is None:
                header = cells
                continue
            if len(cells) != len(header):
                raise PlotDataError(
                    f"{path}: line {lineno}: expected {len(header)} "
                    f"columns, found {len(cells)}")
            rows.append((lineno, cells))
    if header is None:
        raise PlotDataError(f"{path}: no header row")
    return meta, header, rows


def _column(path, header, name):
    try:
        return header.index(name)
    except ValueError:
        raise PlotDataError(f"{path}: missing column {name!r}") from None


def _float(path, lineno, name, cell):
    try:
        return float(cell)
    except ValueError:
        raise PlotDataError(
            f"{path}: line {lineno}: column {name!r} is not a number: "
            f"{cell!r}") from None


def _numeric(path, header, rows, *names):
    """Per-name lists of floats pulled out of the raw rows."""
    idx = [_column(path, header, n) for n in names]
    out = [[] for _ in names]
    for lineno, cells in rows:
        for k, (i, name) in enumerate(zip(idx, names)):
            out[k].append(_float(path, lineno, name, cells[i]))
    return out


def _training_figure(run_dir):
    curves = {}
    for entry in sorted(os.listdir(run_dir)):
        m = _TRAIN_NAME.match(entry)
        if not m:
            continue
        kind, b_a, b_s = m.group(1), float(m.group(2)), float(m.group(3))
        curves.setdefault((b_a, b_s), {})[kind] = \
            os.path.join(run_dir, entry)
    if not curves:
        return None

    pairs = sorted(curves)
    cols = min(2, len(pairs))
    rows_n = math.ceil(len(pairs) / cols)
    fig, axes = plt.subplots(rows_n, cols, squeeze=False,
                             figsize=(4.2 * cols, 3.0 * rows_n))
    hashes = set()
    for ax, pair in zip(axes.flat, pairs):
        for kind in ("classical", "hybrid"):
            if kind not in curves[pair]:
                continue
            path = curves[pair][kind]
            meta, header, rows = read_table(path)
            hashes.add(meta.get("settings_hash", "?"))
            episode, reward = _numeric(path, header, rows,
                                       "episode", "greedy_reward")
            ax.plot(episode, reward, marker=".", markersize=3,
                    linewidth=1.0, label=kind)
        ax.set_title(f"{pair[0]:g} / {pair[1]:g} MHz", fontsize=9)
        ax.set_xlabel("episode")
        ax.set_ylabel("greedy reward")
        ax.legend(fontsize=8)
    for ax in axes.flat[len(pairs):]:
        ax.set_visible(False)
    fig.suptitle("Agent training convergence")
    return fig, hashes


def _duality_gap_figure(run_dir):
    path = os.path.join(run_dir, "duality-gap.csv")
    if not os.path.exists(path):
        return None
    meta, header, rows = read_table(path)
    iteration, primal, dual = _numeric(path, header, rows,
                                       "iteration", "primal", "dual")
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(iteration, primal, marker="o", markersize=3, label="primal")
    finite = [(i, d) for i, d in zip(iteration, dual)
              if math.isfinite(d)]
    if finite:
        ax.plot([i for i, _ in finite], [d for _, d in finite],
                marker="s", markersize=3, label="dual bound")
    title = "Duality gap"
    if "final_rel_gap" in meta:
        title += f" (final relative gap {float(meta['final_rel_gap']):.4f})"
    ax.set_title(title, fontsize=10)
    ax.set_xlabel("sweep")
    ax.set_ylabel("objective (J)")
    ax.legend(fontsize=8)
    return fig, {meta.get("settings_hash", "?")}


def _sweep_series(path, scale=1.0):
    meta, header, rows = read_table(path)
    i_val = _column(path, header, "value")
    i_method = _column(path, header, "method")
    i_energy = _column(path, header, "energy")
    i_ok = _column(path, header, "feasible")
    series = {}
    for lineno, cells in rows:
        if cells[i_ok] != "1":
            continue
        value = _float(path, lineno, "value", cells[i_val]) * scale
        energy = _float(path, lineno, "energy", cells[i_energy])
        series.setdefault(cells[i_method], []).append((value, energy))
    return meta, series


def _plot_series(ax, series):
    for method in sorted(series):
        points = sorted(series[method])
        ax.plot([v for v, _ in points], [e for _, e in points],
                marker="o", markersize=3, label=method)
    ax.set_ylabel("E_total (J)")
    ax.legend(fontsize=8)


def _task_size_figure(run_dir):
    path = os.path.join(run_dir, "sweep-task-bits.csv")
    if not os.path.exists(path):
        return None
    meta, series = _sweep_series(path)
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    _plot_series(ax, series)
    ax.set_xlabel("task size (bits)")
    ax.set_title("Energy vs task size", fontsize=10)
    return fig, {meta.get("settings_hash", "?")}


def _bandwidth_figure(run_dir):
    # one panel per swept band; either alone still makes the figure
    found = []
    for axis, label in (("b-access-total", "access bandwidth (MHz)"),
                        ("b-s-total", "backhaul bandwidth (MHz)")):
        path = os.path.join(run_dir, f"sweep-{axis}.csv")
        if os.path.exists(path):
            found.append((path, label))
    if not found:
        return None
    fig, axes = plt.subplots(1, len(found), squeeze=False,
                             figsize=(4.6 * len(found), 3.4))
    hashes = set()
    for ax, (path, label) in zip(axes.flat, found):
        meta, series = _sweep_series(path, scale=1e-6)
        hashes.add(meta.get("settings_hash", "?"))
        _plot_series(ax, series)
        ax.set_xlabel(label)
    fig.suptitle("Energy vs band budgets")
    return fig, hashes


FAMILIES = (
    ("training-convergence", _training_figure),
    ("duality-gap", _duality_gap_figure),
    ("task-size-sweep", _task_size_figure),
    ("bandwidth-sweep", _bandwidth_figure),
)


def make_figures(run_dir, out_dir, fmt="svg"):
    """Draw every family whose inputs exist; returns the written paths."""
    if fmt not in ("svg", "png"):
        raise ValueError(f"unsupported format {fmt!r}")
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name, build in FAMILIES:
        built = build(run_dir)
        if built is None:
            print(f"skip {name}: no input CSV in {run_dir}")
            continue
        fig, hashes = built
        fig.text(0.01, 0.006, "settings " + "/".join(sorted(hashes)),
                 fontsize=6, color="0.45")
        fig.tight_layout()
        path = os.path.join(out_dir, f"{name}.{fmt}")
        # a pinned hashsalt plus no date stamp keeps reruns byte-identical
        metadata = {"Date": None} if fmt == "svg" else None
        fig.savefig(path, metadata=metadata)
        plt.close(fig)
        print(path)
        written.append(path)
    return written


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="satedge-plots",
        description="Regenerate the figure families from a satedge "
                    "run directory.")
    parser.add_argument("run_dir", help="directory holding the CSVs")
    parser.add_argument("out_dir", nargs="?", default="figures")
    parser.add_argument("--format", choices=("svg", "png"), default="svg")
    args = parser.parse_args(argv)
    try:
        make_figures(args.run_dir, args.out_dir, args.format)
    except PlotDataError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
