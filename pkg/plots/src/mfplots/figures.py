"""The three figure kinds over mfctrl CSV outputs.

gen_scatter    per-n point clouds of |gen| on log-log axes, with a
               power-law reference line (default exponent -1).
trajectory_fan navigation trajectories coloured by wind, with the unit
               circle obstacle and the target marker.
loss_hist      overlaid in/out-of-sample total-loss histograms with
               mean markers.

All readers validate the documented column schema and fail by naming the
missing column.  Styling is fixed so identical inputs give identical
images.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


class SchemaError(ValueError):
    """Input CSV does not match the documented schema."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str                     # gen_scatter | trajectory_fan | loss_hist
    input_csv: str
    output_image: str
    options: dict = field(default_factory=dict)


def _read_rows(path, required):
    """CSV rows as a list of dicts; leading '#' comment lines are skipped."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    for col in required:
        if col not in rows[0]:
            raise SchemaError(f"{path}: missing column {col!r}")
    return rows


# ---------------------------------------------------------------------------
# figure kinds
# ---------------------------------------------------------------------------

def gen_scatter(input_csv, output_image, ref_exponent=-1.0) -> None:
    """|gen| vs n on log-log axes with an n^ref_exponent reference line."""
    rows = _read_rows(input_csv, required=("n", "gen"))
    n = np.array([float(r["n"]) for r in rows])
    gen = np.abs(np.array([float(r["gen"]) for r in rows]))
    keep = np.isfinite(gen) & (gen > 0)
    if not keep.any():
        raise SchemaError(f"{input_csv}: no finite nonzero gen values")
    n, gen = n[keep], gen[keep]

    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    for nv in np.unique(n):
        sel = n == nv
        ax.scatter(n[sel], gen[sel], s=18, alpha=0.7, edgecolors="none",
                   label=f"n = {int(nv)}")
    # anchor the reference line at the first-n median
    n_lo = n.min()
    anchor = np.median(gen[n == n_lo])
    grid = np.array([n.min(), n.max()], dtype=float)
    ax.plot(grid, anchor * (grid / n_lo) ** ref_exponent, "k--", lw=1,
            label=f"$n^{{{ref_exponent:g}}}$ reference")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("sample size n")
    ax.set_ylabel("|generalisation estimate|")
    ax.legend(loc="lower left", fontsize=8)
    fig.tight_layout()
    fig.savefig(output_image, dpi=100)
    plt.close(fig)


def trajectory_fan(input_csv, output_image, target=(20.0, 0.0)) -> None:
    """(x0, x1) trajectories coloured by mean wind (x2), unit-circle obstacle."""
    rows = _read_rows(input_csv, required=("path_id", "t", "x0", "x1", "x2"))
    by_path = {}
    for r in rows:
        by_path.setdefault(int(r["path_id"]), []).append(
            (int(r["t"]), float(r["x0"]), float(r["x1"]), float(r["x2"])))

    fig, ax = plt.subplots(figsize=(8.0, 4.0))
    winds = {pid: np.mean([v[3] for v in vals]) for pid, vals in by_path.items()}
    lo, hi = min(winds.values()), max(winds.values())
    span = (hi - lo) or 1.0
    cmap = plt.get_cmap("coolwarm")
    for pid in sorted(by_path):
        vals = sorted(by_path[pid])
        xs = [v[1] for v in vals]
        ys = [v[2] for v in vals]
        ax.plot(xs, ys, lw=0.8, alpha=0.6,
                color=cmap((winds[pid] - lo) / span))
    circle = plt.Circle((0.0, 0.0), 1.0, facecolor="0.85", edgecolor="black")
    ax.add_patch(circle)
    ax.plot([target[0]], [target[1]], marker="*", markersize=14,
            color="black", linestyle="none")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_aspect("equal", adjustable="datalim")
    fig.tight_layout()
    fig.savefig(output_image, dpi=100)
    plt.close(fig)


def loss_hist(input_csv, output_image, bins=40) -> None:
    """Overlaid in/out-of-sample log10 total-loss histograms, mean markers."""
    rows = _read_rows(input_csv, required=("path_id", "split", "total_loss"))
    losses = {"train": [], "test": []}
    for r in rows:
        split = r["split"]
        if split not in losses:
            raise SchemaError(f"{input_csv}: unknown split {split!r}")
        losses[split].append(float(r["total_loss"]))

    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    colours = {"train": "tab:green", "test": "tab:red"}
    positive = [v for vals in losses.values() for v in vals if v > 0]
    log_scale = bool(positive) and all(
        v > 0 for vals in losses.values() for v in vals)
    for split, vals in losses.items():
        if not vals:
            continue
        data = np.log10(vals) if log_scale else np.asarray(vals)
        ax.hist(data, bins=bins, density=True, alpha=0.45,
                color=colours[split], label=f"{split} ({len(vals)} paths)")
        ax.axvline(data.mean(), color=colours[split], lw=1.5, ls="--")
    ax.set_xlabel("log10 total loss" if log_scale else "total loss")
    ax.set_ylabel("density")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(output_image, dpi=100)
    plt.close(fig)


_KINDS = {
    "gen_scatter": gen_scatter,
    "trajectory_fan": trajectory_fan,
    "loss_hist": loss_hist,
}


def plot(spec: FigureSpec) -> None:
    if spec.kind not in _KINDS:
        raise ValueError(f"unknown figure kind {spec.kind!r}")
    _KINDS[spec.kind](spec.input_csv, spec.output_image, **spec.options)
