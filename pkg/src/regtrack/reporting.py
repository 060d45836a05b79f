"""Result serialization: delimited outputs plus rendered figures.

Three delimited artifacts per benchmark run, all with 6-decimal fixed-point
numbers and stable headers:

  per_frame.csv  run,frame,e_al,x1,y1,x2,y2,x3,y3,x4,y4,iterations,time_ms
  sr_curve.csv   t_p,success_rate
  summary.txt    ``key = value`` lines

The report path also renders the success-rate curve and the per-frame error
timeline to PNG files next to the CSVs. Figures carry fixed metadata so a
rerun with identical inputs reproduces identical bytes.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .evaluation import RunResult, SRCurve

__all__ = [
    "PER_FRAME_HEADER",
    "write_per_frame_csv",
    "write_sr_csv",
    "write_summary",
    "write_results",
    "render_figures",
]

PER_FRAME_HEADER = ["run", "frame", "e_al", "x1", "y1", "x2", "y2",
                    "x3", "y3", "x4", "y4", "iterations", "time_ms"]

PNG_METADATA = {"Software": "regtrack"}


def _fmt(value: float) -> str:
    return f"{float(value):.6f}"


def write_per_frame_csv(path, results: Sequence[RunResult]) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(PER_FRAME_HEADER)
        for run_idx, result in enumerate(results):
            for k, frame in enumerate(result.frames):
                corners = result.corners[k].ravel()
                writer.writerow(
                    [run_idx, frame, _fmt(result.errors[k])]
                    + [_fmt(c) for c in corners]
                    + [result.iterations[k], _fmt(result.times_ms[k])])
    return path


def write_sr_csv(path, curve: Optional[SRCurve]) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t_p", "success_rate"])
        if curve is not None:
            for threshold, rate in zip(curve.thresholds, curve.rates):
                writer.writerow([_fmt(threshold), _fmt(rate)])
    return path


def write_summary(path, fields: dict) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as handle:
        for key, value in fields.items():
            if isinstance(value, float):
                value = _fmt(value)
            handle.write(f"{key} = {value}\n")
    return path


def write_results(out_dir, results: Sequence[RunResult],
                  curve: Optional[SRCurve], summary: dict) -> List[Path]:
    """Write the three delimited artifacts into out_dir; returns their paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return [
        write_per_frame_csv(out_dir / "per_frame.csv", results),
        write_sr_csv(out_dir / "sr_curve.csv", curve),
        write_summary(out_dir / "summary.txt", summary),
    ]


def render_figures(out_dir, results: Sequence[RunResult],
                   curve: Optional[SRCurve],
                   fail_threshold: float = 20.0) -> List[Path]:
    """Render the success-rate curve and error timeline PNGs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    if curve is not None:
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        ax.plot(curve.thresholds, curve.rates, lw=2,
                label=f"AUC = {curve.auc:.3f}")
        ax.set_xlabel("error threshold $t_p$ [px]")
        ax.set_ylabel("success rate")
        ax.set_xlim(curve.thresholds[0], curve.thresholds[-1])
        ax.set_ylim(0.0, 1.02)
        ax.grid(alpha=0.3)
        ax.legend(loc="lower right")
        fig.tight_layout()
        path = out_dir / "sr_curve.png"
        fig.savefig(path, dpi=120, metadata=PNG_METADATA)
        plt.close(fig)
        paths.append(path)

    if any(len(r.frames) for r in results):
        fig, ax = plt.subplots(figsize=(6.0, 3.6))
        for run_idx, result in enumerate(results):
            if result.frames:
                ax.plot(result.frames, result.errors, lw=1.2,
                        label=f"run {run_idx}" if len(results) > 1 else None)
        ax.axhline(fail_threshold, color="crimson", ls="--", lw=1,
                   label="failure threshold")
        ax.set_xlabel("frame")
        ax.set_ylabel("alignment error [px]")
        ax.grid(alpha=0.3)
        if len(results) <= 10:
            ax.legend(loc="upper left", fontsize=8)
        fig.tight_layout()
        path = out_dir / "error_timeline.png"
        fig.savefig(path, dpi=120, metadata=PNG_METADATA)
        plt.close(fig)
        paths.append(path)

    return paths
