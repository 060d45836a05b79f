"""Benchmark command line.

Runs one tracker configuration over one sequence (a frame directory with an
annotation file, or a synthetic-sequence JSON spec) under one of three
protocols, then writes per-frame results, the success-rate curve, a summary
record, and rendered figures into the output directory.

Setting precedence: command-line flags override config-file entries, which
override built-in defaults. The config file is line-oriented ``key = value``
text where keys are the long flag names without the leading dashes.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import am, evaluation, reporting, sm, ssm
from .image import GeometryError, gaussian_smooth
from .sequences import IngestionError, load_sequence

__all__ = ["main", "build_parser", "run_cli"]

DEFAULTS = {
    "am": "ssim",
    "ssm": "homography",
    "sm": "fclk",
    "protocol": "single",
    "resolution": "50x50",
    "max_iters": 30,
    "stop_norm": 1e-4,
    "seed": 0,
    "out": "regtrack_out",
    "smooth": "on",
    "timing": "on",
    "figures": "on",
    "nn_samples": 1000,
    "nn_sigma_px": 6.0,
    "pf_particles": 500,
    "pf_beta": 50.0,
    "pf_sigma_px": 2.0,
    "ransac_inlier_px": 2.0,
    "ransac_hypotheses": 50,
}

PROTOCOLS = ("single", "multi-init", "reinit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regtrack",
        description="Registration-based tracking benchmark runner.")
    parser.add_argument("--am", choices=am.AM_KINDS,
                        help="appearance model")
    parser.add_argument("--ssm", choices=ssm.SSM_KINDS,
                        help="state-space model (warp family)")
    parser.add_argument("--sm", choices=sm.SM_KINDS,
                        help="search method")
    parser.add_argument("--seq", help="frame directory or synthetic spec .json")
    parser.add_argument("--gt", help="annotation file for a frame directory")
    parser.add_argument("--protocol", choices=PROTOCOLS,
                        help="evaluation protocol")
    parser.add_argument("--resolution", help="patch sampling grid, e.g. 50x50")
    parser.add_argument("--max-iters", type=int, dest="max_iters",
                        help="iteration cap per frame for gradient descent")
    parser.add_argument("--stop-norm", type=float, dest="stop_norm",
                        help="corner-change norm that stops the iteration")
    parser.add_argument("--seed", type=int, help="seed for all stochastic parts")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--smooth", choices=("on", "off"),
                        help="5x5 Gaussian smoothing at ingestion")
    parser.add_argument("--timing", choices=("on", "off"),
                        help="measure per-frame wall time (off keeps outputs "
                             "byte-reproducible)")
    parser.add_argument("--figures", choices=("on", "off"),
                        help="render PNG figures next to the CSVs")
    parser.add_argument("--nn-samples", type=int, dest="nn_samples")
    parser.add_argument("--nn-sigma-px", type=float, dest="nn_sigma_px")
    parser.add_argument("--pf-particles", type=int, dest="pf_particles")
    parser.add_argument("--pf-beta", type=float, dest="pf_beta")
    parser.add_argument("--pf-sigma-px", type=float, dest="pf_sigma_px")
    parser.add_argument("--ransac-inlier-px", type=float,
                        dest="ransac_inlier_px")
    parser.add_argument("--ransac-hypotheses", type=int,
                        dest="ransac_hypotheses")
    parser.add_argument("--list-components", action="store_true",
                        help="print available AM/SSM/SM names and exit")
    return parser


def parse_config_file(path) -> dict:
    """Read ``key = value`` lines; '#' starts a comment, blank lines skipped."""
    entries = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise IngestionError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        entries[key.strip().replace("-", "_")] = value.strip()
    return entries


def _coerce(key: str, value):
    if key in ("max_iters", "seed", "nn_samples", "pf_particles",
               "ransac_hypotheses"):
        return int(value)
    if key in ("stop_norm", "nn_sigma_px", "pf_beta", "pf_sigma_px",
               "ransac_inlier_px"):
        return float(value)
    return value


def resolve_settings(args: argparse.Namespace) -> dict:
    settings = dict(DEFAULTS)
    settings.update({"seq": None, "gt": None})
    if args.config:
        for key, value in parse_config_file(args.config).items():
            if key not in settings:
                raise IngestionError(f"unknown config key {key!r}")
            settings[key] = _coerce(key, value)
    for key in settings:
        cli_value = getattr(args, key, None)
        if cli_value is not None:
            settings[key] = cli_value
    return settings


def _parse_resolution(text: str):
    try:
        x_part, y_part = str(text).lower().split("x")
        res = (int(x_part), int(y_part))
    except ValueError as err:
        raise ValueError(f"bad resolution {text!r}, expected WxH") from err
    if res[0] < 2 or res[1] < 2:
        raise ValueError("resolution must be at least 2x2")
    return res


def list_components() -> str:
    lines = [
        f"appearance models ({len(am.AM_KINDS)}): " + " ".join(am.AM_KINDS),
        f"state-space models ({len(ssm.SSM_KINDS)}): " + " ".join(ssm.SSM_KINDS),
        f"search methods ({len(sm.SM_KINDS)}): " + " ".join(sm.SM_KINDS),
    ]
    return "\n".join(lines)


def run_cli(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.list_components:
        print(list_components())
        return 0
    try:
        settings = resolve_settings(args)
        if not settings["seq"]:
            raise IngestionError("--seq is required (or set 'seq' in the config)")
        resolution = _parse_resolution(settings["resolution"])
        timing = settings["timing"] == "on"

        frames, gt = load_sequence(settings["seq"], settings["gt"])
        if gt is None:
            raise IngestionError("frame directories need --gt annotations")
        if settings["smooth"] == "on":
            frames = [gaussian_smooth(f) for f in frames]

        spec = sm.TrackerSpec(
            am=settings["am"], ssm=settings["ssm"], sm=settings["sm"],
            resolution=resolution,
            gd=sm.GDConfig(max_iters=settings["max_iters"],
                           stop_norm=settings["stop_norm"]),
            nn=sm.NNConfig(samples=settings["nn_samples"],
                           target_px=settings["nn_sigma_px"]),
            pf=sm.PFConfig(particles=settings["pf_particles"],
                           beta=settings["pf_beta"],
                           target_px=settings["pf_sigma_px"]),
            ransac=sm.RansacConfig(
                inlier_px=settings["ransac_inlier_px"],
                hypotheses=settings["ransac_hypotheses"]),
            seed=settings["seed"])

        protocol = settings["protocol"]
        reinit_count = 0
        if protocol == "single":
            results = [evaluation.run_single(frames, gt, spec, timing=timing)]
        elif protocol == "multi-init":
            results = evaluation.run_multi_init(frames, gt, spec, timing=timing)
        else:
            reinit_count, result = evaluation.run_reinit(
                frames, gt, spec, timing=timing)
            results = [result]

        errors = evaluation.pooled_errors(results)
        curve = evaluation.sr_curve(errors) if errors.size else None
        total_ms = float(sum(sum(r.times_ms) for r in results))
        mean_fps = (errors.size / (total_ms / 1e3)) if (timing and total_ms > 0) \
            else 0.0
        summary = dict(spec.describe())
        summary.update({
            "protocol": protocol,
            "sequence": str(settings["seq"]),
            "frames": len(frames),
            "runs": len(results),
            "tracked_frames": int(errors.size),
            "auc": curve.auc if curve else 0.0,
            "mean_fps": mean_fps,
            "reinit_count": reinit_count,
            "lost_frames": int(sum(sum(r.lost) for r in results)),
        })

        out_dir = Path(settings["out"])
        paths = reporting.write_results(out_dir, results, curve, summary)
        if settings["figures"] == "on":
            paths += reporting.render_figures(out_dir, results, curve)
        for path in paths:
            print(f"wrote {path}")
        if curve is not None:
            print(f"auc = {curve.auc:.6f}  tracked_frames = {errors.size}  "
                  f"reinit_count = {reinit_count}")
        return 0
    except (IngestionError, GeometryError, ssm.FitError, ValueError,
            OSError) as err:
        print(f"regtrack: error: {err}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    return run_cli(argv)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
