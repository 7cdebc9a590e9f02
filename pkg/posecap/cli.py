"""
Command line: ``posecap <command> [options]``.

Every command accepts ``--config FILE``, a JSON object with the same keys as
the command's options; explicit flags override the file.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ValidationError

from posecap.core import io
from posecap.core.config import configure_logging, settings
from posecap.core.errors import ArityError, PoseCapError, format_error_from, spec_error_from
from posecap.schemas.pipeline import BundleAdjustMask, LocalMovementConfig, PipelineConfig
from posecap.schemas.synth import SceneSpec
from posecap.services import pipeline

logger = logging.getLogger("posecap.cli")


def _merge(base: Dict[str, Any], updates: Dict[str, Any]) -> Dict[str, Any]:
    """Nested dict update that skips unset (None) flags."""
    out = dict(base)
    for key, value in updates.items():
        if value is None:
            continue
        if isinstance(value, dict):
            value = _merge(out.get(key) or {}, value)
            if not value and key not in out:
                continue
        out[key] = value
    return out


def _file_config(args: argparse.Namespace) -> Dict[str, Any]:
    return io.load_config(args.config) if args.config else {}


def _validate(model: type[BaseModel], data: Dict[str, Any]):
    try:
        return model.model_validate(data)
    except ValidationError as e:
        raise format_error_from(e, prefix="config")


def _flag(value: bool) -> Optional[bool]:
    """store_true flags only override the file when given."""
    return True if value else None


# ─── Commands ────────────────────────────────────────────────────────────────

def cmd_calibrate(args: argparse.Namespace) -> int:
    cfg = _merge(_file_config(args), {
        "correspondences": args.correspondences,
        "observations": args.observations,
        "out": args.out,
        "max_iterations": args.max_iterations,
        "mask": {
            "intrinsics": _flag(args.fix_intrinsics),
            "distortion": _flag(args.fix_distortion),
            "points": _flag(args.fix_points),
        },
    })
    for key in ("correspondences", "out"):
        if not cfg.get(key):
            raise ArityError(f"calibrate needs --{key}")
    mask = _validate(BundleAdjustMask, cfg.get("mask") or {})
    result = pipeline.run_calibrate(cfg["correspondences"], cfg.get("observations"), cfg["out"],
                                    mask, cfg.get("max_iterations"))
    print(f"mean reprojection error: {result.mean_error:.6g} px")
    return 0


def cmd_reconstruct(args: argparse.Namespace) -> int:
    cfg = _merge(_file_config(args), {
        "rig": args.rig,
        "keypoints": args.keypoints,
        "output": args.out,
        "diagnostics": args.diagnostics,
        "skip_smoothing": _flag(args.skip_smoothing),
        "single_pass": _flag(args.single_pass),
        "interpolate_gaps": _flag(args.interpolate_gaps),
        "baseline": _flag(args.baseline),
        "threads": args.threads,
        "prune": {"confidence_threshold": args.confidence_threshold, "max_removed": args.max_removed},
        "filter": {"order": args.order, "cutoff_hz": args.cutoff_hz, "sample_rate_hz": args.sample_rate},
    })
    pipeline.run_reconstruct(_validate(PipelineConfig, cfg))
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _merge(_file_config(args), {"out": args.out, "offsets": args.offsets})
    preds: List[str] = args.pred or cfg.get("pred") or []
    gts: List[str] = args.gt or cfg.get("gt") or []
    names: List[str] = args.name or cfg.get("name") or []
    if len(preds) != len(gts):
        raise ArityError(f"got {len(preds)} --pred and {len(gts)} --gt paths")
    if names and len(names) != len(preds):
        raise ArityError(f"got {len(names)} --name for {len(preds)} pairs")
    if not cfg.get("out"):
        raise ArityError("evaluate needs --out")
    names = names or [Path(p).stem for p in preds]
    rows = pipeline.run_evaluate(list(zip(names, preds, gts)), cfg["out"], cfg.get("offsets"))
    for row in rows:
        if row.joint == "overall":
            print(f"{row.sequence}: mean {row.mean_error_mm:.3f} mm, MPJPE {row.mpjpe_mm:.3f} mm, "
                  f"PA-MPJPE {row.pa_mpjpe_mm:.3f} mm")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    cfg = _merge(_file_config(args), {
        "poses": args.poses or None,
        "out_dir": args.out_dir,
        "subsample": args.subsample,
        "seed": args.seed,
        "local_movement": {"side": args.limb_side, "n_resolutions": args.n_resolutions},
    })
    if not cfg.get("out_dir"):
        raise ArityError("stats needs --out-dir")
    lm = _validate(LocalMovementConfig, cfg.get("local_movement") or {})
    result = pipeline.run_stats(cfg.get("poses") or [], cfg["out_dir"], lm, cfg.get("subsample"),
                                cfg.get("seed", settings.SEED))
    for row in result.auc_rows:
        print(f"{row.chain} ({row.side}): AUC {row.auc:.6f} over {row.n_frames} frames")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = _merge(_file_config(args), {
        "rig": {"n_cameras": args.n_cameras},
        "motion": {"kind": args.motion, "duration_s": args.duration, "sample_rate_hz": args.sample_rate},
        "corruption": {
            "pixel_noise_sigma": args.noise,
            "swap_probability": args.swap_probability,
            "dropout_probability": args.dropout_probability,
            "seed": args.seed,
        },
    })
    out_dir = args.out_dir or cfg.get("out_dir")
    cfg.pop("out_dir", None)
    if not out_dir:
        raise ArityError("synth needs --out-dir")
    try:
        scene = SceneSpec.model_validate(cfg)
    except ValidationError as e:
        raise spec_error_from(e)
    pipeline.run_synth(scene, out_dir)
    return 0


def cmd_fit_offsets(args: argparse.Namespace) -> int:
    cfg = _merge(_file_config(args), {
        "markers": args.markers,
        "joints": args.joints,
        "overrides": args.overrides,
        "out": args.out,
        "report": args.report,
    })
    for key in ("markers", "joints", "out"):
        if not cfg.get(key):
            raise ArityError(f"fit-offsets needs --{key}")
    pipeline.run_fit_offsets(cfg["markers"], cfg["joints"], cfg["out"], cfg.get("overrides"), cfg.get("report"))
    return 0


# ─── Parser ──────────────────────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=settings.APP_NAME, description="Markerless multi-view 3D pose toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.APP_VERSION}")
    parser.add_argument("--seed", type=int, default=None, help=f"Random seed (default {settings.SEED})")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads for per-joint selection")
    parser.add_argument("--config", default=None, help="JSON file of record; flags override it")
    parser.add_argument("--log-level", default=None, help=f"Log level (default {settings.LOG_LEVEL})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="Zhang initialisation and bundle adjustment")
    p.add_argument("--correspondences", help="Planar correspondences JSON")
    p.add_argument("--observations", help="Bundle-adjustment observations JSON")
    p.add_argument("--out", help="Rig output path")
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--fix-intrinsics", action="store_true")
    p.add_argument("--fix-distortion", action="store_true")
    p.add_argument("--fix-points", action="store_true")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("reconstruct", help="Keypoints to a smoothed 3D pose sequence")
    p.add_argument("--rig")
    p.add_argument("--keypoints")
    p.add_argument("--out")
    p.add_argument("--diagnostics", help="CSV of the selected subsets and path costs")
    p.add_argument("--skip-smoothing", action="store_true")
    p.add_argument("--single-pass", action="store_true", help="Causal filtering instead of zero-phase")
    p.add_argument("--interpolate-gaps", action="store_true")
    p.add_argument("--baseline", action="store_true", help="All-camera triangulation, no graph, no smoothing")
    p.add_argument("--order", type=int, help=f"Filter order (default {settings.FILTER_ORDER})")
    p.add_argument("--cutoff-hz", type=float, help=f"Filter cutoff (default {settings.FILTER_CUTOFF_HZ})")
    p.add_argument("--sample-rate", type=float, help=f"Capture rate (default {settings.SAMPLE_RATE_HZ})")
    p.add_argument("--confidence-threshold", type=float)
    p.add_argument("--max-removed", type=int)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="Mean error, MPJPE and PA-MPJPE against ground truth")
    p.add_argument("--pred", action="append", help="Predicted pose file (repeatable)")
    p.add_argument("--gt", action="append", help="Ground-truth pose or marker file (repeatable)")
    p.add_argument("--name", action="append", help="Sequence name per pair (repeatable)")
    p.add_argument("--offsets", help="Offset model; ground truth files are then marker files")
    p.add_argument("--out", help="Metrics CSV path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", help="Kinematic CDFs and local movement")
    p.add_argument("poses", nargs="*", help="Pose files")
    p.add_argument("--out-dir")
    p.add_argument("--subsample", type=int, help="Frames drawn uniformly before measuring local movement")
    p.add_argument("--limb-side", choices=["left", "right"])
    p.add_argument("--n-resolutions", type=int)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("synth", help="Write a synthetic scene bundle")
    p.add_argument("--out-dir")
    p.add_argument("--n-cameras", type=int)
    p.add_argument("--motion", choices=["static", "linear", "sinusoidal-limb-swing", "composite-burst"])
    p.add_argument("--duration", type=float, help="Seconds")
    p.add_argument("--sample-rate", type=float)
    p.add_argument("--noise", type=float, help="Pixel noise sigma")
    p.add_argument("--swap-probability", type=float)
    p.add_argument("--dropout-probability", type=float)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit-offsets", help="Fit marker-to-joint offsets")
    p.add_argument("--markers")
    p.add_argument("--joints")
    p.add_argument("--overrides", help="JSON {joint: [m1, m2, m3]}")
    p.add_argument("--out")
    p.add_argument("--report", help="Per-joint residual CSV")
    p.set_defaults(func=cmd_fit_offsets)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.func(args)
    except PoseCapError as e:
        logger.error(f"{args.command} failed: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
