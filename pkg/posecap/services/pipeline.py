"""
Command bodies shared by the command line and the HTTP service.

Each ``run_*`` function loads its inputs, calls the services and writes its
outputs; the in-memory halves (``reconstruct_groups``, ``compute_stats``) are
what the HTTP routes call directly.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from posecap.core import io
from posecap.core.config import settings
from posecap.core.errors import ArityError
from posecap.core.types import CameraRig, CdfSummary, KeypointGroup, PoseSequence
from posecap.schemas.metrics import AucRow, ErrorRow
from posecap.schemas.pipeline import (BundleAdjustMask, FilterSpec, LimbChain,
                                      LocalMovementConfig, PipelineConfig, PruneConfig)
from posecap.schemas.synth import SceneSpec
from posecap.services.alignment import apply_offset, fit_offset_model
from posecap.services.calibration import CalibrationResult, calibrate_rig
from posecap.services.local_movement import LocalMovementResult, sequence_local_movement
from posecap.services.metrics import KINEMATIC_GROUPS, evaluate_many, kinematic_cdfs
from posecap.services.selector import (DiagnosticRow, select_baseline,
                                       select_trajectories_with_diagnostics)
from posecap.services.smoothing import smooth_sequence
from posecap.services.synth import (gen_motion, make_observations, make_planar_correspondences,
                                    make_rig, render_keypoints, synthesize_markers)

logger = logging.getLogger(__name__)

DIAGNOSTIC_HEADER = ("frame", "joint", "subset_bitmask", "cost_increment")
ERROR_HEADER = ("sequence", "joint", "mean_error_mm", "mpjpe_mm", "pa_mpjpe_mm")


# ─── calibrate ───────────────────────────────────────────────────────────────

def run_calibrate(
    correspondences: str,
    observations: Optional[str],
    output: str,
    mask: BundleAdjustMask | None = None,
    max_iterations: int | None = None,
) -> CalibrationResult:
    planar = io.load_planar_correspondences(correspondences)
    records = io.load_observations(observations) if observations else None
    result = calibrate_rig(planar, records, mask, max_iterations)
    io.save_rig(result.rig, output)
    logger.info(f"Wrote rig to {output}; mean reprojection error {result.mean_error:.6g} px")
    return result


# ─── reconstruct ─────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Reconstruction:
    sequence: PoseSequence
    selected: PoseSequence
    diagnostics: List[DiagnosticRow]


def reconstruct_groups(
    groups: Sequence[KeypointGroup],
    rig: CameraRig,
    prune: PruneConfig | None = None,
    filter_spec: FilterSpec | None = None,
    skip_smoothing: bool = False,
    single_pass: bool = False,
    interpolate_gaps: bool = False,
    baseline: bool = False,
    threads: int | None = None,
) -> Reconstruction:
    """
    Selection followed by smoothing, or the all-camera baseline.

    The sample rate of the output is the filter's sample rate.
    """
    filter_spec = filter_spec or FilterSpec()
    if baseline:
        seq = select_baseline(groups, rig, filter_spec.sample_rate_hz, interpolate_gaps)
        return Reconstruction(seq, seq, [])
    selection = select_trajectories_with_diagnostics(
        groups, rig, prune, filter_spec.sample_rate_hz, threads, interpolate_gaps
    )
    selected = selection.sequence
    final = selected if skip_smoothing else smooth_sequence(selected, filter_spec, single_pass)
    return Reconstruction(final, selected, selection.diagnostics)


def run_reconstruct(cfg: PipelineConfig) -> Reconstruction:
    rig = io.load_rig(cfg.rig)
    groups = io.load_keypoints(cfg.keypoints)
    result = reconstruct_groups(
        groups, rig, cfg.prune, cfg.filter, cfg.skip_smoothing, cfg.single_pass,
        cfg.interpolate_gaps, cfg.baseline, cfg.threads,
    )
    io.save_pose_sequence(result.sequence, cfg.output)
    if cfg.diagnostics:
        io.write_csv(cfg.diagnostics, DIAGNOSTIC_HEADER, result.diagnostics)
    logger.info(f"Wrote {result.sequence.n_frames} frames to {cfg.output}")
    return result


# ─── evaluate ────────────────────────────────────────────────────────────────

def error_rows_csv(rows: Sequence[ErrorRow]) -> List[Tuple]:
    return [(r.sequence, r.joint, r.mean_error_mm, r.mpjpe_mm, r.pa_mpjpe_mm) for r in rows]


def run_evaluate(
    pairs: Sequence[Tuple[str, str, str]],
    output: str,
    offsets: Optional[str] = None,
) -> List[ErrorRow]:
    """
    Evaluate named (pred path, gt path) pairs.

    With an offset model, every gt path is a marker file turned into joints first.
    """
    if not pairs:
        raise ArityError("no prediction / ground-truth pairs given")
    model = io.load_offset_model(offsets) if offsets else None
    loaded = []
    for name, pred_path, gt_path in pairs:
        pred = io.load_pose_sequence(pred_path)
        gt = apply_offset(model, io.load_marker_sequence(gt_path)) if model else io.load_pose_sequence(gt_path)
        loaded.append((name, pred, gt))
    rows = evaluate_many(loaded)
    io.write_csv(output, ERROR_HEADER, error_rows_csv(rows))
    return rows


# ─── stats ───────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class StatsResult:
    cdfs: Dict[str, Tuple[CdfSummary, CdfSummary]]
    local_movement: Dict[str, LocalMovementResult]
    auc_rows: List[AucRow]


def compute_stats(
    seqs: Sequence[PoseSequence],
    cfg: LocalMovementConfig | None = None,
    subsample: int | None = None,
    seed: int | None = None,
    groups: Sequence[str] = KINEMATIC_GROUPS,
) -> StatsResult:
    """Kinematic CDFs per group and local movement of both limb chains."""
    cfg = cfg or LocalMovementConfig()
    seed = settings.SEED if seed is None else seed
    cdfs = kinematic_cdfs(seqs, groups)
    movement, rows = {}, []
    for chain in LimbChain:
        result = sequence_local_movement(seqs, cfg.model_copy(update={"chain": chain}), subsample, seed)
        movement[chain.value] = result
        rows.append(AucRow(chain=chain.value, side=cfg.side.value, auc=result.auc,
                           n_frames=result.n_frames, limb_length_m=result.limb_length))
    return StatsResult(cdfs, movement, rows)


def run_stats(
    paths: Sequence[str],
    out_dir: str,
    cfg: LocalMovementConfig | None = None,
    subsample: int | None = None,
    seed: int | None = None,
) -> StatsResult:
    if not paths:
        raise ArityError("no pose files given")
    seqs = [io.load_pose_sequence(p) for p in paths]
    result = compute_stats(seqs, cfg, subsample, seed)
    out = Path(out_dir)
    for group, (speed, accel) in result.cdfs.items():
        io.write_csv(out / f"speed_cdf_{group}.csv", ("speed_m_s", "fraction"), speed.pairs())
        io.write_csv(out / f"accel_cdf_{group}.csv", ("accel_m_s2", "fraction"), accel.pairs())
    io.write_csv(
        out / "kinematics_summary.csv", ("group", "mean_speed_m_s", "mean_accel_m_s2"),
        [(group, speed.mean, accel.mean) for group, (speed, accel) in result.cdfs.items()],
    )
    for chain, lm in result.local_movement.items():
        io.write_csv(out / f"local_movement_{chain}.csv", ("voxel_side_ratio", "cover_ratio"),
                     zip(lm.ratios.tolist(), lm.covers.tolist()))
    io.write_csv(out / "local_movement_auc.csv", ("chain", "side", "auc", "n_frames", "limb_length_m"),
                 [(r.chain, r.side, r.auc, r.n_frames, r.limb_length_m) for r in result.auc_rows])
    logger.info(f"Wrote statistics for {len(seqs)} sequences to {out_dir}")
    return result


# ─── synth ───────────────────────────────────────────────────────────────────

BUNDLE_FILES = {
    "rig": "rig.json",
    "keypoints": "keypoints.jsonl",
    "ground_truth": "gt.json",
    "corruption_log": "corruption_log.csv",
    "calibration": "calibration.json",
    "observations": "observations.json",
    "markers": "markers.json",
    "marker_triples": "marker_triples.json",
}


def run_synth(scene: SceneSpec, out_dir: str) -> Dict[str, str]:
    """
    Write a deterministic scene bundle: rig, keypoints, ground truth, corruption
    log, calibration inputs, marker triads and a manifest of specs and seed.
    """
    out = Path(out_dir)
    seed = scene.corruption.seed
    rig = make_rig(scene.rig)
    gt = gen_motion(scene.motion)
    rendered = render_keypoints(gt, rig, scene.corruption)
    files = {key: str(out / name) for key, name in BUNDLE_FILES.items()}

    io.save_rig(rig, files["rig"])
    io.save_keypoints(rendered.groups, files["keypoints"])
    io.save_pose_sequence(gt, files["ground_truth"])
    io.write_csv(files["corruption_log"], ("frame", "camera_id", "joint", "kind"),
                 [(e.frame_index, e.camera_id, e.joint, e.kind) for e in rendered.events])

    planar = make_planar_correspondences(rig, sigma=scene.corruption.pixel_noise_sigma, seed=seed)
    io.write_json(files["calibration"], {cid: rec.model_dump(mode="json") for cid, rec in planar.items()})
    stride = max(1, gt.n_frames // 10)
    observations = make_observations(rig, gt.frames[::stride].reshape(-1, 3),
                                     sigma=scene.corruption.pixel_noise_sigma, seed=seed)
    io.write_json(files["observations"], [o.model_dump(mode="json") for o in observations])

    synthetic = synthesize_markers(gt, seed=seed)
    io.save_marker_sequence(synthetic.markers, files["markers"])
    io.write_json(files["marker_triples"], {joint: list(triple) for joint, triple in synthetic.overrides.items()})

    manifest = {
        "app": settings.APP_NAME,
        "version": settings.APP_VERSION,
        "seed": seed,
        "scene": scene.model_dump(mode="json"),
        "files": {key: name for key, name in BUNDLE_FILES.items()},
    }
    io.write_json(out / "manifest.json", manifest)
    logger.info(f"Wrote synthetic bundle ({gt.n_frames} frames, {len(rig)} cameras) to {out_dir}")
    return files


# ─── fit-offsets ─────────────────────────────────────────────────────────────

def run_fit_offsets(
    markers_path: str,
    joints_path: str,
    output: str,
    overrides_path: Optional[str] = None,
    report: Optional[str] = None,
):
    markers = io.load_marker_sequence(markers_path)
    joints = io.load_pose_sequence(joints_path)
    overrides = io.load_overrides(overrides_path) if overrides_path else None
    model, fits = fit_offset_model(markers, joints, overrides)
    io.save_offset_model(model, output)
    if report:
        io.write_csv(report, ("joint", "m1", "m2", "m3", "rms_m", "n_frames"), [
            (joint, *model[joint].markers, fit.rms, fit.n_frames) for joint, fit in fits.items()
        ])
    worst = max(fit.rms for fit in fits.values())
    logger.info(f"Fitted {len(fits)} joints; worst rms {worst * 1000:.4f} mm")
    return model, fits
