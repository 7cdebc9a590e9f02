"""
File IO for rigs, keypoints, pose and marker sequences, offset models and reports.

Floats are written with ``repr`` precision (shortest exact round-trip), so
every coordinate payload reloads bit-identically.
"""
import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np
from pydantic import BaseModel, ValidationError

from posecap.core.errors import FormatError, PoseIOError, format_error_from
from posecap.core.skeleton import COCO17
from posecap.core.types import (CameraRig, JointOffset, JointOffsetModel,
                                Keypoint2D, KeypointFrame, KeypointGroup,
                                MarkerSequence, PoseSequence)
from posecap.schemas.camera import (CameraRecord, ObservationRecord,
                                    PlanarCameraRecord, PlanarCorrespondences)
from posecap.schemas.sequences import (KeypointRecord, MarkerSequenceFile,
                                       OffsetModelFile,
                                       PoseSequenceFile)

logger = logging.getLogger(__name__)

PathLike = str | Path


def _read_text(path: PathLike) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise PoseIOError(f"Cannot read {path}: {e}")


def _read_json(path: PathLike) -> Any:
    text = _read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid JSON in {path}: {e}")


def _write_text(path: PathLike, text: str) -> None:
    try:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8")
    except OSError as e:
        raise PoseIOError(f"Cannot write {path}: {e}")


def write_json(path: PathLike, payload: Any) -> None:
    """Write a JSON document (pydantic models are dumped in JSON mode)."""
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode="json")
    _write_text(path, json.dumps(payload, indent=1) + "\n")


def _parse(model: type[BaseModel], data: Any, prefix: str | None = None):
    try:
        return model.model_validate(data)
    except ValidationError as e:
        raise format_error_from(e, prefix)


# ─── Rigs ────────────────────────────────────────────────────────────────────

def rig_from_records(records: Iterable[CameraRecord]) -> CameraRig:
    return CameraRig(tuple(record.to_params() for record in records))


def load_rig(path: PathLike) -> CameraRig:
    """
    Load a rig file: a JSON list of camera records.

    Raises:
        PoseIOError: If the file cannot be read
        FormatError: If a record violates the schema (message names the field)
        ConfigurationError: If camera ids repeat or fewer than two cameras are listed
    """
    data = _read_json(path)
    if not isinstance(data, list):
        raise FormatError("rig file must be a list of cameras", field_path="<root>")
    rig = rig_from_records([_parse(CameraRecord, item, prefix=f"[{i}]") for i, item in enumerate(data)])
    logger.info(f"Loaded rig with {len(rig)} cameras from {path}")
    return rig


def save_rig(rig: CameraRig, path: PathLike) -> None:
    write_json(path, [CameraRecord.from_params(cam).model_dump(mode="json") for cam in rig])


# ─── Keypoints ───────────────────────────────────────────────────────────────

def group_keypoints(records: Iterable) -> List[KeypointGroup]:
    """
    Group keypoint records by frame.

    Accepts bare ``KeypointRecord`` items or ``(label, record)`` pairs; the label
    names the offending record in errors.

    Raises:
        FormatError: On a duplicate (frame, camera) record
    """
    frames: Dict[int, Dict[str, KeypointFrame]] = {}
    for i, item in enumerate(records):
        label, record = item if isinstance(item, tuple) else (f"[{i}]", item)
        views = frames.setdefault(record.frame_index, {})
        if record.camera_id in views:
            raise FormatError(
                f"duplicate record for frame {record.frame_index}, camera {record.camera_id}", field_path=label
            )
        keypoints = tuple(None if kp is None else Keypoint2D(*kp) for kp in record.keypoints)
        views[record.camera_id] = KeypointFrame(record.camera_id, record.frame_index, keypoints)
    return [
        KeypointGroup(frame_index, {cid: views[cid] for cid in sorted(views)})
        for frame_index, views in sorted(frames.items())
    ]


def load_keypoints(path: PathLike) -> List[KeypointGroup]:
    """
    Load a JSON-lines keypoint file grouped by frame.

    Records may appear in any order; groups come back sorted by frame index
    with views keyed by camera id in sorted order. ``null`` keypoints stay absent.

    Raises:
        FormatError: On schema violations (e.g. confidence outside [0, 1]) or duplicate records
    """
    records = []
    for line_no, line in enumerate(_read_text(path).splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as e:
            raise FormatError(f"invalid JSON: {e}", field_path=f"line {line_no}")
        records.append((f"line {line_no}", _parse(KeypointRecord, raw, prefix=f"line {line_no}")))
    groups = group_keypoints(records)
    logger.info(f"Loaded {len(groups)} keypoint frames from {path}")
    return groups


def save_keypoints(groups: Iterable[KeypointGroup], path: PathLike) -> None:
    lines = []
    for group in groups:
        for camera_id, view in group.views.items():
            keypoints = [
                None if kp is None else [float(kp.u), float(kp.v), float(kp.confidence)]
                for kp in view.keypoints
            ]
            lines.append(json.dumps({"frame_index": group.frame_index, "camera_id": camera_id, "keypoints": keypoints}))
    _write_text(path, "\n".join(lines) + "\n")


# ─── Pose and marker sequences ───────────────────────────────────────────────

def pose_to_record(seq: PoseSequence) -> PoseSequenceFile:
    return PoseSequenceFile(
        sample_rate_hz=float(seq.sample_rate_hz),
        joint_names=list(seq.skeleton.joint_names),
        frames=seq.frames.tolist(),
    )


def pose_from_record(record: PoseSequenceFile) -> PoseSequence:
    if record.joint_names is not None and tuple(record.joint_names) != COCO17.joint_names:
        raise FormatError("joint order differs from COCO-17", field_path="joint_names")
    return PoseSequence(record.sample_rate_hz, np.asarray(record.frames, dtype=float))


def save_pose_sequence(seq: PoseSequence, path: PathLike) -> None:
    write_json(path, pose_to_record(seq))


def load_pose_sequence(path: PathLike) -> PoseSequence:
    """
    Load a pose sequence written by ``save_pose_sequence``.

    Raises:
        FormatError: If the file is corrupted or the joint names disagree with COCO-17
    """
    return pose_from_record(_parse(PoseSequenceFile, _read_json(path)))


def save_marker_sequence(seq: MarkerSequence, path: PathLike) -> None:
    frames = [
        [seq.frames[t, m].tolist() if seq.visibility[t, m] else None for m in range(len(seq.marker_names))]
        for t in range(seq.n_frames)
    ]
    write_json(path, {
        "sample_rate_hz": float(seq.sample_rate_hz),
        "marker_names": list(seq.marker_names),
        "frames": frames,
    })


def load_marker_sequence(path: PathLike) -> MarkerSequence:
    record = _parse(MarkerSequenceFile, _read_json(path))
    n_markers = len(record.marker_names)
    frames = np.full((len(record.frames), n_markers, 3), np.nan)
    visibility = np.zeros((len(record.frames), n_markers), dtype=bool)
    for t, frame in enumerate(record.frames):
        for m, point in enumerate(frame):
            if point is not None:
                frames[t, m] = point
                visibility[t, m] = True
    return MarkerSequence(record.sample_rate_hz, tuple(record.marker_names), frames, visibility)


# ─── Offset models ───────────────────────────────────────────────────────────

def save_offset_model(model: JointOffsetModel, path: PathLike) -> None:
    write_json(path, {
        joint: {"markers": list(offset.markers), "w": offset.w.tolist()}
        for joint, offset in model.offsets.items()
    })


def load_offset_model(path: PathLike) -> JointOffsetModel:
    record = _parse(OffsetModelFile, _read_json(path))
    return JointOffsetModel({
        joint: JointOffset(joint, entry.markers, np.asarray(entry.w, dtype=float))
        for joint, entry in record.joints.items()
    })


def load_overrides(path: PathLike) -> Dict[str, tuple]:
    """Manual marker-triple table: ``{joint: [m1, m2, m3]}``."""
    data = _read_json(path)
    if not isinstance(data, dict):
        raise FormatError("override table must map joint names to marker triples", field_path="<root>")
    table = {}
    for joint, triple in data.items():
        if not (isinstance(triple, list) and len(triple) == 3 and all(isinstance(m, str) for m in triple)):
            raise FormatError("expected three marker names", field_path=joint)
        table[joint] = tuple(triple)
    return table


# ─── Calibration inputs ──────────────────────────────────────────────────────

def load_planar_correspondences(path: PathLike) -> Dict[str, PlanarCameraRecord]:
    """Planar-board correspondences keyed by camera id (insertion order kept)."""
    return _parse(PlanarCorrespondences, _read_json(path)).cameras


def load_observations(path: PathLike) -> List[ObservationRecord]:
    data = _read_json(path)
    if isinstance(data, dict):
        data = data.get("observations")
    if not isinstance(data, list):
        raise FormatError("observations must be a list of records", field_path="<root>")
    return [_parse(ObservationRecord, item, prefix=f"[{i}]") for i, item in enumerate(data)]


# ─── Reports ─────────────────────────────────────────────────────────────────

def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    """Write a CSV report; floats keep full precision."""
    try:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        with target.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    except OSError as e:
        raise PoseIOError(f"Cannot write {path}: {e}")


def load_config(path: PathLike) -> Dict[str, Any]:
    """
    Load a JSON file of record for a command.

    Raises:
        FormatError: If the top level is not an object
    """
    data = _read_json(path)
    if not isinstance(data, dict):
        raise FormatError("config file must hold a JSON object", field_path="<root>")
    return data
