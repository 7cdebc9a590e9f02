import json
import random

import numpy as np
import pytest

from posecap.core import io
from posecap.core.errors import ConfigurationError, FormatError, PoseIOError
from posecap.core.types import MarkerSequence


def test_rig_round_trip(rig, tmp_path):
    path = tmp_path / "rig.json"
    io.save_rig(rig, path)
    loaded = io.load_rig(path)

    assert loaded.camera_ids == rig.camera_ids
    for a, b in zip(rig, loaded):
        assert np.array_equal(a.K, b.K)
        assert np.array_equal(a.R, b.R)
        assert np.array_equal(a.t, b.t)
        assert a.image_size == b.image_size


def test_rig_duplicate_ids_rejected(rig, tmp_path):
    path = tmp_path / "rig.json"
    io.save_rig(rig, path)
    data = json.loads(path.read_text())
    data[1]["camera_id"] = data[0]["camera_id"]
    path.write_text(json.dumps(data))

    with pytest.raises(ConfigurationError):
        io.load_rig(path)


def test_rig_bad_field_named(rig, tmp_path):
    path = tmp_path / "rig.json"
    io.save_rig(rig, path)
    data = json.loads(path.read_text())
    data[2]["image_size"] = [0, 1200]
    path.write_text(json.dumps(data))

    with pytest.raises(FormatError) as exc:
        io.load_rig(path)
    assert exc.value.field_path.startswith("[2].image_size")


def test_missing_file_is_io_error(tmp_path):
    with pytest.raises(PoseIOError):
        io.load_rig(tmp_path / "nope.json")


def test_keypoints_order_independent(clean_groups, tmp_path):
    path = tmp_path / "kp.jsonl"
    io.save_keypoints(clean_groups, path)
    lines = path.read_text().splitlines()
    random.Random(3).shuffle(lines)
    shuffled = tmp_path / "shuffled.jsonl"
    shuffled.write_text("\n".join(lines) + "\n")

    a = io.load_keypoints(path)
    b = io.load_keypoints(shuffled)
    assert a == b
    assert [g.frame_index for g in b] == sorted(g.frame_index for g in b)


def test_keypoint_confidence_out_of_range(tmp_path):
    path = tmp_path / "kp.jsonl"
    record = {"frame_index": 0, "camera_id": "cam0", "keypoints": [[10.0, 20.0, 1.5]]}
    path.write_text(json.dumps(record) + "\n")

    with pytest.raises(FormatError) as exc:
        io.load_keypoints(path)
    assert exc.value.field_path.startswith("line 1.keypoints")


def test_keypoint_duplicate_record(tmp_path):
    path = tmp_path / "kp.jsonl"
    record = json.dumps({"frame_index": 0, "camera_id": "cam0", "keypoints": [None] * 17})
    path.write_text(f"{record}\n\n{record}\n")

    with pytest.raises(FormatError) as exc:
        io.load_keypoints(path)
    assert exc.value.field_path == "line 3"


def test_pose_sequence_bit_exact(swing, tmp_path):
    path = tmp_path / "pose.json"
    io.save_pose_sequence(swing, path)
    loaded = io.load_pose_sequence(path)

    assert loaded.sample_rate_hz == swing.sample_rate_hz
    assert np.array_equal(loaded.frames, swing.frames)


def test_pose_sequence_wrong_joint_count(tmp_path):
    path = tmp_path / "pose.json"
    path.write_text(json.dumps({"sample_rate_hz": 90.0, "frames": [[[0.0, 0.0, 0.0]] * 16]}))

    with pytest.raises(FormatError) as exc:
        io.load_pose_sequence(path)
    assert "frames" in exc.value.field_path


def test_marker_sequence_keeps_occlusions(tmp_path):
    frames = np.arange(2 * 3 * 3, dtype=float).reshape(2, 3, 3)
    visibility = np.array([[True, False, True], [True, True, True]])
    seq = MarkerSequence(100.0, ("a", "b", "c"), frames, visibility)
    path = tmp_path / "markers.json"
    io.save_marker_sequence(seq, path)

    assert json.loads(path.read_text())["frames"][0][1] is None
    loaded = io.load_marker_sequence(path)
    assert np.array_equal(loaded.visibility, visibility)
    assert np.isnan(loaded.frames[0, 1]).all()
    assert np.array_equal(loaded.frames[1], frames[1])


def test_overrides_need_three_names(tmp_path):
    path = tmp_path / "overrides.json"
    path.write_text(json.dumps({"nose": ["a", "b"]}))

    with pytest.raises(FormatError) as exc:
        io.load_overrides(path)
    assert exc.value.field_path == "nose"


def test_config_must_be_object(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("[1, 2]")

    with pytest.raises(FormatError):
        io.load_config(path)


def test_csv_keeps_full_precision(tmp_path):
    path = tmp_path / "report.csv"
    io.write_csv(path, ("name", "value"), [("x", 0.1 + 0.2), ("y", np.float64(1 / 3))])

    lines = path.read_text().splitlines()
    assert lines[0] == "name,value"
    assert float(lines[1].split(",")[1]) == 0.1 + 0.2
    assert float(lines[2].split(",")[1]) == 1 / 3


def test_planar_correspondence_layouts(tmp_path):
    view = [[0.0, 0.0, 960.0, 600.0], [0.1, 0.0, 1040.0, 600.0], [0.0, 0.1, 960.0, 680.0], [0.1, 0.1, 1040.0, 680.0]]
    keyed = tmp_path / "keyed.json"
    keyed.write_text(json.dumps({"camA": [view, view], "camB": {"image_size": [640, 480], "views": [view]}}))
    bare = tmp_path / "bare.json"
    bare.write_text(json.dumps([view, view, view]))

    cameras = io.load_planar_correspondences(keyed)
    assert list(cameras) == ["camA", "camB"]
    assert cameras["camB"].image_size == (640, 480)

    single = io.load_planar_correspondences(bare)
    assert list(single) == ["cam0"]
    assert len(single["cam0"].views) == 3
