import numpy as np
import pytest

from posecap.core import io
from posecap.schemas.camera import CameraRecord
from posecap.services.synth import render_keypoints


def _payload(rig, groups, **options):
    keypoints = [
        {
            "frame_index": group.frame_index,
            "camera_id": camera_id,
            "keypoints": [None if kp is None else [kp.u, kp.v, kp.confidence] for kp in view.keypoints],
        }
        for group in groups for camera_id, view in group.views.items()
    ]
    rig_json = [CameraRecord.from_params(cam).model_dump(mode="json") for cam in rig]
    return {"rig": rig_json, "keypoints": keypoints, **options}


@pytest.fixture(scope="module")
def static_groups(static, rig):
    return render_keypoints(static, rig).groups


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json()["status"] == "healthy"
    assert "X-Process-Time-ms" in resp.headers


def test_reconstruct_static_scene(client, rig, static, static_groups):
    resp = client.post("/api/v0/reconstruct/", json=_payload(rig, static_groups))
    assert resp.status_code == 200

    data = resp.json()
    frames = np.asarray(data["sequence"]["frames"])
    assert frames.shape == (static.n_frames, 17, 3)
    np.testing.assert_allclose(frames, static.frames, atol=1e-4)
    assert len(data["diagnostics"]) == static.n_frames * 17
    assert {row["joint"] for row in data["diagnostics"]} == set(static.skeleton.joint_names)


def test_reconstruct_skip_smoothing(client, rig, static_groups):
    resp = client.post("/api/v0/reconstruct/", json=_payload(rig, static_groups, skip_smoothing=True))
    assert resp.status_code == 200
    assert resp.json()["sequence"]["sample_rate_hz"] == 90.0


def test_gap_is_rejected(client, rig, static_groups, drop_detections):
    groups = drop_detections(static_groups, frame=10, joint=9, keep=1)
    resp = client.post("/api/v0/reconstruct/", json=_payload(rig, groups))

    assert resp.status_code == 422
    body = resp.json()
    assert body["error"] == "GapError"
    assert body["joint"] == "left_wrist"
    assert body["frame"] == 10


def test_filter_order_is_validated(client, rig, static_groups):
    resp = client.post("/api/v0/reconstruct/", json=_payload(rig, static_groups, filter={"order": 3}))
    assert resp.status_code == 422
    assert isinstance(resp.json()["detail"], list)


def test_rig_needs_two_cameras(client, rig, static_groups):
    payload = _payload(rig, static_groups)
    payload["rig"] = payload["rig"][:1]
    assert client.post("/api/v0/reconstruct/", json=payload).status_code == 422


def test_pose_record_round_trip(static):
    record = io.pose_to_record(static)
    np.testing.assert_array_equal(io.pose_from_record(record).frames, static.frames)
