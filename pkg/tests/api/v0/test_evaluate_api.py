import pytest

from posecap.core import io


def _record(seq):
    return io.pose_to_record(seq).model_dump(mode="json")


def test_identical_pair(client, swing):
    resp = client.post("/api/v0/evaluate/", json={"pairs": [{"name": "swing", "pred": _record(swing), "gt": _record(swing)}]})
    assert resp.status_code == 200

    rows = resp.json()["rows"]
    assert len(rows) == 18
    overall = [row for row in rows if row["sequence"] == "swing" and row["joint"] == "overall"][0]
    assert overall["mean_error_mm"] == 0.0
    assert overall["mpjpe_mm"] == 0.0
    assert overall["pa_mpjpe_mm"] == pytest.approx(0.0, abs=1e-6)
    assert overall["n_frames"] == swing.n_frames


def test_shape_mismatch(client, swing):
    short = swing.replace_frames(swing.frames[:10])
    resp = client.post("/api/v0/evaluate/", json={"pairs": [{"pred": _record(short), "gt": _record(swing)}]})

    assert resp.status_code == 422
    assert resp.json()["error"] == "ShapeError"


def test_duplicate_names(client, swing):
    pair = {"name": "a", "pred": _record(swing), "gt": _record(swing)}
    resp = client.post("/api/v0/evaluate/", json={"pairs": [pair, pair]})
    assert resp.status_code == 422


def test_wrong_joint_count(client, swing):
    record = _record(swing)
    record["frames"] = [frame[:16] for frame in record["frames"]]
    resp = client.post("/api/v0/evaluate/", json={"pairs": [{"pred": record, "gt": _record(swing)}]})
    assert resp.status_code == 422
