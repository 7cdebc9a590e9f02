import csv
import json

import pytest

from posecap.cli import main


def _read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def scene(tmp_path):
    out = tmp_path / "scene"
    code = main(["--seed", "3", "synth", "--out-dir", str(out), "--duration", "1.0",
                 "--noise", "1.0", "--swap-probability", "0.02"])
    assert code == 0
    return out


def test_full_round_trip(scene, tmp_path):
    pred = tmp_path / "pred.json"
    assert main(["reconstruct", "--rig", str(scene / "rig.json"), "--keypoints", str(scene / "keypoints.jsonl"),
                 "--out", str(pred), "--diagnostics", str(tmp_path / "selection.csv")]) == 0
    assert main(["evaluate", "--pred", str(pred), "--gt", str(scene / "gt.json"), "--name", "swing",
                 "--out", str(tmp_path / "metrics.csv")]) == 0
    assert main(["stats", str(pred), "--out-dir", str(tmp_path / "stats")]) == 0

    rows = _read_rows(tmp_path / "metrics.csv")
    overall = [row for row in rows if row["joint"] == "overall"][0]
    assert overall["sequence"] == "swing"
    assert float(overall["mpjpe_mm"]) < 20.0
    assert (tmp_path / "stats" / "local_movement_auc.csv").exists()


def test_manifest_records_seed(scene):
    manifest = json.loads((scene / "manifest.json").read_text())
    assert manifest["seed"] == 3
    assert manifest["scene"]["corruption"]["swap_probability"] == 0.02


def test_calibrate_and_fit_offsets(tmp_path):
    out = tmp_path / "burst"
    assert main(["synth", "--out-dir", str(out), "--motion", "composite-burst", "--duration", "1.0"]) == 0
    assert main(["calibrate", "--correspondences", str(out / "calibration.json"),
                 "--observations", str(out / "observations.json"), "--out", str(tmp_path / "rig.json")]) == 0
    assert main(["fit-offsets", "--markers", str(out / "markers.json"), "--joints", str(out / "gt.json"),
                 "--overrides", str(out / "marker_triples.json"), "--out", str(tmp_path / "offsets.json"),
                 "--report", str(tmp_path / "offsets.csv")]) == 0
    assert main(["evaluate", "--pred", str(out / "gt.json"), "--gt", str(out / "markers.json"),
                 "--offsets", str(tmp_path / "offsets.json"), "--out", str(tmp_path / "metrics.csv")]) == 0


def test_missing_input_fails(tmp_path):
    code = main(["reconstruct", "--rig", str(tmp_path / "missing.json"), "--keypoints", str(tmp_path / "kp.jsonl"),
                 "--out", str(tmp_path / "pred.json")])
    assert code == 1


def test_single_camera_synth_fails(tmp_path):
    assert main(["synth", "--out-dir", str(tmp_path / "scene"), "--n-cameras", "1"]) == 1


def test_mismatched_evaluate_pairs(tmp_path):
    assert main(["evaluate", "--pred", "a.json", "--pred", "b.json", "--gt", "a.json",
                 "--out", str(tmp_path / "m.csv")]) == 1


def test_flags_override_config_file(scene, tmp_path):
    config = tmp_path / "reconstruct.json"
    config.write_text(json.dumps({
        "rig": str(scene / "rig.json"),
        "keypoints": str(scene / "keypoints.jsonl"),
        "output": str(tmp_path / "pred.json"),
        "filter": {"order": 4, "cutoff_hz": 60.0},
    }))

    assert main(["--config", str(config), "reconstruct"]) == 1
    assert main(["--config", str(config), "reconstruct", "--cutoff-hz", "8"]) == 0
    assert (tmp_path / "pred.json").exists()


def test_linear_motion_speed(tmp_path):
    out = tmp_path / "linear"
    assert main(["synth", "--out-dir", str(out), "--motion", "linear", "--duration", "1.0"]) == 0
    assert main(["stats", str(out / "gt.json"), "--out-dir", str(tmp_path / "stats")]) == 0

    summary = {row["group"]: row for row in _read_rows(tmp_path / "stats" / "kinematics_summary.csv")}
    for group in ("wrists", "ankles", "hips"):
        assert float(summary[group]["mean_speed_m_s"]) == pytest.approx(1.0, abs=1e-9)


def test_config_seed_is_kept(tmp_path):
    config = tmp_path / "synth.json"
    config.write_text(json.dumps({"motion": {"duration_s": 0.5}, "corruption": {"seed": 42, "pixel_noise_sigma": 1.0}}))

    assert main(["--config", str(config), "synth", "--out-dir", str(tmp_path / "a")]) == 0
    assert json.loads((tmp_path / "a" / "manifest.json").read_text())["seed"] == 42

    assert main(["--config", str(config), "--seed", "7", "synth", "--out-dir", str(tmp_path / "b")]) == 0
    assert json.loads((tmp_path / "b" / "manifest.json").read_text())["seed"] == 7
