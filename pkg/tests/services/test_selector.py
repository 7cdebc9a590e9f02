import itertools

import numpy as np
import pytest

from posecap.core.errors import ArityError, GapError, StructuralError
from posecap.core.skeleton import COCO17
from posecap.schemas.pipeline import PruneConfig
from posecap.schemas.synth import CorruptionSpec, MotionKind, MotionSpec
from posecap.services.selector import (build_layers, edge_weights, enumerate_subsets, path_cost,
                                       prune_cameras, select_baseline, select_trajectories,
                                       select_trajectories_with_diagnostics, shortest_path)
from posecap.services.synth import gen_motion, render_keypoints

LEFT_WRIST = COCO17.joint_index("left_wrist")


@pytest.mark.parametrize("K", range(2, 9))
def test_subset_count(K):
    subsets = enumerate_subsets([f"cam{i}" for i in range(K)])
    assert len(subsets) == 2 ** K - K - 1
    assert len(set(subsets)) == len(subsets)


def test_subset_order():
    subsets = enumerate_subsets(["c", "a", "b"])
    assert subsets == [("a", "b"), ("a", "c"), ("b", "c"), ("a", "b", "c")]


def test_subsets_need_two_cameras():
    with pytest.raises(ArityError):
        enumerate_subsets(["cam0"])


def test_prune_lowest_first():
    kept = prune_cameras({"a": 0.9, "b": 0.1, "c": 0.2, "d": 0.3, "e": 0.8}, PruneConfig(max_removed=2))
    assert kept == ("a", "d", "e")


def test_prune_keeps_two_cameras():
    kept = prune_cameras({"a": 0.1, "b": 0.2, "c": 0.3}, PruneConfig(max_removed=5))
    assert kept == ("b", "c")


def test_prune_ties_broken_by_id():
    kept = prune_cameras({"d": 0.1, "a": 0.9, "c": 0.1, "b": 0.1}, PruneConfig(max_removed=1))
    assert kept == ("a", "c", "d")


def test_prune_above_threshold_untouched():
    confidences = {"a": 0.6, "b": 0.7, "c": 0.55}
    assert prune_cameras(confidences) == ("a", "b", "c")


def _brute_force(positions):
    weights = [edge_weights(a, b) for a, b in zip(positions, positions[1:])]
    best = None
    for path in itertools.product(*(range(len(p)) for p in positions)):
        cost = 0.0
        for t, w in enumerate(weights):
            cost = cost + w[path[t], path[t + 1]]
        if best is None or cost < best:
            best = cost
    return best


def _dp_cost(positions, path):
    weights = [edge_weights(a, b) for a, b in zip(positions, positions[1:])]
    cost = 0.0
    for t, w in enumerate(weights):
        cost = cost + w[path[t], path[t + 1]]
    return cost


def test_shortest_path_matches_exhaustive_search():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n_layers = int(rng.integers(2, 6))
        positions = [rng.normal(size=(int(rng.integers(1, 7)), 3)) for _ in range(n_layers)]
        path = shortest_path(positions)

        assert len(path) == n_layers
        assert _dp_cost(positions, path) == pytest.approx(_brute_force(positions), abs=1e-12)


def test_four_layers_of_five():
    rng = np.random.default_rng(1)
    positions = [rng.normal(size=(5, 3)) for _ in range(4)]
    assert _dp_cost(positions, shortest_path(positions)) == pytest.approx(_brute_force(positions), abs=1e-12)


def test_stationary_chain_beats_jumping_chain():
    positions = [
        np.array([[5.0, 0.0, 0.0], [0.0, 0.0, 1.0]]),
        np.array([[-5.0, 0.0, 0.0], [0.01, 0.0, 1.0]]),
        np.array([[5.0, 0.0, 0.0], [0.0, 0.01, 1.0]]),
    ]
    costs = {path: _dp_cost(positions, path) for path in itertools.product(range(2), repeat=3)}

    assert len(costs) == 8
    assert min(costs, key=costs.get) == (1, 1, 1)
    assert shortest_path(positions) == [1, 1, 1]


def test_cost_ignores_node_order():
    rng = np.random.default_rng(2)
    for _ in range(20):
        positions = [rng.normal(size=(int(rng.integers(1, 7)), 3)) for _ in range(4)]
        shuffled = [layer[rng.permutation(len(layer))] for layer in positions]

        a = path_cost(positions, shortest_path(positions))
        b = path_cost(shuffled, shortest_path(shuffled))
        assert a == pytest.approx(b, abs=1e-12)


def test_translation_keeps_selection():
    rng = np.random.default_rng(3)
    for _ in range(20):
        positions = [rng.normal(size=(int(rng.integers(1, 7)), 3)) for _ in range(5)]
        d = rng.uniform(-10.0, 10.0, 3)
        assert shortest_path([layer + d for layer in positions]) == shortest_path(positions)


def test_shortest_path_single_layer():
    assert shortest_path([np.zeros((3, 3))]) == [0]


def test_shortest_path_empty_layer():
    with pytest.raises(StructuralError):
        shortest_path([np.zeros((2, 3)), np.zeros((0, 3)), np.zeros((2, 3))])


def test_shortest_path_ties_pick_lowest_index():
    p = np.ones((3, 3))
    assert shortest_path([p, p, p]) == [0, 0, 0]


def test_path_cost():
    layers = [np.array([[0.0, 0.0, 0.0]]), np.array([[3.0, 4.0, 0.0]]), np.array([[3.0, 4.0, 1.0]])]
    assert path_cost(layers, [0, 0, 0]) == pytest.approx(6.0)


def test_build_layers_follow_subset_order(rig, clean_groups):
    detections = [g.detections(LEFT_WRIST) for g in clean_groups[:3]]
    layers = build_layers(detections, rig)

    assert len(layers) == 3
    assert len(layers[0]) == 2 ** len(rig) - len(rig) - 1
    assert layers[0].subsets == tuple(enumerate_subsets(rig.camera_ids))
    assert layers[0].bitmasks[0] == 0b11


def test_clean_sequence_is_recovered(rig):
    gt = gen_motion(MotionSpec(kind=MotionKind.SWING, duration_s=200 / 90))
    assert gt.n_frames == 200
    groups = render_keypoints(gt, rig, CorruptionSpec()).groups

    selected = select_trajectories(groups, rig)
    assert np.max(np.abs(selected.frames - gt.frames)) < 1e-6


def test_gap_names_joint_and_frame(rig, clean_groups, drop_detections):
    groups = drop_detections(clean_groups, frame=10, joint=LEFT_WRIST, keep=1)

    with pytest.raises(GapError) as exc:
        select_trajectories(groups, rig)
    assert exc.value.joint == "left_wrist"
    assert exc.value.frame == 10


def test_gap_interpolated(rig, clean_groups, drop_detections):
    groups = drop_detections(clean_groups, frame=10, joint=LEFT_WRIST, keep=0)
    selected = select_trajectories(groups, rig, interpolate_gaps=True)

    wrist = selected.frames[:, LEFT_WRIST]
    np.testing.assert_allclose(wrist[10], 0.5 * (wrist[9] + wrist[11]), atol=1e-12)


def test_gap_at_boundary_not_interpolated(rig, clean_groups, drop_detections):
    groups = drop_detections(clean_groups, frame=0, joint=LEFT_WRIST, keep=1)

    with pytest.raises(GapError) as exc:
        select_trajectories(groups, rig, interpolate_gaps=True)
    assert exc.value.frame == 0


def test_long_gap_not_interpolated(rig, clean_groups, drop_detections):
    groups = clean_groups
    for frame in range(10, 17):
        groups = drop_detections(groups, frame=frame, joint=LEFT_WRIST, keep=0)

    with pytest.raises(GapError):
        select_trajectories(groups, rig, interpolate_gaps=True)


def test_thread_count_does_not_change_output(rig):
    gt = gen_motion(MotionSpec(duration_s=0.3))
    groups = render_keypoints(gt, rig, CorruptionSpec(pixel_noise_sigma=2.0, swap_probability=0.05, seed=4)).groups

    one = select_trajectories_with_diagnostics(groups, rig, threads=1)
    four = select_trajectories_with_diagnostics(groups, rig, threads=4)
    assert np.array_equal(one.sequence.frames, four.sequence.frames)
    assert one.diagnostics == four.diagnostics


def test_low_confidence_swaps_are_pruned(rig, swing):
    corruption = CorruptionSpec(swap_probability=1.0, swap_joints=["left_wrist"], swap_cameras=["cam0"])
    rendered = render_keypoints(swing, rig, corruption)
    assert len(rendered.events) == 2 * swing.n_frames

    selected = select_trajectories(rendered.groups, rig)
    assert np.max(np.abs(selected.frames - swing.frames)) < 1e-6


def test_baseline_uses_every_camera(rig, swing):
    corruption = CorruptionSpec(swap_probability=1.0, swap_joints=["left_wrist"], swap_cameras=["cam0"])
    groups = render_keypoints(swing, rig, corruption).groups

    result = select_trajectories_with_diagnostics(groups, rig, all_cameras_only=True)
    assert {row[2] for row in result.diagnostics} == {2 ** len(rig) - 1}
    baseline = select_baseline(groups, rig)
    assert np.array_equal(baseline.frames, result.sequence.frames)
    assert np.max(np.abs(baseline.frames[:, LEFT_WRIST] - swing.frames[:, LEFT_WRIST])) > 1e-3


def test_diagnostic_rows(rig, clean_groups):
    result = select_trajectories_with_diagnostics(clean_groups, rig)
    rows = result.diagnostics

    assert len(rows) == len(clean_groups) * COCO17.n_joints
    assert rows[0][:2] == (0, "nose")
    assert rows[COCO17.n_joints][:2] == (1, "nose")
    assert all(row[3] == 0.0 for row in rows[:COCO17.n_joints])
    assert all(0 < row[2] < 2 ** len(rig) and bin(row[2]).count("1") >= 2 for row in rows)
