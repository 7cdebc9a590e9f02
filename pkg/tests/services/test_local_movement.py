import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from posecap.core.errors import ArityError, SpecError
from posecap.schemas.pipeline import LimbChain, LocalMovementConfig
from posecap.services.local_movement import (cover_ratio, limb_length, local_movement_auc, local_movement_curve,
                                             sequence_local_movement, to_local_frame)


def test_static_points():
    points = np.tile([0.3, -0.2, 0.7], (40, 1))
    assert local_movement_auc(points) == pytest.approx(1 / 40)


def test_static_sequence(static):
    F = static.n_frames
    assert local_movement_auc(static) == pytest.approx(1 / (2 * F))
    assert local_movement_auc(static, LocalMovementConfig(chain=LimbChain.ANKLE)) == pytest.approx(1 / (2 * F))


def test_cover_ratio_grows_on_nested_grids():
    rng = np.random.default_rng(0)
    for _ in range(100):
        points = rng.normal(size=(int(rng.integers(1, 200)), 3))
        covers = [cover_ratio(points, 2.0 ** -k) for k in range(8)]
        assert all(a <= b for a, b in zip(covers, covers[1:]))
        assert all(0 < c <= 1 for c in covers)


def test_curve_shape():
    ratios, covers = local_movement_curve(np.random.default_rng(1).normal(size=(50, 3)))
    assert len(ratios) == len(covers) == 50
    assert np.all(np.diff(ratios) < 0)
    assert ratios[0] == pytest.approx(1.0)
    assert ratios[-1] == pytest.approx(1e-3)


def test_rigid_motion_does_not_change_local_points(swing):
    rng = np.random.default_rng(2)
    jittered = swing.replace_frames(swing.frames + rng.normal(0.0, 0.01, swing.frames.shape))
    Q = Rotation.from_euler("zxy", [1.0, 0.2, -0.3]).as_matrix()
    moved = jittered.replace_frames(jittered.frames @ Q.T + np.array([3.0, -2.0, 0.5]))

    a = to_local_frame(jittered)
    b = to_local_frame(moved)
    np.testing.assert_allclose(a.points, b.points, atol=1e-9)
    assert a.limb_length == pytest.approx(b.limb_length)


def test_mirrored_pose_collapses(static):
    points = to_local_frame(static)
    np.testing.assert_allclose(points.anchor_side, points.mirrored, atol=1e-12)


def test_limb_length(static):
    assert limb_length(static, LimbChain.WRIST) == pytest.approx(0.30 + 0.27)
    assert limb_length(static, LimbChain.ANKLE) == pytest.approx(0.45 + 0.42)


def test_surface_covers_more_than_arc():
    rng = np.random.default_rng(3)
    directions = rng.normal(size=(2000, 3))
    sphere = 0.5 * directions / np.linalg.norm(directions, axis=1, keepdims=True)
    angles = rng.uniform(0.0, np.pi / 2, 2000)
    arc = 0.5 * np.column_stack([np.cos(angles), np.zeros(2000), -np.sin(angles)])

    assert local_movement_auc(sphere) > local_movement_auc(arc)


def test_nonpositive_voxel():
    with pytest.raises(SpecError):
        cover_ratio(np.zeros((3, 3)), 0.0)
    with pytest.raises(SpecError):
        cover_ratio(np.zeros((3, 3)), -0.1)


def test_no_points():
    with pytest.raises(ArityError):
        cover_ratio(np.zeros((0, 3)), 0.1)


def test_subsample_is_deterministic(swing, static):
    first = sequence_local_movement([swing, static], subsample=20, seed=7)
    second = sequence_local_movement([swing, static], subsample=20, seed=7)

    assert first.n_frames == 20
    assert first.auc == second.auc
    np.testing.assert_array_equal(first.covers, second.covers)


def test_no_sequences():
    with pytest.raises(ArityError):
        sequence_local_movement([])
