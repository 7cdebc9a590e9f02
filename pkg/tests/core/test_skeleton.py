import numpy as np
import pytest

from posecap.core.errors import ConfigurationError, ShapeError
from posecap.core.skeleton import COCO17
from posecap.core.types import CameraParams, CameraRig, PoseSequence


def test_coco_order():
    assert COCO17.n_joints == 17
    assert COCO17.joint_names[0] == "nose"
    assert COCO17.joint_index("right_ankle") == 16


def test_mirror_map_is_an_involution():
    mirror = COCO17.mirror_map
    assert all(mirror[mirror[i]] == i for i in range(COCO17.n_joints))
    assert mirror[0] == 0
    assert len(COCO17.pairs()) == 8


def test_groups():
    assert COCO17.group("wrists") == (9, 10)
    with pytest.raises(ConfigurationError):
        COCO17.group("tails")
    with pytest.raises(ConfigurationError):
        COCO17.joint_index("tail")


def test_pose_sequence_shape_checked():
    with pytest.raises(ShapeError):
        PoseSequence(90.0, np.zeros((4, 16, 3)))
    with pytest.raises(ShapeError):
        PoseSequence(90.0, np.full((4, 17, 3), np.nan))


def test_pose_sequence_is_read_only(swing):
    with pytest.raises(ValueError):
        swing.frames[0, 0, 0] = 1.0


def test_rig_needs_two_cameras():
    cam = CameraParams("a", 800.0, 800.0, 960.0, 600.0, np.eye(3), np.zeros(3))
    with pytest.raises(ConfigurationError):
        CameraRig((cam,))
    with pytest.raises(ConfigurationError):
        CameraRig((cam, cam))


def test_camera_rejects_non_rotation():
    with pytest.raises(ConfigurationError):
        CameraParams("a", 800.0, 800.0, 960.0, 600.0, 2 * np.eye(3), np.zeros(3))
