import numpy as np
import pytest
from fastapi.testclient import TestClient

from posecap.core.types import KeypointFrame, KeypointGroup
from posecap.main import app
from posecap.schemas.synth import CorruptionSpec, MotionKind, MotionSpec
from posecap.services.synth import gen_motion, make_rig, render_keypoints


@pytest.fixture(scope="session")
def client():
    return TestClient(app)


@pytest.fixture(scope="session")
def rig():
    return make_rig()


@pytest.fixture(scope="session")
def swing():
    # 45 frames at 90 Hz
    return gen_motion(MotionSpec(kind=MotionKind.SWING, duration_s=0.5))


@pytest.fixture(scope="session")
def static():
    return gen_motion(MotionSpec(kind=MotionKind.STATIC, duration_s=0.5))


@pytest.fixture(scope="session")
def burst():
    return gen_motion(MotionSpec(kind=MotionKind.BURST, duration_s=1.0))


@pytest.fixture(scope="session")
def clean_groups(swing, rig):
    return render_keypoints(swing, rig, CorruptionSpec()).groups


def _drop_detections(groups, frame, joint, keep=1):
    """Copy of ``groups`` with ``joint`` at ``frame`` visible in only ``keep`` cameras."""
    out = []
    for group in groups:
        if group.frame_index != frame:
            out.append(group)
            continue
        views = {}
        for n, (camera_id, view) in enumerate(group.views.items()):
            keypoints = list(view.keypoints)
            if n >= keep:
                keypoints[joint] = None
            views[camera_id] = KeypointFrame(camera_id, view.frame_index, tuple(keypoints))
        out.append(KeypointGroup(group.frame_index, views))
    return out


def _max_joint_error(a, b) -> float:
    return float(np.max(np.linalg.norm(np.asarray(a) - np.asarray(b), axis=-1)))


@pytest.fixture
def drop_detections():
    return _drop_detections


@pytest.fixture
def max_joint_error():
    return _max_joint_error
