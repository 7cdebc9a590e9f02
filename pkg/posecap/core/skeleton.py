"""
COCO-17 skeleton conventions.

The joint order is the canonical COCO keypoint order used by 2D detectors
trained on COCO. Index conventions beyond "identical to COCO" are not fixed by
the capture protocol, so this ordering is the one every file format assumes.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from posecap.core.errors import ConfigurationError

JOINT_NAMES: Tuple[str, ...] = (
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
)

LIMB_PAIRS: Tuple[Tuple[int, int], ...] = (
    (0, 1), (0, 2), (1, 3), (2, 4),
    (3, 5), (4, 6),
    (5, 6), (5, 7), (7, 9), (6, 8), (8, 10),
    (5, 11), (6, 12), (11, 12),
    (11, 13), (13, 15), (12, 14), (14, 16),
)

# joint groups used by the statistics commands
GROUPS: Dict[str, Tuple[str, str]] = {
    "eyes": ("left_eye", "right_eye"),
    "ears": ("left_ear", "right_ear"),
    "shoulders": ("left_shoulder", "right_shoulder"),
    "elbows": ("left_elbow", "right_elbow"),
    "wrists": ("left_wrist", "right_wrist"),
    "hips": ("left_hip", "right_hip"),
    "knees": ("left_knee", "right_knee"),
    "ankles": ("left_ankle", "right_ankle"),
}


def _mirror_map(names: Tuple[str, ...]) -> Tuple[int, ...]:
    index = {name: i for i, name in enumerate(names)}
    mirrored = []
    for name in names:
        if name.startswith("left_"):
            mirrored.append(index["right_" + name[len("left_"):]])
        elif name.startswith("right_"):
            mirrored.append(index["left_" + name[len("right_"):]])
        else:
            mirrored.append(index[name])
    return tuple(mirrored)


@dataclass(frozen=True)
class Skeleton:
    """
    Ordered joint labels, limb connectivity and the left/right involution.

    Attributes:
        joint_names: 17 joint labels in COCO order
        limb_pairs: (parent_index, child_index) segments
        mirror_map: index of the left/right counterpart of every joint
    """
    joint_names: Tuple[str, ...] = JOINT_NAMES
    limb_pairs: Tuple[Tuple[int, int], ...] = LIMB_PAIRS
    mirror_map: Tuple[int, ...] = field(default_factory=lambda: _mirror_map(JOINT_NAMES))

    @property
    def n_joints(self) -> int:
        return len(self.joint_names)

    def joint_index(self, name: str) -> int:
        """
        Look up a joint index by label.

        Raises:
            ConfigurationError: If the label is not part of the skeleton
        """
        try:
            return self.joint_names.index(name)
        except ValueError:
            raise ConfigurationError(f"Unknown joint '{name}'")

    def pairs(self) -> List[Tuple[int, int]]:
        """Return (left_index, right_index) for every mirrored joint pair."""
        return [
            (i, j) for i, j in enumerate(self.mirror_map)
            if i != j and self.joint_names[i].startswith("left_")
        ]

    def group(self, name: str) -> Tuple[int, int]:
        """Indices of the (left, right) joints of a named group such as ``wrists``."""
        if name not in GROUPS:
            raise ConfigurationError(f"Unknown joint group '{name}'")
        left, right = GROUPS[name]
        return self.joint_index(left), self.joint_index(right)


COCO17 = Skeleton()
