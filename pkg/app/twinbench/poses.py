"""Camera poses and the ordered pose sets that pair ground truth with estimates."""
from dataclasses import dataclass, field
from typing import Dict, Iterator, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from .exceptions import GeometryError

# Quaternions are stored scalar-first (w, x, y, z) throughout twinbench.


def quaternion_to_matrix(quaternion: Sequence[float]) -> np.ndarray:
    w, x, y, z = quaternion
    return Rotation.from_quat([x, y, z, w]).as_matrix()


def matrix_to_quaternion(matrix: np.ndarray) -> np.ndarray:
    x, y, z, w = Rotation.from_matrix(matrix).as_quat()
    quaternion = np.array([w, x, y, z], dtype=np.float64)
    if quaternion[0] < 0:
        quaternion = -quaternion
    return quaternion / np.linalg.norm(quaternion)


@dataclass(frozen=True, eq=False)
class CameraPose:
    """
    Extrinsics of one rendered frame.

    ``rotation`` maps the camera frame to the world: camera -Z is the view
    direction and camera +Y is up before roll.
    """
    position: np.ndarray
    rotation: np.ndarray
    roll: float = 0.0
    vertical_fov: float = 23.0
    index: int = 0

    def __post_init__(self) -> None:
        position = np.asarray(self.position, dtype=np.float64).reshape(3)
        rotation = np.asarray(self.rotation, dtype=np.float64).reshape(4)
        if not (np.all(np.isfinite(position)) and np.all(np.isfinite(rotation))):
            raise GeometryError("camera pose has a non-finite component")
        norm = np.linalg.norm(rotation)
        if norm == 0:
            raise GeometryError("camera rotation quaternion has zero norm")
        object.__setattr__(self, "position", position)
        object.__setattr__(self, "rotation", rotation / norm)

    @property
    def rotation_matrix(self) -> np.ndarray:
        return quaternion_to_matrix(self.rotation)

    @property
    def view_direction(self) -> np.ndarray:
        return self.rotation_matrix @ np.array([0.0, 0.0, -1.0])

    @property
    def up(self) -> np.ndarray:
        return self.rotation_matrix @ np.array([0.0, 1.0, 0.0])

    def with_index(self, index: int) -> "CameraPose":
        return CameraPose(self.position, self.rotation, self.roll, self.vertical_fov, index)

    def __repr__(self) -> str:
        return (f"CameraPose(index={self.index}, position={self.position.tolist()}, "
                f"rotation={self.rotation.tolist()}, roll={self.roll})")


@dataclass(frozen=True, eq=False)
class PoseSet:
    """Ordered camera poses; position in the set defines pairing."""
    poses: Tuple[CameraPose, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "poses", tuple(self.poses))

    def __len__(self) -> int:
        return len(self.poses)

    def __iter__(self) -> Iterator[CameraPose]:
        return iter(self.poses)

    def __getitem__(self, item: int) -> CameraPose:
        return self.poses[item]

    @property
    def positions(self) -> np.ndarray:
        if not self.poses:
            return np.zeros((0, 3))
        return np.stack([pose.position for pose in self.poses])

    @property
    def centroid(self) -> np.ndarray:
        if not self.poses:
            raise GeometryError("empty pose set has no centroid")
        return self.positions.mean(axis=0)

    @property
    def indices(self) -> Tuple[int, ...]:
        return tuple(pose.index for pose in self.poses)

    def by_index(self) -> Dict[int, CameraPose]:
        return {pose.index: pose for pose in self.poses}
