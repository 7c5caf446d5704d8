"""
Camera rig geometry: smallest enclosing sphere, camera-sphere radius,
Fibonacci directions and look-at orientations.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .exceptions import GeometryError
from .mesh_io import TriangleMesh
from .poses import CameraPose, PoseSet, matrix_to_quaternion

logger = logging.getLogger(__name__)

WORLD_UP = np.array([0.0, 0.0, 1.0])
FALLBACK_UP = np.array([1.0, 0.0, 0.0])
UP_DEGENERACY_ANGLE = 1e-6
GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))

# Below this many points the convex hull costs more than it saves.
_HULL_THRESHOLD = 32


@dataclass(frozen=True, eq=False)
class Sphere:
    center: np.ndarray
    radius: float

    def contains(self, points: np.ndarray, tolerance: float = 1e-9) -> bool:
        distances = np.linalg.norm(np.asarray(points, dtype=np.float64) - self.center, axis=1)
        return bool(np.all(distances <= self.radius + tolerance * max(self.radius, 1.0)))

    def __repr__(self) -> str:
        return f"Sphere(center={self.center.tolist()}, radius={self.radius})"


@dataclass(frozen=True)
class CameraRigSpec:
    count: int = 100
    vertical_fov: float = 23.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.count < 1:
            raise GeometryError(f"camera count must be positive, got {self.count}")
        if not 0.0 < self.vertical_fov < 180.0:
            raise GeometryError(f"vertical field of view must lie in (0, 180), got {self.vertical_fov}")

    @property
    def theta(self) -> float:
        """Half the vertical field of view, in radians."""
        return math.radians(self.vertical_fov) / 2.0


@dataclass(frozen=True, eq=False)
class RigLayout:
    sphere: Sphere
    camera_radius: float


def _circumball(support: Sequence[np.ndarray]) -> Tuple[np.ndarray, float]:
    """Smallest ball with every support point on its boundary (center in their affine hull)."""
    if not support:
        return np.zeros(3), -1.0
    origin = support[0]
    if len(support) == 1:
        return origin.copy(), 0.0
    edges = np.stack([p - origin for p in support[1:]])
    gram = 2.0 * edges @ edges.T
    rhs = np.sum(edges * edges, axis=1)
    coefficients = np.linalg.lstsq(gram, rhs, rcond=None)[0]
    offset = coefficients @ edges
    return origin + offset, float(offset @ offset)


def _move_to_front_ball(points: List[np.ndarray], end: int, support: List[np.ndarray],
                        slack: float) -> Tuple[np.ndarray, float]:
    center, radius2 = _circumball(support)
    if len(support) == 4:
        return center, radius2
    i = 0
    while i < end:
        point = points[i]
        delta = point - center
        if delta @ delta > radius2 + slack:
            center, radius2 = _move_to_front_ball(points, i, support + [point], slack)
            points.insert(0, points.pop(i))
        i += 1
    return center, radius2


def _hull_candidates(points: np.ndarray) -> np.ndarray:
    if len(points) < _HULL_THRESHOLD:
        return points
    try:
        return points[ConvexHull(points).vertices]
    except (QhullError, ValueError):
        # flat or collinear input; every point stays a candidate
        return points


def welzl_ses(points, seed: int = 0) -> Sphere:
    """
    Smallest enclosing sphere by Welzl's move-to-front recursion.

    Points are deduplicated and reduced to convex hull vertices first. The
    traversal order is a seeded shuffle of the sorted unique points, so the
    result does not depend on the input order.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise GeometryError(f"expected an (n, 3) point array, got shape {points.shape}")
    if len(points) == 0:
        raise GeometryError("cannot enclose an empty point set")
    if not np.all(np.isfinite(points)):
        raise GeometryError("point set contains a non-finite coordinate")

    candidates = _hull_candidates(np.unique(points, axis=0))
    order = np.random.default_rng(seed).permutation(len(candidates))
    work = [candidates[i] for i in order]
    extent = float(np.ptp(candidates, axis=0).max()) if len(candidates) > 1 else 0.0
    slack = 1e-14 * extent * extent
    center, _ = _move_to_front_ball(work, len(work), [], slack)

    radius = float(np.linalg.norm(points - center, axis=1).max())
    return Sphere(center=center, radius=radius)


def camera_radius(r_ses: float, vertical_fov: float) -> float:
    """Distance at which a sphere of radius ``r_ses`` spans the vertical field of view."""
    if not 0.0 < vertical_fov < 180.0:
        raise GeometryError(f"vertical field of view must lie in (0, 180), got {vertical_fov}")
    if not r_ses > 0.0:
        raise GeometryError(f"enclosing sphere radius must be positive, got {r_ses}")
    fov = math.radians(vertical_fov)
    # cot(fov / 2) in half-angle form; exact at 90 degrees
    return r_ses * (1.0 + math.cos(fov)) / math.sin(fov)


def fibonacci_sphere(n: int) -> np.ndarray:
    """``n`` unit vectors on the offset Fibonacci lattice, ordered by descending z."""
    if n < 1:
        raise GeometryError(f"need at least one point, got {n}")
    i = np.arange(n, dtype=np.float64)
    z = 1.0 - 2.0 * (i + 0.5) / n
    radial = np.sqrt(1.0 - z * z)
    azimuth = i * GOLDEN_ANGLE
    return np.column_stack([radial * np.cos(azimuth), radial * np.sin(azimuth), z])


def look_at(eye, target, roll: float = 0.0) -> np.ndarray:
    """
    Quaternion (w, x, y, z) turning camera -Z toward ``target``.

    Camera +Y starts as world +Z projected onto the image plane (world +X
    when the view axis is within 1e-6 rad of the vertical), then ``roll``
    degrees rotate the camera about its own view axis.
    """
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    forward = target - eye
    distance = np.linalg.norm(forward)
    if distance == 0.0:
        raise GeometryError("camera eye coincides with its target")
    forward /= distance

    up = WORLD_UP
    if np.linalg.norm(np.cross(forward, up)) < math.sin(UP_DEGENERACY_ANGLE):
        up = FALLBACK_UP
    y_axis = up - (up @ forward) * forward
    y_axis /= np.linalg.norm(y_axis)
    z_axis = -forward
    x_axis = np.cross(y_axis, z_axis)
    base = np.column_stack([x_axis, y_axis, z_axis])

    angle = math.radians(roll)
    c, s = math.cos(angle), math.sin(angle)
    roll_matrix = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return matrix_to_quaternion(base @ roll_matrix)


def rig_layout(mesh: TriangleMesh, spec: CameraRigSpec) -> RigLayout:
    sphere = welzl_ses(mesh.vertices, seed=spec.seed)
    return RigLayout(sphere, camera_radius(sphere.radius, spec.vertical_fov))


def generate_rig(mesh: TriangleMesh, spec: CameraRigSpec) -> PoseSet:
    """
    Cameras on a Fibonacci sphere of radius R_CAM around the mesh's
    enclosing sphere, aimed at its center with a random roll. The frame
    order is a seeded permutation of the lattice order.
    """
    layout = rig_layout(mesh, spec)
    center = layout.sphere.center
    directions = fibonacci_sphere(spec.count)
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(spec.count)
    rolls = rng.uniform(0.0, 360.0, spec.count)

    poses = []
    for frame, lattice_index in enumerate(order):
        eye = center + layout.camera_radius * directions[lattice_index]
        roll = float(rolls[frame])
        poses.append(CameraPose(
            position=eye,
            rotation=look_at(eye, center, roll),
            roll=roll,
            vertical_fov=spec.vertical_fov,
            index=frame,
        ))
    logger.debug("generated %d poses at radius %.6g around %s", spec.count,
                 layout.camera_radius, center.tolist())
    return PoseSet(tuple(poses))
