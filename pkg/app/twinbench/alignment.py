"""
Registration of a reconstruction onto ground truth.

Rough alignment works on paired camera positions only: translate by the
centroid difference, scale about the ground-truth centroid, then rotate
with Kabsch. ICP then refines the mesh rigidly on its vertices.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .exceptions import AlignmentError, DegenerateConfigurationError, IcpError
from .geometry import welzl_ses
from .mesh_io import TriangleMesh
from .poses import PoseSet, matrix_to_quaternion

logger = logging.getLogger(__name__)

# Relative singular-value floor below which a point set counts as collinear.
COLLINEAR_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class AlignmentStages:
    """The three rough-alignment factors, kept for reporting."""
    translation: np.ndarray
    scale: float
    rotation: np.ndarray
    pivot: np.ndarray


@dataclass(frozen=True, eq=False)
class SimilarityTransform:
    """x -> scale * rotation @ x + offset."""
    scale: float = 1.0
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    stages: Optional[AlignmentStages] = None

    def __post_init__(self) -> None:
        rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        offset = np.asarray(self.offset, dtype=np.float64).reshape(3)
        if not (math.isfinite(self.scale) and self.scale > 0.0):
            raise AlignmentError(f"similarity scale must be positive, got {self.scale}")
        if abs(np.linalg.det(rotation) - 1.0) > 1e-9:
            raise AlignmentError("rotation part is not a proper rotation")
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "offset", offset)

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls()

    @property
    def linear(self) -> np.ndarray:
        return self.scale * self.rotation

    @property
    def quaternion(self) -> np.ndarray:
        return matrix_to_quaternion(self.rotation)

    @property
    def matrix(self) -> np.ndarray:
        homogeneous = np.eye(4)
        homogeneous[:3, :3] = self.linear
        homogeneous[:3, 3] = self.offset
        return homogeneous

    @property
    def is_identity(self) -> bool:
        return (self.scale == 1.0 and np.array_equal(self.rotation, np.eye(3))
                and not self.offset.any())

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return points @ self.linear.T + self.offset

    def inverse(self) -> "SimilarityTransform":
        rotation = self.rotation.T
        return SimilarityTransform(
            scale=1.0 / self.scale,
            rotation=rotation,
            offset=-(rotation @ self.offset) / self.scale,
        )

    def compose(self, first: "SimilarityTransform") -> "SimilarityTransform":
        """The transform applying ``first`` and then ``self``."""
        return SimilarityTransform(
            scale=self.scale * first.scale,
            rotation=self.rotation @ first.rotation,
            offset=self.linear @ first.offset + self.offset,
        )

    def __repr__(self) -> str:
        return (f"SimilarityTransform(scale={self.scale}, quaternion={self.quaternion.tolist()}, "
                f"offset={self.offset.tolist()})")


def _check_spread(centered: np.ndarray, what: str) -> None:
    singular = np.linalg.svd(centered, compute_uv=False)
    if singular[0] == 0.0 or singular[1] <= COLLINEAR_TOLERANCE * singular[0]:
        raise DegenerateConfigurationError(f"{what} are collinear; rotation is undetermined")


def kabsch(source: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Proper rotation R minimising sum |R s_i - t_i|^2 over centered pairs."""
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    covariance = source.T @ target
    u, singular, vt = np.linalg.svd(covariance)
    if singular[0] == 0.0 or singular[1] <= COLLINEAR_TOLERANCE * singular[0]:
        raise DegenerateConfigurationError("paired points are collinear; rotation is undetermined")
    d = 1.0 if np.linalg.det(vt.T @ u.T) > 0 else -1.0
    return vt.T @ np.diag([1.0, 1.0, d]) @ u.T


def pose_rms(a: np.ndarray, b: np.ndarray) -> float:
    difference = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(np.sqrt(np.mean(np.sum(difference * difference, axis=1))))


def rough_align(est: PoseSet, gt: PoseSet) -> SimilarityTransform:
    """
    Similarity mapping estimated camera positions onto ground truth.

    t = c_est - c_gt, s = mean|p_gt - c_gt| / mean|p_est - t - c_gt|, and R is
    the Kabsch rotation of the scaled set about c_gt. Pairing is by position
    in the two sets.
    """
    if len(est) != len(gt):
        raise AlignmentError(f"pose count mismatch: {len(est)} estimated vs {len(gt)} ground truth")
    if len(gt) < 3:
        raise AlignmentError(f"rough alignment needs at least 3 paired poses, got {len(gt)}")

    p_est = est.positions
    p_gt = gt.positions
    c_gt = p_gt.mean(axis=0)
    _check_spread(p_gt - c_gt, "ground-truth camera positions")

    if np.array_equal(p_est, p_gt):
        return SimilarityTransform(stages=AlignmentStages(np.zeros(3), 1.0, np.eye(3), c_gt))

    c_est = p_est.mean(axis=0)
    t = c_est - c_gt
    translated = p_est - t
    denominator = np.mean(np.linalg.norm(translated - c_gt, axis=1))
    if denominator == 0.0:
        raise DegenerateConfigurationError("estimated camera positions coincide; scale is undefined")
    s = float(np.mean(np.linalg.norm(p_gt - c_gt, axis=1)) / denominator)
    rotation = kabsch(s * (translated - c_gt), p_gt - c_gt)

    return SimilarityTransform(
        scale=s,
        rotation=rotation,
        offset=c_gt - s * (rotation @ c_est),
        stages=AlignmentStages(t, s, rotation, c_gt),
    )


def apply_transform(mesh: TriangleMesh, transform: SimilarityTransform) -> TriangleMesh:
    if transform.is_identity:
        return mesh
    return mesh.with_vertices(transform.apply(mesh.vertices))


@dataclass(frozen=True)
class IcpParams:
    """Unset tolerances resolve against the static cloud's enclosing-sphere radius."""
    max_iterations: int = 50
    convergence_tol: Optional[float] = None
    max_correspondence_distance: Optional[float] = None
    sample_size: int = 5000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_iterations < 1 or self.sample_size < 3:
            raise AlignmentError("ICP needs max_iterations >= 1 and sample_size >= 3")
        for name in ("convergence_tol", "max_correspondence_distance"):
            value = getattr(self, name)
            if value is not None and not value > 0.0:
                raise AlignmentError(f"{name} must be positive, got {value}")

    def resolve(self, radius: float) -> Tuple[float, float]:
        tolerance = self.convergence_tol if self.convergence_tol is not None else 1e-6 * radius
        gate = (self.max_correspondence_distance
                if self.max_correspondence_distance is not None else 0.1 * radius)
        return tolerance, gate


@dataclass(frozen=True, eq=False)
class IcpResult:
    transform: SimilarityTransform
    rms: float
    iterations: int
    rms_history: Tuple[float, ...]


def icp_refine(moving, static, params: IcpParams = IcpParams(),
               static_radius: Optional[float] = None) -> IcpResult:
    """
    Rigid point-to-point ICP of ``moving`` onto ``static``.

    The RMS tracked per iteration is gated: a sampled point with no static
    neighbour inside the gate counts as the gate distance. Iteration stops on
    an exact fit, when the RMS improves by less than the tolerance, or at
    ``max_iterations``.
    """
    moving = np.asarray(moving, dtype=np.float64).reshape(-1, 3)
    static = np.asarray(static, dtype=np.float64).reshape(-1, 3)
    if len(moving) < 3 or len(static) < 3:
        raise AlignmentError("ICP needs at least 3 points in each cloud")
    if static_radius is None:
        static_radius = welzl_ses(static).radius
    tolerance, gate = params.resolve(static_radius)
    if not gate > 0.0:
        raise AlignmentError("static cloud has zero extent")

    sample = moving
    if len(moving) > params.sample_size:
        rng = np.random.default_rng(params.seed)
        sample = moving[np.sort(rng.choice(len(moving), params.sample_size, replace=False))]

    tree = cKDTree(static)
    rotation = np.eye(3)
    translation = np.zeros(3)
    current = sample.copy()
    history: List[float] = []

    for iteration in range(1, params.max_iterations + 1):
        distances, indices = tree.query(current, distance_upper_bound=gate)
        accepted = np.isfinite(distances)
        if not accepted.any():
            raise IcpError()
        truncated = np.where(accepted, distances, gate)
        rms = float(np.sqrt(np.mean(truncated * truncated)))
        history.append(rms)
        if rms == 0.0 or iteration == params.max_iterations:
            break
        if len(history) > 1 and history[-2] - rms < tolerance:
            break
        if accepted.sum() < 3:
            raise IcpError("fewer than 3 correspondences inside the distance gate")

        source = current[accepted]
        target = static[indices[accepted]]
        source_center = source.mean(axis=0)
        target_center = target.mean(axis=0)
        step = kabsch(source - source_center, target - target_center)
        shift = target_center - step @ source_center
        current = current @ step.T + shift
        rotation = step @ rotation
        translation = step @ translation + shift

    logger.debug("ICP stopped after %d iterations at RMS %.6g", len(history), history[-1])
    return IcpResult(
        transform=SimilarityTransform(rotation=rotation, offset=translation),
        rms=history[-1],
        iterations=len(history),
        rms_history=tuple(history),
    )


def pair_by_frame_index(est: PoseSet, gt: PoseSet) -> Tuple[PoseSet, PoseSet, int]:
    """
    Keep the estimated poses whose frame index exists in ``gt``, paired with
    those ground-truth poses. Returns (est, gt, ground-truth poses dropped).
    """
    gt_by_index = gt.by_index()
    matched_est, matched_gt = [], []
    for pose in est:
        partner = gt_by_index.get(pose.index)
        if partner is not None:
            matched_est.append(pose)
            matched_gt.append(partner)
    unknown = len(est) - len(matched_est)
    if unknown:
        logger.warning("%d estimated poses reference frames that were never rendered", unknown)
    return PoseSet(tuple(matched_est)), PoseSet(tuple(matched_gt)), len(gt) - len(matched_gt)


@dataclass(frozen=True, eq=False)
class AlignmentReport:
    rough_rms: float
    icp_rms: float
    icp_iterations: int
    icp_failed: bool
    scale: float
    matched: int
    dropped: int
    transform: SimilarityTransform

    def as_row(self) -> dict:
        return {
            "rough_rms": self.rough_rms,
            "icp_rms": self.icp_rms,
            "icp_iterations": self.icp_iterations,
            "icp_failed": int(self.icp_failed),
            "scale": self.scale,
            "matched_poses": self.matched,
            "dropped_poses": self.dropped,
        }


def align_reconstruction(recon_mesh: TriangleMesh, est_poses: PoseSet, gt_poses: PoseSet,
                         gt_mesh: TriangleMesh, params: IcpParams = IcpParams(),
                         gt_radius: Optional[float] = None) -> Tuple[TriangleMesh, AlignmentReport]:
    """
    Rough-align ``recon_mesh`` with the paired poses, then ICP it onto the
    ground-truth vertices. An ICP failure keeps the rough result and sets
    ``icp_failed`` in the report.
    """
    est, gt, dropped = pair_by_frame_index(est_poses, gt_poses)
    if dropped:
        logger.warning("%d ground-truth frames have no estimated pose and were dropped", dropped)
    rough = rough_align(est, gt)
    rough_rms = pose_rms(rough.apply(est.positions), gt.positions)
    roughly_aligned = apply_transform(recon_mesh, rough)

    try:
        icp = icp_refine(roughly_aligned.vertices, gt_mesh.vertices, params, static_radius=gt_radius)
    except AlignmentError as exc:
        logger.warning("ICP refinement failed, keeping rough alignment: %s", exc)
        report = AlignmentReport(rough_rms, math.nan, 0, True, rough.scale, len(est), dropped, rough)
        return roughly_aligned, report

    aligned = apply_transform(roughly_aligned, icp.transform)
    report = AlignmentReport(
        rough_rms=rough_rms,
        icp_rms=icp.rms,
        icp_iterations=icp.iterations,
        icp_failed=False,
        scale=rough.scale,
        matched=len(est),
        dropped=dropped,
        transform=icp.transform.compose(rough),
    )
    return aligned, report
