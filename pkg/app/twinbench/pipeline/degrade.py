"""
Seeded mesh degradation standing in for an external reconstruction.

Random draws happen in a fixed order whatever the parameters (vertex noise,
decimation permutation, pose noise), so two parameter sets that differ in one
amplitude see the same underlying noise.
"""
import logging
import math
from dataclasses import replace
from typing import Optional, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter
from scipy.spatial.transform import Rotation

from ..alignment import SimilarityTransform
from ..exceptions import DegradeError
from ..geometry import welzl_ses
from ..mesh_io import RGB, RasterImage, TriangleMesh
from ..poses import CameraPose, PoseSet, matrix_to_quaternion
from .config import DegradeParams

logger = logging.getLogger(__name__)


def perturbation(params: DegradeParams, ses_radius: float) -> SimilarityTransform:
    axis = np.asarray(params.perturb_axis, dtype=np.float64)
    if params.perturb_rotation_deg and np.linalg.norm(axis) > 0:
        rotation = Rotation.from_rotvec(
            axis / np.linalg.norm(axis) * math.radians(params.perturb_rotation_deg)
        ).as_matrix()
    else:
        rotation = np.eye(3)
    return SimilarityTransform(
        scale=params.perturb_scale,
        rotation=rotation,
        offset=np.asarray(params.perturb_translation, dtype=np.float64) * ses_radius,
    )


def _decimate(mesh: TriangleMesh, order: np.ndarray, ratio: float) -> TriangleMesh:
    keep = int(round(ratio * mesh.triangle_count))
    if keep == 0:
        raise DegradeError(f"decimation ratio {ratio} leaves no triangles")
    selected = np.sort(order[:keep])
    triangles = mesh.triangles[selected]
    used = np.unique(triangles)
    remap = np.full(mesh.vertex_count, -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return replace(
        mesh,
        vertices=mesh.vertices[used],
        triangles=remap[triangles],
        uv_triangles=mesh.uv_triangles[selected] if mesh.uv_triangles is not None else None,
    )


def degrade_texture(mesh: TriangleMesh, params: DegradeParams, background: RGB) -> TriangleMesh:
    """Blur, brighten/darken and bleed the background colour into the surface colour."""
    if not params.has_texture_change:
        return mesh
    key = np.asarray(background, dtype=np.float64)
    if mesh.texture is not None:
        pixels = mesh.texture.pixels.astype(np.float64)
        if params.texture_blur_sigma > 0.0:
            sigma = params.texture_blur_sigma
            pixels = gaussian_filter(pixels, sigma=(sigma, sigma, 0.0), mode="nearest")
        pixels = pixels * params.texture_gain
        pixels = (1.0 - params.texture_bleed) * pixels + params.texture_bleed * key
        texture = RasterImage.from_array(np.clip(np.rint(pixels), 0, 255).astype(np.uint8))
        return replace(mesh, texture=texture)
    diffuse = np.asarray(mesh.diffuse if mesh.diffuse is not None else (128 / 255.0,) * 3)
    diffuse = diffuse * params.texture_gain
    diffuse = (1.0 - params.texture_bleed) * diffuse + params.texture_bleed * key / 255.0
    return replace(mesh, diffuse=tuple(float(c) for c in np.clip(diffuse, 0.0, 1.0)))


def degrade_mesh(mesh: TriangleMesh, gt_poses: PoseSet, params: DegradeParams,
                 ses_radius: Optional[float] = None, camera_radius: Optional[float] = None,
                 background: RGB = (255, 255, 255)) -> Tuple[TriangleMesh, PoseSet]:
    """
    Returns the degraded mesh and the "estimated" poses: ground-truth poses
    carried through the same perturbation as the mesh, plus positional noise.
    """
    if params.is_identity:
        return mesh, gt_poses
    if ses_radius is None:
        ses_radius = welzl_ses(mesh.vertices).radius
    if camera_radius is None:
        positions = gt_poses.positions
        camera_radius = float(np.linalg.norm(positions - positions.mean(axis=0), axis=1).mean())

    rng = np.random.default_rng(params.seed)
    vertex_noise = rng.standard_normal((mesh.vertex_count, 3))
    order = rng.permutation(mesh.triangle_count)
    pose_noise = rng.standard_normal((len(gt_poses), 3))

    degraded = mesh
    if params.vertex_noise_sigma > 0.0:
        degraded = degraded.with_vertices(
            degraded.vertices + params.vertex_noise_sigma * ses_radius * vertex_noise
        )
    if params.decimation_ratio < 1.0:
        degraded = _decimate(degraded, order, params.decimation_ratio)
    degraded = degrade_texture(degraded, params, background)

    transform = perturbation(params, ses_radius)
    if not transform.is_identity:
        degraded = degraded.with_vertices(transform.apply(degraded.vertices))

    est_poses = []
    for pose, noise in zip(gt_poses, pose_noise):
        position, rotation = pose.position, pose.rotation
        if not transform.is_identity:
            position = transform.apply(position[None, :])[0]
            rotation = matrix_to_quaternion(transform.rotation @ pose.rotation_matrix)
        if params.pose_noise_sigma > 0.0:
            position = position + params.pose_noise_sigma * camera_radius * noise
        est_poses.append(CameraPose(position, rotation, pose.roll, pose.vertical_fov, pose.index))

    logger.debug("degraded %s: %d -> %d triangles, perturbation %s", mesh.name,
                 mesh.triangle_count, degraded.triangle_count, transform)
    return degraded, PoseSet(tuple(est_poses))
