"""
Pinhole z-buffer rasterizer standing in for the studio renderer.

Pixels are either the exact background colour or written by one triangle
fragment: there is no blending, anti-aliasing or denoising, so background
pixels can later be matched bit-exactly.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import GeometryError
from .mesh_io import RGB, RasterImage, TriangleMesh, write_ppm
from .poses import CameraPose, PoseSet

logger = logging.getLogger(__name__)

RESOLUTIONS = {
    "1080p": (1920, 1080),
    "1440p": (2560, 1440),
    "4k": (3840, 2160),
}
DEFAULT_RESOLUTION = RESOLUTIONS["1440p"]

NEAR_PLANE = -1e-6
SHADE_FLOOR = 0.2
UNTEXTURED_GRAY = 128.0
TEXTURE_FILTERS = ("nearest", "bilinear")


@dataclass(frozen=True)
class CameraIntrinsics:
    width: int = DEFAULT_RESOLUTION[0]
    height: int = DEFAULT_RESOLUTION[1]
    vertical_fov: float = 23.0

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise GeometryError(f"resolution must be positive, got {self.width}x{self.height}")
        if not 0.0 < self.vertical_fov < 180.0:
            raise GeometryError(f"vertical field of view must lie in (0, 180), got {self.vertical_fov}")

    @property
    def focal_px(self) -> float:
        fov = math.radians(self.vertical_fov)
        return (self.height / 2.0) * (1.0 + math.cos(fov)) / math.sin(fov)

    @property
    def horizontal_fov(self) -> float:
        half = math.atan((self.width / self.height) * math.tan(math.radians(self.vertical_fov) / 2.0))
        return math.degrees(2.0 * half)


@dataclass(frozen=True)
class RenderSettings:
    background: RGB = (255, 255, 255)
    lighting: float = 1.0
    texture_filter: str = "bilinear"

    def __post_init__(self) -> None:
        background = tuple(int(c) for c in self.background)
        if len(background) != 3 or any(not 0 <= c <= 255 for c in background):
            raise GeometryError(f"background must be an 8-bit RGB triple, got {self.background}")
        object.__setattr__(self, "background", background)
        if not 0.0 < self.lighting <= 1.0:
            raise GeometryError(f"lighting must lie in (0, 1], got {self.lighting}")
        if self.texture_filter not in TEXTURE_FILTERS:
            raise GeometryError(f"texture_filter must be one of {TEXTURE_FILTERS}")


@dataclass(frozen=True)
class Projection:
    x: float
    y: float
    depth: float


def project(point, pose: CameraPose, intr: CameraIntrinsics) -> Optional[Projection]:
    """Pixel coordinates and depth of ``point``; None when it is behind the camera."""
    camera = pose.rotation_matrix.T @ (np.asarray(point, dtype=np.float64) - pose.position)
    if camera[2] >= 0.0:
        return None
    depth = -camera[2]
    f = intr.focal_px
    return Projection(
        x=intr.width / 2.0 + f * camera[0] / depth,
        y=intr.height / 2.0 - f * camera[1] / depth,
        depth=float(depth),
    )


def project_points(points: np.ndarray, pose: CameraPose,
                   intr: CameraIntrinsics) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised ``project``: returns (pixels (n, 2), depth (n,), in_front mask)."""
    camera = (np.asarray(points, dtype=np.float64) - pose.position) @ pose.rotation_matrix
    depth = -camera[:, 2]
    in_front = depth > 0.0
    safe = np.where(in_front, depth, 1.0)
    f = intr.focal_px
    pixels = np.column_stack([
        intr.width / 2.0 + f * camera[:, 0] / safe,
        intr.height / 2.0 - f * camera[:, 1] / safe,
    ])
    return pixels, depth, in_front


def _clip_near(points: np.ndarray, uvs: Optional[np.ndarray]):
    """Clip a camera-space triangle against z = NEAR_PLANE (keeps z <= NEAR_PLANE)."""
    inside = points[:, 2] <= NEAR_PLANE
    if inside.all():
        return points, uvs
    if not inside.any():
        return None, None
    out_points, out_uvs = [], []
    for a in range(3):
        b = (a + 1) % 3
        if inside[a]:
            out_points.append(points[a])
            if uvs is not None:
                out_uvs.append(uvs[a])
        if inside[a] != inside[b]:
            t = (NEAR_PLANE - points[a, 2]) / (points[b, 2] - points[a, 2])
            out_points.append(points[a] + t * (points[b] - points[a]))
            if uvs is not None:
                out_uvs.append(uvs[a] + t * (uvs[b] - uvs[a]))
    return np.array(out_points), (np.array(out_uvs) if uvs is not None else None)


def _sample_texture(texture: np.ndarray, uv: np.ndarray, mode: str) -> np.ndarray:
    height, width = texture.shape[:2]
    u, v = uv[:, 0], uv[:, 1]
    if mode == "nearest":
        xi = np.clip(np.floor(u * width), 0, width - 1).astype(np.intp)
        yi = np.clip(np.floor((1.0 - v) * height), 0, height - 1).astype(np.intp)
        return texture[yi, xi]
    x = u * width - 0.5
    y = (1.0 - v) * height - 0.5
    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = (x - x0)[:, None]
    fy = (y - y0)[:, None]
    x0i = np.clip(x0, 0, width - 1).astype(np.intp)
    y0i = np.clip(y0, 0, height - 1).astype(np.intp)
    x1i = np.clip(x0 + 1, 0, width - 1).astype(np.intp)
    y1i = np.clip(y0 + 1, 0, height - 1).astype(np.intp)
    top = texture[y0i, x0i] * (1.0 - fx) + texture[y0i, x1i] * fx
    bottom = texture[y1i, x0i] * (1.0 - fx) + texture[y1i, x1i] * fx
    return top * (1.0 - fy) + bottom * fy


class _Framebuffer:
    def __init__(self, intr: CameraIntrinsics, settings: RenderSettings) -> None:
        self.intr = intr
        self.settings = settings
        self.color = np.empty((intr.height, intr.width, 3), dtype=np.uint8)
        self.color[...] = np.asarray(settings.background, dtype=np.uint8)
        self.depth = np.full((intr.height, intr.width), np.inf)

    def fill(self, points: np.ndarray, uvs: Optional[np.ndarray], shade: float,
             base_color: np.ndarray, texture: Optional[np.ndarray]) -> None:
        intr = self.intr
        f = intr.focal_px
        depth = -points[:, 2]
        sx = intr.width / 2.0 + f * points[:, 0] / depth
        sy = intr.height / 2.0 - f * points[:, 1] / depth

        area = (sx[1] - sx[0]) * (sy[2] - sy[0]) - (sx[2] - sx[0]) * (sy[1] - sy[0])
        if area == 0.0 or not np.isfinite(area):
            return
        j0 = max(int(math.ceil(sx.min() - 0.5)), 0)
        j1 = min(int(math.floor(sx.max() - 0.5)), intr.width - 1)
        i0 = max(int(math.ceil(sy.min() - 0.5)), 0)
        i1 = min(int(math.floor(sy.max() - 0.5)), intr.height - 1)
        if j0 > j1 or i0 > i1:
            return

        px, py = np.meshgrid(np.arange(j0, j1 + 1) + 0.5, np.arange(i0, i1 + 1) + 0.5)
        w0 = ((sx[1] - px) * (sy[2] - py) - (sx[2] - px) * (sy[1] - py)) / area
        w1 = ((sx[2] - px) * (sy[0] - py) - (sx[0] - px) * (sy[2] - py)) / area
        w2 = ((sx[0] - px) * (sy[1] - py) - (sx[1] - px) * (sy[0] - py)) / area
        inside = (w0 >= 0.0) & (w1 >= 0.0) & (w2 >= 0.0)
        if not inside.any():
            return

        q0 = w0[inside] / depth[0]
        q1 = w1[inside] / depth[1]
        q2 = w2[inside] / depth[2]
        q_sum = q0 + q1 + q2
        fragment_depth = 1.0 / q_sum

        rows, cols = np.nonzero(inside)
        rows += i0
        cols += j0
        nearer = fragment_depth < self.depth[rows, cols]
        if not nearer.any():
            return
        rows, cols = rows[nearer], cols[nearer]

        if texture is not None:
            uv = (q0[:, None] * uvs[0] + q1[:, None] * uvs[1] + q2[:, None] * uvs[2]) / q_sum[:, None]
            color = _sample_texture(texture, uv[nearer], self.settings.texture_filter)
        else:
            color = np.broadcast_to(base_color, (len(rows), 3))
        color = np.clip(np.rint(color * (self.settings.lighting * shade)), 0, 255).astype(np.uint8)

        self.depth[rows, cols] = fragment_depth[nearer]
        self.color[rows, cols] = color


def rasterize(mesh: TriangleMesh, pose: CameraPose, intr: CameraIntrinsics,
              settings: RenderSettings = RenderSettings()) -> RasterImage:
    """
    Render one frame. Colour is the texture sample (or Kd, or mid gray)
    scaled by the lighting and by |cos| between face normal and view ray,
    floored at 0.2.
    """
    framebuffer = _Framebuffer(intr, settings)
    if mesh.triangle_count == 0:
        return RasterImage(intr.width, intr.height, framebuffer.color)

    camera = (mesh.vertices - pose.position) @ pose.rotation_matrix
    texture = mesh.texture.pixels.astype(np.float64) if mesh.is_textured else None
    if mesh.diffuse is not None:
        base_color = np.clip(np.asarray(mesh.diffuse, dtype=np.float64), 0.0, 1.0) * 255.0
    else:
        base_color = np.full(3, UNTEXTURED_GRAY)

    for t, triangle in enumerate(mesh.triangles):
        corners = camera[triangle]
        normal = np.cross(corners[1] - corners[0], corners[2] - corners[0])
        normal_length = np.linalg.norm(normal)
        centroid = corners.mean(axis=0)
        centroid_length = np.linalg.norm(centroid)
        if normal_length == 0.0 or centroid_length == 0.0:
            continue
        shade = float(np.clip(abs(normal @ centroid) / (normal_length * centroid_length), SHADE_FLOOR, 1.0))

        uvs = mesh.uvs[mesh.uv_triangles[t]] if texture is not None else None
        polygon, polygon_uvs = _clip_near(corners, uvs)
        if polygon is None or len(polygon) < 3:
            continue
        for k in range(1, len(polygon) - 1):
            fan = [0, k, k + 1]
            framebuffer.fill(
                polygon[fan],
                polygon_uvs[fan] if polygon_uvs is not None else None,
                shade, base_color, texture,
            )
    return RasterImage(intr.width, intr.height, framebuffer.color)


def render_rig(mesh: TriangleMesh, poses: PoseSet, intr: CameraIntrinsics,
               settings: RenderSettings = RenderSettings(), workers: int = 1) -> List[RasterImage]:
    """Render every pose; image i belongs to pose i whatever the worker count."""
    if len(poses) == 0:
        raise GeometryError("cannot render an empty pose set")
    if workers <= 1:
        return [rasterize(mesh, pose, intr, settings) for pose in poses]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda pose: rasterize(mesh, pose, intr, settings), poses))


def frame_filename(index: int) -> str:
    return f"frame_{index:04d}.ppm"


def save_frames(images: Sequence[RasterImage], directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for index, image in enumerate(images):
        (directory / frame_filename(index)).write_bytes(write_ppm(image))
    return directory
