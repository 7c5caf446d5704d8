import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from twinbench.exceptions import GeometryError
from twinbench.geometry import CameraRigSpec, generate_rig, look_at, rig_layout
from twinbench.mesh_io import RasterImage, TriangleMesh, read_ppm
from twinbench.poses import CameraPose, PoseSet
from twinbench.render import (
    CameraIntrinsics, RenderSettings, frame_filename, project, project_points, rasterize, render_rig,
    save_frames,
)
from twinbench.samples import unit_cube

WHITE = (255, 255, 255)


def camera_at(eye, target=(0.0, 0.0, 0.0), roll=0.0):
    return CameraPose(position=eye, rotation=look_at(eye, target, roll), roll=roll)


def foreground(image, background=WHITE):
    return np.any(image.pixels != np.asarray(background, dtype=np.uint8), axis=2)


class ProjectionTest(SimpleTestCase):

    def test_1_intrinsics(self):
        intr = CameraIntrinsics(2560, 1440, 23.0)
        assert abs(intr.focal_px - 720.0 / math.tan(math.radians(11.5))) <= 1e-9
        expected = 2.0 * math.degrees(math.atan(2560 / 1440 * math.tan(math.radians(11.5))))
        assert abs(intr.horizontal_fov - expected) <= 1e-12

    def test_2_center_and_top_edge(self):
        mesh = unit_cube()
        spec = CameraRigSpec(count=10, seed=1)
        layout = rig_layout(mesh, spec)
        intr = CameraIntrinsics(2560, 1440, 23.0)
        for pose in generate_rig(mesh, spec):
            center = project(layout.sphere.center, pose, intr)
            assert abs(center.x - 1280.0) <= 1e-6 and abs(center.y - 720.0) <= 1e-6
            assert abs(center.depth - layout.camera_radius) <= 1e-9
            top = project(layout.sphere.center + layout.sphere.radius * pose.up, pose, intr)
            assert abs(top.x - 1280.0) <= 1e-6 and abs(top.y) <= 1e-6

    def test_3_behind_the_camera(self):
        pose = camera_at([0.0, 0.0, 5.0])
        intr = CameraIntrinsics(64, 36)
        assert project([0.0, 0.0, 10.0], pose, intr) is None
        _, _, in_front = project_points(np.array([[0.0, 0.0, 10.0], [0.0, 0.0, 0.0]]), pose, intr)
        assert in_front.tolist() == [False, True]


class RasterizeTest(SimpleTestCase):
    intr = CameraIntrinsics(96, 54, 23.0)

    def test_1_empty_mesh_is_all_background(self):
        mesh = TriangleMesh(vertices=np.zeros((3, 3)), triangles=np.zeros((0, 3)))
        image = rasterize(mesh, camera_at([0.0, -5.0, 0.0]), self.intr, RenderSettings(background=(1, 2, 3)))
        assert image.width == 96 and image.height == 54
        assert np.all(image.pixels == [1, 2, 3])

    def test_2_flat_shaded_triangle(self):
        mesh = TriangleMesh(
            vertices=[[-10.0, -10.0, 0.0], [10.0, -10.0, 0.0], [0.0, 10.0, 0.0]],
            triangles=[[0, 1, 2]],
            diffuse=(1.0, 0.5, 0.0),
        )
        pose = camera_at([0.0, 0.0, 5.0])
        image = rasterize(mesh, pose, self.intr)
        centroid = (mesh.vertices.mean(axis=0) - pose.position) @ pose.rotation_matrix
        shade = max(abs(centroid[2]) / np.linalg.norm(centroid), 0.2)
        expected = np.rint(np.array([255.0, 127.5, 0.0]) * shade)
        assert image.pixels[27, 48].tolist() == expected.tolist()
        assert np.all(image.pixels[foreground(image)] == expected)

    def test_3_nearer_triangle_wins(self):
        near = [[-1.0, -1.0, 1.0], [1.0, -1.0, 1.0], [0.0, 1.0, 1.0]]
        far = [[-1.0, -1.0, -1.0], [1.0, -1.0, -1.0], [0.0, 1.0, -1.0]]
        # red on the left texel, blue on the right
        texture = RasterImage.from_array(np.array([[[255, 0, 0], [0, 0, 255]]], dtype=np.uint8))
        pose = camera_at([0.0, 0.0, 8.0])
        for first, second, uv_triangles in ((near, far, [[0, 0, 0], [1, 1, 1]]),
                                            (far, near, [[1, 1, 1], [0, 0, 0]])):
            mesh = TriangleMesh(
                vertices=np.vstack([first, second]),
                triangles=[[0, 1, 2], [3, 4, 5]],
                uvs=[[0.25, 0.5], [0.75, 0.5]],
                uv_triangles=uv_triangles,
                texture=texture,
            )
            pixel = rasterize(mesh, pose, self.intr, RenderSettings(texture_filter="nearest")).pixels[27, 48]
            assert pixel[0] > 0 and pixel[2] == 0

    def test_4_silhouette_matches_projected_corners(self):
        mesh = unit_cube()
        intr = CameraIntrinsics(320, 180, 23.0)
        pose = camera_at([3.0, -4.0, 2.5], target=(0.5, 0.5, 0.5), roll=20.0)
        pixels, _, in_front = project_points(mesh.vertices, pose, intr)
        assert in_front.all()
        assert pixels[:, 0].min() > 0 and pixels[:, 0].max() < 320
        assert pixels[:, 1].min() > 0 and pixels[:, 1].max() < 180

        rows, cols = np.nonzero(foreground(rasterize(mesh, pose, intr)))
        assert abs(cols.min() - pixels[:, 0].min()) <= 1.0
        assert abs(cols.max() + 1 - pixels[:, 0].max()) <= 1.0
        assert abs(rows.min() - pixels[:, 1].min()) <= 1.0
        assert abs(rows.max() + 1 - pixels[:, 1].max()) <= 1.0

    def test_5_triangle_crossing_the_camera_plane(self):
        mesh = TriangleMesh(
            vertices=[[-20.0, -1.0, 0.0], [20.0, -1.0, 0.0], [0.0, -1.0, 40.0]],
            triangles=[[0, 1, 2]],
        )
        image = rasterize(mesh, camera_at([0.0, 0.0, 5.0]), self.intr)
        assert foreground(image).any()

    def test_6_lighting_scales_colour(self):
        mesh = unit_cube(textured=False)
        pose = camera_at([3.0, -4.0, 2.5], target=(0.5, 0.5, 0.5))
        full = rasterize(mesh, pose, self.intr).pixels.astype(int)
        dim = rasterize(mesh, pose, self.intr, RenderSettings(lighting=0.5)).pixels.astype(int)
        mask = foreground(rasterize(mesh, pose, self.intr))
        assert np.abs(full[mask] - 2 * dim[mask]).max() <= 1
        with self.assertRaises(GeometryError):
            RenderSettings(lighting=0.0)
        with self.assertRaises(GeometryError):
            RenderSettings(texture_filter="cubic")

    def test_7_texture_filters(self):
        mesh = unit_cube()
        pose = camera_at([3.0, -4.0, 2.5], target=(0.5, 0.5, 0.5))
        nearest = rasterize(mesh, pose, self.intr, RenderSettings(texture_filter="nearest"))
        bilinear = rasterize(mesh, pose, self.intr, RenderSettings(texture_filter="bilinear"))
        assert np.array_equal(foreground(nearest), foreground(bilinear))


class RenderRigTest(SimpleTestCase):
    intr = CameraIntrinsics(96, 54, 23.0)

    def test_1_every_frame_shows_the_mesh(self):
        mesh = unit_cube()
        images = render_rig(mesh, generate_rig(mesh, CameraRigSpec(count=100, seed=0)), self.intr)
        assert len(images) == 100
        assert all(foreground(image).any() for image in images)

    def test_2_deterministic_and_worker_independent(self):
        mesh = unit_cube()
        poses = generate_rig(mesh, CameraRigSpec(count=12, seed=5))
        first = render_rig(mesh, poses, self.intr)
        second = render_rig(mesh, poses, self.intr)
        threaded = render_rig(mesh, poses, self.intr, workers=4)
        assert first == second
        assert first == threaded

    def test_3_single_and_empty_pose_sets(self):
        mesh = unit_cube()
        poses = generate_rig(mesh, CameraRigSpec(count=1))
        assert len(render_rig(mesh, poses, self.intr)) == 1
        with self.assertRaises(GeometryError):
            render_rig(mesh, PoseSet(()), self.intr)

    def test_4_save_frames(self):
        mesh = unit_cube()
        images = render_rig(mesh, generate_rig(mesh, CameraRigSpec(count=3)), self.intr)
        with tempfile.TemporaryDirectory() as tmp:
            directory = save_frames(images, Path(tmp) / "frames")
            assert frame_filename(2) == "frame_0002.ppm"
            assert sorted(p.name for p in directory.iterdir()) == [frame_filename(i) for i in range(3)]
            assert read_ppm((directory / frame_filename(1)).read_bytes()) == images[1]
