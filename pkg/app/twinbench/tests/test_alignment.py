import math

import numpy as np
from django.test import SimpleTestCase
from scipy.spatial.transform import Rotation

from twinbench.alignment import (
    IcpParams, SimilarityTransform, align_reconstruction, apply_transform, icp_refine, kabsch,
    pair_by_frame_index, pose_rms, rough_align,
)
from twinbench.exceptions import AlignmentError, DegenerateConfigurationError, IcpError
from twinbench.geometry import CameraRigSpec, generate_rig, rig_layout, welzl_ses
from twinbench.poses import CameraPose, PoseSet
from twinbench.samples import blob, unit_cube


def pose_set(positions, indices=None):
    indices = range(len(positions)) if indices is None else indices
    return PoseSet(tuple(CameraPose(position=p, rotation=[1.0, 0.0, 0.0, 0.0], index=i)
                         for p, i in zip(positions, indices)))


def random_similarity(rng, radius):
    return SimilarityTransform(
        scale=float(rng.uniform(0.1, 10.0)),
        rotation=Rotation.random(random_state=int(rng.integers(1 << 31))).as_matrix(),
        offset=rng.uniform(-10.0, 10.0, size=3) * radius,
    )


class SimilarityTransformTest(SimpleTestCase):

    def test_1_identity(self):
        identity = SimilarityTransform.identity()
        assert identity.is_identity
        assert np.array_equal(identity.matrix, np.eye(4))

    def test_2_inverse_and_compose(self):
        rng = np.random.default_rng(0)
        transform = random_similarity(rng, 1.0)
        points = rng.normal(size=(50, 3))
        assert np.abs(transform.inverse().apply(transform.apply(points)) - points).max() <= 1e-9
        other = random_similarity(rng, 1.0)
        composed = other.compose(transform)
        assert np.abs(composed.apply(points) - other.apply(transform.apply(points))).max() <= 1e-9

    def test_3_rejects_improper_parts(self):
        with self.assertRaises(AlignmentError):
            SimilarityTransform(scale=0.0)
        with self.assertRaises(AlignmentError):
            SimilarityTransform(rotation=np.diag([1.0, 1.0, -1.0]))

    def test_4_kabsch_returns_proper_rotation(self):
        rng = np.random.default_rng(1)
        source = rng.normal(size=(20, 3))
        source -= source.mean(axis=0)
        mirrored = source * [-1.0, 1.0, 1.0]
        rotation = kabsch(source, mirrored)
        assert abs(np.linalg.det(rotation) - 1.0) <= 1e-12


class RoughAlignTest(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.gt = generate_rig(blob(), CameraRigSpec(count=100, seed=0))
        cls.radius = rig_layout(blob(), CameraRigSpec(count=100, seed=0)).camera_radius

    def test_1_identical_sets_give_identity(self):
        transform = rough_align(self.gt, self.gt)
        assert transform.is_identity
        assert transform.scale == 1.0

    def test_2_recovers_random_similarities(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            est = pose_set(random_similarity(rng, self.radius).apply(self.gt.positions))
            transform = rough_align(est, self.gt)
            aligned = transform.apply(est.positions)
            assert pose_rms(aligned, self.gt.positions) < 1e-9 * self.radius

    def test_3_collinear_ground_truth(self):
        line = pose_set([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [3.0, 0.0, 0.0]])
        with self.assertRaises(DegenerateConfigurationError):
            rough_align(line, line)

    def test_4_size_checks(self):
        with self.assertRaises(AlignmentError):
            rough_align(pose_set(self.gt.positions[:10]), self.gt)
        two = pose_set(self.gt.positions[:2])
        with self.assertRaises(AlignmentError):
            rough_align(two, two)

    def test_5_coincident_estimates(self):
        est = pose_set(np.zeros((len(self.gt), 3)))
        with self.assertRaises(DegenerateConfigurationError):
            rough_align(est, self.gt)

    def test_6_centering_does_not_change_the_result(self):
        rng = np.random.default_rng(3)
        p_gt = self.gt.positions
        p_est = random_similarity(rng, self.radius).apply(p_gt) + rng.normal(size=p_gt.shape)
        c_est, c_gt = p_est.mean(axis=0), p_gt.mean(axis=0)
        direct = rough_align(pose_set(p_est), pose_set(p_gt)).apply(p_est)
        centered = rough_align(pose_set(p_est - c_est), pose_set(p_gt - c_gt)).apply(p_est - c_est) + c_gt
        assert np.abs(direct - centered).max() <= 1e-9 * self.radius

    def test_7_rigid_motion_of_both_sets(self):
        rng = np.random.default_rng(4)
        p_gt = self.gt.positions
        p_est = random_similarity(rng, self.radius).apply(p_gt) + rng.normal(size=p_gt.shape) * 0.1
        before = pose_rms(rough_align(pose_set(p_est), pose_set(p_gt)).apply(p_est), p_gt)
        motion = SimilarityTransform(
            rotation=Rotation.from_euler("xyz", [30.0, -50.0, 10.0], degrees=True).as_matrix(),
            offset=[5.0, -2.0, 7.0],
        )
        moved_est, moved_gt = motion.apply(p_est), motion.apply(p_gt)
        after = pose_rms(rough_align(pose_set(moved_est), pose_set(moved_gt)).apply(moved_est), moved_gt)
        assert abs(before - after) <= 1e-9 * self.radius

    def test_8_wrong_pairing_is_worse(self):
        rng = np.random.default_rng(5)
        est_positions = random_similarity(rng, self.radius).apply(self.gt.positions)
        matched = pose_rms(rough_align(pose_set(est_positions), self.gt).apply(est_positions),
                           self.gt.positions)
        shuffled = est_positions[rng.permutation(len(est_positions))]
        mismatched = pose_rms(rough_align(pose_set(shuffled), self.gt).apply(shuffled), self.gt.positions)
        assert mismatched > matched + 0.1 * self.radius

    def test_9_stages_are_retrievable(self):
        known = SimilarityTransform(
            scale=2.5,
            rotation=Rotation.from_euler("zyx", [35.0, -20.0, 60.0], degrees=True).as_matrix(),
            offset=[4.0, 1.0, -3.0],
        )
        est = pose_set(known.apply(self.gt.positions))
        stages = rough_align(est, self.gt).stages
        c_est, c_gt = est.positions.mean(axis=0), self.gt.positions.mean(axis=0)
        assert np.abs(stages.translation - (c_est - c_gt)).max() <= 1e-12 * self.radius
        assert np.array_equal(stages.pivot, c_gt)
        assert abs(stages.scale - 1.0 / 2.5) <= 1e-12
        assert np.abs(stages.rotation - known.rotation.T).max() <= 1e-9

        identity = rough_align(self.gt, self.gt).stages
        assert identity.scale == 1.0
        assert np.array_equal(identity.translation, np.zeros(3))
        assert np.array_equal(identity.rotation, np.eye(3))


class ApplyTransformTest(SimpleTestCase):

    def test_1_identity_returns_the_same_mesh(self):
        mesh = unit_cube()
        assert apply_transform(mesh, SimilarityTransform.identity()) is mesh

    def test_2_scaling_scales_the_enclosing_sphere(self):
        mesh = unit_cube()
        doubled = apply_transform(mesh, SimilarityTransform(scale=2.0))
        assert abs(welzl_ses(doubled.vertices).radius - math.sqrt(3.0)) <= 1e-9
        assert np.array_equal(doubled.triangles, mesh.triangles)
        assert doubled.texture is mesh.texture

    def test_3_inverse_restores_vertices(self):
        mesh = blob()
        transform = random_similarity(np.random.default_rng(6), 1.0)
        restored = apply_transform(apply_transform(mesh, transform), transform.inverse())
        assert np.abs(restored.vertices - mesh.vertices).max() <= 1e-9


class IcpTest(SimpleTestCase):

    def test_1_identical_clouds(self):
        points = blob().vertices
        result = icp_refine(points, points)
        assert result.rms == 0.0
        assert result.iterations == 1
        assert result.transform.is_identity

    def test_2_converges_from_small_perturbations(self):
        rng = np.random.default_rng(7)
        static = rng.normal(size=(2000, 3)) * [1.0, 0.5, 0.25]
        radius = welzl_ses(static).radius
        params = IcpParams(max_iterations=200, convergence_tol=1e-12 * radius,
                           max_correspondence_distance=radius)
        for _ in range(100):
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            angle = math.radians(rng.uniform(0.0, 10.0))
            direction = rng.normal(size=3)
            shift = direction / np.linalg.norm(direction) * rng.uniform(0.0, 0.05) * radius
            perturbation = SimilarityTransform(
                rotation=Rotation.from_rotvec(axis * angle).as_matrix(), offset=shift)
            moving = perturbation.apply(static)

            result = icp_refine(moving, static, params, static_radius=radius)
            history = np.asarray(result.rms_history)
            assert np.all(np.diff(history) <= 1e-12 * radius)
            recovered = result.transform.apply(moving)
            assert pose_rms(recovered, static) < 1e-3 * radius

    def test_3_far_clouds_fail(self):
        points = blob().vertices
        radius = welzl_ses(points).radius
        with self.assertRaises(IcpError):
            icp_refine(points + [100.0 * radius, 0.0, 0.0], points)

    def test_4_sampling_is_seeded(self):
        rng = np.random.default_rng(8)
        static = rng.normal(size=(3000, 3)) * [1.0, 0.6, 0.3]
        moving = static + [0.01, 0.0, 0.0]
        params = IcpParams(sample_size=500, seed=3)
        first = icp_refine(moving, static, params)
        second = icp_refine(moving, static, params)
        assert first.rms_history == second.rms_history
        with self.assertRaises(AlignmentError):
            IcpParams(sample_size=2)


class AlignReconstructionTest(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.mesh = blob()
        cls.gt = generate_rig(cls.mesh, CameraRigSpec(count=20, seed=1))
        cls.radius = welzl_ses(cls.mesh.vertices).radius

    def test_1_self_alignment_is_identity(self):
        aligned, report = align_reconstruction(self.mesh, self.gt, self.gt, self.mesh)
        assert aligned is self.mesh
        assert report.rough_rms == 0.0
        assert report.icp_rms == 0.0
        assert report.scale == 1.0
        assert not report.icp_failed
        assert report.as_row()["matched_poses"] == 20

    def test_2_undoes_a_known_similarity(self):
        transform = SimilarityTransform(
            scale=1.7,
            rotation=Rotation.from_euler("zyx", [40.0, 10.0, -25.0], degrees=True).as_matrix(),
            offset=[3.0, -1.0, 2.0],
        )
        recon = apply_transform(self.mesh, transform)
        est = pose_set(transform.apply(self.gt.positions))
        aligned, report = align_reconstruction(recon, est, self.gt, self.mesh)
        assert np.abs(aligned.vertices - self.mesh.vertices).max() <= 1e-6 * self.radius
        assert abs(report.scale - 1.0 / 1.7) <= 1e-9
        assert report.dropped == 0

    def test_3_icp_failure_keeps_rough_alignment(self):
        far = self.mesh.with_vertices(self.mesh.vertices + [100.0 * self.radius, 0.0, 0.0])
        aligned, report = align_reconstruction(far, self.gt, self.gt, self.mesh)
        assert report.icp_failed
        assert math.isnan(report.icp_rms)
        assert aligned is far
        assert report.as_row()["icp_failed"] == 1

    def test_4_pairs_by_frame_index(self):
        est = PoseSet(tuple(self.gt[i] for i in range(0, 20, 2)))
        paired_est, paired_gt, dropped = pair_by_frame_index(est, self.gt)
        assert dropped == 10
        assert paired_est.indices == paired_gt.indices == tuple(range(0, 20, 2))
        aligned, report = align_reconstruction(self.mesh, est, self.gt, self.mesh)
        assert report.matched == 10 and report.dropped == 10

    def test_5_unknown_estimated_frames_are_ignored(self):
        extra = self.gt[0].with_index(99)
        est = PoseSet(tuple(self.gt) + (extra,))
        paired_est, _, dropped = pair_by_frame_index(est, self.gt)
        assert len(paired_est) == 20
        assert dropped == 0
