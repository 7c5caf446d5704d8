"""
End-to-end experiment runs.

A run walks load -> ses -> rig -> render_gt -> reconstruct -> align ->
render_recon -> score. Any failure stops that run with a status naming the
failed phase; other runs in the batch are unaffected.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

from ..alignment import AlignmentReport, align_reconstruction
from ..exceptions import TwinbenchError
from ..geometry import CameraRigSpec, camera_radius, generate_rig, welzl_ses
from ..mesh_io import TriangleMesh, load_mesh, load_pose_file, save_pose_file
from ..metrics import SsimReport, score_model
from ..poses import PoseSet
from ..render import CameraIntrinsics, RenderSettings, render_rig, save_frames
from ..samples import is_sample, load_sample
from .config import ExperimentConfig, Variant
from .degrade import degrade_mesh
from .reports import write_batch_reports

logger = logging.getLogger(__name__)

STATUS_OK = "ok"
STATUS_GROUND_TRUTH_FAILED = "ground_truth_failed"
STATUS_RECONSTRUCTION_FAILED = "reconstruction_failed"
STATUS_ALIGNMENT_FAILED = "alignment_failed"
STATUS_SCORING_FAILED = "scoring_failed"
STATUSES = (
    STATUS_OK,
    STATUS_GROUND_TRUTH_FAILED,
    STATUS_RECONSTRUCTION_FAILED,
    STATUS_ALIGNMENT_FAILED,
    STATUS_SCORING_FAILED,
)
STAGES = ("load", "ses", "rig", "render_gt", "reconstruct", "align", "render_recon", "score")

ProgressCallback = Callable[[dict], None]


@dataclass(eq=False)
class RunRecord:
    model: str
    variant: Variant
    config: Dict[str, object]
    status: str = STATUS_OK
    alignment: Optional[AlignmentReport] = None
    ssim: Optional[SsimReport] = None
    timings: Dict[str, float] = field(default_factory=dict)
    error: str = ""
    output_dir: Optional[Path] = None
    # ground-truth frames with no estimated pose, counted before alignment
    dropped: int = 0

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK

    @property
    def global_score(self) -> Optional[float]:
        return self.ssim.global_score if self.ssim is not None else None


class _StageFailed(Exception):
    def __init__(self, status: str, stage: str, cause: BaseException) -> None:
        super().__init__(f"{stage}: {cause}")
        self.status = status
        self.stage = stage
        self.cause = cause


def model_name(reference: str) -> str:
    if is_sample(reference):
        return reference.split(":", 1)[1]
    return Path(reference).stem


def load_model(reference: str) -> TriangleMesh:
    if is_sample(reference):
        return load_sample(reference)
    return load_mesh(reference)


def import_reconstruction(obj_path, pose_path) -> Tuple[TriangleMesh, PoseSet]:
    """
    Externally reconstructed mesh plus its estimated poses. Pose indices
    name rendered frames and may skip frames the reconstructor dropped.
    """
    mesh = load_mesh(obj_path)
    poses = load_pose_file(pose_path, require_contiguous=False)
    return mesh, poses


class ModelRun:
    """One model under one sweep variant."""

    def __init__(self, reference: str, config: ExperimentConfig, variant: Variant,
                 progress: Optional[ProgressCallback] = None, render_workers: int = 1) -> None:
        self.reference = reference
        self.config = config
        self.variant = variant
        self.progress = progress
        self.render_workers = render_workers
        self.record = RunRecord(
            model=model_name(reference),
            variant=variant,
            config=config.echo(variant),
        )
        self.run_dir = Path(config.output_dir) / self.record.model / variant.label

    def _publish(self, stage: str, status: str) -> None:
        if self.progress is None:
            return
        try:
            self.progress({
                "model": self.record.model,
                "variant": self.variant.label,
                "stage": stage,
                "status": status,
                "score": self.record.global_score,
            })
        except Exception:
            logger.exception("progress callback failed")

    @contextmanager
    def stage(self, name: str, failure_status: str):
        self._publish(name, "started")
        started = time.perf_counter()
        try:
            yield
        except Exception as exc:
            raise _StageFailed(failure_status, name, exc) from exc
        finally:
            self.record.timings[name] = time.perf_counter() - started
        logger.debug("%s/%s %s finished in %.3fs", self.record.model, self.variant.label,
                     name, self.record.timings[name])

    def _intrinsics(self) -> CameraIntrinsics:
        width, height = self.variant.resolution
        return CameraIntrinsics(width, height, self.config.vertical_fov)

    def _format_path(self, template: str) -> str:
        return template.replace("{model}", self.record.model)

    def _check_imported_rig(self, gt_poses: PoseSet) -> None:
        """The sweep frame count and config fov do not apply to an imported rig."""
        if len(gt_poses) != self.variant.frame_count:
            logger.warning("%s/%s: gt_poses holds %d poses; frame_count %d is ignored",
                           self.record.model, self.variant.label, len(gt_poses), self.variant.frame_count)
        fovs = sorted({pose.vertical_fov for pose in gt_poses} - {self.config.vertical_fov})
        if fovs:
            logger.warning("%s/%s: gt_poses vertical_fov %s differs from vertical_fov %s used to render",
                           self.record.model, self.variant.label, fovs, self.config.vertical_fov)

    def execute(self) -> RunRecord:
        try:
            self._execute()
        except _StageFailed as failure:
            self.record.status = failure.status
            self.record.error = f"{failure.stage}: {failure.cause}"
            if isinstance(failure.cause, TwinbenchError):
                logger.error("%s/%s failed at %s: %s", self.record.model, self.variant.label,
                             failure.stage, failure.cause)
            else:
                logger.exception("%s/%s crashed at %s", self.record.model, self.variant.label,
                                 failure.stage, exc_info=failure.cause)
        self.record.output_dir = self.run_dir
        self._publish("done", self.record.status)
        logger.info("%s/%s: %s%s", self.record.model, self.variant.label, self.record.status,
                    "" if self.record.global_score is None else f" ssim={self.record.global_score:.6f}")
        return self.record

    def _execute(self) -> None:
        config, variant = self.config, self.variant
        intrinsics = self._intrinsics()
        render_settings = RenderSettings(background=variant.background)

        with self.stage("load", STATUS_GROUND_TRUTH_FAILED):
            gt_mesh = load_model(self.reference)
        with self.stage("ses", STATUS_GROUND_TRUTH_FAILED):
            sphere = welzl_ses(gt_mesh.vertices, seed=config.seed)
            rig_radius = camera_radius(sphere.radius, config.vertical_fov)
        with self.stage("rig", STATUS_GROUND_TRUTH_FAILED):
            if config.gt_poses:
                gt_poses = load_pose_file(self._format_path(config.gt_poses))
                self._check_imported_rig(gt_poses)
            else:
                spec = CameraRigSpec(variant.frame_count, config.vertical_fov, config.seed)
                gt_poses = generate_rig(gt_mesh, spec)
            save_pose_file(gt_poses, self.run_dir / "poses_gt.txt")
        with self.stage("render_gt", STATUS_GROUND_TRUTH_FAILED):
            gt_frames = render_rig(gt_mesh, gt_poses, intrinsics, render_settings, self.render_workers)
            if config.save_frames:
                save_frames(gt_frames, self.run_dir / "frames_gt")

        with self.stage("reconstruct", STATUS_RECONSTRUCTION_FAILED):
            if config.reconstruction == "import":
                recon_mesh, est_poses = import_reconstruction(
                    self._format_path(config.import_obj), self._format_path(config.import_poses)
                )
            else:
                recon_mesh, est_poses = degrade_mesh(
                    gt_mesh, gt_poses, config.degrade_for(variant),
                    ses_radius=sphere.radius, camera_radius=rig_radius,
                    background=variant.background,
                )
            save_pose_file(est_poses, self.run_dir / "poses_est.txt")
            self.record.dropped = len(set(gt_poses.indices) - set(est_poses.indices))

        with self.stage("align", STATUS_ALIGNMENT_FAILED):
            aligned, self.record.alignment = align_reconstruction(
                recon_mesh, est_poses, gt_poses, gt_mesh,
                config.icp_for(sphere.radius), gt_radius=sphere.radius,
            )

        with self.stage("render_recon", STATUS_SCORING_FAILED):
            recon_frames = render_rig(aligned, gt_poses, intrinsics, render_settings, self.render_workers)
            if config.save_frames:
                save_frames(recon_frames, self.run_dir / "frames_recon")
        with self.stage("score", STATUS_SCORING_FAILED):
            self.record.ssim = score_model(
                gt_frames, recon_frames, variant.background, config.ssim_window,
                indices=gt_poses.indices, workers=self.render_workers,
            )


def run_model(reference: str, config: ExperimentConfig, variant: Optional[Variant] = None,
              progress: Optional[ProgressCallback] = None, render_workers: int = 1) -> RunRecord:
    """Run one model; never raises past the returned record."""
    if variant is None:
        variant = config.variants()[0]
    return ModelRun(reference, config, variant, progress, render_workers).execute()


@dataclass(eq=False)
class BatchResult:
    records: List[RunRecord]
    reports: Dict[str, Path]

    @property
    def all_ok(self) -> bool:
        return all(record.ok for record in self.records)


def run_batch(config: ExperimentConfig, progress: Optional[ProgressCallback] = None,
              write_reports: bool = True) -> BatchResult:
    """
    Every model under every sweep variant. Runs execute concurrently when
    ``config.workers`` > 1; records keep model-major, variant-minor order.
    """
    jobs = [(reference, variant) for reference in config.models for variant in config.variants()]
    logger.info("batch of %d runs (%d models x %d variants), %d workers", len(jobs),
                len(config.models), len(jobs) // len(config.models), config.workers)
    if config.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(lambda job: run_model(job[0], config, job[1], progress), jobs))
    else:
        render_workers = config.workers
        records = [run_model(reference, config, variant, progress, render_workers)
                   for reference, variant in jobs]

    reports = write_batch_reports(records, config.output_dir) if write_reports else {}
    failed = sum(not record.ok for record in records)
    if failed:
        logger.warning("%d of %d runs did not complete", failed, len(records))
    return BatchResult(records, reports)
