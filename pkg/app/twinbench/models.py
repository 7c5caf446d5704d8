import math
import uuid

from django.conf import settings
from django.db import models, transaction

from .pipeline.runner import STATUS_OK, STATUSES


def _finite(value):
    if value is None or not math.isfinite(value):
        return None
    return value


class Experiment(models.Model):
    id = models.UUIDField(primary_key=True, default=uuid.uuid4, editable=False)
    name = models.CharField(max_length=128)
    config_text = models.TextField(blank=True)
    output_dir = models.CharField(max_length=512, blank=True)
    created = models.DateTimeField(auto_now_add=True)
    owner = models.ForeignKey(
        settings.AUTH_USER_MODEL, on_delete=models.SET_NULL, null=True, blank=True,
        related_name="experiments",
    )

    def get_runs_count(self):
        return self.runs.count()

    def get_ok_count(self):
        return self.runs.filter(status=STATUS_OK).count()

    @classmethod
    def record_batch(cls, name, records, config_text="", output_dir="", owner=None):
        """Persist a finished batch with its runs and per-frame scores."""
        with transaction.atomic():
            experiment = cls.objects.create(
                name=name, config_text=config_text, output_dir=str(output_dir), owner=owner,
            )
            for record in records:
                ModelRun.from_record(experiment, record)
        return experiment

    def __str__(self) -> str:
        return f"{self.name} ({self.get_ok_count()}/{self.get_runs_count()} ok)"


class ModelRun(models.Model):
    id = models.UUIDField(primary_key=True, default=uuid.uuid4, editable=False)
    experiment = models.ForeignKey(Experiment, on_delete=models.CASCADE, related_name="runs")
    model = models.CharField(max_length=256)
    variant = models.CharField(max_length=128)
    frame_count = models.PositiveIntegerField()
    width = models.PositiveIntegerField()
    height = models.PositiveIntegerField()
    background = models.CharField(max_length=6)
    vertex_noise_sigma = models.FloatField(default=0.0)
    status = models.CharField(max_length=32, choices=[(s, s) for s in STATUSES])
    error = models.TextField(blank=True)
    global_ssim = models.FloatField(null=True, blank=True)
    unweighted_ssim = models.FloatField(null=True, blank=True)
    frames_used = models.PositiveIntegerField(default=0)
    rough_rms = models.FloatField(null=True, blank=True)
    icp_rms = models.FloatField(null=True, blank=True)
    icp_iterations = models.PositiveIntegerField(default=0)
    icp_failed = models.BooleanField(default=False)
    dropped_poses = models.PositiveIntegerField(default=0)
    timings = models.JSONField(default=dict)
    timestamp = models.DateTimeField(auto_now_add=True)

    @classmethod
    def from_record(cls, experiment, record):
        variant = record.variant
        run = cls(
            experiment=experiment,
            model=record.model,
            variant=variant.label,
            frame_count=variant.frame_count,
            width=variant.resolution[0],
            height=variant.resolution[1],
            background=record.config.get("background", ""),
            vertex_noise_sigma=variant.vertex_noise_sigma,
            status=record.status,
            error=record.error,
            timings=record.timings,
            dropped_poses=record.dropped,
        )
        if record.alignment is not None:
            run.rough_rms = _finite(record.alignment.rough_rms)
            run.icp_rms = _finite(record.alignment.icp_rms)
            run.icp_iterations = record.alignment.icp_iterations
            run.icp_failed = record.alignment.icp_failed
        if record.ssim is not None:
            run.global_ssim = record.ssim.global_score
            run.unweighted_ssim = record.ssim.unweighted_score
            run.frames_used = record.ssim.frames_used
        run.save()
        if record.ssim is not None:
            frames = [
                FrameScore(run=run, frame_index=s.index, weighted_ssim=s.weighted_ssim,
                           unweighted_ssim=s.unweighted_ssim, foreground_px=s.foreground_px)
                for s in record.ssim.per_frame
            ]
            frames += [FrameScore(run=run, frame_index=i, failed=True) for i in record.ssim.failed_frames]
            FrameScore.objects.bulk_create(frames)
        return run

    def __str__(self) -> str:
        return f"{self.model} [{self.variant}] {self.status} ({self.global_ssim})"


class FrameScore(models.Model):
    id = models.UUIDField(primary_key=True, default=uuid.uuid4, editable=False)
    run = models.ForeignKey(ModelRun, on_delete=models.CASCADE, related_name="frames")
    frame_index = models.PositiveIntegerField()
    weighted_ssim = models.FloatField(null=True, blank=True)
    unweighted_ssim = models.FloatField(null=True, blank=True)
    foreground_px = models.PositiveIntegerField(default=0)
    failed = models.BooleanField(default=False)

    class Meta:
        ordering = ["frame_index"]

    def __str__(self) -> str:
        return f"{self.run.model} frame {self.frame_index}: {self.weighted_ssim}"
