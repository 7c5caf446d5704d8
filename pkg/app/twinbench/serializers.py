from rest_framework import serializers
from .models import Experiment, ModelRun, FrameScore


class FrameScoreSerializer(serializers.ModelSerializer):
    run = serializers.SerializerMethodField()

    class Meta:
        model = FrameScore
        fields = (
            "id",
            "run",
            "frame_index",
            "weighted_ssim",
            "unweighted_ssim",
            "foreground_px",
            "failed",
        )

    def get_run(self, obj):
        return str(obj.run.id)


class ModelRunSerializer(serializers.ModelSerializer):
    experiment = serializers.SerializerMethodField()
    resolution = serializers.SerializerMethodField()

    class Meta:
        model = ModelRun
        fields = (
            "id",
            "experiment",
            "model",
            "variant",
            "frame_count",
            "resolution",
            "background",
            "vertex_noise_sigma",
            "status",
            "error",
            "global_ssim",
            "unweighted_ssim",
            "frames_used",
            "rough_rms",
            "icp_rms",
            "icp_iterations",
            "icp_failed",
            "dropped_poses",
            "timings",
            "timestamp",
        )

    def get_experiment(self, obj):
        return str(obj.experiment.id)

    def get_resolution(self, obj):
        return f"{obj.width}x{obj.height}"


class ExperimentSerializer(serializers.ModelSerializer):
    runs_count = serializers.SerializerMethodField()
    ok_count = serializers.SerializerMethodField()
    owner = serializers.SerializerMethodField()

    class Meta:
        model = Experiment
        fields = ("id", "name", "created", "output_dir", "owner", "runs_count", "ok_count")

    def get_runs_count(self, obj):
        return obj.get_runs_count()

    def get_ok_count(self, obj):
        return obj.get_ok_count()

    def get_owner(self, obj):
        return obj.owner.username if obj.owner is not None else None
