from django.contrib import admin
from twinbench.models import Experiment, ModelRun, FrameScore


@admin.register(Experiment)
class ExperimentAdmin(admin.ModelAdmin):
    list_display = ("name", "created", "owner")


@admin.register(ModelRun)
class ModelRunAdmin(admin.ModelAdmin):
    list_display = ("model", "variant", "status", "global_ssim", "experiment")
    list_filter = ("status",)


admin.site.register(FrameScore)
