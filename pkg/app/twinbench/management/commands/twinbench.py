import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from twinbench.exceptions import ConfigError, TwinbenchError
from twinbench.geometry import CameraRigSpec, generate_rig
from twinbench.mesh_io import write_pose_file
from twinbench.models import Experiment
from twinbench.pipeline.config import ExperimentConfig, load_config, parse_color, parse_resolution
from twinbench.pipeline.runner import load_model, run_batch
from twinbench.progress import publish_progress

logger = logging.getLogger(__name__)

CONFIG_HELP = """
config file: one 'key = value' per line, '#' comments.
  model = <obj path | sample:cube | sample:blob | sample:cylinder>   (repeatable)
  frame_count = N            (repeatable sweep, N >= 3)
  resolution = WxH | 1080p | 1440p | 4k   (repeatable sweep)
  background = RRGGBB        (repeatable sweep)
  vertex_noise_sigma = F     (repeatable sweep, fraction of the enclosing-sphere radius)
  vertical_fov, seed, output_dir, workers, save_frames, ssim_window
  reconstruction = degrade | import ; import_obj, import_poses, gt_poses ({model} expands)
  decimation_ratio, perturb_scale, perturb_rotation_deg, perturb_axis, perturb_translation,
  pose_noise_sigma, texture_blur_sigma, texture_gain, texture_bleed, degrade_seed
  icp_max_iterations, icp_sample_size, icp_max_distance
Textures must be binary PPM (P6); convert JPEG/PNG assets before use.
"""


class Command(BaseCommand):
    help = "Render, align and score digital-twin reconstructions against ground truth." + CONFIG_HELP

    def add_arguments(self, parser):
        parser.add_argument("action", choices=["run", "score", "poses"])
        parser.add_argument("--config", help="experiment config file (run)")
        parser.add_argument("--save", action="store_true", help="store results in the database")
        parser.add_argument("--name", help="experiment name used with --save")
        parser.add_argument("--gt", help="ground-truth OBJ (score)")
        parser.add_argument("--recon", help="reconstructed OBJ (score)")
        parser.add_argument("--gt-poses", dest="gt_poses", help="pose file the ground truth was rendered with")
        parser.add_argument("--est-poses", dest="est_poses", help="estimated pose file (score)")
        parser.add_argument("--frames", type=int, help="frame count when the rig is generated")
        parser.add_argument("--res", help="resolution, WxH or 1080p/1440p/4k")
        parser.add_argument("--bg", help="background colour RRGGBB")
        parser.add_argument("--seed", type=int)
        parser.add_argument("--output", help="output directory (score) or pose file (poses)")
        parser.add_argument("--model", help="OBJ path or sample:<name> (poses)")
        parser.add_argument("--count", type=int, help="number of poses (poses)")
        parser.add_argument("--fov", type=float, help="vertical field of view in degrees (poses)")

    def handle(self, *args, **options):
        action = options["action"]
        try:
            if action == "poses":
                self.handle_poses(options)
                return
            config, config_text = self.build_config(action, options)
        except ConfigError as exc:
            raise CommandError(f"invalid config: {exc}", returncode=2)
        except TwinbenchError as exc:
            raise CommandError(str(exc), returncode=1)
        self.run(config, config_text, options)

    def build_config(self, action, options):
        defaults = settings.TWINBENCH
        if action == "run":
            if not options["config"]:
                raise ConfigError("run needs --config")
            path = Path(options["config"])
            config = load_config(path)
            return config, path.read_text(encoding="utf-8")

        missing = [flag for flag, key in (("--gt", "gt"), ("--recon", "recon"), ("--est-poses", "est_poses"))
                   if not options[key]]
        if missing:
            raise ConfigError(f"score needs {', '.join(missing)}")
        config = ExperimentConfig(
            models=(options["gt"],),
            frame_counts=(options["frames"] or int(defaults["FRAME_COUNT"]),),
            resolutions=(parse_resolution(options["res"] or str(defaults["RESOLUTION"])),),
            backgrounds=(parse_color(options["bg"] or str(defaults["BACKGROUND"])),),
            vertical_fov=float(defaults["VERTICAL_FOV"]),
            seed=options["seed"] if options["seed"] is not None else int(defaults["SEED"]),
            reconstruction="import",
            import_obj=options["recon"],
            import_poses=options["est_poses"],
            gt_poses=options["gt_poses"],
            output_dir=Path(options["output"] or defaults["OUTPUT_DIR"]),
            workers=int(defaults["WORKERS"]),
            ssim_window=int(defaults["SSIM_WINDOW"]),
        )
        return config, ""

    def run(self, config, config_text, options):
        result = run_batch(config, progress=publish_progress)
        for record in result.records:
            line = f"{record.model} [{record.variant.label}] {record.status}"
            if record.global_score is not None:
                line += f" ssim={record.global_score:.6f}"
            if record.ok:
                self.stdout.write(self.style.SUCCESS(line))
            else:
                self.stdout.write(self.style.ERROR(f"{line}: {record.error}"))
        self.stdout.write(f"reports in {config.output_dir}")

        if options["save"]:
            experiment = Experiment.record_batch(
                name=options["name"] or Path(config.output_dir).name,
                records=result.records,
                config_text=config_text,
                output_dir=config.output_dir,
            )
            self.stdout.write(f"saved experiment {experiment.id}")

        failed = sum(not record.ok for record in result.records)
        if failed:
            raise CommandError(f"{failed} of {len(result.records)} runs failed", returncode=1)

    def handle_poses(self, options):
        defaults = settings.TWINBENCH
        if not options["model"]:
            raise ConfigError("poses needs --model")
        spec = CameraRigSpec(
            count=options["count"] or int(defaults["FRAME_COUNT"]),
            vertical_fov=options["fov"] or float(defaults["VERTICAL_FOV"]),
            seed=options["seed"] if options["seed"] is not None else int(defaults["SEED"]),
        )
        poses = generate_rig(load_model(options["model"]), spec)
        data = write_pose_file(poses)
        if options["output"]:
            output = Path(options["output"])
            output.parent.mkdir(parents=True, exist_ok=True)
            output.write_bytes(data)
            self.stdout.write(self.style.SUCCESS(f"wrote {len(poses)} poses to {output}"))
        else:
            self.stdout.write(data.decode("ascii"), ending="")
