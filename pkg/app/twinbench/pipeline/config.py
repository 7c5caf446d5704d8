"""
Experiment configuration.

Config files are flat ``key = value`` text; ``#`` starts a comment. The
sweep keys (frame_count, resolution, background, vertex_noise_sigma) may
repeat, and a batch runs the cross product of their values in file order::

    model = meshes/chair.obj
    model = sample:cube
    frame_count = 70
    frame_count = 100
    resolution = 1440p
    background = FFFFFF
    reconstruction = degrade
    vertex_noise_sigma = 0.01

``import_obj``/``import_poses``/``gt_poses`` may contain ``{model}``, which
is replaced by each model's name.
"""
import itertools
import math
import re
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from django.conf import settings

from ..alignment import IcpParams
from ..exceptions import AlignmentError, ConfigError, DegradeError
from ..mesh_io import RGB
from ..metrics import DEFAULT_WINDOW
from ..render import RESOLUTIONS
from ..samples import is_sample

RECONSTRUCTION_MODES = ("degrade", "import")
SWEEP_KEYS = ("frame_count", "resolution", "background", "vertex_noise_sigma")
MIN_FRAME_COUNT = 3

_RESOLUTION_RE = re.compile(r"^\s*(\d+)\s*[xX]\s*(\d+)\s*$")
_COLOR_RE = re.compile(r"^[0-9a-fA-F]{6}$")


def defaults() -> Dict[str, object]:
    base = {
        "FRAME_COUNT": 100,
        "RESOLUTION": "2560x1440",
        "VERTICAL_FOV": 23.0,
        "BACKGROUND": "FFFFFF",
        "SEED": 0,
        "OUTPUT_DIR": "runs",
        "WORKERS": 1,
        "SSIM_WINDOW": DEFAULT_WINDOW,
    }
    if settings.configured:
        base.update(getattr(settings, "TWINBENCH", {}))
    return base


def parse_resolution(value: str) -> Tuple[int, int]:
    value = value.strip()
    if value.lower() in RESOLUTIONS:
        return RESOLUTIONS[value.lower()]
    match = _RESOLUTION_RE.match(value)
    if not match:
        raise ConfigError(f"resolution must be WxH or one of {sorted(RESOLUTIONS)}, got {value!r}")
    width, height = int(match.group(1)), int(match.group(2))
    if width < 1 or height < 1:
        raise ConfigError(f"resolution must be positive, got {value!r}")
    return width, height


def parse_color(value: str) -> RGB:
    value = value.strip()
    if not _COLOR_RE.match(value):
        raise ConfigError(f"colour must be six hex digits RRGGBB, got {value!r}")
    return int(value[0:2], 16), int(value[2:4], 16), int(value[4:6], 16)


def format_color(color: RGB) -> str:
    return "".join(f"{c:02X}" for c in color)


@dataclass(frozen=True)
class DegradeParams:
    """
    Controlled stand-in for a photogrammetric reconstruction. Distances are
    fractions of the model's enclosing-sphere radius, except the pose noise,
    which is a fraction of the camera-sphere radius.
    """
    vertex_noise_sigma: float = 0.0
    decimation_ratio: float = 1.0
    perturb_scale: float = 1.0
    perturb_rotation_deg: float = 0.0
    perturb_axis: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    perturb_translation: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    pose_noise_sigma: float = 0.0
    texture_blur_sigma: float = 0.0
    texture_gain: float = 1.0
    texture_bleed: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("vertex_noise_sigma", "pose_noise_sigma", "texture_blur_sigma"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0.0):
                raise DegradeError(f"{name} must be a non-negative number, got {value}")
        if not 0.0 < self.decimation_ratio <= 1.0:
            raise DegradeError(f"decimation_ratio must lie in (0, 1], got {self.decimation_ratio}")
        if not self.perturb_scale > 0.0:
            raise DegradeError(f"perturb_scale must be positive, got {self.perturb_scale}")
        if not self.texture_gain >= 0.0:
            raise DegradeError(f"texture_gain must be non-negative, got {self.texture_gain}")
        if not 0.0 <= self.texture_bleed <= 1.0:
            raise DegradeError(f"texture_bleed must lie in [0, 1], got {self.texture_bleed}")
        if len(self.perturb_axis) != 3 or len(self.perturb_translation) != 3:
            raise DegradeError("perturb_axis and perturb_translation take three components")
        if self.perturb_rotation_deg != 0.0 and not any(self.perturb_axis):
            raise DegradeError("perturb_axis must be non-zero when a rotation is requested")

    @property
    def has_perturbation(self) -> bool:
        return (self.perturb_scale != 1.0 or self.perturb_rotation_deg != 0.0
                or any(self.perturb_translation))

    @property
    def has_texture_change(self) -> bool:
        return self.texture_blur_sigma > 0.0 or self.texture_gain != 1.0 or self.texture_bleed > 0.0

    @property
    def is_identity(self) -> bool:
        return (self.vertex_noise_sigma == 0.0 and self.decimation_ratio == 1.0
                and self.pose_noise_sigma == 0.0 and not self.has_perturbation
                and not self.has_texture_change)


@dataclass(frozen=True)
class Variant:
    """One point of the sweep grid."""
    frame_count: int
    resolution: Tuple[int, int]
    background: RGB
    vertex_noise_sigma: float

    @property
    def label(self) -> str:
        width, height = self.resolution
        return (f"f{self.frame_count}_{width}x{height}_bg{format_color(self.background)}"
                f"_n{self.vertex_noise_sigma!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    models: Tuple[str, ...]
    frame_counts: Tuple[int, ...] = (100,)
    resolutions: Tuple[Tuple[int, int], ...] = (RESOLUTIONS["1440p"],)
    backgrounds: Tuple[RGB, ...] = ((255, 255, 255),)
    noise_levels: Tuple[float, ...] = (0.0,)
    vertical_fov: float = 23.0
    seed: int = 0
    reconstruction: str = "degrade"
    degrade: DegradeParams = field(default_factory=DegradeParams)
    import_obj: Optional[str] = None
    import_poses: Optional[str] = None
    gt_poses: Optional[str] = None
    output_dir: Path = Path("runs")
    workers: int = 1
    save_frames: bool = False
    ssim_window: int = DEFAULT_WINDOW
    icp: IcpParams = field(default_factory=IcpParams)
    icp_max_distance: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.models:
            raise ConfigError("config names no model")
        if any(n < MIN_FRAME_COUNT for n in self.frame_counts):
            raise ConfigError(f"frame_count must be at least {MIN_FRAME_COUNT} for alignment")
        if self.ssim_window < 1 or self.ssim_window % 2 == 0:
            raise ConfigError(f"ssim_window must be a positive odd integer, got {self.ssim_window}")
        for width, height in self.resolutions:
            if width < self.ssim_window or height < self.ssim_window:
                raise ConfigError(f"resolution {width}x{height} is smaller than the SSIM window")
        if not 0.0 < self.vertical_fov < 180.0:
            raise ConfigError(f"vertical_fov must lie in (0, 180), got {self.vertical_fov}")
        if self.reconstruction not in RECONSTRUCTION_MODES:
            raise ConfigError(f"reconstruction must be one of {RECONSTRUCTION_MODES}")
        if self.reconstruction == "import" and not (self.import_obj and self.import_poses):
            raise ConfigError("reconstruction = import needs import_obj and import_poses")
        if any(not (math.isfinite(s) and s >= 0.0) for s in self.noise_levels):
            raise ConfigError("vertex_noise_sigma must be non-negative")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")
        if self.icp_max_distance is not None and not self.icp_max_distance > 0.0:
            raise ConfigError("icp_max_distance must be positive")

    def variants(self) -> List[Variant]:
        return expand_variants(self)

    def degrade_for(self, variant: Variant) -> DegradeParams:
        return replace(self.degrade, vertex_noise_sigma=variant.vertex_noise_sigma)

    def icp_for(self, gt_radius: float) -> IcpParams:
        if self.icp_max_distance is None:
            return self.icp
        return replace(self.icp, max_correspondence_distance=self.icp_max_distance * gt_radius)

    def echo(self, variant: Variant) -> Dict[str, object]:
        """Flat, path-free summary of the settings one run used."""
        degrade = asdict(self.degrade_for(variant)) if self.reconstruction == "degrade" else {}
        return {
            "frame_count": variant.frame_count,
            "width": variant.resolution[0],
            "height": variant.resolution[1],
            "background": format_color(variant.background),
            "vertical_fov": self.vertical_fov,
            "seed": self.seed,
            "reconstruction": self.reconstruction,
            "ssim_window": self.ssim_window,
            **{f"degrade_{key}": value for key, value in degrade.items()},
        }


def expand_variants(config: ExperimentConfig) -> List[Variant]:
    return [
        Variant(frame_count, resolution, background, noise)
        for frame_count, resolution, background, noise in itertools.product(
            config.frame_counts, config.resolutions, config.backgrounds, config.noise_levels
        )
    ]


def _to_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _to_float(value: str) -> float:
    number = float(value)
    if not math.isfinite(number):
        raise ValueError(f"not a finite number: {value!r}")
    return number


def _to_triple(value: str) -> Tuple[float, float, float]:
    parts = value.replace(",", " ").split()
    if len(parts) != 3:
        raise ValueError(f"expected three numbers, got {value!r}")
    return tuple(_to_float(p) for p in parts)


_CONVERTERS = {
    "model": str.strip,
    "frame_count": int,
    "resolution": parse_resolution,
    "background": parse_color,
    "vertex_noise_sigma": _to_float,
    "vertical_fov": _to_float,
    "seed": int,
    "output_dir": str.strip,
    "workers": int,
    "save_frames": _to_bool,
    "ssim_window": int,
    "reconstruction": str.strip,
    "import_obj": str.strip,
    "import_poses": str.strip,
    "gt_poses": str.strip,
    "decimation_ratio": _to_float,
    "perturb_scale": _to_float,
    "perturb_rotation_deg": _to_float,
    "perturb_axis": _to_triple,
    "perturb_translation": _to_triple,
    "pose_noise_sigma": _to_float,
    "texture_blur_sigma": _to_float,
    "texture_gain": _to_float,
    "texture_bleed": _to_float,
    "degrade_seed": int,
    "icp_max_iterations": int,
    "icp_sample_size": int,
    "icp_max_distance": _to_float,
}
_DEGRADE_KEYS = {
    "decimation_ratio", "perturb_scale", "perturb_rotation_deg", "perturb_axis",
    "perturb_translation", "pose_noise_sigma", "texture_blur_sigma", "texture_gain",
    "texture_bleed",
}


def _resolve_path(value: str, base_dir: Optional[Path]) -> str:
    if is_sample(value) or base_dir is None or Path(value).is_absolute():
        return value
    return str(base_dir / value)


def parse_config(text: str, base_dir: Optional[Path] = None) -> ExperimentConfig:
    """
    Parse config text; relative paths resolve against ``base_dir``. Every
    problem raises ConfigError before any work is done.
    """
    sweeps: Dict[str, list] = {key: [] for key in ("model",) + SWEEP_KEYS}
    single: Dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, separator, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not separator or not key:
            raise ConfigError("expected 'key = value'", line=lineno)
        if key not in _CONVERTERS:
            raise ConfigError(f"unknown key {key!r}", line=lineno)
        try:
            converted = _CONVERTERS[key](value)
        except ConfigError as exc:
            raise ConfigError(str(exc), line=lineno)
        except ValueError as exc:
            raise ConfigError(f"invalid value for {key}: {exc}", line=lineno)
        if key in sweeps:
            sweeps[key].append(converted)
        elif key in single:
            raise ConfigError(f"duplicate key {key!r}", line=lineno)
        else:
            single[key] = converted

    base = defaults()
    try:
        degrade = DegradeParams(
            seed=single.get("degrade_seed", single.get("seed", base["SEED"])),
            **{key: single[key] for key in _DEGRADE_KEYS if key in single},
        )
        icp_base = IcpParams()
        icp = replace(
            icp_base,
            max_iterations=single.get("icp_max_iterations", icp_base.max_iterations),
            sample_size=single.get("icp_sample_size", icp_base.sample_size),
            seed=single.get("seed", base["SEED"]),
        )
    except (DegradeError, AlignmentError) as exc:
        raise ConfigError(str(exc))

    output_dir = Path(single.get("output_dir", base["OUTPUT_DIR"]))
    if base_dir is not None and not output_dir.is_absolute() and "output_dir" in single:
        output_dir = base_dir / output_dir

    return ExperimentConfig(
        models=tuple(_resolve_path(m, base_dir) for m in sweeps["model"]),
        frame_counts=tuple(sweeps["frame_count"]) or (int(base["FRAME_COUNT"]),),
        resolutions=tuple(sweeps["resolution"]) or (parse_resolution(str(base["RESOLUTION"])),),
        backgrounds=tuple(sweeps["background"]) or (parse_color(str(base["BACKGROUND"])),),
        noise_levels=tuple(sweeps["vertex_noise_sigma"]) or (0.0,),
        vertical_fov=single.get("vertical_fov", float(base["VERTICAL_FOV"])),
        seed=single.get("seed", int(base["SEED"])),
        reconstruction=single.get("reconstruction", "degrade"),
        degrade=degrade,
        import_obj=_optional_path(single.get("import_obj"), base_dir),
        import_poses=_optional_path(single.get("import_poses"), base_dir),
        gt_poses=_optional_path(single.get("gt_poses"), base_dir),
        output_dir=output_dir,
        workers=single.get("workers", int(base["WORKERS"])),
        save_frames=single.get("save_frames", False),
        ssim_window=single.get("ssim_window", int(base["SSIM_WINDOW"])),
        icp=icp,
        icp_max_distance=single.get("icp_max_distance"),
    )


def _optional_path(value: Optional[str], base_dir: Optional[Path]) -> Optional[str]:
    return None if value is None else _resolve_path(value, base_dir)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    return parse_config(text, base_dir=path.parent)
