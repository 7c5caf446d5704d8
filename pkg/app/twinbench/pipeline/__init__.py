from .config import DegradeParams, ExperimentConfig, Variant, expand_variants, load_config, parse_config
from .degrade import degrade_mesh
from .runner import RunRecord, import_reconstruction, run_batch, run_model

__all__ = [
    "DegradeParams",
    "ExperimentConfig",
    "Variant",
    "expand_variants",
    "load_config",
    "parse_config",
    "degrade_mesh",
    "RunRecord",
    "import_reconstruction",
    "run_batch",
    "run_model",
]
