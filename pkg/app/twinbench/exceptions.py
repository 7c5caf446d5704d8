"""
Error hierarchy for twinbench.

Each error carries a class-level ``default_detail`` and an optional
per-instance ``detail``, the way rest_framework's APIException does.
"""
from typing import Optional


class TwinbenchError(Exception):
    default_detail = "twinbench error"

    def __init__(self, detail: Optional[str] = None) -> None:
        self.detail = detail if detail is not None else self.default_detail
        super().__init__(self.detail)

    def __str__(self) -> str:
        return str(self.detail)


class _LineError(TwinbenchError):
    """Parse error that knows which input line it came from."""

    def __init__(self, detail: Optional[str] = None, line: Optional[int] = None) -> None:
        self.line = line
        if detail is not None and line is not None:
            detail = f"line {line}: {detail}"
        super().__init__(detail)


class MeshFormatError(_LineError):
    default_detail = "malformed OBJ/MTL data"


class RasterFormatError(TwinbenchError):
    default_detail = "malformed PPM data"


class PoseFormatError(_LineError):
    default_detail = "malformed pose file"


class GeometryError(TwinbenchError):
    default_detail = "invalid geometry input"


class AlignmentError(TwinbenchError):
    default_detail = "alignment failed"


class DegenerateConfigurationError(AlignmentError):
    default_detail = "degenerate point configuration"


class IcpError(AlignmentError):
    default_detail = "clouds too far apart; rough alignment required first"


class MetricError(TwinbenchError):
    default_detail = "metric computation failed"


class NoForegroundError(MetricError):
    default_detail = "no foreground overlap"


class DegradeError(TwinbenchError):
    default_detail = "degradation produced an invalid mesh"


class ConfigError(_LineError):
    default_detail = "invalid experiment config"
