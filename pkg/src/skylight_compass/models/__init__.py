from .encoding import EncodingSpec, OrientationDeg, Scheme
from .metrics import (
    AmbiguityReport,
    AmbiguityRow,
    MetricsSummary,
    Mode,
    SweepEntry,
    SweepResult,
)
from .mosaic import MosaicImage
from .network import BRANCHES, NetworkConfig, TrainConfig, TrainReport
from .run import RunManifest
from .sky import DEFAULT_PATTERN, CameraRig, Pattern, SampleMeta, SunPosition, wrap360

__all__ = [
    "BRANCHES",
    "DEFAULT_PATTERN",
    "AmbiguityReport",
    "AmbiguityRow",
    "CameraRig",
    "EncodingSpec",
    "MetricsSummary",
    "Mode",
    "MosaicImage",
    "NetworkConfig",
    "OrientationDeg",
    "Pattern",
    "RunManifest",
    "SampleMeta",
    "Scheme",
    "SunPosition",
    "SweepEntry",
    "SweepResult",
    "TrainConfig",
    "TrainReport",
    "wrap360",
]
