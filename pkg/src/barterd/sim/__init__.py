from .dataset import PROFILES, Dataset, DatasetClass, Profile, generate, inject_free_riders
from .engine import RunConfig, RunResult, run
from .metrics import Mechanism, MetricsReport, compare, percentage_difference

__all__ = [
    "PROFILES",
    "Dataset",
    "DatasetClass",
    "Mechanism",
    "MetricsReport",
    "Profile",
    "RunConfig",
    "RunResult",
    "compare",
    "generate",
    "inject_free_riders",
    "percentage_difference",
    "run",
]
