"""Multi-UAV wireless-powered network simulator with a two-tier learning harness."""

from .config import WorldConfig, desk_config, dbm_to_watts, watts_to_dbm, validate_config
from .environment import EpisodeReport, WpcnEnv, association_schedule
from .orchestrator import (
    Fleet,
    PhaseSearchResult,
    TrainRun,
    dcov_sweep,
    run_benchmark,
    run_evaluation,
    run_training,
    scalability_sweep,
)
from .state import SILENT, SlotAction, SubSlotSchedule, RewardBreakdown, WnState, UavState

__version__ = "0.1.0"

__all__ = [
    "WorldConfig", "desk_config", "dbm_to_watts", "watts_to_dbm", "validate_config",
    "EpisodeReport", "WpcnEnv", "association_schedule",
    "Fleet", "PhaseSearchResult", "TrainRun",
    "run_training", "run_evaluation", "run_benchmark",
    "scalability_sweep", "dcov_sweep",
    "SILENT", "SlotAction", "SubSlotSchedule", "RewardBreakdown", "WnState", "UavState",
    "__version__",
]
