from src.app.training.evaluation import EvalReport, compare_confusions, confusion_matrix, evaluate
from src.app.training.reports import ComparisonTable, load_report, per_class_deltas, summarize
from src.app.training.schedule import TrainConfig, early_stop_check, lr_at
from src.app.training.trainer import (
    EpochRecord,
    TrainingResult,
    TrainingTrace,
    episode_objective,
    run_episode,
    run_training,
)

__all__ = [
    "ComparisonTable",
    "EpochRecord",
    "EvalReport",
    "TrainConfig",
    "TrainingResult",
    "TrainingTrace",
    "compare_confusions",
    "confusion_matrix",
    "early_stop_check",
    "episode_objective",
    "evaluate",
    "load_report",
    "per_class_deltas",
    "lr_at",
    "run_episode",
    "run_training",
    "summarize",
]
