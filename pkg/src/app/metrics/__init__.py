from src.app.metrics.heads import (
    EpisodeLoss,
    MetricKind,
    MetricVariant,
    aam_log_probabilities,
    aam_probabilities,
    angular_distance,
    class_log_probabilities,
    class_probabilities,
    distances_for,
    episode_loss,
    euclidean_sq_distance,
    head_log_probabilities,
    predict,
    predict_from_probabilities,
)
from src.app.metrics.prototypes import Prototypes, compute_prototypes

__all__ = [
    "EpisodeLoss",
    "MetricKind",
    "MetricVariant",
    "Prototypes",
    "aam_log_probabilities",
    "aam_probabilities",
    "angular_distance",
    "class_log_probabilities",
    "class_probabilities",
    "compute_prototypes",
    "distances_for",
    "episode_loss",
    "euclidean_sq_distance",
    "head_log_probabilities",
    "predict",
    "predict_from_probabilities",
]
