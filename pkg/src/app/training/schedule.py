from dataclasses import dataclass, field
from typing import Sequence

from src.app.core.errors import ConfigError
from src.app.metrics.heads import MetricKind


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    episodes_per_epoch: int = 100
    lr0: float = 1e-3
    lr_cut_every: int = 500
    lr_cut_factor: float = 1 / 3
    early_stop_min_delta: float = 0.01
    early_stop_patience_epochs: int = 10
    n: int = 5
    k: int = 5
    q: int = 5
    metric: MetricKind = field(default_factory=lambda: MetricKind.aam(0.5))
    seed: int = 0
    val_episodes: int = 100

    def __post_init__(self):
        for name in ("epochs", "episodes_per_epoch", "lr_cut_every", "early_stop_patience_epochs", "n", "k", "q"):
            if getattr(self, name) < 1:
                raise ConfigError(name, "must be >= 1")
        if self.val_episodes < 0:
            raise ConfigError("val_episodes", "must be >= 0")
        if not self.lr0 > 0:
            raise ConfigError("lr0", "must be > 0")
        if not 0 < self.lr_cut_factor < 1:
            raise ConfigError("lr_cut_factor", "must lie in (0, 1)")
        if self.early_stop_min_delta < 0:
            raise ConfigError("early_stop_min_delta", "must be >= 0")


def lr_at(global_episode: int, cfg: TrainConfig) -> float:
    """Step decay: lr0 * factor ** floor(episode / lr_cut_every)."""
    return cfg.lr0 * cfg.lr_cut_factor ** (max(0, global_episode) // cfg.lr_cut_every)


def early_stop_check(val_loss_history: Sequence[float], min_delta: float, patience: int) -> bool:
    """
    True when none of the last ``patience`` epochs beat the best loss seen
    before it by at least ``min_delta``.
    """
    history = list(val_loss_history)
    if len(history) <= patience:
        return False

    for epoch in range(len(history) - patience, len(history)):
        best_before = min(history[:epoch])
        if best_before - history[epoch] >= min_delta:
            return False
    return True
