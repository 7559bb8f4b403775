import math

import numpy as np
import pytest

from src.app.common.seeds import derive_seed
from src.app.data import SyntheticSpec, generate_synthetic, split_classes
from src.app.metrics import MetricKind
from src.app.models import MLPConfig, init_params
from src.app.training import TrainConfig, evaluate, run_training

pytestmark = pytest.mark.slow

SEEDS = range(10)
TEST_EPISODES = 200
CHANCE = 20.0


def hard_split_accuracy(seed: int, metric: MetricKind) -> float:
    """
    5-way 5-shot test accuracy on 20 classes separated by pi/6 with noise 0.25,
    split 10/5/5. Both heads share data, split, initial weights and episode
    streams; the checkpoint is the lowest margin-free validation loss.
    """
    index = generate_synthetic(
        SyntheticSpec(dim=16, num_classes=20, min_angle_sep=math.pi / 6, noise_sigma=0.25,
                      examples_per_class=20, seed=seed)
    )
    split = split_classes(index, (10, 5, 5), seed=derive_seed(seed, "split"))
    params = init_params(MLPConfig(layer_widths=(16, 32, 16)), seed=derive_seed(seed, "init"))
    cfg = TrainConfig(epochs=15, episodes_per_epoch=40, lr0=0.1, val_episodes=20, metric=metric, seed=seed)
    result = run_training(cfg, index, split, params)
    report = evaluate(result.checkpoint.params, index, split.test_classes, 5, 5, 5, TEST_EPISODES,
                      metric, seed=derive_seed(seed, "test"))
    return report.mean_accuracy


@pytest.fixture(scope="module")
def accuracies() -> dict[str, np.ndarray]:
    heads = {"cosine": MetricKind.cosine(), "aam": MetricKind.aam(0.5)}
    return {name: np.array([hard_split_accuracy(seed, metric) for seed in SEEDS]) for name, metric in heads.items()}


def test_both_heads_beat_chance(accuracies):
    for name, values in accuracies.items():
        standard_error = values.std(ddof=1) / math.sqrt(len(values))
        assert values.mean() > CHANCE + 3 * standard_error, name


@pytest.mark.xfail(
    strict=False,
    reason="with unscaled cosine logits the margin has not been observed to beat cosine on this split; see DESIGN.md",
)
def test_margin_keeps_up_with_cosine(accuracies):
    cosine, aam = accuracies["cosine"], accuracies["aam"]
    assert aam.mean() >= cosine.mean() - 0.5
    assert int((aam > cosine).sum()) >= 6
