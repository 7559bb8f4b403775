import json
import logging
import math

import numpy as np
import pytest

from src.app.autodiff import Tensor, gradient_check
from src.app.common.seeds import derive_rng
from src.app.core.errors import CheckpointError, ConfigError, EpisodeError, ProtoMarginError
from src.app.data import Episode, ExampleLoader, sample_episode, split_classes
from src.app.metrics import MetricKind
from src.app.models import Checkpoint, Conv4Config, MLPConfig, init_params, load_checkpoint, save_checkpoint
from src.app.training import (
    EvalReport,
    TrainConfig,
    compare_confusions,
    confusion_matrix,
    early_stop_check,
    episode_objective,
    evaluate,
    load_report,
    lr_at,
    per_class_deltas,
    run_episode,
    run_training,
    summarize,
)
from tests.conftest import vector_index


def small_config(**overrides) -> TrainConfig:
    values = dict(
        epochs=10,
        episodes_per_epoch=20,
        lr0=0.1,
        val_episodes=5,
        metric=MetricKind.cosine(),
        seed=11,
    )
    values.update(overrides)
    return TrainConfig(**values)


def fresh_params(dtype=np.float32):
    return init_params(MLPConfig(layer_widths=(16, 32, 16)), seed=5, dtype=dtype)


@pytest.fixture
def split(separable_index):
    return split_classes(separable_index, (10, 5, 5), seed=0)


class TestSchedule:

    def test_step_decay(self):
        cfg = TrainConfig()
        assert lr_at(0, cfg) == pytest.approx(1e-3)
        assert lr_at(499, cfg) == pytest.approx(1e-3)
        assert lr_at(500, cfg) == pytest.approx(1e-3 / 3)
        assert lr_at(1000, cfg) == pytest.approx(1e-3 / 9)

    def test_slow_decline_stops(self):
        history = [1.0 - 0.005 * epoch for epoch in range(11)]
        assert not early_stop_check(history[:10], 0.01, 10)
        assert early_stop_check(history, 0.01, 10)

    def test_steady_improvement_never_stops(self):
        history = [1.0 - 0.05 * epoch for epoch in range(15)]
        assert not any(early_stop_check(history[:length], 0.01, 10) for length in range(1, 16))

    def test_flat_history_stops_after_patience(self):
        assert early_stop_check([0.7] * 11, 0.01, 10)
        assert not early_stop_check([0.7] * 10, 0.01, 10)

    def test_invalid_config(self):
        with pytest.raises(ConfigError, match="lr_cut_factor"):
            TrainConfig(lr_cut_factor=1.5)
        with pytest.raises(ConfigError, match="epochs"):
            TrainConfig(epochs=0)


class TestTraining:

    @pytest.mark.parametrize("metric", [MetricKind.cosine(), MetricKind.aam(0.5)], ids=lambda kind: kind.label)
    def test_loss_decreases(self, separable_index, split, metric):
        result = run_training(small_config(metric=metric), separable_index, split, fresh_params())
        losses = result.trace.column("train_loss")
        assert len(losses) == 10
        assert losses[-1] < losses[0]

    def test_zero_margin_trains_like_cosine(self, separable_index, split):
        cosine = run_training(small_config(epochs=2, episodes_per_epoch=10), separable_index, split,
                              fresh_params(np.float64))
        aam = run_training(small_config(epochs=2, episodes_per_epoch=10, metric=MetricKind.aam(0.0)),
                           separable_index, split, fresh_params(np.float64))
        np.testing.assert_allclose(aam.trace.episode_losses, cosine.trace.episode_losses, rtol=0, atol=1e-9)

    def test_learning_rate_steps_by_episode(self, separable_index, split):
        cfg = small_config(epochs=3, episodes_per_epoch=3, lr_cut_every=5)
        trace = run_training(cfg, separable_index, split, fresh_params()).trace
        assert trace.episode_lrs[4] == pytest.approx(0.1)
        assert trace.episode_lrs[5] == pytest.approx(0.1 / 3)
        assert trace.column("lr") == pytest.approx([0.1, 0.1, 0.1 / 3])

    def test_same_seed_same_trace(self, separable_index, split):
        cfg = small_config(epochs=3)
        first = run_training(cfg, separable_index, split, fresh_params()).trace
        second = run_training(cfg, separable_index, split, fresh_params()).trace
        assert first.to_csv() == second.to_csv()
        assert first.to_csv().splitlines()[0] == "epoch,train_loss,train_acc,val_loss,val_acc,lr"

    def test_early_stop_recorded(self, separable_index, split):
        cfg = small_config(early_stop_patience_epochs=2, early_stop_min_delta=10.0)
        trace = run_training(cfg, separable_index, split, fresh_params()).trace
        assert trace.stopped_early_at == 3
        assert len(trace.epochs) == 3

    def test_checkpoint_holds_best_validation_snapshot(self, separable_index, split):
        result = run_training(small_config(epochs=4), separable_index, split, fresh_params())
        val_losses = result.trace.column("val_loss")
        state = result.checkpoint.state
        assert state.best_val_loss == min(val_losses)
        assert state.epoch == val_losses.index(min(val_losses)) + 1

    def test_validation_scores_margin_free_head(self, separable_index, split):
        cfg = small_config(epochs=3, metric=MetricKind.aam(0.5))
        result = run_training(cfg, separable_index, split, fresh_params())
        val_rng = derive_rng(cfg.seed, "validation")
        block = [sample_episode(separable_index, split.val_classes, cfg.n, cfg.k, cfg.q, val_rng)
                 for _ in range(cfg.val_episodes)]
        loader = ExampleLoader(separable_index)
        losses = [run_episode(result.checkpoint.params, loader, episode, MetricKind.cosine(), False).loss.value
                  for episode in block]
        assert result.checkpoint.state.best_val_loss == pytest.approx(float(np.mean(losses)), rel=1e-6)

    def test_missing_validation_falls_back_to_training_loss(self, separable_index, caplog):
        split = split_classes(separable_index, (15, 0, 5), seed=0)
        with caplog.at_level(logging.WARNING, logger="src.app.training.trainer"):
            trace = run_training(small_config(epochs=2), separable_index, split, fresh_params()).trace
        assert "Validation skipped" in caplog.text
        assert trace.column("val_loss") == trace.column("train_loss")

    def test_infeasible_episode_rejected(self, separable_index, split):
        with pytest.raises(EpisodeError, match="too large"):
            run_training(small_config(k=11), separable_index, split, fresh_params())

    def test_params_updated_in_place(self, separable_index, split):
        params = fresh_params()
        before = params.store.value("layer0.weight").copy()
        result = run_training(small_config(epochs=1), separable_index, split, params)
        assert result.params is params
        assert not np.array_equal(params.store.value("layer0.weight"), before)


def one_hot_index(num_classes: int, copies: int):
    return vector_index({f"c{label}": np.tile(np.eye(num_classes)[label], (copies, 1)) for label in range(num_classes)})


def identity_params(dim: int):
    params = init_params(MLPConfig(layer_widths=(dim, dim)), seed=0)
    params.store.set_value("layer0.weight", np.eye(dim))
    params.store.set_value("layer0.bias", np.zeros(dim))
    return params


class TestEvaluate:

    @pytest.mark.parametrize("metric", [MetricKind.cosine(), MetricKind.euclidean(), MetricKind.aam(0.5)],
                             ids=lambda kind: kind.label)
    def test_perfect_embedding(self, metric):
        index = one_hot_index(5, copies=10)
        report = evaluate(identity_params(5), index, index.labels, n=1, k=5, q=2, num_episodes=20,
                          metric=metric, seed=3)
        assert report.mean_accuracy == pytest.approx(100.0)
        np.testing.assert_array_equal(report.confusion, 40 * np.eye(5, dtype=np.int64))
        assert report.overall_accuracy == pytest.approx(1.0)

    def test_random_features_sit_at_chance(self):
        rng = np.random.default_rng(8)
        index = vector_index({f"c{label}": rng.standard_normal((2000, 8)) for label in range(5)})
        params = init_params(MLPConfig(layer_widths=(8, 8)), seed=0)
        report = evaluate(params, index, index.labels, n=5, k=5, q=5, num_episodes=500,
                          metric=MetricKind.cosine(), seed=1)
        assert abs(report.mean_accuracy - 20.0) <= 3 * report.std_dev / math.sqrt(500)

    def test_episodes_do_not_depend_on_count(self):
        index = one_hot_index(6, copies=6)
        params = init_params(MLPConfig(layer_widths=(6, 4)), seed=2)
        short = evaluate(params, index, index.labels, 2, 3, 2, 10, MetricKind.cosine(), seed=4)
        long = evaluate(params, index, index.labels, 2, 3, 2, 20, MetricKind.cosine(), seed=4)
        assert long.episode_accuracies[:10] == short.episode_accuracies

    def test_config_echo(self):
        index = one_hot_index(5, copies=4)
        report = evaluate(identity_params(5), index, index.labels, 1, 5, 1, 2, MetricKind.aam(0.25), seed=7)
        assert report.config["metric_label"] == "aam(m=0.25)"
        assert (report.config["k"], report.config["n"], report.config["q"]) == (5, 1, 1)
        assert report.config["backbone"] == {"kind": "mlp", "layer_widths": [5, 5]}

    def test_reloaded_checkpoint_evaluates_identically(self, separable_index, split, tmp_path):
        result = run_training(small_config(epochs=2), separable_index, split, fresh_params())
        loaded = load_checkpoint(save_checkpoint(result.checkpoint, tmp_path / "checkpoint.bin"))
        args = (separable_index, split.test_classes, 5, 5, 5, 30, MetricKind.cosine(), 9)
        before = evaluate(result.checkpoint.params, *args)
        after = evaluate(loaded.params, *args)
        assert after.episode_accuracies == before.episode_accuracies
        np.testing.assert_array_equal(after.confusion, before.confusion)

    def test_zero_episodes_rejected(self):
        index = one_hot_index(5, copies=4)
        with pytest.raises(EpisodeError):
            evaluate(identity_params(5), index, index.labels, 1, 5, 1, 0, MetricKind.cosine(), seed=0)

    def test_unsampled_classes_serialize_as_null(self):
        index = one_hot_index(6, copies=4)
        report = evaluate(identity_params(6), index, index.labels, 1, 2, 1, 1, MetricKind.cosine(), seed=2)
        assert report.confusion.shape == (6, 6)
        assert report.confusion.sum() == 2

        def reject_constant(token):
            raise ValueError(token)

        payload = json.loads(report.to_json(), parse_constant=reject_constant)
        per_class = payload["per_class_accuracy"]
        assert sorted(value for value in per_class.values() if value is not None) == [1.0, 1.0]
        assert list(per_class.values()).count(None) == 4


class TestEvalReport:

    def test_aggregates(self):
        report = EvalReport.from_episodes([0.5, 0.75, 1.0], np.zeros((2, 2)), ["a", "b"])
        assert report.mean_accuracy == pytest.approx(75.0)
        assert report.std_dev == pytest.approx(25.0)
        assert report.ci95_halfwidth == pytest.approx(1.96 * 25.0 / math.sqrt(3))

    def test_single_episode_has_zero_spread(self):
        report = EvalReport.from_episodes([0.6], np.zeros((2, 2)), ["a", "b"])
        assert report.std_dev == 0.0 and report.ci95_halfwidth == 0.0

    def test_format(self):
        report = EvalReport([0.6672], 66.72, 10.0, 1.35, np.zeros((1, 1), dtype=np.int64), ["a"])
        assert report.format() == "66.72 ± 1.35"

    def test_per_class_accuracy(self):
        confusion = np.array([[3, 1, 0], [0, 0, 0], [2, 0, 2]])
        report = EvalReport.from_episodes([0.5], confusion, ["a", "b", "c"])
        accuracy = report.per_class_accuracy
        assert accuracy["a"] == pytest.approx(0.75)
        assert math.isnan(accuracy["b"])
        assert accuracy["c"] == pytest.approx(0.5)

    def test_confusion_csv(self):
        report = EvalReport.from_episodes([1.0], np.array([[2, 0], [1, 1]]), ["x", "y"])
        assert report.confusion_csv() == "true\\predicted,x,y\nx,2,0\ny,1,1\n"

    def test_saved_report_loads(self, tmp_path):
        report = EvalReport.from_episodes([0.4, 0.8], np.array([[1, 1], [0, 2]]), ["x", "y"], {"k": 2, "n": 1})
        path = tmp_path / "eval_report.json"
        path.write_text(report.to_json(), encoding="utf-8")
        loaded = load_report(path)
        assert loaded.mean_accuracy == pytest.approx(report.mean_accuracy)
        np.testing.assert_array_equal(loaded.confusion, report.confusion)
        assert loaded.config == {"k": 2, "n": 1}

    def test_load_report_errors(self, tmp_path):
        with pytest.raises(CheckpointError, match="report not found"):
            load_report(tmp_path / "absent.json")
        broken = tmp_path / "broken.json"
        broken.write_text("{\"mean_accuracy\": 1}", encoding="utf-8")
        with pytest.raises(CheckpointError, match="malformed"):
            load_report(broken)

    def test_compare_confusions(self):
        ours = EvalReport.from_episodes([1.0], np.array([[4, 0], [1, 3]]), ["x", "y"])
        theirs = EvalReport.from_episodes([1.0], np.array([[2, 2], [1, 3]]), ["x", "y"])
        assert compare_confusions(ours, theirs) == pytest.approx({"x": 0.5, "y": 0.0})
        with pytest.raises(EpisodeError):
            compare_confusions(ours, EvalReport.from_episodes([1.0], np.eye(2), ["x", "z"]))

    def test_per_class_deltas(self):
        baseline = EvalReport.from_episodes([1.0], np.array([[2, 2, 0], [1, 3, 0], [0, 0, 0]]), ["x", "y", "z"],
                                            {"metric_label": "cosine"})
        margin = EvalReport.from_episodes([1.0], np.array([[4, 0, 0], [1, 3, 0], [0, 0, 0]]), ["x", "y", "z"],
                                          {"metric_label": "aam(m=0.50)"})
        assert per_class_deltas([margin], baseline) == "class,aam(m=0.50)\nx,+50.00\ny,+0.00\nz,\n"


class TestConfusionMatrix:

    def test_counts(self):
        matrix = confusion_matrix(["a", "a", "b"], ["a", "b", "b"], ["a", "b"])
        np.testing.assert_array_equal(matrix, [[1, 1], [0, 1]])

    def test_length_mismatch(self):
        with pytest.raises(EpisodeError):
            confusion_matrix(["a"], ["a", "b"], ["a", "b"])

    def test_unknown_label(self):
        with pytest.raises(EpisodeError, match="'q'"):
            confusion_matrix(["a"], ["q"], ["a", "b"])


def _report(label: str, k: int, n: int, mean: float) -> EvalReport:
    return EvalReport([mean / 100], mean, 0.0, 0.5, np.zeros((k, k), dtype=np.int64), [str(c) for c in range(k)],
                      {"metric_label": label, "k": k, "n": n})


class TestSummarize:

    def test_grid_layout(self):
        reports = [
            _report(label, k, n, 50.0 + k + n)
            for label in ("euclidean", "cosine", "aam(m=0.50)")
            for k, n in ((2, 5), (5, 1), (3, 5), (2, 1), (5, 5), (3, 1))
        ]
        table = summarize(reports)
        assert table.rows == ["euclidean", "cosine", "aam(m=0.50)"]
        assert table.columns == [(5, 1), (5, 5), (3, 1), (3, 5), (2, 1), (2, 5)]
        assert table.cell("cosine", (3, 5)) == "58.00 ± 0.50"
        csv_lines = table.to_csv().splitlines()
        assert csv_lines[0] == "metric,5-way 1-shot,5-way 5-shot,3-way 1-shot,3-way 5-shot,2-way 1-shot,2-way 5-shot"
        assert len(csv_lines) == 4

    def test_missing_cell_left_blank(self):
        table = summarize([_report("cosine", 5, 1, 60.0), _report("aam(m=0.50)", 5, 5, 70.0)])
        assert table.cell("cosine", (5, 5)) == ""
        assert "aam(m=0.50)" in table.to_text()

    def test_duplicate_logs_warning(self, caplog):
        with caplog.at_level(logging.WARNING, logger="src.app.training.reports"):
            table = summarize([_report("cosine", 5, 1, 60.0), _report("cosine", 5, 1, 61.0)])
        assert "Duplicate" in caplog.text
        assert table.cell("cosine", (5, 1)) == "61.00 ± 0.50"

    def test_empty_rejected(self):
        with pytest.raises(ProtoMarginError):
            summarize([])


def test_checkpoint_without_state_is_usable(tmp_path, separable_index, split):
    params = fresh_params()
    loaded = load_checkpoint(save_checkpoint(Checkpoint(params), tmp_path / "checkpoint.bin"))
    report = evaluate(loaded.params, separable_index, split.test_classes, 1, 5, 1, 5, MetricKind.cosine(), seed=0)
    assert report.num_episodes == 5


@pytest.mark.parametrize("metric", [
    MetricKind.euclidean(),
    MetricKind.euclidean(squared=False),
    MetricKind.cosine(),
    MetricKind.aam(0.5),
], ids=lambda kind: kind.label)
def test_episode_loss_gradient_through_conv4(rng, metric):
    config = Conv4Config(blocks=4, filters_per_block=4, input_height=16, input_width=16, input_channels=1)
    params = init_params(config, seed=12, dtype=np.float64)
    batch = Tensor(rng.uniform(0, 1, size=(6, 16, 16, 1)))
    episode = Episode(
        support=((0, "a"), (1, "b")),
        query=((2, "a"), (3, "b"), (4, "a"), (5, "b")),
        class_order=("a", "b"),
    )

    def loss(tensors):
        return episode_objective(config, tensors, batch, episode, metric, training=True)[0].tensor

    assert gradient_check(loss, params.store, epsilon=1e-6) < 1e-4


@pytest.mark.slow
@pytest.mark.parametrize("metric", [MetricKind.cosine(), MetricKind.aam(0.25)], ids=lambda kind: kind.label)
def test_separable_classes_are_learned(separable_index, split, metric):
    cfg = small_config(epochs=30, episodes_per_epoch=50, metric=metric)
    result = run_training(cfg, separable_index, split, fresh_params())
    report = evaluate(result.checkpoint.params, separable_index, split.test_classes, 5, 5, 5, 200,
                      metric, seed=21)
    assert report.mean_accuracy > 80.0
