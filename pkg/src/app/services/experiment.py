import logging
from dataclasses import dataclass, replace
from pathlib import Path

from src.app.common.atomic_files import write_text_atomic
from src.app.common.seeds import derive_seed
from src.app.core.config import DatasetKind, RunConfig
from src.app.core.errors import ConfigError, DatasetError
from src.app.data.images import index_image_folder
from src.app.data.index import DatasetIndex, ModalityKind
from src.app.data.splits import ClassSplit, split_classes
from src.app.data.synthetic import SyntheticSpec, generate_synthetic, load_synthetic_archive
from src.app.metrics.heads import MetricKind
from src.app.models.checkpoint import save_checkpoint
from src.app.models.configs import BackboneConfig, Conv4Config, MLPConfig
from src.app.models.embedding import EmbeddingParams, init_params
from src.app.training.evaluation import EvalReport, evaluate
from src.app.training.trainer import TrainingResult, run_training

logger = logging.getLogger(__name__)

CHECKPOINT_FILE = "checkpoint.bin"
TRACE_FILE = "training_trace.csv"
REPORT_FILE = "eval_report.json"
CONFUSION_FILE = "confusion_matrix.csv"
SYNTHETIC_FILE = "synthetic.bin"
SUMMARY_CSV = "summary.csv"
SUMMARY_JSON = "summary.json"
PER_CLASS_DELTAS = "per_class_deltas.csv"


@dataclass
class ExperimentData:
    index: DatasetIndex
    split: ClassSplit
    backbone: BackboneConfig


def load_dataset(cfg: RunConfig) -> DatasetIndex:
    source = cfg.dataset
    if source is None:
        raise ConfigError("dataset", "missing dataset source (image_folder, synthetic_archive or synthetic)")
    if source.kind is DatasetKind.image_folder:
        return index_image_folder(source.path, size=source.image_size)
    if source.kind is DatasetKind.synthetic_archive:
        return load_synthetic_archive(source.path)
    return generate_synthetic(source.synthetic)


def default_split_counts(total_classes: int, k: int) -> tuple[int, int, int]:
    """k test classes, k validation classes when at least 3k exist, the rest for training."""
    val = k if total_classes >= 3 * k else 0
    return total_classes - val - k, val, k


def default_backbone(index: DatasetIndex) -> BackboneConfig:
    if index.modality.kind is ModalityKind.vectors:
        return MLPConfig(layer_widths=(index.modality.shape[0], 32, 16))
    height, width, channels = index.modality.shape
    return Conv4Config(input_height=height, input_width=width, input_channels=channels)


def prepare_data(cfg: RunConfig) -> ExperimentData:
    index = load_dataset(cfg)
    counts = cfg.split or default_split_counts(len(index.labels), cfg.train.k)
    split = split_classes(index, counts, derive_seed(cfg.seed, "split"))

    backbone = cfg.backbone or default_backbone(index)
    if tuple(backbone.input_shape) != tuple(index.modality.shape):
        raise ConfigError(
            "backbone",
            f"input shape {backbone.input_shape} does not match dataset examples {index.modality.shape}",
        )
    logger.info(
        f"Dataset: {index.total} examples in {len(index.labels)} classes; "
        f"split train/val/test = {len(split.train_classes)}/{len(split.val_classes)}/{len(split.test_classes)}"
    )
    return ExperimentData(index=index, split=split, backbone=backbone)


def initial_params(cfg: RunConfig, data: ExperimentData) -> EmbeddingParams:
    return init_params(data.backbone, derive_seed(cfg.seed, "init"))


def train_and_save(cfg: RunConfig, data: ExperimentData, out: Path | None = None) -> TrainingResult:
    out = out or cfg.out
    result = run_training(cfg.train, data.index, data.split, initial_params(cfg, data))
    save_checkpoint(result.checkpoint, out / CHECKPOINT_FILE)
    write_text_atomic(out / TRACE_FILE, result.trace.to_csv())
    return result


def evaluate_and_save(
        cfg: RunConfig,
        data: ExperimentData,
        params: EmbeddingParams,
        out: Path | None = None,
        metric: MetricKind | None = None,
) -> EvalReport:
    out = out or cfg.out
    if not data.split.test_classes:
        raise DatasetError("split has no test classes")
    report = evaluate(
        params,
        data.index,
        data.split.test_classes,
        cfg.train.n,
        cfg.train.k,
        cfg.train.q,
        cfg.eval_episodes,
        metric or cfg.train.metric,
        cfg.seed,
    )
    write_text_atomic(out / REPORT_FILE, report.to_json())
    write_text_atomic(out / CONFUSION_FILE, report.confusion_csv())
    return report


def train_then_evaluate(cfg: RunConfig, data: ExperimentData, out: Path) -> EvalReport:
    result = train_and_save(cfg, data, out)
    return evaluate_and_save(cfg, data, result.checkpoint.params, out)


def synthetic_spec_for(cfg: RunConfig) -> SyntheticSpec:
    if cfg.dataset is None:
        return SyntheticSpec(seed=cfg.seed)
    if cfg.dataset.kind is not DatasetKind.synthetic:
        raise ConfigError("dataset", "synth needs an inline synthetic dataset spec")
    return cfg.dataset.synthetic


def with_margin(cfg: RunConfig, margin: float) -> RunConfig:
    return replace(cfg, train=replace(cfg.train, metric=MetricKind.aam(margin)))
