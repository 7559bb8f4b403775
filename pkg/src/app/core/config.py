import enum
import json
import logging
import math
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Mapping

import environs

from src.app.core.errors import ConfigError, ProtoMarginError
from src.app.data.images import DEFAULT_IMAGE_SIZE
from src.app.data.synthetic import SyntheticSpec
from src.app.metrics.heads import MetricKind, MetricVariant
from src.app.models.configs import BackboneConfig, backbone_from_dict
from src.app.training.schedule import TrainConfig

logger = logging.getLogger(__name__)

env = environs.Env()
env.read_env()


class Settings:
    threads = env.int("PROTO_MARGIN_THREADS", 1)
    log_config = env.str("PROTO_MARGIN_LOG_CONFIG", "logs/logger.yml")
    log_level = env.str("PROTO_MARGIN_LOG_LEVEL", None)


class DatasetKind(str, enum.Enum):
    image_folder = "image_folder"
    synthetic_archive = "synthetic_archive"
    synthetic = "synthetic"


@dataclass(frozen=True)
class DatasetSource:
    kind: DatasetKind
    path: Path | None = None
    synthetic: SyntheticSpec | None = None
    image_size: tuple[int, int] = DEFAULT_IMAGE_SIZE


@dataclass(frozen=True)
class RunConfig:
    train: TrainConfig
    dataset: DatasetSource | None
    out: Path
    split: tuple[int, int, int] | None = None
    backbone: BackboneConfig | None = None
    eval_episodes: int = 1000
    margins: tuple[float, ...] = (0.0, 0.25, 0.5)
    checkpoint: Path | None = None

    @property
    def seed(self) -> int:
        return self.train.seed


# top-level scalar keys: name -> expected type
_TRAIN_KEYS: dict[str, type] = {
    "epochs": int,
    "episodes_per_epoch": int,
    "lr0": float,
    "lr_cut_every": int,
    "lr_cut_factor": float,
    "early_stop_min_delta": float,
    "early_stop_patience_epochs": int,
    "n": int,
    "k": int,
    "q": int,
    "seed": int,
    "val_episodes": int,
}
_METRIC_KEYS: dict[str, type] = {"metric": str, "margin": float, "squared": bool}
_RUN_KEYS: dict[str, type] = {"out": str, "eval_episodes": int, "checkpoint": str}
_NESTED_KEYS = {"dataset", "split", "backbone", "margins"}
_DATASET_KEYS = {"image_folder", "synthetic_archive", "synthetic", "image_size"}
_SPLIT_KEYS = ("train", "val", "test")


def _coerce(key_path: str, value: Any, expected: type) -> Any:
    if expected is bool:
        if not isinstance(value, bool):
            raise ConfigError(key_path, f"expected a boolean, got {type(value).__name__}")
        return value
    if expected is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or float(value) != int(value):
            raise ConfigError(key_path, f"expected an integer, got {value!r}")
        return int(value)
    if expected is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(key_path, f"expected a finite number, got {value!r}")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(key_path, f"expected a string, got {type(value).__name__}")
    return value


def _expect_mapping(key_path: str, value: Any) -> Mapping[str, Any]:
    if not isinstance(value, Mapping):
        raise ConfigError(key_path, f"expected an object, got {type(value).__name__}")
    return value


def _reject_unknown(key_path: str, payload: Mapping[str, Any], allowed) -> None:
    for key in payload:
        if key not in allowed:
            raise ConfigError(f"{key_path}.{key}" if key_path else key, "unknown key")


def _parse_synthetic(payload: Any, default_seed: int) -> SyntheticSpec:
    payload = _expect_mapping("dataset.synthetic", payload)
    types = {"dim": int, "num_classes": int, "min_angle_sep": float,
             "noise_sigma": float, "examples_per_class": int, "seed": int}
    _reject_unknown("dataset.synthetic", payload, types)
    values = {key: _coerce(f"dataset.synthetic.{key}", value, types[key]) for key, value in payload.items()}
    values.setdefault("seed", default_seed)
    try:
        return SyntheticSpec(**values)
    except ProtoMarginError as e:
        raise ConfigError("dataset.synthetic", str(e)) from e


def _existing_path(key_path: str, value: Any, base: Path) -> Path:
    path = Path(_coerce(key_path, value, str))
    if not path.is_absolute():
        path = base / path
    if not path.exists():
        raise ConfigError(key_path, f"path does not exist: {path}")
    return path


def _parse_dataset(payload: Any, default_seed: int, base: Path) -> DatasetSource:
    payload = _expect_mapping("dataset", payload)
    _reject_unknown("dataset", payload, _DATASET_KEYS)

    sources = [key for key in ("image_folder", "synthetic_archive", "synthetic") if key in payload]
    if not sources:
        raise ConfigError("dataset", "missing dataset source (image_folder, synthetic_archive or synthetic)")
    if len(sources) > 1:
        raise ConfigError("dataset", f"exactly one dataset source allowed, got {sources}")

    image_size = DEFAULT_IMAGE_SIZE
    if "image_size" in payload:
        size = payload["image_size"]
        if not isinstance(size, (list, tuple)) or len(size) != 2:
            raise ConfigError("dataset.image_size", "expected [height, width]")
        image_size = tuple(_coerce(f"dataset.image_size[{i}]", value, int) for i, value in enumerate(size))
        if min(image_size) < 1:
            raise ConfigError("dataset.image_size", "extents must be >= 1")

    kind = DatasetKind(sources[0])
    if kind is DatasetKind.synthetic:
        return DatasetSource(kind, synthetic=_parse_synthetic(payload["synthetic"], default_seed))
    path = _existing_path(f"dataset.{kind.value}", payload[kind.value], base)
    return DatasetSource(kind, path=path, image_size=image_size)


def _parse_split(payload: Any) -> tuple[int, int, int]:
    if isinstance(payload, (list, tuple)):
        if len(payload) != 3:
            raise ConfigError("split", "expected [train, val, test] class counts")
        counts = tuple(_coerce(f"split[{i}]", value, int) for i, value in enumerate(payload))
    else:
        payload = _expect_mapping("split", payload)
        _reject_unknown("split", payload, _SPLIT_KEYS)
        missing = [key for key in _SPLIT_KEYS if key not in payload]
        if missing:
            raise ConfigError(f"split.{missing[0]}", "missing")
        counts = tuple(_coerce(f"split.{key}", payload[key], int) for key in _SPLIT_KEYS)
    if min(counts) < 0:
        raise ConfigError("split", f"class counts must be >= 0, got {list(counts)}")
    return counts


def _parse_margins(payload: Any) -> tuple[float, ...]:
    if isinstance(payload, str):
        payload = [part for part in payload.split(",") if part.strip()]
        try:
            payload = [float(part) for part in payload]
        except ValueError as e:
            raise ConfigError("margins", f"expected comma separated numbers ({e})") from e
    if not isinstance(payload, (list, tuple)) or not payload:
        raise ConfigError("margins", "expected a non-empty list of margins")
    margins = tuple(_coerce(f"margins[{i}]", value, float) for i, value in enumerate(payload))
    for i, margin in enumerate(margins):
        if not 0 <= margin < math.pi / 2:
            raise ConfigError(f"margins[{i}]", f"margin must lie in [0, pi/2), got {margin}")
    return margins


def _parse_metric(values: Mapping[str, Any]) -> MetricKind:
    name = values.get("metric", MetricVariant.aam.value)
    try:
        variant = MetricVariant(name)
    except ValueError:
        raise ConfigError("metric", f"expected euclidean, cosine or aam, got {name!r}") from None

    if variant is MetricVariant.aam:
        try:
            return MetricKind.aam(values.get("margin", 0.5))
        except ProtoMarginError as e:
            raise ConfigError("margin", str(e)) from e
    if "margin" in values and values["margin"]:
        logger.warning(f"margin {values['margin']} ignored for the {variant.value} head")
    if variant is MetricVariant.cosine:
        return MetricKind.cosine()
    return MetricKind.euclidean(squared=values.get("squared", True))


def _check_writable(out: Path) -> None:
    existing = out
    while not existing.exists():
        if existing.parent == existing:
            break
        existing = existing.parent
    if existing.exists() and not existing.is_dir():
        raise ConfigError("out", f"not a directory: {existing}")
    if not os.access(existing, os.W_OK):
        raise ConfigError("out", f"output directory is not writable: {existing}")


def load_config_file(path: str | os.PathLike) -> dict[str, Any]:
    source = Path(path)
    if not source.is_file():
        raise ConfigError("config", f"config file not found: {source}")
    try:
        payload = json.loads(source.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError("config", f"{source} is not valid JSON ({e.msg} at line {e.lineno})") from e
    return dict(_expect_mapping("config", payload))


def parse_config(
        path: str | os.PathLike | None = None,
        overrides: Mapping[str, Any] | None = None,
        require_dataset: bool = True,
) -> RunConfig:
    """
    Build a validated RunConfig from a JSON file and flag overrides.

    Overrides use the top-level key names (``seed``, ``metric``, ``margin``,
    ``n``, ``episodes_per_epoch``, ...) and win over file values; ``None``
    override values are ignored. Relative dataset paths resolve against the
    config file's directory.
    """
    payload = load_config_file(path) if path is not None else {}
    base = Path(path).resolve().parent if path is not None else Path.cwd()
    allowed = {*_TRAIN_KEYS, *_METRIC_KEYS, *_RUN_KEYS, *_NESTED_KEYS}
    _reject_unknown("", payload, allowed)

    merged = dict(payload)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in allowed:
            raise ConfigError(key, "unknown key")
        merged[key] = value

    train_values = {key: _coerce(key, merged[key], kind) for key, kind in _TRAIN_KEYS.items() if key in merged}
    metric_values = {key: _coerce(key, merged[key], kind) for key, kind in _METRIC_KEYS.items() if key in merged}
    seed = train_values.get("seed", 0)

    train = TrainConfig(metric=_parse_metric(metric_values), **train_values)

    dataset = None
    if "dataset" in merged:
        dataset = _parse_dataset(merged["dataset"], seed, base)
    elif require_dataset:
        raise ConfigError("dataset", "missing dataset source (image_folder, synthetic_archive or synthetic)")

    out = Path(_coerce("out", merged.get("out", "runs/latest"), str))
    _check_writable(out)

    config = RunConfig(train=train, dataset=dataset, out=out)
    if "split" in merged:
        config = replace(config, split=_parse_split(merged["split"]))
    if "backbone" in merged:
        config = replace(config, backbone=backbone_from_dict(_expect_mapping("backbone", merged["backbone"])))
    if "eval_episodes" in merged:
        episodes = _coerce("eval_episodes", merged["eval_episodes"], int)
        if episodes < 1:
            raise ConfigError("eval_episodes", "must be >= 1")
        config = replace(config, eval_episodes=episodes)
    if "margins" in merged:
        config = replace(config, margins=_parse_margins(merged["margins"]))
    if "checkpoint" in merged:
        config = replace(config, checkpoint=Path(_coerce("checkpoint", merged["checkpoint"], str)))

    logger.debug(f"Run config: {config}")
    return config
