import enum
from dataclasses import asdict, dataclass, field
from typing import Any

from src.app.core.errors import ConfigError


class Padding(str, enum.Enum):
    same = "same"
    valid = "valid"


@dataclass(frozen=True)
class Conv4Config:
    blocks: int = 4
    filters_per_block: int = 64
    kernel: int = 3
    pool: int = 2
    input_height: int = 84
    input_width: int = 84
    input_channels: int = 3
    padding: Padding = Padding.same

    kind = "conv4"

    def __post_init__(self):
        object.__setattr__(self, "padding", Padding(self.padding))
        for name in ("blocks", "filters_per_block", "kernel", "pool", "input_height", "input_width", "input_channels"):
            if getattr(self, name) < 1:
                raise ConfigError(f"backbone.{name}", "must be >= 1")
        height, width = self.final_spatial()
        if height < 1 or width < 1:
            raise ConfigError("backbone", f"spatial extent collapses to {height}x{width} after {self.blocks} blocks")

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return self.input_height, self.input_width, self.input_channels

    def final_spatial(self) -> tuple[int, int]:
        shrink = 0 if self.padding is Padding.same else self.kernel - 1
        height, width = self.input_height, self.input_width
        for _ in range(self.blocks):
            height = (height - shrink) // self.pool
            width = (width - shrink) // self.pool
        return height, width

    @property
    def embedding_dim(self) -> int:
        height, width = self.final_spatial()
        return height * width * self.filters_per_block

    def to_dict(self) -> dict[str, Any]:
        payload = asdict(self)
        payload["padding"] = self.padding.value
        return {"kind": self.kind, **payload}


@dataclass(frozen=True)
class MLPConfig:
    layer_widths: tuple[int, ...] = field(default=(16, 32, 16))

    kind = "mlp"

    def __post_init__(self):
        widths = tuple(int(width) for width in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 2:
            raise ConfigError("backbone.layer_widths", "needs at least input and output widths")
        if any(width < 1 for width in widths):
            raise ConfigError("backbone.layer_widths", f"zero or negative width in {list(widths)}")
        if widths[-1] < 2:
            raise ConfigError("backbone.layer_widths", "output width must be >= 2")

    @property
    def input_shape(self) -> tuple[int]:
        return (self.layer_widths[0],)

    @property
    def embedding_dim(self) -> int:
        return self.layer_widths[-1]

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "layer_widths": list(self.layer_widths)}


BackboneConfig = Conv4Config | MLPConfig


def backbone_from_dict(payload: dict[str, Any]) -> BackboneConfig:
    payload = dict(payload)
    kind = payload.pop("kind", None)
    try:
        if kind == Conv4Config.kind:
            return Conv4Config(**payload)
        if kind == MLPConfig.kind:
            return MLPConfig(layer_widths=tuple(payload.pop("layer_widths")), **payload)
    except TypeError as e:
        raise ConfigError("backbone", str(e)) from e
    except KeyError as e:
        raise ConfigError(f"backbone.{e.args[0]}", "missing") from e
    raise ConfigError("backbone.kind", f"expected 'conv4' or 'mlp', got {kind!r}")
