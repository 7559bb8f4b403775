class ProtoMarginError(Exception):
    """Root of every error raised on purpose by this package."""


class ShapeError(ProtoMarginError, ValueError):
    pass


class DomainError(ProtoMarginError, ValueError):
    pass


class GradientError(ProtoMarginError, ValueError):
    pass


class EpisodeError(ProtoMarginError, ValueError):
    pass


class DatasetError(ProtoMarginError, ValueError):
    pass


class ConfigError(ProtoMarginError, ValueError):
    def __init__(self, key_path: str, message: str):
        self.key_path = key_path
        super().__init__(f"{key_path}: {message}" if key_path else message)


class CheckpointError(ProtoMarginError, ValueError):
    pass
