"""Exception hierarchy shared by all rvoskit modules."""


class RvosError(Exception):
    """Base class for every error raised by this package."""


class DatasetFormatError(RvosError):
    """The on-disk dataset tree or manifest violates the expected layout."""


class IoError(RvosError):
    """A file (typically a frame image) could not be read; carries the path."""

    def __init__(self, path, message: str = ""):
        self.path = str(path)
        super().__init__(f"{message + ': ' if message else ''}{self.path}")


class ShapeError(RvosError):
    """Mask / grid dimensions do not agree."""


class MaskFormatError(RvosError):
    """A mask image file is not in an accepted PNG format."""


class CorruptMaskError(RvosError):
    """A run-length encoding violates the mask invariants."""


class ConfigError(RvosError):
    """Invalid configuration value (unknown strategy, bad flag combination)."""


class BackendError(RvosError):
    """An inference backend failed: crash, timeout, or explicit error reply."""


class ProtocolError(RvosError):
    """A backend reply does not conform to the worker wire protocol."""


class MissingPredictionError(RvosError):
    """Predictions are absent for one or more (video, expression) pairs."""

    def __init__(self, pairs):
        self.pairs = sorted(pairs)
        listed = ", ".join(f"{v}/{e}" for v, e in self.pairs[:20])
        more = "" if len(self.pairs) <= 20 else f" (+{len(self.pairs) - 20} more)"
        super().__init__(f"missing predictions for {len(self.pairs)} pair(s): {listed}{more}")


class InvalidInputError(RvosError):
    """An operation was called with arguments outside its contract."""
