"""Exception hierarchy shared across the package."""


class TrapccError(Exception):
    """Base class for all package-specific errors."""


class EmptyCloudError(TrapccError):
    """An operation that requires points received an empty cloud."""


class FrameError(TrapccError):
    """A cloud arrived in the wrong coordinate frame."""


class NoObservationsError(TrapccError):
    """A tracked instance has no observations to aggregate."""


class EmptyPoolError(TrapccError):
    """Retrieval was attempted against a pool with no whole entries."""


class BothHalvesEmptyError(TrapccError):
    """P-Net needs at least one non-empty half."""


class NoForwardCacheError(TrapccError):
    """backward() was called without a cached forward pass."""


class ShapeMismatchError(TrapccError):
    """Parameter and gradient shapes disagree."""


class EmptyDatasetError(TrapccError):
    """Training requires at least one sample."""


class CheckpointError(TrapccError):
    """A checkpoint file is missing, truncated, or malformed."""


class ManifestError(TrapccError):
    """A scene or pool manifest is missing entries or malformed."""


class ConfigError(TrapccError):
    """A run configuration failed schema validation."""
