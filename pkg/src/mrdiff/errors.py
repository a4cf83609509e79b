"""Exception types shared across the toolkit."""


class MrdiffError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(MrdiffError):
    """Operand shapes are incompatible with the requested operation."""


class ConfigError(MrdiffError):
    """A configuration value is outside its valid range."""


class ContractError(MrdiffError):
    """A call violated an operation precondition."""


class FormatError(MrdiffError):
    """A serialized container is malformed; message carries the byte offset."""


class CheckpointError(MrdiffError):
    """A checkpoint does not match the expected parameter tree."""
