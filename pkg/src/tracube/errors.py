class TracubeError(Exception):
    """Base class for all errors raised by this package."""


class BuildError(TracubeError, ValueError):
    """Invalid input handed to a structure builder."""


class CorruptStoreError(TracubeError):
    """A serialized store (or one of its blocks) failed validation."""


class NotFoundError(TracubeError, LookupError):
    """A select/lookup asked for an occurrence that does not exist."""
