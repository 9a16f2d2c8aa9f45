"""Error types shared across modules, mapped to CLI exit codes."""


class DataError(Exception):
    """Item-level dataset problem (corrupt file, missing sidecar); carries the path."""


class MissingArtifactError(Exception):
    """A required produced artifact (checkpoint, manifest, CSV) does not exist."""


class NumericError(Exception):
    """A computation produced non-finite values."""
