"""Exception hierarchy shared across the package."""

from __future__ import annotations


class SchemaFilterError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(SchemaFilterError):
    """Schema file failed to parse or violated a structural invariant.

    ``location`` names the offending field or file position when known,
    e.g. ``tables[2].columns[0].name`` or ``foreign_keys[1]``.
    """

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(f"{message} (at {location})" if location else message)


class SqlExtractionError(SchemaFilterError):
    """Base class for gold-column extraction failures."""


class UnsupportedSqlError(SqlExtractionError):
    """Statement uses syntax outside the supported subset (CTEs, windows, ...)."""


class AmbiguousColumnError(SqlExtractionError):
    """An unqualified column name matches more than one in-scope table."""


class UnknownColumnError(SchemaFilterError):
    """A referenced column does not resolve against the schema."""


class EmptyPositivesError(SchemaFilterError):
    """No gold SQL referenced any schema column; a labeled example needs >=1 positive."""


class ContainerError(SchemaFilterError):
    """Base class for artifact (graph/index/weights) file problems."""


class FormatVersionError(ContainerError):
    """Artifact file was written by an incompatible format version."""


class CorruptionError(ContainerError):
    """Artifact file is truncated or fails its checksum."""


class NumericsError(SchemaFilterError):
    """Non-finite values appeared during a forward or gradient computation."""


class DivergenceError(SchemaFilterError):
    """Training loss exceeded 10x its initial value."""


class DegenerateLabelsError(SchemaFilterError):
    """A ranking metric needs at least one positive and one negative label."""


class ProviderError(SchemaFilterError):
    """Base class for embedding/scoring provider failures."""


class TransportError(ProviderError):
    """The remote endpoint could not be reached or timed out."""


class MalformedResponseError(ProviderError):
    """The remote endpoint returned a payload outside the wire contract."""


class DimensionMismatchError(SchemaFilterError):
    """A vector or tensor does not match its declared dimension."""


class ModelVersionChangedError(ProviderError):
    """The remote model version changed mid-run; embeddings are not comparable."""


class MissingArtifactError(SchemaFilterError):
    """A pipeline stage needs an artifact (graph, index, weights) that is not loaded."""


class UnknownDatabaseError(SchemaFilterError):
    """The requested db_id is not loaded in the engine."""
