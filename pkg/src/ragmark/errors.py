"""Exception hierarchy shared across the package.

Every error raised on a user-facing path derives from RagmarkError so
the CLI can map failures onto stable exit codes.
"""

from __future__ import annotations


class RagmarkError(Exception):
    """Base class for all package-specific failures."""


class ValidationError(RagmarkError):
    """Bad user input: config files, manifests, malformed arguments."""


class InvalidManifest(ValidationError):
    """Corpus manifest is missing fields or points at unreadable files."""


class InvalidConfig(ValidationError):
    """Experiment or provider configuration fails validation."""


class EmptyDocument(ValidationError):
    """A corpus document normalizes to nothing but whitespace."""


class EmptyInput(ValidationError):
    """An operation that needs text received an empty string."""


class InvalidChunking(ValidationError):
    """Splitter parameters violate their preconditions."""


class ConfigMismatch(ValidationError):
    """An operation received a config built for a different variant."""


class SchemaError(ValidationError):
    """A data file has missing, extra, or malformed columns."""


class AuthMissing(ValidationError):
    """The environment variable holding an API key is unset."""


class Unsupported(ValidationError):
    """The provider cannot perform the requested operation."""


class ZeroVector(ValidationError):
    """Cosine similarity requested against a zero vector."""


class DuplicateRef(ValidationError):
    """Two index entries share the same chunk reference."""


class MissingJoin(ValidationError):
    """A chunk reference cannot be resolved during a report join."""


class DimensionMismatch(ValidationError):
    """Vector dimensionality disagrees with the index or provider."""


class InsufficientChunks(ValidationError):
    """Dataset generation asked for more eligible chunks than exist."""


class DegenerateData(ValidationError):
    """Statistics requested on data without enough structure to test."""


class ProviderError(RagmarkError):
    """A remote embedding or chat service failed after retries."""


class ReplayMiss(RagmarkError):
    """Replay transcript has no entry for the requested completion."""


class MalformedResponse(RagmarkError):
    """A chat completion could not be parsed even after the retry."""


class EmptyField(MalformedResponse):
    """A parsed completion field was present but empty."""
