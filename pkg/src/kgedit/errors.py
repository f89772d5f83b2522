"""Exception hierarchy shared across the package.

CLI exit-code mapping: ``ScorerError`` and subclasses are backend/transport
failures (exit 2); every other ``KGEditError`` is an input error (exit 1).
"""


class KGEditError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(KGEditError):
    """Invalid value or violated invariant in caller-supplied data."""


class ConflictError(ValidationError):
    """Two edits target the same (head, relation) with different new tails."""


class ChainError(ValidationError):
    """Fact list is not a tail-to-head linked chain.

    ``index`` is the position of the first offending link.
    """

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class DatasetError(ValidationError):
    """Dataset file failed to parse or contains invalid cases.

    ``case_ids`` lists the offending records when known.
    """

    def __init__(self, message: str, case_ids: list[str] | None = None):
        super().__init__(message)
        self.case_ids = case_ids or []


class ConfigError(ValidationError):
    """Bad run configuration (missing path, out-of-range setting)."""


class RetrievalError(KGEditError):
    """Retrieval cannot proceed (no outgoing edges, fan-out over cap)."""


class OracleError(KGEditError):
    """Exhaustive enumeration exceeded its safety bound."""


class ScorerError(KGEditError):
    """Base class for probability-backend failures."""


class TransportError(ScorerError):
    """Network-level failure talking to a remote backend (retryable)."""


class ProtocolError(ScorerError):
    """Remote backend returned a malformed or unexpected response."""


class CredentialError(ScorerError):
    """Remote backend rejected the request credentials."""
