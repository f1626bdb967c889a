"""Exception taxonomy shared across the pipeline.

Errors are split by how the caller should react:

  ConfigurationError  - bad config/credentials; retrying will not help
  RetriableError      - transient backend/network trouble; retry may help
  BackendDataError    - backend answered, but the payload violates its contract
  ValidationFailed    - a completion/record failed schema validation (carries
                        the typed issue list used by the repair loop)
  GenerationFailed    - every repair attempt was exhausted
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


class CardforgeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(CardforgeError):
    pass


class RetriableError(CardforgeError):
    """Transient failure. May carry partial progress so a retry can resume."""

    def __init__(self, message: str, *, last_page: int | None = None,
                 partial: Any = None):
        super().__init__(message)
        self.last_page = last_page
        self.partial = partial


class BackendDataError(CardforgeError):
    pass


class TemplateError(CardforgeError):
    pass


class ExportError(CardforgeError):
    pass


class NormalizationError(CardforgeError):
    """A raw corpus record could not be normalized. Names the failing field."""

    def __init__(self, field_name: str, reason: str):
        super().__init__(f"{field_name}: {reason}")
        self.field_name = field_name
        self.reason = reason


@dataclass(frozen=True)
class ValidationIssue:
    """One violated contract on a card record or model completion.

    kind is one of: "syntax" (unparseable JSON; offset = byte position),
    "missing_field", "invalid_value".
    """

    kind: str
    field: str
    reason: str = ""
    offset: int | None = None

    def __str__(self) -> str:
        if self.kind == "syntax":
            return f"syntax error at byte {self.offset}: {self.reason}"
        if self.kind == "missing_field":
            return f"missing required field '{self.field}'"
        return f"invalid value for '{self.field}': {self.reason}"


class ValidationFailed(CardforgeError):
    """Raised when a completion or record violates the card schema."""

    def __init__(self, issues: list[ValidationIssue]):
        super().__init__("; ".join(str(i) for i in issues) or "validation failed")
        self.issues = issues


@dataclass
class AttemptLog:
    """What one generation attempt produced and why it was rejected."""

    raw_completion: str
    issues: list[ValidationIssue] = field(default_factory=list)


class GenerationFailed(CardforgeError):
    """All repair attempts exhausted. Carries every attempt's error log."""

    def __init__(self, attempts: list[AttemptLog]):
        super().__init__(
            f"no valid card after {len(attempts)} attempts "
            f"(last errors: {'; '.join(str(i) for i in attempts[-1].issues) if attempts else 'none'})"
        )
        self.attempts = attempts
