"""Exception hierarchy shared by every pipeline stage."""

from __future__ import annotations


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class ConstructionError(PipelineError, ValueError):
    """A domain value was built from input that violates its invariants."""


class UsageError(PipelineError, ValueError):
    """A caller violated an operation's precondition."""


class OutOfBoundsError(PipelineError, ValueError):
    """A box lies entirely outside the image it is meant to index."""


class ParseError(PipelineError, ValueError):
    """Model output could not be parsed.

    ``field`` names the labeled field that was missing or invalid, when the
    failure can be pinned to one. ``raw`` keeps the offending text.
    """

    def __init__(self, message: str, *, field: str | None = None, raw: str | None = None):
        super().__init__(message)
        self.field = field
        self.raw = raw


class RangeError(PipelineError, IndexError):
    """A parsed region index does not refer to an available region."""


class TemplateError(PipelineError, KeyError):
    """Prompt bindings do not match a template's placeholders."""

    def __init__(self, name: str, message: str | None = None):
        super().__init__(name)
        self.name = name
        self.message = message or name

    def __str__(self) -> str:
        return self.message


class ClientError(PipelineError, RuntimeError):
    """A model or OCR service call failed after all retries."""


class FixtureMissError(ClientError):
    """A scripted client has no response recorded for a request."""

    def __init__(self, digest: str, prompt: str):
        super().__init__(f"no fixture matches request digest {digest}")
        self.digest = digest
        self.prompt = prompt


class GroundingFailed(PipelineError):
    """No region survived proposal, correction and keyword fallback."""


class ChainFailed(PipelineError):
    """The entry step of a reasoning chain could not be obtained."""


class ReportError(PipelineError):
    """Predictions could not be joined to their grounded samples."""

    def __init__(self, missing_ids: list[str]):
        super().__init__("unjoinable predictions: " + ", ".join(missing_ids))
        self.missing_ids = missing_ids
