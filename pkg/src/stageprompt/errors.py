"""Exception types shared across the package."""

from __future__ import annotations


class StagePromptError(Exception):
    """Base class for every error this package raises on purpose."""


class ConfigurationError(StagePromptError):
    """Bad or missing configuration, detected before any real work starts."""


class TransportError(StagePromptError):
    """A remote endpoint could not be reached or kept failing."""


class ReplyParseError(StagePromptError):
    """No well-formed dictionary could be recovered from a model reply."""

    def __init__(self, message: str, *, offset: int = 0) -> None:
        super().__init__(message)
        self.offset = offset


class ReplySchemaError(StagePromptError):
    """A recovered dictionary is missing a required key."""

    def __init__(self, key: str) -> None:
        super().__init__(f"reply dictionary is missing required key {key!r}")
        self.key = key


class ReplyTypeError(StagePromptError):
    """A recovered dictionary has a field of the wrong type."""


class ScheduleError(StagePromptError):
    """A prompt schedule would not partition the sampling window."""


class PromptEncodingError(StagePromptError):
    """A backend failed to encode a prompt into conditioning."""

    def __init__(self, prompt: str, message: str = "") -> None:
        detail = f": {message}" if message else ""
        super().__init__(f"failed to encode prompt {prompt!r}{detail}")
        self.prompt = prompt


class GenerationError(StagePromptError):
    """A backend step failed mid-generation."""

    def __init__(self, message: str, *, t: int, prompt_index: int) -> None:
        super().__init__(f"step {t} (prompt index {prompt_index}) failed: {message}")
        self.t = t
        self.prompt_index = prompt_index


class CapabilityError(StagePromptError):
    """The selected backend does not support the requested operation."""


class StepRangeError(StagePromptError):
    """A step index falls outside the sampling window."""


class JudgementParseError(StagePromptError):
    """A judge reply could not be turned into a score.

    ``kind`` is one of ``marker-missing``, ``non-integer``, ``out-of-range``.
    """

    def __init__(self, kind: str, message: str) -> None:
        super().__init__(message)
        self.kind = kind


class JudgementError(StagePromptError):
    """Judging an image failed after all retries."""


class AggregationError(StagePromptError):
    """Seed scores could not be aggregated."""


class DatasetError(StagePromptError):
    """A benchmark dataset or prompt file is malformed."""

    def __init__(self, message: str, *, line: int | None = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SummaryError(StagePromptError):
    """A benchmark run cannot be summarized."""
