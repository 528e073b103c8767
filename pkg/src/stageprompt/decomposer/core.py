"""Decomposition request/result types and the model-driven retry loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

from ..clients import ChatClient, Message
from ..errors import ConfigurationError, ReplyParseError, ReplySchemaError, ReplyTypeError
from .cache import DecompositionCache, make_cache_key
from .instruction import InContextExample, build_instruction
from .parsing import parse_llm_output
from .validation import ValidationReport, validate_decomposition

LOGGER = logging.getLogger(__name__)


class DecomposerMode(str, Enum):
    """How the instruction is assembled, or whether the model is consulted at all.

    * FULL: complete instruction with reasoning and in-context examples.
    * NO_INCONTEXT: examples omitted.
    * NO_REASONING: explanation requirement removed everywhere.
    * MAX_TWO: like FULL but the prompt cap is lowered to two.
    * STATIC: no model call; the target prompt is used as-is.
    """

    FULL = "full"
    NO_INCONTEXT = "no-incontext"
    NO_REASONING = "no-reasoning"
    MAX_TWO = "max-two"
    STATIC = "static"


@dataclass(frozen=True)
class LlmConfig:
    model_id: str = "gpt-4o"
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    temperature: float = 0.0
    max_retries: int = 3
    timeout: float = 120.0
    api_key_env: str = "LLM_API_KEY"

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ConfigurationError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_retries < 0:
            raise ConfigurationError(f"max_retries must be >= 0, got {self.max_retries}")
        if self.timeout <= 0:
            raise ConfigurationError(f"timeout must be positive, got {self.timeout}")


@dataclass(frozen=True)
class DecompositionRequest:
    target_prompt: str
    mode: DecomposerMode = DecomposerMode.FULL
    max_prompts: int = 3
    total_steps: int = 50
    llm: LlmConfig = field(default_factory=LlmConfig)
    force_target_final: bool = False

    def __post_init__(self) -> None:
        if not self.target_prompt.strip():
            raise ConfigurationError("target_prompt must be nonempty")
        if self.max_prompts < 1:
            raise ConfigurationError(f"max_prompts must be >= 1, got {self.max_prompts}")
        if self.total_steps < 2:
            raise ConfigurationError(f"total_steps must be >= 2, got {self.total_steps}")

    def effective_cap(self) -> int:
        if self.mode is DecomposerMode.MAX_TWO:
            return min(self.max_prompts, 2)
        return self.max_prompts


@dataclass(frozen=True)
class Decomposition:
    """An ordered prompt sequence with the steps at which each switch lands.

    ``switch_steps[i]`` is the first step on which ``prompts[i + 1]`` is
    active. ``fallback_reason`` is set when the model could not produce a
    usable reply and the identity decomposition was substituted.
    """

    prompts: tuple[str, ...]
    switch_steps: tuple[int, ...]
    explanation: str = ""
    raw_response: str = ""
    fallback_reason: str | None = None

    @property
    def is_identity(self) -> bool:
        return len(self.prompts) == 1 and not self.switch_steps

    @property
    def is_fallback(self) -> bool:
        return self.fallback_reason is not None

    @classmethod
    def identity(cls, target_prompt: str, *, raw_response: str = "",
                 fallback_reason: str | None = None) -> "Decomposition":
        return cls(
            prompts=(target_prompt,),
            switch_steps=(),
            raw_response=raw_response,
            fallback_reason=fallback_reason,
        )

    def to_json_dict(self) -> dict:
        return {
            "prompts": list(self.prompts),
            "switch_steps": list(self.switch_steps),
            "explanation": self.explanation,
            "raw_response": self.raw_response,
            "fallback_reason": self.fallback_reason,
        }

    @classmethod
    def from_json_dict(cls, body: dict) -> "Decomposition":
        return cls(
            prompts=tuple(str(p) for p in body["prompts"]),
            switch_steps=tuple(int(s) for s in body["switch_steps"]),
            explanation=str(body.get("explanation", "")),
            raw_response=str(body.get("raw_response", "")),
            fallback_reason=body.get("fallback_reason"),
        )


_RETRY_TEMPLATE = (
    "Your previous reply was rejected for the following reasons:\n{feedback}\n"
    "Reply again, following the required output format exactly."
)


def decompose(request: DecompositionRequest, client: ChatClient, *,
              cache: DecompositionCache | None = None,
              examples: Sequence[InContextExample] | None = None) -> Decomposition:
    """Resolve ``request`` into a validated Decomposition.

    STATIC answers immediately with the identity decomposition and performs no
    model call. Otherwise the model is asked once and retried up to
    ``request.llm.max_retries`` times, with parse or validation feedback
    appended to the conversation each time. When every attempt fails, the
    identity decomposition is returned with ``fallback_reason`` set; the
    caller decides whether that is fatal.
    """
    if request.mode is DecomposerMode.STATIC:
        return Decomposition.identity(request.target_prompt)

    cap = request.effective_cap()
    key = make_cache_key(request.target_prompt, request.mode, request.llm.model_id, cap)
    if cache is not None:
        hit = cache.lookup(key)
        # Entries are keyed without total_steps, so re-check bounds for this
        # request before trusting one.
        if hit is not None and validate_decomposition(hit, request).ok:
            return hit

    instruction = build_instruction(request.mode, cap, examples=examples)
    messages: list[Message] = [
        {"role": "system", "content": instruction},
        {"role": "user", "content": request.target_prompt},
    ]

    raw = ""
    feedback = ""
    for attempt in range(request.llm.max_retries + 1):
        raw = client.complete(
            messages,
            model_id=request.llm.model_id,
            temperature=request.llm.temperature,
            timeout=request.llm.timeout,
        )
        try:
            parsed = parse_llm_output(raw, request.mode)
        except (ReplyParseError, ReplySchemaError, ReplyTypeError) as exc:
            feedback = f"- {exc}"
            LOGGER.info("decomposition reply unparseable (attempt %d): %s", attempt + 1, exc)
            messages.append({"role": "assistant", "content": raw})
            messages.append({"role": "user", "content": _RETRY_TEMPLATE.format(feedback=feedback)})
            continue

        if request.force_target_final and parsed.prompts:
            parsed = replace(
                parsed,
                prompts=parsed.prompts[:-1] + (request.target_prompt,),
            )

        report: ValidationReport = validate_decomposition(parsed, request)
        for warning in report.warnings:
            LOGGER.warning("decomposition advisory for %r: %s", request.target_prompt, warning)
        if report.ok:
            if cache is not None:
                cache.store(key, parsed)
            return parsed

        feedback = report.describe()
        LOGGER.info("decomposition rejected (attempt %d):\n%s", attempt + 1, feedback)
        messages.append({"role": "assistant", "content": raw})
        messages.append({"role": "user", "content": _RETRY_TEMPLATE.format(feedback=feedback)})

    reason = f"no valid decomposition after {request.llm.max_retries + 1} attempts; last problems:\n{feedback}"
    LOGGER.warning("falling back to the target prompt for %r: %s", request.target_prompt, reason)
    return Decomposition.identity(request.target_prompt, raw_response=raw, fallback_reason=reason)
