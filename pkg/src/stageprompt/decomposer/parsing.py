"""Recover a decomposition from a raw model reply.

Models wrap the requested dictionary in prose, code fences, or both, and
sometimes emit Python-style literals instead of JSON. The scan below finds
every balanced brace span, parses each leniently, and keeps the last one that
parses; only then are schema and field types enforced.
"""

from __future__ import annotations

import ast
import json
import re
from typing import Any

from ..errors import ReplyParseError, ReplySchemaError, ReplyTypeError
from .instruction import DICTIONARY_MARKER, EXPLANATION_MARKER, PROMPTS_KEY, SWITCH_KEY

_TRAILING_COMMA_RE = re.compile(r",\s*([}\]])")
_EXPLANATION_RE = re.compile(r"a\s*\.\s*Explanation\s*:?", re.IGNORECASE)


def _balanced_spans(text: str) -> list[tuple[int, int]]:
    """Top-level ``{...}`` spans, tracking quoted strings so braces inside
    prompt text do not unbalance the scan."""
    spans: list[tuple[int, int]] = []
    depth = 0
    start = -1
    quote: str | None = None
    escaped = False
    for i, ch in enumerate(text):
        if quote is not None:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == quote:
                quote = None
            continue
        if ch in "\"'" and depth > 0:
            quote = ch
        elif ch == "{":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "}":
            if depth > 0:
                depth -= 1
                if depth == 0:
                    spans.append((start, i + 1))
    return spans


def _lenient_parse(fragment: str) -> Any:
    try:
        return json.loads(fragment)
    except ValueError:
        pass
    try:
        return ast.literal_eval(fragment)
    except (ValueError, SyntaxError, MemoryError, RecursionError):
        pass
    try:
        return json.loads(_TRAILING_COMMA_RE.sub(r"\1", fragment))
    except ValueError:
        return None


def _span_from(text: str, start: int) -> int | None:
    """End index of the balanced span opening at ``start``, or None."""
    depth = 0
    quote: str | None = None
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if quote is not None:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == quote:
                quote = None
            continue
        if ch in "\"'":
            quote = ch
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return i + 1
    return None


def extract_last_mapping(text: str) -> tuple[dict[str, Any] | None, int]:
    """Return (last parseable dict, its start offset), or (None, best offset)."""
    spans = _balanced_spans(text)
    for start, end in reversed(spans):
        parsed = _lenient_parse(text[start:end])
        if isinstance(parsed, dict):
            return parsed, start
    # a stray unmatched brace in surrounding prose poisons the single-pass
    # scan; retry anchored at each "{", nearest the end first
    for start in (m.start() for m in reversed(list(re.finditer(r"\{", text)))):
        end = _span_from(text, start)
        if end is None:
            continue
        parsed = _lenient_parse(text[start:end])
        if isinstance(parsed, dict):
            return parsed, start
    last_brace = text.rfind("{")
    return None, last_brace if last_brace >= 0 else len(text)


def _coerce_switch_steps(values: Any) -> tuple[int, ...]:
    if not isinstance(values, (list, tuple)):
        raise ReplyTypeError(f"{SWITCH_KEY} must be a list, got {type(values).__name__}")
    steps: list[int] = []
    for v in values:
        # bool is an int subclass; a bare True is still not a step index
        if isinstance(v, bool) or not isinstance(v, int):
            raise ReplyTypeError(f"switch step {v!r} is not an integer")
        steps.append(v)
    return tuple(steps)


def _coerce_prompts(values: Any) -> tuple[str, ...]:
    if not isinstance(values, (list, tuple)):
        raise ReplyTypeError(f"{PROMPTS_KEY} must be a list, got {type(values).__name__}")
    prompts: list[str] = []
    for v in values:
        if not isinstance(v, str):
            raise ReplyTypeError(f"prompt entry {v!r} is not a string")
        prompts.append(v)
    return tuple(prompts)


def _extract_explanation(raw: str, dict_start: int) -> str:
    marker = _EXPLANATION_RE.search(raw[:dict_start])
    if not marker:
        return ""
    region = raw[marker.end():dict_start]
    stop = region.find(DICTIONARY_MARKER)
    if stop < 0:
        # tolerate a bare "b." label when the full marker text was mangled
        alt = re.search(r"(?m)^\s*b\s*\.", region)
        stop = alt.start() if alt else len(region)
    return region[:stop].strip()


def parse_llm_output(raw: str, mode: "DecomposerMode") -> "Decomposition":
    """Parse ``raw`` into a Decomposition.

    Raises ReplyParseError (nothing dictionary-shaped found), ReplySchemaError
    (required key absent), or ReplyTypeError (wrong field types). Validation of
    step ordering and bounds is a separate concern.
    """
    from .core import Decomposition, DecomposerMode

    mapping, offset = extract_last_mapping(raw)
    if mapping is None:
        raise ReplyParseError(
            f"no well-formed dictionary found in reply (scanned to offset {offset})",
            offset=offset,
        )
    for key in (PROMPTS_KEY, SWITCH_KEY):
        if key not in mapping:
            raise ReplySchemaError(key)
    prompts = _coerce_prompts(mapping[PROMPTS_KEY])
    steps = _coerce_switch_steps(mapping[SWITCH_KEY])
    explanation = "" if mode is DecomposerMode.NO_REASONING else _extract_explanation(raw, offset)
    return Decomposition(
        prompts=prompts,
        switch_steps=steps,
        explanation=explanation,
        raw_response=raw,
    )


# Marker constants re-exported for tests and renderers.
__all__ = [
    "parse_llm_output",
    "extract_last_mapping",
    "EXPLANATION_MARKER",
    "DICTIONARY_MARKER",
]
