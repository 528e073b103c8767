"""Chat-completion clients for the decomposition model and the judging model.

The HTTP clients speak the common chat-completions wire shape. The scripted
clients replay fixtures through the exact same reply format, so the whole
pipeline (parsing included) runs offline and deterministically.
"""

from __future__ import annotations

import base64
import json
import logging
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Protocol, Sequence

from .errors import ConfigurationError, TransportError
from .util import sha256_hex

LOGGER = logging.getLogger(__name__)

Message = dict[str, Any]

_RETRYABLE_STATUS = {408, 409, 429, 500, 502, 503, 504}


class ChatClient(Protocol):
    """Text-only chat completion."""

    def complete(self, messages: Sequence[Message], *, model_id: str,
                 temperature: float, timeout: float) -> str: ...


class VisionClient(Protocol):
    """Chat completion where the first user message carries one image."""

    def complete(self, messages: Sequence[Message], image_path: Path, *,
                 model_id: str, temperature: float, timeout: float) -> str: ...


def _post_chat(endpoint: str, api_key: str | None, payload: dict[str, Any],
               timeout: float, max_attempts: int) -> str:
    import requests

    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    last_error: Exception | None = None
    for attempt in range(max_attempts):
        if attempt:
            time.sleep(min(2.0 ** attempt, 30.0))
        try:
            resp = requests.post(endpoint, json=payload, headers=headers, timeout=timeout)
        except requests.RequestException as exc:
            last_error = exc
            LOGGER.warning("chat endpoint unreachable (attempt %d): %s", attempt + 1, exc)
            continue
        if resp.status_code in _RETRYABLE_STATUS:
            last_error = TransportError(f"endpoint returned {resp.status_code}")
            LOGGER.warning("chat endpoint returned %d (attempt %d)", resp.status_code, attempt + 1)
            continue
        if resp.status_code != 200:
            raise TransportError(f"endpoint returned {resp.status_code}: {resp.text[:500]}")
        try:
            body = resp.json()
            return body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"endpoint returned an unexpected body: {exc}") from exc
    raise TransportError(f"endpoint failed after {max_attempts} attempts: {last_error}")


@dataclass
class HttpChatClient:
    """Text chat against a chat-completions endpoint."""

    endpoint: str
    api_key: str | None = None
    max_retries: int = 3

    def complete(self, messages: Sequence[Message], *, model_id: str,
                 temperature: float, timeout: float) -> str:
        payload = {"model": model_id, "temperature": temperature, "messages": list(messages)}
        return _post_chat(self.endpoint, self.api_key, payload, timeout, self.max_retries + 1)


@dataclass
class HttpVisionClient:
    """Vision chat: the image rides in the first user message as a data URL."""

    endpoint: str
    api_key: str | None = None
    max_retries: int = 3

    def complete(self, messages: Sequence[Message], image_path: Path, *,
                 model_id: str, temperature: float, timeout: float) -> str:
        encoded = base64.b64encode(Path(image_path).read_bytes()).decode("ascii")
        wired: list[Message] = []
        image_attached = False
        for msg in messages:
            if not image_attached and msg.get("role") == "user":
                wired.append({
                    "role": "user",
                    "content": [
                        {"type": "text", "text": msg["content"]},
                        {"type": "image_url",
                         "image_url": {"url": f"data:image/png;base64,{encoded}"}},
                    ],
                })
                image_attached = True
            else:
                wired.append(dict(msg))
        payload = {"model": model_id, "temperature": temperature, "messages": wired}
        return _post_chat(self.endpoint, self.api_key, payload, timeout, self.max_retries + 1)


def _first_user_content(messages: Sequence[Message]) -> str:
    for msg in messages:
        if msg.get("role") == "user":
            return str(msg.get("content", ""))
    return ""


def normalize_prompt_key(text: str) -> str:
    """Lookup key for fixture prompts: trimmed, case-folded, no trailing period."""
    return re.sub(r"\s+", " ", text).strip().rstrip(".").casefold()


@dataclass
class ScriptedChatClient:
    """Replays canned decompositions keyed by target prompt.

    Replies are rendered in the real output format so the production parser is
    exercised. Unknown prompts follow ``unknown_policy``:

    * ``"proxy"``: a deterministic two-prompt decomposition (placeholder scene
      first, target second, switch at step 3).
    * ``"identity"``: a single-prompt reply declaring no decomposition needed.
    """

    fixtures: Mapping[str, tuple[str, tuple[str, ...], tuple[int, ...]]] = field(default_factory=dict)
    unknown_policy: str = "proxy"
    calls: int = 0

    def complete(self, messages: Sequence[Message], *, model_id: str,
                 temperature: float, timeout: float) -> str:
        from .decomposer.instruction import render_decomposition_reply

        self.calls += 1
        target = _first_user_content(messages).strip()
        hit = self.fixtures.get(normalize_prompt_key(target))
        if hit is not None:
            explanation, prompts, steps = hit
        elif self.unknown_policy == "identity":
            explanation = "This scene is visually coherent, so no decomposition is needed."
            prompts, steps = (target,), ()
        else:
            explanation = ("The scene pairs an object with an unusual context, so a plain "
                           "placeholder stabilizes the layout first.")
            prompts, steps = ("A plain placeholder scene, neutral lighting", target), (3,)
        return render_decomposition_reply(explanation, prompts, steps)


def default_scripted_chat_client(unknown_policy: str = "proxy") -> ScriptedChatClient:
    from .decomposer.fixtures import scripted_fixture_map

    return ScriptedChatClient(fixtures=scripted_fixture_map(), unknown_policy=unknown_policy)


def load_scripted_chat_client(path: Path | None) -> ScriptedChatClient:
    """Build a scripted chat client, optionally extended from a JSON fixture file.

    File shape::

        {"unknown_policy": "proxy",
         "decompositions": [{"target": ..., "explanation": ...,
                             "prompts_list": [...], "switch_prompts_steps": [...]}]}
    """
    client = default_scripted_chat_client()
    if path is None:
        return client
    try:
        body = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigurationError(f"cannot load scripted chat fixture {path}: {exc}") from exc
    fixtures = dict(client.fixtures)
    for row in body.get("decompositions", []):
        try:
            fixtures[normalize_prompt_key(row["target"])] = (
                str(row.get("explanation", "")),
                tuple(str(p) for p in row["prompts_list"]),
                tuple(int(s) for s in row["switch_prompts_steps"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"bad decomposition fixture in {path}: {exc}") from exc
    return ScriptedChatClient(
        fixtures=fixtures,
        unknown_policy=str(body.get("unknown_policy", client.unknown_policy)),
    )


_PROMPT_IN_INSTRUCTION_RE = re.compile(r'The text prompt is: "(.*?)"', re.DOTALL)

ScorePlan = Callable[[Path, str], "int | None"]


def hash_score_plan(image_path: Path, prompt: str) -> int:
    """Deterministic 1..5 score derived from the image stem and prompt."""
    digest = sha256_hex(f"{Path(image_path).stem}|{prompt}")
    return 1 + int(digest[:8], 16) % 5


@dataclass
class ScriptedVisionClient:
    """Replays judge verdicts through the real reply format.

    ``plan`` maps (image path, prompt) to a score; ``None`` yields a reply with
    no score marker at all, which drives the caller's unparseable-reply path.
    """

    plan: ScorePlan = hash_score_plan
    calls: int = 0

    def complete(self, messages: Sequence[Message], image_path: Path, *,
                 model_id: str, temperature: float, timeout: float) -> str:
        self.calls += 1
        instruction = _first_user_content(messages)
        match = _PROMPT_IN_INSTRUCTION_RE.search(instruction)
        prompt = match.group(1) if match else ""
        score = self.plan(Path(image_path), prompt)
        if score is None:
            return "The evaluation service produced no verdict for this item."
        return (f"### ALIGNMENT SCORE: {score}\n"
                f"### ALIGNMENT EXPLANATION: scripted verdict for offline runs.")


def load_scripted_vision_client(path: Path | None) -> ScriptedVisionClient:
    """Build a scripted judge, optionally from a JSON fixture file.

    File shape::

        {"default": "hash" | 1..5 | null,
         "by_image_stem": {"<stem>": 1..5 | null},
         "by_prompt": {"<prompt>": 1..5 | null}}
    """
    if path is None:
        return ScriptedVisionClient()
    try:
        body = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigurationError(f"cannot load scripted judge fixture {path}: {exc}") from exc
    by_stem = {str(k): v for k, v in body.get("by_image_stem", {}).items()}
    by_prompt = {normalize_prompt_key(str(k)): v for k, v in body.get("by_prompt", {}).items()}
    default = body.get("default", "hash")

    def plan(image_path: Path, prompt: str) -> int | None:
        stem = Path(image_path).stem
        if stem in by_stem:
            value = by_stem[stem]
        elif normalize_prompt_key(prompt) in by_prompt:
            value = by_prompt[normalize_prompt_key(prompt)]
        elif default == "hash":
            return hash_score_plan(image_path, prompt)
        else:
            value = default
        return None if value is None else int(value)

    return ScriptedVisionClient(plan=plan)
