"""Image-text alignment judging via a vision-language model.

The judge sends one image and a fixed rubric, then parses an integer score
from a marker-anchored reply. Scores are whole points on a 1..5 rubric;
anything fractional is rejected and retried rather than rounded, because a
silent round would shift aggregate results without leaving a trace.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .clients import Message, VisionClient
from .errors import AggregationError, ConfigurationError, JudgementError, JudgementParseError

LOGGER = logging.getLogger(__name__)

SCORE_MARKER = "### ALIGNMENT SCORE:"
EXPLANATION_MARKER = "### ALIGNMENT EXPLANATION:"

ALIGNMENT_TEMPLATE = """\
You are an assistant evaluating an image on how well it aligns with the meaning of a given text prompt.

The text prompt is: "{prompt}"

------------------------------------------------------------

PROMPT ALIGNMENT (Semantic Fidelity)
Evaluate only the meaning conveyed by the image - ignore visual artifacts.
Focus on:
- Are the correct objects present and depicted in a way that clearly demonstrates their intended roles and actions from the prompt?
- Does the scene illustrate the intended situation or use-case in a concrete and functional way, rather than through symbolic, metaphorical, or hybrid representation?
- If the described usage or interaction is missing or unclear, alignment should be penalized.
- Focus strictly on the presence, roles, and relationships of the described elements - not on rendering quality.

Score from 1 to 5:
- 5: Fully conveys the prompt's meaning with correct elements
- 4: Mostly accurate - main elements are correct, with minor conceptual or contextual issues
- 3: Main subjects are present but important attributes or actions are missing or wrong
- 2: Some relevant components are present, but key elements or intent are significantly misrepresented
- 1: Does not reflect the prompt at all

Respond using this format:
### ALIGNMENT SCORE: <score>
### ALIGNMENT EXPLANATION: <explanation>"""

_PLACEHOLDER = "{prompt}"

# Markers are matched leniently: the leading hashes are optional and spacing
# varies, but the score itself must sit on the marker's own line.
_SCORE_MARKER_RE = re.compile(r"(?:#+\s*)?ALIGNMENT\s+SCORE\s*:", re.IGNORECASE)
_EXPLANATION_MARKER_RE = re.compile(r"(?:#+\s*)?ALIGNMENT\s+EXPLANATION\s*:", re.IGNORECASE)
# A standalone integer: no digit or dot on either side, so "4.5" never
# half-matches as "4" or "5".
_INT_RE = re.compile(r"(?<![\d.])-?\d+(?![.\d])")


@dataclass(frozen=True)
class VlmConfig:
    model_id: str = "gpt-4o"
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    temperature: float = 0.0
    max_retries: int = 3
    timeout: float = 120.0
    api_key_env: str = "VLM_API_KEY"

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ConfigurationError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_retries < 0:
            raise ConfigurationError(f"max_retries must be >= 0, got {self.max_retries}")
        if self.timeout <= 0:
            raise ConfigurationError(f"timeout must be positive, got {self.timeout}")


@dataclass(frozen=True)
class AlignmentJudgement:
    score: int  # 1..5
    explanation: str
    raw_response: str
    prompt: str
    image_ref: Path


def build_alignment_instruction(prompt: str) -> str:
    """Substitute ``prompt`` into the rubric. Pure substitution, no escaping."""
    if not prompt.strip():
        raise ConfigurationError("prompt must be nonempty")
    return ALIGNMENT_TEMPLATE.replace(_PLACEHOLDER, prompt)


def parse_judgement(raw: str) -> tuple[int, str]:
    """Extract (score, explanation) from a judge reply.

    The score is the first standalone integer on the SCORE marker's line and
    must lie in 1..5. The explanation is everything after the EXPLANATION
    marker, or empty when that marker is absent.
    """
    marker = _SCORE_MARKER_RE.search(raw)
    if marker is None:
        raise JudgementParseError("marker-missing", "reply contains no ALIGNMENT SCORE marker")
    line_end = raw.find("\n", marker.end())
    score_line = raw[marker.end(): line_end if line_end >= 0 else len(raw)]
    found = _INT_RE.search(score_line)
    if found is None:
        raise JudgementParseError(
            "non-integer",
            f"no whole-number score after the marker: {score_line.strip()!r}",
        )
    score = int(found.group())
    if not 1 <= score <= 5:
        raise JudgementParseError("out-of-range", f"score {score} is outside 1..5")

    explanation = ""
    expl_matches = list(_EXPLANATION_MARKER_RE.finditer(raw))
    if expl_matches:
        explanation = raw[expl_matches[-1].end():].strip()
    return score, explanation


_FORMAT_REMINDER = (
    "Your previous reply could not be scored ({problem}). Respond again using exactly:\n"
    f"{SCORE_MARKER} <whole number 1-5>\n"
    f"{EXPLANATION_MARKER} <explanation>"
)


def judge_alignment(image_ref: Path, prompt: str, cfg: VlmConfig,
                    client: VisionClient) -> AlignmentJudgement:
    """Score how well the image at ``image_ref`` conveys ``prompt``.

    The image file is read, never written. Unparseable replies are retried
    with a format reminder up to ``cfg.max_retries`` times before giving up
    with JudgementError.
    """
    image_ref = Path(image_ref)
    if not image_ref.is_file():
        raise JudgementError(f"image file {image_ref} does not exist")
    try:
        from PIL import Image

        with Image.open(image_ref) as img:
            img.verify()
    except Exception as exc:
        raise JudgementError(f"image file {image_ref} does not decode: {exc}") from exc

    instruction = build_alignment_instruction(prompt)
    messages: list[Message] = [{"role": "user", "content": instruction}]
    last_problem = ""
    raw = ""
    for attempt in range(cfg.max_retries + 1):
        raw = client.complete(
            messages, image_ref,
            model_id=cfg.model_id, temperature=cfg.temperature, timeout=cfg.timeout,
        )
        try:
            score, explanation = parse_judgement(raw)
        except JudgementParseError as exc:
            last_problem = f"{exc.kind}: {exc}"
            LOGGER.info("judge reply unusable (attempt %d): %s", attempt + 1, last_problem)
            messages.append({"role": "assistant", "content": raw})
            messages.append({"role": "user", "content": _FORMAT_REMINDER.format(problem=exc.kind)})
            continue
        return AlignmentJudgement(
            score=score,
            explanation=explanation,
            raw_response=raw,
            prompt=prompt,
            image_ref=image_ref,
        )
    raise JudgementError(
        f"no scoreable reply after {cfg.max_retries + 1} attempts (last problem: {last_problem})"
    )


def aggregate_seed_scores(scores: Sequence[int]) -> float:
    """Mean of per-seed scores scaled by 20, landing in [20, 100]."""
    if not scores:
        raise AggregationError("cannot aggregate an empty score list")
    for s in scores:
        if isinstance(s, bool) or not isinstance(s, int) or not 1 <= s <= 5:
            raise AggregationError(f"score {s!r} is not an integer in 1..5")
    return sum(scores) / len(scores) * 20.0
