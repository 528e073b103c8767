"""System instruction for the decomposition model, plus reply/example renderers.

The instruction tells a chat model how to split a contextually contradictory
prompt into stage-aligned proxy prompts. It has four sections: the task
framing with a prompt cap, a step-band table mapping sampler step ranges to
what the denoiser commits at that point, a substitution strategy, and a fixed
output format. Example blocks can be appended in the same rendered layout that
the model is asked to reply in.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from ..errors import ConfigurationError

EXPLANATION_MARKER = "a. Explanation:"
DICTIONARY_MARKER = "b. Final dictionary:"
PROMPTS_KEY = "prompts_list"
SWITCH_KEY = "switch_prompts_steps"

# Step bands: what the denoiser is committing while each range of sampler
# steps runs, ordered coarse to fine. The built-in toy backend mirrors these
# boundaries, so keep the two in sync.
STAGE_BAND_BOUNDS = (3, 7, 11)

_STAGE_BANDS = """\
Steps 0--2: Scene layout and dominant color regions (e.g., sky, forest, sand tone)
Steps 3--6: Object shape, size, pose, and position
Steps 7--10: Object identity, material, and surface type (e.g., glass vs. rubber)
Steps 11--13+: Fine features and local details (e.g., tattoos, insects, facial detail)"""

_STABILIZATION_NOTE = (
    "Since denoising progresses from coarse to fine, it is crucial to stabilize "
    "large-scale visual structures (such as body shape, pose, and background) "
    "before introducing small or semantically charged elements (such as facial "
    "details, objects in hand, or surreal features)."
)

_SUBSTITUTION_RULES = """\
1. Begin with high-level layout (background, geometry).
2. Use placeholder concepts if needed to stabilize layout before detailed insertions.
3. Substitutes must match in shape, size, and visual function.
4. Replace placeholders as soon as fidelity permits.
5. Do not maintain substitutions longer than needed.
6. If the prompt is visually coherent, return a single prompt with no decomposition."""

_FORMAT_SKELETON = """\
{
  "prompts_list": [
    "<prompt1>",
    "<prompt2>",
    "...",
    "<target prompt>"
  ],
  "switch_prompts_steps": [<step1>, <step2>, ...]
}"""

_FORMAT_RULES = """\
- The length of switch_prompts_steps should be one less than prompts_list.
- Do not include any text outside this structure."""

_NUMBER_WORDS = {
    1: "one", 2: "two", 3: "three", 4: "four", 5: "five",
    6: "six", 7: "seven", 8: "eight", 9: "nine", 10: "ten",
}


def _cap_word(n: int) -> str:
    return _NUMBER_WORDS.get(n, str(n))


@dataclass(frozen=True)
class InContextExample:
    """One rendered input/output example block appended to the instruction."""

    target: str
    explanation: str
    prompts: tuple[str, ...]
    switch_steps: tuple[int, ...]


DEFAULT_EXAMPLES: tuple[InContextExample, ...] = (
    InContextExample(
        target="A polar bear in a desert",
        explanation=(
            "A polar bear is common in snowy scenes, not deserts. Since no suitable "
            "object proxy exists, the prompt starts with the desert alone before "
            "introducing the unlikely animal."
        ),
        prompts=("A desert", "A polar bear in a desert"),
        switch_steps=(2,),
    ),
    InContextExample(
        target="A fox in a nursery",
        explanation=(
            "A fox is uncommon in indoor scenes. Starting with a dog, then a visually "
            "similar breed (Shiba Inu), provides a natural proxy before introducing "
            "the fox in a childlike setting."
        ),
        prompts=(
            "A dog in a nursery",
            "A Shiba Inu dog in a nursery",
            "A fox in a baby room",
        ),
        switch_steps=(4, 7),
    ),
    InContextExample(
        target="A shoes tree in the meadow",
        explanation=(
            'Treating a "shoes tree" like an "apple tree" allows the model to build '
            "structure and object layout using familiar patterns. Introducing apples "
            "first grounds the scene in a biologically plausible layout before "
            "shifting to the surreal concept of shoes as fruit-like objects."
        ),
        prompts=(
            "tree in the meadow",
            "A tree full of apples, in the meadow",
            "A tree full of shoes in the meadow",
        ),
        switch_steps=(4, 8),
    ),
    InContextExample(
        target="A red sports car parked on a mountain road",
        explanation="This is a realistic and visually coherent scene, so no decomposition is needed.",
        prompts=("A red sports car parked on a mountain road",),
        switch_steps=(),
    ),
)


def render_final_dict(prompts: Sequence[str], switch_steps: Sequence[int]) -> str:
    """Render the reply dictionary: prompts one per line, switch steps inline."""
    prompt_lines = ",\n".join(f"    {json.dumps(p, ensure_ascii=False)}" for p in prompts)
    steps_inline = "[" + ", ".join(str(s) for s in switch_steps) + "]"
    return (
        "{\n"
        f'  "{PROMPTS_KEY}": [\n{prompt_lines}\n  ],\n'
        f'  "{SWITCH_KEY}": {steps_inline}\n'
        "}"
    )


def render_decomposition_reply(explanation: str, prompts: Sequence[str],
                               switch_steps: Sequence[int], *,
                               include_explanation: bool = True) -> str:
    """Render a reply exactly as the output format asks for one."""
    block = render_final_dict(prompts, switch_steps)
    if include_explanation:
        return f"{EXPLANATION_MARKER} {explanation}\n{DICTIONARY_MARKER}\n{block}"
    return f"Final dictionary:\n{block}"


def render_example(example: InContextExample, *, include_explanation: bool = True) -> str:
    reply = render_decomposition_reply(
        example.explanation, example.prompts, example.switch_steps,
        include_explanation=include_explanation,
    )
    return f"Input: {example.target}\n\nOutput:\n{reply}"


def _output_format_section(include_explanation: bool) -> str:
    if include_explanation:
        head = (
            f"{EXPLANATION_MARKER} A short sentence explaining why decomposition is needed.\n\n"
            f"{DICTIONARY_MARKER}\n{_FORMAT_SKELETON}"
        )
    else:
        head = f"Final dictionary:\n{_FORMAT_SKELETON}"
    return f"Output Format:\n\n{head}\n\n{_FORMAT_RULES}"


def build_instruction(mode: "DecomposerMode", max_prompts: int = 3, *,
                      examples: Sequence[InContextExample] | None = None) -> str:
    """Assemble the full system instruction for ``mode`` with prompt cap ``max_prompts``.

    The cap is substituted into the task framing as a word, and any example
    whose prompt count exceeds the cap is dropped so the examples never
    contradict the instruction they illustrate.
    """
    from .core import DecomposerMode

    if mode is DecomposerMode.STATIC:
        raise ValueError("STATIC mode does not use an instruction")
    if max_prompts < 1:
        raise ConfigurationError(f"max_prompts must be >= 1, got {max_prompts}")

    include_explanation = mode is not DecomposerMode.NO_REASONING
    if mode is DecomposerMode.NO_INCONTEXT:
        chosen: list[InContextExample] = []
    else:
        pool = DEFAULT_EXAMPLES if examples is None else tuple(examples)
        chosen = [e for e in pool if len(e.prompts) <= max_prompts]

    sections = [
        "You are an expert assistant in time step dependent prompt conditioning "
        "for diffusion models.",
        (
            f"Your task is to decompose a complex or contextually contradictory prompt "
            f"into up to {_cap_word(max_prompts)} intermediate prompts that align with "
            f"the model's denoising stages - from background layout to object identity "
            f"to fine detail.\nOnly introduce prompt transitions when needed."
        ),
        f"Diffusion Semantics (Low -> High Frequency Progression):\n\n{_STAGE_BANDS}",
        _STABILIZATION_NOTE,
        f"Substitution Strategy:\n\n{_SUBSTITUTION_RULES}",
        _output_format_section(include_explanation),
    ]
    if chosen:
        blocks = "\n\n".join(
            render_example(e, include_explanation=include_explanation) for e in chosen
        )
        sections.append(f"Examples:\n\n{blocks}")
    return "\n\n".join(sections)


def count_examples(instruction: str) -> int:
    """Number of example blocks present in a rendered instruction."""
    return len(re.findall(r"(?m)^Input:", instruction))


def parse_examples_file(text: str) -> list[InContextExample]:
    """Parse concatenated example blocks in the rendered layout."""
    from .parsing import extract_last_mapping

    blocks = re.split(r"(?m)^Input:", text)
    examples: list[InContextExample] = []
    for raw_block in blocks[1:]:
        lines = raw_block.lstrip().splitlines()
        if not lines or not lines[0].strip():
            raise ConfigurationError("example block has an empty Input line")
        target = lines[0].strip()
        body = "\n".join(lines[1:])
        explanation = ""
        marker = re.search(re.escape(EXPLANATION_MARKER), body)
        if marker:
            tail = body[marker.end():]
            stop = tail.find(DICTIONARY_MARKER)
            explanation = (tail[:stop] if stop >= 0 else tail).strip()
        mapping, _ = extract_last_mapping(body)
        if mapping is None:
            raise ConfigurationError(f"example block for {target!r} has no dictionary")
        try:
            prompts = tuple(str(p) for p in mapping[PROMPTS_KEY])
            steps = tuple(int(s) for s in mapping[SWITCH_KEY])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"example block for {target!r} is malformed: {exc}") from exc
        examples.append(InContextExample(target, explanation, prompts, steps))
    if not examples:
        raise ConfigurationError("examples file contains no example blocks")
    return examples


def load_examples_file(path: Path) -> list[InContextExample]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read examples file {path}: {exc}") from exc
    return parse_examples_file(text)
