"""Structural validation of parsed decompositions.

A failing report is fed back to the model verbatim on retry, so messages are
written to be actionable instructions rather than internal diagnostics.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass

# Below this similarity ratio, the last prompt is flagged as having likely
# drifted away from the requested target. Advisory only: legitimate
# decompositions sometimes rephrase the target in the final window.
FINAL_PROMPT_SIMILARITY_FLOOR = 0.45


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def describe(self) -> str:
        """One-line-per-problem text suitable as retry feedback."""
        return "\n".join(f"- {v.message}" for v in self.violations)


def final_prompt_similarity(final_prompt: str, target_prompt: str) -> float:
    a = final_prompt.strip().casefold()
    b = target_prompt.strip().casefold()
    return difflib.SequenceMatcher(None, a, b).ratio()


def validate_decomposition(d: "Decomposition", request: "DecompositionRequest") -> ValidationReport:
    """Check ``d`` against the request's cap and sampling window.

    Violations fail the report; the final-prompt similarity check only warns.
    """
    violations: list[Violation] = []
    warnings: list[str] = []
    cap = request.effective_cap()
    total = request.total_steps
    n = len(d.prompts)

    if n == 0:
        violations.append(Violation(
            "empty-prompt-list",
            "prompts_list is empty; it must contain at least the target prompt",
        ))
    if len(d.switch_steps) != max(n - 1, 0) or (n == 0 and d.switch_steps):
        violations.append(Violation(
            "length-mismatch",
            f"switch_prompts_steps has {len(d.switch_steps)} entries but prompts_list "
            f"has {n}; it must have exactly one entry less than prompts_list",
        ))
    if n > cap:
        violations.append(Violation(
            "over-cap",
            f"prompts_list has {n} prompts but at most {cap} are allowed",
        ))
    for i, p in enumerate(d.prompts):
        if not p.strip():
            violations.append(Violation(
                "empty-prompt",
                f"prompt {i + 1} is empty; every prompt must be nonempty text",
            ))
    for i, s in enumerate(d.switch_steps):
        if not 1 <= s <= total - 1:
            violations.append(Violation(
                "step-out-of-range",
                f"switch step {s} is outside the valid range 1..{total - 1}",
            ))
    for prev, cur in zip(d.switch_steps, d.switch_steps[1:]):
        if cur <= prev:
            violations.append(Violation(
                "steps-not-increasing",
                f"switch steps must be strictly increasing, got {prev} then {cur}",
            ))
            break

    if n and not violations:
        similarity = final_prompt_similarity(d.prompts[-1], request.target_prompt)
        if similarity < FINAL_PROMPT_SIMILARITY_FLOOR:
            warnings.append(
                f"final prompt {d.prompts[-1]!r} differs markedly from the target "
                f"{request.target_prompt!r} (similarity {similarity:.2f}); the last "
                f"window may not be denoising toward the requested scene"
            )
    return ValidationReport(tuple(violations), tuple(warnings))
