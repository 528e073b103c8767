"""Decomposition validation rules and the cap arithmetic behind them."""

import pytest

from stageprompt.decomposer import (
    FINAL_PROMPT_SIMILARITY_FLOOR,
    Decomposition,
    DecomposerMode,
    DecompositionRequest,
    LlmConfig,
    final_prompt_similarity,
    validate_decomposition,
)


def _request(**kw):
    defaults = dict(
        target_prompt="A dragon is blowing water",
        mode=DecomposerMode.FULL,
        max_prompts=3,
        total_steps=50,
        llm=LlmConfig(),
    )
    defaults.update(kw)
    return DecompositionRequest(**defaults)


def _decomp(prompts, steps, explanation="because"):
    return Decomposition(prompts=tuple(prompts), switch_steps=tuple(steps),
                         explanation=explanation, raw_response="")


def codes(report):
    return [v.code for v in report.violations]


def test_valid_decomposition_passes():
    report = validate_decomposition(
        _decomp(["A dragon blowing white smoke", "A dragon blowing water"], [3]), _request()
    )
    assert report.ok
    assert report.violations == ()


def test_empty_prompt_list():
    report = validate_decomposition(_decomp([], []), _request())
    assert "empty-prompt-list" in codes(report)


def test_length_mismatch():
    report = validate_decomposition(_decomp(["A", "B"], []), _request())
    assert "length-mismatch" in codes(report)
    report = validate_decomposition(_decomp(["A"], [3]), _request())
    assert "length-mismatch" in codes(report)


def test_over_cap():
    report = validate_decomposition(_decomp(["A", "B", "C", "D"], [2, 4, 6]), _request())
    assert "over-cap" in codes(report)


def test_max_two_mode_tightens_cap():
    request = _request(mode=DecomposerMode.MAX_TWO)
    assert request.effective_cap() == 2
    report = validate_decomposition(_decomp(["A", "B", "C"], [3, 6]), request)
    assert "over-cap" in codes(report)
    # the same three prompts are fine under FULL with cap 3
    assert validate_decomposition(_decomp(["A", "B", "C"], [3, 6]), _request()).ok


def test_blank_prompt_rejected():
    report = validate_decomposition(_decomp(["A", "   "], [3]), _request())
    assert "empty-prompt" in codes(report)


def test_switch_step_range():
    # 0 would replace the first prompt before it ever conditions a step
    report = validate_decomposition(_decomp(["A", "B"], [0]), _request())
    assert "step-out-of-range" in codes(report)
    report = validate_decomposition(_decomp(["A", "B"], [50]), _request())
    assert "step-out-of-range" in codes(report)
    assert validate_decomposition(_decomp(["A", "B"], [49]), _request()).ok
    assert validate_decomposition(_decomp(["A", "B"], [1]), _request()).ok


def test_steps_must_strictly_increase():
    report = validate_decomposition(_decomp(["A", "B", "C"], [7, 4]), _request())
    assert "steps-not-increasing" in codes(report)
    report = validate_decomposition(_decomp(["A", "B", "C"], [4, 4]), _request())
    assert "steps-not-increasing" in codes(report)


def test_final_prompt_similarity_is_advisory_only():
    # a final prompt unrelated to the target is suspicious but not fatal
    report = validate_decomposition(
        _decomp(["A meadow", "A completely unrelated spaceship"], [3]),
        _request(target_prompt="A shoes tree in the meadow"),
    )
    assert report.ok
    assert report.warnings


def test_similarity_metric_sanity():
    assert final_prompt_similarity("A dragon", "A dragon") == 1.0
    assert final_prompt_similarity("A DRAGON", "a dragon") == 1.0
    close = final_prompt_similarity("A dragon blowing water", "A dragon is blowing water.")
    assert close > FINAL_PROMPT_SIMILARITY_FLOOR


def test_describe_mentions_every_violation():
    report = validate_decomposition(_decomp(["A", ""], [0]), _request())
    text = report.describe()
    assert len(report.violations) == 2
    for violation in report.violations:
        assert violation.message in text
