"""Reply parsing: exact recovery from well-formed replies, tolerance for the
mess real chat models produce, and typed failures for everything else."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stageprompt.decomposer import (
    DEFAULT_EXAMPLES,
    FIXTURE_DECOMPOSITIONS,
    DecomposerMode,
    extract_last_mapping,
    parse_llm_output,
    render_decomposition_reply,
)
from stageprompt.errors import ReplyParseError, ReplySchemaError, ReplyTypeError

ALL_KNOWN = [(r.explanation, r.prompts, r.switch_steps) for r in FIXTURE_DECOMPOSITIONS] + [
    (e.explanation, e.prompts, e.switch_steps) for e in DEFAULT_EXAMPLES
]


@pytest.mark.parametrize("explanation,prompts,steps", ALL_KNOWN)
def test_render_parse_identity(explanation, prompts, steps):
    raw = render_decomposition_reply(explanation, prompts, steps)
    d = parse_llm_output(raw, DecomposerMode.FULL)
    assert d.prompts == tuple(prompts)
    assert d.switch_steps == tuple(steps)
    assert d.explanation == explanation


def test_parse_tolerates_code_fences_and_prose():
    raw = (
        "Sure! Here is the decomposition you asked for.\n\n"
        "a. Explanation: The cat needs a mundane stand-in first.\n"
        "b. Final dictionary:\n"
        "```json\n"
        '{\n  "prompts_list": ["A dog", "A cat"],\n  "switch_prompts_steps": [3]\n}\n'
        "```\n"
        "Let me know if you need anything else!"
    )
    d = parse_llm_output(raw, DecomposerMode.FULL)
    assert d.prompts == ("A dog", "A cat")
    assert d.switch_steps == (3,)
    assert d.explanation == "The cat needs a mundane stand-in first."


def test_parse_tolerates_trailing_commas():
    raw = 'b. Final dictionary:\n{"prompts_list": ["A", "B",], "switch_prompts_steps": [4,],}'
    d = parse_llm_output(raw, DecomposerMode.FULL)
    assert d.prompts == ("A", "B")
    assert d.switch_steps == (4,)


def test_parse_tolerates_single_quotes():
    raw = "b. Final dictionary:\n{'prompts_list': ['A', 'B'], 'switch_prompts_steps': [5]}"
    d = parse_llm_output(raw, DecomposerMode.FULL)
    assert d.prompts == ("A", "B")


def test_last_dictionary_wins():
    raw = (
        'Earlier draft: {"prompts_list": ["X"], "switch_prompts_steps": []}\n'
        'b. Final dictionary:\n{"prompts_list": ["A", "B"], "switch_prompts_steps": [2]}'
    )
    d = parse_llm_output(raw, DecomposerMode.FULL)
    assert d.prompts == ("A", "B")


def test_nested_braces_in_prompt_text():
    payload = {"prompts_list": ["A sign reading {hello}", "B"], "switch_prompts_steps": [2]}
    raw = "b. Final dictionary:\n" + json.dumps(payload)
    d = parse_llm_output(raw, DecomposerMode.FULL)
    assert d.prompts[0] == "A sign reading {hello}"


def test_no_dictionary_reports_offset():
    with pytest.raises(ReplyParseError) as err:
        parse_llm_output("I could not find a decomposition, sorry.", DecomposerMode.FULL)
    assert err.value.offset is not None


def test_missing_keys_are_schema_errors():
    with pytest.raises(ReplySchemaError) as err:
        parse_llm_output('{"prompts_list": ["A"]}', DecomposerMode.FULL)
    assert err.value.key == "switch_prompts_steps"
    with pytest.raises(ReplySchemaError) as err:
        parse_llm_output('{"switch_prompts_steps": []}', DecomposerMode.FULL)
    assert err.value.key == "prompts_list"


def test_type_errors_are_rejected():
    with pytest.raises(ReplyTypeError):
        parse_llm_output('{"prompts_list": ["A", 2], "switch_prompts_steps": [1]}',
                         DecomposerMode.FULL)
    with pytest.raises(ReplyTypeError):
        parse_llm_output('{"prompts_list": ["A", "B"], "switch_prompts_steps": ["3"]}',
                         DecomposerMode.FULL)
    # bool is an int subtype; it is still not a step index
    with pytest.raises(ReplyTypeError):
        parse_llm_output("{'prompts_list': ['A', 'B'], 'switch_prompts_steps': [True]}",
                         DecomposerMode.FULL)


def test_no_reasoning_reply_has_empty_explanation():
    raw = render_decomposition_reply("ignored", ("A", "B"), (3,), include_explanation=False)
    assert "Explanation" not in raw
    d = parse_llm_output(raw, DecomposerMode.NO_REASONING)
    assert d.explanation == ""
    assert d.prompts == ("A", "B")


def test_extract_last_mapping_on_empty_text():
    mapping, offset = extract_last_mapping("")
    assert mapping is None


prompt_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\x00"),
    min_size=1, max_size=40,
).map(lambda s: s.strip() or "x")


@settings(max_examples=200, deadline=None)
@given(
    explanation=prompt_text,
    prompts=st.lists(prompt_text, min_size=1, max_size=4),
    data=st.data(),
)
def test_render_parse_identity_holds_for_arbitrary_text(explanation, prompts, data):
    steps = data.draw(
        st.lists(st.integers(1, 49), min_size=len(prompts) - 1,
                 max_size=len(prompts) - 1, unique=True).map(sorted)
    )
    raw = render_decomposition_reply(explanation, prompts, steps)
    d = parse_llm_output(raw, DecomposerMode.FULL)
    assert list(d.prompts) == prompts
    assert list(d.switch_steps) == steps
