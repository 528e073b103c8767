"""decompose() orchestration: scripted replies, retries with feedback,
fallback to the target prompt, and the on-disk cache."""

import json
from dataclasses import dataclass, field

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stageprompt.clients import ScriptedChatClient, default_scripted_chat_client
from stageprompt.decomposer import (
    Decomposition,
    DecomposerMode,
    DecompositionCache,
    DecompositionRequest,
    LlmConfig,
    decompose,
    make_cache_key,
    render_decomposition_reply,
)


def _request(**kw):
    defaults = dict(
        target_prompt="A dragon is blowing water",
        mode=DecomposerMode.FULL,
        max_prompts=3,
        total_steps=50,
        llm=LlmConfig(max_retries=2),
    )
    defaults.update(kw)
    return DecompositionRequest(**defaults)


@dataclass
class ReplaySequence:
    """Chat client that plays back a fixed list of replies and records calls."""

    replies: list[str]
    seen: list[list[dict]] = field(default_factory=list)

    def complete(self, messages, *, model_id, temperature, timeout):
        self.seen.append([dict(m) for m in messages])
        return self.replies[min(len(self.seen) - 1, len(self.replies) - 1)]


def test_static_mode_never_calls_the_model():
    client = ReplaySequence(replies=["should never be requested"])
    d = decompose(_request(mode=DecomposerMode.STATIC), client)
    assert d.is_identity and not d.is_fallback
    assert d.prompts == ("A dragon is blowing water",)
    assert client.seen == []


def test_fixture_decomposition_roundtrip(scripted_llm):
    d = decompose(_request(), scripted_llm)
    assert d.prompts == ("A dragon blowing white smoke", "A dragon blowing water")
    assert d.switch_steps == (3,)
    assert not d.is_fallback


def test_retry_carries_validator_feedback():
    bad = render_decomposition_reply("why", ("A", "B"), (99,))  # out of range for T=50
    good = render_decomposition_reply("why", ("A", "B"), (3,))
    client = ReplaySequence(replies=[bad, good])
    d = decompose(_request(), client)
    assert d.switch_steps == (3,)
    assert len(client.seen) == 2
    retry_messages = client.seen[1]
    # the rejected reply and the complaint both travel with the retry
    assert retry_messages[-2]["role"] == "assistant"
    assert retry_messages[-2]["content"] == bad
    assert retry_messages[-1]["role"] == "user"
    assert "99" in retry_messages[-1]["content"]


def test_unparseable_reply_retries_then_falls_back():
    client = ReplaySequence(replies=["no dictionary here at all"])
    d = decompose(_request(), client)
    assert len(client.seen) == 3  # max_retries=2 means three attempts
    assert d.is_fallback and d.is_identity
    assert d.prompts == ("A dragon is blowing water",)
    assert d.fallback_reason and "3 attempts" in d.fallback_reason


def test_force_target_final_rewrites_last_prompt():
    reply = render_decomposition_reply("why", ("A proxy", "A paraphrased target"), (3,))
    d = decompose(_request(force_target_final=True), ReplaySequence(replies=[reply]))
    assert d.prompts == ("A proxy", "A dragon is blowing water")


def test_unknown_prompt_policies():
    proxy = decompose(_request(target_prompt="A quite unheard-of scene"),
                      default_scripted_chat_client("proxy"))
    assert len(proxy.prompts) == 2 and proxy.prompts[-1] == "A quite unheard-of scene"
    identity = decompose(_request(target_prompt="A quite unheard-of scene"),
                         default_scripted_chat_client("identity"))
    assert identity.is_identity and not identity.is_fallback


class TestCache:
    def test_second_call_hits_cache(self, tmp_path, scripted_llm):
        cache = DecompositionCache(tmp_path)
        first = decompose(_request(), scripted_llm, cache=cache)
        calls = scripted_llm.calls
        second = decompose(_request(), scripted_llm, cache=cache)
        assert scripted_llm.calls == calls  # no new model call
        assert second == first

    def test_key_distinguishes_mode_and_cap(self):
        base = make_cache_key("A dragon", DecomposerMode.FULL, "gpt-4o", 3)
        assert make_cache_key("A dragon", DecomposerMode.NO_REASONING, "gpt-4o", 3) != base
        assert make_cache_key("A dragon", DecomposerMode.FULL, "gpt-4o", 2) != base
        assert make_cache_key("other", DecomposerMode.FULL, "gpt-4o", 3) != base
        assert make_cache_key("A dragon", DecomposerMode.FULL, "other-model", 3) != base

    def test_corrupt_entry_is_evicted_and_recomputed(self, tmp_path, scripted_llm):
        cache = DecompositionCache(tmp_path)
        decompose(_request(), scripted_llm, cache=cache)
        entry = next(tmp_path.glob("*.json"))
        entry.write_text("{ torn", encoding="utf-8")
        d = decompose(_request(), scripted_llm, cache=cache)
        assert not d.is_fallback
        assert json.loads(entry.read_text(encoding="utf-8"))  # rewritten cleanly

    def test_fallbacks_are_not_cached(self, tmp_path):
        cache = DecompositionCache(tmp_path)
        client = ReplaySequence(replies=["nonsense"])
        d = decompose(_request(), client, cache=cache)
        assert d.is_fallback
        assert list(tmp_path.glob("*.json")) == []

    def test_stale_entry_is_revalidated_against_request(self, tmp_path):
        # a cache hit that no longer satisfies the request must not be served
        cache = DecompositionCache(tmp_path)
        request = _request(total_steps=50)
        reply = render_decomposition_reply("why", ("A", "B"), (30,))
        decompose(request, ReplaySequence(replies=[reply]), cache=cache)

        tighter = _request(total_steps=20)  # same cache key fields except steps
        key = lambda r: make_cache_key(r.target_prompt, r.mode, r.llm.model_id, r.effective_cap())
        assert key(tighter) == key(request)
        fresh = render_decomposition_reply("why", ("A", "B"), (5,))
        d = decompose(tighter, ReplaySequence(replies=[fresh]), cache=cache)
        assert d.switch_steps == (5,)


def test_decomposition_json_roundtrip(scripted_llm):
    d = decompose(_request(), scripted_llm)
    assert Decomposition.from_json_dict(d.to_json_dict()) == d


@settings(max_examples=50, deadline=None)
@given(
    prompts=st.lists(st.text(min_size=1, max_size=20).map(lambda s: s.strip() or "p"),
                     min_size=1, max_size=3),
    data=st.data(),
)
def test_any_valid_reply_is_accepted_verbatim(prompts, data):
    steps = data.draw(
        st.lists(st.integers(1, 49), min_size=len(prompts) - 1,
                 max_size=len(prompts) - 1, unique=True).map(sorted)
    )
    reply = render_decomposition_reply("reason", prompts, steps)
    d = decompose(_request(), ReplaySequence(replies=[reply]))
    assert list(d.prompts) == prompts
    assert list(d.switch_steps) == steps
    assert not d.is_fallback
