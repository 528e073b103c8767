"""Acceptance gate.

One test per criterion; each prints a single PASS/FAIL line on the real
stdout so the verdicts survive pytest's capture regardless of flags.
Criteria with stated runtime budgets enforce them with perf_counter.
"""

import contextlib
import os
import random
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from stageprompt.bench import (
    BenchComponents,
    ablation_suite,
    load_contrabench,
    summarize,
)
from stageprompt.bench.journal import CellRow, RunHeader, RunJournal
from stageprompt.clients import default_scripted_chat_client
from stageprompt.decomposer import (
    DEFAULT_EXAMPLES,
    FIXTURE_DECOMPOSITIONS,
    Decomposition,
    DecomposerMode,
    LlmConfig,
    parse_llm_output,
    render_decomposition_reply,
)
from stageprompt.engine import (
    GenerationConfig,
    ToyBackend,
    generate,
    toy_backend,
    trace_backend,
)
from stageprompt.errors import JudgementParseError
from stageprompt.judge import (
    EXPLANATION_MARKER,
    SCORE_MARKER,
    VlmConfig,
    aggregate_seed_scores,
    parse_judgement,
)
from stageprompt.schedule import build_schedule
from stageprompt.util import utc_now_iso


# One verdict string per executed criterion; the conftest terminal-summary
# hook prints these after the run, outside pytest's output capture.
VERDICTS: list[str] = []


def _verdict(line):
    VERDICTS.append(line)
    print(line, flush=True)


@contextlib.contextmanager
def criterion(number, label):
    try:
        yield
    except BaseException as exc:
        if isinstance(exc, pytest.skip.Exception):
            _verdict(f"ACCEPTANCE {number} {label}: SKIP ({exc})")
        else:
            _verdict(f"ACCEPTANCE {number} {label}: FAIL ({type(exc).__name__}: {exc})")
        raise
    _verdict(f"ACCEPTANCE {number} {label}: PASS")


def _schedule(prompts, steps, total=50):
    d = Decomposition(prompts=tuple(prompts), switch_steps=tuple(steps),
                      explanation="", raw_response="")
    return build_schedule(d, total)


def test_criterion_1_fixture_parse_exactness():
    with criterion(1, "fixture parse exactness"):
        start = time.perf_counter()
        assert len(FIXTURE_DECOMPOSITIONS) == 7
        for row in FIXTURE_DECOMPOSITIONS:
            raw = render_decomposition_reply(row.explanation, row.prompts, row.switch_steps)
            parsed = parse_llm_output(raw, DecomposerMode.FULL)
            assert parsed.prompts == row.prompts, row.target
            assert parsed.switch_steps == row.switch_steps, row.target
        by_target = {r.target: r for r in FIXTURE_DECOMPOSITIONS}
        assert by_target["A dragon is blowing water."].prompts[0] == "A dragon blowing white smoke"
        assert by_target["A cockatoo parrot swimming in the ocean."].switch_steps == (3, 6)
        assert by_target["A grown man has a baby's pacifier in his mouth."].switch_steps == (4,)
        assert by_target["A pizza with grape toppings."].switch_steps == (3,)
        assert by_target["A coin floats on the surface of the water."].switch_steps == (4,)
        assert by_target["A woman writing with a dart."].switch_steps == (3,)
        assert by_target["Shrek is blue."].switch_steps == (3,)
        elapsed = time.perf_counter() - start
        assert elapsed < 1.0, f"took {elapsed:.2f}s"


def test_criterion_2_schedule_totality():
    with criterion(2, "schedule totality"):
        start = time.perf_counter()
        rng = random.Random(20250817)
        for _ in range(1000):
            n = rng.randint(1, 3)
            steps = sorted(rng.sample(range(1, 50), n - 1))
            sched = _schedule([f"p{i}" for i in range(n)], steps)
            for t in range(50):
                owners = [i for i, e in enumerate(sched.entries) if e.start <= t < e.end]
                assert len(owners) == 1, (steps, t, owners)
                assert sched.prompt_index_at(t) == owners[0]
            for i, s in enumerate(steps):
                # boundary law: the switch step is the first step of the
                # incoming prompt, never the last of the outgoing one
                assert sched.prompt_index_at(s) == i + 1
                assert sched.prompt_index_at(s - 1) == i
        elapsed = time.perf_counter() - start
        assert elapsed < 5.0, f"took {elapsed:.2f}s"


def test_criterion_3_injection_correctness():
    with criterion(3, "injection correctness"):
        fox = next(e for e in DEFAULT_EXAMPLES if "fox" in e.target)
        assert fox.switch_steps == (4, 7)
        rng = random.Random(99)
        cases = [(fox.prompts, fox.switch_steps)]
        for _ in range(100):
            n = rng.randint(1, 3)
            steps = tuple(sorted(rng.sample(range(1, 50), n - 1)))
            cases.append((tuple(f"prompt {i} of {n}" for i in range(n)), steps))
        backend = trace_backend()
        for prompts, steps in cases:
            sched = _schedule(prompts, steps)
            record = generate(sched, GenerationConfig(total_steps=50, seed=1,
                                                      backend_id="trace"), backend)
            for entry in record.step_trace:
                assert entry.prompt_index == sched.prompt_index_at(entry.t)
            changes = [b.t for a, b in zip(record.step_trace, record.step_trace[1:])
                       if a.conditioning_fingerprint != b.conditioning_fingerprint]
            assert changes == list(steps)
            assert len(changes) == len(prompts) - 1


def test_criterion_4_static_equivalence():
    with criterion(4, "static equivalence"):
        prompt = "A red sports car parked on a mountain road"
        single = _schedule([prompt], [])
        windowed = _schedule([prompt, prompt, prompt], [10, 30])
        for backend in (trace_backend(), toy_backend()):
            for seed in range(10):
                cfg = GenerationConfig(total_steps=50, seed=seed,
                                       backend_id=backend.backend_id)
                a = generate(single, cfg, backend)
                b = generate(windowed, cfg, backend)
                assert a.image_digest == b.image_digest, (backend.backend_id, seed)
                assert np.array_equal(a.artifact.pixels, b.artifact.pixels)


def test_criterion_5_coarse_to_fine_analogue():
    with criterion(5, "coarse-to-fine analogue"):
        backend = toy_backend()
        cfg = GenerationConfig(total_steps=50, seed=13, backend_id="toy")

        def run(sched):
            state = backend.init_state(13, cfg)
            for t in range(50):
                state = backend.step(state, t, backend.encode_prompt(sched.prompt_at(t)))
            return ToyBackend.band_coefficients(state)

        # divergence confined to [45, 50): every coarse band bit-equal
        late_a = run(_schedule(["A cat", "A dog"], [45]))
        late_b = run(_schedule(["A cat", "A spaceship"], [45]))
        for band in (0, 1, 2):
            assert np.array_equal(late_a[band], late_b[band]), band
        assert not np.array_equal(late_a[3], late_b[3])

        # divergence on [0, 3): the coarsest band moves
        early_a = run(_schedule(["A cat", "A dog"], [3]))
        early_b = run(_schedule(["A boat", "A dog"], [3]))
        assert not np.array_equal(early_a[0], early_b[0])
        for band in (1, 2, 3):
            assert np.array_equal(early_a[band], early_b[band]), band


def test_criterion_6_judge_protocol():
    with criterion(6, "judge protocol"):
        for score in (1, 2, 3, 4, 5):
            raw = f"{SCORE_MARKER} {score}\n{EXPLANATION_MARKER} rendered reply"
            parsed, explanation = parse_judgement(raw)
            assert parsed == score and explanation == "rendered reply"
        for bad in ("0", "6", "4.5", "four"):
            with pytest.raises(JudgementParseError):
                parse_judgement(f"{SCORE_MARKER} {bad}\n{EXPLANATION_MARKER} x")
        assert aggregate_seed_scores([1, 1, 1]) == 20.0
        assert aggregate_seed_scores([5, 5, 5]) == 100.0
        assert aggregate_seed_scores([3, 4, 5]) == 80.0


def test_criterion_7_dataset_integrity():
    with criterion(7, "dataset integrity"):
        ds = load_contrabench()
        assert len(ds) == 40
        by_id = {p.prompt_id: p.text for p in ds.prompts}
        assert by_id[1] == "A professional boxer does a split"
        assert by_id[12] == "A monkey juggles tiny elephants"
        assert by_id[28] == "A chicken is smiling"
        assert by_id[40] == "A bodybuilder balancing on pointe shoes"


class _HealthyJudge:
    calls = 0

    def complete(self, messages, image_path, *, model_id, temperature, timeout):
        type(self).calls += 1
        score = (sum(Path(image_path).stem.encode()) % 5) + 1
        return f"{SCORE_MARKER} {score}\n{EXPLANATION_MARKER} offline verdict"


class _KilledJudge(_HealthyJudge):
    """Healthy for the first 120 calls, then the operator hits Ctrl-C."""

    budget = 120

    def complete(self, messages, image_path, *, model_id, temperature, timeout):
        if self.budget <= 0:
            raise KeyboardInterrupt
        type(self).budget -= 1
        return super().complete(messages, image_path, model_id=model_id,
                                temperature=temperature, timeout=timeout)


def _components(tmp_path, judge):
    return BenchComponents(
        llm_client=default_scripted_chat_client(),
        vlm_client=judge,
        out_dir=tmp_path / "out",
        llm=LlmConfig(max_retries=1),
        vlm=VlmConfig(max_retries=0),
    )


def _replay_rows(method, cell_scores):
    rows = []
    for (prompt_id, seed), score in cell_scores.items():
        now = utc_now_iso()
        rows.append(CellRow(
            dataset_id="replay100", prompt_id=prompt_id, method=method, seed=seed,
            schedule=(("p", 0, 50),), score=score,
            error=None if score is not None else "replayed null",
            image_ref=None, image_digest=None, decomposition_mode="full",
            decomposition_raw_digest=None, judge_raw_digest=None, fallback=False,
            started_at=now, finished_at=now,
        ))
    return rows


def _distribute(total, cells, low, high):
    """Integer scores over ``cells`` cells summing to ``total``; the published
    means are linear in the total, so any split with the right sum works."""
    base = [low] * cells
    remaining = total - low * cells
    bump = high - low
    i = 0
    while remaining > 0:
        take = min(bump, remaining)
        base[i] += take
        remaining -= take
        i += 1
    assert sum(base) == total and all(low <= s <= high for s in base)
    return base


def test_criterion_8_offline_end_to_end_grid(tmp_path):
    with criterion(8, "offline end-to-end grid"):
        start = time.perf_counter()
        dataset = load_contrabench()
        seeds = (1, 2, 3)

        # phase 1: a kill partway through the grid
        _KilledJudge.budget = 120
        _KilledJudge.calls = 0
        with pytest.raises(KeyboardInterrupt):
            ablation_suite(dataset, seeds, _components(tmp_path, _KilledJudge()))
        journal_path = tmp_path / "out" / "journal.jsonl"
        partial = RunJournal.load(journal_path)
        assert 0 < len(partial.rows) < 600

        # phase 2: rerun resumes, completes exactly the grid
        _HealthyJudge.calls = 0
        result = ablation_suite(dataset, seeds, _components(tmp_path, _HealthyJudge()))
        assert len(result.rows) == 600
        assert len({row.key for row in result.rows}) == 600
        assert _HealthyJudge.calls == 600 - len(partial.rows)

        # phase 3: a third run is a no-op replay of the same 600 rows
        _HealthyJudge.calls = 0
        again = ablation_suite(dataset, seeds, _components(tmp_path, _HealthyJudge()))
        assert _HealthyJudge.calls == 0
        assert again.rows == result.rows
        summarize(result)  # the real grid must summarize cleanly

        # replay of the published five-method ablation means, on the
        # 100-prompt x 3-seed grid those means were measured on
        targets = {
            "static": 44.3,
            "w/o in-context": 48.0,
            "w/o reasoning": 46.46,
            "2 proxy": 50.73,
            "Full": 62.13,
        }
        prompts = range(1, 101)
        full_grid = [(p, s) for p in prompts for s in seeds]
        rows = []

        # static: 99 fully-scored prompts summing 660, plus one prompt
        # scored (1, 2, null) -> mean over prompts 2.215 -> 44.30 exactly
        static_scores = _distribute(660, 297, 2, 3)
        cells = {}
        for i, (p, s) in enumerate((p, s) for p in range(1, 100) for s in seeds):
            cells[(p, s)] = static_scores[i]
        cells[(100, 1)], cells[(100, 2)], cells[(100, 3)] = 1, 2, None
        rows += _replay_rows("static", cells)

        for method, total, low, high in (
            ("w/o in-context", 720, 2, 3),
            ("w/o reasoning", 697, 2, 3),
            ("2 proxy", 761, 2, 3),
            ("Full", 932, 3, 4),
        ):
            scores = _distribute(total, 300, low, high)
            rows += _replay_rows(method, dict(zip(full_grid, scores)))

        header = RunHeader(run_id="replay", dataset_id="replay100",
                           methods=tuple(targets), seeds=seeds, total_steps=50,
                           created_at=utc_now_iso())
        replay_journal = RunJournal(tmp_path / "replay.jsonl")
        replay_journal.write_header(header)
        for row in rows:
            replay_journal.append(row)
        table = summarize(RunJournal.load(tmp_path / "replay.jsonl"))
        for method, target in targets.items():
            got = table.value("replay100", method)
            assert abs(got - target) <= 0.01, (method, got, target)

        elapsed = time.perf_counter() - start
        assert elapsed < 120.0, f"took {elapsed:.1f}s"


_SMOKE_VARS = ("STAGEPROMPT_SMOKE", "LLM_API_KEY", "VLM_API_KEY")


def test_criterion_9_online_smoke(tmp_path):
    with criterion(9, "online smoke"):
        if not all(os.environ.get(v) for v in _SMOKE_VARS):
            pytest.skip("online smoke needs STAGEPROMPT_SMOKE=1 plus LLM/VLM API keys")
        from stageprompt.clients import HttpChatClient, HttpVisionClient
        from stageprompt.decomposer import DecompositionRequest, decompose
        from stageprompt.engine import BackendSpec, real_backend_adapter
        from stageprompt.judge import judge_alignment

        spec = BackendSpec(
            backend_id="real",
            model=os.environ.get("STAGEPROMPT_SMOKE_MODEL", "black-forest-labs/FLUX.1-dev"),
            device=os.environ.get("STAGEPROMPT_SMOKE_DEVICE", "cuda"),
            dtype=os.environ.get("STAGEPROMPT_SMOKE_DTYPE", "bfloat16"),
        )
        backend = real_backend_adapter(spec)
        llm = LlmConfig(api_key_env="LLM_API_KEY")
        request = DecompositionRequest(
            target_prompt="A rooster in a nest", mode=DecomposerMode.FULL,
            max_prompts=3, total_steps=backend.num_steps_default, llm=llm,
        )
        chat = HttpChatClient(endpoint=llm.endpoint,
                              api_key=os.environ["LLM_API_KEY"])
        d = decompose(request, chat)
        sched = build_schedule(d, backend.num_steps_default)
        assert len(sched.entries) >= 2, "expected a non-static schedule"
        image_path = tmp_path / "rooster.png"
        generate(sched, GenerationConfig(total_steps=backend.num_steps_default,
                                         seed=1, backend_id="real"),
                 backend, image_path=image_path, target_prompt=request.target_prompt)
        assert image_path.is_file() and image_path.stat().st_size > 0
        vlm = VlmConfig(api_key_env="VLM_API_KEY")
        vision = HttpVisionClient(endpoint=vlm.endpoint, api_key=os.environ["VLM_API_KEY"])
        judgement = judge_alignment(image_path, request.target_prompt, vlm, vision)
        assert 1 <= judgement.score <= 5
