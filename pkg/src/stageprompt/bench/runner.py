"""The benchmark grid runner: dataset x methods x seeds, journaled and resumable."""

from __future__ import annotations

import logging
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from ..clients import ChatClient, VisionClient
from ..decomposer import (
    DecomposerMode,
    Decomposition,
    DecompositionCache,
    DecompositionRequest,
    InContextExample,
    LlmConfig,
    decompose,
)
from ..engine import (
    DecompositionProvenance,
    DenoisingBackend,
    GenerationConfig,
    generate,
    toy_backend,
    trace_backend,
)
from ..errors import ConfigurationError, StagePromptError
from ..judge import VlmConfig, judge_alignment
from ..schedule import build_schedule
from ..util import sha256_hex, slugify, utc_now_iso
from .datasets import BenchmarkDataset
from .journal import CellRow, RunHeader, RunJournal, RunResult

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class MethodConfig:
    """One benchmarked configuration: a decomposer mode plus generation knobs."""

    name: str
    mode: DecomposerMode
    backend_id: str = "trace"
    max_prompts: int = 3
    generation: Mapping[str, object] = field(default_factory=dict)


# The standard comparison set, coarsest to fullest. Names are row labels in
# summaries and journals.
ABLATION_METHODS: tuple[MethodConfig, ...] = (
    MethodConfig(name="static", mode=DecomposerMode.STATIC),
    MethodConfig(name="w/o in-context", mode=DecomposerMode.NO_INCONTEXT),
    MethodConfig(name="w/o reasoning", mode=DecomposerMode.NO_REASONING),
    MethodConfig(name="2 proxy", mode=DecomposerMode.MAX_TWO, max_prompts=2),
    MethodConfig(name="Full", mode=DecomposerMode.FULL),
)

DEFAULT_SEEDS: tuple[int, ...] = (1, 2, 3)


class BackendPool:
    """Shared backend instances with one lock each: a backend instance runs a
    single generation at a time."""

    def __init__(self) -> None:
        self._entries: dict[str, tuple[DenoisingBackend, threading.Lock]] = {}
        self.register(trace_backend())
        self.register(toy_backend())

    def register(self, backend: DenoisingBackend) -> None:
        self._entries[backend.backend_id] = (backend, threading.Lock())

    def get(self, backend_id: str) -> tuple[DenoisingBackend, threading.Lock]:
        try:
            return self._entries[backend_id]
        except KeyError:
            raise ConfigurationError(
                f"unknown backend {backend_id!r}; registered: {sorted(self._entries)}"
            ) from None


@dataclass
class BenchComponents:
    """Everything a grid run needs besides the grid itself."""

    llm_client: ChatClient
    vlm_client: VisionClient
    out_dir: Path
    llm: LlmConfig = field(default_factory=LlmConfig)
    vlm: VlmConfig = field(default_factory=VlmConfig)
    backends: BackendPool = field(default_factory=BackendPool)
    cache: DecompositionCache | None = None
    total_steps: int = 50
    workers: int = 1
    force_target_final: bool = False
    examples: Sequence[InContextExample] | None = None


def _image_name(dataset_id: str, prompt_id: int, method: str, seed: int) -> str:
    return f"{slugify(dataset_id)}_{prompt_id:03d}_{slugify(method)}_{seed}.png"


def _run_cell(dataset: BenchmarkDataset, prompt_id: int, method: MethodConfig,
              seed: int, components: BenchComponents) -> CellRow:
    """Resolve one grid cell end to end.

    Any StagePromptError (and any unexpected Exception) is recorded on the row
    instead of propagating: a bad cell must not take the grid down with it.
    """
    started = utc_now_iso()
    prompt = dataset.text_of(prompt_id)
    schedule_triples: tuple[tuple[str, int, int], ...] = ()
    score = None
    error = None
    image_ref = None
    image_digest = None
    decomposition_raw_digest = None
    judge_raw_digest = None
    fallback = False

    try:
        request = DecompositionRequest(
            target_prompt=prompt,
            mode=method.mode,
            max_prompts=method.max_prompts,
            total_steps=components.total_steps,
            llm=components.llm,
            force_target_final=components.force_target_final,
        )
        decomposition: Decomposition = decompose(
            request, components.llm_client,
            cache=components.cache, examples=components.examples,
        )
        fallback = decomposition.is_fallback
        decomposition_raw_digest = sha256_hex(decomposition.raw_response)
        schedule = build_schedule(decomposition, components.total_steps)
        schedule_triples = tuple((e.prompt, e.start, e.end) for e in schedule.entries)

        gen_config = GenerationConfig(
            total_steps=components.total_steps,
            seed=seed,
            backend_id=method.backend_id,
            **dict(method.generation),
        )
        backend, lock = components.backends.get(method.backend_id)
        image_path = components.out_dir / "images" / _image_name(
            dataset.dataset_id, prompt_id, method.name, seed
        )
        with lock:
            record = generate(
                schedule, gen_config, backend,
                image_path=image_path,
                target_prompt=prompt,
                provenance=DecompositionProvenance(
                    mode=method.mode.value,
                    raw_digest=decomposition_raw_digest,
                    fallback=fallback,
                ),
            )
        image_ref = str(record.image_ref)
        image_digest = record.image_digest

        judgement = judge_alignment(record.image_ref, prompt, components.vlm, components.vlm_client)
        score = judgement.score
        judge_raw_digest = sha256_hex(judgement.raw_response)
    except StagePromptError as exc:
        error = f"{type(exc).__name__}: {exc}"
        LOGGER.warning("cell (%s, %d, %s, %d) failed: %s",
                       dataset.dataset_id, prompt_id, method.name, seed, error)
    except Exception as exc:  # unexpected, still must not abort the grid
        error = f"{type(exc).__name__}: {exc}"
        LOGGER.exception("cell (%s, %d, %s, %d) raised unexpectedly",
                         dataset.dataset_id, prompt_id, method.name, seed)

    return CellRow(
        dataset_id=dataset.dataset_id,
        prompt_id=prompt_id,
        method=method.name,
        seed=seed,
        schedule=schedule_triples,
        score=score,
        error=error,
        image_ref=image_ref,
        image_digest=image_digest,
        decomposition_mode=method.mode.value,
        decomposition_raw_digest=decomposition_raw_digest,
        judge_raw_digest=judge_raw_digest,
        fallback=fallback,
        started_at=started,
        finished_at=utc_now_iso(),
    )


def run_benchmark(dataset: BenchmarkDataset, methods: Sequence[MethodConfig],
                  seeds: Sequence[int], components: BenchComponents, *,
                  journal_path: Path | None = None) -> RunResult:
    """Run the full grid, journaling each cell as it completes.

    The same seed list applies to every method, so per-seed comparisons are
    like for like. If the journal already holds rows (a prior run was killed),
    those cells are skipped and the run picks up where it left off; replaying
    the finished journal is the returned result.
    """
    if not seeds:
        raise ConfigurationError("seeds must be nonempty")
    if len(set(seeds)) != len(seeds):
        raise ConfigurationError(f"seeds contain duplicates: {list(seeds)}")
    if not methods:
        raise ConfigurationError("methods must be nonempty")
    names = [m.name for m in methods]
    if len(set(names)) != len(names):
        raise ConfigurationError(f"method names contain duplicates: {names}")
    for method in methods:
        components.backends.get(method.backend_id)  # unknown backend fails the grid up front

    journal_path = Path(journal_path) if journal_path else Path(components.out_dir) / "journal.jsonl"
    journal = RunJournal(journal_path)

    done: set[tuple[str, int, str, int]] = set()
    if journal_path.is_file() and journal_path.stat().st_size > 0:
        existing = RunJournal.load(journal_path)
        expected = (dataset.dataset_id, tuple(names), tuple(int(s) for s in seeds))
        actual = (existing.header.dataset_id, existing.header.methods, existing.header.seeds)
        if expected != actual:
            raise ConfigurationError(
                f"journal {journal_path} was written for grid {actual}, not {expected}"
            )
        done = {row.key for row in existing.rows}
        LOGGER.info("resuming: %d of %d cells already journaled",
                    len(done), len(dataset) * len(names) * len(seeds))
    else:
        journal.write_header(RunHeader(
            run_id=uuid.uuid4().hex[:12],
            dataset_id=dataset.dataset_id,
            methods=tuple(names),
            seeds=tuple(int(s) for s in seeds),
            total_steps=components.total_steps,
            created_at=utc_now_iso(),
        ))

    pending = [
        (entry.prompt_id, method, seed)
        for entry in dataset.prompts
        for method in methods
        for seed in seeds
        if (dataset.dataset_id, entry.prompt_id, method.name, seed) not in done
    ]

    if components.workers <= 1:
        for prompt_id, method, seed in pending:
            journal.append(_run_cell(dataset, prompt_id, method, seed, components))
    else:
        with ThreadPoolExecutor(max_workers=components.workers) as pool:
            futures = [
                pool.submit(_run_cell, dataset, prompt_id, method, seed, components)
                for prompt_id, method, seed in pending
            ]
            for future in futures:
                journal.append(future.result())

    return RunJournal.load(journal_path)


def ablation_suite(dataset: BenchmarkDataset, seeds: Sequence[int],
                   components: BenchComponents, *, backend_id: str = "trace",
                   journal_path: Path | None = None) -> RunResult:
    """Run the standard five-method comparison on one backend."""
    methods = tuple(
        MethodConfig(
            name=m.name, mode=m.mode, backend_id=backend_id,
            max_prompts=m.max_prompts, generation=m.generation,
        )
        for m in ABLATION_METHODS
    )
    return run_benchmark(dataset, methods, seeds, components, journal_path=journal_path)
