"""Benchmark harness: datasets, journaled grid runs, summaries."""

from .datasets import (
    CONTRABENCH_ID,
    CONTRABENCH_PROMPTS,
    BenchmarkDataset,
    PromptEntry,
    load_contrabench,
    load_prompt_file,
    save_prompt_file,
)
from .journal import CellRow, RunHeader, RunJournal, RunResult
from .runner import (
    ABLATION_METHODS,
    DEFAULT_SEEDS,
    BackendPool,
    BenchComponents,
    MethodConfig,
    ablation_suite,
    run_benchmark,
)
from .summary import SummaryRow, SummaryTable, render_summary_figure, summarize, write_summary

__all__ = [
    "CONTRABENCH_ID",
    "CONTRABENCH_PROMPTS",
    "BenchmarkDataset",
    "PromptEntry",
    "load_contrabench",
    "load_prompt_file",
    "save_prompt_file",
    "CellRow",
    "RunHeader",
    "RunJournal",
    "RunResult",
    "ABLATION_METHODS",
    "DEFAULT_SEEDS",
    "BackendPool",
    "BenchComponents",
    "MethodConfig",
    "ablation_suite",
    "run_benchmark",
    "SummaryRow",
    "SummaryTable",
    "render_summary_figure",
    "summarize",
    "write_summary",
]
