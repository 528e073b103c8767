"""Stage-aware prompt scheduling for text-to-image diffusion.

Contradictory prompts ("a fox with a duck beak") tend to collapse to the
dominant concept when fed to a diffusion model directly. This package splits
such a prompt into a short sequence of proxy prompts and switches between
them at chosen denoising steps, so early steps settle layout under a prompt
the model handles well and later steps restore the intent of the original.

The pieces, roughly in pipeline order:

- :mod:`stageprompt.decomposer` asks a language model for the proxy prompts
  and switch steps, parses and validates the reply, and caches results.
- :mod:`stageprompt.schedule` turns a decomposition into step windows.
- :mod:`stageprompt.engine` drives a denoising backend over a schedule and
  records exactly which conditioning was applied at every step.
- :mod:`stageprompt.judge` scores a rendered image against the original
  prompt with a vision model and a fixed rubric.
- :mod:`stageprompt.bench` runs method x prompt x seed grids with a
  resumable journal, and summarizes them.
- :mod:`stageprompt.cli` exposes all of the above as the ``stageprompt``
  command.
"""

from .bench import (
    ABLATION_METHODS,
    BenchComponents,
    BenchmarkDataset,
    MethodConfig,
    RunJournal,
    RunResult,
    ablation_suite,
    load_contrabench,
    load_prompt_file,
    run_benchmark,
    summarize,
    write_summary,
)
from .clients import (
    HttpChatClient,
    HttpVisionClient,
    ScriptedChatClient,
    ScriptedVisionClient,
)
from .config import AppConfig, load_app_config
from .decomposer import (
    Decomposition,
    DecomposerMode,
    DecompositionCache,
    DecompositionRequest,
    LlmConfig,
    build_instruction,
    decompose,
    parse_llm_output,
    validate_decomposition,
)
from .engine import (
    DenoisingBackend,
    GenerationConfig,
    GenerationRecord,
    export_x0_trajectory,
    generate,
    toy_backend,
    trace_backend,
)
from .errors import StagePromptError
from .judge import AlignmentJudgement, VlmConfig, aggregate_seed_scores, judge_alignment
from .schedule import PromptSchedule, build_schedule

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ABLATION_METHODS",
    "AlignmentJudgement",
    "AppConfig",
    "BenchComponents",
    "BenchmarkDataset",
    "Decomposition",
    "DecomposerMode",
    "DecompositionCache",
    "DecompositionRequest",
    "DenoisingBackend",
    "GenerationConfig",
    "GenerationRecord",
    "HttpChatClient",
    "HttpVisionClient",
    "LlmConfig",
    "MethodConfig",
    "PromptSchedule",
    "RunJournal",
    "RunResult",
    "ScriptedChatClient",
    "ScriptedVisionClient",
    "StagePromptError",
    "VlmConfig",
    "ablation_suite",
    "aggregate_seed_scores",
    "build_instruction",
    "build_schedule",
    "decompose",
    "export_x0_trajectory",
    "generate",
    "judge_alignment",
    "load_app_config",
    "load_contrabench",
    "load_prompt_file",
    "parse_llm_output",
    "run_benchmark",
    "summarize",
    "toy_backend",
    "trace_backend",
    "validate_decomposition",
    "write_summary",
]
