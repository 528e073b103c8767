"""Prompt decomposition: instruction assembly, reply parsing, validation, cache."""

from .cache import CacheKey, DecompositionCache, make_cache_key
from .core import (
    Decomposition,
    DecomposerMode,
    DecompositionRequest,
    LlmConfig,
    decompose,
)
from .fixtures import FIXTURE_DECOMPOSITIONS, FixtureDecomposition
from .instruction import (
    DEFAULT_EXAMPLES,
    DICTIONARY_MARKER,
    EXPLANATION_MARKER,
    InContextExample,
    build_instruction,
    count_examples,
    load_examples_file,
    parse_examples_file,
    render_decomposition_reply,
    render_example,
    render_final_dict,
)
from .parsing import extract_last_mapping, parse_llm_output
from .validation import (
    FINAL_PROMPT_SIMILARITY_FLOOR,
    ValidationReport,
    Violation,
    final_prompt_similarity,
    validate_decomposition,
)

__all__ = [
    "CacheKey",
    "DecompositionCache",
    "make_cache_key",
    "Decomposition",
    "DecomposerMode",
    "DecompositionRequest",
    "LlmConfig",
    "decompose",
    "FIXTURE_DECOMPOSITIONS",
    "FixtureDecomposition",
    "DEFAULT_EXAMPLES",
    "DICTIONARY_MARKER",
    "EXPLANATION_MARKER",
    "InContextExample",
    "build_instruction",
    "count_examples",
    "load_examples_file",
    "parse_examples_file",
    "render_decomposition_reply",
    "render_example",
    "render_final_dict",
    "extract_last_mapping",
    "parse_llm_output",
    "FINAL_PROMPT_SIMILARITY_FLOOR",
    "ValidationReport",
    "Violation",
    "final_prompt_similarity",
    "validate_decomposition",
]
