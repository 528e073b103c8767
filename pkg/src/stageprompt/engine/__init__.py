"""Denoising engine: backend interface, built-in backends, drive loop."""

from .adapter import BackendSpec, PipelineBundle, RealBackendAdapter, real_backend_adapter
from .backends import (
    ConditioningHandle,
    DenoisingBackend,
    ImageArtifact,
    ToyBackend,
    ToyState,
    TraceBackend,
    TraceState,
    band_of,
    toy_backend,
    trace_backend,
)
from .driver import (
    DecompositionProvenance,
    GenerationConfig,
    GenerationRecord,
    StepTrace,
    export_x0_trajectory,
    generate,
)

__all__ = [
    "BackendSpec",
    "PipelineBundle",
    "RealBackendAdapter",
    "real_backend_adapter",
    "ConditioningHandle",
    "DenoisingBackend",
    "ImageArtifact",
    "ToyBackend",
    "ToyState",
    "TraceBackend",
    "TraceState",
    "band_of",
    "toy_backend",
    "trace_backend",
    "DecompositionProvenance",
    "GenerationConfig",
    "GenerationRecord",
    "StepTrace",
    "export_x0_trajectory",
    "generate",
]
