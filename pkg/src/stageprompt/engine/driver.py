"""The denoising drive loop: schedule-directed conditioning injection."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from ..errors import (
    CapabilityError,
    ConfigurationError,
    GenerationError,
    PromptEncodingError,
    StepRangeError,
)
from ..schedule import PromptSchedule
from .backends import ConditioningHandle, DenoisingBackend, ImageArtifact

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class GenerationConfig:
    total_steps: int = 50
    seed: int = 0
    guidance_scale: float | None = None  # None: backend default
    width: int | None = None
    height: int | None = None
    backend_id: str = "trace"

    def __post_init__(self) -> None:
        if self.total_steps < 2:
            raise ConfigurationError(f"total_steps must be >= 2, got {self.total_steps}")
        if self.width is not None and self.width <= 0:
            raise ConfigurationError(f"width must be positive, got {self.width}")
        if self.height is not None and self.height <= 0:
            raise ConfigurationError(f"height must be positive, got {self.height}")

    def to_json_dict(self) -> dict:
        return {
            "total_steps": self.total_steps,
            "seed": self.seed,
            "guidance_scale": self.guidance_scale,
            "width": self.width,
            "height": self.height,
            "backend_id": self.backend_id,
        }


@dataclass(frozen=True)
class StepTrace:
    t: int
    prompt_index: int
    conditioning_fingerprint: str


@dataclass(frozen=True)
class DecompositionProvenance:
    """How the schedule driving a generation came to be."""

    mode: str
    raw_digest: str
    fallback: bool = False

    def to_json_dict(self) -> dict:
        return {"mode": self.mode, "raw_digest": self.raw_digest, "fallback": self.fallback}


@dataclass
class GenerationRecord:
    target_prompt: str
    schedule: PromptSchedule
    config: GenerationConfig
    step_trace: tuple[StepTrace, ...]
    image_digest: str
    wall_time: float
    image_ref: Path | None = None
    provenance: DecompositionProvenance | None = None
    artifact: ImageArtifact | None = field(default=None, repr=False, compare=False)

    def to_json_dict(self) -> dict:
        return {
            "target_prompt": self.target_prompt,
            "schedule": self.schedule.to_triples(),
            "total_steps": self.schedule.total_steps,
            "config": self.config.to_json_dict(),
            "step_trace": [[s.t, s.prompt_index, s.conditioning_fingerprint] for s in self.step_trace],
            "image_digest": self.image_digest,
            "wall_time": self.wall_time,
            "image_ref": str(self.image_ref) if self.image_ref else None,
            "provenance": self.provenance.to_json_dict() if self.provenance else None,
        }


def _drive(schedule: PromptSchedule, config: GenerationConfig, backend: DenoisingBackend,
           snapshot_steps: frozenset[int], previews: list[tuple[int, ImageArtifact]]):
    """Run the full denoising loop, optionally snapshotting clean-image
    previews, and return (final state, step trace). Prompts are encoded once
    each, on first use."""
    cond_cache: dict[str, ConditioningHandle] = {}
    state = backend.init_state(config.seed, config)
    trace: list[StepTrace] = []
    for t in range(config.total_steps):
        idx = schedule.prompt_index_at(t)
        prompt = schedule.entries[idx].prompt
        handle = cond_cache.get(prompt)
        if handle is None:
            try:
                handle = backend.encode_prompt(prompt)
            except Exception as exc:
                raise PromptEncodingError(prompt, str(exc)) from exc
            cond_cache[prompt] = handle
        try:
            state = backend.step(state, t, handle)
        except Exception as exc:
            raise GenerationError(str(exc), t=t, prompt_index=idx) from exc
        trace.append(StepTrace(t=t, prompt_index=idx, conditioning_fingerprint=handle.fingerprint))
        if t in snapshot_steps:
            previews.append((t, backend.predict_x0(state, t, handle)))
    return state, tuple(trace)


def generate(schedule: PromptSchedule, config: GenerationConfig, backend: DenoisingBackend, *,
             image_path: Path | None = None, target_prompt: str | None = None,
             provenance: DecompositionProvenance | None = None) -> GenerationRecord:
    """Denoise under ``schedule`` and decode the result.

    The schedule and config must agree on the step count. When ``image_path``
    is given, the decoded image is written there losslessly and recorded as
    ``image_ref``; the in-memory artifact rides on the record either way.
    """
    if schedule.total_steps != config.total_steps:
        raise ConfigurationError(
            f"schedule covers {schedule.total_steps} steps but config asks for {config.total_steps}"
        )
    started = time.perf_counter()
    state, trace = _drive(schedule, config, backend, frozenset(), [])
    artifact = backend.decode(state)
    wall = time.perf_counter() - started

    ref: Path | None = None
    if image_path is not None:
        ref = artifact.save(Path(image_path))
    return GenerationRecord(
        target_prompt=target_prompt if target_prompt is not None else schedule.entries[-1].prompt,
        schedule=schedule,
        config=config,
        step_trace=trace,
        image_digest=artifact.digest(),
        wall_time=wall,
        image_ref=ref,
        provenance=provenance,
        artifact=artifact,
    )


def export_x0_trajectory(schedule: PromptSchedule, config: GenerationConfig,
                         backend: DenoisingBackend, snapshot_steps: Sequence[int], *,
                         out_dir: Path | None = None) -> list[ImageArtifact]:
    """Run one generation, capturing the backend's clean-image prediction
    after each requested step. Previews are returned in step order and, when
    ``out_dir`` is given, written as indexed PNG files.

    Snapshotting reads state without touching it, so the run's final image is
    the one ``generate`` would have produced.
    """
    if not backend.supports_x0_preview:
        raise CapabilityError(
            f"backend {backend.backend_id!r} does not support clean-image previews"
        )
    if schedule.total_steps != config.total_steps:
        raise ConfigurationError(
            f"schedule covers {schedule.total_steps} steps but config asks for {config.total_steps}"
        )
    wanted = sorted(set(int(t) for t in snapshot_steps))
    for t in wanted:
        if not 0 <= t < config.total_steps:
            raise StepRangeError(f"snapshot step {t} is outside [0, {config.total_steps})")

    previews: list[tuple[int, ImageArtifact]] = []
    _drive(schedule, config, backend, frozenset(wanted), previews)
    previews.sort(key=lambda pair: pair[0])
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for t, art in previews:
            art.save(out / f"x0_step{t:03d}.png")
    return [art for _, art in previews]
