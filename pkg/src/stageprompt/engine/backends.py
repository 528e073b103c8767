"""Denoising backend interface and the two built-in desk-scale backends.

``TraceBackend`` folds every (step, conditioning) pair into a running digest,
so injection order is fully observable and bit-exact. ``ToyBackend`` is a
frequency-domain caricature of a diffusion sampler: each step contributes one
coefficient slot, early steps own low spatial frequencies and late steps own
high ones, mirroring the step bands in the decomposition instruction. It
supports clean-image previews mid-run, which the trace backend does not.
"""

from __future__ import annotations

import hashlib
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Protocol, runtime_checkable

import numpy as np

from ..decomposer.instruction import STAGE_BAND_BOUNDS
from ..errors import CapabilityError
from ..util import sha256_hex


@dataclass(frozen=True)
class ConditioningHandle:
    """Encoded prompt. ``fingerprint`` identifies the conditioning content;
    ``payload`` is backend-private and excluded from comparison."""

    prompt: str
    fingerprint: str
    payload: Any = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ImageArtifact:
    """A decoded image plus optional backend-native preview features."""

    pixels: np.ndarray  # (H, W, 3) uint8
    features: np.ndarray | None = field(default=None, compare=False, repr=False)

    def png_bytes(self) -> bytes:
        from PIL import Image

        buf = io.BytesIO()
        Image.fromarray(self.pixels, mode="RGB").save(buf, format="PNG")
        return buf.getvalue()

    def save(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.png_bytes())
        return path

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(str(self.pixels.shape).encode("ascii"))
        h.update(self.pixels.tobytes())
        return h.hexdigest()


@runtime_checkable
class DenoisingBackend(Protocol):
    backend_id: str
    num_steps_default: int
    supports_x0_preview: bool

    def encode_prompt(self, text: str) -> ConditioningHandle: ...

    def init_state(self, seed: int, config: "GenerationConfig") -> Any: ...

    def step(self, state: Any, t: int, cond: ConditioningHandle) -> Any: ...

    def decode(self, state: Any) -> ImageArtifact: ...

    def predict_x0(self, state: Any, t: int, cond: ConditioningHandle) -> ImageArtifact: ...


# --------------------------------------------------------------------------
# Trace backend


@dataclass(frozen=True)
class TraceState:
    digest: str


class TraceBackend:
    """Digest-chain backend: final output is a pure function of seed, step
    order, and the conditioning active at each step."""

    backend_id = "trace"
    num_steps_default = 50
    supports_x0_preview = False

    def encode_prompt(self, text: str) -> ConditioningHandle:
        return ConditioningHandle(prompt=text, fingerprint=sha256_hex("cond:" + text))

    def init_state(self, seed: int, config: "GenerationConfig") -> TraceState:
        token = f"init|seed:{seed}|steps:{config.total_steps}"
        return TraceState(digest=sha256_hex(token))

    def step(self, state: TraceState, t: int, cond: ConditioningHandle) -> TraceState:
        return TraceState(digest=sha256_hex(f"{state.digest}|t:{t}|c:{cond.fingerprint}"))

    def decode(self, state: TraceState) -> ImageArtifact:
        size = 16
        need = size * size * 3
        blocks = []
        counter = 0
        while sum(len(b) for b in blocks) < need:
            blocks.append(hashlib.sha256(f"{state.digest}|{counter}".encode()).digest())
            counter += 1
        raw = b"".join(blocks)[:need]
        pixels = np.frombuffer(raw, dtype=np.uint8).reshape(size, size, 3).copy()
        return ImageArtifact(pixels=pixels)

    def predict_x0(self, state: TraceState, t: int, cond: ConditioningHandle) -> ImageArtifact:
        raise CapabilityError("the trace backend cannot preview intermediate predictions")


# --------------------------------------------------------------------------
# Toy backend


@dataclass(frozen=True)
class ToyState:
    seed: int
    total_steps: int
    coeffs: np.ndarray  # (total_steps, 3) float64; row t filled by step t


_TOY_SIZE = 64
_TOY_CHANNELS = 3


@lru_cache(maxsize=8)
def _zigzag_freqs(count: int) -> tuple[tuple[int, int], ...]:
    """First ``count`` nonzero 2D frequency pairs ordered by ascending u+v, so
    earlier slots always hold coarser structure than later ones."""
    pairs: list[tuple[int, int]] = []
    d = 1
    while len(pairs) < count:
        for u in range(d + 1):
            pairs.append((u, d - u))
            if len(pairs) == count:
                break
        d += 1
    return tuple(pairs)


def _slot_value(seed: int, t: int, fingerprint: str, channel: int) -> float:
    digest = hashlib.sha256(f"toy|{seed}|{t}|{fingerprint}|{channel}".encode()).hexdigest()
    frac = int(digest[:16], 16) / float(1 << 64)
    sign = -1.0 if int(digest[16], 16) & 1 else 1.0
    # magnitude bounded away from zero so every step moves the state
    return sign * (0.25 + 0.75 * frac)


def band_of(t: int) -> int:
    """Stage band owning step ``t``: 0 is coarsest, 3 is finest."""
    for i, bound in enumerate(STAGE_BAND_BOUNDS):
        if t < bound:
            return i
    return len(STAGE_BAND_BOUNDS)


class ToyBackend:
    """Band-structured accumulator with clean-image previews.

    Step t writes coefficient slot t, a deterministic function of (seed, t,
    conditioning fingerprint). Slots are disjoint, so two runs differ exactly
    in the slots whose steps saw different conditioning, and a partial state
    gets strictly closer to the final one with every step.
    """

    backend_id = "toy"
    num_steps_default = 50
    supports_x0_preview = True

    def encode_prompt(self, text: str) -> ConditioningHandle:
        return ConditioningHandle(prompt=text, fingerprint=sha256_hex("cond:" + text))

    def init_state(self, seed: int, config: "GenerationConfig") -> ToyState:
        coeffs = np.zeros((config.total_steps, _TOY_CHANNELS), dtype=np.float64)
        return ToyState(seed=seed, total_steps=config.total_steps, coeffs=coeffs)

    def step(self, state: ToyState, t: int, cond: ConditioningHandle) -> ToyState:
        coeffs = state.coeffs.copy()
        for c in range(_TOY_CHANNELS):
            coeffs[t, c] = _slot_value(state.seed, t, cond.fingerprint, c)
        return ToyState(seed=state.seed, total_steps=state.total_steps, coeffs=coeffs)

    def _render(self, coeffs: np.ndarray) -> np.ndarray:
        size = _TOY_SIZE
        xs = (np.arange(size) + 0.5) / size
        freqs = _zigzag_freqs(coeffs.shape[0])
        plane = np.zeros((size, size, _TOY_CHANNELS), dtype=np.float64)
        for t in range(coeffs.shape[0]):
            u, v = freqs[t]
            basis = np.outer(np.cos(np.pi * u * xs), np.cos(np.pi * v * xs))
            for c in range(_TOY_CHANNELS):
                plane[:, :, c] += coeffs[t, c] * basis
        scale = 110.0 / math.sqrt(max(coeffs.shape[0], 1))
        return np.clip(128.0 + plane * scale, 0.0, 255.0).astype(np.uint8)

    def decode(self, state: ToyState) -> ImageArtifact:
        return ImageArtifact(pixels=self._render(state.coeffs), features=state.coeffs.copy().ravel())

    def predict_x0(self, state: ToyState, t: int, cond: ConditioningHandle) -> ImageArtifact:
        return ImageArtifact(pixels=self._render(state.coeffs), features=state.coeffs.copy().ravel())

    @staticmethod
    def band_coefficients(state: ToyState) -> dict[int, np.ndarray]:
        """Per-band copies of the coefficient rows, keyed by band index."""
        bands: dict[int, np.ndarray] = {}
        for b in range(len(STAGE_BAND_BOUNDS) + 1):
            rows = [t for t in range(state.total_steps) if band_of(t) == b]
            bands[b] = state.coeffs[rows].copy()
        return bands

    @staticmethod
    def distance(a: ImageArtifact, b: ImageArtifact) -> float:
        """Backend-native distance between two artifacts (coefficient space)."""
        if a.features is None or b.features is None:
            raise CapabilityError("distance needs artifacts produced by the toy backend")
        return float(np.linalg.norm(a.features - b.features))


def trace_backend() -> TraceBackend:
    return TraceBackend()


def toy_backend() -> ToyBackend:
    return ToyBackend()
