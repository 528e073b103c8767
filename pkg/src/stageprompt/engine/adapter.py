"""Adapter binding a real latent-diffusion stack behind the backend interface.

The built-in backends are desk-scale stand-ins; production runs wire an
actual pipeline (text encoder, denoiser, VAE) through ``PipelineBundle``. The
adapter itself is deliberately thin: prompt switching is a whole-handle swap
of the conditioning tensor bundle, never a blend, and the unconditional
branch of classifier-free guidance stays constant across switches.

Construction fails fast with ConfigurationError when the model stack or
weights are missing, so a misconfigured grid dies before any cell runs.
"""

from __future__ import annotations

import importlib
import logging
from dataclasses import dataclass, field
from typing import Any, Mapping, Protocol

import numpy as np

from ..errors import ConfigurationError
from ..util import sha256_hex
from .backends import ConditioningHandle, ImageArtifact

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class BackendSpec:
    """Description of a concrete pipeline to adapt.

    ``bundle_factory`` is a dotted path to a callable ``(spec) -> PipelineBundle``.
    When omitted, the bundled diffusers wiring is used and ``model`` must name
    a loadable pretrained pipeline.
    """

    backend_id: str
    model: str | None = None
    device: str = "cpu"
    dtype: str = "float16"
    num_steps_default: int = 50
    guidance_scale_default: float = 7.5
    # On stacks with several text encoders, a prompt switch swaps every
    # encoder's stream together; partial swaps desynchronize global layout
    # from token-level detail.
    switch_all_text_encoders: bool = True
    options: Mapping[str, Any] = field(default_factory=dict)


class PipelineBundle(Protocol):
    """The minimal component contract the adapter drives.

    Implementations own all tensor specifics; the adapter only sequences
    calls. ``denoise_step`` must apply classifier-free guidance internally
    using the conditioning payload passed for this step and the fixed
    unconditional payload created at init.
    """

    def encode(self, text: str) -> Any: ...

    def encode_unconditional(self) -> Any: ...

    def init_latents(self, seed: int, total_steps: int, width: int | None,
                     height: int | None) -> Any: ...

    def denoise_step(self, latents: Any, step_index: int, cond: Any, uncond: Any,
                     guidance_scale: float) -> Any: ...

    def decode(self, latents: Any) -> np.ndarray: ...


@dataclass
class _AdapterState:
    latents: Any
    uncond: Any
    total_steps: int
    guidance_scale: float


class RealBackendAdapter:
    """DenoisingBackend over a PipelineBundle."""

    supports_x0_preview = False

    def __init__(self, spec: BackendSpec, bundle: PipelineBundle) -> None:
        self.backend_id = spec.backend_id
        self.num_steps_default = spec.num_steps_default
        self._spec = spec
        self._bundle = bundle

    def encode_prompt(self, text: str) -> ConditioningHandle:
        payload = self._bundle.encode(text)
        return ConditioningHandle(prompt=text, fingerprint=sha256_hex("cond:" + text), payload=payload)

    def init_state(self, seed: int, config: "GenerationConfig") -> _AdapterState:
        if config.total_steps != self.num_steps_default:
            raise ConfigurationError(
                f"backend {self.backend_id!r} is configured for {self.num_steps_default} "
                f"steps; requested {config.total_steps}"
            )
        guidance = (config.guidance_scale if config.guidance_scale is not None
                    else self._spec.guidance_scale_default)
        latents = self._bundle.init_latents(seed, config.total_steps, config.width, config.height)
        return _AdapterState(
            latents=latents,
            uncond=self._bundle.encode_unconditional(),
            total_steps=config.total_steps,
            guidance_scale=guidance,
        )

    def step(self, state: _AdapterState, t: int, cond: ConditioningHandle) -> _AdapterState:
        latents = self._bundle.denoise_step(
            state.latents, t, cond.payload, state.uncond, state.guidance_scale
        )
        return _AdapterState(
            latents=latents,
            uncond=state.uncond,
            total_steps=state.total_steps,
            guidance_scale=state.guidance_scale,
        )

    def decode(self, state: _AdapterState) -> ImageArtifact:
        pixels = np.asarray(self._bundle.decode(state.latents), dtype=np.uint8)
        return ImageArtifact(pixels=pixels)

    def predict_x0(self, state: _AdapterState, t: int, cond: ConditioningHandle) -> ImageArtifact:
        from ..errors import CapabilityError

        raise CapabilityError(f"backend {self.backend_id!r} does not expose clean-image previews")


class _DiffusersBundle:
    """Reference wiring for a classic text-to-image latent diffusion pipeline.

    Exercised by deployment smoke tests, not the core suite: it needs weights
    and an accelerator to do anything useful.
    """

    def __init__(self, spec: BackendSpec) -> None:
        try:
            import torch
            from diffusers import AutoPipelineForText2Image
        except ImportError as exc:
            raise ConfigurationError(f"diffusers stack unavailable: {exc}") from exc
        if not spec.model:
            raise ConfigurationError("BackendSpec.model must name a pretrained pipeline")
        self._torch = torch
        dtype = getattr(torch, spec.dtype, None)
        if dtype is None:
            raise ConfigurationError(f"unknown dtype {spec.dtype!r}")
        try:
            self._pipe = AutoPipelineForText2Image.from_pretrained(spec.model, torch_dtype=dtype)
        except Exception as exc:
            raise ConfigurationError(f"cannot load pipeline {spec.model!r}: {exc}") from exc
        self._pipe.to(spec.device)
        self._device = spec.device
        self._spec = spec
        self._timesteps = None

    def encode(self, text: str):
        # encode_prompt returns (cond, uncond) tensor pairs on classic SD
        # pipelines; keep the full tuple so every encoder stream swaps together.
        embeds = self._pipe.encode_prompt(
            text, device=self._device, num_images_per_prompt=1, do_classifier_free_guidance=False
        )
        return embeds

    def encode_unconditional(self):
        return self.encode("")

    def init_latents(self, seed: int, total_steps: int, width: int | None, height: int | None):
        torch = self._torch
        pipe = self._pipe
        pipe.scheduler.set_timesteps(total_steps, device=self._device)
        self._timesteps = pipe.scheduler.timesteps
        unet = getattr(pipe, "unet", None) or getattr(pipe, "transformer")
        channels = unet.config.in_channels
        h = (height or pipe.default_sample_size * pipe.vae_scale_factor) // pipe.vae_scale_factor
        w = (width or pipe.default_sample_size * pipe.vae_scale_factor) // pipe.vae_scale_factor
        gen = torch.Generator(device="cpu").manual_seed(seed)
        latents = torch.randn((1, channels, h, w), generator=gen, dtype=unet.dtype)
        return (latents.to(self._device) * pipe.scheduler.init_noise_sigma)

    def denoise_step(self, latents, step_index, cond, uncond, guidance_scale):
        torch = self._torch
        pipe = self._pipe
        t = self._timesteps[step_index]
        cond_embeds = cond[0] if isinstance(cond, tuple) else cond
        uncond_embeds = uncond[0] if isinstance(uncond, tuple) else uncond
        model_input = torch.cat([latents] * 2)
        model_input = pipe.scheduler.scale_model_input(model_input, t)
        embeds = torch.cat([uncond_embeds, cond_embeds])
        with torch.no_grad():
            noise = pipe.unet(model_input, t, encoder_hidden_states=embeds).sample
        noise_uncond, noise_cond = noise.chunk(2)
        guided = noise_uncond + guidance_scale * (noise_cond - noise_uncond)
        return pipe.scheduler.step(guided, t, latents).prev_sample

    def decode(self, latents):
        torch = self._torch
        pipe = self._pipe
        with torch.no_grad():
            image = pipe.vae.decode(latents / pipe.vae.config.scaling_factor).sample
        image = (image / 2 + 0.5).clamp(0, 1)
        array = image.cpu().permute(0, 2, 3, 1).float().numpy()[0]
        return (array * 255).round().astype(np.uint8)


def _resolve_factory(dotted: str):
    module_name, _, attr = dotted.rpartition(".")
    if not module_name:
        raise ConfigurationError(f"bundle_factory {dotted!r} is not a dotted path")
    try:
        module = importlib.import_module(module_name)
        return getattr(module, attr)
    except (ImportError, AttributeError) as exc:
        raise ConfigurationError(f"cannot resolve bundle_factory {dotted!r}: {exc}") from exc


def real_backend_adapter(spec: BackendSpec) -> RealBackendAdapter:
    """Construct an adapter for ``spec``.

    Resolution order: an explicit ``bundle_factory`` in ``spec.options``,
    otherwise the bundled diffusers wiring.
    """
    factory_path = spec.options.get("bundle_factory")
    if factory_path:
        bundle = _resolve_factory(str(factory_path))(spec)
    else:
        bundle = _DiffusersBundle(spec)
    return RealBackendAdapter(spec, bundle)
