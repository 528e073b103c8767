"""Application configuration: defaults, config file, environment, CLI flags.

Precedence, lowest to highest: built-in defaults, then the YAML config file,
then ``STAGEPROMPT_*`` environment variables, then explicit flags. API keys
are the exception: they are only ever read from the environment (the variable
names are configurable, the values never live in a file).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .decomposer import DecomposerMode, LlmConfig
from .errors import ConfigurationError
from .judge import VlmConfig
from .util import sha256_hex

_ENV_PREFIX = "STAGEPROMPT_"

# env var name -> settings path
_ENV_MAP = {
    "OUT_DIR": ("out_dir",),
    "CACHE_DIR": ("cache_dir",),
    "SEEDS": ("seeds",),
    "TOTAL_STEPS": ("total_steps",),
    "MAX_PROMPTS": ("max_prompts",),
    "MODE": ("mode",),
    "WORKERS": ("workers",),
    "BACKEND": ("backend",),
    "LLM_PROVIDER": ("llm", "provider"),
    "LLM_MODEL": ("llm", "model_id"),
    "LLM_ENDPOINT": ("llm", "endpoint"),
    "LLM_TEMPERATURE": ("llm", "temperature"),
    "LLM_MAX_RETRIES": ("llm", "max_retries"),
    "LLM_TIMEOUT": ("llm", "timeout"),
    "LLM_API_KEY_ENV": ("llm", "api_key_env"),
    "JUDGE_PROVIDER": ("judge", "provider"),
    "JUDGE_MODEL": ("judge", "model_id"),
    "JUDGE_ENDPOINT": ("judge", "endpoint"),
    "JUDGE_TEMPERATURE": ("judge", "temperature"),
    "JUDGE_MAX_RETRIES": ("judge", "max_retries"),
    "JUDGE_TIMEOUT": ("judge", "timeout"),
    "JUDGE_API_KEY_ENV": ("judge", "api_key_env"),
}

_DEFAULTS: dict[str, Any] = {
    "out_dir": "stageprompt-out",
    "cache_dir": None,  # None: <out_dir>/cache
    "seeds": [1, 2, 3],
    "total_steps": 50,
    "max_prompts": 3,
    "mode": "full",
    "workers": 1,
    "backend": "trace",
    "examples_file": None,
    "force_target_final": False,
    "llm": {
        "provider": "http",
        "fixture": None,
        "model_id": "gpt-4o",
        "endpoint": "https://api.openai.com/v1/chat/completions",
        "temperature": 0.0,
        "max_retries": 3,
        "timeout": 120.0,
        "api_key_env": "LLM_API_KEY",
    },
    "judge": {
        "provider": "http",
        "fixture": None,
        "model_id": "gpt-4o",
        "endpoint": "https://api.openai.com/v1/chat/completions",
        "temperature": 0.0,
        "max_retries": 3,
        "timeout": 120.0,
        "api_key_env": "VLM_API_KEY",
    },
}


@dataclass(frozen=True)
class AppConfig:
    out_dir: Path
    cache_dir: Path
    seeds: tuple[int, ...]
    total_steps: int
    max_prompts: int
    mode: DecomposerMode
    workers: int
    backend: str
    examples_file: Path | None
    force_target_final: bool
    llm: LlmConfig
    llm_provider: str
    llm_fixture: Path | None
    vlm: VlmConfig
    judge_provider: str
    judge_fixture: Path | None
    settings: Mapping[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def echo_json(self) -> str:
        return json.dumps(self.settings, ensure_ascii=False, sort_keys=True)

    def digest(self) -> str:
        return sha256_hex(self.echo_json())


def _coerce_like(current: Any, raw: str) -> Any:
    if isinstance(current, bool):
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(current, int) and not isinstance(current, bool):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, list):
        return [int(x) for x in raw.replace(",", " ").split()]
    return raw


def _deep_update(base: dict[str, Any], overlay: Mapping[str, Any]) -> None:
    for key, value in overlay.items():
        if isinstance(value, Mapping) and isinstance(base.get(key), dict):
            _deep_update(base[key], value)
        else:
            base[key] = value


def _load_file(path: Path) -> dict[str, Any]:
    import yaml

    try:
        body = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config file {path} is not valid YAML: {exc}") from exc
    if body is None:
        return {}
    if not isinstance(body, dict):
        raise ConfigurationError(f"config file {path} must hold a mapping at the top level")
    for key in ("llm", "judge"):
        section = body.get(key)
        if section is not None and not isinstance(section, dict):
            raise ConfigurationError(f"config section {key!r} must be a mapping")
        if section and "api_key" in section:
            raise ConfigurationError(
                f"config section {key!r} contains 'api_key'; keys are read from the "
                f"environment variable named by 'api_key_env', never from files"
            )
    return body


def _apply_env(settings: dict[str, Any], env: Mapping[str, str]) -> None:
    for suffix, path in _ENV_MAP.items():
        raw = env.get(_ENV_PREFIX + suffix)
        if raw is None:
            continue
        node = settings
        for part in path[:-1]:
            node = node[part]
        leaf = path[-1]
        try:
            node[leaf] = _coerce_like(node.get(leaf), raw)
        except ValueError as exc:
            raise ConfigurationError(
                f"environment variable {_ENV_PREFIX + suffix} has a bad value {raw!r}: {exc}"
            ) from exc


def load_app_config(config_file: Path | None = None,
                    overrides: Mapping[str, Any] | None = None,
                    env: Mapping[str, str] | None = None) -> AppConfig:
    """Resolve the effective configuration.

    ``overrides`` uses the same nested shape as the config file and wins over
    everything; pass only keys the user actually set.
    """
    env = os.environ if env is None else env
    settings = json.loads(json.dumps(_DEFAULTS))  # deep copy of plain data
    if config_file is not None:
        _deep_update(settings, _load_file(Path(config_file)))
    _apply_env(settings, env)
    if overrides:
        _deep_update(settings, overrides)

    try:
        mode = DecomposerMode(str(settings["mode"]).lower())
    except ValueError:
        valid = ", ".join(m.value for m in DecomposerMode)
        raise ConfigurationError(
            f"unknown decomposer mode {settings['mode']!r}; valid: {valid}"
        ) from None

    out_dir = Path(settings["out_dir"])
    cache_dir = Path(settings["cache_dir"]) if settings["cache_dir"] else out_dir / "cache"
    settings["cache_dir"] = str(cache_dir)

    for side in ("llm", "judge"):
        provider = settings[side]["provider"]
        if provider not in ("http", "scripted"):
            raise ConfigurationError(
                f"{side}.provider must be 'http' or 'scripted', got {provider!r}"
            )

    seeds = tuple(int(s) for s in settings["seeds"])
    if not seeds:
        raise ConfigurationError("seeds must be nonempty")

    llm_cfg = LlmConfig(
        model_id=str(settings["llm"]["model_id"]),
        endpoint=str(settings["llm"]["endpoint"]),
        temperature=float(settings["llm"]["temperature"]),
        max_retries=int(settings["llm"]["max_retries"]),
        timeout=float(settings["llm"]["timeout"]),
        api_key_env=str(settings["llm"]["api_key_env"]),
    )
    vlm_cfg = VlmConfig(
        model_id=str(settings["judge"]["model_id"]),
        endpoint=str(settings["judge"]["endpoint"]),
        temperature=float(settings["judge"]["temperature"]),
        max_retries=int(settings["judge"]["max_retries"]),
        timeout=float(settings["judge"]["timeout"]),
        api_key_env=str(settings["judge"]["api_key_env"]),
    )
    return AppConfig(
        out_dir=out_dir,
        cache_dir=cache_dir,
        seeds=seeds,
        total_steps=int(settings["total_steps"]),
        max_prompts=int(settings["max_prompts"]),
        mode=mode,
        workers=int(settings["workers"]),
        backend=str(settings["backend"]),
        examples_file=Path(settings["examples_file"]) if settings["examples_file"] else None,
        force_target_final=bool(settings["force_target_final"]),
        llm=llm_cfg,
        llm_provider=str(settings["llm"]["provider"]),
        llm_fixture=Path(settings["llm"]["fixture"]) if settings["llm"]["fixture"] else None,
        vlm=vlm_cfg,
        judge_provider=str(settings["judge"]["provider"]),
        judge_fixture=Path(settings["judge"]["fixture"]) if settings["judge"]["fixture"] else None,
        settings=settings,
    )
