"""Command line interface.

Exit codes: 0 success; 1 configuration problems; 2 completed with degraded
results (benchmark cells failed, or a decomposition fell back to the target
prompt); 3 hard failure.

Every command prints the resolved configuration and its digest before doing
work, so a run can be reproduced from its own log. All file output lands
under the configured output and cache directories.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Mapping, Sequence

from .bench import (
    ABLATION_METHODS,
    BenchComponents,
    MethodConfig,
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
    load_scripted_chat_client,
    load_scripted_vision_client,
)
from .config import AppConfig, load_app_config
from .decomposer import (
    DecomposerMode,
    DecompositionCache,
    DecompositionRequest,
    decompose,
    load_examples_file,
)
from .engine import (
    DecompositionProvenance,
    GenerationConfig,
    export_x0_trajectory,
    generate,
)
from .errors import ConfigurationError, StagePromptError
from .judge import judge_alignment
from .schedule import build_schedule
from .util import sha256_hex, slugify, utc_now_iso

LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2
EXIT_FAILURE = 3

_METHOD_TOKENS = {
    "static": "static",
    "no-incontext": "w/o in-context",
    "no-reasoning": "w/o reasoning",
    "max-two": "2 proxy",
    "two-proxy": "2 proxy",
    "2proxy": "2 proxy",
    "full": "Full",
}
_ABLATION_BY_NAME = {m.name: m for m in ABLATION_METHODS}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stageprompt",
        description="Stage-aware prompt scheduling for text-to-image diffusion.",
    )
    parser.add_argument("--config", type=Path, default=None, help="YAML config file")
    parser.add_argument("--out-dir", default=None, help="output directory")
    parser.add_argument("--cache-dir", default=None, help="decomposition cache directory")
    parser.add_argument("--seeds", default=None, help="comma-separated seed list")
    parser.add_argument("--steps", type=int, default=None, help="denoising steps")
    parser.add_argument("--workers", type=int, default=None, help="parallel grid workers")
    parser.add_argument("--mode", default=None,
                        choices=[m.value for m in DecomposerMode], help="decomposer mode")
    parser.add_argument("--max-prompts", type=int, default=None, help="prompt cap")
    parser.add_argument("--backend", default=None, help="denoising backend id")
    parser.add_argument("--examples", default=None, help="extra in-context examples file")
    parser.add_argument("--force-target-final", action="store_true", default=None,
                        help="replace the final proxy prompt with the verbatim target")
    parser.add_argument("--llm", default=None, choices=["http", "scripted"],
                        help="decomposition model provider")
    parser.add_argument("--llm-fixture", default=None, help="fixture file for --llm scripted")
    parser.add_argument("--judge", dest="judge_provider", default=None,
                        choices=["http", "scripted"], help="judge model provider")
    parser.add_argument("--judge-fixture", default=None, help="fixture file for --judge scripted")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="decompose a prompt into a stage schedule")
    p.add_argument("prompt")

    p = sub.add_parser("generate", help="decompose and render one prompt")
    p.add_argument("prompt")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("bench", help="run a benchmark grid")
    p.add_argument("dataset", help="'contrabench' or a prompt file path")
    p.add_argument("--dataset-id", default=None, help="dataset id for prompt files")
    p.add_argument("--methods", default="static,full",
                   help=f"comma-separated tokens: {', '.join(sorted(_METHOD_TOKENS))}")

    p = sub.add_parser("ablate", help="run the standard five-method comparison")
    p.add_argument("dataset", help="'contrabench' or a prompt file path")
    p.add_argument("--dataset-id", default=None)

    p = sub.add_parser("judge", help="score one image against a prompt")
    p.add_argument("image", type=Path)
    p.add_argument("prompt")

    p = sub.add_parser("x0trace", help="export clean-image previews along one run")
    p.add_argument("prompt")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--snapshots", default=None, help="comma-separated step list")
    return parser


def _overrides_from_args(ns: argparse.Namespace) -> dict[str, Any]:
    over: dict[str, Any] = {}
    plain = {
        "out_dir": ns.out_dir,
        "cache_dir": ns.cache_dir,
        "total_steps": ns.steps,
        "workers": ns.workers,
        "mode": ns.mode,
        "max_prompts": ns.max_prompts,
        "examples_file": ns.examples,
        "force_target_final": ns.force_target_final,
    }
    for key, value in plain.items():
        if value is not None:
            over[key] = value
    if ns.seeds is not None:
        try:
            over["seeds"] = [int(s) for s in ns.seeds.replace(",", " ").split()]
        except ValueError:
            raise ConfigurationError(f"--seeds must be integers, got {ns.seeds!r}") from None
    if ns.backend is not None:
        over["backend"] = ns.backend
    if ns.llm is not None:
        over.setdefault("llm", {})["provider"] = ns.llm
    if ns.llm_fixture is not None:
        over.setdefault("llm", {})["fixture"] = ns.llm_fixture
    if ns.judge_provider is not None:
        over.setdefault("judge", {})["provider"] = ns.judge_provider
    if ns.judge_fixture is not None:
        over.setdefault("judge", {})["fixture"] = ns.judge_fixture
    return over


def _require_api_key(env_name: str, what: str) -> str:
    key = os.environ.get(env_name, "")
    if not key:
        raise ConfigurationError(
            f"{what} needs an API key in the environment variable {env_name}"
        )
    return key


def _chat_client(cfg: AppConfig):
    if cfg.llm_provider == "scripted":
        return load_scripted_chat_client(cfg.llm_fixture)
    key = _require_api_key(cfg.llm.api_key_env, "the decomposition model")
    return HttpChatClient(endpoint=cfg.llm.endpoint, api_key=key, max_retries=cfg.llm.max_retries)


def _vision_client(cfg: AppConfig):
    if cfg.judge_provider == "scripted":
        return load_scripted_vision_client(cfg.judge_fixture)
    key = _require_api_key(cfg.vlm.api_key_env, "the judge model")
    return HttpVisionClient(endpoint=cfg.vlm.endpoint, api_key=key, max_retries=cfg.vlm.max_retries)


def _examples(cfg: AppConfig):
    if cfg.examples_file is None:
        return None
    from .decomposer import DEFAULT_EXAMPLES

    return tuple(DEFAULT_EXAMPLES) + tuple(load_examples_file(cfg.examples_file))


def _decompose_for(cfg: AppConfig, prompt: str, mode: DecomposerMode):
    request = DecompositionRequest(
        target_prompt=prompt,
        mode=mode,
        max_prompts=cfg.max_prompts,
        total_steps=cfg.total_steps,
        llm=cfg.llm,
        force_target_final=cfg.force_target_final,
    )
    cache = DecompositionCache(cfg.cache_dir)
    return decompose(request, _chat_client(cfg), cache=cache, examples=_examples(cfg))


def _backend_for(cfg: AppConfig):
    from .bench import BackendPool

    pool = BackendPool()
    backend, _ = pool.get(cfg.backend)
    return backend


def _load_dataset(token: str, dataset_id: str | None):
    if token == "contrabench":
        return load_contrabench()
    return load_prompt_file(Path(token), dataset_id)


def _parse_methods(tokens: str) -> list[MethodConfig]:
    methods: list[MethodConfig] = []
    for token in tokens.split(","):
        token = token.strip().lower()
        if not token:
            continue
        name = _METHOD_TOKENS.get(token)
        if name is None:
            raise ConfigurationError(
                f"unknown method token {token!r}; valid: {', '.join(sorted(_METHOD_TOKENS))}"
            )
        methods.append(_ABLATION_BY_NAME[name])
    if not methods:
        raise ConfigurationError("no methods selected")
    return methods


def cmd_decompose(ns: argparse.Namespace, cfg: AppConfig) -> int:
    d = _decompose_for(cfg, ns.prompt, cfg.mode)
    schedule = build_schedule(d, cfg.total_steps)
    print(f"explanation: {d.explanation or '(none)'}")
    print("prompts:")
    for i, p in enumerate(d.prompts, start=1):
        print(f"  {i}. {p}")
    print(f"switch steps: {list(d.switch_steps)}")
    print("schedule:")
    for entry in schedule.entries:
        print(f"  [{entry.start:3d}, {entry.end:3d})  {entry.prompt}")
    out = cfg.out_dir / "decompositions" / f"{slugify(ns.prompt)[:60]}-{cfg.mode.value}.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps({
        "target_prompt": ns.prompt,
        "mode": cfg.mode.value,
        "decomposition": d.to_json_dict(),
        "schedule": schedule.to_triples(),
        "created_at": utc_now_iso(),
    }, ensure_ascii=False, indent=2), encoding="utf-8")
    print(f"wrote {out}")
    if d.is_fallback:
        print(f"warning: fell back to the target prompt ({d.fallback_reason})", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_generate(ns: argparse.Namespace, cfg: AppConfig) -> int:
    d = _decompose_for(cfg, ns.prompt, cfg.mode)
    schedule = build_schedule(d, cfg.total_steps)
    backend = _backend_for(cfg)
    gen_cfg = GenerationConfig(total_steps=cfg.total_steps, seed=ns.seed, backend_id=cfg.backend)
    stem = f"{slugify(ns.prompt)[:60]}_{cfg.backend}_{ns.seed}"
    image_path = cfg.out_dir / "images" / f"{stem}.png"
    record = generate(
        schedule, gen_cfg, backend,
        image_path=image_path,
        target_prompt=ns.prompt,
        provenance=DecompositionProvenance(
            mode=cfg.mode.value,
            raw_digest=sha256_hex(d.raw_response),
            fallback=d.is_fallback,
        ),
    )
    record_path = cfg.out_dir / "records" / f"{stem}.json"
    record_path.parent.mkdir(parents=True, exist_ok=True)
    record_path.write_text(
        json.dumps(record.to_json_dict(), ensure_ascii=False, indent=2), encoding="utf-8"
    )
    switches = sum(
        1 for a, b in zip(record.step_trace, record.step_trace[1:])
        if a.conditioning_fingerprint != b.conditioning_fingerprint
    )
    print(f"image: {record.image_ref}")
    print(f"image digest: {record.image_digest}")
    print(f"record: {record_path}")
    print(f"steps: {cfg.total_steps}, prompt switches: {switches}")
    return EXIT_PARTIAL if d.is_fallback else EXIT_OK


def _run_grid(ns: argparse.Namespace, cfg: AppConfig, methods: list[MethodConfig] | None) -> int:
    dataset = _load_dataset(ns.dataset, getattr(ns, "dataset_id", None))
    components = BenchComponents(
        llm_client=_chat_client(cfg),
        vlm_client=_vision_client(cfg),
        out_dir=cfg.out_dir,
        llm=cfg.llm,
        vlm=cfg.vlm,
        cache=DecompositionCache(cfg.cache_dir),
        total_steps=cfg.total_steps,
        workers=cfg.workers,
        force_target_final=cfg.force_target_final,
        examples=_examples(cfg),
    )
    journal_path = cfg.out_dir / "journal.jsonl"
    if methods is None:
        result = ablation_suite(dataset, cfg.seeds, components,
                                backend_id=cfg.backend, journal_path=journal_path)
    else:
        pinned = [
            MethodConfig(name=m.name, mode=m.mode, backend_id=cfg.backend,
                         max_prompts=m.max_prompts, generation=m.generation)
            for m in methods
        ]
        result = run_benchmark(dataset, pinned, cfg.seeds, components, journal_path=journal_path)

    table = summarize(result)
    print(table.render_text())
    paths = write_summary(table, cfg.out_dir)
    print(f"journal: {journal_path}")
    for kind, path in paths.items():
        print(f"{kind}: {path}")
    nulls = sum(1 for row in result.rows if row.score is None)
    if nulls:
        print(f"warning: {nulls} cell(s) have no score", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_bench(ns: argparse.Namespace, cfg: AppConfig) -> int:
    return _run_grid(ns, cfg, _parse_methods(ns.methods))


def cmd_ablate(ns: argparse.Namespace, cfg: AppConfig) -> int:
    return _run_grid(ns, cfg, None)


def cmd_judge(ns: argparse.Namespace, cfg: AppConfig) -> int:
    judgement = judge_alignment(ns.image, ns.prompt, cfg.vlm, _vision_client(cfg))
    print(f"score: {judgement.score}")
    print(f"explanation: {judgement.explanation or '(none)'}")
    out = cfg.out_dir / "judgements" / f"{slugify(Path(ns.image).stem)[:60]}.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps({
        "image": str(ns.image),
        "prompt": ns.prompt,
        "score": judgement.score,
        "explanation": judgement.explanation,
        "created_at": utc_now_iso(),
    }, ensure_ascii=False, indent=2), encoding="utf-8")
    print(f"wrote {out}")
    return EXIT_OK


def _render_contact_sheet(previews, steps: list[int], path: Path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, len(previews), figsize=(2.2 * len(previews), 2.6), squeeze=False)
    for ax, art, t in zip(axes[0], previews, steps):
        ax.imshow(art.pixels)
        ax.set_title(f"step {t}", fontsize=9)
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def cmd_x0trace(ns: argparse.Namespace, cfg: AppConfig) -> int:
    # previews need a backend that can predict the clean image mid-run
    backend_name = "toy" if cfg.backend == "trace" else cfg.backend
    if backend_name != cfg.backend:
        LOGGER.info("x0trace: the trace backend has no previews; using %r", backend_name)
    from .bench import BackendPool

    backend, _ = BackendPool().get(backend_name)
    d = _decompose_for(cfg, ns.prompt, cfg.mode)
    schedule = build_schedule(d, cfg.total_steps)
    if ns.snapshots is not None:
        steps = sorted({int(s) for s in ns.snapshots.replace(",", " ").split()})
    else:
        steps = sorted({0, cfg.total_steps // 2, cfg.total_steps - 1})
    gen_cfg = GenerationConfig(total_steps=cfg.total_steps, seed=ns.seed, backend_id=backend_name)
    out_dir = cfg.out_dir / "x0" / f"{slugify(ns.prompt)[:60]}_{ns.seed}"
    previews = export_x0_trajectory(schedule, gen_cfg, backend, steps, out_dir=out_dir)
    sheet = _render_contact_sheet(previews, steps, out_dir / "trajectory.png")
    print(f"previews: {len(previews)} file(s) under {out_dir}")
    for t in steps:
        print(f"  {out_dir / f'x0_step{t:03d}.png'}")
    print(f"contact sheet: {sheet}")
    return EXIT_OK


_COMMANDS = {
    "decompose": cmd_decompose,
    "generate": cmd_generate,
    "bench": cmd_bench,
    "ablate": cmd_ablate,
    "judge": cmd_judge,
    "x0trace": cmd_x0trace,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if ns.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_app_config(ns.config, overrides=_overrides_from_args(ns))
        print(f"resolved config: {cfg.echo_json()}")
        print(f"config digest: sha256:{cfg.digest()[:16]}")
        return _COMMANDS[ns.command](ns, cfg)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StagePromptError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_FAILURE


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
