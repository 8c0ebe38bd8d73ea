"""Command-line entry point: ``guiagent <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 infrastructure error (gateway or I/O),
3 invariant violation (an episode ended in ``error`` or a replay diverged).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .demos.model import DemoStore
from .demos.pipeline import DEMO_SEEDS, OracleFailed, augment_rationales, script_demo
from .executor import ERROR, EpisodeConfig, run_episode
from .gateway import (
    DEFAULT_MODEL,
    Cassette,
    GatewayError,
    HttpBackend,
    RecordingBackend,
    ReplayBackend,
    ScriptedBackend,
)
from .harness import EvalConfig, load_transcript, replay_transcript, run_eval
from .prompts import select_demos
from .sim.env import REGISTRY, SimEnv
from .sim.oracle import OracleBackend, scripted_rationale
from .sim.tasks import DEFAULT_FAMILIES

log = logging.getLogger("guiagent")

EXIT_OK, EXIT_USAGE, EXIT_INFRA, EXIT_INVARIANT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit with 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"0-49"``, ``"3,5,9"`` or a mix such as ``"0-4,10"``."""
    seeds: list[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if "-" in part[1:]:
                lo, hi = part.split("-", 1)
                if int(hi) < int(lo):
                    raise UsageError(f"empty seed range {part!r}")
                seeds.extend(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(part))
    except ValueError:
        raise UsageError(f"cannot parse seeds {text!r}") from None
    if not seeds:
        raise UsageError("no seeds given")
    return tuple(dict.fromkeys(seeds))


def parse_tasks(text: str | None) -> tuple[str, ...]:
    if not text or text == "all":
        return DEFAULT_FAMILIES
    names = tuple(t.strip() for t in text.split(",") if t.strip())
    unknown = [n for n in names if n not in REGISTRY]
    if unknown:
        raise UsageError(f"unknown task families: {', '.join(unknown)} (known: {', '.join(sorted(REGISTRY))})")
    return names


def _episode_config(args: argparse.Namespace) -> EpisodeConfig:
    return EpisodeConfig(
        max_rounds=args.max_rounds,
        demo_max=args.demo_max,
        use_tools=not args.no_tools,
        no_demos=args.no_demos,
        no_cot=args.no_cot,
        strip_rationales=args.action_only_demos,
        model=args.model,
    )


def _add_prompt_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--demos", dest="demos", default=None, help="demo store directory (with manifest.json)")
    p.add_argument("--demo-max", type=int, default=5, help="demos per prompt (default 5)")
    p.add_argument("--no-demos", action="store_true", help="ablation: omit the demonstration section")
    p.add_argument("--no-cot", action="store_true", help="ablation: omit the step-by-step instructions")
    p.add_argument("--action-only-demos", action="store_true", help="ablation: strip rationales from demos")
    p.add_argument("--no-tools", action="store_true", help="list action types in the prompt instead of tool schemas")
    p.add_argument("--max-rounds", type=int, default=10)
    p.add_argument("--model", default=DEFAULT_MODEL)


def _add_backend_flags(p: argparse.ArgumentParser, default: str = "scripted") -> None:
    p.add_argument("--backend", choices=("http", "scripted", "replay", "record"), default=default)
    p.add_argument("--endpoint", default=None, help="OpenAI-compatible base URL")
    p.add_argument("--api-key-env", default="OPENAI_API_KEY", help="environment variable holding the API key")
    p.add_argument("--cassette", default=None, help="record/replay cassette file")
    p.add_argument(
        "--record-source", choices=("http", "scripted"), default="scripted",
        help="what --backend record forwards to",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="guiagent", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run-eval", help="evaluate task families over seeds and write a report")
    p.add_argument("--config", default=None, help="JSON file with defaults for any flag below")
    p.add_argument("--tasks", default="all", help="comma-separated families, or 'all'")
    p.add_argument("--seeds", default=None, help="e.g. 0-49 or 3,7,11 (default: 0..N-1)")
    p.add_argument("--episodes-per-task", type=int, default=50)
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--out", default="out")
    p.add_argument("--any-seed", action="store_true", help="allow seeds outside the 0-999 test split")
    _add_backend_flags(p)
    _add_prompt_flags(p)

    p = sub.add_parser("record-demos", help="capture oracle demonstrations into a demo store")
    p.add_argument("--tasks", default="all")
    p.add_argument("--seeds", default="3000-3004", help="demo-split seeds (3000-3999)")
    p.add_argument("--max-per-task", type=int, default=5)
    p.add_argument("--out", default="demos")

    p = sub.add_parser("augment-demos", help="attach generated rationales to stored demos")
    p.add_argument("--demos", default="demos")
    p.add_argument("--out", default=None, help="write the augmented store here (default: in place)")
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--model", default=DEFAULT_MODEL)
    _add_backend_flags(p)

    p = sub.add_parser("build-dataset", help="render screens, augment them and export masked pairs")
    p.add_argument("--tasks", default="all")
    p.add_argument("--seeds", default="0-9")
    p.add_argument("--screens", type=int, default=None, help="stop after this many screens")
    p.add_argument("--min-annotations", type=int, default=3)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--noise-sigma", type=float, default=4.0)
    p.add_argument("--darken", type=float, default=0.4)
    p.add_argument("--outline-px", type=int, default=2)
    p.add_argument("--out", default="dataset")

    p = sub.add_parser("replay", help="re-execute transcripts and check they reproduce")
    p.add_argument("transcripts", nargs="+", help="episode .jsonl files or directories")

    p = sub.add_parser("show-prompt", help="print the planning prompt for a family/seed/round")
    p.add_argument("--task", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--round", type=int, default=1)
    _add_prompt_flags(p)
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    path = getattr(args, "config", None)
    if not path:
        return args
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    if any("key" in k and k != "api_key_env" for k in data):
        raise UsageError("API keys are read from the environment only, never from config files")
    # config values become defaults; explicit flags still win
    sub = parser._subparsers._group_actions[0].choices[args.command]  # type: ignore[union-attr]
    known = {a.dest for a in sub._actions}
    unknown = sorted(k.replace("-", "_") for k in data if k.replace("-", "_") not in known)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    defaults = {k.replace("-", "_"): v for k, v in data.items()}
    if isinstance(defaults.get("tasks"), list):
        defaults["tasks"] = ",".join(defaults["tasks"])
    if isinstance(defaults.get("seeds"), list):
        defaults["seeds"] = ",".join(str(s) for s in defaults["seeds"])
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def cmd_run_eval(args: argparse.Namespace) -> int:
    try:
        config = EvalConfig(
            families=parse_tasks(args.tasks),
            seeds=parse_seeds(args.seeds) if args.seeds else None,
            episodes_per_task=args.episodes_per_task,
            episode=_episode_config(args),
            backend=args.backend,
            endpoint=args.endpoint,
            api_key_env=args.api_key_env,
            record_source=args.record_source,
            cassette=args.cassette,
            demos_dir=None if args.no_demos else args.demos,
            parallel=args.parallel,
            out=args.out,
            strict_split=not args.any_seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    report, results = run_eval(config)
    print(report.to_text())
    print(f"wrote {Path(args.out) / 'report.json'}")
    if report.infra_errors:
        log.error("%d gateway failures during the run", report.infra_errors)
        return EXIT_INFRA
    broken = [r for r in results if r.outcome == ERROR]
    if broken:
        for r in broken:
            log.error("%s/%s: %s", r.family, r.seed, r.error)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_record_demos(args: argparse.Namespace) -> int:
    families = parse_tasks(args.tasks)
    seeds = parse_seeds(args.seeds)
    if any(s not in DEMO_SEEDS for s in seeds):
        raise UsageError("demo seeds must lie in 3000-3999")
    store = DemoStore(Path(args.out))
    for family in families:
        for seed in seeds[: args.max_per_task]:
            try:
                store.add(script_demo(family, seed))
            except OracleFailed as exc:
                log.error("%s", exc)
                return EXIT_INVARIANT
        store.limits[family] = min(args.max_per_task, len(seeds))
    store.save()
    total = sum(len(store.get(f)) for f in families)
    print(f"wrote {total} demos for {len(families)} families to {args.out}")
    return EXIT_OK


def _rationale_backend(args: argparse.Namespace) -> tuple[Any, Cassette | None]:
    scripted = ScriptedBackend(fallback=scripted_rationale)
    if args.backend == "scripted":
        return scripted, None
    if args.backend in ("replay", "record") and not args.cassette:
        raise UsageError(f"--backend {args.backend} needs --cassette")
    needs_http = args.backend == "http" or (args.backend == "record" and args.record_source == "http")
    if needs_http and not args.endpoint:
        raise UsageError("the http backend needs --endpoint")
    if args.backend == "http":
        return HttpBackend(args.endpoint, api_key_env=args.api_key_env), None
    cassette = Cassette.load(args.cassette)
    if args.backend == "replay":
        return ReplayBackend(cassette), None
    inner = HttpBackend(args.endpoint, api_key_env=args.api_key_env) if needs_http else scripted
    return RecordingBackend(inner, cassette), cassette


def cmd_augment_demos(args: argparse.Namespace) -> int:
    try:
        store = DemoStore.load(args.demos)
    except OSError as exc:
        raise UsageError(f"cannot load demo store {args.demos}: {exc}") from None
    backend, cassette = _rationale_backend(args)
    demos = list(store)

    def one(demo: Any) -> Any:
        return augment_rationales(demo, backend, model=args.model)

    with ThreadPoolExecutor(max_workers=max(1, args.parallel)) as pool:
        augmented = list(pool.map(one, demos))
    for demo in augmented:
        store.add(demo)
    store.save(args.out or args.demos)
    if cassette is not None:
        cassette.save()
    flagged = sum(s.flagged for d in augmented for s in d.steps)
    print(f"augmented {len(augmented)} demos; {flagged} steps flagged")
    return EXIT_INFRA if flagged else EXIT_OK


def cmd_build_dataset(args: argparse.Namespace) -> int:
    from .dataset import augment_dataset, capture_screens, write_dataset

    shots = capture_screens(
        parse_tasks(args.tasks), parse_seeds(args.seeds), min_annotations=args.min_annotations, limit=args.screens
    )
    if not shots:
        raise UsageError("no screens matched the filters")
    samples = augment_dataset(shots, np.random.default_rng(args.rng_seed), noise_sigma=args.noise_sigma)
    counts = write_dataset(args.out, samples, darken=args.darken, outline_px=args.outline_px)
    print(f"{len(shots)} screens -> {counts['samples']} samples, {counts['pairs']} pairs in {args.out}")
    return EXIT_OK


def _transcript_files(paths: Sequence[str]) -> list[Path]:
    files: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(sorted(p.rglob("*.jsonl")))
        elif p.exists():
            files.append(p)
        else:
            raise UsageError(f"no such transcript: {p}")
    return files


def cmd_replay(args: argparse.Namespace) -> int:
    files = _transcript_files(args.transcripts)
    diverged = 0
    for path in files:
        rounds = load_transcript(path)
        if not rounds:
            continue
        _, problems = replay_transcript(rounds)
        if problems:
            diverged += 1
            print(f"DIVERGED {path}")
            for p in problems:
                print(f"  {p}")
        else:
            print(f"ok {path}")
    print(f"{len(files) - diverged}/{len(files)} transcripts reproduced")
    return EXIT_INVARIANT if diverged else EXIT_OK


def cmd_show_prompt(args: argparse.Namespace) -> int:
    parse_tasks(args.task)
    if args.round < 1:
        raise UsageError("--round must be >= 1")
    store = DemoStore.load(args.demos) if args.demos and not args.no_demos else None
    config = _episode_config(args)
    config = EpisodeConfig(**{**config.to_json(), "max_rounds": args.round})
    env = SimEnv(args.task, args.seed)
    result = run_episode(env, None, OracleBackend(env), config, select_demos(args.task, store, config.demo_max))
    if len(result.transcript) < args.round:
        raise UsageError(f"the oracle finishes {args.task}/{args.seed} in {len(result.transcript)} rounds")
    print(result.transcript[args.round - 1]["prompt"])
    return EXIT_OK


COMMANDS = {
    "run-eval": cmd_run_eval,
    "record-demos": cmd_record_demos,
    "augment-demos": cmd_augment_demos,
    "build-dataset": cmd_build_dataset,
    "replay": cmd_replay,
    "show-prompt": cmd_show_prompt,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        try:
            args = _apply_config_file(parser, argv)
        except SystemExit as exc:  # --help or an argparse usage error
            return exc.code if isinstance(exc.code, int) else EXIT_USAGE
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"guiagent: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GatewayError, OSError) as exc:
        print(f"guiagent: infrastructure error: {exc}", file=sys.stderr)
        return EXIT_INFRA


if __name__ == "__main__":
    sys.exit(main())
