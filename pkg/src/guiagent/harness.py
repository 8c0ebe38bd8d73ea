"""Batch evaluation over task families and seeds, with success-rate reports."""
from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

from .demos.model import DemoStore
from .executor import SUCCESS, EpisodeConfig, EpisodeResult, run_episode
from .gateway import (
    Backend,
    Cassette,
    HttpBackend,
    RecordingBackend,
    ReplayBackend,
)
from .prompts import select_demos
from .sim.env import SimEnv
from .sim.oracle import OracleBackend
from .sim.tasks import DEFAULT_FAMILIES

log = logging.getLogger(__name__)

TEST_SEEDS = range(0, 1000)
BACKENDS = ("http", "scripted", "replay", "record")


@dataclass(frozen=True)
class EvalConfig:
    families: tuple[str, ...] = DEFAULT_FAMILIES
    seeds: tuple[int, ...] | None = None
    episodes_per_task: int = 50
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    backend: str = "scripted"
    endpoint: str | None = None
    api_key_env: str = "OPENAI_API_KEY"
    record_source: str = "scripted"
    cassette: str | None = None
    demos_dir: str | None = None
    parallel: int = 1
    out: str | None = None
    strict_split: bool = True

    def __post_init__(self) -> None:
        if not self.families:
            raise ValueError("at least one task family is required")
        if self.episodes_per_task < 1:
            raise ValueError("episodes per task must be >= 1")
        if self.parallel < 1:
            raise ValueError("parallelism must be >= 1")
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}")
        if self.record_source not in ("http", "scripted"):
            raise ValueError("record source must be http or scripted")
        if self.backend in ("replay", "record") and not self.cassette:
            raise ValueError(f"--backend {self.backend} needs a cassette path")
        if (self.backend == "http" or (self.backend == "record" and self.record_source == "http")) and not self.endpoint:
            raise ValueError("the http backend needs an endpoint")
        if self.strict_split and any(s not in TEST_SEEDS for s in self.seed_list):
            raise ValueError(f"evaluation seeds must lie in {TEST_SEEDS.start}-{TEST_SEEDS.stop - 1}")

    @property
    def seed_list(self) -> tuple[int, ...]:
        if self.seeds is not None:
            return tuple(self.seeds)
        return tuple(range(self.episodes_per_task))

    def echo(self) -> dict[str, Any]:
        """Config fields that determine results; paths and worker count are left out."""
        return {
            "families": list(self.families),
            "seeds": list(self.seed_list),
            "episode": self.episode.to_json(),
            "backend": self.backend,
            "endpoint": self.endpoint,
            "demos": bool(self.demos_dir),
        }


@dataclass(frozen=True)
class FamilyStats:
    family: str
    episodes: int
    successes: int
    outcomes: Mapping[str, int]

    @property
    def sr(self) -> Fraction:
        return Fraction(self.successes, self.episodes)


@dataclass
class EvalReport:
    families: list[FamilyStats]
    config: dict[str, Any]
    infra_errors: int = 0
    wall_time: float = 0.0

    @property
    def average(self) -> Fraction:
        return sum((f.sr for f in self.families), Fraction(0)) / len(self.families)

    def to_json(self) -> dict[str, Any]:
        avg = self.average
        return {
            "families": [
                {
                    "family": f.family,
                    "episodes": f.episodes,
                    "successes": f.successes,
                    "sr": f"{float(f.sr):.3f}",
                    "sr_exact": [f.sr.numerator, f.sr.denominator],
                    "outcomes": dict(sorted(f.outcomes.items())),
                }
                for f in self.families
            ],
            "average": {"sr": f"{float(avg):.3f}", "sr_exact": [avg.numerator, avg.denominator]},
            "infra_errors": self.infra_errors,
            "config": self.config,
        }

    def to_text(self) -> str:
        width = max(len("average"), *(len(f.family) for f in self.families))
        lines = [f"{'family':<{width}}  {'episodes':>8}  {'successes':>9}  {'SR':>5}"]
        for f in self.families:
            lines.append(f"{f.family:<{width}}  {f.episodes:>8}  {f.successes:>9}  {float(f.sr):>5.3f}")
        lines.append(f"{'average':<{width}}  {'':>8}  {'':>9}  {float(self.average):>5.3f}")
        return "\n".join(lines)


def summarize(results: Iterable[EpisodeResult], config: Mapping[str, Any] | None = None) -> EvalReport:
    by_family: dict[str, list[EpisodeResult]] = {}
    for r in results:
        by_family.setdefault(r.family, []).append(r)
    if not by_family:
        raise ValueError("cannot summarize an empty result set")
    stats = []
    for family in sorted(by_family):
        rows = by_family[family]
        outcomes: dict[str, int] = {}
        for r in rows:
            outcomes[r.outcome] = outcomes.get(r.outcome, 0) + 1
        stats.append(FamilyStats(family, len(rows), outcomes.get(SUCCESS, 0), outcomes))
    infra = sum(r.infra_errors for rows in by_family.values() for r in rows)
    return EvalReport(stats, dict(config or {}), infra)


GatewayFactory = Callable[[SimEnv], Backend]


def gateway_factory(config: EvalConfig) -> tuple[GatewayFactory, Cassette | None]:
    """Per-episode gateway constructor plus the cassette to save afterwards (record mode)."""
    if config.backend == "scripted":
        return OracleBackend, None
    if config.backend == "http":
        http = HttpBackend(config.endpoint, api_key_env=config.api_key_env)
        return (lambda env: http), None
    cassette = Cassette.load(config.cassette)
    if config.backend == "replay":
        replay = ReplayBackend(cassette)
        return (lambda env: replay), None
    if config.record_source == "http":
        http = HttpBackend(config.endpoint, api_key_env=config.api_key_env)
        return (lambda env: RecordingBackend(http, cassette)), cassette
    return (lambda env: RecordingBackend(OracleBackend(env), cassette)), cassette


def transcript_path(out: str | os.PathLike, family: str, seed: int) -> Path:
    return Path(out) / "episodes" / family / f"{seed:04d}.jsonl"


def write_transcript(out: str | os.PathLike, result: EpisodeResult) -> Path:
    path = transcript_path(out, result.family, result.seed)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(entry, ensure_ascii=False, sort_keys=True) for entry in result.transcript]
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def run_eval(config: EvalConfig, factory: GatewayFactory | None = None) -> tuple[EvalReport, list[EpisodeResult]]:
    started = time.monotonic()
    cassette = None
    if factory is None:
        factory, cassette = gateway_factory(config)
    store = DemoStore.load(config.demos_dir) if config.demos_dir else None
    # one template for every family: the same options, only the demo list differs
    demos = {f: select_demos(f, store, config.episode.demo_max) for f in config.families}
    jobs = [(f, s) for f in config.families for s in config.seed_list]

    def one(job: tuple[str, int]) -> EpisodeResult:
        family, seed = job
        env = SimEnv(family, seed)
        result = run_episode(env, None, factory(env), config.episode, demos[family])
        if config.out:
            write_transcript(config.out, result)
        return result

    if config.parallel == 1:
        results = [one(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=config.parallel) as pool:
            results = list(pool.map(one, jobs))
    results.sort(key=lambda r: (r.family, r.seed))
    report = summarize(results, config.echo())
    report.wall_time = time.monotonic() - started
    if cassette is not None:
        cassette.save()
    if config.out:
        write_report(config.out, report)
    return report, results


def write_report(out: str | os.PathLike, report: EvalReport) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report.to_json(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    (out / "report.txt").write_text(report.to_text() + "\n", encoding="utf-8")
    meta = {"wall_time_s": round(report.wall_time, 3)}
    (out / "run_meta.json").write_text(json.dumps(meta) + "\n", encoding="utf-8")


def load_transcript(path: str | os.PathLike) -> list[dict[str, Any]]:
    return [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]


def replay_transcript(
    rounds: Sequence[Mapping[str, Any]], config: EpisodeConfig | None = None
) -> tuple[EpisodeResult, list[str]]:
    """Re-execute recorded responses against a fresh env; returns the rerun and any divergences."""
    from .gateway import ChatResponse, GatewayError, ScriptedBackend

    if not rounds:
        raise ValueError("empty transcript")
    family, seed = rounds[0]["family"], rounds[0]["seed"]
    queue: list[Any] = []
    for entry in rounds:
        if entry.get("response") is None:
            queue.append(GatewayError(entry.get("error", "recorded gateway failure")))
        else:
            queue.append(ChatResponse.from_json(entry["response"]))
    cfg = config or EpisodeConfig(max_rounds=len(rounds))
    env = SimEnv(family, seed)
    rerun = run_episode(env, None, ScriptedBackend(queue), cfg)
    problems = []
    if len(rerun.transcript) != len(rounds):
        problems.append(f"round count {len(rerun.transcript)} != recorded {len(rounds)}")
    for old, new in zip(rounds, rerun.transcript):
        for key in ("post_digest", "status", "halted_at"):
            if old.get(key) != new.get(key):
                problems.append(f"round {old['round']}: {key} {new.get(key)!r} != recorded {old.get(key)!r}")
    return rerun, problems
