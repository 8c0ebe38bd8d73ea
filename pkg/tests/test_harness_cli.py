from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

import pytest

from guiagent.cli import main, parse_seeds, parse_tasks, UsageError
from guiagent.demos.model import DemoStore
from guiagent.executor import EpisodeConfig, EpisodeResult
from guiagent.gateway import ScriptedBackend, TransportError
from guiagent.harness import (
    EvalConfig,
    load_transcript,
    replay_transcript,
    run_eval,
    summarize,
    transcript_path,
)
from guiagent.sim import DEFAULT_FAMILIES
from guiagent.sim.oracle import OracleBackend


def results(family: str, wins: int, total: int) -> list[EpisodeResult]:
    return [EpisodeResult(family, s, "success" if s < wins else "failure", 1) for s in range(total)]


def test_summarize_average_is_mean_of_family_rates() -> None:
    report = summarize(results("a", 10, 10) + results("b", 5, 10))
    assert report.average == Fraction(3, 4)
    data = report.to_json()
    assert data["average"]["sr"] == "0.750"
    assert [f["sr"] for f in data["families"]] == ["1.000", "0.500"]


def test_summarize_rounding_and_exact_fraction() -> None:
    report = summarize(results("a", 47, 50))
    fam = report.to_json()["families"][0]
    assert fam["sr"] == "0.940" and fam["sr_exact"] == [47, 50]
    assert fam["outcomes"] == {"failure": 3, "success": 47}


def test_summarize_empty_rejected() -> None:
    with pytest.raises(ValueError):
        summarize([])


def test_text_and_json_agree() -> None:
    report = summarize(results("b", 1, 3) + results("a", 2, 3))
    text = report.to_text().splitlines()
    data = report.to_json()
    assert [line.split()[0] for line in text[1:]] == ["a", "b", "average"]
    for line, fam in zip(text[1:], data["families"]):
        assert line.split()[-1] == fam["sr"]
    assert text[-1].split()[-1] == data["average"]["sr"]


def test_eval_config_validation() -> None:
    with pytest.raises(ValueError):
        EvalConfig(families=())
    with pytest.raises(ValueError):
        EvalConfig(parallel=0)
    with pytest.raises(ValueError):
        EvalConfig(backend="replay")
    with pytest.raises(ValueError):
        EvalConfig(backend="http")
    with pytest.raises(ValueError):
        EvalConfig(seeds=(3000,))
    assert EvalConfig(seeds=(3000,), strict_split=False).seed_list == (3000,)
    assert EvalConfig(episodes_per_task=3).seed_list == (0, 1, 2)


def test_run_eval_writes_outputs(tmp_path: Path) -> None:
    cfg = EvalConfig(families=("click-test", "enter-text"), episodes_per_task=3, out=str(tmp_path))
    report, res = run_eval(cfg)
    assert report.average == 1
    assert [(r.family, r.seed) for r in res] == [(f, s) for f in ("click-test", "enter-text") for s in range(3)]
    data = json.loads((tmp_path / "report.json").read_text())
    assert "wall_time" not in json.dumps(data) and "parallel" not in json.dumps(data)
    assert "wall_time_s" in json.loads((tmp_path / "run_meta.json").read_text())
    rounds = load_transcript(transcript_path(tmp_path, "enter-text", 2))
    assert [r["round"] for r in rounds] == list(range(1, len(rounds) + 1))
    assert rounds[-1]["status"] == "success"


def test_gateway_failures_are_counted() -> None:
    cfg = EvalConfig(families=("click-test",), episodes_per_task=2)

    def factory(env):
        return ScriptedBackend([TransportError("down")], fallback=OracleBackend(env).complete)

    report, _ = run_eval(cfg, factory)
    assert report.infra_errors == 2 and report.average == 1


def test_replay_detects_tampering(tmp_path: Path) -> None:
    cfg = EvalConfig(families=("login-user",), seeds=(4,), out=str(tmp_path))
    run_eval(cfg)
    rounds = load_transcript(transcript_path(tmp_path, "login-user", 4))
    _, problems = replay_transcript(rounds)
    assert problems == []
    rounds[0]["post_digest"] = "0" * 64
    _, problems = replay_transcript(rounds)
    assert problems and "post_digest" in problems[0]


def test_parse_helpers() -> None:
    assert parse_seeds("0-3,7,2") == (0, 1, 2, 3, 7)
    for bad in ("", "x", "5-1"):
        with pytest.raises(UsageError):
            parse_seeds(bad)
    assert parse_tasks("all") == DEFAULT_FAMILIES
    with pytest.raises(UsageError):
        parse_tasks("click-test,bogus")


def test_cli_run_eval_ok(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    code = main(["run-eval", "--tasks", "click-test,choose-list", "--seeds", "0-4", "--out", str(tmp_path)])
    assert code == 0
    assert "average" in capsys.readouterr().out
    assert json.loads((tmp_path / "report.json").read_text())["average"]["sr"] == "1.000"


def test_cli_usage_errors(tmp_path: Path) -> None:
    assert main([]) == 1
    assert main(["run-eval", "--tasks", "bogus", "--out", str(tmp_path)]) == 1
    assert main(["run-eval", "--seeds", "5000", "--out", str(tmp_path)]) == 1
    assert main(["run-eval", "--backend", "replay", "--out", str(tmp_path)]) == 1
    assert main(["run-eval", "--max-rounds", "nope"]) == 1


def test_cli_missing_cassette_is_infra_error(tmp_path: Path) -> None:
    code = main(
        ["run-eval", "--tasks", "click-test", "--seeds", "0", "--backend", "replay",
         "--cassette", str(tmp_path / "missing.json"), "--out", str(tmp_path)]
    )
    assert code == 2


def test_cli_unreachable_endpoint_is_infra_error(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("OPENAI_API_KEY", "sk-test")
    monkeypatch.setattr("guiagent.gateway.time.sleep", lambda s: None)
    code = main(
        ["run-eval", "--tasks", "click-test", "--seeds", "0", "--max-rounds", "1", "--backend", "http",
         "--endpoint", "http://127.0.0.1:9/v1", "--out", str(tmp_path)]
    )
    assert code == 2


def test_cli_config_file(tmp_path: Path) -> None:
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"tasks": ["click-test"], "seeds": "0-2", "out": str(tmp_path / "o")}))
    assert main(["run-eval", "--config", str(cfg)]) == 0
    data = json.loads((tmp_path / "o" / "report.json").read_text())
    assert data["config"]["seeds"] == [0, 1, 2]
    assert main(["run-eval", "--config", str(cfg), "--seeds", "5"]) == 0
    assert json.loads((tmp_path / "o" / "report.json").read_text())["config"]["seeds"] == [5]
    cfg.write_text(json.dumps({"api_key": "sk-nope"}))
    assert main(["run-eval", "--config", str(cfg)]) == 1
    cfg.write_text(json.dumps({"colour": "red"}))
    assert main(["run-eval", "--config", str(cfg)]) == 1


def test_cli_record_and_replay(tmp_path: Path) -> None:
    cassette = str(tmp_path / "c.json")
    base = ["run-eval", "--tasks", "drag-box", "--seeds", "0-2", "--cassette", cassette]
    assert main(base + ["--backend", "record", "--out", str(tmp_path / "rec")]) == 0
    assert main(base + ["--backend", "replay", "--out", str(tmp_path / "rep")]) == 0
    for seed in range(3):
        a = transcript_path(tmp_path / "rec", "drag-box", seed).read_bytes()
        b = transcript_path(tmp_path / "rep", "drag-box", seed).read_bytes()
        assert a == b
    assert main(["replay", str(tmp_path / "rep" / "episodes")]) == 0


def test_cli_replay_divergence_exit_code(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["run-eval", "--tasks", "click-test", "--seeds", "1", "--out", str(tmp_path)]) == 0
    path = transcript_path(tmp_path, "click-test", 1)
    rounds = load_transcript(path)
    rounds[0]["status"] = "failure"
    path.write_text("".join(json.dumps(r) + "\n" for r in rounds))
    assert main(["replay", str(path)]) == 3
    assert "DIVERGED" in capsys.readouterr().out
    assert main(["replay", str(tmp_path / "nope.jsonl")]) == 1


def test_cli_show_prompt(capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["show-prompt", "--task", "choose-list", "--seed", "3"]) == 0
    out = capsys.readouterr().out
    assert "next actions(action_2" in out
    assert main(["show-prompt", "--task", "click-test", "--round", "5"]) == 1


def test_cli_demo_pipeline(tmp_path: Path) -> None:
    demos = tmp_path / "demos"
    assert main(["record-demos", "--tasks", "click-test,choose-list", "--seeds", "3000-3002", "--out", str(demos)]) == 0
    assert main(["record-demos", "--seeds", "5", "--out", str(demos)]) == 1
    store = DemoStore.load(demos)
    assert len(store.get("choose-list")) == 3
    assert all(s.reason is None for d in store for s in d.steps[1:])
    assert main(["augment-demos", "--demos", str(demos)]) == 0
    store = DemoStore.load(demos)
    assert all(s.reason for d in store for s in d.steps)
    out = tmp_path / "run"
    args = ["run-eval", "--tasks", "choose-list", "--seeds", "0-1", "--demos", str(demos), "--out", str(out)]
    assert main(args) == 0
    prompt = load_transcript(transcript_path(out, "choose-list", 0))[0]["prompt"]
    assert "demo_action_" in prompt and "reason:" in prompt


def test_cli_build_dataset(tmp_path: Path) -> None:
    out = tmp_path / "ds"
    assert main(["build-dataset", "--tasks", "login-user", "--seeds", "0-1", "--screens", "2", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest) == 6
    assert all((out / m["image_path"]).exists() for m in manifest)


def test_episode_config_echo_changes_with_ablation() -> None:
    a = EvalConfig(episode=EpisodeConfig()).echo()
    b = EvalConfig(episode=EpisodeConfig(no_cot=True)).echo()
    assert a != b and a["episode"]["no_cot"] is False
