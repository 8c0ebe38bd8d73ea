"""The agent loop: observe, propose, execute with re-observation, repeat."""
from __future__ import annotations

import logging
import traceback
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Sequence

from .actions import (
    ActionCommand,
    ActionError,
    ActionRecord,
    CheckedCommand,
    parse_llm_actions,
    record_for,
    render_command,
    start_record,
    validate,
)
from .demos.model import Demonstration
from .gateway import DEFAULT_MODEL, Backend, ChatRequest, GatewayError
from .prompts import PromptOptions, build_caap_prompt
from .sim.env import (
    RUNNING,
    EnvTerminated,
    KeyEvent,
    ModifierDown,
    ModifierUp,
    MouseDown,
    MouseMove,
    MouseUp,
    Primitive,
    PrimitiveRejected,
    SimEnv,
)
from .ui import Observation

log = logging.getLogger(__name__)

SUCCESS = "success"
FAILURE = "failure"
TIMEOUT = "timeout"
ERROR = "error"

Observer = Callable[[SimEnv], Observation]


class ActionRejected(RuntimeError):
    """The environment refused one of the primitives a command decomposed into."""

    def __init__(self, message: str, issued: Sequence[Primitive] = ()):
        super().__init__(message)
        self.issued = list(issued)


@dataclass(frozen=True)
class EpisodeConfig:
    max_rounds: int = 10
    max_actions_per_round: int = 8
    demo_max: int = 5
    use_tools: bool = True
    no_demos: bool = False
    no_cot: bool = False
    strip_rationales: bool = False
    model: str = DEFAULT_MODEL

    def __post_init__(self) -> None:
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.max_actions_per_round < 1:
            raise ValueError("max_actions_per_round must be >= 1")
        if self.demo_max < 0:
            raise ValueError("demo_max must be >= 0")

    def prompt_options(self) -> PromptOptions:
        return PromptOptions(
            use_tools=self.use_tools,
            include_demos=not self.no_demos,
            cot_instructions=not self.no_cot,
            demo_reasons=not self.strip_rationales,
        )

    def to_json(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class EpisodeResult:
    family: str
    seed: int
    outcome: str
    rounds: int
    transcript: list[dict[str, Any]] = field(default_factory=list)
    history: list[ActionRecord] = field(default_factory=list)
    infra_errors: int = 0
    error: str | None = None

    @property
    def success(self) -> bool:
        return self.outcome == SUCCESS


def primitives_for(checked: CheckedCommand) -> list[Primitive]:
    """Mouse/keyboard decomposition of one validated command."""
    name = checked.name
    point = checked.point
    if name in ("click_element", "click_new_point"):
        return [MouseMove(*point), MouseDown(), MouseUp()]
    if name == "control_click_element":
        return [ModifierDown("ctrl"), MouseMove(*point), MouseDown(), MouseUp(), ModifierUp("ctrl")]
    if name == "type_text":
        return [KeyEvent(ch) for ch in checked.command["string_to_type"]]
    if name == "point_element":
        return [MouseMove(*point)]
    if name.startswith("press_control_"):
        return [ModifierDown("ctrl"), KeyEvent(name[-1].lower()), ModifierUp("ctrl")]
    if name == "drag_mouse_hold_down":
        return [MouseMove(*point), MouseDown()]
    if name == "drag_mouse_move":
        return [MouseMove(*point)]
    if name == "drag_mouse_release":
        return [MouseUp()]
    raise ValueError(f"no decomposition for {name}")


def execute_command(env: SimEnv, checked: CheckedCommand) -> list[Primitive]:
    """Apply the primitives of ``checked``; returns the ones actually issued.

    Stops early (without error) once the episode ends mid-command. A modifier
    pressed by the command is always released if the env is still running.
    """
    issued: list[Primitive] = []
    held_mod: str | None = None
    try:
        for p in primitives_for(checked):
            if env.status() != RUNNING:
                break
            try:
                env.apply_primitive(p)
            except PrimitiveRejected as exc:
                raise ActionRejected(f"{checked.name} rejected: {exc}", issued) from None
            issued.append(p)
            if isinstance(p, ModifierDown):
                held_mod = p.name
            elif isinstance(p, ModifierUp):
                held_mod = None
    finally:
        if held_mod is not None and env.status() == RUNNING:
            env.apply_primitive(ModifierUp(held_mod))
    return issued


def halt_check(pre_digest: str, post_obs: Observation) -> bool:
    return post_obs.digest != pre_digest


def _outcome(status: str) -> str:
    return {"success": SUCCESS, "failure": FAILURE}.get(status, TIMEOUT)


def run_episode(
    env: SimEnv,
    observer: Observer | None,
    gateway: Backend,
    config: EpisodeConfig,
    demos: Sequence[Demonstration] = (),
) -> EpisodeResult:
    """Drive one already-reset environment to a terminal status or the round limit."""
    if env.family is None or env.seed is None:
        raise ValueError("environment must be reset before running an episode")
    observe = observer or SimEnv.snapshot
    opts = config.prompt_options()
    shown = list(demos)[: config.demo_max] if opts.include_demos else []
    history: list[ActionRecord] = [start_record()]
    result = EpisodeResult(env.family.name, env.seed, TIMEOUT, 0, history=history)

    try:
        for rnd in range(1, config.max_rounds + 1):
            if env.status() != RUNNING:
                break
            result.rounds = rnd
            obs = observe(env)
            bundle = build_caap_prompt(env.utterance, shown, history, obs, options=opts)
            entry: dict[str, Any] = {
                "family": result.family,
                "seed": result.seed,
                "round": rnd,
                "prompt": bundle.user_text,
                "response": None,
                "parsed_actions": [],
                "executed": [],
                "halted_at": None,
            }
            result.transcript.append(entry)
            req = ChatRequest(bundle.messages(), model=config.model, tool_schemas=bundle.tool_schemas)
            try:
                response = gateway.complete(req)
            except GatewayError as exc:
                result.infra_errors += 1
                entry["error"] = f"{type(exc).__name__}: {exc}"
                entry.update(post_digest=obs.digest, status=env.status())
                continue
            entry["response"] = response.to_json()
            try:
                cmds = parse_llm_actions(response.tool_calls if response.tool_calls else response.text or "")
            except ActionError as exc:
                entry["error"] = f"{type(exc).__name__}: {exc}"
                entry.update(post_digest=obs.digest, status=env.status())
                continue
            cmds = cmds[: config.max_actions_per_round]
            entry["parsed_actions"] = [c.to_json() for c in cmds]
            post = obs
            for i, cmd in enumerate(cmds):
                step = _execute_one(env, cmd, obs, history)
                entry["executed"].append(step)
                post = observe(env)
                if env.status() != RUNNING:
                    break
                if halt_check(obs.digest, post) and i < len(cmds) - 1:
                    entry["halted_at"] = i
                    break
            entry.update(post_digest=post.digest, status=env.status())
        result.outcome = _outcome(env.status())
    except (EnvTerminated, AssertionError, KeyError, ValueError) as exc:
        log.error("episode %s/%s aborted: %s", result.family, result.seed, exc)
        result.outcome = ERROR
        result.error = "".join(traceback.format_exception_only(type(exc), exc)).strip()
    return result


def _execute_one(
    env: SimEnv, cmd: ActionCommand, obs: Observation, history: list[ActionRecord]
) -> dict[str, Any]:
    index = len(history) + 1
    try:
        checked = validate(cmd, obs)
    except ActionError as exc:
        # skipped: the note goes into history so the next prompt can correct it
        history.append(ActionRecord(index, cmd.name, literal_args=dict(cmd.args) or None, error=str(exc)))
        return {"action": render_command(cmd, index), "skipped": True, "error": str(exc)}
    try:
        issued = execute_command(env, checked)
    except ActionRejected as exc:
        history.append(record_for(index, checked, error=str(exc)))
        return {"action": render_command(cmd, index), "primitives": len(exc.issued), "error": str(exc)}
    history.append(record_for(index, checked))
    return {"action": render_command(cmd, index), "primitives": len(issued)}
