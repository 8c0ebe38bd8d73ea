"""Scripted demonstration capture and rationale augmentation."""
from __future__ import annotations

import logging
from dataclasses import replace
from typing import Callable

from ..actions import START_REASON, ActionCommand, ActionRecord, record_for, start_record, validate
from ..gateway import DEFAULT_MODEL, Backend, ChatRequest, GatewayError
from ..prompts import build_rationale_prompt
from ..sim.env import FAILURE, RUNNING, SUCCESS, SimEnv
from ..sim.tasks import oracle_plan
from .model import Demonstration, DemoStep

log = logging.getLogger(__name__)

DEMO_SEEDS = range(3000, 4000)
MAX_DEMO_STEPS = 40

Oracle = Callable[[SimEnv], list[ActionCommand]]


class OracleFailed(RuntimeError):
    pass


def script_demo(
    family: str,
    seed: int,
    oracle: Oracle | None = None,
    strict_split: bool = True,
) -> Demonstration:
    """Run the oracle one action at a time, capturing the screen before and after each."""
    from ..executor import ActionRejected, execute_command

    if strict_split and seed not in DEMO_SEEDS:
        raise ValueError(f"demo seed {seed} is outside {DEMO_SEEDS.start}-{DEMO_SEEDS.stop - 1}")
    policy = oracle or oracle_plan
    env = SimEnv()
    utterance, obs = env.reset(family, seed)
    steps = [DemoStep(obs, start_record(START_REASON), obs)]
    while env.status() == RUNNING:
        if len(steps) > MAX_DEMO_STEPS:
            raise OracleFailed(f"{family}/{seed}: no success after {MAX_DEMO_STEPS} actions")
        plan = policy(env)
        if not plan:
            raise OracleFailed(f"{family}/{seed}: oracle returned an empty plan")
        checked = validate(plan[0], obs)
        try:
            execute_command(env, checked)
        except ActionRejected as exc:
            raise OracleFailed(f"{family}/{seed}: {exc}") from None
        post = env.snapshot()
        steps.append(DemoStep(obs, record_for(len(steps) + 1, checked), post))
        obs = post
    if env.status() != SUCCESS:
        raise OracleFailed(f"{family}/{seed}: oracle ended with {env.status()}")
    return Demonstration(family, seed, utterance, tuple(steps))


def _paragraph(text: str) -> str:
    return " ".join(text.split())


def augment_rationales(
    demo: Demonstration, gateway: Backend, model: str = DEFAULT_MODEL
) -> Demonstration:
    """Ask the model why each non-start action was taken and attach the answers.

    Steps run in order because the prompt for step k shows the reasons already
    written for earlier steps. A gateway failure flags the step and moves on.
    """
    steps = list(demo.steps)
    steps[0] = replace(steps[0], action=replace(steps[0].action, reason=START_REASON), flagged=False)
    for i in range(1, len(steps)):
        step = steps[i]
        k = step.action.index
        records: list[ActionRecord] = [s.action for s in steps]
        prompt = build_rationale_prompt(demo.utterance, records, k, step.pre, step.post)
        req = ChatRequest([{"role": "user", "content": prompt}], model=model)
        try:
            response = gateway.complete(req)
        except GatewayError as exc:
            log.warning("rationale for %s/%s step %d failed: %s", demo.family, demo.seed, k, exc)
            steps[i] = replace(step, action=replace(step.action, reason=None), flagged=True)
            continue
        reason = _paragraph(response.text or "")
        if not reason:
            steps[i] = replace(step, action=replace(step.action, reason=None), flagged=True)
            continue
        steps[i] = replace(step, action=replace(step.action, reason=reason), flagged=False)
    return replace(demo, steps=tuple(steps))
