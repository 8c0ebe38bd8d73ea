"""A chat backend that answers planning prompts with the ground-truth oracle plan."""
from __future__ import annotations

import re

from ..actions import render_commands
from ..gateway import ChatRequest, ChatResponse
from .env import SimEnv
from .tasks import oracle_plan

_NEXT_RE = re.compile(r"next actions\(action_(\d+)")
_RATIONALE_RE = re.compile(r"why the action_(\d+) was made")


def next_index(prompt: str) -> int:
    m = _NEXT_RE.search(prompt)
    return int(m.group(1)) if m else 2


class OracleBackend:
    """Bound to one live environment; the plan is computed when the request arrives.

    The executor snapshots the screen right before calling the backend, so the
    element ids in the plan refer to the screen shown in the prompt.
    """

    def __init__(self, env: SimEnv):
        self.env = env
        self.calls = 0

    def complete(self, req: ChatRequest) -> ChatResponse:
        self.calls += 1
        plan = oracle_plan(self.env)
        text = "### Actions to be Performed\n" + render_commands(plan, start=next_index(req.prompt))
        return ChatResponse(text=text)


def scripted_rationale(req: ChatRequest) -> ChatResponse:
    """Deterministic stand-in for a rationale-writing model."""
    m = _RATIONALE_RE.search(req.prompt)
    k = m.group(1) if m else "?"
    action = re.search(rf"action_{k}: {{name: (\w+)", req.prompt)
    name = action.group(1) if action else "the recorded action"
    return ChatResponse(
        text=f"The expert used {name} as step {k} because it moves the screen closer to the goal; "
        "the element list after the step shows the resulting change."
    )
