"""Action-planning prompt and rationale-generation prompt builders.

Both builders are pure string assembly; the section layout is fixed and the
golden tests pin it byte for byte.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, Sequence

from .actions import (
    ACTION_NAMES,
    ACTIONS,
    START,
    ActionRecord,
    function_schemas,
    render_history,
    render_record,
)
from .demos.model import Demonstration, DemoStore, render_demo
from .ui import Observation, Style, render_observation

PREAMBLE = "Tasks can be completed by applying appropriate actions in sequence."

DEMO_HEADER = "### Expert Demonstrations ###"
DEMO_INTRO = (
    "For example, given below are the demos showing the correct sequence of actions "
    "for each corresponding task:"
)
TRANSITION = "We are solving a similar task."
CONTEXT_INTRO = (
    "You are given the history of actions made correctly by the user so far, "
    "and current screen status which is the result of those actions."
)
TASK_HEADER = "### Task Description ###"
HISTORY_HEADER = "### Action History ###"
SCREEN_HEADER = "### The UI Element List of the Current Screen That You Can Take Next Actions On ###"
CANDIDATES_HEADER = "### Action Type Candidates ###"
INSTRUCTIONS_HEADER = "### Instructions ###"

SECTION_MARKERS = (DEMO_HEADER, TRANSITION, TASK_HEADER, HISTORY_HEADER, SCREEN_HEADER, INSTRUCTIONS_HEADER)

FORMAT_EXAMPLE = "Action_{k}=(Action: functions.some_function_name, Argument: {{property_name: property_val}})"

DEFAULT_GUIDELINES = (
    "- MAKE SURE that when you recommend actions that need to interact with UI elements, "
    "the UI elements MUST BE in the current screen.",
    "- MAKE SURE that when satisfying the task completion conditions, click the 'Submit' "
    "button to finish.",
    "- MAKE SURE that even if you do not find a suitable action, return the most plausible one.",
    "- MAKE SURE that since texts in elements are extracted by recognizing with OCR, solve "
    "the given task considering that some mis-typos could exist.",
)

RATIONALE_INTRO = (
    "Below is a record of a successful completion of the given task, demonstrated by an expert.\n"
    '(Note: The trainee has added the "reason" part for each action in the record, but it may '
    "not accurately describe the reasoning used by the expert who performed the task. "
    "Do not assume that the written reason is correct.)"
)


@dataclass(frozen=True)
class GuidelineSet:
    lines: tuple[str, ...] = DEFAULT_GUIDELINES

    def render(self) -> str:
        return "\n".join(self.lines)


@dataclass(frozen=True)
class PromptBundle:
    user_text: str
    system_text: str | None = None
    tool_schemas: list[dict[str, Any]] | None = None

    def messages(self) -> list[dict[str, str]]:
        msgs = []
        if self.system_text:
            msgs.append({"role": "system", "content": self.system_text})
        msgs.append({"role": "user", "content": self.user_text})
        return msgs


@dataclass(frozen=True)
class PromptOptions:
    """Ablation switches: drop demos, drop the reasoning instructions, strip demo rationales."""

    use_tools: bool = True
    include_demos: bool = True
    cot_instructions: bool = True
    demo_reasons: bool = True
    allowed_actions: tuple[str, ...] = ACTION_NAMES
    guidelines: GuidelineSet = field(default_factory=GuidelineSet)


ABLATION_ARMS: Mapping[str, PromptOptions] = {
    "full": PromptOptions(),
    "demos-without-cot": PromptOptions(cot_instructions=False, demo_reasons=False),
    "cot-without-demos": PromptOptions(include_demos=False),
    "neither": PromptOptions(include_demos=False, cot_instructions=False, demo_reasons=False),
}


def _instructions(last: int, cot: bool) -> str:
    nxt = last + 1
    ask = [
        f"What should be the next actions(action_{nxt}, action_{nxt + 1}, ...) that can be "
        "performed on the current screen?",
        "If there is an action that can complete the task, perform it immediately. "
        "It's better if you can complete the task with fewer actions.",
    ]
    fmt = FORMAT_EXAMPLE.format(k=nxt)
    if cot:
        ask += [
            "Your answer must be composed of the following five sections:",
            f"First, explain in detail what has been done so far up to action_{last} and analyze "
            "why these steps were needed.",
            "Do not assume that the user could have made a mistake.",
            "",
            "Secondly, describe every single screen component that contains information that helps "
            "user solve the task or that needs to be interacted with. Explain about the components "
            "step by step in a detailed manner considering the given task.",
            "When the task deals with a list of items (e.g. finding the size of a group, identifying "
            "N-th item in order, etc.), you must include the full iteration of each and every items, "
            "like this: (1)first_item, (2)second_item, ..., (N)N-th_item.",
            "",
            "Thirdly, describe what needs to be done to complete the task, detailing each action from "
            "start to finish. Then, identify which steps can currently be performed based on the UI "
            "elements visible on the screen, and mention the ID of these elements.",
            "If there is a demo available, first describe the sequence of actions demonstrated, then "
            "link these actions to the steps in your plan before outlining the complete action plan.",
            "",
            f"Lastly, each action must be in the form of {fmt}.",
        ]
    else:
        ask.append(f"Each action must be in the form of {fmt}.")
    ask += [
        "Return the actions that need to be performed on the current screen.",
        "The actions must be separated by new line characters.",
        "In case there are three actions to be performed, your response will be in the following form:",
        "",
        *(FORMAT_EXAMPLE.format(k=nxt + i) for i in range(3)),
    ]
    return "\n".join(ask)


def _candidates(allowed: Iterable[str]) -> str:
    allowed = set(allowed)
    lines = []
    for name, (description, required) in ACTIONS.items():
        if name in allowed:
            lines.append(f"- {name}({', '.join(required)}): {description}")
    return "\n".join(lines)


def build_caap_prompt(
    task: str,
    demos: Sequence[Demonstration],
    history: Sequence[ActionRecord],
    obs: Observation,
    guidelines: GuidelineSet | None = None,
    use_tools: bool = True,
    options: PromptOptions | None = None,
) -> PromptBundle:
    opts = options or PromptOptions(use_tools=use_tools)
    if guidelines is not None:
        opts = replace(opts, guidelines=guidelines)
    if not history or history[0].name != START:
        raise ValueError("history must begin with the start record")

    blocks = [PREAMBLE]
    shown = list(demos) if opts.include_demos else []
    if shown:
        rendered = [render_demo(d, i, opts.demo_reasons) for i, d in enumerate(shown, start=1)]
        blocks.append("\n".join([DEMO_HEADER, DEMO_INTRO, *rendered]))
        blocks.append(f"{TRANSITION}\n{CONTEXT_INTRO}")
    else:
        blocks.append(CONTEXT_INTRO)
    blocks.append(f"{TASK_HEADER}\n{task}")
    blocks.append(f"{HISTORY_HEADER}\n{render_history(history, include_reasons=True)}")
    blocks.append(f"{SCREEN_HEADER}\n{render_observation(obs, Style.CURRENT_SCREEN)}")
    if not opts.use_tools:
        blocks.append(f"{CANDIDATES_HEADER}\n{_candidates(opts.allowed_actions)}")
    blocks.append(
        f"{INSTRUCTIONS_HEADER}\n{_instructions(history[-1].index, opts.cot_instructions)}"
        f"\n\n{opts.guidelines.render()}"
    )
    tools = function_schemas(opts.allowed_actions) if opts.use_tools else None
    return PromptBundle(user_text="\n\n".join(blocks), tool_schemas=tools)


def build_rationale_prompt(
    task: str,
    history: Sequence[ActionRecord],
    k: int,
    before: Observation,
    after: Observation,
) -> str:
    """Prompt asking the model to explain why action ``k`` of a demonstration was taken.

    Reasons already attached to actions before ``k`` stay in the history; reasons
    from ``k`` onward are withheld.
    """
    if k < 2:
        raise ValueError("rationales are only generated for real actions (k >= 2)")
    if k > len(history):
        raise ValueError(f"action_{k} is beyond the {len(history)}-record history")
    if history[0].name != START:
        raise ValueError("history must begin with the start record")
    lines = [render_record(r, include_reason=r.index < k) for r in history]
    blocks = [
        PREAMBLE,
        RATIONALE_INTRO,
        f"TASK:\n{task}",
        "Action History:\n" + "\n".join(lines),
        f"We want to explain to a trainee why the action_{k} was made.",
        f"Before the action_{k}, the status of the computer screen was as the following:\n"
        + render_observation(before, Style.DEMO_STATE),
        f"After the action_{k}, the status of the computer screen was as the following:\n"
        + render_observation(after, Style.DEMO_STATE, note=False),
        f"First, explain how the action_{k} (both its type and its arguments) was chosen by the "
        "expert, and why it was necessary.\n"
        "Since the trainee cannot view the screen, always provide a detailed description as "
        "specified whenever you refer to a screen component in your response.\n"
        "Second, describe what happened after the action, as shown on the screen.",
        "Answer in one paragraph.",
    ]
    return "\n\n".join(blocks)


def select_demos(task_family: str, store: DemoStore | None, max_k: int) -> list[Demonstration]:
    if max_k < 0:
        raise ValueError("max_k must be >= 0")
    if store is None:
        return []
    return store.get(task_family)[:max_k]
