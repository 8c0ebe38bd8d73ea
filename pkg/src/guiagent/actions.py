"""Action vocabulary, function-calling schemas, response parsing and history rendering."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from .ui import Observation, Style, UiElement, describe

PARAMS: dict[str, tuple[str, str]] = {
    "element_id": (
        "integer",
        "The id number (ranged from 1 to N) of the screen element to act on. "
        "A list of elements will be provided with the corresponding id numbers.",
    ),
    "x": ("integer", "The x coordinate of the click location."),
    "y": ("integer", "The y coordinate of the click location."),
    "string_to_type": ("string", "The text to type"),
}

# name -> (description, required parameters); descriptions are sent to the model verbatim
ACTIONS: dict[str, tuple[str, tuple[str, ...]]] = {
    "click_element": (
        "This action moves the mouse pointer to a screen element and performs a left-click "
        "to activate that element.",
        ("element_id",),
    ),
    "click_new_point": (
        "This action moves the mouse pointer to a screen location and performs a left-click "
        "on the location.",
        ("x", "y"),
    ),
    "control_click_element": (
        "This action click on a screen element while holding down the 'control' modifier key. "
        "It is used to select multiple elements.",
        ("element_id",),
    ),
    "type_text": (
        "This action makes keyboard typing actions to enter the text, for example, into the "
        "'input_field'-type screen element. Before typing the text, the element on which enter "
        "the text must be focused.",
        ("string_to_type",),
    ),
    "point_element": (
        "This action moves the mouse pointer to on top of an UI element without clicking it. "
        "This sometimes activates the element and reveals hidden menus or scrollbar.",
        ("element_id",),
    ),
    "press_control_A": (
        "This is 'Select All'. All text in the activated text field is highlighted.",
        (),
    ),
    "press_control_C": (
        "This is 'Copy'. Highlighted text is copied to the clipboard.",
        (),
    ),
    "press_control_V": (
        "This is 'Paste'. Text stored in the clipboard is pasted into the selected area.",
        (),
    ),
    "drag_mouse_hold_down": (
        "This action initiates the drag action sequence by clicking and holding down the left "
        "mouse button. It is used to move objects on the screenor to highlight a block of text. "
        "This action marks the starting point of the dragging move.",
        ("x", "y"),
    ),
    "drag_mouse_move": (
        "This action is the middle of the drag action sequence. It moves the mouse pointer "
        "while holding down the left mouse button. When used to move an object on the screen, "
        "the object will be dragged to the current mouse location. When used to highlight text, "
        "it will highlight up to the current mouse location.",
        ("x", "y"),
    ),
    "drag_mouse_release": (
        "This action marks the end of the drag action sequence. It releases the left mouse "
        "button, indicating that the drag move is finished. starting point of the dragging move.",
        (),
    ),
}

ACTION_NAMES = tuple(ACTIONS)
ELEMENT_ACTIONS = frozenset(n for n, (_, req) in ACTIONS.items() if "element_id" in req)
START = "start"
START_REASON = "Initiating the task."


class ActionError(ValueError):
    """Base for every proposal/validation failure; ``line`` holds the offending text."""

    def __init__(self, message: str, line: str | None = None):
        super().__init__(message)
        self.line = line


class EmptyProposal(ActionError):
    pass


class UnknownAction(ActionError):
    def __init__(self, name: str, line: str | None = None):
        super().__init__(f"unknown action {name!r}", line)
        self.name = name


class MalformedArgument(ActionError):
    pass


class IndexDisorder(ActionError):
    pass


class StaleElementId(ActionError):
    pass


class OutOfBoundsPoint(ActionError):
    pass


def _coerce(action: str, params: Mapping[str, Any], line: str | None) -> dict[str, Any]:
    if action not in ACTIONS:
        raise UnknownAction(action, line)
    required = ACTIONS[action][1]
    missing = [p for p in required if p not in params]
    extra = [p for p in params if p not in required]
    if missing or extra:
        raise MalformedArgument(
            f"{action}: missing {missing or '-'}, unexpected {extra or '-'}", line
        )
    out: dict[str, Any] = {}
    for name in required:
        kind = PARAMS[name][0]
        value = params[name]
        if kind == "integer":
            if isinstance(value, bool):
                raise MalformedArgument(f"{action}.{name} must be an integer", line)
            if isinstance(value, str):
                if not re.fullmatch(r"\s*[+-]?\d{1,12}\s*", value):
                    raise MalformedArgument(f"{action}.{name}={value!r} is not an integer", line)
                value = int(value)
            elif isinstance(value, float) and value.is_integer() and abs(value) < 1e12:
                value = int(value)
            elif not isinstance(value, int):
                raise MalformedArgument(f"{action}.{name}={value!r} is not an integer", line)
            if name == "element_id" and value < 1:
                raise MalformedArgument(f"element_id must be >= 1, got {value}", line)
        else:
            if isinstance(value, (int, float)) and not isinstance(value, bool):
                value = str(value)
            if not isinstance(value, str):
                raise MalformedArgument(f"{action}.{name} must be a string", line)
        out[name] = value
    return out


@dataclass(frozen=True)
class ActionCommand:
    name: str
    args: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "args", _coerce(self.name, dict(self.args), None))

    def __getitem__(self, key: str) -> Any:
        return self.args[key]

    def to_json(self) -> dict[str, Any]:
        return {"name": self.name, "args": dict(self.args)}

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "ActionCommand":
        return cls(data["name"], data.get("args") or {})


@dataclass(frozen=True)
class ToolCall:
    name: str
    arguments: str | Mapping[str, Any]


@dataclass(frozen=True)
class CheckedCommand:
    command: ActionCommand
    target: UiElement | None = None
    point: tuple[int, int] | None = None

    @property
    def name(self) -> str:
        return self.command.name


@dataclass(frozen=True)
class ActionRecord:
    index: int
    name: str
    element_snapshot: UiElement | None = None
    literal_args: Mapping[str, Any] | None = None
    reason: str | None = None
    error: str | None = None

    def to_json(self) -> dict[str, Any]:
        data: dict[str, Any] = {"name": self.name}
        if self.element_snapshot is not None:
            data["element_snapshot"] = self.element_snapshot.to_json()
        if self.literal_args:
            data["args"] = dict(self.literal_args)
        if self.reason is not None:
            data["reason"] = self.reason
        if self.error is not None:
            data["error"] = self.error
        return data

    @classmethod
    def from_json(cls, data: Mapping[str, Any], index: int) -> "ActionRecord":
        snap = data.get("element_snapshot")
        return cls(
            index=index,
            name=data["name"],
            element_snapshot=UiElement.from_json(snap) if snap else None,
            literal_args=data.get("args"),
            reason=data.get("reason"),
            error=data.get("error"),
        )


def start_record(reason: str | None = None) -> ActionRecord:
    return ActionRecord(1, START, reason=reason)


def function_schemas(allowed: Iterable[str] = ACTION_NAMES) -> list[dict[str, Any]]:
    allowed = set(allowed)
    unknown = sorted(allowed - set(ACTIONS))
    if unknown:
        raise UnknownAction(unknown[0])
    schemas = []
    for name, (description, required) in ACTIONS.items():
        if name not in allowed:
            continue
        props = {p: {"type": PARAMS[p][0], "description": PARAMS[p][1]} for p in required}
        schemas.append(
            {
                "name": name,
                "description": description,
                "parameters": {"type": "object", "properties": props, "required": list(required)},
            }
        )
    return schemas


def _render_value(value: Any) -> str:
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    return str(value)


def render_command(cmd: ActionCommand, k: int) -> str:
    props = ", ".join(f"{key}: {_render_value(v)}" for key, v in cmd.args.items())
    return f"Action_{k}=(Action: functions.{cmd.name}, Argument: {{{props}}})"


def render_commands(cmds: Sequence[ActionCommand], start: int = 2) -> str:
    return "\n".join(render_command(c, start + i) for i, c in enumerate(cmds))


_LINE_RE = re.compile(
    r"Action_(\d+)\s*=\s*\(\s*Action\s*:\s*(?:functions\.)?([A-Za-z_][A-Za-z0-9_]*)\s*"
    r"(?:,\s*Arguments?\s*:\s*\{(.*)\})?\s*\)?"
)
_HEAD_RE = re.compile(r"Action_\d+\s*=\s*\(")
_KEY_RE = re.compile(r'\s*"?([A-Za-z_][A-Za-z0-9_]*)"?\s*:\s*')
_BARE_RE = re.compile(r'(.*?)\s*(?=,\s*"?[A-Za-z_][A-Za-z0-9_]*"?\s*:|$)', re.S)
_DECODER = json.JSONDecoder()


def _parse_props(body: str, line: str) -> dict[str, Any]:
    props: dict[str, Any] = {}
    pos = 0
    body = body.strip()
    while pos < len(body):
        m = _KEY_RE.match(body, pos)
        if not m:
            raise MalformedArgument(f"cannot read a property name at {body[pos:pos + 20]!r}", line)
        key = m.group(1)
        pos = m.end()
        if body.startswith('"', pos):
            try:
                value, pos = _DECODER.raw_decode(body, pos)
            except ValueError as exc:
                raise MalformedArgument(f"bad string literal for {key}: {exc}", line) from None
        else:
            bare = _BARE_RE.match(body, pos)
            value = bare.group(1).strip()
            pos = bare.end(1)
        if key in props:
            raise MalformedArgument(f"duplicate property {key}", line)
        props[key] = value
        rest = body[pos:].lstrip()
        if not rest:
            break
        if not rest.startswith(","):
            raise MalformedArgument(f"expected ',' after {key}", line)
        pos = len(body) - len(rest) + 1
    return props


def _parse_tool_calls(calls: Sequence[ToolCall]) -> list[ActionCommand]:
    if not calls:
        raise EmptyProposal("no tool calls in response")
    cmds = []
    for call in calls:
        args = call.arguments
        line = f"{call.name}({args if isinstance(args, str) else json.dumps(args)})"
        if isinstance(args, str):
            try:
                args = json.loads(args) if args.strip() else {}
            except ValueError:
                raise MalformedArgument(f"tool arguments for {call.name} are not JSON", line) from None
        if not isinstance(args, Mapping):
            raise MalformedArgument(f"tool arguments for {call.name} are not an object", line)
        cmds.append(ActionCommand(call.name, _coerce(call.name, args, line)))
    return cmds


def parse_llm_actions(response: str | bytes | Sequence[ToolCall]) -> list[ActionCommand]:
    """Extract the ordered action list from a model response.

    Free text is scanned line by line for ``Action_<k>=(Action: functions.<name>,
    Argument: {...})``; anything else is treated as prose. A sequence of
    :class:`ToolCall` is mapped directly.
    """
    if isinstance(response, (bytes, bytearray)):
        response = bytes(response).decode("utf-8", errors="replace")
    if not isinstance(response, str):
        return _parse_tool_calls(list(response))

    cmds: list[ActionCommand] = []
    last_k = None
    for raw in response.split("\n"):
        line = raw.strip()
        m = _LINE_RE.search(line)
        if not m:
            if _HEAD_RE.search(line):
                raise MalformedArgument("action line does not follow the grammar", line)
            continue
        k = int(m.group(1)) if len(m.group(1)) <= 12 else None
        if k is None or (last_k is not None and k <= last_k):
            raise IndexDisorder(f"action index {m.group(1)} after {last_k}", line)
        last_k = k
        name = m.group(2)
        if name not in ACTIONS:
            raise UnknownAction(name, line)
        props = _parse_props(m.group(3) or "", line)
        cmds.append(ActionCommand(name, _coerce(name, props, line)))
    if not cmds:
        raise EmptyProposal("response contains no action lines")
    return cmds


def validate(cmd: ActionCommand, obs: Observation) -> CheckedCommand:
    if cmd.name in ELEMENT_ACTIONS:
        element_id = cmd["element_id"]
        if not 1 <= element_id <= len(obs):
            raise StaleElementId(
                f"element_id {element_id} is not on the current screen (1..{len(obs)})",
                render_command(cmd, 0),
            )
        target = obs.element(element_id)
        return CheckedCommand(cmd, target, target.bbox.center)
    if "x" in cmd.args:
        x, y = cmd["x"], cmd["y"]
        if not (0 <= x < obs.width and 0 <= y < obs.height):
            raise OutOfBoundsPoint(
                f"point ({x}, {y}) is outside the {obs.width}x{obs.height} screen",
                render_command(cmd, 0),
            )
        return CheckedCommand(cmd, None, (x, y))
    return CheckedCommand(cmd)


def _render_literal(value: Any) -> str:
    return f'"{value}"' if isinstance(value, str) else str(value)


def render_record(record: ActionRecord, include_reason: bool = True, prefix: str = "action") -> str:
    parts = [f"name: {record.name}"]
    if record.element_snapshot is not None:
        parts.append("arg: " + describe(record.element_snapshot, Style.HISTORY_ARG))
    elif record.literal_args:
        inner = ", ".join(f"{k}: {_render_literal(v)}" for k, v in record.literal_args.items())
        parts.append("arg: {" + inner + "}")
    if record.error is not None:
        parts.append(f'error: "{record.error}"')
    if include_reason and record.reason is not None:
        parts.append(f'reason: "{record.reason}"')
    return f"{prefix}_{record.index}: {{" + ", ".join(parts) + "}"


def render_history(
    records: Sequence[ActionRecord], include_reasons: bool = True, prefix: str = "action"
) -> str:
    if not records or records[0].name != START:
        raise ValueError("history must begin with the start record")
    return "\n".join(render_record(r, include_reasons, prefix) for r in records)


def record_for(index: int, checked: CheckedCommand, error: str | None = None) -> ActionRecord:
    """History entry for an executed command: element snapshot instead of the id."""
    cmd = checked.command
    if checked.target is not None:
        return ActionRecord(index, cmd.name, element_snapshot=checked.target, error=error)
    return ActionRecord(index, cmd.name, literal_args=dict(cmd.args) or None, error=error)
