"""Deterministic widget-screen environment driven by atomic input primitives."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Union

from ..ui import BBox, Observation, UiElement, make_observation

SCREEN_W = 160
SCREEN_H = 210
CHAR_W = 6

RUNNING = "running"
SUCCESS = "success"
FAILURE = "failure"

EDITABLE = frozenset({"input_field", "text_area"})


class EnvError(RuntimeError):
    pass


class UnknownFamily(EnvError, KeyError):
    pass


class PrimitiveRejected(EnvError):
    """The environment refused an input primitive (e.g. mouse_up with no button held)."""


class EnvTerminated(EnvError):
    pass


@dataclass(frozen=True)
class MouseMove:
    x: int
    y: int


@dataclass(frozen=True)
class MouseDown:
    pass


@dataclass(frozen=True)
class MouseUp:
    pass


@dataclass(frozen=True)
class KeyEvent:
    key: str


@dataclass(frozen=True)
class ModifierDown:
    name: str = "ctrl"


@dataclass(frozen=True)
class ModifierUp:
    name: str = "ctrl"


Primitive = Union[MouseMove, MouseDown, MouseUp, KeyEvent, ModifierDown, ModifierUp]


@dataclass
class Widget:
    name: str
    kind: str
    bbox: BBox
    text: str | None = None
    subtype: str | None = None
    checked: bool | None = None
    group: str | None = None
    # "terminal" widgets record their activation for the task predicates
    terminal: bool = False
    draggable: bool = False
    owner: str | None = None
    selection: tuple[int, int] = (0, 0)

    def __post_init__(self) -> None:
        self.bbox = BBox(*self.bbox)


@dataclass
class TaskInstance:
    utterance: str
    widgets: list[Widget]
    truth: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class TaskFamily:
    name: str
    generate: Callable[[Any], TaskInstance]
    success: Callable[["SimEnv"], bool]
    failure: Callable[["SimEnv"], bool]
    oracle: Callable[["SimEnv"], list]
    max_rounds: int = 6


REGISTRY: dict[str, TaskFamily] = {}


def register(family: TaskFamily) -> TaskFamily:
    REGISTRY[family.name] = family
    return family


class SimEnv:
    """One task instance. Single owner, not thread-safe; create one per episode."""

    width = SCREEN_W
    height = SCREEN_H

    def __init__(self, family: str | None = None, seed: int | None = None):
        self.family: TaskFamily | None = None
        self.seed: int | None = None
        self.utterance = ""
        self.widgets: list[Widget] = []
        self.truth: dict[str, Any] = {}
        if family is not None:
            self.reset(family, seed or 0)

    # -- lifecycle -----------------------------------------------------------------
    def reset(self, family: str, seed: int) -> tuple[str, Observation]:
        from . import tasks  # noqa: F401  (populates REGISTRY)
        from .prng import SplitMix64

        try:
            spec = REGISTRY[family]
        except KeyError:
            raise UnknownFamily(f"unknown task family {family!r}") from None
        instance = spec.generate(SplitMix64.for_task(family, seed))
        self.family = spec
        self.seed = seed
        self.utterance = instance.utterance
        self.widgets = instance.widgets
        self.truth = instance.truth
        self.focus: str | None = None
        self.expanded: str | None = None
        self.cursor = (0, 0)
        self.held = False
        self.down_target: str | None = None
        self.grab: str | None = None
        self.text_anchor: int | None = None
        self.text_sel = (0, 0)
        self.modifiers: set[str] = set()
        self.clipboard = ""
        self.activations: list[str] = []
        self.events: list[str] = []
        self._status = RUNNING
        return self.utterance, self.snapshot()

    def status(self) -> str:
        return self._status

    # -- widget queries ------------------------------------------------------------
    def widget(self, name: str) -> Widget:
        for w in self.widgets:
            if w.name == name:
                return w
        raise KeyError(name)

    def _panel(self) -> BBox | None:
        if self.expanded is None:
            return None
        opts = [w.bbox for w in self.widgets if w.owner == self.expanded]
        if not opts:
            return None
        return BBox(
            min(b.left for b in opts),
            max(b.right for b in opts),
            min(b.top for b in opts),
            max(b.bottom for b in opts),
        )

    def _is_visible(self, w: Widget, panel: BBox | None) -> bool:
        if w.owner is not None:
            return w.owner == self.expanded
        if panel is not None and w.name != self.expanded and w.bbox.intersects(panel):
            return False
        return True

    def visible_widgets(self) -> list[Widget]:
        """Visible widgets in observation order: top-to-bottom, then left-to-right."""
        panel = self._panel()
        order = {w.name: i for i, w in enumerate(self.widgets)}
        shown = [w for w in self.widgets if self._is_visible(w, panel)]
        return sorted(shown, key=lambda w: (w.bbox.top, w.bbox.left, order[w.name]))

    def element_id(self, name: str) -> int:
        for i, w in enumerate(self.visible_widgets(), start=1):
            if w.name == name:
                return i
        raise KeyError(f"{name} is not visible")

    def _to_element(self, w: Widget) -> UiElement:
        kw: dict[str, Any] = {}
        if w.kind in ("checkbox", "radio"):
            kw["checked"] = bool(w.checked)
        if w.kind in ("button", "dropdown", "input_field", "text_area"):
            kw["focused"] = self.focus == w.name
        if w.kind in EDITABLE:
            kw["highlighted"] = w.selection[0] != w.selection[1]
        if w.kind == "tabled_text" and w.owner is not None:
            kw["highlighted"] = self.widget(w.owner).text == w.text
        text = w.text if w.kind != "text_area" else None
        return UiElement(w.kind, w.bbox, subtype=w.subtype, text=text, visible=True, **kw)

    def snapshot(self) -> Observation:
        return make_observation(
            [self._to_element(w) for w in self.visible_widgets()], self.width, self.height
        )

    def hit(self, x: int, y: int) -> Widget | None:
        panel = self._panel()
        for w in reversed(self.widgets):
            if self._is_visible(w, panel) and w.bbox.contains(x, y):
                return w
        return None

    # -- text selection over draggable text ---------------------------------------
    def _paragraph(self) -> list[tuple[Widget, int]]:
        out, offset = [], 0
        for w in self.widgets:
            if w.kind == "draggable_text":
                out.append((w, offset))
                offset += len(w.text or "") + 1
        return out

    def paragraph_text(self) -> str:
        return " ".join(w.text or "" for w, _ in self._paragraph())

    def selected_text(self) -> str:
        s, e = self.text_sel
        return self.paragraph_text()[s:e]

    def text_index(self, x: int, y: int) -> int:
        para = self._paragraph()
        if not para:
            return 0
        row = [(w, off) for w, off in para if w.bbox.top <= y < w.bbox.bottom]
        if not row:
            nearest = min(para, key=lambda p: abs((p[0].bbox.top + p[0].bbox.bottom) / 2 - y))
            row = [(w, off) for w, off in para if w.bbox.top == nearest[0].bbox.top]
        row.sort(key=lambda p: p[0].bbox.left)
        chosen = row[0]
        for w, off in row:
            if w.bbox.left <= x:
                chosen = (w, off)
        w, off = chosen
        n = len(w.text or "")
        return off + max(0, min(n, (x - w.bbox.left + CHAR_W // 2) // CHAR_W))

    # -- primitives ------------------------------------------------------------------
    def apply_primitive(self, p: Primitive) -> None:
        if self._status != RUNNING:
            raise EnvTerminated(f"episode already ended with {self._status}")
        if isinstance(p, MouseMove):
            self._move(p.x, p.y)
        elif isinstance(p, MouseDown):
            self._mouse_down()
        elif isinstance(p, MouseUp):
            self._mouse_up()
        elif isinstance(p, KeyEvent):
            self._key(p.key)
        elif isinstance(p, ModifierDown):
            self.modifiers.add(p.name)
        elif isinstance(p, ModifierUp):
            self.modifiers.discard(p.name)
        else:
            raise PrimitiveRejected(f"unsupported primitive {p!r}")
        self._evaluate()

    def _evaluate(self) -> None:
        spec = self.family
        if spec is None:
            return
        if spec.success(self):
            self._status = SUCCESS
        elif spec.failure(self):
            self._status = FAILURE

    def _move(self, x: int, y: int) -> None:
        x = max(0, min(self.width - 1, x))
        y = max(0, min(self.height - 1, y))
        px, py = self.cursor
        self.cursor = (x, y)
        if not self.held:
            return
        if self.grab is not None:
            w = self.widget(self.grab)
            dx = max(-w.bbox.left, min(self.width - w.bbox.right, x - px))
            dy = max(-w.bbox.top, min(self.height - w.bbox.bottom, y - py))
            w.bbox = w.bbox.shifted(dx, dy)
        elif self.text_anchor is not None:
            idx = self.text_index(x, y)
            self.text_sel = (min(self.text_anchor, idx), max(self.text_anchor, idx))

    def _mouse_down(self) -> None:
        if self.held:
            raise PrimitiveRejected("mouse button is already held")
        self.held = True
        target = self.hit(*self.cursor)
        self.down_target = target.name if target else None
        if target is not None and target.draggable:
            self.grab = target.name
        elif target is not None and target.kind == "draggable_text":
            idx = self.text_index(*self.cursor)
            self.text_anchor = idx
            self.text_sel = (idx, idx)

    def _mouse_up(self) -> None:
        if not self.held:
            raise PrimitiveRejected("mouse_up without a held button")
        self.held = False
        target = self.hit(*self.cursor)
        down, grabbed = self.down_target, self.grab
        self.down_target = None
        self.grab = None
        self.text_anchor = None
        if grabbed is not None:
            return
        if target is None:
            if down is None:
                self._blur()
            return
        if target.name == down:
            self._activate(target)

    def _blur(self) -> None:
        self.focus = None
        self.expanded = None

    def _activate(self, w: Widget) -> None:
        if self.expanded is not None and w.name != self.expanded and w.owner != self.expanded:
            self.expanded = None
        if w.kind == "checkbox":
            w.checked = not w.checked
            self.focus = None
        elif w.kind == "radio":
            for other in self.widgets:
                if other.kind == "radio" and other.group == w.group:
                    other.checked = False
            w.checked = True
            self.focus = None
        elif w.kind == "dropdown":
            self.expanded = None if self.expanded == w.name else w.name
            self.focus = w.name
        elif w.kind == "tabled_text" and w.owner is not None:
            self.widget(w.owner).text = w.text
            self.expanded = None
            self.focus = w.owner
        elif w.kind in EDITABLE:
            self.focus = w.name
            n = len(w.text or "")
            w.selection = (n, n)
        elif w.kind == "button":
            self.focus = w.name
        else:
            self.focus = None
        if w.terminal:
            self.activations.append(w.name)

    def _focused_editable(self) -> Widget | None:
        if self.focus is None:
            return None
        w = self.widget(self.focus)
        return w if w.kind in EDITABLE else None

    def _insert(self, w: Widget, s: str) -> None:
        text = w.text or ""
        a, b = w.selection
        w.text = text[:a] + s + text[b:]
        caret = a + len(s)
        w.selection = (caret, caret)

    def _key(self, key: str) -> None:
        field_ = self._focused_editable()
        if "ctrl" in self.modifiers:
            chord = key.lower()
            if chord == "a" and field_ is not None:
                field_.selection = (0, len(field_.text or ""))
            elif chord == "c":
                if field_ is not None and field_.selection[0] != field_.selection[1]:
                    a, b = field_.selection
                    self.clipboard = (field_.text or "")[a:b]
                elif self.text_sel[0] != self.text_sel[1]:
                    self.clipboard = self.selected_text()
                else:
                    self.events.append("copy with empty selection")
            elif chord == "v" and field_ is not None:
                self._insert(field_, self.clipboard)
            else:
                self.events.append(f"ignored chord ctrl+{key}")
            return
        if field_ is None:
            self.events.append(f"key {key!r} with no focused field")
            return
        self._insert(field_, key)


def dump_fixtures(family: str, seeds: range | list[int]) -> list[dict[str, Any]]:
    """(utterance, initial observation) per seed, for cross-implementation diffing."""
    env = SimEnv()
    out = []
    for seed in seeds:
        utterance, obs = env.reset(family, seed)
        out.append({"family": family, "seed": seed, "utterance": utterance, "observation": obs.to_json()})
    return out
