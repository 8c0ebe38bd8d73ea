"""Typed screen representation and its textual serialization.

A screen is an ordered list of :class:`UiElement` objects wrapped in an
:class:`Observation`. Element ids are positional (1..N) and only valid for
the observation they came from.
"""
from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Iterator, NamedTuple

KINDS = (
    "text",
    "hyperlink",
    "button",
    "radio",
    "checkbox",
    "dropdown",
    "input_field",
    "text_area",
    "resize_handle",
    "scrollbar",
    "tabled_text",
    "draggable_text",
    "shape",
    "icon",
    "image",
)

SUBTYPES = {
    "shape": ("circle", "triangle", "rectangle"),
    "icon": ("back", "delete", "important", "forward", "reply", "search", "send"),
}

# kinds that may carry checked / focused / highlighted
FLAG_KINDS = frozenset(
    {
        "text",
        "hyperlink",
        "button",
        "radio",
        "checkbox",
        "dropdown",
        "input_field",
        "text_area",
        "tabled_text",
        "icon",
    }
)

TEXT_KINDS = frozenset(
    {
        "text",
        "hyperlink",
        "button",
        "radio",
        "checkbox",
        "dropdown",
        "input_field",
        "tabled_text",
        "draggable_text",
    }
)

FLAGS = ("checked", "focused", "highlighted")

COORD_NOTE = (
    "(Note: Coordinates are given in the form: center_x [left_edge_x-right_edge_x], "
    "center_y [top_edge_y-bottm_edge_y])"
)
EMPTY_SCREEN = "Empty Screen"


class InvalidElement(ValueError):
    """An element violates the kind/attribute applicability rules."""


class Style(str, enum.Enum):
    CURRENT_SCREEN = "current_screen"
    DEMO_STATE = "demo_state"
    HISTORY_ARG = "history_arg"


class BBox(NamedTuple):
    left: int
    right: int
    top: int
    bottom: int

    @property
    def width(self) -> int:
        return self.right - self.left

    @property
    def height(self) -> int:
        return self.bottom - self.top

    @property
    def center(self) -> tuple[int, int]:
        return render_center(self.left, self.right), render_center(self.top, self.bottom)

    def contains(self, x: int, y: int) -> bool:
        return self.left <= x < self.right and self.top <= y < self.bottom

    def inside(self, other: "BBox") -> bool:
        return (
            other.left <= self.left
            and self.right <= other.right
            and other.top <= self.top
            and self.bottom <= other.bottom
        )

    def intersects(self, other: "BBox") -> bool:
        return (
            self.left < other.right
            and other.left < self.right
            and self.top < other.bottom
            and other.top < self.bottom
        )

    def shifted(self, dx: int, dy: int) -> "BBox":
        return BBox(self.left + dx, self.right + dx, self.top + dy, self.bottom + dy)


@dataclass(frozen=True)
class UiElement:
    kind: str
    bbox: BBox
    subtype: str | None = None
    checked: bool | None = None
    focused: bool | None = None
    highlighted: bool | None = None
    text: str | None = None
    visible: bool = True

    def __post_init__(self) -> None:
        if not isinstance(self.bbox, BBox):
            object.__setattr__(self, "bbox", BBox(*self.bbox))
        if self.kind not in KINDS:
            raise InvalidElement(f"unknown element kind {self.kind!r}")
        left, right, top, bottom = self.bbox
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in self.bbox):
            raise InvalidElement(f"bbox edges must be integers: {self.bbox}")
        if not (left < right and top < bottom):
            raise InvalidElement(f"degenerate bbox {self.bbox} for {self.kind}")
        allowed = SUBTYPES.get(self.kind)
        if allowed is None and self.subtype is not None:
            raise InvalidElement(f"{self.kind} takes no subtype")
        if allowed is not None and self.subtype not in allowed:
            raise InvalidElement(f"{self.kind} needs a subtype from {allowed}, got {self.subtype!r}")
        if self.kind not in FLAG_KINDS:
            for flag in FLAGS:
                if getattr(self, flag) is not None:
                    raise InvalidElement(f"{self.kind} carries no {flag} flag")
        if self.kind not in TEXT_KINDS and self.text is not None:
            raise InvalidElement(f"{self.kind} carries no text")

    def with_bbox(self, bbox: BBox) -> "UiElement":
        return replace(self, bbox=BBox(*bbox))

    def to_json(self) -> dict[str, Any]:
        data: dict[str, Any] = {"kind": self.kind, "bbox": list(self.bbox)}
        for name in ("subtype", "checked", "focused", "highlighted", "text"):
            value = getattr(self, name)
            if value is not None:
                data[name] = value
        data["visible"] = self.visible
        return data

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "UiElement":
        return cls(
            kind=data["kind"],
            bbox=BBox(*data["bbox"]),
            subtype=data.get("subtype"),
            checked=data.get("checked"),
            focused=data.get("focused"),
            highlighted=data.get("highlighted"),
            text=data.get("text"),
            visible=data.get("visible", True),
        )


@dataclass(frozen=True)
class Observation:
    elements: tuple[UiElement, ...]
    width: int
    height: int
    digest: str = field(default="", compare=False)

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self) -> Iterator[tuple[int, UiElement]]:
        return iter(enumerate(self.elements, start=1))

    def element(self, element_id: int) -> UiElement:
        if not 1 <= element_id <= len(self.elements):
            raise KeyError(element_id)
        return self.elements[element_id - 1]

    def to_json(self) -> dict[str, Any]:
        return {
            "width": self.width,
            "height": self.height,
            "elements": [el.to_json() for el in self.elements],
            "digest": self.digest,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Observation":
        obs = make_observation(
            [UiElement.from_json(e) for e in data["elements"]], data["width"], data["height"]
        )
        if data.get("digest") and data["digest"] != obs.digest:
            raise ValueError("observation digest does not match its contents")
        return obs


def _canonical(elements: Iterable[UiElement], width: int, height: int) -> str:
    payload = {
        "size": [width, height],
        "elements": [[i, el.to_json()] for i, el in enumerate(elements, start=1)],
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def make_observation(elements: Iterable[UiElement], width: int, height: int) -> Observation:
    elements = tuple(elements)
    for i, el in enumerate(elements, start=1):
        l, r, t, b = el.bbox
        if l < 0 or t < 0 or r > width or b > height:
            raise InvalidElement(
                f"element {i} ({el.kind} {el.text!r}) bbox {tuple(el.bbox)} "
                f"exceeds the {width}x{height} screen"
            )
    digest = hashlib.sha256(_canonical(elements, width, height).encode("utf-8")).hexdigest()
    return Observation(elements, width, height, digest)


def render_center(lo: int, hi: int) -> int:
    """Midpoint of an edge pair, rounding exact halves to the even neighbour."""
    if lo >= hi:
        raise ValueError(f"expected lo < hi, got {lo}, {hi}")
    total = lo + hi
    half = total // 2
    if total % 2 and half % 2:
        half += 1
    return half


def _fmt_bool(value: bool) -> str:
    return "True" if value else "False"


def describe(el: UiElement, style: Style | str = Style.DEMO_STATE, coords: bool = True) -> str:
    """The ``{type: ..., ...}`` attribute block of one element."""
    style = Style(style)
    parts = [f"type: {el.kind}"]
    if coords:
        l, r, t, b = el.bbox
        parts.append(f"X: {render_center(l, r)} [{l}-{r}]")
        parts.append(f"Y: {render_center(t, b)} [{t}-{b}]")
    if el.subtype is not None:
        parts.append(f"subtype: {el.subtype}")
    if el.checked is not None:
        parts.append(f"checked: {_fmt_bool(el.checked)}")
    if el.text is not None:
        parts.append(f'text: "{el.text}"')
    if el.focused is not None:
        parts.append(f"focused: {_fmt_bool(el.focused)}")
    if el.highlighted is not None:
        parts.append(f"highlighted: {_fmt_bool(el.highlighted)}")
    if style is Style.DEMO_STATE:
        parts.append(f"visible: {_fmt_bool(el.visible)}")
    return "{" + ", ".join(parts) + "}"


def render_element(element_id: int, el: UiElement, style: Style | str) -> str:
    style = Style(style)
    block = describe(el, style)
    if style is Style.CURRENT_SCREEN:
        return f"- ID: element_{element_id}, data: {block}"
    if style is Style.DEMO_STATE:
        return f"demo_element_{element_id}: {block}"
    return block


def render_observation(obs: Observation, style: Style | str, note: bool = True) -> str:
    if not obs.elements:
        return EMPTY_SCREEN
    lines = [COORD_NOTE] if note else []
    lines.extend(render_element(i, el, style) for i, el in obs)
    return "\n".join(lines)
