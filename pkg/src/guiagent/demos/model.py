from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping

from ..actions import START, ActionRecord, render_history
from ..ui import Observation

INDENT = "    "


@dataclass(frozen=True)
class DemoStep:
    pre: Observation
    action: ActionRecord
    post: Observation
    flagged: bool = False

    @property
    def reason(self) -> str | None:
        return self.action.reason


@dataclass(frozen=True)
class Demonstration:
    family: str
    seed: int
    utterance: str
    steps: tuple[DemoStep, ...]

    def __post_init__(self) -> None:
        if not self.steps or self.steps[0].action.name != START:
            raise ValueError("a demonstration starts with the start marker")
        for a, b in zip(self.steps, self.steps[1:]):
            if a.post.digest != b.pre.digest:
                raise ValueError(f"broken chain between steps {a.action.index} and {b.action.index}")

    @property
    def records(self) -> list[ActionRecord]:
        return [s.action for s in self.steps]

    def without_reasons(self) -> "Demonstration":
        steps = tuple(replace(s, action=replace(s.action, reason=None)) for s in self.steps)
        return replace(self, steps=steps)

    def to_json(self) -> dict[str, Any]:
        return {
            "family": self.family,
            "seed": self.seed,
            "utterance": self.utterance,
            "steps": [
                {
                    "pre": s.pre.to_json(),
                    "action": s.action.to_json(),
                    "post": s.post.to_json(),
                    **({"flagged": True} if s.flagged else {}),
                }
                for s in self.steps
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "Demonstration":
        steps = tuple(
            DemoStep(
                pre=Observation.from_json(s["pre"]),
                action=ActionRecord.from_json(s["action"], i),
                post=Observation.from_json(s["post"]),
                flagged=bool(s.get("flagged", False)),
            )
            for i, s in enumerate(data["steps"], start=1)
        )
        return cls(data["family"], int(data["seed"]), data["utterance"], steps)


def render_demo(demo: Demonstration, index: int, with_reasons: bool = True) -> str:
    history = render_history(demo.records, include_reasons=with_reasons, prefix="demo_action")
    body = ["TASK:", demo.utterance, "", "Action History:", *history.split("\n")]
    lines = [f"DEMO_{index} = {{"]
    lines.extend(INDENT + line if line else "" for line in body)
    lines.append("}")
    return "\n".join(lines)


@dataclass
class DemoStore:
    """Demos on disk: one JSON file per (family, seed) plus ``manifest.json``.

    The manifest maps each family to its ordered demo files and the number of
    demos to offer per prompt.
    """

    root: Path | None = None
    demos: dict[str, list[Demonstration]] = field(default_factory=dict)
    limits: dict[str, int] = field(default_factory=dict)

    @staticmethod
    def filename(family: str, seed: int) -> str:
        return f"{family}__{seed}.json"

    @classmethod
    def load(cls, root: str | Path) -> "DemoStore":
        root = Path(root)
        manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
        store = cls(root)
        for family, entry in manifest["families"].items():
            store.limits[family] = int(entry.get("max", 5))
            store.demos[family] = [
                Demonstration.from_json(json.loads((root / f).read_text(encoding="utf-8")))
                for f in entry["demos"]
            ]
        return store

    def add(self, demo: Demonstration) -> None:
        bucket = self.demos.setdefault(demo.family, [])
        bucket[:] = [d for d in bucket if d.seed != demo.seed] + [demo]
        self.limits.setdefault(demo.family, 5)

    def get(self, family: str) -> list[Demonstration]:
        return list(self.demos.get(family, []))

    def __iter__(self) -> Iterable[Demonstration]:
        for family in sorted(self.demos):
            yield from self.demos[family]

    def save(self, root: str | Path | None = None) -> Path:
        root = Path(root or self.root)
        root.mkdir(parents=True, exist_ok=True)
        families = {}
        for family in sorted(self.demos):
            files = []
            for demo in self.demos[family]:
                name = self.filename(family, demo.seed)
                (root / name).write_text(
                    json.dumps(demo.to_json(), indent=1, ensure_ascii=False) + "\n", encoding="utf-8"
                )
                files.append(name)
            families[family] = {"max": self.limits.get(family, 5), "demos": files}
        (root / "manifest.json").write_text(
            json.dumps({"families": families}, indent=1) + "\n", encoding="utf-8"
        )
        self.root = root
        return root
