from __future__ import annotations

import json
from pathlib import Path

import pytest

from guiagent.actions import ActionRecord
from guiagent.demos.model import Demonstration, DemoStep
from guiagent.ui import BBox, UiElement, make_observation

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8")


def dropdown_screen():
    return make_observation(
        [
            UiElement("dropdown", BBox(1, 152, 55, 76), text="Theodora", focused=False),
            UiElement("button", BBox(1, 98, 80, 112), text="Submit", focused=False),
        ],
        160,
        210,
    )


def choose_list_demo() -> Demonstration:
    data = json.loads(fixture_text("choose_list_demo.json"))
    empty = make_observation([], 160, 210)
    steps = tuple(
        DemoStep(empty, ActionRecord.from_json(a, i), empty) for i, a in enumerate(data["actions"], start=1)
    )
    return Demonstration("choose-list", 3000, data["utterance"], steps)


RADIO_1 = UiElement("radio", BBox(10, 52, 55, 70), checked=False, text="EiTE")
RADIO_2 = UiElement("radio", BBox(10, 67, 73, 88), checked=False, text="vAzBm9")
SUBMIT = UiElement("button", BBox(2, 98, 99, 130), text="Submit", focused=False)


def radio_demo() -> Demonstration:
    before = make_observation([RADIO_1, RADIO_2, SUBMIT], 160, 210)
    picked = make_observation(
        [UiElement("radio", BBox(10, 52, 55, 70), checked=True, text="EiTE"), RADIO_2, SUBMIT], 160, 210
    )
    done = make_observation([], 160, 210)
    steps = (
        DemoStep(before, ActionRecord(1, "start", reason="Initiating the task."), before),
        DemoStep(before, ActionRecord(2, "click_element", element_snapshot=RADIO_1), picked),
        DemoStep(picked, ActionRecord(3, "click_element", element_snapshot=SUBMIT), done),
    )
    return Demonstration("click-option", 3000, "Select EiTE and click Submit.", steps)


@pytest.fixture
def planning_demo() -> Demonstration:
    return choose_list_demo()


@pytest.fixture
def rationale_demo() -> Demonstration:
    return radio_demo()
