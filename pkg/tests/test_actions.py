from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dropdown_screen, fixture_text
from guiagent.actions import (
    ACTION_NAMES,
    ACTIONS,
    ActionCommand,
    ActionRecord,
    EmptyProposal,
    IndexDisorder,
    MalformedArgument,
    OutOfBoundsPoint,
    StaleElementId,
    ToolCall,
    UnknownAction,
    function_schemas,
    parse_llm_actions,
    record_for,
    render_command,
    render_commands,
    render_history,
    validate,
)
from guiagent.ui import BBox, UiElement


def test_vocabulary_has_eleven_actions() -> None:
    assert len(ACTION_NAMES) == 11
    assert "start" not in ACTIONS


def test_click_and_type_schemas_match_fixture() -> None:
    expected = json.loads(fixture_text("click_type_schemas.json"))
    assert function_schemas({"click_element", "type_text"}) == expected


def test_schema_required_parameters() -> None:
    by_name = {s["name"]: s for s in function_schemas(ACTION_NAMES)}
    assert by_name["type_text"]["parameters"]["required"] == ["string_to_type"]
    assert by_name["type_text"]["parameters"]["properties"]["string_to_type"]["type"] == "string"
    assert by_name["click_new_point"]["parameters"]["required"] == ["x", "y"]
    assert by_name["press_control_A"]["parameters"] == {"type": "object", "properties": {}, "required": []}
    assert [s["name"] for s in function_schemas(ACTION_NAMES)] == list(ACTION_NAMES)


def test_schema_unknown_action() -> None:
    with pytest.raises(UnknownAction):
        function_schemas({"click_element", "double_click"})


def test_reference_response_parses_to_single_click() -> None:
    cmds = parse_llm_actions(fixture_text("choose_list_response.txt"))
    assert cmds == [ActionCommand("click_element", {"element_id": 1})]


def test_render_command_form() -> None:
    assert (
        render_command(ActionCommand("click_element", {"element_id": 1}), 2)
        == "Action_2=(Action: functions.click_element, Argument: {element_id: 1})"
    )
    assert (
        render_command(ActionCommand("type_text", {"string_to_type": 'say "hi"'}), 3)
        == 'Action_3=(Action: functions.type_text, Argument: {string_to_type: "say \\"hi\\""})'
    )
    assert render_command(ActionCommand("press_control_C"), 4) == "Action_4=(Action: functions.press_control_C, Argument: {})"


def test_lenient_forms() -> None:
    text = "\n".join(
        [
            'Action_2 = ( Action: click_element, Argument: {"element_id": "4"} )',
            "Action_3=(Action: functions.type_text, Argument: {string_to_type: hello world})",
            "Action_5=(Action: functions.drag_mouse_release)",
        ]
    )
    assert parse_llm_actions(text) == [
        ActionCommand("click_element", {"element_id": 4}),
        ActionCommand("type_text", {"string_to_type": "hello world"}),
        ActionCommand("drag_mouse_release"),
    ]


def test_tool_call_input() -> None:
    calls = [ToolCall("click_new_point", '{"x": 3, "y": 4}'), ToolCall("press_control_V", "")]
    assert parse_llm_actions(calls) == [
        ActionCommand("click_new_point", {"x": 3, "y": 4}),
        ActionCommand("press_control_V"),
    ]
    with pytest.raises(MalformedArgument):
        parse_llm_actions([ToolCall("click_element", "{not json")])
    with pytest.raises(EmptyProposal):
        parse_llm_actions([])


@pytest.mark.parametrize(
    "text,error",
    [
        ("I think we are done.", EmptyProposal),
        ("", EmptyProposal),
        ("Action_2=(Action: functions.double_click, Argument: {element_id: 1})", UnknownAction),
        ("Action_2=(Action: functions.click_element, Argument: {x: 1})", MalformedArgument),
        ("Action_2=(Action: functions.click_element, Argument: {element_id: one})", MalformedArgument),
        ("Action_2=(Action: functions.click_element, Argument: {element_id: 0})", MalformedArgument),
        ("Action_2=(Action: functions.click_element, Argument: {element_id: 1, element_id: 2})", MalformedArgument),
        ("Action_2=(Action: functions.type_text, Argument: {string_to_type: \"open)", MalformedArgument),
        ("Action_2=(garbage", MalformedArgument),
        (
            "Action_3=(Action: functions.press_control_A, Argument: {})\nAction_2=(Action: functions.press_control_C, Argument: {})",
            IndexDisorder,
        ),
    ],
)
def test_parse_errors(text: str, error: type) -> None:
    with pytest.raises(error) as info:
        parse_llm_actions(text)
    if error is not EmptyProposal:
        assert info.value.line


_text_values = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\n\r\x0b\x0c\x1c\x1d\x1e\x85  "),
    max_size=20,
)
_ints = st.integers(0, 10**6)


def _command(name: str, draw: st.DrawFn) -> ActionCommand:
    required = ACTIONS[name][1]
    args = {}
    for p in required:
        if p == "element_id":
            args[p] = draw(st.integers(1, 10**6))
        elif p == "string_to_type":
            args[p] = draw(_text_values)
        else:
            args[p] = draw(_ints)
    return ActionCommand(name, args)


@st.composite
def _plans(draw: st.DrawFn) -> tuple[int, list[ActionCommand]]:
    names = draw(st.lists(st.sampled_from(ACTION_NAMES), min_size=1, max_size=8))
    return draw(st.integers(2, 50)), [_command(n, draw) for n in names]


@settings(max_examples=300)
@given(_plans(), st.sampled_from(["", "Some prose first.\n", "### Plan\n\n"]))
def test_render_parse_round_trip(plan: tuple[int, list[ActionCommand]], prefix: str) -> None:
    start, cmds = plan
    assert parse_llm_actions(prefix + render_commands(cmds, start)) == cmds


@settings(max_examples=500)
@given(st.binary(max_size=200))
def test_random_bytes_never_crash(blob: bytes) -> None:
    try:
        parse_llm_actions(blob)
    except (EmptyProposal, UnknownAction, MalformedArgument, IndexDisorder):
        pass


@settings(max_examples=300)
@given(st.text(alphabet="Action_=():{},\" functions.click_elementype0123456789\n-", max_size=120))
def test_grammar_shaped_noise_never_crashes(text: str) -> None:
    try:
        parse_llm_actions(text)
    except (EmptyProposal, UnknownAction, MalformedArgument, IndexDisorder):
        pass


def test_huge_numbers_are_rejected_not_crashing() -> None:
    with pytest.raises((MalformedArgument, IndexDisorder)):
        parse_llm_actions("Action_2=(Action: functions.click_element, Argument: {element_id: " + "9" * 5000 + "})")
    with pytest.raises(IndexDisorder):
        parse_llm_actions("Action_" + "9" * 5000 + "=(Action: functions.press_control_A)")


def test_validate_against_observation() -> None:
    obs = dropdown_screen()
    checked = validate(ActionCommand("click_element", {"element_id": 2}), obs)
    assert checked.target == obs.element(2)
    assert checked.point == (50, 96)
    with pytest.raises(StaleElementId):
        validate(ActionCommand("click_element", {"element_id": 3}), obs)
    with pytest.raises(OutOfBoundsPoint):
        validate(ActionCommand("click_new_point", {"x": 160, "y": 5}), obs)
    assert validate(ActionCommand("click_new_point", {"x": 159, "y": 209}), obs).point == (159, 209)


def test_history_records_snapshot_not_id() -> None:
    obs = dropdown_screen()
    rec = record_for(2, validate(ActionCommand("click_element", {"element_id": 1}), obs))
    typed = record_for(3, validate(ActionCommand("type_text", {"string_to_type": "abc"}), obs))
    hist = render_history([ActionRecord(1, "start"), rec, typed])
    assert hist.split("\n") == [
        "action_1: {name: start}",
        'action_2: {name: click_element, arg: {type: dropdown, X: 76 [1-152], Y: 66 [55-76], text: "Theodora", focused: False}}',
        'action_3: {name: type_text, arg: {string_to_type: "abc"}}',
    ]
    assert "element_id" not in hist


def test_history_reason_and_error_fields() -> None:
    recs = [
        ActionRecord(1, "start", reason="Initiating the task."),
        ActionRecord(2, "click_new_point", literal_args={"x": 10, "y": 20}, error="rejected"),
        ActionRecord(3, "press_control_A", reason="select"),
    ]
    assert render_history(recs).split("\n") == [
        'action_1: {name: start, reason: "Initiating the task."}',
        'action_2: {name: click_new_point, arg: {x: 10, y: 20}, error: "rejected"}',
        'action_3: {name: press_control_A, reason: "select"}',
    ]
    assert "reason" not in render_history(recs, include_reasons=False)
    with pytest.raises(ValueError):
        render_history(recs[1:])


def test_record_json_round_trip() -> None:
    snap = UiElement("button", BBox(1, 98, 80, 112), text="Submit", focused=False)
    rec = ActionRecord(4, "click_element", element_snapshot=snap, reason="why")
    assert ActionRecord.from_json(rec.to_json(), 4) == rec
