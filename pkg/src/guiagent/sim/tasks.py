"""Task families: instance generators, success/failure predicates and oracle policies.

Oracles are reactive: given the live environment they return the remaining plan
as commands against the *current* observation. The executor halts after any
screen change, so only a prefix of each plan usually runs before re-planning.
"""
from __future__ import annotations

from ..actions import ActionCommand
from ..ui import BBox, SUBTYPES
from .env import SCREEN_W, CHAR_W, SimEnv, TaskFamily, TaskInstance, Widget, register
from .prng import SplitMix64

DEFAULT_FAMILIES = (
    "click-test",
    "click-button",
    "click-link",
    "click-checkboxes",
    "click-dialog",
    "choose-list",
    "enter-text",
    "login-user",
    "drag-box",
    "highlight-text",
)

NAMES = (
    "Theodora", "Helli", "Janella", "Storm", "Selie", "Gena", "Betti", "Chrissie",
    "Kelsi", "Mara", "Ingaborg", "Elka", "Bette", "Lorne", "Odessa", "Perri",
    "Wren", "Tobit", "Ulla", "Vida", "Yoshi", "Zelda", "Anya", "Brice",
)
WORDS = (
    "lorem", "ipsum", "dolor", "sit", "amet", "sed", "nunc", "urna", "proin",
    "vitae", "magna", "justo", "nisl", "odio", "felis", "arcu", "lacus", "porta",
    "risus", "velit", "morbi", "nulla", "augue", "dapibus", "tempor", "cursus",
)
BUTTON_WORDS = ("ok", "no", "yes", "submit", "cancel", "next", "previous", "stop", "go", "delete")
LETTERS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"

TOP = 52  # the instruction banner occupies the strip above this line


def click(env: SimEnv, name: str) -> ActionCommand:
    return ActionCommand("click_element", {"element_id": env.element_id(name)})


def center_of(env: SimEnv, name: str) -> tuple[int, int]:
    return env.widget(name).bbox.center


def _token(rng: SplitMix64, lo: int, hi: int) -> str:
    return "".join(rng.choice(LETTERS) for _ in range(rng.randint(lo, hi)))


def _submit(env: SimEnv) -> bool:
    return "submit" in env.activations


# -- click-test -----------------------------------------------------------------------
def _gen_click_test(rng: SplitMix64) -> TaskInstance:
    widgets = []
    for i in range(rng.randint(0, 2)):
        kind = rng.choice(("shape", "icon"))
        left = 8 + 50 * i + rng.randint(0, 20)
        widgets.append(
            Widget(f"deco{i}", kind, BBox(left, left + 16, 58, 74), subtype=rng.choice(SUBTYPES[kind]))
        )
    w = rng.randint(60, 90)
    h = 30
    left = rng.randint(2, SCREEN_W - w - 2)
    top = rng.randint(85, 200 - h)
    widgets.append(Widget("button", "button", BBox(left, left + w, top, top + h), "Click Me!", terminal=True))
    return TaskInstance('Click the button.', widgets)


register(
    TaskFamily(
        "click-test",
        _gen_click_test,
        success=lambda env: "button" in env.activations,
        failure=lambda env: False,
        oracle=lambda env: [click(env, "button")],
    )
)


# -- click-button ---------------------------------------------------------------------
def _gen_click_button(rng: SplitMix64) -> TaskInstance:
    labels = rng.sample(BUTTON_WORDS, rng.randint(2, 5))
    widgets = []
    for i, label in enumerate(labels):
        w = 24 + CHAR_W * len(label)
        left = rng.randint(2, SCREEN_W - w - 2)
        top = TOP + 4 + 28 * i
        widgets.append(Widget(f"btn{i}", "button", BBox(left, left + w, top, top + 24), label, terminal=True))
    target = rng.below(len(labels))
    return TaskInstance(f'Click on the "{labels[target]}" button.', widgets, {"target": f"btn{target}"})


register(
    TaskFamily(
        "click-button",
        _gen_click_button,
        success=lambda env: env.truth["target"] in env.activations,
        failure=lambda env: any(a != env.truth["target"] for a in env.activations),
        oracle=lambda env: [click(env, env.truth["target"])],
    )
)


# -- click-link -----------------------------------------------------------------------
def _gen_click_link(rng: SplitMix64) -> TaskInstance:
    n = rng.randint(3, 5)
    words = rng.sample(WORDS, 2 * n)
    widgets = []
    for i in range(n):
        top = TOP + 6 + 20 * i
        filler, link = words[2 * i], words[2 * i + 1]
        left = 4 + rng.randint(0, 12)
        fw = CHAR_W * len(filler)
        widgets.append(Widget(f"txt{i}", "text", BBox(left, left + fw, top, top + 14), filler))
        lleft = left + fw + CHAR_W
        widgets.append(
            Widget(f"link{i}", "hyperlink", BBox(lleft, lleft + CHAR_W * len(link), top, top + 14), link, terminal=True)
        )
    target = rng.below(n)
    return TaskInstance(
        f'Click on the link "{words[2 * target + 1]}".', widgets, {"target": f"link{target}"}
    )


register(
    TaskFamily(
        "click-link",
        _gen_click_link,
        success=lambda env: env.truth["target"] in env.activations,
        failure=lambda env: any(a != env.truth["target"] for a in env.activations),
        oracle=lambda env: [click(env, env.truth["target"])],
    )
)


# -- click-checkboxes -----------------------------------------------------------------
def _gen_click_checkboxes(rng: SplitMix64) -> TaskInstance:
    n = rng.randint(3, 6)
    labels = [_token(rng, 3, 6) for _ in range(n)]
    widgets = []
    for i, label in enumerate(labels):
        top = TOP + 6 + 18 * i
        widgets.append(Widget(f"cb{i}", "checkbox", BBox(8, 24 + CHAR_W * len(label), top, top + 16), label, checked=False))
    bottom_row = TOP + 6 + 18 * n + 6
    widgets.append(Widget("submit", "button", BBox(8, 98, bottom_row, bottom_row + 30), "Submit", terminal=True))
    k = rng.randint(0, min(4, n))
    targets = sorted(rng.sample(range(n), k))
    chosen = [labels[i] for i in targets]
    if not chosen:
        utterance = "Select nothing and click Submit."
    else:
        utterance = f"Select {', '.join(chosen)} and click Submit."
    return TaskInstance(utterance, widgets, {"targets": [f"cb{i}" for i in targets]})


def _checkboxes_ok(env: SimEnv) -> bool:
    want = set(env.truth["targets"])
    return all(w.checked == (w.name in want) for w in env.widgets if w.kind == "checkbox")


def _oracle_checkboxes(env: SimEnv) -> list[ActionCommand]:
    want = set(env.truth["targets"])
    plan = [click(env, w.name) for w in env.widgets if w.kind == "checkbox" and w.checked != (w.name in want)]
    return plan + [click(env, "submit")]


register(
    TaskFamily(
        "click-checkboxes",
        _gen_click_checkboxes,
        success=lambda env: _submit(env) and _checkboxes_ok(env),
        failure=lambda env: _submit(env) and not _checkboxes_ok(env),
        oracle=_oracle_checkboxes,
    )
)


# -- click-option (radio group; mirrors the select-and-submit demo screen) ------------
def _gen_click_option(rng: SplitMix64) -> TaskInstance:
    n = rng.randint(2, 5)
    labels = [_token(rng, 3, 6) for _ in range(n)]
    widgets = []
    for i, label in enumerate(labels):
        top = TOP + 3 + 18 * i
        widgets.append(
            Widget(f"opt{i}", "radio", BBox(10, 25 + CHAR_W * len(label), top, top + 15), label, checked=False, group="g")
        )
    top = TOP + 3 + 18 * n + 8
    widgets.append(Widget("submit", "button", BBox(2, 98, top, top + 31), "Submit", terminal=True))
    target = rng.below(n)
    return TaskInstance(f"Select {labels[target]} and click Submit.", widgets, {"target": f"opt{target}"})


def _option_ok(env: SimEnv) -> bool:
    return bool(env.widget(env.truth["target"]).checked)


def _oracle_option(env: SimEnv) -> list[ActionCommand]:
    plan = [] if _option_ok(env) else [click(env, env.truth["target"])]
    return plan + [click(env, "submit")]


register(
    TaskFamily(
        "click-option",
        _gen_click_option,
        success=lambda env: _submit(env) and _option_ok(env),
        failure=lambda env: _submit(env) and not _option_ok(env),
        oracle=_oracle_option,
    )
)


# -- click-dialog ---------------------------------------------------------------------
def _gen_click_dialog(rng: SplitMix64) -> TaskInstance:
    body = " ".join(rng.sample(WORDS, 3))
    top = TOP + rng.randint(4, 40)
    widgets = [
        Widget("title", "text", BBox(10, 70, top, top + 14), "Dialog"),
        Widget("close", "button", BBox(132, 150, top, top + 16), "x", terminal=True),
        Widget("body", "text", BBox(10, 10 + CHAR_W * len(body), top + 22, top + 36), body),
        Widget("ok", "button", BBox(20, 70, top + 50, top + 74), "OK", terminal=True),
        Widget("cancel", "button", BBox(80, 140, top + 50, top + 74), "Cancel", terminal=True),
    ]
    target = rng.choice(("close", "ok", "cancel"))
    if target == "close":
        utterance = 'Close the dialog box by clicking the "x".'
    else:
        label = "OK" if target == "ok" else "Cancel"
        utterance = f'Click the button in the dialog box labeled "{label}".'
    return TaskInstance(utterance, widgets, {"target": target})


register(
    TaskFamily(
        "click-dialog",
        _gen_click_dialog,
        success=lambda env: env.truth["target"] in env.activations,
        failure=lambda env: any(a != env.truth["target"] for a in env.activations),
        oracle=lambda env: [click(env, env.truth["target"])],
    )
)


# -- choose-list ----------------------------------------------------------------------
def _gen_choose_list(rng: SplitMix64) -> TaskInstance:
    options = rng.sample(NAMES, rng.randint(4, 8))
    target = rng.choice(options)
    initial = rng.choice([o for o in options if o != target])
    widgets = [
        Widget("dropdown", "dropdown", BBox(1, 152, 55, 76), initial),
        Widget("submit", "button", BBox(1, 98, 80, 112), "Submit", terminal=True),
    ]
    for i, name in enumerate(options):
        top = 77 + 16 * i
        widgets.append(Widget(f"opt{i}", "tabled_text", BBox(1, 152, top, top + 16), name, owner="dropdown"))
    return TaskInstance(
        f"Select {target} from the list and click Submit.", widgets, {"target": target}
    )


def _list_ok(env: SimEnv) -> bool:
    return env.widget("dropdown").text == env.truth["target"]


def _oracle_choose_list(env: SimEnv) -> list[ActionCommand]:
    if env.expanded == "dropdown":
        for w in env.widgets:
            if w.owner == "dropdown" and w.text == env.truth["target"]:
                return [click(env, w.name)]
    if not _list_ok(env):
        return [click(env, "dropdown")]
    return [click(env, "submit")]


register(
    TaskFamily(
        "choose-list",
        _gen_choose_list,
        success=lambda env: _submit(env) and _list_ok(env),
        failure=lambda env: _submit(env) and not _list_ok(env),
        oracle=_oracle_choose_list,
    )
)


# -- text entry helpers -----------------------------------------------------------------
def _fill(env: SimEnv, name: str, value: str) -> list[ActionCommand]:
    w = env.widget(name)
    if (w.text or "") == value:
        return []
    plan = [] if env.focus == name else [click(env, name)]
    if w.text:
        plan.append(ActionCommand("press_control_A"))
    plan.append(ActionCommand("type_text", {"string_to_type": value}))
    return plan


# -- enter-text -----------------------------------------------------------------------
def _gen_enter_text(rng: SplitMix64) -> TaskInstance:
    word = rng.choice(NAMES) if rng.below(2) else _token(rng, 3, 8)
    top = TOP + rng.randint(6, 40)
    widgets = [
        Widget("field", "input_field", BBox(5, 155, top, top + 20), ""),
        Widget("submit", "button", BBox(5, 80, top + 30, top + 60), "Submit", terminal=True),
    ]
    return TaskInstance(
        f'Enter "{word}" into the text field and press Submit.', widgets, {"target": word}
    )


def _text_ok(env: SimEnv) -> bool:
    return env.widget("field").text == env.truth["target"]


register(
    TaskFamily(
        "enter-text",
        _gen_enter_text,
        success=lambda env: _submit(env) and _text_ok(env),
        failure=lambda env: _submit(env) and not _text_ok(env),
        oracle=lambda env: _fill(env, "field", env.truth["target"]) + [click(env, "submit")],
    )
)


# -- login-user -----------------------------------------------------------------------
def _gen_login_user(rng: SplitMix64) -> TaskInstance:
    user = rng.choice(NAMES).lower()
    password = _token(rng, 4, 8)
    widgets = [
        Widget("user_label", "text", BBox(5, 59, 55, 70), "Username"),
        Widget("user", "input_field", BBox(5, 155, 72, 92), ""),
        Widget("pass_label", "text", BBox(5, 59, 98, 113), "Password"),
        Widget("password", "input_field", BBox(5, 155, 115, 135), ""),
        Widget("submit", "button", BBox(5, 80, 145, 170), "Login", terminal=True),
    ]
    return TaskInstance(
        f'Enter the username "{user}" and the password "{password}" into the text fields and press login.',
        widgets,
        {"user": user, "password": password},
    )


def _login_ok(env: SimEnv) -> bool:
    return env.widget("user").text == env.truth["user"] and env.widget("password").text == env.truth["password"]


register(
    TaskFamily(
        "login-user",
        _gen_login_user,
        success=lambda env: _submit(env) and _login_ok(env),
        failure=lambda env: _submit(env) and not _login_ok(env),
        oracle=lambda env: (
            _fill(env, "user", env.truth["user"])
            + _fill(env, "password", env.truth["password"])
            + [click(env, "submit")]
        ),
    )
)


# -- drag-box -------------------------------------------------------------------------
def _gen_drag_box(rng: SplitMix64) -> TaskInstance:
    rw, rh = rng.randint(50, 70), rng.randint(45, 65)
    rleft = rng.randint(4, SCREEN_W - rw - 4)
    rtop = rng.randint(TOP + 4, 135 - rh)
    d = rng.randint(14, 20)
    cleft = rng.randint(4, SCREEN_W - d - 4)
    ctop = rng.randint(150, 205 - d)
    widgets = [
        Widget("rect", "shape", BBox(rleft, rleft + rw, rtop, rtop + rh), subtype="rectangle"),
        Widget("circle", "shape", BBox(cleft, cleft + d, ctop, ctop + d), subtype="circle", draggable=True),
    ]
    return TaskInstance("Drag the circle into the rectangle.", widgets)


def _dropped(env: SimEnv) -> bool:
    return not env.held and env.widget("circle").bbox.inside(env.widget("rect").bbox)


def _oracle_drag(env: SimEnv) -> list[ActionCommand]:
    tx, ty = center_of(env, "rect")
    if env.held:
        if env.grab == "circle" and env.widget("circle").bbox.inside(env.widget("rect").bbox):
            return [ActionCommand("drag_mouse_release")]
        if env.grab != "circle":
            return [ActionCommand("drag_mouse_release")]
        return [ActionCommand("drag_mouse_move", {"x": tx, "y": ty}), ActionCommand("drag_mouse_release")]
    cx, cy = center_of(env, "circle")
    return [
        ActionCommand("drag_mouse_hold_down", {"x": cx, "y": cy}),
        ActionCommand("drag_mouse_move", {"x": tx, "y": ty}),
        ActionCommand("drag_mouse_release"),
    ]


register(
    TaskFamily(
        "drag-box",
        _gen_drag_box,
        success=_dropped,
        failure=lambda env: False,
        oracle=_oracle_drag,
    )
)


# -- highlight-text -------------------------------------------------------------------
def _gen_highlight_text(rng: SplitMix64) -> TaskInstance:
    words = rng.sample(WORDS, rng.randint(4, 8))
    widgets = []
    x, top = 4, TOP + 6
    for i, word in enumerate(words):
        w = CHAR_W * len(word)
        if x + w > SCREEN_W - 4:
            x, top = 4, top + 16
        widgets.append(Widget(f"w{i}", "draggable_text", BBox(x, x + w, top, top + 14), word))
        x += w + CHAR_W
    top += 26
    widgets.append(Widget("submit", "button", BBox(4, 84, top, top + 28), "Submit", terminal=True))
    target = rng.below(len(words))
    return TaskInstance(
        f'Highlight the word "{words[target]}" and click Submit.', widgets, {"target": words[target], "name": f"w{target}"}
    )


def _highlight_ok(env: SimEnv) -> bool:
    return env.selected_text() == env.truth["target"]


def _oracle_highlight(env: SimEnv) -> list[ActionCommand]:
    box = env.widget(env.truth["name"]).bbox
    y = box.center[1]
    if env.held:
        if env.text_anchor is not None and not _highlight_ok(env):
            return [ActionCommand("drag_mouse_move", {"x": box.right, "y": y}), ActionCommand("drag_mouse_release")]
        return [ActionCommand("drag_mouse_release")]
    if _highlight_ok(env):
        return [click(env, "submit")]
    return [
        ActionCommand("drag_mouse_hold_down", {"x": box.left, "y": y}),
        ActionCommand("drag_mouse_move", {"x": box.right, "y": y}),
        ActionCommand("drag_mouse_release"),
        click(env, "submit"),
    ]


register(
    TaskFamily(
        "highlight-text",
        _gen_highlight_text,
        success=lambda env: _submit(env) and _highlight_ok(env),
        failure=lambda env: _submit(env) and not _highlight_ok(env),
        oracle=_oracle_highlight,
    )
)


def oracle_plan(env: SimEnv) -> list[ActionCommand]:
    if env.family is None:
        raise RuntimeError("environment has not been reset")
    return env.family.oracle(env)
