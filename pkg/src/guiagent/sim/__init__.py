from __future__ import annotations

from .env import (
    FAILURE,
    REGISTRY,
    RUNNING,
    SCREEN_H,
    SCREEN_W,
    SUCCESS,
    EnvError,
    KeyEvent,
    ModifierDown,
    ModifierUp,
    MouseDown,
    MouseMove,
    MouseUp,
    PrimitiveRejected,
    SimEnv,
    UnknownFamily,
    dump_fixtures,
)
from .tasks import DEFAULT_FAMILIES, oracle_plan

__all__ = [
    "DEFAULT_FAMILIES",
    "FAILURE",
    "REGISTRY",
    "RUNNING",
    "SCREEN_H",
    "SCREEN_W",
    "SUCCESS",
    "EnvError",
    "KeyEvent",
    "ModifierDown",
    "ModifierUp",
    "MouseDown",
    "MouseMove",
    "MouseUp",
    "PrimitiveRejected",
    "SimEnv",
    "UnknownFamily",
    "dump_fixtures",
    "oracle_plan",
]
