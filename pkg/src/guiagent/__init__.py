"""Modular GUI agent: textual screen model, action planning prompts, LLM gateway,
execution loop, and a deterministic widget simulator for offline evaluation."""
from __future__ import annotations

from .actions import ActionCommand, ActionRecord, parse_llm_actions, function_schemas
from .ui import BBox, Observation, UiElement, make_observation, render_center

__all__ = [
    "ActionCommand",
    "ActionRecord",
    "BBox",
    "Observation",
    "UiElement",
    "function_schemas",
    "make_observation",
    "parse_llm_actions",
    "render_center",
]

__version__ = "0.1.0"
