from __future__ import annotations

from .model import Demonstration, DemoStep, DemoStore, render_demo
from .pipeline import DEMO_SEEDS, OracleFailed, augment_rationales, script_demo

__all__ = [
    "DEMO_SEEDS",
    "DemoStep",
    "DemoStore",
    "Demonstration",
    "OracleFailed",
    "augment_rationales",
    "render_demo",
    "script_demo",
]
