"""Raster screens, element masks, augmentation and training-pair export.

Images are ``uint8`` arrays of shape (H, W, 3), row-major RGB. Bounding boxes
are half-open pixel ranges: ``left <= x < right``, ``top <= y < bottom``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .actions import validate
from .executor import execute_command
from .sim.env import RUNNING, SimEnv, Widget
from .sim.tasks import oracle_plan
from .ui import BBox, Style, UiElement, describe

BACKGROUND = (245, 245, 245)
GREEN = (0, 255, 0)

_FILL = {
    "button": (66, 133, 244),
    "hyperlink": (245, 245, 245),
    "dropdown": (255, 255, 255),
    "input_field": (255, 255, 255),
    "text_area": (255, 255, 255),
    "checkbox": (255, 255, 255),
    "radio": (255, 255, 255),
    "tabled_text": (235, 235, 235),
    "shape": (220, 120, 40),
    "icon": (120, 120, 120),
    "image": (180, 200, 220),
    "scrollbar": (200, 200, 200),
    "resize_handle": (160, 160, 160),
}
_INK = {"button": (255, 255, 255), "hyperlink": (0, 0, 238)}


@dataclass
class AnnotatedScreenshot:
    image: np.ndarray
    annotations: list[UiElement]
    provenance: tuple[str, int, int]
    split: str = "train"

    def __post_init__(self) -> None:
        h, w = self.image.shape[:2]
        for el in self.annotations:
            _check_bbox(el.bbox, w, h)

    def to_json(self, image_path: str) -> dict[str, Any]:
        family, seed, step = self.provenance
        return {
            "image_path": image_path,
            "annotations": [el.to_json() for el in self.annotations],
            "split": self.split,
            "provenance": {"family": family, "seed": seed, "step": step},
        }


def _check_bbox(bbox: BBox, width: int, height: int) -> None:
    l, r, t, b = bbox
    if not (0 <= l < r <= width and 0 <= t < b <= height):
        raise ValueError(f"bbox {tuple(bbox)} is outside the {width}x{height} image")


def _draw_widget(draw: ImageDraw.ImageDraw, w: Widget, el: UiElement, font: Any) -> None:
    l, r, t, b = w.bbox
    box = (l, t, r - 1, b - 1)
    fill = _FILL.get(w.kind)
    if w.kind == "shape" and w.subtype == "circle":
        draw.ellipse(box, fill=fill, outline=(0, 0, 0))
    elif w.kind == "shape" and w.subtype == "triangle":
        draw.polygon([(l, b - 1), ((l + r) // 2, t), (r - 1, b - 1)], fill=fill)
    elif w.kind == "shape" and w.subtype == "rectangle":
        draw.rectangle(box, outline=(0, 0, 0), width=2)
    elif fill is not None and w.kind not in ("checkbox", "radio", "text", "hyperlink", "draggable_text"):
        draw.rectangle(box, fill=fill, outline=(90, 90, 90))
    if el.highlighted:
        draw.rectangle(box, fill=(180, 210, 255))
    label_x = l + 3
    if w.kind in ("checkbox", "radio"):
        s = min(12, b - t - 2)
        mark = (l + 1, t + 1, l + s, t + s)
        if w.kind == "checkbox":
            draw.rectangle(mark, fill=(255, 255, 255), outline=(0, 0, 0))
        else:
            draw.ellipse(mark, fill=(255, 255, 255), outline=(0, 0, 0))
        if el.checked:
            inner = (mark[0] + 3, mark[1] + 3, mark[2] - 3, mark[3] - 3)
            draw.rectangle(inner, fill=(0, 0, 0))
        label_x = l + s + 4
    if el.focused:
        draw.rectangle(box, outline=(30, 90, 200), width=2)
    if w.text:
        draw.text((label_x, t + 2), w.text, fill=_INK.get(w.kind, (0, 0, 0)), font=font)


def render_screen(env: SimEnv) -> np.ndarray:
    """Flat-style raster of the visible widgets, deterministic for a given state."""
    img = Image.new("RGB", (env.width, env.height), BACKGROUND)
    draw = ImageDraw.Draw(img)
    font = ImageFont.load_default()
    if env.utterance:
        draw.rectangle((0, 0, env.width - 1, 49), fill=(255, 255, 204))
        draw.text((3, 3), env.utterance[:26], fill=(0, 0, 0), font=font)
    for w in env.visible_widgets():
        _draw_widget(draw, w, env._to_element(w), font)
    return np.asarray(img, dtype=np.uint8).copy()


def semi_mask(
    img: np.ndarray,
    bbox: BBox | Sequence[int],
    darken: float = 0.4,
    outline_px: int = 2,
    outline_color: tuple[int, int, int] = GREEN,
) -> np.ndarray:
    """Keep the box, darken everything else, and outline the box just outside its edges."""
    if not 0 < darken <= 1:
        raise ValueError("darken must be in (0, 1]")
    if outline_px < 0:
        raise ValueError("outline_px must be >= 0")
    h, w = img.shape[:2]
    l, r, t, b = BBox(*bbox)
    _check_bbox(BBox(l, r, t, b), w, h)
    out = np.rint(img.astype(np.float64) * darken).astype(np.uint8)
    out[t:b, l:r] = img[t:b, l:r]
    if outline_px:
        ol, orr = max(0, l - outline_px), min(w, r + outline_px)
        ot, ob = max(0, t - outline_px), min(h, b + outline_px)
        ring = np.zeros((h, w), dtype=bool)
        ring[ot:ob, ol:orr] = True
        ring[t:b, l:r] = False
        out[ring] = outline_color
    return out


def bresenham(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    points = []
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    while True:
        points.append((x0, y0))
        if x0 == x1 and y0 == y1:
            return points
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def xbox_mask(
    img: np.ndarray,
    bbox: BBox | Sequence[int],
    fill: tuple[int, int, int] = (0, 0, 0),
    line: tuple[int, int, int] = (255, 255, 255),
) -> np.ndarray:
    """Cover the box with a solid fill crossed by its two corner-to-corner diagonals."""
    h, w = img.shape[:2]
    l, r, t, b = BBox(*bbox)
    _check_bbox(BBox(l, r, t, b), w, h)
    out = img.copy()
    out[t:b, l:r] = fill
    for x0, y0, x1, y1 in ((l, t, r - 1, b - 1), (r - 1, t, l, b - 1)):
        for x, y in bresenham(x0, y0, x1, y1):
            out[y, x] = line
    return out


def _jitter(bbox: BBox, rng: np.random.Generator, px: int, width: int, height: int) -> BBox:
    d = rng.integers(-px, px + 1, size=4)
    l = int(np.clip(bbox.left + d[0], 0, width - 1))
    r = int(np.clip(bbox.right + d[1], 1, width))
    t = int(np.clip(bbox.top + d[2], 0, height - 1))
    b = int(np.clip(bbox.bottom + d[3], 1, height))
    if l >= r:
        l, r = bbox.left, bbox.right
    if t >= b:
        t, b = bbox.top, bbox.bottom
    return BBox(l, r, t, b)


def augment_dataset(
    samples: Sequence[AnnotatedScreenshot],
    rng: np.random.Generator,
    copies: int = 2,
    color_shift: float = 0.10,
    jitter_px: int = 2,
    noise_sigma: float = 4.0,
) -> list[AnnotatedScreenshot]:
    """Each sample followed by ``copies`` perturbed variants (3x with the defaults)."""
    out: list[AnnotatedScreenshot] = []
    for sample in samples:
        out.append(sample)
        h, w = sample.image.shape[:2]
        for _ in range(copies):
            scale = 1.0 + rng.uniform(-color_shift, color_shift, size=3)
            noisy = sample.image.astype(np.float64) * scale + rng.normal(0.0, noise_sigma, sample.image.shape)
            image = np.clip(np.rint(noisy), 0, 255).astype(np.uint8)
            annotations = [el.with_bbox(_jitter(el.bbox, rng, jitter_px, w, h)) for el in sample.annotations]
            out.append(replace(sample, image=image, annotations=annotations))
    return out


def export_target(el: UiElement) -> str:
    """Training target text: the element descriptor without its coordinates."""
    return describe(el, Style.DEMO_STATE, coords=False)


def export_pairs(
    dataset: Iterable[AnnotatedScreenshot], darken: float = 0.4, outline_px: int = 2
) -> list[tuple[np.ndarray, str]]:
    return [
        (semi_mask(s.image, el.bbox, darken, outline_px), export_target(el))
        for s in dataset
        for el in s.annotations
    ]


def capture_screens(
    families: Sequence[str], seeds: Iterable[int], min_annotations: int = 0, limit: int | None = None
) -> list[AnnotatedScreenshot]:
    """Screens along each oracle trajectory, one per step, annotated from ground truth."""
    shots: list[AnnotatedScreenshot] = []
    seeds = list(seeds)
    for family in families:
        for seed in seeds:
            env = SimEnv(family, seed)
            step = 0
            while True:
                obs = env.snapshot()
                if len(obs) >= max(1, min_annotations):
                    shots.append(
                        AnnotatedScreenshot(render_screen(env), [el for _, el in obs], (family, seed, step))
                    )
                    if limit is not None and len(shots) >= limit:
                        return shots
                if env.status() != RUNNING or step >= 40:
                    break
                execute_command(env, validate(oracle_plan(env)[0], obs))
                step += 1
    return shots


def write_dataset(
    root: str | Path,
    samples: Sequence[AnnotatedScreenshot],
    darken: float = 0.4,
    outline_px: int = 2,
) -> dict[str, Any]:
    """PNG screens plus ``manifest.json``, and masked pairs with ``pairs.jsonl``."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "pairs").mkdir(parents=True, exist_ok=True)
    manifest = []
    pair_lines = []
    for i, sample in enumerate(samples):
        rel = f"images/{i:05d}.png"
        Image.fromarray(sample.image).save(root / rel)
        manifest.append(sample.to_json(rel))
        for j, el in enumerate(sample.annotations):
            masked = semi_mask(sample.image, el.bbox, darken, outline_px)
            prel = f"pairs/{i:05d}_{j:02d}.png"
            Image.fromarray(masked).save(root / prel)
            pair_lines.append(json.dumps({"image_path": prel, "target": export_target(el)}, ensure_ascii=False))
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
    (root / "pairs.jsonl").write_text("".join(line + "\n" for line in pair_lines), encoding="utf-8")
    return {"samples": len(samples), "pairs": len(pair_lines)}
