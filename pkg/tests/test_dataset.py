from __future__ import annotations

import json

import numpy as np
import pytest
from PIL import Image

from guiagent.dataset import (
    AnnotatedScreenshot,
    _jitter,
    augment_dataset,
    capture_screens,
    export_pairs,
    export_target,
    render_screen,
    semi_mask,
    write_dataset,
    xbox_mask,
)
from guiagent.sim import SimEnv
from guiagent.ui import BBox, Style, UiElement, describe

W, H = 160, 210


def random_image(rng: np.random.Generator, w: int = W, h: int = H) -> np.ndarray:
    return rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)


def random_bbox(rng: np.random.Generator, w: int = W, h: int = H) -> BBox:
    l = int(rng.integers(0, w - 1))
    t = int(rng.integers(0, h - 1))
    return BBox(l, int(rng.integers(l + 1, w + 1)), t, int(rng.integers(t + 1, h + 1)))


def test_render_is_deterministic_and_sized() -> None:
    a = render_screen(SimEnv("login-user", 0))
    b = render_screen(SimEnv("login-user", 0))
    assert a.shape == (H, W, 3) and a.dtype == np.uint8
    assert np.array_equal(a, b)


def test_render_empty_state_is_uniform() -> None:
    env = SimEnv("click-test", 0)
    env.widgets = []
    env.utterance = ""
    img = render_screen(env)
    assert (img == img[0, 0]).all()


def test_semi_mask_identity_factor() -> None:
    rng = np.random.default_rng(1)
    img = random_image(rng)
    box = BBox(40, 80, 60, 100)
    out = semi_mask(img, box, darken=1.0, outline_px=2)
    ring = np.zeros((H, W), bool)
    ring[58:102, 38:82] = True
    ring[60:100, 40:80] = False
    assert np.array_equal(out[~ring], img[~ring])
    assert (out[ring] == (0, 255, 0)).all()


def test_semi_mask_darken_arithmetic_on_gray() -> None:
    img = np.full((H, W, 3), 200, np.uint8)
    out = semi_mask(img, BBox(10, 20, 10, 20), darken=0.5, outline_px=0)
    assert (out[:10] == 100).all() and (out[10:20, 10:20] == 200).all()


def test_semi_mask_random_pixels() -> None:
    rng = np.random.default_rng(7)
    checked = 0
    for _ in range(20):
        img = random_image(rng)
        box = random_bbox(rng)
        darken = float(rng.uniform(0.05, 1.0))
        px = int(rng.integers(0, 4))
        out = semi_mask(img, box, darken=darken, outline_px=px)
        for _ in range(500):
            x, y = int(rng.integers(0, W)), int(rng.integers(0, H))
            inside = box.left <= x < box.right and box.top <= y < box.bottom
            near = box.left - px <= x < box.right + px and box.top - px <= y < box.bottom + px
            if inside:
                assert tuple(out[y, x]) == tuple(img[y, x])
            elif near:
                assert tuple(out[y, x]) == (0, 255, 0)
            else:
                assert tuple(out[y, x]) == tuple(round(int(c) * darken) for c in img[y, x])
            checked += 1
    assert checked == 10_000


def test_semi_mask_errors() -> None:
    img = np.zeros((H, W, 3), np.uint8)
    with pytest.raises(ValueError):
        semi_mask(img, BBox(150, 170, 0, 10))
    with pytest.raises(ValueError):
        semi_mask(img, BBox(0, 10, 0, 10), darken=0)


def _ideal_line_ok(points: set[tuple[int, int]], x0: int, y0: int, x1: int, y1: int) -> bool:
    # one pixel per step along the major axis, within half a pixel of the true line
    dx, dy = x1 - x0, y1 - y0
    if abs(dx) >= abs(dy):
        for x in range(min(x0, x1), max(x0, x1) + 1):
            ys = [y for (px, y) in points if px == x]
            yt = y0 + (dy * (x - x0) / dx if dx else 0)
            if not any(abs(y - yt) <= 0.5 for y in ys):
                return False
    else:
        for y in range(min(y0, y1), max(y0, y1) + 1):
            xs = [x for (x, py) in points if py == y]
            xt = x0 + dx * (y - y0) / dy
            if not any(abs(x - xt) <= 0.5 for x in xs):
                return False
    return True


def test_xbox_mask_geometry() -> None:
    rng = np.random.default_rng(3)
    for _ in range(50):
        img = random_image(rng)
        box = random_bbox(rng)
        out = xbox_mask(img, box)
        inside = np.zeros((H, W), bool)
        inside[box.top : box.bottom, box.left : box.right] = True
        assert np.array_equal(out[~inside], img[~inside])
        region = out[inside]
        assert ((region == 0).all(axis=1) | (region == 255).all(axis=1)).all()
        white = {(int(x), int(y)) for y, x in zip(*np.nonzero((out == 255).all(axis=2) & inside))}
        l, r, t, b = box
        assert _ideal_line_ok(white, l, t, r - 1, b - 1)
        assert _ideal_line_ok(white, r - 1, t, l, b - 1)


def test_xbox_single_pixel() -> None:
    img = np.full((H, W, 3), 9, np.uint8)
    out = xbox_mask(img, BBox(5, 6, 7, 8))
    changed = np.argwhere((out != img).any(axis=2))
    assert changed.tolist() == [[7, 5]]


def _sample(rng: np.random.Generator, n: int = 3) -> AnnotatedScreenshot:
    els = [UiElement("button", random_bbox(rng), text=f"b{i}") for i in range(n)]
    return AnnotatedScreenshot(random_image(rng), els, ("fixture", 0, 0))


def test_augmentation_triples_and_is_deterministic() -> None:
    samples = [_sample(np.random.default_rng(i)) for i in range(10)]
    a = augment_dataset(samples, np.random.default_rng(42))
    b = augment_dataset(samples, np.random.default_rng(42))
    assert len(a) == 30
    assert a[0] is samples[0] and a[3] is samples[1]
    for x, y in zip(a, b):
        assert np.array_equal(x.image, y.image) and x.annotations == y.annotations
    for i, s in enumerate(a):
        assert len(s.annotations) == len(samples[i // 3].annotations)


def test_color_shift_bounded_without_noise() -> None:
    rng = np.random.default_rng(0)
    img = np.full((20, 20, 3), 100, np.uint8)
    s = AnnotatedScreenshot(img, [UiElement("image", BBox(0, 5, 0, 5))], ("x", 0, 0))
    for copy in augment_dataset([s], rng, noise_sigma=0.0)[1:]:
        assert (np.abs(copy.image.astype(int) - 100) <= 10).all()


def test_jitter_fuzz_keeps_boxes_valid() -> None:
    rng = np.random.default_rng(11)
    for _ in range(10_000):
        w, h = int(rng.integers(2, 60)), int(rng.integers(2, 60))
        box = random_bbox(rng, w, h)
        out = _jitter(box, rng, 2, w, h)
        assert 0 <= out.left < out.right <= w and 0 <= out.top < out.bottom <= h
        assert all(abs(a - b) <= 2 for a, b in zip(out, box))


def test_export_targets_drop_coordinates() -> None:
    radio = UiElement("radio", BBox(10, 52, 55, 70), checked=False, text="EiTE")
    assert export_target(radio) == '{type: radio, checked: False, text: "EiTE", visible: True}'
    full = describe(radio, Style.DEMO_STATE)
    assert export_target(radio) == full.replace("X: 31 [10-52], Y: 62 [55-70], ", "")
    shots = capture_screens(["click-option"], range(2))
    pairs = export_pairs(shots)
    assert len(pairs) == sum(len(s.annotations) for s in shots)
    for img, target in pairs:
        assert img.shape == (H, W, 3)
        assert "X:" not in target and "Y:" not in target
    assert any("type: radio" in t and "checked:" in t for _, t in pairs)


def test_capture_annotations_match_visible_widgets() -> None:
    for shot in capture_screens(["choose-list"], [0]):
        family, seed, step = shot.provenance
        assert family == "choose-list" and seed == 0
        assert len(shot.annotations) >= 1


def test_write_dataset_layout(tmp_path) -> None:
    shots = capture_screens(["login-user"], [0], min_annotations=3, limit=2)
    samples = augment_dataset(shots, np.random.default_rng(0))
    counts = write_dataset(tmp_path, samples)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert counts["samples"] == len(manifest) == 6
    assert set(manifest[0]) >= {"image_path", "annotations", "split"}
    img = np.asarray(Image.open(tmp_path / manifest[1]["image_path"]))
    assert np.array_equal(img, samples[1].image)
    pairs = (tmp_path / "pairs.jsonl").read_text().splitlines()
    assert len(pairs) == counts["pairs"] == sum(len(s.annotations) for s in samples)
