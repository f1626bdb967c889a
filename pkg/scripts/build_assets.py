#!/usr/bin/env python3
"""Regenerate the committed render assets under assets/.

Frames and energy glyphs are original flat-color art generated with Pillow
(official card art is proprietary and cannot be redistributed). Fonts are
the DejaVu family copied from matplotlib's bundled, freely licensed set.
Also writes the fixed 1024x768 test artwork used by the golden render test.

Deterministic: rerunning reproduces every file byte for byte.
"""
from __future__ import annotations

import json
import shutil
import sys
from pathlib import Path

from PIL import Image, ImageDraw

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from cardforge.model import ENERGY_TYPES  # noqa: E402

ASSETS = REPO / "assets"
CANVAS = (747, 1038)

TYPE_COLORS = {
    "Grass": (76, 175, 80),
    "Fire": (226, 88, 34),
    "Water": (33, 150, 243),
    "Lightning": (246, 201, 14),
    "Psychic": (156, 39, 176),
    "Fighting": (160, 82, 45),
    "Darkness": (55, 71, 79),
    "Metal": (158, 158, 158),
    "Fairy": (244, 143, 177),
    "Dragon": (184, 134, 11),
    "Colorless": (224, 224, 224),
}

GLYPH_LETTERS = {
    "Grass": "G", "Fire": "R", "Water": "W", "Lightning": "L", "Psychic": "P",
    "Fighting": "F", "Darkness": "D", "Metal": "M", "Fairy": "Y",
    "Dragon": "N", "Colorless": "C",
}

LAYOUT = {
    "template_version": "1",
    "canvas": {"width": 747, "height": 1038},
    "boxes": {
        "name": [60, 42, 420, 54],
        "hp": [490, 42, 160, 54],
        "type_icon": [658, 40, 56, 56],
        "art": [62, 112, 623, 430],
        "body": [62, 560, 623, 322],
        "wrr": [62, 894, 623, 46],
        "flavor": [62, 948, 623, 58],
    },
    "fonts": {
        "name": {"file": "DejaVuSans-Bold.ttf", "size": 40, "min_size": 24},
        "hp": {"file": "DejaVuSans-Bold.ttf", "size": 34, "min_size": 20},
        "section_name": {"file": "DejaVuSans-Bold.ttf", "size": 26, "min_size": 16},
        "section_text": {"file": "DejaVuSans.ttf", "size": 19, "min_size": 13},
        "wrr": {"file": "DejaVuSans.ttf", "size": 20, "min_size": 14},
        "flavor": {"file": "DejaVuSans.ttf", "size": 17, "min_size": 11},
    },
    "glyph_px": 30,
}


def shade(color: tuple[int, int, int], factor: float) -> tuple[int, int, int]:
    return tuple(max(0, min(255, int(c * factor))) for c in color)


def build_frame(card_type: str) -> Image.Image:
    color = TYPE_COLORS[card_type]
    img = Image.new("RGB", CANVAS, shade(color, 0.9))
    draw = ImageDraw.Draw(img)
    # inner panel
    draw.rounded_rectangle([18, 18, CANVAS[0] - 19, CANVAS[1] - 19],
                           radius=24, fill=shade(color, 1.12))
    # text panels: header, body, strip, flavor
    panel = (250, 247, 240)
    boxes = LAYOUT["boxes"]
    for key in ("body", "wrr", "flavor"):
        x, y, w, h = boxes[key]
        draw.rounded_rectangle([x - 8, y - 6, x + w + 8, y + h + 6],
                               radius=10, fill=panel)
    # art window backing
    x, y, w, h = boxes["art"]
    draw.rectangle([x - 4, y - 4, x + w + 4, y + h + 4], fill=shade(color, 0.55))
    return img


def build_glyph(card_type: str, size: int = 64) -> Image.Image:
    color = TYPE_COLORS[card_type]
    img = Image.new("RGBA", (size, size), (0, 0, 0, 0))
    draw = ImageDraw.Draw(img)
    draw.ellipse([2, 2, size - 3, size - 3], fill=color + (255,),
                 outline=(40, 40, 40, 255), width=3)
    # letter marker, drawn as simple strokes via a font
    from PIL import ImageFont

    font = ImageFont.truetype(str(ASSETS / "fonts" / "DejaVuSans-Bold.ttf"), 34)
    letter = GLYPH_LETTERS[card_type]
    bbox = draw.textbbox((0, 0), letter, font=font)
    tw, th = bbox[2] - bbox[0], bbox[3] - bbox[1]
    fill = (30, 30, 30, 255) if sum(color) > 330 else (245, 245, 245, 255)
    draw.text(((size - tw) / 2 - bbox[0], (size - th) / 2 - bbox[1]),
              letter, font=font, fill=fill)
    return img


def build_test_art(width: int = 1024, height: int = 768) -> Image.Image:
    """Fixed artwork for golden tests: vertical gradient plus rings."""
    img = Image.new("RGB", (width, height))
    px = img.load()
    for y in range(height):
        for x in range(width):
            px[x, y] = (40 + (x * 160) // width, 60 + (y * 120) // height, 120)
    draw = ImageDraw.Draw(img)
    cx, cy = width // 2, height // 2
    for i, r in enumerate(range(60, 320, 52)):
        tone = 230 - i * 28
        draw.ellipse([cx - r, cy - r, cx + r, cy + r], outline=(tone, tone, 90), width=10)
    return img


def copy_fonts() -> None:
    import matplotlib

    src = Path(matplotlib.get_data_path()) / "fonts" / "ttf"
    dest = ASSETS / "fonts"
    dest.mkdir(parents=True, exist_ok=True)
    for name in ("DejaVuSans.ttf", "DejaVuSans-Bold.ttf"):
        shutil.copyfile(src / name, dest / name)
    license_src = src / "LICENSE_DEJAVU"
    if license_src.exists():
        shutil.copyfile(license_src, dest / "LICENSE_DEJAVU")


def main() -> None:
    (ASSETS / "frames").mkdir(parents=True, exist_ok=True)
    (ASSETS / "glyphs").mkdir(parents=True, exist_ok=True)
    copy_fonts()

    for card_type in ENERGY_TYPES:
        build_frame(card_type).save(ASSETS / "frames" / f"{card_type}.png", optimize=True)
        build_glyph(card_type).save(ASSETS / "glyphs" / f"{card_type}.png", optimize=True)

    (ASSETS / "layout.json").write_text(
        json.dumps(LAYOUT, indent=2) + "\n", encoding="utf-8")

    fixtures = REPO / "fixtures"
    fixtures.mkdir(exist_ok=True)
    build_test_art().save(fixtures / "test_art_1024x768.png", optimize=True)
    print(f"assets written under {ASSETS}")


if __name__ == "__main__":
    main()
