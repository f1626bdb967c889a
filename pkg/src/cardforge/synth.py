"""Synthesis: composite mechanics + artwork into a print-style card image,
and export the interchange JSON understood by the web cardmaker.

Rendering is a pure function of (record, artwork, template, fonts): identical
inputs produce identical PNG bytes. Text that overflows its box is shrunk
stepwise to the font's minimum size and then truncated with an ellipsis; every
truncation is reported as a warning carrying the original string, never as a
failure.
"""
from __future__ import annotations

import hashlib
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from PIL import Image, ImageDraw, ImageFont

from .artgen import ArtworkResult
from .errors import ExportError, TemplateError
from .model import (
    CANONICAL_FIELD_ORDER,
    ENERGY_TYPES,
    Ability,
    Attack,
    CardRecord,
    TypeModifier,
    record_from_dict,
)

logger = logging.getLogger(__name__)

ELLIPSIS = "…"


@dataclass
class RenderTemplate:
    assets_dir: Path
    layout: dict[str, Any]
    frame_assets: dict[str, Path]
    glyph_assets: dict[str, Path]
    fonts_dir: Path
    _image_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def template_version(self) -> str:
        return str(self.layout.get("template_version", "0"))

    @property
    def canvas_size(self) -> tuple[int, int]:
        canvas = self.layout["canvas"]
        return int(canvas["width"]), int(canvas["height"])

    def box(self, name: str) -> tuple[int, int, int, int]:
        x, y, w, h = self.layout["boxes"][name]
        return int(x), int(y), int(w), int(h)

    def frame_image(self, card_type: str) -> Image.Image:
        key = ("frame", card_type)
        img = self._image_cache.get(key)
        if img is None:
            img = Image.open(self.frame_assets[card_type]).convert("RGB")
            self._image_cache[key] = img
        return img.copy()

    def glyph_image(self, card_type: str, px: int) -> Image.Image:
        key = ("glyph", card_type, px)
        img = self._image_cache.get(key)
        if img is None:
            with Image.open(self.glyph_assets[card_type]) as glyph:
                img = glyph.convert("RGBA").resize((px, px), Image.LANCZOS)
            self._image_cache[key] = img
        return img


@dataclass
class RenderWarning:
    box: str
    message: str
    original_text: str


@dataclass
class RenderedCard:
    png_bytes: bytes
    source_record: CardRecord
    artwork_ref: str
    template_version: str
    warnings: list[RenderWarning] = field(default_factory=list)


def load_render_template(assets_dir: Path) -> RenderTemplate:
    assets_dir = Path(assets_dir)
    layout_path = assets_dir / "layout.json"
    if not layout_path.exists():
        raise TemplateError(f"layout file not found: {layout_path}")
    layout = json.loads(layout_path.read_text(encoding="utf-8"))

    frames, glyphs = {}, {}
    for card_type in ENERGY_TYPES:
        frame = assets_dir / "frames" / f"{card_type}.png"
        glyph = assets_dir / "glyphs" / f"{card_type}.png"
        if not frame.exists():
            raise TemplateError(f"missing frame asset for {card_type}: {frame}")
        if not glyph.exists():
            raise TemplateError(f"missing energy glyph for {card_type}: {glyph}")
        frames[card_type] = frame
        glyphs[card_type] = glyph
    return RenderTemplate(
        assets_dir=assets_dir,
        layout=layout,
        frame_assets=frames,
        glyph_assets=glyphs,
        fonts_dir=assets_dir / "fonts",
    )


def placeholder_art(width: int = 1024, height: int = 768) -> bytes:
    """Deterministic flat stand-in used when no artwork is available."""
    img = Image.new("RGB", (width, height), (210, 208, 200))
    draw = ImageDraw.Draw(img)
    for offset in range(-height, width, 64):
        draw.line([(offset, height), (offset + height, 0)], fill=(190, 188, 180), width=18)
    buf = io.BytesIO()
    img.save(buf, format="PNG", optimize=True)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Text layout helpers
# ---------------------------------------------------------------------------


class _FontCache:
    def __init__(self, fonts_dir: Path):
        self.fonts_dir = fonts_dir
        self._cache: dict[tuple[str, int], ImageFont.FreeTypeFont] = {}

    def get(self, file: str, size: int) -> ImageFont.FreeTypeFont:
        key = (file, size)
        font = self._cache.get(key)
        if font is None:
            path = self.fonts_dir / file
            if not path.exists():
                raise TemplateError(f"missing font asset: {path}")
            font = ImageFont.truetype(str(path), size)
            self._cache[key] = font
        return font


def _wrap(text: str, font: ImageFont.FreeTypeFont, max_width: int) -> list[str]:
    lines: list[str] = []
    current = ""
    for word in text.split():
        candidate = f"{current} {word}".strip()
        if font.getlength(candidate) <= max_width or not current:
            current = candidate
        else:
            lines.append(current)
            current = word
    if current:
        lines.append(current)
    return lines


def _line_height(font: ImageFont.FreeTypeFont) -> int:
    ascent, descent = font.getmetrics()
    return ascent + descent + 2


def _truncate_line(text: str, font: ImageFont.FreeTypeFont, max_width: int) -> str:
    if font.getlength(text) <= max_width:
        return text
    while text and font.getlength(text + ELLIPSIS) > max_width:
        text = text[:-1]
    return text + ELLIPSIS


@dataclass
class _TextFitter:
    """Fits text into boxes, shrinking then truncating, collecting warnings."""

    fonts: _FontCache
    warnings: list[RenderWarning]

    def fit_line(self, draw: ImageDraw.ImageDraw, text: str, box_name: str,
                 box: tuple[int, int, int, int], spec: dict[str, Any],
                 fill=(20, 20, 20), align: str = "left") -> None:
        x, y, w, h = box
        size = int(spec["size"])
        min_size = int(spec.get("min_size", size))
        font = self.fonts.get(spec["file"], size)
        while font.getlength(text) > w and size > min_size:
            size -= 1
            font = self.fonts.get(spec["file"], size)
        shown = text
        if font.getlength(shown) > w:
            shown = _truncate_line(shown, font, w)
            self.warnings.append(RenderWarning(
                box=box_name,
                message=f"text truncated at minimum font size {min_size}",
                original_text=text,
            ))
        if align == "right":
            draw.text((x + w - font.getlength(shown), y), shown, font=font, fill=fill)
        else:
            draw.text((x, y), shown, font=font, fill=fill)

    def fit_block(self, draw: ImageDraw.ImageDraw, text: str, box_name: str,
                  box: tuple[int, int, int, int], spec: dict[str, Any],
                  fill=(20, 20, 20)) -> None:
        x, y, w, h = box
        size = int(spec["size"])
        min_size = int(spec.get("min_size", size))
        while True:
            font = self.fonts.get(spec["file"], size)
            lines = _wrap(text, font, w)
            if len(lines) * _line_height(font) <= h or size <= min_size:
                break
            size -= 1
        line_h = _line_height(font)
        max_lines = max(1, h // line_h)
        if len(lines) > max_lines:
            kept = lines[:max_lines]
            kept[-1] = _truncate_line(kept[-1] + ELLIPSIS, font, w)
            self.warnings.append(RenderWarning(
                box=box_name,
                message=f"block truncated to {max_lines} lines at minimum font size",
                original_text=text,
            ))
            lines = kept
        for i, line in enumerate(lines):
            draw.text((x, y + i * line_h), line, font=font, fill=fill)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _center_crop(img: Image.Image, target_w: int, target_h: int) -> Image.Image:
    scale = max(target_w / img.width, target_h / img.height)
    resized = img.resize((round(img.width * scale), round(img.height * scale)),
                         Image.LANCZOS)
    left = (resized.width - target_w) // 2
    top = (resized.height - target_h) // 2
    return resized.crop((left, top, left + target_w, top + target_h))


def _art_bytes(artwork: ArtworkResult | bytes | None) -> bytes:
    if artwork is None:
        return placeholder_art()
    if isinstance(artwork, (bytes, bytearray)):
        return bytes(artwork)
    return artwork.image_bytes


def render_card(record: CardRecord, artwork: ArtworkResult | bytes | None,
                template: RenderTemplate) -> RenderedCard:
    """Composite frame, artwork, and text into the final card PNG."""
    primary = record.types[0]
    frame_path = template.frame_assets.get(primary)
    if frame_path is None:
        raise TemplateError(f"no frame asset for type {primary!r}")

    warnings: list[RenderWarning] = []
    fonts = _FontCache(template.fonts_dir)
    fitter = _TextFitter(fonts=fonts, warnings=warnings)
    font_specs = template.layout["fonts"]
    glyph_px = int(template.layout.get("glyph_px", 30))

    canvas = template.frame_image(primary)
    if canvas.size != template.canvas_size:
        raise TemplateError(
            f"frame {frame_path.name} is {canvas.size}, layout expects {template.canvas_size}"
        )
    draw = ImageDraw.Draw(canvas)

    # Artwork, center-cropped into the art box. Crops are cached by content
    # hash so re-rendering with the same artwork (or the placeholder) skips
    # the resample.
    art_box = template.box("art")
    art_png = _art_bytes(artwork)
    crop_key = ("art", hashlib.sha256(art_png).hexdigest(), art_box[2], art_box[3])
    cropped = template._image_cache.get(crop_key)
    if cropped is None:
        with Image.open(io.BytesIO(art_png)) as art:
            cropped = _center_crop(art.convert("RGB"), art_box[2], art_box[3])
        if len(template._image_cache) > 64:
            for key in [k for k in template._image_cache if k[0] == "art"]:
                del template._image_cache[key]
        template._image_cache[crop_key] = cropped
    canvas.paste(cropped, (art_box[0], art_box[1]))

    # Header: name, hp, primary-type icon.
    fitter.fit_line(draw, record.name, "name", template.box("name"), font_specs["name"])
    fitter.fit_line(draw, f"HP {record.hp}", "hp", template.box("hp"),
                    font_specs["hp"], align="right")
    icon_box = template.box("type_icon")
    icon = template.glyph_image(primary, icon_box[2])
    canvas.paste(icon, (icon_box[0], icon_box[1]), icon)

    # Body: abilities (omitted when empty) then attacks, stacked top-down.
    bx, by, bw, bh = template.box("body")
    cursor = by
    name_spec = font_specs["section_name"]
    text_spec = font_specs["section_text"]
    name_h = _line_height(fonts.get(name_spec["file"], int(name_spec["size"])))
    text_font = fonts.get(text_spec["file"], int(text_spec["size"]))
    text_h = _line_height(text_font)

    sections: list[tuple[Ability | Attack, str]] = []
    for ability in record.abilities:
        sections.append((ability, "ability"))
    for attack in record.attacks:
        sections.append((attack, "attack"))

    for entry, kind in sections:
        remaining = by + bh - cursor
        if remaining < name_h:
            warnings.append(RenderWarning(
                box="body", message="section omitted: body box exhausted",
                original_text=entry.name,
            ))
            continue
        if kind == "ability":
            fitter.fit_line(draw, f"Ability: {entry.name}", "body",
                            (bx, cursor, bw, name_h), name_spec, fill=(120, 30, 30))
            cursor += name_h
        else:
            glyph_x = bx
            for energy in entry.cost:
                icon = template.glyph_image(energy, glyph_px)
                canvas.paste(icon, (glyph_x, cursor + (name_h - glyph_px) // 2), icon)
                glyph_x += glyph_px + 4
            name_x = glyph_x + 8 if entry.cost else bx
            damage_font = fonts.get(name_spec["file"], int(name_spec["size"]))
            damage_w = int(damage_font.getlength(entry.damage)) + 8 if entry.damage else 0
            fitter.fit_line(draw, entry.name, "body",
                            (name_x, cursor, bw - (name_x - bx) - damage_w, name_h),
                            name_spec)
            if entry.damage:
                fitter.fit_line(draw, entry.damage, "body",
                                (bx, cursor, bw, name_h), name_spec, align="right")
            cursor += name_h
        text = getattr(entry, "text", "")
        if text:
            block_h = min(by + bh - cursor, 3 * text_h)
            if block_h >= text_h:
                fitter.fit_block(draw, text, "body", (bx, cursor, bw, block_h), text_spec)
                lines_used = min(len(_wrap(text, text_font, bw)), block_h // text_h)
                cursor += lines_used * text_h
            else:
                warnings.append(RenderWarning(
                    box="body", message="effect text omitted: body box exhausted",
                    original_text=text,
                ))
        cursor += 10

    # Weakness / resistance / retreat strip.
    wx, wy, ww, wh = template.box("wrr")
    wrr_spec = font_specs["wrr"]
    weak = ", ".join(f"{m.type} {m.value}" for m in record.weaknesses) or "none"
    resist = ", ".join(f"{m.type} {m.value}" for m in record.resistances) or "none"
    third = ww // 3
    fitter.fit_line(draw, f"weakness: {weak}", "wrr", (wx, wy + 10, third - 8, wh), wrr_spec)
    fitter.fit_line(draw, f"resistance: {resist}", "wrr",
                    (wx + third, wy + 10, third - 8, wh), wrr_spec)
    fitter.fit_line(draw, f"retreat: {record.retreatCost}", "wrr",
                    (wx + 2 * third, wy + 10, third - 8, wh), wrr_spec)

    # Flavor text.
    fitter.fit_block(draw, record.flavorText, "flavor", template.box("flavor"),
                     font_specs["flavor"], fill=(60, 60, 60))

    buf = io.BytesIO()
    canvas.save(buf, format="PNG", compress_level=3)
    artwork_ref = "" if artwork is None else getattr(artwork, "backend_job_id", "")
    return RenderedCard(
        png_bytes=buf.getvalue(),
        source_record=record,
        artwork_ref=artwork_ref,
        template_version=template.template_version,
        warnings=warnings,
    )


# ---------------------------------------------------------------------------
# Cardmaker export
# ---------------------------------------------------------------------------


def load_cardmaker_map(path: Path) -> dict[str, Any]:
    mapping = json.loads(Path(path).read_text(encoding="utf-8"))
    for key in ("fields", "limits"):
        if key not in mapping:
            raise ExportError(f"cardmaker mapping is missing its {key!r} table")
    return mapping


def export_cardmaker_json(record: CardRecord, artwork_path: str,
                          mapping: dict[str, Any]) -> dict[str, Any]:
    """Translate a CardRecord into the web cardmaker's import document.

    Lossless for every mapped field; fields absent from the mapping table and
    list fields that exceed the cardmaker's slot limits raise ExportError.
    """
    fields_map: dict[str, str] = mapping["fields"]
    limits: dict[str, int] = mapping["limits"]

    unmapped = [name for name in CANONICAL_FIELD_ORDER if name not in fields_map]
    if unmapped:
        raise ExportError(f"no cardmaker mapping for fields: {unmapped}")

    overflow = []
    for list_field, values in (
        ("abilities", record.abilities),
        ("attacks", record.attacks),
        ("weaknesses", record.weaknesses),
        ("resistances", record.resistances),
    ):
        limit = limits.get(list_field)
        if limit is not None and len(values) > limit:
            overflow.append(f"{list_field}: {len(values)} > {limit}")
    if overflow:
        raise ExportError(
            "record does not fit the cardmaker schema (" + "; ".join(overflow) + ")"
        )

    doc: dict[str, Any] = {
        fields_map["supertype"]: record.supertype,
        fields_map["subtypes"]: record.subtypes[0],
        fields_map["name"]: record.name,
        fields_map["hp"]: record.hp,
        fields_map["types"]: record.types[0],
        fields_map["flavorText"]: record.flavorText,
        fields_map["abilities"]: [
            {"name": a.name, "text": a.text} for a in record.abilities
        ],
        fields_map["attacks"]: [
            {
                "name": a.name,
                "energyCost": list(a.cost),
                "damage": a.damage,
                "text": a.text,
            }
            for a in record.attacks
        ],
        fields_map["retreatCost"]: record.retreatCost,
    }
    if len(record.types) > 1:
        doc["secondaryType"] = record.types[1]
    if record.weaknesses:
        doc[fields_map["weaknesses"]] = record.weaknesses[0].type
        doc[fields_map["weaknesses"] + "Amount"] = record.weaknesses[0].value
    if record.resistances:
        doc[fields_map["resistances"]] = record.resistances[0].type
        doc[fields_map["resistances"] + "Amount"] = record.resistances[0].value
    if artwork_path:
        doc["artwork"] = str(artwork_path)
    if record.artist:
        doc["artist"] = record.artist
    return doc


def import_cardmaker_json(doc: dict[str, Any], mapping: dict[str, Any]) -> CardRecord:
    """Inverse of export_cardmaker_json for the mapped fields."""
    fields_map: dict[str, str] = mapping["fields"]

    types = [doc[fields_map["types"]]]
    if doc.get("secondaryType"):
        types.append(doc["secondaryType"])

    weaknesses = []
    if fields_map["weaknesses"] in doc:
        weaknesses.append(TypeModifier(
            type=doc[fields_map["weaknesses"]],
            value=doc.get(fields_map["weaknesses"] + "Amount", "x2"),
        ))
    resistances = []
    if fields_map["resistances"] in doc:
        resistances.append(TypeModifier(
            type=doc[fields_map["resistances"]],
            value=doc.get(fields_map["resistances"] + "Amount", "-20"),
        ))

    record = record_from_dict({
        "name": doc[fields_map["name"]],
        "flavorText": doc[fields_map["flavorText"]],
        "types": types,
        "supertype": doc[fields_map["supertype"]],
        "subtypes": [doc[fields_map["subtypes"]]],
        "hp": doc[fields_map["hp"]],
        "abilities": doc.get(fields_map["abilities"], []),
        "attacks": [
            {
                "name": a["name"],
                "cost": a.get("energyCost", []),
                "damage": a.get("damage", ""),
                "text": a.get("text", ""),
            }
            for a in doc.get(fields_map["attacks"], [])
        ],
        "retreatCost": doc.get(fields_map["retreatCost"], 0),
    })
    record.weaknesses = weaknesses
    record.resistances = resistances
    record.artist = doc.get("artist", "")
    return record


def write_cardmaker_json(doc: dict[str, Any], out_path: Path) -> None:
    Path(out_path).write_text(
        json.dumps(doc, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
