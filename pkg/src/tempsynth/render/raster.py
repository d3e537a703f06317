"""Pillow rasterizer: FramePlan -> packed RGB24 frames."""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Iterator

from PIL import Image, ImageDraw, ImageFont

from ..model import SpecError
from .plan import DrawCommand, FramePlan

SUPERSAMPLE = 4
GLYPHS = ("circle", "square", "triangle", "star")


def shape_polygon(op: str, x: float, y: float, size: float, angle: float = 0.0) -> list[tuple[float, float]]:
    """Vertices of a glyph centred at (x, y); ``size`` is the circumradius.

    Rotation is counter-clockwise on screen (y axis pointing down).
    """
    if op == "square":
        base = [(math.radians(45 + 90 * i), size) for i in range(4)]
    elif op == "triangle":
        base = [(math.radians(90 + 120 * i), size) for i in range(3)]
    elif op == "star":
        base = [(math.radians(90 + 36 * i), size if i % 2 == 0 else size * 0.45) for i in range(10)]
    else:
        raise ValueError(f"no polygon for {op!r}")
    a = math.radians(angle)
    return [(x + r * math.cos(t + a), y - r * math.sin(t + a)) for t, r in base]


@lru_cache(maxsize=1)
def _font() -> ImageFont.ImageFont:
    return ImageFont.load_default_imagefont()


@lru_cache(maxsize=4096)
def text_mask(text: str, scale: int) -> Image.Image:
    font = _font()
    left, top, right, bottom = font.getbbox(text)
    w, h = max(1, right - left), max(1, bottom - top)
    mask = Image.new("L", (w, h), 0)
    ImageDraw.Draw(mask).text((-left, -top), text, fill=255, font=font)
    if scale != 1:
        mask = mask.resize((w * scale, h * scale), Image.Resampling.NEAREST)
    return mask


def _paste(img: Image.Image, color, mask: Image.Image, x0: int, y0: int) -> None:
    # clip to canvas before pasting
    W, H = img.size
    w, h = mask.size
    cx0, cy0 = max(0, -x0), max(0, -y0)
    cx1, cy1 = min(w, W - x0), min(h, H - y0)
    if cx1 <= cx0 or cy1 <= cy0:
        return
    if (cx0, cy0, cx1, cy1) != (0, 0, w, h):
        mask = mask.crop((cx0, cy0, cx1, cy1))
    img.paste(color, (x0 + cx0, y0 + cy0, x0 + cx1, y0 + cy1), mask)


def _glyph(img: Image.Image, draw: ImageDraw.ImageDraw, c: DrawCommand, antialias: bool) -> None:
    if not antialias:
        if c.op == "circle":
            draw.ellipse((c.x - c.size, c.y - c.size, c.x + c.size, c.y + c.size), fill=c.color)
        else:
            draw.polygon(shape_polygon(c.op, c.x, c.y, c.size, c.angle), fill=c.color)
        return
    x0, y0 = math.floor(c.x - c.size) - 1, math.floor(c.y - c.size) - 1
    side = int(math.ceil(c.x + c.size)) + 2 - x0
    side = max(side, int(math.ceil(c.y + c.size)) + 2 - y0)
    s = SUPERSAMPLE
    mask = Image.new("L", (side * s, side * s), 0)
    md = ImageDraw.Draw(mask)
    if c.op == "circle":
        md.ellipse(((c.x - c.size - x0) * s, (c.y - c.size - y0) * s,
                    (c.x + c.size - x0) * s, (c.y + c.size - y0) * s), fill=255)
    else:
        pts = [((px - x0) * s, (py - y0) * s) for px, py in shape_polygon(c.op, c.x, c.y, c.size, c.angle)]
        md.polygon(pts, fill=255)
    _paste(img, c.color, mask.reduce(s), x0, y0)


def draw_command(img: Image.Image, draw: ImageDraw.ImageDraw, c: DrawCommand, antialias: bool = True) -> None:
    if c.op in GLYPHS:
        _glyph(img, draw, c, antialias)
    elif c.op == "rect":
        draw.rectangle((round(c.x - c.size), round(c.y - c.h), round(c.x + c.size), round(c.y + c.h)), fill=c.color)
    elif c.op == "box":
        draw.rectangle((round(c.x - c.size), round(c.y - c.h), round(c.x + c.size), round(c.y + c.h)),
                       outline=c.color, width=3)
    elif c.op == "text":
        mask = text_mask(c.text, c.scale)
        if c.ref == "anchor-left":
            x0 = round(c.x)
        else:
            x0 = round(c.x - mask.width / 2)
        _paste(img, c.color, mask, x0, round(c.y - mask.height / 2))
    else:
        raise SpecError(f"unknown draw op {c.op!r}")


def check_plan(plan: FramePlan) -> None:
    limit = min(plan.width, plan.height) / 2
    for frame in plan.frames[:1] + plan.frames[-1:]:
        for c in frame:
            if c.op in GLYPHS and c.size > limit:
                raise SpecError(f"glyph size {c.size} does not fit a {plan.width}x{plan.height} canvas")


def render_frame(commands, width: int, height: int, background, antialias: bool = True) -> Image.Image:
    img = Image.new("RGB", (width, height), tuple(background))
    draw = ImageDraw.Draw(img)
    for c in commands:
        draw_command(img, draw, c, antialias)
    return img


def rasterize(plan: FramePlan, antialias: bool = True) -> Iterator[bytes]:
    """Yield each frame as ``width*height*3`` RGB bytes.

    Consecutive frames with identical commands (static reveals) reuse the
    previous buffer.
    """
    check_plan(plan)
    last_cmds, last_bytes = None, b""
    for cmds in plan.frames:
        if cmds != last_cmds:
            last_bytes = render_frame(cmds, plan.width, plan.height, plan.background, antialias).tobytes()
            last_cmds = cmds
        yield last_bytes
