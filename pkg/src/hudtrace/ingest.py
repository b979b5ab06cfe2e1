"""Frame sources, HUD layout configuration, and region-of-interest crops.

Video decoding is out of scope: sources are either a directory of numbered
PNG frames with a ``stream.meta`` sidecar, or a raw rgb24 pipe speaking the
FRAMES/1 protocol.  Timestamps are exact rationals index/fps.
"""

from __future__ import annotations

import io
import logging
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

import numpy as np

log = logging.getLogger(__name__)

MIN_WIDTH, MIN_HEIGHT = 1280, 720
FULL_HD = (1920, 1080)
FRAME_FILE_RE = re.compile(r"^frame_(\d{8})\.png$")


class SourceError(RuntimeError):
    """The frame source is unreadable or malformed."""


class NormRect(NamedTuple):
    """Rectangle in normalized [0,1]^2 coordinates."""

    x: float
    y: float
    w: float
    h: float

    def validate(self, name: str = "rect") -> None:
        if not (0.0 <= self.x and 0.0 <= self.y and self.w > 0 and self.h > 0
                and self.x + self.w <= 1.0 + 1e-12 and self.y + self.h <= 1.0 + 1e-12):
            raise ValueError(f"{name} not inside [0,1]^2: {self}")


class PixelRect(NamedTuple):
    x: int
    y: int
    w: int
    h: int


@dataclass(frozen=True)
class Frame:
    index: int
    timestamp: Fraction  # seconds from stream start, index/fps
    pixels: np.ndarray  # (H, W, 3) uint8

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def timestamp_s(self) -> float:
        return float(self.timestamp)


@dataclass(frozen=True)
class RoiCrop:
    source_frame_index: int
    rect_px: PixelRect
    pixels: np.ndarray


@dataclass
class FrameStream:
    """Single-consumer sequential frame source."""

    frames: Iterator[Frame]
    fps: Fraction
    source_id: str = ""
    width: int | None = None
    height: int | None = None

    def __iter__(self) -> Iterator[Frame]:
        return self.frames


def rect_to_pixels(rect: NormRect, width: int, height: int) -> PixelRect:
    """Rasterize a normalized rect: floor the origin, floor the exclusive end.

    A rect whose extent rounds to zero pixels is degenerate.
    """
    x0 = math_floor(rect.x * width)
    y0 = math_floor(rect.y * height)
    x1 = math_floor((rect.x + rect.w) * width)
    y1 = math_floor((rect.y + rect.h) * height)
    x1, y1 = min(x1, width), min(y1, height)
    if x1 - x0 <= 0 or y1 - y0 <= 0:
        raise ValueError(f"degenerate rect: {rect} on {width}x{height}")
    return PixelRect(x0, y0, x1 - x0, y1 - y0)


def math_floor(v: float) -> int:
    return int(np.floor(v))


def crop_roi(frame, rect: NormRect) -> RoiCrop:
    """Cut the pixel rectangle of ``rect`` out of a frame; no resampling."""
    rect = NormRect(*rect)
    rect.validate()
    px = getattr(frame, "pixels", frame)
    h, w = px.shape[0], px.shape[1]
    pr = rect_to_pixels(rect, w, h)
    view = px[pr.y:pr.y + pr.h, pr.x:pr.x + pr.w]
    return RoiCrop(source_frame_index=getattr(frame, "index", 0),
                   rect_px=pr, pixels=view)


# ---------------------------------------------------------------------------
# HUD layout


@dataclass(frozen=True)
class HudLayout:
    minimap_rect: NormRect
    phase_icon_rect: NormRect
    kill_counter_rect: NormRect
    player_counter_rect: NormRect
    minimap_scale: float  # map pixels per minimap pixel
    minimap_mask_radius: float  # fraction of minimap width, center exclusion
    glyph_atlas_path: str = ""
    phase_atlas_path: str = ""
    map_image_path: str = ""

    def validate(self) -> None:
        self.minimap_rect.validate("minimap")
        self.phase_icon_rect.validate("phase")
        self.kill_counter_rect.validate("kills")
        self.player_counter_rect.validate("players")
        if not self.minimap_scale > 0:
            raise ValueError("minimap.scale must be positive")
        if not (0.0 <= self.minimap_mask_radius < 0.5):
            raise ValueError("minimap.mask_radius must be in [0, 0.5)")
        mm = self.minimap_rect
        for name, r in (("kills", self.kill_counter_rect),
                        ("players", self.player_counter_rect)):
            if _rects_overlap(mm, r):
                raise ValueError(f"{name} rect overlaps the minimap")


def _rects_overlap(a: NormRect, b: NormRect) -> bool:
    return (a.x < b.x + b.w and b.x < a.x + a.w
            and a.y < b.y + b.h and b.y < a.y + a.h)


_LAYOUT_KEYS = {
    "minimap.x", "minimap.y", "minimap.w", "minimap.h",
    "phase.x", "phase.y", "phase.w", "phase.h",
    "kills.x", "kills.y", "kills.w", "kills.h",
    "players.x", "players.y", "players.w", "players.h",
    "minimap.scale", "minimap.mask_radius",
    "atlas.glyphs", "atlas.phases", "map.image",
}


def parse_key_value_text(text: str) -> dict[str, str]:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_hud_layout(path) -> HudLayout:
    path = Path(path)
    try:
        pairs = parse_key_value_text(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise SourceError(f"cannot read layout file {path}: {exc}") from exc
    unknown = set(pairs) - _LAYOUT_KEYS
    if unknown:
        raise ValueError(f"unknown layout key: {sorted(unknown)[0]}")

    def rect(prefix: str) -> NormRect:
        try:
            return NormRect(*(float(pairs[f"{prefix}.{k}"]) for k in "xywh"))
        except KeyError as exc:
            raise ValueError(f"layout missing key: {exc.args[0]}") from exc
        except ValueError as exc:
            raise ValueError(f"bad value for {prefix} rect: {exc}") from exc

    try:
        scale = float(pairs["minimap.scale"])
        mask_radius = float(pairs["minimap.mask_radius"])
    except KeyError as exc:
        raise ValueError(f"layout missing key: {exc.args[0]}") from exc

    base = path.parent

    def resource(key: str) -> str:
        value = pairs.get(key, "")
        if not value:
            return ""
        p = Path(value)
        return str(p if p.is_absolute() else base / p)

    layout = HudLayout(
        minimap_rect=rect("minimap"),
        phase_icon_rect=rect("phase"),
        kill_counter_rect=rect("kills"),
        player_counter_rect=rect("players"),
        minimap_scale=scale,
        minimap_mask_radius=mask_radius,
        glyph_atlas_path=resource("atlas.glyphs"),
        phase_atlas_path=resource("atlas.phases"),
        map_image_path=resource("map.image"),
    )
    layout.validate()
    return layout


def save_hud_layout(layout: HudLayout, path) -> None:
    lines = []
    for prefix, r in (("minimap", layout.minimap_rect),
                      ("phase", layout.phase_icon_rect),
                      ("kills", layout.kill_counter_rect),
                      ("players", layout.player_counter_rect)):
        for k, v in zip("xywh", r):
            lines.append(f"{prefix}.{k}={v!r}")
    lines.append(f"minimap.scale={layout.minimap_scale!r}")
    lines.append(f"minimap.mask_radius={layout.minimap_mask_radius!r}")
    if layout.glyph_atlas_path:
        lines.append(f"atlas.glyphs={layout.glyph_atlas_path}")
    if layout.phase_atlas_path:
        lines.append(f"atlas.phases={layout.phase_atlas_path}")
    if layout.map_image_path:
        lines.append(f"map.image={layout.map_image_path}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# frame sources


def parse_fps(text: str) -> Fraction:
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        fps = Fraction(int(num), int(den))
    else:
        fps = Fraction(text)
    if fps <= 0:
        raise ValueError(f"fps must be positive, got {text!r}")
    return fps


def _check_resolution(width: int, height: int, source: str) -> None:
    if width < MIN_WIDTH or height < MIN_HEIGHT:
        raise SourceError(
            f"{source}: resolution {width}x{height} below minimum "
            f"{MIN_WIDTH}x{MIN_HEIGHT}")
    if width < FULL_HD[0] or height < FULL_HD[1]:
        log.warning("%s: resolution %dx%d is below 1080p; "
                    "extraction accuracy may degrade", source, width, height)


def _iter_directory_frames(directory: Path, fps: Fraction) -> Iterator[Frame]:
    from PIL import Image

    entries = []
    for p in directory.iterdir():
        m = FRAME_FILE_RE.match(p.name)
        if m:
            entries.append((int(m.group(1)), p))
    entries.sort()
    dims: tuple[int, int] | None = None
    for index, path in entries:
        with Image.open(path) as im:
            px = np.asarray(im.convert("RGB"), dtype=np.uint8)
        if dims is None:
            dims = (px.shape[1], px.shape[0])
            _check_resolution(dims[0], dims[1], str(directory))
        elif (px.shape[1], px.shape[0]) != dims:
            raise SourceError(
                f"{path}: frame dimensions {px.shape[1]}x{px.shape[0]} "
                f"differ from stream dimensions {dims[0]}x{dims[1]}")
        yield Frame(index=index, timestamp=Fraction(index) / fps, pixels=px)


def open_directory_source(directory, fps: Fraction | None = None) -> FrameStream:
    directory = Path(directory)
    meta_path = directory / "stream.meta"
    source_id = directory.name
    meta_fps: Fraction | None = None
    if meta_path.exists():
        pairs = parse_key_value_text(meta_path.read_text(encoding="utf-8"))
        if "fps" in pairs:
            meta_fps = parse_fps(pairs["fps"])
        source_id = pairs.get("source_id", source_id)
    fps = fps or meta_fps
    if fps is None:
        raise SourceError(f"{directory}: no fps given and no stream.meta")
    has_any = any(FRAME_FILE_RE.match(p.name) for p in directory.iterdir())
    if not has_any:
        raise SourceError(f"no frames found in {directory}")
    return FrameStream(frames=_iter_directory_frames(directory, fps),
                       fps=fps, source_id=source_id)


FRAMES1_HEADER_RE = re.compile(
    rb"^FRAMES/1 w=(\d+) h=(\d+) fps=(\d+)/(\d+) fmt=rgb24\n$")


def open_pipe_source(stream: io.BufferedIOBase, source_id: str = "pipe",
                     fps: Fraction | None = None) -> FrameStream:
    """Read the FRAMES/1 protocol: one ASCII header line, then raw frames."""
    header = stream.readline()
    m = FRAMES1_HEADER_RE.match(header)
    if not m:
        raise SourceError(f"malformed FRAMES/1 header: {header[:80]!r}")
    width, height = int(m.group(1)), int(m.group(2))
    hdr_fps = Fraction(int(m.group(3)), int(m.group(4)))
    if hdr_fps <= 0:
        raise SourceError("malformed FRAMES/1 header: fps must be positive")
    fps = fps or hdr_fps
    _check_resolution(width, height, source_id)
    frame_bytes = width * height * 3

    def gen() -> Iterator[Frame]:
        index = 0
        while True:
            buf = stream.read(frame_bytes)
            if not buf:
                return
            if len(buf) != frame_bytes:
                raise SourceError(
                    f"{source_id}: truncated frame {index}: "
                    f"{len(buf)} of {frame_bytes} bytes")
            px = np.frombuffer(buf, dtype=np.uint8).reshape(height, width, 3)
            yield Frame(index=index, timestamp=Fraction(index) / fps, pixels=px)
            index += 1

    return FrameStream(frames=gen(), fps=fps, source_id=source_id,
                       width=width, height=height)


def write_frames_pipe(frames: Iterable[Frame], stream: io.BufferedIOBase,
                      fps: Fraction, width: int, height: int) -> int:
    """Write the FRAMES/1 protocol; returns the number of frames written."""
    header = f"FRAMES/1 w={width} h={height} fps={fps.numerator}/{fps.denominator} fmt=rgb24\n"
    stream.write(header.encode("ascii"))
    n = 0
    for frame in frames:
        if (frame.width, frame.height) != (width, height):
            raise SourceError(
                f"frame {frame.index} is {frame.width}x{frame.height}, "
                f"pipe declared {width}x{height}")
        stream.write(np.ascontiguousarray(frame.pixels, dtype=np.uint8).tobytes())
        n += 1
    return n


def open_frame_source(uri, fps: Fraction | None = None) -> FrameStream:
    """Open a frame directory, a FRAMES/1 file, or '-' for stdin."""
    if uri == "-":
        import sys

        return open_pipe_source(sys.stdin.buffer, source_id="stdin", fps=fps)
    path = Path(uri)
    if path.is_dir():
        return open_directory_source(path, fps)
    if path.is_file() or path.is_fifo():
        f = open(path, "rb")
        return open_pipe_source(f, source_id=path.stem, fps=fps)
    raise SourceError(f"unreadable frame source: {uri}")


def sample_at_rate(stream: FrameStream, rate_hz: Fraction | int = 1) -> FrameStream:
    """Yield the first frame with timestamp >= k/rate_hz for each k = 0,1,..."""
    rate = Fraction(rate_hz)
    if rate <= 0:
        raise ValueError("rate_hz must be positive")
    if rate > stream.fps:
        raise ValueError(f"rate {rate} exceeds stream fps {stream.fps}")

    def gen() -> Iterator[Frame]:
        k = 0
        for frame in stream.frames:
            if frame.timestamp >= Fraction(k, 1) / rate:
                yield frame
                k += 1

    return FrameStream(frames=gen(), fps=stream.fps, source_id=stream.source_id,
                       width=stream.width, height=stream.height)
