"""Pixel-level primitives: luma conversion, contrast-limited adaptive
histogram equalization, masked zero-normalized cross-correlation matching,
and fixed-font glyph / icon recognition.

Gray images are plain 2-D uint8 numpy arrays.  All operations are pure
functions; the matching kernels live in :mod:`hudtrace._kernels` and run on
either the numba or the numpy backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .phases import ATLAS_PHASES, Phase, parse_phase

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
MIN_MASK_SUPPORT = 64


class MatchError(ValueError):
    """Template/search geometry makes a match impossible."""


@dataclass(frozen=True)
class MatchResult:
    """Best match offset (top-left of template in search) and its score."""

    x: int
    y: int
    score: float


@dataclass(frozen=True)
class CounterRead:
    value: int
    score: float


@dataclass(frozen=True)
class GlyphAtlas:
    """Fixed-font bitmaps; all bitmaps share ``glyph_height``."""

    entries: tuple[tuple[str, np.ndarray], ...]
    glyph_height: int
    gap: int

    def __post_init__(self):
        symbols = [s for s, _ in self.entries]
        if len(set(symbols)) != len(symbols):
            raise ValueError("duplicate glyph symbols in atlas")
        for s, bmp in self.entries:
            if bmp.shape[0] != self.glyph_height:
                raise ValueError(f"glyph {s!r} height {bmp.shape[0]} != {self.glyph_height}")
        missing = [d for d in "0123456789" if d not in symbols]
        if missing:
            raise ValueError(f"glyph atlas missing digits: {missing}")

    def bitmap(self, symbol: str) -> np.ndarray:
        for s, bmp in self.entries:
            if s == symbol:
                return bmp
        raise KeyError(symbol)


@dataclass(frozen=True)
class PhaseAtlas:
    """One bitmap per schedulable phase."""

    entries: tuple[tuple[Phase, np.ndarray], ...]

    def __post_init__(self):
        have = [p for p, _ in self.entries]
        if len(set(have)) != len(have):
            raise ValueError("duplicate phase in atlas")
        for p in ATLAS_PHASES:
            if p not in have:
                raise ValueError(f"phase atlas missing {p.value}")


def to_luma(rgb) -> np.ndarray:
    """Per-pixel luma round(0.299 R + 0.587 G + 0.114 B), uint8.

    Accepts an (H, W, 3) uint8 array or any object with a ``pixels``
    attribute holding one.  Rounding is IEEE round-half-even.
    """
    px = getattr(rgb, "pixels", rgb)
    px = np.asarray(px)
    if px.ndim != 3 or px.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) raster, got {px.shape}")
    r, g, b = LUMA_WEIGHTS
    y = r * px[:, :, 0].astype(np.float64) + g * px[:, :, 1] + b * px[:, :, 2]
    return np.clip(np.rint(y), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# CLAHE


def equalization_lut(hist: np.ndarray, clip_limit: float | None) -> np.ndarray:
    """Transfer function of one tile as float64 levels in [0, 255].

    The histogram is clipped at ``clip_limit`` times the uniform bin height
    and the clipped mass is spread evenly over all 256 bins; the transfer is
    ``255 * cdf(v-1) / (N - h(v))``, which maps any flat histogram (hence any
    constant tile after redistribution) to the identity and stretches the
    occupied range toward 0/255.  Monotone non-decreasing by construction.
    """
    hist = np.asarray(hist, dtype=np.float64)
    n = hist.sum()
    if n <= 0:
        return np.arange(256, dtype=np.float64)
    if clip_limit is not None and math.isfinite(clip_limit):
        limit = clip_limit * n / 256.0
        excess = np.maximum(hist - limit, 0.0).sum()
        hist = np.minimum(hist, limit) + excess / 256.0
    cdf_prev = np.cumsum(hist) - hist
    denom = n - hist
    with np.errstate(divide="ignore", invalid="ignore"):
        lut = np.where(denom > 0.0, 255.0 * cdf_prev / denom, np.arange(256.0))
    return np.clip(lut, 0.0, 255.0)


def clahe(img: np.ndarray, tile_px: int = 64, clip_limit: float | None = 2.0) -> np.ndarray:
    """Contrast-limited adaptive histogram equalization.

    Per-tile clipped equalization transfer functions are evaluated at each
    pixel's value and blended bilinearly between the four surrounding tile
    centers (clamped at the borders).
    """
    img = np.asarray(img, dtype=np.uint8)
    if img.ndim != 2:
        raise ValueError("clahe expects a 2-D gray image")
    h, w = img.shape
    if h < 1 or w < 1:
        raise ValueError("degenerate image")
    if tile_px < 1:
        raise ValueError("tile_px must be positive")
    tile = min(tile_px, h, w)

    nty = max(1, -(-h // tile))
    ntx = max(1, -(-w // tile))
    ey = (np.arange(nty + 1) * h) // nty
    ex = (np.arange(ntx + 1) * w) // ntx

    # all tile histograms in one bincount pass
    row_tile = np.searchsorted(ey[1:-1], np.arange(h), side="right")
    col_tile = np.searchsorted(ex[1:-1], np.arange(w), side="right")
    tid = (row_tile[:, None] * ntx + col_tile[None, :]).astype(np.int64)
    hists = np.bincount((tid * 256 + img.astype(np.int64)).ravel(),
                        minlength=nty * ntx * 256).reshape(nty, ntx, 256)

    luts = np.empty((nty, ntx, 256), dtype=np.float64)
    for ty in range(nty):
        for tx in range(ntx):
            luts[ty, tx] = equalization_lut(hists[ty, tx], clip_limit)

    # bilinear blend between tile centers
    cy = (ey[:-1] + ey[1:] - 1) / 2.0
    cx = (ex[:-1] + ex[1:] - 1) / 2.0

    def axis_weights(coords, centers):
        i1 = np.searchsorted(centers, coords, side="right")
        i0 = np.clip(i1 - 1, 0, len(centers) - 1)
        i1 = np.clip(i1, 0, len(centers) - 1)
        span = centers[i1] - centers[i0]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(span > 0, (coords - centers[i0]) / np.where(span > 0, span, 1.0), 0.0)
        return i0, i1, np.clip(t, 0.0, 1.0)

    ry0, ry1, wy = axis_weights(np.arange(h, dtype=np.float64), cy)
    rx0, rx1, wx = axis_weights(np.arange(w, dtype=np.float64), cx)

    v = img.astype(np.int64)
    out = np.zeros((h, w), dtype=np.float64)
    for iy, fy in ((ry0, 1.0 - wy), (ry1, wy)):
        for ix, fx in ((rx0, 1.0 - wx), (rx1, wx)):
            weight = fy[:, None] * fx[None, :]
            if not np.any(weight):
                continue
            out += weight * luts[iy[:, None], ix[None, :], v]
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# template matching


def _as_gray_f64(img) -> np.ndarray:
    a = np.asarray(img)
    if a.ndim != 2:
        raise ValueError("expected a 2-D gray image")
    return np.ascontiguousarray(a, dtype=np.float64)


def ncc_match(template, search, mask: np.ndarray | None = None) -> MatchResult:
    """Offset maximizing zero-normalized cross-correlation over the mask.

    Scores are in [-1, 1]; a template or window with zero variance over the
    support contributes score 0 (flat regions never win).  Ties break toward
    the smallest y, then the smallest x.
    """
    t = _as_gray_f64(template)
    s = _as_gray_f64(search)
    th, tw = t.shape
    if th > s.shape[0] or tw > s.shape[1]:
        raise MatchError(f"template {t.shape} larger than search {s.shape}")
    if mask is not None:
        m = np.asarray(mask)
        if m.shape != t.shape:
            raise MatchError(f"mask shape {m.shape} != template shape {t.shape}")
        if np.count_nonzero(m) < MIN_MASK_SUPPORT:
            raise MatchError(f"mask support below {MIN_MASK_SUPPORT} pixels")

    tz, tss, eys, exs, nsup = _kernels.prepare_template(t, mask)
    ii1, ii2 = _kernels.integral_images(s)
    grid = _kernels.ncc_scores(tz, tss, s, ii1, ii2, eys, exs, nsup)
    flat = int(np.argmax(grid))  # row-major argmax = smallest y then x on ties
    y, x = divmod(flat, grid.shape[1])
    score = float(min(1.0, max(-1.0, grid[y, x])))
    return MatchResult(x=int(x), y=int(y), score=score)


def _best_score_in_window(bitmap, crop, slack: int) -> float:
    """Max NCC of ``bitmap`` against ``crop`` within +-slack of centered."""
    t = _as_gray_f64(bitmap)
    s = _as_gray_f64(crop)
    th, tw = t.shape
    oh, ow = s.shape[0] - th, s.shape[1] - tw
    cy, cx = oh // 2, ow // 2
    y0, y1 = max(0, cy - slack), min(oh, cy + slack) + 1
    x0, x1 = max(0, cx - slack), min(ow, cx + slack) + 1
    tz, tss, eys, exs, nsup = _kernels.prepare_template(t, None)
    ii1, ii2 = _kernels.integral_images(s)
    grid = _kernels.ncc_scores(tz, tss, s, ii1, ii2, eys, exs, nsup, y0, y1, x0, x1)
    return float(grid.max())


def classify_icon(crop, atlas: PhaseAtlas, min_score: float = 0.55,
                  slack: int = 2) -> tuple[Phase | None, float]:
    """Match every atlas icon against ``crop`` with small translation slack.

    Returns the best phase and its score, or (None, score) when nothing
    reaches ``min_score``.  Ties keep the earlier atlas entry.
    """
    s = np.asarray(crop)
    best_phase = None
    best = -2.0
    for phase, bmp in atlas.entries:
        if bmp.shape[0] > s.shape[0] or bmp.shape[1] > s.shape[1]:
            raise MatchError("icon crop smaller than atlas bitmap")
        sc = _best_score_in_window(bmp, s, slack)
        if sc > best:
            best, best_phase = sc, phase
    if best < min_score:
        return None, best
    return best_phase, best


def resize_nearest(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbor resample (deterministic index arithmetic)."""
    h, w = img.shape[:2]
    ys = (np.arange(out_h) * h) // out_h
    xs = (np.arange(out_w) * w) // out_w
    return img[np.ix_(ys, xs)]


def read_counter(crop, atlas: GlyphAtlas, min_score: float = 0.6,
                 slack: int = 2) -> CounterRead | None:
    """Greedy left-to-right fixed-font decimal read; None when unreadable.

    The crop is rescaled to the atlas glyph height (nearest neighbor) when
    within +-25%.  At each column every digit glyph is NCC-tested; the first
    column run reaching ``min_score`` is refined to the local score maximum
    within ``slack`` columns, then the scan advances past the accepted glyph
    and the inter-glyph gap.  The returned score is the minimum accepted
    per-glyph score.
    """
    s = np.asarray(crop)
    gh = atlas.glyph_height
    ch = s.shape[0]
    if ch < 0.75 * gh or ch > 1.25 * gh:
        return None
    if ch != gh:
        s = resize_nearest(s, gh, max(1, round(s.shape[1] * gh / ch)))
    s = _as_gray_f64(s)
    width = s.shape[1]

    digits = [(sym, bmp) for sym, bmp in atlas.entries if sym.isdigit()]
    widths = [bmp.shape[1] for _, bmp in digits]
    wmin = min(widths)
    if width < wmin:
        return None

    ii1, ii2 = _kernels.integral_images(s)
    n_x = width - wmin + 1
    best_score = np.full(n_x, -2.0)
    best_glyph = np.full(n_x, -1, dtype=np.int64)
    for gi, (_, bmp) in enumerate(digits):
        gw = bmp.shape[1]
        if gw > width:
            continue
        tz, tss, eys, exs, nsup = _kernels.prepare_template(
            np.asarray(bmp, dtype=np.float64), None)
        row = _kernels.ncc_scores(tz, tss, s, ii1, ii2, eys, exs, nsup,
                                  0, 1, 0, width - gw + 1)[0]
        upd = row > best_score[: row.shape[0]]
        best_score[: row.shape[0]][upd] = row[upd]
        best_glyph[: row.shape[0]][upd] = gi

    symbols: list[str] = []
    min_acc = 1.0
    x = 0
    while x < n_x:
        hits = np.nonzero(best_score[x:] >= min_score)[0]
        if hits.size == 0:
            break
        xh = x + int(hits[0])
        window = best_score[xh: min(n_x, xh + slack + 1)]
        xstar = xh + int(np.argmax(window))
        gi = int(best_glyph[xstar])
        sym, bmp = digits[gi]
        symbols.append(sym)
        min_acc = min(min_acc, float(best_score[xstar]))
        x = xstar + bmp.shape[1] + atlas.gap
    if not symbols:
        return None
    return CounterRead(value=int("".join(symbols)), score=min_acc)


def render_counter(value, atlas: GlyphAtlas) -> np.ndarray:
    """Concatenate atlas glyphs (with gap columns of 0) for ``value``."""
    text = str(value)
    parts = []
    gap = np.zeros((atlas.glyph_height, atlas.gap), dtype=np.uint8)
    for i, ch in enumerate(text):
        if i:
            parts.append(gap)
        parts.append(np.asarray(atlas.bitmap(ch), dtype=np.uint8))
    return np.hstack(parts) if parts else np.zeros((atlas.glyph_height, 0), np.uint8)


# ---------------------------------------------------------------------------
# atlas directory format: PNG bitmaps plus an atlas.meta key-value file


def _read_meta_lines(path: Path) -> list[str]:
    lines = []
    for raw in path.read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    return lines


def _load_gray_png(path: Path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.uint8)


def load_glyph_atlas(directory) -> GlyphAtlas:
    d = Path(directory)
    meta = d / "atlas.meta"
    glyph_height = None
    gap = 0
    entries: list[tuple[str, np.ndarray]] = []
    for line in _read_meta_lines(meta):
        if line.startswith("glyph_height="):
            glyph_height = int(line.split("=", 1)[1])
        elif line.startswith("gap="):
            gap = int(line.split("=", 1)[1])
        elif line.startswith("symbol="):
            fields = dict(part.split("=", 1) for part in line.split())
            entries.append((fields["symbol"], _load_gray_png(d / fields["file"])))
        else:
            raise ValueError(f"unrecognized atlas.meta line: {line!r}")
    if glyph_height is None:
        raise ValueError("atlas.meta missing glyph_height")
    return GlyphAtlas(entries=tuple(entries), glyph_height=glyph_height, gap=gap)


def load_phase_atlas(directory) -> PhaseAtlas:
    d = Path(directory)
    entries: list[tuple[Phase, np.ndarray]] = []
    for line in _read_meta_lines(d / "atlas.meta"):
        if line.startswith("phase="):
            fields = dict(part.split("=", 1) for part in line.split())
            entries.append((parse_phase(fields["phase"]), _load_gray_png(d / fields["file"])))
        elif line.startswith(("glyph_height=", "gap=")):
            continue
        else:
            raise ValueError(f"unrecognized atlas.meta line: {line!r}")
    return PhaseAtlas(entries=tuple(entries))


def save_glyph_atlas(atlas: GlyphAtlas, directory) -> None:
    from PIL import Image

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    lines = [f"glyph_height={atlas.glyph_height}", f"gap={atlas.gap}"]
    for sym, bmp in atlas.entries:
        name = f"glyph_{ord(sym):04x}.png"
        Image.fromarray(bmp).save(d / name)
        lines.append(f"symbol={sym} file={name}")
    (d / "atlas.meta").write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_phase_atlas(atlas: PhaseAtlas, directory) -> None:
    from PIL import Image

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    lines = []
    for phase, bmp in atlas.entries:
        name = f"phase_{phase.value.lower()}.png"
        Image.fromarray(bmp).save(d / name)
        lines.append(f"phase={phase.value} file={name}")
    (d / "atlas.meta").write_text("\n".join(lines) + "\n", encoding="utf-8")
