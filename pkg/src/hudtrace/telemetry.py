"""Frame samples, minimap localization, game segmentation, track filtering.

``Extractor`` turns sampled frames into ``FrameSample`` records by reading
the HUD regions defined in the layout.  Fields that fail their score
threshold are absent, never guessed.  ``segment_games`` cuts a long sample
stream into individual rounds and ``filter_track`` cleans one round's track.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _kernels
from .ingest import FrameStream, HudLayout, PixelRect, crop_roi, rect_to_pixels
from .phases import IN_GAME_PHASES, Phase, parse_phase
from .vision import (GlyphAtlas, PhaseAtlas, clahe, classify_icon, read_counter,
                     resize_nearest, to_luma)

log = logging.getLogger(__name__)

FLAG_RAW = "raw"
FLAG_INTERP = "interp"
FLAG_REJECTED = "rejected"

TELEMETRY_HEADER = "game_id,t_s,phase,x,y,pos_score,players,kills,flag"


@dataclass(frozen=True)
class FrameSample:
    """One 1 Hz telemetry observation."""

    t_s: float
    phase: Phase = Phase.UNKNOWN
    pos: tuple[float, float] | None = None
    pos_score: float | None = None
    players: int | None = None
    kills: int | None = None
    phase_score: float = 0.0
    players_score: float | None = None
    kills_score: float | None = None


@dataclass(frozen=True)
class GameSpan:
    game_id: str
    start_t_s: float
    end_t_s: float

    @property
    def duration_s(self) -> float:
        return self.end_t_s - self.start_t_s


@dataclass
class Track:
    """Time-ordered filtered samples of one game with per-sample flags."""

    samples: list[FrameSample]
    flags: list[str]
    period_s: float = 1.0

    def positioned(self) -> list[tuple[float, tuple[float, float], Phase]]:
        return [(s.t_s, s.pos, s.phase) for s in self.samples if s.pos is not None]

    def check_invariants(self, v_max: float) -> None:
        ts = [s.t_s for s in self.samples]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise AssertionError("timestamps not strictly increasing")
        kills = [s.kills for s in self.samples if s.kills is not None]
        if any(b < a for a, b in zip(kills, kills[1:])):
            raise AssertionError("kills decrease")
        players = [s.players for s in self.samples if s.players is not None]
        if any(b > a for a, b in zip(players, players[1:])):
            raise AssertionError("active players increase")
        prev = None
        for s in self.samples:
            if s.pos is None:
                continue
            if prev is not None:
                dt = s.t_s - prev.t_s
                dist = math.hypot(s.pos[0] - prev.pos[0], s.pos[1] - prev.pos[1])
                if (dist / dt > v_max * (1 + 1e-9)
                        and s.phase is not Phase.JUMP and prev.phase is not Phase.JUMP):
                    raise AssertionError("positional jump above v_max outside Jump")
            prev = s


# ---------------------------------------------------------------------------
# minimap localization


def _block_reduce(img: np.ndarray, d: int) -> np.ndarray:
    h, w = img.shape
    hh, ww = (h // d) * d, (w // d) * d
    return img[:hh, :ww].reshape(hh // d, d, ww // d, d).mean(axis=(1, 3))


def _decimation_for(side: int) -> int:
    for d in (8, 4, 2):
        if side >= 12 * d:
            return d
    return 1


class MapLocator:
    """Coarse-to-fine masked NCC localization of a window on the full map.

    The map is contrast-enhanced once; a decimated unmasked pass proposes
    candidate offsets which are refined with exact masked NCC at full
    resolution.  Scores are true masked NCC values in [-1, 1].
    """

    CANDIDATES = 3
    REFINE_SLACK = 2

    def __init__(self, map_gray: np.ndarray, clahe_tile: int = 64,
                 clip_limit: float | None = 2.0):
        self.map_enhanced = clahe(map_gray, clahe_tile, clip_limit).astype(np.float64)
        self.ii1, self.ii2 = _kernels.integral_images(self.map_enhanced)
        self._reduced: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def _reduced_map(self, d: int):
        if d not in self._reduced:
            red = _block_reduce(self.map_enhanced, d)
            ii1, ii2 = _kernels.integral_images(red)
            self._reduced[d] = (red, ii1, ii2)
        return self._reduced[d]

    def locate(self, template: np.ndarray, mask: np.ndarray | None):
        """Best (x, y, score) offset of ``template`` inside the map."""
        t = np.ascontiguousarray(template, dtype=np.float64)
        th, tw = t.shape
        mh, mw = self.map_enhanced.shape
        if th > mh or tw > mw:
            raise ValueError("template larger than map")
        oh, ow = mh - th + 1, mw - tw + 1

        tz, tss, eys, exs, nsup = _kernels.prepare_template(t, mask)
        if tss <= 0.0:
            return 0, 0, 0.0

        d = _decimation_for(min(th, tw))
        if d == 1:
            grid = _kernels.ncc_scores(tz, tss, self.map_enhanced,
                                       self.ii1, self.ii2, eys, exs, nsup)
            flat = int(np.argmax(grid))
            y, x = divmod(flat, grid.shape[1])
            return int(x), int(y), float(grid[y, x])

        red, rii1, rii2 = self._reduced_map(d)
        tred = _block_reduce(t, d)
        rz, rss, rey, rex, rn = _kernels.prepare_template(tred, None)
        if rss <= 0.0:
            return 0, 0, 0.0
        coarse = _kernels.ncc_scores(rz, rss, red, rii1, rii2, rey, rex, rn)

        order = np.argsort(-coarse.ravel(), kind="stable")
        cand: list[tuple[int, int]] = []
        for flat in order:
            cy, cx = divmod(int(flat), coarse.shape[1])
            if all(abs(cy - py) > 1 or abs(cx - px) > 1 for py, px in cand):
                cand.append((cy, cx))
            if len(cand) >= self.CANDIDATES:
                break

        best = (-2.0, 0, 0)
        radius = d + 2
        for cy, cx in cand:
            y0 = max(0, cy * d - radius)
            y1 = min(oh, cy * d + radius + 1)
            x0 = max(0, cx * d - radius)
            x1 = min(ow, cx * d + radius + 1)
            grid = _kernels.ncc_scores(tz, tss, self.map_enhanced, self.ii1,
                                       self.ii2, eys, exs, nsup,
                                       y0, y1, x0, x1, step=2)
            iy, ix = divmod(int(np.argmax(grid)), grid.shape[1])
            sc = float(grid[iy, ix])
            if sc > best[0]:
                best = (sc, y0 + iy * 2, x0 + ix * 2)

        _, by, bx = best
        s = self.REFINE_SLACK
        y0, y1 = max(0, by - s), min(oh, by + s + 1)
        x0, x1 = max(0, bx - s), min(ow, bx + s + 1)
        grid = _kernels.ncc_scores(tz, tss, self.map_enhanced, self.ii1,
                                   self.ii2, eys, exs, nsup, y0, y1, x0, x1)
        iy, ix = divmod(int(np.argmax(grid)), grid.shape[1])
        score = float(min(1.0, max(-1.0, grid[iy, ix])))
        return x0 + ix, y0 + iy, score


def center_disk_mask(h: int, w: int, radius: float) -> np.ndarray:
    """Support mask excluding a disk of ``radius`` pixels at the center."""
    yy, xx = np.mgrid[0:h, 0:w]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    return ((yy - cy) ** 2 + (xx - cx) ** 2) >= radius * radius


# ---------------------------------------------------------------------------
# extraction


@dataclass(frozen=True)
class ExtractorConfig:
    pos_min_score: float = 0.5
    phase_min_score: float = 0.55
    counter_min_score: float = 0.6
    crop_clahe_tile: int = 128
    map_clahe_tile: int = 64
    clahe_clip: float = 2.0


class Extractor:
    """Reads HUD regions of one frame into a FrameSample.

    Pure per frame: identical frames give identical samples regardless of
    order, so frames may be handled by parallel workers.
    """

    def __init__(self, layout: HudLayout, glyph_atlas: GlyphAtlas,
                 phase_atlas: PhaseAtlas, map_gray: np.ndarray,
                 config: ExtractorConfig = ExtractorConfig()):
        layout.validate()
        self.layout = layout
        self.glyphs = glyph_atlas
        self.phases = phase_atlas
        self.config = config
        self.map_shape = map_gray.shape
        self.locator = MapLocator(map_gray, config.map_clahe_tile, config.clahe_clip)
        self._mask_cache: dict[tuple[int, int], np.ndarray | None] = {}

    def _template_mask(self, th: int, tw: int) -> np.ndarray | None:
        key = (th, tw)
        if key not in self._mask_cache:
            r = self.layout.minimap_mask_radius * tw
            mask = center_disk_mask(th, tw, r) if r > 0 else None
            self._mask_cache[key] = mask
        return self._mask_cache[key]

    def _locate_position(self, frame) -> tuple[tuple[float, float] | None, float]:
        crop = crop_roi(frame, self.layout.minimap_rect)
        gray = to_luma(crop.pixels)
        enhanced = clahe(gray, self.config.crop_clahe_tile, self.config.clahe_clip)
        scale = self.layout.minimap_scale
        th = max(1, round(enhanced.shape[0] * scale))
        tw = max(1, round(enhanced.shape[1] * scale))
        template = resize_nearest(enhanced, th, tw).astype(np.float64)
        mask = self._template_mask(th, tw)
        x, y, score = self.locator.locate(template, mask)
        if score < self.config.pos_min_score:
            return None, score
        pos = (x + tw / 2.0, y + th / 2.0)
        return pos, score

    def _read_phase(self, frame) -> tuple[Phase, float]:
        crop = crop_roi(frame, self.layout.phase_icon_rect)
        phase, score = classify_icon(to_luma(crop.pixels), self.phases,
                                     self.config.phase_min_score)
        return (phase if phase is not None else Phase.UNKNOWN), score

    def _read_count(self, frame, rect, lo: int, hi: int):
        crop = crop_roi(frame, rect)
        read = read_counter(to_luma(crop.pixels), self.glyphs,
                            self.config.counter_min_score)
        if read is None or not (lo <= read.value <= hi):
            return None, None
        return read.value, read.score

    def extract_sample(self, frame) -> FrameSample:
        phase, phase_score = self._read_phase(frame)
        pos, pos_score = self._locate_position(frame)
        players, players_score = self._read_count(
            frame, self.layout.player_counter_rect, 1, 100)
        kills, kills_score = self._read_count(
            frame, self.layout.kill_counter_rect, 0, 99)
        return FrameSample(
            t_s=float(frame.timestamp), phase=phase, phase_score=phase_score,
            pos=pos, pos_score=pos_score if pos is not None else None,
            players=players, players_score=players_score,
            kills=kills, kills_score=kills_score)

    def extract_stream(self, stream: FrameStream) -> list[FrameSample]:
        return [self.extract_sample(f) for f in stream]


# ---------------------------------------------------------------------------
# game segmentation


def segment_games(samples: list[FrameSample], source_id: str = "stream",
                  period_s: float = 1.0, pre_gap_s: float = 10.0,
                  min_game_s: float = 60.0) -> list[GameSpan]:
    """Cut a sample stream into game spans by tracing the phase track.

    A game starts at the first Jump sample preceded by at least
    ``pre_gap_s`` of Lobby/Unknown (stream start qualifies) and ends at the
    last in-game sample before such a gap or the end of the stream.  Unknown
    gaps shorter than ``pre_gap_s`` do not split a game; spans shorter than
    ``min_game_s`` are discarded as false starts.
    """
    raw_spans: list[tuple[float, float]] = []
    open_start: float | None = None
    last_in_game: float | None = None

    def close() -> None:
        nonlocal open_start
        if open_start is not None and last_in_game is not None:
            raw_spans.append((open_start, last_in_game + period_s))
        open_start = None

    for s in samples:
        if s.phase not in IN_GAME_PHASES:
            continue
        gap = math.inf if last_in_game is None else s.t_s - last_in_game
        if open_start is None:
            if s.phase is Phase.JUMP and gap >= pre_gap_s:
                open_start = s.t_s
        elif gap >= pre_gap_s:
            close()
            if s.phase is Phase.JUMP:
                open_start = s.t_s
        last_in_game = s.t_s
    close()

    spans = [sp for sp in raw_spans if sp[1] - sp[0] >= min_game_s]
    return [GameSpan(game_id=f"{source_id}_g{i + 1}", start_t_s=a, end_t_s=b)
            for i, (a, b) in enumerate(spans)]


# ---------------------------------------------------------------------------
# track filtering


def _filter_counter(values: list[int | None], non_decreasing: bool,
                    window: int = 5) -> tuple[list[int | None], list[bool]]:
    """Enforce monotonicity: spikes contradicted by two subsequent readings
    are rejected; violations of the running value carry the last valid one."""
    n = len(values)
    out: list[int | None] = [None] * n
    rejected = [False] * n
    sign = 1 if non_decreasing else -1
    last: int | None = None
    for i, v in enumerate(values):
        if v is None:
            continue
        followers = [values[j] for j in range(i + 1, min(n, i + window))
                     if values[j] is not None]
        ahead = (last is None) or (sign * (v - last) > 0)
        contradicted = sum(1 for f in followers if sign * (f - v) < 0) >= 2
        if ahead and contradicted:
            rejected[i] = True
            out[i] = last
        elif last is not None and sign * (v - last) < 0:
            rejected[i] = True
            out[i] = last
        else:
            out[i] = v
            last = v
    return out, rejected


def filter_track(samples: list[FrameSample], v_max: float = 40.0,
                 max_gap_s: float = 5.0, period_s: float = 1.0) -> Track:
    """Clean one game's samples.

    Counters are forced monotone by majority vote (rejected slots carry the
    last valid value); positions implying speed above ``v_max`` outside the
    Jump phase are rejected; positional gaps up to ``max_gap_s`` are filled
    by linear interpolation and flagged.
    """
    samples = sorted(samples, key=lambda s: s.t_s)
    n = len(samples)
    kills, kills_rej = _filter_counter([s.kills for s in samples], True)
    players, players_rej = _filter_counter([s.players for s in samples], False)

    pos: list[tuple[float, float] | None] = [s.pos for s in samples]
    pos_rej = [False] * n
    anchor: tuple[float, tuple[float, float]] | None = None
    anchor_phase: Phase | None = None
    for i, s in enumerate(samples):
        if pos[i] is None:
            continue
        if anchor is not None and s.phase is not Phase.JUMP \
                and anchor_phase is not Phase.JUMP:
            dt = s.t_s - anchor[0]
            dist = math.hypot(pos[i][0] - anchor[1][0], pos[i][1] - anchor[1][1])
            if dt > 0 and dist / dt > v_max:
                pos[i] = None
                pos_rej[i] = True
                continue
        anchor = (s.t_s, pos[i])
        anchor_phase = s.phase

    interp = [False] * n
    holders = [i for i in range(n) if pos[i] is not None]
    for a, b in zip(holders, holders[1:]):
        if b - a > 1 and samples[b].t_s - samples[a].t_s <= max_gap_s:
            t0, t1 = samples[a].t_s, samples[b].t_s
            (x0, y0), (x1, y1) = pos[a], pos[b]
            for k in range(a + 1, b):
                f = (samples[k].t_s - t0) / (t1 - t0)
                pos[k] = (x0 + f * (x1 - x0), y0 + f * (y1 - y0))
                interp[k] = True

    out_samples: list[FrameSample] = []
    flags: list[str] = []
    for i, s in enumerate(samples):
        out_samples.append(replace(
            s, kills=kills[i], players=players[i], pos=pos[i],
            pos_score=s.pos_score if (pos[i] is not None and not interp[i]) else None))
        if kills_rej[i] or players_rej[i] or (pos_rej[i] and not interp[i]):
            flags.append(FLAG_REJECTED)
        elif interp[i]:
            flags.append(FLAG_INTERP)
        else:
            flags.append(FLAG_RAW)
    return Track(samples=out_samples, flags=flags, period_s=period_s)


def slice_span(samples: list[FrameSample], span: GameSpan) -> list[FrameSample]:
    return [s for s in samples if span.start_t_s <= s.t_s < span.end_t_s]


# ---------------------------------------------------------------------------
# telemetry CSV


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_telemetry_csv(path, games: list[tuple[GameSpan, Track]]) -> None:
    """One row per in-game sample: game_id,t_s,phase,x,y,pos_score,players,kills,flag."""
    lines = [TELEMETRY_HEADER]
    for span, track in games:
        for s, flag in zip(track.samples, track.flags):
            x = s.pos[0] if s.pos else None
            y = s.pos[1] if s.pos else None
            lines.append(",".join([
                span.game_id, _fmt(s.t_s), s.phase.value, _fmt(x), _fmt(y),
                _fmt(s.pos_score), _fmt(s.players), _fmt(s.kills), flag]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_telemetry_csv(path) -> dict[str, tuple[list[FrameSample], list[str]]]:
    """Samples and flags per game_id, in file order."""
    import csv

    out: dict[str, tuple[list[FrameSample], list[str]]] = {}
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != TELEMETRY_HEADER.split(","):
            raise ValueError(f"{path}: unexpected telemetry header {reader.fieldnames}")
        for rec in reader:
            pos = None
            if rec["x"] != "" and rec["y"] != "":
                pos = (float(rec["x"]), float(rec["y"]))
            sample = FrameSample(
                t_s=float(rec["t_s"]),
                phase=parse_phase(rec["phase"]),
                pos=pos,
                pos_score=float(rec["pos_score"]) if rec["pos_score"] else None,
                players=int(rec["players"]) if rec["players"] else None,
                kills=int(rec["kills"]) if rec["kills"] else None)
            samples, flags = out.setdefault(rec["game_id"], ([], []))
            samples.append(sample)
            flags.append(rec["flag"])
    return out
