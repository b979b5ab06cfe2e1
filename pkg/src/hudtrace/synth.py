"""Synthetic ground-truth scenarios and HUD frame rendering.

A scenario is a deterministic function of its seed: phase schedule, tracked
player path, kill events, elimination log, and outcome.  ``render_frames``
turns a scenario into a 1 fps HUD frame stream plus per-frame ground truth,
the inverse of the extraction pipeline and its oracle.  Shipped assets
(island map, glyph font, phase icons, layout) are generated procedurally;
real game assets are never included.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from fractions import Fraction
from pathlib import Path

import numpy as np

from .ingest import Frame, HudLayout, NormRect, rect_to_pixels, save_hud_layout
from .phases import Phase
from .vision import (GlyphAtlas, PhaseAtlas, render_counter, resize_nearest,
                     save_glyph_atlas, save_phase_atlas)

LANDING_STRATEGIES = ("Random", "EdgeLander", "HotSpotLander")
CLASS_STRATEGIES = {"Beginner": ("Random",),
                    "Experienced": ("EdgeLander", "HotSpotLander")}

MAP_SIZE = 640
ISLAND_MARGIN = 80
EDGE_BAND = 50
SITE_COUNT = 5

GROUND_SPEED_MAX = 8.0  # map px/s, consistent with the track filter's v_max
JUMP_SPEED_MAX = 35.0

TRUTH_HEADER = "t_s,phase,x,y,players,kills,occluded"
MANIFEST_HEADER = "game_id,class,seed,duration_s"


# ---------------------------------------------------------------------------
# procedural assets


def _value_noise(rng, size: int, cell: int) -> np.ndarray:
    """Bilinear-interpolated lattice noise in [0, 1]."""
    g = rng.uniform(0.0, 1.0, (size // cell + 2, size // cell + 2))
    coords = np.arange(size) / cell
    i0 = coords.astype(np.int64)
    f = coords - i0
    top = g[i0][:, i0] * (1 - f)[None, :] + g[i0][:, i0 + 1] * f[None, :]
    bot = g[i0 + 1][:, i0] * (1 - f)[None, :] + g[i0 + 1][:, i0 + 1] * f[None, :]
    return top * (1 - f)[:, None] + bot * f[:, None]


def make_sites(seed: int = 7, size: int = MAP_SIZE, count: int = SITE_COUNT,
               min_dist: float = 120.0) -> list[tuple[float, float]]:
    """Seeded landmark sites, pairwise separated, inside the island."""
    rng = np.random.default_rng(seed + 1000)
    lo, hi = ISLAND_MARGIN + 60, size - ISLAND_MARGIN - 60
    sites: list[tuple[float, float]] = []
    while len(sites) < count:
        x, y = rng.uniform(lo, hi, 2)
        if all(math.hypot(x - sx, y - sy) >= min_dist for sx, sy in sites):
            sites.append((float(x), float(y)))
    return sites


def make_map_image(seed: int = 7, size: int = MAP_SIZE,
                   sites: list[tuple[float, float]] | None = None) -> np.ndarray:
    """Textured island on a calmer ocean; landmark structure at each site.

    The multi-octave texture keeps every window visually unique so minimap
    localization has a sharp correlation peak anywhere on the island.
    """
    rng = np.random.default_rng(seed)
    img = np.zeros((size, size), dtype=np.float64)
    for cell, amp in ((160, 0.35), (80, 0.25), (40, 0.18), (20, 0.12), (10, 0.10)):
        img += amp * _value_noise(rng, size, cell)
    img += 0.06 * rng.uniform(0.0, 1.0, (size, size))
    img = (img - img.min()) / (img.max() - img.min())

    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    m = ISLAND_MARGIN
    border_dist = np.minimum.reduce([yy, xx, size - 1 - yy, size - 1 - xx])
    coast = np.clip((border_dist - (m - 24)) / 24.0, 0.0, 1.0)
    ocean = 0.18 + 0.10 * _value_noise(rng, size, 24)
    land = 0.25 + 0.65 * img
    out = ocean * (1 - coast) + land * coast

    if sites is None:
        sites = make_sites(seed, size)
    for sx, sy in sites:
        cx, cy = int(round(sx)), int(round(sy))
        out[cy - 14:cy + 15, cx - 2:cx + 3] = 0.95
        out[cy - 2:cy + 3, cx - 14:cx + 15] = 0.95
        for r in (8, 12):
            ang = np.linspace(0, 2 * math.pi, 90, endpoint=False)
            py = np.clip((cy + r * np.sin(ang)).astype(int), 0, size - 1)
            px = np.clip((cx + r * np.cos(ang)).astype(int), 0, size - 1)
            out[py, px] = 0.05
    return np.clip(np.rint(out * 255.0), 0, 255).astype(np.uint8)


_FONT_5X7 = {
    "0": ("01110", "10001", "10011", "10101", "11001", "10001", "01110"),
    "1": ("00100", "01100", "00100", "00100", "00100", "00100", "01110"),
    "2": ("01110", "10001", "00001", "00010", "00100", "01000", "11111"),
    "3": ("11111", "00010", "00100", "00010", "00001", "10001", "01110"),
    "4": ("00010", "00110", "01010", "10010", "11111", "00010", "00010"),
    "5": ("11111", "10000", "11110", "00001", "00001", "10001", "01110"),
    "6": ("00110", "01000", "10000", "11110", "10001", "10001", "01110"),
    "7": ("11111", "00001", "00010", "00100", "01000", "01000", "01000"),
    "8": ("01110", "10001", "10001", "01110", "10001", "10001", "01110"),
    "9": ("01110", "10001", "10001", "01111", "00001", "00010", "01100"),
}

GLYPH_SCALE = 2
GLYPH_HEIGHT = 7 * GLYPH_SCALE
GLYPH_GAP = 2


def make_glyph_atlas() -> GlyphAtlas:
    entries = []
    for sym, rows in _FONT_5X7.items():
        bmp = np.array([[255 if c == "1" else 0 for c in row] for row in rows],
                       dtype=np.uint8)
        bmp = np.repeat(np.repeat(bmp, GLYPH_SCALE, 0), GLYPH_SCALE, 1)
        entries.append((sym, bmp))
    return GlyphAtlas(entries=tuple(entries), glyph_height=GLYPH_HEIGHT, gap=GLYPH_GAP)


ICON_SIZE = 24


def _icon_canvas() -> np.ndarray:
    return np.zeros((ICON_SIZE, ICON_SIZE), dtype=np.uint8)


def _circle(img: np.ndarray, cx: float, cy: float, r: float, width: float) -> None:
    yy, xx = np.mgrid[0:img.shape[0], 0:img.shape[1]].astype(np.float64)
    d = np.sqrt((yy - cy) ** 2 + (xx - cx) ** 2)
    img[np.abs(d - r) <= width / 2.0] = 255


def make_phase_atlas() -> PhaseAtlas:
    lobby = _icon_canvas()  # square frame
    lobby[4:20, 4:20] = 255
    lobby[7:17, 7:17] = 0

    jump = _icon_canvas()  # downward triangle
    for row in range(4, 20):
        half = max(0, (19 - row) * 10 // 15)
        jump[row, 11 - half:12 + half] = 255

    brewing = _icon_canvas()  # hollow diamond
    yy, xx = np.mgrid[0:ICON_SIZE, 0:ICON_SIZE]
    d = np.abs(yy - 11.5) + np.abs(xx - 11.5)
    brewing[(d <= 10.5) & (d >= 6.5)] = 255

    contraction = _icon_canvas()  # ring with a filled eye
    _circle(contraction, 11.5, 11.5, 9.0, 2.4)
    yy, xx = np.mgrid[0:ICON_SIZE, 0:ICON_SIZE].astype(np.float64)
    contraction[((yy - 11.5) ** 2 + (xx - 11.5) ** 2) <= 3.2 ** 2] = 255

    return PhaseAtlas(entries=(
        (Phase.LOBBY, lobby),
        (Phase.JUMP, jump),
        (Phase.STORM_BREWING, brewing),
        (Phase.CONTRACTION, contraction),
    ))


def default_hud_layout(glyph_atlas_path: str = "", phase_atlas_path: str = "",
                       map_image_path: str = "") -> HudLayout:
    """HUD geometry designed on a 1920x1080 canvas.

    Origins sit on half-pixel normalized coordinates so rasterization yields
    the same pixel sizes at the design resolution regardless of float
    rounding; the counter rects are exactly one glyph height tall there.
    """
    def r(x_px: float, y_px: float, w_px: float, h_px: float) -> NormRect:
        return NormRect((x_px + 0.5) / 1920.0, (y_px + 0.5) / 1080.0,
                        w_px / 1920.0, h_px / 1080.0)

    return HudLayout(
        minimap_rect=r(1620, 30, 240, 240),
        phase_icon_rect=r(1622, 282, 28, 28),
        player_counter_rect=r(1656, 284, 48, GLYPH_HEIGHT),
        kill_counter_rect=r(1656, 302, 48, GLYPH_HEIGHT),
        minimap_scale=0.5,
        minimap_mask_radius=0.06,
        glyph_atlas_path=glyph_atlas_path,
        phase_atlas_path=phase_atlas_path,
        map_image_path=map_image_path,
    )


# ---------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class ScenarioParams:
    landing_strategy: str = "Random"
    player_class: str = "Beginner"
    map_seed: int = 7
    map_size: int = MAP_SIZE
    duration_range_s: tuple[int, int] = (1200, 1500)  # jump start to game end
    lobby_range_s: tuple[int, int] = (15, 40)
    jump_range_s: tuple[int, int] = (20, 40)
    tail_range_s: tuple[int, int] = (15, 30)
    early_kill_window_s: int = 360
    early_kill_frac: float = 0.6

    def __post_init__(self):
        if self.landing_strategy not in LANDING_STRATEGIES:
            raise ValueError(f"unknown landing strategy: {self.landing_strategy}")


@dataclass
class Scenario:
    seed: int
    params: ScenarioParams
    n_players: int
    sites: list[tuple[float, float]]
    landing_spot: tuple[float, float]
    phase_schedule: list[tuple[Phase, int, int]]  # phase, start_s, end_s exclusive
    path: dict[int, tuple[float, float]]  # second -> position, jump..end
    kill_events: list[tuple[int, tuple[float, float]]]
    elimination_log: list[tuple[int, int]]  # second, players remaining after it
    outcome: tuple[str, int, tuple[float, float]]  # kind, t_end, position
    stream_len_s: int

    @property
    def t_jump(self) -> int:
        return next(s for p, s, _ in self.phase_schedule if p is Phase.JUMP)

    @property
    def t_end(self) -> int:
        return self.outcome[1]

    @property
    def game_duration_s(self) -> int:
        return self.t_end - self.t_jump + 1

    def phase_at(self, t: int) -> Phase:
        for phase, a, b in self.phase_schedule:
            if a <= t < b:
                return phase
        return Phase.LOBBY

    def remaining_at(self, t: int) -> int:
        n = self.n_players
        for et, rem in self.elimination_log:
            if et <= t:
                n = rem
        return n

    def kills_at(self, t: int) -> int:
        return sum(1 for kt, _ in self.kill_events if kt <= t)

    def to_json(self) -> str:
        d = asdict(self)
        d["params"] = asdict(self.params)
        d["phase_schedule"] = [(p.value, a, b) for p, a, b in self.phase_schedule]
        d["path"] = {str(k): v for k, v in sorted(self.path.items())}
        return json.dumps(d, sort_keys=True)


def _draw_landing(rng, params: ScenarioParams,
                  sites: list[tuple[float, float]]) -> tuple[float, float]:
    size = params.map_size
    lo, hi = ISLAND_MARGIN + 10, size - ISLAND_MARGIN - 10
    if params.landing_strategy == "Random":
        return (float(rng.uniform(lo, hi)), float(rng.uniform(lo, hi)))
    if params.landing_strategy == "EdgeLander":
        # within the edge band of the island
        side = int(rng.integers(0, 4))
        along = float(rng.uniform(lo, hi))
        depth = float(rng.uniform(2.0, EDGE_BAND - 2.0))
        edge = {0: (along, ISLAND_MARGIN + depth),
                1: (along, size - ISLAND_MARGIN - depth),
                2: (ISLAND_MARGIN + depth, along),
                3: (size - ISLAND_MARGIN - depth, along)}[side]
        return (float(edge[0]), float(edge[1]))
    site = sites[int(rng.integers(0, len(sites)))]
    jitter = rng.uniform(-15.0, 15.0, 2)
    x = min(max(site[0] + jitter[0], lo), hi)
    y = min(max(site[1] + jitter[1], lo), hi)
    return (float(x), float(y))


def generate_scenario(seed: int, params: ScenarioParams = ScenarioParams()) -> Scenario:
    """Deterministic scenario for ``seed``; see the class docstring."""
    rng = np.random.default_rng(seed)
    size = params.map_size
    lo, hi = ISLAND_MARGIN + 10, size - ISLAND_MARGIN - 10
    sites = make_sites(params.map_seed, size)

    lobby_s = int(rng.integers(*params.lobby_range_s))
    jump_s = int(rng.integers(*params.jump_range_s))
    game_len = int(rng.integers(*params.duration_range_s))
    t_jump = lobby_s
    t_land = t_jump + jump_s

    # outcome: experienced players survive longer and occasionally win
    if params.player_class == "Experienced":
        win = rng.uniform() < 0.05
        place = 1 if win else int(rng.integers(2, 51))
        frac = rng.uniform(0.45, 1.0)
    else:
        win = False
        place = int(rng.integers(15, 86))
        frac = rng.uniform(0.15, 0.85)
    if win:
        t_end = t_jump + game_len
    else:
        t_end = t_land + max(60, int(frac * (game_len - jump_s)) - 1)
    t_end = max(t_end, t_jump + 60)

    # phase schedule: lobby, jump, then alternating brew/contract blocks
    schedule: list[tuple[Phase, int, int]] = [(Phase.LOBBY, 0, t_jump),
                                              (Phase.JUMP, t_jump, t_land)]
    t = t_land
    phase = Phase.STORM_BREWING
    while t <= t_end:
        block = int(rng.integers(60, 121)) if phase is Phase.STORM_BREWING \
            else int(rng.integers(45, 91))
        end = min(t + block, t_end + 1)
        schedule.append((phase, t, end))
        t = end
        phase = Phase.CONTRACTION if phase is Phase.STORM_BREWING else Phase.STORM_BREWING
    tail = int(rng.integers(*params.tail_range_s))
    stream_len = t_end + 1 + tail
    schedule.append((Phase.LOBBY, t_end + 1, stream_len))

    landing = _draw_landing(rng, params, sites)

    # airborne path: straight descent toward the landing point
    entry_angle = rng.uniform(0.0, 2 * math.pi)
    entry_dist = min(float(rng.uniform(0.3, 0.95)) * JUMP_SPEED_MAX * jump_s, 250.0)
    ex = min(max(landing[0] + entry_dist * math.cos(entry_angle), lo), hi)
    ey = min(max(landing[1] + entry_dist * math.sin(entry_angle), lo), hi)

    path: dict[int, tuple[float, float]] = {}
    for t in range(t_jump, t_land):
        f = (t - t_jump) / max(1, jump_s)
        path[t] = (ex + (landing[0] - ex) * f, ey + (landing[1] - ey) * f)

    # ground path: head to the nearest site, dwell, then wander
    nearest = min(sites, key=lambda s: math.hypot(s[0] - landing[0], s[1] - landing[1]))
    dwell_until = t_land + int(rng.integers(60, params.early_kill_window_s + 40))
    pos = landing
    target = nearest
    speed = float(rng.uniform(2.0, GROUND_SPEED_MAX - 1.0))
    for t in range(t_land, t_end + 1):
        path[t] = pos
        if t >= dwell_until and math.hypot(target[0] - pos[0], target[1] - pos[1]) < 4.0:
            target = (float(rng.uniform(lo, hi)), float(rng.uniform(lo, hi)))
            speed = float(rng.uniform(1.5, GROUND_SPEED_MAX - 1.0))
        dx, dy = target[0] - pos[0], target[1] - pos[1]
        d = math.hypot(dx, dy)
        step = min(speed, d)
        if d > 1e-9:
            pos = (pos[0] + dx / d * step, pos[1] + dy / d * step)

    # the player's own kills: early ones cluster while dwelling at the site
    if params.player_class == "Experienced":
        n_kills = int(rng.integers(1, 11))
    else:
        n_kills = int(rng.integers(0, 4))
    n_kills = min(n_kills, 99)
    kill_times: list[int] = []
    for _ in range(n_kills):
        if rng.uniform() < params.early_kill_frac:
            kt = int(rng.integers(t_land + 5,
                                  min(t_land + params.early_kill_window_s, t_end) + 1))
        else:
            kt = int(rng.integers(t_land + 5, t_end + 1))
        kill_times.append(kt)
    kill_times.sort()
    kill_events = [(kt, path[kt]) for kt in kill_times]

    # eliminations of the other 99 players, front-loaded over the game
    n_out = (100 - place) if not win else 99
    times = np.sort(t_land + 3 + rng.beta(1.3, 1.9, n_out)
                    * max(1, (t_end - 6) - t_land))
    elim: list[tuple[int, int]] = []
    remaining = 100
    for et in times:
        remaining -= 1
        elim.append((int(et), remaining))
    if win:
        outcome = ("WinAt", t_end, path[t_end])
    else:
        outcome = ("DeathAt", t_end, path[t_end])

    scenario = Scenario(
        seed=seed, params=params, n_players=100, sites=sites,
        landing_spot=landing, phase_schedule=schedule, path=path,
        kill_events=kill_events, elimination_log=elim, outcome=outcome,
        stream_len_s=stream_len)
    _check_scenario(scenario)
    return scenario


def _check_scenario(sc: Scenario) -> None:
    phases = [p for p, _, _ in sc.phase_schedule]
    if phases[0] is not Phase.LOBBY or phases[1] is not Phase.JUMP:
        raise AssertionError("schedule must start Lobby -> Jump")
    for a, b in zip(phases[2:-1], phases[3:-1]):
        if {a, b} != {Phase.STORM_BREWING, Phase.CONTRACTION}:
            raise AssertionError("brewing/contraction must alternate")
    rems = [r for _, r in sc.elimination_log]
    if any(b >= a for a, b in zip(rems, rems[1:])):
        raise AssertionError("remaining players must strictly decrease")
    if sc.outcome[0] == "WinAt" and sc.remaining_at(sc.t_end) != 1:
        raise AssertionError("win requires one remaining player")


# ---------------------------------------------------------------------------
# rendering


@dataclass(frozen=True)
class TruthRow:
    t_s: int
    phase: Phase
    pos: tuple[float, float] | None
    players: int | None
    kills: int | None
    occluded: bool


@dataclass
class RenderAssets:
    layout: HudLayout
    glyph_atlas: GlyphAtlas
    phase_atlas: PhaseAtlas
    map_image: np.ndarray


def _blit_gray(frame: np.ndarray, x: int, y: int, patch: np.ndarray) -> None:
    frame[y:y + patch.shape[0], x:x + patch.shape[1]] = patch[..., None]


def _draw_triangle(minimap: np.ndarray) -> None:
    h, w = minimap.shape[:2]
    cy, cx = h // 2, w // 2
    for row in range(-5, 6):
        half = (5 - abs(row)) if row <= 0 else max(0, 3 - row)
        minimap[cy + row, cx - half:cx + half + 1] = 255


def render_frames(scenario: Scenario, assets: RenderAssets,
                  resolution: tuple[int, int] = (1920, 1080),
                  noise_sigma: float = 0.0, occlusion_rate: float = 0.0):
    """Yield (Frame, TruthRow) at 1 fps.

    Noise and occlusions are injected into the HUD regions only (the rest of
    the frame is never read downstream); both are deterministic functions of
    the scenario seed.
    """
    width, height = resolution
    layout = assets.layout
    map_img = assets.map_image
    msz = map_img.shape[0]
    rng = np.random.default_rng(scenario.seed ^ 0x5EED)

    mm = rect_to_pixels(layout.minimap_rect, width, height)
    ph = rect_to_pixels(layout.phase_icon_rect, width, height)
    pl = rect_to_pixels(layout.player_counter_rect, width, height)
    kl = rect_to_pixels(layout.kill_counter_rect, width, height)
    win_h = max(1, round(mm.h * layout.minimap_scale))
    win_w = max(1, round(mm.w * layout.minimap_scale))

    base = np.empty((height, width, 3), dtype=np.uint8)
    bg = np.clip(np.rint(_value_noise(rng, max(width, height), 96)
                         [:height, :width] * 60 + 70), 0, 255).astype(np.uint8)
    base[:] = bg[..., None]

    icon_by_phase = dict(assets.phase_atlas.entries)

    for t in range(scenario.stream_len_s):
        frame_px = base.copy()
        phase = scenario.phase_at(t)
        in_game = phase in (Phase.JUMP, Phase.STORM_BREWING, Phase.CONTRACTION)
        pos = scenario.path.get(t) if in_game else None
        occluded = False

        if pos is not None:
            cx = min(max(int(round(pos[0])), win_w // 2), msz - (win_w - win_w // 2))
            cy = min(max(int(round(pos[1])), win_h // 2), msz - (win_h - win_h // 2))
            window = map_img[cy - win_h // 2:cy - win_h // 2 + win_h,
                             cx - win_w // 2:cx - win_w // 2 + win_w]
            minimap = np.ascontiguousarray(resize_nearest(window, mm.h, mm.w))
            _draw_triangle(minimap)
            if occlusion_rate > 0.0 and rng.uniform() < occlusion_rate:
                occluded = True
                ow = int(mm.w * rng.uniform(0.6, 0.9))
                oh = int(mm.h * rng.uniform(0.6, 0.9))
                oy = int(rng.integers(0, mm.h - oh + 1))
                ox = int(rng.integers(0, mm.w - ow + 1))
                minimap[oy:oy + oh, ox:ox + ow] = 128
            _blit_gray(frame_px, mm.x, mm.y, minimap)
        else:
            frame_px[mm.y:mm.y + mm.h, mm.x:mm.x + mm.w] = 15

        icon = icon_by_phase[phase if phase is not Phase.UNKNOWN else Phase.LOBBY]
        frame_px[ph.y:ph.y + ph.h, ph.x:ph.x + ph.w] = 0
        iy = ph.y + (ph.h - icon.shape[0]) // 2
        ix = ph.x + (ph.w - icon.shape[1]) // 2
        _blit_gray(frame_px, ix, iy, icon)

        players = scenario.remaining_at(t) if in_game else None
        kills = scenario.kills_at(t) if in_game else None
        for rect, value in ((pl, players), (kl, kills)):
            frame_px[rect.y:rect.y + rect.h, rect.x:rect.x + rect.w] = 0
            if value is None:
                continue
            digits = render_counter(value, assets.glyph_atlas)
            if digits.shape[0] != rect.h:
                scale = rect.h / digits.shape[0]
                digits = resize_nearest(digits, rect.h,
                                        max(1, round(digits.shape[1] * scale)))
            digits = digits[:, :rect.w]
            _blit_gray(frame_px, rect.x + 1, rect.y, digits)

        if noise_sigma > 0.0:
            for rect in (mm, ph, pl, kl):
                region = frame_px[rect.y:rect.y + rect.h, rect.x:rect.x + rect.w]
                noisy = region.astype(np.float64) + rng.normal(0.0, noise_sigma,
                                                               region.shape)
                frame_px[rect.y:rect.y + rect.h, rect.x:rect.x + rect.w] = \
                    np.clip(np.rint(noisy), 0, 255).astype(np.uint8)

        frame = Frame(index=t, timestamp=Fraction(t), pixels=frame_px)
        truth = TruthRow(t_s=t, phase=phase, pos=pos,
                         players=players, kills=kills, occluded=occluded)
        yield frame, truth


def truth_rows(scenario: Scenario) -> list[TruthRow]:
    """Ground truth without rendering (for sample-level tests)."""
    rows = []
    for t in range(scenario.stream_len_s):
        phase = scenario.phase_at(t)
        in_game = phase in (Phase.JUMP, Phase.STORM_BREWING, Phase.CONTRACTION)
        rows.append(TruthRow(
            t_s=t, phase=phase,
            pos=scenario.path.get(t) if in_game else None,
            players=scenario.remaining_at(t) if in_game else None,
            kills=scenario.kills_at(t) if in_game else None,
            occluded=False))
    return rows


def write_truth_csv(path, rows: list[TruthRow]) -> None:
    lines = [TRUTH_HEADER]
    for r in rows:
        x = repr(round(r.pos[0], 3)) if r.pos else ""
        y = repr(round(r.pos[1], 3)) if r.pos else ""
        players = "" if r.players is None else str(r.players)
        kills = "" if r.kills is None else str(r.kills)
        lines.append(f"{r.t_s},{r.phase.value},{x},{y},{players},{kills},"
                     f"{1 if r.occluded else 0}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_truth_csv(path) -> list[TruthRow]:
    import csv

    from .phases import parse_phase

    rows = []
    with open(path, newline="", encoding="utf-8") as f:
        for rec in csv.DictReader(f):
            pos = (float(rec["x"]), float(rec["y"])) if rec["x"] else None
            rows.append(TruthRow(
                t_s=int(rec["t_s"]), phase=parse_phase(rec["phase"]), pos=pos,
                players=int(rec["players"]) if rec["players"] else None,
                kills=int(rec["kills"]) if rec["kills"] else None,
                occluded=rec["occluded"] == "1"))
    return rows


# ---------------------------------------------------------------------------
# corpus emission


def build_assets(out_dir: Path | None = None, map_seed: int = 7,
                 map_size: int = MAP_SIZE) -> RenderAssets:
    """Generate the shipped assets; write them under ``out_dir`` when given."""
    glyphs = make_glyph_atlas()
    icons = make_phase_atlas()
    map_img = make_map_image(map_seed, map_size)
    if out_dir is None:
        layout = default_hud_layout()
        return RenderAssets(layout=layout, glyph_atlas=glyphs,
                            phase_atlas=icons, map_image=map_img)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    from PIL import Image

    Image.fromarray(map_img).save(out_dir / "map.png")
    save_glyph_atlas(glyphs, out_dir / "atlas_glyphs")
    save_phase_atlas(icons, out_dir / "atlas_phases")
    layout = default_hud_layout(glyph_atlas_path="atlas_glyphs",
                                phase_atlas_path="atlas_phases",
                                map_image_path="map.png")
    save_hud_layout(layout, out_dir / "layout.conf")
    return RenderAssets(layout=layout, glyph_atlas=glyphs,
                        phase_atlas=icons, map_image=map_img)


def class_for_index(i: int, n_games: int, class_mix: float) -> str:
    """Deterministic class assignment; round(n * mix) games are Beginner."""
    n_beginner = round(n_games * class_mix)
    return "Beginner" if i < n_beginner else "Experienced"


def scenario_for_game(seed: int, player_class: str,
                      duration_range_s: tuple[int, int] = (1200, 1500),
                      map_seed: int = 7, map_size: int = MAP_SIZE) -> Scenario:
    rng = np.random.default_rng(seed ^ 0xC1A55)
    strategies = CLASS_STRATEGIES[player_class]
    strategy = strategies[int(rng.integers(0, len(strategies)))]
    params = ScenarioParams(landing_strategy=strategy, player_class=player_class,
                            map_seed=map_seed, map_size=map_size,
                            duration_range_s=duration_range_s)
    return generate_scenario(seed, params)


def emit_corpus(out_dir, n_games: int, base_seed: int = 1000,
                class_mix: float = 0.5,
                duration_range_s: tuple[int, int] = (1200, 1500),
                resolution: tuple[int, int] = (1920, 1080),
                noise_sigma: float = 0.0, occlusion_rate: float = 0.0,
                map_seed: int = 7, map_size: int = MAP_SIZE) -> list[dict]:
    """Write a corpus: shared assets, one directory per game with PNG frames,
    stream.meta and truth.csv, plus a manifest.  Returns the manifest rows."""
    from PIL import Image

    out_dir = Path(out_dir)
    assets = build_assets(out_dir, map_seed=map_seed, map_size=map_size)
    games_dir = out_dir / "games"
    games_dir.mkdir(parents=True, exist_ok=True)

    manifest: list[dict] = []
    for i in range(n_games):
        seed = base_seed + i
        player_class = class_for_index(i, n_games, class_mix)
        scenario = scenario_for_game(seed, player_class, duration_range_s,
                                     map_seed, map_size)
        game_id = f"game{i:03d}"
        gdir = games_dir / game_id
        gdir.mkdir(parents=True, exist_ok=True)
        rows = []
        for frame, truth in render_frames(scenario, assets, resolution,
                                          noise_sigma, occlusion_rate):
            Image.fromarray(frame.pixels).save(gdir / f"frame_{frame.index:08d}.png")
            rows.append(truth)
        (gdir / "stream.meta").write_text(
            f"fps=1/1\nsource_id={game_id}\n", encoding="utf-8")
        write_truth_csv(gdir / "truth.csv", rows)
        manifest.append({"game_id": game_id, "class": player_class,
                         "seed": seed, "duration_s": scenario.game_duration_s})

    lines = [MANIFEST_HEADER]
    for m in manifest:
        lines.append(f"{m['game_id']},{m['class']},{m['seed']},{m['duration_s']}")
    (out_dir / "manifest.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


def read_manifest_csv(path) -> list[dict]:
    import csv

    with open(path, newline="", encoding="utf-8") as f:
        return [{"game_id": r["game_id"], "class": r["class"],
                 "seed": int(r["seed"]), "duration_s": int(r["duration_s"])}
                for r in csv.DictReader(f)]
