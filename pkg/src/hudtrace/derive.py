"""Per-game metrics computed from a filtered track: landing spot, movement
trace, death/win position, final place, kill positions, phase durations.

Kill attribution uses kill-counter increments (the counter is always on
screen and robust to read, unlike transient popups).  Final place equals the
field size at elimination, or 1 on a win.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .phases import Phase, parse_phase
from .telemetry import GameSpan, Track

CLASS_BEGINNER = "Beginner"
CLASS_EXPERIENCED = "Experienced"
PLAYER_CLASSES = (CLASS_BEGINNER, CLASS_EXPERIENCED)

DEFAULT_V_LAND = 10.0

FLAG_LANDING_UNDETERMINED = "landing_undetermined"
FLAG_PLACE_UNDETERMINED = "place_undetermined"
FLAG_KILLS_UNREAD = "kills_unread"
FLAG_END_POS_MISSING = "end_position_missing"

RECORDS_HEADER = ("game_id,class,start_s,end_s,duration_s,place,kills,"
                  "landing_x,landing_y,death_x,death_y,win_x,win_y,"
                  "jump_s,brew_s,contract_s,dropped_kills")
KILLS_HEADER = "game_id,t_s,x,y"
TRACES_HEADER = "game_id,t_s,x,y,flag"


class AggregationFailed(ValueError):
    """The track carries no usable samples."""


class LandingUndetermined(ValueError):
    pass


class PlaceUndetermined(ValueError):
    pass


@dataclass
class GameRecord:
    game_id: str
    span: GameSpan
    track: Track
    player_class: str
    landing_spot: tuple[float, float] | None
    movement_trace: list[tuple[float, float, float, str]]  # t, x, y, flag
    death_position: tuple[float, float] | None
    win_position: tuple[float, float] | None
    final_place: int | None
    total_kills: int
    killing_positions: list[tuple[float, float, float]]  # x, y, t
    dropped_kills: int
    phase_durations: dict[Phase, float]
    game_duration_s: float
    flags: set[str] = field(default_factory=set)

    def validate(self) -> None:
        if not self.flags:
            if (self.death_position is None) == (self.win_position is None):
                raise AssertionError("exactly one of death/win position required")
            if (self.final_place == 1) != (self.win_position is not None):
                raise AssertionError("place 1 iff win position present")
        if self.total_kills != len(self.killing_positions) + self.dropped_kills:
            raise AssertionError("kill accounting mismatch")


def derive_landing_spot(track: Track, v_land: float = DEFAULT_V_LAND
                        ) -> tuple[float, float]:
    """First positioned sample at/after the jump-to-ground phase transition
    whose speed over the next two positioned samples stays within ``v_land``;
    falls back to the first positioned sample after the transition."""
    samples = track.samples
    transition = 0
    for i, s in enumerate(samples):
        if s.phase is Phase.JUMP:
            transition = i + 1
    positioned = [(i, s) for i, s in enumerate(samples)
                  if i >= transition and s.pos is not None]
    if not positioned:
        raise LandingUndetermined("no positioned samples after the jump phase")
    for k, (i, s) in enumerate(positioned):
        nxt = positioned[k + 1:k + 3]
        slow = True
        prev_t, prev_pos = s.t_s, s.pos
        for _, q in nxt:
            dt = q.t_s - prev_t
            speed = math.hypot(q.pos[0] - prev_pos[0], q.pos[1] - prev_pos[1]) / dt
            if speed > v_land:
                slow = False
                break
            prev_t, prev_pos = q.t_s, q.pos
        if slow:
            return s.pos
    return positioned[0][1].pos


def derive_final_place(track: Track) -> int:
    """1 on a win (field reaches one player), else the last active-player
    reading: the place equals the field size at elimination."""
    readings = [s.players for s in track.samples if s.players is not None]
    if not readings:
        raise PlaceUndetermined("no active-player readings")
    return 1 if readings[-1] == 1 else readings[-1]


def derive_killing_positions(track: Track
                             ) -> tuple[list[tuple[float, float, float]], int]:
    """One (x, y, t) entry per unit kill-counter increment, placed at the
    later sample; increments without a position are counted as dropped."""
    out: list[tuple[float, float, float]] = []
    dropped = 0
    prev: int | None = None
    for s in track.samples:
        if s.kills is None:
            continue
        if prev is not None and s.kills > prev:
            inc = s.kills - prev
            if s.pos is not None:
                out.extend((s.pos[0], s.pos[1], s.t_s) for _ in range(inc))
            else:
                dropped += inc
        prev = s.kills
    return out, dropped


def derive_phase_durations(track: Track) -> dict[Phase, float]:
    """Inter-sample intervals attributed to the earlier sample's phase; the
    last sample contributes one nominal period."""
    durations: dict[Phase, float] = {}
    samples = track.samples
    for a, b in zip(samples, samples[1:]):
        durations[a.phase] = durations.get(a.phase, 0.0) + (b.t_s - a.t_s)
    if samples:
        last = samples[-1]
        durations[last.phase] = durations.get(last.phase, 0.0) + track.period_s
    return durations


def derive_record(track: Track, span: GameSpan, player_class: str,
                  v_land: float = DEFAULT_V_LAND) -> GameRecord:
    """Assemble every derived metric; undetermined sub-results become
    record-level flags rather than hard failures."""
    if not track.samples:
        raise AggregationFailed(f"{span.game_id}: empty track")
    if player_class not in PLAYER_CLASSES:
        raise ValueError(f"unknown player class: {player_class}")

    flags: set[str] = set()
    try:
        landing = derive_landing_spot(track, v_land)
    except LandingUndetermined:
        landing = None
        flags.add(FLAG_LANDING_UNDETERMINED)
    try:
        place = derive_final_place(track)
    except PlaceUndetermined:
        place = None
        flags.add(FLAG_PLACE_UNDETERMINED)

    kill_readings = [s.kills for s in track.samples if s.kills is not None]
    if kill_readings:
        total_kills = kill_readings[-1]
    else:
        total_kills = 0
        flags.add(FLAG_KILLS_UNREAD)

    killing, dropped = derive_killing_positions(track)
    # kills standing before the first observed reading are unattributable
    first_seen = kill_readings[0] if kill_readings else 0
    dropped += first_seen

    trace = [(s.t_s, s.pos[0], s.pos[1], flag)
             for s, flag in zip(track.samples, track.flags) if s.pos is not None]

    end_pos = trace[-1][1:3] if trace else None
    death_pos = win_pos = None
    if place is None or end_pos is None:
        if end_pos is None:
            flags.add(FLAG_END_POS_MISSING)
    elif place == 1:
        win_pos = (end_pos[0], end_pos[1])
    else:
        death_pos = (end_pos[0], end_pos[1])

    record = GameRecord(
        game_id=span.game_id,
        span=span,
        track=track,
        player_class=player_class,
        landing_spot=landing,
        movement_trace=trace,
        death_position=death_pos,
        win_position=win_pos,
        final_place=place,
        total_kills=total_kills,
        killing_positions=killing,
        dropped_kills=dropped,
        phase_durations=derive_phase_durations(track),
        game_duration_s=span.duration_s,
        flags=flags,
    )
    record.validate()
    return record


# ---------------------------------------------------------------------------
# CSV persistence


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _pair(p) -> str:
    return f"{_fmt(p[0])},{_fmt(p[1])}" if p is not None else ","


def write_records_csv(path, records: list[GameRecord]) -> None:
    lines = [RECORDS_HEADER]
    for r in records:
        durations = r.phase_durations
        lines.append(",".join([
            r.game_id, r.player_class,
            _fmt(r.span.start_t_s), _fmt(r.span.end_t_s), _fmt(r.game_duration_s),
            _fmt(r.final_place), str(r.total_kills),
            _pair(r.landing_spot), _pair(r.death_position), _pair(r.win_position),
            _fmt(durations.get(Phase.JUMP, 0.0)),
            _fmt(durations.get(Phase.STORM_BREWING, 0.0)),
            _fmt(durations.get(Phase.CONTRACTION, 0.0)),
            str(r.dropped_kills)]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_kills_csv(path, records: list[GameRecord]) -> None:
    lines = [KILLS_HEADER]
    for r in records:
        for x, y, t in r.killing_positions:
            lines.append(f"{r.game_id},{_fmt(t)},{_fmt(x)},{_fmt(y)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_traces_csv(path, records: list[GameRecord]) -> None:
    lines = [TRACES_HEADER]
    for r in records:
        for t, x, y, flag in r.movement_trace:
            lines.append(f"{r.game_id},{_fmt(t)},{_fmt(x)},{_fmt(y)},{flag}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class RecordSummary:
    """Row of records.csv as consumed by the stats stage."""

    game_id: str
    player_class: str
    start_s: float
    end_s: float
    game_duration_s: float
    final_place: int | None
    total_kills: int
    landing_spot: tuple[float, float] | None
    death_position: tuple[float, float] | None
    win_position: tuple[float, float] | None
    dropped_kills: int


def read_records_csv(path) -> list[RecordSummary]:
    import csv

    out: list[RecordSummary] = []
    with open(path, newline="", encoding="utf-8") as f:
        for rec in csv.DictReader(f):
            def pair(prefix: str):
                x, y = rec[f"{prefix}_x"], rec[f"{prefix}_y"]
                return (float(x), float(y)) if x != "" and y != "" else None

            out.append(RecordSummary(
                game_id=rec["game_id"],
                player_class=rec["class"],
                start_s=float(rec["start_s"]),
                end_s=float(rec["end_s"]),
                game_duration_s=float(rec["duration_s"]),
                final_place=int(rec["place"]) if rec["place"] else None,
                total_kills=int(rec["kills"]),
                landing_spot=pair("landing"),
                death_position=pair("death"),
                win_position=pair("win"),
                dropped_kills=int(rec["dropped_kills"])))
    return out


def read_points_csv(path, x_col: str = "x", y_col: str = "y"):
    """Generic (game_id, t_s, x, y) reader for kills.csv and traces.csv."""
    import csv

    out = []
    with open(path, newline="", encoding="utf-8") as f:
        for rec in csv.DictReader(f):
            if rec[x_col] == "" or rec[y_col] == "":
                continue
            out.append((rec["game_id"], float(rec["t_s"]),
                        float(rec[x_col]), float(rec[y_col])))
    return out
