"""Command-line pipeline: synth, extract, derive, heatmap, hotspots,
correlate, report.

Every stage reads and writes plain files so stages can be re-run and
inspected independently.  Logs go to stderr only; machine output goes to
files (or stdout for ``report``).  Exit codes: 0 ok, 2 missing input,
3 bad configuration, 4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import derive as derive_mod
from . import maps as maps_mod
from . import stats as stats_mod
from . import synth as synth_mod
from . import telemetry as telem_mod
from .ingest import (SourceError, load_hud_layout, open_frame_source,
                     parse_key_value_text, sample_at_rate)
from .vision import load_glyph_atlas, load_phase_atlas

log = logging.getLogger("hudtrace")

EXIT_OK = 0
EXIT_MISSING_INPUT = 2
EXIT_BAD_CONFIG = 3
EXIT_INTERNAL = 4

DEFAULT_PAIRS = [
    ("satisfaction", "enjoyment"),
    ("satisfaction", "duration_s"),
    ("satisfaction", "place"),
    ("satisfaction", "kills"),
    ("enjoyment", "duration_s"),
    ("enjoyment", "place"),
    ("enjoyment", "kills"),
    ("enjoyment", "landed_in_landing_hotspot"),
    ("place", "landed_in_activity_hotspot"),
    ("duration_s", "landed_in_activity_hotspot"),
    ("place", "kills"),
    ("place", "hours_gaming_per_week"),
    ("fortnite_watch_hours", "landed_in_landing_hotspot"),
]


@dataclass
class PipelineConfig:
    layout: str = ""
    sample_rate: str = "1"
    out: str = "."
    segment_pre_gap_s: float = 10.0
    segment_min_game_s: float = 60.0
    filter_v_max: float = 40.0
    filter_max_gap_s: float = 5.0
    extract_pos_min_score: float = 0.5
    extract_phase_min_score: float = 0.55
    extract_counter_min_score: float = 0.6
    extract_crop_clahe_tile: int = 128
    extract_map_clahe_tile: int = 64
    extract_clahe_clip: float = 2.0
    derive_v_land: float = 10.0
    grid_size: int = maps_mod.DEFAULT_GRID
    smooth_sigma: float = maps_mod.DEFAULT_SIGMA
    hotspot_threshold_frac: float = maps_mod.DEFAULT_THRESHOLD_FRAC
    hotspot_erode: int = maps_mod.DEFAULT_ERODE
    hotspot_dilate: int = maps_mod.DEFAULT_DILATE
    hotspot_min_area: int = maps_mod.DEFAULT_MIN_AREA
    boring_max_overlap: float = maps_mod.BORING_MAX_OVERLAP
    stats_permutation: bool = False


_CONFIG_KEYS = {
    "layout": ("layout", str),
    "sample_rate": ("sample_rate", str),
    "out": ("out", str),
    "segment.pre_gap_s": ("segment_pre_gap_s", float),
    "segment.min_game_s": ("segment_min_game_s", float),
    "filter.v_max": ("filter_v_max", float),
    "filter.max_gap_s": ("filter_max_gap_s", float),
    "extract.pos_min_score": ("extract_pos_min_score", float),
    "extract.phase_min_score": ("extract_phase_min_score", float),
    "extract.counter_min_score": ("extract_counter_min_score", float),
    "extract.crop_clahe_tile": ("extract_crop_clahe_tile", int),
    "extract.map_clahe_tile": ("extract_map_clahe_tile", int),
    "extract.clahe_clip": ("extract_clahe_clip", float),
    "derive.v_land": ("derive_v_land", float),
    "grid.size": ("grid_size", int),
    "smooth.sigma": ("smooth_sigma", float),
    "hotspot.threshold_frac": ("hotspot_threshold_frac", float),
    "hotspot.erode": ("hotspot_erode", int),
    "hotspot.dilate": ("hotspot_dilate", int),
    "hotspot.min_area": ("hotspot_min_area", int),
    "boring.max_overlap": ("boring_max_overlap", float),
    "stats.permutation": ("stats_permutation", lambda v: v.lower() in ("1", "true", "yes")),
}


class ConfigError(ValueError):
    pass


def load_pipeline_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        pairs = parse_key_value_text(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = PipelineConfig()
    for key, value in pairs.items():
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown config key: {key}")
        attr, conv = _CONFIG_KEYS[key]
        try:
            setattr(cfg, attr, conv(value))
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
    if cfg.layout:
        layout_path = Path(cfg.layout)
        if not layout_path.is_absolute():
            cfg.layout = str(path.parent / layout_path)
        if not Path(cfg.layout).exists():
            raise ConfigError(f"layout file does not exist: {cfg.layout}")
    return cfg


def _load_extraction_assets(cfg: PipelineConfig):
    if not cfg.layout:
        raise ConfigError("no layout configured (layout=... or --layout)")
    try:
        layout = load_hud_layout(cfg.layout)
    except ValueError as exc:
        raise ConfigError(f"bad layout {cfg.layout}: {exc}") from exc
    for name, p in (("atlas.glyphs", layout.glyph_atlas_path),
                    ("atlas.phases", layout.phase_atlas_path),
                    ("map.image", layout.map_image_path)):
        if not p:
            raise ConfigError(f"layout missing resource key: {name}")
        if not Path(p).exists():
            raise ConfigError(f"layout resource does not exist: {name}={p}")
    glyphs = load_glyph_atlas(layout.glyph_atlas_path)
    icons = load_phase_atlas(layout.phase_atlas_path)
    from PIL import Image
    import numpy as np

    with Image.open(layout.map_image_path) as im:
        map_gray = np.asarray(im.convert("L"), dtype=np.uint8)
    econf = telem_mod.ExtractorConfig(
        pos_min_score=cfg.extract_pos_min_score,
        phase_min_score=cfg.extract_phase_min_score,
        counter_min_score=cfg.extract_counter_min_score,
        crop_clahe_tile=cfg.extract_crop_clahe_tile,
        map_clahe_tile=cfg.extract_map_clahe_tile,
        clahe_clip=cfg.extract_clahe_clip)
    return layout, glyphs, icons, map_gray, econf


def extract_source(source: str, cfg: PipelineConfig, out_dir: Path) -> tuple[str, int]:
    """Run ingest -> vision -> telemetry for one source; returns
    (telemetry csv path, games written)."""
    layout, glyphs, icons, map_gray, econf = _load_extraction_assets(cfg)
    extractor = telem_mod.Extractor(layout, glyphs, icons, map_gray, econf)
    rate = Fraction(cfg.sample_rate)
    stream = open_frame_source(source)
    sampled = sample_at_rate(stream, rate)
    samples = []
    for frame in sampled:
        try:
            samples.append(extractor.extract_sample(frame))
        except Exception as exc:  # per-frame failures are logged, not fatal
            log.warning("%s: frame %d extraction failed: %s",
                        stream.source_id, frame.index, exc)
    period = float(1 / rate)
    spans = telem_mod.segment_games(
        samples, source_id=stream.source_id, period_s=period,
        pre_gap_s=cfg.segment_pre_gap_s, min_game_s=cfg.segment_min_game_s)
    games = []
    for span in spans:
        track = telem_mod.filter_track(
            telem_mod.slice_span(samples, span),
            v_max=cfg.filter_v_max, max_gap_s=cfg.filter_max_gap_s,
            period_s=period)
        games.append((span, track))
    out_path = out_dir / f"{stream.source_id}.telemetry.csv"
    telem_mod.write_telemetry_csv(out_path, games)
    return str(out_path), len(games)


def _extract_worker(args: tuple[str, PipelineConfig, str]) -> tuple[str, str, int]:
    source, cfg, out_dir = args
    path, n = extract_source(source, cfg, Path(out_dir))
    return source, path, n


def cmd_extract(args, cfg: PipelineConfig) -> int:
    out_dir = Path(args.out or cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    sources = sorted(args.sources)
    jobs = max(1, args.jobs)
    results = []
    if jobs == 1 or len(sources) == 1:
        for src in sources:
            results.append(_extract_worker((src, cfg, str(out_dir))))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = sorted(pool.map(
                _extract_worker, [(s, cfg, str(out_dir)) for s in sources]))
    for source, path, n in results:
        log.info("%s: %d game(s) -> %s", source, n, path)
    return EXIT_OK


def cmd_derive(args, cfg: PipelineConfig) -> int:
    class_by_source: dict[str, str] = {}
    if args.manifest:
        for row in synth_mod.read_manifest_csv(args.manifest):
            class_by_source[row["game_id"]] = row["class"]

    records = []
    for path in sorted(args.telemetry):
        for game_id, (samples, flags) in telem_mod.read_telemetry_csv(path).items():
            if not samples:
                continue
            source_id = game_id.rsplit("_g", 1)[0]
            player_class = class_by_source.get(source_id, args.player_class)
            ts = [s.t_s for s in samples]
            period = 1.0 if len(ts) < 2 else min(b - a for a, b in zip(ts, ts[1:]))
            span = telem_mod.GameSpan(game_id=game_id, start_t_s=ts[0],
                                      end_t_s=ts[-1] + period)
            track = telem_mod.Track(samples=samples, flags=flags, period_s=period)
            records.append(derive_mod.derive_record(track, span, player_class,
                                                    v_land=cfg.derive_v_land))
    seen = set()
    for r in records:
        if r.game_id in seen:
            raise ValueError(f"duplicate game_id across telemetry files: {r.game_id}")
        seen.add(r.game_id)
    records.sort(key=lambda r: r.game_id)
    out_dir = Path(args.out or cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    derive_mod.write_records_csv(out_dir / "records.csv", records)
    derive_mod.write_kills_csv(out_dir / "kills.csv", records)
    derive_mod.write_traces_csv(out_dir / "traces.csv", records)
    if not records:
        log.warning("no games in input telemetry; records.csv is empty")
    log.info("%d record(s) -> %s", len(records), out_dir / "records.csv")
    return EXIT_OK


def _map_bounds(args) -> tuple[float, float, float, float]:
    if args.bounds:
        parts = [float(v) for v in args.bounds.split(",")]
        if len(parts) != 4:
            raise ConfigError("--bounds needs x0,y0,x1,y1")
        return tuple(parts)  # type: ignore[return-value]
    if args.map:
        from PIL import Image

        with Image.open(args.map) as im:
            return (0.0, 0.0, float(im.width), float(im.height))
    raise ConfigError("heatmap needs --map or --bounds for the grid geometry")


def _load_background(args):
    if not args.map:
        return None
    from PIL import Image
    import numpy as np

    with Image.open(args.map) as im:
        return np.asarray(im.convert("L"), dtype=np.uint8)


def _select_games(records, class_filter: str | None) -> set[str]:
    keep = set()
    for r in records:
        if class_filter and r.player_class != class_filter:
            continue
        keep.add(r.game_id)
    return keep


def cmd_heatmap(args, cfg: PipelineConfig) -> int:
    bounds = _map_bounds(args)
    spec = maps_mod.GridSpec(grid_w=args.grid_size or cfg.grid_size,
                             grid_h=args.grid_size or cfg.grid_size,
                             bounds=bounds)
    records = derive_mod.read_records_csv(args.records) if args.records else None
    selected: set[str] | None = None
    if args.player_class:
        if records is None:
            raise ConfigError("--class filtering requires --records")
        selected = _select_games(records, args.player_class)

    kind = args.kind.capitalize()
    start_by_game = {r.game_id: r.start_s for r in records or []}

    def in_selection(game_id: str) -> bool:
        return selected is None or game_id in selected

    points: list[tuple[float, float]] = []
    timed: list[tuple[float, float, float]] = []
    if args.kind == "landing":
        if records is None:
            raise ConfigError("kind=landing requires --records")
        for r in records:
            if in_selection(r.game_id) and r.landing_spot is not None:
                points.append(r.landing_spot)
    else:
        src = args.kills if args.kind == "killing" else args.traces
        if not src:
            raise ConfigError(f"kind={args.kind} requires "
                              f"--{'kills' if args.kind == 'killing' else 'traces'}")
        for game_id, t, x, y in derive_mod.read_points_csv(src):
            if not in_selection(game_id):
                continue
            points.append((x, y))
            if game_id in start_by_game:
                timed.append((t - start_by_game[game_id], x, y))

    out_prefix = Path(args.out or (Path(cfg.out) / f"heatmap_{args.kind}"))
    out_prefix.parent.mkdir(parents=True, exist_ok=True)
    background = _load_background(args)
    sigma = cfg.smooth_sigma if args.sigma is None else args.sigma

    if args.window:
        if args.kind == "landing":
            raise ConfigError("--window applies to trace/kill heatmaps")
        if not start_by_game:
            raise ConfigError("--window requires --records for game start times")
        slices = maps_mod.time_sliced(timed, args.window, spec, kind)
        if not slices:
            log.info("empty selection; no heatmap windows written")
            return EXIT_OK
        for (w0, w1), grid in slices:
            smoothed = maps_mod.smooth(grid, sigma)
            stem = f"{out_prefix}_w{int(w0):05d}"
            maps_mod.write_grid_pgm(smoothed, f"{stem}.pgm")
            maps_mod.write_png(maps_mod.render_heat(smoothed, background=background),
                               f"{stem}.png")
            log.info("window [%d,%d): %s.pgm/.png", w0, w1, stem)
        return EXIT_OK

    if not points:
        log.info("empty selection; no heatmap written")
        return EXIT_OK
    grid = maps_mod.accumulate(points, spec, kind)
    if grid.dropped:
        log.warning("%d point(s) outside map bounds dropped", grid.dropped)
    smoothed = maps_mod.smooth(grid, sigma)
    maps_mod.write_grid_pgm(smoothed, f"{out_prefix}.pgm")
    maps_mod.write_png(maps_mod.render_heat(smoothed, background=background),
                       f"{out_prefix}.png")
    log.info("%d point(s) -> %s.pgm/.png", len(points), out_prefix)
    return EXIT_OK


def _hotspot_params(args, cfg: PipelineConfig):
    return dict(
        threshold_frac=cfg.hotspot_threshold_frac if args.threshold is None else args.threshold,
        erode_n=cfg.hotspot_erode if args.erode is None else args.erode,
        dilate_n=cfg.hotspot_dilate if args.dilate is None else args.dilate,
        min_area=cfg.hotspot_min_area if args.min_area is None else args.min_area)


def cmd_hotspots(args, cfg: PipelineConfig) -> int:
    params = _hotspot_params(args, cfg)
    out_prefix = Path(args.out or (Path(cfg.out) / "hotspots"))
    out_prefix.parent.mkdir(parents=True, exist_ok=True)
    background = _load_background(args)

    if args.grid:
        grid = maps_mod.read_grid_pgm(args.grid)
        hmap = maps_mod.extract_hotspots(grid, **params)
        maps_mod.write_hotspots_csv(hmap, f"{out_prefix}.csv")
        color = maps_mod.HOTSPOT_COLORS.get(grid.kind, (255, 160, 0))
        maps_mod.write_png(maps_mod.render_hotspots([(hmap, color)],
                                                    background=background),
                           f"{out_prefix}.png")
        log.info("%d hotspot(s) -> %s.csv/.png", len(hmap.hotspots), out_prefix)

    if args.activity_grid and args.killing_grid:
        activity = maps_mod.extract_hotspots(
            maps_mod.read_grid_pgm(args.activity_grid), **params)
        killing = maps_mod.extract_hotspots(
            maps_mod.read_grid_pgm(args.killing_grid), **params)
        boring, engaged = maps_mod.boring_spots(activity, killing,
                                                cfg.boring_max_overlap)
        lines = ["activity_id,classification"]
        lines += [f"{i},boring" for i in boring]
        lines += [f"{i},engaged" for i in engaged]
        Path(f"{out_prefix}_boring.csv").write_text("\n".join(lines) + "\n",
                                                    encoding="utf-8")
        img = maps_mod.render_hotspots(
            [(activity, maps_mod.HOTSPOT_COLORS["Boring"]),
             (activity, maps_mod.HOTSPOT_COLORS["Engaged"]),
             (killing, maps_mod.HOTSPOT_COLORS["Killing"])],
            background=background,
            only_ids={0: boring, 1: engaged})
        maps_mod.write_png(img, f"{out_prefix}_overlay.png")
        log.info("%d boring / %d engaged activity hotspot(s) -> %s_boring.csv",
                 len(boring), len(engaged), out_prefix)
    elif not args.grid:
        raise ConfigError("hotspots needs --grid, or --activity-grid with --killing-grid")
    return EXIT_OK


def _parse_pairs(text: str) -> list[tuple[str, str]]:
    pairs = []
    for part in text.split(","):
        if ":" not in part:
            raise ConfigError(f"bad pair (need metric:metric): {part!r}")
        a, b = part.split(":", 1)
        pairs.append((a.strip(), b.strip()))
    return pairs


def _build_table(args, cfg: PipelineConfig):
    records = derive_mod.read_records_csv(args.records)
    survey = stats_mod.read_survey_csv(args.survey)
    params = _hotspot_params(args, cfg)

    def hmap_of(path):
        if not path:
            return None
        return maps_mod.extract_hotspots(maps_mod.read_grid_pgm(path), **params)

    landing = hmap_of(args.landing_grid)
    activity = hmap_of(args.activity_grid)
    return stats_mod.join_survey(records, survey, landing, activity)


def cmd_correlate(args, cfg: PipelineConfig) -> int:
    table, unmatched = _build_table(args, cfg)
    pairs = _parse_pairs(args.pairs) if args.pairs else DEFAULT_PAIRS
    entries = stats_mod.hypothesis_report(table, pairs,
                                          permutation=cfg.stats_permutation)
    out_prefix = Path(args.out or (Path(cfg.out) / "correlations"))
    out_prefix.parent.mkdir(parents=True, exist_ok=True)
    stats_mod.write_report_csv(entries, f"{out_prefix}.csv")
    if unmatched:
        lines = [stats_mod.SURVEY_COLUMNS]
        for row in unmatched:
            lines.append(f"{row.participant_id},{row.game_id},{row.satisfaction},"
                         f"{row.enjoyment},{row.strategy},"
                         f"{row.hours_gaming_per_week!r},{row.fortnite_watch_hours!r}")
        Path(f"{out_prefix}_unmatched.csv").write_text("\n".join(lines) + "\n",
                                                       encoding="utf-8")
        log.warning("%d survey row(s) had no matching game record", len(unmatched))
    log.info("%d pair(s) -> %s.csv", len(entries), out_prefix)
    return EXIT_OK


def cmd_report(args, cfg: PipelineConfig) -> int:
    table, unmatched = _build_table(args, cfg)
    pairs = _parse_pairs(args.pairs) if args.pairs else DEFAULT_PAIRS
    entries = stats_mod.hypothesis_report(table, pairs,
                                          permutation=cfg.stats_permutation)
    text = stats_mod.format_report_text(entries)
    text += f"\njoined games: {len(table)}; unmatched survey rows: {len(unmatched)}\n"
    if unmatched:
        text += "unmatched: " + ", ".join(r.game_id for r in unmatched) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _synth_worker(args_tuple) -> str:
    out_dir, i, n_games, base_seed, class_mix, duration, resolution, noise, occl = args_tuple
    from PIL import Image

    out_dir = Path(out_dir)
    assets = synth_mod.build_assets()  # deterministic; shared files written once by parent
    seed = base_seed + i
    player_class = synth_mod.class_for_index(i, n_games, class_mix)
    scenario = synth_mod.scenario_for_game(seed, player_class, duration)
    game_id = f"game{i:03d}"
    gdir = out_dir / "games" / game_id
    gdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for frame, truth in synth_mod.render_frames(scenario, assets, resolution,
                                                noise, occl):
        Image.fromarray(frame.pixels).save(gdir / f"frame_{frame.index:08d}.png")
        rows.append(truth)
    (gdir / "stream.meta").write_text(f"fps=1/1\nsource_id={game_id}\n",
                                      encoding="utf-8")
    synth_mod.write_truth_csv(gdir / "truth.csv", rows)
    return f"{game_id},{player_class},{seed},{scenario.game_duration_s}"


def cmd_synth(args, cfg: PipelineConfig) -> int:
    out_dir = Path(args.out or cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    synth_mod.build_assets(out_dir)
    resolution = tuple(int(v) for v in args.resolution.split("x"))
    duration = (args.duration_s[0], args.duration_s[1])
    jobs = max(1, args.jobs)
    work = [(str(out_dir), i, args.games, args.seed, args.class_mix, duration,
             resolution, args.noise_sigma, args.occlusion_rate)
            for i in range(args.games)]
    if jobs == 1:
        rows = [_synth_worker(w) for w in work]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_synth_worker, work))
    rows.sort()
    (out_dir / "manifest.csv").write_text(
        synth_mod.MANIFEST_HEADER + "\n" + "\n".join(rows) + "\n", encoding="utf-8")
    log.info("%d game(s) -> %s", args.games, out_dir)
    return EXIT_OK


def _add_global_options(p: argparse.ArgumentParser, suppress: bool) -> None:
    # the same options are accepted before and after the subcommand; the
    # subparser copies use SUPPRESS so they never clobber earlier values
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    p.add_argument("--config", help="pipeline config file (key=value lines)",
                   **({} if not suppress else kw))
    p.add_argument("--jobs", type=int, help="parallel workers across games/sources",
                   **(({"default": 1}) if not suppress else kw))
    p.add_argument("--out", help="output directory or prefix", **kw)
    p.add_argument("-v", "--verbose", action="store_true", **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hudtrace",
        description="Gameplay telemetry extraction and analysis from HUD video frames")
    _add_global_options(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="frames -> telemetry CSV")
    p.add_argument("sources", nargs="+",
                   help="frame directories, FRAMES/1 files, or '-' for stdin")
    p.add_argument("--layout", help="HUD layout file (overrides config)")
    p.add_argument("--rate", default=None, help="sampling rate in Hz")

    p = sub.add_parser("derive", help="telemetry CSV -> per-game records")
    p.add_argument("telemetry", nargs="+", help="telemetry CSV files")
    p.add_argument("--manifest", help="manifest.csv mapping source ids to classes")
    p.add_argument("--class", dest="player_class", default="Experienced",
                   choices=derive_mod.PLAYER_CLASSES,
                   help="player class when not in a manifest")

    p = sub.add_parser("heatmap", help="records/traces/kills -> heat grid PGM + PNG")
    p.add_argument("--kind", required=True, choices=("activity", "landing", "killing"))
    p.add_argument("--records", help="records.csv")
    p.add_argument("--traces", help="traces.csv (activity)")
    p.add_argument("--kills", help="kills.csv (killing)")
    p.add_argument("--class", dest="player_class",
                   choices=derive_mod.PLAYER_CLASSES)
    p.add_argument("--window", type=int, help="time-slice window seconds")
    p.add_argument("--grid-size", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--map", help="map image (bounds + render background)")
    p.add_argument("--bounds", help="x0,y0,x1,y1 map bounds")

    p = sub.add_parser("hotspots", help="heat grid PGM -> hotspot CSV + overlay PNG")
    p.add_argument("--grid", help="input heat grid PGM")
    p.add_argument("--activity-grid", help="activity grid for boring-spot split")
    p.add_argument("--killing-grid", help="killing grid for boring-spot split")
    p.add_argument("--threshold", type=float)
    p.add_argument("--erode", type=int)
    p.add_argument("--dilate", type=int)
    p.add_argument("--min-area", type=int)
    p.add_argument("--map", help="background map image")

    for name, help_text in (("correlate", "records + survey -> correlation CSV"),
                            ("report", "records + survey -> text report")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--records", required=True)
        p.add_argument("--survey", required=True)
        p.add_argument("--landing-grid", help="landing heat grid PGM")
        p.add_argument("--activity-grid", help="activity heat grid PGM")
        p.add_argument("--pairs", help="comma list of metric:metric")
        p.add_argument("--threshold", type=float)
        p.add_argument("--erode", type=int)
        p.add_argument("--dilate", type=int)
        p.add_argument("--min-area", type=int)

    p = sub.add_parser("synth", help="generate a synthetic ground-truth corpus")
    p.add_argument("--games", type=int, default=10)
    p.add_argument("--seed", type=int, default=1000)
    p.add_argument("--class-mix", type=float, default=0.5,
                   help="fraction of Beginner games")
    p.add_argument("--duration-s", type=int, nargs=2, default=[1200, 1500],
                   metavar=("MIN", "MAX"))
    p.add_argument("--resolution", default="1920x1080")
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--occlusion-rate", type=float, default=0.0)

    for sp in sub.choices.values():
        _add_global_options(sp, suppress=True)
    return parser


_HANDLERS = {
    "extract": cmd_extract,
    "derive": cmd_derive,
    "heatmap": cmd_heatmap,
    "hotspots": cmd_hotspots,
    "correlate": cmd_correlate,
    "report": cmd_report,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr,
                        level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_pipeline_config(args.config) if args.config else PipelineConfig()
        if getattr(args, "layout", None):
            cfg.layout = args.layout
        if getattr(args, "rate", None):
            cfg.sample_rate = args.rate
        handler = _HANDLERS[args.command]
        return handler(args, cfg)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_BAD_CONFIG
    except (SourceError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return EXIT_MISSING_INPUT
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_BAD_CONFIG
    except AssertionError as exc:
        log.error("internal invariant violation: %s", exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
