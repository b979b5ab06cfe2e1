"""Heat-grid accumulation, Gaussian smoothing, hot-spot extraction via
binarize/erode/dilate/label, time slicing, membership tests, and rendering.

Accumulation is an associative integer merge (counts held exactly in
float64), so partial grids built in parallel and summed equal sequential
accumulation bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels

DEFAULT_GRID = 512
DEFAULT_THRESHOLD_FRAC = 0.25
DEFAULT_ERODE = 1
DEFAULT_DILATE = 2
DEFAULT_MIN_AREA = 16
DEFAULT_SIGMA = 2.0
BORING_MAX_OVERLAP = 0.10

GRID_KINDS = ("Activity", "Landing", "Killing")


@dataclass(frozen=True)
class GridSpec:
    grid_w: int = DEFAULT_GRID
    grid_h: int = DEFAULT_GRID
    bounds: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)  # x0,y0,x1,y1

    def cell_of(self, x: float, y: float) -> tuple[int, int] | None:
        """Containing cell of a map point, or None when outside the bounds."""
        x0, y0, x1, y1 = self.bounds
        if not (x0 <= x <= x1 and y0 <= y <= y1):
            return None
        cx = min(int((x - x0) / (x1 - x0) * self.grid_w), self.grid_w - 1)
        cy = min(int((y - y0) / (y1 - y0) * self.grid_h), self.grid_h - 1)
        return cx, cy

    def cell_center(self, cx: float, cy: float) -> tuple[float, float]:
        x0, y0, x1, y1 = self.bounds
        return (x0 + (cx + 0.5) * (x1 - x0) / self.grid_w,
                y0 + (cy + 0.5) * (y1 - y0) / self.grid_h)


@dataclass
class HeatGrid:
    spec: GridSpec
    cells: np.ndarray  # (grid_h, grid_w) float64, non-negative
    kind: str = "Activity"
    dropped: int = 0  # points outside the bounds

    @property
    def total(self) -> float:
        return float(self.cells.sum())


@dataclass(frozen=True)
class HotSpot:
    id: int
    runs: tuple[tuple[int, int, int], ...]  # (row, col_start, col_end_exclusive)
    area_cells: int
    centroid: tuple[float, float]  # map coordinates, mass-weighted
    bbox: tuple[int, int, int, int]  # cell coords x0,y0,x1,y1 inclusive
    peak_value: float


@dataclass
class HotSpotMap:
    hotspots: list[HotSpot]
    params: tuple[float, int, int, int]  # threshold_frac, erode_n, dilate_n, min_area
    source_kind: str
    spec: GridSpec
    labels: np.ndarray  # (grid_h, grid_w) int32; 0 = background

    def contains(self, point: tuple[float, float]) -> int | None:
        """Id of the hotspot whose cell set contains the point, else None."""
        cell = self.spec.cell_of(point[0], point[1])
        if cell is None:
            return None
        label = int(self.labels[cell[1], cell[0]])
        return label if label > 0 else None


def accumulate(points, spec: GridSpec, kind: str = "Activity") -> HeatGrid:
    """Each in-bounds point increments its containing cell by one.

    Points outside the bounds are counted in ``dropped`` and ignored, so the
    grid sum equals the number of accepted points exactly.
    """
    pts = np.asarray(list(points) if not isinstance(points, np.ndarray) else points,
                     dtype=np.float64)
    if pts.size == 0:
        return HeatGrid(spec=spec, kind=kind,
                        cells=np.zeros((spec.grid_h, spec.grid_w), dtype=np.float64))
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"expected (n, 2) points, got {pts.shape}")
    x0, y0, x1, y1 = spec.bounds
    inside = ((pts[:, 0] >= x0) & (pts[:, 0] <= x1)
              & (pts[:, 1] >= y0) & (pts[:, 1] <= y1))
    kept = pts[inside]
    cx = np.minimum(((kept[:, 0] - x0) / (x1 - x0) * spec.grid_w).astype(np.int64),
                    spec.grid_w - 1)
    cy = np.minimum(((kept[:, 1] - y0) / (y1 - y0) * spec.grid_h).astype(np.int64),
                    spec.grid_h - 1)
    cells = _kernels.accumulate_counts(cy, cx, spec.grid_h, spec.grid_w)
    return HeatGrid(spec=spec, cells=cells, kind=kind,
                    dropped=int(len(pts) - len(kept)))


def merge(grids: list[HeatGrid]) -> HeatGrid:
    """Sum partial grids; exact for integer-valued cells."""
    if not grids:
        raise ValueError("nothing to merge")
    first = grids[0]
    cells = np.zeros_like(first.cells)
    dropped = 0
    for g in grids:
        if g.spec != first.spec or g.kind != first.kind:
            raise ValueError("cannot merge grids with differing spec or kind")
        cells += g.cells
        dropped += g.dropped
    return HeatGrid(spec=first.spec, cells=cells, kind=first.kind, dropped=dropped)


def _gaussian_taps(sigma: float) -> np.ndarray:
    radius = int(math.ceil(3.0 * sigma))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    return k / k.sum()


def _smooth_axis(cells: np.ndarray, taps: np.ndarray, axis: int) -> np.ndarray:
    """Mass-preserving 1-D convolution: each source cell spreads its mass
    with the kernel renormalized over in-bounds targets."""
    radius = (len(taps) - 1) // 2
    moved = np.moveaxis(cells, axis, 0)
    n = moved.shape[0]
    weight = np.convolve(np.ones(n), taps, mode="same")  # in-bounds kernel mass per source
    src = moved / weight[:, None]
    out = np.zeros_like(moved)
    for k, tap in enumerate(taps):
        shift = k - radius
        if shift >= 0:
            out[shift:n] += tap * src[:n - shift]
        else:
            out[:n + shift] += tap * src[-shift:]
    return np.moveaxis(out, 0, axis)


def smooth(grid: HeatGrid, sigma_cells: float = DEFAULT_SIGMA) -> HeatGrid:
    """Gaussian smoothing, kernel truncated at 3 sigma, borders renormalized
    so the total mass is preserved within 1e-6 relative."""
    if sigma_cells < 0:
        raise ValueError("sigma must be >= 0")
    if sigma_cells == 0:
        return HeatGrid(spec=grid.spec, cells=grid.cells.copy(),
                        kind=grid.kind, dropped=grid.dropped)
    taps = _gaussian_taps(sigma_cells)
    cells = _smooth_axis(grid.cells, taps, axis=0)
    cells = _smooth_axis(cells, taps, axis=1)
    return HeatGrid(spec=grid.spec, cells=cells, kind=grid.kind, dropped=grid.dropped)


def extract_hotspots(grid: HeatGrid,
                     threshold_frac: float = DEFAULT_THRESHOLD_FRAC,
                     erode_n: int = DEFAULT_ERODE,
                     dilate_n: int = DEFAULT_DILATE,
                     min_area: int = DEFAULT_MIN_AREA) -> HotSpotMap:
    """Binarize at threshold_frac * max, erode then dilate with a 3x3 square,
    label 8-connected components, and drop those below ``min_area``.

    Centroids are mass-weighted with the original (pre-binarization) cell
    values.  The threshold is relative to the grid maximum, so scaling the
    whole grid by any positive constant leaves the result unchanged.
    """
    if not (0.0 < threshold_frac <= 1.0):
        raise ValueError("threshold_frac must be in (0, 1]")
    params = (threshold_frac, erode_n, dilate_n, min_area)
    peak = float(grid.cells.max()) if grid.cells.size else 0.0
    empty = HotSpotMap(hotspots=[], params=params, source_kind=grid.kind,
                       spec=grid.spec,
                       labels=np.zeros_like(grid.cells, dtype=np.int32))
    if peak <= 0.0:
        return empty

    binary = grid.cells >= threshold_frac * peak
    binary = _kernels.erode3(binary, erode_n)
    binary = _kernels.dilate3(binary, dilate_n)
    raw_labels, count = _kernels.label8(binary)
    if count == 0:
        return empty

    hotspots: list[HotSpot] = []
    labels = np.zeros_like(raw_labels)
    next_id = 0
    for lbl in range(1, count + 1):
        comp = raw_labels == lbl
        area = int(comp.sum())
        if area < min_area:
            continue
        next_id += 1
        ys, xs = np.nonzero(comp)
        mass = grid.cells[ys, xs]
        if mass.sum() > 0:
            mx = float((mass * xs).sum() / mass.sum())
            my = float((mass * ys).sum() / mass.sum())
        else:
            mx, my = float(xs.mean()), float(ys.mean())
        centroid = grid.spec.cell_center(mx, my)
        runs = []
        for row in np.unique(ys):
            cols = xs[ys == row]
            breaks = np.nonzero(np.diff(cols) > 1)[0]
            starts = np.concatenate(([0], breaks + 1))
            ends = np.concatenate((breaks, [len(cols) - 1]))
            for s, e in zip(starts, ends):
                runs.append((int(row), int(cols[s]), int(cols[e]) + 1))
        hotspots.append(HotSpot(
            id=next_id,
            runs=tuple(runs),
            area_cells=area,
            centroid=centroid,
            bbox=(int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())),
            peak_value=float(grid.cells[ys, xs].max()),
        ))
        labels[comp] = next_id
    return HotSpotMap(hotspots=hotspots, params=params, source_kind=grid.kind,
                      spec=grid.spec, labels=labels)


def contains(hotspot_map: HotSpotMap, point: tuple[float, float]) -> int | None:
    return hotspot_map.contains(point)


def time_sliced(points_with_t, window_s: int, spec: GridSpec,
                kind: str = "Killing") -> list[tuple[tuple[float, float], HeatGrid]]:
    """Bucket (t_rel, x, y) points into consecutive windows of ``window_s``
    seconds of game-relative time; one grid per non-empty window."""
    if window_s <= 0:
        raise ValueError("window_s must be positive")
    buckets: dict[int, list[tuple[float, float]]] = {}
    for t, x, y in points_with_t:
        buckets.setdefault(int(t // window_s), []).append((x, y))
    out = []
    for k in sorted(buckets):
        window = (float(k * window_s), float((k + 1) * window_s))
        out.append((window, accumulate(buckets[k], spec, kind)))
    return out


def boring_spots(activity: HotSpotMap, killing: HotSpotMap,
                 max_overlap_frac: float = BORING_MAX_OVERLAP) -> tuple[list[int], list[int]]:
    """Split activity hotspot ids into (boring, engaged).

    An activity hotspot is boring when its cell-set intersection with every
    single killing hotspot stays below ``max_overlap_frac`` of its own area.
    """
    boring: list[int] = []
    engaged: list[int] = []
    for spot in activity.hotspots:
        comp = activity.labels == spot.id
        is_boring = True
        for ks in killing.hotspots:
            overlap = int((comp & (killing.labels == ks.id)).sum())
            if overlap >= max_overlap_frac * spot.area_cells:
                is_boring = False
                break
        (boring if is_boring else engaged).append(spot.id)
    return boring, engaged


# ---------------------------------------------------------------------------
# rendering

DEFAULT_PALETTE = (
    (0.00, (0, 0, 255, 0)),
    (0.33, (0, 0, 255, 255)),
    (0.66, (0, 255, 0, 255)),
    (1.00, (255, 0, 0, 255)),
)

HOTSPOT_COLORS = {
    "Activity": (40, 90, 255),
    "Landing": (255, 160, 0),
    "Killing": (230, 30, 30),
    "Boring": (40, 90, 255),
    "Engaged": (30, 200, 80),
}


def _palette_rgba(t: np.ndarray, palette) -> np.ndarray:
    """Linear interpolation through RGBA palette stops; t in [0, 1]."""
    stops = np.array([p for p, _ in palette], dtype=np.float64)
    colors = np.array([c for _, c in palette], dtype=np.float64)
    out = np.empty(t.shape + (4,), dtype=np.float64)
    idx = np.clip(np.searchsorted(stops, t, side="right") - 1, 0, len(stops) - 2)
    left, right = stops[idx], stops[idx + 1]
    frac = np.where(right > left, (t - left) / np.where(right > left, right - left, 1.0), 0.0)
    frac = np.clip(frac, 0.0, 1.0)
    for c in range(4):
        out[..., c] = colors[idx, c] * (1 - frac) + colors[idx + 1, c] * frac
    exact = t >= stops[-1]
    out[exact] = colors[-1]
    return out


def render_heat(grid: HeatGrid, palette=DEFAULT_PALETTE,
                background: np.ndarray | None = None) -> np.ndarray:
    """Color the max-normalized grid through the palette; composite over the
    background image (scaled to it) when given, else over black."""
    peak = float(grid.cells.max())
    t = grid.cells / peak if peak > 0 else np.zeros_like(grid.cells)
    if background is not None:
        bg = np.asarray(background)
        if bg.ndim == 2:
            bg = np.stack([bg] * 3, axis=-1)
        h, w = bg.shape[:2]
        ys = (np.arange(h) * t.shape[0]) // h
        xs = (np.arange(w) * t.shape[1]) // w
        t = t[np.ix_(ys, xs)]
        base = bg.astype(np.float64)
    else:
        base = np.zeros(t.shape + (3,), dtype=np.float64)
    rgba = _palette_rgba(t, palette)
    alpha = rgba[..., 3:4] / 255.0
    out = base * (1.0 - alpha) + rgba[..., :3] * alpha
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def render_hotspots(layers: list[tuple[HotSpotMap, tuple[int, int, int]]],
                    background: np.ndarray | None = None,
                    alpha: float = 0.65,
                    only_ids: dict[int, list[int]] | None = None) -> np.ndarray:
    """Fill hotspot components in per-layer colors over an optional map image.

    ``only_ids`` optionally restricts layer i to the listed hotspot ids.
    """
    if not layers:
        raise ValueError("no hotspot layers to render")
    spec0 = layers[0][0].spec
    gh, gw = layers[0][0].labels.shape
    if background is not None:
        bg = np.asarray(background)
        if bg.ndim == 2:
            bg = np.stack([bg] * 3, axis=-1)
        out = bg.astype(np.float64).copy()
        h, w = out.shape[:2]
    else:
        h, w = gh, gw
        out = np.zeros((h, w, 3), dtype=np.float64)
    ys = (np.arange(h) * gh) // h
    xs = (np.arange(w) * gw) // w
    for i, (hmap, color) in enumerate(layers):
        if hmap.labels.shape != (gh, gw) or hmap.spec != spec0:
            raise ValueError("hotspot layers must share one grid spec")
        lbl = hmap.labels[np.ix_(ys, xs)]
        if only_ids is not None and i in only_ids:
            sel = np.isin(lbl, only_ids[i]) & (lbl > 0)
        else:
            sel = lbl > 0
        for c in range(3):
            out[..., c][sel] = out[..., c][sel] * (1 - alpha) + color[c] * alpha
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# persistence


def write_png(image: np.ndarray, path) -> None:
    from PIL import Image

    Image.fromarray(np.asarray(image, dtype=np.uint8)).save(Path(path))


def write_grid_pgm(grid: HeatGrid, path) -> None:
    """16-bit big-endian P5 portable graymap, max-scaled, plus .meta sidecar."""
    path = Path(path)
    peak = float(grid.cells.max())
    if peak > 0:
        q = np.rint(grid.cells / peak * 65535.0).astype(">u2")
    else:
        q = np.zeros_like(grid.cells, dtype=">u2")
    with open(path, "wb") as f:
        f.write(f"P5\n{grid.spec.grid_w} {grid.spec.grid_h}\n65535\n".encode("ascii"))
        f.write(q.tobytes())
    x0, y0, x1, y1 = grid.spec.bounds
    meta = (f"kind={grid.kind}\n"
            f"bounds={x0!r},{y0!r},{x1!r},{y1!r}\n"
            f"sum={grid.total!r}\n"
            f"dropped={grid.dropped}\n")
    path.with_suffix(path.suffix + ".meta").write_text(meta, encoding="utf-8")


def read_grid_pgm(path) -> HeatGrid:
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.readline().strip()
        if magic != b"P5":
            raise ValueError(f"{path}: not a P5 graymap")
        dims = f.readline().split()
        maxval = int(f.readline())
        w, h = int(dims[0]), int(dims[1])
        data = np.frombuffer(f.read(w * h * (2 if maxval > 255 else 1)),
                             dtype=">u2" if maxval > 255 else np.uint8)
    cells = data.reshape(h, w).astype(np.float64)
    kind = "Activity"
    bounds = (0.0, 0.0, float(w), float(h))
    meta_path = path.with_suffix(path.suffix + ".meta")
    dropped = 0
    if meta_path.exists():
        from .ingest import parse_key_value_text

        pairs = parse_key_value_text(meta_path.read_text(encoding="utf-8"))
        kind = pairs.get("kind", kind)
        if "bounds" in pairs:
            bounds = tuple(float(v) for v in pairs["bounds"].split(","))  # type: ignore[assignment]
        dropped = int(pairs.get("dropped", "0"))
    spec = GridSpec(grid_w=w, grid_h=h, bounds=bounds)
    return HeatGrid(spec=spec, cells=cells, kind=kind, dropped=dropped)


def write_hotspots_csv(hmap: HotSpotMap, path) -> None:
    lines = ["id,kind,area,cx,cy,peak,bbox_x0,bbox_y0,bbox_x1,bbox_y1"]
    for s in hmap.hotspots:
        lines.append(
            f"{s.id},{hmap.source_kind},{s.area_cells},"
            f"{s.centroid[0]!r},{s.centroid[1]!r},{s.peak_value!r},"
            f"{s.bbox[0]},{s.bbox[1]},{s.bbox[2]},{s.bbox[3]}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
