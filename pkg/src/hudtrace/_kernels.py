"""Numeric hot kernels with two interchangeable backends.

Every kernel exists twice: a numba ``@njit`` version for speed and a pure
numpy version used when numba is unavailable or disabled.  Set the
environment variable ``HUDTRACE_NUMBA=0`` before import (or call
:func:`set_use_numba` at runtime) to force the numpy path.  Both paths
implement identical contracts; ``benchmarks/bench_kernels.py`` compares
their throughput.
"""

from __future__ import annotations

import os

import numpy as np

try:
    if os.environ.get("HUDTRACE_NUMBA", "1") == "0":
        raise ImportError("numba disabled via HUDTRACE_NUMBA=0")
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


_use_numba = HAS_NUMBA


def use_numba() -> bool:
    """Return True when the numba backend is active."""
    return _use_numba


def set_use_numba(flag: bool) -> bool:
    """Switch backend at runtime; returns the effective setting."""
    global _use_numba
    _use_numba = bool(flag) and HAS_NUMBA
    return _use_numba


# ---------------------------------------------------------------------------
# integral images

def integral_images(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Zero-padded summed-area tables of ``img`` and ``img**2``.

    Exact for 8-bit-valued inputs promoted to float64: every partial sum
    is an integer below 2**53.
    """
    img = np.ascontiguousarray(img, dtype=np.float64)
    h, w = img.shape
    ii1 = np.zeros((h + 1, w + 1), dtype=np.float64)
    ii2 = np.zeros((h + 1, w + 1), dtype=np.float64)
    np.cumsum(np.cumsum(img, axis=0), axis=1, out=ii1[1:, 1:])
    np.cumsum(np.cumsum(img * img, axis=0), axis=1, out=ii2[1:, 1:])
    return ii1, ii2


# ---------------------------------------------------------------------------
# zero-normalized cross-correlation score grids
#
# tz:   template with its masked-support mean subtracted and excluded pixels
#       zeroed, so sum(tz * window) over the full rectangle equals the
#       mean-centered masked numerator.
# tss:  sum(tz**2) over the support.
# ey/ex: coordinates of excluded pixels (empty for an all-true mask); window
#       sums come from the integral images with the excluded pixels
#       subtracted off.
# A window (or template) with zero variance over the support scores 0.


@njit(cache=True)
def _ncc_scores_nb(tz, tss, s, ii1, ii2, ey, ex, nsup, y0, y1, x0, x1, step):
    th, tw = tz.shape
    ny = (y1 - y0 + step - 1) // step
    nx = (x1 - x0 + step - 1) // step
    out = np.empty((ny, nx), dtype=np.float64)
    ne = ey.shape[0]
    for iv in range(ny):
        v = y0 + iv * step
        for iu in range(nx):
            u = x0 + iu * step
            num = 0.0
            for i in range(th):
                for j in range(tw):
                    num += tz[i, j] * s[v + i, u + j]
            ssum = ii1[v + th, u + tw] - ii1[v, u + tw] - ii1[v + th, u] + ii1[v, u]
            ssq = ii2[v + th, u + tw] - ii2[v, u + tw] - ii2[v + th, u] + ii2[v, u]
            for k in range(ne):
                sv = s[v + ey[k], u + ex[k]]
                ssum -= sv
                ssq -= sv * sv
            svar = ssq - ssum * ssum / nsup
            den = tss * svar
            if den > 0.0:
                out[iv, iu] = num / np.sqrt(den)
            else:
                out[iv, iu] = 0.0
    return out


def _ncc_scores_np(tz, tss, s, ii1, ii2, ey, ex, nsup, y0, y1, x0, x1, step):
    th, tw = tz.shape
    ny = (y1 - y0 + step - 1) // step
    nx = (x1 - x0 + step - 1) // step
    yl = y0 + (ny - 1) * step + 1
    xl = x0 + (nx - 1) * step + 1

    num = np.zeros((ny, nx), dtype=np.float64)
    for i, j in np.argwhere(tz != 0.0):
        num += tz[i, j] * s[y0 + i:yl + i:step, x0 + j:xl + j:step]

    vs = np.arange(y0, y0 + ny * step, step)
    us = np.arange(x0, x0 + nx * step, step)
    ssum = (ii1[np.ix_(vs + th, us + tw)] - ii1[np.ix_(vs, us + tw)]
            - ii1[np.ix_(vs + th, us)] + ii1[np.ix_(vs, us)])
    ssq = (ii2[np.ix_(vs + th, us + tw)] - ii2[np.ix_(vs, us + tw)]
           - ii2[np.ix_(vs + th, us)] + ii2[np.ix_(vs, us)])
    for k in range(ey.shape[0]):
        i, j = ey[k], ex[k]
        sv = s[y0 + i:yl + i:step, x0 + j:xl + j:step]
        ssum -= sv
        ssq -= sv * sv

    svar = ssq - ssum * ssum / nsup
    den = tss * svar
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0.0, num / np.sqrt(np.maximum(den, 0.0)), 0.0)
    return out


def ncc_scores(tz, tss, s, ii1, ii2, ey, ex, nsup,
               y0=0, y1=None, x0=0, x1=None, step=1):
    """Score grid for offsets ``range(y0, y1, step) x range(x0, x1, step)``."""
    th, tw = tz.shape
    if y1 is None:
        y1 = s.shape[0] - th + 1
    if x1 is None:
        x1 = s.shape[1] - tw + 1
    args = (tz, tss, s, ii1, ii2, ey, ex, float(nsup),
            int(y0), int(y1), int(x0), int(x1), int(step))
    if _use_numba:
        return _ncc_scores_nb(*args)
    return _ncc_scores_np(*args)


def prepare_template(template: np.ndarray, mask: np.ndarray | None):
    """Precompute (tz, tss, ey, ex, nsup) for :func:`ncc_scores`."""
    t = np.ascontiguousarray(template, dtype=np.float64)
    if mask is None:
        sup = np.ones(t.shape, dtype=bool)
    else:
        sup = np.asarray(mask, dtype=bool)
    nsup = int(sup.sum())
    tmean = t[sup].sum() / nsup
    tz = np.where(sup, t - tmean, 0.0)
    tss = float((tz * tz).sum())
    ey, ex = np.nonzero(~sup)
    return tz, tss, ey.astype(np.int64), ex.astype(np.int64), nsup


# ---------------------------------------------------------------------------
# 3x3 binary morphology (zero-padded borders)


@njit(cache=True)
def _erode3_nb(m):
    h, w = m.shape
    out = np.zeros((h, w), dtype=np.bool_)
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            out[y, x] = (m[y - 1, x - 1] and m[y - 1, x] and m[y - 1, x + 1]
                         and m[y, x - 1] and m[y, x] and m[y, x + 1]
                         and m[y + 1, x - 1] and m[y + 1, x] and m[y + 1, x + 1])
    return out


def _erode3_np(m):
    p = np.pad(m, 1, constant_values=False)
    out = p[2:, 2:].copy()
    for dy in range(3):
        for dx in range(3):
            if dy == 2 and dx == 2:
                continue
            out &= p[dy:dy + m.shape[0], dx:dx + m.shape[1]]
    return out


@njit(cache=True)
def _dilate3_nb(m):
    h, w = m.shape
    out = np.zeros((h, w), dtype=np.bool_)
    for y in range(h):
        for x in range(w):
            if m[y, x]:
                for dy in range(-1, 2):
                    yy = y + dy
                    if yy < 0 or yy >= h:
                        continue
                    for dx in range(-1, 2):
                        xx = x + dx
                        if 0 <= xx < w:
                            out[yy, xx] = True
    return out


def _dilate3_np(m):
    p = np.pad(m, 1, constant_values=False)
    out = p[2:, 2:].copy()
    for dy in range(3):
        for dx in range(3):
            if dy == 2 and dx == 2:
                continue
            out |= p[dy:dy + m.shape[0], dx:dx + m.shape[1]]
    return out


def erode3(mask: np.ndarray, n: int = 1) -> np.ndarray:
    """``n`` erosions with a 3x3 square element; outside the image is 0."""
    m = np.asarray(mask, dtype=bool)
    fn = _erode3_nb if _use_numba else _erode3_np
    for _ in range(n):
        m = fn(m)
    return m


def dilate3(mask: np.ndarray, n: int = 1) -> np.ndarray:
    """``n`` dilations with a 3x3 square element; outside the image is 0."""
    m = np.asarray(mask, dtype=bool)
    fn = _dilate3_nb if _use_numba else _dilate3_np
    for _ in range(n):
        m = fn(m)
    return m


# ---------------------------------------------------------------------------
# 8-connected component labeling
#
# Labels are assigned 1..k in row-major order of each component's first pixel,
# so both backends produce identical outputs.


@njit(cache=True)
def _label8_nb(m):
    h, w = m.shape
    labels = np.zeros((h, w), dtype=np.int32)
    parent = np.zeros(h * w // 2 + 2, dtype=np.int32)
    nxt = 1
    for y in range(h):
        for x in range(w):
            if not m[y, x]:
                continue
            best = 0
            # previously visited 8-neighbors: W, NW, N, NE
            for dy, dx in ((0, -1), (-1, -1), (-1, 0), (-1, 1)):
                yy, xx = y + dy, x + dx
                if 0 <= yy < h and 0 <= xx < w and labels[yy, xx] > 0:
                    r = labels[yy, xx]
                    while parent[r] != r:
                        r = parent[r]
                    if best == 0 or r < best:
                        best = r
            if best == 0:
                labels[y, x] = nxt
                parent[nxt] = nxt
                nxt += 1
            else:
                labels[y, x] = best
                for dy, dx in ((0, -1), (-1, -1), (-1, 0), (-1, 1)):
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w and labels[yy, xx] > 0:
                        r = labels[yy, xx]
                        while parent[r] != r:
                            r = parent[r]
                        if r != best:
                            parent[r] = best
    # resolve and renumber by first appearance
    remap = np.zeros(nxt, dtype=np.int32)
    count = 0
    for y in range(h):
        for x in range(w):
            if labels[y, x] > 0:
                r = labels[y, x]
                while parent[r] != r:
                    r = parent[r]
                if remap[r] == 0:
                    count += 1
                    remap[r] = count
                labels[y, x] = remap[r]
    return labels, count


def _label8_np(m):
    from scipy import ndimage

    raw, k = ndimage.label(m, structure=np.ones((3, 3), dtype=bool))
    if k == 0:
        return raw.astype(np.int32), 0
    flat = raw.ravel()
    nz = np.flatnonzero(flat)
    first = np.full(k + 1, flat.size, dtype=np.int64)
    np.minimum.at(first, flat[nz], nz)
    order = np.argsort(first[1:], kind="stable")
    remap = np.zeros(k + 1, dtype=np.int32)
    remap[order + 1] = np.arange(1, k + 1, dtype=np.int32)
    return remap[raw], k


def label8(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """Label 8-connected components; returns (int32 labels, count)."""
    m = np.ascontiguousarray(mask, dtype=bool)
    if _use_numba:
        return _label8_nb(m)
    return _label8_np(m)


# ---------------------------------------------------------------------------
# grid accumulation (integer counts held in float64 stay exact)


@njit(cache=True)
def _accumulate_nb(iy, ix, h, w):
    out = np.zeros((h, w), dtype=np.float64)
    for k in range(iy.shape[0]):
        out[iy[k], ix[k]] += 1.0
    return out


def _accumulate_np(iy, ix, h, w):
    flat = np.bincount(iy.astype(np.int64) * w + ix.astype(np.int64),
                       minlength=h * w)
    return flat.reshape(h, w).astype(np.float64)


def accumulate_counts(iy: np.ndarray, ix: np.ndarray, h: int, w: int) -> np.ndarray:
    """Count points per cell from row/column index arrays."""
    iy = np.ascontiguousarray(iy, dtype=np.int64)
    ix = np.ascontiguousarray(ix, dtype=np.int64)
    if _use_numba:
        return _accumulate_nb(iy, ix, h, w)
    return _accumulate_np(iy, ix, h, w)
