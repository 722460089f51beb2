"""Hot numeric kernels: numba-compiled primaries with pure-NumPy fallbacks.

Three inner loops dominate batch runtime: binary dilation, connected-component
labeling, and the edit-distance DP behind the text metrics. Each has a
numba ``@njit`` implementation and a vectorized NumPy implementation with
identical semantics. The compiled path is the default; set

    SCREENLENS_NO_NUMBA=1

before import to force the fallback path (used by ``benchmarks/`` to compare
the two). ``VARIANTS`` exposes both implementations regardless of the flag.
"""

from __future__ import annotations

import os

import numpy as np

_FLAG = os.environ.get("SCREENLENS_NO_NUMBA", "").strip().lower()
NUMBA_ENABLED = _FLAG not in {"1", "true", "yes", "on"}

if NUMBA_ENABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False

_INT32_MAX = np.int32(2**31 - 1)


# ---------------------------------------------------------------------------
# Binary dilation (rectangular structuring element)
# ---------------------------------------------------------------------------

def _dilate_once_numba_impl(src, left, right, top, bottom):
    h, w = src.shape
    out = np.zeros((h, w), np.uint8)
    for y in range(h):
        y0 = y - top
        if y0 < 0:
            y0 = 0
        y1 = y + bottom
        if y1 > h - 1:
            y1 = h - 1
        for x in range(w):
            x0 = x - left
            if x0 < 0:
                x0 = 0
            x1 = x + right
            if x1 > w - 1:
                x1 = w - 1
            hit = False
            for yy in range(y0, y1 + 1):
                for xx in range(x0, x1 + 1):
                    if src[yy, xx] != 0:
                        hit = True
                        break
                if hit:
                    break
            if hit:
                out[y, x] = 255
    return out


def _dilate_once_numpy(src, left, right, top, bottom):
    h, w = src.shape
    out = np.zeros_like(src)
    for dy in range(-top, bottom + 1):
        ys0, ys1 = max(0, -dy), min(h, h - dy)
        if ys0 >= ys1:
            continue
        for dx in range(-left, right + 1):
            xs0, xs1 = max(0, -dx), min(w, w - dx)
            if xs0 >= xs1:
                continue
            np.maximum(
                out[ys0:ys1, xs0:xs1],
                src[ys0 + dy:ys1 + dy, xs0 + dx:xs1 + dx],
                out=out[ys0:ys1, xs0:xs1],
            )
    return out


# ---------------------------------------------------------------------------
# Connected-component labeling (8-connectivity) -> bounding boxes
# ---------------------------------------------------------------------------

def _find_impl(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


def _label_boxes_numba_impl(src):
    h, w = src.shape
    labels = np.zeros((h, w), np.int32)
    # New provisional labels appear only at pixels with no scanned fg
    # neighbor; at most one per 2x2 block, so h*w//2 + 2 always suffices.
    parent = np.zeros(h * w // 2 + 2, np.int32)
    nlab = 0
    for y in range(h):
        for x in range(w):
            if src[y, x] == 0:
                continue
            l1 = labels[y, x - 1] if x > 0 else 0
            l2 = labels[y - 1, x - 1] if (x > 0 and y > 0) else 0
            l3 = labels[y - 1, x] if y > 0 else 0
            l4 = labels[y - 1, x + 1] if (y > 0 and x + 1 < w) else 0
            if l1 == 0 and l2 == 0 and l3 == 0 and l4 == 0:
                nlab += 1
                parent[nlab] = nlab
                labels[y, x] = nlab
            else:
                r = _INT32_MAX
                for l in (l1, l2, l3, l4):
                    if l != 0:
                        rr = _find(parent, l)
                        if rr < r:
                            r = rr
                labels[y, x] = r
                for l in (l1, l2, l3, l4):
                    if l != 0:
                        rr = _find(parent, l)
                        if rr != r:
                            parent[rr] = r
    minx = np.full(nlab + 1, w, np.int32)
    miny = np.full(nlab + 1, h, np.int32)
    maxx = np.full(nlab + 1, -1, np.int32)
    maxy = np.full(nlab + 1, -1, np.int32)
    for y in range(h):
        for x in range(w):
            l = labels[y, x]
            if l == 0:
                continue
            r = _find(parent, l)
            if x < minx[r]:
                minx[r] = x
            if x > maxx[r]:
                maxx[r] = x
            if y < miny[r]:
                miny[r] = y
            if y > maxy[r]:
                maxy[r] = y
    n = 0
    for l in range(1, nlab + 1):
        if maxx[l] >= 0:
            n += 1
    out = np.empty((n, 4), np.int32)
    idx = 0
    for l in range(1, nlab + 1):
        if maxx[l] >= 0:
            out[idx, 0] = minx[l]
            out[idx, 1] = miny[l]
            out[idx, 2] = maxx[l] - minx[l] + 1
            out[idx, 3] = maxy[l] - miny[l] + 1
            idx += 1
    return out


def _label_boxes_numpy(src):
    # Jacobi min-label propagation: every foreground pixel starts with its
    # flat index, repeatedly takes the min over its 8-neighborhood until the
    # labeling stabilizes at the per-component minimum.
    h, w = src.shape
    fg = src != 0
    if not fg.any():
        return np.empty((0, 4), np.int32)
    big = np.iinfo(np.int64).max
    lab = np.where(fg, np.arange(h * w, dtype=np.int64).reshape(h, w), big)
    while True:
        nxt = lab.copy()
        padded = np.pad(lab, 1, constant_values=big)
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dy == 0 and dx == 0:
                    continue
                np.minimum(nxt, padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w], out=nxt)
        nxt[~fg] = big
        if np.array_equal(nxt, lab):
            break
        lab = nxt
    ys, xs = np.nonzero(fg)
    ids = lab[ys, xs]
    uniq, inv = np.unique(ids, return_inverse=True)
    k = uniq.size
    minx = np.full(k, w, np.int64)
    maxx = np.full(k, -1, np.int64)
    miny = np.full(k, h, np.int64)
    maxy = np.full(k, -1, np.int64)
    np.minimum.at(minx, inv, xs)
    np.maximum.at(maxx, inv, xs)
    np.minimum.at(miny, inv, ys)
    np.maximum.at(maxy, inv, ys)
    return np.stack([minx, miny, maxx - minx + 1, maxy - miny + 1], axis=1).astype(np.int32)


# ---------------------------------------------------------------------------
# Edit-distance alignment counts
# ---------------------------------------------------------------------------
#
# Counts the insertions/substitutions/deletions that transform the hypothesis
# sequence into the reference sequence under a minimum-cost alignment. Among
# cost-equal alignments the backtrace prefers substitution, then insertion,
# then deletion; both implementations apply that rule per cell, so they pick
# the identical alignment.

def _levenshtein_counts_numba_impl(a, b):
    m = a.size
    n = b.size
    prev_d = np.empty(n + 1, np.int64)
    prev_i = np.empty(n + 1, np.int64)
    prev_s = np.empty(n + 1, np.int64)
    prev_x = np.empty(n + 1, np.int64)
    cur_d = np.empty(n + 1, np.int64)
    cur_i = np.empty(n + 1, np.int64)
    cur_s = np.empty(n + 1, np.int64)
    cur_x = np.empty(n + 1, np.int64)
    for j in range(n + 1):
        prev_d[j] = j
        prev_i[j] = 0
        prev_s[j] = 0
        prev_x[j] = j
    for i in range(1, m + 1):
        cur_d[0] = i
        cur_i[0] = i
        cur_s[0] = 0
        cur_x[0] = 0
        ai = a[i - 1]
        for j in range(1, n + 1):
            cost = 0 if ai == b[j - 1] else 1
            dd = prev_d[j - 1] + cost
            di = prev_d[j] + 1
            dx = cur_d[j - 1] + 1
            best = dd
            if di < best:
                best = di
            if dx < best:
                best = dx
            if dd == best:
                cur_d[j] = dd
                cur_i[j] = prev_i[j - 1]
                cur_s[j] = prev_s[j - 1] + cost
                cur_x[j] = prev_x[j - 1]
            elif di == best:
                cur_d[j] = di
                cur_i[j] = prev_i[j] + 1
                cur_s[j] = prev_s[j]
                cur_x[j] = prev_x[j]
            else:
                cur_d[j] = dx
                cur_i[j] = cur_i[j - 1]
                cur_s[j] = cur_s[j - 1]
                cur_x[j] = cur_x[j - 1] + 1
        prev_d, cur_d = cur_d, prev_d
        prev_i, cur_i = cur_i, prev_i
        prev_s, cur_s = cur_s, prev_s
        prev_x, cur_x = cur_x, prev_x
    return prev_i[n], prev_s[n], prev_x[n]


def _levenshtein_counts_numpy(a, b):
    # Anti-diagonal sweep: every cell on diagonal k = i + j depends only on
    # diagonals k-1 and k-2, so whole diagonals vectorize. State per cell is
    # (distance, insertions, substitutions, deletions).
    m, n = a.size, b.size
    if m == 0:
        return 0, 0, n
    if n == 0:
        return m, 0, 0
    a = a.astype(np.int64)
    b = b.astype(np.int64)
    zero = np.zeros(1, np.int64)
    prev2 = None
    prev1 = (zero.copy(), zero.copy(), zero.copy(), zero.copy())  # k = 0: cell (0, 0)
    lo1 = 0
    for k in range(1, m + n + 1):
        lo = max(0, k - n)
        hi = min(m, k)
        size = hi - lo + 1
        d = np.empty(size, np.int64)
        ci = np.empty(size, np.int64)
        cs = np.empty(size, np.int64)
        cx = np.empty(size, np.int64)
        ilo, ihi = max(lo, 1), min(hi, k - 1)
        if ilo <= ihi:
            ii = np.arange(ilo, ihi + 1)
            jj = k - ii
            lo2 = max(0, k - 2 - n)
            pd2, pi2, ps2, px2 = prev2
            pd1, pi1, ps1, px1 = prev1
            cost = (a[ii - 1] != b[jj - 1]).astype(np.int64)
            g_dd = ii - 1 - lo2
            g_di = ii - 1 - lo1
            g_dx = ii - lo1
            dd = pd2[g_dd] + cost
            di = pd1[g_di] + 1
            dx = pd1[g_dx] + 1
            best = np.minimum(dd, np.minimum(di, dx))
            take_dd = dd == best
            take_di = ~take_dd & (di == best)
            sl = slice(ilo - lo, ihi - lo + 1)
            d[sl] = best
            ci[sl] = np.where(take_dd, pi2[g_dd], np.where(take_di, pi1[g_di] + 1, pi1[g_dx]))
            cs[sl] = np.where(take_dd, ps2[g_dd] + cost, np.where(take_di, ps1[g_di], ps1[g_dx]))
            cx[sl] = np.where(take_dd, px2[g_dd], np.where(take_di, px1[g_di], px1[g_dx] + 1))
        if lo == 0:  # cell (0, k): delete k hypothesis items
            d[0] = k
            ci[0] = 0
            cs[0] = 0
            cx[0] = k
        if hi == k:  # cell (k, 0): insert k reference items
            d[size - 1] = k
            ci[size - 1] = k
            cs[size - 1] = 0
            cx[size - 1] = 0
        prev2 = prev1
        prev1 = (d, ci, cs, cx)
        lo1 = lo
    _, ci, cs, cx = prev1
    return int(ci[0]), int(cs[0]), int(cx[0])


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:
    _find = njit(cache=True)(_find_impl)
    _dilate_once_numba = njit(cache=True)(_dilate_once_numba_impl)
    _label_boxes_numba = njit(cache=True)(_label_boxes_numba_impl)
    _levenshtein_counts_numba = njit(cache=True)(_levenshtein_counts_numba_impl)
else:
    _find = _find_impl
    _dilate_once_numba = None
    _label_boxes_numba = None
    _levenshtein_counts_numba = None

VARIANTS = {
    "dilate_once": {"numba": _dilate_once_numba, "numpy": _dilate_once_numpy},
    "label_boxes": {"numba": _label_boxes_numba, "numpy": _label_boxes_numpy},
    "levenshtein_counts": {
        "numba": _levenshtein_counts_numba,
        "numpy": _levenshtein_counts_numpy,
    },
}


def _active(name):
    impl = VARIANTS[name]["numba"] if NUMBA_ENABLED else None
    return impl if impl is not None else VARIANTS[name]["numpy"]


def dilate_once(src: np.ndarray, left: int, right: int, top: int, bottom: int) -> np.ndarray:
    """One dilation pass of a {0,255} uint8 image by a rectangular window.

    Output pixel (x, y) is foreground iff any source foreground pixel lies in
    the window [x-left, x+right] x [y-top, y+bottom]; pixels outside the image
    count as background.
    """
    src = np.ascontiguousarray(src, dtype=np.uint8)
    return _active("dilate_once")(src, left, right, top, bottom)


def label_boxes(src: np.ndarray) -> np.ndarray:
    """Tight bounding boxes of the 8-connected foreground components.

    Returns an (n, 4) int32 array of (x, y, w, h) rows in no particular order.
    """
    src = np.ascontiguousarray(src, dtype=np.uint8)
    return _active("label_boxes")(src)


def levenshtein_counts(ref_codes: np.ndarray, hyp_codes: np.ndarray) -> tuple[int, int, int]:
    """(insertions, substitutions, deletions) turning hypothesis into reference.

    Minimum-cost unit alignment; cost ties resolved substitution > insertion >
    deletion at every cell, making the counts deterministic.
    """
    a = np.ascontiguousarray(ref_codes, dtype=np.int64)
    b = np.ascontiguousarray(hyp_codes, dtype=np.int64)
    ins, sub, dele = _active("levenshtein_counts")(a, b)
    return int(ins), int(sub), int(dele)
