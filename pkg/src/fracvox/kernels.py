"""Hot inner loops with a numba path and a pure numpy/Python fallback.

The active path is chosen by :data:`fracvox._accel.USE_NUMBA`; both
implementations are importable for testing and benchmarking and must give
identical results. Float reductions are sequential on both paths so that
tie-breaks agree bit for bit.
"""
from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit

_BIG = np.iinfo(np.int64).max
HYBRID_COLOR_WEIGHT = 0.35


# --------------------------------------------------------------------------
# nearest neighbor restricted to a translated box
# --------------------------------------------------------------------------

@njit
def _nearest_in_box_nb(query, ref, lo, hi, offsets):
    n_cand = offsets.shape[0]
    n = query.shape[0]
    m = ref.shape[0]
    idx = np.full((n_cand, n), -1, np.int64)
    dist2 = np.full((n_cand, n), -1, np.int64)
    sel = np.empty(m, np.int64)
    sx = np.empty(m, np.int64)
    sy = np.empty(m, np.int64)
    sz = np.empty(m, np.int64)
    for c in range(n_cand):
        ox, oy, oz = offsets[c, 0], offsets[c, 1], offsets[c, 2]
        lx, ly, lz = lo[0] - ox, lo[1] - oy, lo[2] - oz
        hx, hy, hz = hi[0] - ox, hi[1] - oy, hi[2] - oz
        cnt = 0
        for j in range(m):
            x, y, z = ref[j, 0], ref[j, 1], ref[j, 2]
            if lx <= x < hx and ly <= y < hy and lz <= z < hz:
                sel[cnt] = j
                sx[cnt] = x
                sy[cnt] = y
                sz[cnt] = z
                cnt += 1
        if cnt == 0:
            continue
        for i in range(n):
            qx = query[i, 0] - ox
            qy = query[i, 1] - oy
            qz = query[i, 2] - oz
            best = _BIG
            bj = -1
            for t in range(cnt):
                dx = qx - sx[t]
                dy = qy - sy[t]
                dz = qz - sz[t]
                dd = dx * dx + dy * dy + dz * dz
                if dd < best:
                    best = dd
                    bj = sel[t]
                    if dd == 0:
                        break
            idx[c, i] = bj
            dist2[c, i] = best
    return idx, dist2


def _nearest_in_box_np(query, ref, lo, hi, offsets, chunk=1 << 22):
    query = np.asarray(query, dtype=np.int64)
    ref = np.asarray(ref, dtype=np.int64)
    n_cand, n = len(offsets), len(query)
    idx = np.full((n_cand, n), -1, np.int64)
    dist2 = np.full((n_cand, n), -1, np.int64)
    for c, off in enumerate(np.asarray(offsets, dtype=np.int64)):
        inside = np.all((ref >= lo - off) & (ref < hi - off), axis=1)
        sel = np.flatnonzero(inside)
        if len(sel) == 0 or n == 0:
            continue
        pts = ref[sel]
        q = query - off
        step = max(1, chunk // len(sel))
        for s in range(0, n, step):
            d = ((q[s:s + step, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
            a = np.argmin(d, axis=1)
            idx[c, s:s + step] = sel[a]
            dist2[c, s:s + step] = d[np.arange(len(a)), a]
    return idx, dist2


def nearest_in_box(query, ref, lo, hi, offsets):
    """Nearest reference point per query under a set of candidate shifts.

    For candidate ``c`` with shift ``off``, reference points inside
    ``[lo - off, hi - off)`` are eligible and each query ``q`` is matched to
    the eligible point nearest ``q - off``. Ties go to the lowest reference
    index. Returns ``(idx, d2)`` of shape ``(C, n)``; rows of candidates with
    an empty box hold -1.
    """
    args = (
        np.ascontiguousarray(query, dtype=np.int64).reshape(-1, 3),
        np.ascontiguousarray(ref, dtype=np.int64).reshape(-1, 3),
        np.ascontiguousarray(lo, dtype=np.int64),
        np.ascontiguousarray(hi, dtype=np.int64),
        np.ascontiguousarray(offsets, dtype=np.int64).reshape(-1, 3),
    )
    if USE_NUMBA:
        return _nearest_in_box_nb(*args)
    return _nearest_in_box_np(*args)


# --------------------------------------------------------------------------
# integer motion search with the hybrid geometry + luma metric
# --------------------------------------------------------------------------

@njit
def _hybrid_search_nb(query, qy, ref, ry, lo, hi, offsets, scale, wc):
    n_cand = offsets.shape[0]
    n = query.shape[0]
    m = ref.shape[0]
    sx = np.empty(m, np.int64)
    sy = np.empty(m, np.int64)
    sz = np.empty(m, np.int64)
    sl = np.empty(m, np.float64)
    best = np.inf
    best_c = -1
    best_g = np.inf
    best_col = np.inf
    for c in range(n_cand):
        ox, oy, oz = offsets[c, 0], offsets[c, 1], offsets[c, 2]
        lx, ly, lz = lo[0] - ox, lo[1] - oy, lo[2] - oz
        hx, hy, hz = hi[0] - ox, hi[1] - oy, hi[2] - oz
        cnt = 0
        for j in range(m):
            x, y, z = ref[j, 0], ref[j, 1], ref[j, 2]
            if lx <= x < hx and ly <= y < hy and lz <= z < hz:
                sx[cnt] = x
                sy[cnt] = y
                sz[cnt] = z
                sl[cnt] = ry[j]
                cnt += 1
        if cnt == 0 or n == 0:
            continue
        sg = 0.0
        sc = 0.0
        aborted = False
        for i in range(n):
            qx = query[i, 0] - ox
            qyy = query[i, 1] - oy
            qz = query[i, 2] - oz
            bd = _BIG
            bt = -1
            for t in range(cnt):
                dx = qx - sx[t]
                dy = qyy - sy[t]
                dz = qz - sz[t]
                dd = dx * dx + dy * dy + dz * dz
                if dd < bd:
                    bd = dd
                    bt = t
                    if dd == 0:
                        break
            sg += np.sqrt(np.float64(bd)) / scale
            sc += abs(qy[i] - sl[bt])
            # sums only grow, so a partial score above the incumbent is final
            if sg / n + wc * (sc / n) > best:
                aborted = True
                break
        if aborted:
            continue
        g = sg / n
        col = sc / n
        h = g + wc * col
        if h < best:
            best = h
            best_c = c
            best_g = g
            best_col = col
    return best_c, best_g, best_col


def _hybrid_search_np(query, qy, ref, ry, lo, hi, offsets, scale, wc):
    idx, d2 = _nearest_in_box_np(query, ref, lo, hi, offsets)
    n = len(query)
    best, best_c, best_g, best_col = np.inf, -1, np.inf, np.inf
    if n == 0:
        return best_c, best_g, best_col
    for c in range(len(offsets)):
        if idx[c, 0] < 0:
            continue
        g = np.cumsum(np.sqrt(d2[c].astype(np.float64)) / scale)[-1] / n
        col = np.cumsum(np.abs(qy - ry[idx[c]]))[-1] / n
        h = g + wc * col
        if h < best:
            best, best_c, best_g, best_col = h, c, g, col
    return best_c, float(best_g), float(best_col)


def hybrid_search(query, qy, ref, ry, lo, hi, offsets, scale=2.0, wc=HYBRID_COLOR_WEIGHT):
    """Candidate minimizing mean NN distance + ``wc`` * mean |luma diff|.

    Candidates are scanned in the given order and only a strictly smaller
    score replaces the incumbent, so the caller's order is the tie-break.
    Returns ``(c, delta_g, delta_c)``; ``c == -1`` if every box is empty.
    """
    args = (
        np.ascontiguousarray(query, dtype=np.int64).reshape(-1, 3),
        np.ascontiguousarray(qy, dtype=np.float64),
        np.ascontiguousarray(ref, dtype=np.int64).reshape(-1, 3),
        np.ascontiguousarray(ry, dtype=np.float64),
        np.ascontiguousarray(lo, dtype=np.int64),
        np.ascontiguousarray(hi, dtype=np.int64),
        np.ascontiguousarray(offsets, dtype=np.int64).reshape(-1, 3),
        float(scale),
        float(wc),
    )
    fn = _hybrid_search_nb if USE_NUMBA else _hybrid_search_np
    c, g, col = fn(*args)
    return int(c), float(g), float(col)


# --------------------------------------------------------------------------
# adaptive run-length Golomb-Rice
# --------------------------------------------------------------------------
# Shared source: compiled by numba, or run as plain Python on lists.

RLGR_ESCAPE_Q = 12
RLGR_ESCAPE_BITS = 32


def _gr_put(out, pos, v, k):
    q = v >> k
    if q < 12:
        for _ in range(q):
            out[pos] = 1
            pos += 1
        out[pos] = 0
        pos += 1
        for b in range(k - 1, -1, -1):
            out[pos] = (v >> b) & 1
            pos += 1
    else:
        for _ in range(12):
            out[pos] = 1
            pos += 1
        for b in range(31, -1, -1):
            out[pos] = (v >> b) & 1
            pos += 1
    return pos


def _adapt_kr(kr_p, q):
    if q == 0:
        kr_p -= 6
        if kr_p < 0:
            kr_p = 0
    elif q > 1:
        kr_p += 4 * (q - 1)
        if kr_p > 384:
            kr_p = 384
    return kr_p


def _rlgr_encode_impl(u, out):
    n = len(u)
    pos = 0
    kr_p = 32
    ku_p = 0
    i = 0
    while i < n:
        kr = kr_p >> 4
        if kr > 24:
            kr = 24
        ku = ku_p >> 4
        if ku > 16:
            ku = 16
        if ku == 0:
            v = u[i]
            pos = _gr_put(out, pos, v, kr)
            kr_p = _adapt_kr(kr_p, v >> kr)
            if v == 0:
                ku_p += 4
            i += 1
        else:
            m = 1 << ku
            r = 0
            while r < m and i + r < n and u[i + r] == 0:
                r += 1
            if r == m or i + r == n:
                out[pos] = 0
                pos += 1
                ku_p += 4
                i += r
            else:
                out[pos] = 1
                pos += 1
                for b in range(ku - 1, -1, -1):
                    out[pos] = (r >> b) & 1
                    pos += 1
                v = u[i + r] - 1
                pos = _gr_put(out, pos, v, kr)
                kr_p = _adapt_kr(kr_p, v >> kr)
                ku_p -= 6
                if ku_p < 0:
                    ku_p = 0
                i += r + 1
    return pos


def _gr_get(bits, nbits, pos, k):
    """Returns (value, new_pos); new_pos == -1 on underflow."""
    q = 0
    while True:
        if pos >= nbits:
            return 0, -1
        b = bits[pos]
        pos += 1
        if b == 0:
            break
        q += 1
        if q == 12:
            break
    if q == 12:
        if pos + 32 > nbits:
            return 0, -1
        v = 0
        for _ in range(32):
            v = (v << 1) | bits[pos]
            pos += 1
        return v, pos
    if pos + k > nbits:
        return 0, -1
    v = q
    for _ in range(k):
        v = (v << 1) | bits[pos]
        pos += 1
    return v, pos


def _rlgr_decode_impl(bits, nbits, count, out):
    """Fills ``out[:count]``; returns bits consumed or -1 on malformed input."""
    pos = 0
    kr_p = 32
    ku_p = 0
    i = 0
    while i < count:
        kr = kr_p >> 4
        if kr > 24:
            kr = 24
        ku = ku_p >> 4
        if ku > 16:
            ku = 16
        if ku == 0:
            v, pos = _gr_get(bits, nbits, pos, kr)
            if pos < 0:
                return -1
            out[i] = v
            kr_p = _adapt_kr(kr_p, v >> kr)
            if v == 0:
                ku_p += 4
            i += 1
        else:
            if pos >= nbits:
                return -1
            b = bits[pos]
            pos += 1
            if b == 0:
                m = 1 << ku
                if m > count - i:
                    m = count - i
                for _ in range(m):
                    out[i] = 0
                    i += 1
                ku_p += 4
            else:
                if pos + ku > nbits:
                    return -1
                r = 0
                for _ in range(ku):
                    r = (r << 1) | bits[pos]
                    pos += 1
                if i + r >= count:
                    return -1
                for _ in range(r):
                    out[i] = 0
                    i += 1
                v, pos = _gr_get(bits, nbits, pos, kr)
                if pos < 0:
                    return -1
                out[i] = v + 1
                i += 1
                kr_p = _adapt_kr(kr_p, v >> kr)
                ku_p -= 6
                if ku_p < 0:
                    ku_p = 0
    return pos


_gr_put_nb = njit(_gr_put)
_adapt_kr_nb = njit(_adapt_kr)
_gr_get_nb = njit(_gr_get)


def _bind(impl, **helpers):
    """Recompile ``impl`` against jitted helpers (numba resolves globals at compile time)."""
    g = dict(impl.__globals__)
    g.update(helpers)
    fn = type(impl)(impl.__code__, g, impl.__name__)
    return njit(fn)


_rlgr_encode_nb = _bind(_rlgr_encode_impl, _gr_put=_gr_put_nb, _adapt_kr=_adapt_kr_nb)
_rlgr_decode_nb = _bind(_rlgr_decode_impl, _gr_get=_gr_get_nb, _adapt_kr=_adapt_kr_nb)


def _max_bits(n: int) -> int:
    return 61 * n + 64


def rlgr_encode_u(u: np.ndarray, use_numba: bool | None = None) -> np.ndarray:
    """Encode non-negative (zigzagged) symbols < 2**32 into a 0/1 uint8 array."""
    use_numba = USE_NUMBA if use_numba is None else use_numba
    u = np.ascontiguousarray(u, dtype=np.int64)
    if use_numba:
        out = np.zeros(_max_bits(len(u)), dtype=np.uint8)
        nbits = _rlgr_encode_nb(u, out)
        return out[:nbits]
    out = bytearray(_max_bits(len(u)))
    nbits = _rlgr_encode_impl(u.tolist(), out)
    return np.frombuffer(bytes(out[:nbits]), dtype=np.uint8)


def rlgr_decode_u(bits: np.ndarray, count: int, use_numba: bool | None = None) -> tuple[np.ndarray, int]:
    """Decode ``count`` symbols; returns ``(symbols, bits_consumed)`` (-1 = malformed)."""
    use_numba = USE_NUMBA if use_numba is None else use_numba
    bits = np.ascontiguousarray(bits, dtype=np.uint8)
    if use_numba:
        out = np.zeros(count, dtype=np.int64)
        used = _rlgr_decode_nb(bits, len(bits), count, out)
        return out, int(used)
    out = [0] * count
    used = _rlgr_decode_impl(bits.tobytes(), len(bits), count, out)
    return np.array(out, dtype=np.int64), used
