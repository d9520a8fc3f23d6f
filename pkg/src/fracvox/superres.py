"""Half-voxel super-resolution of a reference frame.

Fractional voxels are created only at midpoints of neighboring occupied
voxels (distance <= rho), so new samples stay on the implied surface.
All coordinates live on the doubled grid: integer voxel ``c`` sits at
``2c`` and the midpoint of ``a`` and ``b`` sits at ``a + b``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .cloud import YUV, Frame, lex_order
from .errors import StateError

DEFAULT_RHO = math.sqrt(3.0)
# sqrt(3)**2 rounds below 3.0
_RHO_EPS = 1e-9


def _keys(coords: np.ndarray, span: int) -> np.ndarray:
    return (coords[:, 0] * span + coords[:, 1]) * span + coords[:, 2]


def neighbor_offsets(rho: float) -> np.ndarray:
    """Lexicographically positive integer offsets with norm <= rho."""
    r = int(math.ceil(rho))
    lim = rho * rho + _RHO_EPS
    offs = [o for o in itertools.product(range(-r, r + 1), repeat=3)
            if o > (0, 0, 0) and o[0] ** 2 + o[1] ** 2 + o[2] ** 2 <= lim]
    return np.array(offs, dtype=np.int64).reshape(-1, 3)


def pairs_within(coords: np.ndarray, rho: float = DEFAULT_RHO) -> np.ndarray:
    """Index pairs ``(j, k)``, ``j < k``, of distinct points within distance ``rho``.

    Uses a hash of the integer grid probed at every offset within ``rho``.
    Returned as a ``(P, 2)`` array sorted lexicographically.
    """
    coords = np.asarray(coords, dtype=np.int64).reshape(-1, 3)
    n = len(coords)
    if n < 2:
        return np.zeros((0, 2), dtype=np.int64)
    r = int(math.ceil(rho))
    base = coords.min(axis=0) - r
    local = coords - base
    span = int(local.max()) + r + 1
    keys = _keys(local, span)
    order = np.argsort(keys, kind="stable")
    skeys = keys[order]
    out = []
    for off in neighbor_offsets(rho):
        ck = _keys(local + off, span)
        pos = np.minimum(np.searchsorted(skeys, ck), n - 1)
        hit = skeys[pos] == ck
        out.append(np.stack([np.flatnonzero(hit), order[pos[hit]]], axis=1))
    pairs = np.concatenate(out)
    pairs = np.sort(pairs, axis=1)
    return pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]


def neighbor_pairs(frame: Frame, rho: float = DEFAULT_RHO) -> np.ndarray:
    """All voxel index pairs of ``frame`` within Euclidean distance ``rho`` (inclusive)."""
    return pairs_within(frame.coords, rho)


class CellIndex:
    """Bucket points by a cubic cell so axis-aligned box queries stay local."""

    def __init__(self, coords: np.ndarray, cell: int):
        self.coords = coords
        self.cell = cell
        cells = np.floor_divide(coords, cell)
        if len(coords):
            order = np.lexsort((np.arange(len(coords)), cells[:, 2], cells[:, 1], cells[:, 0]))
            sc = cells[order]
            cuts = np.flatnonzero(np.any(np.diff(sc, axis=0), axis=1)) + 1
            starts = np.concatenate(([0], cuts))
            ends = np.concatenate((cuts, [len(order)]))
            self._buckets = {tuple(sc[s].tolist()): order[s:e] for s, e in zip(starts, ends)}
        else:
            self._buckets = {}

    def query(self, lo, hi) -> np.ndarray:
        """Sorted indices of points with ``lo <= coord < hi`` on every axis."""
        lo = np.asarray(lo, dtype=np.int64)
        hi = np.asarray(hi, dtype=np.int64)
        if np.any(hi <= lo):
            return np.zeros(0, dtype=np.int64)
        c0 = np.floor_divide(lo, self.cell)
        c1 = np.floor_divide(hi - 1, self.cell)
        parts = []
        for key in itertools.product(*(range(int(a), int(b) + 1) for a, b in zip(c0, c1))):
            b = self._buckets.get(key)
            if b is not None:
                parts.append(b)
        if not parts:
            return np.zeros(0, dtype=np.int64)
        idx = np.sort(np.concatenate(parts))
        c = self.coords[idx]
        keep = np.all((c >= lo) & (c < hi), axis=1)
        return idx[keep]


@dataclass(frozen=True, eq=False)
class SuperCloud:
    """Reference cloud on the doubled grid.

    ``fractional[i]`` is False for voxels copied from the integer frame
    (all-even ``coords2x``) and True for interpolated midpoints.
    """

    coords2x: np.ndarray
    attrs: np.ndarray
    fractional: np.ndarray
    source_depth: int
    _index_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.coords2x)

    @property
    def n_fractional(self) -> int:
        return int(np.count_nonzero(self.fractional))

    @classmethod
    def from_frame(cls, frame: Frame) -> "SuperCloud":
        """Integer-only cloud: the frame itself expressed on the doubled grid."""
        return cls(2 * frame.coords, frame.attrs, np.zeros(len(frame), dtype=bool), frame.depth)

    def index(self, cell: int = 32) -> CellIndex:
        idx = self._index_cache.get(cell)
        if idx is None:
            idx = self._index_cache[cell] = CellIndex(self.coords2x, cell)
        return idx

    def window(self, lo, hi, cell: int = 32) -> np.ndarray:
        """Indices (ascending, hence lexicographic) of voxels inside ``[lo, hi)``."""
        return self.index(cell).query(lo, hi)

    def integer_part(self) -> Frame:
        keep = ~self.fractional
        return Frame(self.coords2x[keep] // 2, self.attrs[keep], self.source_depth, YUV)


def superresolve(frame: Frame, rho: float = DEFAULT_RHO) -> SuperCloud:
    """Add a fractional voxel at the midpoint of every neighbor pair.

    Each midpoint takes the average of its two endpoints; a midpoint
    shared by several pairs stores the mean of those pair averages.
    """
    if frame.color_space != YUV:
        raise StateError("superresolve expects a YUV frame")
    int2x = 2 * frame.coords
    pairs = neighbor_pairs(frame, rho)
    if len(pairs) == 0:
        return SuperCloud(int2x, frame.attrs, np.zeros(len(frame), dtype=bool), frame.depth)
    j, k = pairs[:, 0], pairs[:, 1]
    mid = frame.coords[j] + frame.coords[k]
    pair_avg = (frame.attrs[j] + frame.attrs[k]) / 2
    span = 1 << (frame.depth + 1)
    uniq_keys, inverse = np.unique(_keys(mid, span), return_inverse=True)
    inverse = inverse.ravel()
    sums = np.zeros((len(uniq_keys), 3))
    np.add.at(sums, inverse, pair_avg)  # accumulates in pair order
    counts = np.bincount(inverse, minlength=len(uniq_keys))
    first = np.zeros(len(uniq_keys), dtype=np.int64)
    first[inverse[::-1]] = np.arange(len(inverse))[::-1]
    frac2x = mid[first]
    frac_attr = sums / counts[:, None]

    coords = np.concatenate([int2x, frac2x])
    attrs = np.concatenate([frame.attrs, frac_attr])
    kind = np.concatenate([np.zeros(len(int2x), bool), np.ones(len(frac2x), bool)])
    order = lex_order(coords)
    coords, attrs, kind = coords[order], attrs[order], kind[order]
    for a in (coords, attrs, kind):
        a.setflags(write=False)
    return SuperCloud(coords, attrs, kind, frame.depth)
