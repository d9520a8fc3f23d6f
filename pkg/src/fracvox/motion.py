"""Block motion estimation and nearest-neighbor motion compensation.

A motion vector ``MV = d + f`` (integer part ``d``, half-voxel part ``f``)
translates the reference block onto the target block: reference content
at ``p - MV`` predicts target voxel ``p``. All geometry is evaluated on
the doubled grid so half-voxel shifts stay integral.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .cloud import Block, Frame
from .errors import DomainError
from .kernels import HYBRID_COLOR_WEIGHT, hybrid_search, nearest_in_box
from .superres import SuperCloud

MV_LIMIT = 15
NEUTRAL = np.array([128.0, 128.0, 128.0])
EPRED_CHANNELS = {"YUV": np.array([1.0, 1.0, 1.0]), "Y": np.array([1.0, 0.0, 0.0])}


@dataclass(frozen=True)
class IntegerMV:
    d: tuple[int, int, int] = (0, 0, 0)

    def __post_init__(self):
        d = tuple(int(v) for v in self.d)
        if len(d) != 3 or any(abs(v) > MV_LIMIT for v in d):
            raise DomainError(f"integer MV {self.d} outside [-{MV_LIMIT}, {MV_LIMIT}]^3")
        object.__setattr__(self, "d", d)

    def __add__(self, other: "IntegerMV") -> "IntegerMV":
        return IntegerMV(tuple(a + b for a, b in zip(self.d, other.d)))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.d, dtype=np.int64)


@dataclass(frozen=True)
class FractionalMV:
    """Half-voxel displacement, each component in {-1/2, 0, +1/2}."""

    f: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        f = tuple(float(v) for v in self.f)
        if len(f) != 3 or any(v not in (-0.5, 0.0, 0.5) for v in f):
            raise DomainError(f"fractional MV {self.f} must have components in {{-1/2, 0, 1/2}}")
        object.__setattr__(self, "f", f)

    @property
    def halves(self) -> tuple[int, int, int]:
        return tuple(int(2 * v) for v in self.f)

    @property
    def index(self) -> int:
        hx, hy, hz = self.halves
        return 9 * (hx + 1) + 3 * (hy + 1) + (hz + 1)

    @classmethod
    def from_index(cls, index: int) -> "FractionalMV":
        if not 0 <= index < 27:
            raise DomainError(f"fractional MV index {index} outside [0, 26]")
        return cls.from_halves((index // 9 - 1, index // 3 % 3 - 1, index % 3 - 1))

    @classmethod
    def from_halves(cls, h) -> "FractionalMV":
        return cls(tuple(v / 2 for v in h))


ZERO_F = FractionalMV()
ALL_FRACTIONAL = sorted((FractionalMV.from_index(i) for i in range(27)),
                        key=lambda m: (sum(h * h for h in m.halves), m.index))


@dataclass(frozen=True)
class BlockMatchScore:
    delta_g: float
    delta_c: float

    @property
    def hybrid(self) -> float:
        return self.delta_g + HYBRID_COLOR_WEIGHT * self.delta_c


EMPTY_SCORE = BlockMatchScore(math.inf, math.inf)


@dataclass
class BlockPrediction:
    attrs: np.ndarray
    sse: np.ndarray
    empty: bool
    source: np.ndarray | None = None  # super-cloud index per target voxel


def _ordered_offsets(radius: int) -> list[tuple[int, int, int]]:
    """Integer offsets in [-r, r]^3, smallest norm first, then lexicographic."""
    return sorted(itertools.product(range(-radius, radius + 1), repeat=3),
                  key=lambda d: (d[0] ** 2 + d[1] ** 2 + d[2] ** 2, d))


def as_integer_cloud(ref) -> SuperCloud:
    return ref if isinstance(ref, SuperCloud) else SuperCloud.from_frame(ref)


def block_sse(target_attrs: np.ndarray, pred: np.ndarray) -> np.ndarray:
    diff = target_attrs - pred
    return (diff * diff).sum(axis=0)


def weighted_error(sse: np.ndarray, channels: str = "YUV") -> float:
    return float(np.dot(EPRED_CHANNELS[channels], sse))


def _block_geometry(block: Block, frame: Frame):
    coords = frame.coords[block.voxel_indices]
    lo = 2 * np.array(block.origin, dtype=np.int64)
    hi = lo + 2 * block.size
    return 2 * coords, lo, hi


def _predict_many(block: Block, frame: Frame, cloud: SuperCloud, shifts2x: np.ndarray):
    """Nearest-neighbor sources for each doubled-grid shift (None = empty window)."""
    query, lo, hi = _block_geometry(block, frame)
    region = cloud.window(lo - shifts2x.max(axis=0), hi - shifts2x.min(axis=0), cell=2 * block.size)
    if len(region) == 0:
        return [None] * len(shifts2x)
    idx, _ = nearest_in_box(query, cloud.coords2x[region], lo, hi, shifts2x)
    out = []
    for row in idx:
        out.append(None if row[0] < 0 else region[row])
    return out


def _prediction(block: Block, frame: Frame, cloud: SuperCloud, source) -> BlockPrediction:
    target = frame.attrs[block.voxel_indices]
    if source is None:
        pred = np.broadcast_to(NEUTRAL, target.shape).copy()
        return BlockPrediction(pred, block_sse(target, pred), True, None)
    pred = cloud.attrs[source]
    return BlockPrediction(pred, block_sse(target, pred), False, source)


def _shift2x(mv_i: IntegerMV, mv_f: FractionalMV) -> np.ndarray:
    return 2 * mv_i.array + np.array(mv_f.halves, dtype=np.int64)


def predict_block(block: Block, frame: Frame, super_ref: SuperCloud,
                  mv_i: IntegerMV = IntegerMV(), mv_f: FractionalMV = ZERO_F) -> BlockPrediction:
    """Copy, for every target voxel, the attribute of its nearest voxel in
    the reference window translated by ``mv_i + mv_f``.

    Equidistant candidates resolve to the lexicographically smallest
    reference coordinate. An empty window predicts neutral gray.
    """
    shift = _shift2x(mv_i, mv_f)[None, :]
    (source,) = _predict_many(block, frame, super_ref, shift)
    return _prediction(block, frame, super_ref, source)


def block_match_score(block: Block, frame: Frame, ref, d) -> BlockMatchScore:
    """Hybrid geometry/luma score of integer displacement ``d`` (no super-resolution)."""
    cloud = as_integer_cloud(ref)
    query, lo, hi = _block_geometry(block, frame)
    shift = 2 * np.asarray(d, dtype=np.int64)[None, :]
    region = cloud.window(lo - shift[0], hi - shift[0], cell=2 * block.size)
    if len(region) == 0:
        return EMPTY_SCORE
    idx, d2 = nearest_in_box(query, cloud.coords2x[region], lo, hi, shift)
    src = region[idx[0]]
    n = len(query)
    dg = np.cumsum(np.sqrt(d2[0].astype(np.float64)) / 2.0)[-1] / n
    dc = np.cumsum(np.abs(frame.attrs[block.voxel_indices, 0] - cloud.attrs[src, 0]))[-1] / n
    return BlockMatchScore(float(dg), float(dc))


def ivme_search(block: Block, frame: Frame, ref, window: int = 4) -> tuple[IntegerMV, BlockMatchScore]:
    """Exhaustive integer search minimizing ``delta_g + 0.35 * delta_c``.

    Ties go to the smallest ``|d|`` and then the lexicographically smallest
    ``d``. If every candidate window is empty, returns ``(0, 0, 0)`` with an
    infinite score.
    """
    if not 0 <= window <= MV_LIMIT:
        raise DomainError(f"search window {window} outside [0, {MV_LIMIT}]")
    cloud = as_integer_cloud(ref)
    offsets = np.array(_ordered_offsets(window), dtype=np.int64)
    query, lo, hi = _block_geometry(block, frame)
    region = cloud.window(lo - 2 * window, hi + 2 * window, cell=2 * block.size)
    if len(region) == 0 or len(query) == 0:
        return IntegerMV(), EMPTY_SCORE
    c, dg, dc = hybrid_search(query, frame.attrs[block.voxel_indices, 0],
                              cloud.coords2x[region], cloud.attrs[region, 0],
                              lo, hi, 2 * offsets, scale=2.0)
    if c < 0:
        return IntegerMV(), EMPTY_SCORE
    return IntegerMV(tuple(offsets[c])), BlockMatchScore(dg, dc)


def refine_iv(block: Block, frame: Frame, ref, mv0: IntegerMV, search_range: int = 1,
              channels: str = "YUV") -> tuple[IntegerMV, BlockPrediction]:
    """Local integer refinement around ``mv0`` minimizing prediction error.

    Uses integer-grid nearest-neighbor prediction; candidates leaving the
    MV coding range are skipped. Ties prefer the smallest offset.
    """
    cloud = as_integer_cloud(ref)
    cands = []
    for off in _ordered_offsets(search_range):
        d = tuple(a + b for a, b in zip(mv0.d, off))
        if all(abs(v) <= MV_LIMIT for v in d):
            cands.append(IntegerMV(d))
    shifts = np.array([2 * m.array for m in cands], dtype=np.int64)
    best = None
    for mv, src in zip(cands, _predict_many(block, frame, cloud, shifts)):
        pred = _prediction(block, frame, cloud, src)
        err = weighted_error(pred.sse, channels)
        if best is None or err < best[0]:
            best = (err, mv, pred)
    return best[1], best[2]


def fvme_search(block: Block, frame: Frame, super_ref: SuperCloud, mv_i: IntegerMV,
                channels: str = "YUV") -> tuple[FractionalMV, BlockPrediction]:
    """Pick the half-voxel displacement around ``mv_i`` with least prediction error.

    All 27 candidates are scored; ties prefer the zero vector, then the
    shortest displacement, then the lowest canonical index.
    """
    shifts = np.array([_shift2x(mv_i, f) for f in ALL_FRACTIONAL], dtype=np.int64)
    best = None
    for f, src in zip(ALL_FRACTIONAL, _predict_many(block, frame, super_ref, shifts)):
        pred = _prediction(block, frame, super_ref, src)
        err = weighted_error(pred.sse, channels)
        if best is None or err < best[0]:
            best = (err, f, pred)
    return best[1], best[2]


def read_mv_file(path) -> dict[tuple[int, int, int], IntegerMV]:
    """Parse ``bx by bz dx dy dz`` lines (block grid coords + displacement)."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 6:
                raise DomainError(f"{path}:{lineno}: expected 6 integers, got {line!r}")
            bx, by, bz, dx, dy, dz = (int(p) for p in parts)
            out[(bx, by, bz)] = IntegerMV((dx, dy, dz))
    return out


def write_mv_file(path, blocks: list[Block], mvs: list[IntegerMV]) -> None:
    with open(path, "w") as fh:
        for b, mv in zip(blocks, mvs):
            fh.write("%d %d %d %d %d %d\n" % (*b.grid_index, *mv.d))
