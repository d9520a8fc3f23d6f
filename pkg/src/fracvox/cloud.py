"""Voxel clouds, color conversion and block partitioning."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, StateError

RGB = "RGB"
YUV = "YUV"

# full-range BT.601 (JPEG)
_RGB2YUV = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168736, -0.331264, 0.5],
        [0.5, -0.418688, -0.081312],
    ]
)
_YUV_OFFSET = np.array([0.0, 128.0, 128.0])
_YUV2RGB = np.linalg.inv(_RGB2YUV)


def lex_order(coords: np.ndarray) -> np.ndarray:
    """Indices sorting ``coords`` lexicographically by (x, y, z)."""
    coords = np.asarray(coords)
    if len(coords) == 0:
        return np.zeros(0, dtype=np.int64)
    return np.lexsort((coords[:, 2], coords[:, 1], coords[:, 0]))


def depth_for(coords: np.ndarray) -> int:
    """Smallest depth d with every coordinate < 2**d (at least 1)."""
    if len(coords) == 0:
        return 1
    top = int(np.max(coords))
    return max(1, top.bit_length())


@dataclass(frozen=True, eq=False)
class Frame:
    """Occupied voxels of one point-cloud frame.

    ``coords`` is an ``(N, 3)`` int64 array, ``attrs`` an ``(N, 3)`` float64
    array. Rows are unique and kept in lexicographic (x, y, z) order.
    """

    coords: np.ndarray
    attrs: np.ndarray
    depth: int
    color_space: str = RGB

    def __post_init__(self):
        coords = np.ascontiguousarray(self.coords, dtype=np.int64).reshape(-1, 3)
        attrs = np.ascontiguousarray(self.attrs, dtype=np.float64).reshape(-1, 3)
        if len(coords) != len(attrs):
            raise DomainError(f"{len(coords)} coordinates but {len(attrs)} attribute rows")
        if self.color_space not in (RGB, YUV):
            raise DomainError(f"unknown color space {self.color_space!r}")
        if self.depth < 1 or self.depth > 30:
            raise DomainError(f"depth {self.depth} out of range")
        if len(coords):
            if coords.min() < 0 or coords.max() >= (1 << self.depth):
                raise DomainError(f"coordinates outside [0, 2^{self.depth})")
            order = lex_order(coords)
            if not np.array_equal(order, np.arange(len(coords))):
                coords, attrs = coords[order], attrs[order]
            if len(coords) > 1 and not np.any(np.diff(coords, axis=0), axis=1).all():
                raise DomainError("duplicate voxel coordinates")
        coords.setflags(write=False)
        attrs.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "attrs", attrs)

    @classmethod
    def from_points(cls, coords, attrs, depth: int | None = None, color_space: str = RGB) -> "Frame":
        """Build a frame from raw points, merging duplicate coordinates by averaging."""
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, 3)
        attrs = np.asarray(attrs, dtype=np.float64).reshape(-1, 3)
        if len(coords) and coords.min() < 0:
            raise DomainError("negative voxel coordinate")
        if len(coords):
            uniq, inverse, counts = np.unique(coords, axis=0, return_inverse=True, return_counts=True)
            if len(uniq) != len(coords):
                sums = np.zeros((len(uniq), 3))
                np.add.at(sums, inverse.ravel(), attrs)
                attrs = sums / counts[:, None]
            else:
                attrs = attrs[lex_order(coords)]
            coords = uniq
        if depth is None:
            depth = depth_for(coords)
        return cls(coords, attrs, depth, color_space)

    def __len__(self) -> int:
        return len(self.coords)

    def with_attrs(self, attrs, color_space: str | None = None) -> "Frame":
        return Frame(self.coords, attrs, self.depth, color_space or self.color_space)

    def same_geometry(self, other: "Frame") -> bool:
        return self.coords.shape == other.coords.shape and np.array_equal(self.coords, other.coords)

    def canonical_bytes(self) -> bytes:
        head = np.array([self.depth, len(self)], dtype=np.int64).tobytes()
        return head + self.color_space.encode() + self.coords.tobytes() + self.attrs.tobytes()

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        return self.canonical_bytes() == other.canonical_bytes()

    __hash__ = None


def rgb_array_to_yuv(rgb) -> np.ndarray:
    return np.asarray(rgb, dtype=np.float64) @ _RGB2YUV.T + _YUV_OFFSET


def yuv_array_to_rgb(yuv) -> np.ndarray:
    return (np.asarray(yuv, dtype=np.float64) - _YUV_OFFSET) @ _YUV2RGB.T


def rgb_to_yuv(frame: Frame) -> Frame:
    if frame.color_space != RGB:
        raise StateError(f"expected an RGB frame, got {frame.color_space}")
    return frame.with_attrs(rgb_array_to_yuv(frame.attrs), YUV)


def yuv_to_rgb(frame: Frame) -> Frame:
    if frame.color_space != YUV:
        raise StateError(f"expected a YUV frame, got {frame.color_space}")
    return frame.with_attrs(yuv_array_to_rgb(frame.attrs), RGB)


def ensure_yuv(frame: Frame) -> Frame:
    return frame if frame.color_space == YUV else rgb_to_yuv(frame)


@dataclass(frozen=True, eq=False)
class Block:
    origin: tuple[int, int, int]
    size: int
    voxel_indices: np.ndarray = field(repr=False)

    @property
    def grid_index(self) -> tuple[int, int, int]:
        return tuple(o // self.size for o in self.origin)

    def __len__(self) -> int:
        return len(self.voxel_indices)


def partition(frame: Frame, block_size: int = 16) -> list[Block]:
    """Split a frame into non-empty cubic blocks ordered by origin."""
    if block_size < 2 or block_size & (block_size - 1):
        raise DomainError(f"block size must be a power of two >= 2, got {block_size}")
    if len(frame) == 0:
        return []
    keys = frame.coords // block_size
    order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
    sk = keys[order]
    cuts = np.flatnonzero(np.any(np.diff(sk, axis=0), axis=1)) + 1
    blocks = []
    for idx, first in zip(np.split(order, cuts), np.concatenate(([0], cuts))):
        idx = np.sort(idx)
        idx.setflags(write=False)
        origin = tuple(int(v) * block_size for v in sk[first])
        blocks.append(Block(origin, block_size, idx))
    return blocks
