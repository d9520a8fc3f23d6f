"""Deterministic synthetic sequences with known motion."""
from __future__ import annotations

import math

import numpy as np

from .cloud import RGB, Frame
from .errors import DomainError

KINDS = ("translating-texture-plane", "rotating-shell", "half-voxel-shift")


class _Texture:
    """Smooth RGB texture: a few seeded plane waves per channel around mid-gray."""

    def __init__(self, rng: np.random.Generator, dims: int, waves: int = 4, period=(6.0, 16.0), amp=90.0):
        self.freq = []
        self.phase = []
        self.amp = []
        for _ in range(3):
            direction = rng.normal(size=(waves, dims))
            direction /= np.linalg.norm(direction, axis=1, keepdims=True)
            periods = rng.uniform(*period, size=waves)
            self.freq.append(direction * (2 * np.pi / periods)[:, None])
            self.phase.append(rng.uniform(0, 2 * np.pi, size=waves))
            a = rng.uniform(0.5, 1.0, size=waves)
            self.amp.append(a / a.sum() * amp)

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        out = np.empty((len(pts), 3))
        for c in range(3):
            out[:, c] = 128.0 + np.sin(pts @ self.freq[c].T + self.phase[c]) @ self.amp[c]
        return out


def _depth(grid: int) -> int:
    if grid < 8 or grid & (grid - 1):
        raise DomainError("grid must be a power of two >= 8")
    return grid.bit_length() - 1


def _patch(grid: int, margin: int, width: int):
    xs = np.arange(margin, margin + width)
    ys = np.arange(grid // 8, grid - grid // 8)
    return np.meshgrid(xs, ys, indexing="ij")


def translating_plane(frames: int, grid: int, seed: int = 0) -> list[Frame]:
    """Flat textured patch moving by exactly one voxel along x per frame."""
    depth = _depth(grid)
    tex = _Texture(np.random.default_rng(seed), 2)
    x0 = grid // 8
    width = min(grid // 2, grid - x0 - frames)
    if width < 4:
        raise DomainError("grid too small for the requested number of frames")
    gx, gy = _patch(grid, x0, width)
    z0 = grid // 2
    out = []
    for t in range(frames):
        x = gx.ravel() + t
        y = gy.ravel()
        coords = np.stack([x, y, np.full_like(x, z0)], axis=1)
        material = np.stack([(x - t).astype(np.float64), y.astype(np.float64)], axis=1)
        out.append(Frame(coords, tex(material), depth, RGB))
    return out


def half_voxel_shift(frames: int, grid: int, seed: int = 0) -> list[Frame]:
    """Flat textured sheet whose texture slides half a voxel along x per frame.

    The sheet is parallel to the motion, so every frame voxelizes the same
    cells; the texture is sampled at material coordinate ``x - t/2``, i.e.
    on integer positions for even ``t`` and on the interleaved half-integer
    lattice for odd ``t``. The true displacement is ``(1/2, 0, 0)``.
    """
    depth = _depth(grid)
    tex = _Texture(np.random.default_rng(seed), 2)
    gx, gy = _patch(grid, grid // 8, grid - grid // 4)
    x = gx.ravel()
    y = gy.ravel()
    coords = np.stack([x, y, np.full_like(x, grid // 2)], axis=1)
    out = []
    for t in range(frames):
        material = np.stack([x - 0.5 * t, y.astype(np.float64)], axis=1)
        out.append(Frame(coords, tex(material), depth, RGB))
    return out


def material_positions(kind: str, frames: int, grid: int) -> list[np.ndarray]:
    """Texture-space x coordinate sampled by each voxel (for ground-truth checks)."""
    if kind != "half-voxel-shift":
        raise DomainError("material positions are only tabulated for half-voxel-shift")
    gx, _ = _patch(grid, grid // 8, grid - grid // 4)
    return [gx.ravel() - 0.5 * t for t in range(frames)]


def rotating_shell(frames: int, grid: int, seed: int = 0, degrees_per_frame: float = 3.0) -> list[Frame]:
    """Spherical shell whose texture spins about the z axis."""
    depth = _depth(grid)
    tex = _Texture(np.random.default_rng(seed), 3, period=(0.5, 1.2))
    c = (grid - 1) / 2
    radius = grid * 0.35
    ax = np.arange(grid)
    gx, gy, gz = np.meshgrid(ax, ax, ax, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    rel = pts - c
    dist = np.linalg.norm(rel, axis=1)
    keep = np.abs(dist - radius) < 0.5
    coords = pts[keep]
    unit = rel[keep] / dist[keep, None]
    out = []
    for t in range(frames):
        a = -math.radians(degrees_per_frame * t)
        rot = np.array([[math.cos(a), -math.sin(a), 0.0], [math.sin(a), math.cos(a), 0.0], [0.0, 0.0, 1.0]])
        out.append(Frame(coords, tex(unit @ rot.T), depth, RGB))
    return out


def synth_sequence(kind: str, frames: int, grid: int = 64, seed: int = 0) -> list[Frame]:
    if frames < 1:
        raise DomainError("frames must be >= 1")
    if grid > 128:
        raise DomainError("synthetic grids are limited to 128")
    if kind == "translating-texture-plane":
        return translating_plane(frames, grid, seed)
    if kind == "half-voxel-shift":
        return half_voxel_shift(frames, grid, seed)
    if kind == "rotating-shell":
        return rotating_shell(frames, grid, seed)
    raise DomainError(f"unknown sequence kind {kind!r}; choose from {KINDS}")
