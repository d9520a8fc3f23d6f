"""Rate-distortion metrics: PSNR-Y, bits per voxel, BD-rate."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cloud import Frame, ensure_yuv
from .errors import DomainError


@dataclass(frozen=True)
class RDPoint:
    bpv: float
    psnr_y: float
    mode: str = ""
    step: float = 0.0


def _sq_errors(originals, recons, channel: int):
    if len(originals) != len(recons) or not originals:
        raise DomainError("need equal, non-zero numbers of original and reconstructed frames")
    errs, counts = [], []
    for t, (a, b) in enumerate(zip(originals, recons)):
        if not a.same_geometry(b):
            raise DomainError(f"frame {t}: original and reconstruction differ in geometry")
        a, b = ensure_yuv(a), ensure_yuv(b)
        d = a.attrs[:, channel] - b.attrs[:, channel]
        errs.append(float(d @ d))
        counts.append(len(a))
    return errs, counts


def psnr_channel(originals: list[Frame], recons: list[Frame], channel: int = 0) -> float:
    """PSNR with the per-frame normalized MSE averaged inside the log.

    Exact reconstruction returns ``inf``.
    """
    errs, counts = _sq_errors(originals, recons, channel)
    if min(counts) == 0:
        raise DomainError("empty frame")
    mean = sum(e / (255.0 ** 2 * n) for e, n in zip(errs, counts)) / len(errs)
    return math.inf if mean == 0 else -10.0 * math.log10(mean)


def psnr_y(originals: list[Frame], recons: list[Frame]) -> float:
    return psnr_channel(originals, recons, 0)


def bpv(bit_counts, voxel_counts) -> float:
    """Pooled bits per voxel: total bits over total voxels."""
    if len(bit_counts) != len(voxel_counts):
        raise DomainError("bit and voxel count sequences differ in length")
    total = int(sum(voxel_counts))
    if total <= 0:
        raise DomainError("zero total voxels")
    return float(sum(bit_counts)) / total


def _rd_arrays(points):
    if len(points) < 4:
        raise DomainError("BD-rate needs at least 4 points per curve")
    pts = sorted(points, key=lambda p: p.bpv)
    rate = np.array([p.bpv for p in pts], dtype=np.float64)
    psnr = np.array([p.psnr_y for p in pts], dtype=np.float64)
    if np.any(rate <= 0) or np.any(np.diff(rate) <= 0):
        raise DomainError("rates must be positive and strictly increasing")
    if not np.all(np.isfinite(psnr)):
        raise DomainError("PSNR values must be finite")
    return np.log10(rate), psnr


def bd_fit(points) -> tuple[np.ndarray, float, float]:
    """Cubic fit of log10(rate) against PSNR; returns (poly, psnr_min, psnr_max)."""
    lr, q = _rd_arrays(points)
    return np.polyfit(q, lr, 3), float(q.min()), float(q.max())


def bd_rate(anchor, test) -> float:
    """Average rate difference of ``test`` over ``anchor`` at equal PSNR, in percent."""
    pa, lo_a, hi_a = bd_fit(anchor)
    pt, lo_t, hi_t = bd_fit(test)
    lo, hi = max(lo_a, lo_t), min(hi_a, hi_t)
    if not hi > lo:
        raise DomainError("RD curves have no overlapping PSNR range")
    ia, it = np.polyint(pa), np.polyint(pt)
    diff = (np.polyval(it, hi) - np.polyval(it, lo)) - (np.polyval(ia, hi) - np.polyval(ia, lo))
    return (10.0 ** (diff / (hi - lo)) - 1.0) * 100.0
