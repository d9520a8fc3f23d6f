"""Rate-distortion sweeps over coding modes and quantization steps."""
from __future__ import annotations

import io
import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from .codec import CodecConfig, decode_sequence, encode_sequence
from .metrics import RDPoint, bd_rate, bpv, psnr_channel

log = logging.getLogger(__name__)

COLUMNS = ("mode", "step", "bpv", "psnr_y", "psnr_u", "psnr_v", "mv_bits_share",
           "empty_window_count", "pred_sse", "dominance_ok", "wall_time_s")


@dataclass
class SweepRow:
    mode: str
    step: float
    bpv: float = math.nan
    psnr_y: float = math.nan
    psnr_u: float = math.nan
    psnr_v: float = math.nan
    mv_bits_share: float = math.nan
    empty_window_count: int = 0
    pred_sse: float = math.nan
    dominance_ok: bool | None = None
    wall_time_s: float = math.nan
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def point(self) -> RDPoint:
        return RDPoint(self.bpv, self.psnr_y, self.mode, self.step)


def _dominance(stats) -> bool:
    for st in stats:
        for b in st.block_sse:
            if b.rf is not None and b.rf > b.dm:
                return False
            if b.fv is not None and b.fv > b.sr:
                return False
    return True


def run_cell(frames, mode: str, step: float, base: CodecConfig | None = None) -> SweepRow:
    """Encode, decode and score one (mode, step) cell; errors become an NA row."""
    cfg = replace(base or CodecConfig(), mode=mode, step=float(step))
    t0 = time.perf_counter()
    try:
        res = encode_sequence(frames, cfg)
        recon = decode_sequence(res.data, frames, cfg.rho)
    except Exception as exc:  # noqa: BLE001 - a failed cell must not abort the sweep
        log.exception("cell %s / %g failed", mode, step)
        return SweepRow(mode, float(step), error=f"{type(exc).__name__}: {exc}")
    elapsed = time.perf_counter() - t0
    counts = [len(f) for f in frames]
    total_bits = sum(res.frame_bits)
    mv_bits = sum(s.mv_bits for s in res.stats)
    inter = [s for s in res.stats if s.kind == "inter"]
    return SweepRow(
        mode, float(step),
        bpv=bpv(res.frame_bits, counts),
        psnr_y=psnr_channel(frames, recon, 0),
        psnr_u=psnr_channel(frames, recon, 1),
        psnr_v=psnr_channel(frames, recon, 2),
        mv_bits_share=mv_bits / total_bits if total_bits else 0.0,
        empty_window_count=sum(s.empty_windows for s in res.stats),
        pred_sse=float(sum(s.pred_sse.sum() for s in inter)) if inter else math.nan,
        dominance_ok=_dominance(inter) if inter else None,
        wall_time_s=elapsed,
    )


def _cell(args):
    return run_cell(*args)


def rd_sweep(frames, modes, steps, base: CodecConfig | None = None, jobs: int = 1) -> list[SweepRow]:
    """Run every (mode, step) cell; rows come back ordered by (mode, step)."""
    cells = [(frames, m, s, base) for m in modes for s in steps]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_cell, cells))
    return [_cell(c) for c in cells]


def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "NA"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return "%.6g" % v
    return str(v)


def rows_to_csv(rows: list[SweepRow], timing: bool = True) -> str:
    cols = COLUMNS if timing else COLUMNS[:-1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        if not r.ok:
            w.writerow([r.mode, _fmt(r.step)] + ["NA"] * (len(cols) - 2))
            continue
        w.writerow([_fmt(getattr(r, c)) for c in cols])
    return buf.getvalue()


def bd_table(rows: list[SweepRow], anchor: str) -> list[tuple[str, float | None]]:
    """BD-rate of every mode against ``anchor`` (None where it cannot be computed)."""
    by_mode: dict[str, list] = {}
    for r in rows:
        if r.ok and math.isfinite(r.psnr_y):
            by_mode.setdefault(r.mode, []).append(r.point())
    if anchor not in by_mode:
        return [(m, None) for m in by_mode]
    out = []
    for mode, pts in by_mode.items():
        if mode == anchor:
            continue
        try:
            out.append((mode, bd_rate(by_mode[anchor], pts)))
        except ValueError:
            out.append((mode, None))
    return out


def bd_table_csv(table, anchor: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mode", "anchor", "bd_rate_percent"])
    for mode, v in table:
        w.writerow([mode, anchor, _fmt(v)])
    return buf.getvalue()
