"""Closed-loop encoder and decoder for color attributes.

Geometry is never coded: both sides receive every frame's voxel
coordinates out of band. Inter frames predict from the immediately
previous *decoded* frame, so encoder and decoder references match.
"""
from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from . import bitstream as bs
from .cloud import YUV, Block, Frame, ensure_yuv, partition, yuv_array_to_rgb
from .entropy import (MV_CODECS, bits_to_bytes, bytes_to_bits, dequantize, pack_mv_bits, pack_mvs,
                      quantize, rlgr_decode, rlgr_encode, unpack_mvs)
from .errors import DomainError
from .motion import (EPRED_CHANNELS, ZERO_F, IntegerMV, as_integer_cloud, fvme_search, ivme_search,
                     predict_block, refine_iv)
from .superres import DEFAULT_RHO, SuperCloud, superresolve
from .transform import CoefficientPlan, raht_forward, raht_inverse, ragft1_forward, ragft1_inverse

log = logging.getLogger(__name__)

MODES = bs.MODES
INTER_MODES = ("DM", "DM+RF", "DM+RF+SR", "FvME")


@dataclass(frozen=True)
class CodecConfig:
    mode: str = "FvME"
    step: float = 16.0
    gop: int = 32
    block_size: int = 16
    rho: float = DEFAULT_RHO
    search_window: int = 4
    epred_channels: str = "YUV"
    mv_codec: str = "lzma"
    # frame index -> {block grid index: IntegerMV}; None = internal search
    mv_source: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"unknown mode {self.mode!r}; choose from {MODES}")
        if not self.step > 0:
            raise DomainError("step must be positive")
        if not 1 <= self.gop <= 255:
            raise DomainError("gop must be in [1, 255]")
        if self.block_size < 2 or self.block_size > 128 or self.block_size & (self.block_size - 1):
            raise DomainError("block size must be a power of two in [2, 128]")
        if not self.rho > 0:
            raise DomainError("rho must be positive")
        if not 0 <= self.search_window <= 15:
            raise DomainError("search window must be in [0, 15]")
        if self.epred_channels not in EPRED_CHANNELS:
            raise DomainError(f"epred_channels must be one of {tuple(EPRED_CHANNELS)}")
        if self.mv_codec not in MV_CODECS:
            raise DomainError(f"mv_codec must be one of {tuple(MV_CODECS)}")

    @property
    def mode_id(self) -> int:
        return bs.MODE_IDS[self.mode]


@dataclass
class BlockSSE:
    """Prediction error of each scheme stage on the same reference (E_pred channels)."""

    dm: float | None = None
    rf: float | None = None
    sr: float | None = None
    fv: float | None = None


@dataclass
class FrameStats:
    index: int
    kind: str
    voxels: int
    bits: int = 0
    mv_bits: int = 0
    mv_raw_bits: int = 0
    pred_sse: np.ndarray = field(default_factory=lambda: np.zeros(3))
    residual_energy: np.ndarray = field(default_factory=lambda: np.zeros(3))
    empty_windows: int = 0
    missing_mvs: int = 0
    mvs: list = field(default_factory=list)
    block_sse: list[BlockSSE] = field(default_factory=list)
    n_fractional: int = 0


@dataclass
class EncodeResult:
    data: bytes
    stats: list[FrameStats]
    recon: list[Frame]

    @property
    def frame_bits(self) -> list[int]:
        return [s.bits for s in self.stats]


# --------------------------------------------------------------------------
# residual / attribute coding shared by encoder and decoder
# --------------------------------------------------------------------------

def _code_sections(q_dc: np.ndarray, q_ac: np.ndarray) -> list[bs.ChannelPayload]:
    out = []
    for c in range(3):
        secs = []
        for q in (q_dc[:, c], q_ac[:, c]):
            bits = rlgr_encode(q)
            secs.append(bs.Section(len(q), len(bits), bits_to_bytes(bits)))
        out.append(bs.ChannelPayload(*secs))
    return out


def _decode_sections(channels: list[bs.ChannelPayload]) -> tuple[np.ndarray, np.ndarray]:
    dcs, acs = [], []
    for ch in channels:
        dcs.append(rlgr_decode(bytes_to_bits(ch.dc.data, ch.dc.nbits), ch.dc.count))
        acs.append(rlgr_decode(bytes_to_bits(ch.ac.data, ch.ac.nbits), ch.ac.count))
    return np.stack(dcs, axis=1), np.stack(acs, axis=1)


def _forward(coords, values, blocks, raht: bool, depth: int) -> tuple[np.ndarray, np.ndarray, CoefficientPlan | None]:
    if raht:
        coeffs = raht_forward(coords, values, depth)
        return coeffs[:1], coeffs[1:], None
    plan = ragft1_forward(coords, values, blocks)
    return plan.dc, plan.ac_flat.reshape(-1, 3), plan


def _inverse(coords, dc, ac, blocks, raht: bool, depth: int) -> np.ndarray:
    if raht:
        return raht_inverse(coords, np.concatenate([dc, ac]), depth)
    lengths = [len(b) - 1 for b in blocks]
    cuts = np.cumsum(lengths)[:-1]
    plan = CoefficientPlan(dc, np.split(ac, cuts), [b.origin for b in blocks])
    return ragft1_inverse(coords, plan, blocks)


def _check_counts(q_dc, q_ac, n: int, n_blocks: int, raht: bool) -> None:
    want_dc = 1 if raht else n_blocks
    if len(q_dc) != want_dc or len(q_dc) + len(q_ac) != n:
        raise DomainError(f"coefficient counts ({len(q_dc)}, {len(q_ac)}) do not match geometry ({n} voxels)")


# --------------------------------------------------------------------------
# prediction
# --------------------------------------------------------------------------

@dataclass
class _InterPlan:
    records: list
    pred: np.ndarray
    stats: FrameStats


def _inter_predict(frame: Frame, ref: Frame, cfg: CodecConfig, blocks: list[Block], t: int) -> _InterPlan:
    """Motion search + prediction for every block of ``frame``."""
    int_ref = SuperCloud.from_frame(ref)
    super_ref = superresolve(ref, cfg.rho) if cfg.mode in ("DM+RF+SR", "FvME") else None
    imported = None if cfg.mv_source is None else cfg.mv_source.get(t, {})
    ch = cfg.epred_channels
    st = FrameStats(t, "inter", len(frame))
    if super_ref is not None:
        st.n_fractional = super_ref.n_fractional
    pred = np.empty_like(frame.attrs)
    records = []
    wsum = EPRED_CHANNELS[ch]
    for blk in blocks:
        if imported is not None:
            mv0 = imported.get(blk.grid_index)
            if mv0 is None:
                st.missing_mvs += 1
                mv0 = IntegerMV()
        else:
            mv0, _score = ivme_search(blk, frame, int_ref, cfg.search_window)
        p0 = predict_block(blk, frame, int_ref, mv0)
        sse = BlockSSE(dm=float(wsum @ p0.sse))
        mv_f = None
        if cfg.mode == "DM":
            mv_i, p = mv0, p0
        else:
            mv_i, p = refine_iv(blk, frame, int_ref, mv0, 1, ch)
            sse.rf = float(wsum @ p.sse)
            if super_ref is not None:
                p_sr = predict_block(blk, frame, super_ref, mv_i, ZERO_F)
                sse.sr = float(wsum @ p_sr.sse)
                p = p_sr
                if cfg.mode == "FvME":
                    mv_f, p = fvme_search(blk, frame, super_ref, mv_i, ch)
                    sse.fv = float(wsum @ p.sse)
        st.empty_windows += int(p.empty)
        pred[blk.voxel_indices] = p.attrs
        records.append((mv_i, mv_f))
        st.block_sse.append(sse)
        st.pred_sse = st.pred_sse + p.sse
    st.mvs = records
    if st.missing_mvs:
        log.warning("frame %d: %d blocks missing from imported MVs, using (0,0,0)", t, st.missing_mvs)
    return _InterPlan(records, pred, st)


def _decoder_predict(geometry: Frame, ref: Frame, cfg_mode: str, rho: float, blocks, records) -> tuple[np.ndarray, int]:
    int_ref = SuperCloud.from_frame(ref)
    cloud = superresolve(ref, rho) if cfg_mode in ("DM+RF+SR", "FvME") else int_ref
    pred = np.empty((len(geometry), 3))
    empty = 0
    for blk, (mv_i, mv_f) in zip(blocks, records):
        p = predict_block(blk, geometry, cloud, mv_i, mv_f or ZERO_F)
        empty += int(p.empty)
        pred[blk.voxel_indices] = p.attrs
    return pred, empty


# --------------------------------------------------------------------------
# frame stages
# --------------------------------------------------------------------------

def encode_frame_intra(frame: Frame, cfg: CodecConfig, t: int = 0, coeff_sink=None):
    """Intra-code one YUV frame. Returns ``(FramePayload, recon Frame, FrameStats)``."""
    raht = cfg.mode == "intra-RAHT"
    blocks = [] if raht else partition(frame, cfg.block_size)
    dc, ac, _ = _forward(frame.coords, frame.attrs, blocks, raht, frame.depth)
    q_dc, q_ac = quantize(dc, cfg.step), quantize(ac, cfg.step)
    if coeff_sink is not None:
        coeff_sink(t, q_dc, q_ac)
    recon = _inverse(frame.coords, dequantize(q_dc, cfg.step), dequantize(q_ac, cfg.step), blocks, raht, frame.depth)
    payload = bs.FramePayload(len(frame), _code_sections(q_dc, q_ac))
    st = FrameStats(t, "intra", len(frame))
    st.residual_energy = (frame.attrs ** 2).sum(axis=0)
    return payload, frame.with_attrs(recon, YUV), st


def encode_frame_inter(frame: Frame, ref: Frame, cfg: CodecConfig, t: int = 1, coeff_sink=None):
    """Inter-code one YUV frame against decoded reference ``ref``."""
    blocks = partition(frame, cfg.block_size)
    plan = _inter_predict(frame, ref, cfg, blocks, t)
    residual = frame.attrs - plan.pred
    dc, ac, _ = _forward(frame.coords, residual, blocks, False, frame.depth)
    q_dc, q_ac = quantize(dc, cfg.step), quantize(ac, cfg.step)
    if coeff_sink is not None:
        coeff_sink(t, q_dc, q_ac)
    res_hat = _inverse(frame.coords, dequantize(q_dc, cfg.step), dequantize(q_ac, cfg.step), blocks, False, frame.depth)
    recon = plan.pred + res_hat
    codec_id = MV_CODECS[cfg.mv_codec]
    mv_bytes = pack_mvs(plan.records, codec_id)
    _, raw_bits = pack_mv_bits(plan.records)
    payload = bs.FramePayload(len(frame), _code_sections(q_dc, q_ac), mv_bytes)
    st = plan.stats
    st.residual_energy = (residual ** 2).sum(axis=0)
    st.mv_bits = 8 * (4 + len(mv_bytes))
    st.mv_raw_bits = raw_bits
    return payload, frame.with_attrs(recon, YUV), st


# --------------------------------------------------------------------------
# sequences
# --------------------------------------------------------------------------

def _coeff_writer(path):
    fh = open(path, "w", newline="")
    w = csv.writer(fh)
    w.writerow(["frame", "channel", "section", "index", "q"])

    def sink(t, q_dc, q_ac):
        for sec, arr in (("dc", q_dc), ("ac", q_ac)):
            for c, name in enumerate("YUV"):
                for i, v in enumerate(arr[:, c].tolist()):
                    w.writerow([t, name, sec, i, v])
    return fh, sink


def encode_sequence(frames: list[Frame], cfg: CodecConfig, dump_superres: str | None = None,
                    dump_coeffs: str | None = None) -> EncodeResult:
    """Encode a sequence. Frames may be RGB or YUV; all must share depth."""
    if not frames:
        raise DomainError("no frames to encode")
    depth = frames[0].depth
    if any(f.depth != depth for f in frames):
        raise DomainError("all frames must share the same depth")
    yuv = [ensure_yuv(f) for f in frames]
    header = bs.StreamHeader(depth, cfg.block_size, cfg.gop, cfg.mode_id, MV_CODECS[cfg.mv_codec],
                             float(cfg.step), len(frames))
    fh, sink = _coeff_writer(dump_coeffs) if dump_coeffs else (None, None)
    payloads, stats, recons = [], [], []
    try:
        for t, frame in enumerate(yuv):
            if bs.is_inter_frame(cfg.mode_id, cfg.gop, t):
                if dump_superres and cfg.mode in ("DM+RF+SR", "FvME"):
                    _dump_superres(dump_superres, t, superresolve(recons[-1], cfg.rho))
                payload, recon, st = encode_frame_inter(frame, recons[-1], cfg, t, sink)
            else:
                payload, recon, st = encode_frame_intra(frame, cfg, t, sink)
            st.bits = 8 * len(payload.serialize())
            payloads.append(payload)
            stats.append(st)
            recons.append(recon)
            log.debug("frame %d (%s): %d bits", t, st.kind, st.bits)
    finally:
        if fh is not None:
            fh.close()
    return EncodeResult(bs.write_bitstream(header, payloads), stats, recons)


def _dump_superres(directory: str, t: int, cloud: SuperCloud) -> None:
    from .ply import write_ply
    os.makedirs(directory, exist_ok=True)
    write_ply(os.path.join(directory, f"superres_{t:04d}.ply"), cloud.coords2x, yuv_array_to_rgb(cloud.attrs),
              comment="doubled grid: coordinates are 2x voxel units")


def _geometry_frame(g, depth: int) -> Frame:
    if isinstance(g, Frame):
        return Frame(g.coords, np.zeros((len(g), 3)), depth, YUV)
    coords = np.asarray(g, dtype=np.int64).reshape(-1, 3)
    return Frame(coords, np.zeros((len(coords), 3)), depth, YUV)


def iter_decode(data: bytes, geometry, rho: float = DEFAULT_RHO):
    """Decode frame by frame, yielding YUV frames; stops at the first error.

    ``rho`` must match the encoder's (it is not stored in the stream).
    """
    header = bs.read_header(data)
    if header.frame_count != len(geometry):
        raise DomainError(f"stream has {header.frame_count} frames, geometry has {len(geometry)}")
    mode = MODES[header.mode]
    raht = mode == "intra-RAHT"
    prev = None
    for t, (fp, _size) in enumerate(bs.iter_frames(data, header)):
        geom = _geometry_frame(geometry[t], header.depth)
        if fp.voxel_count != len(geom):
            raise DomainError(f"frame {t}: stream has {fp.voxel_count} voxels, geometry has {len(geom)}")
        inter = bs.is_inter_frame(header.mode, header.gop, t)
        blocks = [] if (raht and not inter) else partition(geom, header.block_size)
        q_dc, q_ac = _decode_sections(fp.channels)
        _check_counts(q_dc, q_ac, len(geom), len(blocks), raht and not inter)
        res = _inverse(geom.coords, dequantize(q_dc, header.step), dequantize(q_ac, header.step),
                       blocks, raht and not inter, header.depth)
        if inter:
            records = unpack_mvs(fp.mv_section, len(blocks), mode == "FvME", header.mv_codec)
            if mode != "FvME":
                records = [(mv_i, None) for mv_i, _ in records]
            pred, _ = _decoder_predict(geom, prev, mode, rho, blocks, records)
            res = pred + res
        prev = geom.with_attrs(res, YUV)
        yield prev


def decode_sequence(data: bytes, geometry, rho: float = DEFAULT_RHO) -> list[Frame]:
    """Reconstruct YUV frames from a stream and per-frame voxel coordinates."""
    return list(iter_decode(data, geometry, rho))
