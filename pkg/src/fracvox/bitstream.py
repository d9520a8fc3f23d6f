"""Self-describing container for coded sequences.

Little-endian layout::

    "PCVC" version:u8 depth:u8 block_size:u8 gop:u8 mode:u8 mv_codec:u8
    step:f64 frame_count:u32
    per frame:
        voxel_count:u32
        [mv_len:u32 mv_bytes]                     inter frames only
        per channel Y, U, V:
            dc_count:u32 dc_bits:u32 dc_bytes     (ceil(dc_bits / 8) bytes)
            ac_count:u32 ac_bits:u32 ac_bytes
        crc32:u32                                 over the frame section above
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

from .errors import CorruptionError

MAGIC = b"PCVC"
VERSION = 1
_HEADER = struct.Struct("<4sBBBBBBdI")
HEADER_SIZE = _HEADER.size

MODES = ("intra-RAGFT1", "intra-RAHT", "DM", "DM+RF", "DM+RF+SR", "FvME")
MODE_IDS = {m: i for i, m in enumerate(MODES)}
INTRA_MODES = ("intra-RAGFT1", "intra-RAHT")


@dataclass
class StreamHeader:
    depth: int
    block_size: int
    gop: int
    mode: int
    mv_codec: int
    step: float
    frame_count: int
    version: int = VERSION


@dataclass
class Section:
    count: int
    nbits: int
    data: bytes

    def __post_init__(self):
        if len(self.data) != (self.nbits + 7) // 8:
            raise ValueError(f"{self.nbits} bits need {(self.nbits + 7) // 8} bytes, got {len(self.data)}")


@dataclass
class ChannelPayload:
    dc: Section
    ac: Section


@dataclass
class FramePayload:
    voxel_count: int
    channels: list[ChannelPayload]
    mv_section: bytes | None = None

    def serialize(self) -> bytes:
        out = [struct.pack("<I", self.voxel_count)]
        if self.mv_section is not None:
            out.append(struct.pack("<I", len(self.mv_section)))
            out.append(self.mv_section)
        for ch in self.channels:
            for sec in (ch.dc, ch.ac):
                out.append(struct.pack("<II", sec.count, sec.nbits))
                out.append(sec.data)
        body = b"".join(out)
        return body + struct.pack("<I", zlib.crc32(body))


@dataclass
class Bitstream:
    header: StreamHeader
    frames: list[FramePayload] = field(default_factory=list)
    frame_sizes: list[int] = field(default_factory=list)


def is_inter_frame(mode: int, gop: int, t: int) -> bool:
    return MODES[mode] not in INTRA_MODES and t % gop != 0


def write_bitstream(header: StreamHeader, frames: list[FramePayload]) -> bytes:
    if header.frame_count != len(frames):
        raise ValueError(f"header declares {header.frame_count} frames, got {len(frames)}")
    parts = [_HEADER.pack(MAGIC, header.version, header.depth, header.block_size, header.gop,
                          header.mode, header.mv_codec, header.step, header.frame_count)]
    for t, fp in enumerate(frames):
        if (fp.mv_section is not None) != is_inter_frame(header.mode, header.gop, t):
            raise ValueError(f"frame {t}: MV section presence does not match mode/GOP")
        parts.append(fp.serialize())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise CorruptionError(f"truncated stream at byte {self.pos} (need {n} more)")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def read_header(data: bytes) -> StreamHeader:
    if len(data) < HEADER_SIZE:
        raise CorruptionError("stream shorter than header")
    magic, version, depth, bsize, gop, mode, mv_codec, step, count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CorruptionError(f"bad magic {magic!r}")
    if version != VERSION:
        raise CorruptionError(f"unsupported version {version}")
    if mode >= len(MODES):
        raise CorruptionError(f"unknown mode id {mode}")
    if gop < 1 or bsize < 2 or not step > 0:
        raise CorruptionError("invalid header fields")
    return StreamHeader(depth, bsize, gop, mode, mv_codec, step, count, version)


def iter_frames(data: bytes, header: StreamHeader | None = None):
    """Yield ``(FramePayload, section_size)`` one frame at a time.

    Each frame is checksum-verified before it is yielded, so a corrupt
    frame raises without being emitted.
    """
    header = header or read_header(data)
    rd = _Reader(data, HEADER_SIZE)
    for t in range(header.frame_count):
        start = rd.pos
        voxel_count = rd.u32()
        mv = None
        if is_inter_frame(header.mode, header.gop, t):
            mv = rd.take(rd.u32())
        channels = []
        for _ in range(3):
            secs = []
            for _ in range(2):
                count, nbits = rd.u32(), rd.u32()
                secs.append(Section(count, nbits, rd.take((nbits + 7) // 8)))
            channels.append(ChannelPayload(*secs))
        body_end = rd.pos
        (crc,) = struct.unpack("<I", rd.take(4))
        if crc != zlib.crc32(data[start:body_end]):
            raise CorruptionError(f"frame {t}: checksum mismatch")
        yield FramePayload(voxel_count, channels, mv), rd.pos - start
    if rd.pos != len(data):
        raise CorruptionError(f"{len(data) - rd.pos} trailing bytes after last frame")


def read_bitstream(data: bytes) -> Bitstream:
    header = read_header(data)
    frames, sizes = [], []
    for fp, size in iter_frames(data, header):
        frames.append(fp)
        sizes.append(size)
    return Bitstream(header, frames, sizes)
