"""Quantization, RLGR symbol coding and motion-vector packing."""
from __future__ import annotations

import lzma

import numpy as np

from .errors import CorruptionError, DomainError
from .kernels import rlgr_decode_u, rlgr_encode_u
from .motion import MV_LIMIT, FractionalMV, IntegerMV

IVMV_BITS = 15
FVMV_BITS = 8

MV_CODECS = {"stored": 0, "lzma": 1}
MV_CODEC_NAMES = {v: k for k, v in MV_CODECS.items()}
_LZMA_FILTERS = [{"id": lzma.FILTER_LZMA2, "preset": 9 | lzma.PRESET_EXTREME}]


def quantize(coeffs, step: float) -> np.ndarray:
    """Uniform quantization, rounding half away from zero."""
    if not step > 0:
        raise DomainError(f"quantization step must be positive, got {step}")
    c = np.asarray(coeffs, dtype=np.float64)
    return (np.sign(c) * np.floor(np.abs(c) / step + 0.5)).astype(np.int64)


def dequantize(q, step: float) -> np.ndarray:
    if not step > 0:
        raise DomainError(f"quantization step must be positive, got {step}")
    return np.asarray(q, dtype=np.int64) * float(step)


def zigzag(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    return np.where(x >= 0, 2 * x, -2 * x - 1)


def unzigzag(u) -> np.ndarray:
    u = np.asarray(u, dtype=np.int64)
    return np.where(u & 1, -((u + 1) >> 1), u >> 1)


def rlgr_encode(symbols) -> np.ndarray:
    """Encode signed integers; returns the code as a 0/1 ``uint8`` array."""
    u = zigzag(symbols)
    if len(u) and int(u.max()) >= 1 << 32:
        raise DomainError("RLGR symbols must satisfy |x| < 2**31")
    return rlgr_encode_u(u)


def rlgr_decode(bits, count: int, exact: bool = True) -> np.ndarray:
    """Decode ``count`` symbols; with ``exact`` every bit must be consumed."""
    bits = np.asarray(bits, dtype=np.uint8)
    if count < 0:
        raise CorruptionError("negative symbol count")
    if count > (len(bits) + 1) << 16:
        raise CorruptionError("symbol count inconsistent with payload size")
    u, used = rlgr_decode_u(bits, count)
    if used < 0:
        raise CorruptionError("RLGR payload ended early or is malformed")
    if exact and used != len(bits):
        raise CorruptionError(f"RLGR decode consumed {used} of {len(bits)} bits")
    return unzigzag(u)


def bits_to_bytes(bits) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def bytes_to_bits(data: bytes, nbits: int) -> np.ndarray:
    if nbits > 8 * len(data):
        raise CorruptionError(f"{nbits} bits declared but only {len(data)} bytes present")
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))[:nbits]


# --------------------------------------------------------------------------
# motion vectors
# --------------------------------------------------------------------------

def _put(bits: list, value: int, width: int) -> None:
    bits.extend((value >> b) & 1 for b in range(width - 1, -1, -1))


def pack_mv_bits(records) -> tuple[bytes, int]:
    """Bit-pack ``(IntegerMV, FractionalMV | None)`` records.

    Per block: for each axis a 4-bit magnitude then a sign bit (1 =
    negative), then the 8-bit fractional index when present. Returns the
    byte-padded payload and the exact bit count.
    """
    bits: list[int] = []
    for mv_i, mv_f in records:
        for v in mv_i.d:
            if abs(v) > MV_LIMIT:
                raise DomainError(f"integer MV component {v} out of range")
            _put(bits, abs(v), 4)
            bits.append(1 if v < 0 else 0)
        if mv_f is not None:
            _put(bits, mv_f.index, FVMV_BITS)
    return bits_to_bytes(bits), len(bits)


def compress(data: bytes, codec: int) -> bytes:
    if codec == 0:
        return data
    if codec == 1:
        return lzma.compress(data, format=lzma.FORMAT_RAW, filters=_LZMA_FILTERS)
    raise DomainError(f"unknown MV codec id {codec}")


def decompress(data: bytes, codec: int) -> bytes:
    if codec == 0:
        return data
    if codec == 1:
        try:
            return lzma.decompress(data, format=lzma.FORMAT_RAW, filters=_LZMA_FILTERS)
        except lzma.LZMAError as exc:
            raise CorruptionError(f"MV section: {exc}") from exc
    raise CorruptionError(f"unknown MV codec id {codec}")


def pack_mvs(records, codec: int = 1) -> bytes:
    for mv_i, mv_f in records:
        if not isinstance(mv_i, IntegerMV) or (mv_f is not None and not isinstance(mv_f, FractionalMV)):
            raise DomainError("MV records must be (IntegerMV, FractionalMV | None)")
    packed, _ = pack_mv_bits(records)
    return compress(packed, codec)


def unpack_mvs(data: bytes, n_blocks: int, fractional: bool, codec: int = 1):
    raw = decompress(data, codec)
    per = IVMV_BITS + (FVMV_BITS if fractional else 0)
    nbits = per * n_blocks
    if len(raw) != (nbits + 7) // 8:
        raise CorruptionError(f"MV section holds {len(raw)} bytes, expected {(nbits + 7) // 8}")
    bits = bytes_to_bits(raw, nbits).tolist()
    if any(np.unpackbits(np.frombuffer(raw, dtype=np.uint8))[nbits:]):
        raise CorruptionError("nonzero MV padding bits")
    out = []
    p = 0
    for _ in range(n_blocks):
        d = []
        for _axis in range(3):
            mag = bits[p] << 3 | bits[p + 1] << 2 | bits[p + 2] << 1 | bits[p + 3]
            if bits[p + 4] and mag == 0:
                raise CorruptionError("negative zero in MV section")
            d.append(-mag if bits[p + 4] else mag)
            p += 5
        mv_f = None
        if fractional:
            idx = 0
            for _ in range(FVMV_BITS):
                idx = idx << 1 | bits[p]
                p += 1
            if idx > 26:
                raise CorruptionError(f"fractional MV index {idx} out of range")
            mv_f = FractionalMV.from_index(idx)
        out.append((IntegerMV(tuple(d)), mv_f))
    return out
