import numpy as np
import pytest

from fracvox.bitstream import HEADER_SIZE, read_bitstream
from fracvox.cloud import YUV, Frame, rgb_to_yuv
from fracvox.codec import (MODES, CodecConfig, decode_sequence, encode_frame_inter, encode_frame_intra,
                           encode_sequence, iter_decode)
from fracvox.errors import CorruptionError, DomainError
from fracvox.metrics import psnr_y
from fracvox.motion import IntegerMV
from fracvox.synth import synth_sequence

from _util import random_frame


def _yuv(frames):
    return [rgb_to_yuv(f) if f.color_space != YUV else f for f in frames]


def _same(a, b):
    return all(np.array_equal(x.attrs, y.attrs) and np.array_equal(x.coords, y.coords) for x, y in zip(a, b))


def test_config_validation():
    CodecConfig()
    for kw in ({"mode": "XX"}, {"step": 0}, {"gop": 0}, {"block_size": 12}, {"rho": -1},
               {"search_window": 16}, {"epred_channels": "UV"}, {"mv_codec": "zip"}):
        with pytest.raises(DomainError):
            CodecConfig(**kw)


@pytest.mark.parametrize("mode", MODES)
def test_single_frame_is_intra_with_bounded_error(mode):
    f = random_frame(np.random.default_rng(0), 300, grid=16, depth=4)
    step = 6.0
    res = encode_sequence([f], CodecConfig(mode=mode, step=step))
    assert [s.kind for s in res.stats] == ["intra"]
    rec = decode_sequence(res.data, [f])[0]
    # orthonormal transform: error energy equals coefficient error energy
    assert ((rec.attrs - f.attrs) ** 2).sum() <= len(f) * 3 * (step / 2) ** 2 + 1e-6
    assert _same([rec], res.recon)


def test_identical_frames_fvme():
    f = rgb_to_yuv(synth_sequence("rotating-shell", 1, 32, seed=2)[0])
    sink = {}
    res = encode_sequence([f, f], CodecConfig(mode="FvME", step=1.0))
    st = res.stats[1]
    assert all(m.d == (0, 0, 0) for m, _ in st.mvs)
    # prediction is the decoded first frame, so the residual is its coding error
    assert np.allclose(st.residual_energy, ((f.attrs - res.recon[0].attrs) ** 2).sum(0))
    payload, _, _ = encode_frame_inter(f, res.recon[0], CodecConfig(mode="FvME", step=1.0), 1,
                                       lambda t, dc, ac: sink.update(ac=ac))
    assert np.mean(sink["ac"] == 0) > 0.95
    p1 = psnr_y([f], res.recon[:1])
    p2 = psnr_y([f], res.recon[1:])
    assert p2 >= p1


def test_gop_structure():
    frames = synth_sequence("rotating-shell", 33, 16, seed=0)
    res = encode_sequence(frames, CodecConfig(mode="DM", step=16, gop=32, search_window=1))
    kinds = [s.kind for s in res.stats]
    assert kinds[0] == kinds[32] == "intra" and kinds.count("inter") == 31


@pytest.mark.parametrize("mode", MODES)
def test_closed_loop_and_rate_accounting(mode):
    frames = synth_sequence("rotating-shell", 4, 16, seed=3)
    res = encode_sequence(frames, CodecConfig(mode=mode, step=10, gop=3, search_window=2))
    dec = decode_sequence(res.data, frames)
    assert _same(dec, res.recon)
    bst = read_bitstream(res.data)
    assert res.frame_bits == [8 * s for s in bst.frame_sizes]
    assert HEADER_SIZE + sum(bst.frame_sizes) == len(res.data)
    for st in res.stats:
        if st.kind == "inter":
            assert st.mv_bits == 8 * (4 + len(bst.frames[st.index].mv_section))


def test_corrupted_mv_section_stops_before_that_frame():
    frames = synth_sequence("rotating-shell", 3, 16, seed=4)
    res = encode_sequence(frames, CodecConfig(mode="FvME", step=10, mv_codec="stored", search_window=1))
    bst = read_bitstream(res.data)
    off = HEADER_SIZE + bst.frame_sizes[0] + 8  # frame 1: voxel_count, mv_len, then MV bytes
    bad = bytearray(res.data)
    bad[off] ^= 0xFF
    got = []
    with pytest.raises(CorruptionError):
        for f in iter_decode(bytes(bad), frames):
            got.append(f)
    assert len(got) == 1 and _same(got, res.recon[:1])


def test_geometry_mismatch():
    frames = synth_sequence("rotating-shell", 2, 16, seed=4)
    res = encode_sequence(frames, CodecConfig(mode="DM", step=10, search_window=1))
    with pytest.raises(DomainError):
        decode_sequence(res.data, frames[:1])
    other = random_frame(np.random.default_rng(0), 10, grid=16, depth=4)
    with pytest.raises(DomainError):
        decode_sequence(res.data, [frames[0], other])


def test_depth_mismatch():
    a = random_frame(np.random.default_rng(0), 10, grid=8, depth=3)
    b = random_frame(np.random.default_rng(1), 10, grid=8, depth=4)
    with pytest.raises(DomainError):
        encode_sequence([a, b], CodecConfig())


def test_high_rate_transparency():
    frames = [random_frame(np.random.default_rng(s), 150, grid=16, depth=4) for s in range(10)]
    res = encode_sequence(frames, CodecConfig(mode="FvME", step=0.25, search_window=1))
    assert psnr_y(frames, decode_sequence(res.data, frames)) > 50


def test_intra_constant_color():
    rng = np.random.default_rng(0)
    f = random_frame(rng, 200, grid=32, depth=5).with_attrs(np.tile([90.0, 120.0, 140.0], (200, 1)))
    for step in (1.0, 7.0, 40.0):
        seen = {}
        encode_frame_intra(f, CodecConfig(mode="intra-RAGFT1", step=step), 0,
                           lambda t, dc, ac: seen.update(dc=dc, ac=ac))
        assert np.all(seen["ac"] == 0) and np.any(seen["dc"] != 0)


def test_inter_with_perfect_motion():
    frames = _yuv(synth_sequence("translating-texture-plane", 2, 32, seed=1))
    for mode in ("DM", "DM+RF", "FvME"):
        _, _, st = encode_frame_inter(frames[1], frames[0], CodecConfig(mode=mode, step=4))
        assert np.all(st.residual_energy == 0)
        assert all(m.d == (1, 0, 0) for m, _ in st.mvs)


def test_stage_dominance_per_frame():
    frames = _yuv(synth_sequence("half-voxel-shift", 3, 32, seed=5))
    ref = frames[0]
    e = {}
    for mode in ("DM+RF+SR", "FvME"):
        _, _, st = encode_frame_inter(frames[1], ref, CodecConfig(mode=mode, step=4))
        e[mode] = st.residual_energy.sum()
        for b in st.block_sse:
            assert b.rf <= b.dm
            if b.fv is not None:
                assert b.fv <= b.sr
    assert e["FvME"] <= e["DM+RF+SR"]


@pytest.mark.parametrize("mode", MODES)
def test_rate_monotone_in_step(mode):
    frames = synth_sequence("rotating-shell", 3, 16, seed=6)
    rates = [sum(encode_sequence(frames, CodecConfig(mode=mode, step=s, search_window=2)).frame_bits)
             for s in (1, 2, 4, 8, 16, 32, 64)]
    assert rates == sorted(rates, reverse=True)


def test_imported_mvs_and_missing_counter():
    frames = synth_sequence("translating-texture-plane", 2, 32, seed=1)
    cfg = CodecConfig(mode="DM", step=4, mv_source={1: {}})
    res = encode_sequence(frames, cfg)
    st = res.stats[1]
    assert st.missing_mvs == st.mvs.__len__() > 0
    assert all(m.d == (0, 0, 0) for m, _ in st.mvs)
    table = {(bx, by, bz): IntegerMV((1, 0, 0)) for bx in range(2) for by in range(2) for bz in range(2)}
    res = encode_sequence(frames, CodecConfig(mode="DM", step=4, mv_source={1: table}))
    assert res.stats[1].missing_mvs == 0
    assert [m.d for m, _ in res.stats[1].mvs] == [(1, 0, 0)] * len(res.stats[1].mvs)
    assert _same(decode_sequence(res.data, frames), res.recon)


def test_rho_is_out_of_band():
    frames = synth_sequence("half-voxel-shift", 2, 16, seed=0)
    cfg = CodecConfig(mode="FvME", step=4, rho=1.0)
    res = encode_sequence(frames, cfg)
    assert _same(decode_sequence(res.data, frames, rho=1.0), res.recon)


def test_dump_hooks(tmp_path):
    frames = synth_sequence("half-voxel-shift", 2, 16, seed=0)
    encode_sequence(frames, CodecConfig(mode="FvME", step=8), dump_superres=str(tmp_path / "sr"),
                    dump_coeffs=str(tmp_path / "c.csv"))
    assert (tmp_path / "sr" / "superres_0001.ply").exists()
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "frame,channel,section,index,q"
    total = sum(len(f) for f in frames) * 3
    assert len(lines) - 1 == total


def test_y_only_error_switch():
    frames = _yuv(synth_sequence("half-voxel-shift", 2, 32, seed=2))
    _, _, st = encode_frame_inter(frames[1], frames[0], CodecConfig(mode="FvME", step=4, epred_channels="Y"))
    assert all(b.fv <= b.sr and b.rf <= b.dm for b in st.block_sse)
    res = encode_sequence(frames, CodecConfig(mode="FvME", step=4, epred_channels="Y"))
    assert _same(decode_sequence(res.data, frames), res.recon)
