"""Command line interface: encode, decode, metrics, synth, sweep."""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import __version__
from .codec import MODES, CodecConfig, decode_sequence, encode_sequence
from .bitstream import read_bitstream
from .entropy import MV_CODECS
from .metrics import bpv, psnr_channel
from .motion import read_mv_file, write_mv_file
from .cloud import partition
from .ply import list_plys, load_ply, save_frame
from .superres import DEFAULT_RHO
from .sweep import bd_table, bd_table_csv, rd_sweep, rows_to_csv
from .synth import KINDS, synth_sequence

log = logging.getLogger("fracvox")


def _expand(paths: list[str]) -> list[str]:
    out = []
    for p in paths:
        out.extend(list_plys(p) if os.path.isdir(p) else [p])
    return out


def _load_frames(paths, depth=None):
    files = _expand(paths)
    if not files:
        raise SystemExit("no PLY files given")
    frames = [load_ply(f, depth) for f in files]
    if depth is None:
        d = max(f.depth for f in frames)
        frames = [f if f.depth == d else load_ply(p, d) for f, p in zip(frames, files)]
    return frames, files


def _add_codec_args(p):
    p.add_argument("--mode", choices=MODES, default="FvME")
    p.add_argument("--step", type=float, default=16.0, help="quantization step")
    p.add_argument("--gop", type=int, default=32)
    p.add_argument("--block-size", type=int, default=16)
    p.add_argument("--rho", type=float, default=DEFAULT_RHO, help="neighbor distance for fractional voxels")
    p.add_argument("--search-window", type=int, default=4)
    p.add_argument("--epred", choices=("YUV", "Y"), default="YUV", help="channels in the prediction error")
    p.add_argument("--mv-codec", choices=tuple(MV_CODECS), default="lzma")
    p.add_argument("--mv-import", metavar="PATTERN",
                   help="per-frame MV files, e.g. 'mvs/{frame:04d}.txt' (lines: bx by bz dx dy dz)")
    p.add_argument("--depth", type=int, help="override the inferred grid depth")


def _config(args) -> CodecConfig:
    cfg = CodecConfig(mode=args.mode, step=args.step, gop=args.gop, block_size=args.block_size,
                      rho=args.rho, search_window=args.search_window, epred_channels=args.epred,
                      mv_codec=args.mv_codec)
    return cfg


def _import_mvs(pattern: str, n_frames: int) -> dict:
    table = {}
    for t in range(n_frames):
        path = pattern.format(frame=t)
        if os.path.exists(path):
            table[t] = read_mv_file(path)
    return table


def cmd_encode(args) -> int:
    frames, _ = _load_frames(args.frames, args.depth)
    cfg = _config(args)
    if args.mv_import:
        from dataclasses import replace
        cfg = replace(cfg, mv_source=_import_mvs(args.mv_import, len(frames)))
    res = encode_sequence(frames, cfg, dump_superres=args.dump_superres, dump_coeffs=args.dump_coeffs)
    with open(args.output, "wb") as fh:
        fh.write(res.data)
    if args.mv_export:
        for st in res.stats:
            if st.kind == "inter":
                blocks = partition(frames[st.index], cfg.block_size)
                write_mv_file(args.mv_export.format(frame=st.index), blocks, [m for m, _ in st.mvs])
    if args.recon_dir:
        os.makedirs(args.recon_dir, exist_ok=True)
        for t, f in enumerate(res.recon):
            save_frame(os.path.join(args.recon_dir, f"recon_{t:04d}.ply"), f)
    counts = [len(f) for f in frames]
    print(f"frames={len(frames)} bytes={len(res.data)} bpv={bpv(res.frame_bits, counts):.6g} "
          f"psnr_y={psnr_channel(frames, res.recon, 0):.6g}")
    return 0


def cmd_decode(args) -> int:
    geometry, _ = _load_frames(args.geometry, args.depth)
    with open(args.stream, "rb") as fh:
        data = fh.read()
    frames = decode_sequence(data, geometry, args.rho)
    os.makedirs(args.output, exist_ok=True)
    for t, f in enumerate(frames):
        save_frame(os.path.join(args.output, f"recon_{t:04d}.ply"), f)
    print(f"decoded {len(frames)} frames into {args.output}")
    return 0


def cmd_metrics(args) -> int:
    orig, _ = _load_frames(args.original, args.depth)
    recon, _ = _load_frames(args.recon, orig[0].depth)
    out = {f"psnr_{c}": psnr_channel(orig, recon, i) for i, c in enumerate("yuv")}
    if args.stream:
        with open(args.stream, "rb") as fh:
            bst = read_bitstream(fh.read())
        out["bpv"] = bpv([8 * s for s in bst.frame_sizes], [len(f) for f in orig])
    for k, v in out.items():
        print(f"{k}={v:.6g}")
    return 0


def cmd_synth(args) -> int:
    frames = synth_sequence(args.kind, args.frames, args.grid, args.seed)
    os.makedirs(args.output, exist_ok=True)
    for t, f in enumerate(frames):
        save_frame(os.path.join(args.output, f"frame_{t:04d}.ply"), f, binary=not args.ascii)
    print(f"wrote {len(frames)} frames to {args.output}")
    return 0


def cmd_sweep(args) -> int:
    if args.input:
        frames, _ = _load_frames(args.input, args.depth)
    else:
        frames = synth_sequence(args.kind, args.frames, args.grid, args.seed)
    cfg = _config(args)
    rows = rd_sweep(frames, args.modes, args.steps, cfg, jobs=args.jobs)
    report = rows_to_csv(rows, timing=not args.no_timing)
    table = bd_table(rows, args.anchor) if args.anchor else None
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report)
    else:
        sys.stdout.write(report)
    if table is not None:
        bd = bd_table_csv(table, args.anchor)
        if args.bd_out:
            with open(args.bd_out, "w") as fh:
                fh.write(bd)
        else:
            sys.stdout.write("\n" + bd)
    return 0 if all(r.ok for r in rows) else 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracvox", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="encode a sequence of PLY frames")
    p.add_argument("frames", nargs="+", help="PLY files or directories (sorted by name)")
    p.add_argument("-o", "--output", required=True)
    _add_codec_args(p)
    p.add_argument("--mv-export", metavar="PATTERN", help="write the integer MVs used per inter frame")
    p.add_argument("--dump-superres", metavar="DIR", help="write super-resolved references as PLY")
    p.add_argument("--dump-coeffs", metavar="CSV", help="write quantized coefficients as CSV")
    p.add_argument("--recon-dir", metavar="DIR", help="write encoder-side reconstructions")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a stream given the frames' geometry")
    p.add_argument("stream")
    p.add_argument("--geometry", nargs="+", required=True, help="PLY files supplying voxel coordinates")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--rho", type=float, default=DEFAULT_RHO)
    p.add_argument("--depth", type=int)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("metrics", help="PSNR (and bpv) between two sequences")
    p.add_argument("--original", nargs="+", required=True)
    p.add_argument("--recon", nargs="+", required=True)
    p.add_argument("--stream", help="bitstream, to report bits per voxel")
    p.add_argument("--depth", type=int)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("synth", help="write a synthetic sequence")
    p.add_argument("--kind", choices=KINDS, default="half-voxel-shift")
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--grid", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ascii", action="store_true")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sweep", help="RD sweep over modes and steps, CSV report")
    p.add_argument("--input", nargs="+", help="PLY frames (default: a synthetic sequence)")
    p.add_argument("--kind", choices=KINDS, default="half-voxel-shift")
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--grid", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--modes", nargs="+", choices=MODES, default=list(MODES))
    p.add_argument("--steps", nargs="+", type=float, default=[4.0, 8.0, 16.0, 32.0])
    p.add_argument("--anchor", choices=MODES, help="mode to compute BD-rates against")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--bd-out", help="BD-rate CSV path (default stdout)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-timing", action="store_true", help="omit wall_time_s for reproducible reports")
    _add_codec_args(p)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
