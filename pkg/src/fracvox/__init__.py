"""Dynamic point-cloud color compression with half-voxel motion compensation."""

__version__ = "0.1.0"

from .cloud import Block, Frame, partition, rgb_to_yuv, yuv_to_rgb  # noqa: E402
from .codec import CodecConfig, decode_sequence, encode_sequence  # noqa: E402
from .metrics import RDPoint, bd_rate, bpv, psnr_y  # noqa: E402
from .motion import FractionalMV, IntegerMV, fvme_search, ivme_search, predict_block, refine_iv  # noqa: E402
from .ply import load_ply, write_ply  # noqa: E402
from .superres import SuperCloud, neighbor_pairs, superresolve  # noqa: E402
from .synth import synth_sequence  # noqa: E402

__all__ = [
    "Block", "CodecConfig", "FractionalMV", "Frame", "IntegerMV", "RDPoint", "SuperCloud",
    "bd_rate", "bpv", "decode_sequence", "encode_sequence", "fvme_search", "ivme_search",
    "load_ply", "neighbor_pairs", "partition", "predict_block", "psnr_y", "refine_iv",
    "rgb_to_yuv", "superresolve", "synth_sequence", "write_ply", "yuv_to_rgb",
]
