import hashlib
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracvox import kernels as K
from fracvox._accel import HAS_NUMBA

needs_numba = pytest.mark.skipif(not HAS_NUMBA, reason="numba not installed")


def _brute_nearest(query, ref, lo, hi, offsets):
    C, n = len(offsets), len(query)
    idx = np.full((C, n), -1)
    d2 = np.full((C, n), -1)
    for c, off in enumerate(offsets):
        inside = [j for j in range(len(ref)) if np.all(ref[j] >= lo - off) and np.all(ref[j] < hi - off)]
        if not inside:
            continue
        for i, q in enumerate(query):
            best = min(inside, key=lambda j: (int(((q - off - ref[j]) ** 2).sum()), j))
            idx[c, i] = best
            d2[c, i] = ((q - off - ref[best]) ** 2).sum()
    return idx, d2


def _case(seed, n=12, m=40):
    rng = np.random.default_rng(seed)
    query = rng.integers(0, 16, (n, 3))
    ref = np.unique(rng.integers(-6, 22, (m, 3)), axis=0)
    lo, hi = np.zeros(3, int), np.full(3, 16)
    offsets = rng.integers(-6, 7, (9, 3))
    return query, ref, lo, hi, offsets


@given(st.integers(0, 2**32 - 1))
def test_nearest_in_box_matches_brute_force(seed):
    args = _case(seed)
    want = _brute_nearest(*args)
    for fn in (K._nearest_in_box_np, K._nearest_in_box_nb):
        idx, d2 = fn(*[np.ascontiguousarray(a, dtype=np.int64) for a in args])
        assert np.array_equal(idx, want[0]) and np.array_equal(d2, want[1])


def test_nearest_in_box_empty_ref():
    q = np.zeros((3, 3), int)
    idx, d2 = K.nearest_in_box(q, np.zeros((0, 3), int), np.zeros(3), np.full(3, 4), np.zeros((2, 3)))
    assert idx.shape == (2, 3) and np.all(idx == -1)


@needs_numba
@given(st.integers(0, 2**32 - 1))
def test_hybrid_search_paths_agree(seed):
    rng = np.random.default_rng(seed)
    query, ref, lo, hi, offsets = _case(seed, n=20, m=60)
    qy = rng.uniform(0, 255, len(query))
    ry = rng.uniform(0, 255, len(ref))
    conv = [np.ascontiguousarray(a, dtype=np.int64) for a in (query, ref, lo, hi, offsets)]
    a = K._hybrid_search_np(conv[0], qy, conv[1], ry, conv[2], conv[3], conv[4], 1.0, 0.35)
    b = K._hybrid_search_nb(conv[0], qy, conv[1], ry, conv[2], conv[3], conv[4], 1.0, 0.35)
    assert (int(a[0]), a[1], a[2]) == (int(b[0]), b[1], b[2])


def test_hybrid_search_tie_prefers_earlier_candidate():
    query = np.array([[0, 0, 0]])
    ref = np.array([[0, 0, 0]])
    # both candidates see the same single voxel at identical distance
    offsets = np.array([[1, 0, 0], [-1, 0, 0]])
    c, g, col = K.hybrid_search(query, [5.0], ref, [5.0], [-4] * 3, [4] * 3, offsets, scale=1.0)
    assert c == 0 and g == 1.0 and col == 0.0


@needs_numba
@given(st.lists(st.integers(0, 2**32 - 1), max_size=300))
def test_rlgr_paths_bit_identical(u):
    u = np.array(u, dtype=np.int64)
    a = K.rlgr_encode_u(u, use_numba=False)
    b = K.rlgr_encode_u(u, use_numba=True)
    assert np.array_equal(a, b)
    for flag in (False, True):
        out, used = K.rlgr_decode_u(a, len(u), use_numba=flag)
        assert used == len(a) and np.array_equal(out, u)


_SCRIPT = """
import hashlib, sys
from fracvox import CodecConfig, encode_sequence, synth_sequence
from fracvox._accel import backend
frames = synth_sequence("rotating-shell", 3, 32, seed=4)
out = [backend()]
for mode in ("DM", "FvME", "intra-RAHT"):
    res = encode_sequence(frames, CodecConfig(mode=mode, step=8, search_window=2))
    out.append(hashlib.sha256(res.data).hexdigest())
print(" ".join(out))
"""


@needs_numba
def test_env_flag_selects_fallback_with_identical_streams():
    runs = {}
    for flag in ("0", "1"):
        env = dict(os.environ, FRACVOX_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", _SCRIPT], env=env, capture_output=True, text=True, check=True)
        backend, *digests = out.stdout.split()
        runs[backend] = digests
    assert set(runs) == {"numba", "numpy"}
    assert runs["numba"] == runs["numpy"]
