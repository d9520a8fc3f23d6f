"""Time each hot kernel on its numba path and its numpy/Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N] [--quick]

Both paths are checked for identical output before timing. Numba
compilation happens in a warm-up call and is not counted.
"""
from __future__ import annotations

import argparse
import itertools
import timeit

import numpy as np

from fracvox import kernels as K
from fracvox._accel import HAS_NUMBA


def _box_case(rng, n_query, n_ref, window):
    query = 2 * rng.integers(0, 16, (n_query, 3))
    ref = 2 * np.unique(rng.integers(-window, 16 + window, (n_ref, 3)), axis=0)
    offs = np.array(sorted(itertools.product(range(-window, window + 1), repeat=3),
                           key=lambda d: (sum(v * v for v in d), d)), dtype=np.int64)
    lo, hi = np.zeros(3, np.int64), np.full(3, 32, np.int64)
    return query, ref, lo, hi, 2 * offs


def cases(quick: bool):
    rng = np.random.default_rng(0)
    scale = 4 if quick else 1
    q, r, lo, hi, offs = _box_case(rng, 400 // scale, 3000 // scale, 4 if not quick else 2)
    qy, ry = rng.uniform(0, 255, len(q)), rng.uniform(0, 255, len(r))
    fq, fr, flo, fhi, foffs = _box_case(rng, 400 // scale, 3000 // scale, 1)
    sym = np.abs(np.round(rng.laplace(0, 3, 200_000 // scale))).astype(np.int64)
    bits = K.rlgr_encode_u(sym, use_numba=False)

    yield ("nearest_in_box (27 shifts)",
           lambda: K._nearest_in_box_nb(fq, fr, flo, fhi, foffs),
           lambda: K._nearest_in_box_np(fq, fr, flo, fhi, foffs))
    yield (f"hybrid_search ({len(offs)} shifts)",
           lambda: K._hybrid_search_nb(q, qy, r, ry, lo, hi, offs, 2.0, 0.35),
           lambda: K._hybrid_search_np(q, qy, r, ry, lo, hi, offs, 2.0, 0.35))
    yield (f"rlgr encode ({len(sym)} symbols)",
           lambda: K.rlgr_encode_u(sym, use_numba=True),
           lambda: K.rlgr_encode_u(sym, use_numba=False))
    yield (f"rlgr decode ({len(sym)} symbols)",
           lambda: K.rlgr_decode_u(bits, len(sym), use_numba=True),
           lambda: K.rlgr_decode_u(bits, len(sym), use_numba=False))


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b)
    return a == b


def main(argv=None) -> list[tuple[str, float, float]]:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="small inputs, for smoke testing")
    args = ap.parse_args(argv)
    if not HAS_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rows = []
    print(f"{'kernel':34s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for name, nb, py in cases(args.quick):
        assert _same(nb(), py()), f"{name}: paths disagree"
        t_nb = min(timeit.repeat(nb, number=1, repeat=args.repeat)) * 1e3
        t_py = min(timeit.repeat(py, number=1, repeat=args.repeat)) * 1e3
        rows.append((name, t_nb, t_py))
        print(f"{name:34s} {t_nb:10.2f} {t_py:10.2f} {t_py / t_nb:7.1f}x")
    return rows


if __name__ == "__main__":
    main()
