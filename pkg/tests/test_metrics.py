import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracvox.cloud import YUV, Frame
from fracvox.errors import DomainError
from fracvox.metrics import RDPoint, bd_rate, bpv, psnr_channel, psnr_y

from _util import random_frame

FIXTURE_ANCHOR = [RDPoint(0.5, 30.1), RDPoint(1.1, 33.6), RDPoint(2.3, 37.0), RDPoint(4.9, 40.4)]
FIXTURE_TEST = [RDPoint(0.4, 30.9), RDPoint(0.8, 34.0), RDPoint(1.7, 37.9), RDPoint(3.2, 41.2)]


def _frame_with_y(y):
    n = len(y)
    coords = np.stack([np.arange(n), np.zeros(n), np.zeros(n)], 1).astype(int)
    attrs = np.full((n, 3), 128.0)
    attrs[:, 0] = y
    return Frame(coords, attrs, 8, YUV)


def trapezoid_bd(anchor, test, samples=200001):
    """Independent oracle: own least-squares cubic fit, dense trapezoid integration."""
    def fit(points):
        q = np.array([p.psnr_y for p in points])
        r = np.log10([p.bpv for p in points])
        V = np.vander(q, 4)
        coef, *_ = np.linalg.lstsq(V, r, rcond=None)
        return coef, q.min(), q.max()
    ca, la, ha = fit(anchor)
    ct, lt, ht = fit(test)
    lo, hi = max(la, lt), min(ha, ht)
    x = np.linspace(lo, hi, samples)
    diff = np.trapezoid(np.polyval(ct, x) - np.polyval(ca, x), x) / (hi - lo)
    return (10 ** diff - 1) * 100


def test_psnr_identical_is_inf():
    f = random_frame(np.random.default_rng(0), 20)
    assert psnr_y([f], [f]) == math.inf


def test_psnr_full_scale_error_is_zero_db():
    a, b = _frame_with_y(np.zeros(10)), _frame_with_y(np.full(10, 255.0))
    assert psnr_y([a], [b]) == 0.0


def test_psnr_mse_averaged_inside_log():
    # frame MSEs 1 and 3
    a1, b1 = _frame_with_y(np.zeros(4)), _frame_with_y(np.ones(4))
    a2, b2 = _frame_with_y(np.zeros(9)), _frame_with_y(np.full(9, math.sqrt(3)))
    got = psnr_y([a1, a2], [b1, b2])
    # (1/2)(1 + 3) / 255^2 -> 45.12 dB; the often-quoted 48.13 dB is mean MSE 1
    assert abs(got - 45.1205) < 0.01
    assert got == pytest.approx(-10 * math.log10(2 / 255 ** 2), abs=1e-12)
    assert abs(psnr_y([a1, a1], [b1, b1]) - 48.13) < 0.01


@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_psnr_matches_double_loop(seed, t):
    rng = np.random.default_rng(seed)
    orig = [random_frame(rng, int(rng.integers(1, 30)), grid=8, depth=3) for _ in range(t)]
    rec = [f.with_attrs(f.attrs + rng.normal(0, 5, f.attrs.shape)) for f in orig]
    for ch in range(3):
        acc = 0.0
        for a, b in zip(orig, rec):
            e = 0.0
            for i in range(len(a)):
                e += (a.attrs[i, ch] - b.attrs[i, ch]) ** 2
            acc += e / (255 ** 2 * len(a))
        assert abs(psnr_channel(orig, rec, ch) - (-10 * math.log10(acc / t))) < 1e-9


def test_psnr_geometry_mismatch():
    a = random_frame(np.random.default_rng(0), 10)
    b = random_frame(np.random.default_rng(1), 10)
    with pytest.raises(DomainError):
        psnr_y([a], [b])


def test_bpv_examples():
    assert bpv([100], [100]) == 1.0
    assert bpv([100, 300], [100, 100]) == 2.0
    with pytest.raises(DomainError):
        bpv([1], [0])
    with pytest.raises(DomainError):
        bpv([1, 2], [3])


@given(st.lists(st.tuples(st.integers(0, 10**6), st.integers(1, 10**5)), min_size=1, max_size=10), st.randoms())
def test_bpv_pooling_is_order_free(pairs, rnd):
    b, n = zip(*pairs)
    perm = list(range(len(b)))
    rnd.shuffle(perm)
    assert bpv([b[i] for i in perm], [n[i] for i in perm]) == pytest.approx(bpv(b, n), rel=1e-12)


def test_bd_identity_and_doubling():
    assert abs(bd_rate(FIXTURE_ANCHOR, FIXTURE_ANCHOR)) < 1e-9
    doubled = [RDPoint(2 * p.bpv, p.psnr_y) for p in FIXTURE_ANCHOR]
    assert bd_rate(FIXTURE_ANCHOR, doubled) == pytest.approx(100.0, abs=1e-9)


def test_bd_fixture_against_trapezoid():
    got = bd_rate(FIXTURE_ANCHOR, FIXTURE_TEST)
    want = trapezoid_bd(FIXTURE_ANCHOR, FIXTURE_TEST)
    assert got < 0
    assert abs(got - want) <= 1e-3 * abs(want)


def test_bd_antisymmetry():
    ab = bd_rate(FIXTURE_ANCHOR, FIXTURE_TEST)
    ba = bd_rate(FIXTURE_TEST, FIXTURE_ANCHOR)
    assert abs(ab - (-ba / (1 + ba / 100))) < 0.5


def test_bd_errors():
    with pytest.raises(DomainError):
        bd_rate(FIXTURE_ANCHOR[:3], FIXTURE_TEST)
    far = [RDPoint(p.bpv, p.psnr_y + 50) for p in FIXTURE_TEST]
    with pytest.raises(DomainError):
        bd_rate(FIXTURE_ANCHOR, far)
    flat = [RDPoint(1.0, 30.0)] * 4
    with pytest.raises(DomainError):
        bd_rate(flat, FIXTURE_TEST)
