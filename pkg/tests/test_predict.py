"""Prediction kernel tests: intra modes, sub-pel MC, IBC, BDPCM."""
import random

import numpy as np
import pytest

from tvc.kernels import predict as pr
from tvc.kernels.transforms import DEQUANT_LS


def refs_const(n, value):
    return np.full(2 * n + 1, value, dtype=np.uint16)


@pytest.mark.parametrize("mode", [pr.INTRA_PLANAR, pr.INTRA_DC, pr.INTRA_HOR, pr.INTRA_VER])
@pytest.mark.parametrize("n", [4, 8, 16, 32])
def test_intra_constant_refs_give_constant_block(mode, n):
    top = refs_const(n, 100)
    left = refs_const(n, 100)
    for fn in (pr.intra_predict_scalar, pr.intra_predict_vector):
        out = fn(mode, top, left, n, 8)
        assert (out == 100).all()


def test_intra_no_neighbors_gives_midvalue():
    # caller substitutes 1 << (bd-1) for unavailable refs
    n = 8
    for bd, mid in ((8, 128), (10, 512)):
        top = refs_const(n, mid)
        left = refs_const(n, mid)
        for mode in range(4):
            out = pr.intra_predict_vector(mode, top, left, n, bd)
            assert (out == mid).all()


def test_intra_scalar_vector_equal_random():
    rng = random.Random(3)
    for _ in range(150):
        n = rng.choice((4, 8, 16, 32))
        bd = rng.choice((8, 10))
        top = np.array([rng.randrange(1 << bd) for _ in range(2 * n + 1)], dtype=np.uint16)
        left = np.array([rng.randrange(1 << bd) for _ in range(2 * n + 1)], dtype=np.uint16)
        for mode in range(4):
            s = pr.intra_predict_scalar(mode, top, left, n, bd)
            v = pr.intra_predict_vector(mode, top, left, n, bd)
            assert (s == v).all(), (mode, n, bd)


def test_interp_constant_plane_any_mv():
    ref = np.full((64, 64), 50, dtype=np.uint8)
    for mvx in range(-5, 6, 3):
        for mvy in range(-5, 6, 3):
            out = pr.interp_luma_vector(ref, (mvx, mvy), 24, 24, 8, 8, 8)
            assert (out == 50).all(), (mvx, mvy)
    out = pr.interp_chroma_vector(ref, (13, -9), 24, 24, 8, 8, 8)
    assert (out == 50).all()


def test_interp_integer_mv_is_copy():
    rng = np.random.default_rng(8)
    ref = rng.integers(0, 256, size=(64, 64)).astype(np.uint8)
    out = pr.interp_luma_vector(ref, (8, -12), 20, 20, 16, 8, 8)
    assert (out == ref[17 : 25, 22 : 38]).all()


def test_interp_all_phases_scalar_vector_equal():
    rng = np.random.default_rng(9)
    for bd, dtype in ((8, np.uint8), (10, np.uint16)):
        ref = rng.integers(0, 1 << bd, size=(48, 48)).astype(dtype)
        for fy in range(4):
            for fx in range(4):
                mv = (4 * 2 + fx, -4 * 3 + fy)
                s = pr.interp_luma_scalar(ref, mv, 16, 16, 8, 8, bd)
                v = pr.interp_luma_vector(ref, mv, 16, 16, 8, 8, bd)
                assert (s == v).all(), (bd, fx, fy)
        for f8 in range(8):
            mv = (8 + f8, -16 + f8)
            s = pr.interp_chroma_scalar(ref, mv, 16, 16, 8, 8, bd)
            v = pr.interp_chroma_vector(ref, mv, 16, 16, 8, 8, bd)
            assert (s == v).all(), (bd, f8)


def test_interp_edge_replication():
    rng = np.random.default_rng(10)
    ref = rng.integers(0, 256, size=(32, 32)).astype(np.uint8)
    # block hanging over the top-left corner
    s = pr.interp_luma_scalar(ref, (-17, -13), 0, 0, 8, 8, 8)
    v = pr.interp_luma_vector(ref, (-17, -13), 0, 0, 8, 8, 8)
    assert (s == v).all()


def test_ibc_copy_matches_gather_oracle():
    rng = np.random.default_rng(11)
    plane = rng.integers(0, 256, size=(96, 96)).astype(np.uint8)
    r = random.Random(12)
    for _ in range(100):
        w = r.choice((8, 16))
        h = r.choice((8, 16))
        x = r.randrange(32, 80)
        y = r.randrange(32, 80)
        bv = (r.randrange(-32, -7), r.randrange(-32, 1))
        want = np.array([
            [plane[y + bv[1] + yy, x + bv[0] + xx] for xx in range(w)]
            for yy in range(h)
        ])
        got_s = pr.ibc_copy_scalar(plane, bv, x, y, w, h)
        got_v = pr.ibc_copy_vector(plane, bv, x, y, w, h)
        assert (got_s == want).all() and (got_v == want).all()


def test_bdpcm_zero_levels_is_prediction():
    pred = np.arange(16, dtype=np.int32).reshape(4, 4) + 50
    z = np.zeros((4, 4), dtype=np.int16)
    for d in (pr.DIR_HOR, pr.DIR_VER):
        for fn in (pr.bdpcm_reconstruct_scalar, pr.bdpcm_reconstruct_vector):
            assert (fn(z, d, 30, pred, 8) == pred).all()


def test_bdpcm_vertical_column_offset():
    # qlevels column [1,0,0,0]: whole column shares dequant(1)
    lv = np.zeros((4, 4), dtype=np.int16)
    lv[0, 0] = 1
    pred = np.full((4, 4), 100, dtype=np.int32)
    qp = 10
    d1 = (1 * DEQUANT_LS[qp % 6] << (qp // 6)) >> 4
    out = pr.bdpcm_reconstruct_vector(lv, pr.DIR_VER, qp, pred, 8)
    assert (out[:, 0] == 100 + d1).all()
    assert (out[:, 1:] == 100).all()


def test_bdpcm_matches_accumulate_oracle():
    rng = random.Random(21)
    for _ in range(60):
        n = rng.choice((4, 8))
        bd = rng.choice((8, 10))
        qp = rng.randrange(64)
        direction = rng.randrange(2)
        lv = np.array([[rng.randint(-10, 10) for _ in range(n)] for _ in range(n)],
                      dtype=np.int16)
        pred = np.array([[rng.randrange(1 << bd) for _ in range(n)] for _ in range(n)],
                        dtype=np.int32)
        # brute-force accumulate-then-dequant-then-add oracle
        want = np.empty((n, n), dtype=np.int64)
        for y in range(n):
            for x in range(n):
                if direction == pr.DIR_VER:
                    acc = int(lv[: y + 1, x].astype(np.int64).sum())
                else:
                    acc = int(lv[y, : x + 1].astype(np.int64).sum())
                d = (acc * DEQUANT_LS[qp % 6] << (qp // 6)) >> 4
                d = max(-(1 << 15), min((1 << 15) - 1, d))
                want[y, x] = max(0, min((1 << bd) - 1, int(pred[y, x]) + d))
        got_s = pr.bdpcm_reconstruct_scalar(lv, direction, qp, pred, bd)
        got_v = pr.bdpcm_reconstruct_vector(lv, direction, qp, pred, bd)
        assert (got_s == want).all() and (got_v == want).all()
