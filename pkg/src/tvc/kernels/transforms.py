"""Integer transforms and (de)quantization.

Every operation comes as a scalar reference (`*_scalar`, pure Python
arithmetic) and a lane-parallel variant (`*_vector`, whole-array numpy),
bit-identical per bit-depth path.  Inverse-path arithmetic is the decoding
contract; the forward path is the encoder mirror.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

KIND_DCT2 = 0
KIND_DST7 = 1
KIND_DCT8 = 2
TRANSFORM_SIZES = (4, 8, 16, 32)

# dequant/quant level scales, indexed by qp % 6
DEQUANT_LS = (40, 45, 51, 57, 64, 72)
QUANT_FS = (26214, 23302, 20560, 18396, 16384, 14564)

INT16_MIN, INT16_MAX = -(1 << 15), (1 << 15) - 1

# inverse: stage-1 shift 7, stage-2 shift (20 - bit_depth)
INV_SHIFT1 = 7
# forward: exact products through stage 1, single round-shift of
# (bit_depth - 1) at stage 2; the N-independent total keeps
# dequant(quant(fwd)) . inverse at identity scale for fine qp, and the
# int32 accumulators never overflow (|acc| <= 32 * 90 * 370k < 2^31)


def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5)) if x >= 0 else int(math.ceil(x - 0.5))


@lru_cache(maxsize=None)
def gen_transform_matrix(kind: int, n: int) -> np.ndarray:
    """N x N integer transform matrix with rows of L2 norm ~= 64."""
    assert n in TRANSFORM_SIZES
    t = np.zeros((n, n), dtype=np.int32)
    if kind == KIND_DCT2:
        for k in range(n):
            ck = 1.0 / math.sqrt(2.0) if k == 0 else 1.0
            for m in range(n):
                v = 64.0 * math.sqrt(2.0 / n) * ck * math.cos(
                    math.pi * k * (2 * m + 1) / (2 * n)
                )
                t[k, m] = _round_half_away(v)
    elif kind == KIND_DST7:
        for k in range(n):
            for m in range(n):
                v = 64.0 * (2.0 / math.sqrt(2 * n + 1)) * math.sin(
                    math.pi * (2 * m + 1) * (k + 1) / (2 * n + 1)
                )
                t[k, m] = _round_half_away(v)
    elif kind == KIND_DCT8:
        for k in range(n):
            for m in range(n):
                v = 64.0 * (2.0 / math.sqrt(2 * n + 1)) * math.cos(
                    math.pi * (2 * k + 1) * (2 * m + 1) / (4 * n + 2)
                )
                t[k, m] = _round_half_away(v)
    else:
        raise ValueError(f"unknown transform kind {kind}")
    t.setflags(write=False)
    return t


# ---------------------------------------------------------------------------
# dequant / quant


def dequant_scalar(levels: np.ndarray, qp: int) -> np.ndarray:
    ls = DEQUANT_LS[qp % 6]
    sh = qp // 6
    out = np.empty(levels.shape, dtype=np.int32)
    flat_in = levels.ravel()
    flat_out = out.ravel()
    for i in range(flat_in.size):
        d = (int(flat_in[i]) * ls << sh) >> 4
        flat_out[i] = min(INT16_MAX, max(INT16_MIN, d))
    return out


def dequant_vector(levels: np.ndarray, qp: int) -> np.ndarray:
    ls = DEQUANT_LS[qp % 6]
    sh = qp // 6
    d = (levels.astype(np.int64) * ls << sh) >> 4
    return np.clip(d, INT16_MIN, INT16_MAX).astype(np.int32)


def quant_scalar(coeffs: np.ndarray, qp: int, is_intra: bool) -> np.ndarray:
    fs = QUANT_FS[qp % 6]
    sh = 14 + qp // 6
    off = (1 << sh) // (3 if is_intra else 6)
    out = np.empty(coeffs.shape, dtype=np.int16)
    fi, fo = coeffs.ravel(), out.ravel()
    for i in range(fi.size):
        c = int(fi[i])
        q = min(INT16_MAX, (abs(c) * fs + off) >> sh)
        fo[i] = -q if c < 0 else q
    return out


def quant_vector(coeffs: np.ndarray, qp: int, is_intra: bool) -> np.ndarray:
    fs = QUANT_FS[qp % 6]
    sh = 14 + qp // 6
    off = (1 << sh) // (3 if is_intra else 6)
    c = coeffs.astype(np.int64)
    q = np.minimum(INT16_MAX, (np.abs(c) * fs + off) >> sh)
    return (np.sign(c) * q).astype(np.int16)


# ---------------------------------------------------------------------------
# inverse / forward transforms


def inverse_transform_scalar(coeffs: np.ndarray, kind_h: int, kind_v: int,
                             bit_depth: int) -> np.ndarray:
    n = coeffs.shape[0]
    tv = gen_transform_matrix(kind_v, n)
    th = gen_transform_matrix(kind_h, n)
    mid = [[0] * n for _ in range(n)]
    for m in range(n):
        for x in range(n):
            acc = 64
            for k in range(n):
                acc += int(tv[k, m]) * int(coeffs[k, x])
            v = acc >> INV_SHIFT1
            mid[m][x] = min(INT16_MAX, max(INT16_MIN, v))
    s2 = 20 - bit_depth
    rnd = 1 << (s2 - 1)
    out = np.empty((n, n), dtype=np.int32)
    for y in range(n):
        for x in range(n):
            acc = rnd
            for k in range(n):
                acc += mid[y][k] * int(th[k, x])
            out[y, x] = acc >> s2
    return out


def inverse_transform_vector(coeffs: np.ndarray, kind_h: int, kind_v: int,
                             bit_depth: int) -> np.ndarray:
    n = coeffs.shape[0]
    tv = gen_transform_matrix(kind_v, n)
    th = gen_transform_matrix(kind_h, n)
    mid = (tv.T @ coeffs.astype(np.int32) + 64) >> INV_SHIFT1
    np.clip(mid, INT16_MIN, INT16_MAX, out=mid)
    s2 = 20 - bit_depth
    return (mid @ th + (1 << (s2 - 1))) >> s2


def forward_transform_scalar(resid: np.ndarray, kind_h: int, kind_v: int,
                             bit_depth: int) -> np.ndarray:
    n = resid.shape[0]
    th = gen_transform_matrix(kind_h, n)
    tv = gen_transform_matrix(kind_v, n)
    mid = [[0] * n for _ in range(n)]
    for y in range(n):
        for k in range(n):
            acc = 0
            for m in range(n):
                acc += int(resid[y, m]) * int(th[k, m])
            mid[y][k] = acc
    s2 = bit_depth - 1
    r2 = 1 << (s2 - 1)
    out = np.empty((n, n), dtype=np.int16)
    for k in range(n):
        for l in range(n):
            acc = r2
            for y in range(n):
                acc += int(tv[k, y]) * mid[y][l]
            v = acc >> s2
            out[k, l] = min(INT16_MAX, max(INT16_MIN, v))
    return out


def forward_transform_vector(resid: np.ndarray, kind_h: int, kind_v: int,
                             bit_depth: int) -> np.ndarray:
    n = resid.shape[0]
    th = gen_transform_matrix(kind_h, n)
    tv = gen_transform_matrix(kind_v, n)
    mid = resid.astype(np.int64) @ th.T.astype(np.int64)
    s2 = bit_depth - 1
    out = (tv.astype(np.int64) @ mid + (1 << (s2 - 1))) >> s2
    return np.clip(out, INT16_MIN, INT16_MAX).astype(np.int16)


def mts_kinds(mts_idx: int) -> tuple[int, int]:
    """mts_idx 0: DCT2/DCT2, 1: DST7/DST7, 2: DCT8/DCT8 (horizontal, vertical)."""
    kind = (KIND_DCT2, KIND_DST7, KIND_DCT8)[mts_idx]
    return kind, kind
