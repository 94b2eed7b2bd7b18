"""In-loop filter kernels: deblocking, SAO, ALF, CCALF, LMCS inverse mapping.

Deblocking operates on unrolled edge-sample lists so the arithmetic kernel
stays separate from boundary-strength metadata construction.  SAO/ALF/CCALF
take a source plane plus a region and return the filtered block; callers
write results into a distinct destination plane (filters never run in
place across stage boundaries).
"""
from __future__ import annotations

import numpy as np

SAO_OFF = 0
SAO_BAND = 1
SAO_EDGE = 2

# (dy, dx) neighbor pairs per edge-offset class: 0, 90, 45, 135 degrees
SAO_EDGE_NEIGHBORS = (
    ((0, -1), (0, 1)),
    ((-1, 0), (1, 0)),
    ((-1, 1), (1, -1)),
    ((-1, -1), (1, 1)),
)

# 5x5 diamond: 6 symmetric pairs (dy, dx) + derived center
ALF_PAIR_OFFSETS = ((-2, 0), (-1, -1), (-1, 0), (-1, 1), (0, -2), (0, -1))

# collocated-luma tap offsets for CCALF, (dy, dx) around luma (2y, 2x)
CCALF_OFFSETS = ((-1, 0), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1), (2, 0), (-1, -1))

LMCS_PIECES = 16


def _smax(bit_depth: int) -> int:
    return (1 << bit_depth) - 1


def deblock_params(qp: int, bit_depth: int) -> tuple[int, int]:
    beta = max(0, 2 * (qp - 16)) << (bit_depth - 8)
    tc = max(1, (qp - 10) >> 2) << (bit_depth - 8)
    return beta, tc


# ---------------------------------------------------------------------------
# deblocking


def deblock_edge_scalar(plane: np.ndarray, ys: np.ndarray, xs: np.ndarray,
                        bs: np.ndarray, qp: int, vertical: bool,
                        bit_depth: int) -> None:
    """Filter one sample pair per (ys, xs) entry, in place.

    For vertical edges the entry (y, x) separates columns x-1 | x; for
    horizontal edges it separates rows y-1 | y.
    """
    beta, tc = deblock_params(qp, bit_depth)
    smax = _smax(bit_depth)
    for i in range(len(ys)):
        if bs[i] == 0:
            continue
        y, x = int(ys[i]), int(xs[i])
        if vertical:
            p1, p0 = int(plane[y, x - 2]), int(plane[y, x - 1])
            q0, q1 = int(plane[y, x]), int(plane[y, x + 1])
        else:
            p1, p0 = int(plane[y - 2, x]), int(plane[y - 1, x])
            q0, q1 = int(plane[y, x]), int(plane[y + 1, x])
        if abs(p0 - q0) >= beta:
            continue
        delta = ((q0 - p0) * 4 + (p1 - q1) + 4) >> 3
        delta = max(-tc, min(tc, delta))
        np0 = max(0, min(smax, p0 + delta))
        nq0 = max(0, min(smax, q0 - delta))
        if vertical:
            plane[y, x - 1] = np0
            plane[y, x] = nq0
        else:
            plane[y - 1, x] = np0
            plane[y, x] = nq0


def deblock_edge_vector(plane: np.ndarray, ys: np.ndarray, xs: np.ndarray,
                        bs: np.ndarray, qp: int, vertical: bool,
                        bit_depth: int) -> None:
    if len(ys) == 0:
        return
    beta, tc = deblock_params(qp, bit_depth)
    if vertical:
        p1 = plane[ys, xs - 2].astype(np.int32)
        p0 = plane[ys, xs - 1].astype(np.int32)
        q0 = plane[ys, xs].astype(np.int32)
        q1 = plane[ys, xs + 1].astype(np.int32)
    else:
        p1 = plane[ys - 2, xs].astype(np.int32)
        p0 = plane[ys - 1, xs].astype(np.int32)
        q0 = plane[ys, xs].astype(np.int32)
        q1 = plane[ys + 1, xs].astype(np.int32)
    active = (bs > 0) & (np.abs(p0 - q0) < beta)
    delta = ((q0 - p0) * 4 + (p1 - q1) + 4) >> 3
    np.clip(delta, -tc, tc, out=delta)
    smax = _smax(bit_depth)
    np0 = np.clip(p0 + delta, 0, smax)
    nq0 = np.clip(q0 - delta, 0, smax)
    np0 = np.where(active, np0, p0)
    nq0 = np.where(active, nq0, q0)
    if vertical:
        plane[ys, xs - 1] = np0
        plane[ys, xs] = nq0
    else:
        plane[ys - 1, xs] = np0
        plane[ys, xs] = nq0


# ---------------------------------------------------------------------------
# SAO


def sao_block_scalar(src: np.ndarray, x0: int, y0: int, w: int, h: int,
                     mode: int, band_start: int, eo_class: int,
                     offsets, bit_depth: int) -> np.ndarray:
    smax = _smax(bit_depth)
    ph, pw = src.shape
    out = np.empty((h, w), dtype=np.int32)
    if mode == SAO_OFF:
        for y in range(h):
            for x in range(w):
                out[y, x] = int(src[y0 + y, x0 + x])
        return out
    if mode == SAO_BAND:
        shift = bit_depth - 5
        for y in range(h):
            for x in range(w):
                s = int(src[y0 + y, x0 + x])
                band = s >> shift
                d = (band - band_start) % 32
                s2 = s + (offsets[d] if d < 4 else 0)
                out[y, x] = max(0, min(smax, s2))
        return out
    (dya, dxa), (dyb, dxb) = SAO_EDGE_NEIGHBORS[eo_class]
    for y in range(h):
        for x in range(w):
            py, px = y0 + y, x0 + x
            s = int(src[py, px])
            ay, ax = py + dya, px + dxa
            by, bx = py + dyb, px + dxb
            if not (0 <= ay < ph and 0 <= ax < pw and 0 <= by < ph and 0 <= bx < pw):
                out[y, x] = s           # border: neighbor missing, unfiltered
                continue
            a, b = int(src[ay, ax]), int(src[by, bx])
            c = (s > a) - (s < a) + (s > b) - (s < b)
            if c == -2:
                s += offsets[0]
            elif c == -1:
                s += offsets[1]
            elif c == 1:
                s += offsets[2]
            elif c == 2:
                s += offsets[3]
            out[y, x] = max(0, min(smax, s))
    return out


def sao_block_vector(src: np.ndarray, x0: int, y0: int, w: int, h: int,
                     mode: int, band_start: int, eo_class: int,
                     offsets, bit_depth: int) -> np.ndarray:
    smax = _smax(bit_depth)
    ph, pw = src.shape
    block = src[y0 : y0 + h, x0 : x0 + w].astype(np.int32)
    if mode == SAO_OFF:
        return block
    if mode == SAO_BAND:
        lut = np.zeros(32, dtype=np.int32)
        for i in range(4):
            lut[(band_start + i) % 32] = offsets[i]
        idx = block >> (bit_depth - 5)
        return np.clip(block + lut[idx], 0, smax)
    (dya, dxa), (dyb, dxb) = SAO_EDGE_NEIGHBORS[eo_class]
    ys = np.arange(y0, y0 + h)[:, None]
    xs = np.arange(x0, x0 + w)[None, :]
    ay, ax = ys + dya, xs + dxa
    by, bx = ys + dyb, xs + dxb
    valid = (ay >= 0) & (ay < ph) & (ax >= 0) & (ax < pw) \
        & (by >= 0) & (by < ph) & (bx >= 0) & (bx < pw)
    a = src[np.clip(ay, 0, ph - 1), np.clip(ax, 0, pw - 1)].astype(np.int32)
    b = src[np.clip(by, 0, ph - 1), np.clip(bx, 0, pw - 1)].astype(np.int32)
    cat = np.sign(block - a) + np.sign(block - b)
    lut = np.array([offsets[0], offsets[1], 0, offsets[2], offsets[3]], dtype=np.int32)
    adj = np.clip(block + lut[cat + 2], 0, smax)
    return np.where(valid, adj, block)


# ---------------------------------------------------------------------------
# ALF (linear 5x5 diamond, luma)


def alf_center_coeff(pairs) -> int:
    return 128 - 2 * int(sum(pairs))


def alf_block_scalar(src: np.ndarray, x0: int, y0: int, w: int, h: int,
                     pairs, bit_depth: int) -> np.ndarray:
    smax = _smax(bit_depth)
    ph, pw = src.shape
    cc = alf_center_coeff(pairs)
    out = np.empty((h, w), dtype=np.int32)
    for y in range(h):
        for x in range(w):
            py, px = y0 + y, x0 + x
            acc = 64 + cc * int(src[py, px])
            for (dy, dx), c in zip(ALF_PAIR_OFFSETS, pairs):
                ay = min(ph - 1, max(0, py + dy))
                ax = min(pw - 1, max(0, px + dx))
                my = min(ph - 1, max(0, py - dy))
                mx = min(pw - 1, max(0, px - dx))
                acc += int(c) * (int(src[ay, ax]) + int(src[my, mx]))
            out[y, x] = max(0, min(smax, acc >> 7))
    return out


def alf_block_vector(src: np.ndarray, x0: int, y0: int, w: int, h: int,
                     pairs, bit_depth: int) -> np.ndarray:
    ph, pw = src.shape
    cc = alf_center_coeff(pairs)
    ys = np.arange(y0, y0 + h)[:, None]
    xs = np.arange(x0, x0 + w)[None, :]
    acc = 64 + cc * src[y0 : y0 + h, x0 : x0 + w].astype(np.int32)
    for (dy, dx), c in zip(ALF_PAIR_OFFSETS, pairs):
        if c == 0:
            continue
        a = src[np.clip(ys + dy, 0, ph - 1), np.clip(xs + dx, 0, pw - 1)].astype(np.int32)
        m = src[np.clip(ys - dy, 0, ph - 1), np.clip(xs - dx, 0, pw - 1)].astype(np.int32)
        acc += int(c) * (a + m)
    return np.clip(acc >> 7, 0, _smax(bit_depth))


# ---------------------------------------------------------------------------
# CCALF (chroma refinement from collocated ALF-filtered luma)


def ccalf_block_scalar(chroma: np.ndarray, luma: np.ndarray, x0: int, y0: int,
                       w: int, h: int, coeffs, bit_depth: int) -> np.ndarray:
    smax = _smax(bit_depth)
    lh, lw = luma.shape
    out = np.empty((h, w), dtype=np.int32)
    for y in range(h):
        for x in range(w):
            cy, cx = y0 + y, x0 + x
            ly, lx = 2 * cy, 2 * cx
            lc = int(luma[min(lh - 1, ly), min(lw - 1, lx)])
            acc = 32
            for (dy, dx), c in zip(CCALF_OFFSETS, coeffs):
                sy = min(lh - 1, max(0, ly + dy))
                sx = min(lw - 1, max(0, lx + dx))
                acc += int(c) * (int(luma[sy, sx]) - lc)
            delta = acc >> 6
            out[y, x] = max(0, min(smax, int(chroma[cy, cx]) + delta))
    return out


def ccalf_block_vector(chroma: np.ndarray, luma: np.ndarray, x0: int, y0: int,
                       w: int, h: int, coeffs, bit_depth: int) -> np.ndarray:
    """16-bit accumulation on the 8-bit path, 32-bit on the 10-bit path."""
    lh, lw = luma.shape
    acc_t = np.int16 if bit_depth == 8 else np.int32
    ly = np.minimum(2 * np.arange(y0, y0 + h), lh - 1)[:, None]
    lx = np.minimum(2 * np.arange(x0, x0 + w), lw - 1)[None, :]
    lc = luma[ly, lx].astype(acc_t)
    acc = np.full((h, w), 32, dtype=acc_t)
    for (dy, dx), c in zip(CCALF_OFFSETS, coeffs):
        if c == 0:
            continue
        sy = np.clip(ly + dy, 0, lh - 1)
        sx = np.clip(lx + dx, 0, lw - 1)
        acc += acc_t(c) * (luma[sy, sx].astype(acc_t) - lc)
    delta = (acc >> 6).astype(np.int32)
    out = chroma[y0 : y0 + h, x0 : x0 + w].astype(np.int32) + delta
    return np.clip(out, 0, _smax(bit_depth))


def ccalf_block_wide(chroma: np.ndarray, luma: np.ndarray, x0: int, y0: int,
                     w: int, h: int, coeffs, bit_depth: int) -> np.ndarray:
    """32-bit-accumulator oracle for the 8-bit path equivalence check."""
    lh, lw = luma.shape
    ly = np.minimum(2 * np.arange(y0, y0 + h), lh - 1)[:, None]
    lx = np.minimum(2 * np.arange(x0, x0 + w), lw - 1)[None, :]
    lc = luma[ly, lx].astype(np.int32)
    acc = np.full((h, w), 32, dtype=np.int32)
    for (dy, dx), c in zip(CCALF_OFFSETS, coeffs):
        if c == 0:
            continue
        sy = np.clip(ly + dy, 0, lh - 1)
        sx = np.clip(lx + dx, 0, lw - 1)
        acc += int(c) * (luma[sy, sx].astype(np.int32) - lc)
    out = chroma[y0 : y0 + h, x0 : x0 + w].astype(np.int32) + (acc >> 6)
    return np.clip(out, 0, _smax(bit_depth))


# ---------------------------------------------------------------------------
# LMCS


def lmcs_build_inverse(cw, bit_depth: int) -> np.ndarray:
    """Inverse luma mapping LUT from 16 codeword counts summing to 2^bit_depth."""
    total = 1 << bit_depth
    piece = total // LMCS_PIECES
    assert len(cw) == LMCS_PIECES and sum(cw) == total and min(cw) >= 1
    input_pivot = [i * piece for i in range(LMCS_PIECES + 1)]
    mapped_pivot = [0]
    for c in cw:
        mapped_pivot.append(mapped_pivot[-1] + int(c))
    lut = np.empty(total, dtype=np.int32)
    j = 0
    for y in range(total):
        while y >= mapped_pivot[j + 1]:
            j += 1
        x = input_pivot[j] + (((y - mapped_pivot[j]) * (piece << 11) // cw[j] + 1024) >> 11)
        lut[y] = max(0, min(total - 1, x))
    return lut


def lmcs_apply_scalar(lut: np.ndarray, block: np.ndarray) -> np.ndarray:
    h, w = block.shape
    out = np.empty((h, w), dtype=np.int32)
    for y in range(h):
        for x in range(w):
            out[y, x] = int(lut[int(block[y, x])])
    return out


def lmcs_apply_vector(lut: np.ndarray, block: np.ndarray) -> np.ndarray:
    return lut[block.astype(np.intp)].astype(np.int32)
