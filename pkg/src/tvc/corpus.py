"""Seeded synthetic video sources for tests and benchmarks.

All generators are counter-based integer arithmetic (a splitmix64-style
mix of seed/frame/position), so the produced samples are identical across
platforms and library versions; golden stream hashes depend on this.
"""
from __future__ import annotations

import numpy as np

MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _mix(x: np.ndarray) -> np.ndarray:
    x = (x + GOLDEN).astype(np.uint64)
    x ^= x >> np.uint64(30)
    x *= MIX1
    x ^= x >> np.uint64(27)
    x *= MIX2
    x ^= x >> np.uint64(31)
    return x


def _noise_grid(seed: int, frame: int, h: int, w: int, shift_y=0, shift_x=0) -> np.ndarray:
    """uint64 hash lattice, one value per sample position."""
    ys = (np.arange(h, dtype=np.uint64) + np.uint64(shift_y & 0xFFFF))[:, None]
    xs = (np.arange(w, dtype=np.uint64) + np.uint64(shift_x & 0xFFFF))[None, :]
    base = np.uint64(seed & 0xFFFFFFFF) * np.uint64(0x100000001)
    cell = ys * np.uint64(0x10003) + xs + np.uint64(frame) * np.uint64(0x7F4A7C15)
    return _mix(cell ^ base)


def _to_samples(grid: np.ndarray, bit_depth: int) -> np.ndarray:
    vals = (grid >> np.uint64(40)).astype(np.uint32) & np.uint32((1 << bit_depth) - 1)
    return vals.astype(np.uint16 if bit_depth == 10 else np.uint8)


def _box3(a: np.ndarray) -> np.ndarray:
    """3x3 integer box blur with edge replication."""
    p = np.pad(a.astype(np.uint32), 1, mode="edge")
    s = (p[:-2, :-2] + p[:-2, 1:-1] + p[:-2, 2:]
         + p[1:-1, :-2] + p[1:-1, 1:-1] + p[1:-1, 2:]
         + p[2:, :-2] + p[2:, 1:-1] + p[2:, 2:])
    return s // 9


def _chroma_of(y: np.ndarray, seed: int, frame: int, bit_depth: int):
    h, w = y.shape
    mid = 1 << (bit_depth - 1)
    base = _to_samples(_noise_grid(seed ^ 0x5555, frame // 4, h // 2, w // 2), bit_depth)
    u = ((base.astype(np.uint32) + 3 * mid) // 4)
    v = ((mid * 3 - base.astype(np.int32) // 2 + mid) // 2).clip(0, (1 << bit_depth) - 1)
    dtype = np.uint16 if bit_depth == 10 else np.uint8
    return u.astype(dtype), v.astype(dtype)


def _assemble(y, seed, frame, bit_depth, chroma_format):
    if chroma_format == 0:
        return [y]
    u, v = _chroma_of(y, seed, frame, bit_depth)
    return [y, u, v]


def gradient(width, height, frames, bit_depth=8, chroma_format=1, seed=1):
    """Smooth moving diagonal gradient: low-entropy, filter-friendly.

    The ramp reflects rather than wrapping, so frames stay free of hard
    edges; chroma is a smooth counter-ramp derived from the same field.
    """
    out = []
    smax = (1 << bit_depth) - 1
    dtype = np.uint16 if bit_depth == 10 else np.uint8
    ys = np.arange(height, dtype=np.int64)[:, None]
    xs = np.arange(width, dtype=np.int64)[None, :]
    period = 2 * (smax + 1)
    for f in range(frames):
        v = (xs * 3 + ys * 2) * smax // (3 * width + 2 * height) + f * 7 + (seed % 97)
        v = v % period
        v = np.where(v > smax, period - 1 - v, v)
        y = v.astype(dtype)
        if chroma_format == 0:
            out.append([y])
            continue
        half = v[::2, ::2]
        u = ((half + smax) // 3).astype(dtype)
        vv = ((2 * smax - half) * 2 // 5).astype(dtype)
        out.append([y, u, vv])
    return out


def moving_texture(width, height, frames, bit_depth=8, chroma_format=1, seed=2):
    """Smoothed noise translated by (2, 1) px/frame: natural-content stand-in."""
    out = []
    dtype = np.uint16 if bit_depth == 10 else np.uint8
    for f in range(frames):
        raw = _noise_grid(seed, 0, height, width, shift_y=f, shift_x=2 * f)
        y = _box3(_box3(_to_samples(raw, bit_depth)))
        out.append(_assemble(y.astype(dtype), seed, f, bit_depth, chroma_format))
    return out


def screen_content(width, height, frames, bit_depth=8, chroma_format=1, seed=3):
    """Flat background, repeated glyph-like blocks, hard edges: IBC/BDPCM food."""
    smax = (1 << bit_depth) - 1
    bg = (smax * 15) // 16
    fg = smax // 16
    dtype = np.uint16 if bit_depth == 10 else np.uint8
    glyph_h, glyph_w = 12, 8
    gl = _to_samples(_noise_grid(seed, 0, glyph_h, glyph_w), 8)
    glyphs = [(gl >> i) & 1 for i in range(3)]
    out = []
    for f in range(frames):
        y = np.full((height, width), bg, dtype=np.int32)
        scroll = (f * 4) % max(1, height)
        for row in range(2, height - glyph_h - 2, glyph_h + 6):
            for k, col in enumerate(range(4, width - glyph_w - 4, glyph_w + 4)):
                g = glyphs[(row // 18 + k) % 3]
                rr = (row + scroll) % max(1, height - glyph_h)
                y[rr : rr + glyph_h, col : col + glyph_w] = np.where(
                    g > 0, fg, bg)
        band = (np.arange(width) * smax // max(1, width)).astype(np.int32)
        y[height - 8 :, :] = band[None, :]
        out.append(_assemble(y.astype(dtype), seed, f, bit_depth, chroma_format))
    return out


def noise(width, height, frames, bit_depth=8, chroma_format=1, seed=4,
          amplitude=None):
    """Raw hash noise, optionally reduced to +-amplitude around midlevel."""
    out = []
    dtype = np.uint16 if bit_depth == 10 else np.uint8
    mid = 1 << (bit_depth - 1)
    for f in range(frames):
        y = _to_samples(_noise_grid(seed, f, height, width), bit_depth)
        if amplitude is not None:
            y = (mid + (y.astype(np.int32) % (2 * amplitude + 1)) - amplitude)
            y = y.clip(0, (1 << bit_depth) - 1).astype(dtype)
        out.append(_assemble(y.astype(dtype), seed, f, bit_depth, chroma_format))
    return out


SOURCES = {
    "gradient": gradient,
    "texture": moving_texture,
    "screen": screen_content,
    "noise": noise,
}


def make_source(kind: str, width, height, frames, bit_depth=8, chroma_format=1,
                seed=0, **kw):
    return SOURCES[kind](width, height, frames, bit_depth=bit_depth,
                         chroma_format=chroma_format, seed=seed, **kw)
