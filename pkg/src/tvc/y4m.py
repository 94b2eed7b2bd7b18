"""Y4M and raw planar video I/O.

Supported colorspaces: C420 / C420p10 (4:2:0) and Cmono / Cmono10.
10-bit samples are stored as little-endian 16-bit words.
"""
from __future__ import annotations

import numpy as np

Y4M_MAGIC = b"YUV4MPEG2"

_COLORSPACES = {
    b"C420": (1, 8),
    b"C420jpeg": (1, 8),
    b"C420mpeg2": (1, 8),
    b"C420p10": (1, 10),
    b"Cmono": (0, 8),
    b"Cmono10": (0, 10),
}


class Y4MError(ValueError):
    pass


def _frame_planes(width, height, chroma_format):
    planes = [(height, width)]
    if chroma_format == 1:
        planes += [(height // 2, width // 2)] * 2
    return planes


def parse_y4m(data: bytes):
    """Returns (width, height, bit_depth, chroma_format, frames)."""
    nl = data.find(b"\n")
    if nl < 0 or not data.startswith(Y4M_MAGIC):
        raise Y4MError("not a Y4M stream")
    width = height = None
    chroma_format, bit_depth = 1, 8
    for token in data[len(Y4M_MAGIC) : nl].split():
        tag, val = token[:1], token[1:]
        if tag == b"W":
            width = int(val)
        elif tag == b"H":
            height = int(val)
        elif tag == b"C":
            if token not in _COLORSPACES:
                raise Y4MError(f"unsupported colorspace {token.decode()!r}")
            chroma_format, bit_depth = _COLORSPACES[token]
        elif tag in (b"F", b"I", b"A", b"X"):
            continue
    if not width or not height:
        raise Y4MError("missing W/H in Y4M header")
    dtype = np.dtype("<u2" if bit_depth == 10 else "u1")
    frames = []
    pos = nl + 1
    specs = _frame_planes(width, height, chroma_format)
    frame_bytes = sum(h * w for h, w in specs) * dtype.itemsize
    while pos < len(data):
        fnl = data.find(b"\n", pos)
        if fnl < 0 or not data[pos:fnl].startswith(b"FRAME"):
            raise Y4MError("bad FRAME marker")
        pos = fnl + 1
        if pos + frame_bytes > len(data):
            raise Y4MError("truncated frame payload")
        planes = []
        for h, w in specs:
            n = h * w * dtype.itemsize
            arr = np.frombuffer(data[pos : pos + n], dtype=dtype).reshape(h, w)
            native = np.uint16 if bit_depth == 10 else np.uint8
            planes.append(arr.astype(native))
            pos += n
        frames.append(planes)
    return width, height, bit_depth, chroma_format, frames


def write_y4m(width, height, bit_depth, chroma_format, frames) -> bytes:
    cs = {
        (1, 8): b"C420",
        (1, 10): b"C420p10",
        (0, 8): b"Cmono",
        (0, 10): b"Cmono10",
    }[(chroma_format, bit_depth)]
    out = bytearray(Y4M_MAGIC + b" W%d H%d F25:1 Ip A1:1 %s\n" % (width, height, cs))
    dtype = np.dtype("<u2" if bit_depth == 10 else "u1")
    for planes in frames:
        out += b"FRAME\n"
        for p in planes:
            out += np.ascontiguousarray(p, dtype=dtype).tobytes()
    return bytes(out)


def read_raw(data: bytes, width, height, bit_depth, chroma_format):
    dtype = np.dtype("<u2" if bit_depth == 10 else "u1")
    specs = _frame_planes(width, height, chroma_format)
    frame_bytes = sum(h * w for h, w in specs) * dtype.itemsize
    if frame_bytes == 0 or len(data) % frame_bytes:
        raise Y4MError("raw input size is not a whole number of frames")
    frames = []
    pos = 0
    native = np.uint16 if bit_depth == 10 else np.uint8
    while pos < len(data):
        planes = []
        for h, w in specs:
            n = h * w * dtype.itemsize
            planes.append(
                np.frombuffer(data[pos : pos + n], dtype=dtype).reshape(h, w).astype(native)
            )
            pos += n
        frames.append(planes)
    return frames


def write_raw(frames, bit_depth) -> bytes:
    dtype = np.dtype("<u2" if bit_depth == 10 else "u1")
    out = bytearray()
    for planes in frames:
        for p in planes:
            out += np.ascontiguousarray(p, dtype=dtype).tobytes()
    return bytes(out)
