"""Decoder conformance hashing: per-frame and whole-sequence MD5.

Planes are hashed row-major with padding excluded; 10-bit samples hash as
little-endian 16-bit words.
"""
from __future__ import annotations

import hashlib

import numpy as np


def frame_md5(planes, bit_depth: int) -> str:
    h = hashlib.md5()
    dtype = np.dtype("<u2") if bit_depth == 10 else np.uint8
    for p in planes:
        h.update(np.ascontiguousarray(p, dtype=dtype).tobytes())
    return h.hexdigest()


def sequence_md5(frame_digests) -> str:
    h = hashlib.md5()
    for d in frame_digests:
        h.update(bytes.fromhex(d))
    return h.hexdigest()


def format_hash_lines(frame_digests, seq_digest: str) -> str:
    lines = [f"MD5 (frame {i}) = {d}" for i, d in enumerate(frame_digests)]
    lines.append(f"MD5 (sequence) = {seq_digest}")
    return "\n".join(lines) + "\n"


def parse_hash_lines(text: str) -> tuple[list[str], str | None]:
    frames: list[str] = []
    seq = None
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        label, _, digest = line.partition(" = ")
        if label.startswith("MD5 (frame"):
            frames.append(digest)
        elif label.startswith("MD5 (sequence)"):
            seq = digest
    return frames, seq
