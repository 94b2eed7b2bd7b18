"""TVC: a miniature wavefront-parallel video codec.

Decoder with dual scalar/lane-parallel kernels specialized for 8-bit and
10-bit sample paths, a four-level parallel scheduler, a test-stream
encoder, and benchmark tooling.
"""

__version__ = "0.1.0"

from .bitio import SequenceHeader, PictureHeader, FormatError, TruncatedStreamError, CorruptStreamError

__all__ = [
    "SequenceHeader",
    "PictureHeader",
    "FormatError",
    "TruncatedStreamError",
    "CorruptStreamError",
    "__version__",
]
