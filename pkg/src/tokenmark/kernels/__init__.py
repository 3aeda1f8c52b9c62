"""Kernel backend selection.

The compiled extension is preferred when importable; otherwise the pure
Python implementation is used.  ``TOKENMARK_PURE_PYTHON=1`` forces the
fallback (useful for the parity tests and the benchmark).
"""

from __future__ import annotations

import os

from tokenmark.kernels import pure

if os.environ.get("TOKENMARK_PURE_PYTHON"):
    _impl = pure
    BACKEND = "python"
else:
    try:
        from tokenmark.kernels import _speed as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = pure
        BACKEND = "python"

MASK64 = pure.MASK64
GOLDEN = pure.GOLDEN

mix64 = _impl.mix64
advance = _impl.advance
stream_next = _impl.stream_next
select_indices = _impl.select_indices
partition_member = _impl.partition_member

__all__ = [
    "BACKEND",
    "MASK64",
    "GOLDEN",
    "mix64",
    "advance",
    "stream_next",
    "select_indices",
    "partition_member",
    "pure",
]
