"""Watermark bit layout and recovery arithmetic.

A watermark of total length X carries X/2 detection bits (the user id,
most-significant bit first) followed by X/2 error-correction bits.  A
correction bit of 1 flips the observed detection bit at the same index,
so recovery is a plain XOR and is its own inverse.
"""

from __future__ import annotations

from dataclasses import dataclass, field

Bits = tuple[int, ...]


class PayloadError(ValueError):
    pass


def parse_bits(text: str) -> Bits:
    if not text or any(ch not in "01" for ch in text):
        raise PayloadError(f"not a bit string: {text!r}")
    return tuple(int(ch) for ch in text)


def bits_to_str(bits: Bits) -> str:
    return "".join(str(b) for b in bits)


def bits_to_int(bits: Bits) -> int:
    value = 0
    for b in bits:
        value = (value << 1) | b
    return value


def encode_user_id(user_id: int, half_length: int) -> Bits:
    """Fixed-width big-endian binary encoding of a user id."""
    if user_id < 0 or user_id >= (1 << half_length):
        raise PayloadError(
            f"user id {user_id} does not fit in {half_length} bits"
        )
    return tuple((user_id >> shift) & 1 for shift in range(half_length - 1, -1, -1))


def recover(observed_detection: Bits, correction: Bits) -> Bits:
    """Bitwise XOR of the observed detection bits with the correction bits."""
    if len(observed_detection) != len(correction):
        raise PayloadError(
            f"length mismatch: {len(observed_detection)} detection bits vs "
            f"{len(correction)} correction bits"
        )
    return tuple(d ^ c for d, c in zip(observed_detection, correction))


@dataclass(frozen=True)
class WatermarkPayload:
    """X-bit watermark: equal-length detection and correction halves.

    The correction half defaults to zeros; during embedding it is recomputed
    per round from that round's outlier events, so the field here is the
    layout placeholder rather than live data.
    """

    detection_bits: Bits
    correction_bits: Bits = field(default=())

    def __post_init__(self):
        if not self.detection_bits:
            raise PayloadError("detection bits must be non-empty")
        if not self.correction_bits:
            object.__setattr__(self, "correction_bits", (0,) * len(self.detection_bits))
        if len(self.detection_bits) != len(self.correction_bits):
            raise PayloadError("detection and correction halves must have equal length")
        for b in self.detection_bits + self.correction_bits:
            if b not in (0, 1):
                raise PayloadError("bits must be 0 or 1")

    @property
    def x(self) -> int:
        return 2 * len(self.detection_bits)

    @property
    def user_id(self) -> int:
        return bits_to_int(self.detection_bits)

    @classmethod
    def from_user_id(cls, user_id: int, total_length: int = 24) -> "WatermarkPayload":
        if total_length < 2 or total_length % 2:
            raise PayloadError(f"total length must be even and >= 2, got {total_length}")
        return cls(detection_bits=encode_user_id(user_id, total_length // 2))
