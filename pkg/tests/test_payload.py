from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tokenmark.payload import (
    PayloadError,
    WatermarkPayload,
    bits_to_int,
    bits_to_str,
    encode_user_id,
    parse_bits,
    recover,
)


class TestEncodeUserId:
    def test_zero(self):
        assert encode_user_id(0, 12) == (0,) * 12

    def test_five(self):
        assert bits_to_str(encode_user_id(5, 12)) == "000000000101"

    def test_boundary_rejected(self):
        with pytest.raises(PayloadError):
            encode_user_id(4096, 12)

    def test_round_trip(self):
        for uid in (0, 1, 5, 4095):
            assert bits_to_int(encode_user_id(uid, 12)) == uid


class TestRecover:
    def test_zero_correction_is_identity(self):
        d = parse_bits("101100110010")
        assert recover(d, (0,) * 12) == d

    def test_hand_xor(self):
        # 101100110010 XOR 000010000000, worked by hand: only bit 4 flips.
        got = recover(parse_bits("101100110010"), parse_bits("000010000000"))
        assert bits_to_str(got) == "101110110010"

    def test_self_inverse(self):
        ones = parse_bits("111111111111")
        assert recover(ones, ones) == (0,) * 12

    def test_length_mismatch_rejected(self):
        with pytest.raises(PayloadError, match="length mismatch"):
            recover((0, 1), (0, 1, 1))

    @given(
        st.lists(st.integers(0, 1), min_size=1, max_size=16),
        st.data(),
    )
    def test_involution(self, d, data):
        c = data.draw(st.lists(st.integers(0, 1), min_size=len(d), max_size=len(d)))
        d, c = tuple(d), tuple(c)
        assert recover(recover(d, c), c) == d

    def test_outlier_flip_mask_identity(self):
        # The reason the correction half exists: observed bits are the
        # intended bits XOR the flip mask, and recovery undoes exactly that.
        intended = parse_bits("110010")
        flips = parse_bits("010001")
        observed = tuple(i ^ f for i, f in zip(intended, flips))
        assert recover(observed, flips) == intended


class TestWatermarkPayload:
    def test_default_length(self):
        p = WatermarkPayload.from_user_id(77, 24)
        assert p.x == 24
        assert len(p.detection_bits) == len(p.correction_bits) == 12
        assert p.user_id == 77

    def test_odd_length_rejected(self):
        with pytest.raises(PayloadError):
            WatermarkPayload.from_user_id(0, 7)

    def test_tiny_length_rejected(self):
        with pytest.raises(PayloadError):
            WatermarkPayload.from_user_id(0, 0)

    def test_mismatched_halves_rejected(self):
        with pytest.raises(PayloadError):
            WatermarkPayload(detection_bits=(1, 0), correction_bits=(1,))

    def test_non_bits_rejected(self):
        with pytest.raises(PayloadError):
            WatermarkPayload(detection_bits=(2, 0))

    def test_parse_bits_rejects_junk(self):
        with pytest.raises(PayloadError):
            parse_bits("10a1")
        with pytest.raises(PayloadError):
            parse_bits("")
