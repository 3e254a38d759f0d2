import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from efab.link.code8b10b import (CONTROL_CODES, RD_NEG, RD_POS, DisparityError,
                                 InvalidControlCode, InvalidSymbol,
                                 decode_8b10b, encode_8b10b)
from efab.link.code64b66b import (CrcMismatch, InvalidSyncHeader, MissingEof,
                                  MissingSof, Oversize, decode_64b66b,
                                  encode_64b66b, stream_frame, stream_parse)
from efab.link.prbs import (PrbsChecker, PrbsState, ZeroState, prbs_bytes,
                            prbs_check, prbs_next)


# -- 8B10B --------------------------------------------------------------------

def test_d0_0_symbol_from_published_tables():
    symbol, rd = encode_8b10b(0x00, False, RD_NEG)
    assert symbol == 0b1001110100
    # the symbol is balanced (five ones), so disparity is unchanged
    assert rd == RD_NEG


def test_k28_5_symbol_from_published_tables():
    symbol, rd = encode_8b10b(0xBC, True, RD_NEG)
    assert symbol == 0b0011111010
    assert rd == RD_POS


def test_every_data_byte_round_trips_under_both_disparities():
    for byte in range(256):
        for rd in (RD_NEG, RD_POS):
            symbol, rd_out = encode_8b10b(byte, False, rd)
            assert decode_8b10b(symbol, rd) == (byte, False, rd_out)


def test_every_symbol_has_4_to_6_ones():
    for byte in range(256):
        for rd in (RD_NEG, RD_POS):
            symbol, _ = encode_8b10b(byte, False, rd)
            assert bin(symbol).count("1") in (4, 5, 6)
    for byte in CONTROL_CODES:
        for rd in (RD_NEG, RD_POS):
            symbol, _ = encode_8b10b(byte, True, rd)
            assert bin(symbol).count("1") in (4, 5, 6)


def test_control_codes_round_trip():
    for byte in CONTROL_CODES:
        for rd in (RD_NEG, RD_POS):
            symbol, rd_out = encode_8b10b(byte, True, rd)
            assert decode_8b10b(symbol, rd) == (byte, True, rd_out)


def test_disparity_never_drifts():
    rng = random.Random(2)
    rd = RD_NEG
    for _ in range(20_000):
        _, rd = encode_8b10b(rng.randrange(256), False, rd)
        assert rd in (RD_NEG, RD_POS)


def test_undefined_control_code_rejected():
    with pytest.raises(InvalidControlCode):
        encode_8b10b(0x00, True, RD_NEG)


def test_all_zero_symbol_is_invalid():
    with pytest.raises(InvalidSymbol):
        decode_8b10b(0, RD_NEG)


def test_disparity_error_on_wrong_column():
    # D0.0 is disparity-asymmetric: its RD- form is illegal at RD+
    symbol, _ = encode_8b10b(0x00, False, RD_NEG)
    with pytest.raises(DisparityError):
        decode_8b10b(symbol, RD_POS)


def test_decode_rejects_corrupted_stream_eventually():
    # flipping one bit of a symbol either leaves the code space or breaks
    # disparity bookkeeping somewhere downstream
    rng = random.Random(3)
    hits = 0
    for _ in range(200):
        byte, rd = rng.randrange(256), rng.choice((RD_NEG, RD_POS))
        symbol, _ = encode_8b10b(byte, False, rd)
        corrupted = symbol ^ (1 << rng.randrange(10))
        try:
            got, is_k, _ = decode_8b10b(corrupted, rd)
            if (got, is_k) != (byte, False):
                hits += 1
        except (InvalidSymbol, DisparityError):
            hits += 1
    assert hits == 200  # a single-bit symbol error never aliases silently


# -- 64B66B -------------------------------------------------------------------

def test_64b66b_data_round_trip():
    block = bytes(range(8))
    word = encode_64b66b(block, is_control=False)
    assert word >> 64 == 0b01
    assert decode_64b66b(word) == (block, False)


def test_64b66b_control_header():
    word = encode_64b66b(b"\xfb" + b"\x00" * 7, is_control=True)
    assert word >> 64 == 0b10
    assert decode_64b66b(word) == (b"\xfb" + b"\x00" * 7, True)


@pytest.mark.parametrize("header", [0b00, 0b11])
def test_64b66b_invalid_sync_header(header):
    with pytest.raises(InvalidSyncHeader):
        decode_64b66b(header << 64)


@given(st.binary(min_size=0, max_size=600))
@settings(max_examples=80, deadline=None)
def test_stream_round_trip(payload):
    assert stream_parse(stream_frame(payload)) == payload


def test_256_octet_frame_is_exactly_34_words():
    words = stream_frame(bytes(256))
    assert len(words) == 34  # SOF + 32 data + EOF


def test_any_payload_bit_flip_is_detected():
    payload = bytes(range(64))
    words = stream_frame(payload)
    rng = random.Random(4)
    for _ in range(100):
        block = rng.randrange(1, len(words) - 1)
        bit = rng.randrange(64)
        mutated = list(words)
        mutated[block] ^= 1 << bit
        with pytest.raises((CrcMismatch, MissingEof)):
            stream_parse(mutated)


def test_oversize_rejected():
    with pytest.raises(Oversize):
        stream_frame(bytes(8193))


def test_missing_sof():
    words = stream_frame(b"hello")
    with pytest.raises(MissingSof):
        stream_parse(words[1:])


def test_missing_eof():
    words = stream_frame(b"hello")
    with pytest.raises(MissingEof):
        stream_parse(words[:-1])


# -- PRBS ---------------------------------------------------------------------

def test_prbs7_period_is_exactly_127():
    state = PrbsState(1, 7)
    seen = {1}
    cur = state
    period = None
    for i in range(1, 200):
        _, cur = prbs_next(cur, 1)
        if cur.lfsr == 1:
            period = i
            break
        assert cur.lfsr not in seen
        seen.add(cur.lfsr)
    assert period == 127
    assert len(seen) == 127  # every nonzero state visited


def test_prbs31_zero_state_rejected():
    with pytest.raises(ZeroState):
        PrbsState(0, 31)


def test_checker_clean_stream_zero_errors():
    bits, _ = prbs_next(PrbsState(0x5A5A5A, 31), 3000)
    errors, locked = prbs_check(bits)
    assert locked and errors == 0


def test_checker_counts_injected_flips_exactly():
    bits, _ = prbs_next(PrbsState(0x13579B, 31), 4000)
    for pos in (1500, 2222, 3999):
        bits[pos] ^= 1
    errors, locked = prbs_check(bits)
    assert locked and errors == 3


def test_generator_xored_with_itself_is_clean():
    a, _ = prbs_next(PrbsState(0x777, 31), 2000)
    b, _ = prbs_next(PrbsState(0x777, 31), 2000)
    assert all(x ^ y == 0 for x, y in zip(a, b))
    errors, locked = prbs_check(a)
    assert locked and errors == 0


def test_prbs_bytes_deterministic():
    data1, s1 = prbs_bytes(PrbsState(99, 31), 64)
    data2, s2 = prbs_bytes(PrbsState(99, 31), 64)
    assert data1 == data2 and s1 == s2
