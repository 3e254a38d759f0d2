"""8B10B line code with running-disparity tracking.

Symbols are ints in transmission order: bit 9 is 'a', bit 0 is 'j'
(sub-blocks abcdei then fghj).  The encoder composes the 5b/6b and
3b/4b tables with the alternate-D.x.7 substitution; the full 256x2
data space plus the twelve control codes are expanded into lookup
tables at import, and the decoder inverts them, flagging symbols that
are outside the code space or illegal for the current disparity.
"""

from __future__ import annotations

__all__ = [
    "RD_NEG", "RD_POS",
    "InvalidControlCode", "InvalidSymbol", "DisparityError",
    "encode_8b10b", "decode_8b10b", "K28_5", "CONTROL_CODES",
]

RD_NEG = -1
RD_POS = +1


class InvalidControlCode(Exception):
    pass


class InvalidSymbol(Exception):
    pass


class DisparityError(Exception):
    pass


def _ones(x: int, n: int) -> int:
    return bin(x & ((1 << n) - 1)).count("1")


# 5b/6b sub-blocks (abcdei), RD- column, indexed by the five low bits.
_T6 = [
    0b100111, 0b011101, 0b101101, 0b110001, 0b110101, 0b101001, 0b011001,
    0b111000, 0b111001, 0b100101, 0b010101, 0b110100, 0b001101, 0b101100,
    0b011100, 0b010111, 0b011011, 0b100011, 0b010011, 0b110010, 0b001011,
    0b101010, 0b011010, 0b111010, 0b110011, 0b100110, 0b010110, 0b110110,
    0b001110, 0b101110, 0b011110, 0b101011,
]
# Codes that alternate with disparity: every unbalanced code plus D.07.
_FLIP6 = [_ones(c, 6) != 3 for c in _T6]
_FLIP6[7] = True

# 3b/4b sub-blocks (fghj), RD- column, indexed by the three high bits;
# index 7 is the primary D.x.7.  Alternates: unbalanced codes plus D.x.3.
_T4 = [0b1011, 0b1001, 0b0101, 0b1100, 0b1101, 0b1010, 0b0110, 0b1110]
_FLIP4 = [_ones(c, 4) != 2 for c in _T4]
_FLIP4[3] = True
_ALT7_NEG = 0b0111  # alternate D.x.7 used when intermediate RD is negative

# Control codes, RD- symbols; the RD+ form is the bitwise complement.
_K6_28 = 0b001111
CONTROL_CODES = {
    0x1C: (_K6_28 << 4) | 0b0100,  # K28.0
    0x3C: (_K6_28 << 4) | 0b1001,  # K28.1
    0x5C: (_K6_28 << 4) | 0b0101,  # K28.2
    0x7C: (_K6_28 << 4) | 0b0011,  # K28.3
    0x9C: (_K6_28 << 4) | 0b0010,  # K28.4
    0xBC: (_K6_28 << 4) | 0b1010,  # K28.5
    0xDC: (_K6_28 << 4) | 0b0110,  # K28.6
    0xFC: (_K6_28 << 4) | 0b1000,  # K28.7
    0xF7: (_T6[23] << 4) | 0b1000,  # K23.7
    0xFB: (_T6[27] << 4) | 0b1000,  # K27.7
    0xFD: (_T6[29] << 4) | 0b1000,  # K29.7
    0xFE: (_T6[30] << 4) | 0b1000,  # K30.7
}
K28_5 = 0xBC


def _encode_data(byte: int, rd: int) -> tuple[int, int]:
    x = byte & 0x1F
    y = byte >> 5
    six = _T6[x]
    if rd > 0 and _FLIP6[x]:
        six ^= 0x3F
    mid = rd + (2 * _ones(six, 6) - 6)
    if y == 7 and ((mid < 0 and x in (17, 18, 20)) or
                   (mid > 0 and x in (11, 13, 14))):
        four = _ALT7_NEG if mid < 0 else (_ALT7_NEG ^ 0xF)
    else:
        four = _T4[y]
        if mid > 0 and _FLIP4[y]:
            four ^= 0xF
    rd_out = mid + (2 * _ones(four, 4) - 4)
    return (six << 4) | four, rd_out


def _encode_control(byte: int, rd: int) -> tuple[int, int]:
    if byte not in CONTROL_CODES:
        raise InvalidControlCode(f"0x{byte:02X} is not a defined K code")
    sym = CONTROL_CODES[byte]
    if rd > 0:
        sym ^= 0x3FF
    return sym, rd + (2 * _ones(sym, 10) - 10)


def encode_8b10b(byte: int, is_control: bool = False, rd: int = RD_NEG) -> tuple[int, int]:
    """Encode one octet; returns (10-bit symbol, updated disparity)."""
    if not 0 <= byte <= 0xFF:
        raise ValueError(f"byte out of range: {byte}")
    if rd not in (RD_NEG, RD_POS):
        raise ValueError(f"running disparity must be -1 or +1, got {rd}")
    if is_control:
        return _encode_control(byte, rd)
    return _encode_data(byte, rd)


def _build_decode_table() -> dict[int, dict[int, tuple[int, bool, int]]]:
    table: dict[int, dict[int, tuple[int, bool, int]]] = {}
    for byte in range(256):
        for rd in (RD_NEG, RD_POS):
            sym, rd_out = _encode_data(byte, rd)
            entry = table.setdefault(sym, {})
            if rd in entry and entry[rd][:2] != (byte, False):
                raise AssertionError(f"8B10B data collision on {sym:010b}")
            entry[rd] = (byte, False, rd_out)
    for byte in CONTROL_CODES:
        for rd in (RD_NEG, RD_POS):
            sym, rd_out = _encode_control(byte, rd)
            entry = table.setdefault(sym, {})
            if rd in entry:
                raise AssertionError(f"8B10B control collision on {sym:010b}")
            entry[rd] = (byte, True, rd_out)
    return table


_DECODE = _build_decode_table()


def decode_8b10b(symbol: int, rd: int = RD_NEG) -> tuple[int, bool, int]:
    """Decode one symbol; returns (byte, is_control, updated disparity).

    Raises InvalidSymbol for anything outside the code space and
    DisparityError for a legal symbol arriving under the wrong disparity.
    """
    entry = _DECODE.get(symbol & 0x3FF)
    if entry is None:
        raise InvalidSymbol(f"{symbol & 0x3FF:010b} is not an 8B10B symbol")
    if rd not in entry:
        raise DisparityError(
            f"symbol {symbol & 0x3FF:010b} is illegal at running disparity {rd:+d}")
    return entry[rd]
