"""64B66B line code and CRC-32 framed streaming.

A 66-bit word is an int: sync header in bits 65..64 (0b01 data,
0b10 control), 64 payload bits below with octet 0 in bits 7..0.  The
scrambler is deliberately omitted - DC balance buys nothing on a
simulated link - so payloads ride in the clear.

Stream frames are: one SOF control block, ceil(len/8) data blocks
(final block zero-padded), and one EOF control block carrying the
valid-octet count of the tail and a CRC-32 over the whole payload.
A 256-octet payload is therefore exactly 34 words on the wire.
"""

from __future__ import annotations

import struct

from ..bitstream import crc32

__all__ = [
    "HDR_DATA", "HDR_CTRL", "SOF_MARK", "EOF_MARK", "MAX_PAYLOAD",
    "InvalidSyncHeader", "CrcMismatch", "MissingSof", "MissingEof", "Oversize",
    "encode_64b66b", "decode_64b66b", "stream_frame", "stream_parse",
]

HDR_DATA = 0b01
HDR_CTRL = 0b10
SOF_MARK = 0xFB
EOF_MARK = 0xFD
MAX_PAYLOAD = 8192


class InvalidSyncHeader(Exception):
    pass


class CrcMismatch(Exception):
    pass


class MissingSof(Exception):
    pass


class MissingEof(Exception):
    pass


class Oversize(Exception):
    pass


def encode_64b66b(block: bytes, is_control: bool = False) -> int:
    if len(block) != 8:
        raise ValueError(f"block must be 8 octets, got {len(block)}")
    header = HDR_CTRL if is_control else HDR_DATA
    return (header << 64) | int.from_bytes(block, "little")


def decode_64b66b(word: int) -> tuple[bytes, bool]:
    header = (word >> 64) & 0b11
    if header not in (HDR_DATA, HDR_CTRL):
        raise InvalidSyncHeader(f"sync header {header:02b} is not 01/10")
    return (word & ((1 << 64) - 1)).to_bytes(8, "little"), header == HDR_CTRL


def stream_frame(payload: bytes) -> list[int]:
    """Frame a payload into 66-bit words: SOF, data blocks, EOF."""
    if len(payload) > MAX_PAYLOAD:
        raise Oversize(f"payload is {len(payload)} octets, maximum {MAX_PAYLOAD}")
    words = [encode_64b66b(bytes([SOF_MARK]) + b"\x00" * 7, is_control=True)]
    tail = len(payload) % 8
    if payload and tail == 0:
        tail = 8
    padded = payload + b"\x00" * (-len(payload) % 8)
    for off in range(0, len(padded), 8):
        words.append(encode_64b66b(padded[off:off + 8]))
    eof = struct.pack("<BBI", EOF_MARK, tail, crc32(payload)) + b"\x00\x00"
    words.append(encode_64b66b(eof, is_control=True))
    return words


def stream_parse(words) -> bytes:
    """Inverse of stream_frame; validates structure and the payload CRC."""
    it = iter(words)
    try:
        first = next(it)
    except StopIteration:
        raise MissingSof("empty word stream") from None
    block, ctrl = decode_64b66b(first)
    if not ctrl or block[0] != SOF_MARK:
        raise MissingSof(f"stream does not begin with SOF (got {block[0]:#04x})")
    chunks = []
    eof = None
    for word in it:
        block, ctrl = decode_64b66b(word)
        if ctrl:
            if block[0] != EOF_MARK:
                raise MissingEof(f"unexpected control block {block[0]:#04x}")
            eof = block
            break
        chunks.append(block)
    if eof is None:
        raise MissingEof("stream ended without EOF")
    tail = eof[1]
    if chunks:
        if not 1 <= tail <= 8:
            raise MissingEof(f"EOF declares invalid tail length {tail}")
        chunks[-1] = chunks[-1][:tail]
    elif tail != 0:
        raise MissingEof(f"EOF declares tail {tail} with no data blocks")
    payload = b"".join(chunks)
    want = struct.unpack("<I", eof[2:6])[0]
    if crc32(payload) != want:
        raise CrcMismatch(
            f"payload CRC {crc32(payload):#010x} != frame CRC {want:#010x}")
    return payload
