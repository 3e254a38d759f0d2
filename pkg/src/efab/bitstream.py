"""Configuration image format and the shared CRC-32 primitive.

A bitstream is a framed, checksummed image that programs every
configurable tile of a fabric:

    magic "eFAB" | layout digest | frame count | frames... | CRC-32

Each frame carries (row, col, bit length, payload) for one tile in
row-major order.  The trailing CRC-32 covers every preceding octet, so
any single-bit corruption is detected.  The format is a stand-in for the
real configuration stream (whose word size and load order are not
public); it is documented bit-exactly in docs/bitstream.md, which is
generated by :func:`format_doc`.
"""

from __future__ import annotations

import struct

from .fabric import DEFAULT_CHANNELS, TILE_INFO, FabricLayout, Tile, render_layout

__all__ = [
    "crc32",
    "BitstreamError",
    "WidthMismatch",
    "MissingTileConfig",
    "BadMagic",
    "DigestMismatch",
    "CrcMismatch",
    "TruncatedStream",
    "mux_select_width",
    "config_width",
    "layout_digest",
    "encode_bitstream",
    "decode_bitstream",
    "format_doc",
    "MAGIC",
]

MAGIC = b"eFAB"

# IEEE 802.3 CRC-32: polynomial 0x04C11DB7, reflected in/out,
# init 0xFFFFFFFF, final xor 0xFFFFFFFF.
_CRC32_POLY_REFLECTED = 0xEDB88320


def _make_crc32_table() -> list[int]:
    table = []
    for byte in range(256):
        crc = byte
        for _ in range(8):
            crc = (crc >> 1) ^ _CRC32_POLY_REFLECTED if crc & 1 else crc >> 1
        table.append(crc)
    return table


_CRC32_TABLE = _make_crc32_table()


def crc32(data: bytes) -> int:
    crc = 0xFFFFFFFF
    for b in data:
        crc = (crc >> 8) ^ _CRC32_TABLE[(crc ^ b) & 0xFF]
    return crc ^ 0xFFFFFFFF


class BitstreamError(Exception):
    """Base class for bitstream encode/decode failures."""


class WidthMismatch(BitstreamError):
    pass


class MissingTileConfig(BitstreamError):
    pass


class BadMagic(BitstreamError):
    pass


class DigestMismatch(BitstreamError):
    pass


class CrcMismatch(BitstreamError):
    pass


class TruncatedStream(BitstreamError):
    pass


# Private (non-routing) configuration bits per tile kind.  LUT4AB packs
# eight slots of 16 truth-table bits plus one FF-bypass bit; DSP_top has
# an 8-bit mode field (must be zero: only unsigned MAC is defined);
# W_IO keeps two tri-mode direction bits; RegFile reserves its 32x4
# storage image.  See format_doc() for the full frame layout.
_PRIVATE_BITS = {
    Tile.LUT4AB: 8 * 17,
    Tile.DSP_TOP: 8,
    Tile.DSP_BOT: 0,
    Tile.WEST_IO: 0,
    Tile.EAST_IO: 0,
    Tile.W_IO: 2,
    Tile.CPU_IO: 0,
    Tile.REGFILE: 128,
}

def mux_select_width(kind: Tile, channels: int = DEFAULT_CHANNELS) -> int:
    """Bits per routing-mux selector: 0 = unconfigured, then local
    sources, then the four incoming wire bundles."""
    n_sources = 1 + TILE_INFO[kind].sources + 4 * channels
    return max(1, (n_sources - 1).bit_length())


def config_width(kind: Tile, channels: int = DEFAULT_CHANNELS) -> int:
    """Configuration bits one tile of this kind consumes."""
    if kind not in _PRIVATE_BITS:
        return 0
    mw = mux_select_width(kind, channels)
    return _PRIVATE_BITS[kind] + (TILE_INFO[kind].sinks + 4 * channels) * mw


def layout_digest(layout: FabricLayout) -> int:
    """32-bit compatibility check: CRC-32 of the canonical layout text."""
    return crc32(render_layout(layout).encode("utf-8"))


def _pack_bits(value: int, nbits: int) -> bytes:
    return value.to_bytes((nbits + 7) // 8, "little")


def encode_bitstream(layout: FabricLayout, configs: dict) -> bytes:
    """Emit the configuration image for ``layout``.

    ``configs`` maps (row, col) -> payload int for every configurable
    tile; payload bit ``j`` is bit ``j`` of the int.
    """
    tiles = list(layout.configurable_tiles())
    expected = {(r, c) for r, c, _ in tiles}
    extra = set(configs) - expected
    if extra:
        raise MissingTileConfig(f"config given for non-configurable tiles {sorted(extra)}")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", layout_digest(layout))
    out += struct.pack("<I", len(tiles))
    for r, c, kind in tiles:
        if (r, c) not in configs:
            raise MissingTileConfig(f"no config for tile ({r},{c}) {kind.value}")
        payload = configs[(r, c)]
        width = config_width(kind, layout.channels)
        if payload < 0 or payload.bit_length() > width:
            raise WidthMismatch(
                f"tile ({r},{c}) {kind.value}: payload needs "
                f"{payload.bit_length()} bits, frame width is {width}")
        out += struct.pack("<HHH", r, c, width)
        out += _pack_bits(payload, width)
    out += struct.pack("<I", crc32(bytes(out)))
    return bytes(out)


def decode_bitstream(data: bytes, layout: FabricLayout) -> dict:
    """Validate and unpack an image against ``layout``.

    Returns {(row, col): payload int}.  Raises BadMagic, DigestMismatch,
    CrcMismatch, TruncatedStream or WidthMismatch on any defect.
    """
    if len(data) < 16:
        raise TruncatedStream(f"image is {len(data)} octets, header needs 12 + CRC")
    if data[:4] != MAGIC:
        raise BadMagic(f"bad magic {data[:4]!r}")
    body, trailer = data[:-4], data[-4:]
    if struct.unpack("<I", trailer)[0] != crc32(body):
        raise CrcMismatch("trailer CRC does not match image contents")
    digest = struct.unpack("<I", body[4:8])[0]
    if digest != layout_digest(layout):
        raise DigestMismatch(
            f"image digest {digest:#010x} does not match layout "
            f"{layout.name or '<anonymous>'}")
    count = struct.unpack("<I", body[8:12])[0]
    tiles = list(layout.configurable_tiles())
    if count != len(tiles):
        raise TruncatedStream(f"image has {count} frames, layout needs {len(tiles)}")
    pos = 12
    configs = {}
    for r, c, kind in tiles:
        if pos + 6 > len(body):
            raise TruncatedStream("frame header runs past end of image")
        fr, fc, width = struct.unpack_from("<HHH", body, pos)
        pos += 6
        if (fr, fc) != (r, c):
            raise TruncatedStream(
                f"frame order mismatch: got ({fr},{fc}), expected ({r},{c})")
        if width != config_width(kind, layout.channels):
            raise WidthMismatch(
                f"tile ({r},{c}) {kind.value}: frame declares {width} bits, "
                f"format says {config_width(kind, layout.channels)}")
        nbytes = (width + 7) // 8
        if pos + nbytes > len(body):
            raise TruncatedStream("frame payload runs past end of image")
        configs[(r, c)] = int.from_bytes(body[pos:pos + nbytes], "little")
        pos += nbytes
    if pos != len(body):
        raise TruncatedStream(f"{len(body) - pos} trailing octets after last frame")
    return configs


def format_doc(channels: int = DEFAULT_CHANNELS) -> str:
    """Render the bitstream format reference (docs/bitstream.md)."""
    lines = [
        "# Bitstream format",
        "",
        "Binary container, little-endian words, all multi-octet integers LE.",
        "",
        "| offset | size | field |",
        "| --- | --- | --- |",
        '| 0 | 4 | magic `"eFAB"` |',
        "| 4 | 4 | layout digest: CRC-32 of the canonical layout text |",
        "| 8 | 4 | frame count |",
        "| 12 | ... | frames, row-major over configurable tiles |",
        "| end-4 | 4 | CRC-32 over every preceding octet |",
        "",
        "Each frame: `row:u16, col:u16, bit_length:u16, payload` with the",
        "payload packed LSB-first (payload bit j lives in octet j//8, bit j%8;",
        "pad bits in the final octet are zero).",
        "",
        "CRC-32 is IEEE 802.3: polynomial 0x04C11DB7, reflected input and",
        "output, initial value 0xFFFFFFFF, final xor 0xFFFFFFFF",
        '(`crc32(b"123456789") == 0xCBF43926`).',
        "",
        "## Frame payload layout",
        "",
        "Fields in payload bit order:",
        "",
        "1. private bits (see table),",
        "2. one selector per input pin (pin index order),",
        "3. one selector per outgoing wire: directions N, E, S, W, wire 0..C-1",
        "   within each direction, where C is the layout channel count.",
        "",
        "Selector values: 0 = unconfigured, 1..S = local source 1..S,",
        "S+1.. = incoming wires (N, E, S, W bundles of C, in that order).",
        "LUT4AB private bits: slots 0..7, each 16 truth-table bits",
        "(index = in0 + 2*in1 + 4*in2 + 8*in3) then one FF-bypass bit.",
        "DSP_top private bits: 8 mode bits, all zero (unsigned MAC).",
        "W_IO private bits: 2 tri-mode direction bits.  RegFile private",
        "bits: 128 reserved storage bits (tile is counted, not modelled).",
        "",
        f"## Frame widths for channels = {channels}",
        "",
        "| tile | private | pin muxes | wire muxes | selector bits | total bits |",
        "| --- | --- | --- | --- | --- | --- |",
    ]
    for kind in (Tile.LUT4AB, Tile.DSP_TOP, Tile.DSP_BOT, Tile.WEST_IO,
                 Tile.EAST_IO, Tile.W_IO, Tile.CPU_IO, Tile.REGFILE):
        mw = mux_select_width(kind, channels)
        lines.append(
            f"| {kind.value} | {_PRIVATE_BITS[kind]} | {TILE_INFO[kind].sinks} "
            f"| {4 * channels} | {mw} | {config_width(kind, channels)} |")
    lines += [
        "",
        "NULL, N_term and S_term tiles take no frame.",
        "",
    ]
    return "\n".join(lines)
