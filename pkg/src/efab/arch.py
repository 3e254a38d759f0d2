"""Routing architecture shared by the router, config generator and
fabric simulator.

Classic island style: every routable tile owns one switch matrix and
``channels`` unidirectional single-length wires per side per direction.
A wire leaving tile T toward direction d lands at T's d-neighbour, where
it can feed input pins or turn onto that tile's outgoing wires.  Local
sources (LUT/FF slot outputs, DSP accumulator bits, IO pad inputs) enter
the same matrix.  Every mux selector is encoded as

    0                      unconfigured
    1 .. S                 local source 1..S of the tile kind
    S+1 .. S+4*channels    incoming wire (N, E, S, W bundles, in order)

which is the single source of truth the bitstream layout, the config
generator and the loader all agree on.
"""

from __future__ import annotations

from .bitstream import _PRIVATE_BITS, mux_select_width
from .fabric import TILE_INFO, FabricLayout, Tile

__all__ = [
    "DIRS", "DELTA", "OPPOSITE", "ROUTABLE_KINDS",
    "routable", "neighbor", "sources", "sinks",
    "source_code", "incoming_code", "decode_sel",
    "pin_sel_offset", "wire_sel_offset", "get_field", "set_field",
    "lut_tt_offset", "lut_bypass_offset",
]

N, E, S, W = 0, 1, 2, 3
DIRS = (N, E, S, W)
DIR_NAMES = ("N", "E", "S", "W")
DELTA = {N: (-1, 0), E: (0, 1), S: (1, 0), W: (0, -1)}
OPPOSITE = {N: S, E: W, S: N, W: E}

# Only the cmos28 tile set is executable; layouts containing legacy
# kinds can be parsed, counted and encoded but not simulated or routed.
ROUTABLE_KINDS = {Tile.LUT4AB, Tile.DSP_TOP, Tile.DSP_BOT, Tile.WEST_IO, Tile.EAST_IO}


def routable(layout: FabricLayout, r: int, c: int) -> bool:
    return (0 <= r < layout.rows and 0 <= c < layout.cols
            and layout.grid[r][c] in ROUTABLE_KINDS)


def neighbor(r: int, c: int, d: int) -> tuple[int, int]:
    dr, dc = DELTA[d]
    return r + dr, c + dc


def sources(kind: Tile) -> int:
    return TILE_INFO[kind].sources


def sinks(kind: Tile) -> int:
    return TILE_INFO[kind].sinks


def source_code(local_idx: int) -> int:
    return 1 + local_idx


def incoming_code(kind: Tile, direction: int, wire: int, channels: int) -> int:
    return 1 + sources(kind) + direction * channels + wire


def decode_sel(kind: Tile, sel: int, channels: int):
    """Selector -> ('local', idx) | ('in', direction, wire) | None."""
    if sel == 0:
        return None
    sel -= 1
    if sel < sources(kind):
        return ("local", sel)
    sel -= sources(kind)
    if sel >= 4 * channels:
        raise ValueError(f"selector out of range for {kind.value}")
    return ("in", sel // channels, sel % channels)


# -- payload bit offsets ---------------------------------------------------

def lut_tt_offset(slot: int) -> int:
    return slot * 17


def lut_bypass_offset(slot: int) -> int:
    return slot * 17 + 16


def pin_sel_offset(kind: Tile, pin: int, channels: int) -> int:
    return _PRIVATE_BITS[kind] + pin * mux_select_width(kind, channels)


def wire_sel_offset(kind: Tile, direction: int, wire: int, channels: int) -> int:
    mw = mux_select_width(kind, channels)
    return (_PRIVATE_BITS[kind] + sinks(kind) * mw
            + (direction * channels + wire) * mw)


def get_field(payload: int, offset: int, width: int) -> int:
    return (payload >> offset) & ((1 << width) - 1)


def set_field(payload: int, offset: int, width: int, value: int) -> int:
    mask = ((1 << width) - 1) << offset
    return (payload & ~mask) | ((value << offset) & mask)
