"""Tile taxonomy, fabric geometry and resource accounting.

The fabric is a rectangular grid of typed tiles, loaded from a small
comma-separated layout file.  Two layouts ship with the package:

* ``cmos28``  - 56 LUT4AB tiles (448 logic cells), 4 DSP slices,
  WEST_IO / EAST_IO columns.
* ``cmos130`` - 48 LUT4AB tiles (384 logic cells), 8 RegFile tiles
  (128 register entries), 4 DSP slices, W_IO / CPU_IO columns.

Only the cmos28 tile set is executable by the simulator; the legacy
tiles (W_IO, CPU_IO, RegFile) are parsed and counted but not modelled.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from importlib import resources

__all__ = [
    "Tile",
    "TileInfo",
    "TILE_INFO",
    "FabricLayout",
    "ResourceCensus",
    "FabricError",
    "UnknownTileName",
    "RaggedGrid",
    "UnpairedDspHalf",
    "MissingTermination",
    "parse_layout",
    "render_layout",
    "census",
    "bundled_layout",
    "DEFAULT_CHANNELS",
]

# Inter-tile routing channel width: unidirectional single-length wires per
# side per direction.  Layouts may override via the header; 32 is the
# smallest power of two that routes the bundled test designs (the
# decision-tree design alone drives ~200 input nets through each IO column
# boundary, which an 8-wire channel cannot carry).
DEFAULT_CHANNELS = 32


class FabricError(Exception):
    """Base class for layout parsing/validation failures."""


class UnknownTileName(FabricError):
    pass


class RaggedGrid(FabricError):
    pass


class UnpairedDspHalf(FabricError):
    pass


class MissingTermination(FabricError):
    pass


class Tile(enum.Enum):
    """Tile kinds understood by the layout parser."""

    LUT4AB = "LUT4AB"
    DSP_TOP = "DSP_top"
    DSP_BOT = "DSP_bot"
    WEST_IO = "WEST_IO"
    EAST_IO = "EAST_IO"
    W_IO = "W_IO"
    CPU_IO = "CPU_IO"
    REGFILE = "RegFile"
    NULL = "NULL"
    N_TERM = "N_term"
    S_TERM = "S_term"


@dataclass(frozen=True)
class TileInfo:
    """Static per-kind resource and routing-interface data.

    ``logic_cells``/``registers``/``dsp_half``/``io_in``/``io_out`` are the
    census contributions of one tile.  A logic cell is a LUT4 plus its
    flip-flop; the FF is part of the cell, not a separate register.  The
    ``registers`` column counts dedicated register-file storage only.
    ``sources``/``sinks`` are the tile's local switch-matrix taps: signals
    the tile injects into routing and routable input pins it consumes.
    """

    logic_cells: int = 0
    registers: int = 0
    dsp_half: int = 0
    io_in: int = 0
    io_out: int = 0
    sources: int = 0
    sinks: int = 0
    executable: bool = False


# RegFile: dual-port 32x4 LUTRAM, tallied as 16 register-equivalents per
# tile so the bundled cmos130 layout reproduces the published census.
TILE_INFO: dict[Tile, TileInfo] = {
    Tile.LUT4AB: TileInfo(logic_cells=8, sources=8, sinks=32, executable=True),
    Tile.DSP_TOP: TileInfo(dsp_half=1, sources=0, sinks=16, executable=True),
    Tile.DSP_BOT: TileInfo(dsp_half=1, sources=20, sinks=0, executable=True),
    Tile.WEST_IO: TileInfo(io_in=32, io_out=32, sources=32, sinks=32, executable=True),
    Tile.EAST_IO: TileInfo(io_in=32, io_out=32, sources=32, sinks=32, executable=True),
    Tile.W_IO: TileInfo(io_in=2, io_out=2, sources=2, sinks=2),
    Tile.CPU_IO: TileInfo(io_in=8, io_out=12, sources=8, sinks=12),
    Tile.REGFILE: TileInfo(registers=16),
    Tile.NULL: TileInfo(),
    Tile.N_TERM: TileInfo(),
    Tile.S_TERM: TileInfo(),
}

_NAME_TO_TILE = {t.value: t for t in Tile}

# Kinds that occupy a bitstream frame (everything except structural tiles).
_STRUCTURAL = {Tile.NULL, Tile.N_TERM, Tile.S_TERM}

# Kinds that carry fabric logic and therefore need column termination.
_LOGIC_KINDS = {Tile.LUT4AB, Tile.DSP_TOP, Tile.DSP_BOT, Tile.REGFILE}

_IO_KINDS = {Tile.WEST_IO, Tile.EAST_IO, Tile.W_IO, Tile.CPU_IO}


@dataclass(frozen=True)
class ResourceCensus:
    logic_cells: int = 0
    registers: int = 0
    dsp_slices: int = 0
    io_input_bits: int = 0
    io_output_bits: int = 0

    def __add__(self, other: "ResourceCensus") -> "ResourceCensus":
        return ResourceCensus(
            self.logic_cells + other.logic_cells,
            self.registers + other.registers,
            self.dsp_slices + other.dsp_slices,
            self.io_input_bits + other.io_input_bits,
            self.io_output_bits + other.io_output_bits,
        )


@dataclass(frozen=True)
class FabricLayout:
    """Validated rectangular tile grid.  Immutable; safe to share."""

    name: str
    rows: int
    cols: int
    grid: tuple[tuple[Tile, ...], ...]
    channels: int = DEFAULT_CHANNELS

    def tile(self, row: int, col: int) -> Tile:
        return self.grid[row][col]

    def tiles(self):
        """Yield (row, col, tile) in row-major order."""
        for r, rowtiles in enumerate(self.grid):
            for c, t in enumerate(rowtiles):
                yield r, c, t

    def configurable_tiles(self):
        """Row-major (row, col, tile) for tiles that take a config frame."""
        for r, c, t in self.tiles():
            if t not in _STRUCTURAL:
                yield r, c, t

    def io_tiles(self, kind: Tile) -> list[tuple[int, int]]:
        """Coordinates of all tiles of an IO kind, row-major."""
        return [(r, c) for r, c, t in self.tiles() if t is kind]


def parse_layout(text: str, name: str = "") -> FabricLayout:
    """Parse a comma-separated tile grid into a validated FabricLayout.

    The first line may be a header of the form
    ``# name=<label> channels=<n>`` (both keys optional).
    """
    lines = [ln.strip() for ln in text.splitlines()]
    channels = DEFAULT_CHANNELS
    if lines and lines[0].startswith("#"):
        header = lines.pop(0).lstrip("#").strip()
        for part in header.split():
            if part.startswith("name=") and not name:
                name = part[5:]
            elif part.startswith("channels="):
                channels = int(part[9:])
    rows: list[tuple[Tile, ...]] = []
    for ln in lines:
        if not ln:
            continue
        cells = [c.strip() for c in ln.split(",")]
        row = []
        for cell in cells:
            if cell not in _NAME_TO_TILE:
                raise UnknownTileName(f"unknown tile name {cell!r}")
            row.append(_NAME_TO_TILE[cell])
        rows.append(tuple(row))
    if not rows:
        raise RaggedGrid("layout file contains no tile rows")
    ncols = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != ncols:
            raise RaggedGrid(f"row {i} has {len(row)} tiles, expected {ncols}")
    layout = FabricLayout(name=name, rows=len(rows), cols=ncols,
                          grid=tuple(rows), channels=channels)
    _validate(layout)
    return layout


def _validate(layout: FabricLayout) -> None:
    grid = layout.grid
    nrows, ncols = layout.rows, layout.cols
    # DSP halves must pair vertically: every top has its bot directly below.
    for r, c, t in layout.tiles():
        if t is Tile.DSP_TOP:
            if r + 1 >= nrows or grid[r + 1][c] is not Tile.DSP_BOT:
                raise UnpairedDspHalf(f"DSP_top at ({r},{c}) lacks a DSP_bot below")
        elif t is Tile.DSP_BOT:
            if r == 0 or grid[r - 1][c] is not Tile.DSP_TOP:
                raise UnpairedDspHalf(f"DSP_bot at ({r},{c}) lacks a DSP_top above")
    # Logic-bearing columns must be terminated top and bottom; terminators
    # may not appear anywhere else.
    for r, c, t in layout.tiles():
        if t is Tile.N_TERM and r != 0:
            raise MissingTermination(f"N_term at ({r},{c}) is not on the top row")
        if t is Tile.S_TERM and r != nrows - 1:
            raise MissingTermination(f"S_term at ({r},{c}) is not on the bottom row")
    for c in range(ncols):
        column = [grid[r][c] for r in range(nrows)]
        if any(t in _LOGIC_KINDS for t in column):
            if column[0] is not Tile.N_TERM:
                raise MissingTermination(f"column {c} carries logic but has no N_term")
            if column[-1] is not Tile.S_TERM:
                raise MissingTermination(f"column {c} carries logic but has no S_term")
        if any(t in _IO_KINDS for t in column):
            interior = column[1:-1]
            if column[0] in _LOGIC_KINDS or column[-1] in _LOGIC_KINDS:
                raise MissingTermination(f"IO column {c} is malformed")
            if any(t is Tile.N_TERM or t is Tile.S_TERM for t in interior):
                raise MissingTermination(f"terminator inside IO column {c}")


def render_layout(layout: FabricLayout) -> str:
    """Canonical text form; ``parse_layout(render_layout(x)) == x``."""
    out = [f"# name={layout.name} channels={layout.channels}"]
    for row in layout.grid:
        out.append(",".join(t.value for t in row))
    return "\n".join(out) + "\n"


def census(layout: FabricLayout) -> ResourceCensus:
    """Sum per-tile resource contributions over the whole grid.

    DSP halves count as half a slice each; the pairing invariant guarantees
    the total is integral.
    """
    lc = reg = halves = io_in = io_out = 0
    for _, _, t in layout.tiles():
        info = TILE_INFO[t]
        lc += info.logic_cells
        reg += info.registers
        halves += info.dsp_half
        io_in += info.io_in
        io_out += info.io_out
    return ResourceCensus(lc, reg, halves // 2, io_in, io_out)


def bundled_layout(name: str) -> FabricLayout:
    """Load one of the layouts shipped with the package (cmos28, cmos130)."""
    ref = resources.files("efab.layouts").joinpath(f"{name}.csv")
    return parse_layout(ref.read_text(encoding="utf-8"))
