"""Flow orchestration: netlist -> placement -> routing -> bitstream.

Also hosts the built-in design library: the 16-bit free-running counter
and the 32-bit stream loopback register stage used by the end-to-end
tests, both expressed directly in the netlist IR.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from . import arch
from .bitstream import encode_bitstream, mux_select_width
from .fabric import FabricLayout, Tile
from .netlist import (CONST, DFF, DSP, INPORT, LUT4, OUTPORT, Netlist,
                      truth_table)
from .place import Placement, place
from .route import SRC, NetRoute, RoutingResult, route
from .simulator import FabricState, load

__all__ = [
    "generate_config",
    "FlowResult",
    "full_flow",
    "build_counter16",
    "build_loopback32",
    "COUNTER_IO_WEST",
    "COUNTER_IO_EAST",
    "LOOPBACK_IO",
    "placement_report",
    "routing_report",
]

log = logging.getLogger(__name__)

TT_NOT = truth_table(lambda a: 1 - a, 1)
TT_AND2 = truth_table(lambda a, b: a & b, 2)
TT_XOR2 = truth_table(lambda a, b: a ^ b, 2)
TT_BUF = truth_table(lambda a: a, 1)


def _feed_code(layout: FabricLayout, tile, entity, source_tile, source_idx) -> int:
    """Mux selector for the entity feeding a mux at ``tile``."""
    kind = layout.grid[tile[0]][tile[1]]
    if entity is SRC:
        if tile != source_tile:
            raise ValueError(f"net source {source_tile} is not local to {tile}")
        return arch.source_code(source_idx)
    wr, wc, wd, wi = entity
    if arch.neighbor(wr, wc, wd) != tile:
        raise ValueError(f"wire {entity} does not land at {tile}")
    return arch.incoming_code(kind, arch.OPPOSITE[wd], wi, layout.channels)


def generate_config(netlist: Netlist, placement: Placement,
                    routing: RoutingResult, layout: FabricLayout) -> bytes:
    """Turn a routed design into a loadable bitstream image."""
    W = layout.channels
    payloads = {(r, c): 0 for r, c, _ in layout.configurable_tiles()}

    def set_field(tile, offset, width, value):
        payloads[tile] = arch.set_field(payloads[tile], offset, width, value)

    # per-slot LUT content
    for ci, cell in enumerate(netlist.cells):
        r, c, slot = placement.assignment[ci]
        if cell.kind == LUT4:
            set_field((r, c), arch.lut_tt_offset(slot), 16, cell.tt)
            set_field((r, c), arch.lut_bypass_offset(slot), 1, 1)
        elif cell.kind == DFF:
            set_field((r, c), arch.lut_tt_offset(slot), 16, TT_BUF)
        elif cell.kind == CONST:
            set_field((r, c), arch.lut_tt_offset(slot), 16, 0xFFFF if cell.tt else 0)
            set_field((r, c), arch.lut_bypass_offset(slot), 1, 1)

    # routing muxes
    sink_tiles = _sink_tiles(netlist, placement)
    for net, nr in sorted(routing.nets.items()):
        for (wr, wc, wd, wi), parent in sorted(nr.wires.items()):
            kind = layout.grid[wr][wc]
            mw = mux_select_width(kind, W)
            code = _feed_code(layout, (wr, wc), parent, nr.source_tile, nr.source_idx)
            set_field((wr, wc), arch.wire_sel_offset(kind, wd, wi, W), mw, code)
        for (ci, pos), entity in sorted(nr.sinks.items()):
            tile, pinidx = sink_tiles[(ci, pos)]
            kind = layout.grid[tile[0]][tile[1]]
            mw = mux_select_width(kind, W)
            code = _feed_code(layout, tile, entity, nr.source_tile, nr.source_idx)
            set_field(tile, arch.pin_sel_offset(kind, pinidx, W), mw, code)

    return encode_bitstream(layout, payloads)


def _sink_tiles(netlist: Netlist, placement: Placement) -> dict:
    """(cell, pin position) -> (tile, pin index within the tile)."""
    out = {}
    for ci, cell in enumerate(netlist.cells):
        r, c, slot = placement.assignment[ci]
        if cell.kind in (LUT4, DFF):
            for pos, net in enumerate(cell.ins):
                if net is not None:
                    out[(ci, pos)] = ((r, c), slot * 4 + pos)
        elif cell.kind == DSP:
            for pos, net in enumerate(cell.ins):
                if net is not None:
                    out[(ci, pos)] = ((r, c), pos)
        elif cell.kind == OUTPORT:
            out[(ci, 0)] = ((r, c), slot)
    return out


@dataclass
class FlowResult:
    netlist: Netlist
    placement: Placement
    routing: RoutingResult
    image: bytes
    layout: FabricLayout

    def load(self, lanes: int = 1) -> FabricState:
        return load(self.layout, self.image, lanes=lanes)

    def io_map(self) -> dict[str, tuple[str, int]]:
        ports = list(self.netlist.inputs) + list(self.netlist.outputs)
        return {p: self.placement.io_frame_bit(p) for p in ports}


def full_flow(netlist: Netlist, layout: FabricLayout, seed: int = 0,
              io_constraints: dict | None = None) -> FlowResult:
    """place -> route -> generate_config, with legality machine-checked."""
    placement = place(netlist, layout, seed=seed, io_constraints=io_constraints)
    routing = route(placement, layout)
    image = generate_config(netlist, placement, routing, layout)
    log.info("flow %s: %d cells, %d wires, %d route iterations, image %d octets",
             netlist.name or "<design>", len(netlist.cells),
             routing.wire_count(), routing.iterations, len(image))
    return FlowResult(netlist, placement, routing, image, layout)


# -- design library ---------------------------------------------------------

def build_counter16() -> Netlist:
    """Free-running 16-bit counter; ``count`` shows the cycle index.

    The output taps the incremented value ahead of the registers, so the
    frame sampled on step k reads exactly k mod 65536.
    """
    nl = Netlist("counter16")
    q = [nl.new_net() for _ in range(16)]
    sums = [nl.add_lut(TT_NOT, [q[0]], name="sum0")]
    carry = q[0]
    for b in range(1, 16):
        if b > 1:
            carry = nl.add_lut(TT_AND2, [q[b - 1], carry], name=f"carry{b}")
        sums.append(nl.add_lut(TT_XOR2, [q[b], carry], name=f"sum{b}"))
    for b in range(16):
        nl.add_dff(sums[b], name=f"q{b}", q=q[b])
        nl.add_output(f"count[{b}]", sums[b])
    nl.validate()
    return nl


def build_loopback32() -> Netlist:
    """Single register stage with ready/valid backpressure, 32-bit data.

    Inbound beats (s_data, s_valid) are accepted when s_ready; the held
    beat is presented as (m_data, m_valid) and retires when m_ready.
    """
    nl = Netlist("loopback32")
    s_data = [nl.add_input(f"s_data[{i}]") for i in range(32)]
    s_valid = nl.add_input("s_valid")
    m_ready = nl.add_input("m_ready")

    full_q = nl.new_net()
    s_ready = nl.add_lut(truth_table(lambda full, rdy: (1 - full) | rdy, 2),
                         [full_q, m_ready], name="s_ready")
    loadp = nl.add_lut(TT_AND2, [s_valid, s_ready], name="load")
    full_next = nl.add_lut(
        truth_table(lambda ld, full, rdy: ld | (full & (1 - rdy)), 3),
        [loadp, full_q, m_ready], name="full_next")
    nl.add_dff(full_next, name="full", q=full_q)

    tt_mux = truth_table(lambda ld, new, held: new if ld else held, 3)
    for i in range(32):
        held = nl.new_net()
        nxt = nl.add_lut(tt_mux, [loadp, s_data[i], held], name=f"mux{i}")
        nl.add_dff(nxt, name=f"data{i}", q=held)
        nl.add_output(f"m_data[{i}]", held)
    nl.add_output("m_valid", full_q)
    nl.add_output("s_ready", s_ready)
    nl.validate()
    return nl


# Default IO pinning: the counter mirrors the silicon test by tapping its
# bus off the west side; the register-map path reads it on the east side.
COUNTER_IO_WEST = {f"count[{b}]": ("west", b) for b in range(16)}
COUNTER_IO_EAST = {f"count[{b}]": ("east", b) for b in range(16)}

LOOPBACK_IO = {
    **{f"s_data[{i}]": ("east", i) for i in range(32)},
    "s_valid": ("east", 32),
    "m_ready": ("east", 33),
    **{f"m_data[{i}]": ("east", i) for i in range(32)},
    "m_valid": ("east", 32),
    "s_ready": ("east", 33),
}


# -- reports ----------------------------------------------------------------

def placement_report(placement: Placement) -> str:
    lines = ["cell\tkind\trow\tcol\tslot"]
    for ci, cell in enumerate(placement.netlist.cells):
        r, c, s = placement.assignment[ci]
        lines.append(f"{cell.name}\t{cell.kind}\t{r}\t{c}\t{s}")
    return "\n".join(lines) + "\n"


def routing_report(routing: RoutingResult) -> str:
    lines = ["net\twires\tsinks", ]
    for net, nr in sorted(routing.nets.items()):
        lines.append(f"{net}\t{len(nr.wires)}\t{len(nr.sinks)}")
    lines.append(f"# congestion={routing.congestion} iterations={routing.iterations}")
    return "\n".join(lines) + "\n"
