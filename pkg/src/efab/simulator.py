"""Cycle-accurate simulation of a configured fabric.

``load`` decodes a bitstream against a layout, reconstructs the
programmed routing graph and checks it is combinationally acyclic.
``FabricState.step`` then runs one clock: combinational settle in
topological order, output sampling, then a simultaneous register edge.
Evaluation is event-driven (only nodes downstream of a change are
re-evaluated) and bit-parallel: every node value is an int carrying one
independent simulation lane per bit.

Switching activity is the power proxy: the toggle counter sums value
transitions on routing wires, LUT outputs, flip-flops and DSP
accumulator bits.  Modelled dynamic power is toggles-per-cycle times
frequency times a unit energy, which is exactly linear in frequency.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from . import arch
from .bitstream import decode_bitstream, mux_select_width
from .fabric import TILE_INFO, FabricLayout, Tile, census
from .netlist import CombinationalLoop, lut_function

__all__ = [
    "FabricSimError",
    "UnsupportedTile",
    "InvalidConfig",
    "NoCyclesRun",
    "CombinationalLoop",
    "IoFrame",
    "ActivityReport",
    "FabricState",
    "eval_lut4",
    "dsp_mac",
    "load",
    "load_configs",
    "step",
    "activity_report",
]


class FabricSimError(Exception):
    pass


class UnsupportedTile(FabricSimError):
    """Layout contains tiles outside the executable (cmos28) set."""


class InvalidConfig(FabricSimError):
    pass


class NoCyclesRun(FabricSimError):
    pass


def eval_lut4(truth_table: int, inputs) -> int:
    """Look up one output bit: inputs form the table index, input 0 = LSB."""
    i0, i1, i2, i3 = inputs
    idx = (i0 & 1) | (i1 & 1) << 1 | (i2 & 1) << 2 | (i3 & 1) << 3
    return (truth_table >> idx) & 1


def dsp_mac(a: int, b: int, acc: int) -> int:
    """Unsigned 8x8 multiply-accumulate into a wrapping 20-bit register."""
    return (acc + (a & 0xFF) * (b & 0xFF)) & 0xFFFFF


@dataclass
class IoFrame:
    """Sparse IO bit vectors; absent indices read as zero.

    Values are lane ints (bit j = lane j), so the same frame type serves
    single-trace and bit-parallel batch simulation.
    """

    west_in: dict = field(default_factory=dict)
    east_in: dict = field(default_factory=dict)
    west_out: dict = field(default_factory=dict)
    east_out: dict = field(default_factory=dict)

    def set_in_word(self, side: str, lo: int, width: int, value: int) -> "IoFrame":
        d = self.west_in if side == "west" else self.east_in
        for k in range(width):
            d[lo + k] = (value >> k) & 1
        return self

    def out_word(self, side: str, lo: int, width: int) -> int:
        d = self.west_out if side == "west" else self.east_out
        return sum(d.get(lo + k, 0) << k for k in range(width))


@dataclass(frozen=True)
class ActivityReport:
    cycles: int
    toggles: int
    toggles_per_cycle_mean: float

    def power(self, freq_hz: float, unit_energy: float = 1.0) -> float:
        """Modelled dynamic power (model, not a measurement)."""
        return self.toggles_per_cycle_mean * freq_hz * unit_energy


_ZERO = 0  # node id 0 is the constant-zero node


class FabricState:
    """One programmed fabric.  Single owner; stepping is exclusive."""

    def __init__(self, layout: FabricLayout, configs: dict, lanes: int = 1):
        self.layout = layout
        self.lanes = lanes
        self.mask = (1 << lanes) - 1
        self.cycle_count = 0
        self.toggle_count = 0
        self._vcd = None
        self._build(configs)

    # -- construction ------------------------------------------------------

    def _build(self, configs: dict) -> None:
        layout = self.layout
        W = layout.channels
        for r, c, kind in layout.configurable_tiles():
            if kind not in arch.ROUTABLE_KINDS:
                raise UnsupportedTile(
                    f"tile {kind.value} at ({r},{c}) is counted but not executable")

        self._lut_tiles = [(r, c) for r, c, t in layout.tiles() if t is Tile.LUT4AB]
        self._lut_tile_pos = {rc: i for i, rc in enumerate(self._lut_tiles)}
        self._dsp_tiles = [(r, c) for r, c, t in layout.tiles() if t is Tile.DSP_TOP]
        self._dsp_pos = {rc: i for i, rc in enumerate(self._dsp_tiles)}
        self._west_tiles = layout.io_tiles(Tile.WEST_IO)
        self._east_tiles = layout.io_tiles(Tile.EAST_IO)
        self.west_capacity = 32 * len(self._west_tiles)
        self.east_capacity = 32 * len(self._east_tiles)

        def fields(r, c, kind, payload):
            mw = mux_select_width(kind, W)
            pins = [arch.get_field(payload, arch.pin_sel_offset(kind, p, W), mw)
                    for p in range(arch.sinks(kind))]
            wires = {}
            for d in arch.DIRS:
                for i in range(W):
                    sel = arch.get_field(
                        payload, arch.wire_sel_offset(kind, d, i, W), mw)
                    if sel:
                        wires[(d, i)] = sel
            return pins, wires

        parsed = {}
        for r, c, kind in layout.configurable_tiles():
            payload = configs[(r, c)]
            pins, wires = fields(r, c, kind, payload)
            parsed[(r, c)] = (kind, payload, pins, wires)
            if kind is Tile.DSP_TOP and arch.get_field(payload, 0, 8) != 0:
                raise InvalidConfig(f"DSP at ({r},{c}): unknown mode bits")

        # Pass 1 -- discover live objects: configured wires, active or
        # referenced LUT slots, referenced IO input bits, live DSP slices.
        wire_id: dict[tuple, int] = {}
        slot_ref: set[tuple] = set()
        io_ref: set[tuple] = set()
        dsp_ref: set[tuple] = set()

        def note_source(r, c, kind, sel):
            dec = arch.decode_sel(kind, sel, W)
            if dec is None or dec[0] == "in":
                return
            idx = dec[1]
            if kind is Tile.LUT4AB:
                slot_ref.add((r, c, idx))
            elif kind is Tile.DSP_BOT:
                dsp_ref.add((r - 1, c))
            elif kind in (Tile.WEST_IO, Tile.EAST_IO):
                io_ref.add((r, c, idx))

        for (r, c), (kind, payload, pins, wires) in parsed.items():
            for (d, i), sel in wires.items():
                wire_id[(r, c, d, i)] = -1  # allocated below
                note_source(r, c, kind, sel)
            for p, sel in enumerate(pins):
                if sel:
                    note_source(r, c, kind, sel)
                    if kind is Tile.DSP_TOP:
                        dsp_ref.add((r, c))
            if kind is Tile.LUT4AB:
                for s in range(8):
                    tt = arch.get_field(payload, arch.lut_tt_offset(s), 16)
                    byp = arch.get_field(payload, arch.lut_bypass_offset(s), 1)
                    if tt or byp or any(pins[s * 4 + p] for p in range(4)):
                        slot_ref.add((r, c, s))

        # Allocate node ids: 0 is constant zero.
        nid = 1
        for key in sorted(wire_id):
            wire_id[key] = nid
            nid += 1
        slot_out = {}
        slot_d = {}
        for key in sorted(slot_ref):
            slot_out[key] = nid
            nid += 1
        io_node = {}
        for key in sorted(io_ref):
            io_node[key] = nid
            nid += 1
        acc_node = {}
        for rc in sorted(dsp_ref):
            acc_node[rc] = list(range(nid, nid + 20))
            nid += 20
        for key in sorted(slot_ref):
            slot_d[key] = nid  # LUT output ahead of the FF (or unused if bypassed)
            nid += 1
        self._n_nodes = nid

        def resolve(r, c, kind, sel):
            dec = arch.decode_sel(kind, sel, W)
            if dec is None:
                return _ZERO
            if dec[0] == "local":
                idx = dec[1]
                if kind is Tile.LUT4AB:
                    return slot_out[(r, c, idx)]
                if kind is Tile.DSP_BOT:
                    return acc_node[(r - 1, c)][idx]
                if kind in (Tile.WEST_IO, Tile.EAST_IO):
                    return io_node[(r, c, idx)]
                raise InvalidConfig(f"{kind.value} has no local source {idx}")
            _, d, i = dec
            nr, nc = arch.neighbor(r, c, d)
            return wire_id.get((nr, nc, arch.OPPOSITE[d], i), _ZERO)

        # Pass 2 -- emit combinational ops.
        ops = []  # (out_node, fn_or_None, p0, p1, p2, p3)
        self._names = {}
        for (r, c), (kind, payload, pins, wires) in sorted(parsed.items()):
            for (d, i), sel in sorted(wires.items()):
                out = wire_id[(r, c, d, i)]
                ops.append((out, None, resolve(r, c, kind, sel), 0, 0, 0))
                self._names[out] = f"w_r{r}c{c}_{arch.DIR_NAMES[d]}{i}"

        ffs = []  # (d_node, q_node, global ff index)
        for (r, c, s) in sorted(slot_ref):
            kind, payload, pins, _ = parsed[(r, c)]
            tt = arch.get_field(payload, arch.lut_tt_offset(s), 16)
            byp = arch.get_field(payload, arch.lut_bypass_offset(s), 1)
            srcs = [resolve(r, c, kind, pins[s * 4 + p]) for p in range(4)]
            dnode = slot_d[(r, c, s)]
            onode = slot_out[(r, c, s)]
            self._names[dnode] = f"d_r{r}c{c}s{s}"
            self._names[onode] = f"q_r{r}c{c}s{s}" if not byp else f"o_r{r}c{c}s{s}"
            if byp:
                ops.append((onode, lut_function(tt), *srcs))
                # d node unused for bypassed slots
            else:
                ops.append((dnode, lut_function(tt), *srcs))
                ffs.append((dnode, onode, self._lut_tile_pos[(r, c)] * 8 + s))
        self._ffs = ffs

        dsps = []  # (a pin nodes, b pin nodes, acc bit nodes, slice index)
        for (r, c) in sorted(dsp_ref):
            kind, payload, pins, _ = parsed[(r, c)]
            a = [resolve(r, c, Tile.DSP_TOP, pins[p]) for p in range(8)]
            b = [resolve(r, c, Tile.DSP_TOP, pins[8 + p]) for p in range(8)]
            bits = acc_node[(r, c)]
            for k, n in enumerate(bits):
                self._names[n] = f"acc{self._dsp_pos[(r, c)]}_b{k}"
            dsps.append((a, b, bits, self._dsp_pos[(r, c)]))
        self._dsps = dsps

        # IO output pins read their source node directly.
        self._out_pins = {"west": {}, "east": {}}
        for side, tiles in (("west", self._west_tiles), ("east", self._east_tiles)):
            for pos, (r, c) in enumerate(tiles):
                kind, payload, pins, _ = parsed[(r, c)]
                for p, sel in enumerate(pins):
                    if sel:
                        self._out_pins[side][pos * 32 + p] = resolve(r, c, kind, sel)
        self._in_nodes = {"west": {}, "east": {}}
        for side, tiles in (("west", self._west_tiles), ("east", self._east_tiles)):
            pos_of = {rc: i for i, rc in enumerate(tiles)}
            for (r, c, idx), node in io_node.items():
                if (r, c) in pos_of:
                    self._in_nodes[side][pos_of[(r, c)] * 32 + idx] = node
                    self._names[node] = f"in_{side}{pos_of[(r, c)] * 32 + idx}"

        self._order_ops(ops)

        cen = census(self.layout)
        self.ff = [0] * cen.logic_cells
        self.acc = [[0] * self.lanes for _ in range(cen.dsp_slices)]
        self.values = [0] * self._n_nodes
        self._pending = []
        self._first = True
        # Toggles are counted on wires, LUT outputs, FF outputs and
        # accumulator bits -- every node except IO inputs.
        self._count_node = bytearray(self._n_nodes)
        for out, *_ in self._ops:
            self._count_node[out] = 1
        for _, q, _ in ffs:
            self._count_node[q] = 1
        for _, _, bits, _ in dsps:
            for n in bits:
                self._count_node[n] = 1
        self.ff_toggles = [0] * cen.logic_cells

    def _order_ops(self, ops) -> None:
        produced = {op[0]: i for i, op in enumerate(ops)}
        indeg = [0] * len(ops)
        fanout_ops: dict[int, list[int]] = {}
        for i, op in enumerate(ops):
            for p in op[2:]:
                if p in produced:
                    fanout_ops.setdefault(produced[p], []).append(i)
                    indeg[i] += 1
        order = [i for i in range(len(ops)) if indeg[i] == 0]
        head = 0
        while head < len(order):
            for j in fanout_ops.get(order[head], ()):
                indeg[j] -= 1
                if indeg[j] == 0:
                    order.append(j)
            head += 1
        if len(order) != len(ops):
            stuck = [self._names.get(ops[i][0], str(ops[i][0]))
                     for i in range(len(ops)) if indeg[i] > 0]
            raise CombinationalLoop(
                f"combinational cycle through configured logic: {stuck[:8]}")
        self._ops = [ops[i] for i in order]
        # node -> op indices (in topological numbering) that consume it
        tmp: dict[int, list[int]] = {}
        for i, op in enumerate(self._ops):
            for p in op[2:]:
                if p:
                    tmp.setdefault(p, []).append(i)
        self._fanout = {n: tuple(v) for n, v in tmp.items()}

    # -- stepping -----------------------------------------------------------

    def _settle(self, dirty) -> None:
        val = self.values
        ops = self._ops
        mask = self.mask
        if self._first:
            # initial full evaluation in topological order
            self._first = False
            for out, fn, p0, p1, p2, p3 in ops:
                new = val[p0] if fn is None else fn(val[p0], val[p1], val[p2], val[p3], mask)
                if new != val[out]:
                    self.toggle_count += (new ^ val[out]).bit_count()
                    val[out] = new
            return
        fanout = self._fanout
        count = self._count_node
        heap: list[int] = []
        inq = bytearray(len(ops))
        for n in dirty:
            for oi in fanout.get(n, ()):
                if not inq[oi]:
                    inq[oi] = 1
                    heapq.heappush(heap, oi)
        while heap:
            oi = heapq.heappop(heap)
            inq[oi] = 0
            out, fn, p0, p1, p2, p3 = ops[oi]
            new = val[p0] if fn is None else fn(val[p0], val[p1], val[p2], val[p3], mask)
            old = val[out]
            if new != old:
                val[out] = new
                if count[out]:
                    self.toggle_count += (new ^ old).bit_count()
                for oj in fanout.get(out, ()):
                    if not inq[oj]:
                        inq[oj] = 1
                        heapq.heappush(heap, oj)

    def step(self, io: IoFrame | None = None) -> IoFrame:
        """One clock cycle; returns the frame sampled before the edge."""
        val = self.values
        dirty = self._pending
        if io is not None:
            for side, cap in (("west", self.west_capacity), ("east", self.east_capacity)):
                bits = io.west_in if side == "west" else io.east_in
                nodes = self._in_nodes[side]
                for idx, node in nodes.items():
                    new = bits.get(idx, 0) & self.mask
                    if val[node] != new:
                        val[node] = new
                        dirty.append(node)
                for idx in bits:
                    if not 0 <= idx < cap:
                        raise FabricSimError(f"{side} input bit {idx} out of range")
        else:
            for nodes in self._in_nodes.values():
                for node in nodes.values():
                    if val[node]:
                        val[node] = 0
                        dirty.append(node)
        self._settle(dirty)

        out = IoFrame()
        for side, target in (("west", out.west_out), ("east", out.east_out)):
            for idx, node in self._out_pins[side].items():
                target[idx] = val[node]
        if io is not None:
            out.west_in = io.west_in
            out.east_in = io.east_in

        if self._vcd is not None:
            self._vcd_sample()

        # clock edge
        pending = []
        ff = self.ff
        for dnode, qnode, ffi in self._ffs:
            d = val[dnode]
            q = ff[ffi]
            if d != q:
                flips = (d ^ q).bit_count()
                self.toggle_count += flips
                self.ff_toggles[ffi] += flips
                ff[ffi] = d
                val[qnode] = d
                pending.append(qnode)
        for a_nodes, b_nodes, bits, slice_idx in self._dsps:
            accs = self.acc[slice_idx]
            changed = False
            for lane in range(self.lanes):
                a = sum(((val[a_nodes[i]] >> lane) & 1) << i for i in range(8))
                b = sum(((val[b_nodes[i]] >> lane) & 1) << i for i in range(8))
                new = dsp_mac(a, b, accs[lane])
                if new != accs[lane]:
                    accs[lane] = new
                    changed = True
            if changed:
                for k, node in enumerate(bits):
                    new = 0
                    for lane in range(self.lanes):
                        new |= ((accs[lane] >> k) & 1) << lane
                    if val[node] != new:
                        self.toggle_count += (val[node] ^ new).bit_count()
                        val[node] = new
                        pending.append(node)
        self._pending = pending
        self.cycle_count += 1
        return out

    def reset(self) -> None:
        """Return to the post-load state (registers cleared, counters zeroed)."""
        self.values = [0] * self._n_nodes
        self.ff = [0] * len(self.ff)
        self.acc = [[0] * self.lanes for _ in self.acc]
        self.ff_toggles = [0] * len(self.ff_toggles)
        self.cycle_count = 0
        self.toggle_count = 0
        self._pending = []
        self._first = True

    # -- inspection ----------------------------------------------------------

    @property
    def ff_values(self) -> list[int]:
        return list(self.ff)

    @property
    def dsp_accumulators(self) -> list:
        return [a[0] if self.lanes == 1 else list(a) for a in self.acc]

    def ff_index(self, r: int, c: int, slot: int) -> int:
        return self._lut_tile_pos[(r, c)] * 8 + slot

    # -- waveform dump ---------------------------------------------------------

    def start_vcd(self, fileobj) -> None:
        """Begin a VCD dump of every tracked node (single-lane only)."""
        if self.lanes != 1:
            raise FabricSimError("VCD dump supports single-lane simulation only")
        idents = {}
        for i, node in enumerate(sorted(self._names)):
            idents[node] = f"n{i}"
        fileobj.write("$timescale 1ns $end\n$scope module fabric $end\n")
        for node, ident in idents.items():
            fileobj.write(f"$var wire 1 {ident} {self._names[node]} $end\n")
        fileobj.write("$upscope $end\n$enddefinitions $end\n")
        self._vcd = (fileobj, idents, {})

    def _vcd_sample(self) -> None:
        fileobj, idents, last = self._vcd
        fileobj.write(f"#{self.cycle_count}\n")
        for node, ident in idents.items():
            v = self.values[node] & 1
            if last.get(node) != v:
                last[node] = v
                fileobj.write(f"{v}{ident}\n")


def load(layout: FabricLayout, image: bytes, lanes: int = 1) -> FabricState:
    """Decode ``image`` against ``layout`` and build a simulatable state."""
    return FabricState(layout, decode_bitstream(image, layout), lanes=lanes)


def load_configs(layout: FabricLayout, configs: dict, lanes: int = 1) -> FabricState:
    return FabricState(layout, configs, lanes=lanes)


def step(state: FabricState, io: IoFrame | None = None) -> IoFrame:
    return state.step(io)


def activity_report(state: FabricState) -> ActivityReport:
    if state.cycle_count == 0:
        raise NoCyclesRun("no cycles have been simulated")
    return ActivityReport(state.cycle_count, state.toggle_count,
                          state.toggle_count / state.cycle_count)
