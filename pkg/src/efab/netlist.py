"""LUT4-level circuit IR and its golden two-phase simulator.

Cells are LUT4s, D flip-flops, DSP multiply-accumulators, constants and
1-bit ports; nets are integer ids with exactly one driver.  The
simulator settles combinational logic in topological order, samples the
outputs, then clocks every register simultaneously, so outputs of step k
are a pure function of (netlist, initial state, input frames 1..k).

Values are plain ints carrying one simulation lane per bit, which lets
the same code run a single trace (lane count 1) or many independent
vectors bit-parallel.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

__all__ = [
    "Cell",
    "Netlist",
    "NetlistError",
    "CombinationalLoop",
    "UnconnectedPin",
    "NetlistSim",
    "netlist_sim",
    "lut_function",
    "truth_table",
    "parse_netlist",
    "render_netlist",
]

LUT4 = "lut4"
DFF = "dff"
DSP = "dsp"
INPORT = "inport"
OUTPORT = "outport"
CONST = "const"

_PIN_COUNTS = {LUT4: (4, 1), DFF: (1, 1), DSP: (16, 20),
               INPORT: (0, 1), OUTPORT: (1, 0), CONST: (0, 1)}


class NetlistError(Exception):
    pass


class CombinationalLoop(NetlistError):
    pass


class UnconnectedPin(NetlistError):
    pass


@dataclass
class Cell:
    name: str
    kind: str
    ins: list  # net ids; None marks an unconnected (insensitive) LUT pin
    outs: list
    tt: int = 0  # lut4 truth table, or const value (0/1)


def _tt_sensitive(tt: int, pin: int) -> bool:
    mask = 1 << pin
    return any((tt >> i) & 1 != (tt >> (i ^ mask)) & 1 for i in range(16))


def truth_table(fn, arity: int) -> int:
    """Build a 16-bit LUT table from a boolean function of ``arity`` inputs.

    Unused high inputs are don't-care (the table is replicated), so the
    resulting LUT is insensitive to them.
    """
    tt = 0
    for idx in range(16):
        bits = [(idx >> i) & 1 for i in range(arity)]
        if fn(*bits):
            tt |= 1 << idx
    return tt


def _shannon(tt: int, nvars: int, names) -> str:
    full = (1 << (1 << nvars)) - 1
    if tt == 0:
        return "0"
    if tt == full:
        return "M"
    half = 1 << (nvars - 1)
    lo = tt & ((1 << half) - 1)
    hi = tt >> half
    if lo == hi:
        return _shannon(lo, nvars - 1, names)
    v = names[nvars - 1]
    lo_e = _shannon(lo, nvars - 1, names)
    hi_e = _shannon(hi, nvars - 1, names)
    if lo == 0:
        return f"({v}&{hi_e})"
    if hi == 0:
        return f"(({v}^M)&{lo_e})"
    if hi == (1 << half) - 1:
        return f"({v}|{lo_e})"
    if lo == (1 << half) - 1:
        return f"(({v}^M)|({v}&{hi_e}))"
    return f"((({v}^M)&{lo_e})|({v}&{hi_e}))"


@lru_cache(maxsize=None)
def lut_function(tt: int):
    """Compile a 16-bit truth table to ``f(a, b, c, d, M) -> int``.

    ``M`` is the lane mask; NOT is implemented as XOR with M so the same
    function works for one lane or many.
    """
    expr = _shannon(tt & 0xFFFF, 4, ("a", "b", "c", "d"))
    return eval(f"lambda a,b,c,d,M: {expr}")  # noqa: S307 - generated from tt


class Netlist:
    """Cell/net container with builder helpers and validation."""

    def __init__(self, name: str = ""):
        self.name = name
        self.cells: list[Cell] = []
        self.n_nets = 0
        self.inputs: dict[str, int] = {}   # port name -> net, insertion order
        self.outputs: dict[str, int] = {}

    # -- construction -----------------------------------------------------

    def new_net(self) -> int:
        self.n_nets += 1
        return self.n_nets - 1

    def _add(self, cell: Cell) -> Cell:
        self.cells.append(cell)
        return cell

    def add_input(self, port: str) -> int:
        if port in self.inputs or port in self.outputs:
            raise NetlistError(f"duplicate port name {port!r}")
        net = self.new_net()
        self._add(Cell(port, INPORT, [], [net]))
        self.inputs[port] = net
        return net

    def add_output(self, port: str, net: int) -> None:
        if port in self.inputs or port in self.outputs:
            raise NetlistError(f"duplicate port name {port!r}")
        self._add(Cell(port, OUTPORT, [net], []))
        self.outputs[port] = net

    def add_lut(self, tt: int, ins, name: str = "") -> int:
        ins = list(ins) + [None] * (4 - len(ins))
        out = self.new_net()
        self._add(Cell(name or f"lut{len(self.cells)}", LUT4, ins, [out], tt & 0xFFFF))
        return out

    def add_dff(self, d: int, name: str = "", q: int | None = None) -> int:
        if q is None:
            q = self.new_net()
        self._add(Cell(name or f"dff{len(self.cells)}", DFF, [d], [q]))
        return q

    def add_const(self, value: int, name: str = "") -> int:
        net = self.new_net()
        self._add(Cell(name or f"const{len(self.cells)}", CONST, [], [net], value & 1))
        return net

    def add_dsp(self, a_nets, b_nets, name: str = "") -> list[int]:
        outs = [self.new_net() for _ in range(20)]
        self._add(Cell(name or f"dsp{len(self.cells)}", DSP,
                       list(a_nets) + list(b_nets), outs))
        return outs

    # -- validation -------------------------------------------------------

    def drivers(self) -> dict[int, tuple[int, int]]:
        """net -> (cell index, output position); raises on double drive."""
        drv: dict[int, tuple[int, int]] = {}
        for ci, cell in enumerate(self.cells):
            for pos, net in enumerate(cell.outs):
                if net in drv:
                    raise NetlistError(
                        f"net {net} driven by both {self.cells[drv[net][0]].name!r} "
                        f"and {cell.name!r}")
                drv[net] = (ci, pos)
        return drv

    def sinks(self) -> dict[int, list[tuple[int, int]]]:
        snk: dict[int, list[tuple[int, int]]] = {}
        for ci, cell in enumerate(self.cells):
            for pos, net in enumerate(cell.ins):
                if net is not None:
                    snk.setdefault(net, []).append((ci, pos))
        return snk

    def validate(self) -> None:
        drv = self.drivers()
        for cell in self.cells:
            n_in, n_out = _PIN_COUNTS[cell.kind]
            if len(cell.ins) != n_in or len(cell.outs) != n_out:
                raise NetlistError(
                    f"cell {cell.name!r} ({cell.kind}) has {len(cell.ins)} in / "
                    f"{len(cell.outs)} out pins, expected {n_in}/{n_out}")
            for pos, net in enumerate(cell.ins):
                if net is None:
                    if cell.kind == LUT4 and not _tt_sensitive(cell.tt, pos):
                        continue
                    raise UnconnectedPin(
                        f"cell {cell.name!r} input pin {pos} is unconnected")
                if net not in drv:
                    raise UnconnectedPin(
                        f"cell {cell.name!r} input pin {pos} reads undriven net {net}")
        self._topo_luts(drv)

    def _topo_luts(self, drv) -> list[int]:
        """Topological order of LUT cells; raises CombinationalLoop."""
        lut_of_net = {}
        for ci, cell in enumerate(self.cells):
            if cell.kind == LUT4:
                lut_of_net[cell.outs[0]] = ci
        indeg = {}
        fanout: dict[int, list[int]] = {}
        lut_ids = [ci for ci, c in enumerate(self.cells) if c.kind == LUT4]
        for ci in lut_ids:
            deg = 0
            for net in self.cells[ci].ins:
                if net is not None and net in lut_of_net:
                    fanout.setdefault(lut_of_net[net], []).append(ci)
                    deg += 1
            indeg[ci] = deg
        order = [ci for ci in lut_ids if indeg[ci] == 0]
        head = 0
        while head < len(order):
            ci = order[head]
            head += 1
            for nxt in fanout.get(ci, ()):
                indeg[nxt] -= 1
                if indeg[nxt] == 0:
                    order.append(nxt)
        if len(order) != len(lut_ids):
            stuck = sorted(self.cells[ci].name for ci in lut_ids if indeg[ci] > 0)
            raise CombinationalLoop(f"combinational cycle through {stuck[:8]}")
        return order

    def stats(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for cell in self.cells:
            counts[cell.kind] = counts.get(cell.kind, 0) + 1
        return counts


class NetlistSim:
    """Incremental golden simulator over a validated netlist."""

    def __init__(self, netlist: Netlist, lanes: int = 1):
        netlist.validate()
        self.netlist = netlist
        self.lanes = lanes
        self.mask = (1 << lanes) - 1
        self._order = netlist._topo_luts(netlist.drivers())
        self._luts = [(netlist.cells[ci], lut_function(netlist.cells[ci].tt))
                      for ci in self._order]
        self._dffs = [c for c in netlist.cells if c.kind == DFF]
        self._dsps = [c for c in netlist.cells if c.kind == DSP]
        self.reset()

    def reset(self) -> None:
        self.values = [0] * self.netlist.n_nets
        self.ff = {id(c): 0 for c in self._dffs}
        self.acc = {id(c): [0] * self.lanes for c in self._dsps}
        self.cycle = 0

    def _net(self, net) -> int:
        return 0 if net is None else self.values[net]

    def step(self, inputs: dict) -> dict:
        """One clock cycle; returns {output port: lane int}."""
        nl = self.netlist
        v = self.values
        M = self.mask
        for port, net in nl.inputs.items():
            v[net] = inputs.get(port, 0) & M
        for cell in nl.cells:
            if cell.kind == CONST:
                v[cell.outs[0]] = M if cell.tt else 0
        for cell in self._dffs:
            v[cell.outs[0]] = self.ff[id(cell)]
        for cell in self._dsps:
            accs = self.acc[id(cell)]
            for bit in range(20):
                word = 0
                for lane in range(self.lanes):
                    word |= ((accs[lane] >> bit) & 1) << lane
                v[cell.outs[bit]] = word
        for cell, fn in self._luts:
            a, b, c, d = (self._net(n) for n in cell.ins)
            v[cell.outs[0]] = fn(a, b, c, d, M)
        out = {port: v[net] for port, net in nl.outputs.items()}
        # clock edge
        for cell in self._dffs:
            self.ff[id(cell)] = self._net(cell.ins[0])
        for cell in self._dsps:
            accs = self.acc[id(cell)]
            for lane in range(self.lanes):
                a = sum(((self._net(cell.ins[i]) >> lane) & 1) << i for i in range(8))
                b = sum(((self._net(cell.ins[8 + i]) >> lane) & 1) << i for i in range(8))
                accs[lane] = (accs[lane] + a * b) & 0xFFFFF
        self.cycle += 1
        return out


def netlist_sim(netlist: Netlist, trace) -> list[dict]:
    """Run a full input trace; one output valuation per input frame."""
    sim = NetlistSim(netlist)
    return [sim.step(frame) for frame in trace]


# -- text format ----------------------------------------------------------
#
# One cell per line; nets are symbolic names, '-' marks an unused LUT pin.
#
#   input  <port> <net>
#   output <port> <net>
#   lut    <name> <tt-hex> <in0> <in1> <in2> <in3> <out>
#   dff    <name> <d> <q>
#   dsp    <name> <a0..a7> <b0..b7> <out0..out19>
#   const  <name> <0|1> <out>

def render_netlist(netlist: Netlist) -> str:
    names: dict[int, str] = {}

    def net(n):
        if n is None:
            return "-"
        if n not in names:
            names[n] = f"n{len(names)}"  # canonical first-use numbering
        return names[n]

    lines = [f"# netlist {netlist.name}" if netlist.name else "# netlist"]
    for cell in netlist.cells:
        if cell.kind == INPORT:
            lines.append(f"input {cell.name} {net(cell.outs[0])}")
        elif cell.kind == OUTPORT:
            lines.append(f"output {cell.name} {net(cell.ins[0])}")
        elif cell.kind == LUT4:
            pins = " ".join(net(n) for n in cell.ins)
            lines.append(f"lut {cell.name} {cell.tt:04x} {pins} {net(cell.outs[0])}")
        elif cell.kind == DFF:
            lines.append(f"dff {cell.name} {net(cell.ins[0])} {net(cell.outs[0])}")
        elif cell.kind == CONST:
            lines.append(f"const {cell.name} {cell.tt} {net(cell.outs[0])}")
        elif cell.kind == DSP:
            pins = " ".join(net(n) for n in cell.ins + cell.outs)
            lines.append(f"dsp {cell.name} {pins}")
    return "\n".join(lines) + "\n"


def parse_netlist(text: str) -> Netlist:
    nl = Netlist()
    names: dict[str, int] = {}

    def net(tok):
        if tok == "-":
            return None
        if tok not in names:
            names[tok] = nl.new_net()
        return names[tok]

    for lineno, raw in enumerate(text.splitlines(), 1):
        if lineno == 1 and raw.startswith("# netlist "):
            nl.name = raw[len("# netlist "):].strip()
            continue
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            kind = tok[0]
            if kind == "input":
                _, port, n = tok
                if port in nl.inputs or port in nl.outputs:
                    raise NetlistError(f"duplicate port {port!r}")
                nl.cells.append(Cell(port, INPORT, [], [net(n)]))
                nl.inputs[port] = names[n]
            elif kind == "output":
                _, port, n = tok
                if port in nl.inputs or port in nl.outputs:
                    raise NetlistError(f"duplicate port {port!r}")
                nl.cells.append(Cell(port, OUTPORT, [net(n)], []))
                nl.outputs[port] = names[n]
            elif kind == "lut":
                _, name, tt, i0, i1, i2, i3, out = tok
                nl.cells.append(Cell(name, LUT4, [net(i0), net(i1), net(i2), net(i3)],
                                     [net(out)], int(tt, 16)))
            elif kind == "dff":
                _, name, d, q = tok
                nl.cells.append(Cell(name, DFF, [net(d)], [net(q)]))
            elif kind == "const":
                _, name, val, out = tok
                nl.cells.append(Cell(name, CONST, [], [net(out)], int(val) & 1))
            elif kind == "dsp":
                name = tok[1]
                pins = tok[2:]
                if len(pins) != 36:
                    raise NetlistError("dsp needs 16 inputs + 20 outputs")
                nl.cells.append(Cell(name, DSP, [net(p) for p in pins[:16]],
                                     [net(p) for p in pins[16:]]))
            else:
                raise NetlistError(f"unknown cell kind {kind!r}")
        except NetlistError:
            raise
        except Exception as exc:
            raise NetlistError(f"line {lineno}: {exc}") from exc
    nl.validate()
    return nl
