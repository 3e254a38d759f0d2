"""Negotiated-congestion maze routing over the island-style wire graph.

Routing works at channel granularity: a node is one directed wire bundle
(tile, direction) holding ``channels`` interchangeable wires.  Every net
is re-routed each iteration by A* from its source (or its partial route
tree) to each sink, with wire cost = base + history + present-overuse
penalty; the present penalty grows until every bundle fits its capacity,
then concrete wire indices are assigned so no wire carries two nets.
Bounded at 50 iterations, after which the overfull nets are reported.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass

from . import arch
from .fabric import FabricLayout, Tile
from .netlist import CONST, DFF, DSP, INPORT, LUT4, OUTPORT
from .place import Placement

__all__ = ["RouteError", "Unroutable", "NetRoute", "RoutingResult", "route"]

log = logging.getLogger(__name__)

MAX_ITERATIONS = 50

SRC = ("src",)  # tree root marker: the net's local source at its own tile


class RouteError(Exception):
    pass


class Unroutable(RouteError):
    def __init__(self, failing_nets):
        names = ", ".join(str(n) for n in failing_nets[:10])
        super().__init__(f"{len(failing_nets)} nets unroutable: {names}")
        self.failing_nets = failing_nets


@dataclass
class NetRoute:
    """One routed net: source terminal, wire tree and sink attachments.

    ``wires`` maps (r, c, direction, index) -> parent, where parent is
    another wire key or SRC.  ``sinks`` maps (cell index, pin position)
    -> the entity feeding that pin (wire key or SRC).
    """

    net: int
    source_tile: tuple
    source_idx: int
    wires: dict
    sinks: dict


@dataclass
class RoutingResult:
    nets: dict  # net id -> NetRoute
    congestion: int  # max nets on any single wire; 1 on success
    iterations: int

    def wire_count(self) -> int:
        return sum(len(nr.wires) for nr in self.nets.values())


def _terminals(placement: Placement):
    """Per-net source (tile, local source idx) and sinks (cell, pin, tile,
    local pin idx)."""
    nl = placement.netlist
    asg = placement.assignment
    sources = {}
    sinks: dict[int, list] = {}
    for ci, cell in enumerate(nl.cells):
        r, c, slot = asg[ci]
        if cell.kind in (LUT4, DFF, CONST):
            for net in cell.outs:
                sources[net] = ((r, c), slot)
            for pos, net in enumerate(cell.ins):
                if net is not None:
                    sinks.setdefault(net, []).append((ci, pos, (r, c), slot * 4 + pos))
        elif cell.kind == DSP:
            for pos, net in enumerate(cell.outs):
                sources[net] = ((r + 1, c), pos)  # accumulator bits on DSP_bot
            for pos, net in enumerate(cell.ins):
                if net is not None:
                    sinks.setdefault(net, []).append((ci, pos, (r, c), pos))
        elif cell.kind == INPORT:
            sources[cell.outs[0]] = ((r, c), slot)
        elif cell.kind == OUTPORT:
            net = cell.ins[0]
            sinks.setdefault(net, []).append((ci, 0, (r, c), slot))
    return sources, sinks


def route(placement: Placement, layout: FabricLayout | None = None) -> RoutingResult:
    """Route every multi-terminal net; congestion == 1 or Unroutable."""
    layout = layout or placement.layout
    placement.validate()
    W = layout.channels
    sources, sinks = _terminals(placement)
    todo = sorted(net for net in sinks if net in sources)
    for net in sinks:
        if net not in sources:
            raise RouteError(f"net {net} has sinks but no placed source")

    # channel occupancy bookkeeping
    occ: dict[tuple, int] = {}
    hist: dict[tuple, float] = {}
    routes: dict[int, NetRoute] = {}

    def land(ch):
        return arch.neighbor(ch[0], ch[1], ch[2])

    def channel_exists(r, c, d):
        if not arch.routable(layout, r, c):
            return False
        nr, nc = arch.neighbor(r, c, d)
        return arch.routable(layout, nr, nc)

    def net_cost(ch, own: set, pres_fac: float) -> float:
        load = occ.get(ch, 0) + (0 if ch in own else 1)
        over = max(0, load - W)
        return 1.0 + hist.get(ch, 0.0) + pres_fac * over

    def route_net(net: int, pres_fac: float) -> NetRoute:
        (sr, sc), sidx = sources[net]
        tree: dict[tuple, tuple] = {}  # channel -> parent (channel or SRC)
        attach: dict[tuple, tuple] = {}
        for ci, pos, (tr, tc), pinidx in sorted(sinks[net], key=lambda s: (s[0], s[1])):
            # A* from the current tree to the sink tile
            counter = 0
            heap = []
            seen: dict[tuple, float] = {}
            came: dict[tuple, tuple] = {}

            def push(state, g, parent):
                nonlocal counter
                if state in seen and seen[state] <= g:
                    return
                seen[state] = g
                came[state] = parent
                lr, lc = (sr, sc) if state is SRC else land(state)
                h = abs(lr - tr) + abs(lc - tc)
                counter += 1
                heapq.heappush(heap, (g + h, counter, g, state))

            push(SRC, 0.0, None)
            for ch in sorted(tree):
                push(ch, 0.0, "tree")
            goal = None
            while heap:
                _, _, g, state = heapq.heappop(heap)
                if seen.get(state, -1) != g:
                    continue
                lr, lc = (sr, sc) if state is SRC else land(state)
                if (lr, lc) == (tr, tc):
                    goal = state
                    break
                for d in arch.DIRS:
                    if channel_exists(lr, lc, d):
                        ch = (lr, lc, d)
                        push(ch, g + net_cost(ch, tree.keys(), pres_fac), state)
            if goal is None:
                raise Unroutable([net])
            # splice the new path into the route tree
            state = goal
            while state is not SRC and state not in tree:
                parent = came[state]
                tree[state] = parent
                state = parent
            attach[(ci, pos)] = goal
        return NetRoute(net, (sr, sc), sidx, tree, attach)

    pres_fac = 0.5
    iterations = 0
    for iteration in range(1, MAX_ITERATIONS + 1):
        iterations = iteration
        occ.clear()
        routes.clear()
        for net in todo:
            nr = route_net(net, pres_fac)
            routes[net] = nr
            for ch in nr.wires:
                occ[ch] = occ.get(ch, 0) + 1
        over = {ch: n for ch, n in occ.items() if n > W}
        if not over:
            break
        for ch, n in over.items():
            hist[ch] = hist.get(ch, 0.0) + (n - W)
        pres_fac = min(pres_fac * 2, 1e4)
        log.debug("route iteration %d: %d overfull channels", iteration, len(over))
    else:
        over = {ch for ch, n in occ.items() if n > W}
        failing = sorted(net for net, nr in routes.items()
                         if any(ch in over for ch in nr.wires))
        raise Unroutable(failing)

    # assign concrete wire indices per channel, deterministically by net id
    index_of: dict[tuple, dict[int, int]] = {}
    for ch in occ:
        users = sorted(net for net, nr in routes.items() if ch in nr.wires)
        index_of[ch] = {net: i for i, net in enumerate(users)}

    final: dict[int, NetRoute] = {}
    for net, nr in routes.items():
        def wire_key(ch):
            return (*ch[:3], index_of[ch][net])
        wires = {}
        for ch, parent in nr.wires.items():
            wires[wire_key(ch)] = SRC if parent is SRC else wire_key(parent)
        sinks_final = {}
        for sink, entity in nr.sinks.items():
            sinks_final[sink] = SRC if entity is SRC else wire_key(entity)
        final[net] = NetRoute(net, nr.source_tile, nr.source_idx, wires, sinks_final)

    result = RoutingResult(final, 1 if final else 0, iterations)
    _validate(result, placement, layout)
    return result


def _validate(result: RoutingResult, placement: Placement, layout: FabricLayout):
    """Machine-check: wire exclusivity and source-to-sink connectivity."""
    used: dict[tuple, int] = {}
    for net, nr in result.nets.items():
        for wire in nr.wires:
            if wire in used:
                raise RouteError(f"wire {wire} shared by nets {used[wire]} and {net}")
            used[wire] = net
        for (ci, pos), entity in nr.sinks.items():
            hop = entity
            steps = 0
            while hop is not SRC:
                if hop not in nr.wires:
                    raise RouteError(f"net {net}: sink path detached at {hop}")
                hop = nr.wires[hop]
                steps += 1
                if steps > 10_000:
                    raise RouteError(f"net {net}: cyclic wire tree")
