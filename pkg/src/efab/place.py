"""Simulated-annealing placement of netlist cells onto tile slots.

Resource classes: LUT4/DFF/Const cells take one of the eight LUT+FF
slots per LUT4AB tile, DSP cells take a DSP_top/bot pair, and 1-bit
ports take IO pad slots (32 in / 32 out per IO tile).  The annealer
minimises total half-perimeter wirelength with the classic recipe:
start temperature calibrated so roughly half of uphill moves accept,
geometric cooling by 0.95, 100 x cells moves per temperature, and a
freeze-out exit.  Runs are deterministic for a fixed seed.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from math import exp

from .fabric import FabricLayout, Tile
from .netlist import CONST, DFF, DSP, INPORT, LUT4, OUTPORT, Netlist

__all__ = ["PlaceError", "CapacityExceeded", "Placement", "place"]

log = logging.getLogger(__name__)

_CLASS_OF_KIND = {LUT4: "logic", DFF: "logic", CONST: "logic",
                  DSP: "dsp", INPORT: "io_in", OUTPORT: "io_out"}


class PlaceError(Exception):
    pass


class CapacityExceeded(PlaceError):
    def __init__(self, resource: str, need: int, have: int):
        super().__init__(f"{resource}: design needs {need}, fabric has {have}")
        self.resource = resource
        self.need = need
        self.have = have


@dataclass
class Placement:
    """cell index -> (row, col, slot), plus the design it realises."""

    netlist: Netlist
    layout: FabricLayout
    assignment: dict
    seed: int

    def io_frame_bit(self, port: str) -> tuple[str, int]:
        """Map a 1-bit port to its (side, IO frame index)."""
        cells = self.netlist.cells
        for ci, cell in enumerate(cells):
            if cell.name == port and cell.kind in (INPORT, OUTPORT):
                r, c, slot = self.assignment[ci]
                side = "west" if self.layout.grid[r][c] is Tile.WEST_IO else "east"
                tiles = self.layout.io_tiles(self.layout.grid[r][c])
                return side, tiles.index((r, c)) * 32 + slot
        raise PlaceError(f"no placed port named {port!r}")

    def validate(self) -> None:
        """Machine-check legality: all cells placed, slots unique, kinds match."""
        seen = set()
        for ci, cell in enumerate(self.netlist.cells):
            if ci not in self.assignment:
                raise PlaceError(f"cell {cell.name!r} is unplaced")
            r, c, slot = self.assignment[ci]
            key = (_CLASS_OF_KIND[cell.kind], r, c, slot)
            if key in seen:
                raise PlaceError(f"slot {key} assigned twice")
            seen.add(key)
            kind = self.layout.grid[r][c]
            ok = {"logic": kind is Tile.LUT4AB and 0 <= slot < 8,
                  "dsp": kind is Tile.DSP_TOP,
                  "io_in": kind in (Tile.WEST_IO, Tile.EAST_IO) and 0 <= slot < 32,
                  "io_out": kind in (Tile.WEST_IO, Tile.EAST_IO) and 0 <= slot < 32}
            if not ok[_CLASS_OF_KIND[cell.kind]]:
                raise PlaceError(
                    f"cell {cell.name!r} ({cell.kind}) placed on {kind.value} ({r},{c})")


def _slot_spaces(layout: FabricLayout) -> dict[str, list[tuple[int, int, int]]]:
    spaces: dict[str, list] = {"logic": [], "dsp": [], "io_in": [], "io_out": []}
    for r, c, t in layout.tiles():
        if t is Tile.LUT4AB:
            spaces["logic"] += [(r, c, s) for s in range(8)]
        elif t is Tile.DSP_TOP:
            spaces["dsp"].append((r, c, 0))
        elif t in (Tile.WEST_IO, Tile.EAST_IO):
            spaces["io_in"] += [(r, c, b) for b in range(32)]
            spaces["io_out"] += [(r, c, b) for b in range(32)]
    return spaces


def _io_slot_of(layout: FabricLayout, side: str, index: int) -> tuple[int, int, int]:
    kind = Tile.WEST_IO if side == "west" else Tile.EAST_IO
    tiles = layout.io_tiles(kind)
    if index >= 32 * len(tiles):
        raise PlaceError(f"{side} IO bit {index} beyond capacity {32 * len(tiles)}")
    return (*tiles[index // 32], index % 32)


def place(netlist: Netlist, layout: FabricLayout, seed: int = 0,
          io_constraints: dict | None = None) -> Placement:
    """Anneal a legal placement minimising half-perimeter wirelength.

    ``io_constraints`` pins ports to IO frame bits: {port: (side, index)}.
    Raises CapacityExceeded when any resource class does not fit.
    """
    netlist.validate()
    rng = random.Random(seed)
    spaces = _slot_spaces(layout)
    cells_by_class: dict[str, list[int]] = {k: [] for k in spaces}
    for ci, cell in enumerate(netlist.cells):
        cells_by_class[_CLASS_OF_KIND[cell.kind]].append(ci)
    for cls, members in cells_by_class.items():
        if len(members) > len(spaces[cls]):
            raise CapacityExceeded(cls, len(members), len(spaces[cls]))

    assignment: dict[int, tuple[int, int, int]] = {}
    fixed: set[int] = set()
    name_to_cell = {cell.name: ci for ci, cell in enumerate(netlist.cells)
                    if cell.kind in (INPORT, OUTPORT)}
    for port, (side, index) in sorted((io_constraints or {}).items()):
        if port not in name_to_cell:
            raise PlaceError(f"io constraint names unknown port {port!r}")
        ci = name_to_cell[port]
        assignment[ci] = _io_slot_of(layout, side, index)
        fixed.add(ci)

    used = {(_CLASS_OF_KIND[netlist.cells[ci].kind], *slot)
            for ci, slot in assignment.items()}
    for cls, members in cells_by_class.items():
        free = [s for s in spaces[cls] if (cls, *s) not in used]
        rng.shuffle(free)
        todo = [ci for ci in members if ci not in fixed]
        for ci, slot in zip(todo, free):
            assignment[ci] = slot

    placement = Placement(netlist, layout, assignment, seed)
    if not netlist.cells:
        return placement

    # net -> participating cells (driver + sinks), only multi-cell nets matter
    drv = netlist.drivers()
    members_of: dict[int, list[int]] = {}
    for net, (ci, _) in drv.items():
        members_of[net] = [ci]
    for ci, cell in enumerate(netlist.cells):
        for net in cell.ins:
            if net is not None:
                members_of[net].append(ci)
    nets = [tuple(dict.fromkeys(m)) for m in members_of.values() if len(set(m)) > 1]
    nets_of_cell: dict[int, list[int]] = {}
    for ni, members in enumerate(nets):
        for ci in members:
            nets_of_cell.setdefault(ci, []).append(ni)

    def hpwl(ni: int) -> int:
        rows = [assignment[ci][0] for ci in nets[ni]]
        cols = [assignment[ci][1] for ci in nets[ni]]
        return (max(rows) - min(rows)) + (max(cols) - min(cols))

    net_cost = [hpwl(ni) for ni in range(len(nets))]
    cost = sum(net_cost)

    movable = sorted(set(ci for ci in assignment) - fixed)
    movable = [ci for ci in movable if nets_of_cell.get(ci)]
    if not movable or not nets:
        return placement

    slot_owner = {(_CLASS_OF_KIND[netlist.cells[ci].kind], *slot): ci
                  for ci, slot in assignment.items()}

    def try_move(ci: int, target: tuple[int, int, int], apply: bool):
        cls = _CLASS_OF_KIND[netlist.cells[ci].kind]
        other = slot_owner.get((cls, *target))
        if (other is not None and (other in fixed or other == ci)) \
                or assignment[ci] == target:
            return None
        affected = set(nets_of_cell.get(ci, ()))
        if other is not None:
            affected |= set(nets_of_cell.get(other, ()))
        old = sum(net_cost[ni] for ni in affected)
        src = assignment[ci]
        assignment[ci] = target
        if other is not None:
            assignment[other] = src
        new = sum(hpwl(ni) for ni in affected)
        if not apply:
            assignment[ci] = src
            if other is not None:
                assignment[other] = target
            return new - old
        for ni in affected:
            net_cost[ni] = hpwl(ni)
        slot_owner[(cls, *target)] = ci
        if other is not None:
            slot_owner[(cls, *src)] = other
        else:
            del slot_owner[(cls, *src)]
        return new - old

    def random_target(ci: int) -> tuple[int, int, int]:
        cls = _CLASS_OF_KIND[netlist.cells[ci].kind]
        return spaces[cls][rng.randrange(len(spaces[cls]))]

    # Start temperature: uphill moves should accept ~50% of the time.
    uphill = []
    for _ in range(min(200, 20 * len(movable))):
        ci = movable[rng.randrange(len(movable))]
        delta = try_move(ci, random_target(ci), apply=False)
        if delta is not None and delta > 0:
            uphill.append(delta)
    t = (sum(uphill) / len(uphill)) / 0.6931 if uphill else 1.0

    moves_per_t = 100 * len(movable)
    cold_streak = 0
    for _ in range(400):
        changed = 0
        for _ in range(moves_per_t):
            ci = movable[rng.randrange(len(movable))]
            target = random_target(ci)
            delta = try_move(ci, target, apply=False)
            if delta is None:
                continue
            if delta <= 0 or rng.random() < exp(-delta / t):
                try_move(ci, target, apply=True)
                cost += delta
                if delta != 0:
                    changed += 1
        t *= 0.95
        # freeze-out: stop once cost-changing moves have almost stopped
        cold_streak = cold_streak + 1 if changed < 0.005 * moves_per_t else 0
        if t < 0.02 or cold_streak >= 2:
            break
    log.debug("placement: %d cells, final wirelength %d", len(movable), cost)
    placement.validate()
    return placement
