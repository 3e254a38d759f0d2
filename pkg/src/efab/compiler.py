"""Compile a quantized decision tree into a LUT4-level netlist.

Structure: one constant comparator per internal node (feature <= raw
threshold), a one-hot leaf select layer, and per-bit OR networks that
emit the selected leaf's score constant.  Constants specialise
everything: a comparator against a known threshold is a chain of one
3-input LUT per two feature bits (signed compare folded into the tables
via offset binary), the per-leaf score constant base+leaf is computed
at compile time, and the decision bit is just an OR over the leaves
whose constant clears the score threshold - no adder or subtractor
ever appears on the fabric.

Register stages are inserted so no register-to-register path exceeds
eight LUTs; inputs are held until the pipeline drains, so the latency
from input-valid to output-valid is ``pipeline_depth`` cycles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fabric import FabricLayout, census
from .ml.fixed import QLeaf, QSplit, QuantTreeModel, fx_add_sat
from .netlist import DFF, LUT4, Netlist, NetlistSim, truth_table

__all__ = [
    "TooManyNodes", "CompiledTree", "FitReport", "EquivalenceReport",
    "compile_tree", "estimate_resources", "equivalence_check",
    "MAX_STAGE_DEPTH", "MAX_INTERNAL_NODES", "pack_vectors",
]

MAX_STAGE_DEPTH = 8
MAX_INTERNAL_NODES = 31


class TooManyNodes(Exception):
    pass


@dataclass
class CompiledTree:
    netlist: Netlist
    lut_count: int
    ff_count: int
    pipeline_depth: int
    width: int
    n_features: int
    score_threshold_raw: int
    used_features: tuple[int, ...]

    def input_port(self, feature: int, bit: int) -> str:
        return f"x{feature}[{bit}]"


@dataclass(frozen=True)
class FitReport:
    fits: bool
    lut_count: int
    ff_count: int
    cell_count: int
    logic_capacity: int
    utilization: float
    io_in_needed: int
    io_in_capacity: int
    io_out_needed: int
    io_out_capacity: int

    def table(self) -> str:
        rows = [("fits", self.fits), ("lut_count", self.lut_count),
                ("ff_count", self.ff_count), ("cells", self.cell_count),
                ("logic_capacity", self.logic_capacity),
                ("lut_utilization", f"{self.utilization:.4f}"),
                ("io_in", f"{self.io_in_needed}/{self.io_in_capacity}"),
                ("io_out", f"{self.io_out_needed}/{self.io_out_capacity}")]
        return "\n".join(f"{k}\t{v}" for k, v in rows) + "\n"


@dataclass
class EquivalenceReport:
    n_vectors: int
    netlist_mismatches: int
    fabric_mismatches: int
    first_mismatch: dict | None

    @property
    def mismatches(self) -> int:
        return self.netlist_mismatches + self.fabric_mismatches

    def table(self) -> str:
        lines = [f"vectors\t{self.n_vectors}",
                 f"netlist_mismatches\t{self.netlist_mismatches}",
                 f"fabric_mismatches\t{self.fabric_mismatches}"]
        if self.first_mismatch:
            lines.append(f"first_mismatch\t{self.first_mismatch}")
        return "\n".join(lines) + "\n"


class _Builder:
    """Netlist construction with per-net combinational depth tracking."""

    def __init__(self, netlist: Netlist):
        self.nl = netlist
        self.depth: dict[int, int] = {}
        self.regs_on_path: dict[int, int] = {}

    def port(self, name: str) -> int:
        net = self.nl.add_input(name)
        self.depth[net] = 0
        self.regs_on_path[net] = 0
        return net

    def lut(self, tt: int, ins, name: str = "") -> int:
        net = self.nl.add_lut(tt, ins, name=name)
        self.depth[net] = 1 + max((self.depth[i] for i in ins if i is not None),
                                  default=0)
        self.regs_on_path[net] = max((self.regs_on_path[i] for i in ins
                                      if i is not None), default=0)
        if self.depth[net] > MAX_STAGE_DEPTH:
            raise AssertionError(
                f"stage depth {self.depth[net]} exceeds {MAX_STAGE_DEPTH}")
        return net

    def reg(self, net: int, name: str = "") -> int:
        q = self.nl.add_dff(net, name=name)
        self.depth[q] = 0
        self.regs_on_path[q] = self.regs_on_path[net] + 1
        return q

    def const(self, value: int) -> int:
        key = f"_const{value}"
        for cell in self.nl.cells:
            if cell.name == key:
                return cell.outs[0]
        net = self.nl.add_const(value, name=key)
        self.depth[net] = 0
        self.regs_on_path[net] = 0
        return net


def _comparator(b: _Builder, x_bits: list[int], thr_raw: int, width: int,
                tag: str) -> int:
    """x <= thr_raw (signed) via offset binary, one LUT per two bits.

    The chain runs LSB-first; a register is inserted every
    MAX_STAGE_DEPTH - 1 links so no stage exceeds the depth cap.
    """
    mask = (1 << width) - 1
    sign = 1 << (width - 1)
    c_off = (thr_raw & mask) ^ sign
    groups = [(i, i + 1) if i + 1 < width else (i,)
              for i in range(0, width, 2)]
    le = None
    chain = 0
    for g, bits in enumerate(groups):
        flips = tuple(1 if i == width - 1 else 0 for i in bits)
        cpair = sum(((c_off >> bit) & 1) << k for k, bit in enumerate(bits))
        has_le = le is not None

        def fn(*args, _flips=flips, _cpair=cpair, _has_le=has_le):
            le_in = args[0] if _has_le else 1
            xs = args[1:] if _has_le else args
            v = sum((xv ^ fl) << k for k, (xv, fl) in enumerate(zip(xs, _flips)))
            if v != _cpair:
                return 1 if v < _cpair else 0
            return le_in

        ins = [x_bits[i] for i in bits]
        arity = len(bits) + (1 if has_le else 0)
        tt = truth_table(fn, arity)
        le = b.lut(tt, ([le] if has_le else []) + ins, name=f"{tag}_g{g}")
        chain += 1
        if chain == MAX_STAGE_DEPTH - 1 and g < len(groups) - 1:
            le = b.reg(le, name=f"{tag}_p{g}")
            chain = 0
    return le


def _or_tree(b: _Builder, signals: list[int], tag: str) -> int:
    while len(signals) > 1:
        nxt = []
        for i in range(0, len(signals), 4):
            chunk = signals[i:i + 4]
            if len(chunk) == 1:
                nxt.append(chunk[0])
            else:
                tt = truth_table(lambda *a: int(any(a)), len(chunk))
                nxt.append(b.lut(tt, chunk, name=f"{tag}_or{len(nxt)}"))
        signals = nxt
    return signals[0]


def _and_literals(b: _Builder, literals: list[tuple[int, bool]], tag: str) -> int:
    """AND of (net, keep_polarity) literals, inversions folded into tables."""
    while True:
        if len(literals) == 1 and literals[0][1]:
            return literals[0][0]
        nxt = []
        for i in range(0, len(literals), 4):
            chunk = literals[i:i + 4]
            pols = tuple(p for _, p in chunk)

            def fn(*a, _pols=pols):
                return int(all(v if p else 1 - v for v, p in zip(a, _pols)))

            tt = truth_table(fn, len(chunk))
            net = b.lut(tt, [n for n, _ in chunk], name=f"{tag}_a{len(nxt)}")
            nxt.append((net, True))
        literals = nxt


def compile_tree(qmodel: QuantTreeModel, n_features: int = 14) -> CompiledTree:
    """Lower a quantized tree to a netlist with score and decision outputs."""
    internal = qmodel.internal_nodes()
    if len(internal) > MAX_INTERNAL_NODES:
        raise TooManyNodes(
            f"{len(internal)} internal nodes exceed {MAX_INTERNAL_NODES}")
    width = qmodel.fmt.width
    nl = Netlist(f"tree{len(internal)}n_w{width}")
    b = _Builder(nl)

    x_bits = [[b.port(f"x{f}[{k}]") for k in range(width)]
              for f in range(n_features)]

    comp_of: dict[int, int] = {}
    for i, node in enumerate(internal):
        comp_of[id(node)] = _comparator(
            b, x_bits[node.feature], node.threshold_raw, width, tag=f"cmp{i}")

    # leaves with their path literals and compile-time score constants
    leaves: list[tuple[list[tuple[int, bool]], int]] = []

    def walk(node, path):
        if isinstance(node, QLeaf):
            score = fx_add_sat(qmodel.base_raw, node.value_raw, qmodel.fmt)
            leaves.append((list(path), score))
            return
        comp = comp_of[id(node)]
        walk(node.left, path + [(comp, True)])
        walk(node.right, path + [(comp, False)])

    walk(qmodel.root, [])

    # if the remaining combinational budget cannot absorb the select and
    # OR layers, register the comparator outputs to start a fresh stage
    if comp_of:
        residual = max(b.depth[n] for n in comp_of.values())
        sel_depth = 1 if qmodel.depth() <= 4 else 2
        or_depth = 1
        while 4 ** or_depth < len(leaves):
            or_depth += 1
        if residual + sel_depth + or_depth > MAX_STAGE_DEPTH:
            for i, key in enumerate(sorted(comp_of, key=lambda k: str(k))):
                comp_of[key] = b.reg(comp_of[key], name=f"cmpq{i}")
            leaves.clear()
            walk(qmodel.root, [])

    # one-hot selects
    if len(leaves) == 1:
        sels = [b.const(1)]
    else:
        sels = [_and_literals(b, path, tag=f"sel{i}")
                for i, (path, _) in enumerate(leaves)]

    scores = [score for _, score in leaves]
    mask = (1 << width) - 1

    def or_over(indices, tag):
        if not indices:
            return b.const(0)
        if len(indices) == len(leaves):
            return b.const(1)
        return _or_tree(b, [sels[i] for i in indices], tag)

    for k in range(width):
        hot = [i for i, s in enumerate(scores) if (s & mask) >> k & 1]
        nl.add_output(f"score[{k}]", or_over(hot, f"s{k}"))
    keep = [i for i, s in enumerate(scores) if s >= qmodel.score_threshold_raw]
    nl.add_output("decision", or_over(keep, "dec"))

    nl.validate()
    stats = nl.stats()
    out_regs = max((b.regs_on_path[net] for net in nl.outputs.values()), default=0)
    return CompiledTree(
        netlist=nl,
        lut_count=stats.get(LUT4, 0),
        ff_count=stats.get(DFF, 0),
        pipeline_depth=out_regs + 1,
        width=width,
        n_features=n_features,
        score_threshold_raw=qmodel.score_threshold_raw,
        used_features=tuple(sorted({nd.feature for nd in internal})),
    )


def estimate_resources(compiled: CompiledTree, layout: FabricLayout) -> FitReport:
    cen = census(layout)
    stats = compiled.netlist.stats()
    cells = stats.get(LUT4, 0) + stats.get(DFF, 0) + stats.get("const", 0)
    io_in = len(compiled.netlist.inputs)
    io_out = len(compiled.netlist.outputs)
    fits = (compiled.lut_count <= cen.logic_cells
            and cells <= cen.logic_cells
            and io_in <= cen.io_input_bits
            and io_out <= cen.io_output_bits)
    return FitReport(
        fits=fits,
        lut_count=compiled.lut_count,
        ff_count=compiled.ff_count,
        cell_count=cells,
        logic_capacity=cen.logic_cells,
        utilization=compiled.lut_count / cen.logic_cells if cen.logic_cells else 0.0,
        io_in_needed=io_in,
        io_in_capacity=cen.io_input_bits,
        io_out_needed=io_out,
        io_out_capacity=cen.io_output_bits,
    )


def pack_vectors(vectors: np.ndarray, feature: int, bit: int) -> int:
    """Lane-pack one input bit column over all vectors into a big int."""
    col = ((vectors[:, feature].astype(np.int64) >> bit) & 1).astype(np.uint8)
    return int.from_bytes(np.packbits(col, bitorder="little").tobytes(), "little")


def _unpack_lanes(value: int, n: int) -> np.ndarray:
    buf = value.to_bytes((n + 7) // 8, "little")
    return np.unpackbits(np.frombuffer(buf, dtype=np.uint8),
                         bitorder="little")[:n]


def _scores_from_bits(bit_ints: list[int], n: int, width: int) -> np.ndarray:
    raw = np.zeros(n, dtype=np.int64)
    for k, v in enumerate(bit_ints):
        raw |= _unpack_lanes(v, n).astype(np.int64) << k
    # sign extend
    sign = 1 << (width - 1)
    return (raw ^ sign) - sign


def equivalence_check(compiled: CompiledTree, qmodel: QuantTreeModel,
                      vectors, flow_result=None,
                      chunk: int = 50_000) -> EquivalenceReport:
    """Differential test: netlist (and optionally the placed-and-routed
    fabric) against the quantized software walk, over raw feature vectors.
    Mismatches are data, not faults; the first one is reported verbatim.
    """
    from .ml.fixed import predict_quant  # local import keeps module load light

    vectors = np.asarray(vectors, dtype=np.int64)
    n = len(vectors)
    width = compiled.width
    expect_score = np.empty(n, dtype=np.int64)
    expect_dec = np.empty(n, dtype=np.int64)
    for i, row in enumerate(vectors):
        s, d, _ = predict_quant(qmodel, row)
        expect_score[i] = s
        expect_dec[i] = int(d)

    report = EquivalenceReport(n, 0, 0, None)

    def compare(kind, got_score, got_dec, base_idx):
        bad = (got_score != expect_score[base_idx:base_idx + len(got_score)]) | \
              (got_dec != expect_dec[base_idx:base_idx + len(got_dec)])
        count = int(bad.sum())
        if count and report.first_mismatch is None:
            i = int(np.argmax(bad))
            report.first_mismatch = {
                "path": kind,
                "vector_index": base_idx + i,
                "vector": vectors[base_idx + i].tolist(),
                "expected_score": int(expect_score[base_idx + i]),
                "got_score": int(got_score[i]),
                "expected_decision": int(expect_dec[base_idx + i]),
                "got_decision": int(got_dec[i]),
            }
        return count

    io_map = flow_result.io_map() if flow_result is not None else None

    for base in range(0, n, chunk):
        sub = vectors[base:base + chunk]
        lanes = len(sub)
        inputs = {}
        for f in range(compiled.n_features):
            for k in range(width):
                inputs[f"x{f}[{k}]"] = pack_vectors(sub, f, k)
        # golden netlist, bit-parallel over lanes
        sim = NetlistSim(compiled.netlist, lanes=lanes)
        out = {}
        for _ in range(compiled.pipeline_depth):
            out = sim.step(inputs)
        got_score = _scores_from_bits([out[f"score[{k}]"] for k in range(width)],
                                      lanes, width)
        got_dec = _unpack_lanes(out["decision"], lanes).astype(np.int64)
        report.netlist_mismatches += compare("netlist", got_score, got_dec, base)

        if flow_result is not None:
            from .simulator import IoFrame
            state = flow_result.load(lanes=lanes)
            io = IoFrame()
            for name, value in inputs.items():
                side, bit = io_map[name]
                (io.west_in if side == "west" else io.east_in)[bit] = value
            frame = None
            for _ in range(compiled.pipeline_depth):
                frame = state.step(io)
            bits = []
            for k in range(width):
                side, bit = io_map[f"score[{k}]"]
                bits.append(frame.west_out.get(bit, 0) if side == "west"
                            else frame.east_out.get(bit, 0))
            side, bit = io_map["decision"]
            dec_int = (frame.west_out.get(bit, 0) if side == "west"
                       else frame.east_out.get(bit, 0))
            fab_score = _scores_from_bits(bits, lanes, width)
            fab_dec = _unpack_lanes(dec_int, lanes).astype(np.int64)
            report.fabric_mismatches += compare("fabric", fab_score, fab_dec, base)

    return report
