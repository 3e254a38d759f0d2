"""Command-line harness wiring the subsystems into the three experiments.

Subcommands: ``census``, ``counter-test``, ``loopback-test``,
``classify``.  Every command is deterministic given its inputs and
seed; report files carry no timestamps, so reruns are byte-identical.
Exit codes: 0 success, 1 assertion/equivalence failure, 2 usage or IO
error.  Set EFAB_LOG=DEBUG for verbose progress.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import flow
from .bitstream import BitstreamError
from .compiler import compile_tree, equivalence_check, estimate_resources
from .fabric import FabricError, bundled_layout, census, parse_layout
from .link.loopback import parse_fault_schedule, run_loopback
from .ml import (auc, evaluate, export_model, import_model, load_tracks,
                 make_dataset, predict_proba, quantize, quantize_features,
                 roc_csv, roc_svg, split_dataset, threshold_sweep,
                 tracks_to_features, train_tree)
from .netlist import CombinationalLoop
from .simulator import activity_report, load

log = logging.getLogger("efab")

# The silicon's frequency sweep, in MHz.
SWEEP_MHZ = (10, 25, 50, 100, 125, 200, 250)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def _load_layout(name_or_path: str):
    if os.path.exists(name_or_path):
        return parse_layout(Path(name_or_path).read_text(encoding="utf-8"))
    try:
        return bundled_layout(name_or_path)
    except FileNotFoundError:
        raise FileNotFoundError(
            f"{name_or_path!r} is neither a layout file nor a bundled layout name") from None


def _outdir(args) -> Path | None:
    if args.out is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(out: Path | None, name: str, text: str) -> None:
    if out is not None:
        (out / name).write_text(text, encoding="utf-8")


def cmd_census(args) -> int:
    layout = _load_layout(args.layout)
    cen = census(layout)
    print(f"layout {layout.name or args.layout}: {layout.rows}x{layout.cols}, "
          f"channels={layout.channels}")
    for field in ("logic_cells", "registers", "dsp_slices",
                  "io_input_bits", "io_output_bits"):
        print(f"{field}\t{getattr(cen, field)}")
    return EXIT_OK


def _activity_table(report) -> str:
    lines = ["# switching-activity power proxy (model, not measurement)",
             "freq_mhz,toggles_per_cycle,modeled_power_units"]
    for mhz in SWEEP_MHZ:
        power = report.power(mhz * 1e6)
        lines.append(f"{mhz},{report.toggles_per_cycle_mean!r},{power!r}")
    return "\n".join(lines) + "\n"


def cmd_counter_test(args) -> int:
    layout = _load_layout(args.layout)
    out = _outdir(args)
    stage = "flow"
    try:
        result = flow.full_flow(flow.build_counter16(), layout, seed=args.seed,
                                io_constraints=flow.COUNTER_IO_WEST)
        stage = "load"
        image = bytearray(result.image)
        if args.inject_corruption:
            image[len(image) // 2] ^= 0x10
        state = load(layout, bytes(image))
    except Exception as exc:
        print(f"FAIL at stage {stage}: {exc}")
        return EXIT_FAIL
    if args.cycles == 0:
        print("PASS (vacuous) - warning: 0 cycles requested, nothing checked")
        return EXIT_OK
    stage = "simulate"
    vcd_file = open(args.vcd, "w", encoding="utf-8") if args.vcd else None
    if vcd_file:
        state.start_vcd(vcd_file)
    for k in range(1, args.cycles + 1):
        frame = state.step()
        got = frame.out_word("west", 0, 16)
        if got != k % 65536:
            print(f"FAIL at stage {stage}: cycle {k} read {got:#06x}, "
                  f"expected {k % 65536:#06x}")
            return EXIT_FAIL
    if vcd_file:
        vcd_file.close()
    rep = activity_report(state)
    table = _activity_table(rep)
    print(f"PASS: {args.cycles} cycles, output == cycle index mod 65536")
    print(f"toggles={rep.toggles} mean/cycle={rep.toggles_per_cycle_mean:.3f}")
    print(table, end="")
    _write(out, "counter_activity.csv", table)
    return EXIT_OK


def cmd_loopback_test(args) -> int:
    layout = _load_layout(args.layout)
    out = _outdir(args)
    faults = []
    if args.faults:
        faults = parse_fault_schedule(Path(args.faults).read_text(encoding="utf-8"))
    result = flow.full_flow(flow.build_loopback32(), layout, seed=args.seed,
                            io_constraints=flow.LOOPBACK_IO)
    state = result.load()
    report = run_loopback(state, result.io_map(), n_frames=args.frames,
                          frame_len=args.frame_len, faults=faults,
                          stall=0.25, prbs_seed=args.seed or 1)
    print(report.table(), end="")
    _write(out, "loopback_ber.txt", report.table())
    if faults:
        ok = report.crc_failed_frames == len({f for f, _ in faults})
        print("fault accounting:", "exact" if ok else "MISMATCH")
        return EXIT_OK if ok else EXIT_FAIL
    return EXIT_OK if report.clean else EXIT_FAIL


def cmd_classify(args) -> int:
    layout = _load_layout(args.layout)
    out = _outdir(args)
    if args.dataset:
        tracks = load_tracks(args.dataset)
        log.info("loaded %d tracks from %s", len(tracks), args.dataset)
    else:
        tracks = make_dataset(args.synthetic_tracks, seed=args.seed)
        log.info("generated %d synthetic tracks", len(tracks))

    if args.model:
        model = import_model(Path(args.model).read_text(encoding="utf-8"))
        test = tracks
    else:
        train, test = split_dataset(tracks, 0.8, seed=args.seed)
        X, y = tracks_to_features(train)
        model = train_tree(X, y, max_depth=5, learning_rate=1.0,
                           max_nodes=args.max_nodes)
    Xt, yt = tracks_to_features(test)

    probs = predict_proba(model, Xt)
    rep = evaluate(probs, yt, args.threshold)
    model_auc = auc(probs, yt)

    qmodel = quantize(model, threshold=args.threshold)
    compiled = compile_tree(qmodel)
    fit = estimate_resources(compiled, layout)
    result = flow.full_flow(compiled.netlist, layout, seed=args.seed)
    vectors = np.array([quantize_features(row) for row in Xt], dtype=np.int64)
    eq = equivalence_check(compiled, qmodel, vectors, flow_result=result)

    from .ml.fixed import predict_quant
    qdec = np.array([predict_quant(qmodel, v)[1] for v in vectors], dtype=np.int8)
    sig = yt == 1
    q_eff = float(qdec[sig].mean())
    q_rej = float(1 - qdec[~sig].mean())

    lines = [
        "metric,value",
        f"auc,{model_auc!r}",
        f"threshold,{args.threshold!r}",
        f"signal_efficiency,{rep.signal_efficiency!r}",
        f"background_rejection,{rep.background_rejection!r}",
        f"quantized_signal_efficiency,{q_eff!r}",
        f"quantized_background_rejection,{q_rej!r}",
        f"n_signal,{rep.n_signal}",
        f"n_background,{rep.n_background}",
        f"lut_count,{compiled.lut_count}",
        f"ff_count,{compiled.ff_count}",
        f"pipeline_depth,{compiled.pipeline_depth}",
        f"fits,{fit.fits}",
        f"equivalence_vectors,{eq.n_vectors}",
        f"equivalence_mismatches,{eq.mismatches}",
    ]
    metrics = "\n".join(lines) + "\n"
    print(metrics, end="")
    _write(out, "metrics.csv", metrics)
    _write(out, "roc.csv", roc_csv(probs, yt))
    _write(out, "roc.svg", roc_svg(probs, yt))
    _write(out, "fit.txt", fit.table())
    _write(out, "equivalence.txt", eq.table())
    _write(out, "model.json", export_model(model))
    from .netlist import render_netlist
    _write(out, "tree_netlist.txt", render_netlist(compiled.netlist))
    if not fit.fits:
        print("FAIL: design does not fit the fabric")
        return EXIT_FAIL
    if eq.mismatches:
        print(f"FAIL: {eq.mismatches} hardware/software mismatches")
        return EXIT_FAIL
    print("PASS: hardware output bit-exact with quantized software model")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="efab",
        description="eFPGA twin: fabric experiments and the pileup classifier flow")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--layout", default="cmos28",
                        help="bundled layout name or layout file path")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=None, help="report output directory")

    sp = sub.add_parser("census", help="print the layout resource census")
    common(sp)
    sp.set_defaults(fn=cmd_census)

    sp = sub.add_parser("counter-test", help="16-bit counter experiment")
    common(sp)
    sp.add_argument("--cycles", type=int, default=100_000)
    sp.add_argument("--inject-corruption", action="store_true",
                    help="flip one image bit to demonstrate load failure")
    sp.add_argument("--vcd", default=None,
                    help="dump a waveform of the run to this VCD file")
    sp.set_defaults(fn=cmd_counter_test)

    sp = sub.add_parser("loopback-test", help="PRBS stream loopback experiment")
    common(sp)
    sp.add_argument("--frames", type=int, default=1000)
    sp.add_argument("--frame-len", type=int, default=256)
    sp.add_argument("--faults", default=None,
                    help="fault schedule file: 'frame_index bit_offset' lines")
    sp.set_defaults(fn=cmd_loopback_test)

    sp = sub.add_parser("classify", help="train/import, quantize, compile, "
                                         "place-and-route, prove equivalence")
    common(sp)
    sp.add_argument("--dataset", default=None,
                    help="track file (gzip ok); default: synthetic data")
    sp.add_argument("--model", default=None,
                    help="model JSON to import instead of training")
    sp.add_argument("--threshold", type=float, default=0.5)
    sp.add_argument("--max-nodes", type=int, default=9,
                    help="internal-node budget for the trained tree")
    sp.add_argument("--synthetic-tracks", type=int, default=10_000)
    sp.set_defaults(fn=cmd_classify)
    return p


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("EFAB_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FabricError, BitstreamError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
