"""Command-line front end: sweep, zoo, layer, and validate subcommands."""

from __future__ import annotations

import argparse
import sys

from . import bench
from .driver import simulate_layer
from .mapping import compute_metrics
from .perfmodel import VARIANTS, PlatformParams, estimate
from .bench import BenchError
from .isa import DecodeError
from .shapes import ShapeError, derive_shape
from .sim import SimConfig, SimFault


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t)


def _add_array_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--x", type=int, default=8, help="processing modules")
    p.add_argument("--uf", type=int, default=16, help="CU lanes folded per cycle")
    p.add_argument("--freq", type=float, default=None, help="array clock, Hz")
    p.add_argument("--bw", type=float, default=None, help="link cost, s/byte")
    p.add_argument("--seed", type=int, default=0)


def _platform(args) -> PlatformParams:
    kw = {}
    if args.freq is not None:
        kw["freq"] = args.freq
    if args.bw is not None:
        kw["bw"] = args.bw
    return PlatformParams(**kw)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mm2im",
                                 description="Quantized TCONV mapping toolkit")
    sub = ap.add_subparsers(dest="cmd", required=True)

    sw = sub.add_parser("sweep", help="run the parameter sweep and write a CSV")
    sw.add_argument("--oc", type=_int_list, default=None)
    sw.add_argument("--ks", type=_int_list, default=None)
    sw.add_argument("--ih", type=_int_list, default=None)
    sw.add_argument("--ic", type=_int_list, default=None)
    sw.add_argument("--stride", type=_int_list, default=None)
    sw.add_argument("--out", default="-", help="CSV path, - for stdout")
    _add_array_args(sw)

    zo = sub.add_parser("zoo", help="evaluate the model-layer zoo")
    zo.add_argument("--out", default="-")
    zo.add_argument("--no-sim", action="store_true",
                    help="op counts and metrics only")
    _add_array_args(zo)

    ly = sub.add_parser("layer", help="report one layer in detail")
    ly.add_argument("dims", type=_int_list,
                    help="i_h,i_w,i_c,ks,o_c,s")
    ly.add_argument("--trace", default=None, help="write a message trace here")
    _add_array_args(ly)

    va = sub.add_parser("validate", help="randomized cross-oracle fuzzing")
    va.add_argument("--count", type=int, default=100)
    va.add_argument("--max-ih", type=int, default=16)
    va.add_argument("--max-ic", type=int, default=64)
    va.add_argument("--max-ks", type=int, default=9)
    va.add_argument("--max-oc", type=int, default=32)
    _add_array_args(va)
    return ap


def _write_report(rows, columns, out_path: str) -> None:
    if out_path == "-":
        bench.write_csv(rows, columns, sys.stdout)
    else:
        with open(out_path, "w", newline="") as f:
            bench.write_csv(rows, columns, f)


def cmd_sweep(args) -> int:
    grid = {}
    for key, val in (("o_c", args.oc), ("ks", args.ks), ("i_h", args.ih),
                     ("i_c", args.ic), ("s", args.stride)):
        if val is not None:
            grid[key] = val
    cfg = SimConfig(x=args.x, uf=args.uf)
    rows = bench.run_sweep(grid or None, cfg, _platform(args), seed=args.seed)
    _write_report(rows, bench.SWEEP_COLUMNS, args.out)
    return 0


def cmd_zoo(args) -> int:
    cfg = SimConfig(x=args.x, uf=args.uf)
    rows = bench.run_zoo(cfg, _platform(args), seed=args.seed,
                         with_sim=not args.no_sim)
    _write_report(rows, bench.ZOO_COLUMNS, args.out)
    return 0


def cmd_layer(args) -> int:
    if len(args.dims) != 6:
        print("layer needs i_h,i_w,i_c,ks,o_c,s", file=sys.stderr)
        return 2
    shape = derive_shape(*args.dims)
    cfg = SimConfig(x=args.x, uf=args.uf)
    plat = _platform(args)
    met = compute_metrics(shape)
    print(f"{shape}")
    print(f"  matmul M={met.m} N={met.n} K={met.k}")
    print(f"  dropped outputs {met.d_o} of {met.p_outs} (d_r={met.d_r:.4f})")
    print(f"  space gain vs padded {met.space_gain_no_skip:.2f}x, "
          f"vs final {met.space_gain_full:.2f}x")
    print(f"  effective MACs {met.effective_macs}")

    import numpy as np
    rng = np.random.default_rng(args.seed)
    quant, input_q, filters_q = bench.random_layer_data(shape, rng)
    trace_f = open(args.trace, "w") if args.trace else None
    try:
        out, rep = simulate_layer(shape, quant, input_q, filters_q, cfg,
                                  trace=trace_f)
    finally:
        if trace_f:
            trace_f.close()
    from .reference import direct_tconv
    ok = bool(np.array_equal(out, direct_tconv(shape, quant, input_q, filters_q)))
    print(f"  sim cycles {rep.total_cycles} "
          f"(cu {rep.cycles['cu_compute']}, stall {rep.cycles['stall']})")
    print(f"  sim MACs executed {rep.macs_executed}, skipped {rep.macs_skipped}")
    print(f"  out_buf high water {rep.out_buf_high_water} "
          f"(bound {2 * shape.o_w})")
    print(f"  bit-exact vs reference: {'yes' if ok else 'NO'}")
    for variant in VARIANTS:
        est = estimate(shape, cfg, plat, variant)
        print(f"  model[{variant}] t_total={est.t_total:.6e}s "
              f"({est.total_cycles:.0f} cycles, omap {est.omap_size} B)")
    return 0 if ok else 2


def cmd_validate(args) -> int:
    cfg = SimConfig(x=args.x, uf=args.uf)
    failures = bench.run_validate(count=args.count, seed=args.seed,
                                  max_ihw=args.max_ih, max_ic=args.max_ic,
                                  max_ks=args.max_ks, max_oc=args.max_oc,
                                  sim_config=cfg)
    if failures:
        for f in failures:
            print(f, file=sys.stderr)
        print(f"{len(failures)} mismatches", file=sys.stderr)
        return 1
    print(f"{args.count} randomized cases, all four paths bit-exact")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "sweep":
            return cmd_sweep(args)
        if args.cmd == "zoo":
            return cmd_zoo(args)
        if args.cmd == "layer":
            return cmd_layer(args)
        if args.cmd == "validate":
            return cmd_validate(args)
    except (BenchError, ShapeError, SimFault, DecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
