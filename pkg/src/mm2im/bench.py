"""Benchmark harness: parameter sweeps, a model-layer zoo, CSV reports.

Every sweep config runs the full stack - metrics, reference TCONV, planned
stream through the simulator, analytical model in both variants - on
seeded random int8 data, and lands in one CSV row.  Reruns with the same
seed produce byte-identical reports; any functional mismatch between the
simulator and the reference aborts the run.
"""

from __future__ import annotations

import csv
import io
import itertools
import re
from dataclasses import dataclass

import numpy as np

from .driver import plan_layer, run_layer
from .mapping import compute_metrics
from .perfmodel import PlatformParams, estimate
from .quant import QuantParams
from .reference import direct_tconv, iom_baseline_tconv, zero_insertion_tconv
from .shapes import TConvShape, derive_shape
from .sim import SimConfig, Simulator


class BenchError(RuntimeError):
    """Functional failure during a harness run (aborts the report)."""


DEFAULT_GRID: dict[str, tuple[int, ...]] = {
    "o_c": (16, 32, 64),
    "ks": (3, 5, 7),
    "i_h": (7, 9, 11),
    "i_c": (32, 64, 128, 256),
    "s": (1, 2),
}


@dataclass(frozen=True)
class ZooLayer:
    """One deconvolution layer drawn from published generator models."""

    name: str
    o_c: int
    ks: int
    i_h: int
    i_c: int
    s: int
    ops_display: str    # e.g. "420M": value plus magnitude suffix

    def shape(self) -> TConvShape:
        return derive_shape(self.i_h, self.i_h, self.i_c, self.ks, self.o_c, self.s)


ZOO: tuple[ZooLayer, ...] = (
    ZooLayer("DCGAN_1", o_c=512, ks=5, i_h=4, i_c=1024, s=2, ops_display="420M"),
    ZooLayer("DCGAN_2", o_c=256, ks=5, i_h=8, i_c=512, s=2, ops_display="420M"),
    ZooLayer("DCGAN_3", o_c=128, ks=5, i_h=16, i_c=256, s=2, ops_display="420M"),
    ZooLayer("DCGAN_4", o_c=3, ks=5, i_h=32, i_c=128, s=2, ops_display="20M"),
    ZooLayer("FCN", o_c=21, ks=4, i_h=1, i_c=21, s=2, ops_display="14K"),
    ZooLayer("StyleTransfer_1", o_c=64, ks=3, i_h=64, i_c=128, s=2, ops_display="604M"),
    ZooLayer("StyleTransfer_2", o_c=32, ks=3, i_h=128, i_c=64, s=2, ops_display="604M"),
    ZooLayer("StyleTransfer_3", o_c=3, ks=9, i_h=256, i_c=32, s=2, ops_display="1020M"),
    ZooLayer("FSRCNN", o_c=2, ks=9, i_h=32, i_c=32, s=2, ops_display="11M"),
)

_SUFFIX = {"K": 1000, "M": 1000_000, "G": 1000_000_000}


def parse_ops_display(display: str) -> tuple[int, int]:
    """(value, half_unit) for a magnitude-suffixed op count like '420M'.

    half_unit is half the weight of the last significant digit (trailing
    zeros of the mantissa are display padding, not precision), so a computed
    count matches iff |computed - value| <= half_unit.
    """
    m = re.fullmatch(r"(\d+)([KMG])", display)
    if not m:
        raise ValueError(f"bad ops display {display!r}")
    digits, suffix = m.groups()
    mult = _SUFFIX[suffix]
    trailing = len(digits) - len(digits.rstrip("0"))
    unit = (10 ** trailing) * mult
    return int(digits) * mult, unit // 2


def ops_match(computed: int, display: str) -> bool:
    value, half_unit = parse_ops_display(display)
    return abs(computed - value) <= half_unit


def expected_ops(shape: TConvShape) -> int:
    """Multiply-accumulate op count of the layer as a MatMul: 2*M*N*K."""
    met = compute_metrics(shape)
    return 2 * met.m * met.n * met.k


SWEEP_COLUMNS = (
    "i_h", "i_w", "i_c", "ks", "o_c", "s", "status",
    "m", "n", "k", "d_o", "d_r", "effective_macs",
    "bit_exact", "macs_executed", "macs_skipped",
    "sim_total_cycles", "cyc_cu_compute", "cyc_cu_load", "cyc_cu_store",
    "cyc_au", "cyc_ppu", "cyc_mapper", "cyc_stall",
    "bytes_weights_in", "bytes_inputs_in", "bytes_outputs_out", "bytes_omap_in",
    "out_buf_high_water", "row_buf_high_water",
    "model_cycles_on_chip", "model_cycles_host_omap",
    "model_t_total_on_chip", "model_t_total_host_omap", "omap_share_host",
)

ZOO_COLUMNS = ("name", "ops_computed", "ops_display", "ops_match") + SWEEP_COLUMNS


def random_layer_data(shape: TConvShape, rng: np.random.Generator
                      ) -> tuple[QuantParams, np.ndarray, np.ndarray]:
    """Seeded random tensors and plausible quantization for one layer."""
    input_q = rng.integers(-128, 128, size=(shape.i_h, shape.i_w, shape.i_c),
                           dtype=np.int8)
    filters_q = rng.integers(-128, 128,
                             size=(shape.ks, shape.ks, shape.o_c, shape.i_c),
                             dtype=np.int8)
    bias = rng.integers(-(1 << 15), 1 << 15, size=shape.o_c, dtype=np.int32)
    in_scale = float(rng.uniform(0.005, 0.05))
    w_scale = float(rng.uniform(0.005, 0.05))
    out_scale = float(rng.uniform(0.02, 0.2))
    quant = QuantParams.from_scales(in_scale, w_scale, out_scale,
                                    input_zero=int(rng.integers(-16, 17)),
                                    output_zero=int(rng.integers(-16, 17)),
                                    bias=bias)
    return quant, input_q, filters_q


def run_case(shape: TConvShape, sim_config: SimConfig, platform: PlatformParams,
             rng: np.random.Generator) -> dict:
    """Full-stack evaluation of one layer; returns one report row."""
    quant, input_q, filters_q = random_layer_data(shape, rng)
    met = compute_metrics(shape)
    expected = direct_tconv(shape, quant, input_q, filters_q)
    plan = plan_layer(shape, quant, input_q, filters_q, sim_config)
    out, rep = run_layer(plan, Simulator(sim_config))
    bit_exact = bool(np.array_equal(out, expected))
    est_chip = estimate(shape, sim_config, platform, "on_chip_mapper")
    est_host = estimate(shape, sim_config, platform, "host_omap")
    return {
        "i_h": shape.i_h, "i_w": shape.i_w, "i_c": shape.i_c, "ks": shape.ks,
        "o_c": shape.o_c, "s": shape.s, "status": "ok",
        "m": met.m, "n": met.n, "k": met.k, "d_o": met.d_o, "d_r": met.d_r,
        "effective_macs": met.effective_macs,
        "bit_exact": bit_exact,
        "macs_executed": rep.macs_executed,
        "macs_skipped": rep.macs_skipped,
        "sim_total_cycles": rep.total_cycles,
        "cyc_cu_compute": rep.cycles["cu_compute"],
        "cyc_cu_load": rep.cycles["cu_load"],
        "cyc_cu_store": rep.cycles["cu_store"],
        "cyc_au": rep.cycles["au"],
        "cyc_ppu": rep.cycles["ppu"],
        "cyc_mapper": rep.cycles["mapper"],
        "cyc_stall": rep.cycles["stall"],
        "bytes_weights_in": rep.bytes["weights_in"],
        "bytes_inputs_in": rep.bytes["inputs_in"],
        "bytes_outputs_out": rep.bytes["outputs_out"],
        "bytes_omap_in": rep.bytes["omap_in"],
        "out_buf_high_water": rep.out_buf_high_water,
        "row_buf_high_water": rep.row_buf_high_water,
        "model_cycles_on_chip": est_chip.total_cycles,
        "model_cycles_host_omap": est_host.total_cycles,
        "model_t_total_on_chip": est_chip.t_total,
        "model_t_total_host_omap": est_host.t_total,
        "omap_share_host": est_host.omap_share,
    }


def sweep_shapes(grid: dict[str, tuple[int, ...]] | None = None
                 ) -> list[tuple[dict, TConvShape | None]]:
    """(params, shape) per grid point in deterministic product order.

    shape is None for invalid combinations (s > ks), which the sweep skips
    but still reports.
    """
    g = dict(DEFAULT_GRID)
    if grid:
        g.update(grid)
    keys = tuple(DEFAULT_GRID)
    combos = []
    for vals in itertools.product(*(g[k] for k in keys)):
        p = dict(zip(keys, vals))
        if p["s"] > p["ks"]:
            combos.append((p, None))
            continue
        combos.append((p, derive_shape(p["i_h"], p["i_h"], p["i_c"], p["ks"],
                                       p["o_c"], p["s"])))
    return combos


def run_sweep(grid: dict | None = None, sim_config: SimConfig | None = None,
              platform: PlatformParams | None = None, seed: int = 0) -> list[dict]:
    """Evaluate the whole grid; abort on any functional mismatch."""
    cfg = sim_config or SimConfig()
    plat = platform or PlatformParams()
    rows = []
    for idx, (params, shape) in enumerate(sweep_shapes(grid)):
        if shape is None:
            row = {k: "" for k in SWEEP_COLUMNS}
            row.update(params)
            row["status"] = "skipped(s>ks)"
            rows.append(row)
            continue
        rng = np.random.default_rng([seed, idx])
        row = run_case(shape, cfg, plat, rng)
        if not row["bit_exact"]:
            raise BenchError(f"bit-exactness failure at {shape} (seed={seed}, "
                             f"config index {idx})")
        rows.append(row)
    return rows


def run_zoo(sim_config: SimConfig | None = None,
            platform: PlatformParams | None = None, seed: int = 0,
            with_sim: bool = True) -> list[dict]:
    """Evaluate the layer zoo; op counts always, full stack when with_sim."""
    cfg = sim_config or SimConfig()
    plat = platform or PlatformParams()
    rows = []
    for idx, layer in enumerate(ZOO):
        shape = layer.shape()
        ops = expected_ops(shape)
        if with_sim:
            rng = np.random.default_rng([seed, 1 << 20, idx])
            row = run_case(shape, cfg, plat, rng)
            if not row["bit_exact"]:
                raise BenchError(f"bit-exactness failure at zoo layer "
                                 f"{layer.name} (seed={seed})")
        else:
            met = compute_metrics(shape)
            row = {k: "" for k in SWEEP_COLUMNS}
            row.update({"i_h": shape.i_h, "i_w": shape.i_w, "i_c": shape.i_c,
                        "ks": shape.ks, "o_c": shape.o_c, "s": shape.s,
                        "status": "metrics-only", "m": met.m, "n": met.n,
                        "k": met.k, "d_o": met.d_o, "d_r": met.d_r,
                        "effective_macs": met.effective_macs})
        row["name"] = layer.name
        row["ops_computed"] = ops
        row["ops_display"] = layer.ops_display
        row["ops_match"] = ops_match(ops, layer.ops_display)
        rows.append(row)
    return rows


def run_validate(count: int = 100, seed: int = 0, max_ihw: int = 16,
                 max_ic: int = 64, max_ks: int = 9, max_oc: int = 32,
                 strides: tuple[int, ...] = (1, 2, 3),
                 sim_config: SimConfig | None = None) -> list[str]:
    """Randomized four-way equivalence fuzzing; returns mismatch reports."""
    cfg = sim_config or SimConfig()
    rng = np.random.default_rng(seed)
    failures = []
    for i in range(count):
        while True:
            ks = int(rng.integers(1, max_ks + 1))
            usable = [s for s in strides if s <= ks]
            if usable:
                break
        s = int(usable[rng.integers(0, len(usable))])
        shape = derive_shape(int(rng.integers(1, max_ihw + 1)),
                             int(rng.integers(1, max_ihw + 1)),
                             int(rng.integers(1, max_ic + 1)),
                             ks, int(rng.integers(1, max_oc + 1)), s)
        quant, input_q, filters_q = random_layer_data(shape, rng)
        ref = direct_tconv(shape, quant, input_q, filters_q)
        zi = zero_insertion_tconv(shape, quant, input_q, filters_q)
        iom = iom_baseline_tconv(shape, quant, input_q, filters_q).output
        plan = plan_layer(shape, quant, input_q, filters_q, cfg)
        out, _ = run_layer(plan, Simulator(cfg))
        for label, got in (("zero_insertion", zi), ("iom", iom), ("sim", out)):
            if not np.array_equal(got, ref):
                failures.append(f"case {i}: {label} mismatch on {shape} "
                                f"(seed={seed})")
    return failures


def _format(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(rows: list[dict], columns: tuple[str, ...], out) -> None:
    """Write rows to a file-like object with a fixed column order."""
    w = csv.writer(out, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_format(row.get(c, "")) for c in columns])


def csv_text(rows: list[dict], columns: tuple[str, ...]) -> str:
    buf = io.StringIO()
    write_csv(rows, columns, buf)
    return buf.getvalue()
