"""Quantized transposed convolution as MatMul plus output mapping.

The package models a TCONV accelerator end to end in software: bit-exact
int8 references, the row-map generator that skips cropped outputs, a
word-level micro-ISA, a channel-tiling host driver, a cycle-approximate
device simulator, an analytical latency model, and a benchmark harness.
"""

from .shapes import ShapeError, TConvShape, derive_shape
from .quant import QuantParams, QuantError, quantize_multiplier, requantize, requantize_array
from .reference import (direct_tconv, zero_insertion_tconv, iom_baseline_tconv,
                        IomResult, scatter_accumulate, upsampled_grid)
from .mapping import (RowMaps, MappingMetrics, RowSchedule, generate_row_maps,
                      compute_metrics, compute_i_end_row, kept_tap_counts)
from .isa import (Opcode, Configure, LoadWeights, LoadInput, Schedule,
                  StoreOutput, encode, decode, decode_stream, DecodeError,
                  StreamUnderflow)
from .sim import SimConfig, SimFault, SimReport, Simulator
from .driver import LayerPlan, TransferLedger, plan_layer, run_layer, simulate_layer
from .perfmodel import VARIANTS, PlatformParams, PerfEstimate, estimate
from .bench import (ZOO, ZooLayer, BenchError, run_sweep, run_zoo, run_validate,
                    expected_ops, ops_match)

__all__ = [
    "ShapeError", "TConvShape", "derive_shape",
    "QuantParams", "QuantError", "quantize_multiplier", "requantize",
    "requantize_array",
    "direct_tconv", "zero_insertion_tconv", "iom_baseline_tconv", "IomResult",
    "scatter_accumulate", "upsampled_grid",
    "RowMaps", "MappingMetrics", "RowSchedule", "generate_row_maps",
    "compute_metrics", "compute_i_end_row", "kept_tap_counts",
    "Opcode", "Configure", "LoadWeights", "LoadInput", "Schedule",
    "StoreOutput", "encode", "decode", "decode_stream", "DecodeError",
    "StreamUnderflow",
    "SimConfig", "SimFault", "SimReport", "Simulator",
    "LayerPlan", "TransferLedger", "plan_layer", "run_layer", "simulate_layer",
    "VARIANTS", "PlatformParams", "PerfEstimate", "estimate",
    "ZOO", "ZooLayer", "BenchError", "run_sweep", "run_zoo", "run_validate",
    "expected_ops", "ops_match",
]

__version__ = "0.1.0"
