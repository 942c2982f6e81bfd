"""Host-side planner and executor for the accelerator stream protocol.

`plan_layer` lowers one TCONV layer into the channel-tiled message sequence
the device expects: for each tile of X output channels it emits Configure,
LoadWeights, and then walks the output rows in order, shipping each batch of
newly needed input rows just in time before scheduling and storing the row.
Input rows are sent at most once per pass and only when the row schedule
says they are needed; a row whose inputs are already on chip gets no
LoadInput message at all.

`run_layer` feeds the planned stream to a simulator message by message and
reassembles the store responses into the final output tensor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import isa
from .mapping import compute_i_end_row
from .quant import QuantParams
from .reference import validate_tensors
from .shapes import TConvShape
from .sim import SimConfig, SimFault, Simulator


@dataclass(frozen=True)
class TransferLedger:
    """Payload bytes by direction, headers excluded.

    weights_in counts the X-padded tile volume (bias words included) once
    per pass; inputs_in counts each input row once per pass; outputs_out
    counts exactly the final output tensor.
    """

    weights_in: int
    inputs_in: int
    outputs_out: int


@dataclass(frozen=True)
class PlannedMessage:
    opcode: isa.Opcode
    start: int          # word offset into the stream
    end: int
    h: int = -1         # store messages: output row
    c_base: int = -1    # store messages: channel tile base
    enabled: int = 0    # store messages: live PMs in this tile


@dataclass(frozen=True)
class LayerPlan:
    shape: TConvShape
    x: int
    uf: int
    stream: np.ndarray
    messages: tuple[PlannedMessage, ...]
    ledger: TransferLedger
    passes: int


def plan_layer(shape: TConvShape, quant: QuantParams, input_q: np.ndarray,
               filters_q: np.ndarray, sim_config: SimConfig | None = None) -> LayerPlan:
    """Lower a layer to its full instruction stream plus transfer ledger."""
    cfg = sim_config or SimConfig()
    validate_tensors(shape, input_q, filters_q, quant.bias)
    x = cfg.x
    sched = compute_i_end_row(shape).i_end_row
    rows_flat = input_q.reshape(shape.i_h, shape.i_w * shape.i_c)
    # (ks, ks, o_c, i_c) -> per-channel blocks (o_c, ks*ks, i_c)
    blocks = filters_q.transpose(2, 0, 1, 3).reshape(
        shape.o_c, shape.ks * shape.ks, shape.i_c)

    conf = isa.Configure(shape=shape,
                         requant_multiplier=quant.requant_multiplier,
                         requant_shift=quant.requant_shift,
                         input_zero=quant.input_zero,
                         output_zero=quant.output_zero,
                         row_width=shape.i_w, x=x, uf=cfg.uf)

    parts: list[np.ndarray] = []
    messages: list[PlannedMessage] = []
    pos = 0
    weights_bytes = 0
    inputs_bytes = 0
    outputs_bytes = 0

    def emit(inst, **meta):
        nonlocal pos
        words = isa.encode(inst)
        parts.append(words)
        messages.append(PlannedMessage(opcode=inst.opcode, start=pos,
                                       end=pos + len(words), **meta))
        pos += len(words)

    passes = 0
    for c in range(0, shape.o_c, x):
        passes += 1
        enabled = min(x, shape.o_c - c)
        tile_filters = np.zeros((x, shape.ks * shape.ks, shape.i_c), dtype=np.int8)
        tile_filters[:enabled] = blocks[c:c + enabled]
        tile_biases = np.zeros(x, dtype=np.int32)
        tile_biases[:enabled] = quant.bias[c:c + enabled]

        emit(conf)
        emit(isa.LoadWeights(enabled=enabled, biases=tile_biases,
                             filters=tile_filters))
        weights_bytes += x * (shape.ks * shape.ks * shape.i_c + 4)

        starting = 0
        for h in range(shape.o_h):
            if sched[h] != starting - 1:
                n = sched[h] + 1 - starting
                emit(isa.LoadInput(rows=rows_flat[starting:starting + n]))
                inputs_bytes += n * shape.i_w * shape.i_c
                starting = sched[h] + 1
            emit(isa.Schedule(h=h, c_base=c))
            emit(isa.StoreOutput(h=h, c_base=c), h=h, c_base=c, enabled=enabled)
            outputs_bytes += enabled * shape.o_w

    return LayerPlan(shape=shape, x=x, uf=cfg.uf,
                     stream=np.concatenate(parts),
                     messages=tuple(messages),
                     ledger=TransferLedger(weights_in=weights_bytes,
                                           inputs_in=inputs_bytes,
                                           outputs_out=outputs_bytes),
                     passes=passes)


def run_layer(plan: LayerPlan, simulator: Simulator):
    """Execute a plan; returns (output int8 (o_h, o_w, o_c), SimReport).

    Simulator faults are re-raised with the index of the offending message.
    """
    sh = plan.shape
    out = np.zeros((sh.o_h, sh.o_w, sh.o_c), dtype=np.int8)
    wpb = isa.words_per_block(sh.o_w)
    for i, msg in enumerate(plan.messages):
        try:
            resp = simulator.ingest_words(plan.stream[msg.start:msg.end])
        except SimFault as e:
            raise SimFault(f"message {i} ({msg.opcode.name}): {e}") from e
        if msg.opcode == isa.Opcode.STORE_OUTPUT:
            if len(resp) != msg.enabled * wpb:
                raise SimFault(f"message {i}: store response {len(resp)} words, "
                               f"expected {msg.enabled * wpb}")
            for p in range(msg.enabled):
                vals = isa.unpack_int8(resp[p * wpb:(p + 1) * wpb], sh.o_w)
                out[msg.h, :, msg.c_base + p] = vals
    return out, simulator.report()


def simulate_layer(shape: TConvShape, quant: QuantParams, input_q: np.ndarray,
                   filters_q: np.ndarray, sim_config: SimConfig | None = None,
                   trace=None):
    """Plan, run on a fresh simulator, return (output, SimReport)."""
    cfg = sim_config or SimConfig()
    plan = plan_layer(shape, quant, input_q, filters_q, cfg)
    return run_layer(plan, Simulator(cfg, trace=trace))
