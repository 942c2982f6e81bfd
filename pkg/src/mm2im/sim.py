"""Functional and cycle-approximate model of the tiled TCONV accelerator.

The simulated device is an array of X processing modules (PMs), one output
channel each per tile pass.  A shared on-chip mapper turns MatMul rows into
surviving (col, im_dex) pairs; every PM consumes the same maps against its
own filter block.  Each PM's compute unit (CU) folds a dot product UF lanes
at a time, an accumulation unit (AU) scatters results into a row-granular
output buffer, and a post-processing unit (PPU) requantizes a finished row
before the output crossbar streams it back to the host.

The functional half is bit-exact against the reference TCONV.  The timing
half counts cycles per stage from a unit-cost table.  Each scheduled row is
two steps: the mapper streams the step's surviving map entries to the PMs,
then CU, AU and PPU drain them as a pipeline whose latency is the largest
stage.  Serial word streams (weight/input arrival, output return) are
charged one word per cycle.

Output rows are computed just in time: when row h is scheduled, every
not-yet-computed product targeting row h is folded in, plus - preemptively -
any product targeting row h+1 whose input row is already on chip.  At most
two output rows are ever live per PM, so the accumulator high-water mark
never exceeds 2 * o_w.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TextIO

import numpy as np

from . import isa
from .isa import Configure, Instruction, LoadInput, LoadWeights, Schedule, StoreOutput
from .mapping import compute_i_end_row, kept_tap_counts
from .quant import requantize_raw


class SimFault(RuntimeError):
    """Protocol violation or resource overflow detected by the device model."""


@dataclass(frozen=True)
class SimConfig:
    """Array geometry, buffer capacities (elements), and stage unit costs."""

    x: int = 8                      # processing modules
    uf: int = 16                    # dot-product lanes folded per CU cycle
    filter_buf_elems: int = 1 << 16     # int8 weights per PM
    row_buf_elems: int = 1 << 22        # int8 input elements, shared
    out_buf_elems: int = 1 << 13        # int32 accumulators per PM
    map_cost: int = 1               # cycles per emitted map entry
    au_cost: int = 1                # cycles per accumulate
    ppu_cost: int = 1               # cycles per requantized element
    xbar_cost: int = 1              # cycles per crossbar word
    charge_omap: bool = False       # charge map entries as inbound host traffic

    def __post_init__(self):
        if self.x < 1 or self.uf < 1:
            raise ValueError("x and uf must be at least 1")


@dataclass(frozen=True)
class SimReport:
    """Deterministic counters for one simulator run."""

    macs_executed: int
    macs_skipped: int
    cycles: dict[str, int]
    total_cycles: int
    bytes: dict[str, int]
    out_buf_high_water: int
    row_buf_high_water: int
    fifo_high_water: int
    pm_utilization: tuple[float, ...]


_CYCLE_KEYS = ("cu_compute", "cu_load", "cu_store", "au", "ppu", "mapper", "stall")
_BYTE_KEYS = ("weights_in", "inputs_in", "outputs_out", "omap_in")
_OMAP_ENTRY_BYTES = 8   # one cmap word + one omap word per surviving tap


class Simulator:
    """Consumes the instruction word stream, produces output row payloads."""

    def __init__(self, config: SimConfig | None = None, trace: TextIO | None = None):
        self.config = config or SimConfig()
        self.trace = trace
        self.cycles = {k: 0 for k in _CYCLE_KEYS}
        self.total_cycles = 0
        self.bytes = {k: 0 for k in _BYTE_KEYS}
        self.macs_executed = 0
        self.macs_skipped = 0
        self.out_buf_high_water = 0
        self.row_buf_high_water = 0
        self.fifo_high_water = 0
        self.pm_busy = np.zeros(self.config.x, dtype=np.int64)
        self._conf: Configure | None = None
        self._weights_loaded = False

    # ------------------------------------------------------------------ #
    # ingest                                                             #
    # ------------------------------------------------------------------ #

    def ingest_words(self, words: np.ndarray) -> np.ndarray:
        """Decode and execute exactly one message; return response words."""
        inst, used = isa.decode(words, self._conf)
        if used != len(words):
            raise SimFault(f"message is {used} words but {len(words)} were fed")
        return self.ingest(inst, msg_words=used)

    def ingest(self, inst: Instruction, msg_words: int | None = None) -> np.ndarray:
        if msg_words is None:
            msg_words = self._message_words(inst)
        if isinstance(inst, Configure):
            resp = self._configure(inst, msg_words)
        elif isinstance(inst, LoadWeights):
            resp = self._load_weights(inst, msg_words)
        elif isinstance(inst, LoadInput):
            resp = self._load_input(inst, msg_words)
        elif isinstance(inst, Schedule):
            resp = self._schedule(inst, msg_words)
        elif isinstance(inst, StoreOutput):
            resp = self._store(inst, msg_words)
        else:
            raise SimFault(f"unknown instruction {inst!r}")
        if self.trace is not None:
            self.trace.write(f"{self.total_cycles} {int(inst.opcode):#04x} "
                             f"{msg_words}\n")
        return resp

    def report(self) -> SimReport:
        total = self.total_cycles
        util = tuple(float(b) / total if total else 0.0 for b in self.pm_busy)
        return SimReport(
            macs_executed=self.macs_executed,
            macs_skipped=self.macs_skipped,
            cycles=dict(self.cycles),
            total_cycles=total,
            bytes=dict(self.bytes),
            out_buf_high_water=self.out_buf_high_water,
            row_buf_high_water=self.row_buf_high_water,
            fifo_high_water=self.fifo_high_water,
            pm_utilization=util,
        )

    # ------------------------------------------------------------------ #
    # message handlers                                                   #
    # ------------------------------------------------------------------ #

    def _message_words(self, inst: Instruction) -> int:
        if isinstance(inst, Configure):
            return 1 + len(isa.CONFIG_REGS)
        if isinstance(inst, LoadWeights):
            fwords = isa.words_per_block(inst.filters.shape[1] * inst.filters.shape[2])
            return 2 + inst.filters.shape[0] * (1 + fwords)
        if isinstance(inst, LoadInput):
            return 2 + inst.rows.shape[0] * isa.words_per_block(inst.rows.shape[1])
        return 3

    def _configure(self, conf: Configure, msg_words: int) -> np.ndarray:
        cfg = self.config
        if conf.x != cfg.x or conf.uf != cfg.uf:
            raise SimFault(f"array echo mismatch: stream says x={conf.x} "
                           f"uf={conf.uf}, device has x={cfg.x} uf={cfg.uf}")
        sh = conf.shape
        if conf.row_width != sh.i_w:
            raise SimFault(f"row_width {conf.row_width} unsupported (need i_w={sh.i_w})")
        if not (0 <= sh.pad_top < sh.ks and 0 <= sh.pad_left < sh.ks):
            raise SimFault(f"crop offsets ({sh.pad_top}, {sh.pad_left}) outside "
                           f"[0, ks)")
        per_pm_filter = sh.ks * sh.ks * sh.i_c
        if per_pm_filter > cfg.filter_buf_elems:
            raise SimFault(f"filter block {per_pm_filter} exceeds filter buffer "
                           f"{cfg.filter_buf_elems}")
        if sh.i_h * sh.i_w * sh.i_c > cfg.row_buf_elems:
            raise SimFault(f"input {sh.i_h * sh.i_w * sh.i_c} exceeds row buffer "
                           f"{cfg.row_buf_elems}")
        if 2 * sh.o_w > cfg.out_buf_elems:
            raise SimFault(f"2 output rows ({2 * sh.o_w}) exceed out_buf "
                           f"{cfg.out_buf_elems}")
        self._conf = conf
        self._shape = sh
        self._cpd = -(-sh.i_c // cfg.uf)            # CU cycles per dot product
        self._kept_h, kept_w = kept_tap_counts(sh)
        self._i_end_row = compute_i_end_row(sh).i_end_row
        # Surviving (iw, kw) pairs are independent of the input row; build the
        # gather/scatter index vectors once per layer.
        idx_iw, idx_kw, idx_col = [], [], []
        for iw in range(sh.i_w):
            off = -sh.pad_left + sh.s * iw
            for kw in range(sh.ks):
                tgt = off + kw
                if 0 <= tgt < sh.o_w:
                    idx_iw.append(iw)
                    idx_kw.append(kw)
                    idx_col.append(tgt)
        self._idx_iw = np.array(idx_iw, dtype=np.intp)
        self._idx_kw = np.array(idx_kw, dtype=np.intp)
        self._idx_col = np.array(idx_col, dtype=np.intp)
        self._weights_loaded = False
        self._reset_pass()
        self.cycles["stall"] += msg_words
        self.total_cycles += msg_words
        return np.empty(0, dtype=isa.WORD_DTYPE)

    def _reset_pass(self):
        sh = self._shape
        self._rows = np.zeros((sh.i_h, sh.i_w, sh.i_c), dtype=np.int32)
        self._rows_arrived = 0
        self._acc: dict[int, np.ndarray] = {}
        self._done: set[tuple[int, int]] = set()
        self._staged: dict[int, np.ndarray] = {}
        self._next_h = 0
        self._pass_c: int | None = None

    def _load_weights(self, lw: LoadWeights, msg_words: int) -> np.ndarray:
        if self._conf is None:
            raise SimFault("LoadWeights before Configure")
        sh = self._shape
        cfg = self.config
        want = (cfg.x, sh.ks * sh.ks, sh.i_c)
        if lw.filters.shape != want:
            raise SimFault(f"filter tile shape {lw.filters.shape} != {want}")
        if not (1 <= lw.enabled <= cfg.x):
            raise SimFault(f"enabled count {lw.enabled} outside [1, {cfg.x}]")
        self._filters = lw.filters.astype(np.int32)
        self._biases = lw.biases.astype(np.int32)
        self._enabled = lw.enabled
        self._weights_loaded = True
        self._reset_pass()
        fwords = isa.words_per_block(sh.ks * sh.ks * sh.i_c)
        dist = cfg.x * (1 + fwords)                 # serial distribution to PMs
        self.cycles["stall"] += msg_words
        self.cycles["cu_load"] += dist
        self.total_cycles += msg_words + dist
        self.bytes["weights_in"] += cfg.x * (sh.ks * sh.ks * sh.i_c + 4)
        return np.empty(0, dtype=isa.WORD_DTYPE)

    def _load_input(self, li: LoadInput, msg_words: int) -> np.ndarray:
        if self._conf is None:
            raise SimFault("LoadInput before Configure")
        if not self._weights_loaded:
            raise SimFault("LoadInput before LoadWeights in this pass")
        sh = self._shape
        n = li.rows.shape[0]
        if li.rows.shape[1] != sh.i_w * sh.i_c:
            raise SimFault(f"input row length {li.rows.shape[1]} != "
                           f"{sh.i_w * sh.i_c}")
        if self._rows_arrived + n > sh.i_h:
            raise SimFault(f"input row overflow: {self._rows_arrived} + {n} > "
                           f"{sh.i_h}")
        izero = self._conf.input_zero
        block = li.rows.astype(np.int32).reshape(n, sh.i_w, sh.i_c) - izero
        self._rows[self._rows_arrived:self._rows_arrived + n] = block
        # Taps whose target row falls in the cropped margin are dropped the
        # moment the mapper sees the row; account their skipped MACs here.
        for r in range(self._rows_arrived, self._rows_arrived + n):
            dropped_kh = sh.ks - int(self._kept_h[r])
            self.macs_skipped += dropped_kh * sh.i_w * sh.ks * self._enabled * sh.i_c
        self._rows_arrived += n
        self.row_buf_high_water = max(self.row_buf_high_water,
                                      self._rows_arrived * sh.i_w * sh.i_c)
        self.cycles["stall"] += msg_words
        self.total_cycles += msg_words
        self.bytes["inputs_in"] += n * sh.i_w * sh.i_c
        return np.empty(0, dtype=isa.WORD_DTYPE)

    def _contributing_rows(self, t: int) -> range:
        """Input rows with a tap landing on final output row t."""
        sh = self._shape
        tp = t + sh.pad_top
        lo = max(0, -(-(tp - sh.ks + 1) // sh.s))   # ceil division
        hi = min(sh.i_h - 1, tp // sh.s)
        return range(lo, hi + 1)

    def _schedule(self, msg: Schedule, msg_words: int) -> np.ndarray:
        if self._conf is None:
            raise SimFault("Schedule before Configure")
        if not self._weights_loaded:
            raise SimFault("Schedule before LoadWeights")
        sh = self._shape
        h = msg.h
        if h != self._next_h:
            raise SimFault(f"out-of-order schedule: got row {h}, expected "
                           f"{self._next_h}")
        if h >= sh.o_h:
            raise SimFault(f"schedule row {h} outside output height {sh.o_h}")
        if self._pass_c is None:
            self._pass_c = msg.c_base
        elif msg.c_base != self._pass_c:
            raise SimFault(f"channel base changed mid-pass: {msg.c_base} != "
                           f"{self._pass_c}")
        need = self._i_end_row[h]
        if self._rows_arrived - 1 < need:
            raise SimFault(f"schedule row {h} needs input rows through {need}, "
                           f"only {self._rows_arrived} arrived")

        e_step = 0
        targets = [h] if h + 1 >= sh.o_h else [h, h + 1]
        for t in targets:
            for r_in in self._contributing_rows(t):
                if r_in >= self._rows_arrived or (r_in, t) in self._done:
                    continue
                e_step += self._compute_pair(r_in, t)
                self._done.add((r_in, t))
        self.fifo_high_water = max(self.fifo_high_water, e_step)
        # Both the live row and the lookahead row occupy out_buf right now.
        self.out_buf_high_water = max(self.out_buf_high_water,
                                      len(self._acc) * sh.o_w)

        # PPU: finish row h (bias riding on the pass's filter blocks).
        acc_row = self._acc.pop(h, None)
        if acc_row is None:
            acc_row = np.zeros((sh.o_w, self._enabled), dtype=np.int32)
        acc_row = acc_row + self._biases[np.newaxis, :self._enabled]
        conf = self._conf
        self._staged[h] = requantize_raw(acc_row, conf.requant_multiplier,
                                         conf.requant_shift, conf.output_zero)
        cfg = self.config
        # Map generation streams to the PMs before they can consume it, so it
        # is a step of its own; CU, AU and PPU then overlap as a pipeline.
        step = cfg.map_cost * e_step + max(self._cpd * e_step,
                                           cfg.au_cost * e_step,
                                           cfg.ppu_cost * sh.o_w)
        self.cycles["mapper"] += cfg.map_cost * e_step
        self.cycles["cu_compute"] += self._cpd * e_step
        self.cycles["au"] += cfg.au_cost * e_step
        self.cycles["ppu"] += cfg.ppu_cost * sh.o_w
        self.cycles["stall"] += msg_words
        self.total_cycles += msg_words + step
        self.pm_busy[:self._enabled] += self._cpd * e_step
        if cfg.charge_omap:
            self.bytes["omap_in"] += e_step * _OMAP_ENTRY_BYTES
            omap_words = e_step * _OMAP_ENTRY_BYTES // 4
            self.cycles["stall"] += omap_words
            self.total_cycles += omap_words
        self._next_h += 1
        return np.empty(0, dtype=isa.WORD_DTYPE)

    def _compute_pair(self, r_in: int, t: int) -> int:
        """Fold every surviving tap of input row r_in that targets row t."""
        sh = self._shape
        kh = t + sh.pad_top - sh.s * r_in
        assert 0 <= kh < sh.ks
        idx_col = self._idx_col
        e = len(idx_col)
        if e == 0:
            return 0
        xrow = self._rows[r_in]                       # (i_w, i_c)
        taps = self._filters[:self._enabled, kh * sh.ks + self._idx_kw, :]
        partial = np.einsum("pec,ec->ep", taps, xrow[self._idx_iw, :])
        acc = self._acc.get(t)
        if acc is None:
            acc = np.zeros((sh.o_w, self._enabled), dtype=np.int32)
            self._acc[t] = acc
        np.add.at(acc, idx_col, partial)
        self.macs_executed += e * self._enabled * sh.i_c
        self.macs_skipped += (sh.i_w * sh.ks - e) * self._enabled * sh.i_c
        return e

    def _store(self, msg: StoreOutput, msg_words: int) -> np.ndarray:
        if self._conf is None:
            raise SimFault("StoreOutput before Configure")
        sh = self._shape
        if msg.h not in self._staged:
            raise SimFault(f"store before completion: row {msg.h} not staged")
        if self._pass_c is not None and msg.c_base != self._pass_c:
            raise SimFault(f"store channel base {msg.c_base} != pass base "
                           f"{self._pass_c}")
        row = self._staged.pop(msg.h)                 # (o_w, enabled) int8
        blocks = [isa.pack_int8(row[:, p]) for p in range(self._enabled)]
        resp = np.concatenate(blocks) if blocks else np.empty(0, dtype=isa.WORD_DTYPE)
        cfg = self.config
        xbar = cfg.xbar_cost * len(resp)
        self.cycles["stall"] += msg_words + len(resp)
        self.cycles["cu_store"] += xbar
        self.total_cycles += msg_words + xbar + len(resp)
        self.bytes["outputs_out"] += self._enabled * sh.o_w
        return resp
