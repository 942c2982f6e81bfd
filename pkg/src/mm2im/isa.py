"""Micro-ISA codec for the tiled TCONV accelerator.

The host drives the accelerator with a stream of 32-bit little-endian words.
Every message starts with an opcode word; payload lengths are either fixed
or derived from a leading count plus the registers of the most recent
Configure, so the stream is self-delimiting.  int8 payloads are packed four
per word, least-significant byte first, each logical block padded to a word
boundary.

    opcode  name         operand words
    0x01    Configure    17 registers (see CONFIG_REGS)
    0x02    LoadWeights  1 enabled-count, then X blocks of
                         [bias word][ceil(ks*ks*i_c / 4) filter words]
    0x04    LoadInput    1 row count, then per row ceil(i_w*i_c / 4) words
    0x08    Schedule     output row h, channel-tile base c
    0x10    StoreOutput  output row h, channel-tile base c

Store responses travel the opposite direction and are not part of this
stream: one block of ceil(o_w / 4) words per enabled PM, lowest channel
first.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .shapes import TConvShape


class Opcode(IntEnum):
    CONFIGURE = 0x01
    LOAD_WEIGHTS = 0x02
    LOAD_INPUT = 0x04
    SCHEDULE = 0x08
    STORE_OUTPUT = 0x10


# Configure operand order.  o_h/o_w are redundant with (s, i_h, i_w) and are
# cross-checked on decode as a cheap stream-corruption tripwire.
CONFIG_REGS = ("i_h", "i_w", "i_c", "ks", "o_c", "s", "pad_top", "pad_left",
               "o_h", "o_w", "requant_multiplier", "requant_shift",
               "input_zero", "output_zero", "row_width", "x", "uf")

WORD_DTYPE = np.dtype("<u4")


class DecodeError(ValueError):
    """Malformed or out-of-context message."""


class StreamUnderflow(DecodeError):
    """Stream ended inside a message."""


def _u32(v: int) -> int:
    return v & 0xFFFFFFFF


def _s32(word: int) -> int:
    return word - (1 << 32) if word >= (1 << 31) else word


def words_per_block(n_bytes: int) -> int:
    return (n_bytes + 3) // 4


def pack_int8(values: np.ndarray) -> np.ndarray:
    """Pack an int8 array into little-endian uint32 words, zero-padded."""
    raw = np.ascontiguousarray(values, dtype=np.int8).tobytes()
    pad = (-len(raw)) % 4
    if pad:
        raw += b"\x00" * pad
    return np.frombuffer(raw, dtype=WORD_DTYPE).copy()


def unpack_int8(words: np.ndarray, count: int) -> np.ndarray:
    """Recover `count` int8 values from packed words."""
    raw = np.ascontiguousarray(words, dtype=WORD_DTYPE).tobytes()
    if count > len(raw):
        raise StreamUnderflow(f"need {count} packed bytes, have {len(raw)}")
    return np.frombuffer(raw[:count], dtype=np.int8).copy()


@dataclass(frozen=True)
class Configure:
    """Layer registers: shape, requant constants, mapper seeds, array echo."""

    shape: TConvShape
    requant_multiplier: int
    requant_shift: int
    input_zero: int
    output_zero: int
    row_width: int
    x: int
    uf: int

    @property
    def opcode(self) -> Opcode:
        return Opcode.CONFIGURE


@dataclass(frozen=True, eq=False)
class LoadWeights:
    """One channel tile of filters: X blocks, `enabled` of them live.

    biases: (x,) int32; filters: (x, ks*ks, i_c) int8, tap-major rows.
    Blocks past `enabled` pad the tile and must be zero.
    """

    enabled: int
    biases: np.ndarray
    filters: np.ndarray

    @property
    def opcode(self) -> Opcode:
        return Opcode.LOAD_WEIGHTS


@dataclass(frozen=True, eq=False)
class LoadInput:
    """A run of consecutive input rows, each (i_w * i_c,) int8."""

    rows: np.ndarray

    @property
    def opcode(self) -> Opcode:
        return Opcode.LOAD_INPUT


@dataclass(frozen=True)
class Schedule:
    h: int
    c_base: int

    @property
    def opcode(self) -> Opcode:
        return Opcode.SCHEDULE


@dataclass(frozen=True)
class StoreOutput:
    h: int
    c_base: int

    @property
    def opcode(self) -> Opcode:
        return Opcode.STORE_OUTPUT


Instruction = Configure | LoadWeights | LoadInput | Schedule | StoreOutput


def encode(inst: Instruction) -> np.ndarray:
    """Serialize one instruction to its word-level message."""
    if isinstance(inst, Configure):
        sh = inst.shape
        vals = {"i_h": sh.i_h, "i_w": sh.i_w, "i_c": sh.i_c, "ks": sh.ks,
                "o_c": sh.o_c, "s": sh.s, "pad_top": sh.pad_top,
                "pad_left": sh.pad_left, "o_h": sh.o_h, "o_w": sh.o_w,
                "requant_multiplier": inst.requant_multiplier,
                "requant_shift": inst.requant_shift,
                "input_zero": inst.input_zero, "output_zero": inst.output_zero,
                "row_width": inst.row_width, "x": inst.x, "uf": inst.uf}
        words = [int(Opcode.CONFIGURE)] + [_u32(vals[r]) for r in CONFIG_REGS]
        return np.array(words, dtype=WORD_DTYPE)

    if isinstance(inst, LoadWeights):
        x = inst.filters.shape[0]
        parts = [np.array([int(Opcode.LOAD_WEIGHTS), inst.enabled], dtype=WORD_DTYPE)]
        for p in range(x):
            parts.append(np.array([_u32(int(inst.biases[p]))], dtype=WORD_DTYPE))
            parts.append(pack_int8(inst.filters[p].reshape(-1)))
        return np.concatenate(parts)

    if isinstance(inst, LoadInput):
        parts = [np.array([int(Opcode.LOAD_INPUT), inst.rows.shape[0]],
                          dtype=WORD_DTYPE)]
        for row in inst.rows:
            parts.append(pack_int8(row))
        return np.concatenate(parts)

    if isinstance(inst, Schedule):
        return np.array([int(Opcode.SCHEDULE), inst.h, inst.c_base], dtype=WORD_DTYPE)

    if isinstance(inst, StoreOutput):
        return np.array([int(Opcode.STORE_OUTPUT), inst.h, inst.c_base],
                        dtype=WORD_DTYPE)

    raise TypeError(f"not an instruction: {inst!r}")


def _take(words: np.ndarray, pos: int, n: int) -> np.ndarray:
    if pos + n > len(words):
        raise StreamUnderflow(f"message needs {pos + n} words, stream has "
                              f"{len(words)}")
    return words[pos:pos + n]


def decode(words: np.ndarray, config: Configure | None = None
           ) -> tuple[Instruction, int]:
    """Decode one message from the front of `words`.

    Returns (instruction, words consumed).  LoadWeights and LoadInput sizes
    depend on the active Configure, which the caller supplies; decoding them
    without one is a protocol error.
    """
    if len(words) == 0:
        raise StreamUnderflow("empty stream")
    op = int(words[0])
    if op == Opcode.CONFIGURE:
        regs = dict(zip(CONFIG_REGS, (int(w) for w in _take(words, 1, len(CONFIG_REGS)))))
        shape = TConvShape(i_h=regs["i_h"], i_w=regs["i_w"], i_c=regs["i_c"],
                           ks=regs["ks"], o_c=regs["o_c"], s=regs["s"],
                           pad_top=regs["pad_top"], pad_left=regs["pad_left"])
        if (shape.o_h, shape.o_w) != (regs["o_h"], regs["o_w"]):
            raise DecodeError(f"configure echo mismatch: stream says "
                              f"{regs['o_h']}x{regs['o_w']}, shape derives "
                              f"{shape.o_h}x{shape.o_w}")
        inst = Configure(shape=shape,
                         requant_multiplier=regs["requant_multiplier"],
                         requant_shift=regs["requant_shift"],
                         input_zero=_s32(regs["input_zero"]),
                         output_zero=_s32(regs["output_zero"]),
                         row_width=regs["row_width"], x=regs["x"], uf=regs["uf"])
        return inst, 1 + len(CONFIG_REGS)

    if op == Opcode.LOAD_WEIGHTS:
        if config is None:
            raise DecodeError("LoadWeights before any Configure")
        sh = config.shape
        enabled = int(_take(words, 1, 1)[0])
        if not (1 <= enabled <= config.x):
            raise DecodeError(f"enabled count {enabled} outside [1, {config.x}]")
        fsize = sh.ks * sh.ks * sh.i_c
        fwords = words_per_block(fsize)
        pos = 2
        biases = np.empty(config.x, dtype=np.int32)
        filters = np.empty((config.x, sh.ks * sh.ks, sh.i_c), dtype=np.int8)
        for p in range(config.x):
            biases[p] = _s32(int(_take(words, pos, 1)[0]))
            pos += 1
            filters[p] = unpack_int8(_take(words, pos, fwords), fsize).reshape(
                sh.ks * sh.ks, sh.i_c)
            pos += fwords
        return LoadWeights(enabled=enabled, biases=biases, filters=filters), pos

    if op == Opcode.LOAD_INPUT:
        if config is None:
            raise DecodeError("LoadInput before any Configure")
        sh = config.shape
        n_rows = int(_take(words, 1, 1)[0])
        rsize = sh.i_w * sh.i_c
        rwords = words_per_block(rsize)
        pos = 2
        rows = np.empty((n_rows, rsize), dtype=np.int8)
        for r in range(n_rows):
            rows[r] = unpack_int8(_take(words, pos, rwords), rsize)
            pos += rwords
        return LoadInput(rows=rows), pos

    if op == Opcode.SCHEDULE:
        h, c = (int(w) for w in _take(words, 1, 2))
        return Schedule(h=h, c_base=c), 3

    if op == Opcode.STORE_OUTPUT:
        h, c = (int(w) for w in _take(words, 1, 2))
        return StoreOutput(h=h, c_base=c), 3

    raise DecodeError(f"unknown opcode {op:#04x}")


def decode_stream(words: np.ndarray) -> list[Instruction]:
    """Decode a whole stream, tracking Configure context along the way."""
    out: list[Instruction] = []
    config: Configure | None = None
    pos = 0
    while pos < len(words):
        inst, used = decode(words[pos:], config)
        if isinstance(inst, Configure):
            config = inst
        out.append(inst)
        pos += used
    return out


def stream_to_bytes(words: np.ndarray) -> bytes:
    """Byte-level serialization: each word little-endian."""
    return np.ascontiguousarray(words, dtype=WORD_DTYPE).tobytes()


def bytes_to_stream(raw: bytes) -> np.ndarray:
    if len(raw) % 4:
        raise DecodeError(f"byte stream length {len(raw)} is not word-aligned")
    return np.frombuffer(raw, dtype=WORD_DTYPE).copy()
