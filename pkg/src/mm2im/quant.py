"""Per-tensor affine int8 quantization and fixed-point requantization.

Inputs and outputs are int8 with a zero point; weights are int8 and
symmetric (zero point 0); biases are per-output-channel int32.  The real
rescale ratio input_scale * weight_scale / output_scale is realized as a
normalized 31-bit integer multiplier plus a right shift, and every compute
path in the package funnels its 32-bit accumulators through the same
`requantize` step: multiply, round half away from zero, add the output zero
point, saturate to [-128, 127].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

QMIN = -128
QMAX = 127

# The requant multiplier is a normalized mantissa in [2^30, 2^31).  Shifts
# outside [1, 62] would overflow the int64 product path, so reject them up
# front; that bounds the representable rescale ratio to roughly
# [2^-32, 2^30], far wider than any sane layer needs.
MULT_LO = 1 << 30
MULT_HI = 1 << 31
SHIFT_MIN = 1
SHIFT_MAX = 62


class QuantError(ValueError):
    """Raised for unrepresentable or inconsistent quantization parameters."""


def quantize_multiplier(ratio: float) -> tuple[int, int]:
    """Decompose a positive real ratio as mult * 2**-shift.

    mult is a 31-bit normalized mantissa, so the decomposition reproduces
    the ratio to within one unit in the last place of that format.
    """
    if not (ratio > 0.0) or not math.isfinite(ratio):
        raise QuantError(f"rescale ratio must be positive and finite, got {ratio!r}")
    mant, exp = math.frexp(ratio)          # ratio = mant * 2**exp, mant in [0.5, 1)
    mult = round(mant * MULT_HI)
    if mult == MULT_HI:                    # rounding carried into the next octave
        mult >>= 1
        exp += 1
    shift = 31 - exp
    if not (SHIFT_MIN <= shift <= SHIFT_MAX):
        raise QuantError(f"rescale ratio {ratio!r} needs shift {shift}, "
                         f"outside [{SHIFT_MIN}, {SHIFT_MAX}]")
    return mult, shift


@dataclass(frozen=True, eq=False)
class QuantParams:
    """Quantization constants for one layer.

    bias is an int32 array of length o_c.  requant_multiplier/requant_shift
    realize input_scale * weight_scale / output_scale in fixed point.
    """

    input_scale: float
    weight_scale: float
    output_scale: float
    input_zero: int
    output_zero: int
    bias: np.ndarray
    requant_multiplier: int
    requant_shift: int

    def __post_init__(self):
        if not (QMIN <= self.input_zero <= QMAX):
            raise QuantError(f"input_zero {self.input_zero} outside int8 range")
        if not (QMIN <= self.output_zero <= QMAX):
            raise QuantError(f"output_zero {self.output_zero} outside int8 range")
        if not (MULT_LO <= self.requant_multiplier < MULT_HI):
            raise QuantError(f"requant_multiplier {self.requant_multiplier} not a "
                             f"normalized 31-bit mantissa")
        if not (SHIFT_MIN <= self.requant_shift <= SHIFT_MAX):
            raise QuantError(f"requant_shift {self.requant_shift} outside "
                             f"[{SHIFT_MIN}, {SHIFT_MAX}]")
        bias = np.asarray(self.bias, dtype=np.int32)
        object.__setattr__(self, "bias", bias)
        if bias.ndim != 1:
            raise QuantError("bias must be a 1-D int32 array")

    @classmethod
    def from_scales(cls, input_scale: float, weight_scale: float, output_scale: float,
                    input_zero: int, output_zero: int, bias) -> "QuantParams":
        mult, shift = quantize_multiplier(input_scale * weight_scale / output_scale)
        return cls(input_scale=input_scale, weight_scale=weight_scale,
                   output_scale=output_scale, input_zero=input_zero,
                   output_zero=output_zero, bias=np.asarray(bias, dtype=np.int32),
                   requant_multiplier=mult, requant_shift=shift)

    @classmethod
    def unit(cls, o_c: int) -> "QuantParams":
        """Identity rescale (ratio 1), zero offsets, zero bias.

        With these parameters requantize is the identity on accumulators
        inside [-128, 127], which makes accumulation counts directly visible
        in test fixtures.
        """
        return cls.from_scales(1.0, 1.0, 1.0, 0, 0, np.zeros(o_c, dtype=np.int32))

    @property
    def rescale_ratio(self) -> float:
        return self.input_scale * self.weight_scale / self.output_scale


def requantize(acc: int, params: QuantParams) -> int:
    """Scalar fixed-point requantization of one int32 accumulator.

    Total over int32 inputs: multiply by the 31-bit mantissa, round the
    2**-shift scaling half away from zero, add the output zero point, and
    saturate to int8.
    """
    prod = int(acc) * params.requant_multiplier
    half = 1 << (params.requant_shift - 1)
    if prod >= 0:
        q = (prod + half) >> params.requant_shift
    else:
        q = -((-prod + half) >> params.requant_shift)
    q += params.output_zero
    return min(QMAX, max(QMIN, q))


def requantize_raw(acc: np.ndarray, multiplier: int, shift: int,
                   output_zero: int) -> np.ndarray:
    """Vectorized requantize from bare register values.

    acc may be any int array whose values fit in int32; the int64 product
    cannot overflow because |acc| < 2^31 and mult < 2^31.  Bit-identical to
    the scalar path.
    """
    prod = acc.astype(np.int64) * np.int64(multiplier)
    half = np.int64(1) << np.int64(shift - 1)
    pos = (prod + half) >> np.int64(shift)
    neg = -((-prod + half) >> np.int64(shift))
    q = np.where(prod >= 0, pos, neg) + np.int64(output_zero)
    return np.clip(q, QMIN, QMAX).astype(np.int8)


def requantize_array(acc: np.ndarray, params: QuantParams) -> np.ndarray:
    """Vectorized requantize of an accumulator tensor under `params`."""
    return requantize_raw(acc, params.requant_multiplier, params.requant_shift,
                          params.output_zero)
