"""Bit-exact transposed-convolution references via three independent routes.

direct_tconv        scatter-accumulate every (input pixel, kernel tap) product
zero_insertion_tconv upsample with inserted zeros, then a stride-1 convolution
iom_baseline_tconv  dense MatMul followed by a col2im gather (no skipping)

All three share the padding/crop convention from `derive_shape` and the
fixed-point finalization from `quant`, and must agree bit-for-bit on any
valid layer.  Tensor layouts are row-major numpy arrays:

    input    (i_h, i_w, i_c)      int8
    filters  (ks, ks, o_c, i_c)   int8
    output   (o_h, o_w, o_c)      int8
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .quant import QuantParams, requantize_array
from .shapes import ShapeError, TConvShape


def validate_tensors(shape: TConvShape, input_q: np.ndarray, filters_q: np.ndarray,
                     bias: np.ndarray | None = None) -> None:
    """Check dtypes and extents against the layer shape; raise ShapeError."""
    if input_q.dtype != np.int8:
        raise ShapeError(f"input dtype must be int8, got {input_q.dtype}")
    if filters_q.dtype != np.int8:
        raise ShapeError(f"filters dtype must be int8, got {filters_q.dtype}")
    want_in = (shape.i_h, shape.i_w, shape.i_c)
    if input_q.shape != want_in:
        raise ShapeError(f"input shape {input_q.shape} != {want_in}")
    want_w = (shape.ks, shape.ks, shape.o_c, shape.i_c)
    if filters_q.shape != want_w:
        raise ShapeError(f"filters shape {filters_q.shape} != {want_w}")
    if bias is not None and bias.shape != (shape.o_c,):
        raise ShapeError(f"bias shape {bias.shape} != ({shape.o_c},)")


def scatter_accumulate(shape: TConvShape, input_q: np.ndarray, filters_q: np.ndarray,
                       input_zero: int) -> np.ndarray:
    """Padded pre-crop accumulator grid (p_h, p_w, o_c), int32, no bias.

    Target cell for input pixel (ih, iw) and kernel tap (kh, kw) is
    (s*ih + kh, s*iw + kw).  Accumulation order is irrelevant: integer adds
    commute and the int8 value bounds keep every accumulator well inside
    int32 for any supported layer.
    """
    x = input_q.astype(np.int32) - np.int32(input_zero)
    w = filters_q.astype(np.int32)
    # contrib[ih, iw, kh, kw, oc] = sum_ic x[ih, iw, ic] * w[kh, kw, oc, ic]
    contrib = np.einsum("hwc,ijoc->hwijo", x, w)
    acc = np.zeros((shape.p_h, shape.p_w, shape.o_c), dtype=np.int32)
    s = shape.s
    for kh in range(shape.ks):
        for kw in range(shape.ks):
            acc[kh:kh + s * shape.i_h:s, kw:kw + s * shape.i_w:s, :] += contrib[:, :, kh, kw, :]
    return acc


def finalize(shape: TConvShape, quant: QuantParams, padded_acc: np.ndarray) -> np.ndarray:
    """Crop (or embed, for s > ks), add bias, requantize to int8."""
    final = np.zeros((shape.o_h, shape.o_w, shape.o_c), dtype=np.int32)
    hs = min(shape.o_h, shape.p_h - shape.pad_top)
    ws = min(shape.o_w, shape.p_w - shape.pad_left)
    final[:hs, :ws, :] = padded_acc[shape.pad_top:shape.pad_top + hs,
                                    shape.pad_left:shape.pad_left + ws, :]
    final += quant.bias[np.newaxis, np.newaxis, :]
    return requantize_array(final, quant)


def direct_tconv(shape: TConvShape, quant: QuantParams, input_q: np.ndarray,
                 filters_q: np.ndarray) -> np.ndarray:
    """Ground-truth TCONV: scatter-accumulate, crop, bias, requantize."""
    validate_tensors(shape, input_q, filters_q, quant.bias)
    return finalize(shape, quant, scatter_accumulate(shape, input_q, filters_q,
                                                     quant.input_zero))


def upsampled_grid(shape: TConvShape, input_q: np.ndarray, input_zero: int) -> np.ndarray:
    """Zero-inserted, border-padded int32 grid for the stride-1 route.

    Offset-corrected input values land at multiples of s; everything else is
    an inserted zero.  The border is ks-1 on every side, so a valid stride-1
    convolution over this grid yields exactly the p_h x p_w padded outputs.
    """
    u_h = (shape.i_h - 1) * shape.s + 1
    u_w = (shape.i_w - 1) * shape.s + 1
    b = shape.ks - 1
    grid = np.zeros((u_h + 2 * b, u_w + 2 * b, shape.i_c), dtype=np.int32)
    grid[b:b + u_h:shape.s, b:b + u_w:shape.s, :] = (
        input_q.astype(np.int32) - np.int32(input_zero))
    return grid


def zero_insertion_tconv(shape: TConvShape, quant: QuantParams, input_q: np.ndarray,
                         filters_q: np.ndarray) -> np.ndarray:
    """TCONV as a plain stride-1 convolution over a zero-upsampled grid.

    The kernel is flipped on both spatial axes; with s == 1 the upsampled
    grid degenerates to the input plus border and this is an ordinary
    padded convolution.
    """
    validate_tensors(shape, input_q, filters_q, quant.bias)
    grid = upsampled_grid(shape, input_q, quant.input_zero)
    wf = filters_q[::-1, ::-1, :, :].astype(np.int32)
    acc = np.zeros((shape.p_h, shape.p_w, shape.o_c), dtype=np.int32)
    for kh in range(shape.ks):
        for kw in range(shape.ks):
            window = grid[kh:kh + shape.p_h, kw:kw + shape.p_w, :]
            acc += np.einsum("hwc,oc->hwo", window, wf[kh, kw])
    return finalize(shape, quant, acc)


class IomResult(NamedTuple):
    output: np.ndarray
    macs: int


def weight_matrix(shape: TConvShape, filters_q: np.ndarray) -> np.ndarray:
    """Filters as a (K, N) int32 MatMul operand, N indexed tap-major.

    Column n = (kh * ks + kw) * o_c + oc.
    """
    # (ks, ks, o_c, i_c) -> (i_c, ks*ks*o_c)
    return filters_q.astype(np.int32).transpose(3, 0, 1, 2).reshape(
        shape.i_c, shape.ks * shape.ks * shape.o_c)


def iom_baseline_tconv(shape: TConvShape, quant: QuantParams, input_q: np.ndarray,
                       filters_q: np.ndarray) -> IomResult:
    """Input-oriented baseline: full M x N MatMul, then col2im.

    Computes every padded-grid product including the ones that cropping
    throws away, and reports the MACs it performed (M*N*K) so callers can
    quantify that waste.
    """
    validate_tensors(shape, input_q, filters_q, quant.bias)
    m = shape.i_h * shape.i_w
    k = shape.i_c
    lhs = input_q.reshape(m, k).astype(np.int32) - np.int32(quant.input_zero)
    partial = lhs @ weight_matrix(shape, filters_q)        # (m, ks*ks*o_c)
    acc = np.zeros((shape.p_h, shape.p_w, shape.o_c), dtype=np.int32)
    s = shape.s
    for kh in range(shape.ks):
        for kw in range(shape.ks):
            tap = kh * shape.ks + kw
            block = partial[:, tap * shape.o_c:(tap + 1) * shape.o_c]
            acc[kh:kh + s * shape.i_h:s, kw:kw + s * shape.i_w:s, :] += \
                block.reshape(shape.i_h, shape.i_w, shape.o_c)
    out = finalize(shape, quant, acc)
    return IomResult(out, m * (shape.ks * shape.ks * shape.o_c) * k)
