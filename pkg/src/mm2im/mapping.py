"""Row-level compute/output maps, drop metrics, and the input-row schedule.

Viewing TCONV as a MatMul of the flattened input (M = i_h*i_w rows, K = i_c)
against the flattened filters (N = ks*ks*o_c columns), each MatMul row's
products scatter into the output grid and some of them land in the cropped
margin.  The mapper enumerates, per MatMul row, the surviving kernel taps as
(col, im_dex) pairs: `col` indexes the tap within the ks*ks filter block
(shared by every output channel), `im_dex` is the flattened index into the
final o_h*o_w output plane.

Coordinate convention: MatMul row r corresponds to input pixel
(r // row_width, r % row_width) with row_width = i_w, so the height offset
is derived from the quotient and the width offset from the remainder.  The
opposite pairing would transpose the output for non-square inputs; this
orientation is the one that reproduces `direct_tconv` bit-exactly, which the
cross-oracle tests enforce.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .shapes import ShapeError, TConvShape


@dataclass(frozen=True)
class RowMaps:
    """Surviving taps of one MatMul row: (col, im_dex) pairs, col ascending."""

    row_id: int
    entries: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class MappingMetrics:
    """Work and storage accounting for one layer under the mapping view.

    d_o counts dropped MatMul outputs (cropped scatter targets) across all
    N columns; d_r is the dropped fraction of the full M*N product matrix.
    p_outs is that full product count, padded_outs the pre-crop grid size,
    final_outs the cropped output size.  The two space-gain ratios compare
    p_outs against each of those grids.  effective_macs counts only the
    multiplies that survive: (M*N - d_o) * K.
    """

    m: int
    n: int
    k: int
    d_o: int
    d_r: float
    p_outs: int
    padded_outs: int
    final_outs: int
    space_gain_no_skip: float
    space_gain_full: float
    effective_macs: int
    overstrided: bool


@dataclass(frozen=True)
class RowSchedule:
    """i_end_row[h] = index of the last input row needed by output row h."""

    i_end_row: tuple[int, ...]


def generate_row_maps(shape: TConvShape, row_id: int = 0,
                      num_rows: int | None = None) -> list[RowMaps]:
    """Enumerate surviving (col, im_dex) pairs for a run of MatMul rows.

    Walks the ks x ks taps of each row in col order, advancing im_dex by one
    per tap and re-aligning by o_w - ks at each kernel row boundary, and
    keeps the taps whose target lands inside the final output window.
    """
    m = shape.i_h * shape.i_w
    if num_rows is None:
        num_rows = m - row_id
    if row_id < 0 or num_rows < 0 or row_id + num_rows > m:
        raise ShapeError(f"row range [{row_id}, {row_id + num_rows}) outside "
                         f"[0, {m})")
    row_width = shape.i_w
    o_h, o_w, ks, s = shape.o_h, shape.o_w, shape.ks, shape.s
    maps = []
    for r in range(row_id, row_id + num_rows):
        h_pad = -shape.pad_top + s * (r // row_width)
        w_pad = -shape.pad_left + s * (r % row_width)
        im_dex = h_pad * o_w + w_pad
        col = 0
        entries = []
        for kh in range(ks):
            for kw in range(ks):
                if 0 <= kh + h_pad < o_h and 0 <= kw + w_pad < o_w:
                    entries.append((col, im_dex))
                col += 1
                im_dex += 1
            im_dex += o_w - ks
        maps.append(RowMaps(row_id=r, entries=tuple(entries)))
    return maps


def kept_tap_counts(shape: TConvShape) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis surviving tap counts: kept_h[ih], kept_w[iw].

    A tap (kh, kw) of input pixel (ih, iw) survives iff both axes land in
    range, so the per-row count factorizes as kept_h[ih] * kept_w[iw].
    """
    def axis(extent: int, pad: int, out: int) -> np.ndarray:
        counts = np.empty(extent, dtype=np.int64)
        for i in range(extent):
            off = -pad + shape.s * i
            lo = max(0, -off)
            hi = min(shape.ks, out - off)
            counts[i] = max(0, hi - lo)
        return counts

    return (axis(shape.i_h, shape.pad_top, shape.o_h),
            axis(shape.i_w, shape.pad_left, shape.o_w))


def compute_metrics(shape: TConvShape) -> MappingMetrics:
    """Exact drop/space/work metrics by per-axis enumeration.

    The factorized count matches a brute-force walk of generate_row_maps
    over all M rows (the tests cross-check this) but stays cheap for large
    spatial extents.
    """
    m = shape.i_h * shape.i_w
    n = shape.ks * shape.ks * shape.o_c
    k = shape.i_c
    kept_h, kept_w = kept_tap_counts(shape)
    kept = int(kept_h.sum()) * int(kept_w.sum())       # taps per channel
    d_o = (m * shape.ks * shape.ks - kept) * shape.o_c
    p_outs = m * n
    padded_outs = shape.p_h * shape.p_w * shape.o_c
    final_outs = shape.o_h * shape.o_w * shape.o_c
    return MappingMetrics(
        m=m, n=n, k=k,
        d_o=d_o,
        d_r=d_o / p_outs,
        p_outs=p_outs,
        padded_outs=padded_outs,
        final_outs=final_outs,
        space_gain_no_skip=p_outs / padded_outs,
        space_gain_full=p_outs / final_outs,
        effective_macs=(p_outs - d_o) * k,
        overstrided=shape.overstrided,
    )


def compute_i_end_row(shape: TConvShape) -> RowSchedule:
    """Last input row needed to complete each final output row.

    Output row h draws from padded row h + pad_top, whose contributing input
    rows satisfy s*ih + kh = h + pad_top with kh in [0, ks); the largest is
    floor((h + pad_top) / s), clamped to the last input row.  The sequence
    is non-decreasing and ends at i_h - 1.
    """
    sched = tuple(min(shape.i_h - 1, (h + shape.pad_top) // shape.s)
                  for h in range(shape.o_h))
    return RowSchedule(i_end_row=sched)
