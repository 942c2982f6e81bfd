import numpy as np
import pytest

from mm2im import (
    QuantParams,
    ShapeError,
    derive_shape,
    direct_tconv,
    iom_baseline_tconv,
    zero_insertion_tconv,
)
from mm2im.quant import requantize
from mm2im.bench import random_layer_data
from mm2im.reference import (
    scatter_accumulate,
    upsampled_grid,
    validate_tensors,
    weight_matrix,
)

from conftest import ones_case, rand_case


def loop_tconv(shape, quant, input_q, filters_q, order=None):
    """Independent oracle: pure-Python quadruple loop over scatter targets.

    Optionally accumulates the (ih, iw, kh, kw) contributions in a caller
    supplied order to demonstrate order independence.
    """
    acc = [[[0] * shape.o_c for _ in range(shape.p_w)] for _ in range(shape.p_h)]
    steps = [
        (ih, iw, kh, kw)
        for ih in range(shape.i_h)
        for iw in range(shape.i_w)
        for kh in range(shape.ks)
        for kw in range(shape.ks)
    ]
    if order is not None:
        steps = [steps[i] for i in order]
    for ih, iw, kh, kw in steps:
        th, tw = shape.s * ih + kh, shape.s * iw + kw
        for oc in range(shape.o_c):
            dot = 0
            for ic in range(shape.i_c):
                dot += (int(input_q[ih, iw, ic]) - quant.input_zero) * int(
                    filters_q[kh, kw, oc, ic])
            acc[th][tw][oc] += dot
    out = np.zeros((shape.o_h, shape.o_w, shape.o_c), dtype=np.int8)
    for h in range(shape.o_h):
        for w in range(shape.o_w):
            ph, pw = h + shape.pad_top, w + shape.pad_left
            for oc in range(shape.o_c):
                raw = int(quant.bias[oc])
                if ph < shape.p_h and pw < shape.p_w:
                    raw += acc[ph][pw][oc]
                out[h, w, oc] = requantize(raw, quant)
    return out


@pytest.mark.parametrize("dims", [
    (2, 2, 2, 3, 2, 1),
    (3, 2, 4, 2, 3, 2),
    (2, 3, 3, 4, 2, 3),
    (1, 1, 2, 3, 2, 1),
    (2, 2, 2, 1, 3, 3),   # overstrided
    (4, 1, 1, 5, 1, 2),
])
def test_direct_matches_python_loop_oracle(dims, rng):
    shape = derive_shape(*dims)
    quant, input_q, filters_q = random_layer_data(shape, rng)
    want = loop_tconv(shape, quant, input_q, filters_q)
    np.testing.assert_array_equal(direct_tconv(shape, quant, input_q, filters_q), want)


def test_accumulation_order_independence(rng):
    shape = derive_shape(2, 3, 3, 3, 2, 2)
    quant, input_q, filters_q = random_layer_data(shape, rng)
    base = loop_tconv(shape, quant, input_q, filters_q)
    n = shape.i_h * shape.i_w * shape.ks * shape.ks
    for _ in range(3):
        order = rng.permutation(n)
        np.testing.assert_array_equal(
            loop_tconv(shape, quant, input_q, filters_q, order=order), base)
    np.testing.assert_array_equal(direct_tconv(shape, quant, input_q, filters_q), base)


def test_precrop_counts_are_separable():
    # With all-ones tensors the padded accumulator per channel equals the
    # outer product of per-axis tap counts times i_c.  For i=2, ks=3, s=1
    # that axis profile is [1, 2, 2, 1].
    shape, quant, input_q, filters_q = ones_case(2, 2, 2, 3, 2, 1)
    acc = scatter_accumulate(shape, input_q, filters_q, quant.input_zero)
    profile = np.array([1, 2, 2, 1])
    want = np.outer(profile, profile) * shape.i_c
    for oc in range(shape.o_c):
        np.testing.assert_array_equal(acc[:, :, oc], want)


def test_precrop_counts_brute_force(rng):
    for _ in range(6):
        shape, quant, input_q, filters_q = rand_case(rng, max_ihw=5, max_ic=6,
                                                     max_ks=5, max_oc=4)
        counts = np.zeros((shape.p_h, shape.p_w), dtype=np.int64)
        for ih in range(shape.i_h):
            for iw in range(shape.i_w):
                for kh in range(shape.ks):
                    for kw in range(shape.ks):
                        counts[shape.s * ih + kh, shape.s * iw + kw] += 1
        ones = ones_case(shape.i_h, shape.i_w, shape.i_c, shape.ks, shape.o_c, shape.s)
        acc = scatter_accumulate(shape, ones[2], ones[3], 0)
        for oc in range(shape.o_c):
            np.testing.assert_array_equal(acc[:, :, oc], counts * shape.i_c)


def test_three_routes_agree(rng):
    for _ in range(12):
        shape, quant, input_q, filters_q = rand_case(rng)
        want = direct_tconv(shape, quant, input_q, filters_q)
        np.testing.assert_array_equal(
            zero_insertion_tconv(shape, quant, input_q, filters_q), want)
        iom = iom_baseline_tconv(shape, quant, input_q, filters_q)
        np.testing.assert_array_equal(iom.output, want)
        n = shape.ks * shape.ks * shape.o_c
        assert iom.macs == (shape.i_h * shape.i_w) * n * shape.i_c


def test_stride_one_routes_degenerate_cleanly(rng):
    shape = derive_shape(5, 4, 3, 3, 4, 1)
    quant, input_q, filters_q = random_layer_data(shape, rng)
    want = direct_tconv(shape, quant, input_q, filters_q)
    np.testing.assert_array_equal(
        zero_insertion_tconv(shape, quant, input_q, filters_q), want)


def test_upsampled_grid_mostly_zeros():
    # s=2 zero insertion: for a 64x64 input under a 5x5 kernel, real values
    # occupy well under a quarter of the upsampled grid.
    shape = derive_shape(64, 64, 1, 5, 1, 2)
    input_q = np.full((64, 64, 1), 7, dtype=np.int8)   # nonzero everywhere
    grid = upsampled_grid(shape, input_q, 0)
    zero_frac = float(np.mean(grid == 0))
    assert zero_frac >= 0.75
    assert int(np.count_nonzero(grid)) == 64 * 64


def test_overstrided_gap_outputs_are_bias_only(rng):
    shape = derive_shape(3, 3, 2, 2, 2, 4)     # s > ks: gap rows/cols exist
    quant, input_q, filters_q = random_layer_data(shape, rng)
    out = direct_tconv(shape, quant, input_q, filters_q)
    gap = np.array([requantize(int(b), quant) for b in quant.bias], dtype=np.int8)
    # rows beyond the scatter reach get no contributions at all
    for h in range(shape.p_h, shape.o_h):
        for w in range(shape.o_w):
            np.testing.assert_array_equal(out[h, w], gap)
    # within a window period, coordinates past ks-1 are gaps too
    np.testing.assert_array_equal(out[2, 0], gap)      # row 2 = ks..s-1 gap
    assert out.shape == (12, 12, 2)


def test_weight_matrix_layout():
    shape = derive_shape(1, 1, 2, 2, 3, 1)
    filters_q = np.arange(2 * 2 * 3 * 2, dtype=np.int8).reshape(2, 2, 3, 2)
    wm = weight_matrix(shape, filters_q)
    assert wm.shape == (2, 12)
    for kh in range(2):
        for kw in range(2):
            for oc in range(3):
                col = (kh * 2 + kw) * 3 + oc
                np.testing.assert_array_equal(wm[:, col],
                                              filters_q[kh, kw, oc].astype(np.int32))


def test_validate_tensors_errors(rng):
    shape = derive_shape(2, 2, 2, 3, 2, 1)
    good_in = np.zeros((2, 2, 2), dtype=np.int8)
    good_w = np.zeros((3, 3, 2, 2), dtype=np.int8)
    with pytest.raises(ShapeError):
        validate_tensors(shape, good_in.astype(np.int16), good_w)
    with pytest.raises(ShapeError):
        validate_tensors(shape, good_in, good_w.astype(np.int32))
    with pytest.raises(ShapeError):
        validate_tensors(shape, np.zeros((2, 3, 2), np.int8), good_w)
    with pytest.raises(ShapeError):
        validate_tensors(shape, good_in, np.zeros((3, 3, 4, 2), np.int8))
    with pytest.raises(ShapeError):
        validate_tensors(shape, good_in, good_w, bias=np.zeros(5, np.int32))
