import numpy as np
import pytest

from mm2im import QuantParams, derive_shape
from mm2im.bench import random_layer_data


@pytest.fixture
def rng():
    return np.random.default_rng(0xC0FFEE)


def rand_shape(rng, max_ihw=8, max_ic=24, max_ks=7, max_oc=20, strides=(1, 2, 3)):
    """Random valid layer with s <= ks."""
    while True:
        ks = int(rng.integers(1, max_ks + 1))
        usable = [s for s in strides if s <= ks]
        if usable:
            break
    s = int(usable[rng.integers(0, len(usable))])
    return derive_shape(int(rng.integers(1, max_ihw + 1)),
                        int(rng.integers(1, max_ihw + 1)),
                        int(rng.integers(1, max_ic + 1)),
                        ks,
                        int(rng.integers(1, max_oc + 1)),
                        s)


def rand_case(rng, **kw):
    shape = rand_shape(rng, **kw)
    quant, input_q, filters_q = random_layer_data(shape, rng)
    return shape, quant, input_q, filters_q


def ones_case(i_h, i_w, i_c, ks, o_c, s):
    """All-ones tensors under identity quantization.

    Requantized outputs equal raw accumulator counts while they stay inside
    int8 range, which makes contribution counting visible in tests.
    """
    shape = derive_shape(i_h, i_w, i_c, ks, o_c, s)
    quant = QuantParams.unit(o_c)
    input_q = np.ones((i_h, i_w, i_c), dtype=np.int8)
    filters_q = np.ones((ks, ks, o_c, i_c), dtype=np.int8)
    return shape, quant, input_q, filters_q
