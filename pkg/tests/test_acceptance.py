"""Acceptance gate: every criterion in one module, one pass line each.

The sweep fixtures below run the full default grid once per session; the
criteria then check frozen values and tolerances against those shared rows.
"""

import time

import pytest

from mm2im import compute_metrics, derive_shape
from mm2im.bench import ZOO, expected_ops, ops_match, run_sweep, run_validate, run_zoo


@pytest.fixture(scope="module")
def sweep_rows():
    rows = run_sweep()                      # default grid, default array, seed 0
    return [r for r in rows if r["status"] == "ok"]


@pytest.fixture(scope="module")
def zoo_rows():
    return run_zoo(with_sim=False)


def test_criterion_01_known_layer_metrics():
    """2x2 input, 3x3 kernel, stride 1: frozen mapping metrics, exact."""
    mt = compute_metrics(derive_shape(2, 2, 2, 3, 2, 1))
    assert mt.m * mt.n == 72
    assert mt.d_o == 40
    assert mt.d_r == 40 / 72
    assert mt.space_gain_no_skip == 72 / 32 == 2.25
    assert mt.space_gain_full == 72 / 8 == 9.0
    print("[criterion 1] PASS: known-layer metrics exact "
          "(m*n=72, d_o=40, d_r=0.5556, gains 2.25x/9.0x)")


def test_criterion_02_zoo_op_counts(zoo_rows):
    """Computed 2*M*N*K matches every published op count at display precision."""
    for layer in ZOO:
        ops = expected_ops(layer.shape())
        assert ops_match(ops, layer.ops_display), \
            f"{layer.name}: computed {ops}, display {layer.ops_display}"
    assert all(r["ops_match"] for r in zoo_rows)
    print(f"[criterion 2] PASS: all {len(ZOO)} zoo layers match their "
          "published op counts at display precision")


def test_criterion_03_cross_oracle_500():
    """>=500 randomized layers: direct, zero-insertion, IOM and simulator agree."""
    t0 = time.time()
    failures = run_validate(count=500, seed=2026, max_ihw=16, max_ic=64,
                            max_ks=9, max_oc=32, strides=(1, 2, 3))
    elapsed = time.time() - t0
    assert failures == [], failures[:5]
    print(f"[criterion 3] PASS: 500 randomized layers bit-exact across all "
          f"four paths ({elapsed:.1f}s)")


def test_criterion_04_mac_counters(sweep_rows, zoo_rows):
    """Sim MAC counter equals (M*N - d_o) * K exactly; DCGAN drop rate ~ 0.28."""
    for row in sweep_rows:
        want = (row["m"] * row["n"] - row["d_o"]) * row["k"]
        assert row["macs_executed"] == want, row
        assert row["macs_executed"] + row["macs_skipped"] == \
            row["m"] * row["n"] * row["k"], row
    dcgan_dr = max(r["d_r"] for r in zoo_rows if r["name"].startswith("DCGAN"))
    assert abs(dcgan_dr - 0.28) <= 0.03, dcgan_dr
    print(f"[criterion 4] PASS: MAC counters exact on {len(sweep_rows)} sweep "
          f"configs; peak DCGAN drop rate {dcgan_dr:.4f} within 0.28+-0.03")


def test_criterion_05_output_bytes_and_buffer(sweep_rows):
    """Output traffic is exactly the tensor; accumulator stays within 2 rows."""
    for row in sweep_rows:
        o_h = o_w = row["i_h"] * row["s"]
        assert row["bytes_outputs_out"] == o_h * o_w * row["o_c"], row
        assert row["out_buf_high_water"] <= 2 * o_w, row
    print(f"[criterion 5] PASS: outputs_out == o_h*o_w*o_c and "
          f"out_buf high water <= 2*o_w on all {len(sweep_rows)} configs")


def test_criterion_06_drop_rate_trends(sweep_rows):
    """Mean drop rate rises with kernel size and falls with stride."""
    def mean_dr(key, val):
        vals = [r["d_r"] for r in sweep_rows if r[key] == val]
        return sum(vals) / len(vals)

    by_ks = {ks: mean_dr("ks", ks) for ks in (3, 5, 7)}
    assert by_ks[3] < by_ks[5] < by_ks[7], by_ks
    by_s = {s: mean_dr("s", s) for s in (1, 2)}
    assert by_s[1] > by_s[2], by_s
    print(f"[criterion 6] PASS: mean d_r by ks "
          f"{{3: {by_ks[3]:.4f}, 5: {by_ks[5]:.4f}, 7: {by_ks[7]:.4f}}} rising, "
          f"by s {{1: {by_s[1]:.4f}, 2: {by_s[2]:.4f}}} falling")


def test_criterion_07_model_vs_sim(sweep_rows):
    """Analytical cycles within 15% of simulated cycles on >=90% of configs."""
    devs = [abs(r["model_cycles_on_chip"] / r["sim_total_cycles"] - 1.0)
            for r in sweep_rows]
    within = sum(d <= 0.15 for d in devs)
    frac = within / len(devs)
    assert frac >= 0.90, (frac, sorted(devs)[-5:])
    print(f"[criterion 7] PASS: model within 15% of simulator on "
          f"{within}/{len(devs)} configs ({frac:.1%}, worst "
          f"{max(devs):.1%})")


def test_criterion_08_omap_share(sweep_rows):
    """Host-resident maps cost >=25% of latency somewhere; on-chip moves none."""
    assert all(r["bytes_omap_in"] == 0 for r in sweep_rows)
    shares = [r["omap_share_host"] for r in sweep_rows]
    heavy = [s for s in shares if s >= 0.25]
    assert heavy, max(shares)
    print(f"[criterion 8] PASS: on-chip mapper moves 0 map bytes; host-omap "
          f"share >= 25% on {len(heavy)} configs (peak {max(shares):.1%})")
