import numpy as np
import pytest

from mm2im.bench import (
    DEFAULT_GRID,
    SWEEP_COLUMNS,
    random_layer_data,
    ZOO,
    ZOO_COLUMNS,
    csv_text,
    expected_ops,
    ops_match,
    parse_ops_display,
    run_sweep,
    run_validate,
    run_zoo,
    sweep_shapes,
)
from mm2im.sim import SimConfig

SMALL_GRID = {
    "o_c": (8, 12),
    "ks": (3, 5),
    "i_h": (5,),
    "i_c": (16, 32),
    "s": (1, 2),
}


def test_parse_ops_display():
    assert parse_ops_display("420M") == (420_000_000, 5_000_000)
    assert parse_ops_display("1020M") == (1_020_000_000, 5_000_000)
    assert parse_ops_display("14K") == (14_000, 500)
    assert parse_ops_display("11M") == (11_000_000, 500_000)
    assert parse_ops_display("604M") == (604_000_000, 500_000)
    assert parse_ops_display("7G") == (7_000_000_000, 500_000_000)
    with pytest.raises(ValueError):
        parse_ops_display("42")
    with pytest.raises(ValueError):
        parse_ops_display("4.2M")


def test_ops_match_is_display_precision():
    assert ops_match(419_430_400, "420M")       # rounds to 420M at 10M grain
    assert ops_match(1_019_215_872, "1020M")
    assert not ops_match(414_000_000, "420M")
    assert not ops_match(426_000_000, "420M")


def test_zoo_op_counts_all_match():
    for layer in ZOO:
        ops = expected_ops(layer.shape())
        assert ops_match(ops, layer.ops_display), (layer.name, ops)


def test_zoo_frozen_op_counts():
    computed = {layer.name: expected_ops(layer.shape()) for layer in ZOO}
    assert computed["DCGAN_1"] == 419_430_400
    assert computed["DCGAN_2"] == 419_430_400
    assert computed["DCGAN_3"] == 419_430_400
    assert computed["DCGAN_4"] == 19_660_800
    assert computed["FCN"] == 14_112
    assert computed["StyleTransfer_1"] == 603_979_776
    assert computed["StyleTransfer_2"] == 603_979_776
    assert computed["StyleTransfer_3"] == 1_019_215_872
    assert computed["FSRCNN"] == 10_616_832


def test_sweep_shapes_grid_order_and_skips():
    combos = sweep_shapes()
    assert len(combos) == 3 * 3 * 3 * 4 * 2
    assert all(shape is not None for _, shape in combos)   # default grid: s <= ks
    combos = sweep_shapes({"ks": (1, 3), "s": (1, 2)})
    skipped = [p for p, shape in combos if shape is None]
    assert skipped and all(p["ks"] == 1 and p["s"] == 2 for p in skipped)


def test_run_sweep_rows_and_schema():
    rows = run_sweep(SMALL_GRID, sim_config=SimConfig(x=4, uf=8), seed=3)
    assert len(rows) == 2 * 2 * 1 * 2 * 2
    for row in rows:
        assert row["status"] == "ok"
        assert row["bit_exact"] is True
        assert set(SWEEP_COLUMNS) <= set(row)
        assert row["macs_executed"] == row["effective_macs"]
        assert row["macs_executed"] + row["macs_skipped"] == \
            row["m"] * row["n"] * row["k"]


def test_run_sweep_deterministic_csv():
    a = csv_text(run_sweep(SMALL_GRID, sim_config=SimConfig(x=4, uf=8), seed=9),
                 SWEEP_COLUMNS)
    b = csv_text(run_sweep(SMALL_GRID, sim_config=SimConfig(x=4, uf=8), seed=9),
                 SWEEP_COLUMNS)
    assert a == b
    # the counters in the CSV are data-independent, so a different seed only
    # changes the tensors underneath; check the seed reaches them
    from mm2im import derive_shape
    sh = derive_shape(5, 5, 16, 3, 8, 1)
    _, in9, _ = random_layer_data(sh, np.random.default_rng([9, 0]))
    _, in10, _ = random_layer_data(sh, np.random.default_rng([10, 0]))
    assert not np.array_equal(in9, in10)
    header = a.splitlines()[0]
    assert header == ",".join(SWEEP_COLUMNS)
    assert len(a.splitlines()) == 1 + 16


def test_skipped_rows_report_status():
    rows = run_sweep({"o_c": (8,), "ks": (1,), "i_h": (4,), "i_c": (8,),
                      "s": (1, 2)}, sim_config=SimConfig(x=4, uf=8))
    assert [r["status"] for r in rows] == ["ok", "skipped(s>ks)"]
    text = csv_text(rows, SWEEP_COLUMNS)
    assert "skipped(s>ks)" in text


def test_run_zoo_metrics_only():
    rows = run_zoo(with_sim=False)
    assert len(rows) == len(ZOO)
    assert [r["name"] for r in rows] == [layer.name for layer in ZOO]
    assert all(r["ops_match"] for r in rows)
    assert all(r["status"] == "metrics-only" for r in rows)
    header = csv_text(rows, ZOO_COLUMNS).splitlines()[0]
    assert header.startswith("name,ops_computed,ops_display,ops_match,")


def test_run_zoo_full_stack_bit_exact():
    rows = run_zoo(with_sim=True)
    assert len(rows) == len(ZOO)
    assert all(r["status"] == "ok" for r in rows)
    assert all(r["bit_exact"] is True for r in rows)
    by_name = {r["name"]: r for r in rows}
    # 1x1 input under a 4x4 kernel at s=2 keeps a 2x2 corner: 12/16 dropped
    assert by_name["FCN"]["d_r"] == 0.75
    assert by_name["DCGAN_1"]["d_r"] == pytest.approx(0.2775, abs=5e-4)


def test_run_validate_clean(rng):
    failures = run_validate(count=20, seed=17, max_ihw=8, max_ic=24, max_ks=7,
                            max_oc=16, sim_config=SimConfig(x=4, uf=8))
    assert failures == []


def test_csv_formats_floats_reversibly():
    rows = run_sweep({"o_c": (8,), "ks": (3,), "i_h": (5,), "i_c": (16,),
                      "s": (1,)}, sim_config=SimConfig(x=4, uf=8))
    text = csv_text(rows, SWEEP_COLUMNS)
    line = text.splitlines()[1].split(",")
    d_r = float(line[SWEEP_COLUMNS.index("d_r")])
    assert d_r == rows[0]["d_r"]                    # repr round-trips exactly
    assert line[SWEEP_COLUMNS.index("bit_exact")] == "1"
