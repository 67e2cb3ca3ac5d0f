import numpy as np
import pytest

from conftest import cp, world
from defiprofit import presets
from defiprofit.errors import MissingBlock
from defiprofit.market import make_action
from defiprofit.replay import (BlockSeries, CostModel, load_series, make_series, replay,
                               save_series, state_changed)


@pytest.fixture(scope="module")
def fig2_run():
    s, cat = presets.preset("fig2")
    series, touched = make_series(s, n_blocks=100, n_touched=30, seed=3)
    rep = replay(series, catalog=cat, paths=[presets.FIG2_PATH])
    return series, touched, cat, rep


def test_static_series_searches_once():
    s, cat = presets.preset("fig2")
    series = BlockSeries([s.evolve(block_height=s.block_height + i) for i in range(5)])
    rep = replay(series, catalog=cat, paths=[presets.FIG2_PATH])
    assert rep.discovery_calls == 1
    assert [h for h, _, _ in rep.committed] == [series.heights[0]]


def test_state_changed_examples():
    a = cp("a", "ETH", 10.0, "X", 10.0)
    b = cp("b", "ETH", 10.0, "Y", 10.0)
    s0 = world([a, b]).evolve(block_height=1)
    s1 = s0.evolve(block_height=2, venues={"b": b.with_reserves(ETH=11.0)})
    series = BlockSeries([s0, s1])
    on_a = [make_action(a, "ETH"), make_action(a, "X")]
    on_b = [make_action(b, "ETH")]
    assert not state_changed(on_a, series, 2)
    assert state_changed(on_b, series, 2)
    with pytest.raises(MissingBlock):
        state_changed(on_a, series, 1)
    with pytest.raises(MissingBlock):
        series[7]


def test_heights_must_increase():
    s = presets.fig2_state()
    with pytest.raises(ValueError):
        BlockSeries([s, s])


def test_skip_rate(fig2_run):
    series, touched, _, rep = fig2_run
    assert len(touched) == 30
    assert rep.discovery_calls == rep.changed_pairs == 30
    assert 1 - rep.discovery_calls / len(series) == pytest.approx(0.7)


def test_cumulative_flat_after_last_change(fig2_run):
    series, touched, _, rep = fig2_run
    cum = rep.cumulative()
    assert np.all(cum[max(touched):] == cum[max(touched)])
    assert np.all(np.diff(cum) >= 0)
    assert rep.gross == pytest.approx(cum[-1])


def test_every_commit_beats_floor_and_cost(fig2_run):
    *_, rep = fig2_run
    assert rep.committed and rep.validation_failures == 0
    for _, s, c in rep.committed:
        assert s.revenue > 0.1 and s.revenue - c > 0
        assert c == pytest.approx(32e-9 * 150_000 * 3)


def test_costs_only_shrink_net(fig2_run):
    series, _, cat, rep = fig2_run
    dear = replay(series, catalog=cat, paths=[presets.FIG2_PATH], cost=CostModel(gas_price=500.0))
    assert dear.net < rep.net
    assert {h for h, *_ in dear.committed} <= {h for h, *_ in rep.committed}


def test_gas_can_exclude_everything(fig2_run):
    series, _, cat, _ = fig2_run
    rep = replay(series, catalog=cat, paths=[presets.FIG2_PATH], cost=CostModel(gas_price=1e5))
    assert rep.committed == [] and rep.net == 0.0


def test_flash_fee_is_charged():
    assert CostModel(flash_loan_fee=0.5).cost(2) == pytest.approx(0.5 + 2 * 32e-9 * 150_000)
    with pytest.raises(ValueError):
        CostModel(gas_price=-1)


def test_csv_deterministic_without_timing(fig2_run):
    series, _, cat, rep = fig2_run
    again = replay(series, catalog=cat, paths=[presets.FIG2_PATH])
    assert rep.to_csv(timing=False) == again.to_csv(timing=False)
    lines = rep.to_csv(timing=False).splitlines()
    assert lines[0].startswith("block,mode,path,revenue")
    assert len(lines) == 1 + len(series)


def test_arb_mode_reruns_only_on_change():
    s, cat = presets.preset("block-9819643-style")
    series, touched = make_series(s, n_blocks=20, n_touched=5, seed=1)
    rep = replay(series, discovery="arb", catalog=cat)
    assert rep.discovery_calls == 5
    assert {h - series.heights[0] for h, *_ in rep.committed} <= set(touched)


def test_series_round_trip(tmp_path):
    series, _ = make_series(presets.fig2_state(), n_blocks=4, n_touched=2)
    save_series(series, tmp_path)
    back = load_series(tmp_path)
    assert back.heights == series.heights and list(back) == list(series)


def test_bad_mode():
    s, cat = presets.preset("fig2")
    with pytest.raises(ValueError):
        replay(BlockSeries([s]), discovery="magic", catalog=cat)
