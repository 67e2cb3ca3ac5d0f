"""End-to-end acceptance checks, one test per criterion.

Each test records a ``PASS``/``FAIL`` line (shown in the terminal summary)
before asserting, so a failing criterion is still reported alongside the rest.
"""
import itertools
import math
import time
from decimal import Decimal, getcontext

import numpy as np

from conftest import cp, graph_from_weights, grid_max, index, random_cycle, rel, world
from defiprofit import presets
from defiprofit.arbitrage import build_graph, find_negative_cycle, run_arb
from defiprofit.market import BANCOR, Venue, apply_action, make_action, quote, spot_price, strategy_revenue
from defiprofit.mdp import Action, MdpSpec, build_mdp, mev_threshold, sweep
from defiprofit.optimizer import optimize_revenue, rank_paths
from defiprofit.paths import check_heuristics, enumerate_pruned
from defiprofit.replay import make_series, replay, state_changed

N_CASES = 1000


def verdict(log, n, checks, elapsed, limit):
    """Record the criterion line; return the failed check names."""
    failed = [name for name, ok in checks.items() if not ok]
    if elapsed > limit:
        failed.append(f"runtime {elapsed:.1f}s > {limit}s")
    status = "PASS" if not failed else "FAIL"
    detail = "; ".join(failed) if failed else f"{len(checks)} checks in {elapsed:.2f}s"
    line = f"{status} criterion {n}: {detail}"
    log.append(line)
    print(line)
    return failed


def test_criterion_1_amm_math(acceptance_log):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    xs, ys = 10 ** rng.uniform(0, 12, N_CASES), 10 ** rng.uniform(0, 12, N_CASES)
    fracs = rng.uniform(0, 1, N_CASES)
    worst_prod = worst_deriv = 0.0
    monotone = True
    for x, y, f in zip(xs, ys, fracs):
        x, y = float(x), float(y)
        v = cp("p", "X", x, "Y", y, fee=(1, 1))
        nv = apply_action(world([v], {"X": 1e12}), make_action(v, "X"), float(f) * 1e12).venues["p"]
        worst_prod = max(worst_prod, rel(nv.reserves["X"] * nv.reserves["Y"], x * y))
        for venue in (cp("q", "X", x, "Y", y),
                      Venue("b", BANCOR, {"X": x, "Y": y}, ratios={"X": 300_000, "Y": 700_000})):
            a1, a2 = sorted(float(a) for a in rng.uniform(0, 2 * x, 2))
            monotone &= quote(venue, "X", a2) >= quote(venue, "X", a1)
            h = x * 1e-9
            worst_deriv = max(worst_deriv, rel(quote(venue, "X", h) / h, spot_price(venue, "X")))
    # Bancor quote on the bundled wei reserves, evaluated in 50-digit decimals
    getcontext().prec = 50
    e = presets.APPENDIX_E
    r, bnt, p = Decimal(e["bancor_eth"]), Decimal(e["bancor_bnt"]), Decimal(10) ** 18
    want = bnt * (1 - r / (r + p)) * Decimal(999_000) ** 2 / Decimal(10) ** 12
    got = quote(presets.appendix_e_state().venues["bancor"], "ETH", 1.0) * 1e18
    checks = {
        f"product conservation {worst_prod:.1e}": worst_prod <= 1e-9,
        "monotone quotes": bool(monotone),
        f"derivative agreement {worst_deriv:.1e}": worst_deriv <= 1e-6,
        "bancor high-precision match": rel(got, float(want)) <= 1e-9,
    }
    assert not verdict(acceptance_log, 1, checks, time.perf_counter() - t0, 5)


def test_criterion_2_fig5_weights(acceptance_log):
    t0 = time.perf_counter()
    s, cat = presets.preset("fig5-bzx")
    g = build_graph(s, cat)
    w_in, w_out = g.edge("ETH", "WBTC").weight, g.edge("WBTC", "ETH").weight
    before = find_negative_cycle(g)
    pushed = build_graph(apply_action(s, cat[0], 1000.0), cat)
    after = find_negative_cycle(pushed)
    checks = {
        "ETH->WBTC weight 4.07": abs(w_in - 4.07) <= 0.01 and abs(-math.log(0.0170) - 4.07) <= 0.01,
        "WBTC->ETH weight -3.79": abs(w_out - (-3.79)) <= 0.01
        and abs(-math.log(44.1488) - (-3.79)) <= 0.01,
        "cycle positive before push": w_in + w_out > 0.2 and before is None,
        "cycle negative after push": after is not None and after.weight_sum < 0,
    }
    assert not verdict(acceptance_log, 2, checks, time.perf_counter() - t0, 1)


def test_criterion_3_negative_cycles(acceptance_log):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    agree = products = True
    for _ in range(200):
        n = int(rng.integers(2, 7))
        nodes = [chr(65 + i) for i in range(n)]
        weights = {(u, v): float(rng.normal(0.3, 0.5)) for u in nodes for v in nodes
                   if u != v and rng.random() < 0.6}
        sums = []
        for k in range(2, n + 1):
            for combo in itertools.permutations(nodes, k):
                hops = list(zip(combo, combo[1:] + combo[:1]))
                if combo[0] == min(combo) and all(h in weights for h in hops):
                    sums.append(sum(weights[h] for h in hops))
        found = find_negative_cycle(graph_from_weights(weights)) if weights else None
        agree &= (found is not None) == any(x < 0 for x in sums)
        if found is not None:
            products &= found.price_product > 1
    checks = {"existence agrees with enumeration": agree, "reported cycles have price product > 1": products}
    assert not verdict(acceptance_log, 3, checks, time.perf_counter() - t0, 10)


def _brute_equivalence(rng, trials=25):
    assets = ["ETH", "A", "B", "C"]
    for _ in range(trials):
        acts = []
        for i in range(4):
            a, b = rng.choice(assets, 2, replace=False)
            v = cp(f"v{i}", str(a), 10.0, str(b), 10.0)
            acts += [make_action(v, str(a)), make_action(v, str(b))]
        catalog = index(acts)
        paths, _ = enumerate_pruned(catalog, "ETH", 4)
        ids = sorted(catalog)
        brute = [p for k in range(1, 5) for p in itertools.permutations(ids, k)
                 if check_heuristics(p, "ETH", catalog).accepted]
        if paths != sorted(brute, key=lambda p: (len(p), p)):
            return False
    return True


def test_criterion_4_table_counts(acceptance_log):
    t0 = time.perf_counter()
    _, stats = enumerate_pruned(presets.appendix_b_catalog(), "ETH", 5)
    before = [stats.before(k) for k in range(2, 6)]
    after = [stats.after(k) for k in range(2, 6)]
    target = [2, 90, 466, 42]
    if after != target:
        # deviation report; the oracle equivalence below remains the hard gate
        print(f"after-count deviation: got {after}, target {target}")
    checks = {
        f"before counts {before}": before == [9_120, 857_280, 79_727_040, 7_334_887_680],
        f"after counts {after} (total {sum(after)})": after == target,
        "pruning equals brute-force oracle": _brute_equivalence(np.random.default_rng(4)),
    }
    assert not verdict(acceptance_log, 4, checks, time.perf_counter() - t0, 300)


def test_criterion_5_optimizer(acceptance_log):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    reach = True
    for _ in range(50):
        s, path, pools = random_cycle(rng)
        top = grid_max(pools, s.balance("ETH"))
        res = optimize_revenue(path, s)
        if top < 0.1:
            reach &= res is None
        else:
            reach &= res is not None and res.revenue >= (1 - 1e-3) * top
    s, cat = presets.preset("fig2")
    res = optimize_revenue(cat, s)
    hist = res.bounds_history
    nest = all(l0 <= l1 and u1 <= u0 for (l0, u0), (l1, u1) in zip(hist, hist[1:]))
    bracket = all(lo <= res.revenue < hi for lo, hi in hist)
    checks = {
        "50 instances within 1e-3 of grid max": reach,
        "bisection intervals nest and bracket": nest and bracket,
        f"fig2 path revenue {res.revenue:.4f}": abs(res.revenue - 7.81) <= 0.01,
    }
    assert not verdict(acceptance_log, 5, checks, time.perf_counter() - t0, 30)


def test_criterion_6_greedy_vs_optimal(acceptance_log):
    t0 = time.perf_counter()
    s, cat = presets.preset("block-9819643-style")
    direct, detour = presets.block_strategies()
    best = rank_paths([direct, detour], s, cat)
    arb = run_arb(s, cat)
    idx = index(cat)
    committed = [x.action_ids for x in arb.strategies]
    alone = optimize_revenue([idx[a] for a in direct], s)
    spoiled = optimize_revenue([idx[a] for a in direct], after_first_commit(arb))
    checks = {
        f"rank_paths picks the larger strategy ({best.revenue:.3f})": best.action_ids == direct,
        "run_arb commits only the smaller one": committed == [detour],
        "larger one unprofitable after the update": spoiled is None,
        "run_arb total below optimal single": arb.total_revenue < best.revenue,
        "larger one was profitable beforehand": alone is not None and alone.revenue > 0.1,
    }
    assert not verdict(acceptance_log, 6, checks, time.perf_counter() - t0, 60)


def after_first_commit(arb):
    st = arb.strategies[0]
    state = st.initial_state
    for a, x in zip(st.path, st.params):
        state = apply_action(state, a, x)
    return state


def test_criterion_7_state_reduction(acceptance_log):
    t0 = time.perf_counter()
    s, cat = presets.preset("block-9819643-style")
    idx = index(cat)
    paths, _ = enumerate_pruned(idx, "ETH", 4)
    series, touched = make_series(s, n_blocks=100, n_touched=30, seed=11)
    rep = replay(series, catalog=cat, paths=paths)
    hs = series.heights
    # independent count: every path at the first block, then per-block key diffs
    expected = len(paths) + sum(state_changed([idx[a] for a in p], series, h)
                                for h in hs[1:] for p in paths)
    per_block = rep.per_block()
    static = [i for i in range(1, len(hs)) if i not in touched]
    arb = replay(series, discovery="arb", catalog=cat)
    checks = {
        f"discovery calls {rep.discovery_calls} == changed pairs {expected}": rep.discovery_calls == expected,
        "no revenue on unchanged blocks": all(per_block[i] == 0 for i in static)
        and all(arb.per_block()[i] == 0 for i in static),
        "cumulative flat over static suffix": np.ptp(rep.cumulative()[max(touched):]) == 0,
        "arb mode reruns once per changed block": arb.discovery_calls == len(touched),
        "committed strategies replay": all(
            rel(strategy_revenue(st.initial_state, st), st.revenue) <= 1e-6 for _, st, _ in rep.committed),
    }
    assert not verdict(acceptance_log, 7, checks, time.perf_counter() - t0, 120)


def test_criterion_8_mdp(acceptance_log):
    t0 = time.perf_counter()
    spec = MdpSpec(alpha=0.10, r_s=0.0572, k=1, gamma=0.0, omega=0.0, cutoff=20)
    mev = mev_threshold(spec, margin=0.1)
    rows = sweep(spec, np.round(np.arange(0.05, 0.451, 0.05), 2), margin=0.1, jobs=4)
    vals = [v for _, _, v in rows]
    t = build_mdp(spec)
    worst = max(float(np.abs(np.asarray(t.P[a].sum(axis=1)).ravel()[t.allowed[a]] - 1).max())
                for a in Action)
    print("alpha, mev_v:", [(a, round(v, 3)) for a, _, v in rows])
    checks = {
        f"threshold {mev:.3f} within 4 +- 0.1": abs(mev - 4.0) <= 0.1,
        "non-increasing in alpha": all(b <= a for a, b in zip(vals, vals[1:])),
        f"row sums within {worst:.1e} of 1": worst <= 1e-12,
    }
    assert not verdict(acceptance_log, 8, checks, time.perf_counter() - t0, 120)
