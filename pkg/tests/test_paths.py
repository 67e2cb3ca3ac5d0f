import itertools
import math

import pytest
from hypothesis import given, settings, strategies as st

from conftest import cp, index
from defiprofit import presets
from defiprofit.errors import CombinatorialBudgetExceeded, UnknownAction
from defiprofit.market import make_action
from defiprofit.paths import actions_independent, check_heuristics, enumerate_pruned


@pytest.fixture(scope="module")
def b96():
    return index(presets.appendix_b_catalog())


def test_independence_examples(b96):
    assert not actions_independent(b96["uniswap-SAI:ETH->SAI"], b96["bancor-SAI:BNT->SAI"])
    a = make_action(cp("p", "A", 1.0, "B", 1.0), "A")
    b = make_action(cp("q", "C", 1.0, "D", 1.0), "C")
    assert actions_independent(a, b)
    assert not actions_independent(a, a)


def pools(*pairs):
    """Catalog with both directions of a fee-charging pool per (venue, a, b)."""
    out = []
    for vid, a, b in pairs:
        v = cp(vid, a, 10.0, b, 10.0)
        out += [make_action(v, a), make_action(v, b)]
    return index(out)


CAT = pools(("m1", "ETH", "A"), ("m2", "A", "B"), ("m3", "B", "ETH"), ("m4", "ETH", "C"),
            ("m5", "C", "ETH"), ("m6", "A", "ETH"), ("m7", "X", "Y"), ("m8", "B", "A"))


@pytest.mark.parametrize("path,verdict", [
    (["m1:ETH->A"], "rejected(H1)"),
    (["m2:A->B", "m3:B->ETH"], "rejected(H2)"),
    (["m1:ETH->A", "m2:A->B"], "rejected(H3)"),
    (["m1:ETH->A", "m7:X->Y", "m6:A->ETH"], "rejected(H4)"),
    (["m1:ETH->A", "m1:A->ETH"], "rejected(H5)"),
    # two round trips glued together: ETH feeds both
    (["m1:ETH->A", "m2:A->B", "m3:B->ETH", "m4:ETH->C", "m5:C->ETH"], "rejected(H6)"),
    (["m1:ETH->A", "m2:A->B", "m8:B->A", "m6:A->ETH"], "rejected(H7)"),
    (["m1:ETH->A", "m2:A->B", "m3:B->ETH"], "accepted"),
])
def test_verdicts(path, verdict):
    r = check_heuristics(path, "ETH", CAT)
    assert r.verdict == verdict
    assert bool(r.rejected_reason) == (verdict != "accepted")


def test_unknown_action():
    with pytest.raises(UnknownAction):
        check_heuristics(["nope"], "ETH", CAT)


def test_repeats_refused():
    with pytest.raises(ValueError):
        check_heuristics(["m1:ETH->A", "m1:ETH->A"], "ETH", CAT)


def test_verdict_is_pure():
    p = ["m1:ETH->A", "m2:A->B", "m3:B->ETH"]
    assert check_heuristics(p, "ETH", CAT) == check_heuristics(list(p), "ETH", dict(CAT))


def test_non_returning_action_exempt_from_flow_rules():
    s, cat = presets.preset("fig5-bzx")
    r = check_heuristics([a.action_id for a in cat], "ETH", cat)
    assert r.accepted


def test_reversing_pair_yields_nothing():
    paths, stats = enumerate_pruned(pools(("m", "ETH", "A")), "ETH", 4)
    assert paths == [] and stats.after(2) == 0


def brute_force(catalog, base, max_len):
    ids = sorted(catalog)
    out = []
    for k in range(1, max_len + 1):
        for p in itertools.permutations(ids, k):
            if check_heuristics(p, base, catalog).accepted:
                out.append(p)
    return sorted(out, key=lambda p: (len(p), p))


ASSETS = ["ETH", "A", "B", "C"]


@st.composite
def small_catalogs(draw):
    n_venues = draw(st.integers(1, 4))
    pairs = []
    for i in range(n_venues):
        a, b = draw(st.lists(st.sampled_from(ASSETS), min_size=2, max_size=2, unique=True))
        pairs.append((f"v{i}", a, b))
    return pools(*pairs)


@settings(max_examples=40)
@given(small_catalogs(), st.integers(1, 5))
def test_prefix_pruning_matches_brute_force(catalog, max_len):
    paths, stats = enumerate_pruned(catalog, "ETH", max_len)
    assert paths == brute_force(catalog, "ETH", max_len)
    n = len(catalog)
    for k in range(1, max_len + 1):
        assert stats.before(k) == math.perm(n, k)
        assert stats.after(k) <= stats.before(k)
    for p in paths:
        assert catalog[p[0]].input_asset == "ETH" and catalog[p[-1]].output_asset == "ETH"


def test_budget():
    with pytest.raises(CombinatorialBudgetExceeded):
        enumerate_pruned(presets.appendix_b_catalog(), "ETH", 4, cap=1000)


def test_sharded_run_is_identical(b96):
    one = enumerate_pruned(b96, "ETH", 3)
    two = enumerate_pruned(b96, "ETH", 3, jobs=2)
    assert one[0] == two[0] and one[1].counts == two[1].counts


def test_before_counts_are_permutations(b96):
    _, stats = enumerate_pruned(b96, "ETH", 3)
    assert [stats.before(k) for k in (2, 3)] == [96 * 95, 96 * 95 * 94]
