import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as ref

from blendseq.errors import EmptyGroup, InsufficientData, UnknownStudent
from blendseq.ingest import Group, RosterEntry
from blendseq.patterns import SupportMode, SupportRecord
from blendseq.stats import Tier, chi2_sf, classify, compare_groups, kruskal_wallis, kruskal_wallis_k, midranks


def test_identical_groups():
    r = kruskal_wallis([1, 2, 3], [1, 2, 3])
    assert r.h_statistic == 0 and r.p_value == 1


def test_separated_groups_hand_ranks():
    # ranks 1..6, R_a = 6, R_b = 15, N = 6: 12/42 * (36/3 + 225/3) - 21 = 27/7
    r = kruskal_wallis([1, 2, 3], [4, 5, 6])
    assert r.h_statistic == pytest.approx(27 / 7, abs=1e-9)
    assert r.p_value == pytest.approx(0.0495, abs=1e-3)
    assert r.tie_correction == 1.0


def test_tied_case_against_reference():
    r = kruskal_wallis([0, 0, 0, 1], [0, 0, 1, 1])
    h, p = ref.kruskal([0, 0, 0, 1], [0, 0, 1, 1])
    assert r.h_statistic == pytest.approx(h, abs=1e-9)
    assert r.p_value == pytest.approx(p, abs=1e-9)
    assert r.h_statistic == pytest.approx(7 / 15, abs=1e-12)


def test_all_tied_is_degenerate():
    r = kruskal_wallis([0, 0], [0, 0, 0])
    assert (r.h_statistic, r.p_value, r.degenerate) == (0.0, 1.0, True)


@pytest.mark.parametrize("a, b", [([], [1, 2, 3]), ([1], [2]), ([1], [])])
def test_insufficient(a, b):
    with pytest.raises(InsufficientData):
        kruskal_wallis(a, b)


def test_midranks():
    ranks, ties = midranks([10, 20, 10, 30])
    assert ranks == [1.5, 3.0, 1.5, 4.0]
    assert sorted(ties) == [1, 1, 2]


@pytest.mark.parametrize("df", [1, 2, 3, 4, 5, 7, 10])
def test_chi2_sf(df):
    for x in (0.01, 0.5, 1.0, 3.84, 10.0, 40.0):
        assert chi2_sf(x, df) == pytest.approx(ref.chi2.sf(x, df), rel=1e-9, abs=1e-15)
    assert chi2_sf(0, df) == 1.0


def test_k_groups_against_reference():
    rng = random.Random(4)
    groups = [[rng.randint(0, 5) for _ in range(rng.randint(2, 9))] for _ in range(4)]
    r = kruskal_wallis_k(*groups)
    h, p = ref.kruskal(*groups)
    assert r.h_statistic == pytest.approx(h, abs=1e-9)
    assert r.p_value == pytest.approx(p, abs=1e-9)


values = st.lists(st.integers(0, 6), min_size=2, max_size=15)


@given(values, values)
@settings(max_examples=200, deadline=None)
def test_rank_invariances(a, b):
    base = kruskal_wallis(a, b)
    assert base.h_statistic >= 0 and 0 < base.p_value <= 1
    swapped = kruskal_wallis(b, a)
    assert swapped.h_statistic == pytest.approx(base.h_statistic, abs=1e-9)
    shifted = kruskal_wallis([x + 7.5 for x in a], [x + 7.5 for x in b])
    assert shifted.h_statistic == pytest.approx(base.h_statistic, abs=1e-9)
    monotone = kruskal_wallis([math.exp(x) for x in a], [math.exp(x) for x in b])
    assert monotone.h_statistic == pytest.approx(base.h_statistic, abs=1e-9)


def test_p_decreases_in_h():
    hs = [0.1 * i for i in range(100)]
    ps = [chi2_sf(h, 1) for h in hs]
    assert all(p1 > p2 for p1, p2 in zip(ps, ps[1:]))


@pytest.mark.parametrize("p, tier", [(0.03, Tier.SIGNIFICANT), (0.07, Tier.EDGE), (0.5, Tier.NOT_SIGNIFICANT), (0.05, Tier.EDGE), (0.1, Tier.NOT_SIGNIFICANT)])
def test_classify(p, tier):
    assert classify(p) is tier


def _roster(n_d, n_nd):
    return [RosterEntry(f"d{i}", 95.0, Group.DISTINCTION) for i in range(n_d)] + [
        RosterEntry(f"n{i}", 70.0, Group.NON_DISTINCTION) for i in range(n_nd)
    ]


def _records(target, d_vals, nd_vals):
    return [SupportRecord(f"d{i}", target, v, SupportMode.EXACT) for i, v in enumerate(d_vals)] + [
        SupportRecord(f"n{i}", target, v, SupportMode.EXACT) for i, v in enumerate(nd_vals)
    ]


def test_compare_all_zero():
    (row,) = compare_groups(_records("P+", [0, 0, 0], [0, 0]), _roster(3, 2))
    assert (row.mean_distinction, row.mean_nondistinction) == (0, 0)
    assert row.kw.degenerate and row.tier is Tier.NOT_SIGNIFICANT


def test_compare_rows_and_means():
    recs = _records("b", [0.5, 0.25, 0.0], [0.0, 0.0]) + _records("a", [1, 1, 1], [0, 0])
    rows = compare_groups(recs, _roster(3, 2))
    assert [r.target for r in rows] == ["a", "b"]
    assert rows[1].mean_distinction == pytest.approx(0.25)
    h, p = ref.kruskal([1, 1, 1], [0, 0])
    assert rows[0].kw.p_value == pytest.approx(p, abs=1e-12)


def test_compare_excluded_and_errors():
    recs = _records("a", [0.1, 0.2], [0.3])
    (row,) = compare_groups(recs, _roster(3, 2))
    assert row.excluded_n == 2
    with pytest.raises(UnknownStudent):
        compare_groups(recs + [SupportRecord("ghost", "a", 0.1, SupportMode.EXACT)], _roster(3, 2))
    with pytest.raises(EmptyGroup):
        compare_groups(_records("a", [0.1, 0.2, 0.3], []), _roster(3, 2))
