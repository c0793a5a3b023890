import random
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blendseq.errors import EmptySession, InvalidPattern, NoSessions
from blendseq.patterns import (
    CompactedSequence,
    FamilyKind,
    Pattern,
    PatternFamily,
    SupportMode,
    Token,
    compact,
    compact_platforms,
    parse_target,
    pattern_universe,
    support,
    support_table,
)
from blendseq.sessionize import Session

from conftest import ev, seqs

EXACT, CONTAIN = SupportMode.EXACT, SupportMode.CONTAIN


def session_of(platforms):
    return Session("s", tuple(ev("s", i, p) for i, p in enumerate(platforms)), 40)


@pytest.mark.parametrize(
    "platforms, expected",
    [("MMM", "M+"), ("W", "W"), ("WWMPPP", "W+MP+"), ("WMWM", "WMWM")],
)
def test_compact(platforms, expected):
    assert str(compact(session_of(platforms))) == expected


def test_compact_empty():
    with pytest.raises(EmptySession):
        compact(Session("s", (), 40))


@given(st.lists(st.sampled_from("WMPG"), min_size=1, max_size=50))
@settings(max_examples=300, deadline=None)
def test_compaction_properties(platforms):
    tokens = compact_platforms(platforms)
    assert all(a.platform != b.platform for a, b in zip(tokens, tokens[1:]))
    runs = [(m.group(0)[0], len(m.group(0))) for m in re.finditer(r"(.)\1*", "".join(platforms))]
    assert [(t.platform, t.repeated) for t in tokens] == [(p, n >= 2) for p, n in runs]
    minimal = [t.platform for t in tokens]
    assert compact_platforms(minimal) == tuple(Token(p, False) for p in minimal)


def test_parse_targets():
    assert parse_target("w+m") == Pattern((Token("W", True), Token("M", False)))
    fam = parse_target("trans(W,M)")
    assert fam.kind is FamilyKind.TRANSITION_PAIR
    assert {m.name for m in fam.members} == {"W+M", "M+W", "WM", "MW"}
    assert parse_target("+P") == PatternFamily.repeat_then("P")
    lit = parse_target("W+M|MW")
    assert lit.kind is FamilyKind.LITERAL and lit.name == "W+M|MW"
    ext = PatternFamily.transition_pair("W", "M", extended=True)
    assert len(ext.members) == 8 and Pattern.parse("WM+") in ext.members


@pytest.mark.parametrize("text", ["", "WW", "WMPG", "W++", "W1", "trans(W,W)"])
def test_bad_patterns(text):
    with pytest.raises(InvalidPattern):
        parse_target(text)


def test_universe_examples():
    assert pattern_universe(seqs("M+")) == {Pattern.parse("M+")}
    assert pattern_universe(seqs("W+M"), mode=EXACT) == {Pattern.parse("W+M")}
    assert pattern_universe(seqs("W+MW+MP"), mode=EXACT) == set()
    got = {p.name for p in pattern_universe(seqs("W+MW"), mode=CONTAIN)}
    assert got == {"W+", "M", "W", "W+M", "MW", "W+MW"}


def test_support_worked_example():
    sessions = seqs(*(["M+P"] * 10 + ["W+"] * 90))
    assert support(sessions, Pattern.parse("M+P")) == 0.1


def test_support_small_cases():
    sessions = seqs("W+", "W+", "W+M", "P")
    assert support(sessions, parse_target("trans(W,M)"), EXACT) == 0.25
    assert support(sessions, Pattern.parse("W+"), EXACT) == 0.5
    assert support(sessions, Pattern.parse("G"), EXACT) == 0.0
    # containment: W+ also sits inside W+M
    assert support(sessions, Pattern.parse("W+"), CONTAIN) == 0.75


def test_support_no_sessions():
    with pytest.raises(NoSessions):
        support([], Pattern.parse("W"))


def test_exclude_long_denominator():
    sessions = seqs("W+", "WMWM")
    assert support(sessions, Pattern.parse("W+")) == 0.5
    assert support(sessions, Pattern.parse("W+"), exclude_long=True) == 1.0


def test_repeat_then():
    fam = parse_target("+P")
    assert fam.matches(parse_target("M+P").tokens, EXACT)
    assert fam.matches(parse_target("W+P+").tokens, EXACT)
    assert not fam.matches(parse_target("MP").tokens, EXACT)
    assert not fam.matches(parse_target("W+PM").tokens, EXACT)
    assert fam.matches(parse_target("W+PM").tokens, CONTAIN)
    assert not fam.matches(parse_target("P+W").tokens, CONTAIN)


token_lists = st.lists(st.sampled_from("WMP"), min_size=1, max_size=12).map(lambda p: CompactedSequence(compact_platforms(p)))


@given(token_lists)
def test_repeat_then_needs_repeat_before_p(seq):
    text = str(seq)
    if not re.search(r"[A-OQ-Z]\+P", text):
        assert not parse_target("+P").matches(seq.tokens, CONTAIN)


@given(st.lists(token_lists, min_size=1, max_size=15))
@settings(max_examples=100, deadline=None)
def test_exact_mode_supports_partition(sessions):
    universe = pattern_universe(sessions, mode=EXACT)
    total = sum(support(sessions, p, EXACT) for p in universe)
    short = sum(1 for s in sessions if len(s) <= 3) / len(sessions)
    assert total == pytest.approx(short)
    fam = parse_target("trans(W,M)")
    assert support(sessions, fam, EXACT) == pytest.approx(sum(support(sessions, m, EXACT) for m in fam.members))


def recount(sessions, target_text, mode):
    """String-level recount, independent of Pattern/PatternFamily matching."""
    spaced = [" ".join(str(t) for t in s.tokens) for s in sessions]
    if target_text.startswith("+"):
        p = target_text[1]
        rx = re.compile(rf"(^| )[^{p} ]\+ {p}\+?( |$)")
        if mode is EXACT:
            hits = [bool(rx.fullmatch(s)) and s.count(" ") == 1 for s in spaced]
        else:
            hits = [bool(rx.search(s)) for s in spaced]
    else:
        if target_text.startswith("trans("):
            a, b = target_text[6], target_text[8]
            alts = [f"{a}+ {b}", f"{b}+ {a}", f"{a} {b}", f"{b} {a}"]
        else:
            alts = [" ".join(str(t) for t in Pattern.parse(target_text).tokens)]
        if mode is EXACT:
            hits = [s in alts for s in spaced]
        else:
            hits = [any(f" {alt} " in f" {s} " for alt in alts) for s in spaced]
    return sum(hits) / len(sessions)


@pytest.mark.parametrize("mode", [EXACT, CONTAIN])
def test_support_table_matches_recount(mode):
    rng = random.Random(20)
    klass = {}
    for i in range(20):
        n = rng.randint(1, 12)
        klass[f"s{i:02d}"] = [CompactedSequence(compact_platforms([rng.choice("WMP") for _ in range(rng.randint(1, 7))])) for _ in range(n)]
    texts = ["W+", "M+", "P", "W+M", "MW", "W+MP", "trans(W,M)", "trans(P,W)", "+P", "+W"]
    records = support_table(klass, [parse_target(t) for t in texts], mode)
    assert len(records) == 20 * len(texts)
    keys = [(r.student_id, r.target) for r in records]
    assert keys == sorted(keys)
    for r in records:
        assert r.support == pytest.approx(recount(klass[r.student_id], r.target, mode))
        assert r.mode is mode


def test_support_table_cardinality():
    one = support_table({"a": seqs("W")}, [Pattern.parse("P")])
    assert [(r.student_id, r.support) for r in one] == [("a", 0.0)]
    two = support_table({"a": seqs("W"), "b": seqs("P")}, [Pattern.parse("P")])
    assert len(two) == 2
    assert support_table({"a": seqs("W"), "z": []}, [Pattern.parse("W")])[0].student_id == "a"
    with pytest.raises(ValueError):
        support_table({"a": seqs("W")}, [])
