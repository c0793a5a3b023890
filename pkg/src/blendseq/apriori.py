"""Level-wise frequent itemsets over sessions and ordered transition confidences."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .errors import EmptyGroup, EmptySessionList, InvalidPattern
from .ingest import Group
from .patterns import CompactedSequence, Token

log = logging.getLogger(__name__)

MIN_SUPPORT = 0.02
# absorbs float error in count/n >= min_support, e.g. 0.02 * 50
_EPS = 1e-12


def itemize(tokens: CompactedSequence | Sequence[Token]) -> frozenset[str]:
    """Items present in a session: ``X`` for any X token, ``X+`` for a repeated one."""
    if isinstance(tokens, CompactedSequence):
        tokens = tokens.tokens
    items = set()
    for tok in tokens:
        items.add(tok.platform)
        if tok.repeated:
            items.add(tok.platform + "+")
    return frozenset(items)


def _frequent(counts: Mapping[frozenset, int], n: int, min_support: float) -> dict[frozenset, float]:
    return {s: c / n for s, c in counts.items() if c / n + _EPS >= min_support}


def _candidates(prev: Iterable[frozenset], k: int) -> set[frozenset]:
    """Join (k-1)-sets sharing their first k-2 items, then prune by closure."""
    prev = set(prev)
    ordered = sorted(tuple(sorted(s)) for s in prev)
    out = set()
    for i, a in enumerate(ordered):
        for b in ordered[i + 1 :]:
            if a[: k - 2] != b[: k - 2]:
                break
            cand = frozenset(a) | frozenset(b)
            if all(frozenset(sub) in prev for sub in combinations(sorted(cand), k - 1)):
                out.add(cand)
    return out


def apriori_frequent(
    sessions: Sequence[frozenset[str]], min_support: float = MIN_SUPPORT
) -> dict[frozenset[str], float]:
    """All itemsets contained in at least ``min_support`` of the sessions."""
    if not 0 < min_support <= 1:
        raise ValueError(f"min_support must be in (0, 1], got {min_support}")
    if not sessions:
        raise EmptySessionList("apriori needs at least one session")
    n = len(sessions)
    counts: dict[frozenset, int] = {}
    for items in sessions:
        for it in items:
            key = frozenset((it,))
            counts[key] = counts.get(key, 0) + 1
    level = _frequent(counts, n, min_support)
    result = dict(level)
    k = 2
    while level:
        cands = _candidates(level, k)
        if not cands:
            break
        counts = dict.fromkeys(cands, 0)
        for items in sessions:
            if len(items) < k:
                continue
            for c in cands:
                if c <= items:
                    counts[c] += 1
        level = _frequent(counts, n, min_support)
        result.update(level)
        k += 1
    return result


def maximal_itemsets(frequent: Mapping[frozenset, float]) -> dict[frozenset, float]:
    return {s: v for s, v in frequent.items() if not any(s < t for t in frequent)}


def _item_matcher(item: str):
    item = item.strip()
    if len(item) not in (1, 2) or not item[0].isalpha() or item[1:] not in ("", "+"):
        raise InvalidPattern(f"bad item {item!r}; expected a letter with optional '+'")
    platform = item[0].upper()
    repeated = item.endswith("+")
    return lambda tok: tok.platform == platform and (tok.repeated or not repeated)


def normalise_item(item: str) -> str:
    _item_matcher(item)
    return item.strip()[0].upper() + ("+" if item.strip().endswith("+") else "")


@dataclass(frozen=True)
class AssociationRule:
    antecedent: str
    consequent: str
    support_antecedent: float
    support_joint: float
    confidence: float
    group: Group | None = None
    degenerate: bool = False


def rule_confidence(
    sessions: Sequence[CompactedSequence | Sequence[Token]],
    antecedent: str,
    consequent: str,
    ordered: bool = True,
    group: Group | None = None,
) -> AssociationRule:
    """Confidence that ``consequent`` shows up after ``antecedent`` in a session.

    The joint count takes sessions where a consequent token sits anywhere after
    an antecedent token, not necessarily adjacent.  With ``ordered=False`` it is
    plain co-occurrence.
    """
    antecedent, consequent = normalise_item(antecedent), normalise_item(consequent)
    if antecedent == consequent:
        raise InvalidPattern("antecedent and consequent must differ")
    is_a, is_b = _item_matcher(antecedent), _item_matcher(consequent)
    n = len(sessions)
    n_a = n_joint = 0
    for seq in sessions:
        tokens = seq.tokens if isinstance(seq, CompactedSequence) else seq
        first_a = next((i for i, t in enumerate(tokens) if is_a(t)), None)
        if first_a is None:
            continue
        n_a += 1
        rest = tokens[first_a + 1 :] if ordered else tokens
        if any(is_b(t) for t in rest):
            n_joint += 1
    if n_a == 0:
        log.warning("rule %s -> %s: antecedent never occurs, confidence set to 0", antecedent, consequent)
        return AssociationRule(antecedent, consequent, 0.0, 0.0, 0.0, group, degenerate=True)
    return AssociationRule(antecedent, consequent, n_a / n, n_joint / n, n_joint / n_a, group)


def default_rules(platforms: Iterable[str]) -> list[tuple[str, str]]:
    """``X -> Y`` and ``X+ -> Y`` for every ordered pair of distinct platforms."""
    codes = sorted(set(platforms))
    rules = []
    for a in codes:
        for b in codes:
            if a != b:
                rules.append((a, b))
                rules.append((a + "+", b))
    return rules


def parse_rule(text: str) -> tuple[str, str]:
    """``"W+ -> M"`` -> ``("W+", "M")``."""
    if "->" not in text:
        raise InvalidPattern(f"rule {text!r} must look like 'A -> B'")
    a, b = text.split("->", 1)
    return normalise_item(a), normalise_item(b)


def group_confidence_table(
    group_sessions: Mapping[Group, Sequence[CompactedSequence]],
    rules: Sequence[tuple[str, str]],
    ordered: bool = True,
) -> list[AssociationRule]:
    """One rule per (group, antecedent, consequent) over each group's pooled sessions."""
    out = []
    for group in Group:
        sessions = group_sessions.get(group, ())
        if not sessions:
            raise EmptyGroup(f"group {group} has no sessions")
        for a, b in rules:
            out.append(rule_confidence(sessions, a, b, ordered=ordered, group=group))
    return out
