"""Kruskal-Wallis comparison of per-student supports between outcome groups."""

from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import EmptyGroup, InsufficientData, UnknownStudent
from .ingest import Group, RosterEntry
from .patterns import SupportRecord

SIGNIFICANT_P = 0.05
EDGE_P = 0.1
_TINY = 5e-324


class Tier(enum.Enum):
    SIGNIFICANT = "Significant"
    EDGE = "Edge"
    NOT_SIGNIFICANT = "NotSignificant"

    def __str__(self):
        return self.value


def classify(p: float, significant: float = SIGNIFICANT_P, edge: float = EDGE_P) -> Tier:
    if p < significant:
        return Tier.SIGNIFICANT
    if p < edge:
        return Tier.EDGE
    return Tier.NOT_SIGNIFICANT


def chi2_sf(x: float, df: int) -> float:
    """Upper tail of the chi-square distribution for integer ``df``.

    Closed forms of the regularized upper incomplete gamma Q(df/2, x/2).
    """
    if df < 1 or int(df) != df:
        raise ValueError(f"df must be a positive integer, got {df}")
    if x <= 0:
        return 1.0
    half = x / 2.0
    if df % 2 == 0:
        term = total = 1.0
        for i in range(1, df // 2):
            term *= half / i
            total += term
        return math.exp(-half) * total
    p = math.erfc(math.sqrt(half))
    if df > 1:
        term = math.sqrt(x) * math.sqrt(2.0 / math.pi) * math.exp(-half)
        total = 0.0
        for i in range(1, (df - 1) // 2 + 1):
            total += term
            term *= x / (2 * i + 1)
        p += total
    return min(p, 1.0)


def midranks(values: Sequence[float]) -> tuple[list[float], list[int]]:
    """Average ranks (1-based) of ``values`` and the sizes of the tie blocks."""
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0.0] * len(values)
    ties = []
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        ties.append(j - i + 1)
        i = j + 1
    return ranks, ties


@dataclass(frozen=True)
class KWResult:
    h_statistic: float
    p_value: float
    sizes: tuple[int, ...]
    tie_correction: float
    degenerate: bool = False

    @property
    def n_a(self) -> int:
        return self.sizes[0]

    @property
    def n_b(self) -> int:
        return self.sizes[1]


def kruskal_wallis_k(*groups: Sequence[float]) -> KWResult:
    """Tie-corrected Kruskal-Wallis H over any number of groups.

    The p-value is the chi-square tail with ``len(groups) - 1`` degrees of
    freedom.  When every value is tied the correction is zero; the result is
    then H = 0, p = 1 with ``degenerate`` set.
    """
    sizes = tuple(len(g) for g in groups)
    if len(groups) < 2 or min(sizes) < 1 or sum(sizes) < 3:
        raise InsufficientData(f"need >= 2 non-empty groups and >= 3 values, got sizes {sizes}")
    pooled = [float(v) for g in groups for v in g]
    n = len(pooled)
    ranks, ties = midranks(pooled)
    correction = 1.0 - sum(t**3 - t for t in ties) / (n**3 - n)
    if correction <= 0.0:
        return KWResult(0.0, 1.0, sizes, 0.0, degenerate=True)
    total = 0.0
    start = 0
    for size in sizes:
        r = sum(ranks[start : start + size])
        total += r * r / size
        start += size
    h = (12.0 / (n * (n + 1)) * total - 3.0 * (n + 1)) / correction
    h = max(h, 0.0)
    p = chi2_sf(h, len(groups) - 1)
    return KWResult(h, max(p, _TINY), sizes, correction)


def kruskal_wallis(a: Sequence[float], b: Sequence[float]) -> KWResult:
    """Two-group test; the p-value is erfc(sqrt(H / 2))."""
    return kruskal_wallis_k(a, b)


@dataclass(frozen=True)
class GroupComparison:
    target: str
    mean_distinction: float
    mean_nondistinction: float
    kw: KWResult
    tier: Tier
    excluded_n: int = 0


def compare_groups(
    supports: Iterable[SupportRecord],
    roster: Iterable[RosterEntry],
    targets: Iterable[str] | None = None,
    significant: float = SIGNIFICANT_P,
    edge: float = EDGE_P,
) -> list[GroupComparison]:
    """One comparison row per target, ordered by target name.

    Roster students without any support record (no sessions) are left out of
    the test and counted in ``excluded_n``.
    """
    groups = {e.student_id: e.group for e in roster}
    by_target: dict[str, dict[Group, list[float]]] = defaultdict(lambda: {g: [] for g in Group})
    measured: set[str] = set()
    for rec in supports:
        group = groups.get(rec.student_id)
        if group is None:
            raise UnknownStudent(f"student {rec.student_id!r} is not on the roster")
        by_target[rec.target][group].append(rec.support)
        measured.add(rec.student_id)
    excluded = len(set(groups) - measured)
    names = sorted(by_target) if targets is None else sorted(set(targets))

    rows = []
    for name in names:
        values = by_target.get(name)
        if values is None:
            raise EmptyGroup(f"no supports recorded for target {name!r}")
        d, nd = values[Group.DISTINCTION], values[Group.NON_DISTINCTION]
        if not d or not nd:
            empty = Group.DISTINCTION if not d else Group.NON_DISTINCTION
            raise EmptyGroup(f"target {name!r}: group {empty} has no students with sessions")
        kw = kruskal_wallis(d, nd)
        rows.append(
            GroupComparison(name, sum(d) / len(d), sum(nd) / len(nd), kw, classify(kw.p_value, significant, edge), excluded)
        )
    return rows
