"""Sequence analysis of student transitions between online course platforms."""

__version__ = "0.1.0"

from .apriori import AssociationRule, apriori_frequent, group_confidence_table, itemize, rule_confidence
from .errors import BlendseqError, PipelineError
from .ingest import EventRecord, Group, RosterEntry, TransactionStream, filter_students, load_roster, merge_logs, parse_log
from .patterns import (
    CompactedSequence,
    Pattern,
    PatternFamily,
    SupportMode,
    SupportRecord,
    Token,
    compact,
    parse_target,
    pattern_universe,
    support,
    support_table,
)
from .sessionize import Session, build_sessions, cutoff_diagnostics
from .stats import GroupComparison, KWResult, Tier, compare_groups, kruskal_wallis

__all__ = [
    "AssociationRule",
    "BlendseqError",
    "CompactedSequence",
    "EventRecord",
    "Group",
    "GroupComparison",
    "KWResult",
    "Pattern",
    "PatternFamily",
    "PipelineError",
    "RosterEntry",
    "Session",
    "SupportMode",
    "SupportRecord",
    "Tier",
    "Token",
    "TransactionStream",
    "apriori_frequent",
    "build_sessions",
    "compact",
    "compare_groups",
    "cutoff_diagnostics",
    "filter_students",
    "group_confidence_table",
    "itemize",
    "kruskal_wallis",
    "load_roster",
    "merge_logs",
    "parse_log",
    "parse_target",
    "pattern_universe",
    "rule_confidence",
    "support",
    "support_table",
]
