"""Full pipeline runs and the tables (and figures) they emit."""

from __future__ import annotations

import csv
import io
import json
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import __version__
from .apriori import AssociationRule, apriori_frequent, group_confidence_table, itemize
from .config import ClassConfig
from .errors import BlendseqError, PipelineError, UnknownStudent, UnwritableOutput
from .ingest import (
    Group,
    RosterEntry,
    TransactionStream,
    filter_students,
    format_timestamp,
    load_roster,
    merge_logs,
    parse_log,
)
from .patterns import (
    CompactedSequence,
    SupportRecord,
    compact,
    compact_platforms,
    default_targets,
    render_tokens,
    support_table,
)
from .sessionize import DiagnosticsRow, Session, build_sessions, cutoff_diagnostics, sessions_by_student
from .stats import GroupComparison, Tier, compare_groups

log = logging.getLogger(__name__)

FORMATS = ("delimited", "markup")


@contextmanager
def stage(name: str):
    """Re-raise anything that goes wrong inside as a stage-tagged PipelineError."""
    try:
        yield
    except PipelineError:
        raise
    except (BlendseqError, OSError, ValueError, KeyError) as exc:
        raise PipelineError(name, exc) from exc


def ingest(config: ClassConfig) -> TransactionStream:
    with stage("ingest"):
        if not config.sources:
            raise ValueError("config lists no event sources")
        parsed = [parse_log(config.resolve(s.file), config.platforms, s.schema) for s in config.sources]
        return filter_students(merge_logs(parsed), config.exclude_ids)


def roster(config: ClassConfig) -> list[RosterEntry]:
    with stage("roster"):
        if not config.roster:
            raise ValueError("config names no roster file")
        entries = load_roster(config.resolve(config.roster), config.distinction_threshold)
        excluded = set(config.exclude_ids)
        return [e for e in entries if e.student_id not in excluded]


def compact_by_student(sessions: Sequence[Session]) -> dict[str, list[CompactedSequence]]:
    return {sid: [compact(s) for s in group] for sid, group in sessions_by_student(sessions).items()}


def split_by_group(
    compacted: Mapping[str, Sequence[CompactedSequence]], entries: Iterable[RosterEntry]
) -> dict[Group, list[CompactedSequence]]:
    groups = {e.student_id: e.group for e in entries}
    unknown = sorted(set(compacted) - set(groups))
    if unknown:
        shown = ", ".join(unknown[:5]) + (" ..." if len(unknown) > 5 else "")
        raise UnknownStudent(f"{len(unknown)} students with events are not on the roster: {shown}")
    out: dict[Group, list[CompactedSequence]] = {g: [] for g in Group}
    for sid in sorted(compacted):
        out[groups[sid]].extend(compacted[sid])
    return out


@dataclass(frozen=True)
class SessionSummaryRow:
    group: Group
    label: str
    cutoff_minutes: float
    students: int
    sessions: int


@dataclass(frozen=True)
class FrequentItemset:
    group: Group
    items: tuple[str, ...]
    support: float


@dataclass
class ReportBundle:
    config: ClassConfig
    session_summary: list[SessionSummaryRow]
    diagnostics: list[DiagnosticsRow]
    supports: list[SupportRecord]
    itemsets: list[FrequentItemset]
    confidences: list[AssociationRule]
    comparisons: list[GroupComparison]
    sessions: list[Session] = field(default_factory=list, repr=False)
    metadata: dict = field(default_factory=dict)


def run_metadata(config: ClassConfig, **extra) -> dict:
    meta = {
        "tool": "blendseq",
        "version": __version__,
        "config_sha256": config.digest(),
        "support_mode": str(config.support_mode),
        "exclude_long": config.exclude_long,
        "study_cutoff": config.study_cutoff,
        "browser_cutoff": config.browser_cutoff,
        "min_support": config.min_support,
        "min_support_scope": "per-group",
        "confidence_order": "unordered" if config.unordered else "ordered",
        "zero_session_students": "excluded",
    }
    meta.update(extra)
    return meta


def run_pipeline(config: ClassConfig, with_diagnostics: bool = True) -> ReportBundle:
    """ingest -> sessionize -> patterns -> apriori -> stats, in that order."""
    stream = ingest(config)
    entries = roster(config)
    groups = {e.student_id: e.group for e in entries}

    with stage("sessionize"):
        study = build_sessions(stream, config.study_cutoff)
        browser = build_sessions(stream, config.browser_cutoff)
        diagnostics = cutoff_diagnostics(stream, config.diagnostic_grid) if with_diagnostics else []

    with stage("roster"):
        compacted = compact_by_student(study)
        by_group = split_by_group(compacted, entries)
        summary = []
        for label, cutoff, sessions in (("browser", config.browser_cutoff, browser), ("study", config.study_cutoff, study)):
            for g in Group:
                mine = [s for s in sessions if groups[s.student_id] is g]
                summary.append(SessionSummaryRow(g, label, cutoff, len({s.student_id for s in mine}), len(mine)))

    with stage("patterns"):
        targets = config.parsed_targets() or default_targets(
            (c for seqs in compacted.values() for c in seqs), config.codes, config.support_mode, config.extended_families
        )
        supports = support_table(compacted, targets, config.support_mode, config.exclude_long)

    with stage("apriori"):
        itemsets = []
        for g in Group:
            found = apriori_frequent([itemize(c) for c in by_group[g]], config.min_support) if by_group[g] else {}
            for items, sup in sorted(found.items(), key=lambda kv: (len(kv[0]), sorted(kv[0]))):
                itemsets.append(FrequentItemset(g, tuple(sorted(items)), sup))
        confidences = group_confidence_table(by_group, config.parsed_rules(), ordered=not config.unordered)

    with stage("stats"):
        comparisons = compare_groups(supports, entries, significant=config.significant_p, edge=config.edge_p)

    excluded = comparisons[0].excluded_n if comparisons else 0
    meta = run_metadata(config, excluded_n=excluded, n_targets=len(targets), n_events=len(stream))
    return ReportBundle(config, summary, diagnostics, supports, itemsets, confidences, comparisons, study, meta)


def _num(x: float) -> str:
    return format(x, ".10g")


def _p(x: float) -> str:
    return format(x, ".6g")


def table_rows(bundle: ReportBundle) -> dict[str, tuple[list[str], list[list[str]]]]:
    """Every table of the bundle as (header, rows) of strings, keyed by file stem."""
    tables = {
        "session_summary": (
            ["group", "session_kind", "cutoff_minutes", "students", "sessions"],
            [[str(r.group), r.label, _num(r.cutoff_minutes), str(r.students), str(r.sessions)] for r in bundle.session_summary],
        ),
        "supports": (
            ["student_id", "target", "mode", "support"],
            [[r.student_id, r.target, str(r.mode), _num(r.support)] for r in bundle.supports],
        ),
        "frequent_itemsets": (
            ["group", "itemset", "support"],
            [[str(r.group), " ".join(r.items), _num(r.support)] for r in bundle.itemsets],
        ),
        "confidence": (
            ["group", "antecedent", "consequent", "support_joint", "confidence"],
            [[str(r.group), r.antecedent, r.consequent, _num(r.support_joint), _num(r.confidence)] for r in bundle.confidences],
        ),
        "comparison": (
            ["target", "mean_distinction", "mean_nondistinction", "H", "p", "tier"],
            [
                [c.target, _num(c.mean_distinction), _num(c.mean_nondistinction), _num(c.kw.h_statistic), _p(c.kw.p_value), str(c.tier)]
                for c in bundle.comparisons
            ],
        ),
    }
    if bundle.diagnostics:
        tables["cutoff_diagnostics"] = diagnostics_table(bundle.diagnostics)
    return tables


def diagnostics_table(rows: Sequence[DiagnosticsRow]) -> tuple[list[str], list[list[str]]]:
    return (
        ["cutoff_minutes", "total_sessions", "mean_actions_per_session", "mean_inter_session_gap"],
        [[_num(r.cutoff_minutes), str(r.total_sessions), _num(r.mean_actions_per_session), _num(r.mean_inter_session_gap)] for r in rows],
    )


def metadata_line(meta: Mapping) -> str:
    return "# " + " ".join(f"{k}={meta[k]}" for k in sorted(meta))


def write_delimited(path: Path, header: Sequence[str], rows: Iterable[Sequence[str]], meta: Mapping | None = None) -> Path:
    """CSV with a leading ``# key=value`` metadata comment (read with ``comment='#'``)."""
    buf = io.StringIO()
    if meta:
        buf.write(metadata_line(meta) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return _write(path, buf.getvalue())


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise UnwritableOutput(f"cannot write {path}: {exc}") from exc
    return path


def _md_escape(text: str) -> str:
    return text.replace("|", "\\|").replace("*", "\\*")


def markup_table(header: Sequence[str], rows: Sequence[Sequence[str]], tiers: Sequence[Tier | None] | None = None) -> str:
    """Markdown table; rows with p < 0.05 are bold and rows with p < 0.1 italic."""
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for i, row in enumerate(rows):
        tier = tiers[i] if tiers else None
        wrap = {Tier.SIGNIFICANT: "**", Tier.EDGE: "*"}.get(tier, "")
        cells = [f"{wrap}{_md_escape(c)}{wrap}" for c in row]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def render_tables(
    bundle: ReportBundle, out_dir: str | Path, format: str = "delimited", only: Iterable[str] | None = None
) -> list[Path]:
    """Write the bundle's tables as CSV (``delimited``) or Markdown (``markup``)."""
    if format not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    out = Path(out_dir)
    written = []
    for stem, (header, rows) in table_rows(bundle).items():
        if only is not None and stem not in only:
            continue
        if format == "delimited":
            written.append(write_delimited(out / f"{stem}.csv", header, rows, bundle.metadata))
        else:
            tiers = [c.tier for c in bundle.comparisons] if stem == "comparison" else None
            text = f"<!-- {metadata_line(bundle.metadata)[2:]} -->\n\n" + markup_table(header, rows, tiers)
            written.append(_write(out / f"{stem}.md", text))
    return written


def write_report(bundle: ReportBundle, out_dir: str | Path, figures: bool = True) -> list[Path]:
    """Delimited and markup tables, session list, metadata and figures."""
    from .plotting import plot_cutoff_diagnostics, plot_group_supports

    out = Path(out_dir)
    written = render_tables(bundle, out, "delimited") + render_tables(bundle, out, "markup")
    written.append(write_sessions(bundle.sessions, out / "sessions.csv", bundle.metadata))
    written.append(_write(out / "metadata.json", json.dumps(bundle.metadata, indent=2, sort_keys=True) + "\n"))
    written.append(_write(out / "config.json", json.dumps(bundle.config.to_dict(), indent=2, sort_keys=True) + "\n"))
    if figures:
        try:
            if bundle.diagnostics:
                marks = (bundle.config.browser_cutoff, bundle.config.study_cutoff)
                written.append(plot_cutoff_diagnostics(bundle.diagnostics, out / "figures" / "cutoff_diagnostics.png", marks))
            if bundle.comparisons:
                written.append(plot_group_supports(bundle.comparisons, out / "figures" / "group_supports.png"))
        except OSError as exc:
            raise UnwritableOutput(f"cannot write figures under {out}: {exc}") from exc
    return written


def write_sessions(sessions: Sequence[Session], path: Path, meta: Mapping | None = None) -> Path:
    header = ["student_id", "session", "start", "end", "n_events", "compacted"]
    rows = []
    index: dict[str, int] = {}
    for s in sessions:
        i = index.get(s.student_id, 0)
        index[s.student_id] = i + 1
        rows.append(
            [s.student_id, str(i), format_timestamp(s.start), format_timestamp(s.end), str(len(s)), render_tokens(compact_platforms(s.platforms))]
        )
    return write_delimited(path, header, rows, meta)
