"""Command-line entry point: ``blendseq <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .apriori import apriori_frequent, group_confidence_table, itemize
from .config import ClassConfig, load_config, load_toml
from .errors import BlendseqError, PipelineError
from .ingest import Group, read_transactions, write_transactions
from .patterns import SupportMode, default_targets, support_table
from .report import (
    FrequentItemset,
    ReportBundle,
    compact_by_student,
    diagnostics_table,
    ingest,
    render_tables,
    roster,
    run_metadata,
    run_pipeline,
    split_by_group,
    stage,
    write_delimited,
    write_report,
    write_sessions,
)
from .sessionize import build_sessions, cutoff_diagnostics
from .stats import compare_groups
from .syngen import generate_class, profiles_from_mapping, write_class

log = logging.getLogger("blendseq")


def _grid(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be comma-separated numbers, got {text!r}") from None


def _config(args) -> ClassConfig:
    with stage("config"):
        config = load_config(args.config)
        return config.with_overrides(
            study_cutoff=getattr(args, "cutoff", None),
            min_support=getattr(args, "min_support", None),
            support_mode=SupportMode(args.mode) if getattr(args, "mode", None) else None,
            unordered=True if getattr(args, "unordered", False) else None,
            diagnostic_grid=getattr(args, "grid", None),
            out_dir=getattr(args, "out", None),
        )


def _out(args, config: ClassConfig | None = None) -> Path:
    if args.out:
        return Path(args.out)
    return Path(config.out_dir) if config else Path("out")


def _stream(args, config):
    if getattr(args, "transactions", None):
        with stage("ingest"):
            return read_transactions(args.transactions)
    return ingest(config)


def cmd_ingest(args):
    config = _config(args)
    stream = ingest(config)
    out = _out(args, config)
    out.mkdir(parents=True, exist_ok=True)
    write_transactions(stream, out / "transactions.csv")
    log.info("merged %d events from %d sources", len(stream), len(config.sources))


def cmd_sessionize(args):
    config = _config(args)
    stream = _stream(args, config)
    with stage("sessionize"):
        sessions = build_sessions(stream, config.study_cutoff)
    write_sessions(sessions, _out(args, config) / "sessions.csv", run_metadata(config))
    log.info("%d sessions at cutoff %g min", len(sessions), config.study_cutoff)


def cmd_diagnose(args):
    from .plotting import plot_cutoff_diagnostics

    config = _config(args)
    stream = _stream(args, config)
    with stage("sessionize"):
        rows = cutoff_diagnostics(stream, config.diagnostic_grid)
    out = _out(args, config)
    header, body = diagnostics_table(rows)
    write_delimited(out / "cutoff_diagnostics.csv", header, body, run_metadata(config))
    if not args.no_figures:
        plot_cutoff_diagnostics(rows, out / "figures" / "cutoff_diagnostics.png", (config.browser_cutoff, config.study_cutoff))
    for line in body:
        print(",".join(line))


def _grouped(args, config):
    stream = _stream(args, config)
    entries = roster(config)
    with stage("sessionize"):
        sessions = build_sessions(stream, config.study_cutoff)
    with stage("roster"):
        compacted = compact_by_student(sessions)
        by_group = split_by_group(compacted, entries)
    return entries, compacted, by_group


def _empty_bundle(config, **parts) -> ReportBundle:
    fields = dict(session_summary=[], diagnostics=[], supports=[], itemsets=[], confidences=[], comparisons=[])
    fields.update(parts)
    return ReportBundle(config, metadata=run_metadata(config), **fields)


def _emit(bundle: ReportBundle, stems, out: Path, fmt: str):
    formats = ("delimited", "markup") if fmt == "both" else (fmt,)
    with stage("report"):
        for f in formats:
            render_tables(bundle, out, f, only=stems)


def cmd_mine(args):
    config = _config(args)
    _, _, by_group = _grouped(args, config)
    with stage("apriori"):
        itemsets = []
        for g in Group:
            found = apriori_frequent([itemize(c) for c in by_group[g]], config.min_support) if by_group[g] else {}
            for items, sup in sorted(found.items(), key=lambda kv: (len(kv[0]), sorted(kv[0]))):
                itemsets.append(FrequentItemset(g, tuple(sorted(items)), sup))
        rules = group_confidence_table(by_group, config.parsed_rules(), ordered=not config.unordered)
    bundle = _empty_bundle(config, itemsets=itemsets, confidences=rules)
    _emit(bundle, {"frequent_itemsets", "confidence"}, _out(args, config), args.format)


def cmd_compare(args):
    config = _config(args)
    entries, compacted, _ = _grouped(args, config)
    with stage("patterns"):
        targets = config.parsed_targets() or default_targets(
            (c for seqs in compacted.values() for c in seqs), config.codes, config.support_mode, config.extended_families
        )
        supports = support_table(compacted, targets, config.support_mode, config.exclude_long)
    with stage("stats"):
        rows = compare_groups(supports, entries, significant=config.significant_p, edge=config.edge_p)
    bundle = _empty_bundle(config, supports=supports, comparisons=rows)
    bundle.metadata["excluded_n"] = rows[0].excluded_n if rows else 0
    _emit(bundle, {"supports", "comparison"}, _out(args, config), args.format)


def cmd_report(args):
    config = _config(args)
    bundle = run_pipeline(config)
    out = _out(args, config)
    with stage("report"):
        write_report(bundle, out, figures=not args.no_figures)
    for c in bundle.comparisons:
        if c.tier.value != "NotSignificant":
            print(f"{c.target}\t{c.mean_distinction:.4f}\t{c.mean_nondistinction:.4f}\tp={c.kw.p_value:.3g}\t{c.tier}")


def cmd_generate(args):
    with stage("generate"):
        data = load_toml(args.config) if args.config else {}
        profile_a, profile_b = profiles_from_mapping(data)
        seed = args.seed if args.seed is not None else int(data.get("seed", 0))
        n = args.n_per_group or int(data.get("n_per_group", 50))
        generated = generate_class(profile_a, profile_b, n, seed)
        paths = write_class(generated, args.out, float(data.get("distinction_threshold", 90.0)))
    log.info("wrote %d students to %s (config %s)", 2 * n, args.out, paths["config"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blendseq", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def stage_parser(name, func, help, transactions=True):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", required=True, help="class config (TOML)")
        p.add_argument("--out", help="output directory (default: config out_dir)")
        if transactions:
            p.add_argument("--transactions", help="merged file from 'ingest' instead of the raw sources")
        p.set_defaults(func=func)
        return p

    stage_parser("ingest", cmd_ingest, "merge source logs into one transaction file", transactions=False)

    p = stage_parser("sessionize", cmd_sessionize, "split events into sessions")
    p.add_argument("--cutoff", type=float, help="inactivity cutoff in minutes")

    p = stage_parser("diagnose-cutoff", cmd_diagnose, "session statistics over a grid of cutoffs")
    p.add_argument("--grid", type=_grid, help="comma-separated cutoffs in minutes")
    p.add_argument("--no-figures", action="store_true")

    p = stage_parser("mine", cmd_mine, "frequent itemsets and transition confidences per group")
    p.add_argument("--cutoff", type=float)
    p.add_argument("--min-support", type=float)
    p.add_argument("--unordered", action="store_true", help="joint support ignores order")
    p.add_argument("--format", choices=("delimited", "markup", "both"), default="delimited")

    p = stage_parser("compare", cmd_compare, "per-student supports and Kruskal-Wallis group tests")
    p.add_argument("--cutoff", type=float)
    p.add_argument("--mode", choices=("exact", "contain"))
    p.add_argument("--format", choices=("delimited", "markup", "both"), default="delimited")

    p = stage_parser("report", cmd_report, "run the full pipeline and write every table and figure", transactions=False)
    p.add_argument("--cutoff", type=float)
    p.add_argument("--min-support", type=float)
    p.add_argument("--mode", choices=("exact", "contain"))
    p.add_argument("--unordered", action="store_true")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("generate", help="write a synthetic class with a ground-truth manifest")
    p.add_argument("--config", help="profile file (TOML); built-in default if omitted")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-per-group", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except PipelineError as exc:
        print(f"blendseq: error {exc}", file=sys.stderr)
        return 2
    except BlendseqError as exc:
        print(f"blendseq: error {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
