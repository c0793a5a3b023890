"""Reading per-platform activity logs and merging them into one class stream.

Every source file is parsed into :class:`EventRecord` tuples, the sources are
merged into a single time-sorted :class:`TransactionStream`, and the roster
assigns each student to an outcome group by final grade.
"""

from __future__ import annotations

import csv
import enum
import json
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

from .errors import DuplicateStudent, MalformedRow, UnknownPlatform

REQUIRED_FIELDS = ("student_id", "timestamp", "platform", "action")
_PLATFORM_CODE = re.compile(r"^[A-Z]$")
_EPOCH = re.compile(r"^-?\d+$")
_FRACTION = re.compile(r"\.(\d+)")


class EventRecord(NamedTuple):
    student_id: str
    timestamp: int  # UTC epoch seconds
    platform: str
    action: str
    source_tag: str


class Group(enum.Enum):
    DISTINCTION = "Distinction"
    NON_DISTINCTION = "NonDistinction"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class RosterEntry:
    student_id: str
    final_grade: float
    group: Group


@dataclass(frozen=True)
class SourceSchema:
    """How to read one source file.

    ``fields`` maps the canonical names (student_id, timestamp, platform,
    action) to the column or key names used by the file.  A source without a
    platform column (a forum export, say) sets ``platform`` to the constant
    platform name instead.
    """

    format: str = "csv"
    delimiter: str = ","
    fields: Mapping[str, str] = field(default_factory=dict)
    platform: str | None = None
    tag: str | None = None

    def column(self, name: str) -> str:
        return self.fields.get(name, name)


@dataclass(frozen=True)
class TransactionStream:
    events: tuple[EventRecord, ...]
    index: Mapping[str, tuple[int, ...]]

    @classmethod
    def from_sorted(cls, events: Iterable[EventRecord]) -> "TransactionStream":
        events = tuple(events)
        positions: dict[str, list[int]] = {}
        for i, ev in enumerate(events):
            positions.setdefault(ev.student_id, []).append(i)
        return cls(events, {sid: tuple(p) for sid, p in positions.items()})

    def __len__(self):
        return len(self.events)

    @property
    def students(self) -> list[str]:
        return sorted(self.index)

    def student_events(self, student_id: str) -> list[EventRecord]:
        return [self.events[i] for i in self.index.get(student_id, ())]


def validate_platform_map(platform_map: Mapping[str, str]) -> dict[str, str]:
    """Normalise names to lower case and check the letter codes."""
    normalised = {}
    for name, code in platform_map.items():
        if not isinstance(code, str) or not _PLATFORM_CODE.match(code):
            raise ValueError(f"platform {name!r}: code {code!r} is not a single uppercase letter")
        normalised[str(name).strip().lower()] = code
    codes = list(normalised.values())
    if len(set(codes)) != len(codes):
        raise ValueError(f"platform codes must be unique, got {sorted(codes)}")
    return normalised


def parse_timestamp(text: str, epoch: bool) -> int:
    """Parse RFC 3339 or integer epoch seconds into epoch seconds (truncated)."""
    text = text.strip()
    if epoch:
        if not _EPOCH.match(text):
            raise ValueError(f"not integer epoch seconds: {text!r}")
        return int(text)
    if text[-1:] in ("Z", "z"):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        # fromisoformat on 3.10 only takes 3 or 6 fractional digits
        dt = datetime.fromisoformat(_FRACTION.sub(lambda m: "." + (m.group(1) + "000000")[:6], text, count=1))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return math.floor(dt.timestamp())


def format_timestamp(seconds: int) -> str:
    return datetime.fromtimestamp(seconds, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _rows(path: Path, schema: SourceSchema):
    """Yield (line_number, mapping) for each data row of ``path``."""
    if schema.format == "csv":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh, delimiter=schema.delimiter)
            header = next(reader, None)
            if header is None:
                return
            header = [h.strip() for h in header]
            for lineno, row in enumerate(reader, start=1):
                if not row or (len(row) == 1 and not row[0].strip()):
                    continue
                if len(row) != len(header):
                    raise MalformedRow(
                        f"expected {len(header)} fields, got {len(row)}", file=str(path), line=lineno
                    )
                yield lineno, dict(zip(header, row))
    elif schema.format == "jsonl":
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                if not raw.strip():
                    continue
                try:
                    record = json.loads(raw)
                except json.JSONDecodeError as exc:
                    raise MalformedRow(f"invalid JSON: {exc.msg}", file=str(path), line=lineno) from None
                if not isinstance(record, dict):
                    raise MalformedRow("record is not an object", file=str(path), line=lineno)
                yield lineno, record
    else:
        raise ValueError(f"unknown source format {schema.format!r}")


def parse_log(
    path: str | Path,
    platform_map: Mapping[str, str],
    schema: SourceSchema | None = None,
) -> list[EventRecord]:
    """Parse one source file into event records, in file order.

    Line numbers in errors count data rows (the CSV header is not counted).
    The timestamp encoding is detected once per file from the first row.
    """
    path = Path(path)
    schema = schema or SourceSchema()
    pmap = {k.lower(): v for k, v in platform_map.items()}
    tag = schema.tag or path.stem
    cols = {name: schema.column(name) for name in REQUIRED_FIELDS}
    needed = [n for n in REQUIRED_FIELDS if not (n == "platform" and schema.platform)]
    fixed_code = None
    if schema.platform:
        fixed_code = pmap.get(schema.platform.lower())
        if fixed_code is None:
            raise UnknownPlatform(f"platform {schema.platform!r} not in platform map", file=str(path))

    out: list[EventRecord] = []
    epoch = None
    sid_col, ts_col, pf_col, act_col = cols["student_id"], cols["timestamp"], cols["platform"], cols["action"]
    for lineno, row in _rows(path, schema):
        for name in needed:
            value = row.get(cols[name])
            if value is None or (isinstance(value, str) and not value.strip()):
                raise MalformedRow(f"missing field {cols[name]!r}", file=str(path), line=lineno)
        raw_ts = str(row[ts_col]).strip()
        if epoch is None:
            epoch = bool(_EPOCH.match(raw_ts))
        try:
            ts = parse_timestamp(raw_ts, epoch)
        except ValueError:
            raise MalformedRow(f"unparsable timestamp {raw_ts!r}", file=str(path), line=lineno) from None
        if fixed_code is not None:
            code = fixed_code
        else:
            name = str(row[pf_col]).strip().lower()
            code = pmap.get(name)
            if code is None:
                raise UnknownPlatform(f"platform {row[pf_col]!r} not in platform map", file=str(path), line=lineno)
        out.append(EventRecord(str(row[sid_col]).strip(), ts, code, str(row[act_col]).strip(), tag))
    return out


def merge_logs(sources: Sequence[Sequence[EventRecord]]) -> TransactionStream:
    """Merge parsed sources into one stream ordered by (timestamp, source tag).

    Remaining ties keep input order (source position, then row position), so
    the result is deterministic.
    """
    union = [ev for source in sources for ev in source]
    union.sort(key=lambda ev: (ev.timestamp, ev.source_tag))
    return TransactionStream.from_sorted(union)


def filter_students(stream: TransactionStream, exclude: Iterable[str]) -> TransactionStream:
    exclude = set(exclude)
    if not exclude:
        return stream
    return TransactionStream.from_sorted(ev for ev in stream.events if ev.student_id not in exclude)


def assign_group(grade: float, distinction_threshold: float = 90.0) -> Group:
    return Group.DISTINCTION if grade >= distinction_threshold else Group.NON_DISTINCTION


def load_roster(path: str | Path, distinction_threshold: float = 90.0) -> list[RosterEntry]:
    """Read ``student_id, grade`` rows and split students at the threshold."""
    path = Path(path)
    entries: list[RosterEntry] = []
    seen: set[str] = set()
    for lineno, row in _rows(path, SourceSchema()):
        sid = (row.get("student_id") or "").strip()
        raw = (row.get("grade") or "").strip()
        if not sid or not raw:
            raise MalformedRow("row needs student_id and grade", file=str(path), line=lineno)
        try:
            grade = float(raw)
        except ValueError:
            raise MalformedRow(f"grade {raw!r} is not numeric", file=str(path), line=lineno) from None
        if not 0.0 <= grade <= 100.0:
            raise MalformedRow(f"grade {grade} outside [0, 100]", file=str(path), line=lineno)
        if sid in seen:
            raise DuplicateStudent(f"student {sid!r} listed twice", file=str(path), line=lineno)
        seen.add(sid)
        entries.append(RosterEntry(sid, grade, assign_group(grade, distinction_threshold)))
    return entries


TRANSACTION_COLUMNS = ("student_id", "timestamp", "platform", "action", "source_tag")


def write_transactions(stream: TransactionStream, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRANSACTION_COLUMNS)
        for ev in stream.events:
            writer.writerow((ev.student_id, format_timestamp(ev.timestamp), ev.platform, ev.action, ev.source_tag))


def read_transactions(path: str | Path) -> TransactionStream:
    """Read back a merged file written by :func:`write_transactions`."""
    path = Path(path)
    events = []
    for lineno, row in _rows(path, SourceSchema()):
        try:
            ts = parse_timestamp(row["timestamp"], False)
            events.append(EventRecord(row["student_id"], ts, row["platform"], row["action"], row["source_tag"]))
        except (KeyError, ValueError) as exc:
            raise MalformedRow(f"bad transaction row: {exc}", file=str(path), line=lineno) from None
    return merge_logs([events])
