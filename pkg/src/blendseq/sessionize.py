"""Inactivity-cutoff sessions and the diagnostics used to pick a cutoff."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import EmptyStream
from .ingest import EventRecord, TransactionStream

BROWSER_CUTOFF = 15.0
STUDY_CUTOFF = 40.0


@dataclass(frozen=True)
class Session:
    student_id: str
    events: tuple[EventRecord, ...]
    cutoff_minutes: float

    @property
    def start(self) -> int:
        return self.events[0].timestamp

    @property
    def end(self) -> int:
        return self.events[-1].timestamp

    @property
    def platforms(self) -> list[str]:
        return [ev.platform for ev in self.events]

    def __len__(self):
        return len(self.events)


@dataclass(frozen=True)
class DiagnosticsRow:
    cutoff_minutes: float
    total_sessions: int
    mean_actions_per_session: float
    mean_inter_session_gap: float  # minutes; nan when no student has two sessions


def split_student(events: Sequence[EventRecord], cutoff_minutes: float) -> list[Session]:
    """Split one student's time-ordered events wherever a gap reaches the cutoff.

    Two consecutive events stay together only when they are strictly less than
    ``cutoff_minutes`` apart.
    """
    if not events:
        return []
    limit = cutoff_minutes * 60.0
    sid = events[0].student_id
    sessions = []
    begin = 0
    prev = events[0].timestamp
    for i in range(1, len(events)):
        ts = events[i].timestamp
        if ts - prev >= limit:
            sessions.append(Session(sid, tuple(events[begin:i]), cutoff_minutes))
            begin = i
        prev = ts
    sessions.append(Session(sid, tuple(events[begin:]), cutoff_minutes))
    return sessions


def build_sessions(stream: TransactionStream, cutoff_minutes: float) -> list[Session]:
    """Sessions for every student, ordered by student id then start time."""
    if not cutoff_minutes > 0:
        raise ValueError(f"cutoff must be positive, got {cutoff_minutes}")
    out: list[Session] = []
    for sid in stream.students:
        out.extend(split_student(stream.student_events(sid), cutoff_minutes))
    return out


def sessions_by_student(sessions: Sequence[Session]) -> dict[str, list[Session]]:
    grouped: dict[str, list[Session]] = {}
    for s in sessions:
        grouped.setdefault(s.student_id, []).append(s)
    return grouped


def cutoff_diagnostics(stream: TransactionStream, cutoff_grid: Sequence[float]) -> list[DiagnosticsRow]:
    """Session count, mean session length and mean between-session gap per cutoff.

    The between-session gap is the time from the last event of one session to
    the first event of the same student's next session, averaged class-wide.
    """
    if not len(stream):
        raise EmptyStream("no events to diagnose")
    grid = list(cutoff_grid)
    if not grid:
        raise ValueError("cutoff grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError(f"cutoff grid must be strictly increasing, got {grid}")

    per_student = [stream.student_events(sid) for sid in stream.students]
    rows = []
    for cutoff in grid:
        n_sessions = 0
        gap_total = 0.0
        gap_count = 0
        for events in per_student:
            sessions = split_student(events, cutoff)
            n_sessions += len(sessions)
            for before, after in zip(sessions, sessions[1:]):
                gap_total += (after.start - before.end) / 60.0
                gap_count += 1
        rows.append(
            DiagnosticsRow(
                cutoff_minutes=float(cutoff),
                total_sessions=n_sessions,
                mean_actions_per_session=len(stream) / n_sessions,
                mean_inter_session_gap=gap_total / gap_count if gap_count else float("nan"),
            )
        )
    return rows
