"""Run-length compaction of sessions, pattern targets and per-student supports.

A session's platform sequence ``M M M W`` compacts to the tokens ``M+ W``.
Supports are measured per student as the fraction of their sessions that
match a target, either as the whole session (``exact``) or anywhere as a
contiguous window (``contain``).

Target syntax, case-insensitive:

``W+M``          literal pattern of one to three tokens
``trans(W,M)``   the four transition forms ``WM, MW, W+M, M+W``
``+P``           any repeated token followed by ``P`` (either flag)
``W+M|MW``       a literal family, the union of its alternatives
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence, Union

from .errors import EmptySession, InvalidPattern, NoSessions
from .sessionize import Session

MAX_PATTERN_LEN = 3


class Token(NamedTuple):
    platform: str
    repeated: bool

    def __str__(self):
        return self.platform + "+" if self.repeated else self.platform


class SupportMode(enum.Enum):
    EXACT = "exact"
    CONTAIN = "contain"

    def __str__(self):
        return self.value


class FamilyKind(enum.Enum):
    LITERAL = "Literal"
    TRANSITION_PAIR = "TransitionPair"
    REPEAT_THEN = "RepeatThen"


@dataclass(frozen=True)
class CompactedSequence:
    tokens: tuple[Token, ...]
    session: Session | None = field(default=None, compare=False, repr=False)

    def __str__(self):
        return render_tokens(self.tokens)

    def __len__(self):
        return len(self.tokens)


def render_tokens(tokens: Iterable[Token]) -> str:
    return "".join(str(t) for t in tokens)


_TOKEN_RE = re.compile(r"([A-Za-z])(\+?)")


def parse_tokens(text: str) -> tuple[Token, ...]:
    """``"w+mP"`` -> ``(W+, M, P)``."""
    text = text.strip()
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise InvalidPattern(f"cannot parse {text!r} at position {pos}")
        tokens.append(Token(m.group(1).upper(), bool(m.group(2))))
        pos = m.end()
    if not tokens:
        raise InvalidPattern("empty pattern")
    return tuple(tokens)


def _check_adjacent(tokens: Sequence[Token], what: str) -> None:
    for a, b in zip(tokens, tokens[1:]):
        if a.platform == b.platform:
            raise InvalidPattern(f"{what}: adjacent tokens share platform {a.platform}")


@dataclass(frozen=True, order=True)
class Pattern:
    tokens: tuple[Token, ...]

    def __post_init__(self):
        if not 1 <= len(self.tokens) <= MAX_PATTERN_LEN:
            raise InvalidPattern(f"pattern length must be 1..{MAX_PATTERN_LEN}, got {len(self.tokens)}")
        _check_adjacent(self.tokens, render_tokens(self.tokens))

    @classmethod
    def parse(cls, text: str) -> "Pattern":
        return cls(parse_tokens(text))

    @property
    def name(self) -> str:
        return render_tokens(self.tokens)

    def __str__(self):
        return self.name

    def matches(self, tokens: Sequence[Token], mode: SupportMode) -> bool:
        if mode is SupportMode.EXACT:
            return tuple(tokens) == self.tokens
        k = len(self.tokens)
        return any(tuple(tokens[i : i + k]) == self.tokens for i in range(len(tokens) - k + 1))


@dataclass(frozen=True)
class PatternFamily:
    """A named set of patterns analysed as a single target.

    ``REPEAT_THEN`` families carry no member list; they match any window
    ``(X+, P)`` with ``X != P``, the ``P`` token repeated or not.
    """

    name: str
    kind: FamilyKind
    members: tuple[Pattern, ...] = ()
    then: str | None = None

    def __post_init__(self):
        if len(set(self.members)) != len(self.members):
            raise InvalidPattern(f"{self.name}: duplicate members")
        if self.kind is FamilyKind.REPEAT_THEN and not self.then:
            raise InvalidPattern(f"{self.name}: repeat-then family needs a platform")

    @classmethod
    def transition_pair(cls, a: str, b: str, extended: bool = False) -> "PatternFamily":
        a, b = a.upper(), b.upper()
        if a == b:
            raise InvalidPattern("transition pair needs two different platforms")
        A, Ar, B, Br = Token(a, False), Token(a, True), Token(b, False), Token(b, True)
        forms = [(Ar, B), (Br, A), (A, B), (B, A)]
        if extended:
            forms += [(A, Br), (B, Ar), (Ar, Br), (Br, Ar)]
        return cls(f"trans({a},{b})", FamilyKind.TRANSITION_PAIR, tuple(Pattern(f) for f in forms))

    @classmethod
    def repeat_then(cls, platform: str) -> "PatternFamily":
        platform = platform.upper()
        return cls(f"+{platform}", FamilyKind.REPEAT_THEN, then=platform)

    def __str__(self):
        return self.name

    def _repeat_then_at(self, tokens: Sequence[Token], i: int) -> bool:
        first, second = tokens[i], tokens[i + 1]
        return first.repeated and first.platform != self.then and second.platform == self.then

    def matches(self, tokens: Sequence[Token], mode: SupportMode) -> bool:
        if self.kind is FamilyKind.REPEAT_THEN:
            if mode is SupportMode.EXACT:
                return len(tokens) == 2 and self._repeat_then_at(tokens, 0)
            return any(self._repeat_then_at(tokens, i) for i in range(len(tokens) - 1))
        return any(m.matches(tokens, mode) for m in self.members)


Target = Union[Pattern, PatternFamily]

_TRANS_RE = re.compile(r"^trans\(\s*([A-Za-z])\s*,\s*([A-Za-z])\s*\)$", re.IGNORECASE)
_REPEAT_THEN_RE = re.compile(r"^\+\s*([A-Za-z])$")


def parse_target(text: str, extended: bool = False) -> Target:
    text = text.strip()
    m = _TRANS_RE.match(text)
    if m:
        return PatternFamily.transition_pair(m.group(1), m.group(2), extended=extended)
    m = _REPEAT_THEN_RE.match(text)
    if m:
        return PatternFamily.repeat_then(m.group(1))
    if "|" in text:
        members = tuple(Pattern.parse(part) for part in text.split("|"))
        return PatternFamily("|".join(p.name for p in members), FamilyKind.LITERAL, members)
    return Pattern.parse(text)


def compact_platforms(platforms: Sequence[str]) -> tuple[Token, ...]:
    tokens = []
    i = 0
    n = len(platforms)
    while i < n:
        j = i + 1
        while j < n and platforms[j] == platforms[i]:
            j += 1
        tokens.append(Token(platforms[i], j - i >= 2))
        i = j
    return tuple(tokens)


def compact(session: Session) -> CompactedSequence:
    if not len(session):
        raise EmptySession(f"session of {session.student_id} has no events")
    return CompactedSequence(compact_platforms(session.platforms), session)


def pattern_universe(
    sequences: Iterable[CompactedSequence | Sequence[Token]],
    max_len: int = MAX_PATTERN_LEN,
    mode: SupportMode = SupportMode.EXACT,
) -> set[Pattern]:
    """Every distinct token sequence of length 1..max_len seen in ``sequences``."""
    found: set[Pattern] = set()
    for seq in sequences:
        tokens = tuple(seq.tokens if isinstance(seq, CompactedSequence) else seq)
        if mode is SupportMode.EXACT:
            if 1 <= len(tokens) <= max_len:
                found.add(Pattern(tokens))
            continue
        for k in range(1, max_len + 1):
            for i in range(len(tokens) - k + 1):
                found.add(Pattern(tokens[i : i + k]))
    return found


def support(
    student_sessions: Sequence[CompactedSequence],
    target: Target,
    mode: SupportMode = SupportMode.EXACT,
    exclude_long: bool = False,
) -> float:
    """Fraction of a student's sessions that match ``target``.

    With ``exclude_long`` the denominator only counts sessions of at most
    three tokens.
    """
    if exclude_long:
        student_sessions = [s for s in student_sessions if len(s.tokens) <= MAX_PATTERN_LEN]
    if not student_sessions:
        raise NoSessions("student has no sessions to measure support over")
    hits = sum(1 for s in student_sessions if target.matches(s.tokens, mode))
    return hits / len(student_sessions)


@dataclass(frozen=True)
class SupportRecord:
    student_id: str
    target: str
    support: float
    mode: SupportMode


def support_table(
    class_sessions: Mapping[str, Sequence[CompactedSequence]],
    targets: Sequence[Target],
    mode: SupportMode = SupportMode.EXACT,
    exclude_long: bool = False,
) -> list[SupportRecord]:
    """One record per (student, target), zeros included, ordered by (student, target).

    Students without any session are left out; they have no support at all.
    """
    if not targets:
        raise ValueError("no targets given")
    ordered = sorted(targets, key=lambda t: t.name)
    records = []
    for sid in sorted(class_sessions):
        sessions = class_sessions[sid]
        if exclude_long:
            sessions = [s for s in sessions if len(s.tokens) <= MAX_PATTERN_LEN]
        if not sessions:
            continue
        for target in ordered:
            records.append(SupportRecord(sid, target.name, support(sessions, target, mode), mode))
    return records


def default_targets(
    sequences: Iterable[CompactedSequence],
    platforms: Iterable[str],
    mode: SupportMode = SupportMode.EXACT,
    extended: bool = False,
) -> list[Target]:
    """Observed patterns plus every transition-pair and repeat-then family."""
    codes = sorted(set(platforms))
    targets: list[Target] = sorted(pattern_universe(sequences, mode=mode))
    for i, a in enumerate(codes):
        for b in codes[i + 1 :]:
            targets.append(PatternFamily.transition_pair(a, b, extended=extended))
    targets.extend(PatternFamily.repeat_then(c) for c in codes)
    return targets
