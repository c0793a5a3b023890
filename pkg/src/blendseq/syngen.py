"""Synthetic classes from Markov behaviour profiles, with a ground-truth manifest.

Randomness comes from SplitMix64 so a class is reproducible from its seed
alone, on any platform.  Each student draws from a private stream seeded by
``splitmix64(master_seed XOR fnv1a64(student_id))``, which makes a student's
events independent of generation order.

Draw conventions (part of the reproducibility contract):

* ``uniform()`` is ``(next() >> 11) * 2**-53``.
* ``below(n)`` is ``floor(uniform() * n)``.
* categorical draws walk the cumulative probabilities in key order and return
  the first key whose cumulative mass exceeds ``uniform()`` (the last key
  absorbs rounding).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .errors import InvalidProfile
from .ingest import Group, format_timestamp
from .patterns import compact_platforms, render_tokens
from .sessionize import STUDY_CUTOFF, Session

MASK64 = (1 << 64) - 1
CLASS_START = 1441065600  # 2015-09-01T00:00:00Z
_ACTIONS = {"W": "submit", "M": "view", "P": "post", "G": "commit"}


def fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & MASK64
    return h


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next() >> 11) * (1.0 / (1 << 53))

    def below(self, n: int) -> int:
        return int(self.uniform() * n)

    def integer(self, lo: int, hi: int) -> int:
        """Uniform integer in ``[lo, hi]``."""
        return lo + self.below(hi - lo + 1)

    def choice(self, weights: Sequence[tuple[object, float]]):
        u = self.uniform()
        acc = 0.0
        for key, w in weights:
            acc += w
            if u < acc:
                return key
        return weights[-1][0]


def student_rng(master_seed: int, student_id: str) -> SplitMix64:
    return SplitMix64(SplitMix64(master_seed ^ fnv1a64(student_id)).next())


@dataclass(frozen=True)
class BehaviorProfile:
    """Generative description of one outcome group.

    Discrete distributions map a value to its probability.  Gaps are uniform
    over ``[lo, hi]`` minutes and drawn in whole seconds; grades are uniform
    over ``[lo, hi]``.
    """

    platforms: Mapping[str, str]  # name -> letter
    initial: Mapping[str, float]
    transitions: Mapping[str, Mapping[str, float]]
    actions_per_session: Mapping[int, float]
    sessions_per_student: Mapping[int, float]
    intra_gap: tuple[float, float] = (0.5, 30.0)
    inter_gap: tuple[float, float] = (60.0, 2880.0)
    grades: tuple[float, float] = (0.0, 100.0)
    cutoff_minutes: float = STUDY_CUTOFF
    noisy_gaps: bool = False

    @property
    def codes(self) -> list[str]:
        return sorted(self.platforms.values())

    def validate(self) -> None:
        codes = set(self.platforms.values())
        if len(codes) != len(self.platforms) or not codes:
            raise InvalidProfile("platform letters must be unique and non-empty")

        def check_dist(name, dist, keys=None):
            if not dist:
                raise InvalidProfile(f"{name}: empty distribution")
            if any(p < 0 for p in dist.values()):
                raise InvalidProfile(f"{name}: negative probability")
            if abs(sum(dist.values()) - 1.0) > 1e-9:
                raise InvalidProfile(f"{name}: probabilities sum to {sum(dist.values())!r}, not 1")
            if keys is not None and set(dist) - keys:
                raise InvalidProfile(f"{name}: unknown platforms {sorted(set(dist) - keys)}")

        check_dist("initial", self.initial, codes)
        if set(self.transitions) != codes:
            raise InvalidProfile("transition matrix needs exactly one row per platform")
        for code, row in self.transitions.items():
            check_dist(f"transitions[{code}]", row, codes)
        check_dist("actions_per_session", self.actions_per_session)
        check_dist("sessions_per_student", self.sessions_per_student)
        if min(self.actions_per_session) < 1 or min(self.sessions_per_student) < 1:
            raise InvalidProfile("session and action counts must be >= 1")
        lo, hi = self.intra_gap
        ilo, ihi = self.inter_gap
        if not 0 <= lo <= hi or not 0 < ilo <= ihi:
            raise InvalidProfile("gap ranges must be ordered and non-negative")
        if not self.noisy_gaps:
            # equal timestamps would let the merge tie-break reorder a session
            if math.ceil(lo * 60) < 1:
                raise InvalidProfile("intra-session gaps must be at least one second")
            if hi >= self.cutoff_minutes:
                raise InvalidProfile(f"intra-session gaps reach {hi} min, not below cutoff {self.cutoff_minutes}")
            if ilo < self.cutoff_minutes:
                raise InvalidProfile(f"inter-session gaps start at {ilo} min, below cutoff {self.cutoff_minutes}")
        glo, ghi = self.grades
        if not 0 <= glo <= ghi <= 100:
            raise InvalidProfile("grade range must lie within [0, 100]")

    @classmethod
    def from_mapping(cls, data: Mapping) -> "BehaviorProfile":
        try:
            return cls(
                platforms=dict(data["platforms"]),
                initial={k.upper(): float(v) for k, v in data["initial"].items()},
                transitions={
                    k.upper(): {c.upper(): float(p) for c, p in row.items()} for k, row in data["transitions"].items()
                },
                actions_per_session={int(k): float(v) for k, v in data["actions_per_session"].items()},
                sessions_per_student={int(k): float(v) for k, v in data["sessions_per_student"].items()},
                intra_gap=tuple(data.get("intra_gap_minutes", (0.5, 30.0))),
                inter_gap=tuple(data.get("inter_gap_minutes", (60.0, 2880.0))),
                grades=tuple(data.get("grades", (0.0, 100.0))),
                cutoff_minutes=float(data.get("cutoff_minutes", STUDY_CUTOFF)),
                noisy_gaps=bool(data.get("noisy_gaps", False)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidProfile(f"bad profile: {exc!r}") from None


def _sorted_items(dist: Mapping) -> list[tuple[object, float]]:
    return sorted(dist.items())


def _gap_seconds(rng: SplitMix64, lo_min: float, hi_min: float, strict_below: float | None = None) -> int:
    lo = math.ceil(lo_min * 60)
    hi = math.floor(hi_min * 60)
    if strict_below is not None and hi >= strict_below * 60:
        hi = math.ceil(strict_below * 60) - 1
    return rng.integer(lo, max(lo, hi))


@dataclass
class StudentTruth:
    student_id: str
    group: Group
    grade: float
    sessions: list[list[tuple[int, str]]] = field(default_factory=list)  # (timestamp, platform)

    def manifest_record(self) -> dict:
        return {
            "student_id": self.student_id,
            "group": str(self.group),
            "grade": self.grade,
            "sessions": [
                {
                    "start": format_timestamp(s[0][0]),
                    "end": format_timestamp(s[-1][0]),
                    "n_events": len(s),
                    "compacted": render_tokens(compact_platforms([p for _, p in s])),
                }
                for s in self.sessions
            ],
        }


def simulate_student(profile: BehaviorProfile, student_id: str, group: Group, seed: int) -> StudentTruth:
    rng = student_rng(seed, student_id)
    glo, ghi = profile.grades
    grade = round(glo + (ghi - glo) * rng.uniform(), 2)
    truth = StudentTruth(student_id, group, grade)
    initial = _sorted_items(profile.initial)
    rows = {code: _sorted_items(row) for code, row in profile.transitions.items()}
    n_sessions = rng.choice(_sorted_items(profile.sessions_per_student))
    apsd = _sorted_items(profile.actions_per_session)
    clock = CLASS_START + rng.below(86400)
    strict = None if profile.noisy_gaps else profile.cutoff_minutes
    for s in range(n_sessions):
        if s:
            lo = profile.inter_gap[0] if profile.noisy_gaps else max(profile.inter_gap[0], profile.cutoff_minutes)
            clock += _gap_seconds(rng, lo, profile.inter_gap[1])
        n_actions = rng.choice(apsd)
        platform = rng.choice(initial)
        events = [(clock, platform)]
        for _ in range(n_actions - 1):
            clock += _gap_seconds(rng, *profile.intra_gap, strict_below=strict)
            platform = rng.choice(rows[platform])
            events.append((clock, platform))
        truth.sessions.append(events)
    return truth


@dataclass
class GeneratedClass:
    profiles: dict[Group, BehaviorProfile]
    students: list[StudentTruth]
    seed: int

    @property
    def platform_names(self) -> dict[str, str]:
        names = {}
        for p in self.profiles.values():
            names.update(p.platforms)
        return names

    def manifest(self) -> list[dict]:
        return [s.manifest_record() for s in self.students]


def generate_class(
    profile_a: BehaviorProfile, profile_b: BehaviorProfile, n_per_group: int, seed: int
) -> GeneratedClass:
    """Simulate ``n_per_group`` distinction (a) and non-distinction (b) students."""
    if n_per_group < 1:
        raise ValueError(f"n_per_group must be >= 1, got {n_per_group}")
    profile_a.validate()
    profile_b.validate()
    if profile_a.cutoff_minutes != profile_b.cutoff_minutes:
        raise InvalidProfile("both profiles must use the same cutoff")
    students = []
    for group, prefix, profile in ((Group.DISTINCTION, "d", profile_a), (Group.NON_DISTINCTION, "n", profile_b)):
        for i in range(1, n_per_group + 1):
            students.append(simulate_student(profile, f"{prefix}{i:04d}", group, seed))
    return GeneratedClass({Group.DISTINCTION: profile_a, Group.NON_DISTINCTION: profile_b}, students, seed)


def write_class(generated: GeneratedClass, out_dir: str | Path, distinction_threshold: float = 90.0) -> dict[str, Path]:
    """Write one event file per platform, the roster, the manifest and a class config."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = generated.platform_names
    by_code: dict[str, list[tuple[int, str, str]]] = {code: [] for code in names.values()}
    for st in generated.students:
        for session in st.sessions:
            for ts, code in session:
                by_code[code].append((ts, st.student_id, _ACTIONS.get(code, "action")))
    paths: dict[str, Path] = {}
    for name, code in sorted(names.items()):
        path = out / f"events_{name}.csv"
        rows = sorted(by_code[code])
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("student_id", "timestamp", "platform", "action"))
            for ts, sid, action in rows:
                w.writerow((sid, format_timestamp(ts), name, action))
        paths[name] = path

    roster = out / "roster.csv"
    with open(roster, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("student_id", "grade"))
        for st in generated.students:
            w.writerow((st.student_id, f"{st.grade:.2f}"))
    paths["roster"] = roster

    manifest = out / "manifest.jsonl"
    with open(manifest, "w", encoding="utf-8") as fh:
        for record in generated.manifest():
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    paths["manifest"] = manifest

    config = out / "class.toml"
    cutoff = generated.profiles[Group.DISTINCTION].cutoff_minutes
    lines = [
        f"# synthetic class, seed {generated.seed}",
        f'roster = "roster.csv"',
        f"distinction_threshold = {distinction_threshold}",
        f"study_cutoff = {cutoff}",
        f"browser_cutoff = {min(15.0, cutoff)}",
        "",
        "[platforms]",
        *(f'{name} = "{code}"' for name, code in sorted(names.items())),
        "",
    ]
    for name in sorted(names):
        lines += ["[[sources]]", f'file = "events_{name}.csv"', f'tag = "{name}"', ""]
    config.write_text("\n".join(lines), encoding="utf-8")
    paths["config"] = config
    return paths


def read_manifest(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


@dataclass
class RoundtripReport:
    students_checked: int
    sessions_expected: int
    sessions_recovered: int
    divergences: list[str]

    @property
    def ok(self) -> bool:
        return not self.divergences


def verify_roundtrip(manifest: Sequence[Mapping], sessions: Sequence[Session]) -> RoundtripReport:
    """Compare recovered sessions with the manifest; divergences are reported, not raised."""
    recovered: dict[str, list[Session]] = {}
    for s in sessions:
        recovered.setdefault(s.student_id, []).append(s)
    problems = []
    expected_total = 0
    for record in manifest:
        sid = record["student_id"]
        want = record["sessions"]
        got = recovered.pop(sid, [])
        expected_total += len(want)
        if len(want) != len(got):
            problems.append(f"{sid}: expected {len(want)} sessions, recovered {len(got)}")
        for i, (w, g) in enumerate(zip(want, got)):
            bounds = (format_timestamp(g.start), format_timestamp(g.end), len(g))
            if (w["start"], w["end"], w["n_events"]) != bounds:
                problems.append(f"{sid} session {i}: boundaries {bounds} != manifest {(w['start'], w['end'], w['n_events'])}")
            seq = render_tokens(compact_platforms(g.platforms))
            if seq != w["compacted"]:
                problems.append(f"{sid} session {i}: sequence {seq} != manifest {w['compacted']}")
    for sid in sorted(recovered):
        problems.append(f"{sid}: recovered sessions for a student missing from the manifest")
    return RoundtripReport(len(manifest), expected_total, len(sessions), problems)


DEFAULT_PROFILE = {
    "platforms": {"webassign": "W", "moodle": "M", "piazza": "P"},
    "initial": {"W": 0.5, "M": 0.35, "P": 0.15},
    "transitions": {
        "W": {"W": 0.7, "M": 0.2, "P": 0.1},
        "M": {"W": 0.3, "M": 0.6, "P": 0.1},
        "P": {"W": 0.3, "M": 0.2, "P": 0.5},
    },
    "actions_per_session": {1: 0.2, 2: 0.2, 3: 0.2, 4: 0.15, 5: 0.1, 6: 0.1, 8: 0.05},
    "sessions_per_student": {10: 0.2, 15: 0.3, 20: 0.3, 30: 0.2},
    "intra_gap_minutes": [0.5, 30.0],
    "inter_gap_minutes": [60.0, 2880.0],
    "cutoff_minutes": STUDY_CUTOFF,
}
DEFAULT_GRADES = {Group.DISTINCTION: [90.0, 100.0], Group.NON_DISTINCTION: [55.0, 89.99]}


def deep_merge(base: Mapping, override: Mapping) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), Mapping):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def profiles_from_mapping(data: Mapping) -> tuple[BehaviorProfile, BehaviorProfile]:
    """Build both group profiles from a profile document.

    ``[profile]`` holds settings shared by both groups (falling back to the
    built-in default); ``[distinction]`` and ``[nondistinction]`` override it.
    """
    shared = deep_merge(DEFAULT_PROFILE, data.get("profile", {}))
    out = []
    for group, key in ((Group.DISTINCTION, "distinction"), (Group.NON_DISTINCTION, "nondistinction")):
        merged = deep_merge({**shared, "grades": DEFAULT_GRADES[group]}, data.get(key, {}))
        profile = BehaviorProfile.from_mapping(merged)
        profile.validate()
        out.append(profile)
    return out[0], out[1]
