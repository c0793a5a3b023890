import filecmp
from collections import Counter
from pathlib import Path

import pytest

from blendseq.config import load_config
from blendseq.errors import InvalidProfile
from blendseq.ingest import Group
from blendseq.report import ingest
from blendseq.sessionize import build_sessions
from blendseq.syngen import (
    DEFAULT_PROFILE,
    BehaviorProfile,
    SplitMix64,
    deep_merge,
    generate_class,
    profiles_from_mapping,
    read_manifest,
    verify_roundtrip,
    write_class,
)


def test_splitmix_reference_vector():
    rng = SplitMix64(0)
    assert [rng.next() for _ in range(3)] == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


@pytest.fixture
def profiles():
    return profiles_from_mapping({})


def test_same_seed_same_bytes(tmp_path, profiles):
    for name in ("a", "b"):
        write_class(generate_class(*profiles, 5, seed=3), tmp_path / name)
    cmp = filecmp.dircmp(tmp_path / "a", tmp_path / "b")
    assert not cmp.diff_files and not cmp.left_only and not cmp.right_only
    for f in cmp.common_files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_different_seed_differs(profiles):
    a = generate_class(*profiles, 3, seed=1).manifest()
    b = generate_class(*profiles, 3, seed=2).manifest()
    assert a != b


def test_student_independent_of_class_size(profiles):
    small = generate_class(*profiles, 1, seed=9).manifest()
    big = generate_class(*profiles, 6, seed=9).manifest()
    assert small[0] == big[0]


def test_rejects_empty_group(profiles):
    with pytest.raises(ValueError):
        generate_class(*profiles, 0, seed=1)


def test_identity_matrix_gives_single_repeat_token():
    data = deep_merge(
        DEFAULT_PROFILE,
        {
            "transitions": {"W": {"W": 1.0, "M": 0.0, "P": 0.0}, "M": {"W": 0.0, "M": 1.0, "P": 0.0}, "P": {"W": 0.0, "M": 0.0, "P": 1.0}},
        },
    )
    data["actions_per_session"] = {3: 1.0}
    profile = BehaviorProfile.from_mapping(data)
    klass = generate_class(profile, profile, 4, seed=5)
    seqs = {s["compacted"] for rec in klass.manifest() for s in rec["sessions"]}
    assert seqs <= {"W+", "M+", "P+"}


@pytest.mark.parametrize(
    "override",
    [
        {"transitions": {"W": {"W": 0.5, "M": 0.2, "P": 0.2}}},
        {"initial": {"W": 0.5, "M": 0.5, "P": 0.5}},
        {"intra_gap_minutes": [1.0, 45.0]},
        {"inter_gap_minutes": [30.0, 100.0]},
        {"intra_gap_minutes": [0.0, 10.0]},
        {"transitions": {"G": {"G": 1.0}}},
    ],
)
def test_invalid_profiles(override):
    with pytest.raises(InvalidProfile):
        profiles_from_mapping({"profile": override})


def test_invalid_grade_range():
    with pytest.raises(InvalidProfile):
        profiles_from_mapping({"distinction": {"grades": [50, 120]}})


def test_noisy_gaps_allowed():
    a, _ = profiles_from_mapping({"profile": {"intra_gap_minutes": [1.0, 80.0], "noisy_gaps": True}})
    assert a.noisy_gaps


def _recovered(out_dir, cutoff=None):
    config = load_config(Path(out_dir) / "class.toml")
    return build_sessions(ingest(config), cutoff or config.study_cutoff)


def test_roundtrip_recovers_manifest(tmp_path, profiles):
    write_class(generate_class(*profiles, 25, seed=7), tmp_path)
    manifest = read_manifest(tmp_path / "manifest.jsonl")
    report = verify_roundtrip(manifest, _recovered(tmp_path))
    assert report.ok, report.divergences[:5]
    assert len(manifest) == 50
    assert report.sessions_expected == report.sessions_recovered
    counts = Counter(s.student_id for s in _recovered(tmp_path))
    assert all(counts[r["student_id"]] == len(r["sessions"]) for r in manifest)


def test_roundtrip_flags_bad_cutoff(tmp_path, profiles):
    write_class(generate_class(*profiles, 5, seed=7), tmp_path)
    manifest = read_manifest(tmp_path / "manifest.jsonl")
    report = verify_roundtrip(manifest, _recovered(tmp_path, cutoff=10))
    assert not report.ok


def test_roundtrip_flags_unknown_student(tmp_path, profiles):
    write_class(generate_class(*profiles, 2, seed=7), tmp_path)
    manifest = read_manifest(tmp_path / "manifest.jsonl")
    report = verify_roundtrip(manifest[1:], _recovered(tmp_path))
    assert any("missing from the manifest" in d for d in report.divergences)


def test_transition_frequencies_converge():
    data = deep_merge(DEFAULT_PROFILE, {})
    data["actions_per_session"] = {30: 1.0}
    profile = BehaviorProfile.from_mapping(data)
    klass = generate_class(profile, profile, 15, seed=11)
    counts = {c: Counter() for c in profile.codes}
    total = 0
    for st in klass.students:
        for session in st.sessions:
            for (_, a), (_, b) in zip(session, session[1:]):
                counts[a][b] += 1
                total += 1
    assert total >= 10_000
    for a, row in profile.transitions.items():
        n = sum(counts[a].values())
        for b, p in row.items():
            assert abs(counts[a][b] / n - p) <= 0.02


def test_groups_and_grades(profiles):
    klass = generate_class(*profiles, 10, seed=1)
    for st in klass.students:
        if st.group is Group.DISTINCTION:
            assert st.grade >= 90
        else:
            assert st.grade < 90
