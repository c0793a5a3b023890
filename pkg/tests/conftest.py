import random

import pytest

from blendseq.ingest import EventRecord, TransactionStream, merge_logs
from blendseq.patterns import CompactedSequence, parse_tokens

T0 = 1441065600


def ev(sid, minute, platform="W", tag="src", action="a"):
    return EventRecord(sid, T0 + int(minute * 60), platform, action, tag)


def stream_of(*events):
    return merge_logs([list(events)])


def seqs(*texts):
    return [CompactedSequence(parse_tokens(t)) for t in texts]


def random_stream(rng: random.Random, n_events=200, n_students=5, alphabet="WMP", max_gap_min=90):
    """Per-student event lists with random gaps, merged into one stream."""
    events = []
    for s in range(n_students):
        ts = T0 + rng.randrange(3600)
        for _ in range(n_events // n_students):
            ts += rng.randint(0, max_gap_min * 60)
            events.append(EventRecord(f"s{s}", ts, rng.choice(alphabet), "a", "src"))
    return merge_logs([events])


@pytest.fixture
def platform_map():
    return {"webassign": "W", "moodle": "M", "piazza": "P", "github": "G"}


@pytest.fixture
def write(tmp_path):
    def _write(name, text):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write


_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion covered by the test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    crit = dict(report.user_properties).get("criterion")
    if crit is not None:
        _ACCEPTANCE[crit] = report.outcome


def pytest_runtest_setup(item):
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        item.user_properties.append(("criterion", marker.args))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for (number, text), outcome in sorted(_ACCEPTANCE.items()):
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {verdict}  {text}")
