from importlib import resources
from pathlib import Path

import pytest

_ACCEPTANCE = {}


@pytest.fixture
def toy_paths(tmp_path):
    out = {}
    for name in ("toy_corpus.txt", "toy_pairs.tsv"):
        dest = tmp_path / name
        dest.write_bytes((resources.files("causalmem.data") / name).read_bytes())
        out[name.split("_")[1].split(".")[0]] = dest
    return out


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    n, desc = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        prev = _ACCEPTANCE.get(n, (desc, "PASS"))[1]
        status = "PASS" if report.outcome == "passed" and prev == "PASS" else "FAIL"
        _ACCEPTANCE[n] = (desc, status)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        desc, status = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {desc}")
