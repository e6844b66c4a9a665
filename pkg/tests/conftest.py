import os

import numpy as np
import pytest

DATA_DIR = os.environ.get("REFLECTVEC_EVAL_DATA", "/root/data")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_corpus(path, tokens, per_line=20):
    lines = [" ".join(tokens[i : i + per_line]) for i in range(0, len(tokens), per_line)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# ----------------------------------------------------------------------------
# acceptance reporting: one line per criterion in the terminal summary

_acceptance: dict[str, tuple[str, str, str]] = {}
_RANK = {"FAIL": 3, "PASS": 2, "SKIP": 1, "NOT RUN": 0}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label, title): acceptance criterion covered by a test")


def _record(item, verdict: str, why: str = "") -> None:
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    label, title = mark.args
    old = _acceptance.get(label)
    # parametrized criteria: the worst case decides
    if old is None or _RANK[verdict] > _RANK[old[1]] or (verdict == "PASS" and old[1] == "SKIP"):
        _acceptance[label] = (title, verdict, why)


def pytest_deselected(items):
    for item in items:
        why = "slow; run with -m slow" if item.get_closest_marker("slow") else "deselected"
        _record(item, "NOT RUN", why)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.skipped and rep.when in ("setup", "call"):
        _record(item, "SKIP", _skip_reason(rep))
    elif rep.when == "call":
        _record(item, "PASS" if rep.passed else "FAIL")
    elif rep.failed:
        _record(item, "FAIL", f"error in {rep.when}")


def _skip_reason(rep) -> str:
    if isinstance(rep.longrepr, tuple):
        return rep.longrepr[2].removeprefix("Skipped: ")
    return str(rep.longrepr)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_acceptance, key=lambda s: (int("".join(c for c in s if c.isdigit())), s)):
        title, verdict, why = _acceptance[label]
        line = f"criterion {label:<4} {verdict:<7} {title}"
        terminalreporter.write_line(line + (f"  [{why}]" if why else ""))
