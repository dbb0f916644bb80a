"""Acceptance criteria 1-11, each at its stated tolerance.

The suite runs once through the library and once through the ``validate``
command; one PASS/FAIL line per criterion is printed in the terminal summary.
"""

import pytest

from phonon_berry.cli import main
from phonon_berry.validation import run_all, write_artifacts

from .conftest import ACCEPTANCE_LINES

SEED = 20240611
ARTIFACTS = ("report.txt", "duct_trajectory.csv", "ensemble.txt")

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def suite_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("validate_api")
    results, texts = run_all(SEED)
    write_artifacts(out, texts)
    return {r.number: r for r in results}, out


def _report(r, extra=""):
    status = "PASS" if r.passed and r.runtime <= r.runtime_limit else "FAIL"
    metrics = ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in r.metrics.items())
    limit = "" if r.runtime_limit == float("inf") else f" (limit {r.runtime_limit:g} s)"
    line = f"[{status}] {r.number:2d} {r.name}: {metrics}; runtime {r.runtime:.2f} s{limit}{extra}"
    ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.mark.parametrize("number", range(1, 11))
def test_criterion(suite_run, number):
    results, _ = suite_run
    r = results[number]
    _report(r)
    assert r.passed, r.line()
    assert r.runtime <= r.runtime_limit, f"criterion {number} took {r.runtime:.2f} s"


def test_criterion_11_repeated_validate_is_byte_identical(suite_run, tmp_path):
    results, first = suite_run
    second = tmp_path / "validate_cli"
    status = main(["validate", "--out", str(second), "--seed", str(SEED), "--quiet"])
    same = {name: (first / name).read_bytes() == (second / name).read_bytes() for name in ARTIFACTS}
    r = results[11]
    r.passed = r.passed and all(same.values()) and status == 0
    r.metrics = {**{k: v for k, v in r.metrics.items() if k != "digest_without_this_line"},
                 **{f"rerun_{name}": ok for name, ok in same.items()}, "validate_exit": status}
    _report(r)
    assert status == 0
    assert all(same.values()), same
