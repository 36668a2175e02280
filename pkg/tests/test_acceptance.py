"""Acceptance criteria 1-11, one test and one printed verdict line each.

All checks run once (module fixture) through the same registry that
``hgasket verify`` uses.  Thresholds live in ``hgasket.verify`` and are not
relaxed here; criteria that do not hold at these depths fail visibly.
"""

import subprocess
import sys

import pytest

from hgasket import verify

CRITERIA = {
    1: "eigenvalue beta = 3/5, ruelle(Id) = (3/5) Id",
    2: "measure telescoping and depth-2 masses",
    3: "push-forward identity",
    4: "rank-one convergence",
    5: "Lyapunov exponents",
    6: "cell anisotropy",
    7: "mass concentration away from M",
    8: "Dirichlet exactness on linear fields",
    9: "self-similarity of the energy",
    10: "pre-Cheeger energy vs half the Dirichlet form",
    11: "determinism of the verify report",
}


@pytest.fixture(scope="module")
def outcome():
    timings: dict = {}
    results = verify.run_checks(verify.VerifyContext(), criteria=range(1, 11), timings=timings)
    return results, timings


def report(capsys, criterion, rows, extra=""):
    ok = all(r.passed for r in rows)
    detail = "; ".join(f"{r.name}={r.measured:.4g} ({r.status})" for r in rows)
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {criterion:2d}: {CRITERIA[criterion]} | {detail}{extra}")
    return ok


@pytest.mark.parametrize("criterion", range(1, 11))
def test_criterion(criterion, outcome, capsys):
    results, _ = outcome
    rows = [r for r in results if r.criterion == criterion]
    assert rows
    failing = [r.name for r in rows if not r.passed]
    assert report(capsys, criterion, rows), f"failing checks: {failing}"


def test_runtime_budgets(outcome, capsys):
    _, timings = outcome
    budgets = verify.runtime_budgets(timings)
    with capsys.disabled():
        for name, t, b in budgets:
            print(f"\n[{'PASS' if t <= b else 'FAIL'}] runtime {name}: {t:.4g} s (budget {b:g} s)")
    assert all(t <= b for _, t, b in budgets)


def test_criterion_11_determinism(tmp_path, capsys):
    outputs = []
    for name in ("first", "second"):
        out = tmp_path / name
        proc = subprocess.run(
            [sys.executable, "-m", "hgasket", "verify", "--out", str(out)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode in (0, 1), proc.stderr
        outputs.append((out / "verify.csv").read_bytes())
    rows = verify.CHECKS[11](verify.VerifyContext())
    same = outputs[0] == outputs[1]
    ok = report(capsys, 11, rows, f"; cli_report_bytes_identical={same}")
    assert same and ok
