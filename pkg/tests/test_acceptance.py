"""Acceptance criteria: one PASS/FAIL line per criterion.

Run as ``pytest tests/test_acceptance.py -s`` or ``python3 tests/test_acceptance.py``.
"""
from __future__ import annotations

import sys

import pytest

from impersonation import checks

CRITERIA = [
    ("bound_over_corpus", checks.check_bound_corpus),
    ("query_budget", checks.check_budget),
    ("conditional_entropy_monotone", checks.check_monotone),
    ("telescoping_cmi_sums", checks.check_telescoping),
    ("pinsker_and_araki_lieb", checks.check_pinsker_araki),
    ("hybrid_ladder", checks.check_ladder),
    ("trigger_separation", checks.check_trigger),
    ("authentication_forgery", checks.check_auth),
    ("money_cloning", checks.check_money),
    ("sweep_determinism", checks.check_determinism),
]


@pytest.mark.slow
@pytest.mark.parametrize("fn", [fn for _, fn in CRITERIA], ids=[name for name, _ in CRITERIA])
def test_criterion(fn, capsys):
    result = fn()
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.detail


if __name__ == "__main__":
    results = checks.run_all()
    sys.exit(0 if all(r.passed for r in results) else 1)
