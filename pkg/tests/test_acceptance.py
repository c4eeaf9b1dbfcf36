"""Acceptance suite: every criterion at its stated tolerance and time budget.

Run with ``pytest tests/test_acceptance.py`` (a one-line verdict per criterion
is printed in the terminal summary) or directly with
``python tests/test_acceptance.py``.
"""

import sys

import pytest

from pqsingular.acceptance import CRITERIA, run_all

RESULTS = {}


@pytest.mark.parametrize("number", range(1, len(CRITERIA) + 1), ids=lambda k: f"criterion_{k}")
def test_criterion(number):
    result = CRITERIA[number - 1]()
    RESULTS[number] = result
    assert result.passed, f"{result.line()}\n{result.details}"


def main() -> int:
    results = run_all()
    for r in results:
        print(r.line())
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
