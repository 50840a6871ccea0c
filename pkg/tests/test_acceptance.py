"""One test per acceptance criterion, each at its stated tolerance.

Every test prints a PASS/FAIL line, and the lines are collected in the
terminal summary under "acceptance criteria".
"""

import pytest

from tipbeam.acceptance import CHECKS

from conftest import ACCEPTANCE_LINES


@pytest.mark.parametrize("check", CHECKS, ids=[f"criterion_{c.number}" for c in CHECKS])
def test_criterion(check):
    result = check()
    line = result.line()
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert result.passed, line
