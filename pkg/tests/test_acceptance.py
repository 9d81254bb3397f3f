"""The acceptance gate as a test module: every criterion runs at its stated
tolerance and prints one pass/fail line (same functions the ``verify`` CLI
subcommand drives)."""

import pytest

from manifold_cd import acceptance


@pytest.mark.parametrize(
    "criterion",
    acceptance.CRITERIA,
    ids=[f"criterion_{k}" for k in range(1, len(acceptance.CRITERIA) + 1)],
)
def test_acceptance_criterion(criterion):
    result = criterion()
    status = "PASS" if result.passed else "FAIL"
    print(f"[{status}] criterion {result.number}: {result.name} "
          f"({result.seconds:.1f}s) -- {result.detail}")
    assert result.passed, f"criterion {result.number} failed: {result.detail}"
