"""Acceptance gate: every criterion at its stated tolerance, one line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
pass/fail lines; the same checks back the ``opemeso selftest`` subcommand.
"""

import pytest

from opemeso.acceptance import CRITERIA


@pytest.mark.parametrize(
    "number,description,fn", CRITERIA, ids=[f"criterion_{c[0]:02d}" for c in CRITERIA]
)
def test_criterion(number, description, fn):
    ok, detail = fn()
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] criterion {number:2d} ({description}): {detail}")
    assert ok, f"criterion {number} ({description}): {detail}"
