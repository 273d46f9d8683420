"""Acceptance checks against published reference values.

Each test prints one ``[PASS]``/``[FAIL]`` line (visible in ``pytest -v``
output) and asserts the criterion with its published tolerance.  Run
``python3 tests/test_acceptance.py`` for just the summary lines.
"""

import sys

import pytest

from ndsim.anchors import AnchorContext, run_anchor

CRITERIA = [
    ("1-equal-duty", "equal duty cycle for L=5 s, omega=40 us is 0.28 % +- 0.01 pp"),
    ("2-worst-case", "LOW_POWER worst case at T_a0=100 ms is 4718 ms"),
    ("3-latency-sweep", "LOW_POWER latency sweep maxima and censoring"),
    ("4-low-latency-bound", "LOW_LATENCY pair discovered within 110 ms + omega"),
    ("5-crowd", "100-device crowd success within 10 s"),
    ("6-generic-crowd", "75-device periodic-interval crowd failure, k=1 and k=4"),
    ("7-energy", "battery impact ranges for nRF52832 and BLE112"),
    ("8-wearable", "200 mAh wearable runtime"),
    ("9-distance", "body shadowing and tissue table"),
    ("10-properties", "determinism, bound conformance, collision (de)correlation, round trip"),
]

CTX = AnchorContext(seed=0, workers=1)


def _report(res, desc):
    scalars = {k: v for k, v in res.measured.items() if not isinstance(v, dict)}
    return f"{res.line()}  ({desc}; measured {scalars})"


@pytest.mark.parametrize("anchor_id, desc", CRITERIA, ids=[c[0] for c in CRITERIA])
def test_criterion(anchor_id, desc, capsys):
    res = run_anchor(anchor_id, CTX)
    with capsys.disabled():
        print("\n" + _report(res, desc))
    assert res.passed, res.line()


if __name__ == "__main__":
    failed = 0
    for anchor_id, desc in CRITERIA:
        res = run_anchor(anchor_id, CTX)
        failed += not res.passed
        print(_report(res, desc), flush=True)
    sys.exit(1 if failed else 0)
