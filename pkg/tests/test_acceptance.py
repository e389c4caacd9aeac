"""Full-scale acceptance run: one test per criterion, tolerances as stated.

Each test prints its own PASS/FAIL line (visible with ``pytest -s`` or in
the failure report), so the suite doubles as the acceptance report.
The same checks power ``logistic-chain validate``.
"""

import pytest

from logistic_chain import validation


def _run(check):
    result = check(quick=False)
    status = "PASS" if result.passed else "FAIL"
    print(f"ACCEPTANCE {result.name}: {status} ({result.elapsed:.1f}s)")
    for line in result.lines:
        print(f"    {line}")
    assert result.passed, result.detail


def test_criterion_1_exactness_oracle():
    _run(validation.check_exactness_oracle)


def test_criterion_2_hypergeometric_identity():
    _run(validation.check_hypergeom_identity)


def test_criterion_3_theorem1_regimes():
    _run(validation.check_theorem1_regimes)


def test_criterion_4_local_clt():
    _run(validation.check_local_clt)


def test_criterion_5_large_deviations():
    _run(validation.check_large_deviations)


def test_criterion_6_simulator_correctness():
    _run(validation.check_simulator)


def test_criterion_7_mean_field_reduction():
    _run(validation.check_mean_field_reduction)


def test_criterion_8_fluid_limit():
    _run(validation.check_fluid_limit)


def test_criterion_9_exit_times():
    _run(validation.check_exit_times)


def test_criterion_10_breiman_roots():
    _run(validation.check_breiman)
