"""Acceptance battery at desk scale (n=1, N=128, d=3, T_end=1).

Each test exercises one criterion group at its stated tolerance and prints
one pass/fail line per check; run with `pytest tests/test_acceptance.py -v -s`
to watch them live. The same checks back the `crossdiff suite` command.
"""

import time

import pytest

from crossdiff.harness import (
    ExperimentConfig,
    SuiteContext,
    check_contraction,
    check_gradient_decay,
    check_kernel_scaling,
    check_lipschitz,
    check_maximal_regularity,
    check_negative_controls,
    check_norm_identities,
    check_partition_nonnegativity,
    check_spectral_exactness,
    check_stability,
)


@pytest.fixture(scope="module")
def ctx():
    return SuiteContext(ExperimentConfig())


def _assert_all(checks):
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"[{status}] {c.name}: {c.value:.6g} {c.op} {c.threshold:.6g}")
    failed = [c for c in checks if not c.passed]
    assert not failed, "failed checks:\n" + "\n".join(
        f"  {c.name}: {c.value:.6g} {c.op} {c.threshold:.6g}" for c in failed
    )


def test_criterion_01_kernel_scaling(ctx):
    _assert_all(check_kernel_scaling(ctx))


def test_criterion_02_spectral_exactness(ctx):
    _assert_all(check_spectral_exactness(ctx))


def test_criterion_03_partition_and_nonnegativity(ctx):
    _assert_all(check_partition_nonnegativity(ctx))


def test_criterion_04_contraction(ctx):
    _assert_all(check_contraction(ctx))


def test_criterion_05_stability(ctx):
    _assert_all(check_stability(ctx))


def test_criterion_06_gradient_decay(ctx):
    _assert_all(check_gradient_decay(ctx))


def test_criterion_07_maximal_regularity(ctx):
    start = time.perf_counter()
    checks = check_maximal_regularity(ctx)
    elapsed = time.perf_counter() - start
    print(f"[{'PASS' if elapsed < 300 else 'FAIL'}] maximal-regularity sweep runtime: "
          f"{elapsed:.1f}s < 300s")
    assert elapsed < 300.0
    _assert_all(checks)


def test_criterion_08_lipschitz_bound(ctx):
    _assert_all(check_lipschitz(ctx))


def test_criterion_09_norm_identities(ctx):
    _assert_all(check_norm_identities(ctx))


def test_criterion_10_negative_controls(ctx):
    _assert_all(check_negative_controls(ctx))
