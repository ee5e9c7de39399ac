"""Tests for the deterministic property suite behind `conv-rl check`."""

import logging
import math

from src.services.checks import CheckResult, check_names, run_checks


def test_suite_covers_all_property_groups():
    """Every property group has a registered check."""
    assert check_names() == [
        "partition identity",
        "equivariance chain",
        "gradient check",
        "KS linear dispersion",
        "Taylor-Green decay",
        "Keller-Segel steady state",
        "buffer growth per step",
        "target copy at tau = 1",
        "checkpoint round trip",
        "seed determinism",
    ]


def test_all_checks_pass(caplog):
    """The suite passes at the nominal tolerances and logs one line per check."""
    with caplog.at_level(logging.INFO, logger="src.services.checks"):
        results = run_checks(1.0)

    failed = [(r.name, r.error, r.tolerance) for r in results if not r.passed]
    assert not failed
    assert len([r for r in caplog.records if r.message.startswith("Check ")]) == len(results)


def test_non_finite_error_never_passes():
    """NaN errors fail even against an infinite tolerance."""
    assert not CheckResult("nan", math.nan, math.inf).passed
    assert CheckResult("exact", 0.0, 0.0).passed
    assert not CheckResult("loose", 1e-3, 1e-4).passed
