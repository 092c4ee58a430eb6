import numpy as np
import pytest

import mdirl.verify as verify
from mdirl.bregman import Regularizer


@pytest.fixture(scope="module")
def report():
    return verify.verify_suite(seed=0, instances=200)


def test_suite_passes(report):
    failed = [c.line() for c in report.checks if not c.passed and not c.informational]
    assert report.passed, failed
    assert str(report).endswith("ALL PASS")


def test_suite_is_deterministic(report):
    assert verify.verify_suite(seed=0, instances=200).lines() == report.lines()


def test_identity_residuals_small():
    res = verify.identity_residuals(Regularizer("exp"), np.random.default_rng(0), instances=100)
    assert max(res.values()) < verify.IDENTITY_TOL


@pytest.fixture
def broken_gradient(monkeypatch):
    real = verify.grad_omega

    def skewed(p, reg):
        g = real(p, reg)
        return g + 1e-3 * np.arange(np.shape(g)[-1]) * np.asarray(p)

    monkeypatch.setattr(verify, "grad_omega", skewed)


def test_suite_detects_broken_gradient(broken_gradient):
    rep = verify.verify_suite(seed=0, instances=50)
    assert not rep.passed
    assert any(line.startswith("FAIL") and "three_point" in line for line in rep.lines())
