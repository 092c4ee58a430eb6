import math

import numpy as np
import pytest

from mdirl.bregman import Regularizer
from mdirl.errors import DomainError, InadmissibleStepError
from mdirl.gaussian import (
    SIGMA_MAX,
    SIGMA_MIN,
    GaussianPolicyParams,
    LdlCovariance,
    NaturalParams,
    bregman_div_gaussian,
    cov_compose,
    cov_invert,
    cov_logdet,
    div_grad_flat,
    from_natural,
    interaction_integral,
    kl_gaussian,
    ldl_decompose,
    log_partition,
    md_objective,
    md_update_gaussian,
    natural_params,
    psi_gaussian,
    sample_action,
    shannon_entropy_gaussian,
    tsallis_entropy_gaussian,
)

SHANNON = Regularizer("shannon")
TS2 = Regularizer("tsallis", 2.0, 1.0)
TS15 = Regularizer("tsallis", 1.5, 1.0)
STD1 = GaussianPolicyParams(np.zeros(1))


def rand_gauss(rng, d, mean_scale=1.0):
    return GaussianPolicyParams(rng.normal(size=d) * mean_scale,
                                LdlCovariance(rng.normal(size=d * (d - 1) // 2) * 0.5,
                                              rng.uniform(np.log(0.3), np.log(1.5), d)))


def test_ldl_examples():
    eye = LdlCovariance.identity(3)
    np.testing.assert_array_equal(cov_compose(eye), np.eye(3))
    np.testing.assert_array_equal(cov_invert(eye), np.eye(3))
    assert cov_logdet(eye) == 0.0
    cov = LdlCovariance([0.5], np.log([1.0, 2.0]))
    np.testing.assert_allclose(cov_compose(cov), [[1.0, 0.5], [0.5, 4.25]], atol=1e-14)
    assert cov_logdet(cov) == pytest.approx(2 * math.log(2), abs=1e-12)


def test_ldl_round_trip_and_inverse():
    rng = np.random.default_rng(0)
    for _ in range(30):
        d = int(rng.integers(1, 7))
        cov = LdlCovariance(rng.normal(size=d * (d - 1) // 2), rng.uniform(-1.5, 0.5, d))
        S = cov_compose(cov)
        back = ldl_decompose(S)
        np.testing.assert_allclose(back.lower, cov.lower, atol=1e-9)
        np.testing.assert_allclose(back.log_sigma, cov.log_sigma, atol=1e-9)
        assert np.max(np.abs(S @ cov_invert(cov) - np.eye(d))) < 1e-9


def test_sigma_clipping_and_bad_matrices():
    cov = LdlCovariance([], np.log([1e-5]))
    assert cov.sigma[0] == pytest.approx(SIGMA_MIN)
    assert LdlCovariance([], np.log([50.0])).sigma[0] == pytest.approx(SIGMA_MAX)
    with pytest.raises(DomainError):
        ldl_decompose(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_flat_round_trip():
    g = rand_gauss(np.random.default_rng(1), 3)
    h = GaussianPolicyParams.from_flat(g.to_flat(), 3)
    np.testing.assert_array_equal(h.to_flat(), g.to_flat())


def test_log_partition_examples():
    assert log_partition(natural_params(STD1)) == pytest.approx(0.5 * math.log(2 * math.pi), abs=1e-12)
    assert log_partition(natural_params(GaussianPolicyParams([2.0]))) == pytest.approx(2 + 0.5 * math.log(2 * math.pi), abs=1e-12)
    assert log_partition(natural_params(GaussianPolicyParams(np.zeros(2)))) == pytest.approx(math.log(2 * math.pi), abs=1e-12)


def test_log_partition_matches_numeric_normalization():
    x = np.linspace(-20, 20, 400001)
    th = natural_params(GaussianPolicyParams([2.0], LdlCovariance([], [math.log(1.3)])))
    t1, t2 = float(th.theta1[0]), float(th.theta2[0, 0])
    z = np.trapezoid(np.exp(t1 * x + t2 * x * x), x)
    assert log_partition(th) == pytest.approx(math.log(z), abs=1e-9)


def test_natural_round_trip_and_inadmissible():
    g = rand_gauss(np.random.default_rng(2), 2)
    h = from_natural(natural_params(g))
    np.testing.assert_allclose(h.covariance(), g.covariance(), atol=1e-12)
    np.testing.assert_allclose(h.mean, g.mean, atol=1e-12)
    with pytest.raises(InadmissibleStepError):
        from_natural(NaturalParams(np.zeros(1), np.array([[0.5]])))


def test_interaction_integral_examples():
    rng = np.random.default_rng(3)
    assert interaction_integral(STD1, STD1, 1.0, 0.0) == pytest.approx(1.0, abs=1e-12)
    assert interaction_integral(STD1, STD1, 2.0, 0.0) == pytest.approx(1 / (2 * math.sqrt(math.pi)), abs=1e-12)
    assert interaction_integral(STD1, rand_gauss(rng, 1), 1.0, 0.0) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("q", [1.5, 2.0])
def test_interaction_integral_monte_carlo(q):
    rng = np.random.default_rng(4)
    worst = 0.0
    for i in range(20):
        d = 1 + i % 3
        # pairs with overlapping mass; a vanishing integral defeats any 1e5-sample estimate
        g, h = rand_gauss(rng, d, 0.5), rand_gauss(rng, d, 0.5)
        n = 100_000
        pick = rng.random(n) < 0.5
        xs = np.where(pick[:, None], sample_action(g, rng, n), sample_action(h, rng, n))
        pg, ph = g.density(xs), h.density(xs)
        # int pi pihat^(q-1), importance-sampled from the equal mixture
        mc = np.mean(pg * ph ** (q - 1.0) / (0.5 * (pg + ph)))
        worst = max(worst, abs(mc / interaction_integral(g, h, 1.0, q - 1.0) - 1.0))
    assert worst < 0.02


def test_tsallis_entropy_examples():
    assert tsallis_entropy_gaussian(STD1, 2.0) == pytest.approx(1 - 1 / math.sqrt(4 * math.pi), abs=1e-12)
    vals = [tsallis_entropy_gaussian(GaussianPolicyParams([0.0], LdlCovariance([], [math.log(s)])), 2.0)
            for s in (0.1, 0.5, 1.0, 1.9)]
    assert np.all(np.diff(vals) > 0)
    with pytest.raises(DomainError):
        tsallis_entropy_gaussian(STD1, 1.0)


def test_tsallis_entropy_q_to_one():
    g = GaussianPolicyParams([0.3], LdlCovariance([], [math.log(0.7)]))
    shannon = 0.5 * math.log(2 * math.pi * math.e * 0.49)
    assert shannon_entropy_gaussian(g) == pytest.approx(shannon, abs=1e-12)
    errs = [abs(tsallis_entropy_gaussian(g, 1 + d) - shannon) for d in (1e-2, 1e-3, 1e-4)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3


def test_tsallis_entropy_monte_carlo():
    rng = np.random.default_rng(5)
    for _ in range(5):
        g = rand_gauss(rng, 2)
        xs = sample_action(g, rng, 100_000)
        mc = np.mean((1 - g.density(xs) ** 0.5) / 0.5)
        assert abs(mc / tsallis_entropy_gaussian(g, 1.5) - 1) < 0.02


def test_bregman_div_gaussian_examples():
    assert bregman_div_gaussian(STD1, GaussianPolicyParams([1.0]), SHANNON) == pytest.approx(0.5, abs=1e-12)
    rng = np.random.default_rng(6)
    for reg in (SHANNON, TS15, TS2):
        for _ in range(50):
            g, h = rand_gauss(rng, 2), rand_gauss(rng, 2)
            assert bregman_div_gaussian(g, h, reg) >= -1e-9
            assert abs(bregman_div_gaussian(g, g, reg)) < 1e-12
    with pytest.raises(ValueError):
        bregman_div_gaussian(STD1, STD1, Regularizer("exp"))


def test_tsallis_div_far_target_monte_carlo():
    # pi = N(0,1), pihat = N(5, 0.8^2); defining integral for q=2 is int (p - phat)^2
    rng = np.random.default_rng(7)
    g = STD1
    h = GaussianPolicyParams([5.0], LdlCovariance([], [math.log(0.8)]))
    n = 100_000
    pick = rng.random(n) < 0.5
    xs = np.where(pick[:, None], sample_action(g, rng, n), sample_action(h, rng, n))
    pg, ph = g.density(xs), h.density(xs)
    mc = np.mean((pg - ph) ** 2 / (0.5 * (pg + ph)))
    assert abs(mc / bregman_div_gaussian(g, h, TS2) - 1) < 0.02


def test_tsallis_div_q_to_one_continuity():
    rng = np.random.default_rng(8)
    reg = Regularizer("tsallis", 1 + 1e-4, 1.0)
    for _ in range(20):
        g, h = rand_gauss(rng, 2, 0.5), rand_gauss(rng, 2, 0.5)
        kl = kl_gaussian(g, h)
        assert abs(bregman_div_gaussian(g, h, reg) - kl) <= 0.01 * kl


def test_div_gradient_matches_finite_differences():
    rng = np.random.default_rng(9)
    for reg in (SHANNON, TS2):
        g, h = rand_gauss(rng, 2), rand_gauss(rng, 2)
        val, grad = div_grad_flat(g, h, reg)
        assert val == pytest.approx(bregman_div_gaussian(g, h, reg), abs=1e-12)
        x = g.to_flat()
        fd = np.zeros_like(x)
        for i in range(x.size):
            e = np.zeros_like(x)
            e[i] = 1e-6
            fd[i] = (bregman_div_gaussian(GaussianPolicyParams.from_flat(x + e, 2), h, reg)
                     - bregman_div_gaussian(GaussianPolicyParams.from_flat(x - e, 2), h, reg)) / 2e-6
        np.testing.assert_allclose(grad, fd, atol=1e-6)


def test_psi_gaussian_examples():
    assert psi_gaussian(STD1, np.zeros(1)) == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-12)
    dens = 1 / math.sqrt(2 * math.pi)
    oracle = 2 * (dens - 1.0) + (1 - 1 / math.sqrt(4 * math.pi))
    assert psi_gaussian(STD1, np.zeros(1), 2.0, 1.0) == pytest.approx(oracle, abs=1e-8)
    assert psi_gaussian(STD1, np.zeros(1), 2.0) > psi_gaussian(STD1, np.ones(1), 2.0)
    g = rand_gauss(np.random.default_rng(10), 3)
    a = np.array([0.1, -0.4, 0.8])
    assert psi_gaussian(g, a) == pytest.approx(float(g.log_density(a)[0]), abs=1e-10)


def test_sample_action_moments_and_determinism():
    g = GaussianPolicyParams([1.0, -2.0], LdlCovariance([0.8], np.log([0.9, 0.5])))
    xs = sample_action(g, np.random.default_rng(11), 100_000)
    S = g.covariance()
    se = np.sqrt(np.diag(S) / xs.shape[0])
    assert np.all(np.abs(xs.mean(axis=0) - g.mean) < 3 * se)
    emp = np.cov(xs, rowvar=False)
    assert abs(emp[0, 1] / S[0, 1] - 1) < 0.05
    a = sample_action(g, np.random.default_rng(5), 10)
    b = sample_action(g, np.random.default_rng(5), 10)
    np.testing.assert_array_equal(a, b)
    tight = GaussianPolicyParams([3.0], LdlCovariance([], [math.log(SIGMA_MIN)]))
    assert abs(sample_action(tight, np.random.default_rng(0), 1000).mean() - 3.0) < 1e-3


def test_md_update_shannon_examples():
    cur, tgt = STD1, GaussianPolicyParams([4.0])
    mid = md_update_gaussian(cur, tgt, 0.5, SHANNON)
    assert mid.mean[0] == pytest.approx(2.0, abs=1e-12)
    assert mid.cov.sigma[0] == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(md_update_gaussian(cur, tgt, 1.0, SHANNON).mean, tgt.mean, atol=1e-12)
    np.testing.assert_allclose(md_update_gaussian(cur, tgt, 0.0, SHANNON).to_flat(), cur.to_flat(), atol=1e-9)


def test_md_update_shannon_inadmissible_extrapolation():
    cur = GaussianPolicyParams([0.0], LdlCovariance([], [math.log(0.1)]))
    tgt = GaussianPolicyParams([0.0], LdlCovariance([], [math.log(1.5)]))
    with pytest.raises(InadmissibleStepError):
        md_update_gaussian(cur, tgt, 3.0, SHANNON)


@pytest.mark.parametrize("method", ["lbfgsb", "gd"])
def test_md_update_tsallis_decreases_objective(method):
    rng = np.random.default_rng(12)
    for _ in range(5):
        cur, tgt = rand_gauss(rng, 2), rand_gauss(rng, 2)
        eta = float(rng.uniform(0.1, 0.9))
        out, info = md_update_gaussian(cur, tgt, eta, TS2, method=method, return_info=True)
        assert info["grad_norm"] < 1e-6
        g_out = md_objective(out, cur, tgt, eta, TS2)
        assert g_out <= min(md_objective(cur, cur, tgt, eta, TS2), md_objective(tgt, cur, tgt, eta, TS2)) + 1e-9
    assert md_update_gaussian(cur, tgt, 0.0, TS2) is cur
    with pytest.raises(ValueError):
        md_update_gaussian(cur, tgt, 0.5, TS2, method="newton")
