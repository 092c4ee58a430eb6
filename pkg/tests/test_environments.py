import numpy as np
import pytest

from mdirl.bregman import is_feasible
from mdirl.environments import (
    BanditSpec,
    GaussianToySpec,
    NoiseSpec,
    corrupt_demos,
    fit_reference_discrete,
    fit_reference_gaussian,
    gridworld,
    gridworld_expert,
    read_demos_csv,
    rollout,
    rollout_pairs,
    sample_expert_bandit,
    softmax,
    write_demos_csv,
)
from mdirl.gaussian import SIGMA_MIN, GaussianPolicyParams


def test_bandit_sampling_matches_expert():
    rng = np.random.default_rng(0)
    spec = BanditSpec.random(5, rng, samples_per_round=4000)
    draws = sample_expert_bandit(spec, rng)
    freq = np.bincount(draws, minlength=5) / draws.size
    assert np.max(np.abs(freq - softmax(spec.expert_logits))) < 0.03
    assert is_feasible(spec.expert_policy())


@pytest.mark.parametrize("kw", [dict(num_actions=1), dict(samples_per_round=0), dict(smoothing=-1.0),
                                dict(reference_lr=1.5)])
def test_bandit_spec_validation(kw):
    base = dict(num_actions=3, expert_logits=np.zeros(3))
    base.update(kw)
    if base["num_actions"] != 3:
        base["expert_logits"] = None
    with pytest.raises(ValueError):
        BanditSpec(**base)


def test_fit_reference_discrete():
    spec = BanditSpec(3, np.zeros(3), smoothing=1.0)
    prev = np.array([0.2, 0.3, 0.5])
    np.testing.assert_array_equal(fit_reference_discrete(prev, [0, 1], spec, lr=0.0), prev)
    # lr 1 returns the smoothed frequencies (2+1, 0+1, 1+1) / 6
    np.testing.assert_allclose(fit_reference_discrete(prev, [0, 0, 2], spec, lr=1.0), [0.5, 1 / 6, 1 / 3])
    out = fit_reference_discrete(prev, [1] * 50, BanditSpec(3, np.zeros(3), smoothing=0.0), lr=1.0)
    assert is_feasible(out) and out[0] < 2e-6 and out[1] > 1 - 4e-6
    with pytest.raises(ValueError):
        fit_reference_discrete(prev, [], spec)


def test_fit_reference_gaussian():
    prev = GaussianPolicyParams(np.zeros(2))
    rng = np.random.default_rng(1)
    batch = rng.normal(size=(8, 2))
    assert fit_reference_gaussian(prev, batch, 0.0) is prev
    full = fit_reference_gaussian(prev, batch, 1.0)
    np.testing.assert_allclose(full.mean, batch.mean(axis=0))
    np.testing.assert_allclose(full.covariance(), np.cov(batch, rowvar=False, bias=True), atol=1e-10)
    same = fit_reference_gaussian(prev, np.tile([1.0, 2.0], (5, 1)), 1.0)
    np.testing.assert_allclose(same.mean, [1.0, 2.0])
    np.testing.assert_allclose(np.linalg.eigvalsh(same.covariance()), SIGMA_MIN ** 2, rtol=1e-6)
    with pytest.raises(ValueError):
        fit_reference_gaussian(prev, np.zeros((1, 2)), 0.5)


def test_corrupt_demos_variance():
    rng = np.random.default_rng(2)
    acts = np.zeros((100_000, 2))
    noisy = corrupt_demos(acts, NoiseSpec(0.5), rng)
    np.testing.assert_allclose(noisy.var(axis=0), 0.25, rtol=0.05)
    clean = corrupt_demos(acts, NoiseSpec(0.0), rng)
    np.testing.assert_array_equal(clean, acts)
    assert clean is not acts
    with pytest.raises(ValueError):
        NoiseSpec(-0.1)


def test_gaussian_toy_spec():
    spec = GaussianToySpec()
    assert np.linalg.det(spec.expert_policy().covariance()) < 1
    np.testing.assert_array_equal(spec.agent_init().covariance(), np.eye(2))
    with pytest.raises(ValueError):
        GaussianToySpec(expert_mean=np.zeros(3))
    with pytest.raises(ValueError):
        GaussianToySpec(samples_per_round=1)


def test_gridworld_rows_and_walls():
    mdp = gridworld(4, slip=0.2)
    np.testing.assert_allclose(mdp.P.sum(axis=2), 1.0, atol=1e-12)
    # moving up from the top-left corner hits the wall
    assert mdp.P[0, 0, 0] == pytest.approx(0.8 + 0.2 * 2 / 4)
    assert mdp.P[0, 1, 1] == pytest.approx(0.8 + 0.2 / 4)
    exact = gridworld(3, slip=0.0)
    assert exact.P[4, 2, 7] == 1.0


def test_gridworld_expert_prefers_goal():
    mdp = gridworld(3, slip=0.0)
    pi = gridworld_expert(mdp, size=3, temperature=0.1)
    np.testing.assert_allclose(pi.sum(axis=1), 1.0)
    # from the cell left of the goal, moving right is best
    assert np.argmax(pi[7]) == 1
    assert np.argmax(pi[5]) == 2


def test_rollout():
    mdp = gridworld(3)
    pi = np.full((9, 4), 0.25)
    rng = np.random.default_rng(3)
    np.testing.assert_array_equal(rollout(mdp, pi, 0, rng, s0=4), [4])
    traj = rollout(mdp, pi, 30, rng)
    assert traj.shape == (31,) and traj.min() >= 0 and traj.max() < 9
    s, a = rollout_pairs(mdp, pi, 10, rng, s0=0)
    assert s.shape == a.shape == (10,) and s[0] == 0
    r1 = rollout(mdp, pi, 20, np.random.default_rng(5))
    r2 = rollout(mdp, pi, 20, np.random.default_rng(5))
    np.testing.assert_array_equal(r1, r2)


def test_demos_csv_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    eps = [rng.normal(size=(3, 2)), rng.normal(size=(2, 2))]
    write_demos_csv(tmp_path / "g.csv", eps)
    back = read_demos_csv(tmp_path / "g.csv")
    assert len(back) == 2
    for a, b in zip(eps, back):
        np.testing.assert_array_equal(a, b)
    write_demos_csv(tmp_path / "d.csv", [np.array([1, 2, 3]), np.array([0])])
    back = read_demos_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(back[0], [1, 2, 3])
    np.testing.assert_array_equal(back[1], [0])
