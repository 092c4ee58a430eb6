"""Problem generators and expert-estimation processes."""

import csv
from dataclasses import dataclass, field

import numpy as np

from .bregman import EPS_MIN, Regularizer, bregman_project, clamp_to_simplex, grad_omega_star, omega
from .gaussian import SIGMA_MIN, GaussianPolicyParams, LdlCovariance, ldl_decompose

_SHANNON = Regularizer("shannon")


def softmax(z):
    z = np.asarray(z, dtype=float)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True, eq=False)
class BanditSpec:
    num_actions: int = 100
    expert_logits: np.ndarray = None
    samples_per_round: int = 16
    smoothing: float = 0.1
    reference_lr: float = 0.2

    def __post_init__(self):
        if self.num_actions < 2:
            raise ValueError("a bandit needs at least two actions")
        if self.samples_per_round < 1:
            raise ValueError("samples_per_round must be >= 1")
        if self.smoothing < 0:
            raise ValueError("smoothing must be nonnegative")
        if not 0.0 <= self.reference_lr <= 1.0:
            raise ValueError("reference_lr must lie in [0, 1]")
        if self.expert_logits is not None:
            z = np.asarray(self.expert_logits, dtype=float).ravel()
            if z.size != self.num_actions or not np.all(np.isfinite(z)):
                raise ValueError("expert_logits must be finite with one entry per action")
            object.__setattr__(self, "expert_logits", z)

    @classmethod
    def random(cls, num_actions, rng, **kw):
        """Expert logits drawn i.i.d. from N(0, 1)."""
        return cls(num_actions, rng.standard_normal(num_actions), **kw)

    def expert_policy(self, eps=EPS_MIN):
        return clamp_to_simplex(softmax(self.expert_logits), eps)


def sample_expert_bandit(spec, rng):
    return rng.choice(spec.num_actions, size=spec.samples_per_round, p=softmax(spec.expert_logits))


def fit_reference_discrete(prev, batch, spec, lr=None, eps=EPS_MIN):
    """EMA of the Dirichlet-smoothed batch frequencies, kept on the clamped simplex."""
    batch = np.asarray(batch, dtype=int)
    if batch.size == 0:
        raise ValueError("batch must be nonempty")
    lr = spec.reference_lr if lr is None else lr
    prev = np.asarray(prev, dtype=float)
    n = prev.size
    counts = np.bincount(batch, minlength=n).astype(float)
    est = (counts + spec.smoothing) / (batch.size + n * spec.smoothing)
    out = (1.0 - lr) * prev + lr * est
    out = out / out.sum()
    return bregman_project(out, _SHANNON, eps)


@dataclass(frozen=True, eq=False)
class NoiseSpec:
    epsilon: float = 0.0

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError("noise epsilon must be nonnegative")


def corrupt_demos(actions, noise, rng):
    """Add i.i.d. ``N(0, eps^2 I)`` to every action."""
    eps = noise.epsilon if isinstance(noise, NoiseSpec) else float(noise)
    actions = np.asarray(actions, dtype=float)
    if eps == 0:
        return actions.copy()
    return actions + eps * rng.standard_normal(actions.shape)


def _default_expert_cov():
    return LdlCovariance([0.3], np.log([0.8, 0.6]))


@dataclass(frozen=True, eq=False)
class GaussianToySpec:
    dim: int = 2
    expert_mean: np.ndarray = field(default_factory=lambda: np.array([5.0, 3.0]))
    expert_cov: LdlCovariance = field(default_factory=_default_expert_cov)
    reference_lr: float = 0.5
    samples_per_round: int = 16

    def __post_init__(self):
        mean = np.asarray(self.expert_mean, dtype=float).ravel()
        object.__setattr__(self, "expert_mean", mean)
        if mean.size != self.dim or self.expert_cov.dim != self.dim:
            raise ValueError("expert dimensions do not match dim")
        if not np.sum(self.expert_cov.log_sigma) < 0:
            raise ValueError("expert covariance must have determinant < 1")
        if self.samples_per_round < 2:
            raise ValueError("samples_per_round must be >= 2 for covariance fits")
        if not 0.0 <= self.reference_lr <= 1.0:
            raise ValueError("reference_lr must lie in [0, 1]")

    def expert_policy(self):
        return GaussianPolicyParams(self.expert_mean, self.expert_cov)

    def agent_init(self):
        return GaussianPolicyParams(np.zeros(self.dim))


def fit_reference_gaussian(prev, batch, lr):
    """Move the mean and second moment toward the batch MLE by ``lr``.

    The mixed moments always give a PSD covariance; a degenerate result has
    its eigenvalues floored at ``SIGMA_MIN**2`` before refactoring.
    """
    batch = np.atleast_2d(np.asarray(batch, dtype=float))
    if batch.shape[0] < 2:
        raise ValueError("batch needs at least two actions")
    if lr == 0:
        return prev
    m = batch.mean(axis=0)
    C = np.cov(batch, rowvar=False, bias=True).reshape(prev.dim, prev.dim)
    mu0 = prev.mean
    M2 = (1.0 - lr) * (prev.covariance() + np.outer(mu0, mu0)) + lr * (C + np.outer(m, m))
    mean = (1.0 - lr) * mu0 + lr * m
    Sigma = M2 - np.outer(mean, mean)
    Sigma = 0.5 * (Sigma + Sigma.T)
    w, V = np.linalg.eigh(Sigma)
    if w.min() < SIGMA_MIN ** 2:
        Sigma = (V * np.maximum(w, SIGMA_MIN ** 2)) @ V.T
    return GaussianPolicyParams(mean, ldl_decompose(Sigma))


@dataclass(frozen=True, eq=False)
class TabularMdpSpec:
    P: np.ndarray
    mu0: np.ndarray
    gamma: float = 0.9

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        mu0 = np.asarray(self.mu0, dtype=float)
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise ValueError("P must have shape (S, A, S)")
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=2) - 1.0)) > 1e-12:
            raise ValueError("transition rows must be distributions")
        if mu0.shape != (P.shape[0],) or abs(mu0.sum() - 1.0) > 1e-12 or np.any(mu0 < 0):
            raise ValueError("mu0 must be a distribution over states")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "mu0", mu0)

    @property
    def num_states(self):
        return self.P.shape[0]

    @property
    def num_actions(self):
        return self.P.shape[1]


# up, right, down, left
_MOVES = ((-1, 0), (0, 1), (1, 0), (0, -1))


def gridworld(size=5, slip=0.1, gamma=0.9, mu0=None):
    """Grid with 4 moves; with probability ``slip`` the move is uniform at random.

    Moves into a wall leave the state unchanged.  ``mu0`` defaults to uniform.
    """
    S = size * size
    P = np.zeros((S, 4, S))
    for s in range(S):
        r, c = divmod(s, size)
        dest = []
        for dr, dc in _MOVES:
            rr, cc = r + dr, c + dc
            dest.append(rr * size + cc if 0 <= rr < size and 0 <= cc < size else s)
        for a in range(4):
            P[s, a, dest[a]] += 1.0 - slip
            for b in range(4):
                P[s, a, dest[b]] += slip / 4.0
    mu0 = np.full(S, 1.0 / S) if mu0 is None else mu0
    return TabularMdpSpec(P, mu0, gamma)


def soft_optimal_policy(mdp, reward, reg=None, temperature=1.0, tol=1e-10, max_iter=10_000):
    """Regularized value iteration: ``pi(s) = grad_omega_star(Q(s) / temperature)``."""
    reg = _SHANNON if reg is None else reg
    S, A = mdp.num_states, mdp.num_actions
    r = np.broadcast_to(np.asarray(reward, dtype=float), (S, A))
    V = np.zeros(S)
    for _ in range(max_iter):
        Q = r + mdp.gamma * mdp.P @ V
        pi = grad_omega_star(Q / temperature, reg)
        V_new = np.sum(pi * Q, axis=1) - temperature * omega(pi, reg)
        if np.max(np.abs(V_new - V)) < tol:
            V = V_new
            break
        V = V_new
    Q = r + mdp.gamma * mdp.P @ V
    return grad_omega_star(Q / temperature, reg)


def gridworld_expert(mdp, size=5, goal=None, temperature=0.5):
    """Soft-optimal expert for a unit reward on leaving the goal cell (bottom-right by default)."""
    goal = size * size - 1 if goal is None else goal
    reward = np.zeros((mdp.num_states, mdp.num_actions))
    reward[goal, :] = 1.0
    return soft_optimal_policy(mdp, reward, temperature=temperature)


def rollout(mdp, pi, horizon, rng, s0=None):
    """State trajectory of length ``horizon + 1`` starting from ``s0`` or ``mu0``."""
    pi = np.asarray(pi, dtype=float)
    s = rng.choice(mdp.num_states, p=mdp.mu0) if s0 is None else int(s0)
    states = [s]
    for _ in range(horizon):
        a = rng.choice(mdp.num_actions, p=pi[s])
        s = rng.choice(mdp.num_states, p=mdp.P[s, a])
        states.append(s)
    return np.array(states, dtype=int)


def rollout_pairs(mdp, pi, horizon, rng, s0=None):
    """Like :func:`rollout` but also returns the actions taken."""
    pi = np.asarray(pi, dtype=float)
    s = rng.choice(mdp.num_states, p=mdp.mu0) if s0 is None else int(s0)
    states, actions = [], []
    for _ in range(horizon):
        a = rng.choice(mdp.num_actions, p=pi[s])
        states.append(s)
        actions.append(a)
        s = rng.choice(mdp.num_states, p=mdp.P[s, a])
    return np.array(states, dtype=int), np.array(actions, dtype=int)


def write_demos_csv(path, episodes):
    """``episodes`` is a list of action arrays; one action per row, tagged by episode."""
    first = np.atleast_1d(np.asarray(episodes[0][0])) if len(episodes) and len(episodes[0]) else np.zeros(1)
    width = first.size
    header = ["episode"] + ([f"a{i}" for i in range(width)] if width > 1 else ["action"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for ep, acts in enumerate(episodes):
            for a in acts:
                w.writerow([ep] + [repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)
                                   for x in np.atleast_1d(a)])


def read_demos_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    episodes = {}
    for row in rows:
        vals = np.array([float(x) for x in row[1:]])
        episodes.setdefault(int(row[0]), []).append(vals if len(header) > 2 else vals[0])
    return [np.array(episodes[k]) for k in sorted(episodes)]
