"""Mirror-descent IRL loop pieces for tabular policies.

Tabular policies are plain ``(S, A)`` arrays whose rows lie on the clamped
simplex; dual tables are ``(S, A)`` arrays of rewards.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .bregman import (
    EPS_MIN,
    bounds,
    bregman_div,
    centered,
    grad_omega,
    grad_omega_star,
    is_feasible,
    omega,
)
from .errors import DomainError

CSV_COLUMNS = ("t", "eta", "d_agent_expert", "d_ref_expert", "regret", "clamped_flag")


def uniform_policy(num_states, num_actions):
    return np.full((num_states, num_actions), 1.0 / num_actions)


def _rows(p):
    p = np.asarray(p, dtype=float)
    return p[None, :] if p.ndim == 1 else p


def md_step_tabular(pi_t, pi_bar, eta, reg, eps=EPS_MIN, return_info=False):
    """One MD step: ``grad Omega(pi') = eta grad Omega(pi_bar) + (1 - eta) grad Omega(pi_t)``.

    The dual point is mapped back with ``grad_omega_star`` on the clamped
    simplex, which is the Bregman projection of the unconstrained step.  For
    ``eta > 1`` the extrapolated dual point may call for entries outside the
    clamp; those land on the bound and ``info["clamped"]`` is set.
    """
    pi_t = np.asarray(pi_t, dtype=float)
    pi_bar = np.asarray(pi_bar, dtype=float)
    if pi_t.shape != pi_bar.shape:
        raise ValueError(f"policy shapes differ: {pi_t.shape} vs {pi_bar.shape}")
    if eta < 0:
        raise ValueError("step size must be nonnegative")
    if eta == 0:
        out = pi_t.copy()
    elif eta == 1 and is_feasible(pi_bar, eps):
        out = pi_bar.copy()
    else:
        y = (1.0 - eta) * grad_omega(pi_t, reg) + eta * grad_omega(pi_bar, reg)
        out = grad_omega_star(y, reg, eps)
    lo, hi = bounds(pi_t.shape[-1], eps)
    clamped = bool(np.any(out <= lo * (1 + 1e-9)) or np.any(out >= hi - 1e-12))
    if return_info:
        return out, {"clamped": clamped}
    return out


def dual_step_residual(pi_t, pi_bar, pi_next, eta, reg):
    """``max | eta (g(pi_t) - g(pi_bar)) - (g(pi_t) - g(pi_next)) |`` modulo constants."""
    gt, gb, gn = grad_omega(pi_t, reg), grad_omega(pi_bar, reg), grad_omega(pi_next, reg)
    return float(np.max(np.abs(centered(eta * (gt - gb) - (gt - gn)))))


def dual_distance(p, phat, reg):
    """Per-row Euclidean distance between dual points, constant direction removed."""
    diff = centered(grad_omega(p, reg) - grad_omega(phat, reg))
    return np.sqrt(np.sum(np.square(diff), axis=-1))


def horizon_for(gamma, tail=1e-6):
    """Smallest ``H`` with ``gamma**H <= tail``."""
    if gamma <= 0.0:
        return 1
    if not gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    return max(1, int(math.ceil(math.log(tail) / math.log(gamma))))


def trajectory_weights(tau, gamma, num_states, scale=1.0):
    """Discounted visit weights ``sum_i gamma^i [s_i = s]`` over the truncated trajectory."""
    tau = np.asarray(tau, dtype=int)[: horizon_for(gamma)]
    w = np.zeros(num_states)
    np.add.at(w, tau, scale * np.power(gamma, np.arange(tau.size)))
    return w


def temporal_cost(pi, pi_bar, tau, gamma, reg):
    """``sum_i gamma^i D(pi(.|s_i) || pi_bar(.|s_i))`` truncated at ``horizon_for(gamma)``."""
    pi, pi_bar = _rows(pi), _rows(pi_bar)
    w = trajectory_weights(tau, gamma, pi.shape[0])
    return float(w @ bregman_div(pi, pi_bar, reg))


def comparator_from_duals(dual_sum, weight, reg, fallback=None):
    """``grad_omega_star`` of the weighted dual average; unvisited states use ``fallback``."""
    dual_sum = _rows(dual_sum)
    weight = np.asarray(weight, dtype=float)
    safe = np.where(weight > 0, weight, 1.0)[:, None]
    out = grad_omega_star(dual_sum / safe, reg)
    if fallback is None:
        fallback = np.full_like(out, 1.0 / out.shape[1])
    return np.where((weight > 0)[:, None], out, _rows(fallback))


def regret(history, reg, gamma=0.0, comparator=None):
    """Average realized temporal cost minus the comparator's average cost.

    ``history`` holds ``(pi_i, pi_bar_i, tau_i)`` triples.  Without an
    explicit comparator the infimum is taken over all tabular policies: the
    weighted cost is ``W Omega(pi) - <S_g, pi> + const`` per state, minimized
    by ``grad_omega_star(S_g / W)``.
    """
    if not history:
        raise ValueError("regret needs a nonempty history")
    pis = [_rows(h[0]) for h in history]
    num_states = pis[0].shape[0]
    realized = 0.0
    weights = []
    for (pi, pi_bar, tau), P in zip(history, pis):
        w = trajectory_weights(tau, gamma, num_states)
        weights.append(w)
        realized += float(w @ bregman_div(P, _rows(pi_bar), reg))
    if comparator is None:
        S_g = sum(w[:, None] * grad_omega(_rows(h[1]), reg) for w, h in zip(weights, history))
        comparator = comparator_from_duals(S_g, sum(weights), reg)
    comparator = _rows(comparator)
    best = sum(float(w @ bregman_div(comparator, _rows(h[1]), reg)) for w, h in zip(weights, history))
    return (realized - best) / len(history)


class RegretTracker:
    """Running regret in O(S A) per round using weighted sufficient statistics.

    For a fixed policy ``pi`` the accumulated cost per state is
    ``W Omega(pi) - <S_g, pi> + S_c`` where ``S_g = sum w g(pi_bar)`` and
    ``S_c = sum w (<g(pi_bar), pi_bar> - Omega(pi_bar))``.
    """

    def __init__(self, num_states, num_actions, reg, gamma=0.0, comparator=None):
        self.reg = reg
        self.gamma = gamma
        self.W = np.zeros(num_states)
        self.S_g = np.zeros((num_states, num_actions))
        self.S_c = np.zeros(num_states)
        self.realized = 0.0
        self.rounds = 0
        self.fixed = None if comparator is None else _rows(comparator)

    def add(self, pi, pi_bar, trajectories):
        """``trajectories`` is a list of ``(tau, scale)`` pairs making up one round."""
        pi, pi_bar = _rows(pi), _rows(pi_bar)
        w = np.zeros(self.W.size)
        for tau, scale in trajectories:
            w += trajectory_weights(tau, self.gamma, self.W.size, scale)
        g = grad_omega(pi_bar, self.reg)
        self.realized += float(w @ bregman_div(pi, pi_bar, self.reg))
        self.W += w
        self.S_g += w[:, None] * g
        self.S_c += w * (np.sum(g * pi_bar, axis=1) - omega(pi_bar, self.reg))
        self.rounds += 1

    def comparator(self):
        if self.fixed is not None:
            return self.fixed
        return comparator_from_duals(self.S_g, self.W, self.reg)

    def comparator_cost(self):
        c = self.comparator()
        per_state = self.W * omega(c, self.reg) - np.sum(self.S_g * c, axis=1) + self.S_c
        return float(np.sum(per_state))

    def value(self):
        if self.rounds == 0:
            raise ValueError("no rounds recorded")
        return (self.realized - self.comparator_cost()) / self.rounds


def visitation_density(mdp, pi, gamma=None):
    """Solve ``(I - gamma P_pi^T) rho = (1 - gamma) mu0``."""
    gamma = mdp.gamma if gamma is None else gamma
    pi = _rows(pi)
    P_pi = np.einsum("sa,sat->st", pi, mdp.P)
    n = P_pi.shape[0]
    M = np.eye(n) - gamma * P_pi.T
    rhs = (1.0 - gamma) * mdp.mu0
    try:
        rho = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise DomainError("visitation system is singular") from exc
    return rho


def empirical_visitation(mdp, pi, num_steps, rng, gamma=None, chains=1000, burn_in=200):
    """State frequencies of the chain that resets to ``mu0`` with probability ``1 - gamma``.

    That chain's stationary law is the discounted visitation density.
    """
    gamma = mdp.gamma if gamma is None else gamma
    pi = _rows(pi)
    S = pi.shape[0]
    P_pi = np.einsum("sa,sat->st", pi, mdp.P)
    cum = np.cumsum(P_pi, axis=1)
    cum[:, -1] = 1.0
    mu_cum = np.cumsum(mdp.mu0)
    mu_cum[-1] = 1.0
    steps = int(math.ceil(num_steps / chains))
    state = np.searchsorted(mu_cum, rng.random(chains), side="right")
    counts = np.zeros(S)
    for i in range(burn_in + steps):
        reset = rng.random(chains) >= gamma
        u = rng.random(chains)
        nxt = (u[:, None] > cum[state]).sum(axis=1)
        fresh = np.searchsorted(mu_cum, rng.random(chains), side="right")
        state = np.where(reset, fresh, np.minimum(nxt, S - 1))
        if i >= burn_in:
            counts += np.bincount(state, minlength=S)
    return counts / counts.sum()


def psi_lambda_reward(psi, rho_e, rho_theta, lam, floor=1e-12, clamp=True):
    """``lam psi(s, a) + log(rho_e(s) / rho_theta(s))``."""
    rho_e = np.asarray(rho_e, dtype=float)
    rho_theta = np.asarray(rho_theta, dtype=float)
    if clamp:
        rho_e = np.maximum(rho_e, floor)
        rho_theta = np.maximum(rho_theta, floor)
    elif np.any(rho_e <= 0) or np.any(rho_theta <= 0):
        raise DomainError("visitation densities must be positive for the log ratio")
    return lam * np.asarray(psi, dtype=float) + np.log(rho_e / rho_theta)[:, None]


class MovingMeanNormalizer:
    """Subtract an exponential moving mean; the mean starts at the first value."""

    def __init__(self, momentum=0.99):
        if not 0.0 <= momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        self.momentum = momentum
        self.mean = None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.mean is None:
            self.mean = x.copy()
        else:
            self.mean = self.momentum * self.mean + (1.0 - self.momentum) * x
        return x - self.mean


def normalize_rewards(values, momentum=0.99):
    norm = MovingMeanNormalizer(momentum)
    return np.array([norm(v) for v in values])


def exact_regularized_rl(psi, reg):
    """Per-state maximizer of ``<pi, psi> - Omega(pi)``."""
    return grad_omega_star(_rows(psi), reg)


def mdairl_loss(pi_phi, pi_nu, pi_theta, eta, state_weights, reg):
    """``sum_s w_s [eta D(phi || nu) + (1 - eta) D(phi || theta)]``."""
    w = np.asarray(state_weights, dtype=float)
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("state weights must be nonnegative and sum to 1")
    phi, nu, th = _rows(pi_phi), _rows(pi_nu), _rows(pi_theta)
    per_state = eta * bregman_div(phi, nu, reg) + (1.0 - eta) * bregman_div(phi, th, reg)
    return float(w @ per_state)


def mdairl_minimizer(pi_nu, pi_theta, eta, reg, eps=EPS_MIN):
    """Exact per-state minimizer of the MD-AIRL loss for ``0 <= eta <= 1``.

    Stationarity of the loss in ``phi`` reads ``g(phi) = eta g(nu) + (1 - eta) g(theta) + c``;
    the clamped solution comes from the multiplier search in ``grad_omega_star``.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError("the loss is convex in phi only for eta in [0, 1]")
    nu, th = _rows(pi_nu), _rows(pi_theta)
    return grad_omega_star(eta * grad_omega(nu, reg) + (1.0 - eta) * grad_omega(th, reg), reg, eps)


@dataclass
class RunRecord:
    t: int
    eta: float
    d_agent_expert: float
    d_ref_expert: float
    regret: float
    aux: dict = field(default_factory=dict)

    def row(self):
        return [self.t, self.eta, self.d_agent_expert, self.d_ref_expert, self.regret,
                int(bool(self.aux.get("clamped", 0)))]


def _cell(v):
    return str(v) if isinstance(v, (int, np.integer)) else repr(float(v))


def write_records_csv(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([_cell(v) for v in r.row()])


def read_records_csv(path):
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(RunRecord(int(row["t"]), float(row["eta"]), float(row["d_agent_expert"]),
                                 float(row["d_ref_expert"]), float(row["regret"]),
                                 {"clamped": int(row["clamped_flag"])}))
    return out
