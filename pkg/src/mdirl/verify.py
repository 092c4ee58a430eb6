"""Property checks over all modules with fixed seeds.

Every check returns a :class:`Check`; the report is deterministic for a
given seed.  ``sin`` identity checks are informational because that kernel
is only convex below ``SIN_PEAK``.
"""

from dataclasses import dataclass

import numpy as np

from .bregman import (
    EPS_MIN,
    Regularizer,
    bregman_div,
    bregman_project,
    clamp_to_simplex,
    convexity_diagnostic,
    grad_omega,
    grad_omega_star,
    omega,
    reward_operator_psi,
)
from .config import default_config, parse_config
from .engine import (
    RegretTracker,
    exact_regularized_rl,
    dual_step_residual,
    mdairl_minimizer,
    md_step_tabular,
    regret,
    visitation_density,
)
from .environments import BanditSpec, fit_reference_discrete, gridworld, gridworld_expert, sample_expert_bandit
from .gaussian import (
    GaussianPolicyParams,
    LdlCovariance,
    bregman_div_gaussian,
    cov_compose,
    cov_invert,
    cov_logdet,
    kl_gaussian,
    ldl_decompose,
    md_objective,
    md_update_gaussian,
)

IDENTITY_REGS = ("shannon", "tsallis:q=1.5,k=1.0", "tsallis:q=2.0,k=1.0", "exp", "cos", "sin")
IDENTITY_TOL = 1e-8


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    tol: float
    informational: bool = False

    def line(self):
        tag = "INFO" if self.informational else ("PASS" if self.passed else "FAIL")
        return f"{tag} {self.name}: {self.value:.3e} (tol {self.tol:.0e})"


@dataclass
class VerifyReport:
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks if not c.informational)

    def lines(self):
        return [c.line() for c in self.checks]

    def __str__(self):
        verdict = "ALL PASS" if self.passed else "FAILURES"
        return "\n".join(self.lines() + [verdict])


def random_simplex(rng, n, size=None, eps=EPS_MIN, x_max=1.0):
    """Dirichlet draws on the clamped simplex; rows above ``x_max`` are replaced by uniform."""
    rows = 1 if size is None else size
    alpha = rng.choice([0.5, 1.0, 3.0], size=(rows, 1))
    g = rng.gamma(np.broadcast_to(alpha, (rows, n)))
    p = clamp_to_simplex(g / g.sum(axis=1, keepdims=True), eps)
    if x_max < 1.0:
        p = np.where(p.max(axis=-1, keepdims=True) > x_max, 1.0 / n, p)
    return p[0] if size is None else p


def identity_residuals(reg, rng, instances=1000):
    """Largest residuals of the three-point, two-point, round-trip and shift checks.

    Instances are drawn with 2 to 7 actions and evaluated in row batches.
    """
    worst = dict(three_point=0.0, two_point=0.0, round_trip=0.0, shift=0.0, nonneg=0.0)
    x_max = 0.65 if reg.kind == "sin" else 1.0
    sizes = rng.integers(2, 8, size=instances)
    for n in np.unique(sizes):
        k = int(np.sum(sizes == n))
        a, b, c = (random_simplex(rng, n, k, x_max=x_max) for _ in range(3))
        ga, gb = grad_omega(a, reg), grad_omega(b, reg)
        lhs = np.sum((ga - gb) * (c - b), axis=1)
        rhs = bregman_div(c, b, reg) - bregman_div(c, a, reg) + bregman_div(b, a, reg)
        worst["three_point"] = max(worst["three_point"], float(np.max(np.abs(lhs - rhs))))
        two = bregman_div(a, b, reg) + bregman_div(b, a, reg) - np.sum((ga - gb) * (a - b), axis=1)
        worst["two_point"] = max(worst["two_point"], float(np.max(np.abs(two))))
        worst["nonneg"] = max(worst["nonneg"], -min(0.0, float(np.min(bregman_div(a, b, reg)))))
        rt = grad_omega_star(reward_operator_psi(a, reg), reg)
        worst["round_trip"] = max(worst["round_trip"], float(np.max(np.abs(rt - a))))
        y = rng.normal(size=(k, n)) * rng.choice([0.1, 1.0, 5.0], size=(k, 1))
        shift = rng.normal(size=(k, 1)) * 10.0
        d = grad_omega_star(y + shift, reg) - grad_omega_star(y, reg)
        worst["shift"] = max(worst["shift"], float(np.max(np.abs(d))))
    return worst


def _bregman_checks(rng, instances):
    out = []
    for text in IDENTITY_REGS:
        reg = Regularizer.parse(text)
        res = identity_residuals(reg, rng, instances)
        info = reg.kind == "sin"
        for key, val in res.items():
            tol = 1e-12 if key == "nonneg" else IDENTITY_TOL
            out.append(Check(f"bregman.{key}[{text}]", val < tol, val, tol, info))
        if info:
            p = random_simplex(rng, 3, size=200)
            ok, curv = convexity_diagnostic(p, reg)
            out.append(Check("bregman.sin_convexity_min_curvature", ok, curv, 0.0, True))
    # gradient vs central differences along simplex directions e_i - e_j
    reg_list = [Regularizer.parse(t) for t in IDENTITY_REGS[:-1]]
    worst_fd = 0.0
    for reg in reg_list:
        for _ in range(20):
            p = random_simplex(rng, 4)
            g = grad_omega(p, reg)
            for i in range(4):
                j = (i + 1) % 4
                h = 1e-4 * min(p[i], p[j])
                e = np.zeros(4)
                e[i], e[j] = h, -h
                fd = (omega(p + e, reg) - omega(p - e, reg)) / (2 * h)
                exact = g[i] - g[j]
                worst_fd = max(worst_fd, abs(fd - exact) / max(1.0, abs(exact)))
    out.append(Check("bregman.grad_fd_relative", worst_fd < 1e-5, worst_fd, 1e-5))
    kl = 0.0
    sh = Regularizer("shannon")
    for _ in range(100):
        p, q = random_simplex(rng, 5), random_simplex(rng, 5)
        kl = max(kl, abs(bregman_div(p, q, sh) - float(np.sum(p * np.log(p / q)))))
    out.append(Check("bregman.shannon_is_kl", kl < 1e-10, kl, 1e-10))
    return out


def _random_gauss(rng, d, mean_scale=2.0):
    return GaussianPolicyParams(rng.normal(size=d) * mean_scale,
                                LdlCovariance(rng.normal(size=d * (d - 1) // 2) * 0.5, rng.uniform(-1.0, 0.5, d)))


def _gaussian_checks(rng):
    out = []
    worst_inv = worst_det = worst_rt = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 9))
        cov = _random_gauss(rng, d).cov
        S = cov_compose(cov)
        worst_inv = max(worst_inv, float(np.max(np.abs(S @ cov_invert(cov) - np.eye(d)))))
        worst_det = max(worst_det, abs(cov_logdet(cov) - np.linalg.slogdet(S)[1]))
        back = ldl_decompose(S)
        worst_rt = max(worst_rt, float(np.max(np.abs(np.concatenate([back.lower - cov.lower,
                                                                      back.log_sigma - cov.log_sigma])))) if d > 0 else 0)
    out.append(Check("gaussian.compose_invert", worst_inv < 1e-9, worst_inv, 1e-9))
    out.append(Check("gaussian.logdet", worst_det < 1e-9, worst_det, 1e-9))
    out.append(Check("gaussian.ldl_round_trip", worst_rt < 1e-9, worst_rt, 1e-9))
    neg = ident = cont = 0.0
    for _ in range(50):
        d = int(rng.integers(1, 4))
        g, h = _random_gauss(rng, d), _random_gauss(rng, d)
        for q in (1.5, 2.0):
            reg = Regularizer("tsallis", q=q)
            neg = max(neg, -min(0.0, bregman_div_gaussian(g, h, reg)))
            ident = max(ident, abs(bregman_div_gaussian(g, g, reg)))
        # the O(q - 1) gap scales with the divergence itself; keep pairs moderate
        g, h = _random_gauss(rng, d, 0.5), _random_gauss(rng, d, 0.5)
        kl = kl_gaussian(g, h)
        near = bregman_div_gaussian(g, h, Regularizer("tsallis", q=1.0 + 1e-4))
        cont = max(cont, abs(near - kl) / max(kl, 1e-12))
    out.append(Check("gaussian.tsallis_nonneg", neg < 1e-9, neg, 1e-9))
    out.append(Check("gaussian.tsallis_identity", ident < 1e-9, ident, 1e-9))
    out.append(Check("gaussian.q_to_1_continuity", cont < 1e-2, cont, 1e-2))
    mono = 0.0
    for _ in range(5):
        g, h = _random_gauss(rng, 2), _random_gauss(rng, 2)
        for text in ("shannon", "tsallis:q=2.0,k=1.0"):
            reg = Regularizer.parse(text)
            eta = 0.3
            new = md_update_gaussian(g, h, eta, reg)
            best_end = min(md_objective(g, g, h, eta, reg), md_objective(h, g, h, eta, reg))
            mono = max(mono, md_objective(new, g, h, eta, reg) - best_end)
    out.append(Check("gaussian.md_step_monotone", mono <= 1e-9, max(mono, 0.0), 1e-9))
    return out


def _engine_checks(rng):
    out = []
    a1 = pull = rl = eq15 = 0.0
    for text in IDENTITY_REGS[:-1]:
        reg = Regularizer.parse(text)
        for _ in range(50):
            n = int(rng.integers(2, 7))
            pi, bar = random_simplex(rng, n, size=3), random_simplex(rng, n, size=3)
            eta = float(rng.uniform(0.05, 1.0))
            nxt, info = md_step_tabular(pi, bar, eta, reg, return_info=True)
            if not info["clamped"]:
                a1 = max(a1, dual_step_residual(pi, bar, nxt, eta, reg))
            pull = max(pull, float(np.max(bregman_div(nxt, bar, reg) - bregman_div(pi, bar, reg))))
            rl = max(rl, float(np.max(np.abs(exact_regularized_rl(reward_operator_psi(pi, reg), reg) - pi))))
            eq15 = max(eq15, float(np.max(np.abs(mdairl_minimizer(bar, pi, eta, reg) - nxt))))
    out.append(Check("engine.dual_step_identity", a1 < 1e-8, a1, 1e-8))
    out.append(Check("engine.monotone_target_pull", pull <= 1e-12, max(pull, 0.0), 1e-12))
    out.append(Check("engine.exact_rl_round_trip", rl < 1e-6, rl, 1e-6))
    out.append(Check("engine.eq15_minimizer", eq15 < 1e-8, eq15, 1e-8))

    reg = Regularizer("shannon")
    spec = BanditSpec.random(6, rng)
    ref = np.full(6, 1.0 / 6)
    pi = ref.copy()
    history = []
    tracker = RegretTracker(1, 6, reg)
    for t in range(1, 60):
        ref = fit_reference_discrete(ref, sample_expert_bandit(spec, rng), spec)
        history.append((pi, ref, [0]))
        tracker.add(pi, ref, [([0], 1.0)])
        pi = md_step_tabular(pi, ref, 1.0 / t, reg)
    diff = abs(tracker.value() - regret(history, reg))
    out.append(Check("engine.regret_tracker_vs_batch", diff < 1e-10, diff, 1e-10))

    mdp = gridworld()
    pe = gridworld_expert(mdp)
    rho = visitation_density(mdp, pe)
    P_pi = np.einsum("sa,sat->st", pe, mdp.P)
    res = float(np.max(np.abs(rho - (1 - mdp.gamma) * mdp.mu0 - mdp.gamma * P_pi.T @ rho)))
    out.append(Check("engine.visitation_residual", res < 1e-10, res, 1e-10))
    return out


def _misc_checks(rng):
    out = []
    bad = 0
    for _ in range(20):
        n = int(rng.integers(2, 50))
        spec = BanditSpec.random(n, rng)
        ref = np.full(n, 1.0 / n)
        for _ in range(5):
            ref = fit_reference_discrete(ref, sample_expert_bandit(spec, rng), spec)
            bad += int(abs(ref.sum() - 1) > 1e-12 or ref.min() < EPS_MIN - 1e-15)
    out.append(Check("environments.reference_valid", bad == 0, float(bad), 0.0))
    seq = []
    for _ in range(2):
        r = np.random.default_rng(11)
        spec = BanditSpec.random(10, r)
        seq.append(np.concatenate([sample_expert_bandit(spec, r) for _ in range(5)]))
    out.append(Check("environments.seed_determinism", bool(np.array_equal(*seq)), 0.0, 0.0))
    worst = 0
    for exp in ("bandit", "gaussian_toy", "mdp", "schedule_sweep"):
        cfg = default_config(exp)
        worst += int(parse_config(cfg.to_ini()) != cfg)
    out.append(Check("config.round_trip", worst == 0, float(worst), 0.0))
    proj = bregman_project(np.array([1 - 1e-9, 1e-9]), Regularizer("shannon"))
    err = float(np.max(np.abs(proj - np.array([1 - EPS_MIN, EPS_MIN]))))
    out.append(Check("bregman.project_clamp_boundary", err < 1e-12, err, 1e-12))
    return out


def verify_suite(seed=0, instances=1000):
    rng = np.random.default_rng(seed)
    checks = []
    checks += _bregman_checks(rng, instances)
    checks += _gaussian_checks(rng)
    checks += _engine_checks(rng)
    checks += _misc_checks(rng)
    return VerifyReport(checks)
