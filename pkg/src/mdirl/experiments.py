"""Seeded experiment runners, summaries and the schedule sweep."""

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .bregman import Regularizer, bregman_div, reward_operator_psi
from .config import ExperimentConfig
from .engine import (
    MovingMeanNormalizer,
    RegretTracker,
    RunRecord,
    exact_regularized_rl,
    horizon_for,
    mdairl_loss,
    md_step_tabular,
    psi_lambda_reward,
    uniform_policy,
    visitation_density,
    write_records_csv,
)
from .environments import (
    BanditSpec,
    GaussianToySpec,
    NoiseSpec,
    corrupt_demos,
    fit_reference_discrete,
    fit_reference_gaussian,
    gridworld,
    gridworld_expert,
    rollout,
    rollout_pairs,
    sample_expert_bandit,
)
from .diagnostics import convergence_diagnostics
from .errors import ConvergenceError, InadmissibleStepError, InsufficientDataError
from .gaussian import bregman_div_gaussian, md_update_gaussian, sample_action
from .schedules import StepSchedule


@dataclass
class SeedResult:
    seed: int
    records: list
    status: str = "ok"
    message: str = ""

    @property
    def final(self):
        return self.records[-1].d_agent_expert if self.records and self.status == "ok" else float("nan")

    @property
    def final_ref(self):
        return self.records[-1].d_ref_expert if self.records and self.status == "ok" else float("nan")


@dataclass
class ResultSummary:
    experiment: str
    regularizer: str
    schedule: str
    seeds: list
    finals: dict
    mean: float
    std: float
    baseline_finals: dict
    baseline_mean: float
    baseline_std: float
    baseline_delta: float
    statuses: dict
    scale: float = 1.0
    diagnostics: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    @property
    def admissible(self):
        return all(s == "ok" for s in self.statuses.values())


def _stats(values):
    v = np.asarray(values, dtype=float)
    if v.size == 0 or np.any(~np.isfinite(v)):
        return float("nan"), float("nan")
    return float(v.mean()), float(v.std())


def run_bandit(cfg, seed):
    reg = cfg.reg
    sched = cfg.step_schedule()
    expert_rng, sample_rng = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2)]
    spec = BanditSpec.random(cfg.num_actions, expert_rng, samples_per_round=cfg.samples_per_round,
                             smoothing=cfg.smoothing, reference_lr=cfg.reference_lr)
    pi_e = spec.expert_policy()
    pi = uniform_policy(1, cfg.num_actions)[0]
    ref = pi.copy()
    tracker = RegretTracker(1, cfg.num_actions, reg)
    records = []
    for t in range(1, cfg.total_steps + 1):
        eta = sched.eta(t)
        ref = fit_reference_discrete(ref, sample_expert_bandit(spec, sample_rng), spec)
        tracker.add(pi, ref, [((0,), 1.0)])
        pi, info = md_step_tabular(pi, ref, eta, reg, return_info=True)
        records.append(RunRecord(t, eta, float(bregman_div(pi, pi_e, reg)), float(bregman_div(ref, pi_e, reg)),
                                 tracker.value(), {"clamped": info["clamped"]}))
    return SeedResult(seed, records)


def run_gaussian_toy(cfg, seed, reg=None, schedule=None):
    reg = cfg.reg if reg is None else reg
    sched = cfg.step_schedule() if schedule is None else schedule
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    spec = GaussianToySpec(reference_lr=cfg.reference_lr, samples_per_round=cfg.samples_per_round)
    noise = NoiseSpec(cfg.noise_epsilon)
    expert = spec.expert_policy()
    pi = spec.agent_init()
    ref = spec.agent_init()
    realized = comparator = 0.0
    records = []
    for t in range(1, cfg.total_steps + 1):
        eta = sched.eta(t)
        batch = corrupt_demos(sample_action(expert, rng, spec.samples_per_round), noise, rng)
        ref = fit_reference_gaussian(ref, batch, spec.reference_lr)
        # the expert lies in the policy family, so it serves as the regret comparator
        realized += bregman_div_gaussian(pi, ref, reg)
        comparator += bregman_div_gaussian(expert, ref, reg)
        try:
            pi = md_update_gaussian(pi, ref, eta, reg)
        except InadmissibleStepError as exc:
            return SeedResult(seed, records, "inadmissible", str(exc))
        except ConvergenceError as exc:
            return SeedResult(seed, records, "nonconverged", str(exc))
        records.append(RunRecord(t, eta, bregman_div_gaussian(pi, expert, reg),
                                 bregman_div_gaussian(ref, expert, reg), (realized - comparator) / t, {}))
    return SeedResult(seed, records)


def run_mdp(cfg, seed):
    reg = cfg.reg
    sched = cfg.step_schedule()
    mdp = gridworld(cfg.grid_size, cfg.slip, cfg.gamma)
    S, A = mdp.num_states, mdp.num_actions
    pi_e = gridworld_expert(mdp, cfg.grid_size)
    rho_e = visitation_density(mdp, pi_e)
    demo_rng, agent_rng = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2)]
    spec = BanditSpec(A, samples_per_round=cfg.samples_per_round, smoothing=cfg.smoothing,
                      reference_lr=cfg.reference_lr)
    H = horizon_for(cfg.gamma)
    mix = cfg.mixing_ratio
    pi = uniform_policy(S, A)
    ref = uniform_policy(S, A)
    tracker = RegretTracker(S, A, reg, cfg.gamma)
    norm = MovingMeanNormalizer(cfg.momentum)
    records = []
    for t in range(1, cfg.total_steps + 1):
        eta = sched.eta(t)
        states, actions = rollout_pairs(mdp, pi_e, cfg.samples_per_round, demo_rng)
        for s in np.unique(states):
            ref[s] = fit_reference_discrete(ref[s], actions[states == s], spec)
        tau_agent = rollout(mdp, pi, H, agent_rng)
        tau_expert = rollout(mdp, pi_e, H, demo_rng)
        tracker.add(pi, ref, [(tau_agent, 1.0 - mix), (tau_expert, mix)])
        nxt, info = md_step_tabular(pi, ref, eta, reg, return_info=True)
        # reward for the agent: psi of the new iterate plus the exact density ratio
        rho_theta = visitation_density(mdp, nxt)
        reward = psi_lambda_reward(reward_operator_psi(nxt, reg), rho_e, rho_theta, cfg.lam)
        reward = reward - norm(reward.mean())
        new_pi = exact_regularized_rl(reward / cfg.lam, reg)
        weights = mix * rho_e + (1.0 - mix) * rho_theta
        aux = {"clamped": info["clamped"], "rl_residual": float(np.max(np.abs(new_pi - nxt)))}
        if eta <= 1.0:
            aux["mdairl_loss"] = mdairl_loss(new_pi, ref, pi, eta, weights / weights.sum(), reg)
        pi = new_pi
        records.append(RunRecord(t, eta, float(weights @ bregman_div(pi, pi_e, reg)),
                                 float(weights @ bregman_div(ref, pi_e, reg)), tracker.value(), aux))
    return SeedResult(seed, records)


RUNNERS = {"bandit": run_bandit, "gaussian_toy": run_gaussian_toy, "mdp": run_mdp}


def _run_one(args):
    cfg, seed = args
    return RUNNERS[cfg.experiment](cfg, seed)


def run_seeds(cfg):
    """Run every seed; results come back sorted by seed whatever the worker order."""
    jobs = [(cfg, s) for s in cfg.seeds]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    return sorted(results, key=lambda r: r.seed)


def run_tag(cfg):
    reg = cfg.regularizer.replace(":", "-").replace(",", "_").replace("=", "")
    return f"{cfg.experiment}_{reg}"


def summarize(cfg, results, files=None):
    finals = {r.seed: r.final for r in results}
    base = {r.seed: r.final_ref for r in results}
    mean, std = _stats(list(finals.values()))
    bmean, bstd = _stats(list(base.values()))
    return ResultSummary(
        experiment=cfg.experiment,
        regularizer=cfg.regularizer,
        schedule=str(cfg.step_schedule()),
        seeds=[r.seed for r in results],
        finals=finals,
        mean=mean,
        std=std,
        baseline_finals=base,
        baseline_mean=bmean,
        baseline_std=bstd,
        baseline_delta=mean - bmean,
        statuses={r.seed: r.status for r in results},
        scale=float(cfg.num_actions) if cfg.experiment == "bandit" else 1.0,
        files=files or {},
        diagnostics=_diagnose(results),
    )


def _diagnose(results):
    """Per-seed verdicts: final-window decay and whether the agent ends below the baseline."""
    decay, beats = {}, {}
    for r in results:
        if r.status != "ok":
            continue
        beats[r.seed] = bool(r.final <= r.final_ref)
        try:
            decay[r.seed] = convergence_diagnostics(r.records, "proposition1").passed
        except InsufficientDataError:
            pass
    return {"proposition1": decay, "beats_baseline": beats,
            "beats_baseline_count": sum(beats.values())}


def run_experiment(cfg, write=True):
    """Run all seeds of a bandit, gaussian_toy or mdp config.

    Writes ``<tag>_seed<N>.csv`` per seed and ``<tag>_summary.json`` into
    ``cfg.output_dir``.  The baseline is the direct chase of the reference
    estimate (eta = 1), whose iterate is the reference itself, so its final
    divergence is the reference's.
    """
    if cfg.experiment not in RUNNERS:
        raise ValueError(f"run_experiment does not handle {cfg.experiment!r}")
    results = run_seeds(cfg)
    files = {}
    if write:
        os.makedirs(cfg.output_dir, exist_ok=True)
        tag = run_tag(cfg)
        for r in results:
            path = os.path.join(cfg.output_dir, f"{tag}_seed{r.seed}.csv")
            write_records_csv(path, r.records)
            files[r.seed] = path
    summary = summarize(cfg, results, files)
    if write:
        path = os.path.join(cfg.output_dir, f"{run_tag(cfg)}_summary.json")
        with open(path, "w") as fh:
            json.dump(summary.to_dict(), fh, indent=2, sort_keys=True)
        summary.files["summary"] = path
    return summary


@dataclass
class SweepCell:
    eta_1: float
    eta_T: float
    regularizer: str
    finals: list
    mean: float
    std: float
    status: str

    def formatted(self):
        if self.status != "ok":
            return "-"
        return f"{self.mean:.5f} +- {self.std:.5f}"


def _sweep_job(args):
    cfg, eta_1, eta_T, reg_text = args
    sched = StepSchedule("linear_alpha", {"alpha_1": 1.0 / eta_1, "alpha_T": 1.0 / eta_T, "T": cfg.total_steps})
    reg = Regularizer.parse(reg_text)
    results = [run_gaussian_toy(cfg, s, reg, sched) for s in cfg.seeds]
    finals = [r.final for r in results]
    bad = [r.status for r in results if r.status != "ok"]
    mean, std = _stats(finals)
    return SweepCell(eta_1, eta_T, reg_text, finals, mean, std, bad[0] if bad else "ok")


def schedule_sweep(cfg, write=True):
    """Final divergences on the Gaussian toy for each (eta_1, eta_T) pair and regularizer.

    ``eta_t`` follows the linear-alpha rule with ``alpha_1 = 1/eta_1`` and
    ``alpha_T = 1/eta_T``.  A cell shows ``-`` when any seed hits an
    inadmissible step.
    """
    jobs = [(cfg, a, b, r) for (a, b) in cfg.sweep_pairs for r in cfg.sweep_regularizers]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            cells = list(pool.map(_sweep_job, jobs))
    else:
        cells = [_sweep_job(j) for j in jobs]
    if write:
        os.makedirs(cfg.output_dir, exist_ok=True)
        with open(os.path.join(cfg.output_dir, "schedule_sweep.csv"), "w") as fh:
            fh.write("eta_1,eta_T,regularizer,mean,std,status\n")
            for c in cells:
                fh.write(f"{c.eta_1!r},{c.eta_T!r},\"{c.regularizer}\",{c.mean!r},{c.std!r},{c.status}\n")
        with open(os.path.join(cfg.output_dir, "schedule_sweep.json"), "w") as fh:
            json.dump([asdict(c) for c in cells], fh, indent=2)
    return cells


def format_sweep(cells):
    regs = list(dict.fromkeys(c.regularizer for c in cells))
    pairs = list(dict.fromkeys((c.eta_1, c.eta_T) for c in cells))
    lookup = {(c.eta_1, c.eta_T, c.regularizer): c for c in cells}
    lines = ["(eta_1, eta_T) | " + " | ".join(regs)]
    for a, b in pairs:
        lines.append(f"({a:g}, {b:g}) | " + " | ".join(lookup[(a, b, r)].formatted() for r in regs))
    return "\n".join(lines)
