"""Experiment configuration: INI-style files with one section per experiment.

Example::

    [bandit]
    regularizer = tsallis:q=2.0,k=1.0
    schedule = linear_alpha:alpha_1=0.5,alpha_T=2
    seeds = 0, 1, 2, 3, 4
    total_steps = 2000

Regularizer lists (``sweep_regularizers``) are separated by ``;`` because a
single regularizer string may contain commas.
"""

import configparser
import dataclasses
from dataclasses import dataclass, field, fields

from .bregman import Regularizer
from .errors import ConfigError
from .schedules import StepSchedule

EXPERIMENTS = ("bandit", "gaussian_toy", "mdp", "schedule_sweep", "verify")

# (eta_1, eta_T) grid of the schedule sweep
DEFAULT_SWEEP_PAIRS = ((2.0, 2.0), (1.0, 1.0), (0.5, 0.5), (0.2, 0.2), (10.0, 1.0), (1.0, 0.1), (1.0, 0.01))
DEFAULT_SWEEP_REGS = ("shannon", "tsallis:q=1.1,k=1.0", "tsallis:q=1.5,k=1.0", "tsallis:q=2.0,k=1.0")

_PER_EXPERIMENT = {
    "bandit": dict(schedule="linear_alpha:alpha_1=0.5,alpha_T=2.0", seeds=(0, 1, 2, 3, 4),
                   total_steps=2000, reference_lr=0.2),
    "gaussian_toy": dict(schedule="constant:eta=0.2", seeds=tuple(range(10)), total_steps=100,
                         reference_lr=0.5),
    "mdp": dict(schedule="linear_alpha:alpha_1=0.5,alpha_T=2.0", seeds=(0, 1, 2, 3, 4),
                total_steps=200, reference_lr=0.2),
    "schedule_sweep": dict(seeds=tuple(range(10)), total_steps=100, reference_lr=0.5),
    "verify": dict(seeds=(0,), total_steps=200),
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    regularizer: str = "shannon"
    schedule: str = "constant:eta=0.2"
    seeds: tuple = (0,)
    total_steps: int = 100
    samples_per_round: int = 16
    lam: float = 0.01
    gamma: float = 0.9
    noise_epsilon: float = 0.0
    output_dir: str = "results"
    num_actions: int = 100
    smoothing: float = 0.1
    reference_lr: float = 0.2
    mixing_ratio: float = 0.5
    momentum: float = 0.99
    grid_size: int = 5
    slip: float = 0.1
    workers: int = 1
    sweep_pairs: tuple = DEFAULT_SWEEP_PAIRS
    sweep_regularizers: tuple = DEFAULT_SWEEP_REGS

    def __post_init__(self):
        sec = self.experiment
        if sec not in EXPERIMENTS:
            raise ConfigError(f"experiment: unknown experiment {sec!r}; expected one of {EXPERIMENTS}")

        def bad(name, why):
            raise ConfigError(f"{sec}.{name}: {why}")

        if self.total_steps < 1:
            bad("total_steps", "must be >= 1")
        if len(self.seeds) == 0:
            bad("seeds", "must list at least one seed")
        if self.samples_per_round < 1:
            bad("samples_per_round", "must be >= 1")
        if sec in ("gaussian_toy", "schedule_sweep") and self.samples_per_round < 2:
            bad("samples_per_round", "Gaussian fits need at least 2 samples")
        if not 0.0 <= self.gamma < 1.0:
            bad("gamma", "must lie in [0, 1)")
        if self.noise_epsilon < 0:
            bad("noise_epsilon", "must be >= 0")
        if self.num_actions < 2:
            bad("num_actions", "must be >= 2")
        if self.smoothing < 0:
            bad("smoothing", "must be >= 0")
        if not 0.0 <= self.reference_lr <= 1.0:
            bad("reference_lr", "must lie in [0, 1]")
        if not 0.0 <= self.mixing_ratio <= 1.0:
            bad("mixing_ratio", "must lie in [0, 1]")
        if not 0.0 <= self.momentum < 1.0:
            bad("momentum", "must lie in [0, 1)")
        if self.lam <= 0:
            bad("lam", "must be > 0")
        if self.grid_size < 1:
            bad("grid_size", "must be >= 1")
        if not 0.0 <= self.slip <= 1.0:
            bad("slip", "must lie in [0, 1]")
        if self.workers < 1:
            bad("workers", "must be >= 1")
        if not self.sweep_pairs:
            bad("sweep_pairs", "grid must be nonempty")
        if any(a <= 0 or b <= 0 for a, b in self.sweep_pairs):
            bad("sweep_pairs", "step sizes must be positive")
        try:
            reg = Regularizer.parse(self.regularizer)
        except ValueError as exc:
            bad("regularizer", str(exc))
        if sec == "gaussian_toy" and reg.kind not in ("shannon", "tsallis"):
            bad("regularizer", "Gaussian policies support shannon and tsallis only")
        for r in self.sweep_regularizers:
            try:
                rr = Regularizer.parse(r)
            except ValueError as exc:
                bad("sweep_regularizers", str(exc))
            if rr.kind not in ("shannon", "tsallis"):
                bad("sweep_regularizers", f"{r!r} has no Gaussian closed form")
        try:
            StepSchedule.parse(self.schedule, self.total_steps)
        except (ConfigError, ValueError) as exc:
            bad("schedule", str(exc))

    @property
    def reg(self):
        return Regularizer.parse(self.regularizer)

    def step_schedule(self):
        return StepSchedule.parse(self.schedule, self.total_steps).with_horizon(self.total_steps)

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def to_ini(self):
        """Serialize to the config-file format; ``parse_config`` inverts it."""
        lines = [f"[{self.experiment}]"]
        for f in fields(self):
            if f.name == "experiment":
                continue
            lines.append(f"{f.name} = {_format_value(f.name, getattr(self, f.name))}")
        return "\n".join(lines) + "\n"


def _format_value(name, v):
    if name == "seeds":
        return ", ".join(str(s) for s in v)
    if name == "sweep_pairs":
        return ", ".join(f"{a!r}:{b!r}" for a, b in v)
    if name == "sweep_regularizers":
        return "; ".join(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _convert(section, key, raw):
    where = f"{section}.{key}"
    raw = raw.strip()
    try:
        if key == "seeds":
            return tuple(int(s) for s in raw.replace(",", " ").split())
        if key == "sweep_pairs":
            pairs = []
            for item in filter(None, (s.strip() for s in raw.split(","))):
                a, _, b = item.partition(":")
                pairs.append((float(a), float(b)))
            return tuple(pairs)
        if key == "sweep_regularizers":
            return tuple(s.strip() for s in raw.split(";") if s.strip())
        kind = _FIELD_TYPES[key]
        if kind is int or kind == "int":
            return int(raw)
        if kind is float or kind == "float":
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r} ({exc})") from exc


def defaults_for(experiment):
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment: unknown experiment {experiment!r}; expected one of {EXPERIMENTS}")
    return dict(_PER_EXPERIMENT.get(experiment, {}))


def parse_config(text, experiment=None):
    """Parse config text.  Values come from ``[DEFAULT]`` then the experiment's section.

    When ``experiment`` is None the file must contain exactly one section.
    """
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config: {exc}") from exc
    if experiment is None:
        secs = cp.sections()
        if len(secs) != 1:
            raise ConfigError(f"config: expected exactly one experiment section, found {secs}")
        experiment = secs[0]
    values = defaults_for(experiment)
    items = cp[experiment] if cp.has_section(experiment) else cp.defaults()
    for key, raw in items.items():
        if key == "experiment":
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{experiment}.{key}: unknown option")
        values[key] = _convert(experiment, key, raw)
    return ExperimentConfig(experiment=experiment, **values)


def load_config(path, experiment=None):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    return parse_config(text, experiment)


def default_config(experiment, **overrides):
    values = defaults_for(experiment)
    values.update(overrides)
    return ExperimentConfig(experiment=experiment, **values)
