"""Step-size schedules for the mirror-descent loop."""

from dataclasses import dataclass, field

from .errors import ConfigError

SCHEDULE_KINDS = ("constant", "harmonic", "linear_alpha", "power")


@dataclass(frozen=True)
class StepSchedule:
    """Produces eta_t for t = 1, 2, ...

    constant      eta_t = eta
    harmonic      eta_t = c / (t + 1)
    linear_alpha  alpha_t linear from alpha_1 to alpha_T over T steps, eta_t = 1 / alpha_t
    power         eta_t = c / t**p   (c=1, p=2 gives a summable sequence)
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        p = dict(self.params)
        if self.kind == "constant":
            p.setdefault("eta", 0.2)
            if p["eta"] <= 0:
                raise ConfigError("constant schedule needs eta > 0")
        elif self.kind == "harmonic":
            p.setdefault("c", 4.0)
            if p["c"] <= 0:
                raise ConfigError("harmonic schedule needs c > 0")
        elif self.kind == "power":
            p.setdefault("c", 1.0)
            p.setdefault("p", 1.0)
            if p["c"] <= 0 or p["p"] < 0:
                raise ConfigError("power schedule needs c > 0 and p >= 0")
        else:
            if "eta_1" in p:
                p.setdefault("alpha_1", 1.0 / p.pop("eta_1"))
            if "eta_T" in p:
                p.setdefault("alpha_T", 1.0 / p.pop("eta_T"))
            p.setdefault("alpha_1", 0.5)
            p.setdefault("alpha_T", 2.0)
            if p["alpha_1"] <= 0 or p["alpha_T"] <= 0:
                raise ConfigError("linear_alpha needs positive alpha_1 and alpha_T")
            if "T" in p:
                p["T"] = int(p["T"])
                if p["T"] < 1:
                    raise ConfigError("linear_alpha needs T >= 1")
        object.__setattr__(self, "params", p)

    @classmethod
    def parse(cls, text, total_steps=None):
        """Parse ``kind:key=value,...``; ``total_steps`` fills a missing T."""
        text = text.strip()
        kind, _, rest = text.partition(":")
        params = {}
        for item in filter(None, (s.strip() for s in rest.split(","))):
            key, eq, val = item.partition("=")
            if not eq:
                raise ConfigError(f"bad schedule parameter {item!r} in {text!r}")
            try:
                params[key.strip()] = float(val)
            except ValueError as exc:
                raise ConfigError(f"schedule parameter {key!r} is not a number") from exc
        if kind.strip() == "linear_alpha" and "T" not in params and total_steps is not None:
            params["T"] = total_steps
        return cls(kind.strip(), params)

    def __str__(self):
        if not self.params:
            return self.kind
        body = ",".join(f"{k}={_fmt(v)}" for k, v in sorted(self.params.items()))
        return f"{self.kind}:{body}"

    def with_horizon(self, total_steps):
        if self.kind != "linear_alpha":
            return self
        p = dict(self.params)
        p["T"] = int(total_steps)
        return StepSchedule(self.kind, p)

    def eta(self, t):
        return schedule_eta(self, t)


def _fmt(v):
    return repr(int(v)) if isinstance(v, int) else repr(float(v))


def schedule_eta(s, t):
    if t < 1 or int(t) != t:
        raise ValueError(f"step index must be a positive integer, got {t}")
    p = s.params
    if s.kind == "constant":
        return float(p["eta"])
    if s.kind == "harmonic":
        return p["c"] / (t + 1.0)
    if s.kind == "power":
        return p["c"] / float(t) ** p["p"]
    T = p.get("T")
    if T is None:
        raise ValueError("linear_alpha schedule has no horizon T")
    if t > T:
        raise ValueError(f"step {t} beyond horizon T={T}")
    if T == 1:
        return 1.0 / p["alpha_1"]
    alpha = p["alpha_1"] + (t - 1) * (p["alpha_T"] - p["alpha_1"]) / (T - 1)
    return 1.0 / alpha
