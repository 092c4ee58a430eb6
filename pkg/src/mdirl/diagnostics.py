"""Rate diagnostics for divergence sequences A_t produced by MD runs."""

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError

MODES = ("theorem1b", "theorem2", "proposition1", "theorem1a")
MIN_RECORDS = 50


@dataclass
class DiagnosticReport:
    mode: str
    passed: bool
    stats: dict = field(default_factory=dict)
    message: str = ""

    def __str__(self):
        verdict = "PASS" if self.passed else "FAIL"
        return f"{self.mode}: {verdict} {self.message}"


def _series(records, key):
    if len(records) and hasattr(records[0], key):
        t = np.array([r.t for r in records], dtype=float)
        a = np.array([getattr(r, key) for r in records], dtype=float)
    else:
        a = np.asarray(records, dtype=float)
        t = np.arange(1, a.size + 1, dtype=float)
    return t, a


def _window_mean(a, window):
    return float(np.mean(a[-window:]))


def convergence_diagnostics(records, mode, key="d_agent_expert", **kw):
    """Check a run against one of the rate statements.

    ``records`` is a sequence of ``RunRecord`` (read through ``key``) or a
    plain sequence of values indexed from t = 1.

    theorem1b     sup of t A_t over ``late`` window <= ``factor`` x sup over ``early``
    theorem2      least-squares fit of log A_t on t; R^2 >= ``r2_min`` and all
                  ratios A_{t+1}/A_t inside (0, 1)
    proposition1  final-window mean < ``factor`` x initial value (or ``threshold``)
    theorem1a     final-window mean stays above ``floor`` (default
                  ``stall_fraction`` x initial value, or ``ratio`` x the final
                  window mean of ``reference``)
    """
    if mode not in MODES:
        raise ValueError(f"unknown diagnostic mode {mode!r}")
    t, a = _series(records, key)
    if a.size < MIN_RECORDS:
        raise InsufficientDataError(f"{mode} needs at least {MIN_RECORDS} records, got {a.size}")
    window = int(kw.get("window", max(1, a.size // 10)))

    if mode == "theorem1b":
        ta = t * a
        if "early" in kw:
            e0, e1 = kw["early"]
            l0, l1 = kw["late"]
        else:
            mid = t[a.size // 2]
            e0, e1, l0, l1 = t[0], mid, mid, t[-1]
        early = ta[(t >= e0) & (t <= e1)]
        late = ta[(t >= l0) & (t <= l1)]
        if early.size == 0 or late.size == 0:
            raise InsufficientDataError("empty theorem1b window")
        factor = kw.get("factor", 2.0)
        s_early, s_late = float(early.max()), float(late.max())
        ok = bool(np.isfinite(s_late) and s_late <= factor * s_early)
        return DiagnosticReport(mode, ok, {"sup_early": s_early, "sup_late": s_late, "factor": factor},
                                f"sup tA_t late={s_late:.4g} early={s_early:.4g}")

    if mode == "theorem2":
        if np.any(a <= 0):
            return DiagnosticReport(mode, False, {}, "nonpositive values")
        y = np.log(a)
        slope, intercept = np.polyfit(t, y, 1)
        resid = y - (slope * t + intercept)
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
        ratios = a[1:] / a[:-1]
        r2_min = kw.get("r2_min", 0.999)
        ok = bool(r2 >= r2_min and np.all((ratios > 0) & (ratios < 1)))
        stats = {"slope": float(slope), "intercept": float(intercept), "r2": r2,
                 "ratio_min": float(ratios.min()), "ratio_max": float(ratios.max())}
        if "expected_ratio" in kw:
            dev = float(np.max(np.abs(ratios - kw["expected_ratio"])))
            stats["ratio_max_dev"] = dev
            ok = ok and dev <= kw.get("ratio_tol", 1e-9)
        return DiagnosticReport(mode, ok, stats, f"slope={slope:.6g} R2={r2:.6f}")

    final = _window_mean(a, window)
    if mode == "proposition1":
        threshold = kw.get("threshold", kw.get("factor", 0.1) * a[0])
        ok = bool(final < threshold)
        return DiagnosticReport(mode, ok, {"final_mean": final, "threshold": float(threshold)},
                                f"final={final:.4g} threshold={threshold:.4g}")

    if "floor" in kw:
        floor = float(kw["floor"])
    elif "reference" in kw:
        _, ref = _series(kw["reference"], key)
        floor = kw.get("ratio", 0.5) * _window_mean(ref, window)
    else:
        floor = kw.get("stall_fraction", 0.1) * a[0]
    ok = bool(final > floor > 0 or (final > floor and floor == 0 and final > 0))
    return DiagnosticReport(mode, ok, {"final_mean": final, "floor": floor},
                            f"final={final:.4g} floor={floor:.4g}")
