"""Bregman geometry on the clamped probability simplex.

Every regularizer here is separable, ``Omega(p) = sum_a h(p_a)`` with
``h(x) = sign * x * phi(x)`` for one of five kernels ``phi``.  The sign is
picked per kernel so that ``h`` is convex on the operating region:

=========  ==========================  =====  ===========================
kind       phi(x)                      sign   h(x)
=========  ==========================  =====  ===========================
shannon    log x                       +1     x log x
tsallis    k (x^(q-1) - 1) / (q - 1)   +1     k (x^q - x) / (q - 1)
exp        e - e^x                     -1     x e^x - e x
cos        cos(pi x / 2)               -1     -x cos(pi x / 2)
sin        1 - sin(pi x / 2)           -1     x sin(pi x / 2) - x
=========  ==========================  =====  ===========================

The ``sin`` kernel is only convex for ``x <= SIN_PEAK`` (about 0.68); use
:func:`convexity_diagnostic` to check a point before trusting results.

All functions operate on the last axis, so a ``(|S|, |A|)`` table of
per-state distributions is handled row by row.
"""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceError, DomainError

EPS_MIN = 1e-6
KINDS = ("shannon", "tsallis", "exp", "cos", "sin")

_HALF_PI = 0.5 * math.pi


def _sin_peak():
    # root of h''(x) = pi cos(pi x/2) - (pi^2/4) x sin(pi x/2) on (0, 1)
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if math.pi * math.cos(_HALF_PI * mid) - 0.25 * math.pi ** 2 * mid * math.sin(_HALF_PI * mid) > 0:
            lo = mid
        else:
            hi = mid
    return lo


SIN_PEAK = _sin_peak()


@dataclass(frozen=True)
class Regularizer:
    """A separable convex regularizer on the simplex.

    ``q`` and ``k`` are only meaningful for ``kind == "tsallis"``.
    """

    kind: str = "shannon"
    q: float = 2.0
    k: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        if self.kind == "tsallis":
            if not self.q > 1.0:
                raise ValueError("tsallis requires q > 1")
            if not self.k > 0.0:
                raise ValueError("tsallis requires k > 0")

    @classmethod
    def parse(cls, text):
        """Build from ``"shannon"``, ``"tsallis:q=2,k=1"``, ``"exp"``, ``"cos"`` or ``"sin"``."""
        text = text.strip()
        kind, _, rest = text.partition(":")
        kind = kind.strip().lower()
        params = {}
        if rest.strip():
            for item in rest.split(","):
                key, sep, value = item.partition("=")
                if not sep:
                    raise ValueError(f"malformed regularizer parameter {item!r}")
                params[key.strip()] = float(value)
        if kind != "tsallis" and params:
            raise ValueError(f"regularizer {kind!r} takes no parameters")
        unknown = set(params) - {"q", "k"}
        if unknown:
            raise ValueError(f"unknown regularizer parameters {sorted(unknown)}")
        return cls(kind, **params)

    def __str__(self):
        if self.kind == "tsallis":
            return f"tsallis:q={self.q!r},k={self.k!r}"
        return self.kind

    @property
    def sign(self):
        """Sign applied to ``sum p phi(p)`` so that Omega is convex."""
        return 1.0 if self.kind in ("shannon", "tsallis") else -1.0

    @property
    def x_max(self):
        """Upper end of the interval on which ``h'`` is increasing."""
        return SIN_PEAK if self.kind == "sin" else 1.0

    def kernel(self, x):
        """The kernel ``phi`` itself (without the convexity sign)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "shannon":
            return np.log(x)
        if self.kind == "tsallis":
            return self.k * (np.power(x, self.q - 1.0) - 1.0) / (self.q - 1.0)
        if self.kind == "exp":
            return math.e - np.exp(x)
        if self.kind == "cos":
            return np.cos(_HALF_PI * x)
        return 1.0 - np.sin(_HALF_PI * x)

    def h(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == "shannon":
                return np.where(x == 0.0, 0.0, x * np.log(x))
            if self.kind == "tsallis":
                return self.k * (np.power(x, self.q) - x) / (self.q - 1.0)
            if self.kind == "exp":
                return x * np.exp(x) - math.e * x
            if self.kind == "cos":
                return -x * np.cos(_HALF_PI * x)
            return x * np.sin(_HALF_PI * x) - x

    def dh(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "shannon":
            return 1.0 + np.log(x)
        if self.kind == "tsallis":
            return self.k * (self.q * np.power(x, self.q - 1.0) - 1.0) / (self.q - 1.0)
        if self.kind == "exp":
            return (1.0 + x) * np.exp(x) - math.e
        u = _HALF_PI * x
        if self.kind == "cos":
            return -np.cos(u) + u * np.sin(u)
        return np.sin(u) + u * np.cos(u) - 1.0

    def d2h(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "shannon":
            return 1.0 / x
        if self.kind == "tsallis":
            return self.k * self.q * np.power(x, self.q - 2.0)
        if self.kind == "exp":
            return (2.0 + x) * np.exp(x)
        u = _HALF_PI * x
        if self.kind == "cos":
            return math.pi * np.sin(u) + _HALF_PI * u * np.cos(u)
        return math.pi * np.cos(u) - _HALF_PI * u * np.sin(u)

    def inv_dh(self, z, lo, hi, zlo=None, zhi=None, approx=False):
        """Inverse of ``h'`` restricted to ``[lo, hi]``; ``z`` is clipped into range first.

        ``zlo``/``zhi`` may pass precomputed ``h'(lo)``/``h'(hi)``.  With
        ``approx`` the kernels without a closed form skip the Newton polish
        and return the table interpolation.
        """
        zlo = self.dh(lo) if zlo is None else zlo
        zhi = self.dh(hi) if zhi is None else zhi
        z = np.clip(np.asarray(z, dtype=float), zlo, zhi)
        if self.kind == "shannon":
            x = np.exp(z - 1.0)
        elif self.kind == "tsallis":
            base = ((self.q - 1.0) * z / self.k + 1.0) / self.q
            x = np.power(np.maximum(base, 0.0), 1.0 / (self.q - 1.0))
        elif approx:
            zs, xs = _inverse_table(self)
            x = np.interp(z, zs, xs)
        else:
            x = _newton_inverse(self, z, lo, hi)
        return np.clip(x, lo, hi)


def _inverse_table(reg):
    return _cached_table(reg.kind, reg.q, reg.k)


@lru_cache(maxsize=None)
def _cached_table(kind, q, k):
    reg = Regularizer(kind, q, k)
    top = reg.x_max
    xs = np.concatenate([np.geomspace(1e-10, 1e-2, 400, endpoint=False), np.linspace(1e-2, top, 4000)])
    zs = reg.dh(xs)
    return zs, xs


def _newton_inverse(reg, z, lo, hi, steps=3):
    # the table guess is good to ~1e-6 relative, so three quadratic steps
    # reach rounding level without per-step convergence checks
    zs, xs = _inverse_table(reg)
    x = np.interp(z, zs, xs)
    for _ in range(steps):
        x = x - (reg.dh(x) - z) / reg.d2h(x)
    return np.clip(x, lo, hi)


def _as_float(x):
    return np.asarray(x, dtype=float)


def bounds(n, eps=EPS_MIN):
    """Clamp interval ``[eps, 1 - (n - 1) eps]`` for an ``n``-action simplex."""
    return eps, 1.0 - (n - 1) * eps


def is_feasible(p, eps=EPS_MIN, atol=1e-12):
    """True when every row of ``p`` lies on the clamped simplex."""
    p = _as_float(p)
    lo, hi = bounds(p.shape[-1], eps)
    return bool(
        np.all(np.abs(p.sum(axis=-1) - 1.0) <= atol)
        and np.all(p >= lo - atol)
        and np.all(p <= hi + atol)
    )


def clamp_to_simplex(p, eps=EPS_MIN):
    """Clip to the clamp interval and renormalize; cheap, not a Bregman projection."""
    p = _as_float(p)
    lo, hi = bounds(p.shape[-1], eps)
    p = np.clip(p, lo, hi)
    return p / p.sum(axis=-1, keepdims=True)


def _finite_or_raise(value, what):
    if not np.all(np.isfinite(value)):
        raise DomainError(f"{what} is not finite; input left the regularizer domain")
    return value


def omega(p, reg):
    """Convex-signed regularizer value ``sum_a h(p_a)``."""
    val = reg.h(_as_float(p)).sum(axis=-1)
    return _finite_or_raise(val, "omega")


def grad_omega(p, reg):
    """Componentwise gradient of the regularizer.

    For Tsallis this is the gradient of ``k (sum p^q - 1) / (q - 1)``, which
    agrees with ``sum h(p)`` on the simplex; the two gradients differ by the
    constant ``k / (q - 1)``, invisible to every dual-space computation.
    """
    g = reg.dh(_as_float(p))
    if reg.kind == "tsallis":
        g = g + reg.k / (reg.q - 1.0)
    return _finite_or_raise(g, "grad_omega")


def bregman_div(p, phat, reg):
    """``D(p || phat) = Omega(p) - Omega(phat) - <grad Omega(phat), p - phat>``."""
    p, phat = _as_float(p), _as_float(phat)
    if p.shape != phat.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {phat.shape}")
    terms = reg.h(p) - reg.h(phat) - reg.dh(phat) * (p - phat)
    return _finite_or_raise(terms.sum(axis=-1), "bregman_div")


def reward_operator_psi(p, reg):
    """Regularized reward ``psi = grad Omega(p) - <p, grad Omega(p)> + Omega(p)``.

    Differs from ``grad_omega(p)`` by a constant per row, so
    ``grad_omega_star(psi) == p``.
    """
    p = _as_float(p)
    g = grad_omega(p, reg)
    shift = omega(p, reg) - (p * g).sum(axis=-1)
    return g + np.expand_dims(shift, -1)


def _primal(y, lam, reg, lo, hi, dlo, dhi):
    z = y - lam[:, None]
    x = reg.inv_dh(z, lo, hi, dlo, dhi)
    free = (z > dlo) & (z < dhi)
    return x, free


def grad_omega_star(y, reg, eps=EPS_MIN, tol=1e-12, max_iter=40):
    """Maximizer of ``<p, y> - Omega(p)`` over the clamped simplex.

    The KKT conditions give ``p_a = clip((h')^-1(y_a - lam))`` for a scalar
    multiplier ``lam`` per row.  ``lam`` is found by a safeguarded Newton
    iteration inside a bisection bracket.  Rows still unresolved after
    ``max_iter`` sweeps (sharp kinks where an entry leaves the clamp) are
    finished one at a time with Brent's method.  A final Newton correction
    in primal coordinates removes the rounding left in the simplex sum.
    """
    y = _finite_or_raise(_as_float(y), "dual vector")
    squeeze = y.ndim == 1
    Y = np.atleast_2d(y)
    m, n = Y.shape
    if n == 1:
        out = np.ones_like(Y)
        return out[0] if squeeze else out
    lo, hi = bounds(n, eps)
    hi = min(hi, reg.x_max)
    if lo >= hi:
        raise DomainError("clamp interval is empty for this action count")
    dlo, dhi = float(reg.dh(lo)), float(reg.dh(hi))
    d_uniform = float(reg.dh(1.0 / n))

    lam_hi = Y.max(axis=1) - dlo
    lam_lo = Y.min(axis=1) - d_uniform
    if reg.kind == "shannon":
        # exact multiplier when no entry touches the clamp
        top = Y.max(axis=1)
        guess = top + np.log(np.exp(Y - top[:, None]).sum(axis=1)) - 1.0
    else:
        guess = Y.mean(axis=1) - d_uniform
    lam = np.clip(guess, lam_lo, lam_hi)
    # sum residual is decreasing in lam; keep residuals at the bracket ends
    # so rejected Newton steps fall back to false position, not bisection
    s_lo = np.full(m, np.nan)
    s_hi = np.full(m, np.nan)
    prev_lam = np.full(m, np.nan)
    prev_s = np.full(m, np.nan)
    prev_up = np.zeros(m, dtype=bool)
    for it in range(max_iter):
        x, free = _primal(Y, lam, reg, lo, hi, dlo, dhi)
        s = x.sum(axis=1) - 1.0
        if np.all(np.abs(s) <= 4 * n * np.finfo(float).eps):
            break
        up = s > 0
        lam_lo = np.where(up, lam, lam_lo)
        s_lo = np.where(up, s, s_lo)
        lam_hi = np.where(up, lam_hi, lam)
        s_hi = np.where(up, s_hi, s)
        # Illinois: halve the stale end's residual when one end keeps moving
        if it > 0:
            s_hi = np.where(up & prev_up, 0.5 * s_hi, s_hi)
            s_lo = np.where(~up & ~prev_up, 0.5 * s_lo, s_lo)
        prev_up = up
        slope = np.where(free, 1.0 / np.maximum(reg.d2h(x), 1e-300), 0.0).sum(axis=1)
        step = lam + np.divide(s, slope, out=np.full(m, np.inf), where=slope > 0)
        # kinks from entries entering the clamp make Newton oscillate; when the
        # residual flips sign, the secant through the last two points is better
        with np.errstate(invalid="ignore", divide="ignore"):
            sec = lam - s * (lam - prev_lam) / (s - prev_s)
        flipped = np.sign(s) * np.sign(prev_s) < 0
        step = np.where(flipped & np.isfinite(sec), sec, step)
        with np.errstate(invalid="ignore", divide="ignore"):
            fp = lam_lo + s_lo * (lam_hi - lam_lo) / (s_lo - s_hi)
        mid = 0.5 * (lam_lo + lam_hi)
        width = lam_hi - lam_lo
        fp_ok = np.isfinite(fp) & (fp > lam_lo + 0.01 * width) & (fp < lam_hi - 0.01 * width)
        fallback = np.where(fp_ok, fp, mid)
        prev_lam, prev_s = lam, s
        lam = np.where((step > lam_lo) & (step < lam_hi), step, fallback)
        if np.all(width <= 4 * np.finfo(float).eps * (1.0 + np.abs(lam))):
            break
    x, free = _primal(Y, lam, reg, lo, hi, dlo, dhi)
    s = x.sum(axis=1) - 1.0
    stuck = np.flatnonzero(np.abs(s) > 64 * n * np.finfo(float).eps)
    for i in stuck:
        row = Y[i:i + 1]

        def resid(l, row=row):
            return _primal(row, np.array([l]), reg, lo, hi, dlo, dhi)[0].sum() - 1.0

        a, b = lam_lo[i], lam_hi[i]
        if not resid(a) >= 0 >= resid(b):
            a, b = row.min() - d_uniform, row.max() - dlo
        lam[i] = brentq(resid, a, b, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    if stuck.size:
        x, free = _primal(Y, lam, reg, lo, hi, dlo, dhi)
        s = x.sum(axis=1) - 1.0
    weights = np.where(free, 1.0 / np.maximum(reg.d2h(x), 1e-300), 0.0)
    wsum = weights.sum(axis=1, keepdims=True)
    has_free = wsum[:, 0] > 0
    corr = np.where(has_free[:, None], s[:, None] * weights / np.where(wsum > 0, wsum, 1.0), 0.0)
    x = np.clip(x - corr, lo, hi)
    s = x.sum(axis=1) - 1.0
    worst = float(np.max(np.abs(s)))
    if worst > tol:
        raise ConvergenceError(
            f"grad_omega_star did not reach simplex tolerance {tol:g} (residual {worst:.3e})", worst
        )
    return x[0] if squeeze else x


def bregman_project(x, reg, eps=EPS_MIN):
    """Bregman projection ``argmin_p D(p || x)`` onto the clamped simplex.

    ``x`` must sum to one but may leave the clamp interval.  Entries where
    ``h'`` is undefined (e.g. ``x <= 0`` under Shannon) act as dual
    coordinates at minus infinity and land on the lower clamp.
    """
    x = _as_float(x)
    if not np.all(np.isfinite(x)):
        raise DomainError("projection input must be finite")
    if np.any(np.abs(x.sum(axis=-1) - 1.0) > 1e-9):
        raise DomainError("projection input must sum to 1")
    if is_feasible(x, eps, atol=0.0):
        return x.copy()
    squeeze = x.ndim == 1
    X = np.atleast_2d(x)
    n = X.shape[1]
    lo, _ = bounds(n, eps)
    with np.errstate(divide="ignore", invalid="ignore"):
        Y = reg.dh(X)
    bad = ~np.isfinite(Y)
    if np.any(bad):
        finite_min = np.where(bad, np.inf, Y).min(axis=1, keepdims=True)
        floor = finite_min - reg.dh(1.0 / n) + reg.dh(lo) - 1.0
        Y = np.where(bad, floor, Y)
    out = grad_omega_star(Y, reg, eps)
    return out[0] if squeeze else out


def convexity_diagnostic(p, reg):
    """Return ``(ok, min_curvature)`` for ``h''`` over the entries of ``p``.

    Only the ``sin`` kernel can fail: its curvature turns negative above
    ``SIN_PEAK``.
    """
    curv = reg.d2h(_as_float(p))
    worst = float(np.min(curv))
    return worst > 0.0, worst


def centered(v):
    """Remove the per-row mean; dual vectors are only defined up to ``c * 1``."""
    v = _as_float(v)
    return v - v.mean(axis=-1, keepdims=True)
