"""Full-covariance Gaussian policies in exponential-family coordinates.

Covariances are parameterized as ``Sigma = L diag(sigma^2) L^T`` with ``L``
unit lower triangular, which makes ``log|Sigma| = 2 sum(log sigma)`` and the
inverse cheap.  Divergences and entropies use the log-partition function

    F(theta) = 1/2 mu^T Sigma^-1 mu + 1/2 log((2 pi)^d |Sigma|)

of the natural parameters ``theta = (Sigma^-1 mu, -1/2 Sigma^-1)``.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .bregman import Regularizer
from .errors import ConvergenceError, DomainError, InadmissibleStepError

SIGMA_MIN = 0.01
SIGMA_MAX = 2.0
LOG_SIGMA_MIN = math.log(SIGMA_MIN)
LOG_SIGMA_MAX = math.log(SIGMA_MAX)
_LOG_2PI = math.log(2.0 * math.pi)


def _tril_index(d):
    return np.tril_indices(d, -1)


@dataclass(frozen=True, eq=False)
class LdlCovariance:
    """``lower`` holds the strictly-lower entries of ``L`` in row-major order."""

    lower: np.ndarray
    log_sigma: np.ndarray

    def __post_init__(self):
        log_sigma = np.clip(np.asarray(self.log_sigma, dtype=float).ravel(), LOG_SIGMA_MIN, LOG_SIGMA_MAX)
        lower = np.asarray(self.lower, dtype=float).ravel()
        d = log_sigma.size
        if lower.size != d * (d - 1) // 2:
            raise ValueError(f"expected {d * (d - 1) // 2} lower entries for d={d}, got {lower.size}")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(log_sigma))):
            raise DomainError("covariance parameters must be finite")
        object.__setattr__(self, "log_sigma", log_sigma)
        object.__setattr__(self, "lower", lower)

    @property
    def dim(self):
        return self.log_sigma.size

    @property
    def sigma(self):
        return np.exp(self.log_sigma)

    def unit_lower(self):
        d = self.dim
        L = np.eye(d)
        L[_tril_index(d)] = self.lower
        return L

    @classmethod
    def identity(cls, d):
        return cls(np.zeros(d * (d - 1) // 2), np.zeros(d))


def cov_compose(cov):
    L = cov.unit_lower()
    return (L * cov.sigma ** 2) @ L.T


def unit_lower_inverse(L):
    """Inverse of a unit lower-triangular matrix by forward substitution."""
    d = L.shape[0]
    inv = np.eye(d)
    for i in range(1, d):
        inv[i, :i] = -L[i, :i] @ inv[:i, :i]
    return inv


def cov_invert(cov):
    Linv = unit_lower_inverse(cov.unit_lower())
    return (Linv.T / cov.sigma ** 2) @ Linv


def cov_logdet(cov):
    return 2.0 * float(np.sum(cov.log_sigma))


def ldl_decompose(sigma_matrix):
    """Factor an SPD matrix into an :class:`LdlCovariance` (sigma is clipped)."""
    S = np.asarray(sigma_matrix, dtype=float)
    S = 0.5 * (S + S.T)
    try:
        C = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise DomainError("covariance is not positive definite") from exc
    sig = np.diag(C).copy()
    L = C / sig
    return LdlCovariance(L[_tril_index(S.shape[0])], np.log(sig))


@dataclass(frozen=True, eq=False)
class GaussianPolicyParams:
    mean: np.ndarray
    cov: LdlCovariance = field(default=None)

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).ravel()
        if not np.all(np.isfinite(mean)):
            raise DomainError("mean must be finite")
        object.__setattr__(self, "mean", mean)
        if self.cov is None:
            object.__setattr__(self, "cov", LdlCovariance.identity(mean.size))
        if self.cov.dim != mean.size:
            raise ValueError("mean and covariance dimensions differ")

    @property
    def dim(self):
        return self.mean.size

    def covariance(self):
        return cov_compose(self.cov)

    def precision(self):
        return cov_invert(self.cov)

    def to_flat(self):
        """Serialize as ``[mean; log_sigma; lower]``."""
        return np.concatenate([self.mean, self.cov.log_sigma, self.cov.lower])

    @classmethod
    def from_flat(cls, vec, d):
        vec = np.asarray(vec, dtype=float)
        if vec.size != 2 * d + d * (d - 1) // 2:
            raise ValueError("flat vector has the wrong length")
        return cls(vec[:d], LdlCovariance(vec[2 * d:], vec[d:2 * d]))

    @classmethod
    def from_moments(cls, mean, covariance):
        return cls(mean, ldl_decompose(covariance))

    def log_density(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        Linv = unit_lower_inverse(self.cov.unit_lower())
        white = ((x - self.mean) @ Linv.T) / self.cov.sigma
        quad = np.sum(white ** 2, axis=1)
        return -0.5 * (self.dim * _LOG_2PI + cov_logdet(self.cov) + quad)

    def density(self, x):
        return np.exp(self.log_density(x))


@dataclass(frozen=True, eq=False)
class NaturalParams:
    theta1: np.ndarray
    theta2: np.ndarray

    def __add__(self, other):
        return NaturalParams(self.theta1 + other.theta1, self.theta2 + other.theta2)

    def __mul__(self, c):
        return NaturalParams(c * self.theta1, c * self.theta2)

    __rmul__ = __mul__


def natural_params(g):
    P = g.precision()
    return NaturalParams(P @ g.mean, -0.5 * P)


def _precision_chol(theta):
    P = -2.0 * np.asarray(theta.theta2, dtype=float)
    P = 0.5 * (P + P.T)
    try:
        return P, np.linalg.cholesky(P)
    except np.linalg.LinAlgError as exc:
        raise DomainError("second natural parameter is not negative definite") from exc


def log_partition(theta):
    """``F(theta) = -1/4 t1^T t2^-1 t1 + 1/2 log|-pi t2^-1|``."""
    P, C = _precision_chol(theta)
    d = P.shape[0]
    w = np.linalg.solve(C, theta.theta1)
    logdet_P = 2.0 * np.sum(np.log(np.diag(C)))
    return 0.5 * float(w @ w) + 0.5 * (d * _LOG_2PI - logdet_P)


def from_natural(theta):
    """Map natural parameters back to a (sigma-clipped) Gaussian policy."""
    try:
        P, _ = _precision_chol(theta)
    except DomainError as exc:
        raise InadmissibleStepError(str(exc)) from exc
    Sigma = np.linalg.inv(P)
    mean = Sigma @ theta.theta1
    return GaussianPolicyParams(mean, ldl_decompose(Sigma))


def interaction_integral(g, ghat, alpha, beta):
    """``I = int pi^alpha pihat^beta dx = exp{F(a th + b th^) - a F(th) - b F(th^)}``."""
    th, thh = natural_params(g), natural_params(ghat)
    combined = alpha * th + beta * thh
    return math.exp(log_partition(combined) - alpha * log_partition(th) - beta * log_partition(thh))


def _tsallis_exponent(log_sigma, q):
    # F(q theta) - q F(theta); independent of the mean
    d = log_sigma.size
    return (1.0 - q) * (0.5 * d * _LOG_2PI + float(np.sum(log_sigma))) - 0.5 * d * math.log(q)


def tsallis_entropy_gaussian(g, q, k=1.0):
    """``T_q^k = k (1 - int pi^q) / (q - 1)``."""
    if not q > 1.0:
        raise DomainError("Tsallis entropy needs q > 1; use shannon_entropy_gaussian for q = 1")
    return -k * math.expm1(_tsallis_exponent(g.cov.log_sigma, q)) / (q - 1.0)


def shannon_entropy_gaussian(g):
    return 0.5 * (g.dim * (1.0 + _LOG_2PI) + cov_logdet(g.cov))


def kl_gaussian(g, ghat):
    Phat = ghat.precision()
    delta = g.mean - ghat.mean
    tr = float(np.sum(Phat * g.covariance()))
    return 0.5 * (tr + float(delta @ Phat @ delta) - g.dim + cov_logdet(ghat.cov) - cov_logdet(g.cov))


def _check_reg(reg):
    if reg.kind not in ("shannon", "tsallis"):
        raise ValueError(f"Gaussian geometry supports shannon and tsallis only, got {reg.kind}")


def bregman_div_gaussian(g, ghat, reg):
    """Bregman divergence between Gaussians under a Shannon or Tsallis regularizer."""
    _check_reg(reg)
    if reg.kind == "shannon":
        return kl_gaussian(g, ghat)
    q, k = reg.q, reg.k
    th, thh = natural_params(g), natural_params(ghat)
    log_i = log_partition(th + (q - 1.0) * thh) - log_partition(th) - (q - 1.0) * log_partition(thh)
    t_p = tsallis_entropy_gaussian(g, q)
    t_hat = tsallis_entropy_gaussian(ghat, q)
    return k * (-q / (q - 1.0) * math.expm1(log_i) - t_p - (q - 1.0) * t_hat)


class _Anchor:
    """Moments of a fixed comparison Gaussian, precomputed for repeated use."""

    def __init__(self, g, reg):
        self.mean = g.mean
        self.cov = g.covariance()
        self.prec = g.precision()
        self.logdet = cov_logdet(g.cov)
        d = g.dim
        if reg.kind == "tsallis":
            beta = reg.q - 1.0
            self.scaled_cov = self.cov / beta
            # log of int pihat^beta dx minus log N(.; mean, cov/beta) normalizer
            self.log_c = (1.0 - beta) * (0.5 * d * _LOG_2PI + 0.5 * self.logdet) - 0.5 * d * math.log(beta)
            self.t1 = -math.expm1(_tsallis_exponent_logdet(self.logdet, d, reg.q)) / beta


def _tsallis_exponent_logdet(logdet, d, q):
    return (1.0 - q) * (0.5 * d * _LOG_2PI + 0.5 * logdet) - 0.5 * d * math.log(q)


def _moments_from_flat(x, d):
    mu = x[:d]
    ls = np.clip(x[d:2 * d], LOG_SIGMA_MIN, LOG_SIGMA_MAX)
    L = np.eye(d)
    L[_tril_index(d)] = x[2 * d:]
    s2 = np.exp(2.0 * ls)
    Linv = unit_lower_inverse(L)
    Sigma = (L * s2) @ L.T
    P = (Linv.T / s2) @ Linv
    return mu, L, s2, Sigma, P, 2.0 * float(np.sum(ls))


def _div_terms(mu, Sigma, P, logdet, anchor, reg):
    """``D(g || anchor)`` with gradients w.r.t. ``mean`` and ``Sigma``.

    The Sigma gradient is the symmetric ``G`` with ``dD = tr(G dSigma)``.
    """
    d = mu.size
    delta = mu - anchor.mean
    if reg.kind == "shannon":
        Pd = anchor.prec @ delta
        val = 0.5 * (float(np.sum(anchor.prec * Sigma)) + float(delta @ Pd) - d + anchor.logdet - logdet)
        return val, Pd, 0.5 * (anchor.prec - P)
    q, k = reg.q, reg.k
    beta = q - 1.0
    # int pi pihat^beta = C * N(mu; muhat, Sigma + Sigmahat / beta)
    A = Sigma + anchor.scaled_cov
    C = np.linalg.cholesky(A)
    Ainv = np.linalg.inv(A)
    Ad = Ainv @ delta
    log_i = anchor.log_c - 0.5 * (d * _LOG_2PI + 2.0 * np.sum(np.log(np.diag(C))) + float(delta @ Ad))
    e_c = math.exp(_tsallis_exponent_logdet(logdet, d, q))
    t1 = -math.expm1(_tsallis_exponent_logdet(logdet, d, q)) / beta
    val = k * (-q / beta * math.expm1(log_i) - t1 - beta * anchor.t1)
    coef = -k * q / beta * math.exp(log_i)
    grad_mu = -coef * Ad
    grad_sigma = coef * 0.5 * (np.outer(Ad, Ad) - Ainv) - 0.5 * k * e_c * P
    return val, grad_mu, grad_sigma


def _chain_to_ldl(L, s2, grad_sigma):
    G = 0.5 * (grad_sigma + grad_sigma.T)
    grad_L = 2.0 * (G @ L) * s2
    grad_log_sigma = 2.0 * s2 * np.diag(L.T @ G @ L)
    return grad_log_sigma, grad_L[_tril_index(L.shape[0])]


def div_grad_flat(g, ghat, reg):
    """``D(g || ghat)`` and its gradient w.r.t. ``g.to_flat()``."""
    _check_reg(reg)
    d = g.dim
    mu, L, s2, Sigma, P, logdet = _moments_from_flat(g.to_flat(), d)
    val, gmu, gsig = _div_terms(mu, Sigma, P, logdet, _Anchor(ghat, reg), reg)
    gls, glow = _chain_to_ldl(L, s2, gsig)
    return val, np.concatenate([gmu, gls, glow])


def psi_gaussian(g, a, q=1.0, k=1.0):
    """Regularized reward of action(s) ``a`` under a Gaussian policy.

    ``q == 1`` gives ``k log pi(a)``; otherwise
    ``q k (pi(a)^(q-1) - 1)/(q-1) + (q-1) T_q^k(pi)``.
    """
    logp = g.log_density(a)
    if q == 1.0:
        out = k * logp
    else:
        phi = k * np.expm1((q - 1.0) * logp) / (q - 1.0)
        out = q * phi + (q - 1.0) * tsallis_entropy_gaussian(g, q, k)
    a = np.asarray(a, dtype=float)
    return float(out[0]) if a.ndim <= 1 else out


def sample_action(g, rng, size=None):
    """Draw ``mean + L (sigma * z)`` with ``z ~ N(0, I)``."""
    n = 1 if size is None else int(size)
    z = rng.standard_normal((n, g.dim))
    a = g.mean + (z * g.cov.sigma) @ g.cov.unit_lower().T
    return a[0] if size is None else a


def md_objective(g, current, target, eta, reg):
    """``eta D(g || target) + (1 - eta) D(g || current)``."""
    return eta * bregman_div_gaussian(g, target, reg) + (1.0 - eta) * bregman_div_gaussian(g, current, reg)


class _MdObjective:
    def __init__(self, current, target, eta, reg):
        self.d = current.dim
        self.eta = eta
        self.reg = reg
        self.cur = _Anchor(current, reg)
        self.tgt = _Anchor(target, reg)
        self.evals = 0

    def __call__(self, x):
        self.evals += 1
        mu, L, s2, Sigma, P, logdet = _moments_from_flat(x, self.d)
        try:
            vt, mt, st = _div_terms(mu, Sigma, P, logdet, self.tgt, self.reg)
            vc, mc, sc = _div_terms(mu, Sigma, P, logdet, self.cur, self.reg)
        except np.linalg.LinAlgError:
            return np.inf, np.zeros_like(x)
        e = self.eta
        gls, glow = _chain_to_ldl(L, s2, e * st + (1.0 - e) * sc)
        return e * vt + (1.0 - e) * vc, np.concatenate([e * mt + (1.0 - e) * mc, gls, glow])


def _bounds_of(d):
    return [(None, None)] * d + [(LOG_SIGMA_MIN, LOG_SIGMA_MAX)] * d + [(None, None)] * (d * (d - 1) // 2)


def _projected_grad(x, grad, d):
    pg = grad.copy()
    ls = x[d:2 * d]
    gl = pg[d:2 * d]
    gl[(ls <= LOG_SIGMA_MIN) & (gl > 0)] = 0.0
    gl[(ls >= LOG_SIGMA_MAX) & (gl < 0)] = 0.0
    return pg


def _gd(fun, x, d, tol, max_iter):
    f, grad = fun(x)
    pg = _projected_grad(x, grad, d)
    step = 1.0
    it = 0
    while it < max_iter and np.max(np.abs(pg)) >= tol:
        it += 1
        accepted = False
        for _ in range(60):
            trial = x - step * pg
            trial[d:2 * d] = np.clip(trial[d:2 * d], LOG_SIGMA_MIN, LOG_SIGMA_MAX)
            ft, gt = fun(trial)
            if ft <= f - 1e-4 * float(pg @ (x - trial)):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        x, f, grad = trial, ft, gt
        pg = _projected_grad(x, grad, d)
        step = min(step * 2.0, 1e3)
    return x, f, pg, it


def _lbfgsb(fun, x, d, tol, max_iter):
    from scipy.optimize import minimize

    res = minimize(fun, x, jac=True, method="L-BFGS-B", bounds=_bounds_of(d),
                   options={"maxiter": max_iter, "gtol": 0.25 * tol, "ftol": 0.0, "maxcor": 20})
    f, grad = fun(res.x)
    return res.x, f, _projected_grad(res.x, grad, d), int(res.nit)


def natural_interpolation(current, target, eta):
    """Exact Shannon mirror step: ``theta' = (1 - eta) theta_cur + eta theta_tgt``."""
    theta = (1.0 - eta) * natural_params(current) + eta * natural_params(target)
    return from_natural(theta)


def md_update_gaussian(current, target, eta, reg, tol=1e-6, max_iter=500, method="lbfgsb", return_info=False):
    """One mirror-descent step between Gaussian policies.

    Shannon steps interpolate natural parameters exactly.  Tsallis steps
    minimize ``eta D(. || target) + (1 - eta) D(. || current)`` over the LDL
    parameters with box bounds on ``log_sigma``, warm-started at the better
    of the Shannon point and ``current``.  ``method`` is ``"lbfgsb"``
    (quasi-Newton, default) or ``"gd"`` (projected gradient descent with
    Armijo backtracking); both stop on ``max |projected grad| < tol``.
    """
    _check_reg(reg)
    if eta < 0:
        raise ValueError("step size must be nonnegative")
    d = current.dim
    if reg.kind == "shannon":
        out = natural_interpolation(current, target, eta)
        info = {"iterations": 0, "grad_norm": 0.0}
        return (out, info) if return_info else out
    if eta == 0:
        info = {"iterations": 0, "grad_norm": 0.0, "objective": 0.0}
        return (current, info) if return_info else current

    fun = _MdObjective(current, target, eta, reg)
    best = None
    starts = [current.to_flat()]
    try:
        starts.append(natural_interpolation(current, target, eta).to_flat())
    except InadmissibleStepError:
        pass
    for x0 in starts:
        f0, _ = fun(x0)
        if best is None or f0 < best[0]:
            best = (f0, x0)
    solver = {"lbfgsb": _lbfgsb, "gd": _gd}.get(method)
    if solver is None:
        raise ValueError(f"unknown method {method!r}")
    x, f, pg, it = solver(fun, best[1], d, tol, max_iter)
    if not np.isfinite(f):
        raise InadmissibleStepError("Tsallis MD objective left the admissible region")
    gnorm = float(np.max(np.abs(pg)))
    if gnorm >= tol:
        raise ConvergenceError(
            f"Tsallis MD step stopped after {it} iterations with projected gradient {gnorm:.3e}", gnorm
        )
    out = GaussianPolicyParams.from_flat(x, d)
    info = {"iterations": it, "grad_norm": gnorm, "objective": f, "evals": fun.evals}
    return (out, info) if return_info else out
