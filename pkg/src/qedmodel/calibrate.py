"""Maximum-likelihood calibration of the log-space diffusion.

Transitions follow the Euler density ``dy ~ Normal(-V'(y_t) dt, sigma**2 dt)``
with ``V'(y) = -theta_bar + kappa e**y + g e**(2y)`` evaluated at the left
endpoint.  Two problems are solved:

* unconstrained: the data NLL alone over ``(theta, sigma, kappa, g>=0)``;
* constrained (``lambda1 > 0`` with an observed spread): NLL plus a CDS
  penalty tying the Kramers spread to the observed one and a barrier-region
  penalty, with the parameters kept metastable by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DataError
from .params import ModelParams
from .rates import hazard_to_spread, kramers_rate_or_none

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class CalibConfig:
    """Calibration settings.

    ``step_size`` is the Adam learning rate in the internal coordinates,
    ``tol`` the relative loss change below which an optimizer run stops.
    """

    lambda1: float = 0.0
    lambda2: float = 1e5
    dt: float = 1.0 / 252.0
    recovery: float = 0.4
    nu: int = 2
    max_iters: int = 2000
    step_size: float = 0.02
    tol: float = 1e-12
    restarts: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ConfigError("penalty weights must be >= 0")
        if not 0 <= self.recovery < 1:
            raise ConfigError("recovery must lie in [0, 1)")
        if not self.dt > 0:
            raise ConfigError("dt must be > 0")
        if self.max_iters < 0 or self.restarts < 0 or self.step_size <= 0:
            raise ConfigError("optimizer settings must be non-negative")


@dataclass(frozen=True)
class CalibrationResult:
    params: ModelParams
    nll: float
    penalty_cds: float
    penalty_barrier: float
    kramers_rate: float | None
    model_spread_bps: float | None
    observed_mean_spread_bps: float | None
    converged: bool
    iterations: int
    constrained: bool
    diagnostics: dict = field(default_factory=dict)

    @property
    def loss(self) -> float:
        return self.nll + self.penalty_cds + self.penalty_barrier

    @property
    def log_likelihood(self) -> float:
        return -self.nll


@dataclass(frozen=True)
class GbmFit:
    drift: float
    sigma: float
    nll: float
    degenerate: bool


# ------------------------------------------------------------------ NLL

def _as_series(series) -> np.ndarray:
    y = np.asarray(getattr(series, "y", series), dtype=float)
    if y.ndim != 1 or y.size < 2:
        raise DataError("a series needs at least two observations")
    if not np.all(np.isfinite(y)):
        raise DataError("series contains non-finite values")
    return y


def _residuals(y: np.ndarray, theta_bar: float, kappa: float, g: float, dt: float):
    e = np.exp(y[:-1])
    dv = -theta_bar + e * (kappa + g * e)
    return np.diff(y) + dv * dt, e


def nll_qed(series, p: ModelParams, dt: float = 1.0 / 252.0) -> float:
    """Euler negative log-likelihood of a log-price series."""
    y = _as_series(series)
    if not dt > 0:
        raise ConfigError("dt must be > 0")
    r, _ = _residuals(y, p.theta_bar, p.kappa, p.g, dt)
    s2dt = p.sigma**2 * dt
    return float(0.5 * r.size * (LOG_2PI + math.log(s2dt)) + np.dot(r, r) / (2.0 * s2dt))


def nll_qed_grad(series, p: ModelParams, dt: float = 1.0 / 252.0) -> tuple[float, np.ndarray]:
    """NLL and its gradient with respect to ``(theta, sigma, kappa, g)``."""
    y = _as_series(series)
    r, e = _residuals(y, p.theta_bar, p.kappa, p.g, dt)
    n = r.size
    s = p.sigma
    s2 = s * s
    rr = float(np.dot(r, r))
    nll = 0.5 * n * (LOG_2PI + math.log(s2 * dt)) + rr / (2.0 * s2 * dt)
    sr = float(r.sum())
    sre = float(np.dot(r, e))
    sre2 = float(np.dot(r, e * e))
    d_theta = -sr / s2
    # theta_bar = theta - sigma^2/2 contributes sigma * sum(r) / sigma^2
    d_sigma = n / s - rr / (s2 * s * dt) + sr / s
    return nll, np.array([d_theta, d_sigma, sre / s2, sre2 / s2])


def gbm_mle(series, dt: float = 1.0 / 252.0) -> GbmFit:
    """Closed-form MLE of ``dy ~ Normal(m dt, sigma**2 dt)``.

    ``m = mean(dy)/dt`` and ``sigma**2 = var(dy)/dt`` (population variance).
    A zero variance is reported as ``degenerate`` with ``nll = -inf``.
    """
    y = _as_series(series)
    dy = np.diff(y)
    m = float(dy.mean()) / dt
    var = float(np.mean((dy - dy.mean()) ** 2))
    if var <= 0:
        return GbmFit(m, 0.0, -math.inf, True)
    sigma = math.sqrt(var / dt)
    return GbmFit(m, sigma, nll_gbm(y, m, sigma, dt), False)


def nll_gbm(series, mu_drift: float, sigma: float, dt: float = 1.0 / 252.0) -> float:
    """Gaussian NLL with constant drift ``mu_drift`` in log space."""
    y = _as_series(series)
    if not sigma > 0:
        raise DataError("sigma must be > 0")
    r = np.diff(y) - mu_drift * dt
    s2dt = sigma**2 * dt
    return float(0.5 * r.size * (LOG_2PI + math.log(s2dt)) + np.dot(r, r) / (2.0 * s2dt))


# -------------------------------------------------------------- penalties

def _deficit(theta_bar: float, kappa: float, g: float) -> float:
    """Smooth distance from the metastable region (zero inside)."""
    disc = kappa * kappa + 4.0 * g * theta_bar
    return max(kappa, 0.0) ** 2 + max(theta_bar, 0.0) ** 2 + max(-disc, 0.0)


def _barrier_top(theta_bar: float, kappa: float, g: float) -> float | None:
    if not (kappa < 0 and theta_bar < 0 and g > 0):
        return None
    disc = kappa * kappa + 4.0 * g * theta_bar
    if disc < 0:
        return None
    q = -0.5 * (kappa - math.sqrt(disc))
    return math.log(min(q / g, -theta_bar / q))


def kramers_penalty(p: ModelParams, observed_mean_spread_bps: float | None, lambda1: float,
                    recovery: float = 0.4) -> float:
    """``lambda1 * (observed - kramers_rate*(1-R)*1e4)**2``.

    Outside the metastable region the model spread is undefined and the
    finite surrogate ``lambda1 * (observed**2 + deficit)`` is used, where the
    deficit grows with the violation of ``kappa<0``, ``theta_bar<0`` and a
    non-negative discriminant.
    """
    if lambda1 == 0 or observed_mean_spread_bps is None:
        return 0.0
    rate = kramers_rate_or_none(p.theta_bar, p.kappa, p.g, p.sigma)
    if rate is None:
        return lambda1 * (observed_mean_spread_bps**2 + _deficit(p.theta_bar, p.kappa, p.g))
    return lambda1 * (observed_mean_spread_bps - hazard_to_spread(rate, recovery)) ** 2


def barrier_region_penalty(series, p: ModelParams, lambda2: float) -> float:
    """``lambda2 * sum_t max(y_max - y_t, 0)`` over transition left endpoints.

    Without a barrier the surrogate ``lambda2 * (1 + deficit)`` per
    transition is returned, which is strictly positive.
    """
    y = _as_series(series)
    if lambda2 == 0:
        return 0.0
    y_max = _barrier_top(p.theta_bar, p.kappa, p.g)
    if y_max is None:
        return lambda2 * (1.0 + _deficit(p.theta_bar, p.kappa, p.g)) * (y.size - 1)
    return float(lambda2 * np.maximum(y_max - y[:-1], 0.0).sum())


def kappa_reparam(kappa_prev: float, g: float, theta_bar: float) -> float:
    """``-(2 sqrt(g |theta_bar|) + |kappa_prev|)``: negative with real log-space extrema."""
    if g < 0:
        raise ConfigError("g must be >= 0")
    return -(2.0 * math.sqrt(g * abs(theta_bar)) + abs(kappa_prev))


# ----------------------------------------------------------- warm start

def profile_mle(series, dt: float = 1.0 / 252.0) -> tuple[float, float, float, float]:
    """Exact minimizer of the Euler NLL over ``(theta_bar, kappa, g >= 0, sigma)``.

    For fixed ``sigma`` the NLL is a least-squares problem in
    ``(theta_bar, kappa, g)``; the bound ``g >= 0`` is active only if the
    free solution has ``g < 0``, in which case ``g = 0`` is refitted.  Then
    ``sigma**2 = RSS / (n dt)``.  Returns ``(theta_bar, kappa, g, sigma)``.
    """
    y = _as_series(series)
    e = np.exp(y[:-1])
    target = -np.diff(y) / dt  # = -theta_bar + kappa e + g e^2 + noise
    design = np.column_stack([-np.ones_like(e), e, e * e])
    coef = _lstsq(design, target)
    if coef[2] < 0:
        coef = np.append(_lstsq(design[:, :2], target), 0.0)
    resid = np.diff(y) + (design @ coef) * dt
    sigma = math.sqrt(max(float(np.dot(resid, resid)) / (resid.size * dt), 1e-300))
    return float(coef[0]), float(coef[1]), float(coef[2]), sigma


def _lstsq(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # column scaling keeps the normal equations well conditioned
    scale = np.maximum(np.abs(a).max(axis=0), 1e-300)
    sol = np.linalg.lstsq(a / scale, b, rcond=None)[0]
    return sol / scale


# ------------------------------------------------------------- objective

class _Objective:
    """Loss in internal coordinates ``u``.

    Unconstrained: ``u = (theta_bar, ln sigma, kappa, ln g)``.
    Constrained: ``u = (ln(-theta_bar), ln sigma, kappa_raw, ln g)`` with
    ``kappa = kappa_reparam(kappa_raw, g, theta_bar)``.
    """

    def __init__(self, y: np.ndarray, cfg: CalibConfig, observed: float | None):
        self.y = y
        self.cfg = cfg
        self.observed = observed
        self.constrained = cfg.lambda1 > 0 and observed is not None

    def natural(self, u: np.ndarray) -> tuple[float, float, float, float]:
        """``(theta_bar, sigma, kappa, g)`` from internal coordinates."""
        sigma = math.exp(u[1])
        g = math.exp(u[3])
        if self.constrained:
            tb = -math.exp(u[0])
            kappa = kappa_reparam(float(u[2]), g, tb)
        else:
            tb, kappa = float(u[0]), float(u[2])
        return tb, sigma, kappa, g

    def params(self, u: np.ndarray) -> ModelParams:
        tb, sigma, kappa, g = self.natural(u)
        return ModelParams.from_theta_bar(tb, kappa, g, sigma, self.cfg.nu)

    def penalties(self, u: np.ndarray) -> tuple[float, float]:
        if not self.constrained:
            return 0.0, 0.0
        p = self.params(u)
        return (kramers_penalty(p, self.observed, self.cfg.lambda1, self.cfg.recovery),
                barrier_region_penalty(self.y, p, self.cfg.lambda2))

    def nll_and_grad(self, u: np.ndarray) -> tuple[float, np.ndarray]:
        tb, sigma, kappa, g = self.natural(u)
        dt = self.cfg.dt
        r, e = _residuals(self.y, tb, kappa, g, dt)
        n = r.size
        s2 = sigma * sigma
        rr = float(np.dot(r, r))
        nll = 0.5 * n * (LOG_2PI + math.log(s2 * dt)) + rr / (2.0 * s2 * dt)
        d_tb = -float(r.sum()) / s2
        d_kappa = float(np.dot(r, e)) / s2
        d_g = float(np.dot(r, e * e)) / s2
        d_lnsigma = n - rr / (s2 * dt)
        if self.constrained:
            root = math.sqrt(g * abs(tb))
            dk_du2 = -math.copysign(1.0, u[2]) if u[2] != 0 else 0.0
            grad = np.array([d_tb * tb - d_kappa * root,
                             d_lnsigma,
                             d_kappa * dk_du2,
                             d_g * g - d_kappa * root])
        else:
            grad = np.array([d_tb, d_lnsigma, d_kappa, d_g * g])
        return nll, grad

    def loss_and_grad(self, u: np.ndarray) -> tuple[float, np.ndarray]:
        nll, grad = self.nll_and_grad(u)
        if not self.constrained:
            return nll, grad
        pen = sum(self.penalties(u))
        # finite differences for the penalty terms
        gpen = np.empty(4)
        for i in range(4):
            h = 1e-6 * max(1.0, abs(u[i]))
            up, dn = u.copy(), u.copy()
            up[i] += h
            dn[i] -= h
            gpen[i] = (sum(self.penalties(up)) - sum(self.penalties(dn))) / (2.0 * h)
        return nll + pen, grad + gpen


def _adam(obj: _Objective, u0: np.ndarray, cfg: CalibConfig) -> tuple[np.ndarray, float, int, bool]:
    """Adam with a decaying step; returns the best iterate seen."""
    u = u0.copy()
    m = np.zeros_like(u)
    v = np.zeros_like(u)
    b1, b2, eps = 0.9, 0.999, 1e-12
    best_u, best_loss = u.copy(), math.inf
    history: list[float] = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        loss, grad = obj.loss_and_grad(u)
        if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
            break
        if loss < best_loss:
            best_loss, best_u = loss, u.copy()
        history.append(loss)
        if len(history) > 50:
            old = history[-51]
            if abs(old - loss) <= cfg.tol * max(1.0, abs(loss)):
                converged = True
                break
        m = b1 * m + (1 - b1) * grad
        v = b2 * v + (1 - b2) * grad * grad
        mh = m / (1 - b1**it)
        vh = v / (1 - b2**it)
        lr = cfg.step_size / math.sqrt(1.0 + it / 200.0)
        u = u - lr * mh / (np.sqrt(vh) + eps)
    loss, _ = obj.loss_and_grad(u)
    if math.isfinite(loss) and loss < best_loss:
        best_loss, best_u = loss, u.copy()
    return best_u, best_loss, it, converged


def _warm_start(obj: _Objective, y: np.ndarray, dt: float) -> np.ndarray:
    tb, kappa, g, sigma = profile_mle(y, dt)
    if not obj.constrained:
        return np.array([tb, math.log(sigma), kappa, math.log(max(g, 1e-300))])
    tb = min(tb, -1e-3)
    g = max(g, 1e-3)
    kappa_raw = max(abs(min(kappa, 0.0)) - 2.0 * math.sqrt(g * abs(tb)), 0.0)
    return np.array([math.log(-tb), math.log(sigma), kappa_raw, math.log(g)])


def _random_start(obj: _Objective, base: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    u = base.copy()
    u[1] += rng.normal(0.0, 0.05)
    if obj.constrained:
        u[0] = rng.uniform(math.log(0.05), math.log(5.0))
        u[2] = rng.uniform(0.0, 1.0)
        u[3] = rng.uniform(math.log(0.05), math.log(20.0))
    else:
        u[0] += rng.normal(0.0, 0.5)
        u[2] += rng.normal(0.0, 0.5)
        u[3] = rng.uniform(math.log(1e-3), math.log(20.0))
    return u


def calibrate(series, cds_mean_bps: float | None = None,
              config: CalibConfig | None = None) -> CalibrationResult:
    """Fit ``(theta, sigma, kappa, g)`` to a log-price series.

    The first optimizer run starts from :func:`profile_mle`; ``restarts``
    further runs start from seeded random points.  The lowest-loss iterate
    over all runs is returned.  Never raises on optimizer trouble: the
    result carries ``converged=False`` and diagnostics instead.
    """
    cfg = config or CalibConfig()
    y = _as_series(series)
    obj = _Objective(y, cfg, cds_mean_bps)
    rng = np.random.default_rng(cfg.seed)
    base = _warm_start(obj, y, cfg.dt)
    starts = [base] + [_random_start(obj, base, rng) for _ in range(cfg.restarts)]
    best = None
    runs = []
    for u0 in starts:
        u, loss, iters, conv = _adam(obj, u0, cfg)
        runs.append({"loss": loss, "iterations": iters, "converged": conv})
        if best is None or loss < best[1]:
            best = (u, loss, iters, conv)
    u, loss, iters, conv = best
    # the unconstrained warm start is the exact optimum; keep it if nothing beat it
    if not obj.constrained:
        start_loss = obj.loss_and_grad(base)[0]
        if start_loss <= loss:
            u, loss = base, start_loss
            tb, kappa, g, sigma = profile_mle(y, cfg.dt)
            p = ModelParams.from_theta_bar(tb, kappa, g, sigma, cfg.nu)
        else:
            p = obj.params(u)
    else:
        p = obj.params(u)
    nll = nll_qed(y, p, cfg.dt)
    pen_cds, pen_bar = obj.penalties(u) if obj.constrained else (0.0, 0.0)
    rate = kramers_rate_or_none(p.theta_bar, p.kappa, p.g, p.sigma)
    spread = hazard_to_spread(rate, cfg.recovery) if rate is not None else None
    return CalibrationResult(
        params=p, nll=nll, penalty_cds=pen_cds, penalty_barrier=pen_bar,
        kramers_rate=rate, model_spread_bps=spread, observed_mean_spread_bps=cds_mean_bps,
        converged=conv, iterations=iters, constrained=obj.constrained,
        diagnostics={"runs": runs})


# ------------------------------------------------------------- comparison

@dataclass(frozen=True)
class ComparisonRow:
    """One year of the GBM versus QED log-likelihood comparison."""

    year: int
    ll_gbm: float
    ll_qed_unconstrained: float
    ll_qed_constrained: dict
    model_spread_bps: dict
    observed_spread_bps: float | None


def compare_models(series_by_year: dict, cds_by_year: dict | None = None,
                   config: CalibConfig | None = None,
                   lambdas: tuple[float, ...] = (0.1, 1.0, 10.0)) -> list[ComparisonRow]:
    """Per-year maximum log-likelihoods under GBM, unconstrained QED and
    constrained QED for each ``lambda1``.

    Constrained log-likelihoods are the pure data part ``-NLL`` at the
    penalized optimum.  Years without a CDS mean get no constrained fits.
    """
    cfg = config or CalibConfig()
    cds_by_year = cds_by_year or {}
    rows = []
    for year in sorted(series_by_year):
        y = _as_series(series_by_year[year])
        gbm = gbm_mle(y, cfg.dt)
        free = calibrate(y, None, replace(cfg, lambda1=0.0))
        obs = cds_by_year.get(year)
        ll_c, spreads = {}, {}
        if obs is not None:
            for lam in lambdas:
                res = calibrate(y, obs, replace(cfg, lambda1=lam))
                ll_c[lam] = -res.nll
                spreads[lam] = res.model_spread_bps
        rows.append(ComparisonRow(year, -gbm.nll, -free.nll, ll_c, spreads, obs))
    return rows
