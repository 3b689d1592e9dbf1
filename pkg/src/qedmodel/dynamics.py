"""Deterministic solutions, Euler-Maruyama simulation and Monte Carlo escape rates.

Randomness comes from per-path Philox streams spawned off one
``numpy.random.SeedSequence``, so path ``i`` sees the same normals regardless
of how many paths are simulated or how work is scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import ConfigError, DomainError, InconclusiveError, SingularityError
from .params import ModelParams
from .potentials import barrier

X_ABS = 1e-8
Y_ABS = math.log(X_ABS)
BLOWUP_LEVEL = 1e12
_BATCH = 32
_CHUNK = 1 << 12


# ------------------------------------------------------------ deterministic

def verhulst_solution(x0: float, t, theta: float, kappa: float):
    """Closed-form solution of ``dx/dt = theta*x - kappa*x**2``.

    Raises
    ------
    SingularityError
        If ``t`` lies at or beyond the finite-time blow-up in its direction.
    """
    t_arr = np.asarray(t, dtype=float)
    t_inf = blowup_time(x0, theta, kappa) if x0 > 0 else None
    if t_inf is not None:
        beyond = (t_arr >= t_inf) if t_inf > 0 else (t_arr <= t_inf)
        if np.any(beyond):
            raise SingularityError(f"solution is singular at t = {t_inf:.12g}", t_inf)
    if theta == 0:
        out = x0 / (1.0 + kappa * x0 * t_arr)
    else:
        growth = np.expm1(theta * t_arr)
        out = x0 * (growth + 1.0) / (1.0 + (kappa / theta) * x0 * growth)
    return float(out) if out.ndim == 0 else out


def blowup_time(x0: float, theta: float, kappa: float) -> float | None:
    """Finite-time singularity ``(1/theta) ln(1 - theta/(kappa*x0))`` or None.

    Negative values denote a singularity in the past.
    """
    if x0 <= 0:
        raise DomainError("blow-up time requires x0 > 0")
    if kappa == 0:
        return None
    if theta == 0:
        return -1.0 / (kappa * x0)
    arg = 1.0 - theta / (kappa * x0)
    if arg <= 0:
        return None
    return math.log(arg) / theta


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    values: np.ndarray
    blew_up: bool


def integrate_deterministic(x0: float, p: ModelParams, t_end: float, dt: float) -> Trajectory:
    """Classical RK4 for ``dx/dt = theta*x - kappa*x**2 - g*x**3``.

    Integration stops early (``blew_up=True``) once ``|x|`` exceeds 1e12.
    """
    if not dt > 0 or not t_end >= 0:
        raise ConfigError("dt must be > 0 and t_end >= 0")
    n = int(math.ceil(t_end / dt - 1e-9))
    times, values, k = _rk4(float(x0), p.theta, p.kappa, p.g, dt, n, BLOWUP_LEVEL)
    return Trajectory(times[: k + 1], values[: k + 1], k < n)


@numba.njit(cache=True)
def _rk4(x0, theta, kappa, g, dt, n, cap):
    times = np.empty(n + 1)
    values = np.empty(n + 1)
    times[0] = 0.0
    values[0] = x0
    x = x0
    for i in range(n):
        k1 = x * (theta - x * (kappa + g * x))
        xa = x + 0.5 * dt * k1
        k2 = xa * (theta - xa * (kappa + g * xa))
        xb = x + 0.5 * dt * k2
        k3 = xb * (theta - xb * (kappa + g * xb))
        xc = x + dt * k3
        k4 = xc * (theta - xc * (kappa + g * xc))
        xn = x + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        if not np.isfinite(xn) or abs(xn) > cap:
            return times, values, i
        x = xn
        times[i + 1] = (i + 1) * dt
        values[i + 1] = x
    return times, values, n


# ---------------------------------------------------------------- stochastic

@dataclass(frozen=True)
class PathEnsemble:
    """Simulated trajectories.

    ``values[i, j]`` is path ``i`` at ``times[j]``.  ``first_passage[i]`` is
    NaN for paths that were never absorbed.
    """

    times: np.ndarray
    values: np.ndarray
    absorbed: np.ndarray
    first_passage: np.ndarray
    seed: int
    dt: float
    space: str

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def terminal(self) -> np.ndarray:
        return self.values[:, -1]


def path_generators(seed: int, n_paths: int) -> list[np.random.Generator]:
    """Independent per-path Philox generators derived from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(n_paths)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def _check_sim_config(dt, n_paths, t_end):
    if not (isinstance(dt, (int, float)) and dt > 0 and math.isfinite(dt)):
        raise ConfigError(f"dt must be a positive finite number, got {dt!r}")
    if not (isinstance(n_paths, (int, np.integer)) and n_paths >= 1):
        raise ConfigError(f"n_paths must be a positive integer, got {n_paths!r}")
    if not (t_end > 0 and math.isfinite(t_end)):
        raise ConfigError(f"t_end must be positive, got {t_end!r}")


def simulate_sde(x0: float, p: ModelParams, t_end: float, dt: float, n_paths: int,
                 seed: int = 0, space: str = "x", record_every: int = 1,
                 x_abs: float = X_ABS, y_abs: float | None = None) -> PathEnsemble:
    """Euler-Maruyama simulation with absorption.

    Parameters
    ----------
    x0 : float
        Initial price level (> 0).  In y-space the start is ``ln x0``.
    space : {"x", "y"}
        ``x``: ``dX = f(X)dt + sigma*X*dW``, absorbed once ``X <= x_abs``
        (then pinned at 0).  ``y``: ``dy = -V'(y)dt + sigma*dW``, absorbed
        once ``y <= y_abs`` (default ``ln x_abs``).
    record_every : int
        Keep every ``record_every``-th step; the terminal time is always kept.
    """
    _check_sim_config(dt, n_paths, t_end)
    if not x0 > 0:
        raise DomainError("x0 must be > 0")
    if space not in ("x", "y"):
        raise ConfigError("space must be 'x' or 'y'")
    if record_every < 1:
        raise ConfigError("record_every must be >= 1")
    n_steps = int(math.ceil(t_end / dt - 1e-9))
    rec = np.arange(0, n_steps + 1, record_every)
    if rec[-1] != n_steps:
        rec = np.append(rec, n_steps)
    times = rec * dt
    values = np.empty((n_paths, rec.size))
    absorbed = np.zeros(n_paths, dtype=bool)
    fpt = np.full(n_paths, np.nan)
    sq = p.sigma * math.sqrt(dt)
    if space == "x":
        start, level, xmode = float(x0), float(x_abs), True
    else:
        start = math.log(x0)
        level = float(Y_ABS if y_abs is None else y_abs)
        xmode = False
    for i, gen in enumerate(path_generators(seed, n_paths)):
        z = gen.standard_normal(n_steps)
        hit = _euler_path(z, start, p.theta, p.theta_bar, p.kappa, p.g, dt, sq,
                          level, xmode, rec, values[i])
        if hit >= 0:
            absorbed[i] = True
            fpt[i] = (hit + 1) * dt
    return PathEnsemble(times, values, absorbed, fpt, seed, dt, space)


@numba.njit(cache=True)
def _euler_path(z, start, theta, theta_bar, kappa, g, dt, sq, level, xmode, rec, out):
    """Advance one path through all normals; returns the absorbing step or -1."""
    v = start
    hit = -1
    out[0] = v
    r = 1
    nrec = rec.shape[0]
    for k in range(z.shape[0]):
        if hit < 0:
            if xmode:
                v = v + v * (theta - v * (kappa + g * v)) * dt + sq * v * z[k]
                if v <= level:
                    v = 0.0
                    hit = k
            else:
                e = math.exp(v)
                v = v - (-theta_bar + e * (kappa + g * e)) * dt + sq * z[k]
                if v <= level:
                    hit = k
        while r < nrec and rec[r] == k + 1:
            out[r] = v
            r += 1
    return hit


@dataclass(frozen=True)
class EscapeEstimate:
    """Monte Carlo escape rate.

    ``rate`` is the censored-exponential maximum-likelihood estimate
    ``n_absorbed / total_time`` where ``total_time`` sums first-passage times
    of absorbed paths and ``t_max`` for survivors; with no censoring it equals
    ``1/mean(first_passage)``.
    """

    rate: float
    stderr: float
    n_paths: int
    n_absorbed: int
    t_max: float
    total_time: float
    mean_first_passage: float
    method: str = "mc-first-passage"


def mc_escape_rate(p: ModelParams, dt: float = 1e-3, n_paths: int = 2000, seed: int = 0,
                   t_max: float | None = None, y_abs: float | None = None) -> EscapeEstimate:
    """Escape rate from the metastable well by first-passage simulation in y-space.

    Each path starts at the well bottom and is absorbed at
    ``y_abs = y_max - 3*(y_min - y_max)`` unless given.  Paths still alive at
    ``t_max`` are censored.  ``t_max`` defaults to ten Kramers lifetimes.

    Notes
    -----
    With full absorption the standard error is the delta-method value
    ``rate * sd(tau) / (mean(tau) * sqrt(n))``; with censoring it is the
    exponential-likelihood value ``rate / sqrt(n_absorbed)``.
    """
    from .rates import kramers_rate

    b = barrier(p)
    if y_abs is None:
        y_abs = b.y_max - 3.0 * (b.y_min - b.y_max)
    if t_max is None:
        t_max = 10.0 / kramers_rate(p, warn=False).rate
    _check_sim_config(dt, n_paths, t_max)
    max_steps = int(math.ceil(t_max / dt - 1e-9))
    t_max = max_steps * dt
    steps = np.full(n_paths, -1, dtype=np.int64)
    sq = p.sigma * math.sqrt(dt)
    gens = path_generators(seed, n_paths)
    # lanes hold running paths; a finished lane is refilled with the next path
    lanes = min(_BATCH, n_paths)
    lane_path = np.arange(lanes)
    lane_done = np.zeros(lanes, dtype=np.int64)
    y = np.full(lanes, b.y_min)
    alive = np.ones(lanes, dtype=bool)
    hit_at = np.full(lanes, -1, dtype=np.int64)
    z = np.zeros((lanes, _CHUNK))
    next_path = lanes
    while alive.any():
        m = np.minimum(_CHUNK, max_steps - lane_done)
        for i in np.flatnonzero(alive):
            gens[lane_path[i]].standard_normal(out=z[i, :m[i]])
        _advance_lanes(z, m, y, alive, p.theta_bar, p.kappa, p.g, dt, sq, float(y_abs), hit_at)
        for i in range(lanes):
            if lane_path[i] < 0:
                continue
            if hit_at[i] >= 0:
                steps[lane_path[i]] = lane_done[i] + hit_at[i]
            else:
                lane_done[i] += m[i]
                if lane_done[i] < max_steps:
                    continue
            # path finished (absorbed or censored): refill the lane
            if next_path < n_paths:
                lane_path[i], lane_done[i], y[i] = next_path, 0, b.y_min
                alive[i], hit_at[i] = True, -1
                next_path += 1
            else:
                lane_path[i], alive[i] = -1, False
    hit = steps >= 0
    n_abs = int(hit.sum())
    tau = steps[hit] * dt
    if n_abs == 0:
        raise InconclusiveError(f"no path escaped within t_max = {t_max:.6g}", t_max)
    total = float(tau.sum() + (n_paths - n_abs) * t_max)
    rate = n_abs / total
    if n_abs == n_paths and n_abs > 1:
        m = tau.mean()
        stderr = rate * tau.std(ddof=1) / (m * math.sqrt(n_abs))
    else:
        stderr = rate / math.sqrt(n_abs)
    return EscapeEstimate(rate, float(stderr), n_paths, n_abs, t_max, total,
                          float(tau.mean()))


@numba.njit(cache=True)
def _advance_lanes(z, m, y, alive, theta_bar, kappa, g, dt, sq, level, hit_at):
    """Advance independent y-space paths in lockstep, lane ``i`` by ``m[i]`` steps.

    Interleaving paths hides the latency of the exponential.  ``hit_at[i]``
    receives the 1-based step of absorption within this chunk.
    """
    n = y.shape[0]
    m_max = 0
    for i in range(n):
        if alive[i] and m[i] > m_max:
            m_max = m[i]
    for j in range(m_max):
        for i in range(n):
            if alive[i] and j < m[i]:
                e = math.exp(y[i])
                yi = y[i] - (-theta_bar + e * (kappa + g * e)) * dt + sq * z[i, j]
                y[i] = yi
                if yi <= level:
                    alive[i] = False
                    hit_at[i] = j + 1


def short_time_growth(p: ModelParams, x0: float, horizon: float, n_paths: int,
                      seed: int = 0, dt: float | None = None) -> tuple[float, float]:
    """Ensemble mean and standard error of ``ln(X_h/x0)/h`` over a short horizon."""
    dt = horizon if dt is None else dt
    ens = simulate_sde(x0, p, horizon, dt, n_paths, seed, "x", record_every=10**9)
    alive = ~ens.absorbed
    lr = np.log(ens.terminal[alive] / x0) / horizon
    return float(lr.mean()), float(lr.std(ddof=1) / math.sqrt(lr.size))

