"""Instanton, anti-instanton and bounce trajectories of the log-space potential.

The instanton solves the flipped-potential flow ``dy/dt = +V'(y)`` and runs
from the well bottom (``x2``) at ``t -> -inf`` to the barrier top (``x1``) at
``t -> +inf``, with ``x = e**y`` and ``x1 < x2`` the roots of ``V'``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .params import ModelParams
from .potentials import barrier, log_potential, log_potential_d1


class EndpointWarning(UserWarning):
    """The time window is too short for the trajectory to reach its endpoints."""


@dataclass(frozen=True)
class InstantonTrajectory:
    times: np.ndarray
    values: np.ndarray
    kind: str
    endpoints: tuple[float, float]
    action_s0: float

    @property
    def x(self) -> np.ndarray:
        return np.exp(self.values)


@dataclass(frozen=True)
class WkbCorrection:
    """Subleading WKB phase ``S1(t) = -e1 * (t - t0)``."""

    e1: float
    t0: float

    def s1_of_t(self, t):
        return -self.e1 * (np.asarray(t, dtype=float) - self.t0)


def _roots(p: ModelParams) -> tuple[float, float]:
    b = barrier(p)
    return math.exp(b.y_max), math.exp(b.y_min)


def _time_map(x, x0, x1: float, x2: float, g: float, sign: int):
    x = np.asarray(x, dtype=float)
    d = x2 - x1
    term = ((1.0 / x2) * np.log(np.abs(x - x2) / abs(x0 - x2))
            - (1.0 / x1) * np.log(np.abs(x - x1) / abs(x0 - x1))) / d
    term = term + np.log(x / x0) / (x1 * x2)
    return sign * term / g


def instanton_time_map(x, x0: float, p: ModelParams, sign: int = 1):
    """Closed-form time ``t - t0`` for the instanton to travel from ``x0`` to ``x``.

    Both arguments must lie strictly between the extrema ``x1 < x2``.
    ``sign=+1`` is the instanton, ``-1`` the anti-instanton.
    """
    if sign not in (-1, 1):
        raise DomainError("sign must be +1 or -1")
    x1, x2 = _roots(p)
    xa = np.asarray(x, dtype=float)
    if np.any((xa <= x1) | (xa >= x2)) or not x1 < x0 < x2:
        raise DomainError(f"levels must lie strictly inside ({x1:.12g}, {x2:.12g})")
    out = _time_map(xa, x0, x1, x2, p.g, sign)
    return float(out) if out.ndim == 0 else out


def _invert(times: np.ndarray, x_ref: float, x1: float, x2: float, g: float, eps: float,
            iters: int = 200) -> np.ndarray:
    """Vectorized bisection of the + branch time map; values clamped to ``[x1+eps, x2-eps]``."""
    lo = np.full(times.shape, x1 + eps)
    hi = np.full(times.shape, x2 - eps)
    t_lo = _time_map(lo, x_ref, x1, x2, g, 1)
    t_hi = _time_map(hi, x_ref, x1, x2, g, 1)
    # t decreases in x on the + branch: t(x1+eps) is the latest reachable time
    out = np.empty_like(times)
    early = times <= t_hi
    late = times >= t_lo
    out[early] = hi[early]
    out[late] = lo[late]
    mid_mask = ~(early | late)
    a, b, tt = lo[mid_mask], hi[mid_mask], times[mid_mask]
    for _ in range(iters):
        m = 0.5 * (a + b)
        tm = _time_map(m, x_ref, x1, x2, g, 1)
        go_right = tm > tt
        a = np.where(go_right, m, a)
        b = np.where(go_right, b, m)
        if np.all(b - a <= 4e-16 * b):
            break
    out[mid_mask] = 0.5 * (a + b)
    return out


def instanton_trajectory(p: ModelParams, T: float, n: int, kind: str = "instanton",
                         separation: float | None = None,
                         gap_tol: float = 1e-6) -> InstantonTrajectory:
    """Trajectory on the uniform grid ``[-T, T]`` with ``n`` points.

    The instanton is centred at ``t=0`` where ``|V'|`` peaks (``V''=0``).  The anti-instanton is its
    time reversal.  The bounce joins an instanton centred at ``-separation/2``
    with an anti-instanton centred at ``+separation/2`` (default ``T/2``).

    An :class:`EndpointWarning` is raised when the relative gap between the
    trajectory ends and the extrema exceeds ``gap_tol``.
    """
    if kind not in ("instanton", "anti-instanton", "bounce"):
        raise DomainError(f"unknown kind {kind!r}")
    if not (T > 0 and n >= 3):
        raise DomainError("need T > 0 and n >= 3")
    x1, x2 = _roots(p)
    eps = 1e-12 * (x2 - x1)
    x_ref = -p.kappa / (2.0 * p.g)
    if not x1 < x_ref < x2:
        x_ref = math.sqrt(x1 * x2)
    times = np.linspace(-T, T, n)
    if kind == "instanton":
        xs = _invert(times, x_ref, x1, x2, p.g, eps)
        ends = (math.log(x2), math.log(x1))
    elif kind == "anti-instanton":
        xs = _invert(-times, x_ref, x1, x2, p.g, eps)
        ends = (math.log(x1), math.log(x2))
    else:
        s = 0.5 * T if separation is None else separation
        shifted = np.where(times <= 0, times + 0.5 * s, -(times - 0.5 * s))
        xs = _invert(shifted, x_ref, x1, x2, p.g, eps)
        ends = (math.log(x2), math.log(x2))
    values = np.log(xs)
    gap = max(abs(values[0] - ends[0]), abs(values[-1] - ends[1]))
    scale = abs(math.log(x2) - math.log(x1))
    if gap > gap_tol * scale:
        warnings.warn(f"endpoint gap {gap:.3g} exceeds {gap_tol:g} of the extrema distance; "
                      "increase T", EndpointWarning, stacklevel=2)
    s0 = float(log_potential(math.log(x1), p) - log_potential(math.log(x2), p))
    if kind == "bounce":
        s0 = 2.0 * s0
    return InstantonTrajectory(times, values, kind, ends, s0)


def instanton_action(p: ModelParams, y_from: float, y_to: float) -> tuple[float, float]:
    """Return ``(S0, A)`` with ``S0 = V(y_to) - V(y_from)`` and ``A = 2 S0 / sigma**2``.

    Raises
    ------
    DomainError
        If ``V(y_to) < V(y_from)`` (the action must be non-negative).
    """
    s0 = float(log_potential(y_to, p) - log_potential(y_from, p))
    if s0 < 0:
        raise DomainError("descending endpoints: V(y_to) < V(y_from)")
    return s0, 2.0 * s0 / p.sigma**2


def bounce_action(p: ModelParams) -> float:
    """Twice the well-to-barrier instanton action."""
    b = barrier(p)
    return 2.0 * instanton_action(p, b.y_min, b.y_max)[0]


def escape_probability(p: ModelParams) -> float:
    """``exp(-2 S0 / sigma**2)`` for the well-to-barrier instanton."""
    b = barrier(p)
    return math.exp(-instanton_action(p, b.y_min, b.y_max)[1])


def _derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order central differences on the interior (two points trimmed each side)."""
    v = values
    return (v[:-4] - 8.0 * v[1:-3] + 8.0 * v[3:-1] - v[4:]) / (12.0 * h)


def velocity_residual(traj: InstantonTrajectory, p: ModelParams) -> float:
    """``max |dy/dt - sign*V'(y)|`` over the interior, with sign +1 for instantons."""
    h = traj.times[1] - traj.times[0]
    ydot = _derivative(traj.values, h)
    sign = 1.0 if traj.kind == "instanton" else -1.0
    return float(np.max(np.abs(ydot - sign * log_potential_d1(traj.values[2:-2], p))))


def zero_energy_check(traj: InstantonTrajectory, p: ModelParams) -> float:
    """Maximum of ``|H|`` along the trajectory.

    The response field is recovered from the measured velocity via
    ``i sigma**2 p_hat = 2 dy/dt`` so that
    ``H = -(sigma**4/2)(i p_hat)**2 + i sigma**2 p_hat V' = -2 ydot**2 + 2 ydot V'``,
    which vanishes identically on an exact instanton.  For the
    anti-instanton time is reversed first.
    """
    if traj.kind not in ("instanton", "anti-instanton"):
        raise DomainError("zero-energy check applies to instantons and anti-instantons")
    h = traj.times[1] - traj.times[0]
    ydot = _derivative(traj.values, h)
    if traj.kind == "anti-instanton":
        ydot = -ydot
    dv = log_potential_d1(traj.values[2:-2], p)
    ham = -2.0 * ydot * ydot + 2.0 * ydot * dv
    return float(np.max(np.abs(ham)))


def wkb_subleading(e1: float, t0: float = 0.0) -> WkbCorrection:
    return WkbCorrection(float(e1), float(t0))
