"""Steady states of the Fokker-Planck equation and the partition function.

In price space the stationary density is ``exp(-U_eff(x)) / Z`` with

    exp(-U_eff(x)) = x**(z - 1) * exp(-(2/sigma**2) (kappa*x + g*x**2/2)),
    z = 2*theta/sigma**2 + nu - 3,

so it is normalizable iff ``z > 0`` (and the quadratic confines at infinity).
The log-space density is ``e**y`` times the price-space density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import mpmath
import numpy as np
from scipy import integrate

from .errors import DomainError, NumericError
from .params import ModelParams
from .special import KUMMER_ARG_LIMIT, parabolic_cylinder_neg

_TAIL = 745.0  # exp(-745) underflows double precision


def z_exponent(p: ModelParams) -> float:
    """``z = 2*theta/sigma**2 + nu - 3``; the density behaves as ``x**(z-1)`` near 0."""
    return 2.0 * p.theta / p.sigma**2 + p.nu - 3.0


def fpe_drift(x, p: ModelParams):
    """Drift coefficient of the price-space FPE whose zero-flux solution is ``exp(-U_eff)``.

    ``theta*x - kappa*x**2 - g*x**3 - (2 - nu)*sigma**2*x/2``; the diffusion
    coefficient is ``sigma**2 x**2``.
    """
    x = np.asarray(x, dtype=float)
    return x * (p.theta - 0.5 * (2 - p.nu) * p.sigma**2 - x * (p.kappa + p.g * x))


def _confines(p: ModelParams) -> bool:
    return p.g > 0 or (p.g == 0 and p.kappa > 0)


def is_normalizable(p: ModelParams) -> bool:
    return z_exponent(p) > 0 and _confines(p)


# ---------------------------------------------------------- partition function

@dataclass(frozen=True)
class PartitionValue:
    """Partition function ``Z``.

    ``value`` is ``inf`` and ``divergent`` is True when the integral does not
    exist.  ``log_value`` avoids overflow for large ``Z``.
    """

    value: float
    log_value: float
    method: str
    z_exponent: float
    divergent: bool


def _log_weight_s(s, z, a, b):
    """log of the integrand after ``x = e**s``: ``z*s - a*e**s - b*e**(2s)``."""
    e = np.exp(s)
    return z * s - e * (a + b * e)


def _peak_s(z: float, a: float, b: float) -> float:
    """Maximizer of ``z*s - a*e**s - b*e**(2s)``: root of ``2b x**2 + a x - z = 0``."""
    if b > 0:
        d = math.sqrt(a * a + 8.0 * b * z)
        x = 2.0 * z / (a + d) if a >= 0 else (d - a) / (4.0 * b)
    else:
        x = z / a
    return math.log(x)


def _partition_quadrature(p: ModelParams, rtol: float = 1e-12) -> tuple[float, float]:
    """Integral over ``s = ln x`` with the log-integrand shifted by its maximum.

    Returns ``(log Z, relative error estimate)``.
    """
    z = z_exponent(p)
    a = 2.0 * p.kappa / p.sigma**2
    b = p.g / p.sigma**2
    s0 = _peak_s(z, a, b)
    peak = float(_log_weight_s(s0, z, a, b))
    f = lambda s: math.exp(_log_weight_s(s, z, a, b) - peak)
    # left tail decays like exp(z (s - s0)); right tail at least like exp(-a e^s)
    s_lo = s0 - (_TAIL + 10.0) / z
    s_hi = s0 + 1.0
    while _log_weight_s(s_hi, z, a, b) - peak > -_TAIL:
        s_hi = s0 + 2.0 * (s_hi - s0)
    total, err = 0.0, 0.0
    if z < 1.0:
        # near z = 0 the tail spans ~1/z decades: below s_c the weight is
        # exp(z s) (1 + O(1e-3)), whose pure power part integrates exactly
        s_c = min(s0, math.log(1e-3 / (abs(a) + math.sqrt(b) + 1.0)))
        total = math.exp(z * s_c - peak) / z
        g = lambda s: math.exp(z * s - peak) * math.expm1(-math.exp(s) * (a + b * math.exp(s)))
        val, e = integrate.quad(g, s_c - 60.0, s_c, epsabs=0.0, epsrel=rtol, limit=400)
        total, err, s_lo = total + val, e, s_c
    width = 1.0 / math.sqrt(max(z, 1e-300))
    knots = [s_lo, s0 - 20 * width, s0 - 3 * width, s0, s0 + 3 * width, s_hi]
    knots = sorted(k for k in set(knots) if s_lo <= k <= s_hi)
    for lo, hi in zip(knots[:-1], knots[1:]):
        val, e = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=rtol, limit=400)
        total += val
        err += e
    if not total > 0:
        raise NumericError("partition quadrature returned a non-positive value",
                           {"total": total})
    return peak + math.log(total), err / total


def _partition_analytic_log(p: ModelParams) -> float:
    z = z_exponent(p)
    s2 = p.sigma**2
    big_x = p.kappa**2 / (p.g * s2)
    if big_x > KUMMER_ARG_LIMIT:
        raise NumericError("Kummer argument beyond guard; use quadrature",
                           {"argument": big_x, "limit": KUMMER_ARG_LIMIT})
    u = p.kappa * math.sqrt(2.0 / (p.g * s2))
    if p.kappa <= 0:
        # both Kummer terms are positive: no cancellation in double precision
        d = parabolic_cylinder_neg(z, u)
        return (-0.5 * z * math.log(2.0 * p.g / s2) + math.lgamma(z) + 0.5 * big_x
                + math.log(d))
    # the two terms cancel to a relative size ~ exp(-big_x): carry extra digits
    dps = 25 + int(math.ceil(big_x / math.log(10.0)))
    with mpmath.workdps(dps):
        d = parabolic_cylinder_neg(z, u, dps=dps)
        if not d > 0:
            raise NumericError("parabolic cylinder evaluation lost all precision",
                               {"z": z, "u": u, "dps": dps})
        val = (-mpmath.mpf(z) / 2 * mpmath.log(2 * mpmath.mpf(p.g) / mpmath.mpf(s2))
               + mpmath.loggamma(z) + mpmath.mpf(big_x) / 2 + mpmath.log(d))
        return float(val)


def partition_function(p: ModelParams, method: str = "quadrature") -> PartitionValue:
    """``Z = int_0^inf x**(z-1) exp(-(2/sigma**2)(kappa x + g x**2/2)) dx``.

    Parameters
    ----------
    method : {"quadrature", "analytic"}
        ``analytic`` evaluates
        ``(2g/sigma**2)**(-z/2) Gamma(z) exp(kappa**2/(2 g sigma**2)) D_{-z}(kappa sqrt(2/(g sigma**2)))``
        and requires ``g > 0``.

    Returns
    -------
    PartitionValue
        With ``divergent=True`` when ``z <= 0`` or the integrand does not
        decay at infinity.
    """
    z = z_exponent(p)
    if method not in ("quadrature", "analytic"):
        raise DomainError(f"unknown method {method!r}")
    label = "quadrature" if method == "quadrature" else "kummer-analytic"
    if method == "analytic" and p.g <= 0:
        raise DomainError("analytic partition function requires g > 0")
    if z <= 0 or not _confines(p):
        return PartitionValue(math.inf, math.inf, label, z, True)
    if method == "quadrature":
        log_z, rel = _partition_quadrature(p)
        if rel > 1e-8:
            raise NumericError("partition quadrature did not converge", {"rel_err": rel})
    else:
        log_z = _partition_analytic_log(p)
    value = math.exp(log_z) if log_z < 709.0 else math.inf
    return PartitionValue(value, log_z, label, z, False)


def partition_kappa_zero(z: float, g_over_s2: float) -> float:
    """Closed form for ``kappa = 0``: ``Gamma(z/2) (g/sigma**2)**(-z/2) / 2``."""
    return 0.5 * math.gamma(0.5 * z) * g_over_s2 ** (-0.5 * z)


def partial_partition(p: ModelParams, cutoff: float) -> float:
    """``int_cutoff^inf`` of the partition integrand; grows without bound as
    ``cutoff -> 0`` when ``z <= 0``."""
    if not cutoff > 0:
        raise DomainError("cutoff must be > 0")
    if not _confines(p):
        return math.inf
    z = z_exponent(p)
    a = 2.0 * p.kappa / p.sigma**2
    b = p.g / p.sigma**2
    s_c = math.log(cutoff)
    f = lambda s: math.exp(_log_weight_s(s, z, a, b))
    s_hi = max(s_c, 0.0) + 1.0
    while _log_weight_s(s_hi, z, a, b) > -_TAIL:
        s_hi += s_hi - s_c
    knots = np.linspace(s_c, s_hi, 16)
    return float(sum(integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-10, limit=200)[0]
                     for lo, hi in zip(knots[:-1], knots[1:])))


# ---------------------------------------------------------------- threshold

@dataclass(frozen=True)
class Threshold:
    """Normalizability threshold: a steady state exists iff ``theta > theta_star``."""

    theta_star: float
    theta: float
    normalizable: bool


def normalizability_threshold(p: ModelParams) -> Threshold:
    """``theta_star = (3 - nu) sigma**2 / 2``, i.e. ``sigma**2/2`` for Ito and
    ``sigma**2`` for Stratonovich (where ``z`` crosses zero)."""
    theta_star = 0.5 * (3 - p.nu) * p.sigma**2
    return Threshold(theta_star, p.theta, bool(p.theta > theta_star and _confines(p)))


# -------------------------------------------------------------- steady states

@dataclass(frozen=True)
class SteadyState:
    """Stationary density in ``x`` or ``y``.

    ``z`` is the normalization constant (None when not normalizable) and
    ``density`` a callable returning the normalized density.  When a grid was
    supplied, ``grid``/``values`` hold the evaluated profile.
    """

    space: str
    normalizable: bool
    z: float | None
    z_exponent: float
    density: Callable | None
    grid: np.ndarray | None = None
    values: np.ndarray | None = None


def _log_unnormalized_x(x, p: ModelParams):
    x = np.asarray(x, dtype=float)
    z = z_exponent(p)
    return (z - 1.0) * np.log(x) - (2.0 / p.sigma**2) * x * (p.kappa + 0.5 * p.g * x)


def steady_state_x(p: ModelParams, grid=None) -> SteadyState:
    """Price-space steady state ``exp(-U_eff(x))/Z``."""
    z = z_exponent(p)
    if not is_normalizable(p):
        return SteadyState("x", False, None, z, None)
    log_z = partition_function(p, "quadrature").log_value

    def density(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = np.exp(_log_unnormalized_x(x[pos], p) - log_z)
        return out

    return _with_grid(SteadyState("x", True, _exp_or_inf(log_z), z, density), grid)


def steady_state_y(p: ModelParams, grid=None) -> SteadyState:
    """Log-space steady state ``exp(-2 V_nu(y)/sigma**2)/Z`` with the same ``Z``.

    ``V_nu`` is the log potential with ``theta_bar`` replaced by
    ``theta - (3-nu) sigma**2/2`` (the Ito ``theta_bar`` for ``nu=2``).
    """
    z = z_exponent(p)
    if not is_normalizable(p):
        return SteadyState("y", False, None, z, None)
    log_z = partition_function(p, "quadrature").log_value
    a = 2.0 * p.kappa / p.sigma**2
    b = p.g / p.sigma**2

    def density(y):
        return np.exp(_log_weight_s(np.asarray(y, dtype=float), z, a, b) - log_z)

    return _with_grid(SteadyState("y", True, _exp_or_inf(log_z), z, density), grid)


def _with_grid(state: SteadyState, grid) -> SteadyState:
    if grid is None:
        return state
    g = np.asarray(grid, dtype=float)
    return SteadyState(state.space, state.normalizable, state.z, state.z_exponent,
                       state.density, g, state.density(g))


def fpe_residual_x(x: np.ndarray, p: ModelParams, h: float | None = None) -> np.ndarray:
    """Stationary FPE residual ``-d/dx[f p] + (sigma**2/2) d2/dx2[x**2 p]`` by
    fourth-order central differences at the points ``x``."""
    st = steady_state_x(p)
    if not st.normalizable:
        raise DomainError("no steady state to test")
    x = np.asarray(x, dtype=float)
    h = 1e-3 * np.maximum(x, 1e-3) if h is None else h
    flux = lambda u: fpe_drift(u, p) * st.density(u)
    diff = lambda u: u * u * st.density(u)
    d_flux = (flux(x - 2 * h) - 8 * flux(x - h) + 8 * flux(x + h) - flux(x + 2 * h)) / (12 * h)
    d2 = (-diff(x - 2 * h) + 16 * diff(x - h) - 30 * diff(x) + 16 * diff(x + h)
          - diff(x + 2 * h)) / (12 * h * h)
    return -d_flux + 0.5 * p.sigma**2 * d2


def _exp_or_inf(v: float) -> float:
    return math.exp(v) if v < 709.0 else math.inf
