"""Default-rate estimators and SUSY diagnostics.

Three independent routes to the escape rate from the metastable well:

* ``kramers_rate``: saddle-point closed form.
* ``susy_quadrature_rate``: product of the well and barrier integrals of the
  Boltzmann weight, the first-order partner-spectrum shift.
* ``spectral_rate``: lowest eigenvalue of the discretized partner Hamiltonian
  ``H_minus = -(sigma**4/2) d2/dy2 + U_minus`` with absorbing left boundary.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import ConfigError, DomainError, NumericError
from .params import ModelParams
from .potentials import (
    BarrierReport,
    barrier,
    log_potential,
    qm_potentials,
)
from .tridiag import eigenvector, lowest_eigenvalues


class KramersValidityWarning(UserWarning):
    """The barrier is not high compared with the temperature."""


class SpectralResolutionWarning(UserWarning):
    """The spectral rate moved by more than 2% when the domain was doubled."""


@dataclass(frozen=True)
class RateEstimate:
    rate: float
    method: str
    e_b: float
    prefactor: float
    exponent: float


def kramers_rate(p: ModelParams, warn: bool = True) -> RateEstimate:
    """``sqrt(V''(y_min) |V''(y_max)|)/(2 pi) * exp(-2 E_b / sigma**2)``.

    Emits :class:`KramersValidityWarning` when ``E_b <= 5 sigma**2 / 2``.
    """
    b = barrier(p)
    return _kramers_from_barrier(b, p, warn)


def _kramers_from_barrier(b: BarrierReport, p: ModelParams, warn: bool) -> RateEstimate:
    if warn and b.e_b <= 5.0 * b.temperature:
        warnings.warn(
            f"barrier E_b={b.e_b:.3g} is only {b.e_b / b.temperature:.3g} T; "
            "the Kramers formula is asymptotic in E_b/T", KramersValidityWarning,
            stacklevel=3)
    prefactor = math.sqrt(b.v2_min * abs(b.v2_max)) / (2.0 * math.pi)
    exponent = 2.0 * b.e_b / p.sigma**2
    return RateEstimate(prefactor * math.exp(-exponent), "kramers", b.e_b, prefactor, exponent)


def kramers_rate_or_none(theta_bar: float, kappa: float, g: float, sigma: float) -> float | None:
    """Scalar Kramers rate without object overhead; None outside the metastable regime."""
    if not (kappa < 0 and theta_bar < 0 and g > 0):
        return None
    disc = kappa * kappa + 4.0 * g * theta_bar
    if disc < 0:
        return None
    q = -0.5 * (kappa - math.sqrt(disc))
    x_well, x_top = q / g, -theta_bar / q
    if x_top > x_well:
        x_well, x_top = x_top, x_well
    y_w, y_t = math.log(x_well), math.log(x_top)
    e_b = (-theta_bar * (y_t - y_w) + kappa * (x_top - x_well)
           + 0.5 * g * (x_top * x_top - x_well * x_well))
    v2w = x_well * (kappa + 2.0 * g * x_well)
    v2t = x_top * (kappa + 2.0 * g * x_top)
    return math.sqrt(max(v2w * abs(v2t), 0.0)) / (2.0 * math.pi) * math.exp(-2.0 * e_b / sigma**2)


# ------------------------------------------------------------- quadrature

def _level_crossing(fn, start: float, step: float, level: float, max_steps: int = 10_000) -> float:
    """March from ``start`` in ``step`` increments until ``fn >= level``."""
    y = start
    for _ in range(max_steps):
        if fn(y) >= level:
            return y
        y += step
        step *= 1.25
    raise NumericError("could not bracket the integration limit", {"start": start})


def _quad_split(fn, a: float, peak: float, b: float, rtol: float) -> tuple[float, float]:
    total, err = 0.0, 0.0
    for lo, hi in ((a, peak), (peak, b)):
        if hi <= lo:
            continue
        val, e, info = integrate.quad(fn, lo, hi, epsabs=0.0, epsrel=rtol * 0.1,
                                      limit=500, full_output=True)[:3]
        total += val
        err += e
    return total, err


def susy_quadrature_rate(p: ModelParams, rtol: float = 1e-8, cutoff: float = 700.0) -> RateEstimate:
    """Rate ``(sigma**2/2) / (I_well * I_barrier)``.

    ``I_well = int_{y_max}^{inf} exp(-2V/sigma**2) dy`` collects the Boltzmann
    mass of the metastable well and
    ``I_barrier = int_{-inf}^{y_min} exp(+2V/sigma**2) dy`` the inverse weight
    around the barrier top.  Both are evaluated with the exponent shifted by
    its peak value; infinite limits are truncated where the shifted exponent
    falls below ``-cutoff``.

    Raises
    ------
    NumericError
        If the adaptive quadrature does not reach ``rtol``.
    """
    b = barrier(p)
    s2 = p.sigma**2
    v_min = float(log_potential(b.y_min, p))
    v_max = float(log_potential(b.y_max, p))
    width = max(b.well_width, 1e-6)

    def well(y):
        return math.exp(-2.0 * (log_potential(y, p) - v_min) / s2)

    def top(y):
        return math.exp(2.0 * (log_potential(y, p) - v_max) / s2)

    y_hi = _level_crossing(lambda y: 2.0 * (log_potential(y, p) - v_min) / s2,
                           b.y_min + width, width, cutoff)
    y_lo = _level_crossing(lambda y: 2.0 * (v_max - log_potential(y, p)) / s2,
                           b.y_max - width, -width, cutoff)
    i_well, e_well = _quad_split(well, b.y_max, b.y_min, y_hi, rtol)
    i_top, e_top = _quad_split(top, y_lo, b.y_max, b.y_min, rtol)
    rel = max(e_well / i_well, e_top / i_top)
    if not (np.isfinite(rel) and rel <= rtol):
        raise NumericError("quadrature did not converge",
                           {"rel_err_well": e_well / i_well, "rel_err_barrier": e_top / i_top,
                            "limits": (y_lo, y_hi)})
    exponent = 2.0 * b.e_b / s2
    prefactor = 0.5 * s2 / (i_well * i_top)
    return RateEstimate(prefactor * math.exp(-exponent), "susy-quadrature", b.e_b,
                        prefactor, exponent)


# --------------------------------------------------------------- spectral

@dataclass(frozen=True)
class SpectrumReport:
    """Lowest eigenvalues of the discretized partner Hamiltonians.

    ``y`` holds the interior grid points and ``ground_state_minus`` the unit
    eigenvector of the lowest ``H_minus`` level on that grid.
    """

    eigenvalues_minus: np.ndarray
    eigenvalues_plus: np.ndarray
    grid: tuple[float, float, int]
    degeneracy_error: float
    y: np.ndarray
    ground_state_minus: np.ndarray


def _well_location(p: ModelParams) -> float:
    """Global minimum of V for confining parameters (theta_bar > 0, g > 0)."""
    # V' in x is g x^2 + kappa x - theta_bar with exactly one positive root
    if p.g > 0:
        d = math.sqrt(p.kappa**2 + 4.0 * p.g * p.theta_bar)
        q = -0.5 * (p.kappa + math.copysign(d, p.kappa))
        r1, r2 = q / p.g, -p.theta_bar / q
        return math.log(max(r1, r2))
    if p.kappa > 0:
        return math.log(p.theta_bar / p.kappa)
    raise DomainError("no confining minimum for these parameters")


def default_grid(p: ModelParams, n: int = 4000, depth: float = 120.0) -> tuple[float, float, int]:
    """A grid covering the relevant region of the log-space potential.

    Metastable parameters: from well past the barrier until the potential has
    dropped ``depth/4`` (in units of ``sigma**2/2``) below the barrier top,
    and at least five well widths left of the top; on the right until the
    potential exceeds the well bottom by ``depth``.  Confining parameters: both
    sides until ``depth`` above the minimum.
    """
    s2 = p.sigma**2
    if p.theta_bar < 0:
        b = barrier(p)
        w = b.well_width
        v_min = float(log_potential(b.y_min, p))
        v_max = float(log_potential(b.y_max, p))
        y_hi = _level_crossing(lambda y: 2.0 * (log_potential(y, p) - v_min) / s2,
                               b.y_min + w, w, depth)
        y_lo = _level_crossing(lambda y: 2.0 * (v_max - log_potential(y, p)) / s2,
                               b.y_max - w, -w, depth / 4.0)
        return min(y_lo, b.y_max - 5.0 * w), max(y_hi, b.y_min + 3.0 * w), n
    y0 = _well_location(p)
    v0 = float(log_potential(y0, p))
    d2 = float(p.kappa * math.exp(y0) + 2 * p.g * math.exp(2 * y0))
    w = math.sqrt(0.5 * s2 / d2)
    y_hi = _level_crossing(lambda y: 2.0 * (log_potential(y, p) - v0) / s2, y0 + w, w, depth)
    y_lo = _level_crossing(lambda y: 2.0 * (log_potential(y, p) - v0) / s2, y0 - w, -w, depth)
    return y_lo, y_hi, n


def _hamiltonians(p: ModelParams, grid: tuple[float, float, int], scheme: str = "ground-state"):
    """Diagonals of the discretized ``H_minus``/``H_plus`` and the shared off-diagonal.

    ``pointwise`` samples ``U_pm`` on the grid.  ``ground-state`` uses the
    lattice potential ``(c/h**2)(w_{i+1}/w_i + w_{i-1}/w_i - 2)`` with
    ``w = exp(-+V/sigma**2)``, ``c = sigma**4/2``: it agrees with ``U_pm`` to
    O(h**2) but annihilates ``exp(-V/sigma**2)`` exactly, which makes the
    matrix positive semidefinite for any spacing.
    """
    y_lo, y_hi, n = grid
    h = (y_hi - y_lo) / (n + 1)
    y = y_lo + h * np.arange(1, n + 1)
    kin = 0.5 * p.sigma**4 / h**2
    off = np.full(n - 1, -kin)
    if scheme == "pointwise":
        u_minus, u_plus = qm_potentials(y, p)
    elif scheme == "ground-state":
        ye = y_lo + h * np.arange(0, n + 2)
        v = log_potential(ye, p) / p.sigma**2
        # clipping only touches far-wall entries that act as hard walls anyway
        up = np.clip(v[2:] - v[1:-1], -600.0, 600.0)
        down = np.clip(v[:-2] - v[1:-1], -600.0, 600.0)
        u_minus = kin * (np.exp(-up) + np.exp(-down) - 2.0)
        u_plus = kin * (np.exp(up) + np.exp(down) - 2.0)
    else:
        raise ConfigError(f"unknown scheme {scheme!r}")
    return y, u_minus + 2.0 * kin, u_plus + 2.0 * kin, off


def spectrum(p: ModelParams, grid: tuple[float, float, int] | None = None, k: int = 4,
             scheme: str = "ground-state") -> SpectrumReport:
    """Lowest ``k`` levels of both partner Hamiltonians with Dirichlet walls."""
    if grid is None:
        grid = default_grid(p)
    y_lo, y_hi, n = grid
    if not (y_hi > y_lo and n >= max(k, 3)):
        raise ConfigError(f"invalid grid {grid!r}")
    y, d_minus, d_plus, off = _hamiltonians(p, grid, scheme)
    e_minus = lowest_eigenvalues(d_minus, off, k)
    e_plus = lowest_eigenvalues(d_plus, off, k)
    degeneracy = float(np.max(np.abs(e_minus[1:] - e_plus[:-1]))) if k > 1 else 0.0
    psi0 = eigenvector(d_minus, off, e_minus[0])
    return SpectrumReport(e_minus, e_plus, (float(y_lo), float(y_hi), int(n)), degeneracy,
                          y, psi0)


def spectral_rate(p: ModelParams, grid: tuple[float, float, int] | None = None, k: int = 4,
                  check_domain: bool = True, scheme: str = "ground-state",
                  ) -> tuple[RateEstimate, SpectrumReport]:
    """Escape rate ``E_0^- / sigma**2`` from the lowest level of ``H_minus``.

    The grid must extend at least five well widths left of the barrier top
    and three right of the well bottom.  With ``check_domain`` the estimate is
    repeated on a grid of twice the width (same spacing) and a
    :class:`SpectralResolutionWarning` is issued if it moves by more than 2%.
    """
    b = barrier(p)
    if grid is None:
        grid = default_grid(p)
    y_lo, y_hi, n = grid
    w = b.well_width
    if y_lo > b.y_max - 5.0 * w or y_hi < b.y_min + 3.0 * w:
        raise ConfigError(
            f"grid [{y_lo}, {y_hi}] must cover [{b.y_max - 5 * w:.6g}, {b.y_min + 3 * w:.6g}]")
    report = spectrum(p, grid, k, scheme)
    rate = report.eigenvalues_minus[0] / p.sigma**2
    if check_domain:
        half = 0.5 * (y_hi - y_lo)
        wide = (y_lo - half, y_hi + half, 2 * n + 1)
        d_wide = _hamiltonians(p, wide, scheme)
        e_wide = lowest_eigenvalues(d_wide[1], d_wide[3], 1)[0] / p.sigma**2
        if not math.isfinite(e_wide) or abs(e_wide - rate) > 0.02 * abs(rate):
            warnings.warn(f"spectral rate changed from {rate:.6g} to {e_wide:.6g} "
                          "under domain doubling", SpectralResolutionWarning, stacklevel=2)
    exponent = 2.0 * b.e_b / p.sigma**2
    est = RateEstimate(float(rate), "spectral", b.e_b, float(rate * math.exp(exponent)), exponent)
    return est, report


# ------------------------------------------------------------ SUSY / credit

class SusyPhase(enum.Enum):
    UNBROKEN = "Unbroken"
    SPONTANEOUSLY_BROKEN = "SpontaneouslyBroken"
    BOUNDARY = "Boundary"


def susy_breaking_classify(p: ModelParams) -> SusyPhase:
    """Unbroken iff ``theta_bar > 0`` (normalizable zero mode ``exp(-V/sigma**2)``)."""
    tb = p.theta_bar
    if tb > 0:
        return SusyPhase.UNBROKEN
    if tb < 0:
        return SusyPhase.SPONTANEOUSLY_BROKEN
    return SusyPhase.BOUNDARY


def hazard_to_spread(rate: float, recovery: float = 0.4) -> float:
    """Credit triangle: ``spread_bps = rate * (1 - R) * 1e4``."""
    if not 0 <= recovery < 1:
        raise DomainError(f"recovery must lie in [0, 1), got {recovery}")
    return rate * (1.0 - recovery) * 1e4


def spread_to_hazard(spread_bps: float, recovery: float = 0.4) -> float:
    """Inverse of :func:`hazard_to_spread`."""
    if not 0 <= recovery < 1:
        raise DomainError(f"recovery must lie in [0, 1), got {recovery}")
    return spread_bps / ((1.0 - recovery) * 1e4)


def ground_state_profile(y: np.ndarray, p: ModelParams) -> np.ndarray:
    """Unit-normalized ``exp(-V/sigma**2)`` on the grid ``y`` (zero mode of ``H_minus``)."""
    v = log_potential(y, p)
    w = np.exp(-(v - v.min()) / p.sigma**2)
    return w / np.linalg.norm(w)

