"""Parameter vectors, the market-to-model mapping and regime classification.

The model drift in price space is ``f(x) = theta*x - kappa*x**2 - g*x**3`` with
multiplicative noise ``sigma*x*dW``.  In log space ``y = ln x`` the Ito drift
is ``-V'(y)`` with ``V(y) = -theta_bar*y + kappa*e**y + g*e**(2y)/2`` and
``theta_bar = theta - sigma**2/2``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

from .errors import DomainError


@dataclass(frozen=True)
class MarketParams:
    """Economic inputs of the model.

    Parameters
    ----------
    r_f : float
        Risk-free rate per year.
    c : float
        Dividend rate per year.
    mu : float
        Linear market-impact coefficient, ``mu >= 0``.
    phi : float
        Linear capital-supply coefficient per year.
    lam : float
        Quadratic capital-supply coefficient per year, ``lam >= 0``.
    """

    r_f: float
    c: float
    mu: float
    phi: float
    lam: float

    def __post_init__(self):
        if not self.mu >= 0:
            raise DomainError(f"mu must be >= 0, got {self.mu}")
        if not self.lam >= 0:
            raise DomainError(f"lambda must be >= 0, got {self.lam}")


@dataclass(frozen=True)
class ModelParams:
    """Dynamical parameters ``(theta, kappa, g, sigma, nu)``.

    ``nu`` selects the stochastic calculus: 2 for Ito (default), 1 for
    Stratonovich.  Rates are per year, ``sigma`` per square-root year.
    """

    theta: float
    kappa: float
    g: float
    sigma: float
    nu: int = 2

    def __post_init__(self):
        for name in ("theta", "kappa", "g", "sigma"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if not self.sigma > 0:
            raise DomainError(f"sigma must be > 0, got {self.sigma}")
        if self.g < 0:
            raise DomainError(f"g must be >= 0, got {self.g}")
        if self.nu not in (1, 2):
            raise DomainError(f"nu must be 1 or 2, got {self.nu}")

    @property
    def theta_bar(self) -> float:
        return self.theta - 0.5 * self.sigma**2

    @property
    def temperature(self) -> float:
        """Effective temperature ``sigma**2 / 2``."""
        return 0.5 * self.sigma**2

    @classmethod
    def from_theta_bar(cls, theta_bar: float, kappa: float, g: float,
                       sigma: float, nu: int = 2) -> "ModelParams":
        """Build parameters from the log-space drift constant ``theta_bar``."""
        return cls(theta_bar + 0.5 * sigma**2, kappa, g, sigma, nu)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


class RegimeKind(enum.Enum):
    GROWTH_STABLE = "GrowthStable"
    METASTABLE = "Metastable"
    UNSTABLE = "Unstable"
    GBM_LIMIT = "GbmLimit"


@dataclass(frozen=True)
class Regime:
    """Regime classification.

    ``phi_bar`` and ``phi_1`` bound the metastable window in ``phi`` and are
    only reported when market parameters are supplied.  ``phi_1`` is None
    (with ``phi_1_defined`` False) when ``mu == 0`` or ``mu*lam*phi_bar < 0``.
    """

    kind: RegimeKind
    discriminant: float
    phi_bar: float | None = None
    phi_1: float | None = None
    phi_1_defined: bool = False


def market_to_model(m: MarketParams) -> tuple[float, float, float]:
    """Map market parameters to ``(theta, kappa, g)``.

    Examples
    --------
    >>> market_to_model(MarketParams(0.015, 0.01, 0.001, 0.5, 0.0))
    (0.505, 0.0005, 0.0)
    """
    g = m.mu * m.lam
    kappa = m.mu * m.phi - m.lam
    theta = m.r_f - m.c + m.phi
    return theta, kappa, g


def ab_to_model(theta: float, a: float, b: float) -> tuple[float, float]:
    """Convert zero-level points ``(a, b)`` of the classical potential to ``(kappa, g)``."""
    if a == 0 or b == 0:
        raise DomainError("zero-level points a and b must be nonzero")
    kappa = theta * 1.5 * (a + b) / (a * b)
    g = -2.0 * theta / (a * b)
    return kappa, g


def theta_bar(p: ModelParams) -> float:
    return p.theta_bar


def discriminant(p: ModelParams) -> float:
    """``kappa**2 + 4*g*theta_bar``; real log-space extrema iff non-negative."""
    return p.kappa**2 + 4.0 * p.g * p.theta_bar


def classify_regime(p: ModelParams, m: MarketParams | None = None) -> Regime:
    """Classify the dynamics from model-space conditions.

    ``GbmLimit`` takes precedence when ``kappa == g == 0``.  A vanishing
    ``theta_bar`` with nonzero nonlinearity is treated as ``Unstable`` since
    the well has merged with the absorbing side.
    """
    disc = discriminant(p)
    tb = p.theta_bar
    if p.kappa == 0 and p.g == 0:
        kind = RegimeKind.GBM_LIMIT
    elif tb > 0:
        kind = RegimeKind.GROWTH_STABLE
    elif p.kappa < 0 and tb < 0 and disc >= 0 and p.g > 0:
        kind = RegimeKind.METASTABLE
    else:
        kind = RegimeKind.UNSTABLE

    if m is None:
        return Regime(kind, disc)
    phi_bar = 0.5 * p.sigma**2 - m.r_f + m.c
    radicand = 4.0 * m.mu * m.lam * phi_bar
    if m.mu == 0 or radicand < 0:
        return Regime(kind, disc, phi_bar, None, False)
    phi_1 = (-m.lam + math.sqrt(radicand)) / m.mu
    return Regime(kind, disc, phi_bar, phi_1, True)


def tp1(sigma2: float = 0.02, nu: int = 2) -> ModelParams:
    """Canonical test potential: ``theta_bar=-1, kappa=-3, g=2``.

    The log-space extrema sit at ``x=1`` (well) and ``x=0.5`` (barrier top).
    """
    return ModelParams.from_theta_bar(-1.0, -3.0, 2.0, math.sqrt(sigma2), nu)
