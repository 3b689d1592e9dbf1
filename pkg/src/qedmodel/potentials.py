"""Classical, log-space, effective and partner quantum potentials.

All functions accept scalars or numpy arrays for the coordinate argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NoBarrierError
from .params import ModelParams, RegimeKind, classify_regime, discriminant

# below this fraction of kappa**2 the quadratic formula is refined by bisection
_ILL_CONDITIONED = 1e-8


# ---------------------------------------------------------------- classical

def classical_potential(x, p: ModelParams):
    """``U(x) = -theta*x**2/2 + kappa*x**3/3 + g*x**4/4``."""
    x = np.asarray(x, dtype=float) if not np.isscalar(x) else float(x)
    return -0.5 * p.theta * x**2 + p.kappa * x**3 / 3.0 + 0.25 * p.g * x**4


def classical_drift(x, p: ModelParams):
    """``f(x) = theta*x - kappa*x**2 - g*x**3 = -U'(x)``."""
    x = np.asarray(x, dtype=float) if not np.isscalar(x) else float(x)
    return x * (p.theta - x * (p.kappa + p.g * x))


@dataclass(frozen=True)
class Extrema:
    """Stationary points of the classical potential ``U(x)``.

    ``x_plus``/``x_minus`` are the larger/smaller nonzero roots of ``U'``;
    they are None when ``real`` is False.  Curvatures are ``U''`` values.
    """

    x0: float
    x_plus: float | None
    x_minus: float | None
    curvature_plus: float | None
    curvature_minus: float | None
    real: bool


def _u2(x: float, p: ModelParams) -> float:
    return -p.theta + 2.0 * p.kappa * x + 3.0 * p.g * x * x


def classical_extrema(p: ModelParams) -> Extrema:
    """Nonzero roots of ``theta - kappa*x - g*x**2 = 0`` and their curvatures.

    For ``g == 0`` the single nonzero root ``theta/kappa`` is returned in both
    slots (``kappa`` must be nonzero).
    """
    if p.g == 0:
        if p.kappa == 0:
            raise DomainError("g = 0 requires kappa != 0 for a nonzero extremum")
        r = p.theta / p.kappa
        c = _u2(r, p)
        return Extrema(0.0, r, r, c, c, True)
    d = p.kappa**2 + 4.0 * p.g * p.theta
    if d < 0:
        return Extrema(0.0, None, None, None, None, False)
    hi, lo = _stable_quadratic_roots(p.g, p.kappa, -p.theta)
    return Extrema(0.0, hi, lo, _u2(hi, p), _u2(lo, p), True)


def ab_extrema(a: float, b: float) -> tuple[float, float]:
    """Nonzero extrema written through the zero-level points ``(a, b)``.

    Returns ``(x_plus, x_minus)`` for real roots, raising DomainError otherwise.
    """
    s = a + b
    d = s * s - 32.0 * a * b / 9.0
    if d < 0:
        raise DomainError("complex extrema for these zero-level points")
    r = math.sqrt(d)
    return 0.375 * (s + r), 0.375 * (s - r)


def _stable_quadratic_roots(a: float, b: float, c: float) -> tuple[float, float]:
    """Real roots of ``a*x**2 + b*x + c`` (a != 0, non-negative discriminant),
    larger first, computed without cancellation."""
    d = max(b * b - 4.0 * a * c, 0.0)
    q = -0.5 * (b + math.copysign(math.sqrt(d), b))
    if q == 0.0:
        r1 = r2 = -b / (2.0 * a)
    else:
        r1, r2 = q / a, c / q
    return (r1, r2) if r1 >= r2 else (r2, r1)


# ---------------------------------------------------------------- log space

def log_potential(y, p: ModelParams):
    """``V(y) = -theta_bar*y + kappa*e**y + g*e**(2y)/2``."""
    x = np.exp(y)
    return -p.theta_bar * y + p.kappa * x + 0.5 * p.g * x * x


def log_potential_d1(y, p: ModelParams):
    """``V'(y) = -theta_bar + kappa*e**y + g*e**(2y)``."""
    x = np.exp(y)
    return -p.theta_bar + x * (p.kappa + p.g * x)


def log_potential_d2(y, p: ModelParams):
    """``V''(y) = kappa*e**y + 2*g*e**(2y)``."""
    x = np.exp(y)
    return x * (p.kappa + 2.0 * p.g * x)


def log_potential_all(y, p: ModelParams):
    """Return ``(V, V', V'')`` in one pass."""
    return log_potential(y, p), log_potential_d1(y, p), log_potential_d2(y, p)


@dataclass(frozen=True)
class BarrierReport:
    """Metastable well and barrier of the log-space potential.

    ``y_min`` is the well bottom (larger root in ``x``), ``y_max`` the barrier
    top.  ``e_b = V(y_max) - V(y_min)`` and ``temperature = sigma**2/2``.
    """

    y_min: float
    y_max: float
    e_b: float
    v2_min: float
    v2_max: float
    temperature: float

    @property
    def x_min(self) -> float:
        return math.exp(self.y_min)

    @property
    def x_max(self) -> float:
        return math.exp(self.y_max)

    @property
    def well_width(self) -> float:
        """Gaussian width ``sigma/sqrt(2 V''(y_min))`` of the well."""
        return math.sqrt(self.temperature / self.v2_min)


def _bisect(fn, lo: float, hi: float, tol: float = 1e-12, max_iter: int = 200) -> float:
    flo = fn(lo)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def log_extrema_x(p: ModelParams) -> tuple[float, float]:
    """Roots ``x_well > x_top > 0`` of ``V'`` for metastable parameters.

    V' as a function of ``x = e**y`` is ``g*x**2 + kappa*x - theta_bar``.  The
    closed form is refined by bisection on each monotone branch of that
    parabola when the discriminant is small relative to ``kappa**2``.
    """
    disc = discriminant(p)
    hi, lo = _stable_quadratic_roots(p.g, p.kappa, -p.theta_bar)
    if disc < _ILL_CONDITIONED * p.kappa**2:
        vertex = -p.kappa / (2.0 * p.g)
        dv = lambda x: -p.theta_bar + x * (p.kappa + p.g * x)
        if dv(vertex) < 0:
            lo = _bisect(dv, 0.0, vertex)
            upper = vertex
            while dv(upper) < 0:
                upper *= 2.0
            hi = _bisect(dv, vertex, upper)
    return hi, lo


def barrier(p: ModelParams) -> BarrierReport:
    """Locate the metastable well and barrier top; ``e_b`` by direct evaluation.

    Raises
    ------
    NoBarrierError
        If the parameters are not in the metastable regime.
    """
    regime = classify_regime(p)
    if regime.kind is not RegimeKind.METASTABLE:
        raise NoBarrierError(
            f"no metastable barrier (regime {regime.kind.value}, "
            f"discriminant {regime.discriminant:.6g})", regime.discriminant)
    x_well, x_top = log_extrema_x(p)
    y_min, y_max = math.log(x_well), math.log(x_top)
    e_b = float(log_potential(y_max, p) - log_potential(y_min, p))
    return BarrierReport(
        y_min=y_min,
        y_max=y_max,
        e_b=e_b,
        v2_min=float(log_potential_d2(y_min, p)),
        v2_max=float(log_potential_d2(y_max, p)),
        temperature=p.temperature,
    )


# ---------------------------------------------------------------- effective

def _eff_log_coefficient(p: ModelParams) -> float:
    return p.theta - 0.5 * p.sigma**2 * (4 - p.nu)


def effective_potential(x, p: ModelParams):
    """``U_eff(x) = (2/sigma**2)[kappa*x + g*x**2/2 - (theta - sigma**2(4-nu)/2) ln x]``."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= 0):
        raise DomainError("effective potential is defined for x > 0 only")
    out = (2.0 / p.sigma**2) * (p.kappa * xa + 0.5 * p.g * xa**2
                                - _eff_log_coefficient(p) * np.log(xa))
    return float(out) if np.ndim(out) == 0 else out


def effective_extrema(p: ModelParams) -> tuple[float, float] | None:
    """Positive-axis stationary points of ``U_eff``: roots of
    ``g*x**2 + kappa*x - c = 0`` with ``c`` the log coefficient.

    For ``nu=2`` this is the classical extrema formula with ``theta`` shifted
    by ``-sigma**2``.  Returns ``(larger, smaller)`` or None if complex.
    """
    c = _eff_log_coefficient(p)
    if p.g == 0:
        if p.kappa == 0:
            return None
        r = c / p.kappa
        return r, r
    if p.kappa**2 + 4.0 * p.g * c < 0:
        return None
    return _stable_quadratic_roots(p.g, p.kappa, -c)


def origin_repelling(p: ModelParams) -> bool:
    """True when the ``ln x`` coefficient of ``U_eff`` makes the origin repelling."""
    return _eff_log_coefficient(p) > 0


# ------------------------------------------------------- partner potentials

def qm_potentials(y, p: ModelParams):
    """Partner potentials ``(U_minus, U_plus)`` as explicit quartics in ``e**y``.

    ``U_pm = V'**2/2 +- (sigma**2/2) V''``.
    """
    x = np.exp(y)
    tb, k, g, s2 = p.theta_bar, p.kappa, p.g, p.sigma**2
    common = 0.5 * tb * tb + x * x * (0.5 * k * k - g * tb + x * (k * g + 0.5 * g * g * x))
    u_minus = common - k * (tb + 0.5 * s2) * x - g * s2 * x * x
    u_plus = common - k * (tb - 0.5 * s2) * x + g * s2 * x * x
    return u_minus, u_plus


def qm_potentials_from_superpotential(y, p: ModelParams):
    """Same as :func:`qm_potentials` but assembled from ``V'`` and ``V''``."""
    d1 = log_potential_d1(y, p)
    d2 = log_potential_d2(y, p)
    half = 0.5 * p.sigma**2 * d2
    return 0.5 * d1 * d1 - half, 0.5 * d1 * d1 + half


def qm_potential_dy(y, p: ModelParams, sector: int):
    """``dU_pm/dy`` evaluated through ``x = e**y`` (sector -1 or +1)."""
    x = np.exp(y)
    return qm_potential_dy_x(x, p, sector)


def qm_potential_dy_x(x, p: ModelParams, sector: int):
    """``x * dU_pm/dx`` for the quartic in ``x``; defined for any real ``x``."""
    c1, c2, c3, c4 = _qm_coefficients(p, sector)
    return x * (c1 + x * (2.0 * c2 + x * (3.0 * c3 + 4.0 * c4 * x)))


def _qm_coefficients(p: ModelParams, sector: int) -> tuple[float, float, float, float]:
    if sector not in (-1, 1):
        raise DomainError("sector must be -1 (U_minus) or +1 (U_plus)")
    tb, k, g, s2 = p.theta_bar, p.kappa, p.g, p.sigma**2
    c1 = -k * (tb - sector * 0.5 * s2)
    c2 = 0.5 * k * k - g * tb + sector * g * s2
    return c1, c2, k * g, 0.5 * g * g


@dataclass(frozen=True)
class CardanoRoots:
    """Real roots of ``x**3 + a*x**2 + b*x + c`` plus the trivial root 0.

    ``roots`` is sorted ascending and always contains 0.  ``n_real_cubic`` is
    the number of distinct real roots of the cubic as classified by ``Q``.
    """

    roots: tuple[float, ...]
    discriminant_q: float
    coefficients: dict
    n_real_cubic: int


def qm_extrema(p: ModelParams, sector: int) -> CardanoRoots:
    """Stationary points of ``U_minus`` (sector -1) or ``U_plus`` (+1) in ``x``.

    Solves the depressed cubic by Cardano's formula (trigonometric form for
    three real roots).
    """
    if p.g <= 0:
        raise DomainError("Cardano extrema require g > 0")
    c1, c2, c3, c4 = _qm_coefficients(p, sector)
    # x*dU/dx = x*(c1 + 2c2 x + 3c3 x^2 + 4c4 x^3); normalize the cubic by 4c4 = 2g^2
    lead = 4.0 * c4
    a, b, c = 3.0 * c3 / lead, 2.0 * c2 / lead, c1 / lead
    pp = b - a * a / 3.0
    qq = 2.0 * (a / 3.0) ** 3 - a * b / 3.0 + c
    Q = (pp / 3.0) ** 3 + (qq / 2.0) ** 2
    shift = -a / 3.0
    scale = max(abs(pp) ** 1.5, abs(qq), 1e-300)
    if abs(Q) <= 1e-14 * scale**2:
        u = np.cbrt(-qq / 2.0)
        cubic = sorted({2.0 * u + shift, -u + shift})
        n_real = len(cubic)
    elif Q > 0:
        sq = math.sqrt(Q)
        A = float(np.cbrt(-qq / 2.0 + sq))
        B = float(np.cbrt(-qq / 2.0 - sq))
        cubic = [A + B + shift]
        n_real = 1
    else:
        r = math.sqrt(-pp / 3.0)
        arg = max(-1.0, min(1.0, -qq / (2.0 * r**3)))
        phi = math.acos(arg)
        cubic = sorted(2.0 * r * math.cos((phi - 2.0 * math.pi * k) / 3.0) + shift
                       for k in range(3))
        n_real = 3
    cubic = [_polish(x, a, b, c) for x in cubic]
    roots = tuple(sorted(cubic + [0.0]))
    coeffs = {"a": a, "b": b, "c": c, "p": pp, "q": qq}
    return CardanoRoots(roots, Q, coeffs, n_real)


def _polish(x: float, a: float, b: float, c: float) -> float:
    """Two Newton steps on the monic cubic; guards against rounding in acos/cbrt."""
    for _ in range(2):
        f = ((x + a) * x + b) * x + c
        df = (3.0 * x + 2.0 * a) * x + b
        if df == 0.0:
            break
        step = f / df
        x -= step
        if abs(step) <= 1e-16 * max(1.0, abs(x)):
            break
    return x
