"""Confluent hypergeometric and parabolic cylinder functions for the partition function.

The Kummer series is written against generic arithmetic so the same code
runs in double precision or in ``mpmath`` extended precision, which is needed
when the two terms of the parabolic cylinder combination nearly cancel.
"""

from __future__ import annotations

import math

import mpmath

from .errors import NumericError

KUMMER_ARG_LIMIT = 50.0


def kummer_m(a, b, x, rtol: float = 1e-16, max_terms: int = 100_000):
    """Kummer's function ``M(a, b, x) = sum_k (a)_k / (b)_k x**k / k!``.

    Terms are accumulated until ``|term| <= rtol * |sum|`` once the term ratio
    has started to shrink.  Works with floats or ``mpmath.mpf``.

    Raises
    ------
    NumericError
        If the series has not converged after ``max_terms`` terms.
    """
    term = x * 0 + 1
    total = term
    for k in range(max_terms):
        term = term * (a + k) / (b + k) * x / (k + 1)
        total = total + term
        if term == 0:
            return total
        if abs(term) <= rtol * abs(total) and abs((a + k) * x) < abs((b + k) * (k + 1)):
            return total
    raise NumericError("Kummer series did not converge",
                       {"a": float(a), "b": float(b), "x": float(x), "terms": max_terms})


def parabolic_cylinder_neg(z, u, dps: int | None = None):
    """``D_{-z}(u)`` from two Kummer series.

    ``D_{-z}(u) = 2**(-z/2) e**(-u**2/4) [sqrt(pi)/Gamma((1+z)/2) M(z/2, 1/2, u**2/2)
    - sqrt(2 pi) u / Gamma(z/2) M((1+z)/2, 3/2, u**2/2)]``.

    With ``dps`` set the evaluation runs in ``mpmath`` at that many digits and
    an ``mpf`` is returned; otherwise double precision is used.
    """
    if dps is None:
        x = 0.5 * u * u
        s = (math.sqrt(math.pi) * _rgamma(0.5 * (1 + z)) * kummer_m(0.5 * z, 0.5, x)
             - math.sqrt(2 * math.pi) * u * _rgamma(0.5 * z) * kummer_m(0.5 * (1 + z), 1.5, x))
        return 2.0 ** (-0.5 * z) * math.exp(-0.25 * u * u) * s
    with mpmath.workdps(dps):
        z, u = mpmath.mpf(z), mpmath.mpf(u)
        x = u * u / 2
        tol = mpmath.mpf(10) ** (-dps)
        m1 = kummer_m(z / 2, mpmath.mpf(0.5), x, rtol=tol)
        m2 = kummer_m((1 + z) / 2, mpmath.mpf(1.5), x, rtol=tol)
        s = (mpmath.sqrt(mpmath.pi) * mpmath.rgamma((1 + z) / 2) * m1
             - mpmath.sqrt(2 * mpmath.pi) * u * mpmath.rgamma(z / 2) * m2)
        return mpmath.power(2, -z / 2) * mpmath.exp(-u * u / 4) * s


def _rgamma(x: float) -> float:
    """``1/Gamma(x)``, zero at the poles."""
    if x <= 0 and x == math.floor(x):
        return 0.0
    if x > 0:
        return math.exp(-math.lgamma(x))
    return 1.0 / math.gamma(x)
