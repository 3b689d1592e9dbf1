"""Lowest eigenpairs of symmetric tridiagonal matrices.

Eigenvalues come from bisection on Sturm sequence counts, which localizes
the k smallest eigenvalues without touching the rest of the spectrum.
Eigenvectors are obtained by inverse iteration with a banded LU solve.
"""

from __future__ import annotations

import numba
import numpy as np
from scipy.linalg import solve_banded


@numba.njit(cache=True)
def sturm_count(d, e2, x):
    """Number of eigenvalues strictly less than ``x``.

    ``d`` is the diagonal, ``e2`` the squared off-diagonal (length n-1).
    """
    n = d.shape[0]
    tiny = 1e-300
    count = 0
    q = d[0] - x
    if q < 0:
        count += 1
    for i in range(1, n):
        if q == 0.0:
            q = tiny
        q = d[i] - x - e2[i - 1] / q
        if q < 0:
            count += 1
    return count


@numba.njit(cache=True)
def _lowest_eigenvalues(d, e, k, rtol):
    n = d.shape[0]
    e2 = e * e
    ae = np.abs(e)
    lo = np.inf
    upper = np.empty(n)
    for i in range(n):
        r = 0.0
        if i > 0:
            r += ae[i - 1]
        if i < n - 1:
            r += ae[i]
        lo = min(lo, d[i] - r)
        upper[i] = d[i] + r
    # min-max on the k coordinates with the smallest Gershgorin upper ends
    # bounds the k-th eigenvalue; keeps bisection short when d has huge entries
    hi = np.sort(upper)[k - 1]
    span = hi - lo
    lo -= 1e-12 * span + 1e-300
    hi += 1e-12 * span + 1e-300
    out = np.empty(k)
    left = lo
    for j in range(k):
        # eigenvalue j is the smallest x with count(x) > j
        a = left
        b = hi
        for _ in range(400):
            m = 0.5 * (a + b)
            if m <= a or m >= b:
                break
            if sturm_count(d, e2, m) > j:
                b = m
            else:
                a = m
            if b - a <= rtol * max(abs(a), abs(b)):
                break
        out[j] = 0.5 * (a + b)
        left = a
    return out


def lowest_eigenvalues(d: np.ndarray, e: np.ndarray, k: int, rtol: float = 4e-16) -> np.ndarray:
    """The ``k`` smallest eigenvalues, ascending.

    Parameters
    ----------
    d : ndarray, shape (n,)
        Diagonal.
    e : ndarray, shape (n-1,)
        Off-diagonal.
    k : int
        Number of eigenvalues, ``1 <= k <= n``.
    rtol : float
        Relative width at which bisection stops.
    """
    d = np.ascontiguousarray(d, dtype=float)
    e = np.ascontiguousarray(e, dtype=float)
    if not 1 <= k <= d.size:
        raise ValueError("k must satisfy 1 <= k <= n")
    if e.size != d.size - 1:
        raise ValueError("off-diagonal must have length n-1")
    return _lowest_eigenvalues(d, e, int(k), float(rtol))


def eigenvector(d: np.ndarray, e: np.ndarray, lam: float, iters: int = 3) -> np.ndarray:
    """Unit eigenvector for eigenvalue ``lam`` by inverse iteration.

    The sign is fixed so that the largest-magnitude component is positive.
    """
    n = d.size
    shift = lam - 1e-10 * max(abs(lam), np.abs(d).max() * 1e-6)
    ab = np.zeros((3, n))
    ab[0, 1:] = e
    ab[1, :] = d - shift
    ab[2, :-1] = e
    v = np.ones(n) / np.sqrt(n)
    for _ in range(iters):
        v = solve_banded((1, 1), ab, v, check_finite=False)
        v /= np.linalg.norm(v)
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return v
