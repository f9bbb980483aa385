"""Stable evaluation of Hermite/Laguerre polynomials and the Fock basis.

All evaluators are plain three-term recurrences, vectorized over the
argument.  The Fock basis uses the normalized recurrence so that values
stay finite far beyond the point where explicit factorials overflow.
"""

import numpy as np
from scipy.special import gammaln

__all__ = ["hermite", "laguerre", "fock_psi", "log_factorial_ratio"]


def hermite(n, x):
    """Physicists' Hermite polynomial H_n(x).

    Uses H_{n+1} = 2x H_n - 2n H_{n-1} with H_0 = 1, H_1 = 2x.  Overflow
    to inf is acceptable for extreme n * x.
    """
    if n < 0:
        raise ValueError("degree must be >= 0")
    x = np.asarray(x, dtype=float)
    h_prev = np.zeros_like(x)
    h = np.ones_like(x)
    for i in range(n):
        h, h_prev = 2.0 * x * h - 2.0 * i * h_prev, h
    return h if h.ndim else float(h)


def laguerre(n, alpha, x):
    """Generalized Laguerre polynomial L^alpha_n(x) for integer alpha >= 0.

    Uses (n+1) L^a_{n+1} = (2n+1+a-x) L^a_n - (n+a) L^a_{n-1}.
    """
    if n < 0 or alpha < 0:
        raise ValueError("degree and order must be >= 0")
    x = np.asarray(x, dtype=float)
    l_prev = np.zeros_like(x)
    l = np.ones_like(x)
    for i in range(n):
        l, l_prev = ((2.0 * i + 1.0 + alpha - x) * l - (i + alpha) * l_prev) / (i + 1.0), l
    return l if l.ndim else float(l)


def fock_psi(j, x):
    """Fock basis function psi_j(x) (normalized Hermite function).

    Evaluated with the normalized recurrence
        psi_{n+1} = sqrt(2/(n+1)) x psi_n - sqrt(n/(n+1)) psi_{n-1},
        psi_0 = pi^{-1/4} exp(-x^2/2),
    which stays finite for j in the hundreds where the explicit
    factorial-normalized form overflows.
    """
    if j < 0:
        raise ValueError("index must be >= 0")
    x = np.asarray(x, dtype=float)
    p_prev = np.zeros_like(x)
    p = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    for n in range(j):
        p, p_prev = np.sqrt(2.0 / (n + 1)) * x * p - np.sqrt(n / (n + 1.0)) * p_prev, p
    return p if p.ndim else float(p)


def log_factorial_ratio(k, j):
    """log of sqrt(2^(k-j) k! / j!), computed via log-gamma.

    Exact integer factorials overflow 64-bit floats at 171!; the
    log-gamma route keeps the prefactor usable at any index.
    """
    if k < 0 or j < 0:
        raise ValueError("indices must be >= 0")
    return 0.5 * ((k - j) * np.log(2.0) + gammaln(k + 1) - gammaln(j + 1))
