"""Independent reference computations used only by the tests."""

import math
from functools import lru_cache

import mpmath

import numpy as np
from scipy.integrate import solve_ivp
from scipy.stats import binom


def q_number_geometric(n, q):
    return sum(q**k for k in range(n))


@lru_cache(maxsize=None)
def gaussian_poly_coeffs(M, n):
    """Integer coefficients of [M choose n]_q via the q-Pascal rule.

    [M, n] = [M-1, n-1] + q^n [M-1, n]
    """
    if n < 0 or n > M:
        return (0,)
    if n == 0 or n == M:
        return (1,)
    a = gaussian_poly_coeffs(M - 1, n - 1)
    b = (0,) * n + gaussian_poly_coeffs(M - 1, n)
    size = max(len(a), len(b))
    return tuple((a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(size))


def gaussian_binomial_poly(M, n, q):
    return float(sum(c * q**i for i, c in enumerate(gaussian_poly_coeffs(M, n))))


@lru_cache(maxsize=None)
def _pascal_table(q, m_max, dps):
    # [m, k] = [m-1, k-1] + q^k [m-1, k], evaluated in high precision
    with mpmath.workdps(dps):
        qm = mpmath.mpf(q)
        rows = [[mpmath.mpf(1)]]
        for m in range(1, m_max + 1):
            prev = rows[-1]
            row = [mpmath.mpf(1)]
            for k in range(1, m):
                row.append(prev[k - 1] + qm**k * prev[k])
            row.append(mpmath.mpf(1))
            rows.append(row)
        return rows


def q_one_minus_pow_series(tau, m, q, dps=120):
    """Alternating q-binomial-theorem sum for (1 - tau)_q^m.

    The sum cancels catastrophically in double precision, so it is evaluated
    with mpmath at ``dps`` digits from the exact float inputs.
    """
    rows = _pascal_table(q, max(m, 64), dps)
    with mpmath.workdps(dps):
        qm, tm = mpmath.mpf(q), mpmath.mpf(tau)
        total = mpmath.fsum(rows[m][k] * qm ** (k * (k - 1) // 2) * (-tm) ** k for k in range(m + 1))
        return float(total)


def classical_pmf(M, tau):
    return binom.pmf(np.arange(M + 1), M, tau)


def solve_reduced_ode(v1, v2, g, eps, theta1, theta2, times):
    """Two-amplitude reduced block solved with scipy's adaptive DOP853."""

    def rhs(t, y):
        p1, p2 = y[0] + 1j * y[1], y[2] + 1j * y[3]
        d1 = -1j * (v1 * p1 + 3 * g * np.exp(-1j * eps * t) * p2)
        d2 = -1j * (g * np.exp(1j * eps * t) * p1 + v2 * p2)
        return [d1.real, d1.imag, d2.real, d2.imag]

    y0 = [theta1.real, theta1.imag, theta2.real, theta2.imag]
    sol = solve_ivp(rhs, (times[0], times[-1]), y0, t_eval=times, method="DOP853", rtol=1e-12, atol=1e-13)
    return sol.y[0] + 1j * sol.y[1], sol.y[2] + 1j * sol.y[3]


def brute_force_state(beta, theta):
    """Initial joint state built term by term from its defining sum."""
    M = len(beta) - 1
    psi = np.zeros((M + 2, 4), dtype=complex)
    for n, b in enumerate(beta):
        psi[n, 0] += b * theta[0]
        for k in range(1, 4):
            psi[n + 1, k] += b * theta[k]
    return psi


def outer_product_reductions(amps):
    """Partial traces built from explicit kets and outer products."""
    nf, na = amps.shape
    full = np.outer(amps.ravel(), amps.ravel().conj())
    rho_a = np.zeros((na, na), dtype=complex)
    rho_f = np.zeros((nf, nf), dtype=complex)
    for n in range(nf):
        for a in range(na):
            for b in range(na):
                rho_a[a, b] += full[n * na + a, n * na + b]
    for a in range(na):
        for n in range(nf):
            for m in range(nf):
                rho_f[n, m] += full[n * na + a, m * na + a]
    return rho_a, rho_f
