"""Hot numeric loops, each with a numba and a pure-numpy implementation.

The module-level names (``tail_dp``, ``count_hits``, ``waterfill_power``) are
bound to whichever backend :func:`robust_crowdsense._accel.requested_backend`
selects at import time. Both variants stay importable for tests and the
benchmark script.
"""

import numpy as np

from ._accel import njit, requested_backend

# ---------------------------------------------------------------------------
# Poisson-binomial upper tail, Pr{#successes >= k}
# ---------------------------------------------------------------------------


def tail_dp_numpy(rho, k):
    rho = np.asarray(rho, dtype=np.float64)
    if k <= 0:
        return 1.0
    # dp[j] = Pr{exactly j successes so far}, j < k; mass reaching k is absorbed
    dp = np.zeros(k, dtype=np.float64)
    dp[0] = 1.0
    tail = 0.0
    comp = 0.0
    for p in rho:
        q = 1.0 - p
        y = dp[k - 1] * p - comp
        s = tail + y
        comp = (s - tail) - y
        tail = s
        shifted = dp[:-1] * p
        dp *= q
        dp[1:] += shifted
    below = float(dp.sum())
    if below < 0.5:
        # the complement is the more accurate of the two near 1
        tail = 1.0 - below
    return min(1.0, max(0.0, tail))


@njit(cache=True, nogil=True)
def _tail_dp_jit(rho, k):
    if k <= 0:
        return 1.0
    dp = np.zeros(k, dtype=np.float64)
    dp[0] = 1.0
    tail = 0.0
    comp = 0.0
    for i in range(rho.shape[0]):
        p = rho[i]
        q = 1.0 - p
        y = dp[k - 1] * p - comp
        s = tail + y
        comp = (s - tail) - y
        tail = s
        for j in range(k - 1, 0, -1):
            dp[j] = dp[j] * q + dp[j - 1] * p
        dp[0] = dp[0] * q
    below = 0.0
    for j in range(k):
        below += dp[j]
    if below < 0.5:
        tail = 1.0 - below
    return min(1.0, max(0.0, tail))


def tail_dp_numba(rho, k):
    return float(_tail_dp_jit(np.ascontiguousarray(rho, dtype=np.float64), int(k)))


# ---------------------------------------------------------------------------
# Monte Carlo hit counting over a block of uniforms (rows = experiments)
# ---------------------------------------------------------------------------


def count_hits_numpy(u, rho, k):
    successes = (u < rho[np.newaxis, :]).sum(axis=1)
    return int(np.count_nonzero(successes >= k))


@njit(cache=True, nogil=True)
def _count_hits_jit(u, rho, k):
    hits = 0
    n, t = u.shape
    for i in range(n):
        c = 0
        for j in range(t):
            if u[i, j] < rho[j]:
                c += 1
        if c >= k:
            hits += 1
    return hits


def count_hits_numba(u, rho, k):
    return int(_count_hits_jit(u, np.ascontiguousarray(rho, dtype=np.float64), int(k)))


# ---------------------------------------------------------------------------
# Water-filling for power-law integrands f_i(x) = a_i / (p_i + 1) * x**(p_i + 1)
# where a_i = f_i'(1).  Marginal inverse: x = (nu / a_i) ** (1 / p_i).
# ---------------------------------------------------------------------------


def _mass_numpy(nu, coef, inv_p):
    x = np.minimum(1.0, (nu / coef) ** inv_p)
    return x, float(x.sum())


def waterfill_power_numpy(coef, exponent, gamma, tol, max_iter):
    """Bisection on the common marginal. Returns (x, nu, iterations)."""
    coef = np.asarray(coef, dtype=np.float64)
    inv_p = 1.0 / np.asarray(exponent, dtype=np.float64)
    lo, hi = 0.0, float(coef.max())
    x_hi = np.ones_like(coef)
    m_hi = float(coef.size)
    it = 0
    while it < max_iter and m_hi - gamma > tol:
        it += 1
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        x, m = _mass_numpy(mid, coef, inv_p)
        if m >= gamma:
            hi, x_hi, m_hi = mid, x, m
        else:
            lo = mid
    return x_hi, hi, it


@njit(cache=True, nogil=True)
def _waterfill_power_jit(coef, inv_p, gamma, tol, max_iter):
    n = coef.shape[0]
    lo = 0.0
    hi = coef.max()
    x_hi = np.ones(n)
    x = np.empty(n)
    m_hi = float(n)
    it = 0
    while it < max_iter and m_hi - gamma > tol:
        it += 1
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        m = 0.0
        for i in range(n):
            v = (mid / coef[i]) ** inv_p[i]
            if v > 1.0:
                v = 1.0
            x[i] = v
            m += v
        if m >= gamma:
            hi = mid
            m_hi = m
            x_hi[:] = x
        else:
            lo = mid
    return x_hi, hi, it


def waterfill_power_numba(coef, exponent, gamma, tol, max_iter):
    coef = np.ascontiguousarray(coef, dtype=np.float64)
    inv_p = 1.0 / np.ascontiguousarray(exponent, dtype=np.float64)
    x, nu, it = _waterfill_power_jit(coef, inv_p, float(gamma), float(tol), int(max_iter))
    return x, float(nu), int(it)


IMPLEMENTATIONS = {
    "numpy": {
        "tail_dp": tail_dp_numpy,
        "count_hits": count_hits_numpy,
        "waterfill_power": waterfill_power_numpy,
    },
    "numba": {
        "tail_dp": tail_dp_numba,
        "count_hits": count_hits_numba,
        "waterfill_power": waterfill_power_numba,
    },
}

BACKEND = requested_backend()
tail_dp = IMPLEMENTATIONS[BACKEND]["tail_dp"]
count_hits = IMPLEMENTATIONS[BACKEND]["count_hits"]
waterfill_power = IMPLEMENTATIONS[BACKEND]["waterfill_power"]
