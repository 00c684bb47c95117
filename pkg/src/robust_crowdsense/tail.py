"""Success-count tails for independent, non-identical Bernoulli trials.

``exact_tail`` runs an O(T*k) dynamic program over success counts;
``monte_carlo_tail`` estimates the same quantity from seeded draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError

# rows of uniforms generated per block in the Monte Carlo loop
_BLOCK_CELLS = 1 << 20


@dataclass(frozen=True)
class TailEstimate:
    value: float
    method: str
    samples: int = 0
    std_error: float = 0.0
    seed: int = 0
    stream: tuple = ()


def k_threshold(T, alpha):
    """Smallest integer count not below ``T * alpha``."""
    if not (0.0 < alpha <= 1.0):
        raise DomainError(f"alpha must lie in (0, 1], got {alpha!r}")
    x = T * alpha
    nearest = round(x)
    if abs(x - nearest) <= 1e-9 * max(1.0, abs(x)):
        k = int(nearest)
    else:
        k = int(math.ceil(x))
    return min(max(k, 1), T)


def _as_probs(rho):
    rho = np.ascontiguousarray(rho, dtype=np.float64).ravel()
    if np.any(~(rho >= 0.0)) or np.any(rho > 1.0):
        raise DomainError("success probabilities must lie in [0, 1]")
    return rho


def exact_tail(rho, k):
    """``Pr{#successes >= k}`` for independent trials with probabilities ``rho``."""
    rho = _as_probs(rho)
    if not (0 <= k <= rho.size):
        raise DomainError(f"k must lie in [0, {rho.size}], got {k}")
    return kernels.tail_dp(rho, int(k))


def binomial_tail(T, p, k):
    """``Pr{Bin(T, p) >= k}`` through the same dynamic program."""
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"p must lie in [0, 1], got {p!r}")
    return exact_tail(np.full(T, float(p)), k)


def make_rng(seed, stream=()):
    """Independent PCG64 substream keyed by ``stream`` under a master ``seed``."""
    if not (0 <= int(seed) < 2**64):
        raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(ss))


def monte_carlo_tail(rho, k, N, seed, stream=()):
    """Fraction of ``N`` seeded experiments with at least ``k`` successes.

    Bit-for-bit reproducible for a given ``(rho, k, N, seed, stream)``.
    """
    rho = _as_probs(rho)
    if N < 1:
        raise DomainError(f"N must be positive, got {N}")
    rng = make_rng(seed, stream)
    T = rho.size
    block = max(1, _BLOCK_CELLS // max(T, 1))
    hits = 0
    done = 0
    while done < N:
        m = min(block, N - done)
        hits += kernels.count_hits(rng.random((m, T)), rho, int(k))
        done += m
    value = hits / N
    return TailEstimate(
        value=value,
        method="monte_carlo",
        samples=int(N),
        std_error=math.sqrt(value * (1.0 - value) / N),
        seed=int(seed),
        stream=tuple(stream),
    )


def normal_cdf(x):
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


# Acklam's rational approximation to the normal quantile (rel. error < 1.2e-9)
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _acklam(p):
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        )
    if p > 1.0 - _P_LOW:
        return -_acklam(1.0 - p)
    q = p - 0.5
    r = q * q
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
        ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
    )


def inverse_normal_cdf(beta):
    """Standard normal quantile, refined with one Newton step on ``erfc``."""
    if not (0.0 < beta < 1.0):
        raise DomainError(f"beta must lie in (0, 1), got {beta!r}")
    if beta == 0.5:
        return 0.0
    x = _acklam(beta)
    pdf = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return x - (normal_cdf(x) - beta) / pdf
