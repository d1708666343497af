"""Scalar special functions and log-domain combinatorics.

All logarithms are base 2 unless a name says otherwise. A weight of zero is
encoded in the log domain as ``-inf``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .errors import DomainError

LN2 = math.log(2.0)
NEG_INF = -math.inf


def _check_probability(p: float, name: str = "p") -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0 or math.isnan(p):
        raise DomainError(f"{name}={p!r} is not a probability")
    return p


def binary_entropy(p: float) -> float:
    """Binary entropy ``-p log2 p - (1-p) log2 (1-p)`` with ``0 log 0 = 0``.

    The smaller of ``p`` and ``1 - p`` is always used as the primary argument so
    that ``h(p)`` and ``h(1 - p)`` go through the same arithmetic.
    """
    p = _check_probability(p)
    q = p if p <= 0.5 else 1.0 - p
    if q == 0.0:
        return 0.0
    return -(q * math.log2(q) + (1.0 - q) * math.log1p(-q) / LN2)


def binary_entropy_array(p) -> np.ndarray:
    """Vectorised :func:`binary_entropy` for arrays already known to lie in [0, 1]."""
    p = np.asarray(p, dtype=float)
    q = np.where(p <= 0.5, p, 1.0 - p)
    out = np.zeros_like(q)
    pos = q > 0.0
    qp = q[pos]
    out[pos] = -(qp * np.log2(qp) + (1.0 - qp) * np.log1p(-qp) / LN2)
    return out


def clipped_entropy(x: float) -> float:
    """``h(x)`` below one half and exactly 1 from one half upwards.

    Arguments above 1 are legal; several upper bounds feed such values in.
    """
    x = float(x)
    if x < 0.0 or math.isnan(x):
        raise DomainError(f"clipped_entropy needs x >= 0, got {x!r}")
    if x >= 0.5:
        return 1.0
    return binary_entropy(x)


def eta(k: int, x: float) -> float:
    """``clipped_entropy(x) + k * x``."""
    if k < 0:
        raise DomainError(f"eta needs k >= 0, got {k}")
    return clipped_entropy(x) + k * float(x)


def kl_bernoulli(p: float, q: float) -> float:
    """Binary relative entropy ``d(p||q)`` in bits."""
    p = _check_probability(p)
    q = _check_probability(q, "q")
    if q in (0.0, 1.0):
        if p != q:
            raise DomainError(f"d({p}||{q}) is infinite")
        return 0.0
    total = 0.0
    if p > 0.0:
        total += p * math.log2(p / q)
    if p < 1.0:
        total += (1.0 - p) * math.log2((1.0 - p) / (1.0 - q))
    return max(total, 0.0)


def log2_binomial(n: int, k: int) -> float:
    """``log2 C(n, k)`` via log-gamma; ``-inf`` when ``k`` is out of range."""
    if n < 0:
        raise DomainError(f"log2_binomial needs n >= 0, got {n}")
    if k < 0 or k > n:
        return NEG_INF
    return (math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)) / LN2


def log2_binomial_row(n: int) -> np.ndarray:
    """``log2 C(n, k)`` for ``k = 0..n`` as one array."""
    k = np.arange(n + 1, dtype=float)
    return (gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)) / LN2


def log2_sum_exp2(values) -> float:
    """``log2(sum(2**v))`` without overflow; ``-inf`` for an empty or all-zero sum."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return NEG_INF
    top = np.max(v)
    if top == NEG_INF:
        return NEG_INF
    return float(top + np.log2(np.sum(np.exp2(v - top))))


_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _stirlerr_formula(n: np.ndarray) -> np.ndarray:
    """``log(n!) - log(sqrt(2 pi n) (n/e)^n)`` for ``n >= 1``."""
    n = np.asarray(n, dtype=float)
    out = np.empty_like(n)
    small = n <= 15
    ns = n[small]
    out[small] = gammaln(ns + 1.0) - (ns + 0.5) * np.log(ns) + ns - _HALF_LOG_2PI
    nb = n[~small]
    nn = nb * nb
    s0, s1, s2, s3, s4 = 1 / 12, 1 / 360, 1 / 1260, 1 / 1680, 1 / 1188
    out[~small] = np.select(
        [nb > 500, nb > 80, nb > 35],
        [(s0 - s1 / nn) / nb,
         (s0 - (s1 - s2 / nn) / nn) / nb,
         (s0 - (s1 - (s2 - s3 / nn) / nn) / nn) / nb],
        (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / nb,
    )
    return out


_STIRLERR_TABLE = np.concatenate([[0.0], _stirlerr_formula(np.arange(1, 4097))])


def _stirlerr(n: np.ndarray) -> np.ndarray:
    """Stirling-series remainder for integer-valued ``n >= 1``, via a growing table."""
    global _STIRLERR_TABLE
    idx = np.asarray(n).astype(np.int64)
    top = int(idx.max()) if idx.size else 0
    if top >= _STIRLERR_TABLE.size:
        size = max(top + 1, 2 * _STIRLERR_TABLE.size)
        extra = _stirlerr_formula(np.arange(_STIRLERR_TABLE.size, size))
        _STIRLERR_TABLE = np.concatenate([_STIRLERR_TABLE, extra])
    return _STIRLERR_TABLE[idx]


def _bd0(x: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Deviance term ``x log(x/m) + m - x`` evaluated without cancellation."""
    x = np.asarray(x, dtype=float)
    m = np.asarray(m, dtype=float)
    x, m = np.broadcast_arrays(x, m)
    out = np.empty(x.shape)
    near = np.abs(x - m) < 0.1 * (x + m)
    xf, mf = x[~near], m[~near]
    with np.errstate(divide="ignore", invalid="ignore"):
        out[~near] = np.where(xf == 0, mf, xf * np.log(xf / mf) + mf - xf)
    xn, mn = x[near], m[near]
    v = (xn - mn) / (xn + mn)
    s = (xn - mn) * v
    ej = 2.0 * xn * v
    v2 = v * v
    for j in range(1, 40):
        ej = ej * v2
        s_new = s + ej / (2 * j + 1)
        if np.array_equal(s_new, s):
            break
        s = s_new
    out[near] = s
    return out


def _log_binom_pmf(x, size, p) -> np.ndarray:
    """Natural log of the binomial pmf in saddle-point form (Loader's method).

    ``x``, ``size`` and ``p`` broadcast against each other.
    """
    x, size, p = np.broadcast_arrays(np.asarray(x, dtype=float),
                                     np.asarray(size, dtype=float),
                                     np.asarray(p, dtype=float))
    q = 1.0 - p
    out = np.full(x.shape, -np.inf)
    valid = (x >= 0) & (x <= size)
    # degenerate success rates: all mass on one end
    out[valid & (p == 0.0) & (x == 0)] = 0.0
    out[valid & (q == 0.0) & (x == size)] = 0.0
    regular = valid & (p > 0.0) & (q > 0.0)
    zero = regular & (x == 0)
    full = regular & (x == size) & ~zero
    mid = regular & ~zero & ~full
    if zero.any():
        sz, pz, qz = size[zero], p[zero], q[zero]
        out[zero] = np.where(pz < 0.1, -_bd0(sz, sz * qz) - sz * pz, sz * np.log(qz))
    if full.any():
        sf, pf, qf = size[full], p[full], q[full]
        out[full] = np.where(qf < 0.1, -_bd0(sf, sf * pf) - sf * qf, sf * np.log(pf))
    if mid.any():
        xm, nm, pm, qm = x[mid], size[mid], p[mid], q[mid]
        lc = (_stirlerr(nm) - _stirlerr(xm) - _stirlerr(nm - xm)
              - _bd0(xm, nm * pm) - _bd0(nm - xm, nm * qm))
        lf = math.log(2.0 * math.pi) + np.log(xm) + np.log1p(-xm / nm)
        out[mid] = lc - 0.5 * lf
    return out


def hypergeom_log2_pmf(k, n: int, l: int, j):
    """log2 of :func:`hypergeom_pmf`, vectorised over ``k`` and ``j``.

    Written as a ratio of three binomial pmfs at the common success rate
    ``j / (n + l)``; each factor is a moderate number, so the result keeps
    full relative precision even when ``n + l`` is ~1e5.
    """
    k, j = np.broadcast_arrays(np.asarray(k), np.asarray(j))
    N = n + l
    p = j / N if N > 0 else np.zeros(j.shape)
    kf = k.astype(float)
    jf = j.astype(float)
    inside = (k >= 0) & (k <= l) & (j - k >= 0) & (j - k <= n)
    out = np.full(k.shape, NEG_INF)
    if inside.any():
        ki, ji, pi = kf[inside], jf[inside], p[inside]
        ln = (_log_binom_pmf(ki, l, pi) + _log_binom_pmf(ji - ki, n, pi)
              - _log_binom_pmf(ji, N, pi))
        out[inside] = ln / LN2
    return float(out) if out.ndim == 0 else out


def hypergeom_pmf(k: int, n: int, l: int, j: int) -> float:
    """Probability that ``k`` of ``j`` errors land among ``l`` check positions.

    The population has ``n + l`` positions of which ``l`` are checks; ``j``
    positions are in error. Out-of-support ``k`` gives 0.
    """
    if n < 0 or l < 0 or j < 0 or j > n + l:
        raise DomainError(f"invalid hypergeometric parameters n={n}, l={l}, j={j}")
    return float(np.exp2(hypergeom_log2_pmf(k, n, l, j)))


def hypergeom_mean(n: int, l: int, j: int) -> float:
    return l * j / (n + l)


def hypergeom_variance(n: int, l: int, j: int) -> float:
    N = n + l
    return j * l * n * (N - j) / (N * N * (N - 1))


def gauss_cdf(x: float) -> float:
    """Standard normal distribution function via ``erfc``."""
    return 0.5 * math.erfc(-float(x) / math.sqrt(2.0))


# Acklam's rational approximation to the normal quantile (relative error ~1e-9).
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _acklam(p: float) -> float:
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    if p > 1.0 - _P_LOW:
        return -_acklam(1.0 - p)
    q = p - 0.5
    r = q * q
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
        (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)


def gauss_quantile(eps: float) -> float:
    """Inverse of :func:`gauss_cdf` on the open unit interval."""
    eps = float(eps)
    if not 0.0 < eps < 1.0:
        raise DomainError(f"gauss_quantile needs 0 < eps < 1, got {eps!r}")
    if eps == 0.5:
        return 0.0
    x = _acklam(eps)
    # one Halley step; the residual is taken on the smaller tail to keep precision
    if x < 0:
        e = gauss_cdf(x) - eps
    else:
        e = (1.0 - eps) - gauss_cdf(-x)
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)
