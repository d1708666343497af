"""Normal and large-deviation approximations of the finite-length bounds.

``r`` is always the raw-key fraction ``n / (n + l)``. Rates are in bits;
only the comparison bound keeps its natural-base exponential.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError
from .numerics import (
    LN2,
    binary_entropy,
    binary_entropy_array,
    clipped_entropy,
    gauss_cdf,
    gauss_quantile,
)
from .secbounds import ProtocolParams, theorem1_bound

GRID_POINTS = 1024
TOL = 1e-9
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class AsymptoticConfig:
    """Ratio ``r``, phase-error range ``[p_low, p_high]`` and slack ``p -> eps(p)``."""

    r: float
    p_low: float
    p_high: float
    slack_fn: Callable[[float], float]

    def __post_init__(self):
        if not callable(self.slack_fn):
            value = float(self.slack_fn)
            object.__setattr__(self, "slack_fn", lambda p: value)
        if not 0.0 < self.r < 1.0:
            raise DomainError(f"r must lie in (0, 1), got {self.r}")
        if not 0.0 <= self.p_low <= self.p_high < 0.5:
            raise DomainError(f"need 0 <= p_low <= p_high < 1/2, got {self.p_low}, {self.p_high}")
        samples = [self.slack_fn(p) for p in self.grid(33)]
        if any(not math.isfinite(s) or s < 0 for s in samples):
            raise DomainError("slack_fn must be finite and nonnegative on [p_low, p_high]")

    def grid(self, points: int = GRID_POINTS) -> np.ndarray:
        if self.p_low == self.p_high:
            return np.array([self.p_low])
        return np.linspace(self.p_low, self.p_high, points)


def golden_section_min(func: Callable[[float], float], a: float, b: float,
                       tol: float = TOL, max_iter: int = 200) -> tuple[float, float]:
    """Minimise a unimodal ``func`` on ``[a, b]``; returns ``(x, func(x))``."""
    if b < a:
        a, b = b, a
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = func(c), func(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = func(d)
    else:
        if b - a > tol:
            raise ConvergenceError(f"golden section left a bracket of width {b - a:.3g}")
    if not (math.isfinite(fc) and math.isfinite(fd)):
        raise ConvergenceError("objective is not finite near the minimiser")
    return (c, fc) if fc <= fd else (d, fd)


def _refine_on_grid(func: Callable[[float], float], grid: np.ndarray,
                    values: np.ndarray) -> tuple[float, float]:
    """Golden-section refinement around the best grid point; never worse than the grid."""
    i = int(np.argmin(values))
    if grid.size == 1:
        return float(grid[0]), float(values[0])
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    x, fx = golden_section_min(func, float(lo), float(hi))
    if fx <= values[i]:
        return x, fx
    return float(grid[i]), float(values[i])


# ----------------------------------------------------------------------------
# normal approximation


def _normal_argument(r: float, p: float, eps_tilde: float) -> float:
    return -math.sqrt(r * (1.0 - r)) / math.sqrt(p * (1.0 - p)) * eps_tilde


def normal_limit(cfg: AsymptoticConfig) -> float:
    """``max_p Phi(-sqrt(r(1-r)) eps~(p) / sqrt(p(1-p)))`` over ``[p_low, p_high]``."""
    if cfg.p_low <= 0.0:
        raise DomainError("normal_limit needs p_low > 0")

    def neg(p: float) -> float:
        return -gauss_cdf(_normal_argument(cfg.r, p, cfg.slack_fn(p)))

    grid = cfg.grid()
    values = np.array([neg(p) for p in grid])
    _, best = _refine_on_grid(neg, grid, values)
    return -best


def table_statistic(n: int, l: int, k: int, delta: float) -> float:
    """``-sqrt(nl/(n+l)) delta_k / sqrt((k/l)(1-k/l))``, whose Phi is the security level."""
    if not 0 < k < l:
        raise DomainError(f"need 0 < k < l, got k={k}, l={l}")
    phat = k / l
    return -math.sqrt(n * l / (n + l)) * delta / math.sqrt(phat * (1.0 - phat))


def solve_delta(n: int, l: int, k: int, target_eps: float) -> float:
    """Slack ``delta_k`` that makes the normal-approximated per-bit bound ``target_eps``."""
    if not 0 < k < l:
        raise DomainError(f"need 0 < k < l, got k={k}, l={l}")
    if not 0.0 < target_eps <= 0.5:
        raise DomainError(f"target_eps must lie in (0, 1/2], got {target_eps}")
    phat = k / l
    return -math.sqrt((n + l) / (n * l)) * math.sqrt(phat * (1.0 - phat)) * gauss_quantile(target_eps)


# ----------------------------------------------------------------------------
# large deviations


def exponent_objective(p, eps, eps_prime, r: float):
    """The bracket minimised in the exponent definition (vectorised)."""
    p = np.asarray(p, dtype=float)
    eps = np.asarray(eps, dtype=float)
    ep = np.asarray(eps_prime, dtype=float)
    return (binary_entropy_array(p + r * (eps - ep))
            - (1.0 - r) * binary_entropy_array(p)
            - 2.0 * r * binary_entropy_array(p + eps - ep)
            + r * binary_entropy_array(p + eps))


@dataclass(frozen=True)
class ExponentResult:
    value: float
    p: float
    eps_prime: float


def _inner_min(p: float, eps: float, r: float) -> tuple[float, float]:
    """``min_{0 <= eps' <= eps}`` of the objective at fixed ``p``; returns ``(eps', value)``."""
    if eps == 0.0:
        return 0.0, float(exponent_objective(p, 0.0, 0.0, r))
    grid = np.linspace(0.0, eps, GRID_POINTS + 1)
    values = exponent_objective(p, eps, grid, r)
    return _refine_on_grid(lambda e: float(exponent_objective(p, eps, e, r)), grid, values)


def exponent_details(cfg: AsymptoticConfig) -> ExponentResult:
    """Large-deviation exponent together with its minimising ``(p, eps')``."""
    pgrid = cfg.grid()
    eps = np.array([cfg.slack_fn(p) for p in pgrid])
    if np.any(pgrid + eps >= 0.5):
        raise DomainError("p + eps(p) must stay below 1/2 on [p_low, p_high]")
    if pgrid.size == 1:
        ep, val = _inner_min(float(pgrid[0]), float(eps[0]), cfg.r)
        return ExponentResult(max(val, 0.0), float(pgrid[0]), ep)

    frac = np.linspace(0.0, 1.0, GRID_POINTS + 1)
    table = exponent_objective(pgrid[:, None], eps[:, None], eps[:, None] * frac[None, :], cfg.r)
    row_min = table.min(axis=1)

    def outer(p: float) -> float:
        return _inner_min(p, cfg.slack_fn(p), cfg.r)[1]

    p_star, _ = _refine_on_grid(outer, pgrid, row_min)
    ep, val = _inner_min(p_star, cfg.slack_fn(p_star), cfg.r)
    return ExponentResult(max(val, 0.0), p_star, ep)


def exponent(cfg: AsymptoticConfig) -> float:
    """Large-deviation exponent (bits per raw-key bit, scaled by ``r``)."""
    return exponent_details(cfg).value


def large_deviation_bound(params: ProtocolParams, cfg: AsymptoticConfig, E: float) -> float:
    """Explicit finite-length bound driven by the exponent ``E``.

    ``k_high (n+l+1) n (R - h(p_low + eps(p_low))) 2^{-(n+l)E}``
    ``+ h_bar(k_high (n+l+1) 2^{-(n+l)E})``.
    """
    if E < 0:
        raise DomainError(f"E must be >= 0, got {E}")
    key_rate = params.rate_R - binary_entropy(cfg.p_low + cfg.slack_fn(cfg.p_low))
    if key_rate <= 0:
        raise DomainError("key length at p_low must be positive")
    coeff = params.k_high * (params.n + params.l + 1) * 2.0 ** (-(params.n + params.l) * E)
    return coeff * params.n * key_rate + clipped_entropy(coeff)


def exponent_convergence_check(params_family: Sequence[ProtocolParams],
                               cfg: AsymptoticConfig) -> list[float]:
    """``(-r/n) log2`` of the total-information bound for each member of a family."""
    out = []
    for params in params_family:
        r = params.n / (params.n + params.l)
        total = theorem1_bound(params).total_bound
        out.append(-r / params.n * math.log2(total) if total > 0 else math.inf)
    return out


def epsilon_for_exponent(E: float, r: float, p: float) -> float:
    """Slack ``eps(p)`` whose small-slack exponent approximation equals ``E``."""
    if E < 0:
        raise DomainError(f"E must be >= 0, got {E}")
    if not 0.0 < r < 1.0:
        raise DomainError(f"r must lie in (0, 1), got {r}")
    if not 0.0 < p < 0.5:
        raise DomainError(f"p must lie in (0, 1/2), got {p}")
    a = LN2 * E
    denom = 2.0 * (r * (1.0 - r) + a * r * r)
    root = math.sqrt(a * a * r * r + 4.0 * p * (1.0 - p) * r * (1.0 - r) * a)
    return (a * r * (1.0 - 2.0 * p) + root) / denom


def approximate_exponent(eps: float, r: float, p: float) -> float:
    """Quadratic approximation ``r(1-r) eps^2 / (ln2 q (1-q))`` with ``q = p + r eps``.

    :func:`epsilon_for_exponent` inverts this exactly. The second-order
    Taylor term of the exact objective is half as large, so this
    overestimates :func:`exponent` by about a factor of two.
    """
    q = p + r * eps
    return r * (1.0 - r) * eps * eps / (LN2 * q * (1.0 - q))


def watanabe_bound(n: int, eps_p: float, err_prob: float) -> float:
    """Comparison bound built from decoding error ``err_prob`` and slack ``eps_p``."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if eps_p <= 0:
        raise DomainError(f"eps_p must be positive, got {eps_p}")
    if not 0.0 <= err_prob <= 1.0:
        raise DomainError(f"err_prob must be a probability, got {err_prob}")
    decay = math.exp(-eps_p * eps_p * n / 4.0)
    half = (n / 2.0 + 1.0) ** 2
    full = (n + 1.0) ** 2
    inner = 2.0 * half * err_prob + 4.0 * full * decay
    return clipped_entropy(inner) + 4.0 * n * half * err_prob + 8.0 * n * full * decay
