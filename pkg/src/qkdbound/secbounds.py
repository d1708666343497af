"""Finite-length upper bounds on the eavesdropper's information.

The central object is the pair of ``j``-indexed sums

    S_j = sum_{k <= k_low}  P_hg(k|n,l,j) f(j - k_low, k_low)
        + sum_{k_low < k <= k_high} P_hg(k|n,l,j) f(j - k, k)

and ``W_j``, the same sum with every summand multiplied by the key length
``n (R - h(k/l + delta_k))`` (``k_low`` substituted on the first branch).
``j`` is the total number of phase errors among the ``n + l`` sifted bits.
The total-information bound is ``h_bar(max_j S_j) + max_j W_j`` and the
per-bit bound is ``h_bar(max_j S_j) / (n (R - h(k_high/l + delta))) + max_j S_j``.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError
from .gf2 import g_factor
from .numerics import (
    NEG_INF,
    binary_entropy,
    binary_entropy_array,
    clipped_entropy,
    eta,
    hypergeom_log2_pmf,
)

DeltaSpec = float | Mapping[int, float] | Callable[[int], float]

# j-rows evaluated per vectorised block; bounds memory at ~ROW_BLOCK * (k_high + 1) doubles.
ROW_BLOCK = 2048
UNDERFLOW_LOG2 = -1080.0


def as_delta(spec: DeltaSpec) -> Callable[[int], float]:
    """Normalise a constant, a ``{k: delta_k}`` table or a callable into a callable."""
    if callable(spec):
        return spec
    if isinstance(spec, Mapping):
        table = {int(k): float(v) for k, v in spec.items()}

        def lookup(k: int) -> float:
            try:
                return table[k]
            except KeyError:
                raise ConfigurationError(f"delta table has no entry for k={k}") from None

        return lookup
    value = float(spec)
    return lambda k: value


@dataclass(frozen=True)
class ProtocolParams:
    """Sizes and thresholds of one phase-error estimation.

    ``n`` is the raw-key length, ``l`` the number of check bits, ``rate_R``
    the rate of the error-correcting code, ``k_low``/``k_high`` the count
    thresholds and ``delta`` the statistical slack indexed by the observed
    count.
    """

    n: int
    l: int
    rate_R: float
    k_low: int
    k_high: int
    delta: Callable[[int], float] = field(default=lambda k: 0.0, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "delta", as_delta(self.delta))
        if self.n < 1 or self.l < 1:
            raise ConfigurationError(f"n and l must be positive (n={self.n}, l={self.l})")
        if not 0.0 < self.rate_R <= 1.0:
            raise ConfigurationError(f"rate_R must lie in (0, 1], got {self.rate_R}")
        if not 0 <= self.k_low <= self.k_high <= self.l:
            raise ConfigurationError(
                f"need 0 <= k_low <= k_high <= l, got {self.k_low}, {self.k_high}, {self.l}")
        if not self.k_high < self.n / 2:
            raise ConfigurationError(f"k_high={self.k_high} must be below n/2={self.n / 2}")
        for k in range(self.k_low, self.k_high + 1):
            d = self.delta(k)
            if not (d >= 0.0 and math.isfinite(d)):
                raise ConfigurationError(f"delta_{k}={d} must be finite and >= 0")
            if k / self.l + d > 1.0:
                raise ConfigurationError(f"k/l + delta_k = {k / self.l + d} exceeds 1 at k={k}")

    def sacrificed_rate(self, k: int) -> float:
        """``h(k/l + delta_k)``; counts below ``k_low`` are replaced by ``k_low``."""
        k = max(k, self.k_low)
        return binary_entropy(k / self.l + self.delta(k))

    def key_length(self, k: int) -> float:
        """``n (R - h(k/l + delta_k))``, the (real-valued) final key length."""
        return self.n * (self.rate_R - self.sacrificed_rate(k))

    def min_key_length(self) -> float:
        return min(self.key_length(k) for k in range(self.k_low, self.k_high + 1))


@dataclass(frozen=True)
class BoundReport:
    """Evaluated bounds with the maximising ``j`` of each term.

    ``term1 = h_bar(max_j S_j)`` and ``term2 = max_j W_j``; ``total_bound``
    is their sum. ``per_bit_bound`` is ``None`` when the key length at
    ``k_high`` is zero, where the per-bit bound is undefined.
    """

    total_bound: float
    per_bit_bound: float | None
    argmax_j_term1: int
    argmax_j_term2: int
    term1: float
    term2: float
    max_mass: float

    def as_dict(self) -> dict:
        return {
            "total_bound": self.total_bound,
            "per_bit_bound": self.per_bit_bound,
            "argmax_j_term1": self.argmax_j_term1,
            "argmax_j_term2": self.argmax_j_term2,
            "term1": self.term1,
            "term2": self.term2,
            "max_mass": self.max_mass,
        }


@dataclass(frozen=True)
class PhaseWeightDistribution:
    """Distribution of the phase-error Hamming weight on ``n`` qubits."""

    weights: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        object.__setattr__(self, "weights", w)
        if not w:
            raise DomainError("empty weight distribution")
        if any(x < 0 for x in w):
            raise DomainError("negative weight")
        if abs(sum(w) - 1.0) > 1e-9:
            raise DomainError(f"weights sum to {sum(w)}, not 1")

    @property
    def n(self) -> int:
        return len(self.weights) - 1

    @classmethod
    def point_mass(cls, n: int, k: int) -> "PhaseWeightDistribution":
        w = [0.0] * (n + 1)
        w[k] = 1.0
        return cls(tuple(w))


def _log2_f(k_prime, k, n: int, l: int, delta) -> np.ndarray:
    """log2 of ``f(k', k|n, l, delta)``, vectorised; ``k' < 0`` is weight zero."""
    k_prime = np.asarray(k_prime)
    target = binary_entropy_array(np.asarray(k, dtype=float) / l + np.asarray(delta, dtype=float))
    kp = np.clip(k_prime, 0, n).astype(float)
    expo = n * (binary_entropy_array(kp / n) - target)
    out = np.minimum(expo, 0.0)
    out = np.where(k_prime >= n / 2, 0.0, out)
    return np.where(k_prime < 0, NEG_INF, out)


def f_factor(k_prime: int, k: int, n: int, l: int, delta: float) -> float:
    """``min{2^{n(h(k'/n) - h(k/l + delta))}, 1}``, and exactly 1 for ``k' >= n/2``.

    Negative ``k'`` (more check errors than total errors) gives 0.
    """
    if not 0 <= k <= l:
        raise DomainError(f"need 0 <= k <= l, got k={k}, l={l}")
    if delta < 0:
        raise DomainError(f"delta must be >= 0, got {delta}")
    if k / l + delta > 1.0:
        raise DomainError(f"k/l + delta = {k / l + delta} exceeds 1")
    if k_prime >= n / 2:
        return 1.0
    if k_prime < 0:
        return 0.0
    expo = n * (binary_entropy(k_prime / n) - binary_entropy(k / l + delta))
    return 2.0 ** min(expo, 0.0)


def mass_profile(params: ProtocolParams) -> tuple[np.ndarray, np.ndarray]:
    """Return the arrays ``(S_j, W_j)`` for ``j = 0..n+l``.

    Rows are computed independently in fixed-size blocks; within a row the
    summation order over ``k`` is fixed, so the result does not depend on
    how the ``j`` range is partitioned.
    """
    n, l, kl, kh = params.n, params.l, params.k_low, params.k_high
    ks = np.arange(kh + 1)
    eff_k = np.maximum(ks, kl)
    deltas = np.array([params.delta(int(k)) for k in eff_k])
    weights = n * (params.rate_R - binary_entropy_array(eff_k / l + deltas))
    N = n + l
    S = np.zeros(N + 1)
    W = np.zeros(N + 1)
    # P_hg(.|j) is unimodal, so its largest term on k <= k_high sits at
    # min(mode, k_high); rows whose largest term is below 2^-1080 underflow
    # to exactly zero and are skipped.
    all_j = np.arange(N + 1)
    mode = np.clip(((all_j + 1) * (l + 1)) // (N + 2),
                   np.maximum(0, all_j - n), np.minimum(l, all_j))
    peak = hypergeom_log2_pmf(np.minimum(mode, kh), n, l, all_j)
    alive = all_j[peak > UNDERFLOW_LOG2]
    for start in range(0, alive.size, ROW_BLOCK):
        js = alive[start:start + ROW_BLOCK]
        lp = hypergeom_log2_pmf(ks[None, :], n, l, js[:, None])
        lf = _log2_f(js[:, None] - eff_k[None, :], eff_k[None, :], n, l, deltas[None, :])
        with np.errstate(invalid="ignore"):
            terms = np.exp2(lp + lf)
        terms = np.nan_to_num(terms, nan=0.0)
        S[js] = terms.sum(axis=1)
        # row-wise reductions (not BLAS) so a row's value never depends on the block shape
        W[js] = (terms * weights).sum(axis=1)
    return S, W


def _check_key_lengths(params: ProtocolParams, strict: bool) -> None:
    for k in range(params.k_low, params.k_high + 1):
        length = params.key_length(k)
        if length < 0 or (strict and length <= 0):
            raise ConfigurationError(
                f"key length n(R - h(k/l + delta_k)) = {length:.6g} at k={k} is "
                f"{'not positive' if strict else 'negative'}; the protocol would abort")


def _report(params: ProtocolParams) -> BoundReport:
    S, W = mass_profile(params)
    j1 = int(np.argmax(S))
    j2 = int(np.argmax(W))
    max_mass = float(S[j1])
    term1 = clipped_entropy(max_mass)
    term2 = float(W[j2])
    key_hi = params.key_length(params.k_high)
    per_bit = term1 / key_hi + max_mass if key_hi > 0 else None
    return BoundReport(
        total_bound=term1 + term2,
        per_bit_bound=per_bit,
        argmax_j_term1=j1,
        argmax_j_term2=j2,
        term1=term1,
        term2=term2,
        max_mass=max_mass,
    )


def theorem1_bound(params: ProtocolParams) -> BoundReport:
    """Upper bound on the average total information leaked about the final key.

    Raises :class:`ConfigurationError` if any count in ``[k_low, k_high]``
    implies a negative key length.
    """
    _check_key_lengths(params, strict=False)
    return _report(params)


def theorem5_bound(params: ProtocolParams) -> BoundReport:
    """Same evaluation, requiring a strictly positive key length at ``k_high``.

    The per-bit value is in ``per_bit_bound``.
    """
    _check_key_lengths(params, strict=False)
    if params.key_length(params.k_high) <= 0:
        raise ConfigurationError("key length at k_high is not positive; per-bit bound undefined")
    return _report(params)


def theorem2_argument(s: int, phase_weights: PhaseWeightDistribution) -> float:
    """``sum_k P(k) g(2^{-s}|n,k)``, the phase-error term fed to ``eta``."""
    n = phase_weights.n
    x = 2.0 ** -s
    return sum(w * g_factor(x, n, k) for k, w in enumerate(phase_weights.weights) if w > 0)


def theorem2_bound(m: int, s: int, phase_weights: PhaseWeightDistribution) -> float:
    """Eve's information for a known channel: ``eta_{m-s}(theorem2_argument)``.

    ``m`` is the dimension of the error-correcting code and ``s`` that of the
    random subcode removed by privacy amplification.
    """
    n = phase_weights.n
    if not 0 <= s <= m <= n:
        raise DomainError(f"need 0 <= s <= m <= n, got s={s}, m={m}, n={n}")
    return eta(m - s, theorem2_argument(s, phase_weights))


def probabilistic_guarantee(avg_bound: float, eps2: float) -> float:
    """Markov bound on ``P(I >= eps2)`` given the average information ``avg_bound``."""
    if eps2 <= 0:
        raise DomainError(f"eps2 must be positive, got {eps2}")
    if avg_bound < 0:
        raise DomainError(f"avg_bound must be >= 0, got {avg_bound}")
    return min(avg_bound / eps2, 1.0)
