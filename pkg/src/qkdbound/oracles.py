"""Brute-force checks of the three lemmas the finite-length bounds rest on.

Everything here is exhaustive over tiny state spaces: ``4^n`` Pauli pairs
for Lemma 1, explicit distributions for Lemma 7 and the full (or sampled)
ensemble of code extensions for Lemma 2.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, GuardError
from .gf2 import (
    EXHAUSTIVE_LIMIT,
    AdditiveChannel,
    BinaryCode,
    BitMatrix,
    exact_error_probability,
    extend_code,
    g_factor,
    parse_bits,
)
from .numerics import binary_entropy, eta

PAULI_LIMIT = 12
LEMMA2_LIMIT = 12
ENSEMBLE_LIMIT = 10_000
SIGMA = 4.0


def _entropy_bits(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


@dataclass(frozen=True)
class PauliDistribution:
    """Joint law ``P(x, z)`` of bit-flip and phase-flip patterns on ``n`` qubits.

    ``joint[x, z]`` is indexed by the packed ints of the two bit strings.
    """

    n_qubits: int
    joint: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not 1 <= self.n_qubits <= PAULI_LIMIT:
            raise GuardError(f"n_qubits must lie in [1, {PAULI_LIMIT}], got {self.n_qubits}")
        j = np.asarray(self.joint, dtype=float)
        size = 1 << self.n_qubits
        if j.shape != (size, size):
            raise DomainError(f"joint must be a {size}x{size} table")
        if np.any(j < 0) or abs(math.fsum(j.ravel()) - 1.0) > 1e-12:
            raise DomainError("joint is not a probability table")
        object.__setattr__(self, "joint", j)

    @classmethod
    def from_mapping(cls, n: int, table: Mapping[tuple[str | int, str | int], float]) -> "PauliDistribution":
        j = np.zeros((1 << n, 1 << n))
        for (x, z), v in table.items():
            j[parse_bits(x, n), parse_bits(z, n)] += v
        return cls(n, j)

    @classmethod
    def point_mass(cls, n: int, x: int = 0, z: int = 0) -> "PauliDistribution":
        j = np.zeros((1 << n, 1 << n))
        j[x, z] = 1.0
        return cls(n, j)

    @classmethod
    def uniform(cls, n: int) -> "PauliDistribution":
        size = 1 << n
        return cls(n, np.full((size, size), 1.0 / (size * size)))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "PauliDistribution":
        """Dirichlet draw with a random concentration, so sparse and flat tables both occur."""
        size = 1 << n
        alpha = 10.0 ** rng.uniform(-2.0, 1.0)
        j = rng.dirichlet(np.full(size * size, alpha)).reshape(size, size)
        return cls(n, j / j.sum())

    @classmethod
    def product(cls, one: "PauliDistribution", copies: int) -> "PauliDistribution":
        """``copies`` independent uses of a one-qubit law."""
        if one.n_qubits != 1:
            raise DomainError("product expects a one-qubit distribution")
        # qubit order follows the bit order: the first copy is the leading bit
        j = np.ones((1, 1))
        for _ in range(copies):
            j = np.einsum("ab,cd->acbd", j, one.joint).reshape(j.shape[0] * 2, j.shape[1] * 2)
        return cls(copies, j)


@dataclass(frozen=True)
class Marginals:
    p_x: np.ndarray
    p_z: np.ndarray
    p_z_weight: np.ndarray


def marginals(p: PauliDistribution) -> Marginals:
    """``P_X``, ``P_Z`` and the weight distribution of ``z``."""
    p_x = p.joint.sum(axis=1)
    p_z = p.joint.sum(axis=0)
    weights = np.bitwise_count(np.arange(p_z.size, dtype=np.int64))
    p_w = np.bincount(weights, weights=p_z, minlength=p.n_qubits + 1)
    return Marginals(p_x, p_z, p_w)


def lemma1_eve_information(p: PauliDistribution) -> float:
    """``sum_x P_X(x) H(P_{Z|X}(.|x))``, Eve's information for uniform inputs."""
    total = 0.0
    for x, row in enumerate(p.joint):
        px = math.fsum(row)
        if px > 0:
            total += px * _entropy_bits(row / px)
    return total


def lemma1_bound(p: PauliDistribution) -> float:
    """``eta_n(1 - P_Z(0))``."""
    return eta(p.n_qubits, max(0.0, 1.0 - float(p.joint[:, 0].sum())))


def lemma7_check(dist) -> tuple[float, float]:
    """Both sides of ``H(P) <= h(1 - P(0)) + log2(d - 1) (1 - P(0))``."""
    p = np.asarray(dist, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise DomainError("need a distribution on at least two points")
    if np.any(p < 0) or abs(math.fsum(p) - 1.0) > 1e-12:
        raise DomainError("not a probability vector")
    rest = min(1.0, max(0.0, 1.0 - float(p[0])))
    return _entropy_bits(p), binary_entropy(rest) + math.log2(p.size - 1) * rest


# ----------------------------------------------------------------------------
# Lemma 2


def gaussian_binomial(n: int, k: int) -> int:
    """Number of ``k``-dimensional subspaces of ``F_2^n``."""
    if not 0 <= k <= n:
        return 0
    num = den = 1
    for i in range(k):
        num *= (1 << (n - i)) - 1
        den *= (1 << (i + 1)) - 1
    return num // den


def _subspaces(dim: int, k: int) -> Iterator[list[int]]:
    """Every ``k``-dimensional subspace of ``F_2^dim`` once, as reduced echelon rows."""
    for pivots in itertools.combinations(range(dim), k):
        # pivot columns counted from the left; free slots of row i lie to the
        # right of its pivot and outside every pivot column
        slots = [[c for c in range(p + 1, dim) if c not in pivots] for p in pivots]
        n_free = sum(len(s) for s in slots)
        for assignment in range(1 << n_free):
            rows, bit = [], 0
            for p, s in zip(pivots, slots):
                v = 1 << (dim - 1 - p)
                for c in s:
                    if (assignment >> bit) & 1:
                        v |= 1 << (dim - 1 - c)
                    bit += 1
                rows.append(v)
            yield rows


def enumerate_extensions(c1: BinaryCode, extra_dim: int) -> Iterator[BinaryCode]:
    """All codes ``C2 ⊇ C1`` with ``dim C2 = dim C1 + extra_dim``.

    They correspond one-to-one with ``extra_dim``-dimensional subspaces of the
    complement spanned by the non-pivot coordinates of ``C1``.
    """
    n = c1.length_n
    pivot_bits = {pb for pb, _ in c1.basis}
    free = [b for b in range(n - 1, -1, -1) if b not in pivot_bits]
    base = list(c1.generator.bits)
    for rows in _subspaces(len(free), extra_dim):
        lifted = []
        for v in rows:
            u = 0
            for i, b in enumerate(free):
                if (v >> (len(free) - 1 - i)) & 1:
                    u |= 1 << b
            lifted.append(u)
        gen = base + lifted
        yield BinaryCode(n, BitMatrix(len(gen), n, tuple(gen)))


def lemma2_bound(w: AdditiveChannel, t: int, extra_dim: int) -> float:
    """``sum_k P~_W(k) g(2^{extra_dim + t - n}|n, k)``.

    With ``s = n - t - extra_dim`` this is the ``g(2^{-s}|n, k)`` form used
    for the known-channel bound.
    """
    n = w.length_n
    x = 2.0 ** (extra_dim + t - n)
    pw = w.weight_distribution()
    return math.fsum(float(pk) * g_factor(x, n, k) for k, pk in enumerate(pw) if pk > 0)


@dataclass(frozen=True)
class Lemma2Result:
    average: float
    bound: float
    exact: bool
    passed: bool
    samples: int
    stderr: float
    ensemble_size: int


def lemma2_oracle(c1: BinaryCode, sub_add_dim: int, w: AdditiveChannel, trials: int = 1000,
                  seed=None, exhaustive: bool | None = None) -> Lemma2Result:
    """Average decoding error over random extensions ``C2 ⊇ C1`` against the Lemma 2 bound.

    ``exhaustive=None`` enumerates the whole ensemble when it has at most
    ``ENSEMBLE_LIMIT`` members and samples ``trials`` extensions otherwise;
    sampled averages get ``4 sigma`` of slack.
    """
    n, t = c1.length_n, c1.dimension
    if n > LEMMA2_LIMIT:
        raise GuardError(f"n={n} exceeds the Lemma 2 limit {LEMMA2_LIMIT}")
    if w.length_n != n:
        raise DomainError("channel length differs from the code length")
    if not 0 <= sub_add_dim <= n - t:
        raise DomainError(f"need 0 <= sub_add_dim <= n - t = {n - t}, got {sub_add_dim}")
    size = gaussian_binomial(n - t, sub_add_dim)
    if exhaustive is None:
        exhaustive = size <= ENSEMBLE_LIMIT
    if exhaustive and size > ENSEMBLE_LIMIT:
        raise GuardError(f"ensemble has {size} members, above {ENSEMBLE_LIMIT}")
    bound = lemma2_bound(w, t, sub_add_dim)

    if exhaustive:
        errs = [exact_error_probability(w, c1, c2) for c2 in enumerate_extensions(c1, sub_add_dim)]
        if len(errs) != size:
            raise AssertionError(f"enumerated {len(errs)} extensions, expected {size}")
        avg = math.fsum(errs) / size
        return Lemma2Result(avg, bound, True, avg <= bound + 1e-12, size, 0.0, size)

    if trials < 2:
        raise DomainError("sampling needs at least two trials")
    rng = np.random.default_rng(seed)
    errs = np.array([exact_error_probability(w, c1, extend_code(c1, sub_add_dim, rng))
                     for _ in range(trials)])
    avg = float(errs.mean())
    se = float(errs.std(ddof=1) / math.sqrt(trials))
    return Lemma2Result(avg, bound, False, avg <= bound + SIGMA * se + 1e-12, trials, se, size)


# ----------------------------------------------------------------------------
# randomized audits (shared by the CLI and the tests)


@dataclass(frozen=True)
class AuditReport:
    lemma: int
    instances: int
    failures: int
    min_slack: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def as_dict(self) -> dict:
        return {"lemma": self.lemma, "instances": self.instances, "failures": self.failures,
                "min_slack": self.min_slack, "passed": self.passed, **self.details}


def audit_lemma1(n_max: int, trials: int, seed=None) -> AuditReport:
    """Check ``I <= H(P_Z)`` and ``I <= eta_n(1 - P_Z(0))`` on random tables, ``n`` cycling ``1..n_max``."""
    if not 1 <= n_max <= PAULI_LIMIT:
        raise GuardError(f"n_max must lie in [1, {PAULI_LIMIT}], got {n_max}")
    rng = np.random.default_rng(seed)
    failures, min_slack = 0, math.inf
    for i in range(trials):
        n = 1 + i % n_max
        p = PauliDistribution.random(n, rng)
        info = lemma1_eve_information(p)
        slack = min(_entropy_bits(marginals(p).p_z), lemma1_bound(p)) - info
        min_slack = min(min_slack, slack)
        failures += slack < -1e-12
    return AuditReport(1, trials, failures, min_slack)


def audit_lemma7(d_max: int, trials: int, seed=None, uniform: bool = False) -> AuditReport:
    """Random distributions on ``d`` points (``d`` cycling ``2..d_max``), or the uniform one."""
    if d_max < 2:
        raise DomainError(f"d_max must be >= 2, got {d_max}")
    rng = np.random.default_rng(seed)
    if uniform:
        h, b = lemma7_check(np.full(d_max, 1.0 / d_max))
        slack = b - h
        return AuditReport(7, 1, int(slack < -1e-12), slack,
                           {"equality": abs(slack) < 1e-12, "entropy": h, "bound": b})
    failures, min_slack = 0, math.inf
    for i in range(trials):
        d = 2 + i % (d_max - 1)
        p = rng.dirichlet(np.full(d, 10.0 ** rng.uniform(-2.0, 1.0)))
        h, b = lemma7_check(p / p.sum())
        min_slack = min(min_slack, b - h)
        failures += b - h < -1e-12
    return AuditReport(7, trials, failures, min_slack)


def parse_channel(spec: str, n: int, rng: np.random.Generator | None = None) -> AdditiveChannel:
    """``bsc:<p>``, ``random`` or ``point:<bits>``."""
    kind, _, arg = spec.partition(":")
    if kind == "bsc":
        return AdditiveChannel.bsc(n, float(arg))
    if kind == "random":
        return AdditiveChannel.random(n, rng if rng is not None else np.random.default_rng())
    if kind == "point":
        return AdditiveChannel.point_mass(n, parse_bits(arg or "0" * n, n))
    raise DomainError(f"unknown channel spec {spec!r}")


def audit_lemma2(n: int, t: int, s: int, channel: str, trials: int, seed=None,
                 exhaustive: bool | None = None, channels: int = 1) -> AuditReport:
    """Run :func:`lemma2_oracle` on ``channels`` channels with a random ``[n, t]`` code ``C1``."""
    if n > EXHAUSTIVE_LIMIT:
        raise GuardError(f"n={n} exceeds {EXHAUSTIVE_LIMIT}")
    rng = np.random.default_rng(seed)
    failures, min_slack, rows = 0, math.inf, []
    for _ in range(channels):
        c1 = extend_code(BinaryCode.zero(n), t, rng)
        w = parse_channel(channel, n, rng)
        res = lemma2_oracle(c1, s, w, trials, rng, exhaustive)
        slack = res.bound - res.average
        min_slack = min(min_slack, slack)
        failures += not res.passed
        rows.append({"average": res.average, "bound": res.bound, "exact": res.exact,
                     "ensemble_size": res.ensemble_size, "passed": res.passed})
    return AuditReport(2, channels, failures, min_slack, {"results": rows})
