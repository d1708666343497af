"""GF(2) linear algebra on bit-packed vectors.

A length-``n`` bit string is stored as a Python ``int`` whose most significant
bit (bit ``n - 1``) is the first character of the string. Integer order is
therefore the lexicographic order of the strings.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DomainError, GuardError
from .numerics import clipped_entropy

EXHAUSTIVE_LIMIT = 24


def parse_bits(value: str | int, n: int | None = None) -> int:
    """Accept ``'0110'`` or an int; validate the width when ``n`` is given."""
    if isinstance(value, str):
        s = value.strip()
        if s and set(s) - {"0", "1"}:
            raise DomainError(f"not a bit string: {value!r}")
        if n is not None and len(s) != n:
            raise DomainError(f"expected {n} bits, got {len(s)}")
        return int(s, 2) if s else 0
    v = int(value)
    if v < 0 or (n is not None and v >> n):
        raise DomainError(f"{v} does not fit in {n} bits")
    return v


def format_bits(v: int, n: int) -> str:
    return format(v, f"0{n}b") if n else ""


def bits_to_int(bits: Sequence[int] | np.ndarray) -> int:
    """Pack a 0/1 sequence (first element most significant) into an int."""
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.size == 0:
        return 0
    pad = (-arr.size) % 8
    packed = np.packbits(np.concatenate([np.zeros(pad, np.uint8), arr]))
    return int.from_bytes(packed.tobytes(), "big")


def int_to_bits(v: int, n: int) -> np.ndarray:
    if n == 0:
        return np.zeros(0, dtype=np.uint8)
    raw = np.frombuffer(v.to_bytes((n + 7) // 8, "big"), dtype=np.uint8)
    return np.unpackbits(raw)[-n:]


def weight(v: int) -> int:
    return v.bit_count()


def random_vector(rng: np.random.Generator, n: int) -> int:
    """Uniform element of ``F_2^n``."""
    nbytes = (n + 7) // 8
    return int.from_bytes(rng.bytes(nbytes), "big") >> (8 * nbytes - n)


def _echelon(rows: Iterable[int]) -> list[tuple[int, int]]:
    """Reduced row echelon basis as ``(pivot_bit, row)`` pairs, leftmost pivot first."""
    basis: list[tuple[int, int]] = []
    for v in rows:
        for pb, r in basis:
            if (v >> pb) & 1:
                v ^= r
        if not v:
            continue
        pb = v.bit_length() - 1
        basis = [(qb, r ^ v) if (r >> pb) & 1 else (qb, r) for qb, r in basis]
        basis.append((pb, v))
    basis.sort(key=lambda t: -t[0])
    return basis


@dataclass(frozen=True)
class BitMatrix:
    """Dense GF(2) matrix; each row is a packed int of width ``cols``."""

    rows: int
    cols: int
    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        object.__setattr__(self, "bits", bits)
        if len(bits) != self.rows:
            raise DomainError(f"expected {self.rows} rows, got {len(bits)}")
        if any(b < 0 or b >> self.cols for b in bits):
            raise DomainError("row wider than the column count")

    @classmethod
    def from_rows(cls, rows: Sequence[str | Sequence[int]], cols: int | None = None) -> "BitMatrix":
        packed = []
        for row in rows:
            if isinstance(row, str):
                width = len(row)
                packed.append(parse_bits(row))
            else:
                width = len(row)
                packed.append(bits_to_int(row))
            if cols is None:
                cols = width
            elif width != cols:
                raise DomainError("ragged rows")
        return cls(len(packed), cols or 0, tuple(packed))

    @classmethod
    def from_array(cls, a) -> "BitMatrix":
        a = np.asarray(a, dtype=np.uint8) & 1
        return cls(a.shape[0], a.shape[1], tuple(bits_to_int(r) for r in a))

    @classmethod
    def identity(cls, n: int) -> "BitMatrix":
        return cls(n, n, tuple(1 << (n - 1 - i) for i in range(n)))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BitMatrix":
        return cls(rows, cols, (0,) * rows)

    def get(self, i: int, j: int) -> int:
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError((i, j))
        return (self.bits[i] >> (self.cols - 1 - j)) & 1

    def to_array(self) -> np.ndarray:
        return np.array([int_to_bits(b, self.cols) for b in self.bits],
                        dtype=np.uint8).reshape(self.rows, self.cols)

    def to_text(self) -> str:
        return "".join(format_bits(b, self.cols) + "\n" for b in self.bits)


def rank(m: BitMatrix) -> int:
    """GF(2) rank by row reduction."""
    return len(_echelon(m.bits))


@dataclass(frozen=True)
class BinaryCode:
    """Linear code in ``F_2^n`` given by a full-row-rank generator matrix.

    ``block`` optionally records that the code is ``repeats`` copies of a
    small code on consecutive coordinates, which enables table decoding.
    """

    length_n: int
    generator: BitMatrix
    block: "BinaryCode | None" = field(default=None, compare=False, repr=False)
    repeats: int = field(default=1, compare=False, repr=False)

    def __post_init__(self):
        if self.length_n < 1:
            raise DomainError("code length must be positive")
        if self.generator.cols != self.length_n:
            raise DomainError("generator width differs from the code length")
        basis = _echelon(self.generator.bits)
        if len(basis) != self.generator.rows:
            raise DomainError("generator matrix does not have full row rank")
        object.__setattr__(self, "_basis", tuple(basis))
        pivots = {pb for pb, _ in basis}
        object.__setattr__(self, "_free", tuple(b for b in range(self.length_n - 1, -1, -1)
                                                if b not in pivots))

    @classmethod
    def from_rows(cls, rows: Sequence[str], length_n: int | None = None) -> "BinaryCode":
        if not rows:
            if length_n is None:
                raise DomainError("an empty generator needs an explicit length")
            return cls.zero(length_n)
        g = BitMatrix.from_rows(rows)
        return cls(g.cols, g)

    @classmethod
    def zero(cls, n: int) -> "BinaryCode":
        return cls(n, BitMatrix.zeros(0, n))

    @classmethod
    def full(cls, n: int) -> "BinaryCode":
        return cls(n, BitMatrix.identity(n))

    @classmethod
    def from_vectors(cls, n: int, vectors: Iterable[int]) -> "BinaryCode":
        """Span of arbitrary vectors (dependent ones are dropped)."""
        basis = _echelon(vectors)
        return cls(n, BitMatrix(len(basis), n, tuple(r for _, r in basis)))

    @classmethod
    def hamming74(cls) -> "BinaryCode":
        return cls.from_rows(["1000110", "0100101", "0010011", "0001111"])

    @classmethod
    def direct_sum(cls, block: "BinaryCode", repeats: int) -> "BinaryCode":
        """``repeats`` copies of ``block`` on consecutive coordinates."""
        nb, kb = block.length_n, block.dimension
        n = nb * repeats
        rows = []
        for b in range(repeats):
            shift = (repeats - 1 - b) * nb
            rows.extend(r << shift for r in block.generator.bits)
        return cls(n, BitMatrix(kb * repeats, n, tuple(rows)), block=block, repeats=repeats)

    @classmethod
    def from_text(cls, text: str, length_n: int | None = None) -> "BinaryCode":
        rows = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        return cls.from_rows(rows, length_n)

    def to_text(self) -> str:
        return self.generator.to_text()

    @property
    def dimension(self) -> int:
        return self.generator.rows

    @property
    def basis(self) -> tuple[tuple[int, int], ...]:
        """Reduced echelon basis as ``(pivot_bit, row)`` pairs."""
        return self._basis

    def reduce(self, v: int) -> int:
        """Canonical representative of the coset ``v + C`` (pivot bits cleared)."""
        for pb, r in self._basis:
            if (v >> pb) & 1:
                v ^= r
        return v

    def reduce_all(self, v: np.ndarray) -> np.ndarray:
        v = np.array(v, dtype=np.int64, copy=True)
        for pb, r in self._basis:
            v ^= ((v >> pb) & 1) * r
        return v

    def contains(self, v: int) -> bool:
        return self.reduce(v) == 0

    def is_subcode_of(self, other: "BinaryCode") -> bool:
        return self.length_n == other.length_n and all(other.contains(r) for r in self.generator.bits)

    def encode(self, message: int) -> int:
        """Codeword for a ``dimension``-bit message, via the echelon basis."""
        k = self.dimension
        c = 0
        for i, (_, r) in enumerate(self._basis):
            if (message >> (k - 1 - i)) & 1:
                c ^= r
        return c

    def message_of(self, codeword: int) -> int:
        """Inverse of :meth:`encode` on codewords (reads the pivot coordinates)."""
        k = self.dimension
        msg = 0
        for i, (pb, _) in enumerate(self._basis):
            if (codeword >> pb) & 1:
                msg |= 1 << (k - 1 - i)
        return msg

    def quotient_label(self, v: int) -> int:
        """Coordinates of ``v`` off the pivot columns: the ``n - dim`` bit label of ``[v]``."""
        r = self.reduce(v)
        out = 0
        for b in self._free:
            out = (out << 1) | ((r >> b) & 1)
        return out

    def codewords(self) -> np.ndarray:
        """All ``2^dim`` codewords as an int64 array (guarded)."""
        if self.dimension > EXHAUSTIVE_LIMIT:
            raise GuardError(f"refusing to enumerate 2^{self.dimension} codewords")
        words = np.zeros(1, dtype=np.int64)
        for _, r in self._basis:
            words = np.concatenate([words, words ^ r])
        return words


@dataclass(frozen=True)
class AdditiveChannel:
    """Channel ``y = x + noise`` with ``noise`` drawn from ``noise_pmf`` over ``F_2^n``."""

    length_n: int
    noise_pmf: np.ndarray = field(repr=False)

    def __post_init__(self):
        pmf = np.asarray(self.noise_pmf, dtype=float)
        object.__setattr__(self, "noise_pmf", pmf)
        if self.length_n > EXHAUSTIVE_LIMIT:
            raise GuardError(f"noise table of 2^{self.length_n} entries is too large")
        if pmf.shape != (1 << self.length_n,):
            raise DomainError("noise_pmf must have 2^n entries")
        if np.any(pmf < 0) or abs(math.fsum(pmf) - 1.0) > 1e-12:
            raise DomainError("noise_pmf is not a probability vector")

    @classmethod
    def bsc(cls, n: int, p: float) -> "AdditiveChannel":
        w = np.bitwise_count(np.arange(1 << n, dtype=np.int64)).astype(float)
        return cls(n, p ** w * (1.0 - p) ** (n - w))

    @classmethod
    def point_mass(cls, n: int, noise: int = 0) -> "AdditiveChannel":
        pmf = np.zeros(1 << n)
        pmf[noise] = 1.0
        return cls(n, pmf)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "AdditiveChannel":
        pmf = rng.dirichlet(np.ones(1 << n))
        return cls(n, pmf / pmf.sum())

    def weight_distribution(self) -> np.ndarray:
        w = np.bitwise_count(np.arange(1 << self.length_n, dtype=np.int64))
        return np.bincount(w, weights=self.noise_pmf, minlength=self.length_n + 1)


def _check_pair(c1: BinaryCode, c2: BinaryCode) -> None:
    if c1.length_n != c2.length_n:
        raise ConfigurationError("codes have different lengths")
    if c2.length_n > EXHAUSTIVE_LIMIT:
        raise GuardError(f"n={c2.length_n} exceeds the exhaustive limit {EXHAUSTIVE_LIMIT}")
    if not c1.is_subcode_of(c2):
        raise ConfigurationError("C1 is not contained in C2")


def coset_leader(y: int, code: BinaryCode) -> int:
    """Lightest element of ``y + C``; ties go to the lexicographically smallest."""
    if code.length_n > EXHAUSTIVE_LIMIT:
        raise GuardError(f"n={code.length_n} exceeds the exhaustive limit")
    cands = code.codewords() ^ y
    w = np.bitwise_count(cands)
    best = np.lexsort((cands, w))[0]
    return int(cands[best])


def coset_leader_table(code: BinaryCode) -> dict[int, int]:
    """Map every canonical coset representative of ``code`` to its leader."""
    n = code.length_n
    if n > EXHAUSTIVE_LIMIT:
        raise GuardError(f"n={n} exceeds the exhaustive limit")
    allv = np.arange(1 << n, dtype=np.int64)
    reps = code.reduce_all(allv)
    order = np.lexsort((allv, np.bitwise_count(allv), reps))
    sreps = reps[order]
    first = np.concatenate([[True], sreps[1:] != sreps[:-1]])
    return {int(r): int(v) for r, v in zip(sreps[first], allv[order][first])}


def min_distance_decode(y: str | int, c1: BinaryCode, c2: BinaryCode) -> int:
    """Decode ``y`` to a coset of ``C1`` inside ``C2`` by minimum Hamming distance.

    Returns the canonical representative (``c1.reduce``) of ``[y - Gamma([y]_2)]_1``
    where ``Gamma`` picks the lightest, then lexicographically smallest,
    element of ``y + C2``.
    """
    _check_pair(c1, c2)
    y = parse_bits(y, c2.length_n) if isinstance(y, str) else parse_bits(y, c2.length_n)
    return c1.reduce(y ^ coset_leader(y, c2))


def exact_error_probability(w: AdditiveChannel, c1: BinaryCode, c2: BinaryCode) -> float:
    """``1 - P_W(Gamma + C1)`` for the minimum-distance coset decoder."""
    _check_pair(c1, c2)
    if w.length_n != c2.length_n:
        raise ConfigurationError("channel length differs from the code length")
    n = c2.length_n
    noise = np.arange(1 << n, dtype=np.int64)
    reps = c2.reduce_all(noise)
    order = np.lexsort((noise, np.bitwise_count(noise), reps))
    sreps = reps[order]
    first = np.concatenate([[True], sreps[1:] != sreps[:-1]])
    leader_of = np.zeros(1 << n, dtype=np.int64)
    leader_of[sreps[first]] = noise[order][first]
    correct = c1.reduce_all(noise ^ leader_of[reps]) == 0
    return max(0.0, 1.0 - math.fsum(w.noise_pmf[correct]))


def sample_full_rank_matrix(rows: int, cols: int, rng: np.random.Generator) -> BitMatrix:
    """Uniform ``rows x cols`` matrix conditioned on rank ``rows`` (rejection sampling)."""
    if not 0 <= rows <= cols:
        raise DomainError(f"need rows <= cols, got {rows} x {cols}")
    while True:
        bits = tuple(random_vector(rng, cols) for _ in range(rows))
        if len(_echelon(bits)) == rows:
            return BitMatrix(rows, cols, bits)


def extend_code(base: BinaryCode, extra_dim: int, rng: np.random.Generator) -> BinaryCode:
    """Uniformly random supercode of ``base`` with ``extra_dim`` more dimensions.

    Vectors are drawn one at a time and rejected while they lie in the current span.
    """
    n = base.length_n
    if not 0 <= extra_dim <= n - base.dimension:
        raise DomainError(f"cannot add {extra_dim} dimensions to a [{n},{base.dimension}] code")
    rows = list(base.generator.bits)
    basis = list(base.basis)
    while len(rows) < base.dimension + extra_dim:
        v = random_vector(rng, n)
        r = v
        for pb, b in basis:
            if (r >> pb) & 1:
                r ^= b
        if not r:
            continue
        rows.append(v)
        pb = r.bit_length() - 1
        basis = [(qb, b ^ r) if (b >> pb) & 1 else (qb, b) for qb, b in basis]
        basis.append((pb, r))
    return BinaryCode(n, BitMatrix(len(rows), n, tuple(rows)))


def sample_subcode(parent_dim: int, sub_dim: int, rng: np.random.Generator) -> BinaryCode:
    """Uniformly random ``sub_dim``-dimensional subspace of ``F_2^parent_dim``."""
    if not 0 <= sub_dim <= parent_dim:
        raise DomainError(f"need 0 <= sub_dim <= parent_dim, got {sub_dim}, {parent_dim}")
    return extend_code(BinaryCode.zero(parent_dim), sub_dim, rng)


def g_factor(x: float, n: int, k: int) -> float:
    """``min{2^{n h_bar(k/n)} x, 1}`` for ``k <= floor(n/2)``, else 1."""
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"g_factor needs 0 <= x <= 1, got {x}")
    if not 0 <= k <= n:
        raise DomainError(f"g_factor needs 0 <= k <= n, got k={k}, n={n}")
    if k > n // 2:
        return 1.0
    if x == 0.0:
        return 0.0
    return 2.0 ** min(n * clipped_entropy(k / n) + math.log2(x), 0.0)


def read_code(path: str | Path, length_n: int | None = None) -> BinaryCode:
    return BinaryCode.from_text(Path(path).read_text(), length_n)


def write_code(code: BinaryCode, path: str | Path) -> None:
    Path(path).write_text(code.to_text())
