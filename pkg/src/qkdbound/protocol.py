"""Seeded classical simulation of the BB84 post-processing pipeline.

Only the ``+``-basis key is produced per run; the ``x``-basis key is the same
procedure with the two bases exchanged (see :func:`swap_roles`). Eve is not
simulated. Each run also draws the virtual phase-error pattern on the key
qubits so that :func:`attach_bound` can annotate it with the per-outcome
summand of the total-information bound.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, GuardError
from .gf2 import (
    EXHAUSTIVE_LIMIT,
    BinaryCode,
    bits_to_int,
    coset_leader,
    coset_leader_table,
    format_bits,
    sample_subcode,
)
from .numerics import binary_entropy, eta
from .secbounds import ProtocolParams, f_factor

SeedLike = int | np.random.SeedSequence | None


@dataclass(frozen=True)
class SimConfig:
    """Sizes, channel and code of one simulated execution.

    ``params`` describes the ``+`` key: ``params.n == n_plus``,
    ``params.l == l_times`` and its thresholds act on ``k_times``. The
    ``k_plus`` thresholds default to the same numbers.
    """

    params: ProtocolParams
    n_plus: int
    l_plus: int
    n_times: int
    l_times: int
    code_c1: BinaryCode
    channel_p_bit: float = 0.0
    channel_p_phase: float = 0.0
    repeat_a: int = 1
    seed: SeedLike = None
    k_low_plus: int | None = None
    k_high_plus: int | None = None

    def __post_init__(self):
        if min(self.n_plus, self.l_plus, self.n_times, self.l_times) < 1:
            raise ConfigurationError("all four sizes must be positive")
        if self.repeat_a < 1:
            raise ConfigurationError(f"repeat_a must be >= 1, got {self.repeat_a}")
        if self.code_c1.length_n != self.n_plus:
            raise ConfigurationError(
                f"code length {self.code_c1.length_n} differs from n_plus={self.n_plus}")
        if self.params.n != self.n_plus or self.params.l != self.l_times:
            raise ConfigurationError("params must have n = n_plus and l = l_times")
        for name in ("channel_p_bit", "channel_p_phase"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise DomainError(f"{name}={p} is not a probability")
        if self.k_low_plus is None:
            object.__setattr__(self, "k_low_plus", self.params.k_low)
        if self.k_high_plus is None:
            object.__setattr__(self, "k_high_plus", self.params.k_high)
        if self.code_c1.block is None and self.n_plus > EXHAUSTIVE_LIMIT:
            raise GuardError(
                f"n_plus={self.n_plus} needs a block-structured code for decoding "
                f"(exhaustive decoding stops at n={EXHAUSTIVE_LIMIT})")


@dataclass(frozen=True)
class RunTranscript:
    """Outcome of one run (one post-processing round).

    ``key_phase_errors`` is the simulator's ground truth: the number of
    phase flips on the ``n_plus`` key qubits, which no party observes.
    ``abort_reason`` is set whenever the keys are empty.
    """

    k_plus: int
    k_times: int
    aborted_plus: bool
    aborted_times: bool
    replaced_low: bool
    alice_key: str
    bob_key: str
    key_len: int
    agree: bool
    key_phase_errors: int = 0
    abort_reason: str | None = None

    @property
    def aborted(self) -> bool:
        return self.abort_reason is not None

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=False, separators=(",", ":"))


def swap_roles(cfg: SimConfig, params_times: ProtocolParams, code_times: BinaryCode) -> SimConfig:
    """Configuration for the ``x``-basis key: the two bases trade places."""
    return dataclasses.replace(
        cfg, params=params_times, n_plus=cfg.n_times, l_plus=cfg.l_times,
        n_times=cfg.n_plus, l_times=cfg.l_plus, code_c1=code_times,
        channel_p_bit=cfg.channel_p_phase, channel_p_phase=cfg.channel_p_bit,
        k_low_plus=params_times.k_low, k_high_plus=params_times.k_high,
    )


class _Decoder:
    """Minimum-distance decoder for ``C1``: per-block tables or exhaustive search."""

    def __init__(self, code: BinaryCode):
        self.code = code
        if code.block is not None:
            self.table = coset_leader_table(code.block)

    def __call__(self, y: int) -> int:
        code = self.code
        if code.block is None:
            return y ^ coset_leader(y, code)
        nb = code.block.length_n
        mask = (1 << nb) - 1
        out = 0
        for b in range(code.repeats):
            shift = b * nb
            yb = (y >> shift) & mask
            out |= (yb ^ self.table[code.block.reduce(yb)]) << shift
        return out


_DECODERS: dict[int, _Decoder] = {}


def _decoder(code: BinaryCode) -> _Decoder:
    dec = _DECODERS.get(id(code))
    if dec is None or dec.code is not code:
        dec = _DECODERS[id(code)] = _Decoder(code)
    return dec


def _flips(rng: np.random.Generator, size: int, p: float) -> np.ndarray:
    return (rng.random(size) < p).astype(np.uint8)


def subcode_dimension(params: ProtocolParams, k_eff: int) -> int:
    """``ceil(n h(k/l + delta_k))``; rounding up never shortens the sacrifice."""
    return math.ceil(params.n * binary_entropy(k_eff / params.l + params.delta(k_eff)))


def _simulate(cfg: SimConfig, rounds: int) -> list[RunTranscript]:
    rng = np.random.default_rng(cfg.seed)
    params, code = cfg.params, cfg.code_c1
    n, m = cfg.n_plus, code.dimension

    # sifted strings: a key block per round plus the check bits
    size_plus = rounds * n + cfg.l_plus
    size_times = rounds * cfg.n_times + cfg.l_times
    alice_plus = rng.integers(0, 2, size=size_plus, dtype=np.uint8)
    bit_noise = _flips(rng, size_plus, cfg.channel_p_bit)
    phase_noise_plus = _flips(rng, size_plus, cfg.channel_p_phase)
    times_noise = _flips(rng, size_times, cfg.channel_p_phase)

    checks_plus = rng.choice(size_plus, cfg.l_plus, replace=False)
    checks_times = rng.choice(size_times, cfg.l_times, replace=False)
    k_plus = int(bit_noise[checks_plus].sum())
    k_times = int(times_noise[checks_times].sum())

    keep = np.ones(size_plus, dtype=bool)
    keep[checks_plus] = False
    remaining = np.flatnonzero(keep)
    if rounds > 1:
        remaining = rng.permutation(remaining)

    aborted_plus = k_times > params.k_high
    aborted_times = k_plus > cfg.k_high_plus
    replaced_low = k_times < params.k_low
    k_eff = max(k_times, params.k_low)
    s = subcode_dimension(params, k_eff)

    decode = _decoder(code)
    out = []
    for r in range(rounds):
        pos = remaining[r * n:(r + 1) * n]
        phase_errors = int(phase_noise_plus[pos].sum())
        common = dict(k_plus=k_plus, k_times=k_times, aborted_plus=aborted_plus,
                      aborted_times=aborted_times, replaced_low=replaced_low,
                      key_phase_errors=phase_errors)
        if aborted_plus:
            reason = f"k_times={k_times} exceeds k_high={params.k_high}"
        elif s > m:
            reason = f"subcode dimension {s} exceeds code dimension {m} (negative key length)"
        else:
            reason = None
        if reason is not None:
            out.append(RunTranscript(alice_key="", bob_key="", key_len=0, agree=True,
                                     abort_reason=reason, **common))
            continue

        x_a = bits_to_int(alice_plus[pos])
        noise = bits_to_int(bit_noise[pos])
        x_b = x_a ^ noise
        z = bits_to_int(rng.integers(0, 2, size=m, dtype=np.uint8))
        sent = code.encode(z) ^ x_a
        received = sent ^ x_b
        if received != code.encode(z) ^ noise:
            raise AssertionError("decoder input differs from G(C1)Z + N")
        z_bob = code.message_of(decode(received))

        c2 = sample_subcode(m, s, rng)
        key_len = m - s
        alice_key = format_bits(c2.quotient_label(z), key_len)
        bob_key = format_bits(c2.quotient_label(z_bob), key_len)
        out.append(RunTranscript(alice_key=alice_key, bob_key=bob_key, key_len=key_len,
                                 agree=alice_key == bob_key, **common))
    return out


def simulate_run(cfg: SimConfig) -> RunTranscript:
    """One run of the base protocol (``repeat_a`` is ignored)."""
    return _simulate(cfg, 1)[0]


def simulate_modified(cfg: SimConfig) -> list[RunTranscript]:
    """Modified protocol: one estimation over ``a`` key blocks, then ``a`` rounds.

    With ``repeat_a == 1`` this reproduces :func:`simulate_run` exactly.
    """
    return _simulate(cfg, cfg.repeat_a)


@dataclass(frozen=True)
class BatchSummary:
    runs: int
    abort_rate: float
    agreement_rate: float
    mean_key_length: float
    k_plus_hist: dict[int, int] = field(repr=False)
    k_times_hist: dict[int, int] = field(repr=False)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def _run_seeds(seed: SeedLike, runs: int) -> list[np.random.SeedSequence]:
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return root.spawn(runs)


def run_batch(cfg: SimConfig, runs: int) -> list[RunTranscript]:
    """Independent runs on spawned child seeds of ``cfg.seed``."""
    if runs < 1:
        raise DomainError(f"runs must be >= 1, got {runs}")
    return [simulate_run(dataclasses.replace(cfg, seed=s)) for s in _run_seeds(cfg.seed, runs)]


def run_modified_batch(cfg: SimConfig, batches: int) -> list[list[RunTranscript]]:
    if batches < 1:
        raise DomainError(f"batches must be >= 1, got {batches}")
    return [simulate_modified(dataclasses.replace(cfg, seed=s))
            for s in _run_seeds(cfg.seed, batches)]


def summarize(transcripts: Sequence[RunTranscript]) -> BatchSummary:
    """Aggregate transcripts; the agreement rate is over runs that produced a key."""
    done = [t for t in transcripts if not t.aborted]
    kp: dict[int, int] = {}
    kt: dict[int, int] = {}
    for t in transcripts:
        kp[t.k_plus] = kp.get(t.k_plus, 0) + 1
        kt[t.k_times] = kt.get(t.k_times, 0) + 1
    return BatchSummary(
        runs=len(transcripts),
        abort_rate=1.0 - len(done) / len(transcripts),
        agreement_rate=sum(t.agree for t in done) / len(done) if done else math.nan,
        mean_key_length=sum(t.key_len for t in done) / len(done) if done else 0.0,
        k_plus_hist=dict(sorted(kp.items())),
        k_times_hist=dict(sorted(kt.items())),
    )


def simulate_batch(cfg: SimConfig, runs: int) -> BatchSummary:
    return summarize(run_batch(cfg, runs))


def attach_bound(transcript: RunTranscript, params: ProtocolParams) -> float:
    """Per-outcome summand ``eta_L(f(j - k, k))`` of the total-information bound.

    ``k`` is the observed ``k_times`` (raised to ``k_low``), ``j`` the total
    phase-error count ``k_times + key_phase_errors`` and
    ``L = n (R - h(k/l + delta_k))``. Averaged over runs, aborted ones
    contributing zero, it cannot exceed the total-information bound.
    """
    if transcript.aborted:
        raise ConfigurationError("no bound for an aborted transcript")
    k = max(transcript.k_times, params.k_low)
    j = transcript.k_times + transcript.key_phase_errors
    f = f_factor(j - k, k, params.n, params.l, params.delta(k))
    return eta(params.key_length(k), f)


def closed_form_agreement(code: BinaryCode, p_bit: float, s: int) -> float:
    """Agreement probability for a block code under i.i.d. bit flips.

    Decoding succeeds when every block holds a correctable pattern; a failed
    decode still agrees when the message difference lands in the random
    ``s``-dimensional subcode, which happens with probability ``(2^s-1)/(2^m-1)``.
    """
    block = code.block if code.block is not None else code
    reps = code.repeats if code.block is not None else 1
    nb = block.length_n
    leaders = coset_leader_table(block).values()
    ok_block = math.fsum(p_bit ** w * (1 - p_bit) ** (nb - w)
                         for w in (v.bit_count() for v in leaders))
    p0 = ok_block ** reps
    m = code.dimension
    return p0 + (1.0 - p0) * ((2.0 ** s - 1) / (2.0 ** m - 1) if m else 0.0)


def write_jsonl(transcripts: Iterable[RunTranscript], fh: io.TextIOBase) -> None:
    for t in transcripts:
        fh.write(t.to_json() + "\n")


SUMMARY_FIELDS = ("runs", "abort_rate", "agreement_rate", "mean_key_length",
                  "mean_k_plus", "mean_k_times")


def _hist_mean(h: dict[int, int]) -> float:
    total = sum(h.values())
    return sum(k * c for k, c in h.items()) / total if total else math.nan


def write_summary_csv(summaries: Iterable[BatchSummary], fh: io.TextIOBase) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SUMMARY_FIELDS)
    for s in summaries:
        w.writerow([s.runs, repr(s.abort_rate), repr(s.agreement_rate), repr(s.mean_key_length),
                    repr(_hist_mean(s.k_plus_hist)), repr(_hist_mean(s.k_times_hist))])
