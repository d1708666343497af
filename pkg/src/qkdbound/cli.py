"""Command-line front end: ``qkdbound <command> [options]``.

Exit codes: 0 success, 2 usage error, 3 failed precondition, 4 audit failure.
JSON output keeps full float precision; text and CSV round to ``--digits``
significant digits.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from collections.abc import Sequence
from pathlib import Path

from . import __version__
from .asymptotics import (
    AsymptoticConfig,
    approximate_exponent,
    exponent_details,
    large_deviation_bound,
    solve_delta,
    table_statistic,
    watanabe_bound,
)
from .errors import QKDBoundError
from .gf2 import BinaryCode, read_code
from .numerics import binary_entropy, gauss_cdf
from .oracles import audit_lemma1, audit_lemma2, audit_lemma7
from .protocol import SimConfig, run_batch, run_modified_batch, summarize, write_jsonl
from .secbounds import ProtocolParams, theorem1_bound

EXIT_OK, EXIT_USAGE, EXIT_PRECONDITION, EXIT_AUDIT = 0, 2, 3, 4
SEED_ENV = "QKDBOUND_SEED"
DEFAULT_DIGITS = 6

# statistics as printed in the published table; l=40000 disagrees with its own
# Phi column and is reported as an erratum
PRINTED_STATISTICS = {1000: -1.14, 10000: -2.68, 20000: -3.10, 30000: -3.29, 40000: -4.00, 50000: -3.47}
TABLE_DEFAULTS = dict(n=10000, p_bar=0.075, delta=0.01, ls=(1000, 10000, 20000, 30000, 40000, 50000))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    return int(raw) if raw else 0


def _fmt(v, digits: int):
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(v).lower()
    if isinstance(v, float):
        return format(v, f".{digits}g")
    return str(v)


def emit(records: list[dict], fmt: str, digits: int, out=None, single: bool = False) -> None:
    out = out or sys.stdout
    if fmt == "json":
        payload = records[0] if single else records
        out.write(json.dumps(payload, indent=2, allow_nan=True) + "\n")
    elif fmt == "csv":
        cols = list(dict.fromkeys(k for r in records for k, v in r.items() if not isinstance(v, (dict, list))))
        w = csv.writer(out, lineterminator="\n")
        w.writerow(cols)
        for r in records:
            w.writerow([_fmt(r.get(c), digits) for c in cols])
    else:
        for i, r in enumerate(records):
            if i:
                out.write("\n")
            width = max(len(k) for k in r)
            for k, v in r.items():
                if isinstance(v, (dict, list)):
                    v = json.dumps(v)
                out.write(f"{k:<{width}}  {_fmt(v, digits)}\n")


def _read_delta_table(path: str) -> dict[int, float]:
    table = {}
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        k, d = line.replace(",", " ").split()
        table[int(k)] = float(d)
    return table


def _thresholds(args) -> tuple[int, int]:
    if args.k is not None:
        return args.k, args.k
    if args.k_low is None or args.k_high is None:
        raise argparse.ArgumentTypeError("give --k or both --k-low and --k-high")
    return args.k_low, args.k_high


def cmd_bound(args) -> list[dict]:
    k_low, k_high = _thresholds(args)
    extra = {}
    if args.delta_from_eps is not None:
        d = solve_delta(args.n, args.l, k_high, args.delta_from_eps)
        delta = d
        extra = {"delta": d, "target_eps": args.delta_from_eps,
                 "roundtrip_eps": gauss_cdf(table_statistic(args.n, args.l, k_high, d))}
    elif args.delta_table is not None:
        delta = _read_delta_table(args.delta_table)
    else:
        delta = args.delta
        extra = {"delta": delta}
    params = ProtocolParams(args.n, args.l, args.R, k_low, k_high, delta)
    report = theorem1_bound(params)
    d_hi = params.delta(k_high)
    normal = gauss_cdf(table_statistic(args.n, args.l, k_high, d_hi)) if 0 < k_high < args.l else math.nan
    rec = {"n": args.n, "l": args.l, "R": args.R, "k_low": k_low, "k_high": k_high, **extra,
           **report.as_dict(), "normal_approximation": normal}
    return [rec]


def table_rows(n: int, p_bar: float, delta: float, ls: Sequence[int]) -> list[dict]:
    defaults = (n, p_bar, delta) == (TABLE_DEFAULTS["n"], TABLE_DEFAULTS["p_bar"], TABLE_DEFAULTS["delta"])
    rows = []
    for l in ls:
        k = round(p_bar * l)
        stat = table_statistic(n, l, k, delta)
        printed = PRINTED_STATISTICS.get(l) if defaults else None
        erratum = printed is not None and abs(printed - stat) > 0.005
        rows.append({"l": l, "statistic": stat, "phi": gauss_cdf(stat), "erratum": erratum,
                     "printed_statistic": printed if erratum else None})
    return rows


def cmd_table(args) -> list[dict]:
    return table_rows(args.n, args.p_bar, args.delta, args.l)


def cmd_solve_delta(args) -> list[dict]:
    d = solve_delta(args.n, args.l, args.k, args.eps)
    stat = table_statistic(args.n, args.l, args.k, d)
    return [{"n": args.n, "l": args.l, "k": args.k, "target_eps": args.eps, "delta": d,
             "statistic": stat, "roundtrip_eps": gauss_cdf(stat)}]


def cmd_exponent(args) -> list[dict]:
    p_high = args.p_high if args.p_high is not None else args.p_low
    cfg = AsymptoticConfig(args.r, args.p_low, p_high, args.eps)
    res = exponent_details(cfg)
    return [{"r": args.r, "p_low": args.p_low, "p_high": p_high, "eps": args.eps,
             "exponent": res.value, "argmin_p": res.p, "argmin_eps_prime": res.eps_prime,
             "quadratic_approximation": approximate_exponent(args.eps, args.r, res.p)}]


def comparison_row(n: int, p: float, eps: float) -> dict:
    """Large-deviation bound against the comparison bound at ``l = n``, ``R = 1 - h(p)``."""
    cfg = AsymptoticConfig(0.5, p, p, eps)
    E = exponent_details(cfg).value
    params = ProtocolParams(n, n, 1.0 - binary_entropy(p), round(p * n), round(p * n), eps)
    ours = large_deviation_bound(params, cfg, E)
    theirs = watanabe_bound(n, eps, 0.0)
    return {"n": n, "p": p, "eps": eps, "exponent": E, "large_deviation_bound": ours,
            "comparison_bound": theirs, "better": ours < theirs}


def cmd_compare(args) -> list[dict]:
    return [comparison_row(n, args.p, args.eps) for n in args.n]


def _sim_config(args) -> SimConfig:
    if args.code:
        code = read_code(args.code, args.n_plus)
    else:
        if args.n_plus % 7:
            raise argparse.ArgumentTypeError("--n-plus must be a multiple of 7 without --code")
        code = BinaryCode.direct_sum(BinaryCode.hamming74(), args.n_plus // 7)
    if code.length_n != args.n_plus:
        raise argparse.ArgumentTypeError(f"code length {code.length_n} != --n-plus {args.n_plus}")
    k_high = args.k_high if args.k_high is not None else args.l_times
    k_high = min(k_high, math.ceil(args.n_plus / 2) - 1)
    params = ProtocolParams(args.n_plus, args.l_times, code.dimension / args.n_plus,
                            args.k_low, k_high, args.delta)
    return SimConfig(params, args.n_plus, args.l_plus, args.n_times, args.l_times, code,
                     args.p_bit, args.p_phase, args.repeat_a, args.seed)


def cmd_simulate(args) -> list[dict]:
    cfg = _sim_config(args)
    if cfg.repeat_a > 1:
        transcripts = [t for batch in run_modified_batch(cfg, args.runs) for t in batch]
    else:
        transcripts = run_batch(cfg, args.runs)
    if args.transcripts:
        with open(args.transcripts, "w") as fh:
            write_jsonl(transcripts, fh)
    s = summarize(transcripts)
    return [{"runs": s.runs, "abort_rate": s.abort_rate, "agreement_rate": s.agreement_rate,
             "mean_key_length": s.mean_key_length,
             "k_plus_hist": {str(k): v for k, v in s.k_plus_hist.items()},
             "k_times_hist": {str(k): v for k, v in s.k_times_hist.items()}}]


def cmd_oracle_check(args) -> list[dict]:
    if args.lemma == 1:
        rep = audit_lemma1(args.n, args.trials, args.seed)
    elif args.lemma == 7:
        rep = audit_lemma7(args.d, args.trials, args.seed, uniform=args.uniform)
    else:
        exhaustive = True if args.exhaustive else None
        rep = audit_lemma2(args.n, args.t, args.s, args.channel, args.trials, args.seed,
                           exhaustive, args.channels)
    rec = rep.as_dict()
    rec["status"] = "PASS" if rep.passed else "FAIL"
    return [rec]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qkdbound", description="Finite-length BB84 security bounds.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv", "text"), default=None,
                        help="default: csv for table, text otherwise")
    common.add_argument("--digits", type=int, default=DEFAULT_DIGITS,
                        help="significant digits for text/csv output")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("bound", parents=[common], help="total and per-bit bounds")
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--l", type=int, required=True)
    b.add_argument("--R", type=float, required=True)
    b.add_argument("--k", type=int, help="sets k_low = k_high")
    b.add_argument("--k-low", type=int)
    b.add_argument("--k-high", type=int)
    dg = b.add_mutually_exclusive_group(required=True)
    dg.add_argument("--delta", type=float)
    dg.add_argument("--delta-table", help="file of 'k delta' lines")
    dg.add_argument("--delta-from-eps", type=float, help="solve delta for this security level")
    b.set_defaults(func=cmd_bound, single=True)

    t = sub.add_parser("table", parents=[common], help="normal-approximation security table")
    t.add_argument("--n", type=int, default=TABLE_DEFAULTS["n"])
    t.add_argument("--R", type=float, default=0.5, help="accepted for completeness; unused")
    t.add_argument("--p-bar", type=float, default=TABLE_DEFAULTS["p_bar"])
    t.add_argument("--delta", type=float, default=TABLE_DEFAULTS["delta"])
    t.add_argument("--l", type=int, nargs="+", default=list(TABLE_DEFAULTS["ls"]))
    t.set_defaults(func=cmd_table, single=False, default_format="csv")

    s = sub.add_parser("solve-delta", parents=[common], help="delta for a target security level")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--l", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--eps", type=float, required=True)
    s.set_defaults(func=cmd_solve_delta, single=True)

    e = sub.add_parser("exponent", parents=[common], help="large-deviation exponent")
    e.add_argument("--r", type=float, default=0.5)
    e.add_argument("--p-low", type=float, required=True)
    e.add_argument("--p-high", type=float)
    e.add_argument("--eps", type=float, required=True, help="constant slack eps(p)")
    e.set_defaults(func=cmd_exponent, single=True)

    c = sub.add_parser("compare", parents=[common], help="large-deviation vs comparison bound")
    c.add_argument("--p", type=float, required=True)
    c.add_argument("--eps", type=float, default=0.01)
    c.add_argument("--n", type=int, nargs="+", default=[1000, 10000, 100000])
    c.set_defaults(func=cmd_compare, single=False)

    m = sub.add_parser("simulate", parents=[common], help="Monte-Carlo protocol runs")
    m.add_argument("--n-plus", type=int, default=70)
    m.add_argument("--l-plus", type=int, default=50)
    m.add_argument("--n-times", type=int, default=70)
    m.add_argument("--l-times", type=int, default=50)
    m.add_argument("--code", help="generator matrix file (rows of 0/1); default [7,4] Hamming blocks")
    m.add_argument("--k-low", type=int, default=0)
    m.add_argument("--k-high", type=int)
    m.add_argument("--delta", type=float, default=0.01)
    m.add_argument("--p-bit", type=float, default=0.0)
    m.add_argument("--p-phase", type=float, default=0.0)
    m.add_argument("--runs", type=int, default=100)
    m.add_argument("--repeat-a", type=int, default=1)
    m.add_argument("--seed", type=int, default=None, help=f"default: ${SEED_ENV} or 0")
    m.add_argument("--transcripts", help="write JSONL transcripts here")
    m.set_defaults(func=cmd_simulate, single=True)

    o = sub.add_parser("oracle-check", parents=[common], help="brute-force lemma audits")
    o.add_argument("--lemma", type=int, choices=(1, 2, 7), required=True)
    o.add_argument("--n", type=int, default=2)
    o.add_argument("--d", type=int, default=4)
    o.add_argument("--t", type=int, default=0)
    o.add_argument("--s", type=int, default=1)
    o.add_argument("--channel", default="bsc:0.1")
    o.add_argument("--channels", type=int, default=1)
    o.add_argument("--trials", type=int, default=1000)
    o.add_argument("--uniform", action="store_true")
    o.add_argument("--exhaustive", action="store_true")
    o.add_argument("--seed", type=int, default=None, help=f"default: ${SEED_ENV} or 0")
    o.set_defaults(func=cmd_oracle_check, single=True)
    return p


def main(argv: Sequence[str] | None = None, out=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", None) is None and hasattr(args, "seed"):
        args.seed = default_seed()
    if args.format is None:
        args.format = getattr(args, "default_format", "text")
    try:
        records = args.func(args)
    except argparse.ArgumentTypeError as exc:
        parser.print_usage(sys.stderr)
        print(f"qkdbound: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (QKDBoundError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_PRECONDITION
    emit(records, args.format, args.digits, out, single=args.single)
    if args.command == "oracle-check" and not records[0]["passed"]:
        return EXIT_AUDIT
    return EXIT_OK


def run(argv: Sequence[str] | None = None) -> str:
    """Run a command and return its standard output (convenience for scripting)."""
    buf = io.StringIO()
    code = main(argv, buf)
    if code:
        raise SystemExit(code)
    return buf.getvalue()


if __name__ == "__main__":
    sys.exit(main())
