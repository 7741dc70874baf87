"""Command-line entry point.

Exit codes: 0 success, 1 configuration or usage error, 2 data error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .backtest import run
from .chaos import QMAX, chaos_verdict
from .config import load_config
from .errors import (AlignmentError, ConfigError, EmptyInputError, LengthError, NswError, OrderError,
                     ParseError, RankError)
from .ledger import (format_statement, read_statement, summarize, summary_csv, summary_text, table1_report)
from .market_data import base_series, load_candles, log_returns
from .wavelet import decompose

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _versions() -> dict:
    out = {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
           "nswtrade": __version__}
    return out


def cmd_backtest(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg.threads = args.threads
    out = Path(args.out) if args.out else cfg.out
    if cfg.pipeline.portfolio_beta > 0:
        print(f"warning: portfolio.beta = {cfg.pipeline.portfolio_beta} > 0 rewards concentration in "
              "correlated symbols rather than penalising risk", file=sys.stderr)
    data = []
    for sym, path in zip(cfg.symbols, cfg.files):
        if not Path(path).is_file():
            raise FileNotFoundError(f"candle file not found: {path}")
        data.append(load_candles(path, sym, cfg.frame))
    res = run(data, cfg.pipeline, cfg.exec, seed=cfg.seed, threads=cfg.threads)
    out.mkdir(parents=True, exist_ok=True)
    files = {"statement.txt": format_statement(res.statement), "equity.csv": res.equity.to_csv(),
             "allocations.csv": res.allocations_csv()}
    if res.statement.closed:
        stats = summarize(res.statement)
        files["summary.txt"] = summary_text(stats)
        files["summary.csv"] = summary_csv(stats)
        files["table1.csv"] = table1_report(res.statement).to_csv()
    else:
        stats = summarize(res.statement, allow_empty=True)
        files["summary.txt"] = summary_text(stats)
        files["summary.csv"] = summary_csv(stats)
        files["table1.csv"] = "period,transactions,closed_profit,floating_pl,profit_after_closing,probability," \
                              "normal_ok,emergency_closes\n..,0,0.00,0.00,0.00,,0,0\n"
    for name, text in files.items():
        with open(out / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    manifest = {
        "config": str(args.config),
        "config_sha256": cfg.source_hash,
        "seed": cfg.seed,
        "threads": cfg.threads,
        "versions": _versions(),
        "inputs": {sym: _sha256(Path(p).read_bytes()) for sym, p in zip(cfg.symbols, cfg.files)},
        "outputs": {name: _sha256(text.encode("utf-8")) for name, text in files.items()},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"{len(res.statement.closed)} closed trades; final balance {res.equity.balance[-1]:.2f}; "
          f"outputs in {out}")
    return EXIT_OK


def cmd_analyze_statement(args) -> int:
    stmt = read_statement(args.statement)
    period = None
    if args.start or args.end:
        period = (args.start, args.end)
    stats = summarize(stmt, allow_empty=True)
    sys.stdout.write(summary_text(stats))
    if stmt.closed and period is not None:
        sys.stdout.write(table1_report(stmt, period).to_csv())
    return EXIT_OK


def cmd_chaos_screen(args) -> int:
    if not 1 <= args.qmax <= QMAX:
        raise ConfigError(f"--qmax must be between 1 and {QMAX}")
    if args.degree < 1:
        raise ConfigError("--degree must be >= 1")
    bars = load_candles(args.candles, "series", 60)
    x = base_series(bars, args.combo).values
    if args.returns:
        x = log_returns(x)
    verdict = chaos_verdict(x, args.qmax, args.degree)
    sys.stdout.write(verdict.to_csv())
    return EXIT_OK


def cmd_dump_wavelet(args) -> int:
    if args.levels < 1:
        raise ConfigError("--levels must be >= 1")
    bars = load_candles(args.candles, "series", 60)
    pyr = decompose(base_series(bars, args.combo).values, args.levels)
    if args.out:
        Path(args.out).write_text(pyr.to_csv(), encoding="utf-8")
    else:
        sys.stdout.write(pyr.to_csv())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nswtrade", description="Wavelet/Ito-model trading engine and statement analytics.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("backtest", help="run a backtest from a config file")
    b.add_argument("--config", required=True)
    b.add_argument("--out", help="output directory (overrides run.out)")
    b.add_argument("--seed", type=int, help="overrides run.seed")
    b.add_argument("--threads", type=int, help="overrides run.threads")
    b.set_defaults(func=cmd_backtest)

    a = sub.add_parser("analyze-statement", help="summary statistics of a broker statement")
    a.add_argument("--statement", required=True)
    a.add_argument("--start", help="first close date of the report period, YYYY-MM-DD")
    a.add_argument("--end", help="last close date of the report period, YYYY-MM-DD")
    a.set_defaults(func=cmd_analyze_statement)

    c = sub.add_parser("chaos-screen", help="fit lag maps and report fixed points")
    c.add_argument("--candles", required=True)
    c.add_argument("--qmax", type=int, default=QMAX)
    c.add_argument("--degree", type=int, default=2)
    c.add_argument("--combo", default="Close")
    c.add_argument("--returns", action="store_true", help="screen log returns instead of price levels")
    c.set_defaults(func=cmd_chaos_screen)

    w = sub.add_parser("dump-wavelet", help="write the wavelet pyramid of a candle file as CSV")
    w.add_argument("--candles", required=True)
    w.add_argument("--levels", type=int, default=4)
    w.add_argument("--combo", default="HalfSumOpenClose")
    w.add_argument("--out")
    w.set_defaults(func=cmd_dump_wavelet)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, OrderError, AlignmentError, EmptyInputError, LengthError, RankError, OSError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (NswError, ValueError, ArithmeticError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
