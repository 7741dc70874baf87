"""Broker account statements: parsing, summary statistics and trade-profitability estimates.

The text layout is the tab-separated MetaTrader 4 report: an ``Account:`` header,
a ``Closed Transactions:`` table, optional ``Open Trades:`` / ``Working Orders:``
tables and an optional ``Summary:`` block. Space-separated rows are accepted
too; dates written ``YYYY.MM.DD HH:MM`` and money written with space thousands
separators (``-1 297.56``) are re-joined before fields are assigned.
Money is held as :class:`decimal.Decimal` so that totals reconcile to the cent.
"""
from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field, replace
from datetime import date, datetime
from decimal import Decimal, InvalidOperation

import numpy as np
from scipy import stats as sps

from .errors import EmptyPeriodError, EmptyStatementError, FormatError, UnknownTypeError

CENT = Decimal("0.01")
TIME_FORMAT = "%Y.%m.%d %H:%M"
TRADE_TYPES = ("buy", "sell", "balance")
MIN_TRADES_FOR_FIT = 20

_MONEY = re.compile(r"^-?\d{1,3}(?: \d{3})+(?:\.\d+)?$|^-?\d+(?:\.\d+)?$")
_DATE = re.compile(r"^\d{4}\.\d{2}\.\d{2}$")
_TIME = re.compile(r"^\d{2}:\d{2}$")
_GROUP_HEAD = re.compile(r"^-?\d{1,3}$")
_GROUP_TAIL = re.compile(r"^\d{3}(?:\.\d+)?$")
_REASON = re.compile(r"^\[(\w+)\]$")

CLOSED_HEADER = ["Ticket", "Open Time", "Type", "Size", "Item", "Price", "S / L", "T / P",
                 "Close Time", "Price", "Commission", "Taxes", "Swap", "Profit"]
OPEN_HEADER = ["Ticket", "Open Time", "Type", "Size", "Item", "Price", "S / L", "T / P",
               "Price", "Commission", "Taxes", "Swap", "Profit"]


def parse_money(token: str) -> Decimal:
    """``"7 220.22"`` -> ``Decimal("7220.22")``; accepts a Unicode minus sign."""
    t = token.strip().replace("−", "-").replace(" ", " ")
    if not _MONEY.match(t):
        raise ValueError(f"not a money value: {token!r}")
    return Decimal(t.replace(" ", ""))


def format_money(value) -> str:
    """Two decimals with space-separated thousands: ``Decimal("-1512.03")`` -> ``"-1 512.03"``."""
    d = Decimal(value).quantize(CENT)
    return f"{d:,.2f}".replace(",", " ")


def parse_time(token: str) -> datetime:
    return datetime.strptime(token.strip(), TIME_FORMAT)


def format_time(t: datetime) -> str:
    return t.strftime(TIME_FORMAT)


@dataclass(frozen=True)
class TradeRecord:
    ticket: int
    open_time: datetime
    type: str
    item: str
    size: Decimal = Decimal("0")
    open_price: Decimal = Decimal("0")
    sl: Decimal = Decimal("0")
    tp: Decimal = Decimal("0")
    close_time: datetime | None = None
    close_price: Decimal = Decimal("0")
    commission: Decimal = Decimal("0")
    taxes: Decimal = Decimal("0")
    swap: Decimal = Decimal("0")
    profit: Decimal = Decimal("0")
    close_reason: str = ""  # "tp", "sl", "emergency" when the writer recorded it

    @property
    def net(self) -> Decimal:
        return self.commission + self.taxes + self.swap + self.profit

    @property
    def is_trade(self) -> bool:
        return self.type in ("buy", "sell")


@dataclass
class Statement:
    account: int = 0
    name: str = ""
    currency: str = ""
    generated: str = ""
    closed: list = field(default_factory=list)  # buy/sell rows of the closed table
    open: list = field(default_factory=list)
    deposits: list = field(default_factory=list)  # balance rows
    reported_summary: dict = field(default_factory=dict)

    @property
    def deposit_total(self) -> Decimal:
        return sum((d.profit for d in self.deposits), Decimal("0"))


# --- parsing ----------------------------------------------------------------

def _tokens(line: str) -> list:
    """Split a row into cells; tab-separated rows keep their cells verbatim."""
    line = line.replace("−", "-").rstrip("\r\n")
    if "\t" in line:
        return [c.strip() for c in line.split("\t")]
    raw = line.split()
    out = []
    i = 0
    while i < len(raw):
        tok = raw[i]
        if _DATE.match(tok) and i + 1 < len(raw) and _TIME.match(raw[i + 1]):
            out.append(tok + " " + raw[i + 1])
            i += 2
            continue
        if _GROUP_HEAD.match(tok):
            j = i + 1
            merged = tok
            while j < len(raw) and _GROUP_TAIL.match(raw[j]):
                merged += " " + raw[j]
                j += 1
                if "." in raw[j - 1]:
                    break
            if j > i + 1:
                out.append(merged)
                i = j
                continue
        out.append(tok)
        i += 1
    return out


def _money(cell: str, lineno: int, what: str) -> Decimal:
    try:
        return parse_money(cell)
    except (ValueError, InvalidOperation):
        raise FormatError(f"bad {what} value {cell!r}", lineno) from None


def _time(cell: str, lineno: int, what: str) -> datetime:
    try:
        return parse_time(cell)
    except ValueError:
        raise FormatError(f"bad {what} {cell!r}", lineno) from None


def _parse_row(cells: list, lineno: int, closed: bool) -> TradeRecord:
    cells = list(cells)
    try:
        ticket = int(cells[0])
    except (ValueError, IndexError):
        raise FormatError(f"expected a ticket number, got {cells[:1]}", lineno) from None
    if len(cells) < 3:
        raise FormatError("row too short", lineno)
    otime = _time(cells[1], lineno, "open time")
    typ = cells[2].lower()
    if typ not in TRADE_TYPES:
        raise UnknownTypeError(f"unknown row type {cells[2]!r}", lineno)
    if typ == "balance":
        rest = [c for c in cells[3:] if c]
        if len(rest) < 2:
            raise FormatError("balance row needs a comment and an amount", lineno)
        return TradeRecord(ticket, otime, "balance", " ".join(rest[:-1]),
                           profit=_money(rest[-1], lineno, "amount"))
    cells = [c for c in cells if c != ""]
    reason = ""
    if cells and _REASON.match(cells[-1]):
        reason = _REASON.match(cells.pop()).group(1)
    want = 14 if closed else 13
    if len(cells) != want:
        raise FormatError(f"expected {want} fields, found {len(cells)}", lineno)
    m = lambda k, what: _money(cells[k], lineno, what)  # noqa: E731
    kw = dict(size=m(3, "size"), open_price=m(5, "price"), sl=m(6, "S/L"), tp=m(7, "T/P"))
    k = 8
    if closed:
        kw["close_time"] = _time(cells[8], lineno, "close time")
        k = 9
    kw.update(close_price=m(k, "price"), commission=m(k + 1, "commission"), taxes=m(k + 2, "taxes"),
              swap=m(k + 3, "swap"), profit=m(k + 4, "profit"), close_reason=reason)
    return TradeRecord(ticket, otime, typ, cells[4], **kw)


_SECTIONS = {"closed transactions:": "closed", "open trades:": "open", "working orders:": "orders",
             "summary:": "summary", "details:": "summary"}


def _summary_pairs(cells: list) -> list:
    cells = [c for c in cells if c]
    pairs = []
    prefix = ""
    i = 0
    while i < len(cells):
        c = cells[i]
        if c.endswith(":") and i + 1 < len(cells):
            key = (prefix + " " + c[:-1]).strip()
            pairs.append((key, cells[i + 1]))
            i += 2
        elif ":" in c and not c.endswith(":"):
            k, v = c.split(":", 1)
            pairs.append(((prefix + " " + k).strip(), v.strip()))
            i += 1
        else:
            prefix = c
            i += 1
    return pairs


def parse_statement(text: str) -> Statement:
    """Parse a statement document; raises :class:`FormatError` naming the offending line."""
    stmt = Statement()
    section = None
    seen_closed = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s:
            continue
        low = s.lower()
        if low in _SECTIONS:
            section = _SECTIONS[low]
            seen_closed |= section == "closed"
            continue
        if section is None:
            if ":" in s:
                key, val = (p.strip() for p in s.split(":", 1))
                if key == "Account":
                    try:
                        stmt.account = int(val)
                    except ValueError:
                        raise FormatError(f"bad account number {val!r}", lineno) from None
                elif key == "Currency":
                    stmt.currency = val
                elif key == "Name":
                    stmt.name = val
                else:
                    stmt.generated = s
            else:
                stmt.generated = s
            continue
        if section in ("closed", "open"):
            if low.startswith("ticket"):
                continue
            if low.startswith(("closed p/l:", "floating p/l:")):
                key, val = s.split(":", 1)
                stmt.reported_summary[key.strip()] = val.strip()
                continue
            cells = _tokens(line)
            if not cells[0]:
                continue  # column totals row
            if not cells[0].isdigit() and all(_MONEY.match(c) for c in cells if c):
                continue  # totals row written without leading tabs
            rec = _parse_row(cells, lineno, closed=section == "closed")
            if rec.type == "balance":
                stmt.deposits.append(rec)
            elif section == "closed":
                stmt.closed.append(rec)
            else:
                stmt.open.append(rec)
        elif section == "summary":
            for key, val in _summary_pairs(line.split("\t") if "\t" in line else [s]):
                stmt.reported_summary[key] = val
    if not seen_closed:
        raise FormatError("missing 'Closed Transactions:' section", 0)
    return stmt


def read_statement(path) -> Statement:
    with open(path, encoding="utf-8") as fh:
        return parse_statement(fh.read())


# --- writing ----------------------------------------------------------------

def _price(d: Decimal) -> str:
    return format(d, "f")


def _row(rec: TradeRecord, closed: bool) -> str:
    if rec.type == "balance":
        return "\t".join([str(rec.ticket), format_time(rec.open_time), "balance", rec.item] + [""] * 9
                         + [format_money(rec.profit)])
    cells = [str(rec.ticket), format_time(rec.open_time), rec.type, _price(rec.size), rec.item,
             _price(rec.open_price), _price(rec.sl), _price(rec.tp)]
    if closed:
        cells.append(format_time(rec.close_time))
    cells += [_price(rec.close_price)] + [format_money(v) for v in (rec.commission, rec.taxes, rec.swap, rec.profit)]
    if rec.close_reason:
        cells.append(f"[{rec.close_reason}]")
    return "\t".join(cells)


def format_statement(stmt: Statement) -> str:
    """Render in the tab-separated report layout; :func:`parse_statement` reads it back."""
    out = [f"Account: {stmt.account}", ""]
    if stmt.name:
        out += [f"Name: {stmt.name}", ""]
    out += [f"Currency: {stmt.currency}", ""]
    out += ["Closed Transactions:", "", "\t".join(CLOSED_HEADER)]
    rows = sorted(stmt.closed + stmt.deposits, key=lambda r: (r.close_time or r.open_time, r.ticket), reverse=True)
    out += [_row(r, True) for r in rows]
    nets = [r.commission for r in stmt.closed], [r.taxes for r in stmt.closed], \
        [r.swap for r in stmt.closed], [r.profit for r in stmt.closed + stmt.deposits]
    closed_pl = sum((r.net for r in stmt.closed), Decimal("0"))
    out.append("\t" * 10 + "\t".join(format_money(sum(v, Decimal("0"))) for v in nets))
    out += ["", f"Closed P/L: {format_money(closed_pl)}", "", "Open Trades:", "", "\t".join(OPEN_HEADER)]
    out += [_row(r, False) for r in stmt.open]
    floating = sum((r.net for r in stmt.open), Decimal("0"))
    out += ["", f"Floating P/L: {format_money(floating)}", ""]
    return "\n".join(out) + "\n"


def write_statement(stmt: Statement, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_statement(stmt))


# --- statistics --------------------------------------------------------------

def _ordered(trades) -> list:
    return sorted(trades, key=lambda r: (r.close_time, r.ticket))


@dataclass(frozen=True)
class Run:
    count: int = 0
    amount: Decimal = Decimal("0")


@dataclass
class SummaryStats:
    deposits: Decimal
    closed_pl: Decimal
    floating_pl: Decimal
    balance: Decimal
    equity: Decimal
    gross_profit: Decimal
    gross_loss: Decimal
    profit_factor: float
    expected_payoff: float
    total_trades: int
    profit_trades: int
    loss_trades: int
    short_trades: int
    short_won: int
    long_trades: int
    long_won: int
    largest_profit: Decimal
    largest_loss: Decimal
    average_profit: float
    average_loss: float
    max_consecutive_wins: Run  # longest run, with its amount
    max_consecutive_losses: Run
    max_consecutive_profit: Run  # run with the largest total
    max_consecutive_loss: Run
    average_consecutive_wins: float
    average_consecutive_losses: float
    absolute_drawdown: Decimal
    maximal_drawdown: Decimal
    maximal_drawdown_pct: float
    emergency_closes: int
    probability: "ProfitProbability | None" = None

    @property
    def profit_trades_pct(self) -> float:
        return 100.0 * self.profit_trades / self.total_trades if self.total_trades else 0.0

    @property
    def loss_trades_pct(self) -> float:
        return 100.0 * self.loss_trades / self.total_trades if self.total_trades else 0.0


def _runs(nets: list):
    """Maximal runs of profitable (net >= 0) and losing trades, as (is_win, count, amount)."""
    runs = []
    for v in nets:
        win = v >= 0
        if runs and runs[-1][0] == win:
            runs[-1][1] += 1
            runs[-1][2] += v
        else:
            runs.append([win, 1, v])
    return runs


def balance_events(stmt: Statement) -> list:
    """Chronological ``(time, ticket, amount)`` of deposits and closed-trade nets."""
    ev = [(d.open_time, d.ticket, d.profit) for d in stmt.deposits]
    ev += [(r.close_time, r.ticket, r.net) for r in stmt.closed]
    return sorted(ev)


def balance_curve(stmt: Statement) -> list:
    """``(time, balance)`` after each deposit and each closed trade."""
    bal = Decimal("0")
    out = []
    for t, _, amt in balance_events(stmt):
        bal += amt
        out.append((t, bal))
    return out


def _drawdowns(stmt: Statement):
    peak = None
    start = None
    worst = Decimal("0")
    worst_pct = 0.0
    lowest = None
    for _, bal in balance_curve(stmt):
        if start is None:
            start = bal
        if peak is None or bal > peak:
            peak = bal
        dd = peak - bal
        if dd > worst:
            worst = dd
            worst_pct = float(dd / peak * 100) if peak > 0 else 0.0
        lowest = bal if lowest is None else min(lowest, bal)
    absolute = max(Decimal("0"), (start or Decimal("0")) - (lowest or Decimal("0")))
    return absolute, worst, worst_pct


def summarize(stmt: Statement, alpha_fit: float = 0.05, allow_empty: bool = False) -> SummaryStats:
    """Summary figures of the statement; a trade is profitable when its net is >= 0."""
    trades = _ordered(stmt.closed)
    if not trades and not allow_empty:
        raise EmptyStatementError("statement has no closed trades")
    zero = Decimal("0")
    nets = [r.net for r in trades]
    closed_pl = sum(nets, zero)
    gp = sum((v for v in nets if v > 0), zero)
    gl = -sum((v for v in nets if v < 0), zero)
    wins = [v for v in nets if v >= 0]
    losses = [v for v in nets if v < 0]
    n = len(nets)
    floating = sum((r.net for r in stmt.open), zero)
    deposits = stmt.deposit_total
    runs = _runs(nets)
    win_runs = [(c, a) for w, c, a in runs if w]
    loss_runs = [(c, a) for w, c, a in runs if not w]

    def longest(rs):
        return Run(*max(rs, key=lambda r: (r[0], abs(r[1])))) if rs else Run()

    def biggest(rs):
        return Run(*max(rs, key=lambda r: (abs(r[1]), r[0]))) if rs else Run()

    absolute, mdd, mdd_pct = _drawdowns(stmt)
    shorts = [v for r, v in zip(trades, nets) if r.type == "sell"]
    longs = [v for r, v in zip(trades, nets) if r.type == "buy"]
    return SummaryStats(
        deposits=deposits, closed_pl=closed_pl, floating_pl=floating,
        balance=deposits + closed_pl, equity=deposits + closed_pl + floating,
        gross_profit=gp, gross_loss=gl,
        profit_factor=float(gp / gl) if gl > 0 else (math.inf if gp > 0 else math.nan),
        expected_payoff=float(closed_pl / n) if n else 0.0,
        total_trades=n, profit_trades=len(wins), loss_trades=len(losses),
        short_trades=len(shorts), short_won=sum(v >= 0 for v in shorts),
        long_trades=len(longs), long_won=sum(v >= 0 for v in longs),
        largest_profit=max(nets) if nets else zero, largest_loss=min(nets) if nets else zero,
        average_profit=float(gp / len(wins)) if wins else 0.0,
        average_loss=float(-gl / len(losses)) if losses else 0.0,
        max_consecutive_wins=longest(win_runs), max_consecutive_losses=longest(loss_runs),
        max_consecutive_profit=biggest(win_runs), max_consecutive_loss=biggest(loss_runs),
        average_consecutive_wins=float(np.mean([c for c, _ in win_runs])) if win_runs else 0.0,
        average_consecutive_losses=float(np.mean([c for c, _ in loss_runs])) if loss_runs else 0.0,
        absolute_drawdown=absolute, maximal_drawdown=mdd, maximal_drawdown_pct=mdd_pct,
        emergency_closes=sum(r.close_reason == "emergency" for r in trades),
        probability=probability_profitable(stmt, alpha_fit) if trades else None,
    )


@dataclass
class ProfitProbability:
    p: float
    normal_ok: bool
    mu: float
    sigma: float
    ks_stat: float
    ks_pvalue: float
    n: int


def trade_returns(stmt: Statement, period=None) -> np.ndarray:
    """Net of each closed trade over the balance just before it closed.

    The balance counts deposits made up to the close and trades closed earlier
    (ties broken by ticket). ``period`` restricts which trades are returned, not
    the balance history.
    """
    out = []
    bal = Decimal("0")
    for t, ticket, amt in balance_events(stmt):
        is_deposit = any(d.ticket == ticket and d.open_time == t for d in stmt.deposits)
        if not is_deposit and _in_period(t, period):
            out.append(float(amt) / float(bal) if bal > 0 else math.nan)
        bal += amt
    r = np.array(out, dtype=float)
    return r[np.isfinite(r)]


def _in_period(t: datetime, period) -> bool:
    if period is None:
        return True
    lo, hi = period
    d = t.date()
    return (lo is None or d >= _as_date(lo)) and (hi is None or d <= _as_date(hi))


def _as_date(v) -> date:
    if isinstance(v, datetime):
        return v.date()
    if isinstance(v, date):
        return v
    return datetime.strptime(str(v), "%Y-%m-%d").date()


def probability_from_returns(r, alpha_fit: float = 0.05) -> ProfitProbability:
    r = np.asarray(r, dtype=float)
    n = len(r)
    if n == 0:
        return ProfitProbability(math.nan, False, math.nan, math.nan, math.nan, math.nan, 0)
    mu = float(r.mean())
    sigma = float(r.std(ddof=1)) if n > 1 else 0.0
    if n < MIN_TRADES_FOR_FIT:
        return ProfitProbability(float(np.mean(r > 0)), False, mu, sigma, math.nan, math.nan, n)
    if sigma == 0.0:
        p = 1.0 if mu > 0 else (0.0 if mu < 0 else 0.5)
        return ProfitProbability(p, False, mu, sigma, math.nan, math.nan, n)
    ks = sps.kstest(r, "norm", args=(mu, sigma))
    p = float(sps.norm.cdf(mu / sigma))
    return ProfitProbability(p, bool(ks.pvalue > alpha_fit), mu, sigma, float(ks.statistic), float(ks.pvalue), n)


def probability_profitable(stmt: Statement, alpha_fit: float = 0.05, period=None) -> ProfitProbability:
    """Chance that a trade's balance-normalised return is positive under a normal fit.

    With fewer than 20 trades the empirical share of positive returns is given
    and ``normal_ok`` is False.
    """
    return probability_from_returns(trade_returns(stmt, period), alpha_fit)


@dataclass
class Table1Row:
    period: tuple
    n_transactions: int
    closed_profit: Decimal
    floating_pl: Decimal
    profit_after_closing: Decimal
    probability: ProfitProbability
    emergency_closes: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["period", "transactions", "closed_profit", "floating_pl", "profit_after_closing",
                    "probability", "normal_ok", "emergency_closes"])
        lo, hi = self.period
        w.writerow([f"{lo or ''}..{hi or ''}", self.n_transactions, f"{self.closed_profit:.2f}",
                    f"{self.floating_pl:.2f}", f"{self.profit_after_closing:.2f}",
                    f"{self.probability.p:.4f}", int(self.probability.normal_ok), self.emergency_closes])
        return buf.getvalue()


def table1_report(stmt: Statement, period=None, alpha_fit: float = 0.05) -> Table1Row:
    """Efficiency row for trades closed within ``period`` (inclusive dates, ``None`` = open end).

    Floating P/L counts open trades opened within the period.
    """
    period = period or (None, None)
    closed = [r for r in stmt.closed if _in_period(r.close_time, period)]
    if not closed:
        raise EmptyPeriodError(f"no trades closed in {period}")
    cp = sum((r.net for r in closed), Decimal("0"))
    fl = sum((r.net for r in stmt.open if _in_period(r.open_time, period)), Decimal("0"))
    prob = probability_profitable(stmt, alpha_fit, period)
    return Table1Row(tuple(period), len(closed), cp, fl, cp + fl, prob,
                     sum(r.close_reason == "emergency" for r in closed))


# --- reports ------------------------------------------------------------------

def _pct(a: int, n: int) -> str:
    return f"{100.0 * a / n:.2f}%" if n else "0.00%"


def _ratio(v: float) -> str:
    if math.isinf(v):
        return "inf"
    if math.isnan(v):
        return "n/a"
    return f"{v:.2f}"


def summary_items(s: SummaryStats) -> list:
    """``(label, text)`` pairs in report order."""
    items = [
        ("Deposit/Withdrawal", format_money(s.deposits)),
        ("Closed Trade P/L", format_money(s.closed_pl)),
        ("Floating P/L", format_money(s.floating_pl)),
        ("Balance", format_money(s.balance)),
        ("Equity", format_money(s.equity)),
        ("Gross Profit", format_money(s.gross_profit)),
        ("Gross Loss", format_money(s.gross_loss)),
        ("Total Net Profit", format_money(s.closed_pl)),
        ("Profit Factor", _ratio(s.profit_factor)),
        ("Expected Payoff", f"{s.expected_payoff:.2f}"),
        ("Absolute Drawdown", format_money(s.absolute_drawdown)),
        ("Maximal Drawdown", f"{format_money(s.maximal_drawdown)} ({s.maximal_drawdown_pct:.2f}%)"),
        ("Total Trades", str(s.total_trades)),
        ("Short Positions (won %)", f"{s.short_trades} ({_pct(s.short_won, s.short_trades)})"),
        ("Long Positions (won %)", f"{s.long_trades} ({_pct(s.long_won, s.long_trades)})"),
        ("Profit Trades (% of total)", f"{s.profit_trades} ({_pct(s.profit_trades, s.total_trades)})"),
        ("Loss Trades (% of total)", f"{s.loss_trades} ({_pct(s.loss_trades, s.total_trades)})"),
        ("Largest profit trade", format_money(s.largest_profit)),
        ("Largest loss trade", format_money(s.largest_loss)),
        ("Average profit trade", f"{s.average_profit:.2f}"),
        ("Average loss trade", f"{s.average_loss:.2f}"),
        ("Maximum consecutive wins ($)",
         f"{s.max_consecutive_wins.count} ({format_money(s.max_consecutive_wins.amount)})"),
        ("Maximum consecutive losses ($)",
         f"{s.max_consecutive_losses.count} ({format_money(s.max_consecutive_losses.amount)})"),
        ("Maximal consecutive profit (count)",
         f"{format_money(s.max_consecutive_profit.amount)} ({s.max_consecutive_profit.count})"),
        ("Maximal consecutive loss (count)",
         f"{format_money(s.max_consecutive_loss.amount)} ({s.max_consecutive_loss.count})"),
        ("Average consecutive wins", f"{s.average_consecutive_wins:.0f}"),
        ("Average consecutive losses", f"{s.average_consecutive_losses:.0f}"),
        ("Emergency closes", str(s.emergency_closes)),
    ]
    pr = s.probability
    if pr is not None:
        items += [
            ("Probability of profitable trade", f"{pr.p:.4f}"),
            ("Normal fit accepted", "yes" if pr.normal_ok else "no"),
            ("Mean trade return", f"{pr.mu:.6g}"),
            ("Trade return std", f"{pr.sigma:.6g}"),
            ("KS statistic", f"{pr.ks_stat:.4f}"),
        ]
    return items


def summary_text(s: SummaryStats) -> str:
    return "".join(f"{k}: {v}\n" for k, v in summary_items(s))


def summary_csv(s: SummaryStats) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["field", "value"])
    w.writerows(summary_items(s))
    return buf.getvalue()


def with_records(stmt: Statement, closed=None, open=None) -> Statement:
    """Copy of ``stmt`` with replaced trade lists."""
    return replace(stmt, closed=list(stmt.closed if closed is None else closed),
                   open=list(stmt.open if open is None else open))
