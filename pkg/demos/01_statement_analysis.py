"""Read a broker statement, reproduce its summary block and fit a normal model to trade returns."""
from pathlib import Path

from nswtrade.ledger import read_statement, summarize, summary_text, table1_report

STATEMENT = Path(__file__).resolve().parents[1] / "tests" / "data" / "mt4_statement.txt"

stmt = read_statement(STATEMENT)
print(f"{len(stmt.closed)} closed trades, {len(stmt.open)} open, deposits {stmt.deposit_total}\n")

stats = summarize(stmt)
print(summary_text(stats))

# figures the broker printed next to ours
for key in ("Closed Trade P/L", "Floating P/L", "Balance", "Equity", "Total Trades", "Profit Factor"):
    print(f"reported {key}: {stmt.reported_summary.get(key)}")

# the normal fit is rejected by the KS test: returns are heavy tailed
pr = stats.probability
print(f"\nP(trade return > 0) under a normal fit: {pr.p:.4f} (mu {pr.mu:.5f}, sigma {pr.sigma:.5f}, "
      f"KS {pr.ks_stat:.3f}, fit accepted: {pr.normal_ok})")

print("\nperiod report")
print(table1_report(stmt, ("2011-08-19", "2011-09-26")).to_csv())
