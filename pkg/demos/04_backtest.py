"""Write synthetic candles, run the configured backtest through the CLI and summarise it."""
import sys
from pathlib import Path

from nswtrade.cli import main
from nswtrade.market_data import random_walk_bars, write_candles

root = Path(__file__).resolve().parents[1]
out = root / "demos" / "out"
out.mkdir(parents=True, exist_ok=True)
n = int(sys.argv[1]) if len(sys.argv) > 1 else 20_000
write_candles(random_walk_bars("eurusd", n, seed=21, start=1.42), out / "eurusd.csv")
write_candles(random_walk_bars("gbpusd", n, seed=22, start=1.63, vol=2.5e-4), out / "gbpusd.csv")

code = main(["backtest", "--config", str(root / "configs" / "example.toml")])
if code == 0:
    print((out / "backtest" / "summary.txt").read_text())
sys.exit(code)
