"""Polynomial lag maps with unstable fixed points separate a chaotic orbit from noise."""
import numpy as np

from nswtrade.chaos import chaos_verdict, iterate_map
from nswtrade.market_data import log_returns, random_walk_bars

cases = {
    "logistic 3.618": iterate_map(3.618, 0.3, 2000),
    "logistic 2.8": iterate_map(2.8, 0.3, 2000),
    "gaussian noise": np.random.default_rng(0).normal(size=2000),
    "random-walk returns": log_returns(random_walk_bars("eurusd", 2001, seed=1).close),
}
for name, x in cases.items():
    v = chaos_verdict(x, Qmax=3)
    print(f"--- {name}: {v.verdict}")
    print(v.to_csv())
