"""From prices to a trade decision for one symbol.

A causal Haar detail stream feeds an online Ito model; the model's stationary
density gives P_s, the mass below zero, and the KS gate compares densities
synthesised one slow period apart.
"""
import numpy as np

from nswtrade.errors import DegenerateError, DensityOverflowError
from nswtrade.market_data import base_series, random_walk_bars
from nswtrade.sde import Observation, RunningScale, SdeModel, forecast_increment, rm_update
from nswtrade.signals import composite_signal
from nswtrade.stationary import KsGate, ks_gate, prob_negative, solve_stationary
from nswtrade.wavelet import decompose, haar_detail_stream, reconstruct

bars = random_walk_bars("eurusd", 4000, seed=3, drift=2e-6)
X = base_series(bars).values

pyr = decompose(X[:2048], 4)
print(f"pyramid levels {pyr.K}, reconstruction error {np.max(np.abs(reconstruct(pyr) - X[:2048])):.1e}")

y1 = -haar_detail_stream(X, 5)
y2 = -haar_detail_stream(X, 10)
ok = np.isfinite(y1) & np.isfinite(y2)
y1, y2 = y1[ok], y2[ok]
print(f"detail stream: {len(y1)} values, std {y1.std():.2e}")

T = 240
scale = RunningScale(horizon=T)
model = SdeModel.zeros(3, 2, g0=float(np.std(np.diff(y1[:50]))), avg_horizon=T)
gate = KsGate(alpha=0.15)
prev = None
for t in range(len(y1) - 1):
    scale.update(y1[t], y2[t])
    model.scale = scale.scale
    model = rm_update(model, Observation(y1[t], y2[t], y1[t + 1] - y1[t]))
    if model.n_updates % T == 0:
        s = model.scale
        half = abs(s.mean1) + 8 * s.std1
        try:
            d = solve_stationary(model.averaged(), (-half, half, 257), t_stamp=t)
        except (DensityOverflowError, DegenerateError) as e:
            # the backtest treats this period as uninformative: P_s = 0.5, gate closed
            print(f"bar {t:5d}: density rejected ({e})")
            prev = None
            continue
        decision = ks_gate(prev, d, KsGate(gate.alpha, gate.k_alpha, T)) if prev is not None else None
        dY1 = forecast_increment(model.averaged(), y1[t], y2[t])
        u = composite_signal(dY1, prob_negative(d), 0.15, bool(decision and decision.distinguishable))
        D = f"{decision.D:.3f} vs {decision.threshold:.3f}" if decision else "-"
        print(f"bar {t:5d}: P_s {prob_negative(d):.3f}, KS {D}, forecast dY1 {dY1:+.2e}, vote {u:+d}")
        prev = d
