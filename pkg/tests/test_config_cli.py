import json
from pathlib import Path

import numpy as np
import pytest

from nswtrade.chaos import iterate_map
from nswtrade.cli import main
from nswtrade.config import load_config, parse_config
from nswtrade.errors import ConfigError
from nswtrade.market_data import BarSeries, random_walk_bars, write_candles

BASE = """
[data]
symbols = ["eurusd", "gbpusd"]
files = ["eurusd.csv", "gbpusd.csv"]
frame = 60

[model]
p1 = 5
alpha = 0.15

[signals]
alpha1 = 0.15
blocks = ["dynamic", "macd", "bollinger", "rsi"]

[signals.macd]
fast = 12

[assembly]
state_machine = false

[exec]
second_pos_delay = 10
slow_window = 60

[exec.spread]
eurusd = 0.0002

[run]
seed = 3
out = "out"
"""


@pytest.fixture
def workdir(tmp_path):
    write_candles(random_walk_bars("eurusd", 800, seed=1), tmp_path / "eurusd.csv")
    write_candles(random_walk_bars("gbpusd", 800, seed=2, start=1.6), tmp_path / "gbpusd.csv")
    (tmp_path / "run.toml").write_text(BASE, encoding="utf-8")
    return tmp_path


def series_file(path, values):
    t = 1313020800 + 60 * np.arange(len(values))
    v = np.asarray(values, float)
    write_candles(BarSeries("x", 60, t, v, v, v, v, np.ones(len(v))), path)
    return path


def test_parse_config(workdir):
    cfg = load_config(workdir / "run.toml")
    assert cfg.symbols == ["eurusd", "gbpusd"] and cfg.files[0] == workdir / "eurusd.csv"
    assert cfg.pipeline.p1 == 5 and cfg.exec.alpha == 0.15 and cfg.exec.alpha1 == 0.15
    assert cfg.pipeline.blocks[1] == ("macd", {"fast": 12})
    assert cfg.exec.spread == {"eurusd": 0.0002} and cfg.seed == 3
    assert not cfg.pipeline.state_machine and len(cfg.source_hash) == 64


@pytest.mark.parametrize("edit, field", [
    (("alpha1 = 0.15", "alpha1 = 0.7"), "signals.alpha1"),
    (("alpha = 0.15", "alpha = 1.5"), "model.alpha"),
    (("p1 = 5", "p1 = 5\nbogus = 1"), "model.bogus"),
    (("fast = 12", "speed = 12"), "speed"),
    (("p1 = 5", "p1 = 'five'"), "model.p1"),
    (('eurusd = 0.0002', 'usdchf = 0.0002'), "exec.spread.usdchf"),
])
def test_config_errors_name_the_field(workdir, edit, field):
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        parse_config(BASE.replace(*edit), workdir)


def test_config_not_toml(workdir):
    with pytest.raises(ConfigError):
        parse_config("[data\n", workdir)


def test_backtest_command(workdir, capsys):
    out = workdir / "o1"
    assert main(["backtest", "--config", str(workdir / "run.toml"), "--out", str(out)]) == 0
    names = {p.name for p in out.iterdir()}
    assert {"statement.txt", "equity.csv", "summary.txt", "table1.csv", "manifest.json"} <= names
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 3 and set(man["inputs"]) == {"eurusd", "gbpusd"}
    assert "warning" in capsys.readouterr().err
    # rerun with four threads reproduces every output byte for byte
    out2 = workdir / "o2"
    assert main(["backtest", "--config", str(workdir / "run.toml"), "--out", str(out2), "--threads", "4"]) == 0
    for name in ("statement.txt", "equity.csv", "allocations.csv", "summary.txt", "table1.csv"):
        assert (out / name).read_bytes() == (out2 / name).read_bytes()
    assert json.loads((out2 / "manifest.json").read_text())["outputs"] == man["outputs"]


def test_backtest_exit_codes(workdir, capsys):
    cfg = workdir / "bad.toml"
    cfg.write_text(BASE.replace("alpha1 = 0.15", "alpha1 = 0.7"), encoding="utf-8")
    assert main(["backtest", "--config", str(cfg)]) == 1
    assert "signals.alpha1" in capsys.readouterr().err
    (workdir / "gbpusd.csv").unlink()
    assert main(["backtest", "--config", str(workdir / "run.toml")]) == 2
    assert "gbpusd.csv" in capsys.readouterr().err
    assert main(["backtest"]) == 1
    assert main(["backtest", "--config", str(workdir / "missing.toml")]) == 1


def test_analyze_statement_command(statement_path, tmp_path, capsys):
    assert main(["analyze-statement", "--statement", str(statement_path)]) == 0
    assert "Closed Trade P/L: 7 220.22" in capsys.readouterr().out
    empty = tmp_path / "empty.txt"
    empty.write_text("", encoding="utf-8")
    assert main(["analyze-statement", "--statement", str(empty)]) == 2
    dep = tmp_path / "dep.txt"
    dep.write_text("Closed Transactions:\n128121926\t2011.08.10 16:34\tbalance\tDeposit\t5 000.00\n",
                   encoding="utf-8")
    assert main(["analyze-statement", "--statement", str(dep)]) == 0
    assert "Total Trades: 0" in capsys.readouterr().out


def test_analyze_statement_period(statement_path, capsys):
    assert main(["analyze-statement", "--statement", str(statement_path), "--start", "2011-08-19",
                 "--end", "2011-09-26"]) == 0
    assert "2011-08-19..2011-09-26" in capsys.readouterr().out


def test_chaos_screen_command(tmp_path, capsys):
    logi = series_file(tmp_path / "logistic.csv", iterate_map(3.618, 0.3, 1500))
    assert main(["chaos-screen", "--candles", str(logi), "--qmax", "3"]) == 0
    assert capsys.readouterr().out.strip().endswith("chaotic-preconditions")
    noise = series_file(tmp_path / "noise.csv", 5 + np.random.default_rng(0).normal(size=1500))
    assert main(["chaos-screen", "--candles", str(noise)]) == 0
    assert capsys.readouterr().out.strip().endswith("stochastic")
    assert main(["chaos-screen", "--candles", str(noise), "--qmax", "6"]) == 1
    assert main(["chaos-screen", "--candles", str(tmp_path / "none.csv")]) == 2


def test_dump_wavelet_command(tmp_path, capsys):
    f = series_file(tmp_path / "s.csv", np.linspace(1, 2, 64))
    out = tmp_path / "w.csv"
    assert main(["dump-wavelet", "--candles", str(f), "--levels", "3", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0]
    assert main(["dump-wavelet", "--candles", str(f), "--levels", "0"]) == 1


def test_unknown_command():
    assert main(["frobnicate"]) == 1
