"""Run configuration: one TOML file addressed by flat dotted keys.

Every key is checked against a fixed table; unknown keys are errors. Block
parameters live under ``signals.<block>.<param>`` and per-symbol spreads under
``exec.spread.<symbol>``. Relative data paths resolve against the config file.
"""
from __future__ import annotations

import hashlib
import inspect
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .backtest import ExecConfig, PipelineConfig
from .errors import ConfigError
from .market_data import Combo
from .signals import REGISTRY

# key -> (section object, attribute, type)
_PIPELINE_KEYS = {
    "model.combo": ("combo", str),
    "model.p1": ("p1", int),
    "model.order_F": ("order_F", int),
    "model.order_G": ("order_G", int),
    "model.beta_rm": ("beta_rm", float),
    "model.T": ("T", int),
    "model.grid_width": ("grid_width", float),
    "model.grid_points": ("grid_points", int),
    "model.variant": ("variant", str),
    "assembly.beta_w": ("beta_w", float),
    "assembly.init_weight": ("init_weight", float),
    "assembly.compensation": ("compensation", float),
    "assembly.accuracy_window": ("accuracy_window", int),
    "assembly.coupling_window": ("coupling_window", int),
    "assembly.coupling_every": ("coupling_every", int),
    "assembly.state_machine": ("state_machine", bool),
    "portfolio.beta": ("portfolio_beta", float),
    "portfolio.bucket_seconds": ("bucket_seconds", int),
    "portfolio.n_min": ("rebalance_n_min", int),
    "portfolio.t_max": ("rebalance_t_max", int),
}
_EXEC_KEYS = {
    "exec.tp_mult": ("tp_mult", float),
    "exec.trail_mult": ("trail_mult", float),
    "exec.emergency_share": ("emergency_share", float),
    "exec.second_pos_delay": ("second_pos_delay", int),
    "exec.slow_window": ("slow_window", int),
    "exec.default_spread": ("default_spread", float),
    "exec.initial_deposit": ("initial_deposit", float),
    "exec.contract_size": ("contract_size", float),
    "exec.risk_fraction": ("risk_fraction", float),
    "exec.price_digits": ("price_digits", int),
    "exec.account_currency": ("account_currency", str),
    "assembly.s_min": ("s_min", float),
    "model.alpha": ("alpha", float),
    "signals.alpha1": ("alpha1", float),
}
_RUN_KEYS = {"data.symbols", "data.files", "data.frame", "wavelet.K", "signals.blocks",
             "run.seed", "run.out", "run.threads"}


@dataclass
class RunConfig:
    symbols: list
    files: list
    frame: int = 60
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    exec: ExecConfig = field(default_factory=ExecConfig)
    wavelet_K: int = 4
    seed: int = 0
    out: Path = Path("out")
    threads: int = 1
    source_hash: str = ""


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _coerce(key: str, value, typ):
    if typ is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {value!r}")
        return value
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{key}: expected a string, got {value!r}")
    return value


def _block_params(name: str) -> set:
    return {p for p in inspect.signature(REGISTRY[name].__init__).parameters if p != "self"}


def parse_config(text: str, base_dir: Path | str = ".") -> RunConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"config is not valid TOML: {e}") from None
    flat = _flatten(raw)
    base_dir = Path(base_dir)
    pipe = PipelineConfig()
    ex = ExecConfig()
    block_params: dict = {}
    spreads: dict = {}
    for key, value in flat.items():
        if key in _PIPELINE_KEYS:
            attr, typ = _PIPELINE_KEYS[key]
            setattr(pipe, attr, _coerce(key, value, typ))
        elif key in _EXEC_KEYS:
            attr, typ = _EXEC_KEYS[key]
            setattr(ex, attr, _coerce(key, value, typ))
        elif key.startswith("exec.spread."):
            spreads[key[len("exec.spread."):]] = _coerce(key, value, float)
        elif key.startswith("signals.") and key.count(".") == 2:
            _, blk, param = key.split(".")
            if blk not in REGISTRY:
                raise ConfigError(f"{key}: unknown signal block {blk!r}")
            if param not in _block_params(blk):
                raise ConfigError(f"{key}: block {blk!r} has no parameter {param!r}")
            block_params.setdefault(blk, {})[param] = value
        elif key not in _RUN_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
    ex.spread = spreads

    symbols = flat.get("data.symbols")
    files = flat.get("data.files")
    if not isinstance(symbols, list) or not symbols or not all(isinstance(s, str) for s in symbols):
        raise ConfigError("data.symbols must be a non-empty list of names")
    if not isinstance(files, list) or len(files) != len(symbols) or not all(isinstance(f, str) for f in files):
        raise ConfigError("data.files must list one candle file per symbol")
    blocks = flat.get("signals.blocks", [b for b, _ in pipe.blocks])
    if not isinstance(blocks, list) or not all(isinstance(b, str) for b in blocks):
        raise ConfigError("signals.blocks must be a list of block names")
    for b in blocks:
        if b not in REGISTRY:
            raise ConfigError(f"signals.blocks: unknown block {b!r}; known: {sorted(REGISTRY)}")
    for b in block_params:
        if b not in blocks:
            raise ConfigError(f"signals.{b}: parameters given for a block not listed in signals.blocks")
    pipe.blocks = [(b, dict(block_params.get(b, {}))) for b in blocks]

    frame = _coerce("data.frame", flat.get("data.frame", 60), int)
    ex.frame = frame
    cfg = RunConfig(
        symbols=list(symbols),
        files=[(base_dir / f) for f in files],
        frame=frame,
        pipeline=pipe,
        exec=ex,
        wavelet_K=_coerce("wavelet.K", flat.get("wavelet.K", 4), int),
        seed=_coerce("run.seed", flat.get("run.seed", 0), int),
        out=base_dir / _coerce("run.out", flat.get("run.out", "out"), str),
        threads=_coerce("run.threads", flat.get("run.threads", 1), int),
        source_hash=hashlib.sha256(text.encode("utf-8")).hexdigest(),
    )
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    """Raise :class:`ConfigError` naming the first parameter outside its domain."""
    ex, pipe = cfg.exec, cfg.pipeline
    if not 0.0 < ex.alpha1 < 0.5:
        raise ConfigError(f"signals.alpha1 = {ex.alpha1} must lie in (0, 0.5)")
    if not 0.0 < ex.alpha < 1.0:
        raise ConfigError(f"model.alpha = {ex.alpha} must lie in (0, 1)")
    try:
        Combo.parse(pipe.combo)
    except ValueError:
        raise ConfigError(f"model.combo: unknown combination {pipe.combo!r}") from None
    if cfg.frame < 1:
        raise ConfigError("data.frame must be positive")
    if cfg.wavelet_K < 1:
        raise ConfigError("wavelet.K must be positive")
    if cfg.threads < 1:
        raise ConfigError("run.threads must be >= 1")
    if len(set(cfg.symbols)) != len(cfg.symbols):
        raise ConfigError("data.symbols contains duplicates")
    for s in ex.spread:
        if s not in cfg.symbols:
            raise ConfigError(f"exec.spread.{s}: not a configured symbol")
    pipe.validate()
    ex.validate()
    for name, params in pipe.blocks:
        try:
            REGISTRY[name](**params)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"signals.{name}: {e}") from None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    return parse_config(text, path.parent)
