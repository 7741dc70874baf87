"""Wavelet features, online Ito models and stationary-density criteria for multi-symbol FX trading,
with a deterministic backtester and broker-statement analytics."""

__version__ = "0.1.0"

from .errors import NswError  # noqa: F401
