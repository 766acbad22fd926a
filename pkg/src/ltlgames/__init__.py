"""Controller synthesis for LTL objectives on turn-based stochastic games."""

__version__ = "0.1.0"
