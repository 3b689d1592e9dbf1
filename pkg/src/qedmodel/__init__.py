"""Nonlinear equilibrium-disequilibrium asset-price model toolkit."""

from .params import MarketParams, ModelParams, Regime, RegimeKind, classify_regime, tp1

__all__ = ["MarketParams", "ModelParams", "Regime", "RegimeKind", "classify_regime", "tp1"]
__version__ = "0.1.0"
