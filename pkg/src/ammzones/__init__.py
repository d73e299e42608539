"""Arbitrage zones, impermanent gain/loss and fee risk for constant-product pools."""

__version__ = "0.1.0"

from .amm_core import FeeSchedule, PoolState, SwapResult, lp_profit, marginal_price
from .arbitrage import ArbTrade, Direction, ExternalQuote, execute_optimal_arb, optimal_arb_trade
from .exceptions import (
    AmmZonesError,
    DomainError,
    InfeasibleTargetError,
    NoCrossingError,
    UnsupportedConfigurationError,
)
from .gbm_risk import FeeSide, GbmParams, min_fee_for_target, pil_one_block, pil_upper_bound
from .zones import ZoneBoundaries, ZoneLabel, classify_ratio, zone_boundaries

__all__ = [
    "AmmZonesError",
    "ArbTrade",
    "Direction",
    "DomainError",
    "ExternalQuote",
    "FeeSchedule",
    "FeeSide",
    "GbmParams",
    "InfeasibleTargetError",
    "NoCrossingError",
    "PoolState",
    "SwapResult",
    "UnsupportedConfigurationError",
    "ZoneBoundaries",
    "ZoneLabel",
    "classify_ratio",
    "execute_optimal_arb",
    "lp_profit",
    "marginal_price",
    "min_fee_for_target",
    "optimal_arb_trade",
    "pil_one_block",
    "pil_upper_bound",
    "zone_boundaries",
]
