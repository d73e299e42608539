"""Optimal CEX/DEX arbitrage against a single pool.

The external market is infinitely liquid at ``p_cex`` (Y per X).  With
``r = p_cex / p_dex`` and ``g = gamma_in * gamma_out``:

* ``r > 1/g``: X is cheap on the DEX.  The arbitrageur sells
  ``dy* = (y / gamma_in) * ((g r)**w_x - 1)`` of Y to the pool and sells the
  X received on the CEX (:attr:`Direction.BUY_X_ON_DEX`).
* ``r < g``: X is expensive on the DEX.  The arbitrageur sells
  ``dx* = (x / gamma_in) * ((g / r)**w_y - 1)`` of X to the pool
  (:attr:`Direction.BUY_Y_ON_DEX`).
* otherwise no trade is profitable.

Profits are reported in token Y.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .amm_core import FeeSchedule, PoolState, marginal_price, swap_x_for_y, swap_y_for_x


class Direction(enum.Enum):
    BUY_X_ON_DEX = "buy_x_on_dex"
    BUY_Y_ON_DEX = "buy_y_on_dex"
    NO_TRADE = "no_trade"


@dataclass(frozen=True)
class ExternalQuote:
    p_cex: float

    def __post_init__(self):
        if not (math.isfinite(self.p_cex) and self.p_cex > 0.0):
            raise ValueError(f"p_cex must be positive and finite, got {self.p_cex!r}")


@dataclass(frozen=True)
class ArbTrade:
    direction: Direction
    input_amount: float = 0.0
    output_amount: float = 0.0
    profit: float = 0.0

    @classmethod
    def none(cls) -> "ArbTrade":
        return cls(Direction.NO_TRADE)

    @property
    def is_trade(self) -> bool:
        return self.direction is not Direction.NO_TRADE


def _price(quote) -> float:
    if isinstance(quote, ExternalQuote):
        return quote.p_cex
    return ExternalQuote(float(quote)).p_cex


def no_arb_band(fees: FeeSchedule) -> tuple[float, float]:
    """Price-ratio interval ``[g, 1/g]`` inside which no arbitrage is profitable."""
    g = fees.gamma_product
    if g <= 0.0:
        raise ValueError("gamma_in * gamma_out must be positive")
    return g, 1.0 / g


def price_ratio(state: PoolState, quote) -> float:
    """``p_cex / p_dex``."""
    return _price(quote) / marginal_price(state)


def _execute(state: PoolState, direction: Direction, amount: float):
    if direction is Direction.BUY_X_ON_DEX:
        return swap_y_for_x(state, amount)
    if direction is Direction.BUY_Y_ON_DEX:
        return swap_x_for_y(state, amount)
    raise ValueError(f"cannot execute direction {direction!r}")


def arb_profit(state: PoolState, quote, direction: Direction, input_amount: float) -> float:
    """Arbitrageur profit in Y for a round trip of the given size.

    ``BUY_X_ON_DEX``: pay ``input_amount`` Y to the pool, sell the X at ``p_cex``.
    ``BUY_Y_ON_DEX``: buy ``input_amount`` X at ``p_cex``, sell it to the pool.
    """
    p_cex = _price(quote)
    if not isinstance(direction, Direction):
        raise ValueError(f"unknown direction {direction!r}")
    if not (math.isfinite(input_amount) and input_amount >= 0.0):
        raise ValueError(f"input_amount must be finite and nonnegative, got {input_amount!r}")
    if input_amount == 0.0:
        return 0.0
    if direction is Direction.NO_TRADE:
        raise ValueError("NO_TRADE requires input_amount == 0")
    swap = _execute(state, direction, input_amount)
    if direction is Direction.BUY_X_ON_DEX:
        return p_cex * swap.amount_out - input_amount
    return swap.amount_out - p_cex * input_amount


def optimal_input(ratio, gamma_in, gamma_out, weight_x, weight_y, reserve_x, reserve_y):
    """Closed-form optimal input sizes for both directions (elementwise).

    Returns ``(buy_x, buy_y, amount)`` where ``buy_x``/``buy_y`` are boolean
    masks and ``amount`` is the optimal input (Y when buying X, X when buying
    Y, zero inside the band).
    """
    ratio = np.asarray(ratio, dtype=float)
    g = gamma_in * gamma_out
    buy_x = ratio > 1.0 / g
    buy_y = ratio < g
    with np.errstate(invalid="ignore", divide="ignore"):
        dy = (reserve_y / gamma_in) * np.expm1(weight_x * np.log(g * ratio))
        dx = (reserve_x / gamma_in) * np.expm1(weight_y * np.log(g / ratio))
    amount = np.where(buy_x, dy, np.where(buy_y, dx, 0.0))
    return buy_x, buy_y, amount


def optimal_arb_trade(state: PoolState, quote) -> ArbTrade:
    """Profit-maximizing arbitrage trade; ``NO_TRADE`` on or inside the band edges."""
    p_cex = _price(quote)
    fees = state.fees
    ratio = p_cex / marginal_price(state)
    buy_x, buy_y, amount = optimal_input(
        ratio, fees.gamma_in, fees.gamma_out, state.weight_x, state.weight_y,
        state.reserve_x, state.reserve_y,
    )
    amount = float(amount)
    if not (buy_x or buy_y) or amount <= 0.0:
        return ArbTrade.none()
    direction = Direction.BUY_X_ON_DEX if buy_x else Direction.BUY_Y_ON_DEX
    swap = _execute(state, direction, amount)
    profit = arb_profit(state, p_cex, direction, amount)
    return ArbTrade(direction, amount, swap.amount_out, profit)


def execute_optimal_arb(state: PoolState, quote) -> tuple[ArbTrade, PoolState]:
    """Optimal trade together with the pool state it leaves behind."""
    trade = optimal_arb_trade(state, quote)
    if not trade.is_trade:
        return trade, state
    return trade, _execute(state, trade.direction, trade.input_amount).new_state


# -- brute-force oracle -------------------------------------------------------

_LD = np.longdouble
_INV_PHI = (np.sqrt(_LD(5)) - 1) / 2


def _profit_extended(state: PoolState, p_cex: float, direction: Direction, amounts):
    # Extended precision keeps the flat top of the profit curve resolvable.
    a = np.asarray(amounts, dtype=_LD)
    x, y = _LD(state.reserve_x), _LD(state.reserve_y)
    wx, wy = _LD(state.weight_x), _LD(state.weight_y)
    g_in, g_out = _LD(state.fees.gamma_in), _LD(state.fees.gamma_out)
    p = _LD(p_cex)
    if direction is Direction.BUY_X_ON_DEX:
        out = -x * np.expm1(-(wy / wx) * np.log1p(g_in * a / y))
        return p * g_out * out - a
    out = -y * np.expm1(-(wx / wy) * np.log1p(g_in * a / x))
    return g_out * out - p * a


def _golden_max(f, lo, hi, iterations):
    a, b = _LD(lo), _LD(hi)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iterations):
        if b - a <= _LD(1e-17) * abs(b):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return (a + b) / 2


def brute_force_optimal_trade(state: PoolState, quote, grid_points: int = 1000) -> ArbTrade:
    """Numerical maximizer of the arbitrage profit, used as a verification oracle.

    Scans a uniform grid over ``[0, reserve]`` of the input token for each
    direction, then refines around the best grid node by golden-section search
    in extended precision.  It never consults the closed form.
    """
    if grid_points < 100:
        raise ValueError("grid_points must be at least 100")
    p_cex = _price(quote)
    best = (0.0, Direction.NO_TRADE, 0.0)
    for direction, reserve in (
        (Direction.BUY_X_ON_DEX, state.reserve_y),
        (Direction.BUY_Y_ON_DEX, state.reserve_x),
    ):
        grid = np.linspace(0.0, reserve, grid_points + 1)
        values = _profit_extended(state, p_cex, direction, grid)
        i = int(np.argmax(values))
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, grid_points)]
        f = lambda a, _d=direction: _profit_extended(state, p_cex, _d, a)
        size = _golden_max(f, lo, hi, iterations=200)
        value = f(size)
        if value > best[0]:
            best = (float(value), direction, float(size))
    profit, direction, size = best
    if direction is Direction.NO_TRADE or size <= 0.0:
        return ArbTrade.none()
    swap = _execute(state, direction, size)
    return ArbTrade(direction, size, swap.amount_out, arb_profit(state, p_cex, direction, size))
