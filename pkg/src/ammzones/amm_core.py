"""Fee-aware weighted constant-product pool mechanics.

Prices are quoted as token Y per token X and every value is denominated in
token Y.  A pool holds reserves ``x`` and ``y`` with weights ``w_x + w_y = 1``
and trades along ``x**w_x * y**w_y = K``; Uniswap V2 is ``w_x = w_y = 0.5``.

Swap fees are reinvested: the trader's full gross input is added to the
reserves, the curve is evaluated with the fee-reduced input ``gamma_in * dx``
and the trader receives ``gamma_out`` of the curve output.  Both fee slices
stay in the pool, so ``K`` grows with every fee-charging trade.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import DomainError

MIN_WEIGHT = 0.01
MAX_WEIGHT = 0.99
WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class FeeSchedule:
    """Fee rates charged on the input token (``phi_in``) and output token (``phi_out``)."""

    phi_in: float = 0.0
    phi_out: float = 0.0

    def __post_init__(self):
        for name in ("phi_in", "phi_out"):
            value = getattr(self, name)
            if not (math.isfinite(value) and 0.0 <= value < 1.0):
                raise DomainError(f"{name} must lie in [0, 1), got {value!r}")

    @classmethod
    def from_gammas(cls, gamma_in: float, gamma_out: float) -> "FeeSchedule":
        return cls(phi_in=1.0 - gamma_in, phi_out=1.0 - gamma_out)

    @property
    def gamma_in(self) -> float:
        return 1.0 - self.phi_in

    @property
    def gamma_out(self) -> float:
        return 1.0 - self.phi_out

    @property
    def gamma_product(self) -> float:
        return self.gamma_in * self.gamma_out

    @property
    def is_zero(self) -> bool:
        return self.phi_in == 0.0 and self.phi_out == 0.0


@dataclass(frozen=True)
class PoolState:
    """Reserves, weights and fee schedule of a two-token pool."""

    reserve_x: float
    reserve_y: float
    weight_x: float = 0.5
    weight_y: float = 0.5
    fees: FeeSchedule = field(default_factory=FeeSchedule)

    def __post_init__(self):
        for name in ("reserve_x", "reserve_y"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0.0):
                raise DomainError(f"{name} must be finite and nonnegative, got {value!r}")
        wx, wy = self.weight_x, self.weight_y
        if not (MIN_WEIGHT <= wx <= MAX_WEIGHT and MIN_WEIGHT <= wy <= MAX_WEIGHT):
            raise DomainError(
                f"weights must lie in [{MIN_WEIGHT}, {MAX_WEIGHT}], got ({wx!r}, {wy!r})"
            )
        if abs(wx + wy - 1.0) > WEIGHT_TOL:
            raise DomainError(f"weights must sum to 1, got {wx + wy!r}")

    @classmethod
    def uniswap(cls, reserve_x, reserve_y, fees=None) -> "PoolState":
        return cls(reserve_x, reserve_y, 0.5, 0.5, fees or FeeSchedule())

    @classmethod
    def balancer(cls, reserve_x, reserve_y, weight_x, fees=None) -> "PoolState":
        return cls(reserve_x, reserve_y, weight_x, 1.0 - weight_x, fees or FeeSchedule())

    @property
    def is_equal_weight(self) -> bool:
        return self.weight_x == self.weight_y

    @property
    def invariant(self) -> float:
        """``K = x**w_x * y**w_y``."""
        return self.reserve_x**self.weight_x * self.reserve_y**self.weight_y

    def with_reserves(self, reserve_x: float, reserve_y: float) -> "PoolState":
        return replace(self, reserve_x=reserve_x, reserve_y=reserve_y)

    def with_fees(self, fees: FeeSchedule) -> "PoolState":
        return replace(self, fees=fees)

    def value(self, price: float) -> float:
        """Portfolio value of the reserves at ``price`` (Y per X)."""
        return price * self.reserve_x + self.reserve_y


@dataclass(frozen=True)
class SwapResult:
    amount_in: float
    amount_out: float
    fee_retained_x: float
    fee_retained_y: float
    new_state: PoolState


def curve_output(reserve_in, reserve_out, weight_in, weight_out, effective_in):
    """Output removed from the curve for an effective (post-fee) input.

    Solves ``(r_in + e)**w_in * (r_out - out)**w_out = r_in**w_in * r_out**w_out``.
    Works elementwise on numpy arrays.
    """
    exponent = weight_in / weight_out
    return -reserve_out * np.expm1(-exponent * np.log1p(effective_in / reserve_in))


def _require_trading(state: PoolState):
    if state.reserve_x <= 0.0 or state.reserve_y <= 0.0:
        raise DomainError("pool reserves must be strictly positive")


def _check_amount(amount_in):
    if not (isinstance(amount_in, (int, float, np.floating)) and math.isfinite(amount_in)):
        raise ValueError(f"amount_in must be a finite number, got {amount_in!r}")
    if amount_in <= 0.0:
        raise ValueError(f"amount_in must be positive, got {amount_in!r}")


def marginal_price(state: PoolState) -> float:
    """Instantaneous price ``-dy/dx = (w_x / w_y) * y / x`` in Y per X."""
    _require_trading(state)
    return (state.weight_x / state.weight_y) * state.reserve_y / state.reserve_x


def price_sensitivity(state: PoolState) -> float:
    """Derivative of the marginal price with respect to ``x`` along the invariant curve.

    Along the curve ``p`` is proportional to ``x**(-1/w_y)``, so the slope is
    ``-p / (w_y * x)``; for equal weights this is ``-2 y / x**2``.
    """
    p = marginal_price(state)
    return -p / (state.weight_y * state.reserve_x)


def swap_x_for_y(state: PoolState, amount_in: float) -> SwapResult:
    """Sell ``amount_in`` of token X to the pool for token Y."""
    _check_amount(amount_in)
    _require_trading(state)
    fees = state.fees
    dy = float(
        curve_output(
            state.reserve_x, state.reserve_y, state.weight_x, state.weight_y,
            fees.gamma_in * amount_in,
        )
    )
    out = fees.gamma_out * dy
    new_state = state.with_reserves(state.reserve_x + amount_in, state.reserve_y - out)
    return SwapResult(
        amount_in=float(amount_in),
        amount_out=out,
        fee_retained_x=fees.phi_in * amount_in,
        fee_retained_y=fees.phi_out * dy,
        new_state=new_state,
    )


def swap_y_for_x(state: PoolState, amount_in: float) -> SwapResult:
    """Sell ``amount_in`` of token Y to the pool for token X."""
    _check_amount(amount_in)
    _require_trading(state)
    fees = state.fees
    dx = float(
        curve_output(
            state.reserve_y, state.reserve_x, state.weight_y, state.weight_x,
            fees.gamma_in * amount_in,
        )
    )
    out = fees.gamma_out * dx
    new_state = state.with_reserves(state.reserve_x - out, state.reserve_y + amount_in)
    return SwapResult(
        amount_in=float(amount_in),
        amount_out=out,
        fee_retained_x=fees.phi_out * dx,
        fee_retained_y=fees.phi_in * amount_in,
        new_state=new_state,
    )


def lp_profit(state_before: PoolState, state_after: PoolState, price: float | None = None) -> float:
    """Change in LP portfolio value caused by moving from one pool state to another.

    Both the post-trade reserves and the pre-trade reserves (the buy-and-hold
    alternative) are valued at the same ``price``.  By default that is the
    post-trade marginal price of the pool, which is the valuation under which
    reinvested fees show up as impermanent gain for small trades.  Passing an
    external price gives the mark-to-market difference instead; note that at
    the CEX price a single arbitrage is zero-sum between LP and arbitrageur.
    """
    if price is None:
        price = marginal_price(state_after)
    elif not (math.isfinite(price) and price > 0.0):
        raise ValueError(f"price must be positive and finite, got {price!r}")
    dx = state_after.reserve_x - state_before.reserve_x
    dy = state_after.reserve_y - state_before.reserve_y
    return price * dx + dy
