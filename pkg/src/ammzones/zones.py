"""LP gain thresholds and the three-zone split of the price-ratio axis.

For a price ratio ``r = p_cex / p_dex`` the axis splits into

* the no-arbitrage band ``[g, 1/g]`` with ``g = gamma_in * gamma_out``,
* the impermanent-gain zone: outside the band, but the optimal arbitrage is
  small enough that reinvested fees outweigh the divergence loss,
* the impermanent-loss zone: everything else.

For equal weights the gain zone is ``[1/tau, tau]`` with
``tau = gamma_out (2 - gamma_in)**2 / (gamma_in (2 gamma_out - 1)**2)``.
Weighted pools are handled by locating the LP-profit zero crossing numerically.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .amm_core import FeeSchedule, PoolState, lp_profit, marginal_price, price_sensitivity
from .arbitrage import execute_optimal_arb, no_arb_band
from .exceptions import DomainError, NoCrossingError

LOG_TOL = 1e-12
SEARCH_SPAN = 10.0


class ZoneLabel(enum.Enum):
    NO_ARBITRAGE = "no_arbitrage"
    IMPERMANENT_GAIN = "impermanent_gain"
    IMPERMANENT_LOSS = "impermanent_loss"


@dataclass(frozen=True)
class ZoneBoundaries:
    """Zone edges in price-ratio space plus the LP volume thresholds.

    ``tau`` is the upper gain-zone edge.  For equal weights the lower edge is
    exactly ``1 / tau``; for weighted pools it is stored separately in
    ``ig_zone``.  Thresholds are ``None`` when no reserves were supplied.
    """

    no_arb: tuple[float, float]
    ig_zone: tuple[float, float]
    tau: float
    lp_threshold_x: float | None = None
    lp_threshold_y: float | None = None
    method: str = "closed-form"

    @property
    def is_degenerate(self) -> bool:
        return self.ig_zone[0] == self.ig_zone[1]

    def contains(self, ratio: float) -> bool:
        return self.ig_zone[0] <= ratio <= self.ig_zone[1]


def _check_output_fee(fees: FeeSchedule):
    if 2.0 * fees.gamma_out - 1.0 <= 0.0:
        raise DomainError(f"output fee must be below 0.5, got {fees.phi_out!r}")


def _threshold_fraction(fees: FeeSchedule) -> float:
    _check_output_fee(fees)
    f1, f2 = fees.phi_in, fees.phi_out
    # written in the fees to avoid cancellation in 1 - g1 g2 for tiny fees
    return (f1 + f2 - f1 * f2) / ((1.0 - f1) * (1.0 - 2.0 * f2))


def lp_threshold_uniswap(state: PoolState) -> tuple[float, float]:
    """Largest trade sizes ``(dx, dy)`` for which the LP still gains (equal weights)."""
    if not state.is_equal_weight:
        raise DomainError("closed-form thresholds require equal weights")
    frac = _threshold_fraction(state.fees)
    return state.reserve_x * frac, state.reserve_y * frac


def lp_threshold_general(state: PoolState) -> float:
    """Small-fee approximation ``2 (phi_in + phi_out) p / |dp/dx|`` of the X threshold."""
    fees = state.fees
    p = marginal_price(state)
    slope = abs(price_sensitivity(state))
    return 2.0 * (fees.phi_in + fees.phi_out) * p / slope


def uniswap_tau(fees: FeeSchedule) -> float:
    _check_output_fee(fees)
    g1, g2 = fees.gamma_in, fees.gamma_out
    return g2 * (2.0 - g1) ** 2 / (g1 * (2.0 * g2 - 1.0) ** 2)


def ig_zone_uniswap(fees: FeeSchedule, pool: PoolState | None = None) -> ZoneBoundaries:
    """Closed-form zones for an equal-weight pool."""
    tau = uniswap_tau(fees)
    thresholds = (None, None)
    if pool is not None:
        thresholds = lp_threshold_uniswap(pool.with_fees(fees))
    return ZoneBoundaries(
        no_arb=no_arb_band(fees),
        ig_zone=(1.0 / tau, tau),
        tau=tau,
        lp_threshold_x=thresholds[0],
        lp_threshold_y=thresholds[1],
        method="closed-form",
    )


def lp_profit_after_arb(state: PoolState, ratio: float) -> float:
    """LP profit of the optimal arbitrage when the CEX sits at ``ratio * p_dex``."""
    p_cex = ratio * marginal_price(state)
    _, after = execute_optimal_arb(state, p_cex)
    return lp_profit(state, after)


def _bisect_log(f, lo, hi, tol=LOG_TOL):
    # Invariant: f(lo) > 0 >= f(hi) in the orientation supplied by the caller.
    while abs(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _crossing(state: PoolState, log_edge: float, sign: float) -> float:
    f = lambda u: lp_profit_after_arb(state, math.exp(u))
    far = log_edge + sign * SEARCH_SPAN
    if f(far) > 0.0:
        side = "upper" if sign > 0 else "lower"
        raise NoCrossingError(
            f"LP profit stays positive up to ratio {math.exp(far):.6g} on the {side} side",
            side=side,
            search_limit=math.exp(far),
        )
    # Just past the edge the trade is infinitesimal and the LP gains; start a
    # hair outside so the optimizer actually trades.
    near = log_edge + sign * 1e-15
    return math.exp(_bisect_log(f, near, far))


def ig_zone_numeric(state: PoolState) -> ZoneBoundaries:
    """Gain-zone edges located by bisection on ``log r`` of the LP-profit sign change."""
    fees = state.fees
    band = no_arb_band(fees)
    if fees.is_zero:
        return ZoneBoundaries(band, (1.0, 1.0), 1.0, 0.0, 0.0, method="numeric")
    upper = _crossing(state, math.log(band[1]), +1.0)
    lower = _crossing(state, math.log(band[0]), -1.0)
    thresholds = (None, None)
    if state.is_equal_weight:
        thresholds = lp_threshold_uniswap(state)
    return ZoneBoundaries(
        no_arb=band,
        ig_zone=(lower, upper),
        tau=upper,
        lp_threshold_x=thresholds[0],
        lp_threshold_y=thresholds[1],
        method="numeric",
    )


def zone_boundaries(state: PoolState) -> ZoneBoundaries:
    """Closed form for equal weights, numeric otherwise."""
    if state.is_equal_weight:
        return ig_zone_uniswap(state.fees, state)
    return ig_zone_numeric(state)


def classify_ratio(boundaries: ZoneBoundaries, ratio: float) -> ZoneLabel:
    if not ratio > 0.0:
        raise ValueError(f"ratio must be positive, got {ratio!r}")
    lo, hi = boundaries.no_arb
    if lo <= ratio <= hi:
        return ZoneLabel.NO_ARBITRAGE
    if boundaries.contains(ratio):
        return ZoneLabel.IMPERMANENT_GAIN
    return ZoneLabel.IMPERMANENT_LOSS
