"""Impermanent-loss risk of a pool whose external price follows GBM.

Over one block the log price ratio moves by a normal step with mean
``(mu - sigma**2 / 2) dt`` and standard deviation ``sigma sqrt(dt)``.  The
probability of landing outside the gain zone ``[lo, hi]`` from a start ``s``
is ``Phi((ln lo - m) / v) + 1 - Phi((ln hi - m) / v)`` with ``m = ln s + drift``
and ``v = sigma sqrt(dt)``.

Arbitrage leaves the ratio at (or next to) a no-arbitrage band edge, so the
worst case over reachable starting points is the larger of the two band-edge
exit probabilities.  For ``mu = 0`` that is the lower edge ``g``, because the
log drift ``-sigma**2/2`` pushes toward the lower boundary.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .amm_core import FeeSchedule
from .exceptions import DomainError, InfeasibleTargetError, UnsupportedConfigurationError
from .zones import ZoneBoundaries, ig_zone_uniswap

MAX_FEE = 0.49
FEE_TOL = 1e-7


@dataclass(frozen=True)
class GbmParams:
    """Drift and volatility of the external price, with the block interval ``dt``.

    With ``dt = 1`` the rates are per block.  ``from_per_second`` converts
    per-second rates for a given block time into per-block ones.
    """

    sigma: float
    mu: float = 0.0
    dt: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma >= 0.0):
            raise ValueError(f"sigma must be finite and nonnegative, got {self.sigma!r}")
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if not math.isfinite(self.mu):
            raise ValueError(f"mu must be finite, got {self.mu!r}")

    @classmethod
    def from_per_second(cls, sigma: float, mu: float = 0.0, block_seconds: float = 12.0):
        return cls(sigma=sigma * math.sqrt(block_seconds), mu=mu * block_seconds, dt=1.0)

    @property
    def log_drift(self) -> float:
        return (self.mu - 0.5 * self.sigma**2) * self.dt

    @property
    def step_std(self) -> float:
        return self.sigma * math.sqrt(self.dt)


class FeeSide(enum.Enum):
    INPUT_ONLY = "input"
    OUTPUT_ONLY = "output"
    SYMMETRIC = "symmetric"


def fees_for_side(phi: float, side: FeeSide) -> FeeSchedule:
    if side is FeeSide.INPUT_ONLY:
        return FeeSchedule(phi, 0.0)
    if side is FeeSide.OUTPUT_ONLY:
        return FeeSchedule(0.0, phi)
    return FeeSchedule(phi, phi)


def normal_cdf(z):
    """Standard normal CDF through the complementary error function."""
    result = 0.5 * special.erfc(-np.asarray(z, dtype=float) / math.sqrt(2.0))
    return float(result) if np.ndim(result) == 0 else result


def exit_probability(params: GbmParams, lower: float, upper: float, start_ratio):
    """One-step probability of leaving ``[lower, upper]``; no domain checks."""
    m = np.log(start_ratio) + params.log_drift
    s = params.step_std
    if s == 0.0:
        inside = (m >= math.log(lower)) & (m <= math.log(upper))
        return np.where(inside, 0.0, 1.0)
    with np.errstate(divide="ignore"):
        log_lo = np.log(lower)
        log_hi = np.log(upper)
    below = normal_cdf((log_lo - m) / s)
    above = normal_cdf(-(log_hi - m) / s)
    return below + above


def pil_one_block(params: GbmParams, boundaries: ZoneBoundaries, start_ratio: float) -> float:
    """Probability that the next block's ratio leaves the gain zone."""
    lo, hi = boundaries.ig_zone
    if boundaries.is_degenerate:
        return 1.0
    if not (start_ratio > 0.0 and lo <= start_ratio <= hi):
        raise DomainError(f"start ratio {start_ratio!r} lies outside the gain zone [{lo}, {hi}]")
    return float(exit_probability(params, lo, hi, start_ratio))


def pil_upper_bound(
    params: GbmParams, fees: FeeSchedule, boundaries: ZoneBoundaries | None = None
) -> float:
    """Worst-case one-block exit probability over the no-arbitrage band edges.

    Only defined for zero drift.  ``boundaries`` defaults to the closed-form
    equal-weight zones for ``fees``; pass numeric zones for weighted pools.
    """
    if params.mu != 0.0:
        raise UnsupportedConfigurationError("the worst-case bound is only available for mu = 0")
    if boundaries is None:
        boundaries = ig_zone_uniswap(fees)
    if boundaries.is_degenerate:
        return 1.0
    return max(pil_one_block(params, boundaries, edge) for edge in boundaries.no_arb)


def expected_blocks_to_il(p_il: float) -> float:
    """Mean of the geometric distribution on ``{1, 2, ...}``; ``inf`` when ``p_il == 0``."""
    if not 0.0 <= p_il <= 1.0:
        raise ValueError(f"p_il must be a probability, got {p_il!r}")
    if p_il == 0.0:
        return math.inf
    return 1.0 / p_il


def geometric_cdf(p_il, n):
    """``P(first IL within n blocks) = 1 - (1 - p)**n``."""
    n = np.asarray(n, dtype=float)
    if np.any(n < 1):
        raise ValueError("n must be at least 1")
    if not 0.0 <= p_il <= 1.0:
        raise ValueError(f"p_il must be a probability, got {p_il!r}")
    if p_il == 1.0:
        result = np.ones_like(n)
    else:
        result = -np.expm1(n * math.log1p(-p_il))
    return float(result) if np.ndim(result) == 0 else result


def bisect_min_fee(
    exit_prob: Callable[[float], float],
    xi: float,
    lo: float = 0.0,
    hi: float = MAX_FEE,
    tol: float = FEE_TOL,
) -> float:
    """Smallest fee in ``[lo, hi]`` with ``exit_prob(fee) <= xi``, for nonincreasing ``exit_prob``."""
    if not 0.0 < xi < 1.0:
        raise ValueError(f"xi must lie in (0, 1), got {xi!r}")
    achieved = exit_prob(hi)
    if achieved > xi:
        raise InfeasibleTargetError(
            f"even fee {hi} gives IL probability {achieved:.6g} > {xi}",
            achieved=achieved,
            max_fee=hi,
        )
    if exit_prob(lo) <= xi:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if exit_prob(mid) <= xi:
            hi = mid
        else:
            lo = mid
    return hi


def min_fee_for_target(params: GbmParams, xi: float, side: FeeSide = FeeSide.INPUT_ONLY) -> float:
    """Minimum fee whose worst-case one-block IL probability is at most ``xi``."""
    if params.mu != 0.0:
        raise UnsupportedConfigurationError("minimum-fee search requires mu = 0")
    return bisect_min_fee(lambda phi: pil_upper_bound(params, fees_for_side(phi, side)), xi)
