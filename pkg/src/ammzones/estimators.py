"""scikit-learn style estimators over the analytic core.

``GbmEstimator`` fits per-block drift and volatility to a timestamped price
series.  ``ZoneClassifier`` labels price ratios by zone, and ``ILRiskModel``
combines the two into per-start IL probabilities.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .amm_core import FeeSchedule, PoolState
from .gbm_risk import (
    FeeSide,
    GbmParams,
    exit_probability,
    expected_blocks_to_il,
    min_fee_for_target,
    pil_upper_bound,
)
from .zones import ZoneLabel, classify_ratio, zone_boundaries


def estimate_gbm(timestamps, prices, block_seconds: float = 12.0) -> tuple[GbmParams, int]:
    """Per-block GBM parameters from prices sampled at possibly irregular times.

    Log returns ``r_i`` over gaps ``d_i`` (seconds) give the drift rate
    ``m = sum(r) / sum(d)`` and the variance rate
    ``sum((r_i - m d_i)**2 / d_i) / (n - 1)``; both are rescaled to one block.
    Drift is reported as ``mu = m + sigma**2 / 2`` to match the GBM
    convention.  Returns the parameters and the number of returns used.
    """
    t = np.asarray(timestamps, dtype=float)
    p = np.asarray(prices, dtype=float)
    if t.ndim != 1 or t.shape != p.shape:
        raise ValueError("timestamps and prices must be 1-d arrays of equal length")
    if t.size < 3:
        raise ValueError("need at least 3 observations")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(p))):
        raise ValueError("timestamps and prices must be finite")
    if np.any(p <= 0.0):
        raise ValueError("prices must be positive")
    d = np.diff(t)
    if np.any(d <= 0.0):
        raise ValueError("timestamps must be strictly increasing")
    if not block_seconds > 0.0:
        raise ValueError("block_seconds must be positive")
    r = np.diff(np.log(p))
    m = r.sum() / d.sum()
    var_rate = np.sum((r - m * d) ** 2 / d) / (r.size - 1)
    sigma = math.sqrt(var_rate * block_seconds)
    mu = m * block_seconds + 0.5 * sigma**2
    return GbmParams(sigma=sigma, mu=float(mu), dt=1.0), int(r.size)


def _split_series(X, y):
    if y is None:
        arr = check_array(X, ensure_min_samples=3)
        if arr.shape[1] != 2:
            raise ValueError("X must have columns (timestamp, price) when y is omitted")
        return arr[:, 0], arr[:, 1]
    t = check_array(X, ensure_2d=False, ensure_min_samples=3)
    return np.ravel(t), np.ravel(check_array(y, ensure_2d=False, ensure_min_samples=3))


class GbmEstimator(BaseEstimator):
    """Fit ``mu_``/``sigma_`` (per block) to ``fit(timestamps, prices)`` or ``fit(X)`` with ``X = [[t, p], ...]``."""

    def __init__(self, block_seconds: float = 12.0):
        self.block_seconds = block_seconds

    def fit(self, X, y=None):
        t, p = _split_series(X, y)
        self.params_, self.n_returns_ = estimate_gbm(t, p, self.block_seconds)
        self.mu_ = self.params_.mu
        self.sigma_ = self.params_.sigma
        return self


class ZoneClassifier(ClassifierMixin, BaseEstimator):
    """Labels price ratios ``p_cex / p_dex`` as no-arbitrage, IG or IL.

    ``fit`` ignores its data and computes the zone boundaries from the pool
    parameters; ratios alone determine the label because the boundaries do
    not depend on reserves.
    """

    def __init__(self, gamma1=0.997, gamma2=1.0, weight_x=0.5, reserve_x=1.0, reserve_y=1.0):
        self.gamma1 = gamma1
        self.gamma2 = gamma2
        self.weight_x = weight_x
        self.reserve_x = reserve_x
        self.reserve_y = reserve_y

    def _pool(self) -> PoolState:
        fees = FeeSchedule.from_gammas(self.gamma1, self.gamma2)
        return PoolState(self.reserve_x, self.reserve_y, self.weight_x, 1.0 - self.weight_x, fees)

    def fit(self, X=None, y=None):
        self.pool_ = self._pool()
        self.boundaries_ = zone_boundaries(self.pool_)
        self.classes_ = np.array([label.value for label in ZoneLabel])
        return self

    def predict(self, X):
        check_is_fitted(self, "boundaries_")
        ratios = np.ravel(check_array(X, ensure_2d=False))
        return np.array([classify_ratio(self.boundaries_, float(r)).value for r in ratios])


class ILRiskModel(BaseEstimator):
    """One-block IL probability from a fitted price process.

    ``fit`` estimates GBM parameters from a price series; ``predict_proba``
    takes start ratios and returns ``[P(stay in the gain zone), P(leave)]``
    per row.  ``upper_bound_`` is the worst case over the band edges, using a
    zero-drift process with the fitted volatility.
    """

    def __init__(self, gamma1=0.997, gamma2=1.0, weight_x=0.5, block_seconds=12.0):
        self.gamma1 = gamma1
        self.gamma2 = gamma2
        self.weight_x = weight_x
        self.block_seconds = block_seconds

    def fit(self, X, y=None):
        self.gbm_ = GbmEstimator(self.block_seconds).fit(X, y).params_
        zones = ZoneClassifier(self.gamma1, self.gamma2, self.weight_x).fit()
        self.boundaries_ = zones.boundaries_
        self.classes_ = np.array([0, 1])
        fees = zones.pool_.fees
        self.upper_bound_ = pil_upper_bound(GbmParams(self.gbm_.sigma), fees, self.boundaries_)
        self.expected_blocks_ = expected_blocks_to_il(self.upper_bound_)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "gbm_")
        starts = np.ravel(check_array(X, ensure_2d=False))
        lo, hi = self.boundaries_.ig_zone
        if np.any((starts < lo) | (starts > hi)):
            raise ValueError(f"start ratios must lie in the gain zone [{lo}, {hi}]")
        if self.boundaries_.is_degenerate:
            p = np.ones_like(starts)
        else:
            p = np.asarray(exit_probability(self.gbm_, lo, hi, starts), dtype=float)
        return np.column_stack([1.0 - p, p])

    def min_fee(self, xi: float, side: FeeSide = FeeSide.INPUT_ONLY) -> float:
        check_is_fitted(self, "gbm_")
        return min_fee_for_target(GbmParams(self.gbm_.sigma), xi, side)
