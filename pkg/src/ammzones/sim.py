"""Seeded Monte Carlo engine for arbitraged pools under GBM prices.

Each block the CEX price takes one GBM step, the ratio ``p_cex / p_dex`` is
classified against the zone boundaries, and if it lies outside the
no-arbitrage band the optimal arbitrage is executed against the pool.

Random streams
--------------
Trajectory ``i`` of a run with master seed ``m`` draws from PCG64 seeded with
``splitmix64(m + i * 0x9E3779B97F4A7C15)``, i.e. the ``(i + 1)``-th output of
a SplitMix64 sequence started at ``m``.  Uniforms ``u = k / 2**53 + 2**-54``
(always in the open unit interval) are mapped to normals with the inverse
normal CDF.  Work is split into fixed-size chunks of trajectories, so results
do not depend on how many threads process the chunks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .amm_core import FeeSchedule, PoolState, curve_output, marginal_price
from .arbitrage import ArbTrade, Direction, optimal_input
from .gbm_risk import GbmParams, expected_blocks_to_il, pil_upper_bound
from .zones import ZoneBoundaries, ZoneLabel, zone_boundaries

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MAX_HORIZON = 1_000_000
CHUNK_SIZE = 256
WINDOW = 4096

ZONE_CODES = (ZoneLabel.NO_ARBITRAGE, ZoneLabel.IMPERMANENT_GAIN, ZoneLabel.IMPERMANENT_LOSS)
DIRECTION_CODES = (Direction.NO_TRADE, Direction.BUY_X_ON_DEX, Direction.BUY_Y_ON_DEX)
BUCKETS = ("IL-low", "IG-low", "NoArb", "IG-high", "IL-high")


def splitmix64(z: int) -> int:
    z = (z + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_seed(master_seed: int, index: int) -> int:
    """Seed of trajectory ``index``: the ``index + 1``-th SplitMix64 output from ``master_seed``."""
    return splitmix64((master_seed + index * GOLDEN_GAMMA) & MASK64)


def _generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _normals(gen: np.random.Generator, n: int) -> np.ndarray:
    return special.ndtri(gen.random(n) + 2.0**-54)


def standard_normals(seed: int, n: int) -> np.ndarray:
    """``n`` standard normal variates from the stream ``seed``."""
    return _normals(_generator(seed), n)


@dataclass(frozen=True)
class SimConfig:
    """Initial pool, price dynamics and run size.

    ``n_blocks=None`` lets :func:`first_il_distribution` pick a censoring
    horizon of ten expected blocks to IL under the worst-case bound.
    """

    pool: PoolState
    gbm: GbmParams
    n_blocks: int | None = None
    n_trajectories: int = 10_000
    master_seed: int = 0

    def __post_init__(self):
        if self.n_blocks is not None and self.n_blocks < 1:
            raise ValueError("n_blocks must be at least 1")
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be at least 1")
        if not 0 <= self.master_seed <= MASK64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class BlockLedgerEntry:
    block_index: int
    p_cex: float
    price_ratio: float
    zone: ZoneLabel
    trade: ArbTrade
    lp_trade_profit: float
    lp_profit_cum: float
    arb_profit_cum: float

    @property
    def total_profit_cum(self) -> float:
        return self.lp_profit_cum + self.arb_profit_cum


@dataclass(frozen=True)
class FirstIlReport:
    """Blocks until the first IL-zone arbitrage, one entry per trajectory.

    ``first_il_block`` counts blocks from 1; censored trajectories (no IL
    within ``horizon``) hold ``-1``.  ``cdf`` is the fraction of all
    trajectories whose first IL happened at or before each block in
    ``1..horizon``.
    """

    first_il_block: np.ndarray
    horizon: int
    cdf: np.ndarray
    estimated_p_il: float

    @property
    def censored(self) -> int:
        return int(np.count_nonzero(self.first_il_block < 0))

    @property
    def blocks(self) -> np.ndarray:
        return np.arange(1, self.horizon + 1)

    @property
    def empirical_cdf(self) -> list[tuple[int, float]]:
        return list(zip(self.blocks.tolist(), self.cdf.tolist()))


@dataclass(frozen=True)
class PoolSummary:
    trade_count: int
    arb_profit: float
    lp_profit: float
    ledger: list[BlockLedgerEntry] = field(repr=False, compare=False, default_factory=list)

    @property
    def total_profit(self) -> float:
        return self.lp_profit + self.arb_profit


@dataclass(frozen=True)
class PairedSummary:
    fee_pool: PoolSummary
    zero_pool: PoolSummary


class PoolBatch:
    """Vectorized copies of one pool, advanced block by block.

    Rows share weights but may carry their own fees and zone boundaries.
    ``step`` mutates the reserves in place and returns per-row arrays.
    """

    def __init__(self, pool: PoolState, boundaries, n_rows: int, fees=None):
        if not isinstance(boundaries, (list, tuple)):
            boundaries = [boundaries] * n_rows
        fees = list(fees) if fees is not None else [pool.fees] * n_rows
        self.wx, self.wy = pool.weight_x, pool.weight_y
        self.x = np.full(n_rows, pool.reserve_x)
        self.y = np.full(n_rows, pool.reserve_y)
        self.x0 = self.x.copy()
        self.y0 = self.y.copy()
        self.g_in = np.array([f.gamma_in for f in fees])
        self.g_out = np.array([f.gamma_out for f in fees])
        self.band_lo = np.array([b.no_arb[0] for b in boundaries])
        self.band_hi = np.array([b.no_arb[1] for b in boundaries])
        self.ig_lo = np.array([b.ig_zone[0] for b in boundaries])
        self.ig_hi = np.array([b.ig_zone[1] for b in boundaries])

    def price(self) -> np.ndarray:
        return (self.wx / self.wy) * self.y / self.x

    def step(self, p_cex: np.ndarray) -> dict[str, np.ndarray]:
        x, y = self.x, self.y
        ratio = p_cex / self.price()
        no_arb = (ratio >= self.band_lo) & (ratio <= self.band_hi)
        in_ig = (ratio >= self.ig_lo) & (ratio <= self.ig_hi)
        zone = np.where(no_arb, 0, np.where(in_ig, 1, 2))
        high = ratio > self.band_hi
        bucket = np.where(
            no_arb, 2, np.where(in_ig, np.where(high, 3, 1), np.where(high, 4, 0))
        )

        buy_x, buy_y, amount = optimal_input(
            ratio, self.g_in, self.g_out, self.wx, self.wy, x, y
        )
        trade = (buy_x | buy_y) & (amount > 0.0)
        buy_x &= trade
        buy_y &= trade
        amount = np.where(trade, amount, 0.0)
        with np.errstate(invalid="ignore"):
            x_out = self.g_out * curve_output(y, x, self.wy, self.wx, self.g_in * amount)
            y_out = self.g_out * curve_output(x, y, self.wx, self.wy, self.g_in * amount)
        out = np.where(buy_x, x_out, np.where(buy_y, y_out, 0.0))
        dx = np.where(buy_x, -out, np.where(buy_y, amount, 0.0))
        dy = np.where(buy_x, amount, np.where(buy_y, -out, 0.0))
        profit = np.where(
            buy_x, p_cex * out - amount, np.where(buy_y, out - p_cex * amount, 0.0)
        )
        x_new = x + dx
        y_new = y + dy
        post_price = (self.wx / self.wy) * y_new / x_new
        lp_trade = np.where(trade, post_price * dx + dy, 0.0)
        self.x = x_new
        self.y = y_new
        direction = np.where(buy_x, 1, np.where(buy_y, 2, 0))
        return {
            "ratio": ratio,
            "zone": zone,
            "bucket": bucket,
            "direction": direction,
            "amount_in": amount,
            "amount_out": out,
            "arb_profit": profit,
            "lp_trade_profit": lp_trade,
            # trade valued at the CEX price; always equals -arb_profit
            "lp_trade_mtm": p_cex * dx + dy,
        }

    def mark_to_market(self, p_cex: np.ndarray) -> np.ndarray:
        """Pool value minus hold value of the initial reserves, at ``p_cex``."""
        return p_cex * (self.x - self.x0) + (self.y - self.y0)


def gbm_path(gbm: GbmParams, n_blocks: int, seed: int, p0: float = 1.0) -> np.ndarray:
    """Prices ``p_0 .. p_n`` with ``p_{k+1} = p_k exp((mu - sigma^2/2) dt + sigma sqrt(dt) Z_k)``."""
    z = standard_normals(seed, n_blocks)
    factors = np.exp(gbm.log_drift + gbm.step_std * z)
    return p0 * np.concatenate(([1.0], np.cumprod(factors)))


def _run_rows(pool, boundaries_list, fees_list, path):
    """Run one trajectory for several pool variants on the same price path."""
    batch = PoolBatch(pool, list(boundaries_list), len(fees_list), fees_list)
    n_rows = len(fees_list)
    ledgers: list[list[BlockLedgerEntry]] = [[] for _ in range(n_rows)]
    buckets = np.zeros((n_rows, len(BUCKETS)), dtype=np.int64)
    lp_cum = np.zeros(n_rows)
    arb_cum = np.zeros(n_rows)
    p_prev = path[0]
    rows = np.arange(n_rows)
    for k in range(len(path) - 1):
        p = path[k + 1]
        # revaluation of the inventory gap, then the trade itself
        lp_cum += (p - p_prev) * (batch.x - batch.x0)
        res = batch.step(np.full(n_rows, p))
        lp_cum += res["lp_trade_mtm"]
        arb_cum += res["arb_profit"]
        buckets[rows, res["bucket"]] += 1
        for i in range(n_rows):
            d = DIRECTION_CODES[res["direction"][i]]
            trade = (
                ArbTrade(d, float(res["amount_in"][i]), float(res["amount_out"][i]),
                         float(res["arb_profit"][i]))
                if d is not Direction.NO_TRADE
                else ArbTrade.none()
            )
            ledgers[i].append(
                BlockLedgerEntry(
                    block_index=k,
                    p_cex=float(p),
                    price_ratio=float(res["ratio"][i]),
                    zone=ZONE_CODES[res["zone"][i]],
                    trade=trade,
                    lp_trade_profit=float(res["lp_trade_profit"][i]),
                    lp_profit_cum=float(lp_cum[i]),
                    arb_profit_cum=float(arb_cum[i]),
                )
            )
        p_prev = p
    return ledgers, buckets, batch


def _n_blocks(config: SimConfig, boundaries: ZoneBoundaries) -> int:
    return config.n_blocks if config.n_blocks is not None else default_horizon(config.gbm, boundaries)


def run_trajectory(
    config: SimConfig, stream_seed: int, boundaries: ZoneBoundaries | None = None
) -> list[BlockLedgerEntry]:
    """Per-block ledger of one trajectory; block indices start at 0."""
    boundaries = boundaries or zone_boundaries(config.pool)
    n_blocks = _n_blocks(config, boundaries)
    path = gbm_path(config.gbm, n_blocks, stream_seed, marginal_price(config.pool))
    ledgers, _, _ = _run_rows(config.pool, [boundaries], [config.pool.fees], path)
    return ledgers[0]


def zone_histogram(ledger: list[BlockLedgerEntry], boundaries: ZoneBoundaries) -> dict[str, int]:
    """Block counts per ``IL-low, IG-low, NoArb, IG-high, IL-high`` bucket."""
    counts = dict.fromkeys(BUCKETS, 0)
    for entry in ledger:
        high = entry.price_ratio > boundaries.no_arb[1]
        if entry.zone is ZoneLabel.NO_ARBITRAGE:
            counts["NoArb"] += 1
        elif entry.zone is ZoneLabel.IMPERMANENT_GAIN:
            counts["IG-high" if high else "IG-low"] += 1
        else:
            counts["IL-high" if high else "IL-low"] += 1
    return counts


def summarize(ledger: list[BlockLedgerEntry]) -> PoolSummary:
    last = ledger[-1]
    return PoolSummary(
        trade_count=sum(1 for e in ledger if e.trade.is_trade),
        arb_profit=last.arb_profit_cum,
        lp_profit=last.lp_profit_cum,
        ledger=ledger,
    )


def compare_fee_vs_zero(
    config: SimConfig, fee_pool_fees: FeeSchedule, stream_seed: int
) -> PairedSummary:
    """Fee pool and zero-fee twin driven by the identical price path."""
    zero = FeeSchedule()
    fee_pool = config.pool.with_fees(fee_pool_fees)
    zero_pool = config.pool.with_fees(zero)
    b_fee = zone_boundaries(fee_pool)
    b_zero = zone_boundaries(zero_pool)
    n_blocks = config.n_blocks if config.n_blocks is not None else 10_000
    path = gbm_path(config.gbm, n_blocks, stream_seed, marginal_price(config.pool))
    ledgers, _, _ = _run_rows(config.pool, [b_fee, b_zero], [fee_pool_fees, zero], path)
    return PairedSummary(summarize(ledgers[0]), summarize(ledgers[1]))


def default_horizon(gbm: GbmParams, boundaries: ZoneBoundaries) -> int:
    """Ten expected blocks to IL under the worst-case bound, capped at ``MAX_HORIZON``."""
    if boundaries.is_degenerate:
        return 10
    bound = pil_upper_bound(GbmParams(gbm.sigma, 0.0, gbm.dt), FeeSchedule(), boundaries)
    blocks = 10.0 * expected_blocks_to_il(bound)
    return int(min(MAX_HORIZON, math.ceil(blocks))) if math.isfinite(blocks) else MAX_HORIZON


def _first_il_chunk(config: SimConfig, boundaries, indices, horizon) -> np.ndarray:
    n = len(indices)
    gens = [_generator(stream_seed(config.master_seed, int(i))) for i in indices]
    batch = PoolBatch(config.pool, boundaries, n)
    p = np.full(n, marginal_price(config.pool))
    first = np.full(n, -1, dtype=np.int64)
    drift, scale = config.gbm.log_drift, config.gbm.step_std
    block = 0
    while block < horizon:
        width = min(WINDOW, horizon - block)
        factors = np.exp(drift + scale * np.stack([_normals(g, width) for g in gens]))
        for j in range(width):
            p = p * factors[:, j]
            res = batch.step(p)
            hit = (res["zone"] == 2) & (first < 0)
            first[hit] = block + j + 1
        block += width
        if np.all(first >= 0):
            break
    return first


def first_il_distribution(
    config: SimConfig,
    boundaries: ZoneBoundaries | None = None,
    n_jobs: int = 1,
    chunk_size: int = CHUNK_SIZE,
) -> FirstIlReport:
    """Distribution of the first IL-zone arbitrage over independent trajectories."""
    boundaries = boundaries or zone_boundaries(config.pool)
    horizon = _n_blocks(config, boundaries)
    starts = range(0, config.n_trajectories, chunk_size)
    chunks = [np.arange(s, min(s + chunk_size, config.n_trajectories)) for s in starts]
    work = lambda idx: _first_il_chunk(config, boundaries, idx, horizon)
    if n_jobs == 1:
        parts = [work(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(work, chunks))
    first = np.concatenate(parts)
    hits = first[first > 0]
    counts = np.bincount(hits, minlength=horizon + 1)[1:]
    cdf = np.cumsum(counts) / len(first)
    exposure = hits.sum() + horizon * np.count_nonzero(first < 0)
    p_hat = len(hits) / exposure if exposure > 0 else 0.0
    return FirstIlReport(first, horizon, cdf, float(p_hat))


def exit_frequency(boundaries: ZoneBoundaries, gbm: GbmParams, start_ratio: float, z: np.ndarray):
    """Fraction of the one-step moves driven by normals ``z`` that leave the gain zone."""
    lo, hi = boundaries.ig_zone
    end = math.log(start_ratio) + gbm.log_drift + gbm.step_std * z
    with np.errstate(divide="ignore"):
        outside = (end < np.log(lo)) | (end > np.log(hi))
    return float(np.count_nonzero(outside)) / len(z)


def estimate_pil_mc(
    boundaries: ZoneBoundaries, gbm: GbmParams, start_ratio: float, n_draws: int, seed: int
) -> tuple[float, float]:
    """Monte Carlo one-block exit probability and its binomial standard error."""
    if n_draws < 10_000:
        raise ValueError("n_draws must be at least 10000")
    p = exit_frequency(boundaries, gbm, start_ratio, standard_normals(seed, n_draws))
    return p, math.sqrt(p * (1.0 - p) / n_draws)
