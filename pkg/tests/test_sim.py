import math

import numpy as np
import pytest
from scipy import stats

from ammzones.amm_core import FeeSchedule, PoolState
from ammzones.arbitrage import Direction
from ammzones.gbm_risk import GbmParams, expected_blocks_to_il, pil_upper_bound
from ammzones.sim import (
    BUCKETS,
    SimConfig,
    compare_fee_vs_zero,
    default_horizon,
    estimate_pil_mc,
    first_il_distribution,
    gbm_path,
    run_trajectory,
    splitmix64,
    standard_normals,
    stream_seed,
    zone_histogram,
)
from ammzones.zones import ZoneBoundaries, ZoneLabel, ig_zone_uniswap, zone_boundaries

REF = GbmParams(0.0027)


@pytest.fixture(scope="module")
def ref_report():
    pool = PoolState.uniswap(997348.0, 3751882.0, FeeSchedule.from_gammas(0.997, 1.0))
    return first_il_distribution(SimConfig(pool, REF, None, 10_000, master_seed=42))


def final_reserves(pool, ledger):
    x, y = pool.reserve_x, pool.reserve_y
    for e in ledger:
        t = e.trade
        if t.direction is Direction.BUY_X_ON_DEX:
            x, y = x - t.output_amount, y + t.input_amount
        elif t.direction is Direction.BUY_Y_ON_DEX:
            x, y = x + t.input_amount, y - t.output_amount
    return x, y


class TestStreams:
    def test_splitmix_reference(self):
        # reference SplitMix64 outputs for state 0
        assert splitmix64(0) == 0xE220A8397B1DCDAF
        assert stream_seed(0, 0) == 0xE220A8397B1DCDAF
        assert stream_seed(0, 1) == 0x6E789E6AA1B965F4
        assert stream_seed(0, 2) == 0x06C45D188009454F

    def test_frozen_normals(self):
        z = standard_normals(7, 3)
        assert z == pytest.approx([0.31889114, 1.26583434, 0.75770331], abs=1e-8)

    def test_normals_distribution(self):
        z = standard_normals(3, 200_000)
        assert abs(z.mean()) < 3 / math.sqrt(z.size)
        assert z.std() == pytest.approx(1.0, abs=0.01)
        assert np.all(np.isfinite(z))


class TestGbmPath:
    def test_constant_without_volatility(self):
        path = gbm_path(GbmParams(0.0), 50, 1, p0=3.0)
        assert np.all(path == 3.0)
        assert path.size == 51

    def test_deterministic(self):
        a = gbm_path(REF, 100, 99)
        b = gbm_path(REF, 100, 99)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, gbm_path(REF, 100, 98))

    def test_log_moment(self):
        g = GbmParams(0.01, 0.002)
        n = 20
        finals = np.array([math.log(gbm_path(g, n, stream_seed(5, i))[-1]) for i in range(10_000)])
        expected = (g.mu - 0.5 * g.sigma**2) * n
        se = finals.std(ddof=1) / math.sqrt(finals.size)
        assert abs(finals.mean() - expected) <= 3 * se


class TestConfig:
    def test_validation(self, ref_pool):
        with pytest.raises(ValueError):
            SimConfig(ref_pool, REF, n_blocks=0)
        with pytest.raises(ValueError):
            SimConfig(ref_pool, REF, n_trajectories=0)
        with pytest.raises(ValueError):
            SimConfig(ref_pool, REF, master_seed=-1)

    def test_default_horizon(self, ref_fees):
        assert default_horizon(REF, ig_zone_uniswap(ref_fees)) == 753


class TestTrajectory:
    def test_still_market(self, ref_pool):
        ledger = run_trajectory(SimConfig(ref_pool, GbmParams(0.0), 200), 1)
        assert all(e.zone is ZoneLabel.NO_ARBITRAGE for e in ledger)
        assert all(e.total_profit_cum == 0.0 for e in ledger)
        hist = zone_histogram(ledger, zone_boundaries(ref_pool))
        assert hist == {**dict.fromkeys(BUCKETS, 0), "NoArb": 200}

    def test_no_trade_in_band(self, ref_pool):
        ledger = run_trajectory(SimConfig(ref_pool, REF, 2000), 3)
        for e in ledger:
            if e.zone is ZoneLabel.NO_ARBITRAGE:
                assert not e.trade.is_trade
            else:
                assert e.trade.is_trade and e.trade.profit > 0

    def test_zero_fee_trades_lose(self, ref_pool):
        pool = ref_pool.with_fees(FeeSchedule())
        ledger = run_trajectory(SimConfig(pool, REF, 1000), 4)
        assert all(e.lp_trade_profit <= 0.0 for e in ledger)
        assert sum(e.trade.is_trade for e in ledger) == 1000

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_accounting_identity(self, ref_pool, seed):
        ledger = run_trajectory(SimConfig(ref_pool, REF, 5000), stream_seed(seed, 0))
        x, y = final_reserves(ref_pool, ledger)
        p = ledger[-1].p_cex
        expected = p * (x - ref_pool.reserve_x) + (y - ref_pool.reserve_y)
        scale = ref_pool.value(p)
        assert ledger[-1].lp_profit_cum == pytest.approx(expected, abs=1e-6 * scale)
        assert ledger[-1].arb_profit_cum == pytest.approx(sum(e.trade.profit for e in ledger))

    def test_ig_dominates_il(self, ref_pool):
        ledger = run_trajectory(SimConfig(ref_pool, REF, 10_000), stream_seed(0, 0))
        trades = [e for e in ledger if e.trade.is_trade]
        ig = sum(e.zone is ZoneLabel.IMPERMANENT_GAIN for e in trades)
        il = sum(e.zone is ZoneLabel.IMPERMANENT_LOSS for e in trades)
        assert ig > 10 * il
        hist = zone_histogram(ledger, zone_boundaries(ref_pool))
        assert hist["NoArb"] > hist["IG-low"] + hist["IG-high"] + hist["IL-low"] + hist["IL-high"]

    def test_zone_matches_trade_outcome(self, ref_pool):
        agree = total = 0
        for seed in range(5):
            ledger = run_trajectory(SimConfig(ref_pool, REF, 10_000), stream_seed(seed, 0))
            scale = ref_pool.value(ledger[0].p_cex)
            for e in ledger:
                if not e.trade.is_trade or abs(e.lp_trade_profit) <= 1e-9 * scale:
                    continue
                total += 1
                expected_gain = e.zone is ZoneLabel.IMPERMANENT_GAIN
                agree += (e.lp_trade_profit > 0) == expected_gain
        assert agree / total >= 0.999


class TestPaired:
    def test_identical_fees_identical_summaries(self, ref_pool):
        pool = ref_pool.with_fees(FeeSchedule())
        out = compare_fee_vs_zero(SimConfig(pool, REF, 500), FeeSchedule(), 9)
        assert out.fee_pool == out.zero_pool

    def test_fee_pool_direction(self, ref_pool):
        out = compare_fee_vs_zero(SimConfig(ref_pool, REF, 3000), ref_pool.fees, 12)
        assert out.zero_pool.trade_count >= out.fee_pool.trade_count
        assert out.zero_pool.lp_profit <= 0.0
        assert out.fee_pool.lp_profit >= out.zero_pool.lp_profit

    def test_shared_path(self, ref_pool):
        out = compare_fee_vs_zero(SimConfig(ref_pool, REF, 100), ref_pool.fees, 12)
        assert [e.p_cex for e in out.fee_pool.ledger] == [e.p_cex for e in out.zero_pool.ledger]


class TestFirstIl:
    def test_deterministic_across_threads(self, ref_pool):
        cfg = SimConfig(ref_pool, REF, 300, 700, master_seed=17)
        a = first_il_distribution(cfg, n_jobs=1)
        b = first_il_distribution(cfg, n_jobs=4)
        c = first_il_distribution(cfg, n_jobs=3, chunk_size=100)
        assert np.array_equal(a.first_il_block, b.first_il_block)
        assert np.array_equal(a.first_il_block, c.first_il_block)
        assert np.array_equal(a.cdf, c.cdf)
        assert a.estimated_p_il == c.estimated_p_il

    def test_zero_fee_first_block(self, ref_pool):
        cfg = SimConfig(ref_pool.with_fees(FeeSchedule()), REF, None, 500, 1)
        rep = first_il_distribution(cfg)
        assert np.all(rep.first_il_block == 1)
        assert rep.cdf[0] == 1.0

    def test_cdf_shape(self, ref_report):
        cdf = ref_report.cdf
        assert np.all(np.diff(cdf) >= 0)
        assert cdf[-1] <= 1.0
        assert ref_report.horizon == 753
        assert ref_report.censored == np.count_nonzero(ref_report.first_il_block < 0)
        assert ref_report.empirical_cdf[0] == (1, cdf[0])

    def test_mean_matches_estimated_rate(self, ref_report):
        # The per-block rate is the censoring-aware MLE, so its reciprocal
        # matches the mean first-IL block; the worst-case bound is smaller.
        b = ref_report.first_il_block
        hits = b[b > 0]
        mean = (hits.sum() + ref_report.horizon * np.count_nonzero(b < 0)) / hits.size
        assert mean == pytest.approx(expected_blocks_to_il(ref_report.estimated_p_il), rel=0.05)
        assert mean >= expected_blocks_to_il(pil_upper_bound(REF, FeeSchedule(0.003, 0.0)))

    def test_chi_square_first_50_blocks(self, ref_report):
        # Known failure: every trajectory starts at ratio 1, mid-zone, so the
        # first two blocks see far fewer IL exits than the steady rate implies.
        b = ref_report.first_il_block
        p = ref_report.estimated_p_il
        k = np.arange(1, 51)
        observed = np.append([np.count_nonzero(b == i) for i in k], np.count_nonzero((b > 50) | (b < 0)))
        expected = b.size * np.append(p * (1 - p) ** (k - 1), (1 - p) ** 50)
        stat = ((observed - expected) ** 2 / expected).sum()
        # one parameter was estimated from the data
        assert stats.chi2.sf(stat, df=observed.size - 2) > 0.01

    def test_geometric_after_warm_up(self, ref_report):
        # Conditional on surviving two blocks, the first-IL count is geometric.
        b = ref_report.first_il_block
        p = ref_report.estimated_p_il
        alive = b[(b > 2) | (b < 0)]
        k = np.arange(3, 51)
        observed = np.append([np.count_nonzero(alive == i) for i in k], np.count_nonzero((alive > 50) | (alive < 0)))
        expected = alive.size * np.append(p * (1 - p) ** (k - 3), (1 - p) ** 48)
        stat = ((observed - expected) ** 2 / expected).sum()
        assert stats.chi2.sf(stat, df=observed.size - 2) > 0.01


class TestEstimatePilMc:
    def test_unbounded_zone(self):
        b = ZoneBoundaries((1.0, 1.0), (0.0, math.inf), math.inf)
        assert estimate_pil_mc(b, REF, 1.0, 10_000, 1) == (0.0, 0.0)

    def test_minimum_draws(self, ref_fees):
        with pytest.raises(ValueError):
            estimate_pil_mc(ig_zone_uniswap(ref_fees), REF, 1.0, 100, 1)

    def test_halving_sigma(self, ref_fees):
        b = ig_zone_uniswap(ref_fees)
        hi, _ = estimate_pil_mc(b, REF, 1.0, 100_000, 3)
        lo, _ = estimate_pil_mc(b, GbmParams(REF.sigma / 2), 1.0, 100_000, 3)
        assert lo < hi
