import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from ammzones.amm_core import FeeSchedule, PoolState, marginal_price
from ammzones.arbitrage import (
    ArbTrade,
    Direction,
    ExternalQuote,
    arb_profit,
    brute_force_optimal_trade,
    execute_optimal_arb,
    no_arb_band,
    optimal_arb_trade,
    price_ratio,
)

reserves = st.floats(1e3, 1e7)
gammas = st.floats(0.99, 1.0)
ratios = st.floats(0.9, 1.1)


@st.composite
def pools(draw, weighted=False, output_fee=True):
    wx = draw(st.floats(0.2, 0.8)) if weighted else 0.5
    g2 = draw(gammas) if output_fee else 1.0
    fees = FeeSchedule.from_gammas(draw(gammas), g2)
    return PoolState(draw(reserves), draw(reserves), wx, 1.0 - wx, fees)


def quote_at(pool, ratio):
    return ratio * marginal_price(pool)


class TestNoArbBand:
    def test_zero_fee_collapses(self):
        assert no_arb_band(FeeSchedule()) == (1.0, 1.0)

    def test_reference(self, ref_fees):
        lo, hi = no_arb_band(ref_fees)
        assert lo == pytest.approx(0.997, rel=1e-15)
        assert hi == pytest.approx(1.0030090270812437, rel=1e-15)
        assert lo * hi == pytest.approx(1.0, rel=1e-15)


class TestArbProfit:
    def test_zero_input(self, ref_pool):
        assert arb_profit(ref_pool, 4.0, Direction.BUY_X_ON_DEX, 0.0) == 0.0

    def test_negative_input_rejected(self, ref_pool):
        with pytest.raises(ValueError):
            arb_profit(ref_pool, 4.0, Direction.BUY_X_ON_DEX, -1.0)

    def test_no_trade_with_amount_rejected(self, ref_pool):
        with pytest.raises(ValueError):
            arb_profit(ref_pool, 4.0, Direction.NO_TRADE, 1.0)

    def test_bad_quote(self):
        with pytest.raises(ValueError):
            ExternalQuote(0.0)

    @pytest.mark.parametrize("edge", ["lo", "hi"])
    def test_band_edge_unprofitable(self, ref_pool, ref_fees, edge):
        lo, hi = no_arb_band(ref_fees)
        ratio = lo if edge == "lo" else hi
        direction = Direction.BUY_Y_ON_DEX if edge == "lo" else Direction.BUY_X_ON_DEX
        reserve = ref_pool.reserve_x if edge == "lo" else ref_pool.reserve_y
        for frac in np.geomspace(1e-9, 1e-2, 30):
            assert arb_profit(ref_pool, quote_at(ref_pool, ratio), direction, frac * reserve) <= 1e-9

    def test_reference_optimum_beats_neighbours(self, ref_pool):
        q = quote_at(ref_pool, 1.005)
        trade = optimal_arb_trade(ref_pool, q)
        assert trade.profit > 0
        for k in (0.5, 1.5):
            assert trade.profit >= arb_profit(ref_pool, q, trade.direction, k * trade.input_amount)


class TestOptimalTrade:
    def test_reference_x_side(self, ref_pool):
        # X is overpriced on the pool: the arbitrageur sells about 992.4 X
        trade = optimal_arb_trade(ref_pool, quote_at(ref_pool, 1 / 1.005))
        assert trade.direction is Direction.BUY_Y_ON_DEX
        assert trade.input_amount == pytest.approx(992.3542176462416, rel=1e-12)
        assert trade.profit == pytest.approx(3.684836860409632, rel=1e-9)

    def test_reference_y_side(self, ref_pool):
        trade = optimal_arb_trade(ref_pool, quote_at(ref_pool, 1.005))
        assert trade.direction is Direction.BUY_X_ON_DEX
        g = 0.997
        expected = ref_pool.reserve_y / g * (math.sqrt(g * 1.005) - 1.0)
        assert trade.input_amount == pytest.approx(expected, rel=1e-12)
        assert trade.input_amount == pytest.approx(3733.0960976620163, rel=1e-12)

    @pytest.mark.parametrize("ratio", [0.997, 1.0030090270812437, 1.0, 0.999])
    def test_no_trade_inside_band(self, ref_pool, ratio):
        trade = optimal_arb_trade(ref_pool, quote_at(ref_pool, ratio))
        assert trade == ArbTrade.none()
        assert trade.input_amount == trade.output_amount == trade.profit == 0.0

    def test_balancer_matches_oracle(self):
        pool = PoolState.balancer(997348.0, 3751882.0, 0.2, FeeSchedule.from_gammas(0.997, 1.0))
        q = quote_at(pool, 1.01)
        a = optimal_arb_trade(pool, q)
        b = brute_force_optimal_trade(pool, q)
        assert a.direction is b.direction
        assert b.input_amount == pytest.approx(a.input_amount, rel=1e-6)

    def test_execute_returns_post_state(self, ref_pool):
        trade, after = execute_optimal_arb(ref_pool, quote_at(ref_pool, 1.02))
        assert after.reserve_y == pytest.approx(ref_pool.reserve_y + trade.input_amount)
        assert after.reserve_x == pytest.approx(ref_pool.reserve_x - trade.output_amount)

    def test_price_ratio(self, ref_pool):
        assert price_ratio(ref_pool, ExternalQuote(quote_at(ref_pool, 1.01))) == pytest.approx(1.01)


class TestOracle:
    def test_grid_points_minimum(self, ref_pool):
        with pytest.raises(ValueError):
            brute_force_optimal_trade(ref_pool, 4.0, grid_points=50)

    def test_no_trade_region(self, ref_pool):
        trade = brute_force_optimal_trade(ref_pool, quote_at(ref_pool, 1.001))
        assert trade.profit <= 1e-9

    @pytest.mark.parametrize("ratio", [0.9, 0.95, 1.05, 1.1])
    def test_profit_unimodal_on_grid(self, ref_pool, ratio):
        q = quote_at(ref_pool, ratio)
        trade = optimal_arb_trade(ref_pool, q)
        reserve = ref_pool.reserve_y if trade.direction is Direction.BUY_X_ON_DEX else ref_pool.reserve_x
        grid = np.linspace(reserve / 1000, reserve, 1000)
        values = np.array([arb_profit(ref_pool, q, trade.direction, a) for a in grid])
        d = np.sign(np.diff(values))
        assert np.count_nonzero(np.diff(d) != 0) <= 1


# -- properties ----------------------------------------------------------------


@given(pools(weighted=True), ratios)
def test_direction_exclusivity(pool, ratio):
    q = quote_at(pool, ratio)
    trade = optimal_arb_trade(pool, q)
    ratio = price_ratio(pool, q)
    g = pool.fees.gamma_product
    if ratio > 1 / g:
        assert trade.direction is Direction.BUY_X_ON_DEX
    elif ratio < g:
        assert trade.direction is Direction.BUY_Y_ON_DEX
    else:
        assert trade.direction is Direction.NO_TRADE
    assert trade.profit >= 0.0


@given(pools(weighted=True), ratios)
def test_first_order_optimality(pool, ratio):
    g = pool.fees.gamma_product
    assume(ratio > 1.001 / g or ratio < 0.999 * g)
    q = quote_at(pool, ratio)
    trade = optimal_arb_trade(pool, q)
    reserve = pool.reserve_y if trade.direction is Direction.BUY_X_ON_DEX else pool.reserve_x
    h = 1e-6 * reserve
    a = trade.input_amount
    f = lambda s: arb_profit(pool, q, trade.direction, s)
    slope = (f(a + h) - f(a - h)) / (2 * h)
    assert abs(slope) <= 1e-4 * abs(trade.profit) / reserve


@given(pools(weighted=True, output_fee=False), ratios)
def test_post_trade_ratio_in_band(pool, ratio):
    q = quote_at(pool, ratio)
    _, after = execute_optimal_arb(pool, q)
    lo, hi = no_arb_band(pool.fees)
    assert lo * (1 - 1e-12) <= q / marginal_price(after) <= hi * (1 + 1e-12)


@given(pools(weighted=True), ratios)
def test_post_trade_ratio_output_fee_slack(pool, ratio):
    # The retained output slice keeps the output reserve above the curve, which
    # can leave the ratio just outside the band by the factor
    # c = (r_out - dy) / (r_out - gamma_out * dy).
    q = quote_at(pool, ratio)
    trade, after = execute_optimal_arb(pool, q)
    lo, hi = no_arb_band(pool.fees)
    r = q / marginal_price(after)
    if not trade.is_trade:
        assert lo * (1 - 1e-12) <= r <= hi * (1 + 1e-12)
        return
    g_out = pool.fees.gamma_out
    dy = trade.output_amount / g_out
    if trade.direction is Direction.BUY_Y_ON_DEX:
        c = (pool.reserve_y - dy) / (pool.reserve_y - trade.output_amount)
        assert lo * c * (1 - 1e-12) <= r <= hi * (1 + 1e-12)
    else:
        c = (pool.reserve_x - dy) / (pool.reserve_x - trade.output_amount)
        assert lo * (1 - 1e-12) <= r <= hi / c * (1 + 1e-12)


@given(pools(), ratios)
def test_reciprocal_symmetry(pool, ratio):
    mirror = PoolState.uniswap(pool.reserve_y, pool.reserve_x, pool.fees)
    a = optimal_arb_trade(pool, quote_at(pool, ratio))
    b = optimal_arb_trade(mirror, quote_at(mirror, 1.0 / ratio))
    assert a.input_amount == pytest.approx(b.input_amount, rel=1e-9, abs=1e-9)
    if a.is_trade:
        assert {a.direction, b.direction} == {Direction.BUY_X_ON_DEX, Direction.BUY_Y_ON_DEX}


@given(pools(weighted=True), ratios)
def test_oracle_agreement(pool, ratio):
    g = pool.fees.gamma_product
    assume(ratio > 1.0001 / g or ratio < 0.9999 * g)
    a = optimal_arb_trade(pool, quote_at(pool, ratio))
    b = brute_force_optimal_trade(pool, quote_at(pool, ratio))
    assert b.direction is a.direction
    assert b.input_amount == pytest.approx(a.input_amount, rel=1e-6)
