import numpy as np
import pytest

from econsim.core import RngStream
from econsim.firms import (
    ces_demand_split,
    ces_price_index,
    capital_step,
    competitive_factor_prices,
    firm_profit,
    goods_market_price_update,
    household_firm_choice,
    logit_choice_probabilities,
    marginal_cost,
    markup_price,
    monocomp_labor_demand,
    produce,
    tfp_step,
)


def test_firm_action_bounds():
    from econsim.firms import FirmAction
    assert FirmAction(price=1.2, wage=0.0).price == 1.2
    with pytest.raises(ValueError):
        FirmAction(price=0.0, wage=1.0)
    with pytest.raises(ValueError):
        FirmAction(price=1.0, wage=-1.0)


class TestProduce:
    def test_unit_point(self):
        for alpha in (0.2, 0.5, 0.8):
            assert produce(1.0, 1.0, 1.0, alpha) == pytest.approx(1.0)

    def test_point_value(self):
        assert produce(2.0, 4.0, 1.0, 0.5) == pytest.approx(4.0)

    def test_zero_inputs(self):
        assert produce(1.0, 0.0, 5.0, 0.4) == 0.0
        assert produce(1.0, 5.0, 0.0, 0.4) == 0.0

    def test_constant_returns(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            z, k, l, c = rng.uniform(0.5, 3), rng.uniform(1, 50), rng.uniform(1, 50), rng.uniform(0.1, 9)
            assert produce(z, c * k, c * l, 0.33) == pytest.approx(
                c * produce(z, k, l, 0.33), rel=1e-12)


class TestTfp:
    def test_zero_volatility(self):
        assert tfp_step(1.7, 0.0, RngStream(0).child("tfp")) == pytest.approx(1.7)

    def test_drift_and_variance(self):
        stream = RngStream(1).child("mc")
        draws = np.array([
            tfp_step(1.0, 0.02, stream.child(f"path/{i}")) for i in range(100_000)
        ])
        increments = np.log(draws)
        assert abs(increments.mean()) < 3 * 0.02 / np.sqrt(draws.size)
        assert increments.var() == pytest.approx(0.02**2, rel=0.05)

    def test_positive_along_path(self):
        z = 1.0
        stream = RngStream(2).child("walk")
        for t in range(500):
            z = tfp_step(z, 0.3, stream.child(str(t)))
            assert z > 0


class TestCompetitivePrices:
    def test_point_values(self):
        wage, rent = competitive_factor_prices(1.0, 1.0, 4.0, 1.0, 0.5)
        assert wage == pytest.approx(1.0)
        assert rent == pytest.approx(0.25)

    def test_zero_profit_randomized(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            p = rng.uniform(0.1, 10)
            z = rng.uniform(0.2, 5)
            k = rng.uniform(0.5, 1e4)
            l = rng.uniform(0.5, 1e4)
            alpha = rng.uniform(0.05, 0.95)
            wage, rent = competitive_factor_prices(p, z, k, l, alpha)
            y = produce(z, k, l, alpha)
            profit = firm_profit(p, y, wage, l, rent, k)
            assert abs(profit) / (p * y) < 1e-12

    def test_euler_identity(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            p, z = rng.uniform(0.5, 3), rng.uniform(0.5, 3)
            k, l = rng.uniform(1, 100), rng.uniform(1, 100)
            alpha = rng.uniform(0.1, 0.9)
            wage, rent = competitive_factor_prices(p, z, k, l, alpha)
            assert wage * l + rent * k == pytest.approx(
                p * produce(z, k, l, alpha), rel=1e-12)

    def test_degenerate_market_raises(self):
        with pytest.raises(ValueError, match="degenerate"):
            competitive_factor_prices(1.0, 1.0, 0.0, 1.0, 0.5)
        with pytest.raises(ValueError, match="degenerate"):
            competitive_factor_prices(1.0, 1.0, 1.0, 0.0, 0.5)


class TestProfitAndCapital:
    def test_zero_profit_point(self):
        assert firm_profit(1.0, 100.0, 0.6, 100.0, 0.4, 100.0) == pytest.approx(0.0)

    def test_monopoly_fixed_demand_two_point(self):
        # Fixed-demand oracle: quantity pinned, costs pinned, price up => profit up.
        q, wage, labor, rent, capital = 50.0, 2.0, 10.0, 0.08, 100.0
        low = firm_profit(1.0, q, wage, labor, rent, capital)
        high = firm_profit(1.5, q, wage, labor, rent, capital)
        assert high > low

    def test_capital_step_points(self):
        assert capital_step(100.0, 0.0, 1.0) == 0.0
        assert capital_step(100.0, 5.0, 0.05) == pytest.approx(100.0)

    def test_capital_telescoped_oracle(self):
        rng = np.random.default_rng(3)
        invest = rng.uniform(-5, 20, 100)
        delta = 0.07
        k = 50.0
        for i in invest:
            k = capital_step(k, i, delta)
        oracle = 50.0 * (1 - delta) ** 100 + sum(
            i * (1 - delta) ** (99 - j) for j, i in enumerate(invest))
        assert k == pytest.approx(oracle, rel=1e-9)


class TestMarginalCost:
    def test_point_value(self):
        assert marginal_cost(1.0, 1.0, 1.0, 0.5) == pytest.approx(2.0)

    def test_inverse_tfp_scaling(self):
        base = marginal_cost(2.0, 0.1, 1.0, 0.3)
        for z in (0.5, 2.0, 7.0):
            assert marginal_cost(2.0, 0.1, z, 0.3) == pytest.approx(base / z, rel=1e-12)

    def test_finite_difference_cost_minimization_oracle(self):
        from scipy.optimize import minimize_scalar

        def min_cost(y, z, w, r, alpha):
            # Independent oracle: numerically minimize W*L + R*K subject to
            # produce(z, K, L) = y by eliminating K.
            def cost(log_l):
                l = np.exp(log_l)
                k = (y / (z * l ** (1 - alpha))) ** (1 / alpha)
                return w * l + r * k
            res = minimize_scalar(cost, bounds=(-10, 15), method="bounded",
                                  options={"xatol": 1e-12})
            return res.fun

        rng = np.random.default_rng(4)
        for _ in range(20):
            z = rng.uniform(0.5, 3)
            w = rng.uniform(0.5, 4)
            r = rng.uniform(0.02, 0.5)
            alpha = rng.uniform(0.2, 0.8)
            y = rng.uniform(1, 100)
            dy = 1e-4 * y
            fd = (min_cost(y + dy, z, w, r, alpha) - min_cost(y - dy, z, w, r, alpha)) / (2 * dy)
            assert marginal_cost(w, r, z, alpha) == pytest.approx(fd, rel=1e-6)


class TestMarkupAndCes:
    def test_markup_points(self):
        assert markup_price(1.0, 2.0) == pytest.approx(2.0)
        assert markup_price(1.0, 1e6) == pytest.approx(1.0, abs=1e-5)
        assert markup_price(3.0, 4.0) > 3.0
        with pytest.raises(ValueError):
            markup_price(1.0, 1.0)

    def test_price_index_single_firm(self):
        assert ces_price_index([1.7], 4.0) == pytest.approx(1.7)

    def test_price_index_symmetric(self):
        assert ces_price_index([1.0] * 4, 2.0) == pytest.approx(0.25)

    def test_price_index_properties(self):
        # The symmetric value min(p) * N**(1/(1-eps)) is the floor of the
        # index (equality iff all prices equal), and the cheapest posted price
        # is its ceiling.
        rng = np.random.default_rng(5)
        eps = 3.0
        for _ in range(100):
            prices = rng.uniform(0.5, 2.0, 6)
            index = ces_price_index(prices, eps)
            assert prices.min() * 6 ** (1 / (1 - eps)) - 1e-12 <= index
            assert index <= prices.min() + 1e-12
        # More firms at the same price push the index down.
        p4 = ces_price_index([1.0] * 4, eps)
        p8 = ces_price_index([1.0] * 8, eps)
        assert p8 < p4
        with pytest.raises(ValueError):
            ces_price_index([], eps)

    def test_demand_split_symmetry(self):
        q = ces_demand_split(120.0, [2.0, 2.0, 2.0], 3.0)
        assert np.allclose(q, q[0])

    def test_demand_split_share_ratio(self):
        q = ces_demand_split(90.0, [1.0, 2.0], 2.0)
        assert q[0] / q[1] == pytest.approx(4.0, rel=1e-9)

    def test_budget_exhaustion(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            prices = rng.uniform(0.2, 5.0, rng.integers(1, 9))
            spend = rng.uniform(0, 1e4)
            q = ces_demand_split(spend, prices, 4.0)
            assert float(np.sum(prices * q)) == pytest.approx(spend, rel=1e-9, abs=1e-9)


class TestMonocompLabor:
    def test_symmetric_point(self):
        l, k = monocomp_labor_demand(1.0, 1.0, 1.0, 1.0, 0.5)
        assert l == pytest.approx(1.0)
        assert k == pytest.approx(1.0)

    def test_round_trip_production(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            y = rng.uniform(0.5, 100)
            z = rng.uniform(0.5, 3)
            w = rng.uniform(0.5, 5)
            r = rng.uniform(0.02, 0.5)
            alpha = rng.uniform(0.1, 0.9)
            l, k = monocomp_labor_demand(y, z, w, r, alpha)
            assert produce(z, k, l, alpha) == pytest.approx(y, rel=1e-9)

    def test_labor_decreasing_in_wage(self):
        wages = np.linspace(0.5, 5, 20)
        labors = [monocomp_labor_demand(10.0, 1.0, w, 0.1, 0.4)[0] for w in wages]
        assert all(a > b for a, b in zip(labors, labors[1:]))


class TestFirmChoice:
    def test_identical_firms_uniform(self):
        scores = np.zeros((20_000, 4))
        picks = household_firm_choice(scores, 1.0, RngStream(0).child("choice"))
        counts = np.bincount(picks, minlength=4)
        assert np.all(np.abs(counts - 5000) < 3 * np.sqrt(20_000 * 0.25 * 0.75))

    def test_argmax_at_tiny_temperature(self):
        scores = np.tile([0.0, 1.0, 0.2], (10_000, 1))
        picks = household_firm_choice(scores, 1e-9, RngStream(1).child("choice"))
        assert np.mean(picks == 1) > 0.999

    def test_frequencies_match_softmax(self):
        scores = np.tile([0.3, -0.2, 0.9, 0.0], (40_000, 1))
        temp = 0.7
        picks = household_firm_choice(scores, temp, RngStream(2).child("choice"))
        probs = logit_choice_probabilities(scores[0], temp)
        counts = np.bincount(picks, minlength=4)
        for j in range(4):
            se = np.sqrt(40_000 * probs[j] * (1 - probs[j]))
            assert abs(counts[j] - 40_000 * probs[j]) <= 3 * se, j

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            household_firm_choice(np.zeros((5, 1)), 1.0, RngStream(0).child("c"))
        with pytest.raises(ValueError):
            household_firm_choice(np.zeros((5, 3)), 0.0, RngStream(0).child("c"))


class TestPriceUpdate:
    def test_clearing_fixed_point(self):
        assert goods_market_price_update(2.0, 10.0, 10.0, 0.3) == pytest.approx(2.0)

    def test_point_value(self):
        assert goods_market_price_update(1.0, 110.0, 100.0, 0.1) == pytest.approx(1.01)

    def test_tatonnement_convergence_on_linear_demand(self):
        # Stylized stub: demand falls linearly in price, supply fixed.
        supply = 100.0
        p = 0.3
        for _ in range(200):
            demand = 260.0 - 160.0 * p
            p = goods_market_price_update(p, demand, supply, 0.2)
        assert abs((260.0 - 160.0 * p) - supply) / supply < 1e-3

    def test_requires_positive_supply(self):
        with pytest.raises(ValueError):
            goods_market_price_update(1.0, 5.0, 0.0, 0.1)
