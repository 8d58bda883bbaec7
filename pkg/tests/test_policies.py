import numpy as np
import pytest

from econsim.core import EconomyConfig
from econsim.governments import progressive_bracket_tax
from econsim.policies import (
    HouseholdPolicy,
    HouseholdProfile,
    PolicyBinding,
    ReplaySchedule,
    heuristic_household_policy,
    imf_pension_rule,
    load_replay_csv,
    replay_policy,
    saez_tax_policy,
    saez_top_rate,
    taylor_rule,
)
from econsim.scenario import preset_dir


class TestTaylorRule:
    def test_on_target(self):
        assert taylor_rule(0.02, 0.05, r_star=0.02, pi_star=0.02, g_star=0.05) \
            == pytest.approx(0.04)

    def test_inflation_response(self):
        on = taylor_rule(0.02, 0.05)
        off = taylor_rule(0.04, 0.05)
        assert off - on == pytest.approx(0.03)  # (1 + a_pi) * 0.02

    def test_floor_binds_in_deflation(self):
        assert taylor_rule(-0.30, -0.10) == 0.0
        assert taylor_rule(-0.30, -0.10, iota_min=-0.02) == -0.02

    def test_on_target_attains_the_neutral_minimum(self):
        # Over a grid of (pi, g), no input gets the rate closer to r* + pi*
        # than the target point does (the minimizer is a line, not a point).
        neutral = 0.02 + 0.02
        on_target = abs(taylor_rule(0.02, 0.05) - neutral)
        grid_best = min(
            abs(taylor_rule(pi, g) - neutral)
            for pi in np.linspace(-0.05, 0.10, 31)
            for g in np.linspace(-0.05, 0.15, 41)
        )
        assert on_target == pytest.approx(0.0, abs=1e-12)
        assert on_target <= grid_best + 1e-12


class TestSaez:
    def test_full_weight_means_zero_top_rate(self):
        incomes = np.random.default_rng(0).pareto(2.0, 1000) + 1.0
        rate, _, _ = saez_top_rate(incomes, elasticity=0.3, welfare_weight=1.0)
        assert rate == pytest.approx(0.0)

    def test_zero_elasticity_confiscatory(self):
        incomes = np.random.default_rng(1).pareto(2.0, 1000) + 1.0
        rate, _, _ = saez_top_rate(incomes, elasticity=0.0, welfare_weight=0.0)
        assert rate == pytest.approx(1.0)

    def test_pareto_tail_estimator(self):
        # Monte Carlo: for Pareto(alpha), mean/(mean - threshold) over the tail
        # recovers alpha.
        rng = np.random.default_rng(2)
        alphas = []
        for _ in range(20):
            x = (rng.pareto(2.0, 10_000) + 1.0) * 10.0
            _, _, a = saez_top_rate(x, 0.25, 0.0)
            alphas.append(a)
        assert np.mean(alphas) == pytest.approx(2.0, rel=0.10)

    def test_degenerate_distribution_base_only(self):
        action = saez_tax_policy(np.full(100, 42.0), base_rate=0.07)
        assert action["brackets"] == [(0.0, 0.07)]

    def test_emits_two_bracket_schedule(self):
        rng = np.random.default_rng(3)
        x = (rng.pareto(2.0, 5000) + 1.0) * 20.0
        action = saez_tax_policy(x, elasticity=0.25, welfare_weight=0.0,
                                 base_rate=0.10)
        assert len(action["brackets"]) == 2
        (lo0, r0), (lo1, r1) = action["brackets"]
        assert lo0 == 0.0 and r0 == 0.10
        assert lo1 == pytest.approx(np.quantile(x, 0.9))
        assert 0.10 <= r1 <= 1.0


class TestImfRule:
    def test_rising_fund_holds(self):
        action = imf_pension_rule([100, 110, 120, 130], retirement_age=62,
                                  tau_p=0.08, k=0.0)
        assert action == {"retirement_age": 62, "tau_p": 0.08, "k": 0.0}

    def test_depletion_trigger(self):
        # Falling linearly to zero within the horizon raises both levers.
        history = [100 - 12 * i for i in range(5)]  # depletes in ~4.3 years
        action = imf_pension_rule(history, retirement_age=62, tau_p=0.08, k=0.0,
                                  depletion_horizon=10.0, delta_age=2,
                                  delta_tau=0.01)
        assert action["retirement_age"] == 64
        assert action["tau_p"] == pytest.approx(0.09)

    def test_repeated_triggers_respect_caps(self):
        age, tau = 60, 0.08
        history = [50.0, 40.0]
        for _ in range(40):
            action = imf_pension_rule(history, retirement_age=age, tau_p=tau,
                                      k=0.0, tau_p_max=0.20)
            age, tau = action["retirement_age"], action["tau_p"]
            history.append(history[-1] - 10.0)
        assert age == 70  # annuity-table cap
        assert tau == pytest.approx(0.20)

    def test_needs_history(self):
        with pytest.raises(ValueError):
            imf_pension_rule([100.0], retirement_age=60, tau_p=0.08, k=0.0)


class TestReplay:
    def test_constant_schedule(self):
        sched = ReplaySchedule(((0, {"iota": 0.03, "phi": 0.1}),))
        for t in (0, 5, 500):
            assert replay_policy(sched, t) == {"iota": 0.03, "phi": 0.1}

    def test_hold_last_off_errors_past_end(self):
        sched = ReplaySchedule(((0, {"x": 1.0}), (2, {"x": 2.0})), hold_last=False)
        assert replay_policy(sched, 1) == {"x": 1.0}
        assert replay_policy(sched, 2) == {"x": 2.0}
        with pytest.raises(ValueError):
            replay_policy(sched, 3)

    def test_must_cover_zero(self):
        with pytest.raises(ValueError):
            ReplaySchedule(((1, {"x": 1.0}),))

    def test_csv_round_trip(self, tmp_path):
        path = tmp_path / "sched.csv"
        path.write_text("t,retirement_age,tau_p,k\n0,67,0.08,0\n10,68,0.09,0\n")
        sched = load_replay_csv(path)
        assert replay_policy(sched, 3)["retirement_age"] == 67
        assert replay_policy(sched, 10)["tau_p"] == pytest.approx(0.09)

    def test_bundled_retirement_preset(self):
        sched = load_replay_csv(preset_dir() / "retirement-age-67.csv")
        for t in (0, 30, 99):
            assert replay_policy(sched, t)["retirement_age"] == 67


def test_bundled_bracket_preset_round_trip(tmp_path):
    # The bundled progressive schedule parses, is strictly increasing, and the
    # tax it induces is continuous and reproduces a hand-computed point.
    from econsim.governments import load_bracket_csv
    brackets = load_bracket_csv(preset_dir() / "us2022_brackets.csv")
    assert brackets[0] == (0.0, 0.10)
    assert len(brackets) == 7
    # 20,000 at 10% up to 10,275 then 12%: 1027.5 + 0.12 * 9725 = 2194.5
    assert progressive_bracket_tax(20_000.0, brackets) == pytest.approx(2194.5)
    # Round trip through a copy of the file.
    text = (preset_dir() / "us2022_brackets.csv").read_text()
    copy = tmp_path / "copy.csv"
    copy.write_text(text)
    assert load_bracket_csv(copy) == brackets


class TestHeuristicHousehold:
    def test_retired_supplies_no_labor(self):
        _, lam, _ = heuristic_household_policy(70.0, HouseholdProfile(), retired=True)
        assert lam == 0.0

    def test_inverted_u_labor(self):
        profile = HouseholdProfile()
        lam = {age: heuristic_household_policy(age, profile)[1] for age in (22, 45, 64)}
        assert lam[45] >= lam[22]
        assert lam[45] >= lam[64]

    def test_risky_share_declines_with_age(self):
        profile = HouseholdProfile()
        theta30 = heuristic_household_policy(30.0, profile)[2]
        theta70 = heuristic_household_policy(70.0, profile)[2]
        assert theta70 < theta30

    def test_actions_in_unit_box(self):
        profile = HouseholdProfile()
        for age in range(0, 101, 5):
            a, l, t = heuristic_household_policy(float(age), profile)
            assert 0.0 <= a <= 1.0 and 0.0 <= l <= 1.0 and 0.0 <= t <= 1.0

    def test_batch_matches_scalar(self):
        cfg = EconomyConfig()
        policy = HouseholdPolicy(PolicyBinding("households", "heuristic"), cfg)
        obs = np.array([[100.0, 1.0, 30.0], [50.0, 0.8, 70.0]])
        out = policy.act_batch(obs, retired=np.array([False, True]), t=0)
        expected0 = heuristic_household_policy(30.0, policy.profile)
        assert out[0] == pytest.approx(expected0)
        assert out[1, 1] == 0.0

    def test_ramsey_constants(self):
        cfg = EconomyConfig(individual="ramsey")
        policy = HouseholdPolicy(PolicyBinding("households", "heuristic"), cfg)
        obs = np.array([[100.0, 1.0], [50.0, 0.8]])
        out = policy.act_batch(obs, retired=np.zeros(2, dtype=bool), t=0)
        assert np.allclose(out[0], out[1])

    def test_unknown_profile_param_rejected(self):
        with pytest.raises(ValueError, match="unknown heuristic"):
            HouseholdPolicy(
                PolicyBinding("households", "heuristic", {"not_a_knob": 1.0}),
                EconomyConfig())


def test_binding_validation():
    with pytest.raises(ValueError):
        PolicyBinding("households", "taylor")
    with pytest.raises(ValueError):
        PolicyBinding("weather", "constant")
    assert PolicyBinding("central_bank", "taylor").kind == "taylor"
