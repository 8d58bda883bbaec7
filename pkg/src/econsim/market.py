"""Markov-game orchestrator: observations, canonical step ordering, rewards.

A step runs seven serialized phases:

  1. governments apply policy parameters,
  2. central-bank constraints bind bank rates (or no-arbitrage ties the
     capital rent to the bond rate),
  3. firms post prices/wages (or competitive factor prices are computed),
  4. households act (labor, taxes, pension flows, consumption, asset split),
  5. aggregation (production, profits, goods-price update, bank balance,
     fiscal budget, pension fund),
  6. demographics (OLG only),
  7. rewards, metrics, termination.

Agents act on observations built from the previous step's snapshot, so no
phase reads a value produced later in the same step. Rates follow the budget
convention that balances carried into step t earn the rate fixed at t-1;
under the non-profit platform with competitive firms, that rate equals the
realized net capital return R_t - delta exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import banks, firms, governments, households
from .core import (
    RATE_MAX,
    RETIREMENT_AGE_MAX,
    RETIREMENT_AGE_MIN,
    EconomyConfig,
    EpisodeClock,
    RngStream,
    validate_config,
)
from .governments import CentralBankState, FiscalState, GovObservation, PensionState
from .households import MarketTerms, Population
from .metrics import gini

STRATEGIC_FIRMS = ("monopoly", "oligopoly", "monopolistic")

GOV_ACTION_FIELDS = {
    "fiscal": ("tau", "xi", "tau_a", "xi_a", "g_frac"),
    "central_bank": ("iota", "phi"),
    "pension": ("retirement_age", "tau_p", "k"),
}


class ConfigError(ValueError):
    def __init__(self, violations: list[str]):
        super().__init__("invalid economy config: " + "; ".join(violations))
        self.violations = violations


@dataclass(frozen=True)
class GlobalStats:
    """Asset-ranked subgroup means of (assets, income, education) for the top
    10% and bottom 50% of households. Subgroup sizes round up."""

    top10: np.ndarray
    bot50: np.ndarray
    top_size: int
    bot_size: int

    def vector(self) -> np.ndarray:
        return np.concatenate([self.top10, self.bot50])


def global_stats(assets, incomes, education) -> GlobalStats:
    a = np.asarray(assets, dtype=float)
    if a.size == 0:
        raise ValueError("global stats need at least one household")
    i = np.asarray(incomes, dtype=float)
    e = np.asarray(education, dtype=float)
    order = np.argsort(-a, kind="stable")
    top_n = int(np.ceil(0.1 * a.size))
    bot_n = int(np.ceil(0.5 * a.size))
    top = order[:top_n]
    bot = order[::-1][:bot_n]
    top_stats = np.array([a[top].mean(), i[top].mean(), e[top].mean()])
    bot_stats = np.array([a[bot].mean(), i[bot].mean(), e[bot].mean()])
    return GlobalStats(top_stats, bot_stats, top_n, bot_n)


@dataclass
class JointAction:
    """One action per live decision-making agent.

    Households always decide; governments per active subset; the bank only in
    commercial mode; firms only under strategic market structures. Government
    entries are dicts keyed by the fields in GOV_ACTION_FIELDS (a fiscal entry
    may instead carry a "brackets" schedule).
    """

    households: np.ndarray
    governments: dict[str, dict] = field(default_factory=dict)
    bank: Optional[banks.BankAction] = None
    firms: Optional[np.ndarray] = None  # (n_firms, 2): price, wage


@dataclass
class EconomySnapshot:
    """Full world state entering step `clock.t`."""

    clock: EpisodeClock
    population: Population
    fiscal: Optional[FiscalState]
    central_bank: Optional[CentralBankState]
    pension: Optional[PensionState]
    bank: banks.BankState
    firm_capital: np.ndarray
    firm_labor: np.ndarray
    firm_tfp: np.ndarray
    firm_price: np.ndarray
    firm_wage: np.ndarray
    price_level: float
    inflation: float
    gdp: float
    gdp_prev: float
    wage_index: float
    consumption: float
    young_share: Optional[float]
    dependency: Optional[float]
    retirement_age: Optional[int]

    @property
    def population_count(self) -> int:
        return self.population.size


@dataclass
class Observations:
    household_private: np.ndarray  # (N, 2) ramsey, (N, 3) olg
    household_global: np.ndarray   # (6,) asset-ranked subgroup means
    government: Optional[GovObservation]
    bank: Optional[np.ndarray]     # (5,)
    firms: Optional[np.ndarray]    # (n_firms, 5)


@dataclass
class StepResult:
    snapshot: EconomySnapshot
    rewards: dict
    done: bool
    reason: Optional[str]
    info: dict
    row: dict
    # Per-agent arrays for the acting population (before demographics):
    # ids, age, consumption, hours, savings, risky, reward, insolvent.
    agents: dict = field(default_factory=dict)


class Economy:
    """Owns the mutable world state; one instance per episode."""

    def __init__(self, cfg: EconomyConfig, seed: int):
        violations = validate_config(cfg)
        if violations:
            raise ConfigError(violations)
        self.cfg = cfg
        self.seed = int(seed)
        self.root = RngStream(self.seed).child("episode")
        self._was_reset = False

    # -- lifecycle -----------------------------------------------------------

    def reset(self) -> EconomySnapshot:
        cfg = self.cfg
        self.clock = EpisodeClock(0, cfg.termination.horizon)
        self.olg = cfg.individual == "olg"
        self.pop = households.sample_initial_population(cfg, self.root)
        nf = cfg.n_firms

        self.fiscal = None
        if "fiscal" in cfg.governments:
            f = cfg.fiscal
            self.fiscal = FiscalState(debt=f.debt0, tau=f.tau, xi=f.xi, tau_a=f.tau_a,
                                      xi_a=f.xi_a, g_frac=f.g_frac)
        self.central_bank = None
        if "central_bank" in cfg.governments:
            t = cfg.targets
            self.central_bank = CentralBankState(iota=cfg.base_rate, phi=t.phi0,
                                                 pi_star=t.pi_star, g_star=t.g_star,
                                                 lambda_pi=t.lambda_pi)
        self.pension = None
        self.retirement_age = cfg.demographics.retirement_age if self.olg else None
        if "pension" in cfg.governments:
            self.pension = PensionState(
                fund=cfg.pension.fund0_per_capita * self.pop.size,
                fund_return=cfg.base_rate,
                tau_p=cfg.pension.tau_p,
                retirement_age=cfg.demographics.retirement_age,
                k=cfg.pension.k,
            )

        # Opening balance sheet: deposits fully allocated, bonds first.
        deposits0 = float(self.pop.savings.sum())
        debt0 = self.fiscal.debt if self.fiscal else 0.0
        self.bank = banks.BankState(kind=cfg.bank)
        if cfg.bank == "commercial":
            loans, bonds, reserves = banks.reserve_feasible_allocation(
                deposits0, self._phi(), np.inf, debt0)
            self.bank.reserves = reserves
        else:
            bonds = min(max(debt0, 0.0), deposits0)
            loans = deposits0 - bonds
        self.bank.deposits, self.bank.loans, self.bank.bonds = deposits0, loans, bonds
        base = self._benchmark_rate()
        self._platform_rate = base  # rate in force for the period ending at t=0
        if cfg.bank == "commercial":
            self.bank.deposit_rate, self.bank.lending_rate = banks.clamp_rates_to_corridor(
                base, banks.BankAction(base - 0.005, base + 0.02))
        else:
            self.bank.deposit_rate = self.bank.lending_rate = base

        # Firms: equal capital split, unit TFP and unit price.
        alpha = cfg.technology.alpha
        self.firm_capital = np.full(nf, loans / nf)
        self.firm_tfp = np.full(nf, cfg.technology.tfp0)
        self.firm_price = np.ones(nf)
        working = self._working_mask()
        labor0 = float(
            (self.pop.education[working] * cfg.h_max * cfg.market.initial_labor_ratio).sum()
        )
        self.firm_labor = np.full(nf, max(labor0, 1e-9) / nf)
        if loans > 0 and labor0 > 0:
            wage0, _ = firms.competitive_factor_prices(
                1.0, cfg.technology.tfp0, loans, labor0, alpha)
        else:
            wage0 = 1.0
        self.firm_wage = np.full(nf, wage0)
        self._labor_shares = np.full(nf, 1.0 / nf)

        # Price/GDP anchors (price level is a CPI normalized to 1 at reset).
        self._raw_price_base = self._raw_price_index()
        self.price_level = 1.0
        self.inflation = 0.0
        y0 = float(np.sum(self.firm_price * firms.produce(
            self.firm_tfp, self.firm_capital, self.firm_labor, alpha)))
        self.gdp = y0
        self.gdp_prev = y0
        self.wage_index = wage0
        self.consumption = 0.0
        self.estate_escrow = 0.0
        self.insolvent_share = 0.0

        if self.pension is not None:
            self.pension.avg_wage = self._expected_wage_income(wage0)

        self._was_reset = True
        return self.snapshot()

    def snapshot(self) -> EconomySnapshot:
        young_share = dependency = None
        if self.olg and self.pop.size:
            old = int(np.sum(self.pop.age > self.retirement_age))
            young = self.pop.size - old
            young_share = young / self.pop.size
            dependency = float("inf") if young == 0 else old / young
        return EconomySnapshot(
            clock=self.clock,
            population=self.pop,
            fiscal=self.fiscal,
            central_bank=self.central_bank,
            pension=self.pension,
            bank=self.bank,
            firm_capital=self.firm_capital.copy(),
            firm_labor=self.firm_labor.copy(),
            firm_tfp=self.firm_tfp.copy(),
            firm_price=self.firm_price.copy(),
            firm_wage=self.firm_wage.copy(),
            price_level=self.price_level,
            inflation=self.inflation,
            gdp=self.gdp,
            gdp_prev=self.gdp_prev,
            wage_index=self.wage_index,
            consumption=self.consumption,
            young_share=young_share,
            dependency=dependency,
            retirement_age=self.retirement_age,
        )

    # -- observations ----------------------------------------------------------

    def build_observations(self) -> Observations:
        pop = self.pop
        stats = global_stats(pop.wealth, pop.last_income, pop.education)
        if self.olg:
            private = np.column_stack([pop.wealth, pop.education, pop.age.astype(float)])
        else:
            private = np.column_stack([pop.wealth, pop.education])

        gov = None
        if self.cfg.governments:
            deciles = np.quantile(pop.last_income, np.arange(1, 11) / 10.0)
            gov = GovObservation(
                debt=self.fiscal.debt if self.fiscal else 0.0,
                wage=self.wage_index,
                price=self.price_level,
                inflation=self.inflation,
                gdp=self.gdp,
                income_deciles=deciles,
            )

        bank_obs = None
        if self.cfg.bank == "commercial":
            bank_obs = np.array([
                self._benchmark_rate(), self._phi(),
                self.bank.deposits, self.bank.loans, self.bank.bonds,
            ])

        firm_obs = None
        if self.cfg.firms in STRATEGIC_FIRMS:
            firm_obs = np.column_stack([
                self.firm_capital, self.firm_labor, self.firm_tfp,
                self.firm_price, self.firm_wage,
            ])
        return Observations(private, stats.vector(), gov, bank_obs, firm_obs)

    # -- step ------------------------------------------------------------------

    def step(self, actions: JointAction) -> StepResult:
        if not self._was_reset:
            raise RuntimeError("call reset() before step()")
        if self.pop.size == 0:
            raise RuntimeError("population extinct; the episode is over")
        cfg = self.cfg
        t = self.clock.t
        info: dict = {"clamps": 0}
        step_rng = self.root.child(f"step/{t}")

        hh_action = self._validate_actions(actions, info)

        # Phase 1: governments apply policy parameters.
        self._apply_government_actions(actions.governments, info)

        # Phase 2: rates realized this step (fixed last period) and new posts.
        r_applied, r_bond_applied, capital_rent = self._rate_phase(actions.bank)

        # Phase 3: firms post prices/wages, or competitive pricing.
        capital_rent = self._firm_posting_phase(actions.firms, capital_rent, info)
        if cfg.bank == "non_profit" and cfg.firms == "perfect":
            r_applied = r_bond_applied = self._platform_rate
        # Realized risky return over the period ending now (common shock).
        rho = float(step_rng.child("risky").generator().normal(
            r_applied + cfg.risky.premium, cfg.risky.sigma))
        # Price level in force during this step (CPI-normalized).
        price_level_prev = self.price_level
        self.price_level = self._raw_price_index() / self._raw_price_base
        self.inflation = (self.price_level - price_level_prev) / price_level_prev

        # Phase 4: households.
        hh = self._household_phase(hh_action, r_applied, rho, step_rng, info)
        res = hh["result"]
        agents = {
            "ids": self.pop.ids, "age": self.pop.age,
            "consumption": res.consumption, "hours": res.hours,
            "savings": res.savings, "risky": res.risky,
            "reward": res.reward, "insolvent": res.insolvent,
        }

        # Phase 5: aggregation.
        agg = self._aggregate_phase(hh, r_bond_applied, capital_rent, step_rng, info)

        # Phase 6: demographics.
        if self.olg:
            self._demographics_phase(step_rng, info)

        # Phase 7: rewards, metrics, termination.
        rewards = self._rewards(hh, agg, info)
        row = self._trajectory_row(hh, agg, rewards)
        self.clock = self.clock.tick()
        done, reason = self.check_termination()
        if done:
            info["termination"] = reason
        return StepResult(self.snapshot(), rewards, done, reason, info, row, agents)

    # -- phases ------------------------------------------------------------------

    def _validate_actions(self, actions: JointAction, info: dict) -> np.ndarray:
        n = self.pop.size
        hh = np.asarray(actions.households, dtype=float)
        if hh.shape != (n, 3):
            raise ValueError(f"household action shape {hh.shape} != {(n, 3)}")
        if not np.all(np.isfinite(hh)):
            raise ValueError("household actions must be finite")
        clipped = np.clip(hh, 0.0, 1.0)
        info["clamps"] += int(np.sum(clipped != hh))
        active = set(self.cfg.governments)
        got = set(actions.governments)
        if got - active:
            raise ValueError(f"actions for inactive governments: {sorted(got - active)}")
        missing = active - got
        if missing:
            raise ValueError(f"missing government actions: {sorted(missing)}")
        if self.cfg.bank == "commercial" and actions.bank is None:
            raise ValueError("commercial bank requires a rate action")
        if self.cfg.firms in STRATEGIC_FIRMS:
            if actions.firms is None:
                raise ValueError("strategic firms require posted (price, wage) actions")
            fa = np.asarray(actions.firms, dtype=float)
            if fa.shape != (self.cfg.n_firms, 2):
                raise ValueError(f"firm action shape {fa.shape} != {(self.cfg.n_firms, 2)}")
            if not np.all(np.isfinite(fa)):
                raise ValueError("firm actions must be finite")
        return clipped

    def _apply_government_actions(self, gov_actions: dict, info: dict) -> None:
        if "fiscal" in gov_actions and self.fiscal is not None:
            a = gov_actions["fiscal"]
            if a.get("brackets") is not None:
                self.fiscal.brackets = governments.validate_brackets(a["brackets"])
            elif "tau" in a:
                self.fiscal.brackets = None
                self.fiscal.tau = float(np.clip(a["tau"], 0.0, 1.0))
                self.fiscal.xi = float(np.clip(a["xi"], -2.0, 0.999))
                self.fiscal.tau_a = float(np.clip(a.get("tau_a", 0.0), 0.0, 1.0))
                self.fiscal.xi_a = float(np.clip(a.get("xi_a", 0.0), -2.0, 0.999))
            if "g_frac" in a:
                self.fiscal.g_frac = float(np.clip(a["g_frac"], 0.0, 1.0))
        if "central_bank" in gov_actions and self.central_bank is not None:
            a = gov_actions["central_bank"]
            self.central_bank.iota = float(
                np.clip(a["iota"], self.cfg.targets.iota_floor, RATE_MAX))
            self.central_bank.phi = float(np.clip(a["phi"], 0.0, 1.0))
        if "pension" in gov_actions and self.pension is not None:
            a = gov_actions["pension"]
            age = int(np.clip(round(float(a["retirement_age"])),
                              RETIREMENT_AGE_MIN, RETIREMENT_AGE_MAX))
            self.pension.retirement_age = age
            self.retirement_age = age
            self.pension.tau_p = float(np.clip(a["tau_p"], 0.0, self.cfg.pension.tau_p_max))
            self.pension.k = float(np.clip(a["k"], -1.0, 1.0))

    def _benchmark_rate(self) -> float:
        return self.central_bank.iota if self.central_bank else self.cfg.base_rate

    def _phi(self) -> float:
        return self.central_bank.phi if self.central_bank else self.cfg.targets.phi0

    def _rate_phase(self, bank_action) -> tuple[float, float, Optional[float]]:
        """Household deposit rate and bond rate realized this step, plus the
        capital rent firms pay (None when competitive pricing sets it)."""
        delta = self.cfg.technology.delta
        if self.cfg.bank == "commercial":
            r_applied = self.bank.deposit_rate
            r_bond = self.bank.lending_rate  # bank bonds earn the lending rate
            rent = self.bank.lending_rate + delta
            r_d, r_l = banks.clamp_rates_to_corridor(self._benchmark_rate(), bank_action)
            self.bank.deposit_rate, self.bank.lending_rate = r_d, r_l
            return r_applied, r_bond, rent
        if self.cfg.firms == "perfect":
            # Phase 3 ties the platform rate to the realized capital rent.
            return float("nan"), float("nan"), None
        r_applied = self._platform_rate
        rent = banks.noarbitrage_capital_return(r_applied, delta)
        new_rate = self._benchmark_rate()
        self._platform_rate = new_rate
        self.bank.deposit_rate = self.bank.lending_rate = new_rate
        return r_applied, r_applied, rent

    def _firm_posting_phase(self, firm_actions, capital_rent, info) -> float:
        cfg = self.cfg
        alpha = cfg.technology.alpha
        delta = cfg.technology.delta
        if cfg.firms == "perfect":
            k, l = float(self.firm_capital[0]), float(self.firm_labor[0])
            if k <= 0.0 or l <= 0.0:
                info["degenerate_market"] = True
                return capital_rent if capital_rent is not None else delta
            wage, rent = firms.competitive_factor_prices(
                float(self.firm_price[0]), float(self.firm_tfp[0]), k, l, alpha)
            self.firm_wage[0] = wage
            if cfg.bank == "non_profit":
                # No-arbitrage: deposits and bonds both earn the realized net
                # capital return, exactly.
                self._platform_rate = rent - delta
                self.bank.deposit_rate = self.bank.lending_rate = rent - delta
                return rent
            return capital_rent  # commercial: firms pay the lending rate + delta
        fa = np.asarray(firm_actions, dtype=float)
        prices = np.maximum(fa[:, 0], 1e-9)
        info["clamps"] += int(np.sum(prices != fa[:, 0]))
        wages = np.maximum(fa[:, 1], 0.0)
        info["clamps"] += int(np.sum(wages != fa[:, 1]))
        self.firm_price = prices
        self.firm_wage = wages
        return capital_rent

    def _working_mask(self) -> np.ndarray:
        if not self.olg:
            return np.ones(self.pop.size, dtype=bool)
        d = self.cfg.demographics
        return (self.pop.age >= d.work_start_age) & (self.pop.age <= self.retirement_age)

    def _retired_mask(self) -> np.ndarray:
        if not self.olg:
            return np.zeros(self.pop.size, dtype=bool)
        return self.pop.age > self.retirement_age

    def _household_phase(self, hh_action: np.ndarray, r_applied: float, rho: float,
                         step_rng: RngStream, info: dict) -> dict:
        cfg = self.cfg
        pop = self.pop
        retired = self._retired_mask()
        working = self._working_mask()

        alloc, labor, invest = hh_action[:, 0], hh_action[:, 1].copy(), hh_action[:, 2]
        labor[~working] = 0.0  # retirees and children supply no labor

        # Per-household transaction terms by market structure.
        choice = None
        if cfg.firms == "oligopoly":
            choice = self._oligopoly_choice(alloc, labor, r_applied, rho, step_rng)
            price = self.firm_price[choice]
            wage = self.firm_wage[choice]
        elif cfg.firms == "monopolistic":
            price = np.full(pop.size, firms.ces_price_index(
                self.firm_price, cfg.technology.epsilon))
            wage = np.full(pop.size, float(np.dot(self._labor_shares, self.firm_wage)))
        else:
            price = np.full(pop.size, float(self.firm_price[0]))
            wage = np.full(pop.size, float(self.firm_wage[0]))

        income_tax = asset_tax = None
        if self.fiscal is not None:
            fs = self.fiscal
            if fs.brackets is not None:
                schedule = fs.brackets
                income_tax = lambda i: governments.progressive_bracket_tax(i, schedule)
            else:
                tau, xi = fs.tau, fs.xi
                income_tax = lambda i: governments.hsv_income_tax(i, tau, xi)
            if fs.tau_a != 0.0 or fs.xi_a != 0.0:
                tau_a, xi_a = fs.tau_a, fs.xi_a
                asset_tax = lambda a: governments.hsv_asset_tax(a, tau_a, xi_a)

        tau_p = 0.0
        benefit = 0.0
        if self.pension is not None:
            tau_p = self.pension.tau_p
            # The personal account compounds through this step before paying.
            benefit = governments.pension_benefit(
                avg_wage=self.pension.avg_wage,
                own_wage_mean=pop.wage_income_mean,
                contribution_years=pop.contribution_years,
                personal_account=(1.0 + r_applied) * pop.personal_account,
                retirement_age=self.pension.retirement_age,
            )

        terms = MarketTerms(
            price=price, wage=wage, deposit_return=r_applied, risky_return=rho,
            income_tax=income_tax, asset_tax=asset_tax,
            pension_rate=tau_p, pension_benefit=benefit,
        )
        res = households.apply_household_action(
            pop.savings, pop.risky, pop.education, alloc, labor, invest, terms,
            retired=retired, h_max=cfg.h_max, a_min=cfg.market.a_min,
            sigma=cfg.preferences.sigma, gamma=cfg.preferences.gamma,
            utility_floor=cfg.preferences.utility_floor,
            consumption_floor=cfg.preferences.consumption_floor,
            labor_scale=cfg.utility_labor_scale(),
        )

        labor_income = wage * pop.education * res.hours
        capital_income = r_applied * pop.savings + rho * pop.risky
        taxes = np.zeros(pop.size)
        if income_tax is not None:
            taxes = taxes + income_tax(np.maximum(capital_income + labor_income, 0.0))
        if asset_tax is not None:
            taxes = taxes + asset_tax(np.maximum(pop.savings + pop.risky, 0.0))
        contributions = tau_p * labor_income
        benefits_paid = np.where(retired, benefit, 0.0)

        wealth_before = float(pop.wealth.sum())
        pop.savings = res.savings
        pop.risky = res.risky
        pop.last_income = capital_income + labor_income

        if self.pension is not None:
            contributed = contributions > 0.0
            years = pop.contribution_years
            pop.wage_income_mean = np.where(
                contributed,
                (pop.wage_income_mean * years + labor_income) / (years + 1),
                pop.wage_income_mean,
            )
            pop.contribution_years = years + contributed.astype(np.int64)
            pop.personal_account = governments.accumulate_personal_account(
                pop.personal_account, contributions, r_applied)

        self.insolvent_share = float(res.insolvent.mean()) if pop.size else 0.0
        info["insolvent"] = int(res.insolvent.sum())
        info["asset_floor_clamps"] = int(res.clamped.sum())
        info["starved"] = int(res.starved.sum())

        # Wealth created or destroyed outside the budget identity (asset floor
        # and insolvency resets); feeds the money-accounting residual.
        adjust = float(np.sum(res.savings + res.risky + price * res.consumption
                              - res.resources))

        return {
            "result": res, "price": price, "wage": wage, "choice": choice,
            "labor_income": labor_income, "capital_income": capital_income,
            "taxes": taxes, "contributions": contributions, "benefits": benefits_paid,
            "wealth_before": wealth_before, "identity_adjust": adjust,
            "r_applied": r_applied, "rho": rho, "working": working,
        }

    def _oligopoly_choice(self, alloc, labor, r_applied, rho, step_rng) -> np.ndarray:
        """Logit pick of one firm per household for consumption and labor.

        The surplus score evaluates the household's intended bundle at each
        firm's posted terms (wage income minus planned spending), linear in
        (W_j, p_j); the intended bundle itself is priced at the mean posted
        terms so the score stays a pure function of the observation."""
        pop = self.pop
        hours = labor * self.cfg.h_max
        mean_wage = float(self.firm_wage.mean())
        mean_price = float(self.firm_price.mean())
        m_guess = (1.0 + r_applied) * pop.savings + (1.0 + rho) * pop.risky \
            + mean_wage * pop.education * hours
        planned_qty = (1.0 - alloc) * np.maximum(m_guess, 0.0) / mean_price
        earn = hours * pop.education
        scores = earn[:, None] * self.firm_wage[None, :] \
            - planned_qty[:, None] * self.firm_price[None, :]
        return firms.household_firm_choice(
            scores, self.cfg.market.choice_temperature, step_rng.child("choice"))

    def _aggregate_phase(self, hh: dict, r_bond_applied: float, capital_rent: float,
                         step_rng: RngStream, info: dict) -> dict:
        cfg = self.cfg
        pop = self.pop
        res = hh["result"]
        nf = cfg.n_firms
        alpha = cfg.technology.alpha
        delta = cfg.technology.delta

        # Realized labor per firm (efficiency hours), using last step's
        # allocation shares for monopolistic competition.
        eff_hours = pop.education * res.hours
        if cfg.firms == "oligopoly":
            labor_j = np.bincount(hh["choice"], weights=eff_hours, minlength=nf)
        elif cfg.firms == "monopolistic":
            labor_j = self._labor_shares * float(eff_hours.sum())
        else:
            labor_j = np.array([float(eff_hours.sum())])
        output_j = np.atleast_1d(firms.produce(
            self.firm_tfp, self.firm_capital, labor_j, alpha))
        gdp = float(np.sum(self.firm_price * output_j))

        consumption = float(res.consumption.sum())
        spend_i = np.asarray(hh["price"] * res.consumption, dtype=float)
        total_spend = float(spend_i.sum())

        # Profits at the prices in force this step (before any price update).
        profits = np.atleast_1d(firms.firm_profit(
            self.firm_price, output_j, self.firm_wage, labor_j,
            capital_rent, self.firm_capital))

        # Fiscal flow: lagged-GDP spending rule; revenue adds any unclaimed
        # estates from last step's deaths.
        revenue = float(hh["taxes"].sum()) + self.estate_escrow
        self.estate_escrow = 0.0
        spending = 0.0
        debt_next = 0.0
        if self.fiscal is not None:
            spending = self.fiscal.g_frac * self.gdp_prev if self.gdp_prev > 0 else 0.0
            debt_next = governments.fiscal_budget_step(
                self.fiscal.debt, r_bond_applied, spending, revenue)
            self.fiscal.revenue = revenue
            self.fiscal.debt = debt_next

        # Pension fund flow.
        pension_solvent = True
        if self.pension is not None:
            self.pension.fund_return = hh["r_applied"]
            contributions = float(hh["contributions"].sum())
            payouts = float(hh["benefits"].sum())
            info["pension_contributions"] = contributions
            info["pension_payouts"] = payouts
            info["pension_fund_return"] = self.pension.fund_return
            fund_next, pension_solvent = governments.pension_fund_step(
                self.pension, contributions, payouts)
            info["pension_floor_ok"] = pension_solvent
            self.pension.fund = fund_next
            worker_income = hh["labor_income"][hh["working"] & (res.hours > 0)]
            if worker_income.size:
                self.pension.avg_wage = float(worker_income.mean())

        # Bank balance step: deposits are household savings only; the risky
        # asset is held outside the bank.
        deposits_next = float(pop.savings.sum())
        capital_before = float(self.firm_capital.sum())
        if cfg.bank == "non_profit":
            loans_next, bonds_next, residual = banks.platform_balance_step(
                self.bank, capital_rent, r_bond_applied, delta, deposits_next,
                bond_demand=debt_next)
            info["platform_residual"] = residual
            if loans_next == 0.0 and bonds_next == 0.0 and deposits_next > 0.0:
                info["bank_distress"] = True
            self.bank.reserves = deposits_next - loans_next - bonds_next
        else:
            loan_demand = np.inf if cfg.firms == "perfect" else capital_before
            loans_next, bonds_next, reserves = banks.reserve_feasible_allocation(
                deposits_next, self._phi(), loan_demand, debt_next)
            self.bank.reserves = reserves
        self.bank.deposits = deposits_next
        self.bank.loans = loans_next
        self.bank.bonds = bonds_next

        investment = loans_next - (1.0 - delta) * capital_before
        shares = self.firm_capital / capital_before if capital_before > 0 \
            else np.full(nf, 1.0 / nf)
        capital_next = loans_next * shares

        # Demand per firm in money terms; government and investment spending
        # are recycled into goods demand.
        if cfg.firms == "oligopoly":
            spend_j = np.bincount(hh["choice"], weights=spend_i, minlength=nf)
            rev_share = spend_j / total_spend if total_spend > 0 else np.full(nf, 1.0 / nf)
            demand_j = spend_j + (spending + investment) * rev_share
        elif cfg.firms == "monopolistic":
            eps = cfg.technology.epsilon
            qty_j = firms.ces_demand_split(
                max(total_spend + spending + investment, 0.0), self.firm_price, eps)
            demand_j = self.firm_price * qty_j
            demand_labor, _ = firms.monocomp_labor_demand(
                np.maximum(qty_j, 1e-12), self.firm_tfp,
                np.maximum(self.firm_wage, 1e-9), capital_rent, alpha)
            total_dl = float(demand_labor.sum())
            if total_dl > 0:
                self._labor_shares = demand_labor / total_dl
        else:
            demand_j = np.array([total_spend + spending + investment])

        info["goods_residual"] = gdp - float(demand_j.sum())
        info["consumption_spend"] = total_spend
        info["government_spending"] = spending
        info["investment"] = investment

        # Competitive goods price follows excess demand; strategic prices move
        # only through posted actions.
        if cfg.firms == "perfect" and output_j[0] > 0.0:
            self.firm_price[0] = firms.goods_market_price_update(
                float(self.firm_price[0]),
                float(demand_j[0] / self.firm_price[0]),
                float(output_j[0]), cfg.market.kappa)

        # Money accounting over household wealth.
        wealth_after = float(pop.wealth.sum())
        flows = float(hh["capital_income"].sum() + hh["labor_income"].sum()
                      - hh["taxes"].sum() - total_spend
                      - hh["contributions"].sum() + hh["benefits"].sum())
        money_residual = wealth_after - hh["wealth_before"] - flows - hh["identity_adjust"]
        gross = float(np.abs(hh["capital_income"]).sum()
                      + np.abs(hh["labor_income"]).sum()
                      + np.abs(hh["taxes"]).sum() + total_spend + abs(flows))
        info["money_residual_rel"] = abs(money_residual) / max(1.0, gross)

        self.firm_capital = capital_next
        self.firm_labor = labor_j
        self.firm_tfp = np.asarray(np.atleast_1d(firms.tfp_step(
            self.firm_tfp, cfg.technology.sigma_z, step_rng.child("tfp"))), dtype=float)
        self.gdp_prev = self.gdp
        self.gdp = gdp
        self.consumption = consumption
        if cfg.firms == "monopolistic":
            self.wage_index = float(np.dot(self._labor_shares, self.firm_wage))
        else:
            self.wage_index = float(np.mean(self.firm_wage))

        return {
            "output": output_j, "profits": profits, "gdp": gdp,
            "consumption": consumption, "investment": investment,
            "spending": spending, "revenue": revenue,
            "pension_solvent": pension_solvent, "capital_rent": capital_rent,
        }

    def _demographics_phase(self, step_rng: RngStream, info: dict) -> None:
        demo = households.Demographics(
            birth_rate=self.cfg.demographics.birth_rate,
            age_max=self.cfg.demographics.age_max,
        )
        sampler = households.make_education_sampler(self.cfg.population.education_sigma)
        outcome = households.advance_demographics(
            self.pop, demo, step_rng.child("demographics"), sampler)
        self.pop = outcome.population
        self.estate_escrow += outcome.estate_to_fiscal
        info["deaths"] = len(outcome.deaths)
        info["births"] = outcome.births

    def _rewards(self, hh: dict, agg: dict, info: dict) -> dict:
        cfg = self.cfg
        rewards: dict = {"households": hh["result"].reward}
        collapse = False
        if self.fiscal is not None:
            value, flag = governments.fiscal_reward(
                cfg.fiscal.objective, gdp=agg["gdp"], gdp_prev=self.gdp_prev,
                incomes=np.maximum(self.pop.last_income, 0.0) if self.pop.size else np.zeros(1),
                utilities=hh["result"].reward)
            rewards["fiscal"] = value
            collapse |= flag
        if self.central_bank is not None:
            growth = (agg["gdp"] - self.gdp_prev) / self.gdp_prev \
                if self.gdp_prev > 0 else 0.0
            rewards["central_bank"] = governments.central_bank_reward(
                self.inflation, growth, self.central_bank)
            info["stabilization_loss"] = governments.stabilization_loss(
                self.inflation, growth, self.central_bank)
        if self.pension is not None:
            value, flag = governments.pension_reward(agg["gdp"], self.gdp_prev)
            rewards["pension"] = value
            collapse |= flag
        if cfg.bank == "commercial":
            rewards["bank"] = banks.commercial_profit(
                self.bank.lending_rate, self.bank.loans, self.bank.bonds,
                self.bank.deposit_rate, self.bank.deposits)
        if cfg.firms in STRATEGIC_FIRMS:
            rewards["firms"] = agg["profits"]
        if collapse:
            info["output_collapse"] = True
        return rewards

    def _trajectory_row(self, hh: dict, agg: dict, rewards: dict) -> dict:
        """Step record: flow variables describe this step; population stats and
        stocks (fund, debt) describe the end-of-step state."""
        res = hh["result"]
        incomes = np.maximum(self.pop.last_income, 0.0) if self.pop.size else np.zeros(1)
        wealth = np.maximum(self.pop.wealth, 0.0) if self.pop.size else np.zeros(1)
        snap = self.snapshot()
        return {
            "t": self.clock.t,
            "population": self.pop.size,
            "young_share": snap.young_share,
            "gdp": agg["gdp"],
            "consumption": agg["consumption"],
            "price_level": self.price_level,
            "inflation": self.inflation,
            "wage_index": self.wage_index,
            "gini_income": gini(incomes),
            "gini_wealth": gini(wealth),
            "welfare": float(res.reward.sum()),
            "dependency_ratio": snap.dependency,
            "mean_hours": float(res.hours.mean()) if res.hours.size else 0.0,
            "mean_utility": float(res.reward.mean()) if res.reward.size else 0.0,
            "pension_fund": self.pension.fund if self.pension else None,
            "government_debt": self.fiscal.debt if self.fiscal else None,
            "deposit_rate": self.bank.deposit_rate,
            "lending_rate": self.bank.lending_rate,
            "reward_fiscal": rewards.get("fiscal"),
            "reward_central_bank": rewards.get("central_bank"),
            "reward_pension": rewards.get("pension"),
            "reward_bank": rewards.get("bank"),
        }

    def check_termination(self) -> tuple[bool, Optional[str]]:
        cfg = self.cfg
        if self.pop.size == 0:
            return True, "population-extinct"
        if self.gdp <= 0.0:
            return True, "output-collapse"
        if self.pension is not None and cfg.pension.hard_stop and self.pension.fund < 0.0:
            return True, "pension-depleted"
        if self.fiscal is not None and self.gdp > 0.0:
            if self.fiscal.debt / self.gdp > cfg.termination.debt_gdp_cap:
                return True, "debt-cap"
        if self.insolvent_share > cfg.termination.insolvent_share_cap:
            return True, "insolvency-cascade"
        if self.clock.t >= self.clock.horizon:
            return True, "horizon"
        return False, None

    def _raw_price_index(self) -> float:
        if self.cfg.firms == "monopolistic":
            return firms.ces_price_index(self.firm_price, self.cfg.technology.epsilon)
        if self.cfg.firms == "oligopoly":
            return float(np.mean(self.firm_price))
        return float(self.firm_price[0])

    def _expected_wage_income(self, wage: float) -> float:
        working = self._working_mask()
        if not working.any():
            return 0.0
        return float(wage * self.cfg.market.initial_labor_ratio * self.cfg.h_max
                     * self.pop.education[working].mean())
