"""Individual-agent mechanics: budgets, transitions, demographics, inheritance.

Two individual variants share the same budget arithmetic: infinitely-lived
consumer-savers ("ramsey") and aging agents with retirement and birth/death
turnover ("olg"). All per-agent operations broadcast over numpy arrays so the
engine can step the whole population at once; scalars work through the same
code path for unit tests and oracles.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import RngStream

# Stepwise mortality by age bracket, expressed per 100,000 population per year.
# Bracket bounds are inclusive of the lower age.
MORTALITY_TABLE: tuple[tuple[int, int, float], ...] = (
    (0, 0, 560.0),
    (1, 4, 28.0),
    (5, 14, 15.3),
    (15, 24, 79.5),
    (25, 34, 163.4),
    (35, 44, 255.4),
    (45, 54, 453.3),
    (55, 64, 992.1),
    (65, 74, 1978.7),
    (75, 84, 4708.2),
    (85, 200, 14389.6),
)

_MORT_LOWER = np.array([lo for lo, _, _ in MORTALITY_TABLE])
_MORT_RATE = np.array([r for _, _, r in MORTALITY_TABLE]) / 1.0e5


@dataclass
class HouseholdState:
    """One individual. OLG-only fields stay at their defaults in ramsey mode."""

    id: int
    savings: float
    risky: float
    education: float
    age: Optional[int] = None
    alive: bool = True
    contribution_years: int = 0
    personal_account: float = 0.0
    wage_income_mean: float = 0.0  # running mean over contribution years


@dataclass(frozen=True)
class HouseholdAction:
    """Ratios in [0,1]: financial allocation, labor effort, risky share."""

    allocation: float
    labor: float
    investment: float

    def __post_init__(self):
        for name in ("allocation", "labor", "investment"):
            x = getattr(self, name)
            if not 0.0 <= x <= 1.0:
                raise ValueError(f"{name} must be in [0,1], got {x}")


@dataclass
class MarketTerms:
    """Per-step terms a household faces. Array fields broadcast over agents."""

    price: float | np.ndarray
    wage: float | np.ndarray
    deposit_return: float
    risky_return: float
    income_tax: Optional[Callable[[np.ndarray], np.ndarray]] = None
    asset_tax: Optional[Callable[[np.ndarray], np.ndarray]] = None
    pension_rate: float = 0.0  # contribution rate applied to labor income
    pension_benefit: float | np.ndarray = 0.0  # paid to retirees only


@dataclass(frozen=True)
class Demographics:
    birth_rate: float
    age_max: int = 100
    mortality: tuple[tuple[int, int, float], ...] = MORTALITY_TABLE

    def __post_init__(self):
        covered = set()
        for lo, hi, rate in self.mortality:
            if not 0.0 <= rate / 1.0e5 <= 1.0:
                raise ValueError(f"mortality rate out of range in bracket {lo}-{hi}")
            covered.update(range(lo, min(hi, self.age_max) + 1))
        if covered != set(range(self.age_max + 1)):
            raise ValueError("mortality table must cover all ages 0..age_max")


def utility(c, h, sigma: float, gamma: float, floor: float = -1.0e6):
    """Per-period payoff: CRRA consumption utility minus isoelastic labor disutility.

    Returns c**(1-sigma)/(1-sigma) - h**(1+gamma)/(1+gamma); the consumption
    term switches to log(c) when |sigma - 1| < 1e-9. Non-positive consumption
    signals starvation and yields `floor` instead of a crash.
    """
    c_arr = np.asarray(c, dtype=float)
    h_arr = np.asarray(h, dtype=float)
    safe_c = np.where(c_arr > 0.0, c_arr, 1.0)
    if abs(sigma - 1.0) < 1e-9:
        cons = np.log(safe_c)
    else:
        cons = safe_c ** (1.0 - sigma) / (1.0 - sigma)
    out = np.where(c_arr > 0.0, cons - h_arr ** (1.0 + gamma) / (1.0 + gamma), floor)
    if np.ndim(c) == 0 and np.ndim(h) == 0:
        return float(out)
    return out


def mortality_probability(age, table: Sequence[tuple[int, int, float]] = MORTALITY_TABLE):
    """Per-year death probability for `age` (table rates are per 100,000)."""
    if table is MORTALITY_TABLE:
        lower, rate = _MORT_LOWER, _MORT_RATE
    else:
        lower = np.array([lo for lo, _, _ in table])
        rate = np.array([r for _, _, r in table]) / 1.0e5
    age_arr = np.asarray(age)
    hi = max(hi for _, hi, _ in table)
    if np.any(age_arr < lower.min()) or np.any(age_arr > hi):
        raise ValueError(f"age outside mortality table domain: {age}")
    idx = np.searchsorted(lower, age_arr, side="right") - 1
    out = rate[idx]
    return float(out) if np.ndim(age) == 0 else out


def disposable_resources(savings, risky, education, hours, terms: MarketTerms,
                         retired=False):
    """Total resources available this period after returns, wages, taxes and
    pension flows.

    `hours` must already be zero for retirees; the pension benefit is added
    only where `retired` is true, and contributions apply to labor income at
    `terms.pension_rate`. May be negative (insolvency is handled by the step
    logic, not here).
    """
    labor_income = terms.wage * education * np.asarray(hours, dtype=float)
    capital_income = terms.deposit_return * savings + terms.risky_return * risky
    tax = 0.0
    if terms.income_tax is not None:
        tax = tax + terms.income_tax(np.maximum(capital_income + labor_income, 0.0))
    if terms.asset_tax is not None:
        tax = tax + terms.asset_tax(np.maximum(savings + risky, 0.0))
    m = (
        (1.0 + terms.deposit_return) * savings
        + (1.0 + terms.risky_return) * risky
        + labor_income
        - tax
        - terms.pension_rate * labor_income
    )
    m = m + np.where(retired, terms.pension_benefit, 0.0)
    if np.ndim(m) == 0:
        return float(m)
    return m


@dataclass
class TransitionResult:
    savings: np.ndarray
    risky: np.ndarray
    consumption: np.ndarray
    hours: np.ndarray
    reward: np.ndarray
    resources: np.ndarray
    clamped: np.ndarray  # asset floor bound
    insolvent: np.ndarray  # m <= 0: forced subsistence consumption
    starved: np.ndarray  # c <= 0: floor utility applied


def apply_household_action(savings, risky, education, allocation, labor, investment,
                           terms: MarketTerms, *, retired=False, h_max: float = 2512.0,
                           a_min: float = 0.0, sigma: float = 2.0, gamma: float = 2.0,
                           utility_floor: float = -1.0e6, consumption_floor: float = 1.0,
                           labor_scale: float = 1.0) -> TransitionResult:
    """One budget-transition for (arrays of) households.

    h = labor * h_max (0 if retired); next assets a' = allocation * m split
    into savings (1-investment) and risky (investment); consumption is the
    residual (m - a') / price, so price*c + s' + v' = m holds exactly except
    where the asset floor binds at a_min or the agent is insolvent (m <= 0),
    both of which are flagged. The reward divides hours by `labor_scale`
    before the disutility term.
    """
    savings = np.asarray(savings, dtype=float)
    risky = np.asarray(risky, dtype=float)
    education = np.asarray(education, dtype=float)
    allocation = np.asarray(allocation, dtype=float)
    investment = np.asarray(investment, dtype=float)
    working = ~np.asarray(retired) if np.ndim(retired) else not retired
    hours = np.where(working, np.asarray(labor, dtype=float) * h_max, 0.0)

    m = np.asarray(
        disposable_resources(savings, risky, education, hours, terms, retired=retired),
        dtype=float,
    )
    insolvent = m <= 0.0
    a_target = allocation * m
    clamped = (a_target < a_min) & ~insolvent
    a_next = np.where(insolvent, a_min, np.maximum(a_target, a_min))
    c = np.where(insolvent, consumption_floor, (m - a_next) / terms.price)
    # The floor can push a' above m; residual consumption would go negative then.
    c = np.where(~insolvent & (c < 0.0), 0.0, c)
    s_next = (1.0 - investment) * a_next
    v_next = investment * a_next
    reward = utility(c, hours / labor_scale, sigma, gamma, floor=utility_floor)
    starved = np.asarray(c <= 0.0)
    return TransitionResult(
        savings=s_next,
        risky=v_next,
        consumption=np.asarray(c, dtype=float),
        hours=np.asarray(hours, dtype=float),
        reward=np.asarray(reward, dtype=float),
        resources=m,
        clamped=np.asarray(clamped),
        insolvent=np.asarray(insolvent),
        starved=starved,
    )


# ---------------------------------------------------------------------------
# Population container (structure-of-arrays) and demographics
# ---------------------------------------------------------------------------

@dataclass
class Population:
    """All live households, column-wise. Ages stay None in ramsey mode."""

    ids: np.ndarray
    savings: np.ndarray
    risky: np.ndarray
    education: np.ndarray
    age: Optional[np.ndarray] = None
    contribution_years: Optional[np.ndarray] = None
    personal_account: Optional[np.ndarray] = None
    wage_income_mean: Optional[np.ndarray] = None
    last_income: np.ndarray = field(default=None)  # pre-tax labor + capital income
    next_id: int = 0

    def __post_init__(self):
        if self.last_income is None:
            self.last_income = np.zeros_like(self.savings)
        if self.age is not None and self.contribution_years is None:
            n = self.size
            self.contribution_years = np.zeros(n, dtype=np.int64)
            self.personal_account = np.zeros(n)
            self.wage_income_mean = np.zeros(n)
        if self.next_id <= (int(self.ids.max()) if self.ids.size else -1):
            self.next_id = int(self.ids.max()) + 1 if self.ids.size else 0

    @property
    def size(self) -> int:
        return int(self.ids.size)

    @property
    def wealth(self) -> np.ndarray:
        return self.savings + self.risky

    def state(self, i: int) -> HouseholdState:
        return HouseholdState(
            id=int(self.ids[i]),
            savings=float(self.savings[i]),
            risky=float(self.risky[i]),
            education=float(self.education[i]),
            age=None if self.age is None else int(self.age[i]),
            contribution_years=0 if self.contribution_years is None
            else int(self.contribution_years[i]),
            personal_account=0.0 if self.personal_account is None
            else float(self.personal_account[i]),
            wage_income_mean=0.0 if self.wage_income_mean is None
            else float(self.wage_income_mean[i]),
        )


def distribute_inheritance(deceased: Sequence[HouseholdState],
                           newborn_count: int) -> tuple[float, float]:
    """Split the estate of the deceased equally among newborns.

    Returns (per-newborn savings, remainder routed to fiscal revenue). The
    remainder is the whole estate when there are no newborns, so total wealth
    is conserved exactly either way.
    """
    estate = float(sum(h.savings + h.risky for h in deceased))
    if newborn_count <= 0:
        return 0.0, estate
    per_newborn = estate / newborn_count
    return per_newborn, estate - per_newborn * newborn_count


@dataclass
class DemographicsOutcome:
    deaths: list[HouseholdState]
    births: int
    population: Population
    estate_to_fiscal: float


def advance_demographics(pop: Population, demo: Demographics, rng: RngStream,
                         education_sampler: Callable[[int, np.random.Generator], np.ndarray],
                         ) -> DemographicsOutcome:
    """Age everyone one year, apply mortality, then add newborns.

    Deaths are independent draws at the bracket rate for the agent's new age;
    anyone beyond age_max dies with certainty. Births are round(birth_rate * N)
    with N counted before deaths, so N' = N + births - deaths exactly.
    Newborn savings come from the estate of this step's deceased.
    """
    if pop.age is None:
        raise ValueError("demographics require an OLG population")
    n_before = pop.size
    pop.age = pop.age + 1

    gen = rng.child("mortality").generator()
    draws = gen.uniform(size=n_before)
    prob = mortality_probability(np.minimum(pop.age, demo.age_max), demo.mortality)
    dead = (draws < prob) | (pop.age > demo.age_max)
    deaths = [pop.state(i) for i in np.flatnonzero(dead)]

    births = int(round(demo.birth_rate * n_before))
    per_newborn, to_fiscal = distribute_inheritance(deaths, births)

    keep = ~dead
    newborn_ids = np.arange(pop.next_id, pop.next_id + births, dtype=np.int64)
    edu_gen = rng.child("newborn-education").generator()
    newborn_edu = education_sampler(births, edu_gen) if births else np.empty(0)

    new_pop = Population(
        ids=np.concatenate([pop.ids[keep], newborn_ids]),
        savings=np.concatenate([pop.savings[keep], np.full(births, per_newborn)]),
        risky=np.concatenate([pop.risky[keep], np.zeros(births)]),
        education=np.concatenate([pop.education[keep], newborn_edu]),
        age=np.concatenate([pop.age[keep], np.zeros(births, dtype=pop.age.dtype)]),
        contribution_years=np.concatenate(
            [pop.contribution_years[keep], np.zeros(births, dtype=np.int64)]),
        personal_account=np.concatenate([pop.personal_account[keep], np.zeros(births)]),
        wage_income_mean=np.concatenate([pop.wage_income_mean[keep], np.zeros(births)]),
        last_income=np.concatenate([pop.last_income[keep], np.zeros(births)]),
        next_id=pop.next_id + births,
    )
    assert new_pop.size == n_before + births - len(deaths)
    return DemographicsOutcome(deaths, births, new_pop, to_fiscal)


# ---------------------------------------------------------------------------
# Initial population sampling
# ---------------------------------------------------------------------------

def make_education_sampler(sigma: float) -> Callable[[int, np.random.Generator], np.ndarray]:
    def sample(n: int, gen: np.random.Generator) -> np.ndarray:
        return np.exp(gen.normal(0.0, sigma, size=n))
    return sample


def sample_initial_population(cfg, rng: RngStream) -> Population:
    """Draw the t=0 population from the configured distributions (or CSV)."""
    pc = cfg.population
    n = pc.size
    olg = cfg.individual == "olg"
    if pc.init_csv is not None:
        age, edu, sav, ris = _resample_csv(pc.init_csv, n, rng.child("init-csv").generator())
    else:
        gen = rng.child("init").generator()
        ages = np.arange(pc.age_min, pc.age_init_max + 1)
        w = np.linspace(1.0, pc.pyramid_taper, ages.size)
        age = gen.choice(ages, size=n, p=w / w.sum())
        edu = np.exp(gen.normal(0.0, pc.education_sigma, size=n))
        wealth = pc.wealth_median * np.exp(gen.normal(0.0, pc.wealth_sigma, size=n))
        sav = (1.0 - pc.risky_share) * wealth
        ris = pc.risky_share * wealth

    pop = Population(
        ids=np.arange(n, dtype=np.int64),
        savings=np.asarray(sav, dtype=float),
        risky=np.asarray(ris, dtype=float),
        education=np.asarray(edu, dtype=float),
        age=np.asarray(age, dtype=np.int64) if olg else None,
        next_id=n,
    )
    if olg:
        # Stylized back-fill of pension history so initial retirees are not
        # benefit-less: assume contribution years since work start.
        start = cfg.demographics.work_start_age
        years = np.clip(
            np.minimum(pop.age, cfg.demographics.retirement_age) - start, 0, None
        )
        pop.contribution_years = years.astype(np.int64)
    return pop


def _resample_csv(path: str, n: int, gen: np.random.Generator):
    rows = load_population_csv(path)
    idx = (
        gen.choice(len(rows), size=n, replace=False)
        if len(rows) >= n
        else gen.choice(len(rows), size=n, replace=True)
    )
    arr = rows[idx]
    return arr[:, 0].astype(np.int64), arr[:, 1], arr[:, 2], arr[:, 3]


def load_population_csv(path: str) -> np.ndarray:
    """Read microdata rows (age, education, savings, risky); header required.

    Malformed rows are rejected with their 1-based data row index.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["age", "education", "savings", "risky"]
        if header is None or [h.strip().lower() for h in header] != expected:
            raise ValueError(f"population CSV must start with header {','.join(expected)}")
        rows = []
        for i, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                age, edu, sav, ris = (float(c) for c in row[:4])
                if len(row) != 4 or age < 0 or edu <= 0:
                    raise ValueError
            except ValueError:
                raise ValueError(f"population CSV: malformed row {i}") from None
            rows.append((age, edu, sav, ris))
    if not rows:
        raise ValueError("population CSV has no data rows")
    return np.asarray(rows, dtype=float)
