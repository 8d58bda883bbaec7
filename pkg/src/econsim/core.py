"""Shared primitives: config schema, splittable RNG, and episode bookkeeping.

Every quantity in the engine is a 64-bit float in model units (one step is
one model year; money has no external currency semantics). Randomness is
counter-based and splittable: a stream is fully identified by (seed, path),
so per-agent or per-phase work can be reordered or parallelized without
changing a single draw.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, is_dataclass, replace
from typing import Optional

import numpy as np

RATE_MIN = -1.0
RATE_MAX = 10.0

INDIVIDUAL_KINDS = ("ramsey", "olg")
GOVERNMENT_KINDS = ("fiscal", "central_bank", "pension")
BANK_KINDS = ("non_profit", "commercial")
FIRM_KINDS = ("perfect", "monopoly", "oligopoly", "monopolistic")

# Annuity divisor table is defined on retirement ages 40..70.
RETIREMENT_AGE_MIN = 40
RETIREMENT_AGE_MAX = 70


def is_valid_rate(x: float) -> bool:
    """Interest/return rates live in [-1, +10]; anything else is a config bug."""
    return np.isfinite(x) and RATE_MIN <= x <= RATE_MAX


def is_probability(x: float) -> bool:
    return np.isfinite(x) and 0.0 <= x <= 1.0


@dataclass(frozen=True)
class EpisodeClock:
    """Step counter for one episode; one step is one model year."""

    t: int = 0
    horizon: int = 300

    def __post_init__(self):
        if not 0 <= self.t <= self.horizon:
            raise ValueError(f"clock out of range: t={self.t}, horizon={self.horizon}")

    def tick(self) -> "EpisodeClock":
        return EpisodeClock(self.t + 1, self.horizon)


@dataclass(frozen=True)
class RngStream:
    """Deterministic splittable randomness.

    A stream is identified by a 64-bit seed and a hierarchical label path
    (episode -> step -> purpose). Two streams with equal (seed, path) produce
    identical draws in any process; sibling streams are statistically
    independent because the Philox key is a cryptographic hash of the path.
    """

    seed: int
    path: tuple[str, ...] = ()

    def child(self, label: str) -> "RngStream":
        if not label:
            raise ValueError("stream label must be nonempty")
        return RngStream(self.seed, self.path + (label,))

    def generator(self) -> np.random.Generator:
        tag = f"{self.seed}:" + "/".join(self.path)
        key = int.from_bytes(hashlib.sha256(tag.encode()).digest()[:16], "little")
        return np.random.Generator(np.random.Philox(key=key))


def derive_stream(parent: RngStream, label: str) -> RngStream:
    """Pure child-stream derivation; derive_stream(s, x) is replay-stable."""
    return parent.child(label)


# ---------------------------------------------------------------------------
# Configuration schema
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PopulationConfig:
    size: int = 1000
    # Initial age draw: uniform 18..64 tapered into a stylized pyramid
    # (weight falls linearly from 1.0 at age_min to `pyramid_taper` at age_init_max).
    age_min: int = 18
    age_init_max: int = 64
    pyramid_taper: float = 0.5
    education_sigma: float = 0.25  # lognormal around 1.0
    wealth_median: float = 2.0e4
    wealth_sigma: float = 0.6
    risky_share: float = 0.2  # initial split of wealth into the risky asset
    init_csv: Optional[str] = None  # columns: age,education,savings,risky


@dataclass(frozen=True)
class PreferenceConfig:
    beta: float = 0.96
    sigma: float = 2.0  # relative risk aversion
    gamma: float = 2.0  # inverse Frisch elasticity
    utility_floor: float = -1.0e6  # reward when consumption is non-positive
    consumption_floor: float = 1.0  # subsistence consumption for insolvent agents
    # Hours are divided by this scale inside the disutility term so that the
    # labor argument is an effort ratio; None means "use h_max".
    utility_labor_scale: Optional[float] = None


@dataclass(frozen=True)
class TechnologyConfig:
    alpha: float = 0.33
    delta: float = 0.05
    sigma_z: float = 0.0
    epsilon: float = 6.0  # CES elasticity (monopolistic competition)
    tfp0: float = 1.0


@dataclass(frozen=True)
class TargetConfig:
    pi_star: float = 0.02
    g_star: float = 0.05
    lambda_pi: float = 0.5
    phi0: float = 0.10  # initial reserve requirement
    iota_floor: float = -0.05


@dataclass(frozen=True)
class FiscalConfig:
    tau: float = 0.15
    xi: float = 0.06
    tau_a: float = 0.0
    xi_a: float = 0.0
    g_frac: float = 0.10  # spending share of lagged GDP
    debt0: float = 0.0
    objective: str = "gdp-growth"  # gdp-growth | equality | welfare


@dataclass(frozen=True)
class PensionConfig:
    tau_p: float = 0.08
    k: float = 0.0  # required fund growth rate
    fund0_per_capita: float = 1500.0
    hard_stop: bool = False  # terminate the episode when the fund depletes
    tau_p_max: float = 0.20


@dataclass(frozen=True)
class DemographicsConfig:
    birth_rate: float = 0.011
    age_max: int = 100
    work_start_age: int = 18
    retirement_age: int = 60  # statutory default; pension authority may move it


@dataclass(frozen=True)
class RiskyConfig:
    premium: float = 0.02  # mean excess return over the deposit rate
    sigma: float = 0.10


@dataclass(frozen=True)
class MarketConfig:
    kappa: float = 0.2  # tatonnement gain for the competitive goods price
    a_min: float = 0.0  # household asset floor
    choice_temperature: float = 1.0  # oligopoly logit temperature (money units)
    initial_labor_ratio: float = 1.0 / 3.0  # bootstrap guess for lagged labor


@dataclass(frozen=True)
class TerminationConfig:
    horizon: int = 300
    debt_gdp_cap: float = 10.0
    insolvent_share_cap: float = 0.95


@dataclass(frozen=True)
class EconomyConfig:
    """Full scenario-independent economy description (the in-memory schema)."""

    individual: str = "olg"
    governments: tuple[str, ...] = ()
    bank: str = "non_profit"
    firms: str = "perfect"
    n_firms: int = 1
    h_max: float = 2512.0
    base_rate: float = 0.03  # risk-free anchor when no central bank is active
    population: PopulationConfig = field(default_factory=PopulationConfig)
    preferences: PreferenceConfig = field(default_factory=PreferenceConfig)
    technology: TechnologyConfig = field(default_factory=TechnologyConfig)
    targets: TargetConfig = field(default_factory=TargetConfig)
    fiscal: FiscalConfig = field(default_factory=FiscalConfig)
    pension: PensionConfig = field(default_factory=PensionConfig)
    demographics: DemographicsConfig = field(default_factory=DemographicsConfig)
    risky: RiskyConfig = field(default_factory=RiskyConfig)
    market: MarketConfig = field(default_factory=MarketConfig)
    termination: TerminationConfig = field(default_factory=TerminationConfig)

    def utility_labor_scale(self) -> float:
        s = self.preferences.utility_labor_scale
        return float(self.h_max if s is None else s)


def validate_config(cfg: EconomyConfig) -> list[str]:
    """Return all invariant violations (empty list means the config is usable).

    Violations are data, not exceptions, so a CLI can report every problem in
    one pass.
    """
    v: list[str] = []

    if cfg.individual not in INDIVIDUAL_KINDS:
        v.append(f"individual: unknown kind {cfg.individual!r}")
    for g in cfg.governments:
        if g not in GOVERNMENT_KINDS:
            v.append(f"governments: unknown kind {g!r}")
    if len(set(cfg.governments)) != len(cfg.governments):
        v.append("governments: duplicate entries")
    if cfg.bank not in BANK_KINDS:
        v.append(f"bank: unknown kind {cfg.bank!r}")
    if cfg.firms not in FIRM_KINDS:
        v.append(f"firms: unknown kind {cfg.firms!r}")

    if "pension" in cfg.governments and cfg.individual != "olg":
        v.append("pension requires OLG individuals")

    p = cfg.preferences
    if not (0.0 < p.beta < 1.0):
        v.append("beta must be in (0,1)")
    if not p.sigma > 0.0:
        v.append("sigma must be > 0")
    if not p.gamma > 0.0:
        v.append("gamma must be > 0")

    t = cfg.technology
    if not (0.0 < t.alpha < 1.0):
        v.append("alpha must be in (0,1)")
    if not (0.0 <= t.delta <= 1.0):
        v.append("delta must be in [0,1]")
    if t.sigma_z < 0.0:
        v.append("sigma_z must be >= 0")
    if cfg.firms == "monopolistic" and not t.epsilon > 1.0:
        v.append("epsilon must be > 1 under monopolistic competition")

    if cfg.population.size < 1:
        v.append("population size must be >= 1")
    if cfg.n_firms < 1:
        v.append("n_firms must be >= 1")
    if cfg.firms == "oligopoly" and cfg.n_firms < 2:
        v.append("oligopoly requires n_firms >= 2")
    if cfg.firms in ("perfect", "monopoly") and cfg.n_firms != 1:
        v.append(f"{cfg.firms} market uses a single representative firm (n_firms=1)")

    f = cfg.fiscal
    for name, rate in (("tau", f.tau), ("tau_a", f.tau_a)):
        if not is_probability(rate):
            v.append(f"fiscal.{name} must be in [0,1]")
    for name, x in (("xi", f.xi), ("xi_a", f.xi_a)):
        if abs(x - 1.0) < 1e-12:
            v.append(f"fiscal.{name} must differ from 1 (formula singularity)")
    if not is_probability(f.g_frac):
        v.append("fiscal.g_frac must be in [0,1]")
    if not np.isfinite(f.debt0):
        v.append("fiscal.debt0 must be finite")
    if f.objective not in ("gdp-growth", "equality", "welfare"):
        v.append(f"fiscal.objective: unknown objective {f.objective!r}")

    if not is_probability(cfg.pension.tau_p):
        v.append("pension.tau_p must be in [0,1]")
    if not RETIREMENT_AGE_MIN <= cfg.demographics.retirement_age <= RETIREMENT_AGE_MAX:
        v.append(
            f"retirement_age must be within the annuity table domain "
            f"[{RETIREMENT_AGE_MIN},{RETIREMENT_AGE_MAX}]"
        )
    if not is_probability(cfg.demographics.birth_rate):
        v.append("birth_rate must be in [0,1]")
    if cfg.demographics.age_max <= cfg.demographics.retirement_age:
        v.append("age_max must exceed retirement_age")
    if not 0 <= cfg.demographics.work_start_age <= cfg.demographics.retirement_age:
        v.append("work_start_age must be in [0, retirement_age]")

    if not is_valid_rate(cfg.base_rate):
        v.append("base_rate out of the permitted rate range [-1, 10]")
    if not is_valid_rate(cfg.risky.premium):
        v.append("risky.premium out of the permitted rate range [-1, 10]")
    if cfg.risky.sigma < 0.0:
        v.append("risky.sigma must be >= 0")
    if not is_probability(cfg.targets.phi0):
        v.append("targets.phi0 must be in [0,1]")
    if cfg.targets.lambda_pi < 0.0:
        v.append("targets.lambda_pi must be >= 0")

    if cfg.h_max <= 0.0:
        v.append("h_max must be > 0")
    if not cfg.market.kappa > 0.0:
        v.append("market.kappa must be > 0")
    if cfg.market.a_min < 0.0:
        v.append("market.a_min must be >= 0")

    if cfg.termination.horizon < 1:
        v.append("horizon must be >= 1")
    if cfg.termination.debt_gdp_cap <= 0.0:
        v.append("debt_gdp_cap must be > 0")
    if not is_probability(cfg.termination.insolvent_share_cap):
        v.append("insolvent_share_cap must be in [0,1]")

    pop = cfg.population
    if pop.init_csv is None:
        if not 0 <= pop.age_min <= pop.age_init_max <= cfg.demographics.age_max:
            v.append("initial age range must satisfy 0 <= age_min <= age_init_max <= age_max")
        if pop.wealth_median <= 0.0 or pop.wealth_sigma < 0.0:
            v.append("initial wealth distribution must have positive median and sigma >= 0")
        if not is_probability(pop.risky_share):
            v.append("population.risky_share must be in [0,1]")

    return v


def config_replace(cfg: EconomyConfig, path: str, value) -> EconomyConfig:
    """Return a copy of `cfg` with the dotted `path` (e.g. "pension.tau_p") replaced.

    Used by sweeps and CLI --set overrides; raises KeyError on unknown paths.
    """
    parts = path.split(".")
    return _replace_path(cfg, parts, value)


def _replace_path(node, parts: list[str], value):
    name = parts[0]
    if not is_dataclass(node) or name not in {f.name for f in fields(node)}:
        raise KeyError(f"unknown config path segment {name!r}")
    if len(parts) == 1:
        current = getattr(node, name)
        if is_dataclass(current):
            raise KeyError(f"config path {name!r} addresses a section, not a value")
        value = _coerce_like(current, value)
        return replace(node, **{name: value})
    return replace(node, **{name: _replace_path(getattr(node, name), parts[1:], value)})


def _coerce_like(current, value):
    if isinstance(current, bool):
        if isinstance(value, str):
            return value.lower() in ("1", "true", "yes", "on")
        return bool(value)
    if isinstance(current, int) and not isinstance(current, bool):
        return int(float(value))
    if isinstance(current, float):
        return float(value)
    if isinstance(current, tuple):
        if isinstance(value, str):
            value = [s for s in value.split(",") if s]
        return tuple(value)
    return value
