"""Built-in baseline decision rules for every role.

Three families ship with the engine: classical economic rules (Taylor-rule
central bank, top-rate optimal-tax fiscal schedule), expert adjustment rules
(trend-triggered pension reform), and data replay (time-indexed action
schedules, e.g. a fixed progressive bracket table). Households get a
parameterized lifecycle heuristic. Every policy is a pure function of
(observation, params, derived RNG), so replays are bit-deterministic, and all
emitted actions pass the same engine validation as external ones.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .core import EconomyConfig, RETIREMENT_AGE_MAX
from .governments import validate_brackets

POLICY_KINDS = {
    "households": ("heuristic", "constant", "external"),
    "fiscal": ("constant", "saez", "replay", "brackets", "external"),
    "central_bank": ("constant", "taylor", "replay", "external"),
    "pension": ("constant", "imf", "replay", "external"),
    "bank": ("spread", "constant", "replay", "external"),
    "firms": ("markup", "constant", "replay", "external"),
}


@dataclass(frozen=True)
class PolicyBinding:
    """role -> (kind, params); every decision-making agent needs exactly one."""

    role: str
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.role not in POLICY_KINDS:
            raise ValueError(f"unknown role {self.role!r}")
        if self.kind not in POLICY_KINDS[self.role]:
            raise ValueError(f"role {self.role!r} has no policy kind {self.kind!r}")


# ---------------------------------------------------------------------------
# Replay schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReplaySchedule:
    """Time-indexed action rows; must cover t=0 and be sorted by t."""

    rows: tuple[tuple[int, dict], ...]
    hold_last: bool = True

    def __post_init__(self):
        if not self.rows:
            raise ValueError("replay schedule must be nonempty")
        ts = [t for t, _ in self.rows]
        if ts != sorted(ts) or len(set(ts)) != len(ts):
            raise ValueError("replay rows must be sorted by t without duplicates")
        if ts[0] != 0:
            raise ValueError("replay schedule must cover t=0")


def replay_policy(schedule: ReplaySchedule, t: int) -> dict:
    """Action scheduled at step t (hold-last or error beyond the end)."""
    if t < schedule.rows[0][0]:
        raise ValueError(f"replay queried before schedule start: t={t}")
    current = None
    for row_t, action in schedule.rows:
        if row_t > t:
            break
        current = (row_t, action)
    row_t, action = current
    exact = any(rt == t for rt, _ in schedule.rows)
    if not exact and not schedule.hold_last and t > schedule.rows[-1][0]:
        raise ValueError(f"replay schedule ended before t={t} and hold_last is off")
    return dict(action)


def load_replay_csv(path: str, hold_last: bool = True) -> ReplaySchedule:
    """Schedule from CSV: first column t, remaining columns action fields."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0].strip().lower() != "t":
            raise ValueError("replay CSV must start with a 't' column header")
        fields = [h.strip() for h in header[1:]]
        rows = []
        for i, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                t = int(float(row[0]))
                action = {f: float(v) for f, v in zip(fields, row[1:])}
            except (ValueError, IndexError):
                raise ValueError(f"replay CSV: malformed row {i}") from None
            rows.append((t, action))
    return ReplaySchedule(tuple(rows), hold_last=hold_last)


# ---------------------------------------------------------------------------
# Economic-method rules
# ---------------------------------------------------------------------------

def taylor_rule(inflation: float, growth: float, *, r_star: float = 0.02,
                pi_star: float = 0.02, g_star: float = 0.05,
                a_pi: float = 0.5, a_g: float = 0.5,
                iota_min: float = 0.0) -> float:
    """Nominal-rate rule: iota = r* + pi + a_pi (pi - pi*) + a_g (g - g*),
    floored at iota_min (zero by default; a negative floor is allowed)."""
    iota = r_star + inflation + a_pi * (inflation - pi_star) + a_g * (growth - g_star)
    return max(iota, iota_min)


def saez_top_rate(incomes: Sequence[float], elasticity: float,
                  welfare_weight: float) -> tuple[float, float, float]:
    """Top marginal rate from the optimal-tax formula.

    Returns (top rate, top-decile threshold, Pareto tail parameter a), where
    a = mean / (mean - threshold) over the top decile and
    rate = (1 - gbar) / (1 - gbar + a * e). Degenerate distributions fall back
    to a = inf, i.e. a zero top rate adjustment (rate 0 when gbar >= 1).
    """
    x = np.asarray(incomes, dtype=float)
    if x.size < 10:
        raise ValueError("top-rate estimation needs at least 10 observations")
    threshold = float(np.quantile(x, 0.9))
    top = x[x >= threshold]
    mean_top = float(top.mean())
    if mean_top <= threshold or threshold <= 0.0:
        return 0.0 if welfare_weight >= 1.0 else 1.0, threshold, float("inf")
    a = mean_top / (mean_top - threshold)
    gbar = welfare_weight
    rate = (1.0 - gbar) / (1.0 - gbar + a * elasticity)
    return float(np.clip(rate, 0.0, 1.0)), threshold, a


def saez_tax_policy(incomes: Sequence[float], *, elasticity: float = 0.25,
                    welfare_weight: float = 0.0, base_rate: float = 0.10,
                    g_frac: float = 0.10) -> dict:
    """Fiscal action: two-bracket schedule with the computed top rate.

    A degenerate (zero-variance) income distribution emits the base-rate-only
    schedule.
    """
    x = np.asarray(incomes, dtype=float)
    if float(np.std(x)) == 0.0:
        return {"brackets": validate_brackets([(0.0, base_rate)]), "g_frac": g_frac}
    rate, threshold, _ = saez_top_rate(x, elasticity, welfare_weight)
    if threshold <= 0.0:
        return {"brackets": validate_brackets([(0.0, base_rate)]), "g_frac": g_frac}
    brackets = [(0.0, base_rate), (threshold, max(rate, base_rate))]
    return {"brackets": validate_brackets(brackets), "g_frac": g_frac}


def imf_pension_rule(fund_history: Sequence[float], *, retirement_age: int,
                     tau_p: float, k: float, depletion_horizon: float = 10.0,
                     delta_age: int = 1, delta_tau: float = 0.005,
                     tau_p_max: float = 0.20, trend_window: int = 5) -> dict:
    """Trend-triggered adjustment: when the fund's linear projection depletes
    within the horizon, raise the retirement age (capped at the annuity-table
    maximum) and the contribution rate (capped at tau_p_max); otherwise hold."""
    hist = np.asarray(fund_history, dtype=float)
    if hist.size < 2:
        raise ValueError("fund trend needs at least 2 observations")
    window = hist[-trend_window:]
    slope = float(np.polyfit(np.arange(window.size), window, 1)[0])
    current = float(hist[-1])
    triggered = current < 0.0 or (
        slope < 0.0 and current / -slope <= depletion_horizon)
    if triggered:
        retirement_age = min(retirement_age + delta_age, RETIREMENT_AGE_MAX)
        tau_p = min(tau_p + delta_tau, tau_p_max)
    return {"retirement_age": retirement_age, "tau_p": tau_p, "k": k}


# ---------------------------------------------------------------------------
# Heuristic household rule
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HouseholdProfile:
    """Lifecycle shape parameters; defaults are tuned only for the documented
    shape properties (single-peaked labor and consumption over age)."""

    # Labor effort: bump peaking mid-career.
    lambda_base: float = 0.22
    lambda_peak: float = 0.58
    lambda_peak_age: float = 45.0
    lambda_spread: float = 24.0
    # Saving share by age (interpolated control points).
    alpha_ages: tuple[float, ...] = (0.0, 16.0, 25.0, 45.0, 60.0, 75.0, 100.0)
    alpha_values: tuple[float, ...] = (0.99, 0.96, 0.92, 0.90, 0.94, 0.945, 0.95)
    # Risky share declining with age.
    theta_young: float = 0.45
    theta_slope: float = 0.004
    theta_floor: float = 0.05
    # Ramsey (no-age) constants.
    ramsey_alpha: float = 0.92
    ramsey_lambda: float = 0.42
    ramsey_theta: float = 0.30


def heuristic_household_policy(age: Optional[float], profile: HouseholdProfile,
                               *, retired: bool = False) -> tuple[float, float, float]:
    """Single-agent view of the lifecycle rule (arrays go through the batch path)."""
    a, l, t = _heuristic_arrays(
        None if age is None else np.asarray([age], dtype=float),
        profile,
        np.asarray([retired]),
    )
    return float(a[0]), float(l[0]), float(t[0])


def _heuristic_arrays(ages: Optional[np.ndarray], profile: HouseholdProfile,
                      retired: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if ages is None:
        n = retired.size
        return (np.full(n, profile.ramsey_alpha),
                np.full(n, profile.ramsey_lambda),
                np.full(n, profile.ramsey_theta))
    lam = profile.lambda_base + (profile.lambda_peak - profile.lambda_base) * np.exp(
        -((ages - profile.lambda_peak_age) / profile.lambda_spread) ** 2)
    lam = np.where(retired, 0.0, np.clip(lam, 0.0, 1.0))
    alpha = np.interp(ages, profile.alpha_ages, profile.alpha_values)
    theta = np.clip(profile.theta_young - profile.theta_slope * ages,
                    profile.theta_floor, 1.0)
    return np.clip(alpha, 0.0, 1.0), lam, np.clip(theta, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Policy objects driving the episode runner
# ---------------------------------------------------------------------------

class HouseholdPolicy:
    def __init__(self, binding: PolicyBinding, cfg: EconomyConfig):
        self.kind = binding.kind
        p = dict(binding.params)
        if self.kind == "heuristic":
            known = {f for f in HouseholdProfile.__dataclass_fields__}
            bad = set(p) - known
            if bad:
                raise ValueError(f"unknown heuristic profile params: {sorted(bad)}")
            self.profile = replace(HouseholdProfile(), **p)
        elif self.kind == "constant":
            self.constant = (float(p.get("allocation", 0.9)),
                             float(p.get("labor", 0.4)),
                             float(p.get("investment", 0.2)))

    def act_batch(self, private_obs: np.ndarray, retired: np.ndarray,
                  t: int) -> np.ndarray:
        n = private_obs.shape[0]
        if self.kind == "constant":
            out = np.tile(self.constant, (n, 1))
            out[retired, 1] = 0.0
            return out
        ages = private_obs[:, 2] if private_obs.shape[1] > 2 else None
        alpha, lam, theta = _heuristic_arrays(ages, self.profile, retired)
        return np.column_stack([alpha, lam, theta])


class GovernmentPolicy:
    def __init__(self, role: str, binding: PolicyBinding, cfg: EconomyConfig):
        self.role = role
        self.kind = binding.kind
        self.params = dict(binding.params)
        self.cfg = cfg
        if self.kind == "replay":
            path = self.params.get("file")
            if path is None:
                raise ValueError(f"{role}: replay policy needs a 'file' param")
            self.schedule = load_replay_csv(
                path, hold_last=bool(self.params.get("hold_last", True)))
        if self.kind == "brackets":
            from .governments import load_bracket_csv
            path = self.params.get("file")
            if path is None:
                raise ValueError("brackets policy needs a 'file' param")
            self.brackets = load_bracket_csv(path)
        self._fund_history: list[float] = []

    def act(self, gov_obs, t: int, extras: dict) -> dict:
        cfg = self.cfg
        if self.kind == "replay":
            return replay_policy(self.schedule, t)
        if self.role == "fiscal":
            if self.kind == "constant":
                f = cfg.fiscal
                return {"tau": self.params.get("tau", f.tau),
                        "xi": self.params.get("xi", f.xi),
                        "tau_a": self.params.get("tau_a", f.tau_a),
                        "xi_a": self.params.get("xi_a", f.xi_a),
                        "g_frac": self.params.get("g_frac", f.g_frac)}
            if self.kind == "brackets":
                return {"brackets": self.brackets,
                        "g_frac": self.params.get("g_frac", cfg.fiscal.g_frac)}
            if self.kind == "saez":
                return saez_tax_policy(
                    extras["incomes"],
                    elasticity=self.params.get("elasticity", 0.25),
                    welfare_weight=self.params.get("welfare_weight", 0.0),
                    base_rate=self.params.get("base_rate", 0.10),
                    g_frac=self.params.get("g_frac", cfg.fiscal.g_frac))
        if self.role == "central_bank":
            if self.kind == "constant":
                return {"iota": self.params.get("iota", cfg.base_rate),
                        "phi": self.params.get("phi", cfg.targets.phi0)}
            if self.kind == "taylor":
                iota = taylor_rule(
                    gov_obs.inflation, extras["growth"],
                    r_star=self.params.get("r_star", 0.02),
                    pi_star=self.params.get("pi_star", cfg.targets.pi_star),
                    g_star=self.params.get("g_star", cfg.targets.g_star),
                    a_pi=self.params.get("a_pi", 0.5),
                    a_g=self.params.get("a_g", 0.5),
                    iota_min=self.params.get("iota_min", 0.0))
                return {"iota": iota, "phi": self.params.get("phi", cfg.targets.phi0)}
        if self.role == "pension":
            if self.kind == "constant":
                return {"retirement_age": self.params.get(
                            "retirement_age", cfg.demographics.retirement_age),
                        "tau_p": self.params.get("tau_p", cfg.pension.tau_p),
                        "k": self.params.get("k", cfg.pension.k)}
            if self.kind == "imf":
                self._fund_history.append(extras["pension_fund"])
                if len(self._fund_history) < 2:
                    return {"retirement_age": extras["retirement_age"],
                            "tau_p": extras["tau_p"], "k": cfg.pension.k}
                return imf_pension_rule(
                    self._fund_history,
                    retirement_age=extras["retirement_age"],
                    tau_p=extras["tau_p"], k=cfg.pension.k,
                    depletion_horizon=self.params.get("depletion_horizon", 10.0),
                    delta_age=int(self.params.get("delta_age", 1)),
                    delta_tau=self.params.get("delta_tau", 0.005),
                    tau_p_max=cfg.pension.tau_p_max)
        raise ValueError(f"unsupported policy {self.kind!r} for role {self.role!r}")


class BankPolicy:
    def __init__(self, binding: PolicyBinding, cfg: EconomyConfig):
        self.kind = binding.kind
        self.params = dict(binding.params)
        if self.kind == "replay":
            self.schedule = load_replay_csv(
                self.params["file"], hold_last=bool(self.params.get("hold_last", True)))

    def act(self, bank_obs: np.ndarray, t: int) -> tuple[float, float]:
        if self.kind == "replay":
            a = replay_policy(self.schedule, t)
            return a["deposit_rate"], a["lending_rate"]
        if self.kind == "constant":
            return (float(self.params.get("deposit_rate", 0.02)),
                    float(self.params.get("lending_rate", 0.05)))
        # "spread": track the benchmark with a mid-corridor margin.
        iota = float(bank_obs[0])
        return iota - float(self.params.get("deposit_margin", 0.005)), \
            iota + float(self.params.get("lending_margin", 0.02))


class FirmPolicy:
    def __init__(self, binding: PolicyBinding, cfg: EconomyConfig):
        self.kind = binding.kind
        self.params = dict(binding.params)
        self.cfg = cfg
        if self.kind == "replay":
            self.schedule = load_replay_csv(
                self.params["file"], hold_last=bool(self.params.get("hold_last", True)))

    def act(self, firm_obs: np.ndarray, t: int) -> np.ndarray:
        from . import firms as firm_ops
        n = firm_obs.shape[0]
        if self.kind == "replay":
            a = replay_policy(self.schedule, t)
            return np.tile([a["price"], a["wage"]], (n, 1))
        if self.kind == "constant":
            return firm_obs[:, 3:5].copy()  # hold last posted (price, wage)
        # "markup": wage at the marginal product of the posted price, price at
        # a markup over unit cost with the configured capital-rent anchor.
        # Posted terms move at most `max_change` per step so a firm that lost
        # all its labor cannot post an unbounded wage.
        alpha = self.cfg.technology.alpha
        delta = self.cfg.technology.delta
        eps = float(self.params.get("epsilon", self.cfg.technology.epsilon))
        rent = float(self.params.get("rent", self.cfg.base_rate + delta))
        max_change = float(self.params.get("max_change", 0.25))
        capital, labor, tfp = firm_obs[:, 0], firm_obs[:, 1], firm_obs[:, 2]
        p_prev, w_prev = firm_obs[:, 3], firm_obs[:, 4]
        ratio = np.maximum(capital, 1e-9) / np.maximum(labor, 1e-9)
        wage = (1.0 - alpha) * p_prev * tfp * ratio**alpha
        wage = np.clip(wage, (1.0 - max_change) * w_prev, (1.0 + max_change) * w_prev)
        mc = firm_ops.marginal_cost(np.maximum(wage, 1e-9), rent, tfp, alpha)
        price = firm_ops.markup_price(mc, eps)
        price = np.clip(price, (1.0 - max_change) * p_prev, (1.0 + max_change) * p_prev)
        return np.column_stack([price, np.maximum(wage, 0.0)])


def make_policy(role: str, binding: PolicyBinding, cfg: EconomyConfig):
    if binding.kind == "external":
        return None
    if role == "households":
        return HouseholdPolicy(binding, cfg)
    if role in ("fiscal", "central_bank", "pension"):
        return GovernmentPolicy(role, binding, cfg)
    if role == "bank":
        return BankPolicy(binding, cfg)
    if role == "firms":
        return FirmPolicy(binding, cfg)
    raise ValueError(f"unknown role {role!r}")
