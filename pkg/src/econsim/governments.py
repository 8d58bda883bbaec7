"""Fiscal authority, central bank, and pension authority mechanics.

Tax evaluation is pure and broadcasts over agent arrays; state mutation
(budget, fund) happens in the engine's serialized aggregation phase.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .metrics import gini

# Annuity divisor by statutory retirement age (ages 40..70 inclusive).
ANNUITY_TABLE: dict[int, int] = {
    40: 233, 41: 230, 42: 226, 43: 223, 44: 220,
    45: 216, 46: 212, 47: 208, 48: 204, 49: 199,
    50: 195, 51: 190, 52: 185, 53: 180, 54: 175,
    55: 170, 56: 164, 57: 158, 58: 152, 59: 145,
    60: 139, 61: 132, 62: 125, 63: 117, 64: 109,
    65: 101, 66: 93, 67: 84, 68: 75, 69: 65,
    70: 56,
}

FISCAL_OBJECTIVES = ("gdp-growth", "equality", "welfare")


@dataclass
class FiscalState:
    debt: float = 0.0
    tau: float = 0.15
    xi: float = 0.06
    tau_a: float = 0.0
    xi_a: float = 0.0
    g_frac: float = 0.10
    revenue: float = 0.0  # realized T_t of the latest step
    brackets: Optional[list[tuple[float, float]]] = None  # overrides the HSV income tax


@dataclass
class CentralBankState:
    iota: float = 0.03
    phi: float = 0.10
    pi_star: float = 0.02
    g_star: float = 0.05
    lambda_pi: float = 0.5


@dataclass
class PensionState:
    fund: float = 0.0
    fund_return: float = 0.03
    tau_p: float = 0.08
    retirement_age: int = 60
    k: float = 0.0
    avg_wage: float = 0.0  # national average wage income of current workers


@dataclass(frozen=True)
class GovObservation:
    """Lagged macro vector shared identically by all active authorities."""

    debt: float
    wage: float
    price: float
    inflation: float
    gdp: float
    income_deciles: np.ndarray  # 10-point quantile summary of I_t

    def vector(self) -> np.ndarray:
        return np.concatenate(
            [[self.debt, self.wage, self.price, self.inflation, self.gdp],
             self.income_deciles]
        )


def hsv_income_tax(income, tau: float, xi: float):
    """Nonlinear tax T(i) = i - (1 - tau) * i**(1-xi) / (1-xi).

    xi = 0 reduces to the linear tax tau * i; negative results are transfers
    and are returned as such. xi == 1 is a config-time parameter error.
    """
    if abs(xi - 1.0) < 1e-12:
        raise ValueError("xi must differ from 1 (formula singularity)")
    i = np.asarray(income, dtype=float)
    if np.any(i < 0):
        raise ValueError("taxable income must be nonnegative")
    out = i - (1.0 - tau) * i ** (1.0 - xi) / (1.0 - xi)
    return float(out) if np.ndim(income) == 0 else out


def hsv_asset_tax(assets, tau_a: float, xi_a: float):
    """Asset-side twin of hsv_income_tax with parameters (tau_a, xi_a)."""
    return hsv_income_tax(assets, tau_a, xi_a)


def validate_brackets(brackets: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    if not brackets:
        raise ValueError("bracket schedule must be nonempty")
    out = [(float(lo), float(rate)) for lo, rate in brackets]
    if out[0][0] != 0.0:
        raise ValueError("bracket schedule must start at lower bound 0")
    lows = [lo for lo, _ in out]
    if sorted(lows) != lows or len(set(lows)) != len(lows):
        raise ValueError("bracket lower bounds must be strictly increasing")
    if any(not 0.0 <= r <= 1.0 for _, r in out):
        raise ValueError("marginal rates must be in [0,1]")
    return out


def progressive_bracket_tax(income, brackets: Sequence[tuple[float, float]]):
    """Piecewise-linear marginal schedule; continuous in income by construction."""
    sched = validate_brackets(brackets)
    lows = np.array([lo for lo, _ in sched])
    rates = np.array([r for _, r in sched])
    i = np.asarray(income, dtype=float)
    uppers = np.append(lows[1:], np.inf)
    taxed = np.clip(i[..., None], lows, uppers) - lows
    out = np.sum(taxed * rates, axis=-1)
    return float(out) if np.ndim(income) == 0 else out


def load_bracket_csv(path: str) -> list[tuple[float, float]]:
    """Bracket schedule from CSV with header lower_bound,marginal_rate."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["lower_bound", "marginal_rate"]:
            raise ValueError("bracket CSV must start with header lower_bound,marginal_rate")
        rows = []
        for i, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                raise ValueError(f"bracket CSV: malformed row {i}") from None
    return validate_brackets(rows)


def fiscal_budget_step(debt: float, r_prev: float, spending: float, revenue: float) -> float:
    """Debt law of motion: B' = (1 + r) B + G - T, exactly."""
    return (1.0 + r_prev) * debt + spending - revenue


def fiscal_reward(objective: str, *, gdp: float, gdp_prev: float,
                  incomes: Optional[np.ndarray] = None,
                  utilities: Optional[np.ndarray] = None) -> tuple[float, bool]:
    """Reward under the selected mandate; the flag marks an output collapse."""
    if objective not in FISCAL_OBJECTIVES:
        raise ValueError(f"unknown fiscal objective {objective!r}")
    if objective == "gdp-growth":
        if gdp_prev <= 0.0:
            return 0.0, True
        return gdp / gdp_prev - 1.0, False
    if objective == "equality":
        return 1.0 - gini(np.maximum(incomes, 0.0)), False
    return float(np.sum(utilities)), False


def central_bank_reward(inflation: float, growth: float, cb: CentralBankState) -> float:
    """exp(-[(pi - pi*)^2 + lambda_pi (g - g*)^2]); in (0, 1], peaks on target."""
    loss = (inflation - cb.pi_star) ** 2 + cb.lambda_pi * (growth - cb.g_star) ** 2
    return float(np.exp(-loss))


def stabilization_loss(inflation: float, growth: float, cb: CentralBankState) -> float:
    """Quadratic deviation from targets, exposed as a diagnostic only."""
    return (inflation - cb.pi_star) ** 2 + cb.lambda_pi * (growth - cb.g_star) ** 2


def pension_fund_step(ps: PensionState, contributions: float,
                      payouts: float) -> tuple[float, bool]:
    """Fund law of motion F' = (1 + r_f) F + in - out.

    The floor F' >= (1 + k) F is a soft constraint: the returned flag is False
    when it is violated and the simulation continues (depletion is F' < 0).
    """
    fund_next = (1.0 + ps.fund_return) * ps.fund + contributions - payouts
    solvent = fund_next >= (1.0 + ps.k) * ps.fund
    return fund_next, bool(solvent)


def annuity_factor(retirement_age: int) -> int:
    """Exact table lookup of the annuity divisor; defined on ages 40..70."""
    try:
        return ANNUITY_TABLE[int(retirement_age)]
    except KeyError:
        raise ValueError(
            f"retirement age {retirement_age} outside annuity table domain [40,70]"
        ) from None


def pension_benefit(*, avg_wage: float, own_wage_mean, contribution_years,
                    personal_account, retirement_age: int):
    """Yearly benefit: basic component plus personal-account component.

    basic = ((E_avg + E_ind) / 2) * T_p * 0.01, personal = A_personal / M with
    M from the annuity table. Arrays broadcast over retirees. A zero
    contribution history zeroes the basic component only.
    """
    m = annuity_factor(retirement_age)
    basic = (avg_wage + np.asarray(own_wage_mean, dtype=float)) / 2.0 \
        * np.asarray(contribution_years, dtype=float) * 0.01
    personal = np.asarray(personal_account, dtype=float) / m
    out = basic + personal
    return float(out) if np.ndim(out) == 0 else out


def accumulate_personal_account(prior, contribution, fund_return: float):
    """Recursive form of the compounded contribution sum: A' = (1+r_f) A + P^y."""
    out = (1.0 + fund_return) * np.asarray(prior, dtype=float) + contribution
    return float(out) if np.ndim(out) == 0 else out


def pension_reward(gdp: float, gdp_prev: float) -> tuple[float, bool]:
    """Growth-linked sustainability reward Y_t / Y_{t-1} - 1 (collapse flagged)."""
    if gdp_prev <= 0.0:
        return 0.0, True
    return gdp / gdp_prev - 1.0, False
