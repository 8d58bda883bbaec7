"""Production, pricing, and wage mechanics across the four market structures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import RngStream


@dataclass
class FirmState:
    capital: float
    labor: float
    tfp: float
    price: float
    wage: float
    kind: str = "perfect"  # perfect | monopoly | oligopoly | monopolistic


@dataclass(frozen=True)
class FirmAction:
    price: float
    wage: float

    def __post_init__(self):
        if not self.price > 0.0:
            raise ValueError("posted price must be > 0")
        if self.wage < 0.0:
            raise ValueError("posted wage must be >= 0")


@dataclass(frozen=True)
class TechnologyParams:
    alpha: float
    delta: float
    sigma_z: float = 0.0
    epsilon: float = 6.0
    n_firms: int = 1


def produce(tfp, capital, labor, alpha: float):
    """Cobb-Douglas output Z K^alpha L^(1-alpha); zero if either input is zero."""
    k = np.asarray(capital, dtype=float)
    l = np.asarray(labor, dtype=float)
    out = np.where((k > 0) & (l > 0),
                   tfp * np.where(k > 0, k, 1.0) ** alpha * np.where(l > 0, l, 1.0) ** (1.0 - alpha),
                   0.0)
    return float(out) if np.ndim(out) == 0 else out


def tfp_step(tfp, sigma_z: float, rng: RngStream):
    """Geometric random walk: log Z' = log Z + sigma_z * eps, eps ~ N(0,1)."""
    z = np.asarray(tfp, dtype=float)
    draws = rng.generator().standard_normal(z.shape if z.ndim else None)
    out = z * np.exp(sigma_z * draws)
    return float(out) if np.ndim(tfp) == 0 else out


def competitive_factor_prices(price, tfp, capital, labor, alpha: float):
    """Marginal-product factor prices W = (1-a) p Z (K/L)^a, R = a p Z (K/L)^(a-1).

    Output priced at these satisfies the zero-profit identity p Y = W L + R K.
    Degenerate inputs (K or L = 0) raise; the caller converts that into a
    termination check.
    """
    k = np.asarray(capital, dtype=float)
    l = np.asarray(labor, dtype=float)
    if np.any(k <= 0) or np.any(l <= 0):
        raise ValueError("degenerate market: competitive pricing requires K > 0 and L > 0")
    ratio = k / l
    wage = (1.0 - alpha) * price * tfp * ratio ** alpha
    rent = alpha * price * tfp * ratio ** (alpha - 1.0)
    if np.ndim(wage) == 0:
        return float(wage), float(rent)
    return wage, rent


def firm_profit(price, output, wage, labor, capital_rent, capital):
    """Profit p Y - W L - R K; the per-step reward of strategic firms."""
    out = price * output - wage * labor - capital_rent * capital
    return float(out) if np.ndim(out) == 0 else out


def capital_step(capital, investment, delta: float):
    """Capital accumulation K' = I + (1 - delta) K."""
    out = investment + (1.0 - delta) * np.asarray(capital, dtype=float)
    return float(out) if np.ndim(out) == 0 else out


def marginal_cost(wage, capital_rent, tfp, alpha: float):
    """Unit cost W^(1-a) R^a / (Z a^a (1-a)^(1-a)) from cost minimization."""
    denom = tfp * alpha**alpha * (1.0 - alpha) ** (1.0 - alpha)
    out = np.asarray(wage, dtype=float) ** (1.0 - alpha) \
        * np.asarray(capital_rent, dtype=float) ** alpha / denom
    return float(out) if np.ndim(out) == 0 else out


def markup_price(mc, epsilon: float):
    """Markup rule p = epsilon / (epsilon - 1) * MC; requires epsilon > 1."""
    if epsilon <= 1.0:
        raise ValueError("markup pricing requires epsilon > 1")
    out = epsilon / (epsilon - 1.0) * np.asarray(mc, dtype=float)
    return float(out) if np.ndim(mc) == 0 else out


def ces_price_index(prices, epsilon: float) -> float:
    """Composite price P = (sum p_j^(1-eps))^(1/(1-eps)) over differentiated goods."""
    p = np.asarray(prices, dtype=float)
    if p.size == 0:
        raise ValueError("price index over an empty firm list")
    if np.any(p <= 0):
        raise ValueError("all prices must be > 0")
    return float(np.sum(p ** (1.0 - epsilon)) ** (1.0 / (1.0 - epsilon)))


def ces_demand_split(spend, prices, epsilon: float) -> np.ndarray:
    """Per-firm quantities q_j = (p_j/P)^(-eps) * spend / P.

    Expenditure exhausts the budget: sum_j p_j q_j = spend exactly (up to
    rounding), by the CES share identity.
    """
    p = np.asarray(prices, dtype=float)
    index = ces_price_index(p, epsilon)
    return (p / index) ** (-epsilon) * (spend / index)


def monocomp_labor_demand(output, tfp, wage, capital_rent, alpha: float):
    """Labor input hitting target output at cost-minimizing K/L.

    L = (y/Z) ((1-a) R / (a W))^a with K = L * a W / ((1-a) R); production at
    (K, L) reconstructs y.
    """
    l = np.asarray(output, dtype=float) / tfp \
        * ((1.0 - alpha) * capital_rent / (alpha * np.asarray(wage, dtype=float))) ** alpha
    k = l * alpha * np.asarray(wage, dtype=float) / ((1.0 - alpha) * capital_rent)
    if np.ndim(l) == 0:
        return float(l), float(k)
    return l, k


def household_firm_choice(scores: np.ndarray, temperature: float,
                          rng: RngStream) -> np.ndarray:
    """Logit choice over per-firm surplus scores, one draw per household row.

    `scores` is (N, n_firms); temperature -> 0 recovers the argmax. Uses the
    Gumbel-max construction so the whole population draws at once.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 2 or scores.shape[1] < 2:
        raise ValueError("firm choice needs (N, n_firms>=2) scores")
    if temperature <= 0.0:
        raise ValueError("temperature must be > 0 (use a tiny value for argmax)")
    gumbel = rng.generator().gumbel(size=scores.shape)
    return np.argmax(scores / temperature + gumbel, axis=1)


def logit_choice_probabilities(scores: np.ndarray, temperature: float) -> np.ndarray:
    """Closed-form softmax matching household_firm_choice frequencies."""
    z = np.asarray(scores, dtype=float) / temperature
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def goods_market_price_update(price: float, demand: float, supply: float,
                              gain: float) -> float:
    """Tatonnement p' = p (1 + gain * (D - S)/S), floored at a tiny positive price.

    D = S is an exact fixed point; repeated application against a demand curve
    falling in p converges toward market clearing.
    """
    if supply <= 0.0:
        raise ValueError("price update requires positive supply")
    return max(price * (1.0 + gain * (demand - supply) / supply), 1e-12)
