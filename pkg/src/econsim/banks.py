"""Financial intermediation: passive no-arbitrage platform and commercial bank."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CORRIDOR_DEPOSIT_BELOW = 0.01  # deposit rate may sit up to 1pp under the benchmark
CORRIDOR_LENDING_LOW = 0.01    # lending rate floor: benchmark + 1pp
CORRIDOR_LENDING_HIGH = 0.03   # lending rate cap: benchmark + 3pp


@dataclass
class BankState:
    deposits: float = 0.0       # A: household savings held
    loans: float = 0.0          # K: capital lent to firms
    bonds: float = 0.0          # B: government debt held
    deposit_rate: float = 0.0   # r^d posted for the coming period
    lending_rate: float = 0.0   # r^l posted for the coming period
    kind: str = "non_profit"    # non_profit | commercial
    reserves: float = 0.0


@dataclass(frozen=True)
class BankAction:
    deposit_rate: float
    lending_rate: float


def noarbitrage_capital_return(r: float, delta: float) -> float:
    """Platform no-arbitrage: capital rents R = r + delta, so net returns match bonds."""
    return r + delta


def platform_balance_step(bank: BankState, capital_return: float, r_prev: float,
                          delta: float, new_deposits: float,
                          bond_demand: float) -> tuple[float, float, float]:
    """Allocate the non-profit platform's balance sheet for the next period.

    The law of motion K' + B' - A' = (R + 1 - delta) K + (1 + r)(B - A) pins
    total allocable funds; bonds are served first (up to the outstanding
    government debt) and the remainder goes to capital. Returns
    (loans', bonds', residual) where the residual re-checks the identity and
    must be ~0. Negative lendable funds zero the book and flag distress via a
    negative residual carrier (loans' = 0).
    """
    net_worth = (capital_return + 1.0 - delta) * bank.loans \
        + (1.0 + r_prev) * (bank.bonds - bank.deposits)
    allocable = net_worth + new_deposits
    if allocable < 0.0:
        loans_next, bonds_next = 0.0, 0.0
    else:
        bonds_next = min(max(bond_demand, 0.0), allocable)
        loans_next = allocable - bonds_next
    residual = (loans_next + bonds_next - new_deposits) - net_worth
    return loans_next, bonds_next, residual


def clamp_rates_to_corridor(iota: float, action: BankAction) -> tuple[float, float]:
    """Clamp proposed rates into the policy corridor around the benchmark.

    Deposit rate lands in [iota - 0.01, iota], lending rate in
    [iota + 0.01, iota + 0.03]; the spread is therefore always >= 0.01.
    """
    r_d = float(np.clip(action.deposit_rate, iota - CORRIDOR_DEPOSIT_BELOW, iota))
    r_l = float(np.clip(action.lending_rate, iota + CORRIDOR_LENDING_LOW,
                        iota + CORRIDOR_LENDING_HIGH))
    return r_d, r_l


def reserve_feasible_allocation(deposits: float, phi: float, loan_demand: float,
                                bond_demand: float) -> tuple[float, float, float]:
    """Allocate commercial-bank assets under the reserve requirement.

    K + B = min(loan demand + bond demand, (1 - phi) A), bonds served first
    (government priority); reserves = A - K - B >= phi * A. A negative deposit
    base is a bank failure and raises.
    """
    if deposits < 0.0:
        raise ValueError("bank failure: negative deposit base")
    lendable = (1.0 - phi) * deposits
    bonds = min(max(bond_demand, 0.0), lendable)
    loans = min(max(loan_demand, 0.0), lendable - bonds)
    reserves = deposits - loans - bonds
    return loans, bonds, reserves


def commercial_profit(lending_rate: float, loans_next: float, bonds_next: float,
                      deposit_rate: float, deposits_next: float) -> float:
    """Interest margin r^l (K' + B') - r^d A'; the commercial bank's reward."""
    return lending_rate * (loans_next + bonds_next) - deposit_rate * deposits_next
