"""Terminal settlements, liquidation thresholds, and principal chunking.

Utility convention
------------------
A party's utility (fiat-M) is its net fiat delta plus its BTC flows, each BTC
flow valued at the price in force when it happened (so the borrower's deposit
is charged at the inception price and payouts are credited at payout-time
prices).  Two outcome classes deliberately re-mark the whole BTC position at
a single price instead:

* oracle-protocol lender liquidation marks everything at the triggering
  query price p_i, giving (lender, borrower) = (y*p_i - 1, 1 - y*p_i) per
  unit of principal;
* open-protocol forfeiture after a full repayment marks the borrower's lost
  collateral at the terminal price, giving the borrower -y*p_t (a partial
  repayment forfeit keeps the standard flow valuation, -(1+x)).

These are the leaf values the induced games are verified against; the flat
protocol is price-constant so all conventions coincide there.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from ..core import (
    InvalidParameter,
    LoanParams,
    Price,
    PricePath,
)
from .events import (
    OracleQuery,
    Party,
    Phase,
    Protocol,
    Trace,
)
from .state import (
    InadmissibleEvent,
    IncompleteTrace,
    LoanState,
    Outcome,
    initial_state,
    run_trace,
    step,
)


@dataclass(frozen=True)
class Settlement:
    """Terminal result of one protocol run."""

    outcome: Outcome
    utilities: dict[Party, Fraction]
    payouts: dict[Party, Fraction]  # settlement-phase receipts, fiat-M value
    fiat_deltas: dict[Party, Fraction]
    btc_deltas: dict[Party, Fraction]
    repaid: Fraction
    terminal_price: Price
    opened_by: Optional[Party] = None
    reasonable: Optional[bool] = None
    event_price: Optional[Price] = None

    def utility_pair(self) -> tuple[Fraction, Fraction]:
        """(lender, borrower) utilities, the game-leaf payoff vector."""
        return self.utilities[Party.LENDER], self.utilities[Party.BORROWER]


def settlement_from_state(state: LoanState, params: LoanParams) -> Settlement:
    if not state.terminal:
        raise IncompleteTrace(f"trace ended in non-terminal phase {state.phase.value}")
    price = state.price()
    utilities: dict[Party, Fraction] = {}
    full_repay = state.repaid == params.principal.m
    for party in Party:
        pos = state.balances.get(party)
        if state.outcome is Outcome.LENDER_LIQUIDATION:
            mark = state.event_price or price
            utilities[party] = pos.fiat + pos.btc * mark.per_btc
        elif (
            state.outcome is Outcome.FORFEIT
            and state.protocol is Protocol.P3
            and full_repay
        ):
            utilities[party] = pos.fiat + pos.btc * price.per_btc
        else:
            utilities[party] = pos.fiat + pos.btc_value
    payouts: dict[Party, Fraction] = {p: Fraction(0) for p in Party}
    for party, amount in state.payouts:
        payouts[party] += amount
    return Settlement(
        outcome=state.outcome or Outcome.NO_DEAL,
        utilities=utilities,
        payouts=payouts,
        fiat_deltas={p: state.balances.get(p).fiat for p in Party},
        btc_deltas={p: state.balances.get(p).btc for p in Party},
        repaid=state.repaid,
        terminal_price=price,
        opened_by=state.opened_by,
        reasonable=state.reasonable,
        event_price=state.event_price,
    )


def settle_pi1(trace: Trace, params: LoanParams) -> Settlement:
    """Run a flat-rate-protocol trace to its settlement."""
    return settlement_from_state(run_trace(trace, Protocol.P1, params), params)


def settle_pi2(trace: Trace, price_path: PricePath, params: LoanParams) -> Settlement:
    """Run an oracle-protocol trace with the path's queries interleaved by
    time (a query at time t fires before other events at t).

    Queries fire only while the loan is Active; once liquidation or the
    early-termination fast-track leaves that phase, the remaining schedule is
    moot and is dropped.  Leftover trace events after a terminal state are an
    error, never silently ignored.
    """
    price_path.validate_for_queries(params.q, params.timeline)
    queries = [OracleQuery(t, p) for t, p in price_path.samples]
    events = list(trace)
    state = initial_state(Protocol.P2, params)
    while not state.terminal:
        take_query = (
            state.phase is Phase.ACTIVE
            and queries
            and (not events or queries[0].time <= events[0].time)
        )
        if take_query:
            event = queries.pop(0)
        elif events:
            event = events.pop(0)
        else:
            break
        state = step(state, event, params)
    if events:
        raise InadmissibleEvent(state.phase, events[0], "event after the loan terminated")
    return settlement_from_state(state, params)


def settle_pi3(trace: Trace, params: LoanParams) -> Settlement:
    """Run an open-liquidation-protocol trace to its settlement.  Ambient
    prices are carried by OracleQuery marks and by the liquidation events."""
    if params.epsilon * params.p0.per_btc >= 1:
        raise InvalidParameter("open protocol requires epsilon * p0 < 1 (positive contract shares)")
    return settlement_from_state(run_trace(trace, Protocol.P3, params), params)


# ---------------------------------------------------------------------------
# Open-protocol thresholds and reasonableness
# ---------------------------------------------------------------------------


def rho_b_price(p0: Price, epsilon: Fraction) -> Price:
    """Borrower termination threshold: the price at which the terminating
    borrower exactly recovers the inception collateral value,
    1 + (y/2 - eps) * rho = 2 per unit of principal."""
    if epsilon * p0.per_btc >= 1:
        raise InvalidParameter("borrower threshold undefined: epsilon * p0 >= 1")
    if epsilon < 0:
        raise InvalidParameter("epsilon must be non-negative")
    return Price(p0.per_btc / (1 - epsilon * p0.per_btc))


def rho_l_price(p0: Price, epsilon: Fraction) -> Price:
    """Lender liquidation threshold: the price at which the liquidating
    lender exactly recovers the principal, (y/2 + eps) * rho = 1."""
    if epsilon < 0:
        raise InvalidParameter("epsilon must be non-negative")
    return Price(p0.per_btc / (1 + epsilon * p0.per_btc))


def rho_b(params: LoanParams) -> Price:
    return rho_b_price(params.p0, params.epsilon)


def rho_l(params: LoanParams) -> Price:
    return rho_l_price(params.p0, params.epsilon)


class Reasonableness:
    REASONABLE = "Reasonable"
    UNREASONABLE = "Unreasonable"


def classify_liquidation(party: Party, p_i: Price, params: LoanParams) -> bool:
    """True when the arbiter rules the early action reasonable: the lender may
    liquidate at or below rho_L, the borrower may terminate at or above rho_B."""
    if party is Party.ARBITER:
        raise InvalidParameter("the arbiter neither liquidates nor terminates")
    if party is Party.LENDER:
        return p_i.per_btc <= rho_l(params).per_btc
    return p_i.per_btc >= rho_b(params).per_btc


# ---------------------------------------------------------------------------
# Principal chunking
# ---------------------------------------------------------------------------


def chunk_principal(params: LoanParams, k: int) -> list[LoanParams]:
    """Split one loan into k independent sub-loans of principal/k each.

    Collateral and the deviation penalties scale with the principal, so the
    sum of the k sub-settlements reproduces the whole settlement on matched
    traces.
    """
    if k < 1:
        raise InvalidParameter("k must be at least 1")
    factor = Fraction(1, k)
    return [
        LoanParams(
            p0=params.p0,
            epsilon=params.epsilon,
            principal=params.principal.scaled(factor),
            y=params.y.scaled(factor),
            epsilon_prime=params.epsilon_prime,
            delta=params.delta * factor,
            tau=params.tau,
            q=params.q,
            k=params.k,
            timeline=params.timeline,
        )
        for _ in range(k)
    ]
