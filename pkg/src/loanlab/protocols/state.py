"""Event-driven loan state machine shared by the three protocols.

``step`` is a pure function: it returns the unique successor state and never
mutates its input.  Inadmissible events raise typed errors
(:class:`InadmissibleEvent`, :class:`WindowViolation`) so that callers cannot
silently construct impossible histories.

Position bookkeeping: each party carries (fiat, btc, btc_value) deltas from
its starting endowment.  ``btc_value`` accumulates every BTC flow multiplied
by the price in force at that flow, which is what the per-outcome utility
conventions in :mod:`loanlab.protocols.settle` are built from.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Optional

from ..core import (
    InvalidParameter,
    LoanLabError,
    LoanParams,
    Price,
)
from .events import (
    ArbiterVerdict,
    BorrowerOpen,
    CreateContract,
    ForfeitTimeout,
    LenderDeposit,
    LenderOpen,
    LiquidateByLender,
    LoanEvent,
    OracleQuery,
    Party,
    Phase,
    PrincipalRelease,
    Protocol,
    Repay,
    TERMINAL_PHASES,
    TerminateByBorrower,
    TimeAdvance,
    Trace,
)


class ProtocolError(LoanLabError):
    pass


class InadmissibleEvent(ProtocolError):
    def __init__(self, phase: Phase, event: LoanEvent, reason: str = ""):
        self.phase = phase
        self.event = event
        detail = f": {reason}" if reason else ""
        super().__init__(f"{type(event).__name__} not admissible in phase {phase.value}{detail}")


class WindowViolation(ProtocolError):
    def __init__(self, event: LoanEvent, window: str):
        self.event = event
        self.window = window
        super().__init__(f"{type(event).__name__} at t={event.time} outside window {window}")


class InvariantViolation(ProtocolError):
    pass


class IncompleteTrace(ProtocolError):
    pass


class Outcome(Enum):
    NO_DEAL = "NoDeal"
    HONEST_CLOSE = "HonestClose"
    LENDER_WITHHELD = "LenderWithheld"
    BORROWER_DEFAULTED = "BorrowerDefaulted"
    FORFEIT = "Forfeit"
    LENDER_LIQUIDATION = "LenderLiquidation"
    BORROWER_TERMINATION = "BorrowerTermination"
    LENDER_LIQUIDATION_EARLY = "LenderLiquidationEarly"


@dataclass(frozen=True)
class PartyPosition:
    """Net deltas from the party's starting endowment.  ``btc_value`` is the
    fiat-M value of the BTC flows, each marked at its own flow-time price."""

    fiat: Fraction = Fraction(0)
    btc: Fraction = Fraction(0)
    btc_value: Fraction = Fraction(0)

    def add_fiat(self, amount: Fraction) -> "PartyPosition":
        return replace(self, fiat=self.fiat + amount)

    def add_btc(self, coins: Fraction, price: Price) -> "PartyPosition":
        return replace(
            self, btc=self.btc + coins, btc_value=self.btc_value + coins * price.per_btc
        )


@dataclass(frozen=True)
class Balances:
    lender: PartyPosition = PartyPosition()
    borrower: PartyPosition = PartyPosition()
    arbiter: PartyPosition = PartyPosition()

    def get(self, party: Party) -> PartyPosition:
        return getattr(self, party.value)

    def with_party(self, party: Party, position: PartyPosition) -> "Balances":
        return replace(self, **{party.value: position})

    def add_fiat(self, party: Party, amount: Fraction) -> "Balances":
        return self.with_party(party, self.get(party).add_fiat(amount))

    def add_btc(self, party: Party, coins: Fraction, price: Price) -> "Balances":
        return self.with_party(party, self.get(party).add_btc(coins, price))


@dataclass(frozen=True)
class LoanState:
    protocol: Protocol
    params_p0: Price
    phase: Phase = Phase.AWAIT_LENDER_DEPOSIT
    clock: Fraction = Fraction(0)
    arbiter_fiat: Fraction = Fraction(0)  # escrow, M
    contract_btc: Fraction = Fraction(0)  # coins
    temp_btc: Fraction = Fraction(0)  # coins, oracle protocol only
    repaid: Fraction = Fraction(0)  # M
    repaid_done: bool = False
    contract_created: bool = False
    verified: bool = False
    last_price: Optional[Price] = None
    fast_maturity: Optional[Fraction] = None
    balances: Balances = field(default_factory=Balances)
    outcome: Optional[Outcome] = None
    opened_by: Optional[Party] = None
    reasonable: Optional[bool] = None
    event_price: Optional[Price] = None
    payouts: tuple[tuple[Party, Fraction], ...] = ()

    @property
    def terminal(self) -> bool:
        return self.phase in TERMINAL_PHASES

    def price(self) -> Price:
        return self.last_price if self.last_price is not None else self.params_p0

    def conservation_ok(self) -> bool:
        """Total fiat across parties plus escrow, and total BTC across parties
        plus contract and temp account, both net to zero deltas."""
        b = self.balances
        fiat = b.lender.fiat + b.borrower.fiat + b.arbiter.fiat + self.arbiter_fiat
        btc = b.lender.btc + b.borrower.btc + b.arbiter.btc + self.contract_btc + self.temp_btc
        return fiat == 0 and btc == 0


def initial_state(protocol: Protocol, params: LoanParams) -> LoanState:
    return LoanState(
        protocol=protocol, params_p0=params.p0, clock=params.timeline.t1 - 2
    )


# ---------------------------------------------------------------------------
# Oracle-protocol predicates
# ---------------------------------------------------------------------------


def check_liquidation_pi2(p_i: Price, params: LoanParams) -> bool:
    """Lender liquidation triggers strictly below half the inception price."""
    return p_i.per_btc < params.p0.per_btc / 2


def check_early_termination_pi2(p_i: Price, params: LoanParams) -> bool:
    """Borrower early termination triggers at or above the threshold tau."""
    if params.tau is None:
        raise InvalidParameter("early-termination threshold tau is not set")
    if params.tau.per_btc <= params.p0.per_btc:
        raise InvalidParameter("tau must exceed p0")
    return p_i.per_btc >= params.tau.per_btc


def redistribute(state: LoanState, p_i: Price, params: LoanParams) -> LoanState:
    """Rebalance contract vs. temporary account so the contract's fiat value
    never exceeds twice the principal at the queried price.

    Excess moves contract -> temp; shortfall refills temp -> contract until
    the cap is reached or the temp account empties.  Total BTC is conserved.
    """
    if state.protocol is not Protocol.P2:
        raise InadmissibleEvent(state.phase, OracleQuery(state.clock, p_i), "redistribution is oracle-protocol only")
    if state.phase is not Phase.ACTIVE:
        raise InadmissibleEvent(state.phase, OracleQuery(state.clock, p_i), "redistribution requires Active phase")
    cap = 2 * params.principal.m
    target_coins = cap / p_i.per_btc
    contract, temp = state.contract_btc, state.temp_btc
    if contract * p_i.per_btc > cap:
        moved = contract - target_coins
        contract, temp = target_coins, temp + moved
    elif contract * p_i.per_btc < cap and temp > 0:
        refill = min(temp, target_coins - contract)
        contract, temp = contract + refill, temp - refill
    new = replace(state, contract_btc=contract, temp_btc=temp)
    if new.contract_btc * p_i.per_btc > cap:
        raise InvariantViolation("contract value exceeds cap after redistribution")
    return new


# ---------------------------------------------------------------------------
# The transition function
# ---------------------------------------------------------------------------


def step(state: LoanState, event: LoanEvent, params: LoanParams) -> LoanState:
    """Apply one event, enforcing phase admissibility and time windows."""
    if state.terminal:
        raise InadmissibleEvent(state.phase, event, "loan already terminal")
    if event.time < state.clock:
        raise WindowViolation(event, f"clock already at {state.clock}")

    handler = _HANDLERS.get(type(event))
    if handler is None:
        raise InadmissibleEvent(state.phase, event, "unknown event")
    new = handler(state, event, params)
    _check_invariants(new, params)
    return new


def _check_invariants(state: LoanState, params: LoanParams) -> None:
    if state.arbiter_fiat < 0 or state.contract_btc < 0 or state.temp_btc < 0:
        raise InvariantViolation("negative escrow balance")
    if not state.conservation_ok():
        raise InvariantViolation("conservation broken")


def _windows(state: LoanState, params: LoanParams):
    return params.timeline.windows(state.fast_maturity)


def _on_deposit(state: LoanState, event: LenderDeposit, params: LoanParams) -> LoanState:
    if state.phase is not Phase.AWAIT_LENDER_DEPOSIT:
        raise InadmissibleEvent(state.phase, event)
    if event.time > params.timeline.t1:
        raise WindowViolation(event, f"deposit must happen by t1={params.timeline.t1}")
    if event.amount != params.principal:
        raise InadmissibleEvent(state.phase, event, "deposit must equal the principal")
    balances = state.balances.add_fiat(Party.LENDER, -event.amount.m)
    return replace(
        state,
        phase=Phase.AWAIT_CONTRACT,
        clock=event.time,
        arbiter_fiat=state.arbiter_fiat + event.amount.m,
        balances=balances,
    )


def _on_create(state: LoanState, event: CreateContract, params: LoanParams) -> LoanState:
    if state.phase is not Phase.AWAIT_CONTRACT or state.contract_created:
        raise InadmissibleEvent(state.phase, event)
    if event.time > params.timeline.t1:
        raise WindowViolation(event, f"contract must be created by t1={params.timeline.t1}")
    if not event.correct:
        # Verification fails; the arbiter refunds the principal.
        return _abort_refund(state, event.time, params)
    balances = state.balances.add_btc(Party.BORROWER, -params.y.coins, params.p0)
    return replace(
        state,
        clock=event.time,
        contract_created=True,
        contract_btc=state.contract_btc + params.y.coins,
        balances=balances,
    )


def _abort_refund(state: LoanState, time: Fraction, params: LoanParams) -> LoanState:
    balances = state.balances.add_fiat(Party.LENDER, params.principal.m)
    return replace(
        state,
        phase=Phase.ABORTED,
        clock=time,
        arbiter_fiat=state.arbiter_fiat - params.principal.m,
        balances=balances,
        outcome=Outcome.NO_DEAL,
        payouts=((Party.LENDER, params.principal.m),),
    )


def _on_verdict(state: LoanState, event: ArbiterVerdict, params: LoanParams) -> LoanState:
    if state.phase is not Phase.AWAIT_CONTRACT:
        raise InadmissibleEvent(state.phase, event)
    if not state.contract_created:
        if event.time > params.timeline.t1:
            # Borrower missed the creation timeout; refund the lender.
            return _abort_refund(state, event.time, params)
        raise InadmissibleEvent(state.phase, event, "no contract to verify yet")
    if event.time > params.timeline.t_star:
        raise WindowViolation(event, f"verdict must precede t*={params.timeline.t_star}")
    return replace(state, clock=event.time, verified=True)


def _on_release(state: LoanState, event: PrincipalRelease, params: LoanParams) -> LoanState:
    if state.phase is not Phase.AWAIT_CONTRACT or not (state.contract_created and state.verified):
        raise InadmissibleEvent(state.phase, event, "contract must be created and verified")
    if event.time != params.timeline.t_star:
        raise WindowViolation(event, f"principal is released exactly at t*={params.timeline.t_star}")
    balances = state.balances.add_fiat(Party.BORROWER, params.principal.m)
    return replace(
        state,
        phase=Phase.ACTIVE,
        clock=event.time,
        arbiter_fiat=state.arbiter_fiat - params.principal.m,
        balances=balances,
    )


def _on_query(state: LoanState, event: OracleQuery, params: LoanParams) -> LoanState:
    if state.phase is not Phase.ACTIVE:
        raise InadmissibleEvent(state.phase, event)
    anchors = params.timeline
    if not (anchors.t_star <= event.time <= anchors.maturity):
        raise WindowViolation(event, f"queries run from t*={anchors.t_star} to maturity={anchors.maturity}")
    state = replace(state, clock=event.time, last_price=event.price)
    if state.protocol is Protocol.P3:
        return state  # ambient price mark, both parties observe it
    if state.protocol is not Protocol.P2:
        raise InadmissibleEvent(state.phase, event, "no oracle in the flat-rate protocol")

    state = redistribute(state, event.price, params)
    if check_liquidation_pi2(event.price, params):
        # Full refill leaves the temp account empty whenever the trigger fires.
        if state.temp_btc != 0:
            raise InvariantViolation("temp account should be empty at liquidation")
        coins = state.contract_btc
        balances = state.balances.add_btc(Party.LENDER, coins, event.price)
        return replace(
            state,
            phase=Phase.LIQUIDATED,
            contract_btc=Fraction(0),
            balances=balances,
            outcome=Outcome.LENDER_LIQUIDATION,
            event_price=event.price,
            payouts=((Party.LENDER, coins * event.price.per_btc),),
        )
    if params.tau is not None and check_early_termination_pi2(event.price, params):
        # Fast-track: proceed as if the maturity were now.
        return replace(state, phase=Phase.REPAYMENT, fast_maturity=event.time)
    return state


def _on_time(state: LoanState, event: TimeAdvance, params: LoanParams) -> LoanState:
    state = replace(state, clock=event.time)
    if state.phase is Phase.ACTIVE and event.time >= _windows(state, params).maturity:
        return replace(state, phase=Phase.REPAYMENT)
    return state


def _on_repay(state: LoanState, event: Repay, params: LoanParams) -> LoanState:
    if state.phase is not Phase.REPAYMENT or state.repaid_done:
        raise InadmissibleEvent(state.phase, event)
    windows = _windows(state, params)
    if not (windows.maturity <= event.time <= windows.t2):
        raise WindowViolation(event, f"arbiter accepts repayment in [{windows.maturity}, {windows.t2}]")
    x = event.amount.m
    if not (0 <= x <= params.principal.m):
        raise InadmissibleEvent(state.phase, event, "repayment must lie in [0, principal]")
    balances = state.balances.add_fiat(Party.BORROWER, -x)
    return replace(
        state,
        clock=event.time,
        arbiter_fiat=state.arbiter_fiat + x,
        repaid=x,
        repaid_done=True,
        balances=balances,
    )


def _contract_split_fiat_worth(
    state: LoanState, params: LoanParams, price: Price, penalty: Fraction
) -> tuple[Fraction, Fraction, Fraction]:
    """Borrower-open split when the contract value equals 2*principal:
    BTC worth (1-penalty)P to each of borrower and lender, 2*penalty*P to the
    arbiter (amounts in coins)."""
    scale = params.principal.m
    to_party = (1 - penalty) * scale / price.per_btc
    to_arbiter = 2 * penalty * scale / price.per_btc
    return to_party, to_party, to_arbiter


def _payout(balances: Balances, payouts: list, party: Party, coins: Fraction, price: Price) -> Balances:
    payouts.append((party, coins * price.per_btc))
    return balances.add_btc(party, coins, price)


def _payout_fiat(balances: Balances, payouts: list, party: Party, amount: Fraction) -> Balances:
    payouts.append((party, amount))
    return balances.add_fiat(party, amount)


def _on_lender_open(state: LoanState, event: LenderOpen, params: LoanParams) -> LoanState:
    if state.phase is not Phase.REPAYMENT:
        raise InadmissibleEvent(state.phase, event)
    windows = _windows(state, params)
    if not (windows.t2 <= event.time <= windows.t3):
        raise WindowViolation(event, f"lender opens in [{windows.t2}, {windows.t3}]")
    price = state.price()
    payouts: list = []
    balances = state.balances
    # Full collateral goes to the borrower.
    balances = _payout(balances, payouts, Party.BORROWER, state.contract_btc, price)
    temp, balances = _release_temp(state, params, price, balances, payouts)
    # The arbiter releases whatever principal it holds to the lender.
    arbiter_fiat = state.arbiter_fiat - state.repaid
    if state.repaid > 0:
        balances = _payout_fiat(balances, payouts, Party.LENDER, state.repaid)
    full = state.repaid == params.principal.m
    return replace(
        state,
        phase=Phase.SETTLED,
        clock=event.time,
        contract_btc=Fraction(0),
        temp_btc=temp,
        arbiter_fiat=arbiter_fiat,
        balances=balances,
        outcome=Outcome.HONEST_CLOSE if full else Outcome.BORROWER_DEFAULTED,
        opened_by=Party.LENDER,
        payouts=tuple(payouts),
    )


def _release_temp(
    state: LoanState, params: LoanParams, price: Price, balances: Balances, payouts: list
) -> tuple[Fraction, Balances]:
    """Excess coins go to the borrower only when the full principal was paid;
    otherwise the arbiter keeps the temporary account."""
    if state.temp_btc == 0:
        return Fraction(0), balances
    if state.repaid == params.principal.m:
        balances = _payout(balances, payouts, Party.BORROWER, state.temp_btc, price)
    else:
        balances = balances.add_btc(Party.ARBITER, state.temp_btc, price)
    return Fraction(0), balances


def _on_borrower_open(state: LoanState, event: BorrowerOpen, params: LoanParams) -> LoanState:
    if state.phase is not Phase.REPAYMENT:
        raise InadmissibleEvent(state.phase, event)
    windows = _windows(state, params)
    if not (windows.t3 <= event.time < windows.forfeit):
        raise WindowViolation(event, f"borrower opens in [{windows.t3}, {windows.forfeit})")
    price = state.price()
    scale = params.principal.m
    full = state.repaid == scale
    payouts: list = []
    balances = state.balances
    arbiter_fiat = state.arbiter_fiat

    if state.protocol is Protocol.P3:
        share = params.y.coins / 2 - params.epsilon * scale
        if share < 0:
            raise InvalidParameter("contract split is negative: epsilon too large for this collateral")
        arb_coins = 2 * params.epsilon * scale
        eps_coins = params.epsilon * scale
    else:
        value = state.contract_btc * price.per_btc
        if value == 2 * scale:
            share, _, arb_coins = _contract_split_fiat_worth(state, params, price, params.epsilon)
            eps_coins = params.epsilon * scale / price.per_btc
        elif value < 2 * scale:
            eps_prime = _epsilon_prime(params, value)
            share_b = (value - scale - eps_prime * scale) / price.per_btc
            share_l = (1 - eps_prime) * scale / price.per_btc
            arb_coins = 2 * eps_prime * scale / price.per_btc
            eps_coins = eps_prime * scale / price.per_btc
            balances = _payout(balances, payouts, Party.BORROWER, share_b, price)
            balances = _payout(balances, payouts, Party.LENDER, share_l, price)
            balances = balances.add_btc(Party.ARBITER, arb_coins, price)
            return _finish_borrower_open(
                state, event, params, price, full, balances, payouts, eps_coins, forwarded_x=True
            )
        else:
            raise InvariantViolation("contract value above cap at settlement")

    balances = _payout(balances, payouts, Party.BORROWER, share, price)
    balances = _payout(balances, payouts, Party.LENDER, share, price)
    balances = balances.add_btc(Party.ARBITER, arb_coins, price)
    forwarded_x = state.protocol is Protocol.P3  # flat-rate arbiter keeps partial principal
    return _finish_borrower_open(
        state, event, params, price, full, balances, payouts, eps_coins, forwarded_x
    )


def _finish_borrower_open(
    state: LoanState,
    event: BorrowerOpen,
    params: LoanParams,
    price: Price,
    full: bool,
    balances: Balances,
    payouts: list,
    eps_coins: Fraction,
    forwarded_x: bool,
) -> LoanState:
    """Arbiter's ruling after a borrower opening: with full repayment the
    borrower gets the principal back plus one penalty unit; otherwise the
    penalty unit goes to the lender, and (outside the flat-rate protocol) the
    partial principal is forwarded to the lender too."""
    arbiter_fiat = state.arbiter_fiat
    if full:
        balances = _payout_fiat(balances, payouts, Party.BORROWER, state.repaid)
        arbiter_fiat -= state.repaid
        balances = _payout(balances, payouts, Party.BORROWER, eps_coins, price)
        balances = balances.add_btc(Party.ARBITER, -eps_coins, price)
        outcome = Outcome.LENDER_WITHHELD
    else:
        balances = _payout(balances, payouts, Party.LENDER, eps_coins, price)
        balances = balances.add_btc(Party.ARBITER, -eps_coins, price)
        if forwarded_x and state.repaid > 0:
            balances = _payout_fiat(balances, payouts, Party.LENDER, state.repaid)
            arbiter_fiat -= state.repaid
        outcome = Outcome.BORROWER_DEFAULTED
    # Whatever principal remains in escrow stays with the arbiter.
    if arbiter_fiat != 0:
        balances = balances.add_fiat(Party.ARBITER, arbiter_fiat)
        arbiter_fiat = Fraction(0)
    temp, balances = _release_temp(state, params, price, balances, payouts)
    return replace(
        state,
        phase=Phase.SETTLED,
        clock=event.time,
        contract_btc=Fraction(0),
        temp_btc=temp,
        arbiter_fiat=arbiter_fiat,
        balances=balances,
        outcome=outcome,
        opened_by=Party.BORROWER,
        payouts=tuple(payouts),
    )


def _epsilon_prime(params: LoanParams, value: Fraction) -> Fraction:
    """Undercollateralized penalty; must satisfy 0 < eps' < value/P - 1."""
    scale = params.principal.m
    bound = value / scale - 1
    eps_prime = params.epsilon_prime
    if eps_prime is None:
        eps_prime = min(params.epsilon, bound / 2)
    if not (0 < eps_prime < bound):
        raise InvalidParameter(
            f"epsilon_prime must satisfy 0 < eps' < {bound} (collateral value {value})"
        )
    return eps_prime


def _on_forfeit(state: LoanState, event: ForfeitTimeout, params: LoanParams) -> LoanState:
    if state.phase is not Phase.REPAYMENT:
        raise InadmissibleEvent(state.phase, event)
    windows = _windows(state, params)
    if event.time < windows.forfeit:
        raise WindowViolation(event, f"automatic forfeit fires at {windows.forfeit}")
    price = state.price()
    payouts: list = []
    balances = _payout(state.balances, payouts, Party.LENDER, state.contract_btc, price)
    temp, balances = _release_temp(state, params, price, balances, payouts)
    # The arbiter never released the repayment; it stays with the arbiter.
    balances = balances.add_fiat(Party.ARBITER, state.repaid)
    return replace(
        state,
        phase=Phase.FORFEITED,
        clock=event.time,
        contract_btc=Fraction(0),
        temp_btc=temp,
        arbiter_fiat=state.arbiter_fiat - state.repaid,
        balances=balances,
        outcome=Outcome.FORFEIT,
        payouts=tuple(payouts),
    )


def _on_party_liquidation(state: LoanState, event: LoanEvent, params: LoanParams) -> LoanState:
    if state.protocol is not Protocol.P3:
        raise InadmissibleEvent(state.phase, event, "open liquidation exists only in the oracle-free protocol")
    if state.phase not in (Phase.ACTIVE, Phase.REPAYMENT) or state.repaid_done:
        raise InadmissibleEvent(state.phase, event)
    windows = _windows(state, params)
    if not (params.timeline.t_star <= event.time < windows.forfeit):
        raise WindowViolation(event, f"early termination runs in [{params.timeline.t_star}, {windows.forfeit})")

    from .settle import classify_liquidation  # local import to avoid a cycle

    price: Price = event.price  # type: ignore[attr-defined]
    actor = Party.LENDER if isinstance(event, LiquidateByLender) else Party.BORROWER
    other = Party.BORROWER if actor is Party.LENDER else Party.LENDER
    reasonable = classify_liquidation(actor, price, params)

    scale = params.principal.m
    share = params.y.coins / 2 - params.epsilon * scale
    if share < 0:
        raise InvalidParameter("contract split is negative: epsilon too large for this collateral")
    eps = params.epsilon * scale

    payouts: list = []
    balances = state.balances
    balances = _payout(balances, payouts, Party.BORROWER, share, price)
    balances = _payout(balances, payouts, Party.LENDER, share, price)
    balances = balances.add_btc(Party.ARBITER, 2 * eps, price)
    if reasonable and actor is Party.LENDER:
        # Reasonable liquidation: the arbiter passes its full 2*eps to the lender.
        balances = _payout(balances, payouts, Party.LENDER, 2 * eps, price)
        balances = balances.add_btc(Party.ARBITER, -2 * eps, price)
    elif reasonable:
        balances = _payout(balances, payouts, Party.BORROWER, eps, price)
        balances = balances.add_btc(Party.ARBITER, -eps, price)
    else:
        # Unreasonable: the arbiter keeps the actor's penalty unit and
        # compensates the other party with one unit.
        balances = _payout(balances, payouts, other, eps, price)
        balances = balances.add_btc(Party.ARBITER, -eps, price)

    outcome = (
        Outcome.LENDER_LIQUIDATION_EARLY if actor is Party.LENDER else Outcome.BORROWER_TERMINATION
    )
    return replace(
        state,
        phase=Phase.LIQUIDATED if actor is Party.LENDER else Phase.TERMINATED,
        clock=event.time,
        contract_btc=Fraction(0),
        last_price=price,
        balances=balances,
        outcome=outcome,
        opened_by=actor,
        reasonable=reasonable,
        event_price=price,
        payouts=tuple(payouts),
    )


_HANDLERS = {
    LenderDeposit: _on_deposit,
    CreateContract: _on_create,
    ArbiterVerdict: _on_verdict,
    PrincipalRelease: _on_release,
    OracleQuery: _on_query,
    TimeAdvance: _on_time,
    Repay: _on_repay,
    LenderOpen: _on_lender_open,
    BorrowerOpen: _on_borrower_open,
    ForfeitTimeout: _on_forfeit,
    LiquidateByLender: _on_party_liquidation,
    TerminateByBorrower: _on_party_liquidation,
}


def run_trace(trace: Trace, protocol: Protocol, params: LoanParams) -> LoanState:
    state = initial_state(protocol, params)
    for event in trace:
        state = step(state, event, params)
    return state
