"""Flat-rate protocol: transitions, windows, and settlement payoffs."""

from fractions import Fraction

import pytest

from loanlab.core import FiatAmount, LoanParams, Price
from loanlab.protocols import (
    ArbiterVerdict,
    BorrowerOpen,
    CreateContract,
    ForfeitTimeout,
    InadmissibleEvent,
    IncompleteTrace,
    LenderDeposit,
    LenderOpen,
    Outcome,
    Party,
    Phase,
    PrincipalRelease,
    Protocol,
    Repay,
    TimeAdvance,
    WindowViolation,
    format_trace,
    initial_state,
    parse_trace,
    run_trace,
    settle_pi1,
    step,
)

F = Fraction


def prefix(params):
    t1, ts = params.timeline.t1, params.timeline.t_star
    return (
        LenderDeposit(t1 - 1, params.principal),
        CreateContract(t1, True),
        ArbiterVerdict((t1 + ts) / 2),
        PrincipalRelease(ts),
    )


def repayment_trace(params, x, lender_opens=None, borrower_opens=None):
    w = params.timeline.windows()
    events = list(prefix(params)) + [
        TimeAdvance(w.maturity),
        Repay(w.maturity, FiatAmount(x)),
    ]
    if lender_opens:
        events.append(LenderOpen(w.t2))
    elif borrower_opens:
        events.append(BorrowerOpen(w.t3))
    else:
        events.append(ForfeitTimeout(w.forfeit))
    return tuple(events)


def test_deposit_moves_to_await_contract(pi1_params):
    state = initial_state(Protocol.P1, pi1_params)
    state = step(state, LenderDeposit(F(-2), pi1_params.principal), pi1_params)
    assert state.phase is Phase.AWAIT_CONTRACT
    assert state.arbiter_fiat == 1
    assert state.balances.get(Party.LENDER).fiat == -1


def test_incorrect_contract_aborts_with_refund(pi1_params):
    state = initial_state(Protocol.P1, pi1_params)
    state = step(state, LenderDeposit(F(-2), pi1_params.principal), pi1_params)
    state = step(state, CreateContract(F(-3, 2), False), pi1_params)
    assert state.phase is Phase.ABORTED
    assert state.arbiter_fiat == 0
    assert state.balances.get(Party.LENDER).fiat == 0
    assert state.outcome is Outcome.NO_DEAL


def test_missed_creation_timeout_refunds(pi1_params):
    state = initial_state(Protocol.P1, pi1_params)
    state = step(state, LenderDeposit(F(-2), pi1_params.principal), pi1_params)
    state = step(state, ArbiterVerdict(F(-1, 2)), pi1_params)  # past t1=-1, no contract
    assert state.phase is Phase.ABORTED
    assert state.balances.get(Party.LENDER).fiat == 0


def test_full_honest_close(pi1_params):
    state = run_trace(repayment_trace(pi1_params, F(1), lender_opens=True), Protocol.P1, pi1_params)
    assert state.phase is Phase.SETTLED
    settlement = settle_pi1(repayment_trace(pi1_params, F(1), lender_opens=True), pi1_params)
    assert settlement.outcome is Outcome.HONEST_CLOSE
    assert settlement.utilities == {Party.LENDER: 0, Party.BORROWER: 0, Party.ARBITER: 0}
    # the borrower walks away with the whole collateral at settlement
    assert settlement.payouts[Party.BORROWER] == 2
    assert settlement.payouts[Party.LENDER] == 1


def test_lender_withholding_costs_epsilon(pi1_params):
    settlement = settle_pi1(repayment_trace(pi1_params, F(1), borrower_opens=True), pi1_params)
    assert settlement.outcome is Outcome.LENDER_WITHHELD
    eps = pi1_params.epsilon
    assert settlement.utilities[Party.LENDER] == -eps
    assert settlement.utilities[Party.BORROWER] == 0
    assert settlement.utilities[Party.ARBITER] == eps
    # gross receipts: borrower 2M, lender (1-eps)M, arbiter eps M
    assert settlement.payouts[Party.BORROWER] == 2
    assert settlement.payouts[Party.LENDER] == 1 - eps


def test_partial_repayment_default(pi1_params):
    x = F(2, 5)
    settlement = settle_pi1(repayment_trace(pi1_params, x, borrower_opens=True), pi1_params)
    eps = pi1_params.epsilon
    assert settlement.outcome is Outcome.BORROWER_DEFAULTED
    assert settlement.utilities[Party.LENDER] == 0
    assert settlement.utilities[Party.BORROWER] == -(x + eps)
    assert settlement.utilities[Party.ARBITER] == x + eps
    # lender is made whole: (1-eps) from the contract, eps from the arbiter
    assert settlement.payouts[Party.LENDER] == 1
    assert settlement.payouts[Party.BORROWER] == 1 - eps  # (1-x+1-eps) minus the kept principal


def test_forfeit_gives_collateral_to_lender(pi1_params):
    settlement = settle_pi1(repayment_trace(pi1_params, F(0)), pi1_params)
    assert settlement.outcome is Outcome.FORFEIT
    assert settlement.utilities[Party.LENDER] == 1
    assert settlement.utilities[Party.BORROWER] == -1
    assert settlement.payouts[Party.LENDER] == 2


def test_windows_enforced(pi1_params):
    w = pi1_params.timeline.windows()
    base = list(prefix(pi1_params)) + [TimeAdvance(w.maturity), Repay(w.maturity, FiatAmount(F(1)))]
    with pytest.raises(WindowViolation):
        run_trace(tuple(base + [LenderOpen(w.t3 + 1)]), Protocol.P1, pi1_params)
    with pytest.raises(WindowViolation):
        run_trace(tuple(base + [BorrowerOpen(w.forfeit)]), Protocol.P1, pi1_params)
    with pytest.raises(WindowViolation):
        run_trace(tuple(base + [ForfeitTimeout(w.forfeit - 1)]), Protocol.P1, pi1_params)


def test_open_exclusivity(pi1_params):
    trace = repayment_trace(pi1_params, F(1), lender_opens=True)
    with pytest.raises(InadmissibleEvent):
        run_trace(trace + (BorrowerOpen(pi1_params.timeline.windows().t3),), Protocol.P1, pi1_params)


def test_clock_is_monotone(pi1_params):
    state = initial_state(Protocol.P1, pi1_params)
    state = step(state, LenderDeposit(F(-2), pi1_params.principal), pi1_params)
    with pytest.raises(WindowViolation):
        step(state, CreateContract(F(-3), True), pi1_params)


def test_oracle_query_inadmissible_in_flat_protocol(pi1_params):
    from loanlab.protocols import OracleQuery

    trace = prefix(pi1_params) + (OracleQuery(F(3), Price(F(1))),)
    with pytest.raises(InadmissibleEvent):
        run_trace(trace, Protocol.P1, pi1_params)


def test_incomplete_trace_reported(pi1_params):
    with pytest.raises(IncompleteTrace):
        settle_pi1(prefix(pi1_params), pi1_params)


def test_conservation_along_honest_trace(pi1_params):
    state = initial_state(Protocol.P1, pi1_params)
    for event in repayment_trace(pi1_params, F(1), lender_opens=True):
        state = step(state, event, pi1_params)
        assert state.conservation_ok()


def test_trace_text_roundtrip(pi1_params):
    trace = repayment_trace(pi1_params, F(2, 5), borrower_opens=True)
    assert parse_trace(format_trace(trace)) == trace


def test_trace_parse_errors_carry_line_numbers():
    from loanlab.core import InvalidParameter

    with pytest.raises(InvalidParameter, match="line 2"):
        parse_trace("0 TimeAdvance\n1 Repay 1/0\n")
    with pytest.raises(InvalidParameter, match="unknown event"):
        parse_trace("0 Nonsense\n")
