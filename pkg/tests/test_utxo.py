"""UTXO layer: condition evaluation, the collateral transaction's spend
matrix, transaction application, and chunked redistribution."""

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from loanlab.core import BtcAmount, FiatAmount, InvalidParameter, LoanParams, Price
from loanlab.protocols import Party
from loanlab.utxo import (
    After,
    All,
    Any_,
    MissingInput,
    Output,
    RequireSig,
    Transaction,
    UnsatisfiedCondition,
    ValueMismatch,
    Witness,
    apply_tx,
    btc_distribution,
    build_chunked_collateral,
    build_pi1_collateral_tx,
    eval_condition,
    funding_output,
    pay,
    redistribute_chunks,
    spend_matrix,
)

F = Fraction


def p1_params():
    return LoanParams(p0=Price(F(1)), epsilon=F(1, 10), delta=F(5))


# -- conditions ---------------------------------------------------------------


def test_require_sig():
    cond = RequireSig(Party.LENDER)
    assert eval_condition(cond, Witness.of(Party.LENDER))
    assert not eval_condition(cond, Witness.of(Party.BORROWER))
    assert not eval_condition(cond, Witness.of(Party.LENDER, context="open"))


def test_all_with_timelock_not_met():
    cond = All((RequireSig(Party.BORROWER), After(F(13))))
    witness = Witness.of(Party.BORROWER, time=F(12))
    assert not eval_condition(cond, witness)


def test_any_timelock_branch():
    cond = Any_((RequireSig(Party.LENDER), After(F(13))))
    assert eval_condition(cond, Witness(frozenset(), F(13)))
    assert not eval_condition(cond, Witness(frozenset(), F(12)))


@given(
    t_true=st.fractions(min_value=F(0), max_value=F(20), max_denominator=8),
    dt=st.fractions(min_value=F(0), max_value=F(10), max_denominator=8),
)
def test_timelock_monotonicity(t_true, dt):
    cond = Any_((All((RequireSig(Party.BORROWER), After(F(5)))), After(F(13))))
    w1 = Witness.of(Party.BORROWER, time=t_true)
    if eval_condition(cond, w1):
        w2 = Witness.of(Party.BORROWER, time=t_true + dt)
        assert eval_condition(cond, w2)


# -- collateral transaction -----------------------------------------------------


def test_collateral_values_sum_to_whole():
    params = p1_params()
    coll = build_pi1_collateral_tx(params)
    eps = params.epsilon
    values = [o.value.coins for o in coll.outputs]
    assert values == [1 - eps, 1 - eps, 2 * eps]
    assert sum(values) == params.y.coins


def test_spend_matrix_borrower_window():
    params = p1_params()
    coll = build_pi1_collateral_tx(params)
    t3 = params.timeline.windows().t3
    witness = Witness.of(Party.BORROWER, time=t3, context="open")
    assert [coll.claimant(i, witness) for i in range(3)] == [
        Party.BORROWER,
        Party.LENDER,
        Party.ARBITER,
    ]


def test_spend_matrix_timeout_all_to_lender():
    params = p1_params()
    coll = build_pi1_collateral_tx(params)
    witness = Witness(frozenset(), params.timeline.forfeit)
    assert [coll.claimant(i, witness) for i in range(3)] == [Party.LENDER] * 3


def test_spend_matrix_locked_before_windows():
    params = p1_params()
    coll = build_pi1_collateral_tx(params)
    witness = Witness(frozenset(), params.timeline.t_star)
    assert [coll.claimant(i, witness) for i in range(3)] == [None] * 3
    rows = spend_matrix(coll, [("t_star+none", witness)])
    assert [row[1] for row in rows] == ["locked"] * 3


def test_lender_opening_releases_everything_to_borrower():
    params = p1_params()
    coll = build_pi1_collateral_tx(params)
    witness = Witness.of(Party.LENDER, time=params.timeline.windows().t2, context="open")
    assert [coll.claimant(i, witness) for i in range(3)] == [Party.BORROWER] * 3


# -- apply_tx ---------------------------------------------------------------------


def seed_utxo():
    out = pay(Party.LENDER, BtcAmount(F(2)))
    return {("genesis", 0): out}


def test_apply_tx_roundtrip():
    utxo = seed_utxo()
    tx = Transaction("t1", (("genesis", 0),), (pay(Party.BORROWER, BtcAmount(F(2))),))
    new = apply_tx(utxo, tx, [Witness.of(Party.LENDER)])
    assert ("genesis", 0) not in new
    assert new[("t1", 0)].value.coins == 2
    assert btc_distribution(new) == {Party.LENDER: 0, Party.BORROWER: 2, Party.ARBITER: 0}


def test_apply_tx_value_mismatch():
    tx = Transaction("t1", (("genesis", 0),), (pay(Party.BORROWER, BtcAmount(F(19, 10))),))
    with pytest.raises(ValueMismatch):
        apply_tx(seed_utxo(), tx, [Witness.of(Party.LENDER)])


def test_apply_tx_rejects_bad_witness():
    tx = Transaction("t1", (("genesis", 0),), (pay(Party.BORROWER, BtcAmount(F(2))),))
    with pytest.raises(UnsatisfiedCondition):
        apply_tx(seed_utxo(), tx, [Witness.of(Party.BORROWER)])


def test_double_spend_detected():
    utxo = seed_utxo()
    tx = Transaction("t1", (("genesis", 0),), (pay(Party.BORROWER, BtcAmount(F(2))),))
    new = apply_tx(utxo, tx, [Witness.of(Party.LENDER)])
    tx2 = Transaction("t2", (("genesis", 0),), (pay(Party.ARBITER, BtcAmount(F(2))),))
    with pytest.raises(MissingInput):
        apply_tx(new, tx2, [Witness.of(Party.LENDER)])


def test_collateral_lock_spends_funding():
    params = p1_params()
    coll = build_pi1_collateral_tx(params)
    utxo = {("funding", 0): funding_output(params)}
    new = apply_tx(utxo, coll.tx, [Witness.of(Party.BORROWER)])
    assert len(new) == 3
    assert sum(o.value.coins for o in new.values()) == params.y.coins


# -- chunked collateral -------------------------------------------------------------


def test_chunks_are_uniform():
    chunks = build_chunked_collateral(BtcAmount(F(1)), 4)
    assert [c.value.coins for c in chunks] == [F(1, 4)] * 4
    assert sum(c.value.coins for c in chunks) == 1


def test_chunking_requires_k_at_least_two():
    with pytest.raises(InvalidParameter):
        build_chunked_collateral(BtcAmount(F(1)), 1)


def test_redistribute_chunks_moves_excess():
    chunks = build_chunked_collateral(BtcAmount(F(1)), 4)
    main, temp = redistribute_chunks(chunks, [], Price(F(4)))
    assert len(main) == 2 and len(temp) == 2
    assert sum(c.value.coins for c in main) * 4 == 2


def test_redistribute_chunks_no_move_at_par():
    chunks = build_chunked_collateral(BtcAmount(F(1)), 4)
    main, temp = redistribute_chunks(chunks, [], Price(F(2)))
    assert len(main) == 4 and not temp


def test_redistribute_chunks_refills():
    chunks = build_chunked_collateral(BtcAmount(F(1)), 4)
    main, temp = redistribute_chunks(chunks, [], Price(F(4)))
    main, temp = redistribute_chunks(main, temp, Price(F(2)))
    assert len(main) == 4 and not temp


def test_redistribute_chunks_rejects_mixed_sizes():
    a = build_chunked_collateral(BtcAmount(F(1)), 4)
    b = build_chunked_collateral(BtcAmount(F(1)), 2)
    with pytest.raises(InvalidParameter):
        redistribute_chunks(a, b, Price(F(2)))


@pytest.mark.parametrize("k", [2, 4, 8])
def test_chunked_tracks_exact_within_one_chunk(k):
    """Whole-chunk redistribution stays within one chunk of the exact
    rational rebalancing at every query price."""
    from loanlab.protocols import OracleQuery, Protocol, run_trace, step

    params = LoanParams(p0=Price(F(2)), epsilon=F(1, 10), q=6, k=k)
    t1, ts = params.timeline.t1, params.timeline.t_star
    from loanlab.protocols import ArbiterVerdict, CreateContract, LenderDeposit, PrincipalRelease

    state = run_trace(
        (
            LenderDeposit(t1 - 1, params.principal),
            CreateContract(t1, True),
            ArbiterVerdict((t1 + ts) / 2),
            PrincipalRelease(ts),
        ),
        Protocol.P2,
        params,
    )
    main = build_chunked_collateral(params.y, k)
    temp: list = []
    prices = [F(2), F(4), F(3), F(5, 2), F(8), F(2)]
    for i, p in enumerate(prices):
        state = step(state, OracleQuery(F(i + 1), Price(p)), params)
        main, temp = redistribute_chunks(main, temp, Price(p), FiatAmount(F(2)))
        chunked = sum(c.value.coins for c in main)
        assert abs(chunked - state.contract_btc) <= params.y.coins / k
        assert chunked * p <= 2
        assert len(main) + len(temp) == k
