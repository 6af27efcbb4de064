"""Builders for the extensive-form games induced by the three protocols.

Leaf utilities are never hand-written: every deal leaf is obtained by running
the corresponding event trace through the protocol state machine and reading
off the settlement.  The two no-deal leaves (refusing to lend, creating an
incorrect contract) carry (-delta, -delta): both sides prefer a deal to no
deal, and delta prices the failed opportunity.

Info-set naming is stable so profiles read naturally in reports:
``stage1`` (lend), ``stage2`` (contract), ``stage3`` (repayment amount),
``stage4[x=..]`` / ``stage5[x=..]`` (opening decisions), and per liquidation
round ``liq<i>.borrower`` / ``liq<i>.lender``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

from ..core import (
    FiatAmount,
    InvalidParameter,
    LoanParams,
    PricePath,
    RepaymentWindows,
    rat_str,
)
from ..protocols import (
    ArbiterVerdict,
    BorrowerOpen,
    CreateContract,
    ForfeitTimeout,
    LenderDeposit,
    LenderOpen,
    LiquidateByLender,
    OracleQuery,
    Outcome,
    PrincipalRelease,
    Repay,
    Settlement,
    TerminateByBorrower,
    TimeAdvance,
    Trace,
    rho_b,
    rho_l,
    settle_pi1,
    settle_pi2,
    settle_pi3,
)
from ..protocols.state import check_early_termination_pi2, check_liquidation_pi2
from .tree import GameNode, GameTree, Leaf, Player, StrategyProfile

DEFAULT_GRID: tuple[Fraction, ...] = (Fraction(0), Fraction(1))
DENSE_GRID: tuple[Fraction, ...] = (
    Fraction(0),
    Fraction(1, 4),
    Fraction(1, 2),
    Fraction(3, 4),
    Fraction(1),
)

LEND, NOT_LEND = "lend", "not_lend"
CORRECT, INCORRECT = "correct", "incorrect"
OPEN, NOT_OPEN = "open", "not_open"
LIQUIDATE, NOT_LIQUIDATE = "liquidate", "not_liquidate"


def _check_grid(grid: Sequence[Fraction]) -> tuple[Fraction, ...]:
    values = tuple(grid)
    if not values:
        raise InvalidParameter("repayment grid must not be empty")
    if sorted(set(values)) != sorted(values):
        raise InvalidParameter("repayment grid must not repeat values")
    for x in values:
        if not (0 <= x <= 1):
            raise InvalidParameter("repayment fractions must lie in [0, 1]")
    if Fraction(1) not in values or Fraction(0) not in values:
        raise InvalidParameter("repayment grid must contain both x=0 and x=1")
    return values


def _contract_prefix(params: LoanParams) -> Trace:
    anchors = params.timeline
    return (
        LenderDeposit(anchors.t1 - 1, params.principal),
        CreateContract(anchors.t1, True),
        ArbiterVerdict((anchors.t1 + anchors.t_star) / 2),
        PrincipalRelease(anchors.t_star),
    )


def _no_deal_leaf(params: LoanParams, trace: Optional[Trace], label: str) -> Leaf:
    return Leaf(
        utilities=(-params.delta, -params.delta),
        outcome=Outcome.NO_DEAL,
        trace=trace,
        label=label,
    )


def _deal_leaf(settlement: Settlement, trace: Trace, label: str) -> Leaf:
    return Leaf(
        utilities=settlement.utility_pair(),
        outcome=settlement.outcome,
        trace=trace,
        label=label,
    )


@dataclass(frozen=True)
class _RepaymentContext:
    """How repayment-stage leaves of one tree are settled."""

    params: LoanParams
    prefix: Trace
    windows: RepaymentWindows
    include_advance: bool
    settle: Callable[[Trace], Settlement]


def _repayment_tail(ctx: _RepaymentContext, x: Fraction, lender_action: str, borrower_action: Optional[str]) -> Trace:
    events = list(ctx.prefix)
    if ctx.include_advance:
        events.append(TimeAdvance(ctx.windows.maturity))
    events.append(Repay(ctx.windows.maturity, FiatAmount(x * ctx.params.principal.m)))
    if lender_action == OPEN:
        events.append(LenderOpen(ctx.windows.t2))
    elif borrower_action == OPEN:
        events.append(BorrowerOpen(ctx.windows.t3))
    else:
        events.append(ForfeitTimeout(ctx.windows.forfeit))
    return tuple(events)


def _repayment_stages(ctx: _RepaymentContext, grid: tuple[Fraction, ...]) -> GameNode:
    edges = []
    for x in grid:
        xlabel = f"x={rat_str(x)}"
        open_trace = _repayment_tail(ctx, x, OPEN, None)
        open_leaf = _deal_leaf(ctx.settle(open_trace), open_trace, f"{xlabel};lender opens")
        b_open_trace = _repayment_tail(ctx, x, NOT_OPEN, OPEN)
        b_open_leaf = _deal_leaf(ctx.settle(b_open_trace), b_open_trace, f"{xlabel};borrower opens")
        forfeit_trace = _repayment_tail(ctx, x, NOT_OPEN, NOT_OPEN)
        forfeit_leaf = _deal_leaf(ctx.settle(forfeit_trace), forfeit_trace, f"{xlabel};forfeit")
        stage5 = GameNode(
            owner=Player.BORROWER,
            info_set=f"stage5[{xlabel}]",
            edges=((OPEN, b_open_leaf), (NOT_OPEN, forfeit_leaf)),
        )
        stage4 = GameNode(
            owner=Player.LENDER,
            info_set=f"stage4[{xlabel}]",
            edges=((OPEN, open_leaf), (NOT_OPEN, stage5)),
        )
        edges.append((xlabel, stage4))
    return GameNode(owner=Player.BORROWER, info_set="stage3", edges=tuple(edges))


def _wrap_opening_stages(params: LoanParams, inner: GameNode | Leaf, incorrect_trace: Trace) -> GameNode:
    stage2 = GameNode(
        owner=Player.BORROWER,
        info_set="stage2",
        edges=(
            (CORRECT, inner),
            (INCORRECT, _no_deal_leaf(params, incorrect_trace, "incorrect contract")),
        ),
    )
    return GameNode(
        owner=Player.LENDER,
        info_set="stage1",
        edges=((LEND, stage2), (NOT_LEND, _no_deal_leaf(params, None, "no deal"))),
    )


# ---------------------------------------------------------------------------
# Flat-rate game
# ---------------------------------------------------------------------------


def build_gamma1(params: LoanParams, grid: Sequence[Fraction] = DEFAULT_GRID) -> GameTree:
    """Five-stage game of the flat-rate protocol over a finite repayment grid
    (fractions of the principal)."""
    grid = _check_grid(grid)
    prefix = _contract_prefix(params)
    ctx = _RepaymentContext(
        params=params,
        prefix=prefix,
        windows=params.timeline.windows(),
        include_advance=True,
        settle=lambda trace: settle_pi1(trace, params),
    )
    inner = _repayment_stages(ctx, grid)
    incorrect = (prefix[0], CreateContract(params.timeline.t1, False))
    return GameTree(_wrap_opening_stages(params, inner, incorrect), name="gamma1")


# ---------------------------------------------------------------------------
# Oracle game
# ---------------------------------------------------------------------------


def build_gamma2(
    params: LoanParams, price_path: PricePath, grid: Sequence[Fraction] = DEFAULT_GRID
) -> GameTree:
    """Game of the oracle protocol for one query schedule.

    A path whose query trips the liquidation trigger collapses, at that query,
    into the liquidation leaf; a query at or above the early-termination
    threshold fast-tracks into the repayment stages at that price.  Otherwise
    the repayment stages are evaluated at the terminal query price.
    """
    grid = _check_grid(grid)
    price_path.validate_for_queries(params.q, params.timeline)
    prefix = _contract_prefix(params)
    incorrect = (prefix[0], CreateContract(params.timeline.t1, False))

    trigger = None
    for time, price in price_path.samples:
        if check_liquidation_pi2(price, params):
            trigger = ("liquidation", time, price)
            break
        if params.tau is not None and check_early_termination_pi2(price, params):
            trigger = ("early_termination", time, price)
            break

    if trigger is not None and trigger[0] == "liquidation":
        settlement = settle_pi2(prefix, price_path, params)
        inner: GameNode | Leaf = _deal_leaf(
            settlement, prefix, f"liquidated at p={rat_str(trigger[2].per_btc)}"
        )
        return GameTree(_wrap_opening_stages(params, inner, incorrect), name="gamma2")

    if trigger is not None:
        windows = params.timeline.windows(fast_maturity=trigger[1])
        include_advance = False  # the fast-track already enters repayment
    else:
        windows = params.timeline.windows()
        include_advance = True

    ctx = _RepaymentContext(
        params=params,
        prefix=prefix,
        windows=windows,
        include_advance=include_advance,
        settle=lambda trace: settle_pi2(trace, price_path, params),
    )
    inner = _repayment_stages(ctx, grid)
    return GameTree(_wrap_opening_stages(params, inner, incorrect), name="gamma2")


# ---------------------------------------------------------------------------
# Open-liquidation game
# ---------------------------------------------------------------------------


def build_gamma3(
    params: LoanParams,
    price_path: PricePath,
    rounds: int,
    grid: Sequence[Fraction] = DEFAULT_GRID,
) -> GameTree:
    """Six-stage game of the open protocol: the contract stages, ``rounds``
    liquidation blocks (Nature samples the price, then lender and borrower
    move simultaneously), then the repayment stages at the last sampled price.

    Each block's lender vertices share one information set: the lender moves
    without observing the borrower's simultaneous choice.  When both sides
    liquidate at once the lender's opening is the one honored.
    """
    grid = _check_grid(grid)
    if rounds < 1:
        raise InvalidParameter("rounds must be at least 1")
    if len(price_path) != rounds:
        raise InvalidParameter("price path must supply one sample per liquidation round")
    if params.epsilon * params.p0.per_btc >= 1:
        raise InvalidParameter("epsilon out of range: contract shares would be non-positive")
    anchors = params.timeline
    for time, _ in price_path.samples:
        if not (anchors.t_star < time <= anchors.maturity):
            raise InvalidParameter("liquidation rounds must lie inside the loan term")
    if price_path.samples[-1][0] != anchors.maturity:
        raise InvalidParameter("the last liquidation round must sit at the maturity date")

    prefix = _contract_prefix(params)
    incorrect = (prefix[0], CreateContract(params.timeline.t1, False))

    def marks_through(i: int) -> Trace:
        return tuple(OracleQuery(t, p) for t, p in price_path.samples[:i])

    def block(i: int) -> GameNode:
        time, price = price_path.samples[i]
        plabel = f"p={rat_str(price.per_btc)}"
        if i + 1 < rounds:
            continuation: GameNode | Leaf = block(i + 1)
        else:
            ctx = _RepaymentContext(
                params=params,
                prefix=prefix + marks_through(rounds),
                windows=params.timeline.windows(),
                include_advance=True,
                settle=lambda trace: settle_pi3(trace, params),
            )
            continuation = _repayment_stages(ctx, grid)

        def liq_leaf(actor_event, label: str) -> Leaf:
            trace = prefix + marks_through(i) + (actor_event,)
            return _deal_leaf(settle_pi3(trace, params), trace, label)

        lender_liq = liq_leaf(LiquidateByLender(time, price), f"lender liquidates at {plabel}")
        borrower_term = liq_leaf(TerminateByBorrower(time, price), f"borrower terminates at {plabel}")
        both = liq_leaf(LiquidateByLender(time, price), f"both liquidate at {plabel}")

        lender_after_term = GameNode(
            owner=Player.LENDER,
            info_set=f"liq{i + 1}.lender",
            edges=((LIQUIDATE, both), (NOT_LIQUIDATE, borrower_term)),
        )
        lender_after_hold = GameNode(
            owner=Player.LENDER,
            info_set=f"liq{i + 1}.lender",
            edges=((LIQUIDATE, lender_liq), (NOT_LIQUIDATE, continuation)),
        )
        borrower_node = GameNode(
            owner=Player.BORROWER,
            info_set=f"liq{i + 1}.borrower",
            edges=((LIQUIDATE, lender_after_term), (NOT_LIQUIDATE, lender_after_hold)),
        )
        return GameNode(
            owner=Player.NATURE,
            info_set=f"liq{i + 1}.nature",
            edges=((plabel, borrower_node),),
            probs=(Fraction(1),),
        )

    return GameTree(_wrap_opening_stages(params, block(0), incorrect), name="gamma3")


# ---------------------------------------------------------------------------
# Canonical profiles
# ---------------------------------------------------------------------------


def honest_profile(tree: GameTree) -> StrategyProfile:
    """The protocol-following profile for the flat-rate and oracle games:
    lend, correct contract, repay in full, open after full repayment.  Off the
    honest path it prescribes the payoff-maximal continuations (withhold after
    a partial repayment; open as the borrower everywhere)."""
    profile: StrategyProfile = {}
    for name in tree.info_sets:
        if name == "stage1":
            profile[name] = LEND
        elif name == "stage2":
            profile[name] = CORRECT
        elif name == "stage3":
            profile[name] = "x=1"
        elif name.startswith("stage4"):
            profile[name] = OPEN if name == "stage4[x=1]" else NOT_OPEN
        elif name.startswith("stage5"):
            profile[name] = OPEN
        else:
            raise InvalidParameter(f"unexpected info set {name!r} in a five-stage game")
    return profile


def open_protocol_profile(
    tree: GameTree, params: LoanParams, price_path: PricePath
) -> StrategyProfile:
    """The stable profile of the open-liquidation game, stated pointwise.

    Per liquidation round: the lender liquidates exactly when the sampled
    price is at or below the lender threshold; the borrower never terminates.
    In the repayment stages (reached at the last sampled price p_t): repay in
    full when the full repayment weakly dominates (p_t at or above the lender
    threshold), the lender opens only below the borrower threshold, and the
    borrower opens wherever opening beats the forfeit (everywhere after a
    partial repayment; above one third of the inception price after a full
    one).  Restricted to each path class this is exactly the profile the
    equilibrium checks target.
    """
    lender_threshold = rho_l(params).per_btc
    borrower_threshold = rho_b(params).per_btc
    forfeit_threshold = params.p0.per_btc / 3
    p_t = price_path.terminal_price.per_btc
    profile: StrategyProfile = {}
    for name in tree.info_sets:
        if name == "stage1":
            profile[name] = LEND
        elif name == "stage2":
            profile[name] = CORRECT
        elif name.endswith(".borrower") and name.startswith("liq"):
            profile[name] = NOT_LIQUIDATE
        elif name.endswith(".lender") and name.startswith("liq"):
            index = int(name[3:].split(".")[0]) - 1
            price = price_path.samples[index][1].per_btc
            profile[name] = LIQUIDATE if price <= lender_threshold else NOT_LIQUIDATE
        elif name == "stage3":
            profile[name] = "x=1" if p_t >= lender_threshold else "x=0"
        elif name.startswith("stage4"):
            if name == "stage4[x=1]":
                profile[name] = OPEN if p_t < borrower_threshold else NOT_OPEN
            else:
                profile[name] = NOT_OPEN
        elif name.startswith("stage5"):
            if name == "stage5[x=1]":
                profile[name] = OPEN if p_t >= forfeit_threshold else NOT_OPEN
            else:
                profile[name] = OPEN
        else:
            raise InvalidParameter(f"unexpected info set {name!r} in the open game")
    return profile


def path_event_class(params: LoanParams, price_path: PricePath) -> str:
    """Classify an open-protocol path: 'E_L' if some round price reaches the
    lender threshold, else 'E_B' if some price reaches the borrower
    threshold, else 'none'."""
    lender_threshold = rho_l(params).per_btc
    borrower_threshold = rho_b(params).per_btc
    for _, price in price_path.samples:
        if price.per_btc <= lender_threshold:
            return "E_L"
    for _, price in price_path.samples:
        if price.per_btc >= borrower_threshold:
            return "E_B"
    return "none"
