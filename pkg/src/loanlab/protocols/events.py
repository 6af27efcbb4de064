"""Parties, protocol phases, loan events, and the line-oriented trace format.

Trace lines are ``TIME EVENT [ARGS]`` with rationals as ``num/den``, e.g.::

    -2 LenderDeposit 1
    -1 CreateContract correct
    -1/2 ArbiterVerdict
    0 PrincipalRelease
    3 OracleQuery 9/5
    12 Repay 1
    49/4 LenderOpen
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable

from ..core import (
    FiatAmount,
    InvalidParameter,
    Price,
    rat,
    rat_str,
)


class Party(Enum):
    LENDER = "lender"
    BORROWER = "borrower"
    ARBITER = "arbiter"


class Protocol(Enum):
    P1 = "P1"  # flat exchange rate
    P2 = "P2"  # price oracle, collateral redistribution
    P3 = "P3"  # open early termination / liquidation


class Phase(Enum):
    AWAIT_LENDER_DEPOSIT = "AwaitLenderDeposit"
    AWAIT_CONTRACT = "AwaitContract"
    ACTIVE = "Active"
    REPAYMENT = "Repayment"
    SETTLED = "Settled"
    FORFEITED = "Forfeited"
    LIQUIDATED = "Liquidated"
    TERMINATED = "Terminated"
    ABORTED = "Aborted"

TERMINAL_PHASES = frozenset(
    {Phase.SETTLED, Phase.FORFEITED, Phase.LIQUIDATED, Phase.TERMINATED, Phase.ABORTED}
)


# ---------------------------------------------------------------------------
# Events
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LoanEvent:
    """Base event; ``time`` is the clock value at which the event fires."""

    time: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "time", rat(self.time))

    def args_text(self) -> str:
        return ""

    def format(self) -> str:
        args = self.args_text()
        name = type(self).__name__
        return f"{rat_str(self.time)} {name} {args}".rstrip()


@dataclass(frozen=True)
class LenderDeposit(LoanEvent):
    amount: FiatAmount = FiatAmount(Fraction(1))

    def args_text(self) -> str:
        return rat_str(self.amount.m)


@dataclass(frozen=True)
class CreateContract(LoanEvent):
    correct: bool = True

    def args_text(self) -> str:
        return "correct" if self.correct else "incorrect"


@dataclass(frozen=True)
class ArbiterVerdict(LoanEvent):
    pass


@dataclass(frozen=True)
class PrincipalRelease(LoanEvent):
    pass


@dataclass(frozen=True)
class OracleQuery(LoanEvent):
    """Price observation.  Drives redistribution/liquidation in the oracle
    protocol; in the open-liquidation protocol it only marks the ambient
    price both parties (and the arbiter's own oracle) observe."""

    price: Price = Price(Fraction(1))

    def args_text(self) -> str:
        return rat_str(self.price.per_btc)


@dataclass(frozen=True)
class Repay(LoanEvent):
    amount: FiatAmount = FiatAmount(Fraction(0))

    def args_text(self) -> str:
        return rat_str(self.amount.m)


@dataclass(frozen=True)
class LenderOpen(LoanEvent):
    pass


@dataclass(frozen=True)
class BorrowerOpen(LoanEvent):
    pass


@dataclass(frozen=True)
class LiquidateByLender(LoanEvent):
    price: Price = Price(Fraction(1))

    def args_text(self) -> str:
        return rat_str(self.price.per_btc)


@dataclass(frozen=True)
class TerminateByBorrower(LoanEvent):
    price: Price = Price(Fraction(1))

    def args_text(self) -> str:
        return rat_str(self.price.per_btc)


@dataclass(frozen=True)
class TimeAdvance(LoanEvent):
    pass


@dataclass(frozen=True)
class ForfeitTimeout(LoanEvent):
    pass


Trace = tuple[LoanEvent, ...]

_EVENT_TYPES = {
    cls.__name__: cls
    for cls in (
        LenderDeposit,
        CreateContract,
        ArbiterVerdict,
        PrincipalRelease,
        OracleQuery,
        Repay,
        LenderOpen,
        BorrowerOpen,
        LiquidateByLender,
        TerminateByBorrower,
        TimeAdvance,
        ForfeitTimeout,
    )
}


def format_trace(trace: Iterable[LoanEvent]) -> str:
    return "\n".join(event.format() for event in trace) + "\n"


def parse_trace(text: str) -> Trace:
    """Parse the line-oriented trace format; blank lines and ``#`` comments
    are skipped.  Malformed lines raise :class:`InvalidParameter` with the
    line number."""
    events: list[LoanEvent] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 2:
            raise InvalidParameter(f"trace line {lineno}: expected 'TIME EVENT [ARGS]'")
        try:
            time = rat(parts[0])
        except InvalidParameter as exc:
            raise InvalidParameter(f"trace line {lineno}: {exc}") from exc
        name = parts[1]
        cls = _EVENT_TYPES.get(name)
        if cls is None:
            raise InvalidParameter(f"trace line {lineno}: unknown event {name!r}")
        args = parts[2:]
        try:
            events.append(_build_event(cls, time, args))
        except InvalidParameter as exc:
            raise InvalidParameter(f"trace line {lineno}: {exc}") from exc
    return tuple(events)


def _build_event(cls: type, time: Fraction, args: list[str]) -> LoanEvent:
    if cls in (ArbiterVerdict, PrincipalRelease, LenderOpen, BorrowerOpen, TimeAdvance, ForfeitTimeout):
        if args:
            raise InvalidParameter(f"{cls.__name__} takes no arguments")
        return cls(time)
    if cls is LenderDeposit:
        _require_args(cls, args, 1)
        return LenderDeposit(time, FiatAmount(rat(args[0])))
    if cls is CreateContract:
        _require_args(cls, args, 1)
        if args[0] not in ("correct", "incorrect"):
            raise InvalidParameter("CreateContract argument must be 'correct' or 'incorrect'")
        return CreateContract(time, args[0] == "correct")
    if cls is Repay:
        _require_args(cls, args, 1)
        return Repay(time, FiatAmount(rat(args[0])))
    if cls in (OracleQuery, LiquidateByLender, TerminateByBorrower):
        _require_args(cls, args, 1)
        return cls(time, Price(rat(args[0])))
    raise InvalidParameter(f"unhandled event type {cls.__name__}")


def _require_args(cls: type, args: list[str], n: int) -> None:
    if len(args) != n:
        raise InvalidParameter(f"{cls.__name__} takes exactly {n} argument(s), got {len(args)}")
