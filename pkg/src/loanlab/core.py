"""Exact-arithmetic monetary types, prices, protocol parameters and the event timeline.

Every quantity in this package is a :class:`fractions.Fraction`.  Equilibrium
verification depends on exact comparisons (a payoff of 0 versus -epsilon must
never be blurred by rounding), so floats are rejected everywhere, including in
scenario files.

Conventions:
  * fiat amounts are in units of 1M fiat ("M"),
  * BTC amounts are in coins,
  * prices are fiat-M per 1 BTC; the exchange rate r is the reciprocal,
  * time is a rational month counter with the loan start at t* = 0 by default.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

RationalLike = Union[int, str, Fraction]


class LoanLabError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameter(LoanLabError):
    """A parameter or input violates a documented precondition."""


def rat(value: RationalLike) -> Fraction:
    """Parse an exact rational from an int, Fraction, or a ``num/den`` string.

    Decimal strings and floats are rejected: silent precision loss would
    corrupt equilibrium checks.
    """
    if isinstance(value, bool):
        raise InvalidParameter(f"not a rational: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        raise InvalidParameter(f"floats are not accepted, got {value!r}; use 'num/den'")
    if isinstance(value, str):
        text = value.strip()
        if "." in text or "e" in text.lower():
            raise InvalidParameter(f"decimal literals are rejected: {value!r}; use 'num/den'")
        try:
            if "/" in text:
                num, den = text.split("/")
                return Fraction(int(num), int(den))
            return Fraction(int(text))
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidParameter(f"malformed rational {value!r}: {exc}") from exc
    raise InvalidParameter(f"not a rational: {value!r}")


def rat_str(value: Fraction) -> str:
    """Render a rational as ``num/den`` (plain ``num`` when the denominator is 1)."""
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


# ---------------------------------------------------------------------------
# Monetary types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class FiatAmount:
    """A fiat quantity in units of 1M.  Negative values appear only in
    utility/position vectors, never in escrow balances."""

    m: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "m", rat(self.m))

    def __add__(self, other: "FiatAmount") -> "FiatAmount":
        return FiatAmount(self.m + other.m)

    def __sub__(self, other: "FiatAmount") -> "FiatAmount":
        return FiatAmount(self.m - other.m)

    def __neg__(self) -> "FiatAmount":
        return FiatAmount(-self.m)

    def scaled(self, factor: Fraction) -> "FiatAmount":
        return FiatAmount(self.m * factor)

    def btc_at(self, price: "Price") -> "BtcAmount":
        """The amount of BTC worth this fiat amount at ``price``."""
        return BtcAmount(self.m / price.per_btc)

    def __str__(self) -> str:
        return f"{rat_str(self.m)}M"


@dataclass(frozen=True, order=True)
class BtcAmount:
    """A BTC quantity in coins.  Escrow balances must stay non-negative;
    signed values are allowed in position deltas."""

    coins: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "coins", rat(self.coins))

    def __add__(self, other: "BtcAmount") -> "BtcAmount":
        return BtcAmount(self.coins + other.coins)

    def __sub__(self, other: "BtcAmount") -> "BtcAmount":
        return BtcAmount(self.coins - other.coins)

    def __neg__(self) -> "BtcAmount":
        return BtcAmount(-self.coins)

    def scaled(self, factor: Fraction) -> "BtcAmount":
        return BtcAmount(self.coins * factor)

    def value_at(self, price: "Price") -> FiatAmount:
        """Fiat value of this quantity at ``price`` (exact product)."""
        return FiatAmount(self.coins * price.per_btc)

    def __str__(self) -> str:
        return f"{rat_str(self.coins)} BTC"


@dataclass(frozen=True, order=True)
class Price:
    """Price of 1 BTC in fiat-M.  The exchange rate is the exact reciprocal."""

    per_btc: Fraction

    def __post_init__(self) -> None:
        per_btc = rat(self.per_btc)
        if per_btc <= 0:
            raise InvalidParameter(f"price must be positive, got {rat_str(per_btc)}")
        object.__setattr__(self, "per_btc", per_btc)

    @classmethod
    def from_rate(cls, rate: RationalLike) -> "Price":
        """Build from an exchange rate r (BTC per 1M fiat): price = 1/r."""
        r = rat(rate)
        if r <= 0:
            raise InvalidParameter(f"rate must be positive, got {rat_str(r)}")
        return cls(Fraction(1) / r)

    @property
    def rate(self) -> Fraction:
        return Fraction(1) / self.per_btc

    def __str__(self) -> str:
        return rat_str(self.per_btc)


def price_of(rate: RationalLike) -> Price:
    """Price implied by exchange rate ``rate``: exactly 1/rate."""
    return Price.from_rate(rate)


def collateral_value(amount: BtcAmount, p: Price) -> FiatAmount:
    """Fiat value of ``amount`` BTC at price ``p`` (exact)."""
    if amount.coins < 0:
        raise InvalidParameter("collateral amount must be non-negative")
    return amount.value_at(p)


# ---------------------------------------------------------------------------
# Timeline
# ---------------------------------------------------------------------------

MATURITY_MONTHS = Fraction(12)
FORFEIT_MONTHS = Fraction(13)


@dataclass(frozen=True)
class TimeAnchors:
    """Named times of one loan: contract-creation timeout t1, loan start t*,
    and the repayment windows bounded by t2 and t3.

    maturity = t* + 12 and forfeit = t* + 13 are derived.  Required ordering:
    t1 < t* and t* + 12 < t2 < t3 < forfeit.
    """

    t1: Fraction
    t_star: Fraction
    t2: Fraction
    t3: Fraction

    def __post_init__(self) -> None:
        for name in ("t1", "t_star", "t2", "t3"):
            object.__setattr__(self, name, rat(getattr(self, name)))
        if not self.t1 < self.t_star:
            raise InvalidParameter("timeline requires t1 < t_star")
        if not (self.t3 > self.t2 > self.maturity):
            raise InvalidParameter("timeline requires t3 > t2 > t_star + 12")
        if not self.forfeit > self.t3:
            raise InvalidParameter("timeline requires forfeit > t3")

    @property
    def maturity(self) -> Fraction:
        return self.t_star + MATURITY_MONTHS

    @property
    def forfeit(self) -> Fraction:
        return self.t_star + FORFEIT_MONTHS

    def windows(self, fast_maturity: Optional[Fraction] = None) -> "RepaymentWindows":
        """The repayment windows, optionally translated so the maturity sits
        at ``fast_maturity`` (early termination proceeds as if the maturity
        were now)."""
        offset = Fraction(0) if fast_maturity is None else fast_maturity - self.maturity
        return RepaymentWindows(
            maturity=self.maturity + offset,
            t2=self.t2 + offset,
            t3=self.t3 + offset,
            forfeit=self.forfeit + offset,
        )


@dataclass(frozen=True)
class RepaymentWindows:
    """Effective repayment schedule: the arbiter accepts repayment in
    [maturity, t2], the lender opens in [t2, t3], the borrower opens in
    [t3, forfeit), and the contract auto-forfeits at ``forfeit``."""

    maturity: Fraction
    t2: Fraction
    t3: Fraction
    forfeit: Fraction


DEFAULT_ANCHORS = TimeAnchors(
    t1=Fraction(-1), t_star=Fraction(0), t2=Fraction(49, 4), t3=Fraction(25, 2)
)


# ---------------------------------------------------------------------------
# Price paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PricePath:
    """Ordered (time, price) samples; times strictly increase and the last
    sample sits at the loan maturity (or the last liquidation round)."""

    samples: tuple[tuple[Fraction, Price], ...]

    def __post_init__(self) -> None:
        normalized = []
        prev_time: Optional[Fraction] = None
        for time, price in self.samples:
            time = rat(time)
            if not isinstance(price, Price):
                price = Price(rat(price))
            if prev_time is not None and time <= prev_time:
                raise InvalidParameter("price path times must strictly increase")
            prev_time = time
            normalized.append((time, price))
        if not normalized:
            raise InvalidParameter("price path must contain at least one sample")
        object.__setattr__(self, "samples", tuple(normalized))

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[RationalLike]]) -> "PricePath":
        return cls(tuple((rat(t), Price(rat(p))) for t, p in pairs))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def times(self) -> tuple[Fraction, ...]:
        return tuple(t for t, _ in self.samples)

    @property
    def prices(self) -> tuple[Price, ...]:
        return tuple(p for _, p in self.samples)

    @property
    def terminal_price(self) -> Price:
        return self.samples[-1][1]

    def validate_for_queries(self, q: int, anchors: TimeAnchors) -> None:
        """A price-oracle path must carry exactly q samples inside the loan
        term with the final query at the maturity date."""
        if len(self.samples) != q:
            raise InvalidParameter(f"path has {len(self.samples)} samples, expected q={q}")
        if self.samples[-1][0] != anchors.maturity:
            raise InvalidParameter("final oracle query must fall on the maturity date")
        for time, _ in self.samples:
            if not (anchors.t_star <= time <= anchors.maturity):
                raise InvalidParameter("oracle queries must lie within the loan term")


# ---------------------------------------------------------------------------
# Protocol parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LoanParams:
    """All protocol constants for one loan.

    The collateral always starts at half loan-to-value: y * p0 = 2 * principal.
    ``epsilon`` parameterizes deviation penalties (a fiat-M fraction of the
    principal in the flat-rate and oracle protocols; a BTC amount scaled by the
    principal in the open-liquidation protocol).  ``epsilon_prime`` is the
    undercollateralized-settlement penalty; when None it defaults per
    settlement to min(epsilon, (value-1)/2).  ``tau`` is the borrower's
    early-termination price threshold (oracle protocol), ``q`` the oracle
    query count, ``k`` the collateral chunk count for the UTXO encoding.
    """

    p0: Price
    epsilon: Fraction
    principal: FiatAmount = field(default_factory=lambda: FiatAmount(Fraction(1)))
    y: Optional[BtcAmount] = None
    epsilon_prime: Optional[Fraction] = None
    delta: Fraction = Fraction(5)
    tau: Optional[Price] = None
    q: int = 1
    k: int = 1
    timeline: TimeAnchors = DEFAULT_ANCHORS

    def __post_init__(self) -> None:
        object.__setattr__(self, "epsilon", rat(self.epsilon))
        object.__setattr__(self, "delta", rat(self.delta))
        if self.epsilon_prime is not None:
            object.__setattr__(self, "epsilon_prime", rat(self.epsilon_prime))
        if self.y is None:
            coins = 2 * self.principal.m / self.p0.per_btc
            object.__setattr__(self, "y", BtcAmount(coins))
        if self.y.value_at(self.p0) != self.principal.scaled(Fraction(2)):
            raise InvalidParameter("collateral must satisfy y * p0 = 2 * principal")
        if not (0 < self.epsilon < 1):
            raise InvalidParameter("epsilon must satisfy 0 < epsilon < 1")
        if self.epsilon_prime is not None and self.epsilon_prime <= 0:
            raise InvalidParameter("epsilon_prime must be positive when set")
        if self.delta <= 0:
            raise InvalidParameter("delta must be positive")
        if self.tau is not None and self.tau.per_btc <= self.p0.per_btc:
            raise InvalidParameter("early-termination threshold tau must exceed p0")
        if self.q < 1:
            raise InvalidParameter("q must be at least 1")
        if self.k < 1:
            raise InvalidParameter("k must be at least 1")

    @property
    def liquidation_price(self) -> Price:
        """The oracle-protocol liquidation trigger: prices below p0/2."""
        return Price(self.p0.per_btc / 2)

    @property
    def principal_scale(self) -> Fraction:
        """Principal in M; penalty constants scale with it."""
        return self.principal.m

    def epsilon_fiat(self) -> FiatAmount:
        """The flat-rate/oracle penalty in fiat-M (epsilon * principal)."""
        return FiatAmount(self.epsilon * self.principal.m)

    def epsilon_btc(self) -> BtcAmount:
        """The open-liquidation penalty in BTC (epsilon * principal-scale)."""
        return BtcAmount(self.epsilon * self.principal.m)
