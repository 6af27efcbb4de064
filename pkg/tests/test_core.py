from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from loanlab.core import (
    BtcAmount,
    FiatAmount,
    InvalidParameter,
    LoanParams,
    Price,
    PricePath,
    TimeAnchors,
    collateral_value,
    price_of,
    rat,
    rat_str,
)

rationals = st.fractions(
    min_value=Fraction(-100), max_value=Fraction(100), max_denominator=50
)
positive_rationals = st.fractions(
    min_value=Fraction(1, 50), max_value=Fraction(100), max_denominator=50
)


def test_rat_parses_ints_and_fractions():
    assert rat(3) == Fraction(3)
    assert rat("5/3") == Fraction(5, 3)
    assert rat("-7") == Fraction(-7)
    assert rat(Fraction(2, 4)) == Fraction(1, 2)


@pytest.mark.parametrize("bad", ["1.5", "1e3", "1/0", "abc", 1.5, None])
def test_rat_rejects_floats_and_garbage(bad):
    with pytest.raises(InvalidParameter):
        rat(bad)


def test_rat_str_roundtrip():
    assert rat_str(Fraction(5, 3)) == "5/3"
    assert rat_str(Fraction(4, 2)) == "2"
    assert rat(rat_str(Fraction(-9, 7))) == Fraction(-9, 7)


@given(a=rationals, b=rationals)
def test_rational_addition_roundtrips(a, b):
    assert (a + b) - b == a


def test_price_of_unit_rate():
    assert price_of(1).per_btc == 1


def test_price_of_half_rate_is_two():
    # a rate of 1/2 means 1 BTC is worth 2M fiat
    assert price_of(Fraction(1, 2)).per_btc == 2


def test_price_of_exact_reciprocal():
    assert price_of(Fraction(3, 4)).per_btc == Fraction(4, 3)


def test_price_of_rejects_nonpositive():
    with pytest.raises(InvalidParameter):
        price_of(0)
    with pytest.raises(InvalidParameter):
        price_of(Fraction(-1, 2))


@given(x=positive_rationals)
def test_price_rate_roundtrip(x):
    assert price_of(price_of(x).rate).per_btc == price_of(x).per_btc
    assert price_of(x).per_btc * x == 1


def test_collateral_value_basic():
    assert collateral_value(BtcAmount(Fraction(1)), Price(Fraction(2))).m == 2


def test_collateral_value_zero():
    assert collateral_value(BtcAmount(Fraction(0)), Price(Fraction(7, 3))).m == 0


def test_collateral_value_cross_checked_against_integer_product():
    amount, price = Fraction(1), Fraction(3, 2)
    value = collateral_value(BtcAmount(amount), Price(price)).m
    # independent big-integer cross multiplication
    num = amount.numerator * price.numerator
    den = amount.denominator * price.denominator
    assert value * den == num
    assert value == Fraction(3, 2)


@given(a=positive_rationals, b=positive_rationals, p=positive_rationals, k=positive_rationals)
def test_collateral_value_is_bilinear(a, b, p, k):
    va = collateral_value(BtcAmount(a), Price(p)).m
    vb = collateral_value(BtcAmount(b), Price(p)).m
    assert collateral_value(BtcAmount(a + b), Price(p)).m == va + vb
    assert collateral_value(BtcAmount(k * a), Price(p)).m == k * va
    assert collateral_value(BtcAmount(a), Price(k * p)).m == k * va


def test_collateral_value_rejects_negative_amount():
    with pytest.raises(InvalidParameter):
        collateral_value(BtcAmount(Fraction(-1)), Price(Fraction(1)))


def test_fiat_btc_conversions():
    fiat = FiatAmount(Fraction(3))
    assert fiat.btc_at(Price(Fraction(2))).coins == Fraction(3, 2)
    assert BtcAmount(Fraction(3, 2)).value_at(Price(Fraction(2))).m == 3


# -- parameters and timeline --------------------------------------------------


def test_default_collateral_is_half_ltv():
    params = LoanParams(p0=Price(Fraction(2)), epsilon=Fraction(1, 10))
    assert params.y.coins == 1
    assert params.y.value_at(params.p0).m == 2 * params.principal.m


def test_explicit_collateral_must_match_ltv():
    with pytest.raises(InvalidParameter):
        LoanParams(p0=Price(Fraction(2)), epsilon=Fraction(1, 10), y=BtcAmount(Fraction(2)))


@pytest.mark.parametrize("eps", [Fraction(0), Fraction(1), Fraction(3, 2), Fraction(-1, 10)])
def test_epsilon_bounds(eps):
    with pytest.raises(InvalidParameter):
        LoanParams(p0=Price(Fraction(1)), epsilon=eps)


def test_tau_must_exceed_p0():
    with pytest.raises(InvalidParameter):
        LoanParams(p0=Price(Fraction(2)), epsilon=Fraction(1, 10), tau=Price(Fraction(2)))


def test_timeline_ordering_enforced():
    with pytest.raises(InvalidParameter):
        TimeAnchors(t1=-1, t_star=0, t2=Fraction(11), t3=Fraction(25, 2))
    with pytest.raises(InvalidParameter):
        TimeAnchors(t1=1, t_star=0, t2=Fraction(49, 4), t3=Fraction(25, 2))


def test_timeline_windows_shift():
    anchors = TimeAnchors(t1=-1, t_star=0, t2=Fraction(49, 4), t3=Fraction(25, 2))
    fast = anchors.windows(fast_maturity=Fraction(6))
    assert fast.maturity == 6
    assert fast.t2 == Fraction(6) + Fraction(1, 4)
    assert fast.forfeit == 7
    normal = anchors.windows()
    assert (normal.maturity, normal.forfeit) == (12, 13)


def test_price_path_requires_increasing_times():
    with pytest.raises(InvalidParameter):
        PricePath.from_pairs([("3", "2"), ("3", "1")])


def test_price_path_query_validation():
    anchors = TimeAnchors(t1=-1, t_star=0, t2=Fraction(49, 4), t3=Fraction(25, 2))
    path = PricePath.from_pairs([("6", "2"), ("12", "2")])
    path.validate_for_queries(2, anchors)
    with pytest.raises(InvalidParameter):
        path.validate_for_queries(3, anchors)
    with pytest.raises(InvalidParameter):
        PricePath.from_pairs([("6", "2"), ("11", "2")]).validate_for_queries(2, anchors)
