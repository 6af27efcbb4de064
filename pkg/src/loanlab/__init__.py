"""loanlab: deterministic simulation and equilibrium verification for
arbiter-mediated, BTC-collateralized fiat loans.

Three protocols are modeled: a flat-exchange-rate loan, an oracle-driven loan
with collateral redistribution and automatic liquidation, and an oracle-free
loan where either side may liquidate at any time subject to the arbiter's
reasonableness ruling.  Each protocol is an exact-rational state machine; the
games it induces are built from settlement traces and checked for subgame
perfection by backward induction.
"""

from .core import (
    BtcAmount,
    DEFAULT_ANCHORS,
    FiatAmount,
    InvalidParameter,
    LoanLabError,
    LoanParams,
    Price,
    PricePath,
    TimeAnchors,
    collateral_value,
    price_of,
    rat,
    rat_str,
)

__version__ = "0.1.0"
