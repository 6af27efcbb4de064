from __future__ import annotations

from fractions import Fraction
from itertools import product

import pytest

from loanlab.core import LoanParams, Price, PricePath
from loanlab.game.solve import _info_sets_below, _PLAYER_INDEX
from loanlab.game.tree import GameTree, Player, StrategyProfile, expected_utilities


@pytest.fixture
def pi1_params() -> LoanParams:
    return LoanParams(p0=Price(Fraction(1)), epsilon=Fraction(1, 10), delta=Fraction(5))


@pytest.fixture
def pi2_params() -> LoanParams:
    return LoanParams(
        p0=Price(Fraction(2)),
        epsilon=Fraction(1, 10),
        delta=Fraction(2),
        tau=Price(Fraction(3)),
        q=4,
    )


@pytest.fixture
def pi3_params() -> LoanParams:
    return LoanParams(p0=Price(Fraction(2)), epsilon=Fraction(1, 10), delta=Fraction(5))


def flat_path(price: str | Fraction, q: int = 4) -> PricePath:
    times = [Fraction(3 * (i + 1)) for i in range(q)]
    return PricePath(tuple((t, Price(Fraction(price))) for t in times))


def brute_force_is_spe(tree: GameTree, profile: StrategyProfile) -> bool:
    """Test oracle: check every subgame against every complete alternative
    strategy of each player (exponential, small trees only)."""
    for root in tree.subgame_roots():
        names = sorted(_info_sets_below(tree, root))
        base = expected_utilities(root, profile)
        for player in (Player.LENDER, Player.BORROWER):
            own = [n for n in names if tree.info_sets[n][0].owner is player]
            if not own:
                continue
            idx = _PLAYER_INDEX[player]
            action_sets = [tree.info_sets[n][0].actions() for n in own]
            for combo in product(*action_sets):
                trial = dict(profile)
                trial.update(zip(own, combo))
                if expected_utilities(root, trial)[idx] > base[idx]:
                    return False
    return True
