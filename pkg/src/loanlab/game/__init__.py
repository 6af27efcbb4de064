from .tree import (
    GameNode,
    GameTree,
    Leaf,
    MalformedGame,
    Player,
    StrategyProfile,
    expected_utilities,
    validate_profile,
)
from .solve import (
    EnumerationOverflow,
    NoPureEquilibrium,
    SpeVerdict,
    SpeWitness,
    is_spe,
    solve_spe,
)
from .builders import (
    DEFAULT_GRID,
    DENSE_GRID,
    build_gamma1,
    build_gamma2,
    build_gamma3,
    honest_profile,
    open_protocol_profile,
    path_event_class,
)
from .dot import export_dot

__all__ = [name for name in dir() if not name.startswith("_")]
