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
    TerminateByBorrower,
    TimeAdvance,
    Trace,
    format_trace,
    parse_trace,
)
from .state import (
    Balances,
    InadmissibleEvent,
    IncompleteTrace,
    InvariantViolation,
    LoanState,
    Outcome,
    ProtocolError,
    WindowViolation,
    check_early_termination_pi2,
    check_liquidation_pi2,
    initial_state,
    redistribute,
    run_trace,
    step,
)
from .settle import (
    Settlement,
    chunk_principal,
    classify_liquidation,
    rho_b,
    rho_b_price,
    rho_l,
    rho_l_price,
    settle_pi1,
    settle_pi2,
    settle_pi3,
    settlement_from_state,
)

__all__ = [name for name in dir() if not name.startswith("_")]
