"""UTXO transaction model: spending-condition ASTs, the flat-rate collateral
transaction, and the chunked collateral used for oracle-driven redistribution.

Signatures are opaque (party, context) tokens; the analysis here is
incentive-level, so real cryptography would add nothing testable while making
spend-path enumeration awkward.  Fees are zero: a transaction's input and
output values must match exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence, Union

from .core import BtcAmount, FiatAmount, InvalidParameter, LoanLabError, LoanParams, Price
from .protocols import Party


class UtxoError(LoanLabError):
    pass


class MissingInput(UtxoError):
    pass


class UnsatisfiedCondition(UtxoError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"witness does not satisfy the condition of input {index}")


class ValueMismatch(UtxoError):
    pass


# ---------------------------------------------------------------------------
# Conditions and witnesses
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RequireSig:
    party: Party
    context: str = ""


@dataclass(frozen=True)
class After:
    time: Fraction

    def __post_init__(self) -> None:
        if self.time < 0:
            raise InvalidParameter("timelocks use non-negative absolute months")


@dataclass(frozen=True)
class All:
    parts: tuple["Condition", ...]


@dataclass(frozen=True)
class Any_:
    parts: tuple["Condition", ...]


Condition = Union[RequireSig, After, All, Any_]


@dataclass(frozen=True)
class Witness:
    """Simulated signatures plus the current time."""

    signatures: frozenset[tuple[Party, str]] = frozenset()
    time: Fraction = Fraction(0)

    @classmethod
    def of(cls, *parties: Party, time: Fraction = Fraction(0), context: str = "") -> "Witness":
        return cls(frozenset((p, context) for p in parties), time)


def eval_condition(condition: Condition, witness: Witness) -> bool:
    """Total, deterministic condition evaluation."""
    if isinstance(condition, RequireSig):
        return (condition.party, condition.context) in witness.signatures
    if isinstance(condition, After):
        return witness.time >= condition.time
    if isinstance(condition, All):
        return all(eval_condition(part, witness) for part in condition.parts)
    if isinstance(condition, Any_):
        return any(eval_condition(part, witness) for part in condition.parts)
    raise InvalidParameter(f"unknown condition node {condition!r}")


# ---------------------------------------------------------------------------
# Outputs and transactions
# ---------------------------------------------------------------------------

OutputRef = tuple[str, int]


@dataclass(frozen=True)
class Output:
    value: BtcAmount
    condition: Condition

    def __post_init__(self) -> None:
        if self.value.coins <= 0:
            raise InvalidParameter("outputs carry positive value")


@dataclass(frozen=True)
class Transaction:
    ident: str
    inputs: tuple[OutputRef, ...]
    outputs: tuple[Output, ...]

    def output_refs(self) -> tuple[OutputRef, ...]:
        return tuple((self.ident, i) for i in range(len(self.outputs)))


UtxoSet = dict[OutputRef, Output]


def apply_tx(
    utxo_set: Mapping[OutputRef, Output], tx: Transaction, witnesses: Sequence[Witness]
) -> UtxoSet:
    """Spend ``tx.inputs`` and add ``tx.outputs``; enforces presence, one
    witness per input satisfying its condition, and exact value conservation."""
    if len(witnesses) != len(tx.inputs):
        raise UtxoError("one witness per input required")
    new = dict(utxo_set)
    in_total = Fraction(0)
    for index, (ref, witness) in enumerate(zip(tx.inputs, witnesses)):
        spent = new.pop(ref, None)
        if spent is None:
            raise MissingInput(f"input {ref} absent or already spent")
        if not eval_condition(spent.condition, witness):
            raise UnsatisfiedCondition(index)
        in_total += spent.value.coins
    out_total = sum((o.value.coins for o in tx.outputs), Fraction(0))
    if in_total != out_total:
        raise ValueMismatch(f"inputs {in_total} != outputs {out_total}")
    for ref, output in zip(tx.output_refs(), tx.outputs):
        new[ref] = output
    return new


def owner_of(output: Output) -> Optional[Party]:
    """The sole signer of a plain ownership condition, if any."""
    cond = output.condition
    if isinstance(cond, RequireSig):
        return cond.party
    if isinstance(cond, All) and len(cond.parts) == 1:
        return owner_of(Output(output.value, cond.parts[0]))
    return None


def pay(party: Party, value: BtcAmount) -> Output:
    return Output(value, RequireSig(party))


# ---------------------------------------------------------------------------
# Flat-rate collateral transaction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Pi1Collateral:
    """The three-output collateral lock.

    Each output can be spent through three branches: the lender's signed
    opening (everything is released to the borrower), the borrower's signed
    opening (first output to the borrower, second to the lender, the penalty
    output to the arbiter), or the timelock at one month past maturity
    (everything to the lender).  ``recipients[i][b]`` resolves branch ``b``
    of output ``i``."""

    tx: Transaction
    branches: tuple[Condition, Condition, Condition]
    recipients: tuple[tuple[Party, Party, Party], ...]

    @property
    def outputs(self) -> tuple[Output, ...]:
        return self.tx.outputs

    def claimant(self, index: int, witness: Witness) -> Optional[Party]:
        """Recipient under the first satisfied branch, or None while locked."""
        for branch, recipient in zip(self.branches, self.recipients[index]):
            if eval_condition(branch, witness):
                return recipient
        return None


def funding_output(params: LoanParams) -> Output:
    """The borrower's pre-lock collateral output (y coins)."""
    return Output(params.y, RequireSig(Party.BORROWER))


def build_pi1_collateral_tx(params: LoanParams, funding_ref: OutputRef = ("funding", 0)) -> Pi1Collateral:
    """Collateral lock for the flat-rate protocol: outputs worth
    (1-eps)P, (1-eps)P and 2*eps*P in fiat, spendable by the lender's opening,
    the borrower's opening, or the timelock at t*+13."""
    scale = params.principal.m
    p0 = params.p0
    values = [
        FiatAmount((1 - params.epsilon) * scale).btc_at(p0),
        FiatAmount((1 - params.epsilon) * scale).btc_at(p0),
        FiatAmount(2 * params.epsilon * scale).btc_at(p0),
    ]
    lender_open: Condition = All((RequireSig(Party.LENDER, "open"),))
    borrower_open: Condition = All((RequireSig(Party.BORROWER, "open"),))
    timeout: Condition = After(params.timeline.forfeit)
    branches = (lender_open, borrower_open, timeout)
    condition = Any_(branches)
    outputs = tuple(Output(v, condition) for v in values)
    tx = Transaction("collateral", (funding_ref,), outputs)
    recipients = (
        (Party.BORROWER, Party.BORROWER, Party.LENDER),
        (Party.BORROWER, Party.LENDER, Party.LENDER),
        (Party.BORROWER, Party.ARBITER, Party.LENDER),
    )
    return Pi1Collateral(tx=tx, branches=branches, recipients=recipients)


def spend_matrix(
    collateral: Pi1Collateral, witnesses: Sequence[tuple[str, Witness]]
) -> list[list[str]]:
    """Rows = outputs, columns = labeled witness scenarios, cells = claimant
    or ``locked``."""
    rows: list[list[str]] = []
    for index in range(len(collateral.outputs)):
        row = [f"output{index + 1}"]
        for _, witness in witnesses:
            party = collateral.claimant(index, witness)
            row.append(party.value if party else "locked")
        rows.append(row)
    return rows


def settlement_spends(
    params: LoanParams,
    collateral: Pi1Collateral,
    utxo_set: UtxoSet,
    opened_by: Optional[Party],
    time: Fraction,
) -> UtxoSet:
    """Realize one settlement on-chain.

    Lender opening: all outputs to the borrower.  Borrower opening: outputs
    routed per branch, then the arbiter forwards one penalty unit onward
    (handled by the caller since the direction depends on the repayment).
    No opening: the timelock sends everything to the lender."""
    refs = collateral.tx.output_refs()
    outs = collateral.outputs
    if opened_by is Party.LENDER:
        witness = Witness.of(Party.LENDER, time=time, context="open")
        tx = Transaction(
            "settle",
            refs,
            (pay(Party.BORROWER, BtcAmount(sum(o.value.coins for o in outs))),),
        )
        return apply_tx(utxo_set, tx, [witness] * 3)
    if opened_by is Party.BORROWER:
        witness = Witness.of(Party.BORROWER, time=time, context="open")
        tx = Transaction(
            "settle",
            refs,
            (
                pay(Party.BORROWER, outs[0].value),
                pay(Party.LENDER, outs[1].value),
                pay(Party.ARBITER, outs[2].value),
            ),
        )
        return apply_tx(utxo_set, tx, [witness] * 3)
    witness = Witness(frozenset(), time)
    tx = Transaction(
        "settle",
        refs,
        (pay(Party.LENDER, BtcAmount(sum(o.value.coins for o in outs))),),
    )
    return apply_tx(utxo_set, tx, [witness] * 3)


def arbiter_forward(
    params: LoanParams, utxo_set: UtxoSet, to_party: Party, time: Fraction
) -> UtxoSet:
    """After a borrower opening the arbiter splits its 2*eps*P output: one
    penalty unit to ``to_party``, one kept."""
    ref = ("settle", 2)
    output = utxo_set.get(ref)
    if output is None:
        raise MissingInput("arbiter output not found")
    half = BtcAmount(output.value.coins / 2)
    tx = Transaction("arbiter", (ref,), (pay(to_party, half), pay(Party.ARBITER, half)))
    return apply_tx(utxo_set, tx, [Witness.of(Party.ARBITER, time=time)])


def btc_distribution(utxo_set: UtxoSet) -> dict[Party, Fraction]:
    """Total coins held per party over simple ownership outputs."""
    totals = {party: Fraction(0) for party in Party}
    for output in utxo_set.values():
        owner = owner_of(output)
        if owner is not None:
            totals[owner] += output.value.coins
    return totals


# ---------------------------------------------------------------------------
# Chunked collateral
# ---------------------------------------------------------------------------

ATTESTED_REDISTRIBUTION: Condition = All((RequireSig(Party.ARBITER, "price-attestation"),))


def build_chunked_collateral(
    y: BtcAmount, k: int, condition: Optional[Condition] = None
) -> list[Output]:
    """Split collateral into k >= 2 chunks of y/k coins with one shared
    condition template (default: arbiter-attested redistribution)."""
    if k < 2:
        raise InvalidParameter("chunked collateral requires k >= 2")
    template = condition if condition is not None else ATTESTED_REDISTRIBUTION
    chunk = BtcAmount(y.coins / k)
    return [Output(chunk, template) for _ in range(k)]


def redistribute_chunks(
    main: Sequence[Output],
    temp: Sequence[Output],
    p_i: Price,
    cap: FiatAmount = FiatAmount(Fraction(2)),
) -> tuple[list[Output], list[Output]]:
    """Whole-chunk rebalancing: move chunks out of the main contract while its
    value exceeds the cap; refill from the temporary account while one more
    chunk keeps the value at or below the cap.  Chunk count is conserved."""
    chunks = list(main) + list(temp)
    if not chunks:
        return [], []
    chunk_value = chunks[0].value.coins
    if any(c.value.coins != chunk_value for c in chunks):
        raise InvalidParameter("chunks must be uniform")
    new_main = list(main)
    new_temp = list(temp)
    price = p_i.per_btc

    def main_value() -> Fraction:
        return sum((c.value.coins for c in new_main), Fraction(0)) * price

    while new_main and main_value() > cap.m:
        new_temp.append(new_main.pop())
    while new_temp and main_value() + chunk_value * price <= cap.m:
        new_main.append(new_temp.pop())
    return new_main, new_temp
