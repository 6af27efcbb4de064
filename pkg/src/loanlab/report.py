"""Scenario files, named verification checks, and report rendering.

Scenario files are JSON with every rational written as ``"num/den"`` strings;
decimal literals are rejected outright.  Reports are deterministic: the same
scenario always renders byte-identical text, CSV, and JSON.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .core import (
    FiatAmount,
    InvalidParameter,
    LoanParams,
    Price,
    PricePath,
    rat,
    rat_str,
)
from .game import (
    build_gamma1,
    build_gamma2,
    build_gamma3,
    honest_profile,
    is_spe,
    open_protocol_profile,
    path_event_class,
    solve_spe,
)
from .protocols import (
    ArbiterVerdict,
    BorrowerOpen,
    CreateContract,
    LenderDeposit,
    LenderOpen,
    LiquidateByLender,
    OracleQuery,
    Outcome,
    Party,
    Phase,
    PrincipalRelease,
    Protocol,
    Repay,
    Settlement,
    TimeAdvance,
    Trace,
    check_liquidation_pi2,
    initial_state,
    parse_trace,
    rho_b,
    rho_b_price,
    rho_l,
    rho_l_price,
    settle_pi1,
    settle_pi2,
    settle_pi3,
    step,
)
from . import utxo as utxo_mod

Rows = list[tuple[str, str]]
Sections = list[tuple[str, Rows]]

KNOWN_CHECKS = (
    "theorem1",
    "theorem2",
    "theorem3",
    "corollary1",
    "observations",
    "utxo_equivalence",
)

_CHECK_PROTOCOLS = {
    "theorem1": {Protocol.P1},
    "theorem2": {Protocol.P2},
    "theorem3": {Protocol.P3},
    "corollary1": {Protocol.P1, Protocol.P2, Protocol.P3},
    "observations": {Protocol.P2},
    "utxo_equivalence": {Protocol.P1},
}


# ---------------------------------------------------------------------------
# Scenario files
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    name: str
    protocol: Protocol
    params: LoanParams
    price_path: Optional[PricePath] = None
    rounds: Optional[int] = None
    grid: Optional[tuple[Fraction, ...]] = None
    trace_text: Optional[str] = None
    checks: tuple[str, ...] = ()


def _reject_float(text: str) -> Fraction:
    raise InvalidParameter(f"decimal literal {text!r} rejected; write rationals as 'num/den'")


def load_scenario_text(text: str, name: str = "scenario") -> Scenario:
    try:
        data = json.loads(text, parse_float=_reject_float)
    except json.JSONDecodeError as exc:
        raise InvalidParameter(f"scenario parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return scenario_from_dict(data, name)


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    name = path.rsplit("/", 1)[-1]
    if name.endswith(".json"):
        name = name[: -len(".json")]
    return load_scenario_text(text, name)


def scenario_from_dict(data: dict, name: str = "scenario") -> Scenario:
    if not isinstance(data, dict):
        raise InvalidParameter("scenario must be a JSON object")
    try:
        protocol = Protocol(data["protocol"])
    except (KeyError, ValueError) as exc:
        raise InvalidParameter("scenario needs protocol one of P1/P2/P3") from exc
    raw = data.get("params")
    if not isinstance(raw, dict) or "p0" not in raw or "epsilon" not in raw:
        raise InvalidParameter("scenario params need at least p0 and epsilon")
    params = LoanParams(
        p0=Price(rat(raw["p0"])),
        epsilon=rat(raw["epsilon"]),
        principal=FiatAmount(rat(raw.get("principal", 1))),
        epsilon_prime=rat(raw["epsilon_prime"]) if raw.get("epsilon_prime") is not None else None,
        delta=rat(raw.get("delta", 5)),
        tau=Price(rat(raw["tau"])) if raw.get("tau") is not None else None,
        q=int(raw.get("q", 1)),
        k=int(raw.get("k", 1)),
    )
    path = None
    if data.get("price_path") is not None:
        path = PricePath.from_pairs(data["price_path"])
    grid = None
    if data.get("grid") is not None:
        grid = tuple(rat(x) for x in data["grid"])
    trace_text = None
    if data.get("trace") is not None:
        trace = data["trace"]
        trace_text = "\n".join(trace) if isinstance(trace, list) else str(trace)
    checks = tuple(data.get("checks", ()))
    for check in checks:
        if check not in KNOWN_CHECKS:
            raise InvalidParameter(f"unknown check {check!r}; known: {', '.join(KNOWN_CHECKS)}")
        if protocol not in _CHECK_PROTOCOLS[check]:
            raise InvalidParameter(f"check {check!r} is incompatible with protocol {protocol.value}")
    rounds = int(data["rounds"]) if data.get("rounds") is not None else None
    if protocol is Protocol.P2 and path is None:
        raise InvalidParameter("oracle-protocol scenarios need a price_path")
    if protocol is Protocol.P3 and (path is None or rounds is None):
        raise InvalidParameter("open-protocol scenarios need a price_path and rounds")
    return Scenario(
        name=data.get("name", name),
        protocol=protocol,
        params=params,
        price_path=path,
        rounds=rounds,
        grid=grid,
        trace_text=trace_text,
        checks=checks,
    )


# ---------------------------------------------------------------------------
# Canonical honest traces
# ---------------------------------------------------------------------------


def honest_trace(scenario: Scenario) -> Trace:
    """The protocol-following event trace for the scenario's path class."""
    params = scenario.params
    anchors = params.timeline
    prefix = (
        LenderDeposit(anchors.t1 - 1, params.principal),
        CreateContract(anchors.t1, True),
        ArbiterVerdict((anchors.t1 + anchors.t_star) / 2),
        PrincipalRelease(anchors.t_star),
    )
    windows = anchors.windows()
    if scenario.protocol is Protocol.P1:
        return prefix + (
            TimeAdvance(windows.maturity),
            Repay(windows.maturity, params.principal),
            LenderOpen(windows.t2),
        )
    if scenario.protocol is Protocol.P2:
        assert scenario.price_path is not None
        fast = None
        for time, price in scenario.price_path.samples:
            if check_liquidation_pi2(price, params):
                return prefix  # the schedule liquidates on its own
            if params.tau is not None and price.per_btc >= params.tau.per_btc:
                fast = time
                break
        windows = anchors.windows(fast_maturity=fast)
        tail: tuple = () if fast is not None else (TimeAdvance(windows.maturity),)
        return prefix + tail + (
            Repay(windows.maturity, params.principal),
            LenderOpen(windows.t2),
        )
    assert scenario.price_path is not None
    lender_threshold = rho_l(params).per_btc
    marks: list = []
    for time, price in scenario.price_path.samples:
        if price.per_btc <= lender_threshold:
            return prefix + tuple(marks) + (LiquidateByLender(time, price),)
        marks.append(OracleQuery(time, price))
    p_t = scenario.price_path.terminal_price
    closing = (
        LenderOpen(windows.t2)
        if p_t.per_btc < rho_b(params).per_btc
        else BorrowerOpen(windows.t3)
    )
    return prefix + tuple(marks) + (
        TimeAdvance(windows.maturity),
        Repay(windows.maturity, params.principal),
        closing,
    )


def run_settlement(scenario: Scenario) -> Settlement:
    if scenario.trace_text is not None:
        trace = parse_trace(scenario.trace_text)
    else:
        trace = honest_trace(scenario)
    if scenario.protocol is Protocol.P1:
        return settle_pi1(trace, scenario.params)
    if scenario.protocol is Protocol.P2:
        assert scenario.price_path is not None
        return settle_pi2(trace, scenario.price_path, scenario.params)
    return settle_pi3(trace, scenario.params)


# ---------------------------------------------------------------------------
# Named checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    lines: tuple[str, ...]

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"


def scenario_tree(scenario: Scenario):
    grid = scenario.grid if scenario.grid is not None else (Fraction(0), Fraction(1))
    if scenario.protocol is Protocol.P1:
        return build_gamma1(scenario.params, grid)
    if scenario.protocol is Protocol.P2:
        assert scenario.price_path is not None
        return build_gamma2(scenario.params, scenario.price_path, grid)
    assert scenario.price_path is not None and scenario.rounds is not None
    return build_gamma3(scenario.params, scenario.price_path, scenario.rounds, grid)


def scenario_profile(scenario: Scenario, tree) -> dict:
    if scenario.protocol is Protocol.P3:
        assert scenario.price_path is not None
        return open_protocol_profile(tree, scenario.params, scenario.price_path)
    return honest_profile(tree)


def _check_theorem1(scenario: Scenario, seed: Optional[int]) -> CheckResult:
    tree = scenario_tree(scenario)
    sigma = honest_profile(tree)
    verdict = is_spe(tree, sigma)
    solutions = solve_spe(tree)
    in_set = any(prof == sigma for _, _, prof in solutions)
    root_ok = any(
        (ul, ub) == (Fraction(0), Fraction(0)) and prof == sigma for ul, ub, prof in solutions
    )
    lines = [
        f"honest profile subgame perfect: {verdict.is_spe}",
        f"honest profile among the {len(solutions)} pure equilibria: {in_set}",
        "root value under honest play: (0, 0)" if root_ok else "root value under honest play: unexpected",
    ]
    lines += [f"witness: {w.describe()}" for w in verdict.witnesses]
    return CheckResult("theorem1", verdict.is_spe and in_set and root_ok, tuple(lines))


def _check_theorem2(scenario: Scenario, seed: Optional[int]) -> CheckResult:
    params = scenario.params
    path = scenario.price_path
    assert path is not None
    tree = scenario_tree(scenario)
    sigma = honest_profile(tree)
    verdict = is_spe(tree, sigma)
    lines = [
        f"delta hypothesis (delta > 1): {'satisfied' if params.delta > 1 else 'VIOLATED'}",
        f"honest profile subgame perfect: {verdict.is_spe}",
    ]
    ok = verdict.is_spe
    liquidated_at = None
    for _, price in path.samples:
        if check_liquidation_pi2(price, params):
            liquidated_at = price
            break
    scale = params.principal.m
    if liquidated_at is not None:
        expected = (params.y.coins * liquidated_at.per_btc - scale,
                    scale - params.y.coins * liquidated_at.per_btc)
        leaf_vals = [
            leaf.utilities for leaf in tree.leaves() if leaf.outcome is Outcome.LENDER_LIQUIDATION
        ]
        leaf_ok = leaf_vals == [expected]
        ok = ok and leaf_ok
        lines.append(
            f"liquidation leaf (y*p_i-1, 1-y*p_i) = "
            f"({rat_str(expected[0])}, {rat_str(expected[1])}): {leaf_ok}"
        )
    else:
        p_t = path.terminal_price
        if p_t.per_btc < params.p0.per_btc and params.tau is not None and all(
            p.per_btc < params.tau.per_btc for _, p in path.samples
        ) or (params.tau is None and p_t.per_btc < params.p0.per_btc):
            expected_root = (Fraction(0), params.y.coins * p_t.per_btc - 2 * scale)
            solutions = solve_spe(tree)
            root_ok = all((ul, ub) == expected_root for ul, ub, _ in solutions)
            ok = ok and root_ok
            lines.append(
                f"root value (0, y*p_t - 2) = (0, {rat_str(expected_root[1])}): {root_ok}"
            )
    lines += [f"witness: {w.describe()}" for w in verdict.witnesses]
    return CheckResult("theorem2", ok, tuple(lines))


def _check_theorem3(scenario: Scenario, seed: Optional[int]) -> CheckResult:
    params = scenario.params
    path = scenario.price_path
    assert path is not None
    lender_threshold = rho_l_price(params.p0, params.epsilon)
    delta_bound = params.y.coins * lender_threshold.per_btc - 2 * params.principal.m
    eps_bound = Fraction(1, 2) / params.p0.per_btc
    lines = [
        f"path class: {path_event_class(params, path)}",
        f"epsilon hypothesis (epsilon < 1/(2 p0) = {rat_str(eps_bound)}): "
        f"{'satisfied' if params.epsilon < eps_bound else 'VIOLATED'}",
        f"delta hypothesis (delta > {rat_str(delta_bound)}): "
        f"{'satisfied' if params.delta > delta_bound else 'VIOLATED'}",
    ]
    tree = scenario_tree(scenario)
    sigma = open_protocol_profile(tree, params, path)
    verdict = is_spe(tree, sigma)
    lines.append(f"stable profile subgame perfect: {verdict.is_spe}")
    lines += [f"witness: {w.describe()}" for w in verdict.witnesses]
    return CheckResult("theorem3", verdict.is_spe, tuple(lines))


def _check_corollary1(scenario: Scenario, seed: Optional[int]) -> CheckResult:
    params = scenario.params
    p0, eps = params.p0, params.epsilon
    scale = params.principal.m
    y = params.y.coins
    if eps * p0.per_btc >= 1:
        return CheckResult("corollary1", False, ("thresholds undefined: epsilon * p0 >= 1",))
    lo = rho_l_price(p0, eps).per_btc
    hi = rho_b_price(p0, eps).per_btc
    borrower_fix = scale + (y / 2 - eps * scale) * hi == 2 * scale
    lender_fix = (y / 2 + eps * scale) * lo == scale
    boundary = scale + (y / 2 - eps * scale) * lo == y * lo
    pointwise = True
    witness = None
    for j in range(1, 201):
        p = lo + (hi - lo) * Fraction(j, 201)
        if not scale + (y / 2 - eps * scale) * p < y * p:
            pointwise = False
            witness = p
            break
    lines = [
        f"borrower threshold rho_B = {rat_str(hi)} (termination payoff exactly 2P): {borrower_fix}",
        f"lender threshold rho_L = {rat_str(lo)} (liquidation payoff exactly P): {lender_fix}",
        f"boundary identity 1 + (y/2 - eps) rho_L = y rho_L: {boundary}",
        "pointwise bound on (rho_L, rho_B): 1 + (y/2 - eps) p < y p: " + str(pointwise),
    ]
    if witness is not None:
        lines.append(f"pointwise bound fails at p = {rat_str(witness)}")
    ok = borrower_fix and lender_fix and boundary and pointwise
    return CheckResult("corollary1", ok, tuple(lines))


def _check_observations(scenario: Scenario, seed: Optional[int]) -> CheckResult:
    params = scenario.params
    path = scenario.price_path
    assert path is not None
    scale = params.principal.m
    lines = []
    ok = True

    anchor = params.y.coins * (params.p0.per_btc / 2) == scale
    ok &= anchor
    lines.append(f"liquidation anchor y * (p0/2) equals the principal: {anchor}")

    cap_ok, conserved, terminal_value = _walk_path(params, path)
    ok &= cap_ok and conserved
    lines.append(f"contract value capped at 2P after every query: {cap_ok}")
    lines.append(f"fiat and BTC conserved along the trace: {conserved}")

    if terminal_value is not None and scale < terminal_value < 2 * scale:
        alpha = (params.y.coins / 2) * path.terminal_price.per_btc - scale
        bound = alpha > -scale / 2
        ok &= bound
        lines.append(f"alpha = {rat_str(alpha)} > -P/2: {bound}")

    if seed is not None:
        sweeps = _random_path_sweep(params, seed, runs=100)
        ok &= sweeps
        lines.append(f"randomized 100-path cap/conservation sweep (seed {seed}): {sweeps}")
    return CheckResult("observations", ok, tuple(lines))


def _walk_path(params: LoanParams, path: PricePath) -> tuple[bool, bool, Optional[Fraction]]:
    anchors = params.timeline
    state = initial_state(Protocol.P2, params)
    prefix = (
        LenderDeposit(anchors.t1 - 1, params.principal),
        CreateContract(anchors.t1, True),
        ArbiterVerdict((anchors.t1 + anchors.t_star) / 2),
        PrincipalRelease(anchors.t_star),
    )
    cap_ok = True
    conserved = True
    for event in prefix:
        state = step(state, event, params)
        conserved &= state.conservation_ok()
    terminal_value: Optional[Fraction] = None
    for time, price in path.samples:
        if state.phase is not Phase.ACTIVE:
            break  # liquidated or fast-tracked; the remaining schedule is moot
        state = step(state, OracleQuery(time, price), params)
        conserved &= state.conservation_ok()
        if not state.terminal:
            value = state.contract_btc * price.per_btc
            cap_ok &= value <= 2 * params.principal.m
            terminal_value = value
    return cap_ok, conserved, terminal_value


def _random_path_sweep(params: LoanParams, seed: int, runs: int) -> bool:
    rng = random.Random(seed)
    anchors = params.timeline
    for _ in range(runs):
        q = rng.randint(1, 12)
        times = sorted(rng.sample(range(1, 12), k=min(q - 1, 11)))
        sample_times = [Fraction(t) for t in times][: q - 1] + [anchors.maturity]
        prices = [
            Price(params.p0.per_btc * Fraction(rng.randint(1, 32), 16)) for _ in sample_times
        ]
        try:
            path = PricePath(tuple(zip(sample_times, prices)))
        except InvalidParameter:
            continue
        trial = LoanParams(
            p0=params.p0,
            epsilon=params.epsilon,
            principal=params.principal,
            delta=params.delta,
            tau=params.tau,
            q=len(path),
            k=params.k,
        )
        cap_ok, conserved, _ = _walk_path(trial, path)
        if not (cap_ok and conserved):
            return False
    return True


def _check_utxo_equivalence(scenario: Scenario, seed: Optional[int]) -> CheckResult:
    params = scenario.params
    grid = scenario.grid if scenario.grid is not None else (Fraction(0), Fraction(1))
    tree = build_gamma1(params, grid)
    checked = 0
    failures: list[str] = []
    for leaf in tree.leaves():
        if leaf.outcome is Outcome.NO_DEAL or leaf.trace is None:
            continue
        settlement = settle_pi1(leaf.trace, params)
        realized = _realize_on_chain(params, settlement)
        expected = _expected_btc_distribution(params, settlement)
        checked += 1
        if realized != expected:
            failures.append(f"mismatch at leaf {leaf.label!r}: {realized} != {expected}")
    lines = [f"leaves realized on-chain with matching BTC distribution: {checked}"]
    lines += failures
    return CheckResult("utxo_equivalence", not failures, tuple(lines))


def _expected_btc_distribution(params: LoanParams, settlement: Settlement) -> dict[Party, Fraction]:
    state_coins = {}
    for party in Party:
        delta = settlement.btc_deltas[party]
        state_coins[party] = delta + (params.y.coins if party is Party.BORROWER else Fraction(0))
    return state_coins


def _realize_on_chain(params: LoanParams, settlement: Settlement) -> dict[Party, Fraction]:
    collateral = utxo_mod.build_pi1_collateral_tx(params)
    utxo_set: dict = {("funding", 0): utxo_mod.funding_output(params)}
    utxo_set = utxo_mod.apply_tx(
        utxo_set, collateral.tx, [utxo_mod.Witness.of(Party.BORROWER)]
    )
    windows = params.timeline.windows()
    if settlement.opened_by is Party.LENDER:
        utxo_set = utxo_mod.settlement_spends(params, collateral, utxo_set, Party.LENDER, windows.t2)
    elif settlement.opened_by is Party.BORROWER:
        utxo_set = utxo_mod.settlement_spends(params, collateral, utxo_set, Party.BORROWER, windows.t3)
        target = Party.BORROWER if settlement.repaid == params.principal.m else Party.LENDER
        utxo_set = utxo_mod.arbiter_forward(params, utxo_set, target, windows.t3)
    else:
        utxo_set = utxo_mod.settlement_spends(params, collateral, utxo_set, None, windows.forfeit)
    return utxo_mod.btc_distribution(utxo_set)


_CHECKS: dict[str, Callable[[Scenario, Optional[int]], CheckResult]] = {
    "theorem1": _check_theorem1,
    "theorem2": _check_theorem2,
    "theorem3": _check_theorem3,
    "corollary1": _check_corollary1,
    "observations": _check_observations,
    "utxo_equivalence": _check_utxo_equivalence,
}


def run_checks(
    scenario: Scenario, names: Optional[Sequence[str]] = None, seed: Optional[int] = None
) -> list[CheckResult]:
    selected = tuple(names) if names else scenario.checks
    if not selected:
        raise InvalidParameter("no checks requested and the scenario lists none")
    results = []
    for name in selected:
        if name not in _CHECKS:
            raise InvalidParameter(f"unknown check {name!r}; known: {', '.join(KNOWN_CHECKS)}")
        if scenario.protocol not in _CHECK_PROTOCOLS[name]:
            raise InvalidParameter(f"check {name!r} is incompatible with protocol {scenario.protocol.value}")
        results.append(_CHECKS[name](scenario, seed))
    return results


# ---------------------------------------------------------------------------
# Report sections and rendering
# ---------------------------------------------------------------------------


def settlement_sections(scenario: Scenario, settlement: Settlement) -> Sections:
    params = scenario.params
    rows: Rows = [
        ("protocol", scenario.protocol.value),
        ("outcome", settlement.outcome.value),
        ("repaid", rat_str(settlement.repaid)),
        ("terminal_price", rat_str(settlement.terminal_price.per_btc)),
    ]
    if settlement.opened_by is not None:
        rows.append(("opened_by", settlement.opened_by.value))
    if settlement.reasonable is not None:
        rows.append(("reasonable", str(settlement.reasonable).lower()))
    if settlement.event_price is not None:
        rows.append(("event_price", rat_str(settlement.event_price.per_btc)))
    table: Rows = []
    for party in Party:
        table.append((f"{party.value}.utility", rat_str(settlement.utilities[party])))
        table.append((f"{party.value}.payout", rat_str(settlement.payouts[party])))
        table.append((f"{party.value}.fiat_delta", rat_str(settlement.fiat_deltas[party])))
        table.append((f"{party.value}.btc_delta", rat_str(settlement.btc_deltas[party])))
    return [("settlement", rows), ("positions", table)]


def thresholds_sections(
    p0: Price, epsilon: Fraction, tau: Optional[Price] = None, principal: Fraction = Fraction(1)
) -> Sections:
    if epsilon * p0.per_btc >= 1:
        raise InvalidParameter("thresholds undefined: epsilon * p0 >= 1")
    y = 2 * principal / p0.per_btc
    lo = rho_l_price(p0, epsilon)
    hi = rho_b_price(p0, epsilon)
    rows: Rows = [
        ("p0", rat_str(p0.per_btc)),
        ("epsilon", rat_str(epsilon)),
        ("oracle_liquidation_price", rat_str(p0.per_btc / 2)),
        ("rho_L", rat_str(lo.per_btc)),
        ("rho_B", rat_str(hi.per_btc)),
        ("delta_bound", rat_str(y * lo.per_btc - 2 * principal)),
        ("epsilon_bound", rat_str(Fraction(1, 2) / p0.per_btc)),
    ]
    if tau is not None:
        rows.insert(3, ("tau", rat_str(tau.per_btc)))
    return [("thresholds", rows)]


def checks_sections(results: Sequence[CheckResult]) -> Sections:
    sections: Sections = []
    for result in results:
        rows: Rows = [("status", result.status)]
        rows += [(f"note{i + 1}", line) for i, line in enumerate(result.lines)]
        sections.append((f"check.{result.name}", rows))
    return sections


def render_text(sections: Sections) -> str:
    out: list[str] = []
    for name, rows in sections:
        out.append(f"== {name} ==")
        width = max((len(k) for k, _ in rows), default=0)
        for key, value in rows:
            out.append(f"{key.ljust(width)}  {value}")
        out.append("")
    return "\n".join(out)


def render_csv(sections: Sections) -> str:
    lines = ["section,key,value"]
    for name, rows in sections:
        for key, value in rows:
            cell = value.replace('"', '""')
            if "," in cell or '"' in value:
                cell = f'"{cell}"'
            lines.append(f"{name},{key},{cell}")
    return "\n".join(lines) + "\n"


def render_json(sections: Sections) -> str:
    data = {name: dict(rows) for name, rows in sections}
    return json.dumps(data, indent=2, sort_keys=False) + "\n"


def render(sections: Sections, fmt: str) -> str:
    if fmt == "text":
        return render_text(sections)
    if fmt == "csv":
        return render_csv(sections)
    if fmt == "json":
        return render_json(sections)
    raise InvalidParameter(f"unknown format {fmt!r}")
