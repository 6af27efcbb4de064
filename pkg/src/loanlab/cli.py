"""Command-line front end.

Subcommands: ``simulate``, ``verify``, ``thresholds``, ``game export``, and
``tx matrix``.  All output is UTF-8 and free of ANSI color (NO_COLOR is
honored trivially).  Exit status is nonzero whenever a requested check fails
or an input is invalid.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from .core import InvalidParameter, LoanLabError, Price, rat
from .game import export_dot
from .protocols import Party
from .report import (
    checks_sections,
    load_scenario,
    render,
    run_checks,
    run_settlement,
    scenario_profile,
    scenario_tree,
    settlement_sections,
    thresholds_sections,
)
from . import utxo as utxo_mod


def _write_out(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)


def _cmd_simulate(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    settlement = run_settlement(scenario)
    sections = settlement_sections(scenario, settlement)
    if args.figures:
        from . import figures  # heavy import, only on demand

        written = figures.render_all(
            scenario.name,
            scenario.protocol,
            scenario.params,
            scenario.price_path,
            settlement,
            args.figures,
        )
        sections.append(("figures", [(f"file{i + 1}", path) for i, path in enumerate(written)]))
    _write_out(render(sections, args.format), args.out)
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    names = args.check.split(",") if args.check else None
    results = run_checks(scenario, names, seed=args.seed)
    _write_out(render(checks_sections(results), args.format), args.out)
    return 0 if all(r.passed for r in results) else 1


def _cmd_thresholds(args: argparse.Namespace) -> int:
    if args.scenario:
        scenario = load_scenario(args.scenario)
        sections = thresholds_sections(
            scenario.params.p0,
            scenario.params.epsilon,
            scenario.params.tau,
            scenario.params.principal.m,
        )
    else:
        if args.p0 is None or args.epsilon is None:
            raise InvalidParameter("thresholds needs --scenario or both --p0 and --epsilon")
        tau = Price(rat(args.tau)) if args.tau else None
        sections = thresholds_sections(Price(rat(args.p0)), rat(args.epsilon), tau)
    _write_out(render(sections, args.format), args.out)
    return 0


def _cmd_game_export(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    tree = scenario_tree(scenario)
    profile = scenario_profile(scenario, tree) if args.highlight else None
    text = export_dot(tree, profile)
    _write_out(text, args.dot)
    return 0


def _cmd_tx_matrix(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    params = scenario.params
    collateral = utxo_mod.build_pi1_collateral_tx(params)
    windows = params.timeline.windows()
    witnesses = []
    for label, time in (
        ("t_star", params.timeline.t_star),
        ("t2", windows.t2),
        ("t3", windows.t3),
        ("forfeit", windows.forfeit),
    ):
        witnesses.append((f"{label}+none", utxo_mod.Witness(frozenset(), time)))
        witnesses.append(
            (f"{label}+lender", utxo_mod.Witness.of(Party.LENDER, time=time, context="open"))
        )
        witnesses.append(
            (f"{label}+borrower", utxo_mod.Witness.of(Party.BORROWER, time=time, context="open"))
        )
    matrix = utxo_mod.spend_matrix(collateral, witnesses)
    header = ["output"] + [label for label, _ in witnesses]
    if args.format == "csv":
        lines = [",".join(header)]
        lines += [",".join(row) for row in matrix]
        _write_out("\n".join(lines) + "\n", args.out)
    else:
        widths = [max(len(header[i]), *(len(r[i]) for r in matrix)) for i in range(len(header))]
        lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
        lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in matrix]
        _write_out("\n".join(lines) + "\n", args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loanlab",
        description="Simulate collateralized-loan protocols and verify their equilibria.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, fmt_default: str = "text") -> None:
        p.add_argument("--format", choices=("text", "csv", "json"), default=fmt_default)
        p.add_argument("--out", default=None, help="write the report to a file")

    p_sim = sub.add_parser("simulate", help="run a scenario trace to settlement")
    p_sim.add_argument("--scenario", required=True)
    p_sim.add_argument("--figures", default=None, help="directory for rendered figures")
    common(p_sim)
    p_sim.set_defaults(func=_cmd_simulate)

    p_ver = sub.add_parser("verify", help="run named checks against a scenario")
    p_ver.add_argument("--scenario", required=True)
    p_ver.add_argument("--check", default=None, help="comma-separated check names")
    p_ver.add_argument("--seed", type=int, default=None, help="seed for optional randomized sweeps")
    common(p_ver)
    p_ver.set_defaults(func=_cmd_verify)

    p_thr = sub.add_parser("thresholds", help="print liquidation/termination thresholds")
    p_thr.add_argument("--scenario", default=None)
    p_thr.add_argument("--p0", default=None)
    p_thr.add_argument("--epsilon", default=None)
    p_thr.add_argument("--tau", default=None)
    common(p_thr)
    p_thr.set_defaults(func=_cmd_thresholds)

    p_game = sub.add_parser("game", help="game-tree utilities")
    game_sub = p_game.add_subparsers(dest="game_command", required=True)
    p_export = game_sub.add_parser("export", help="export the scenario's game tree as DOT")
    p_export.add_argument("--scenario", required=True)
    p_export.add_argument("--dot", default=None, help="output path (stdout when omitted)")
    p_export.add_argument("--highlight", action="store_true", help="mark the protocol-following profile")
    p_export.set_defaults(func=_cmd_game_export)

    p_tx = sub.add_parser("tx", help="transaction-level utilities")
    tx_sub = p_tx.add_subparsers(dest="tx_command", required=True)
    p_matrix = tx_sub.add_parser("matrix", help="spend matrix of the collateral transaction")
    p_matrix.add_argument("--scenario", required=True)
    p_matrix.add_argument("--format", choices=("text", "csv"), default="text")
    p_matrix.add_argument("--out", default=None)
    p_matrix.set_defaults(func=_cmd_tx_matrix)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LoanLabError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except FileNotFoundError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
