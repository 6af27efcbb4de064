"""Matplotlib figure rendering for simulation reports.

Figures are written as SVG with stripped date metadata and a fixed hash salt
so repeated runs produce byte-identical files.
"""

from __future__ import annotations

import os
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .core import LoanParams, PricePath, rat_str  # noqa: E402
from .protocols import Party, Protocol, Settlement, rho_b_price, rho_l_price  # noqa: E402

plt.rcParams["svg.hashsalt"] = "loanlab"

_SAVE_KW = {"format": "svg", "metadata": {"Date": None}, "bbox_inches": "tight"}


def render_price_path(
    name: str,
    protocol: Protocol,
    params: LoanParams,
    path: PricePath,
    out_dir: str,
) -> str:
    """Price path as a step plot with the protocol's thresholds drawn as
    horizontal guide lines."""
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    times = [float(t) for t in path.times]
    prices = [float(p.per_btc) for p in path.prices]
    ax.step([0.0] + times, [float(params.p0.per_btc)] + prices, where="post", lw=1.8, color="#1f77b4")
    ax.plot(times, prices, "o", ms=4, color="#1f77b4")
    ax.axhline(float(params.p0.per_btc), color="gray", lw=0.8, ls=":", label=f"p0 = {params.p0}")

    if protocol is Protocol.P2:
        trigger = params.p0.per_btc / 2
        ax.axhline(float(trigger), color="#d62728", lw=1.0, ls="--", label=f"liquidation = {rat_str(trigger)}")
        if params.tau is not None:
            ax.axhline(float(params.tau.per_btc), color="#2ca02c", lw=1.0, ls="--", label=f"tau = {params.tau}")
    if protocol is Protocol.P3 and params.epsilon * params.p0.per_btc < 1:
        lo = rho_l_price(params.p0, params.epsilon).per_btc
        hi = rho_b_price(params.p0, params.epsilon).per_btc
        ax.axhline(float(lo), color="#d62728", lw=1.0, ls="--", label=f"rho_L = {rat_str(lo)}")
        ax.axhline(float(hi), color="#2ca02c", lw=1.0, ls="--", label=f"rho_B = {rat_str(hi)}")

    ax.set_xlabel("months since loan start")
    ax.set_ylabel("price (fiat-M per BTC)")
    ax.set_title(f"{name}: observed prices")
    ax.legend(loc="best", fontsize=8)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    target = os.path.join(out_dir, f"{name}_prices.svg")
    fig.savefig(target, **_SAVE_KW)
    plt.close(fig)
    return target


def render_settlement(name: str, settlement: Settlement, out_dir: str) -> str:
    """Per-party settlement bars: net utility next to settlement receipts."""
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    parties = list(Party)
    labels = [p.value for p in parties]
    utilities = [float(settlement.utilities[p]) for p in parties]
    payouts = [float(settlement.payouts[p]) for p in parties]
    xs = range(len(parties))
    ax.bar([x - 0.2 for x in xs], utilities, width=0.4, label="net utility", color="#1f77b4")
    ax.bar([x + 0.2 for x in xs], payouts, width=0.4, label="settlement receipts", color="#ff7f0e")
    ax.axhline(0.0, color="black", lw=0.8)
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels)
    ax.set_ylabel("fiat-M")
    ax.set_title(f"{name}: {settlement.outcome.value}")
    ax.legend(loc="best", fontsize=8)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    target = os.path.join(out_dir, f"{name}_settlement.svg")
    fig.savefig(target, **_SAVE_KW)
    plt.close(fig)
    return target


def render_all(
    name: str,
    protocol: Protocol,
    params: LoanParams,
    path: Optional[PricePath],
    settlement: Settlement,
    out_dir: str,
) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if path is not None:
        written.append(render_price_path(name, protocol, params, path, out_dir))
    written.append(render_settlement(name, settlement, out_dir))
    return written
