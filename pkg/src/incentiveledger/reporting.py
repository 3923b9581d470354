"""Reconciliation and report generation for finished runs.

Reconciliation re-derives balances and cost ledgers from the transaction
log alone, with none of the contract code involved, and refuses to write
reports when the two disagree. Every builder here is a pure function of
the run result, and every output is byte-deterministic: LF line endings,
no timestamps, fixed column orders, USD at two decimals with wei columns
authoritative.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from pathlib import Path

from .agents import population_csv
from .chain import (
    ADD_DATA_REQUESTER,
    DEPLOYMENT,
    MINER_ADDRESS,
    PUBLISH_DATA,
    RENEW_TOKEN,
    SET_LICENSE,
    SET_MULTIS,
    SET_PRICE,
    SET_PROFIT_MARGIN,
    SET_REGISTRY_ADDRESS,
    UPDATE_DATA,
    Address,
    ChainState,
    GWEI,
)
from .engine import ActionKind, SimResult, break_even_period
from .errors import ReconciliationFailureError

# Owner calls whose fees feed the requester-compensation pool.
ACCRUING_FUNCTIONS = frozenset(
    {
        DEPLOYMENT,
        PUBLISH_DATA,
        UPDATE_DATA,
        SET_LICENSE,
        SET_MULTIS,
        SET_PRICE,
        SET_PROFIT_MARGIN,
        SET_REGISTRY_ADDRESS,
    }
)


def replay_balances(chain: ChainState) -> dict[Address, int]:
    """Recompute every balance from initial funding plus the receipt log.

    Also proves atomicity after the fact: no account may dip below zero at
    any point of the replay.
    """
    balances = dict(chain.funding)
    for r in chain.receipts:
        balances[r.caller] -= r.gas_fee_wei + r.value_wei
        balances[MINER_ADDRESS] += r.gas_fee_wei
        if r.recipient is not None:
            balances[r.recipient] += r.value_wei
        if balances[r.caller] < 0:
            raise ReconciliationFailureError(
                f"receipt {r.index} drives {r.caller} to {balances[r.caller]} wei"
            )
    return balances


def replay_cost_ledgers(result: SimResult) -> dict[Address, tuple[int, int, int]]:
    """Recompute (currentCost, providerCost, earnings) per contract from receipts.

    Owner calls are attributed through ownership, so this replay requires
    the run's one-dataset-per-provider shape; payments carry the contract
    address on the receipt itself.
    """
    owner_to_contract: dict[Address, Address] = {}
    margin: dict[Address, int] = {}
    for c in result.datasets:
        if c.owner in owner_to_contract:
            raise ReconciliationFailureError(f"{c.owner} owns more than one contract")
        owner_to_contract[c.owner] = c.contract_address
        margin[c.contract_address] = c.profit_margin_pct
    ledgers = {c.contract_address: [0, 0, 0] for c in result.datasets}
    for r in result.chain.receipts:
        if r.function in ACCRUING_FUNCTIONS and r.caller in owner_to_contract:
            addr = owner_to_contract[r.caller]
            ledgers[addr][0] += r.gas_fee_wei * margin[addr] // 100
            ledgers[addr][1] += r.gas_fee_wei
        elif r.function in (ADD_DATA_REQUESTER, RENEW_TOKEN) and r.recipient in ledgers:
            addr = r.recipient
            ledgers[addr][0] = max(0, ledgers[addr][0] - r.value_wei)
            ledgers[addr][2] += r.value_wei
    return {addr: tuple(v) for addr, v in ledgers.items()}


def reconcile(result: SimResult) -> None:
    """Cross-check the run against independent replays of its own log."""
    chain = result.chain
    if not chain.conservation_holds():
        raise ReconciliationFailureError(
            f"{chain.total_wei()} wei on accounts, {chain.minted_wei} minted"
        )
    replayed = replay_balances(chain)
    if replayed != chain.accounts:
        diff = [a.id for a in chain.accounts if replayed.get(a) != chain.accounts[a]]
        raise ReconciliationFailureError(f"replayed balances disagree for {diff[:5]}")
    replayed_ledgers = replay_cost_ledgers(result)
    final_cc = {r.dataset: r.current_cost_after_wei for r in result.records}
    for c in result.datasets:
        if c.destroyed:
            continue
        expected = replayed_ledgers[c.contract_address]
        actual = (c.current_cost_wei, c.provider_cost_wei, c.provider_earnings_wei)
        if expected != actual:
            raise ReconciliationFailureError(
                f"{c.contract_address} ledgers {actual}, replay says {expected}"
            )
        if final_cc.get(c.contract_address, expected[0]) != expected[0]:
            raise ReconciliationFailureError(
                f"{c.contract_address} last action records pool "
                f"{final_cc[c.contract_address]}, replay says {expected[0]}"
            )
    payments = sum(r.payment_wei for r in result.records)
    earnings = sum(c.provider_earnings_wei for c in result.datasets)
    if payments != earnings:
        raise ReconciliationFailureError(
            f"{payments} wei paid by requesters, {earnings} wei booked as earnings"
        )
    # Agents transact only through the four actions, so their combined
    # outflow must equal exactly what the action records say they spent.
    outflow = sum(
        chain.funding[p.address] - chain.balance(p.address) for p in result.population
    )
    recorded = sum(r.tx_gas_fee_wei + r.payment_wei for r in result.records)
    if outflow != recorded:
        raise ReconciliationFailureError(
            f"agents spent {outflow} wei, action records say {recorded}"
        )


@dataclass(frozen=True)
class RunSummary:
    seed: int
    scenario: int
    profit_margin_pct: int
    access_fraction_pct: int
    renew_fraction_pct: int
    actions: int
    periods: int
    publishes: int
    updates: int
    requests: int
    renewals: int
    freq_publish: float
    freq_update: float
    freq_request: float
    freq_renew: float
    datasets_published: int
    distinct_requesters: int
    active_tokens_at_end: int
    provider_cost_wei: int
    provider_cost_usd: float
    provider_earnings_wei: int
    provider_earnings_usd: float
    profit_wei: int
    current_cost_wei: int
    break_even_period: int | None
    total_gas_fee_wei: int
    total_payment_wei: int
    miner_take_wei: int
    top_requesters: tuple[tuple[str, float], ...]  # (address, total USD), best first


def _requester_totals(result: SimResult) -> dict[Address, tuple[int, int, int]]:
    """Per requester: (action count, gas fees, payments), request+renew only."""
    totals: dict[Address, list[int]] = {}
    for r in result.records:
        if r.kind not in (ActionKind.REQUEST, ActionKind.RENEW):
            continue
        row = totals.setdefault(r.actor, [0, 0, 0])
        row[0] += 1
        row[1] += r.tx_gas_fee_wei
        row[2] += r.payment_wei
    return {addr: tuple(v) for addr, v in totals.items()}


def _ranked_requesters(result: SimResult) -> list[tuple[Address, tuple[int, int, int]]]:
    totals = _requester_totals(result)
    return sorted(totals.items(), key=lambda kv: (-(kv[1][1] + kv[1][2]), kv[0].id))


def summarize(result: SimResult, k: int = 3) -> RunSummary:
    reconcile(result)
    price = result.chain.price
    counts = {kind: 0 for kind in ActionKind}
    for r in result.records:
        counts[r.kind] += 1
    periods = len(result.series)
    per_period = max(1, periods)  # an empty run still gets zero frequencies
    cost = sum(c.provider_cost_wei for c in result.datasets)
    earnings = sum(c.provider_earnings_wei for c in result.datasets)
    top = tuple(
        (addr.id, price.wei_to_usd(fees + paid))
        for addr, (_, fees, paid) in _ranked_requesters(result)[:k]
    )
    return RunSummary(
        seed=result.config.seed,
        scenario=result.config.scenario.value,
        profit_margin_pct=result.config.resolved_margin_pct,
        access_fraction_pct=result.config.access_fraction_pct,
        renew_fraction_pct=result.config.renew_fraction_pct,
        actions=len(result.records),
        periods=periods,
        publishes=counts[ActionKind.PUBLISH],
        updates=counts[ActionKind.UPDATE],
        requests=counts[ActionKind.REQUEST],
        renewals=counts[ActionKind.RENEW],
        freq_publish=counts[ActionKind.PUBLISH] / per_period,
        freq_update=counts[ActionKind.UPDATE] / per_period,
        freq_request=counts[ActionKind.REQUEST] / per_period,
        freq_renew=counts[ActionKind.RENEW] / per_period,
        datasets_published=len(result.datasets),
        distinct_requesters=len({r.actor for r in result.records if r.kind is ActionKind.REQUEST}),
        active_tokens_at_end=sum(1 for _ in result.token_store.live_tokens()),
        provider_cost_wei=cost,
        provider_cost_usd=price.wei_to_usd(cost),
        provider_earnings_wei=earnings,
        provider_earnings_usd=price.wei_to_usd(earnings),
        profit_wei=earnings - cost,
        current_cost_wei=sum(c.current_cost_wei for c in result.datasets),
        break_even_period=break_even_period(result),
        total_gas_fee_wei=sum(r.gas_fee_wei for r in result.chain.receipts),
        total_payment_wei=sum(r.payment_wei for r in result.records),
        miner_take_wei=result.chain.balance(MINER_ADDRESS),
        top_requesters=top,
    )


def actions_csv(result: SimResult) -> str:
    lines = ["index,period,kind,actor,dataset,gasFeeWei,paymentWei,usdTotal,currentCostAfterWei"]
    for r in result.records:
        lines.append(
            f"{r.index},{r.period},{r.kind.value},{r.actor.id},{r.dataset.id},"
            f"{r.tx_gas_fee_wei},{r.payment_wei},{r.usd_total:.2f},{r.current_cost_after_wei}"
        )
    return "\n".join(lines) + "\n"


def periods_csv(result: SimResult) -> str:
    price = result.chain.price
    lines = [
        "period,currentCostWei,currentCostUsd,providerCostWei,providerEarningsWei,"
        "profitWei,profitUsd,activeRequesters,actions"
    ]
    for s in result.series:
        lines.append(
            f"{s.period},{s.current_cost_wei},{price.wei_to_usd(s.current_cost_wei):.2f},"
            f"{s.provider_cost_wei},{s.provider_earnings_wei},"
            f"{s.profit_wei},{price.wei_to_usd(s.profit_wei):.2f},"
            f"{s.active_requesters},{s.actions_this_period}"
        )
    return "\n".join(lines) + "\n"


def contracts_csv(result: SimResult) -> str:
    lines = [
        "period,contract,currentCostWei,providerCostWei,providerEarningsWei,"
        "activeTokens,metaVersion"
    ]
    for s in result.contract_snapshots:
        lines.append(
            f"{s.period},{s.contract.id},{s.current_cost_wei},{s.provider_cost_wei},"
            f"{s.provider_earnings_wei},{s.active_tokens},{s.meta_version}"
        )
    return "\n".join(lines) + "\n"


def profit_series_csv(result: SimResult) -> str:
    price = result.chain.price
    scenario = result.config.scenario.value
    lines = ["period,scenario,profitWei,profitUsd"]
    for s in result.series:
        lines.append(f"{s.period},{scenario},{s.profit_wei},{price.wei_to_usd(s.profit_wei):.2f}")
    return "\n".join(lines) + "\n"


def cost_overlay_csv(result: SimResult) -> str:
    """Running-cost trajectory with one scatter row per action.

    Per period: the period's action rows, each carrying the acted-on
    contract's pool right after the action, then one cost row with the
    period-end pool summed over contracts. Updates show as upward jumps,
    payments as downward steps.
    """
    price = result.chain.price
    by_period: dict[int, list] = {}
    for r in result.records:
        by_period.setdefault(r.period, []).append(r)
    lines = ["rowType,period,kind,dataset,usdTotal,currentCostWei,currentCostUsd"]
    for s in result.series:
        for r in by_period.get(s.period, ()):
            lines.append(
                f"action,{r.period},{r.kind.value},{r.dataset.id},{r.usd_total:.2f},"
                f"{r.current_cost_after_wei},{price.wei_to_usd(r.current_cost_after_wei):.2f}"
            )
        lines.append(
            f"cost,{s.period},,,,{s.current_cost_wei},{price.wei_to_usd(s.current_cost_wei):.2f}"
        )
    return "\n".join(lines) + "\n"


def requester_costs_csv(result: SimResult) -> str:
    """Base gas cost vs additional compensation payment, per requester and kind."""
    price = result.chain.price
    rows: dict[tuple[str, str], list[int]] = {}
    for r in result.records:
        if r.kind not in (ActionKind.REQUEST, ActionKind.RENEW):
            continue
        row = rows.setdefault((r.actor.id, r.kind.value), [0, 0, 0])
        row[0] += 1
        row[1] += r.tx_gas_fee_wei
        row[2] += r.payment_wei
    lines = ["address,kind,actions,gasFeeWei,paymentWei,gasFeeUsd,paymentUsd,totalUsd"]
    for (address, kind), (n, fees, paid) in sorted(rows.items()):
        lines.append(
            f"{address},{kind},{n},{fees},{paid},{price.wei_to_usd(fees):.2f},"
            f"{price.wei_to_usd(paid):.2f},{price.wei_to_usd(fees + paid):.2f}"
        )
    return "\n".join(lines) + "\n"


def top_requesters_csv(result: SimResult, k: int = 3) -> str:
    """The provider's lifetime cost against the k most-spending requesters."""
    price = result.chain.price
    lines = ["role,address,actions,totalWei,totalUsd"]
    provider_spend: dict[Address, int] = {}
    provider_actions: dict[Address, int] = {}
    for c in result.datasets:
        provider_spend[c.owner] = provider_spend.get(c.owner, 0) + c.provider_cost_wei
    for r in result.records:
        if r.kind in (ActionKind.PUBLISH, ActionKind.UPDATE):
            provider_actions[r.actor] = provider_actions.get(r.actor, 0) + 1
    for addr in sorted(provider_spend, key=lambda a: a.id):
        total = provider_spend[addr]
        lines.append(
            f"provider,{addr.id},{provider_actions.get(addr, 0)},{total},"
            f"{price.wei_to_usd(total):.2f}"
        )
    for addr, (n, fees, paid) in _ranked_requesters(result)[:k]:
        total = fees + paid
        lines.append(f"requester,{addr.id},{n},{total},{price.wei_to_usd(total):.2f}")
    return "\n".join(lines) + "\n"


def cost_distribution_csv(result: SimResult) -> str:
    """Per action kind: quartiles of the total USD cost of one action."""
    samples: dict[str, list[float]] = {}
    for r in result.records:
        samples.setdefault(r.kind.value, []).append(r.usd_total)
    lines = ["kind,count,minUsd,q1Usd,medianUsd,q3Usd,maxUsd"]
    for kind in sorted(samples):
        values = sorted(samples[kind])
        if len(values) == 1:
            cuts = [values[0]] * 5
        else:
            q1, q2, q3 = statistics.quantiles(values, n=4, method="inclusive")
            cuts = [values[0], q1, q2, q3, values[-1]]
        lines.append(f"{kind},{len(values)}," + ",".join(f"{v:.2f}" for v in cuts))
    return "\n".join(lines) + "\n"


def summary_text(result: SimResult, summary: RunSummary) -> str:
    price = result.chain.price
    even = "never" if summary.break_even_period is None else f"period {summary.break_even_period}"
    top = ", ".join(f"{addr} ${usd:.2f}" for addr, usd in summary.top_requesters) or "none"
    lines = [
        f"seed {summary.seed}, scenario {summary.scenario}, "
        f"margin {summary.profit_margin_pct}%, "
        f"fractions {summary.access_fraction_pct}%/{summary.renew_fraction_pct}%",
        f"{summary.actions} actions over {summary.periods} periods: "
        f"{summary.publishes} publish, {summary.updates} update, "
        f"{summary.requests} request, {summary.renewals} renew",
        f"per-period frequencies: publish {summary.freq_publish:.2f}, "
        f"update {summary.freq_update:.2f}, request {summary.freq_request:.2f}, "
        f"renew {summary.freq_renew:.2f}",
        f"{summary.datasets_published} dataset(s), {summary.distinct_requesters} distinct "
        f"requesters, {summary.active_tokens_at_end} live tokens at end",
        f"provider cost ${summary.provider_cost_usd:.2f}, "
        f"earnings ${summary.provider_earnings_usd:.2f}, "
        f"profit ${price.wei_to_usd(summary.profit_wei):.2f}",
        f"open compensation pool ${price.wei_to_usd(summary.current_cost_wei):.2f}",
        f"break even: {even}",
        f"top requesters: {top}",
        f"gas fees ${price.wei_to_usd(summary.total_gas_fee_wei):.2f} "
        f"({summary.total_gas_fee_wei} wei to the miner)",
    ]
    return "\n".join(lines) + "\n"


def summary_csv(summary: RunSummary) -> str:
    even = "" if summary.break_even_period is None else str(summary.break_even_period)
    fields = [
        ("seed", summary.seed),
        ("scenario", summary.scenario),
        ("profitMarginPct", summary.profit_margin_pct),
        ("accessFractionPct", summary.access_fraction_pct),
        ("renewFractionPct", summary.renew_fraction_pct),
        ("actions", summary.actions),
        ("periods", summary.periods),
        ("publishes", summary.publishes),
        ("updates", summary.updates),
        ("requests", summary.requests),
        ("renewals", summary.renewals),
        ("freqPublish", f"{summary.freq_publish:.4f}"),
        ("freqUpdate", f"{summary.freq_update:.4f}"),
        ("freqRequest", f"{summary.freq_request:.4f}"),
        ("freqRenew", f"{summary.freq_renew:.4f}"),
        ("datasetsPublished", summary.datasets_published),
        ("distinctRequesters", summary.distinct_requesters),
        ("activeTokensAtEnd", summary.active_tokens_at_end),
        ("providerCostWei", summary.provider_cost_wei),
        ("providerCostUsd", f"{summary.provider_cost_usd:.2f}"),
        ("providerEarningsWei", summary.provider_earnings_wei),
        ("providerEarningsUsd", f"{summary.provider_earnings_usd:.2f}"),
        ("profitWei", summary.profit_wei),
        ("currentCostWei", summary.current_cost_wei),
        ("breakEvenPeriod", even),
        ("totalGasFeeWei", summary.total_gas_fee_wei),
        ("totalPaymentWei", summary.total_payment_wei),
        ("minerTakeWei", summary.miner_take_wei),
    ]
    header = ",".join(name for name, _ in fields)
    row = ",".join(str(value) for _, value in fields)
    return header + "\n" + row + "\n"


def config_text(result: SimResult) -> str:
    """Effective settings in config-file form; feeding it back reproduces the run."""
    cfg = result.config
    pairs = [
        ("scenario", cfg.scenario.value),
        ("actions", cfg.action_ticker),
        ("access-fraction", cfg.access_fraction_pct),
        ("renew-fraction", cfg.renew_fraction_pct),
        ("profit-margin", cfg.resolved_margin_pct),
        ("update-multiplier", cfg.update_multiplier),
        ("accounts", cfg.population.n_accounts),
        ("max-providers", cfg.population.max_providers),
        ("decay", repr(cfg.population.decay)),
        ("provider-prob-max", repr(cfg.population.provider_prob_max)),
        ("gas-price-gwei", repr(cfg.price.gas_price_wei / GWEI)),
        ("eth-usd", repr(cfg.price.eth_usd)),
        ("seed", cfg.seed),
    ]
    return "\n".join(f"{name}={value}" for name, value in pairs) + "\n"


def write_run_reports(result: SimResult, out_dir: Path) -> RunSummary:
    """Reconcile the run, then write the full report set under out_dir."""
    summary = summarize(result)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = {
        "actions.csv": actions_csv(result),
        "periods.csv": periods_csv(result),
        "contracts.csv": contracts_csv(result),
        "profit.csv": profit_series_csv(result),
        "cost_overlay.csv": cost_overlay_csv(result),
        "requester_costs.csv": requester_costs_csv(result),
        "top_requesters.csv": top_requesters_csv(result),
        "cost_distribution.csv": cost_distribution_csv(result),
        "transactions.csv": result.chain.log_csv(),
        "tokens.csv": result.token_store.table_csv(),
        "population.csv": population_csv(result.population),
        "registry.csv": result.registry.snapshot_csv(),
        "summary.txt": summary_text(result, summary),
        "summary.csv": summary_csv(summary),
        "config.txt": config_text(result),
    }
    for name, text in outputs.items():
        (out_dir / name).write_text(text, encoding="utf-8", newline="\n")
    return summary
