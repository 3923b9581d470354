"""Period-loop simulation engine.

Each period runs four phases in a fixed order: publish, update, request,
renew. Exactly one provider is "in line" to publish and exactly one
requester is "in line" to request; both retry every period until their
probability roll succeeds, and the requester queue advances in account
creation order. Every holder of a live token gets a renewal chance each
period once their token expired and at least ACCESS_PERIODS periods have
passed since their last action. The run stops the moment the configured
number of actions has occurred, mid-period if necessary.

Determinism: a single seeded generator drives every draw, in a fixed
order - population generation first, then per period the publish roll
(the very first publish is forced and consumes no draw), one update roll
per published provider, the request roll, the target-dataset choice, and
one renewal roll per eligible token in token-id order. No draw depends on
scenario, margin or fraction parameters, so runs that share a seed share
their entire action stream across those settings.
"""

from __future__ import annotations

import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

from .agents import AgentProfile, PopulationConfig, Role, decay_renewal_prob, generate_population
from .chain import Address, ChainState, GasSchedule, PriceModel, WEI_PER_ETH, default_gas_schedule
from .dataset import DatasetContract, Scenario
from .errors import ConfigError, EngineError, LedgerError
from .registry import DEFAULT_LICENSE, Registry
from .tokens import ACCESS_PERIODS, TokenStore, confirm_compliance, quote_payment, renew_access_time, request_access

log = logging.getLogger(__name__)

# Safety valve only; real runs finish in a few hundred periods.
MAX_PERIODS = 1_000_000


class ActionKind(Enum):
    PUBLISH = "publish"
    UPDATE = "update"
    REQUEST = "request"
    RENEW = "renew"


@dataclass(slots=True)
class ActionRecord:
    index: int
    period: int
    kind: ActionKind
    actor: Address
    dataset: Address
    tx_gas_fee_wei: int
    payment_wei: int
    usd_total: float
    # Compensation pool of the acted-on contract right after the action;
    # lets reports plot the running-cost trajectory at action granularity.
    current_cost_after_wei: int


@dataclass(slots=True)
class PeriodStats:
    period: int
    current_cost_wei: int
    provider_cost_wei: int
    provider_earnings_wei: int
    profit_wei: int
    active_requesters: int
    actions_this_period: int


@dataclass(slots=True)
class ContractSnapshot:
    period: int
    contract: Address
    current_cost_wei: int
    provider_cost_wei: int
    provider_earnings_wei: int
    active_tokens: int
    meta_version: int


@dataclass(frozen=True)
class SimConfig:
    scenario: Scenario = Scenario.COST_RECOVERY
    action_ticker: int = 500
    access_fraction_pct: int = 5
    renew_fraction_pct: int = 5
    profit_margin_pct: int | None = None  # None resolves per scenario
    update_multiplier: int = 5
    prefund_wei: int = 100 * WEI_PER_ETH
    seed: int = 0
    population: PopulationConfig = field(default_factory=PopulationConfig)
    price: PriceModel = field(default_factory=PriceModel)
    schedule: GasSchedule = field(default_factory=default_gas_schedule)

    @property
    def resolved_margin_pct(self) -> int:
        if self.profit_margin_pct is not None:
            return self.profit_margin_pct
        return 200 if self.scenario is Scenario.PROFIT else 100

    def validate(self) -> None:
        if self.action_ticker < 1:
            raise ConfigError("action ticker must be at least 1")
        if self.update_multiplier < 1:
            raise ConfigError("update multiplier must be at least 1")
        if self.prefund_wei <= 0:
            raise ConfigError("prefund must be positive")
        if not isinstance(self.access_fraction_pct, int) or not 1 <= self.access_fraction_pct <= 100:
            raise ConfigError("access fraction must be an integer percentage in [1, 100]")
        if not isinstance(self.renew_fraction_pct, int) or not 1 <= self.renew_fraction_pct <= 100:
            raise ConfigError("renew fraction must be an integer percentage in [1, 100]")
        margin = self.resolved_margin_pct
        if margin < 100:
            raise ConfigError("profit margin below 100 would sell at a loss")
        if self.scenario is Scenario.PROFIT and margin <= 100:
            raise ConfigError("scenario 3 needs a profit margin above 100")
        if self.scenario is not Scenario.PROFIT and margin != 100:
            raise ConfigError("scenarios 1 and 2 track pure costs; margin must be 100")
        self.population.validate()


@dataclass
class SimResult:
    config: SimConfig
    records: list[ActionRecord]
    series: list[PeriodStats]
    contract_snapshots: list[ContractSnapshot]
    chain: ChainState
    registry: Registry
    token_store: TokenStore
    population: list[AgentProfile]
    datasets: list[DatasetContract]


def _publish_dataset(
    chain: ChainState,
    registry: Registry,
    store: TokenStore,
    cfg: SimConfig,
    provider: AgentProfile,
    ordinal: int,
) -> tuple[DatasetContract, int]:
    """Deploy, publish and configure one dataset, returning total gas fees.

    The three parameter-setting calls happen once at publication and are
    billed like any owner call but never count as simulation actions.
    """
    contract = DatasetContract.deploy_and_publish(
        chain,
        registry,
        provider.address,
        link=f"data://{provider.address.id}/{ordinal}",
        required_license=DEFAULT_LICENSE,
        scenario=cfg.scenario,
        profit_margin_pct=cfg.resolved_margin_pct,
        access_fraction_pct=cfg.access_fraction_pct,
        renew_fraction_pct=cfg.renew_fraction_pct,
        token_store=store,
    )
    fees = sum(r.gas_fee_wei for r in chain.receipts[-2:])
    fees += contract.set_registry_address(provider.address, registry).gas_fee_wei
    fees += contract.set_profit_margin(provider.address, cfg.resolved_margin_pct).gas_fee_wei
    fees += contract.set_multis(provider.address, cfg.access_fraction_pct, cfg.renew_fraction_pct).gas_fee_wei
    return contract, fees


def run_simulation(cfg: SimConfig) -> SimResult:
    cfg.validate()
    rng = random.Random(cfg.seed)
    chain = ChainState(cfg.schedule, cfg.price)
    addresses = chain.create_accounts(cfg.population.n_accounts, cfg.prefund_wei)
    authority = chain.create_named_account("authority", cfg.prefund_wei)
    population = generate_population(cfg.population, rng)

    registry = Registry.deploy(chain, authority)
    for profile in population:
        if profile.role is Role.PROVIDER:
            registry.new_data_provider(authority, profile.address)
        else:
            registry.register_new_user(authority, profile.address, DEFAULT_LICENSE)

    store = TokenStore()
    providers = [p for p in population if p.role is Role.PROVIDER]
    requesters = [p for p in population if p.role is Role.REQUESTER]
    by_address = {p.address: p for p in population}
    datasets: list[DatasetContract] = []
    dataset_owner: dict[Address, AgentProfile] = {}

    records: list[ActionRecord] = []
    series: list[PeriodStats] = []
    snapshots: list[ContractSnapshot] = []
    actions = 0
    next_provider = 0
    next_requester = 0
    period = 0

    def record(kind: ActionKind, actor: Address, contract: DatasetContract, fee_wei: int, payment_wei: int) -> None:
        nonlocal actions
        records.append(
            ActionRecord(
                index=len(records),
                period=period,
                kind=kind,
                actor=actor,
                dataset=contract.contract_address,
                tx_gas_fee_wei=fee_wei,
                payment_wei=payment_wei,
                usd_total=chain.price.wei_to_usd(fee_wei + payment_wei),
                current_cost_after_wei=contract.current_cost_wei,
            )
        )
        actions += 1

    try:
        while actions < cfg.action_ticker:
            if period >= MAX_PERIODS:
                raise EngineError(f"no progress after {MAX_PERIODS} periods")
            chain.period = period
            actions_at_start = actions

            # Publish: the next provider in line rolls; the very first
            # publication of the run happens unconditionally.
            if next_provider < len(providers):
                provider = providers[next_provider]
                goes = not records or rng.random() < provider.current_prob
                if goes:
                    contract, fees = _publish_dataset(chain, registry, store, cfg, provider, next_provider + 1)
                    datasets.append(contract)
                    dataset_owner[contract.contract_address] = provider
                    provider.datasets_held.add(contract.contract_address)
                    provider.last_action_period = period
                    record(ActionKind.PUBLISH, provider.address, contract, fees, 0)
                    next_provider += 1

            # Update: every provider with a published dataset rolls.
            if actions < cfg.action_ticker:
                for contract in datasets:
                    if actions >= cfg.action_ticker:
                        break
                    if contract.destroyed:
                        continue
                    owner = dataset_owner[contract.contract_address]
                    update_prob = min(1.0, owner.base_prob * cfg.update_multiplier)
                    if rng.random() < update_prob:
                        receipt = contract.update_data(owner.address)
                        owner.last_action_period = period
                        record(ActionKind.UPDATE, owner.address, contract, receipt.gas_fee_wei, 0)

            # Request: the requester in line rolls; on decline the same
            # requester tries again next period.
            if actions < cfg.action_ticker and next_requester < len(requesters):
                requester = requesters[next_requester]
                live = [c for c in datasets if c.published and not c.destroyed]
                if live and rng.random() < requester.current_prob:
                    open_sets = [
                        c for c in live if store.live_token(c.contract_address, requester.address) is None
                    ]
                    if open_sets:
                        contract = open_sets[rng.randrange(len(open_sets))]
                        payment = quote_payment(contract, "access").current_expected_cost_wei
                        request_access(requester.address, contract, payment)
                        receipt = chain.receipts[-1]
                        requester.last_action_period = period
                        requester.datasets_held.add(contract.contract_address)
                        record(ActionKind.REQUEST, requester.address, contract, receipt.gas_fee_wei, payment)
                    next_requester += 1

            # Renew: each holder of an expired token rolls, subject to the
            # cool-down of ACCESS_PERIODS periods since their last action.
            if actions < cfg.action_ticker:
                by_contract = {c.contract_address: c for c in datasets}
                for token in list(store.live_tokens()):
                    if actions >= cfg.action_ticker:
                        break
                    contract = by_contract[token.dataset_address]
                    if contract.destroyed:
                        continue
                    holder = by_address[token.user]
                    if token.access_until > period:
                        continue
                    if holder.last_action_period is not None and period - holder.last_action_period < ACCESS_PERIODS:
                        continue
                    if rng.random() < holder.current_prob:
                        if not token.compliance:
                            confirm_compliance(holder.address, contract)
                        payment = quote_payment(contract, "renewal").current_expected_cost_wei
                        renew_access_time(holder.address, contract, payment)
                        receipt = chain.receipts[-1]
                        decay_renewal_prob(holder)
                        holder.last_action_period = period
                        record(ActionKind.RENEW, holder.address, contract, receipt.gas_fee_wei, payment)

            current_cost = sum(c.current_cost_wei for c in datasets)
            cost = sum(c.provider_cost_wei for c in datasets)
            earnings = sum(c.provider_earnings_wei for c in datasets)
            holders = len({t.user for t in store.live_tokens()})
            series.append(
                PeriodStats(
                    period=period,
                    current_cost_wei=current_cost,
                    provider_cost_wei=cost,
                    provider_earnings_wei=earnings,
                    profit_wei=earnings - cost,
                    active_requesters=holders,
                    actions_this_period=actions - actions_at_start,
                )
            )
            for contract in datasets:
                snapshots.append(
                    ContractSnapshot(
                        period=period,
                        contract=contract.contract_address,
                        current_cost_wei=contract.current_cost_wei,
                        provider_cost_wei=contract.provider_cost_wei,
                        provider_earnings_wei=contract.provider_earnings_wei,
                        active_tokens=len(contract.active_token_ids),
                        meta_version=contract.meta_version,
                    )
                )
            period += 1
    except LedgerError as exc:
        if isinstance(exc, EngineError):
            raise
        raise EngineError(f"period {period}, action {actions}: {exc}") from exc

    assert len(addresses) == len(population)
    return SimResult(
        config=cfg,
        records=records,
        series=series,
        contract_snapshots=snapshots,
        chain=chain,
        registry=registry,
        token_store=store,
        population=population,
        datasets=datasets,
    )


def break_even_period(result: SimResult) -> int | None:
    """First period whose cumulative profit is non-negative, if any."""
    for stats in result.series:
        if stats.profit_wei >= 0:
            return stats.period
    return None


def with_seed(cfg: SimConfig, seed: int) -> SimConfig:
    return replace(cfg, seed=seed, population=replace(cfg.population, seed=seed))


def sweep(configs: list[SimConfig], jobs: int = 1) -> list["SimResult | None"]:
    """Run several independent simulations, preserving input order.

    A failed run is reported and yields None; the others continue.
    """
    if jobs < 1:
        raise ConfigError("jobs must be at least 1")

    def one(cfg: SimConfig) -> "SimResult | None":
        try:
            return run_simulation(cfg)
        except LedgerError as exc:
            log.error("run with seed %d failed: %s", cfg.seed, exc)
            return None

    if jobs == 1 or len(configs) <= 1:
        return [one(cfg) for cfg in configs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, configs))
