"""Acceptance gate: one test per shipped guarantee, at stated tolerance.

Each test prints the measured values next to its target band, so a -v run
shows one pass/fail line per criterion and the numbers behind it. The two
stochastic batches (30 paired seeds at defaults; the access-fraction grid)
are built once per module and shared.

Known-red criteria are NOT weakened here: criterion 5's scenario-2 median
band and criterion 6's lower cost bound fail as stated; the analysis lives
in the project notes.
"""

from __future__ import annotations

import statistics
import time
from decimal import Decimal

import pytest

from incentiveledger import (
    ACCESS_PERIODS,
    ActionKind,
    AgentProfile,
    BurnCause,
    DatasetContract,
    PopulationConfig,
    Registry,
    Role,
    Scenario,
    SimConfig,
    WEI_PER_ETH,
    break_even_period,
    burn_token,
    confirm_compliance,
    decay_renewal_prob,
    generate_population,
    get_link,
    quote_payment,
    renew_access_time,
    request_access,
    run_simulation,
    with_seed,
)
from incentiveledger.chain import ChainState, PriceModel, default_gas_schedule
from incentiveledger.errors import (
    ComplianceRequiredError,
    DestroyedError,
    DuplicateTokenError,
    LedgerError,
)
from incentiveledger.reporting import actions_csv, reconcile, summarize
from incentiveledger.tokens import _ceil_div

SEEDS = range(30)
INF = float("inf")

# Published per-call costs at 72 Gwei / $1716.52: (function, ETH to 5dp, USD).
GOLDEN_FEES = [
    ("deployment", "0.48414", 831.03),
    ("publishData", "0.00688", 11.80),
    ("updateData", "0.00315", 5.40),
    ("addDataRequester", "0.03420", 58.70),
    ("renewToken", "0.00326", 5.59),
    ("setLicense", "0.00283", 4.85),
    ("setRegistryAddress", "0.00267", 4.58),
    ("setProfitMargin", "0.00253", 4.34),
    ("setPrice", "0.00224", 3.84),
    ("registryDeployment", "0.04472", 76.76),
    ("newDataProvider", "0.00323", 5.54),
    ("registerNewUser", "0.00329", 5.64),
    ("updateUserLicense", "0.00200", 3.43),
    ("checkProvider", "0.00173", 2.96),
    ("checkUser", "0.00172", 2.95),
]


def default_cfg(scenario: Scenario, seed: int, access_fraction: int = 5) -> SimConfig:
    # Only the access fraction varies in the sweep; renewals stay at 5%.
    return with_seed(SimConfig(scenario=scenario, access_fraction_pct=access_fraction), seed)


def even_or_inf(result) -> float:
    even = break_even_period(result)
    return INF if even is None else float(even)


@pytest.fixture(scope="module")
def batch30():
    """Thirty paired default runs per compensating scenario, plus wall time."""
    started = time.perf_counter()
    runs = {
        scenario: [run_simulation(default_cfg(scenario, seed)) for seed in SEEDS]
        for scenario in (Scenario.COST_RECOVERY, Scenario.PROFIT)
    }
    elapsed = time.perf_counter() - started
    return {"runs": runs, "elapsed": elapsed}


@pytest.fixture(scope="module")
def fraction_medians(batch30):
    """Median break-even per (scenario, access fraction), paired seeds 0..29."""
    medians: dict[tuple[Scenario, int], float] = {}
    for scenario in (Scenario.COST_RECOVERY, Scenario.PROFIT):
        for fraction in (1, 5, 10, 25):
            if fraction == 5:
                evens = [even_or_inf(r) for r in batch30["runs"][scenario]]
            else:
                evens = [
                    even_or_inf(run_simulation(default_cfg(scenario, seed, fraction)))
                    for seed in SEEDS
                ]
            medians[(scenario, fraction)] = statistics.median(evens)
    return medians


def build_market(n_users: int):
    chain = ChainState()
    authority = chain.create_named_account("authority", 100 * WEI_PER_ETH)
    provider = chain.create_named_account("provider", 100 * WEI_PER_ETH)
    users = [chain.create_named_account(f"user-{i:02d}", 100 * WEI_PER_ETH) for i in range(n_users)]
    registry = Registry.deploy(chain, authority)
    registry.new_data_provider(authority, provider)
    for user in users:
        registry.register_new_user(authority, user, 1)
    return chain, registry, authority, provider, users


def publish(chain, registry, provider, scenario=Scenario.COST_RECOVERY, **kwargs):
    return DatasetContract.deploy_and_publish(
        chain, registry, provider, link="data://acc", required_license=1,
        scenario=scenario, **kwargs,
    )


def paid_access(contract, user):
    return request_access(user, contract, quote_payment(contract, "access").current_expected_cost_wei)


def test_criterion_1_gas_and_usd_golden_tables():
    started = time.perf_counter()
    schedule = default_gas_schedule()
    price = PriceModel()
    worst_usd = 0.0
    for function, eth_str, usd in GOLDEN_FEES:
        fee_wei = price.fee_wei(schedule.gas_for(function))
        eth_units = (fee_wei + 5 * 10**12) // 10**13  # half-up to 1e-5 ETH
        assert eth_units == int(Decimal(eth_str) * 10**5), function
        gap = abs(price.wei_to_usd(fee_wei) - usd)
        worst_usd = max(worst_usd, gap)
        assert gap <= 0.02, f"{function}: USD off by {gap:.4f}"
    elapsed = time.perf_counter() - started
    print(f"criterion 1: 15/15 rows exact in ETH, worst USD gap ${worst_usd:.2f} "
          f"(<= $0.02), took {elapsed:.3f}s (< 1s)")
    assert elapsed < 1.0


def test_criterion_2_update_cost_scaling():
    chain, registry, authority, provider, users = build_market(60)
    empty = publish(chain, registry, provider)
    usd_at_0 = empty.update_data(provider).usd_cost
    provider2 = chain.create_named_account("provider-2", 100 * WEI_PER_ETH)
    registry.new_data_provider(authority, provider2)
    crowded = publish(chain, registry, provider2)
    for user in users:
        paid_access(crowded, user)
    usd_at_60 = crowded.update_data(provider2).usd_cost
    per_unit_usd = 72 * 1716.52 * 1e-9
    calibration = round(((64.30 - 5.40) / 60) / per_unit_usd)
    print(f"criterion 2: update ${usd_at_0:.2f} at 0 requesters (~5.40), "
          f"${usd_at_60:.2f} at 60 (64.30 +/- 0.50); "
          f"calibration oracle {calibration} == {chain.schedule.per_requester_update_gas}")
    assert usd_at_0 == pytest.approx(5.40, abs=0.05)
    assert usd_at_60 == pytest.approx(64.30, abs=0.50)
    assert calibration == chain.schedule.per_requester_update_gas


def test_criterion_3_renewal_decay_arithmetic():
    profile = AgentProfile(
        address=None, role=Role.REQUESTER, base_prob=0.5, current_prob=0.5, decay=0.75,
    )
    for _ in range(15):
        decay_renewal_prob(profile)
    target = 0.5 * 0.75**15
    gap = abs(profile.current_prob - target)
    print(f"criterion 3: after 15 decays {profile.current_prob:.12%} vs "
          f"0.5*0.75^15 = {target:.12%}, gap {gap:.2e} (< 1e-12)")
    assert gap < 1e-12


def test_criterion_4_population_statistics():
    requester_probs: list[float] = []
    provider_probs: list[float] = []
    for seed in range(20):
        population = generate_population(PopulationConfig(seed=seed))
        for profile in population:
            (provider_probs if profile.role is Role.PROVIDER else requester_probs).append(
                profile.base_prob
            )
    mean = statistics.fmean(requester_probs)
    print(f"criterion 4: requester mean over 20 seeds {mean:.4f} in [0.46, 0.54]; "
          f"provider probs span [{min(provider_probs):.4f}, {max(provider_probs):.4f}] "
          f"within [0.01, 0.05]")
    assert 0.46 <= mean <= 0.54
    assert all(0.01 <= p <= 0.05 for p in provider_probs)


def test_criterion_5_scenario_break_even_distribution(batch30):
    s2_runs = batch30["runs"][Scenario.COST_RECOVERY]
    s3_runs = batch30["runs"][Scenario.PROFIT]
    s2_evens = [even_or_inf(r) for r in s2_runs]
    s3_evens = [even_or_inf(r) for r in s3_runs]
    s2_median = statistics.median(s2_evens)
    s3_median = statistics.median(s3_evens)
    paired_ok = all(e3 <= e2 for e2, e3 in zip(s2_evens, s3_evens))

    orderings = 0
    for result in s2_runs:
        counts = {kind: 0 for kind in ActionKind}
        for record in result.records:
            counts[record.kind] += 1
        assert sum(counts.values()) == 500 == len(result.records)
        if counts[ActionKind.RENEW] > counts[ActionKind.REQUEST] > counts[ActionKind.UPDATE]:
            orderings += 1
    ordering_share = orderings / len(s2_runs)

    print(f"criterion 5: S2 median break-even {s2_median} in [20, 70]; "
          f"S3 median {s3_median} in [8, 30]; paired S3<=S2 {paired_ok}; "
          f"500 actions exact on 30/30; renew>request>update in "
          f"{ordering_share:.0%} of seeds (>= 90%); "
          f"batch took {batch30['elapsed']:.1f}s (< 60s)")
    assert batch30["elapsed"] < 60.0
    assert paired_ok
    assert ordering_share >= 0.90
    assert 8 <= s3_median <= 30
    # Scenario 2's pool keeps accruing with every update, so cumulative
    # profit stays below zero and no run ever breaks even; the band below
    # is asserted as stated and fails. See the notes for the analysis.
    assert 20 <= s2_median <= 70


def test_criterion_6_provider_cost_band(batch30):
    costs = []
    for result in batch30["runs"][Scenario.COST_RECOVERY]:
        wei = sum(c.provider_cost_wei for c in result.datasets)
        costs.append(result.chain.price.wei_to_usd(wei))
    low, high = min(costs), max(costs)
    outliers = [f"seed {i}: ${c:.2f}" for i, c in enumerate(costs) if not 1_000 <= c <= 5_000]
    print(f"criterion 6: provider cost per run spans [${low:.2f}, ${high:.2f}], "
          f"band [$1000, $5000], outliers: {outliers or 'none'}")
    # A quiet provider draw can stay just under the floor (about 3% of
    # seeds); the band is asserted as stated and fails on such batches.
    assert not outliers


def test_criterion_7_property_suites(batch30):
    runs = batch30["runs"][Scenario.COST_RECOVERY] + batch30["runs"][Scenario.PROFIT]

    # Conservation, replay oracle, and the action-trail cross-checks.
    for result in runs:
        assert result.chain.conservation_holds()
        reconcile(result)

    # Token uniqueness: ids never reused, one live token per (dataset, user).
    for result in runs:
        store = result.token_store
        assert sorted(store.tokens) == list(store.tokens)
        live = [(t.dataset_address, t.user) for t in store.live_tokens()]
        assert len(live) == len(set(live))

    # Compliance gating: replaying each run's event trail, no renewal lands
    # between an update notice and that holder's confirmation.
    for result in runs:
        pending: set[int] = set()
        for event in result.token_store.events:
            if event.kind == "updateNotice":
                pending.add(event.token_id)
            elif event.kind == "complianceConfirmed":
                pending.discard(event.token_id)
            elif event.kind == "renewed":
                assert event.token_id not in pending

    # Payment monotonicity: between two accruals of one dataset, successive
    # payments never grow.
    for result in runs:
        last_payment: dict = {}
        for record in result.records:
            if record.kind in (ActionKind.PUBLISH, ActionKind.UPDATE):
                last_payment.pop(record.dataset, None)
            elif record.payment_wei > 0:
                if record.dataset in last_payment:
                    assert record.payment_wei <= last_payment[record.dataset]
                last_payment[record.dataset] = record.payment_wei

    # Determinism: regenerating seed 0 reproduces the action log bytes.
    again = run_simulation(default_cfg(Scenario.COST_RECOVERY, 0))
    assert actions_csv(again) == actions_csv(runs[0])
    assert again.chain.log_csv() == runs[0].chain.log_csv()

    # Finite coverage: ceiling payments drain any pool to exactly zero.
    pool = sum(c.current_cost_wei for c in runs[0].datasets) or 10**18
    steps = 0
    while pool > 0:
        pool -= _ceil_div(pool * 5, 100)
        steps += 1
        assert steps < 5_000
    assert pool == 0

    # Lifecycle properties on a live market: duplicate mint, license purge,
    # burn totality, destruction totality.
    chain, registry, authority, provider, users = build_market(3)
    contract = publish(chain, registry, provider)
    token = paid_access(contract, users[0])
    with pytest.raises(DuplicateTokenError):
        paid_access(contract, users[0])
    contract.update_data(provider)
    with pytest.raises(ComplianceRequiredError):
        renew_access_time(users[0], contract, quote_payment(contract, "renewal").current_expected_cost_wei)
    confirm_compliance(users[0], contract)
    renew_access_time(users[0], contract, quote_payment(contract, "renewal").current_expected_cost_wei)

    registry.update_user_license(authority, users[1], 2)
    paid_access(contract, users[2])
    contract.set_license(provider, 2)
    assert all(t.license_code == 2 for t in contract.token_store.live_tokens())
    assert token.burned and token.token_id not in contract.active_token_ids

    survivor = contract.token_store.live_token(contract.contract_address, users[1])
    if survivor is None:
        survivor_token = request_access(users[1], contract,
                                        quote_payment(contract, "access").current_expected_cost_wei)
    else:
        survivor_token = survivor
    burn_token(contract, survivor_token, BurnCause.REQUESTER)
    assert survivor_token.burned and survivor_token.compliance
    assert contract.token_store.live_token(contract.contract_address, users[1]) is None

    held = contract.contract_balance_wei
    owner_before = chain.balance(provider)
    contract.destroy(provider)
    assert chain.balance(provider) == owner_before + held
    operations = [
        lambda: contract.update_data(provider),
        lambda: contract.set_profit_margin(provider, 100),
        lambda: contract.set_multis(provider, 5, 5),
        lambda: contract.set_price(provider, 1),
        lambda: contract.set_registry_address(provider, registry),
        lambda: contract.withdraw(provider),
        lambda: quote_payment(contract, "access"),
        lambda: paid_access(contract, users[2]),
        lambda: confirm_compliance(users[2], contract),
        lambda: get_link(users[2], contract),
    ]
    failed = 0
    for operation in operations:
        try:
            operation()
        except LedgerError:
            failed += 1
    assert failed == len(operations)
    assert chain.conservation_holds()

    print("criterion 7: conservation, replay, uniqueness, compliance gating, "
          "payment monotonicity, determinism, finite coverage, purge, burn "
          "and destruction totality all hold on the 60-run batch")


def test_criterion_8_break_even_monotone_in_access_fraction(fraction_medians):
    fractions = (1, 5, 10, 25)
    lines = []
    for scenario in (Scenario.COST_RECOVERY, Scenario.PROFIT):
        medians = [fraction_medians[(scenario, f)] for f in fractions]
        lines.append(f"S{scenario.value} medians over {fractions}: {medians}")
        for earlier, later in zip(medians, medians[1:]):
            assert later <= earlier, lines[-1]
    print("criterion 8: " + "; ".join(lines) + " (non-increasing)")
