"""Dataset contract: publication, updates and cost accounting.

One contract per published dataset. Every owner call is metered, and its
gas cost feeds the compensation ledger: the provider's pure outlay goes to
providerCostWei while currentCostWei accrues the same gas scaled by the
profit margin, which is the pool that requester payments drain. Three
compensation modes share the bookkeeping:

  scenario 1  costs are tracked but requesters are never charged,
  scenario 2  margin is 100%, payments recoup costs and nothing more,
  scenario 3  margin exceeds 100%, payments eventually return a profit.

Update calls grow linearly with the number of active tokens because each
holder must be notified; this is what makes a popular dataset expensive to
maintain and is the core quantity the simulation measures.
"""

from __future__ import annotations

from enum import Enum

from .chain import (
    Address,
    ChainState,
    DEPLOYMENT,
    DESTROY,
    PUBLISH_DATA,
    SET_LICENSE,
    SET_MULTIS,
    SET_PRICE,
    SET_PROFIT_MARGIN,
    SET_REGISTRY_ADDRESS,
    TxReceipt,
    UPDATE_DATA,
    WITHDRAW,
)
from .errors import (
    AlreadyDestroyedError,
    DestroyedError,
    InsufficientFundsError,
    NotOwnerError,
    NotProviderError,
    NotPublishedError,
    OutOfRangeError,
)
from .registry import Registry
from .tokens import BurnCause, TokenStore, burn_token


class Scenario(Enum):
    NO_COMPENSATION = 1
    COST_RECOVERY = 2
    PROFIT = 3


def _check_pct(name: str, value: int, minimum: int, maximum: int) -> None:
    if not isinstance(value, int) or not minimum <= value <= maximum:
        raise OutOfRangeError(f"{name} must be an integer in [{minimum}, {maximum}], got {value!r}")


class DatasetContract:
    def __init__(
        self,
        chain: ChainState,
        registry: Registry,
        owner: Address,
        contract_address: Address,
        link: str,
        required_license: int,
        scenario: Scenario,
        profit_margin_pct: int,
        access_fraction_pct: int,
        renew_fraction_pct: int,
        token_store: TokenStore,
    ) -> None:
        self.chain = chain
        self.registry = registry
        self.owner = owner
        self.contract_address = contract_address
        self.link = link
        self.required_license = required_license
        self.scenario = scenario
        self.profit_margin_pct = profit_margin_pct
        self.access_fraction_pct = access_fraction_pct
        self.renew_fraction_pct = renew_fraction_pct
        self.token_store = token_store
        self.published = False
        self.destroyed = False
        self.meta_version = 0
        self.price_wei = 0
        self.current_cost_wei = 0
        self.provider_cost_wei = 0
        self.provider_earnings_wei = 0
        self.active_token_ids: set[int] = set()

    @classmethod
    def deploy_and_publish(
        cls,
        chain: ChainState,
        registry: Registry,
        provider: Address,
        link: str,
        required_license: int,
        scenario: Scenario,
        profit_margin_pct: int = 100,
        access_fraction_pct: int = 5,
        renew_fraction_pct: int = 5,
        token_store: TokenStore | None = None,
    ) -> "DatasetContract":
        """Deploy the contract and publish the dataset in one step.

        Both transactions accrue into the compensation pool: publication is
        the provider's initial investment that early requesters help repay.
        """
        if not registry.check_provider(provider):
            raise NotProviderError(f"{provider} is not an approved provider")
        _check_pct("profit margin", profit_margin_pct, 100, 10_000)
        _check_pct("access fraction", access_fraction_pct, 1, 100)
        _check_pct("renew fraction", renew_fraction_pct, 1, 100)
        deploy_fee = chain.price.fee_wei(chain.schedule.gas_for(DEPLOYMENT))
        publish_fee = chain.price.fee_wei(chain.schedule.gas_for(PUBLISH_DATA))
        if chain.balance(provider) < deploy_fee + publish_fee:
            raise InsufficientFundsError(f"{provider} cannot afford deployment and publication")
        contract = cls(
            chain=chain,
            registry=registry,
            owner=provider,
            contract_address=chain.next_contract_address(),
            link=link,
            required_license=required_license,
            scenario=scenario,
            profit_margin_pct=profit_margin_pct,
            access_fraction_pct=access_fraction_pct,
            renew_fraction_pct=renew_fraction_pct,
            token_store=token_store if token_store is not None else TokenStore(),
        )
        receipt = chain.execute(provider, DEPLOYMENT)
        contract.accrue_cost(receipt.gas_used)
        receipt = chain.execute(provider, PUBLISH_DATA)
        contract.accrue_cost(receipt.gas_used)
        contract.published = True
        return contract

    @property
    def compensates_requesters(self) -> bool:
        return self.scenario is not Scenario.NO_COMPENSATION

    @property
    def contract_balance_wei(self) -> int:
        return self.chain.balance(self.contract_address)

    def accrue_cost(self, gas_used: int) -> None:
        """Book one metered owner call into both cost ledgers."""
        fee = gas_used * self.chain.price.gas_price_wei
        # Margin scales what requesters reimburse, floored to whole wei.
        self.current_cost_wei += fee * self.profit_margin_pct // 100
        self.provider_cost_wei += fee

    def apply_payment(self, payment_wei: int) -> None:
        self.current_cost_wei = max(0, self.current_cost_wei - payment_wei)
        self.provider_earnings_wei += payment_wei

    def _require_live_owner(self, caller: Address) -> None:
        if self.destroyed:
            raise DestroyedError(f"{self.contract_address} is destroyed")
        if caller != self.owner:
            raise NotOwnerError(f"{caller} does not own {self.contract_address}")

    def update_data(self, caller: Address) -> TxReceipt:
        """Publish a new version; every holder is notified and must re-confirm.

        Gas grows with the number of active tokens, one notification each.
        """
        self._require_live_owner(caller)
        if not self.published:
            raise NotPublishedError(f"{self.contract_address} has no published data")
        extra = self.chain.schedule.per_requester_update_gas * len(self.active_token_ids)
        receipt = self.chain.execute(caller, UPDATE_DATA, extra_gas=extra)
        self.accrue_cost(receipt.gas_used)
        self.meta_version += 1
        self.token_store.invalidate_compliance(sorted(self.active_token_ids), self.chain.period)
        return receipt

    def set_license(self, caller: Address, new_license: int) -> TxReceipt:
        """Change the required license; mismatched live tokens are burned."""
        self._require_live_owner(caller)
        receipt = self.chain.execute(caller, SET_LICENSE)
        self.accrue_cost(receipt.gas_used)
        self.required_license = new_license
        for token_id in sorted(self.active_token_ids):
            token = self.token_store.tokens[token_id]
            if token.license_code != new_license:
                burn_token(self, token, BurnCause.LICENSE_CHANGE)
        return receipt

    def set_profit_margin(self, caller: Address, pct: int) -> TxReceipt:
        self._require_live_owner(caller)
        _check_pct("profit margin", pct, 100, 10_000)
        receipt = self.chain.execute(caller, SET_PROFIT_MARGIN)
        self.accrue_cost(receipt.gas_used)
        self.profit_margin_pct = pct
        return receipt

    def set_multis(self, caller: Address, access_fraction_pct: int, renew_fraction_pct: int) -> TxReceipt:
        self._require_live_owner(caller)
        _check_pct("access fraction", access_fraction_pct, 1, 100)
        _check_pct("renew fraction", renew_fraction_pct, 1, 100)
        receipt = self.chain.execute(caller, SET_MULTIS)
        self.accrue_cost(receipt.gas_used)
        self.access_fraction_pct = access_fraction_pct
        self.renew_fraction_pct = renew_fraction_pct
        return receipt

    def set_price(self, caller: Address, price_wei: int) -> TxReceipt:
        # Stored for completeness; the compensation flow never reads it.
        self._require_live_owner(caller)
        if price_wei < 0:
            raise OutOfRangeError(f"price cannot be negative, got {price_wei}")
        receipt = self.chain.execute(caller, SET_PRICE)
        self.accrue_cost(receipt.gas_used)
        self.price_wei = price_wei
        return receipt

    def set_registry_address(self, caller: Address, registry: Registry) -> TxReceipt:
        self._require_live_owner(caller)
        receipt = self.chain.execute(caller, SET_REGISTRY_ADDRESS)
        self.accrue_cost(receipt.gas_used)
        self.registry = registry
        return receipt

    def withdraw(self, caller: Address) -> TxReceipt:
        """Pull accumulated payments to the owner without destroying."""
        self._require_live_owner(caller)
        return self.chain.transfer(self.contract_address, self.owner, self.contract_balance_wei, WITHDRAW)

    def destroy(self, caller: Address) -> TxReceipt:
        """Terminate the contract: pay out the balance, zero all state.

        Held tokens are not burned but every operation on the contract,
        including access through existing tokens, fails afterwards. Nothing
        is refunded to requesters.
        """
        if self.destroyed:
            raise AlreadyDestroyedError(f"{self.contract_address} is already destroyed")
        if caller != self.owner:
            raise NotOwnerError(f"{caller} does not own {self.contract_address}")
        receipt = self.chain.transfer(self.contract_address, self.owner, self.contract_balance_wei, DESTROY)
        self.destroyed = True
        self.published = False
        self.link = ""
        self.meta_version = 0
        self.price_wei = 0
        self.current_cost_wei = 0
        self.provider_cost_wei = 0
        self.provider_earnings_wei = 0
        self.active_token_ids.clear()
        return receipt
