"""Mock gas-metered ledger.

Models just enough of an account-based blockchain to price contract calls:
accounts hold integer wei balances, every metered call burns gas at a fixed
gas price, and fees drain into a miner sink account so that total system
value is conserved to the wei. There are no blocks, no nonces and no real
EVM; a call is priced by looking its function tag up in a gas schedule.

All arithmetic is integer wei. USD figures are derived for display only and
never feed back into balances.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .errors import (
    InsufficientFundsError,
    UnknownAccountError,
    UnknownFunctionError,
)

WEI_PER_ETH = 10**18
GWEI = 10**9

# Function tags double as gas-schedule keys and transaction-log labels.
DEPLOYMENT = "deployment"
PUBLISH_DATA = "publishData"
UPDATE_DATA = "updateData"
ADD_DATA_REQUESTER = "addDataRequester"
RENEW_TOKEN = "renewToken"
SET_LICENSE = "setLicense"
SET_REGISTRY_ADDRESS = "setRegistryAddress"
SET_PROFIT_MARGIN = "setProfitMargin"
SET_PRICE = "setPrice"
SET_MULTIS = "setMultis"
REGISTRY_DEPLOYMENT = "registryDeployment"
NEW_DATA_PROVIDER = "newDataProvider"
REGISTER_NEW_USER = "registerNewUser"
UPDATE_USER_LICENSE = "updateUserLicense"
CHECK_PROVIDER = "checkProvider"
CHECK_USER = "checkUser"

# Unmetered value movements still show up in the transaction log under
# these tags with zero gas.
DESTROY = "destroy"
WITHDRAW = "withdraw"


@dataclass(frozen=True, slots=True)
class Address:
    """Opaque account identifier; uniqueness is enforced by ChainState."""

    id: str

    def __str__(self) -> str:
        return self.id


NULL_ADDRESS = Address("0x0")
MINER_ADDRESS = Address("miner")


def account_address(index: int) -> Address:
    return Address(f"acct-{index:04d}")


# Measured cost of each contract function: (transaction gas, execution gas).
# Transaction gas is what a caller is billed for; execution gas is kept as
# metadata because the two differ by the fixed intrinsic transaction cost.
_CORE_GAS: dict[str, tuple[int, int]] = {
    DEPLOYMENT: (6_724_230, 5_118_378),
    PUBLISH_DATA: (95_560, 72_560),
    UPDATE_DATA: (43_799, 20_863),
    ADD_DATA_REQUESTER: (475_067, 453_411),
    RENEW_TOKEN: (45_211, 23_747),
    SET_LICENSE: (39_339, 37_075),
    SET_REGISTRY_ADDRESS: (37_131, 14_515),
    SET_PROFIT_MARGIN: (35_091, 13_627),
    SET_PRICE: (31_062, 9_406),
}

_REGISTRY_GAS: dict[str, tuple[int, int]] = {
    REGISTRY_DEPLOYMENT: (621_087, 432_315),
    NEW_DATA_PROVIDER: (44_855, 22_175),
    REGISTER_NEW_USER: (45_669, 22_797),
    UPDATE_USER_LICENSE: (27_732, 6_268),
    CHECK_PROVIDER: (23_991, 1_311),
    CHECK_USER: (23_877, 1_197),
}

# setMultis has no measured row; it is a one-word setter like
# setProfitMargin, so it borrows that measurement by default.
_SET_MULTIS_GAS = _CORE_GAS[SET_PROFIT_MARGIN]

# Marginal gas an update pays per active access token, calibrated so a
# dataset with 60 requesters prices an update near $64.30 while an empty
# one stays near $5.40 at the default gas price and exchange rate.
PER_REQUESTER_UPDATE_GAS = 7_943


@dataclass(frozen=True)
class GasSchedule:
    """Per-function transaction gas, plus the per-requester update premium."""

    transaction_gas: Mapping[str, int]
    execution_gas: Mapping[str, int]
    per_requester_update_gas: int = PER_REQUESTER_UPDATE_GAS

    def __post_init__(self) -> None:
        for name, gas in self.transaction_gas.items():
            if gas <= 0:
                raise ValueError(f"gas for {name} must be positive, got {gas}")
        if self.per_requester_update_gas <= 0:
            raise ValueError("per-requester update gas must be positive")

    def gas_for(self, function: str) -> int:
        try:
            return self.transaction_gas[function]
        except KeyError:
            raise UnknownFunctionError(f"no gas entry for {function!r}") from None


def default_gas_schedule() -> GasSchedule:
    txn = {name: pair[0] for name, pair in (_CORE_GAS | _REGISTRY_GAS).items()}
    exe = {name: pair[1] for name, pair in (_CORE_GAS | _REGISTRY_GAS).items()}
    txn[SET_MULTIS] = _SET_MULTIS_GAS[0]
    exe[SET_MULTIS] = _SET_MULTIS_GAS[1]
    return GasSchedule(transaction_gas=txn, execution_gas=exe)


@dataclass(frozen=True)
class PriceModel:
    """Fixed gas price and exchange rate for a whole run."""

    gas_price_wei: int = 72 * GWEI
    eth_usd: float = 1716.52

    def __post_init__(self) -> None:
        if self.gas_price_wei <= 0:
            raise ValueError("gas price must be positive")
        if self.eth_usd <= 0:
            raise ValueError("exchange rate must be positive")

    def fee_wei(self, gas: int) -> int:
        return gas * self.gas_price_wei

    def wei_to_eth(self, wei: int) -> float:
        return wei / WEI_PER_ETH

    def wei_to_usd(self, wei: int) -> float:
        # Half-up to cents, display only; balances stay integer wei.
        raw = wei / WEI_PER_ETH * self.eth_usd
        cents = int(abs(raw) * 100 + 0.5)
        return (cents if raw >= 0 else -cents) / 100


@dataclass(slots=True)
class TxReceipt:
    index: int
    period: int
    caller: Address
    function: str
    gas_used: int
    gas_fee_wei: int
    value_wei: int
    recipient: Address | None
    usd_cost: float


class ChainState:
    """Account balances, miner sink and the append-only transaction log."""

    def __init__(self, schedule: GasSchedule | None = None, price: PriceModel | None = None) -> None:
        self.schedule = schedule if schedule is not None else default_gas_schedule()
        self.price = price if price is not None else PriceModel()
        self.accounts: dict[Address, int] = {MINER_ADDRESS: 0}
        # Wei minted onto each account at creation; receipts only ever move
        # this money around, which is what reconciliation replays.
        self.funding: dict[Address, int] = {MINER_ADDRESS: 0}
        self.receipts: list[TxReceipt] = []
        self.period = 0
        self.minted_wei = 0
        self._account_seq = 0
        self._contract_seq = 0

    @property
    def miner(self) -> Address:
        return MINER_ADDRESS

    def create_accounts(self, n: int, prefund_wei: int) -> list[Address]:
        if n < 1:
            raise ValueError("need at least one account")
        if prefund_wei < 0:
            raise ValueError("prefund cannot be negative")
        created = []
        for _ in range(n):
            created.append(self.create_named_account(account_address(self._account_seq).id, prefund_wei))
            self._account_seq += 1
        return created

    def create_named_account(self, name: str, prefund_wei: int = 0) -> Address:
        addr = Address(name)
        if addr in self.accounts:
            raise ValueError(f"account {name} already exists")
        self.accounts[addr] = prefund_wei
        self.funding[addr] = prefund_wei
        self.minted_wei += prefund_wei
        return addr

    def next_contract_address(self, prefix: str = "dataset") -> Address:
        self._contract_seq += 1
        return self.create_named_account(f"{prefix}-{self._contract_seq:02d}")

    def balance(self, addr: Address) -> int:
        try:
            return self.accounts[addr]
        except KeyError:
            raise UnknownAccountError(f"no account {addr}") from None

    def total_wei(self) -> int:
        return sum(self.accounts.values())

    def conservation_holds(self) -> bool:
        # Every wei ever minted is still on some account, miner included.
        return self.total_wei() == self.minted_wei

    def execute(
        self,
        caller: Address,
        function: str,
        extra_gas: int = 0,
        value_wei: int = 0,
        recipient: Address | None = None,
    ) -> TxReceipt:
        """Run one metered call: bill gas to the caller, move value.

        Rejection is atomic: a call that cannot be paid for leaves every
        balance untouched and consumes no gas.
        """
        if extra_gas < 0 or value_wei < 0:
            raise ValueError("extra gas and value cannot be negative")
        if value_wei > 0 and recipient is None:
            raise ValueError("value transfer needs a recipient")
        gas = self.schedule.gas_for(function) + extra_gas
        fee = self.price.fee_wei(gas)
        caller_balance = self.balance(caller)
        if recipient is not None:
            self.balance(recipient)  # recipient must exist before any debit
        if caller_balance < fee + value_wei:
            raise InsufficientFundsError(
                f"{caller} holds {caller_balance} wei, needs {fee + value_wei} for {function}"
            )
        self.accounts[caller] = caller_balance - fee - value_wei
        self.accounts[MINER_ADDRESS] += fee
        if recipient is not None:
            self.accounts[recipient] += value_wei
        receipt = TxReceipt(
            index=len(self.receipts),
            period=self.period,
            caller=caller,
            function=function,
            gas_used=gas,
            gas_fee_wei=fee,
            value_wei=value_wei,
            recipient=recipient,
            usd_cost=self.price.wei_to_usd(fee + value_wei),
        )
        self.receipts.append(receipt)
        return receipt

    def transfer(self, source: Address, recipient: Address, value_wei: int, tag: str) -> TxReceipt:
        """Unmetered value movement (contract payouts); logged with zero gas."""
        if value_wei < 0:
            raise ValueError("value cannot be negative")
        source_balance = self.balance(source)
        self.balance(recipient)
        if source_balance < value_wei:
            raise InsufficientFundsError(f"{source} holds {source_balance} wei, needs {value_wei}")
        self.accounts[source] = source_balance - value_wei
        self.accounts[recipient] += value_wei
        receipt = TxReceipt(
            index=len(self.receipts),
            period=self.period,
            caller=source,
            function=tag,
            gas_used=0,
            gas_fee_wei=0,
            value_wei=value_wei,
            recipient=recipient,
            usd_cost=self.price.wei_to_usd(value_wei),
        )
        self.receipts.append(receipt)
        return receipt

    def log_csv(self) -> str:
        lines = ["index,period,caller,function,gasUsed,gasFeeWei,valueWei,recipient,usdCost"]
        for r in self.receipts:
            recipient = r.recipient.id if r.recipient is not None else ""
            lines.append(
                f"{r.index},{r.period},{r.caller.id},{r.function},{r.gas_used},"
                f"{r.gas_fee_wei},{r.value_wei},{recipient},{r.usd_cost:.2f}"
            )
        return "\n".join(lines) + "\n"
