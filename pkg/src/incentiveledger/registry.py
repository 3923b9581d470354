"""User and provider registry.

A single institutional authority vouches for participants: providers are
approved addresses allowed to publish datasets, users carry a license code
that dataset contracts match against before granting access. Mutations are
metered transactions paid by the authority; the membership checks that
dataset contracts perform internally are free reads.
"""

from __future__ import annotations

from .chain import (
    Address,
    ChainState,
    NEW_DATA_PROVIDER,
    REGISTER_NEW_USER,
    REGISTRY_DEPLOYMENT,
    TxReceipt,
    UPDATE_USER_LICENSE,
)
from .errors import AlreadyRegisteredError, NotAuthorityError, NotRegisteredError

# License codes are small integers; any two distinct codes behave as two
# distinct licenses.
DEFAULT_LICENSE = 1


class Registry:
    def __init__(self, chain: ChainState, authority: Address) -> None:
        self.chain = chain
        self.authority = authority
        self.users: dict[Address, int] = {}
        self.providers: set[Address] = set()

    @classmethod
    def deploy(cls, chain: ChainState, authority: Address) -> "Registry":
        chain.execute(authority, REGISTRY_DEPLOYMENT)
        return cls(chain, authority)

    def _require_authority(self, caller: Address) -> None:
        if caller != self.authority:
            raise NotAuthorityError(f"{caller} is not the registry authority")

    def register_new_user(self, caller: Address, user: Address, license_code: int) -> TxReceipt:
        self._require_authority(caller)
        if user in self.users:
            raise AlreadyRegisteredError(f"{user} is already a registered user")
        receipt = self.chain.execute(caller, REGISTER_NEW_USER)
        self.users[user] = license_code
        return receipt

    def new_data_provider(self, caller: Address, provider: Address) -> TxReceipt:
        self._require_authority(caller)
        if provider in self.providers:
            raise AlreadyRegisteredError(f"{provider} is already a provider")
        receipt = self.chain.execute(caller, NEW_DATA_PROVIDER)
        self.providers.add(provider)
        return receipt

    def update_user_license(self, caller: Address, user: Address, license_code: int) -> TxReceipt:
        self._require_authority(caller)
        if user not in self.users:
            raise NotRegisteredError(f"{user} is not a registered user")
        receipt = self.chain.execute(caller, UPDATE_USER_LICENSE)
        self.users[user] = license_code
        return receipt

    def check_user(self, user: Address, license_code: int) -> bool:
        """Free read: is this user registered with exactly this license?"""
        return self.users.get(user) == license_code

    def check_provider(self, addr: Address) -> bool:
        """Free read: is this address an approved provider?"""
        return addr in self.providers

    def snapshot_csv(self) -> str:
        rows: dict[str, tuple[str, str]] = {}
        for addr in self.providers:
            rows[addr.id] = ("provider", "")
        for addr, license_code in self.users.items():
            if addr.id in rows:
                rows[addr.id] = ("provider+user", str(license_code))
            else:
                rows[addr.id] = ("user", str(license_code))
        lines = ["address,role,license"]
        for addr_id in sorted(rows):
            role, license_code = rows[addr_id]
            lines.append(f"{addr_id},{role},{license_code}")
        return "\n".join(lines) + "\n"
