"""Access tokens and the request/renew payment gateway.

An access token is the non-transferable key a requester holds for one
dataset: it carries an expiry period, a compliance flag that dataset
updates reset, and burn bookkeeping. The gateway functions quote and
collect the cost-sharing payment that scenarios 2 and 3 charge on access
requests and renewals, forwarding the value into the dataset contract's
account.

Access grants run in periods, not wall-clock time: every grant or renewal
adds ACCESS_PERIODS periods of access. Payments must match the quote
exactly; underpayment and overpayment are both rejected so that value
conservation stays trivial to audit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterator

from .chain import ADD_DATA_REQUESTER, Address, NULL_ADDRESS, RENEW_TOKEN
from .errors import (
    AlreadyBurnedError,
    ComplianceRequiredError,
    DestroyedError,
    DuplicateTokenError,
    ExcessPaymentError,
    ExpiredError,
    InsufficientPaymentError,
    LicenseMismatchError,
    NoTokenError,
    NotPublishedError,
)

if TYPE_CHECKING:  # only for annotations; avoids a circular import
    from .dataset import DatasetContract

ACCESS_PERIODS = 2


class BurnCause(Enum):
    REQUESTER = "requester"
    LICENSE_CHANGE = "licenseChange"


@dataclass(slots=True)
class AccessToken:
    token_id: int
    dataset_address: Address
    owner: Address
    user: Address
    license_code: int
    minted_period: int
    access_until: int
    compliance: bool = True
    burned: bool = False
    remaining_at_burn: int = 0


@dataclass(frozen=True, slots=True)
class PaymentQuote:
    """What a requester owes now, and what the next requester would owe."""

    current_expected_cost_wei: int
    next_expected_cost_wei: int


@dataclass(frozen=True, slots=True)
class TokenEvent:
    """Audit-trail entry: mint, renewal, compliance and burn history."""

    kind: str
    period: int
    token_id: int
    user: Address


class TokenStore:
    """All tokens of a run; token ids are unique and never reused."""

    def __init__(self) -> None:
        self.tokens: dict[int, AccessToken] = {}
        self.events: list[TokenEvent] = []
        self._live: dict[tuple[Address, Address], int] = {}
        self._next_id = 1

    def mint(
        self,
        dataset_address: Address,
        owner: Address,
        user: Address,
        license_code: int,
        period: int,
    ) -> AccessToken:
        key = (dataset_address, user)
        if key in self._live:
            raise DuplicateTokenError(f"{user} already holds a live token for {dataset_address}")
        token = AccessToken(
            token_id=self._next_id,
            dataset_address=dataset_address,
            owner=owner,
            user=user,
            license_code=license_code,
            minted_period=period,
            access_until=period + ACCESS_PERIODS,
        )
        self._next_id += 1
        self.tokens[token.token_id] = token
        self._live[key] = token.token_id
        self.record("minted", period, token.token_id, user)
        return token

    def live_token(self, dataset_address: Address, user: Address) -> AccessToken | None:
        token_id = self._live.get((dataset_address, user))
        return self.tokens[token_id] if token_id is not None else None

    def live_tokens(self) -> Iterator[AccessToken]:
        # Mint order equals id order; deterministic iteration matters for
        # reproducible engine runs.
        for token_id in sorted(self._live.values()):
            yield self.tokens[token_id]

    def drop_live(self, token: AccessToken) -> None:
        self._live.pop((token.dataset_address, token.user), None)

    def record(self, kind: str, period: int, token_id: int, user: Address) -> None:
        self.events.append(TokenEvent(kind, period, token_id, user))

    def invalidate_compliance(self, token_ids: list[int], period: int) -> None:
        for token_id in token_ids:
            token = self.tokens[token_id]
            token.compliance = False
            self.record("updateNotice", period, token_id, token.user)

    def table_csv(self) -> str:
        lines = ["tokenId,dataset,user,mintedPeriod,accessUntil,compliance,burned,remainingAtBurn"]
        for token_id in sorted(self.tokens):
            t = self.tokens[token_id]
            lines.append(
                f"{t.token_id},{t.dataset_address.id},{t.user.id},{t.minted_period},"
                f"{t.access_until},{t.compliance},{t.burned},{t.remaining_at_burn}"
            )
        return "\n".join(lines) + "\n"


def _ceil_div(numerator: int, denominator: int) -> int:
    return -(-numerator // denominator)


def quote_payment(c: "DatasetContract", kind: str) -> PaymentQuote:
    """Quote the cost-sharing payment for an access request or a renewal.

    Rounds up to the next wei so that repeated payments against a fixed
    cost always terminate at exactly zero.
    """
    if c.destroyed:
        raise DestroyedError(f"{c.contract_address} is destroyed")
    if kind == "access":
        fraction_pct = c.access_fraction_pct
    elif kind == "renewal":
        fraction_pct = c.renew_fraction_pct
    else:
        raise ValueError(f"unknown quote kind {kind!r}")
    if not c.compensates_requesters:
        return PaymentQuote(0, 0)
    payment = _ceil_div(c.current_cost_wei * fraction_pct, 100)
    next_payment = _ceil_div((c.current_cost_wei - payment) * fraction_pct, 100)
    return PaymentQuote(payment, next_payment)


def _check_value(quote_wei: int, value_wei: int) -> None:
    if value_wei < quote_wei:
        raise InsufficientPaymentError(f"quoted {quote_wei} wei, got {value_wei}")
    if value_wei > quote_wei:
        raise ExcessPaymentError(f"quoted {quote_wei} wei, got {value_wei}; no refunds")


def request_access(requester: Address, c: "DatasetContract", value_wei: int) -> AccessToken:
    """Mint an access token against the quoted payment."""
    if c.destroyed:
        raise DestroyedError(f"{c.contract_address} is destroyed")
    if not c.published:
        raise NotPublishedError(f"{c.contract_address} has no published data")
    if c.token_store.live_token(c.contract_address, requester) is not None:
        raise DuplicateTokenError(f"{requester} already holds a token for {c.contract_address}")
    if not c.registry.check_user(requester, c.required_license):
        raise LicenseMismatchError(f"{requester} lacks license {c.required_license}")
    quote = quote_payment(c, "access").current_expected_cost_wei
    _check_value(quote, value_wei)
    c.chain.execute(
        requester,
        ADD_DATA_REQUESTER,
        value_wei=value_wei,
        recipient=c.contract_address if value_wei > 0 else None,
    )
    token = c.token_store.mint(
        c.contract_address, c.owner, requester, c.required_license, c.chain.period
    )
    c.active_token_ids.add(token.token_id)
    c.apply_payment(value_wei)
    return token


def renew_access_time(requester: Address, c: "DatasetContract", value_wei: int) -> AccessToken:
    """Extend a held token by ACCESS_PERIODS against the quoted payment."""
    if c.destroyed:
        raise DestroyedError(f"{c.contract_address} is destroyed")
    token = c.token_store.live_token(c.contract_address, requester)
    if token is None:
        raise NoTokenError(f"{requester} holds no token for {c.contract_address}")
    if not token.compliance:
        raise ComplianceRequiredError(f"{requester} must confirm compliance before renewing")
    quote = quote_payment(c, "renewal").current_expected_cost_wei
    _check_value(quote, value_wei)
    c.chain.execute(
        requester,
        RENEW_TOKEN,
        value_wei=value_wei,
        recipient=c.contract_address if value_wei > 0 else None,
    )
    # An expired token restarts from now, an unexpired one stacks on top.
    token.access_until = max(c.chain.period, token.access_until) + ACCESS_PERIODS
    c.apply_payment(value_wei)
    c.token_store.record("renewed", c.chain.period, token.token_id, requester)
    return token


def confirm_compliance(requester: Address, c: "DatasetContract") -> AccessToken:
    """Record that the holder applied the latest update; free of gas."""
    if c.destroyed:
        raise DestroyedError(f"{c.contract_address} is destroyed")
    token = c.token_store.live_token(c.contract_address, requester)
    if token is None:
        raise NoTokenError(f"{requester} holds no token for {c.contract_address}")
    token.compliance = True
    c.token_store.record("complianceConfirmed", c.chain.period, token.token_id, requester)
    return token


def get_link(requester: Address, c: "DatasetContract") -> str:
    """Hand out the data locator to a holder with unexpired access."""
    if c.destroyed:
        raise DestroyedError(f"{c.contract_address} is destroyed")
    token = c.token_store.live_token(c.contract_address, requester)
    if token is None:
        raise NoTokenError(f"{requester} holds no token for {c.contract_address}")
    if c.chain.period >= token.access_until:
        raise ExpiredError(f"token {token.token_id} expired at period {token.access_until}")
    return c.link


def burn_token(c: "DatasetContract", token: AccessToken, cause: BurnCause) -> None:
    """Retire a token; free of gas.

    A requester-initiated burn certifies the holder destroyed their copy,
    so compliance ends true; a license-change burn evicts the holder with
    compliance false until they react.
    """
    if token.burned:
        raise AlreadyBurnedError(f"token {token.token_id} is already burned")
    period = c.chain.period
    holder = token.user
    token.remaining_at_burn = max(0, token.access_until - period)
    token.burned = True
    token.compliance = cause is BurnCause.REQUESTER
    c.token_store.drop_live(token)
    token.user = NULL_ADDRESS
    c.active_token_ids.discard(token.token_id)
    c.token_store.record("burnNotice", period, token.token_id, holder)
