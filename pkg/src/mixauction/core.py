"""Domain model for position auctions with a mixed bidder population.

Slots are indexed bottom-up: slot 1 has the lowest click-through rate (CTR)
and slot K the highest. A virtual dummy slot 0 with CTR zero sits below the
ladder and anchors every price recursion. Two bidder behaviours coexist:

* utility maximizers (UM), who optimize ``ctr * (value - price)``;
* value maximizers (VM), who lexicographically prefer feasible outcomes
  (per-click price <= per-click value), then a higher obtained value, then
  a lower total payment.

Every monetary quantity and CTR is an exact rational
(:class:`fractions.Fraction`). No float ever enters a computation, so
equality-based checks (for example "the marginal price equals the bidder's
value") are meaningful rather than tolerance games.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import total_ordering
from typing import Mapping, Optional, Union

Rational = Fraction

RationalLike = Union[Fraction, int, str]

__all__ = [
    "Rational",
    "RationalLike",
    "as_rational",
    "AuctionError",
    "InvalidInstanceError",
    "DegeneratePairError",
    "ProtocolError",
    "InvalidConfigError",
    "ParseError",
    "GenerationError",
    "BidderClass",
    "BidderType",
    "SlotLadder",
    "AuctionInstance",
    "Allocation",
    "Outcome",
    "VmPreference",
    "lsw",
    "optimal_allocation",
    "um_utility",
    "vm_preference",
    "marginal_payment_increase",
]


class AuctionError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInstanceError(AuctionError, ValueError):
    """An instance, allocation, or outcome violates a structural requirement."""


class DegeneratePairError(AuctionError, ValueError):
    """A marginal-price quantity was requested for two slots with equal CTRs."""


class ProtocolError(AuctionError, RuntimeError):
    """An incremental pricing operation was invoked out of order."""


class InvalidConfigError(AuctionError, ValueError):
    """A configuration parameter is out of its documented range."""


class ParseError(AuctionError, ValueError):
    """Serialized input could not be decoded into a valid object."""


class GenerationError(AuctionError, RuntimeError):
    """The random generator cannot satisfy its constraints."""


def as_rational(x: RationalLike) -> Fraction:
    """Coerce an int, Fraction, or string ("23/3", "0.1") to an exact Fraction.

    Floats are rejected outright: a binary float like 0.1 is not the rational
    1/10, and letting it slip through would silently poison exactness.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool) or isinstance(x, float):
        raise TypeError(f"refusing inexact/boolean value {x!r}; pass int, str, or Fraction")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"not a rational number: {x!r}") from exc
    raise TypeError(f"cannot interpret {type(x).__name__} as a rational")


class BidderClass(Enum):
    """The two bidder behaviours."""

    UM = "UM"
    VM = "VM"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class BidderType:
    """A bidder's declared type: per-click value and behavioural class."""

    value: Fraction
    bidder_class: BidderClass

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", as_rational(self.value))
        if not isinstance(self.bidder_class, BidderClass):
            raise InvalidInstanceError(f"bidder_class must be a BidderClass, got {self.bidder_class!r}")
        if self.value <= 0:
            raise InvalidInstanceError(f"bidder value must be positive, got {self.value}")

    @classmethod
    def um(cls, value: RationalLike) -> "BidderType":
        return cls(as_rational(value), BidderClass.UM)

    @classmethod
    def vm(cls, value: RationalLike) -> "BidderType":
        return cls(as_rational(value), BidderClass.VM)


@dataclass(frozen=True)
class SlotLadder:
    """The CTR ladder x_1 <= x_2 <= ... <= x_K, indexed bottom-up.

    The dummy slot 0 (CTR 0) is never stored; :meth:`ctr` synthesizes it.
    An empty ladder (no slots) is allowed so degenerate sweeps do not crash.
    """

    ctrs: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        coerced = tuple(as_rational(x) for x in self.ctrs)
        object.__setattr__(self, "ctrs", coerced)
        for i, x in enumerate(coerced):
            if x <= 0:
                raise InvalidInstanceError(f"ctr of slot {i + 1} must be positive, got {x}")
            if i > 0 and x < coerced[i - 1]:
                raise InvalidInstanceError(
                    f"ctrs must be non-decreasing bottom-up; slot {i + 1} has {x} < {coerced[i - 1]}"
                )

    @property
    def slot_count(self) -> int:
        return len(self.ctrs)

    @property
    def strictly_increasing(self) -> bool:
        return all(a < b for a, b in zip(self.ctrs, self.ctrs[1:]))

    def ctr(self, k: int) -> Fraction:
        """CTR of slot ``k``; slot 0 is the dummy slot with CTR 0."""
        if k == 0:
            return Fraction(0)
        if 1 <= k <= len(self.ctrs):
            return self.ctrs[k - 1]
        raise InvalidInstanceError(f"slot {k} outside ladder 0..{len(self.ctrs)}")


@dataclass(frozen=True)
class AuctionInstance:
    """A slot ladder plus the declared type of every bidder.

    Bidder ids are positions in ``bidders``. ``seed`` is provenance metadata
    recorded by the generator; it never influences any computation.
    """

    ladder: SlotLadder
    bidders: tuple[BidderType, ...]
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "bidders", tuple(self.bidders))
        if len(self.bidders) < 1:
            raise InvalidInstanceError("an instance needs at least one bidder")
        for b in self.bidders:
            if not isinstance(b, BidderType):
                raise InvalidInstanceError(f"bidders must be BidderType, got {b!r}")

    @property
    def n(self) -> int:
        return len(self.bidders)

    @property
    def slot_count(self) -> int:
        return self.ladder.slot_count

    @property
    def values(self) -> tuple[Fraction, ...]:
        return tuple(b.value for b in self.bidders)

    @property
    def strict(self) -> bool:
        """True when all declared values are pairwise distinct."""
        vals = self.values
        return len(set(vals)) == len(vals)

    def value_of(self, bidder_id: int) -> Fraction:
        return self.bidders[bidder_id].value

    def class_of(self, bidder_id: int) -> BidderClass:
        return self.bidders[bidder_id].bidder_class

    def homogeneous_class(self) -> Optional[BidderClass]:
        """The single class shared by every bidder, or None for mixed instances."""
        classes = {b.bidder_class for b in self.bidders}
        if len(classes) == 1:
            return next(iter(classes))
        return None

    def with_bidder(self, bidder_id: int, declared: BidderType) -> "AuctionInstance":
        """A copy of the instance where ``bidder_id`` declares ``declared``."""
        if not 0 <= bidder_id < self.n:
            raise InvalidInstanceError(f"unknown bidder id {bidder_id}")
        bidders = list(self.bidders)
        bidders[bidder_id] = declared
        return AuctionInstance(self.ladder, tuple(bidders), self.seed)


@dataclass(frozen=True)
class Allocation:
    """A slot -> bidder assignment.

    ``pi`` maps slot k (0 = dummy slot, 1..K real slots) to a bidder id.
    Slots may be absent (unfilled). No bidder occupies two slots.
    """

    pi: Mapping[int, int]
    by_bidder: Mapping[int, int] = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        pi = dict(self.pi)
        object.__setattr__(self, "pi", pi)
        inverse: dict[int, int] = {}
        for slot, bidder in pi.items():
            if not isinstance(slot, int) or slot < 0:
                raise InvalidInstanceError(f"bad slot index {slot!r}")
            if not isinstance(bidder, int) or bidder < 0:
                raise InvalidInstanceError(f"bad bidder id {bidder!r} at slot {slot}")
            if bidder in inverse:
                raise InvalidInstanceError(f"bidder {bidder} assigned to two slots")
            inverse[bidder] = slot
        object.__setattr__(self, "by_bidder", inverse)

    def slot_of(self, bidder_id: int) -> Optional[int]:
        """The slot held by ``bidder_id`` (0 for the dummy slot), or None."""
        return self.by_bidder.get(bidder_id)

    def occupant(self, slot: int) -> Optional[int]:
        return self.pi.get(slot)


@dataclass(frozen=True)
class Outcome:
    """The result of running a mechanism: allocation, slot prices, payments.

    ``slot_prices`` carries a per-click price for every real slot 1..K, even
    slots left unoccupied, so downstream verification never re-derives a
    price. ``payments`` covers every bidder (0 when unassigned or at the
    dummy slot) and agrees with the occupied slot's price by construction.
    """

    allocation: Allocation
    slot_prices: Mapping[int, Fraction]
    payments: Mapping[int, Fraction]

    def __post_init__(self) -> None:
        object.__setattr__(self, "slot_prices", dict(self.slot_prices))
        object.__setattr__(self, "payments", dict(self.payments))
        for k, p in self.slot_prices.items():
            if p < 0:
                raise InvalidInstanceError(f"negative price {p} at slot {k}")
        for b, p in self.payments.items():
            if p < 0:
                raise InvalidInstanceError(f"negative payment {p} for bidder {b}")
        for slot, bidder in self.allocation.pi.items():
            if slot >= 1 and self.payments.get(bidder) != self.slot_prices.get(slot):
                raise InvalidInstanceError(
                    f"payment of bidder {bidder} disagrees with price of slot {slot}"
                )

    def slot_and_price(self, bidder_id: int) -> tuple[Optional[int], Fraction]:
        """Convenience: (slot or None, per-click payment) for one bidder."""
        return self.allocation.slot_of(bidder_id), self.payments.get(bidder_id, Fraction(0))


@total_ordering
@dataclass(frozen=True)
class VmPreference:
    """A value maximizer's lexicographic ranking of an outcome.

    Ordering: any feasible outcome beats any infeasible one; among feasible
    outcomes a higher obtained value wins; ties break toward a lower total
    payment. Comparison operators order by preference (greater = preferred).
    """

    feasible: bool
    obtained_value: Fraction
    total_payment: Fraction

    def preference_key(self) -> tuple[int, Fraction, Fraction]:
        return (1 if self.feasible else 0, self.obtained_value, -self.total_payment)

    def __lt__(self, other: "VmPreference") -> bool:
        if not isinstance(other, VmPreference):
            return NotImplemented
        return self.preference_key() < other.preference_key()


def lsw(instance: AuctionInstance, allocation: Allocation) -> Fraction:
    """Liquid social welfare of an allocation: sum of value * CTR over slots 1..K.

    Empty slots contribute nothing; the dummy slot has CTR 0 and never
    contributes. Raises :class:`InvalidInstanceError` when the allocation
    references a bidder or slot the instance does not have.
    """
    total = Fraction(0)
    for slot, bidder in allocation.pi.items():
        if bidder >= instance.n:
            raise InvalidInstanceError(f"allocation references unknown bidder {bidder}")
        if slot == 0:
            continue
        total += instance.value_of(bidder) * instance.ladder.ctr(slot)
    return total


def optimal_allocation(instance: AuctionInstance) -> Allocation:
    """The welfare-maximizing allocation: slots to bidders in value order.

    The top-K bidders by value occupy slots K (highest value) down to 1, and
    the (K+1)-th bidder, if any, takes the dummy slot 0. Because the CTR
    ladder is sorted, pairing larger values with larger CTRs maximizes the
    sum of value * CTR over all assignments (rearrangement inequality); the
    test suite confirms this against exhaustive enumeration.
    """
    K = instance.slot_count
    ranked = sorted(range(instance.n), key=lambda i: (-instance.value_of(i), i))
    pi: dict[int, int] = {}
    for offset, bidder in enumerate(ranked[:K]):
        pi[K - offset] = bidder
    if instance.n > K:
        pi[0] = ranked[K]
    return Allocation(pi)


def um_utility(value: RationalLike, ctr: RationalLike, price: RationalLike) -> Fraction:
    """Quasi-linear utility ctr * (value - price); 0 CTR means unassigned."""
    value, ctr, price = as_rational(value), as_rational(ctr), as_rational(price)
    if ctr < 0:
        raise InvalidInstanceError(f"ctr must be non-negative, got {ctr}")
    return ctr * (value - price)


def vm_preference(
    true_value: RationalLike, ctr: RationalLike, price: RationalLike
) -> VmPreference:
    """A value maximizer's ranking data for an outcome with the given terms."""
    true_value, ctr, price = as_rational(true_value), as_rational(ctr), as_rational(price)
    if ctr < 0:
        raise InvalidInstanceError(f"ctr must be non-negative, got {ctr}")
    return VmPreference(
        feasible=price <= true_value,
        obtained_value=true_value * ctr,
        total_payment=price * ctr,
    )


def marginal_payment_increase(
    outcome: Outcome, instance: AuctionInstance, k: int, k_prime: int
) -> Fraction:
    """Per-CTR-unit cost of climbing from slot ``k`` to slot ``k_prime``.

    Computed from the outcome's slot prices, which coincide with occupant
    payments wherever the slot is occupied. Slots with equal CTRs make the
    quantity undefined and raise :class:`DegeneratePairError`.
    """
    K = instance.slot_count
    if not (1 <= k < k_prime <= K):
        raise InvalidInstanceError(f"need 1 <= k < k' <= {K}, got k={k}, k'={k_prime}")
    x_lo = instance.ladder.ctr(k)
    x_hi = instance.ladder.ctr(k_prime)
    if x_hi == x_lo:
        raise DegeneratePairError(f"slots {k} and {k_prime} share ctr {x_lo}")
    p_lo = outcome.slot_prices[k]
    p_hi = outcome.slot_prices[k_prime]
    return (p_hi * x_hi - p_lo * x_lo) / (x_hi - x_lo)
