"""Four deterministic position-auction mechanisms.

* ``run_vcg``  — value-ordered allocation, externality (VCG) payments.
* ``run_gsp``  — value-ordered allocation, next-lower-value (GSP) payments.
* ``run_mpu``  — value-ordered allocation; UMs pay the VCG price, VMs the GSP
  price. Sound when bidder classes are public knowledge.
* ``run_mpr``  — the hybrid rule for private classes. Slots, not bidders,
  carry prices: each slot charges the maximum of a VCG-style term induced by
  the closest utility maximizer below it and the value of the closest value
  maximizer below it. VMs fill the bottom slots in ascending value order,
  then UMs are inserted one by one (lowest value first) at their
  utility-maximizing slot, shifting occupants up and re-pricing the slots
  above the insertion point.

Ties in declared values rank the lower bidder id higher, and the same
convention is carried consistently through the private-class insertion loop:
tied values behave exactly like the limit of distinct values, with the lower
id infinitesimally larger. Concretely, ``run_mpr`` first runs on plain
rationals; if some slot choice ties, it re-runs with each declared value
carrying a symbolic infinitesimal bump ordered by bidder id, which resolves
every value-induced tie the way an arbitrarily small real separation would.
Only genuinely valueless ties remain (equal CTRs making two slots truly
indistinguishable), and those go to the lowest slot. Reported prices are
always the plain rational parts.

When there are at most K bidders, the roster is padded internally with
virtual value-0 VMs (ids >= instance.n) so the dummy slot and every price
term stay well-defined; virtual bidders never appear in the returned
outcome. A zero-value VM contributes a zero price term, which is exactly the
"no bidder below" convention.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Mapping, Sequence

from .core import (
    Allocation,
    AuctionInstance,
    BidderClass,
    InvalidInstanceError,
    Outcome,
    ProtocolError,
    SlotLadder,
)

__all__ = [
    "MechanismId",
    "PartialState",
    "run_vcg",
    "run_gsp",
    "run_mpu",
    "run_mpr",
    "run_mechanism",
    "slot_price",
    "best_slot_for_um",
]

_ZERO = Fraction(0)


class MechanismId(Enum):
    """Dispatch key for the verification harness and the CLI."""

    VCG = "VCG"
    GSP = "GSP"
    MPU = "MPU"
    MPR = "MPR"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def from_label(cls, label: str) -> "MechanismId":
        try:
            return cls[label.strip().upper()]
        except KeyError:
            raise InvalidInstanceError(f"unknown mechanism {label!r}") from None


@dataclass
class PartialState:
    """Mutable snapshot of an in-progress hybrid (private-class) run.

    ``assigned`` maps slot -> bidder id for a contiguous bottom block of
    slots (the dummy slot 0 may be present or absent). ``slot_prices`` holds
    the per-click prices computed so far. Ids >= the instance's bidder count
    denote internal virtual value-0 VM placeholders.
    """

    assigned: dict[int, int]
    slot_prices: dict[int, Fraction]
    remaining_ums: tuple[int, ...] = ()


class _Perturbed:
    """A rational plus a vector of nested symbolic infinitesimals.

    ``std + sum(coeff_i * eta_i)`` where eta_0 >> eta_1 >> ... > 0 are
    infinitely small: comparisons order by the rational part, then by the
    coefficient of the smallest-index eta that differs. Declared values are
    seeded with ``eta_{bidder id}``, so tied values compare exactly as
    slightly-separated distinct values would (lower id larger). Only the
    affine operations the pricing recursion needs are implemented.
    """

    __slots__ = ("std", "eta")

    def __init__(self, std: Fraction, eta: tuple = ()) -> None:
        self.std = std
        self.eta = eta  # sorted (index, coeff) pairs, no zero coeffs

    def __add__(self, other: "_Perturbed") -> "_Perturbed":
        return _Perturbed(self.std + other.std, _merge_eta(self.eta, other.eta, 1))

    def __sub__(self, other: "_Perturbed") -> "_Perturbed":
        return _Perturbed(self.std - other.std, _merge_eta(self.eta, other.eta, -1))

    def scaled(self, factor: Fraction) -> "_Perturbed":
        if not factor:
            return _Perturbed(_ZERO)
        return _Perturbed(
            self.std * factor, tuple((i, c * factor) for i, c in self.eta)
        )

    def divided(self, divisor: Fraction) -> "_Perturbed":
        return _Perturbed(
            self.std / divisor, tuple((i, c / divisor) for i, c in self.eta)
        )

    def _cmp(self, other: "_Perturbed") -> int:
        if self.std != other.std:
            return 1 if self.std > other.std else -1
        a, b = self.eta, other.eta
        i = j = 0
        while i < len(a) or j < len(b):
            ai = a[i][0] if i < len(a) else None
            bj = b[j][0] if j < len(b) else None
            if bj is None or (ai is not None and ai < bj):
                coeff, i = a[i][1], i + 1
                if coeff:
                    return 1 if coeff > 0 else -1
            elif ai is None or bj < ai:
                coeff, j = b[j][1], j + 1
                if coeff:
                    return -1 if coeff > 0 else 1
            else:
                diff = a[i][1] - b[j][1]
                i += 1
                j += 1
                if diff:
                    return 1 if diff > 0 else -1
        return 0

    def __eq__(self, other) -> bool:
        return isinstance(other, _Perturbed) and self._cmp(other) == 0

    def __gt__(self, other: "_Perturbed") -> bool:
        return self._cmp(other) > 0

    def __ge__(self, other: "_Perturbed") -> bool:
        return self._cmp(other) >= 0

    def __hash__(self):
        return hash((self.std, self.eta))


def _merge_eta(a: tuple, b: tuple, sign: int) -> tuple:
    if not b:
        return a
    if not a:
        return b if sign == 1 else tuple((i, -c) for i, c in b)
    merged = dict(a)
    for i, c in b:
        c = merged.get(i, _ZERO) + (c if sign == 1 else -c)
        if c:
            merged[i] = c
        else:
            merged.pop(i, None)
    return tuple(sorted(merged.items()))


def _scaled(value, factor: Fraction):
    return value.scaled(factor) if isinstance(value, _Perturbed) else value * factor


def _divided(value, divisor: Fraction):
    return value.divided(divisor) if isinstance(value, _Perturbed) else value / divisor


def _occupant_value_class(
    instance: AuctionInstance, bidder_id: int
) -> tuple[Fraction, BidderClass]:
    if bidder_id < instance.n:
        b = instance.bidders[bidder_id]
        return b.value, b.bidder_class
    return _ZERO, BidderClass.VM  # virtual padding bidder


def _price_slot(ladder, assigned, values, classes, prices, k, zero):
    """Generic max-of-two-anchors price for slot ``k``.

    Works over plain Fractions or perturbed numbers: ``values`` lists one
    number per (possibly padded) bidder id, ``prices`` the numbers computed
    for lower slots.
    """
    um_term = zero
    vm_term = zero
    um_found = vm_found = False
    x_k = ladder.ctr(k)
    for j in range(k - 1, -1, -1):
        occupant = assigned.get(j)
        if occupant is None:
            continue  # only the dummy slot can be empty
        if classes[occupant] is BidderClass.VM:
            if not vm_found:
                vm_term = values[occupant]
                vm_found = True
        elif not um_found:
            base = _scaled(prices[j], ladder.ctr(j)) if j >= 1 else zero
            extension = _scaled(values[occupant], x_k - ladder.ctr(j))
            um_term = _divided(base + extension, x_k)
            um_found = True
        if um_found and vm_found:
            break
    return um_term if um_term >= vm_term else vm_term


def slot_price(state: PartialState, instance: AuctionInstance, k: int) -> Fraction:
    """Price of slot ``k`` given the bidders currently assigned below it.

    Returns max of:

    * the VCG-style term from the closest UM below ``k`` — her slot's price
      extended upward at her own value per unit of CTR;
    * the value of the closest VM below ``k``.

    Either term is 0 when no such bidder exists. All slots 1..k-1 must be
    assigned (slot 0 may legitimately be empty), and the closest UM's slot
    must already be priced; otherwise the caller broke the bottom-up
    protocol and gets a :class:`ProtocolError`.
    """
    ladder = instance.ladder
    if not 1 <= k <= ladder.slot_count:
        raise ProtocolError(f"slot {k} outside ladder 1..{ladder.slot_count}")
    assigned = state.assigned
    for j in range(1, k):
        if j not in assigned:
            raise ProtocolError(f"cannot price slot {k}: slot {j} below it is unassigned")
    roster = max([instance.n] + [i + 1 for i in assigned.values()])
    values = [_occupant_value_class(instance, i)[0] for i in range(roster)]
    classes = [_occupant_value_class(instance, i)[1] for i in range(roster)]
    for j in range(k - 1, 0, -1):
        occupant = assigned[j]
        if classes[occupant] is BidderClass.UM:
            if j not in state.slot_prices:
                raise ProtocolError(
                    f"cannot price slot {k}: slot {j} of the closest UM is unpriced"
                )
            break
    return _price_slot(ladder, assigned, values, classes, state.slot_prices, k, _ZERO)


def _argmax_slot(ladder, value, prices, k_bar):
    """Lowest slot in 1..k_bar maximizing ctr * (value - price).

    Returns (slot, tied): ``tied`` reports whether any other slot achieved
    exactly the winning utility, which triggers the perturbed re-run.
    """
    best_slot = 0
    best_utility = None
    tied = False
    for k in range(1, k_bar + 1):
        if k not in prices:
            raise ProtocolError(f"slot {k} is unpriced but within the choice range")
        utility = _scaled(value - prices[k], ladder.ctr(k))
        if best_utility is None or utility > best_utility:
            best_utility = utility
            best_slot = k
        elif utility == best_utility:
            tied = True
    return best_slot, tied


def best_slot_for_um(
    ladder: SlotLadder,
    value: Fraction,
    prices: Mapping[int, Fraction],
    k_bar: int,
) -> int:
    """The lowest slot in 1..k_bar maximizing ctr * (value - price)."""
    if k_bar < 1 or k_bar > ladder.slot_count:
        raise ProtocolError(f"k_bar {k_bar} outside ladder 1..{ladder.slot_count}")
    return _argmax_slot(ladder, value, prices, k_bar)[0]


def _ranking(values: Sequence[Fraction]) -> list[int]:
    """Ids sorted by descending value; equal values rank the lower id higher."""
    return sorted(range(len(values)), key=lambda i: (-values[i], i))


def _rank_allocation(instance: AuctionInstance) -> dict[int, int]:
    """Slots K..1 to the top-K bidders by value, dummy slot to the (K+1)-th."""
    K = instance.slot_count
    if K == 0:
        return {}
    ranked = _ranking(instance.values)
    pi: dict[int, int] = {}
    for offset, bidder in enumerate(ranked[:K]):
        pi[K - offset] = bidder
    if instance.n > K:
        pi[0] = ranked[K]
    return pi


def _vcg_slot_prices(instance: AuctionInstance, pi: Mapping[int, int]) -> dict[int, Fraction]:
    """Per-click VCG price for every slot: the displaced welfare below it.

    price(k) * x_k accumulates value-of-occupant * CTR-step over all slots
    under k; empty slots contribute 0.
    """
    ladder = instance.ladder
    prices: dict[int, Fraction] = {}
    acc = _ZERO
    prev_ctr = _ZERO
    for k in range(1, ladder.slot_count + 1):
        below = pi.get(k - 1)
        below_value = instance.value_of(below) if below is not None else _ZERO
        x_k = ladder.ctr(k)
        acc += below_value * (x_k - prev_ctr)
        prices[k] = acc / x_k
        prev_ctr = x_k
    return prices


def _gsp_slot_prices(instance: AuctionInstance, pi: Mapping[int, int]) -> dict[int, Fraction]:
    """Per-click GSP price for every slot: the value declared just below it."""
    prices: dict[int, Fraction] = {}
    for k in range(1, instance.slot_count + 1):
        below = pi.get(k - 1)
        prices[k] = instance.value_of(below) if below is not None else _ZERO
    return prices


def _outcome(
    instance: AuctionInstance, pi: dict[int, int], prices: dict[int, Fraction]
) -> Outcome:
    payments = {i: _ZERO for i in range(instance.n)}
    for k, bidder in pi.items():
        if k >= 1:
            payments[bidder] = prices[k]
    return Outcome(Allocation(pi), prices, payments)


def run_vcg(instance: AuctionInstance) -> Outcome:
    """Value-ordered allocation with externality payments."""
    pi = _rank_allocation(instance)
    return _outcome(instance, pi, _vcg_slot_prices(instance, pi))


def run_gsp(instance: AuctionInstance) -> Outcome:
    """Value-ordered allocation; each slot charges the next value below it."""
    pi = _rank_allocation(instance)
    return _outcome(instance, pi, _gsp_slot_prices(instance, pi))


def run_mpu(instance: AuctionInstance) -> Outcome:
    """Hybrid rule for public classes: VCG prices for UMs, GSP prices for VMs.

    The allocation is identical to :func:`run_vcg` / :func:`run_gsp`; only
    the payment branch depends on the occupant's declared class. Unoccupied
    slots are priced 0.
    """
    pi = _rank_allocation(instance)
    vcg_prices = _vcg_slot_prices(instance, pi)
    gsp_prices = _gsp_slot_prices(instance, pi)
    prices: dict[int, Fraction] = {}
    for k in range(1, instance.slot_count + 1):
        occupant = pi.get(k)
        if occupant is None:
            prices[k] = _ZERO
        elif instance.class_of(occupant) is BidderClass.UM:
            prices[k] = vcg_prices[k]
        else:
            prices[k] = gsp_prices[k]
    return _outcome(instance, pi, prices)


def _mpr_engine(ladder, plain_values, numbers, classes, zero):
    """One full private-class run over a number type.

    ``plain_values``/``classes`` describe the padded roster; ``numbers`` are
    the same values as either plain Fractions or perturbed numbers, and all
    pricing and slot-choice arithmetic happens in that type. Returns the
    final slot map, the slot-price numbers, and whether any slot choice hit
    an exact utility tie.
    """
    K = ladder.slot_count
    ranked = _ranking(plain_values)
    pi: dict[int, int] = {0: ranked[K]}
    ascending = list(reversed(ranked[:K]))
    vms = [i for i in ascending if classes[i] is BidderClass.VM]
    ums = [i for i in ascending if classes[i] is BidderClass.UM]
    for idx, bidder in enumerate(vms):
        pi[idx + 1] = bidder

    prices: dict[int, object] = {}
    for k in range(1, min(len(vms) + 1, K) + 1):
        prices[k] = _price_slot(ladder, pi, numbers, classes, prices, k, zero)

    saw_tie = False
    pending = list(ums)
    while pending:
        bidder = pending.pop(0)
        k_bar = K - len(pending)
        chosen, tied = _argmax_slot(ladder, numbers[bidder], prices, k_bar)
        saw_tie = saw_tie or tied
        if chosen != k_bar:
            for k in range(k_bar, chosen, -1):
                pi[k] = pi[k - 1]
        pi[chosen] = bidder
        for k in range(chosen + 1, min(k_bar + 1, K) + 1):
            prices[k] = _price_slot(ladder, pi, numbers, classes, prices, k, zero)
    return pi, prices, saw_tie


def run_mpr(instance: AuctionInstance) -> Outcome:
    """Hybrid rule for private classes: per-slot prices, bottom-up filling.

    1. Rank bidders by value; the top K enter, the (K+1)-th anchors the
       dummy slot. (The roster is padded with virtual value-0 VMs first when
       there are at most K bidders.)
    2. Place all entering VMs in the lowest slots, ascending by value, and
       price slots up to one above the filled block.
    3. Repeatedly take the cheapest remaining UM, insert her at the lowest
       slot maximizing her utility among slots 1..k_bar (k_bar = the slot
       just above all currently placed bidders), shift displaced occupants
       up one slot, and re-price every slot above the insertion point up to
       k_bar + 1.
    4. Each bidder pays her final slot's price; unassigned bidders pay 0.

    A slot-choice tie on plain rationals triggers a re-run with symbolic
    per-bidder infinitesimals (see the module docstring), so tied declared
    values resolve exactly like marginally distinct ones.
    """
    ladder = instance.ladder
    K = ladder.slot_count
    n = instance.n
    payments = {i: _ZERO for i in range(n)}
    if K == 0:
        return Outcome(Allocation({}), {}, payments)

    values = [b.value for b in instance.bidders]
    classes = [b.bidder_class for b in instance.bidders]
    if n <= K:
        for _ in range(n, K + 1):
            values.append(_ZERO)
            classes.append(BidderClass.VM)

    pi, prices, saw_tie = _mpr_engine(ladder, values, values, classes, _ZERO)
    if saw_tie:
        one = Fraction(1)
        perturbed = [_Perturbed(v, ((i, one),)) for i, v in enumerate(values)]
        pi, raw_prices, _ = _mpr_engine(ladder, values, perturbed, classes, _Perturbed(_ZERO))
        prices = {k: p.std for k, p in raw_prices.items()}

    for k in range(1, K + 1):
        bidder = pi[k]
        if bidder < n:
            payments[bidder] = prices[k]
    visible_pi = {k: b for k, b in pi.items() if b < n}
    return Outcome(Allocation(visible_pi), prices, payments)


_RUNNERS = {
    MechanismId.VCG: run_vcg,
    MechanismId.GSP: run_gsp,
    MechanismId.MPU: run_mpu,
    MechanismId.MPR: run_mpr,
}


def run_mechanism(mechanism: MechanismId, instance: AuctionInstance) -> Outcome:
    """Run the selected mechanism on an instance."""
    return _RUNNERS[mechanism](instance)
