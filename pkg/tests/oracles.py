"""Independent brute-force oracles used only by the test suite.

These deliberately avoid the library's incremental algorithms: welfare
maximization is exhaustive enumeration over every partial slot assignment,
and slot prices are recomputed from scratch off the final allocation
structure. Exponential, so desk scale only.
"""
from __future__ import annotations

from fractions import Fraction
from itertools import combinations, permutations

from mixauction.core import AuctionInstance, BidderClass, Outcome


def enumerate_lsw(instance: AuctionInstance):
    """Yield the welfare of every injective partial assignment of slots."""
    n = instance.n
    K = instance.slot_count
    slots = range(1, K + 1)
    for size in range(0, min(n, K) + 1):
        for slot_subset in combinations(slots, size):
            for bidders in permutations(range(n), size):
                yield sum(
                    (
                        instance.value_of(b) * instance.ladder.ctr(k)
                        for k, b in zip(slot_subset, bidders)
                    ),
                    Fraction(0),
                )


def brute_force_max_lsw(instance: AuctionInstance) -> Fraction:
    """The maximum welfare over all allocations, by exhaustive search."""
    return max(enumerate_lsw(instance))


def recompute_slot_prices(outcome: Outcome, instance: AuctionInstance) -> dict[int, Fraction]:
    """Slot prices derived bottom-up from the final allocation only.

    For each slot, takes the maximum of the closest lower UM's extended
    price and the closest lower VM's value, grounding the recursion at the
    bottom of the ladder. Never consults the outcome's stored prices."""
    ladder = instance.ladder
    prices: dict[int, Fraction] = {}
    for k in range(1, ladder.slot_count + 1):
        um_term = Fraction(0)
        vm_term = Fraction(0)
        um_found = vm_found = False
        for j in range(k - 1, -1, -1):
            occupant = outcome.allocation.pi.get(j)
            if occupant is None:
                continue
            value = instance.value_of(occupant)
            cls = instance.class_of(occupant)
            if cls is BidderClass.VM and not vm_found:
                vm_term = value
                vm_found = True
            if cls is BidderClass.UM and not um_found:
                base = prices[j] * ladder.ctr(j) if j >= 1 else Fraction(0)
                um_term = (base + value * (ladder.ctr(k) - ladder.ctr(j))) / ladder.ctr(k)
                um_found = True
            if um_found and vm_found:
                break
        prices[k] = max(um_term, vm_term)
    return prices
