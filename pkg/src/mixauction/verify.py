"""Empirical verification of the mechanisms' game-theoretic properties.

Everything here is falsification, not proof. The deviation search, in
particular, evaluates misreports over a finite critical set: mechanism
outcomes are piecewise-constant in a misreported value, with breakpoints at
the other bidders' values and at marginal-price indifference points, so
probing each breakpoint plus a small offset on either side visits every
region boundary. A uniform grid is added as a guard against implementation
bugs that would break piecewise-constancy. An empty result is evidence of
incentive compatibility, never a certificate.

Two deliberate semantics, recorded here because the preference model leaves
them open:

* A value maximizer's deviation counts as profitable only when the deviation
  outcome is feasible (price <= true value) and strictly preferred. Two
  infeasible outcomes are never compared.
* The marginal-price equality check treats any failure on a final
  private-class outcome as a bug and attaches both pricing terms of the slot
  above, so a disagreement is diagnosable.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

from .core import (
    Allocation,
    AuctionInstance,
    BidderClass,
    BidderType,
    DegeneratePairError,
    InvalidConfigError,
    InvalidInstanceError,
    Outcome,
    SlotLadder,
    VmPreference,
    as_rational,
    lsw,
    marginal_payment_increase,
    optimal_allocation,
    um_utility,
    vm_preference,
)
from .mechanisms import MechanismId, run_gsp, run_mechanism, run_mpr, run_mpu, run_vcg

__all__ = [
    "IrViolation",
    "DeviationReport",
    "RatioReport",
    "LemmaReport",
    "Theorem6Case",
    "Theorem6Report",
    "InstanceCheckResult",
    "check_ir",
    "critical_values",
    "check_ic",
    "check_robustness",
    "check_lemmas",
    "approximation_ratio",
    "theorem6_scenario",
    "run_checks",
]

_ZERO = Fraction(0)

Utility = Union[Fraction, VmPreference]


@dataclass(frozen=True)
class IrViolation:
    """A truthfully reporting bidder charged more per click than her value."""

    bidder_id: int
    slot: int
    price: Fraction
    value: Fraction


@dataclass(frozen=True)
class DeviationReport:
    """A found profitable misreport, judged under the bidder's true class."""

    bidder_id: int
    true_type: BidderType
    misreport: BidderType
    truthful_slot: Optional[int]
    truthful_price: Fraction
    deviation_slot: Optional[int]
    deviation_price: Fraction
    truthful_utility: Utility
    deviation_utility: Utility

    @property
    def truthful_outcome_summary(self) -> tuple[Optional[int], Fraction]:
        return (self.truthful_slot, self.truthful_price)

    @property
    def deviation_outcome_summary(self) -> tuple[Optional[int], Fraction]:
        return (self.deviation_slot, self.deviation_price)


@dataclass(frozen=True)
class RatioReport:
    """Welfare comparison of a mechanism run against the optimum."""

    lsw_mechanism: Fraction
    lsw_optimal: Fraction
    ratio: Fraction

    def __post_init__(self) -> None:
        if self.ratio < 1:
            raise InvalidInstanceError(
                f"welfare ratio below 1 ({self.ratio}): mechanism exceeded the optimum"
            )


@dataclass(frozen=True)
class LemmaReport:
    """Structural checks on a private-class outcome; empty tuples mean pass.

    * ``marginal_equality``  — every UM below the top slot has a climb-one
      marginal price exactly equal to her value.
    * ``same_class_order``   — within a class, value order matches slot order.
    * ``cross_class_order``  — a VM below a UM has the strictly smaller value.
    * ``marginal_dominance`` — every UM's marginal price to any higher slot
      is at least her value.
    """

    marginal_equality: tuple[dict, ...]
    same_class_order: tuple[dict, ...]
    cross_class_order: tuple[dict, ...]
    marginal_dominance: tuple[dict, ...]

    @property
    def passed(self) -> bool:
        return not (
            self.marginal_equality
            or self.same_class_order
            or self.cross_class_order
            or self.marginal_dominance
        )

    def failures_by_check(self) -> dict[str, tuple[dict, ...]]:
        return {
            "marginal_equality": self.marginal_equality,
            "same_class_order": self.same_class_order,
            "cross_class_order": self.cross_class_order,
            "marginal_dominance": self.marginal_dominance,
        }


@dataclass(frozen=True)
class Theorem6Case:
    """One probe-bidder configuration of the lower-bound scenario."""

    label: str
    probe_type: BidderType
    allocation: Allocation
    probe_slot: Optional[int]
    probe_payment: Fraction


@dataclass(frozen=True)
class Theorem6Report:
    """The two-slot, three-bidder family exhibiting the 5/4 impossibility.

    The two all-VM cases pin the probe bidder's payments p_h and p_l through
    the GSP-equivalence of the private-class rule; truthfulness of any
    mechanism with a welfare ratio below 5/4 would force
    2 * p_h - p_l <= 4, yet the reported constraint_lhs equals 4 + epsilon.
    """

    epsilon: Fraction
    cases: tuple[Theorem6Case, ...]
    p_h: Fraction
    p_l: Fraction
    constraint_lhs: Fraction
    ratio_case1: Fraction


def _require_strict(instance: AuctionInstance) -> None:
    if not instance.strict:
        raise InvalidInstanceError(
            "verification requires pairwise-distinct values (strict instance)"
        )


def check_ir(mechanism: MechanismId, instance: AuctionInstance) -> tuple[IrViolation, ...]:
    """All assigned bidders charged above their declared value under truth."""
    _require_strict(instance)
    outcome = run_mechanism(mechanism, instance)
    violations = []
    for slot in sorted(k for k in outcome.allocation.pi if k >= 1):
        bidder = outcome.allocation.pi[slot]
        price = outcome.slot_prices[slot]
        value = instance.value_of(bidder)
        if price > value:
            violations.append(IrViolation(bidder, slot, price, value))
    return tuple(violations)


def _marginal_values(outcome: Outcome, instance: AuctionInstance) -> list[Fraction]:
    """Climb prices between every CTR-distinct slot pair of an outcome."""
    K = instance.slot_count
    out = []
    for k in range(1, K + 1):
        for k_prime in range(k + 1, K + 1):
            if instance.ladder.ctr(k) == instance.ladder.ctr(k_prime):
                continue
            out.append(marginal_payment_increase(outcome, instance, k, k_prime))
    return out


def _default_delta(candidates: Sequence[Fraction]) -> Fraction:
    distinct = sorted(set(candidates))
    gaps = [b - a for a, b in zip(distinct, distinct[1:])]
    gap = min(gaps) if gaps else Fraction(1)
    return gap / 1000


def critical_values(
    instance: AuctionInstance,
    bidder_id: int,
    outcome: Outcome,
    delta: Optional[Fraction] = None,
    grid_points: int = 64,
) -> tuple[Fraction, ...]:
    """The misreport-value probe set for one bidder.

    Union of: every other bidder's value, each such value +/- delta, every
    marginal climb price of the truthful ``outcome``, each of those
    +/- delta, and a uniform grid of ``grid_points`` values over
    (0, max value + 1]. Non-positive candidates are dropped (a declared
    value must be positive). When ``delta`` is omitted it defaults to
    1/1000 of the smallest gap between distinct candidates.
    """
    if not 0 <= bidder_id < instance.n:
        raise InvalidInstanceError(f"unknown bidder id {bidder_id}")
    if delta is not None:
        delta = as_rational(delta)
        if delta <= 0:
            raise InvalidConfigError(f"delta must be positive, got {delta}")
    if grid_points < 0:
        raise InvalidConfigError(f"grid_points must be non-negative, got {grid_points}")

    others = [instance.value_of(j) for j in range(instance.n) if j != bidder_id]
    marginals = _marginal_values(outcome, instance)
    top = max(instance.values) + 1
    grid = [top * g / grid_points for g in range(1, grid_points + 1)]

    if delta is None:
        delta = _default_delta(others + marginals + grid)

    candidates: set[Fraction] = set(grid)
    for v in others + marginals:
        candidates.update((v, v - delta, v + delta))
    return tuple(sorted(c for c in candidates if c > 0))


def _utility_for(
    instance: AuctionInstance, bidder_id: int, true_type: BidderType, outcome: Outcome
) -> Utility:
    """The bidder's true-preference evaluation of an outcome."""
    slot, price = outcome.slot_and_price(bidder_id)
    ctr = instance.ladder.ctr(slot) if slot is not None else _ZERO
    if true_type.bidder_class is BidderClass.UM:
        return um_utility(true_type.value, ctr, price)
    return vm_preference(true_type.value, ctr, price)


def _is_improvement(true_type: BidderType, truthful: Utility, deviation: Utility) -> bool:
    if true_type.bidder_class is BidderClass.UM:
        return deviation > truthful
    # a deviation that busts the value cap is never an improvement
    return deviation.feasible and deviation.preference_key() > truthful.preference_key()


def check_ic(
    mechanism: MechanismId,
    instance: AuctionInstance,
    delta: Optional[Fraction] = None,
    grid_points: int = 64,
    allow_class_misreport: bool = True,
) -> tuple[DeviationReport, ...]:
    """Search for profitable unilateral misreports; empty means none found.

    For each bidder, every candidate value from :func:`critical_values`
    (plus her true value) is tried under each reportable class, the
    mechanism re-run, and the result compared with the truthful outcome
    under her TRUE preferences. Reports come out sorted by bidder id, then
    misreport value, then class label, so output is deterministic.
    """
    _require_strict(instance)
    if delta is not None:
        delta = as_rational(delta)
        if delta <= 0:
            raise InvalidConfigError(f"delta must be positive, got {delta}")

    truthful_outcome = run_mechanism(mechanism, instance)
    reports: list[DeviationReport] = []
    for bidder_id in range(instance.n):
        true_type = instance.bidders[bidder_id]
        truthful_slot, truthful_price = truthful_outcome.slot_and_price(bidder_id)
        truthful_utility = _utility_for(instance, bidder_id, true_type, truthful_outcome)

        probe_values = set(
            critical_values(instance, bidder_id, truthful_outcome, delta, grid_points)
        )
        probe_values.add(true_type.value)
        if allow_class_misreport:
            classes = (BidderClass.UM, BidderClass.VM)
        else:
            classes = (true_type.bidder_class,)

        for value in sorted(probe_values):
            for cls in classes:
                if value == true_type.value and cls is true_type.bidder_class:
                    continue
                misreport = BidderType(value, cls)
                deviated = run_mechanism(mechanism, instance.with_bidder(bidder_id, misreport))
                deviation_utility = _utility_for(instance, bidder_id, true_type, deviated)
                if _is_improvement(true_type, truthful_utility, deviation_utility):
                    deviation_slot, deviation_price = deviated.slot_and_price(bidder_id)
                    reports.append(
                        DeviationReport(
                            bidder_id=bidder_id,
                            true_type=true_type,
                            misreport=misreport,
                            truthful_slot=truthful_slot,
                            truthful_price=truthful_price,
                            deviation_slot=deviation_slot,
                            deviation_price=deviation_price,
                            truthful_utility=truthful_utility,
                            deviation_utility=deviation_utility,
                        )
                    )
    reports.sort(key=lambda r: (r.bidder_id, r.misreport.value, r.misreport.bidder_class.value))
    return tuple(reports)


def check_robustness(instance: AuctionInstance) -> tuple[bool, bool]:
    """Whether the hybrid mechanisms collapse to their homogeneous baselines.

    On an all-UM instance the baseline is the externality-payment rule; on
    an all-VM instance it is the next-value rule. Returns (private-class
    rule matches, public-class rule matches), comparing the allocation and
    every payment exactly. Mixed instances are rejected.
    """
    shared = instance.homogeneous_class()
    if shared is None:
        raise InvalidInstanceError("robustness is defined only for single-class instances")
    baseline = run_vcg(instance) if shared is BidderClass.UM else run_gsp(instance)

    def matches(candidate: Outcome) -> bool:
        return (
            candidate.allocation == baseline.allocation
            and candidate.payments == baseline.payments
        )

    return matches(run_mpr(instance)), matches(run_mpu(instance))


def _slot_pricing_terms(
    outcome: Outcome, instance: AuctionInstance, k: int
) -> dict[str, Optional[str]]:
    """Both pricing terms of slot ``k`` recomputed from the final structure.

    Diagnostic only: shows which branch of the max determined the price when
    the marginal-equality check fails.
    """
    ladder = instance.ladder
    um_term: Optional[Fraction] = None
    vm_term: Optional[Fraction] = None
    for j in range(k - 1, -1, -1):
        occupant = outcome.allocation.pi.get(j)
        if occupant is None:
            continue
        cls = instance.class_of(occupant)
        value = instance.value_of(occupant)
        if cls is BidderClass.VM and vm_term is None:
            vm_term = value
        if cls is BidderClass.UM and um_term is None:
            base = outcome.slot_prices[j] * ladder.ctr(j) if j >= 1 else _ZERO
            um_term = (base + value * (ladder.ctr(k) - ladder.ctr(j))) / ladder.ctr(k)
        if um_term is not None and vm_term is not None:
            break
    return {
        "um_term": None if um_term is None else str(um_term),
        "vm_term": None if vm_term is None else str(vm_term),
    }


def check_lemmas(outcome: Outcome, instance: AuctionInstance) -> LemmaReport:
    """Run the four structural checks on a private-class outcome.

    Requires a strict instance and a strictly increasing CTR ladder (equal
    CTRs make the marginal quantities undefined).
    """
    _require_strict(instance)
    if not instance.ladder.strictly_increasing:
        raise DegeneratePairError("lemma checks need a strictly increasing ctr ladder")

    K = instance.slot_count
    assigned = sorted(outcome.allocation.pi.items())  # includes the dummy slot
    um_slots = [
        k for k, b in assigned if k >= 1 and instance.class_of(b) is BidderClass.UM
    ]

    marginal_equality = []
    marginal_dominance = []
    for k in um_slots:
        value = instance.value_of(outcome.allocation.pi[k])
        if k < K:
            delta = marginal_payment_increase(outcome, instance, k, k + 1)
            if delta != value:
                marginal_equality.append(
                    {
                        "slot": k,
                        "bidder": outcome.allocation.pi[k],
                        "value": str(value),
                        "marginal": str(delta),
                        "pricing_terms_above": _slot_pricing_terms(outcome, instance, k + 1),
                    }
                )
        for k_prime in range(k + 1, K + 1):
            delta = marginal_payment_increase(outcome, instance, k, k_prime)
            if delta < value:
                marginal_dominance.append(
                    {
                        "slot": k,
                        "higher_slot": k_prime,
                        "bidder": outcome.allocation.pi[k],
                        "value": str(value),
                        "marginal": str(delta),
                    }
                )

    same_class_order = []
    cross_class_order = []
    for i_idx in range(len(assigned)):
        k_low, low = assigned[i_idx]
        for j_idx in range(i_idx + 1, len(assigned)):
            k_high, high = assigned[j_idx]
            v_low, v_high = instance.value_of(low), instance.value_of(high)
            c_low, c_high = instance.class_of(low), instance.class_of(high)
            if c_low is c_high:
                if v_low > v_high:
                    same_class_order.append(
                        {
                            "lower_slot": k_low,
                            "higher_slot": k_high,
                            "lower_bidder": low,
                            "higher_bidder": high,
                            "lower_value": str(v_low),
                            "higher_value": str(v_high),
                        }
                    )
            elif c_low is BidderClass.VM and c_high is BidderClass.UM:
                if v_low >= v_high:
                    cross_class_order.append(
                        {
                            "vm_slot": k_low,
                            "um_slot": k_high,
                            "vm_bidder": low,
                            "um_bidder": high,
                            "vm_value": str(v_low),
                            "um_value": str(v_high),
                        }
                    )

    return LemmaReport(
        marginal_equality=tuple(marginal_equality),
        same_class_order=tuple(same_class_order),
        cross_class_order=tuple(cross_class_order),
        marginal_dominance=tuple(marginal_dominance),
    )


def approximation_ratio(instance: AuctionInstance, mechanism: MechanismId) -> RatioReport:
    """Optimal welfare over achieved welfare (>= 1; 1 when both are zero)."""
    _require_strict(instance)
    optimal = lsw(instance, optimal_allocation(instance))
    outcome = run_mechanism(mechanism, instance)
    achieved = lsw(instance, outcome.allocation)
    if achieved == 0:
        if optimal != 0:
            raise AssertionError(
                "mechanism produced zero welfare against a positive optimum; "
                "these mechanisms always seat the top-ranked bidders"
            )
        return RatioReport(achieved, optimal, Fraction(1))
    return RatioReport(achieved, optimal, optimal / achieved)


_T6_CASE_SPECS = (
    ("case1", BidderType.um(4)),
    ("case2", BidderType.vm(4)),
    ("case3", BidderType.um(1)),
    ("case4", BidderType.vm(1)),
)


def theorem6_scenario(epsilon) -> Theorem6Report:
    """Build and run the four-case lower-bound family at a given epsilon.

    Two slots with CTRs 1/10 and 2/10; two fixed VMs valued epsilon and
    2 + epsilon; a probe bidder that is in turn (4, UM), (4, VM), (1, UM),
    (1, VM). The private-class mechanism runs each case; the all-VM cases
    yield the probe payments p_h and p_l, and 2 * p_h - p_l = 4 + epsilon
    is reported together with the case-1 welfare ratio.
    """
    epsilon = as_rational(epsilon)
    if not 0 < epsilon < Fraction(1, 10):
        raise InvalidConfigError(f"epsilon must lie in (0, 1/10), got {epsilon}")

    ladder = SlotLadder((Fraction(1, 10), Fraction(2, 10)))
    anchors = (BidderType.vm(epsilon), BidderType.vm(2 + epsilon))

    cases = []
    p_h = p_l = None
    ratio_case1 = None
    for label, probe in _T6_CASE_SPECS:
        instance = AuctionInstance(ladder, anchors + (probe,))
        outcome = run_mpr(instance)
        slot, payment = outcome.slot_and_price(2)
        cases.append(Theorem6Case(label, probe, outcome.allocation, slot, payment))
        if label == "case1":
            ratio_case1 = approximation_ratio(instance, MechanismId.MPR).ratio
        elif label == "case2":
            p_h = payment
        elif label == "case4":
            p_l = payment

    return Theorem6Report(
        epsilon=epsilon,
        cases=tuple(cases),
        p_h=p_h,
        p_l=p_l,
        constraint_lhs=2 * p_h - p_l,
        ratio_case1=ratio_case1,
    )


@dataclass(frozen=True)
class InstanceCheckResult:
    """All requested checks evaluated on one instance."""

    seed: Optional[int]
    n: int
    slot_count: int
    mechanism: MechanismId
    lsw_mechanism: Optional[Fraction]
    lsw_optimal: Optional[Fraction]
    ratio: Optional[Fraction]
    ir_violations: tuple[IrViolation, ...]
    ic_reports: tuple[DeviationReport, ...]
    lemma_report: Optional[LemmaReport]
    robustness: Optional[tuple[bool, bool]]

    @property
    def ir_ok(self) -> bool:
        return not self.ir_violations


KNOWN_CHECKS = ("ir", "ic", "lemmas", "ratio", "robustness")


def run_checks(
    mechanism: MechanismId,
    instance: AuctionInstance,
    checks: Sequence[str],
    *,
    delta: Optional[Fraction] = None,
    grid_points: int = 64,
    allow_class_misreport: bool = True,
) -> InstanceCheckResult:
    """Evaluate a subset of the named checks on one instance."""
    unknown = set(checks) - set(KNOWN_CHECKS)
    if unknown:
        raise InvalidConfigError(f"unknown checks: {sorted(unknown)}")
    wanted = set(checks)

    ir_violations: tuple[IrViolation, ...] = ()
    ic_reports: tuple[DeviationReport, ...] = ()
    lemma_report = None
    robustness = None
    lsw_mech = lsw_opt = ratio = None

    if "ir" in wanted:
        ir_violations = check_ir(mechanism, instance)
    if "ic" in wanted:
        ic_reports = check_ic(
            mechanism,
            instance,
            delta=delta,
            grid_points=grid_points,
            allow_class_misreport=allow_class_misreport,
        )
    if "lemmas" in wanted:
        lemma_report = check_lemmas(run_mpr(instance), instance)
    if "ratio" in wanted:
        report = approximation_ratio(instance, mechanism)
        lsw_mech, lsw_opt, ratio = report.lsw_mechanism, report.lsw_optimal, report.ratio
    if "robustness" in wanted:
        robustness = check_robustness(instance)

    return InstanceCheckResult(
        seed=instance.seed,
        n=instance.n,
        slot_count=instance.slot_count,
        mechanism=mechanism,
        lsw_mechanism=lsw_mech,
        lsw_optimal=lsw_opt,
        ratio=ratio,
        ir_violations=ir_violations,
        ic_reports=ic_reports,
        lemma_report=lemma_report,
        robustness=robustness,
    )
