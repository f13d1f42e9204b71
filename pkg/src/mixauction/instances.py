"""Instance generation, canonical file formats, and report serialization.

Randomness comes from SplitMix64 (Steele, Lea & Flood's 64-bit generator,
the engine behind Java's SplittableRandom): a counter-plus-finalizer design
that is trivially portable, so a fixed seed produces byte-identical corpora
on every platform. Each bidder draws from her own split stream, which keeps
draws independent of redraw counts elsewhere and lets parallel sweep
workers reproduce a serial run exactly.

All quantities serialize as exact fraction strings ("23/3") or decimal
strings ("0.1"); binary floats never appear in any file.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

from .core import (
    AuctionInstance,
    BidderClass,
    BidderType,
    GenerationError,
    InvalidConfigError,
    Outcome,
    ParseError,
    RationalLike,
    SlotLadder,
    as_rational,
)
from .mechanisms import MechanismId
from .verify import (
    DeviationReport,
    InstanceCheckResult,
    IrViolation,
    LemmaReport,
    RatioReport,
    Theorem6Report,
)

__all__ = [
    "SCHEMA_VERSION",
    "VALUE_GRID",
    "SplitMix64",
    "GeneratorConfig",
    "generate",
    "sweep_instance",
    "reference_instance",
    "format_rational",
    "parse_rational",
    "decimal_string",
    "rational_json",
    "serialize_instance",
    "parse_instance",
    "load_instance",
    "save_instance",
    "serialize_report",
    "sweep_csv",
]

SCHEMA_VERSION = 1

# Values are drawn from a uniform grid of this many steps across the value
# range; it bounds every generated denominator so long price chains stay fast.
VALUE_GRID = 10**6

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Deterministic 64-bit PRNG with O(1) splitting."""

    __slots__ = ("_state",)

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return _mix64(self._state)

    def next_below(self, bound: int) -> int:
        """Uniform integer in [0, bound) via rejection sampling."""
        if bound <= 0:
            raise InvalidConfigError(f"bound must be positive, got {bound}")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % bound

    def split(self) -> "SplitMix64":
        """An independent child stream seeded from this stream."""
        return SplitMix64(self.next_u64())


CTR_MODES = ("strictly-increasing-uniform", "geometric")


@dataclass(frozen=True)
class GeneratorConfig:
    """Parameters for one generated instance."""

    seed: int
    n: int
    k: int
    value_range: tuple[Fraction, Fraction] = (Fraction(1), Fraction(100))
    vm_probability: Fraction = Fraction(1, 2)
    ctr_mode: str = "strictly-increasing-uniform"

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "value_range",
            (as_rational(self.value_range[0]), as_rational(self.value_range[1])),
        )
        object.__setattr__(self, "vm_probability", as_rational(self.vm_probability))
        if self.n < 1:
            raise InvalidConfigError(f"need n >= 1, got {self.n}")
        if self.k < 1:
            raise InvalidConfigError(f"need k >= 1, got {self.k}")
        low, high = self.value_range
        if not 0 < low < high:
            raise InvalidConfigError(f"need 0 < low < high, got {low}..{high}")
        if not 0 <= self.vm_probability <= 1:
            raise InvalidConfigError(f"vm_probability outside [0, 1]: {self.vm_probability}")
        if self.ctr_mode not in CTR_MODES:
            raise InvalidConfigError(f"ctr_mode must be one of {CTR_MODES}, got {self.ctr_mode!r}")


def _draw_is_vm(stream: SplitMix64, probability: Fraction) -> bool:
    # exact Bernoulli: r / 2^53 < p without ever forming a float
    r = stream.next_below(1 << 53)
    return r * probability.denominator < probability.numerator * (1 << 53)


def _draw_ctrs(stream: SplitMix64, k: int, mode: str) -> tuple[Fraction, ...]:
    if mode == "strictly-increasing-uniform":
        if k > VALUE_GRID:
            raise GenerationError(f"cannot draw {k} distinct ctrs from a {VALUE_GRID}-point grid")
        picks: set[int] = set()
        while len(picks) < k:
            picks.add(1 + stream.next_below(VALUE_GRID))
        return tuple(Fraction(t, VALUE_GRID) for t in sorted(picks))
    # geometric: top slot 1, each lower slot scaled by a ratio in [1/2, 99/100]
    ratio = Fraction(50 + stream.next_below(50), 100)
    return tuple(ratio ** (k - slot) for slot in range(1, k + 1))


def generate(config: GeneratorConfig) -> AuctionInstance:
    """Deterministically build an instance from ``config.seed``.

    Values are distinct rationals from a bounded-denominator grid over the
    value range (collisions redraw from the colliding bidder's own stream),
    classes are independent Bernoulli draws, and CTRs follow ``ctr_mode``.
    """
    if config.n > VALUE_GRID + 1:
        raise GenerationError(
            f"value range grid holds {VALUE_GRID + 1} distinct values, cannot fit {config.n}"
        )
    root = SplitMix64(config.seed)
    ctr_stream = root.split()
    bidder_streams = [root.split() for _ in range(config.n)]

    ladder = SlotLadder(_draw_ctrs(ctr_stream, config.k, config.ctr_mode))

    low, high = config.value_range
    span = high - low
    used: set[Fraction] = set()
    bidders: list[BidderType] = []
    for stream in bidder_streams:
        value: Optional[Fraction] = None
        for _ in range(10_000):
            candidate = low + span * Fraction(stream.next_below(VALUE_GRID + 1), VALUE_GRID)
            if candidate not in used:
                value = candidate
                break
        if value is None:
            raise GenerationError(
                f"could not draw {config.n} distinct values from {low}..{high}"
            )
        used.add(value)
        cls = BidderClass.VM if _draw_is_vm(stream, config.vm_probability) else BidderClass.UM
        bidders.append(BidderType(value, cls))
    return AuctionInstance(ladder, tuple(bidders), seed=config.seed)


def sweep_instance(
    seed: int,
    *,
    n_max: int = 8,
    k_max: int = 4,
    vm_probability: RationalLike = Fraction(1, 2),
    value_range: tuple[RationalLike, RationalLike] = (Fraction(1), Fraction(100)),
    ctr_mode: str = "strictly-increasing-uniform",
) -> AuctionInstance:
    """One instance of a seeded sweep: sizes vary per seed, body drawn from it.

    ``n`` is uniform on [2, n_max] (or 1 when n_max is 1) and ``k`` uniform
    on [1, k_max], both taken from the seed's own stream so a sweep over a
    seed range is reproducible in any execution order. The returned
    instance records the sweep seed.
    """
    if n_max < 1 or k_max < 1:
        raise InvalidConfigError("n_max and k_max must be at least 1")
    root = SplitMix64(seed)
    n = 1 if n_max == 1 else 2 + root.next_below(n_max - 1)
    k = 1 + root.next_below(k_max)
    config = GeneratorConfig(
        seed=root.next_u64(),
        n=n,
        k=k,
        value_range=(as_rational(value_range[0]), as_rational(value_range[1])),
        vm_probability=as_rational(vm_probability),
        ctr_mode=ctr_mode,
    )
    instance = generate(config)
    return AuctionInstance(instance.ladder, instance.bidders, seed=seed)


def reference_instance() -> AuctionInstance:
    """The hand-checkable four-slot, five-bidder demo instance.

    Its private-class run yields slot prices 6, 7, 23/3, 8 bottom-up, which
    the golden tests assert exactly; fixtures/reference_instance.json is the
    serialized form.
    """
    return AuctionInstance(
        ladder=SlotLadder(
            (Fraction(1, 10), Fraction(2, 10), Fraction(3, 10), Fraction(4, 10))
        ),
        bidders=(
            BidderType.vm(6),
            BidderType.vm(7),
            BidderType.vm(8),
            BidderType.um(9),
            BidderType.um(10),
        ),
    )


# ---------------------------------------------------------------------------
# rational <-> text


def format_rational(q: Fraction) -> str:
    """Exact fraction string: "6", "23/3"."""
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def parse_rational(text: str) -> Fraction:
    """Parse "23/3", "0.1", or "6" exactly; anything else is a ParseError."""
    if not isinstance(text, str) or not text.strip():
        raise ParseError(f"not a rational number: {text!r}")
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"not a rational number: {text!r}") from exc


def decimal_string(q: Fraction, max_digits: int = 12) -> str:
    """Decimal rendering truncated (toward zero) to ``max_digits`` places."""
    sign = "-" if q < 0 else ""
    numerator, denominator = abs(q.numerator), q.denominator
    integer_part, remainder = divmod(numerator, denominator)
    if remainder == 0:
        return f"{sign}{integer_part}"
    digits = []
    for _ in range(max_digits):
        remainder *= 10
        digit, remainder = divmod(remainder, denominator)
        digits.append(str(digit))
        if remainder == 0:
            break
    return f"{sign}{integer_part}." + "".join(digits)


def rational_json(q: Fraction) -> dict:
    return {"exact": format_rational(q), "decimal": decimal_string(q)}


# ---------------------------------------------------------------------------
# instance files


def serialize_instance(instance: AuctionInstance) -> str:
    payload: dict = {
        "schema_version": SCHEMA_VERSION,
        "ctrs": [format_rational(x) for x in instance.ladder.ctrs],
        "bidders": [
            {"value": format_rational(b.value), "class": b.bidder_class.value}
            for b in instance.bidders
        ],
    }
    if instance.seed is not None:
        payload["seed"] = instance.seed
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def parse_instance(text: str) -> AuctionInstance:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ParseError("instance file must hold a JSON object")
    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {version!r}; expected {SCHEMA_VERSION}")
    raw_ctrs = payload.get("ctrs")
    raw_bidders = payload.get("bidders")
    if not isinstance(raw_ctrs, list) or not isinstance(raw_bidders, list):
        raise ParseError("instance file needs 'ctrs' and 'bidders' arrays")

    ctrs = []
    for i, raw in enumerate(raw_ctrs):
        x = parse_rational(raw)
        if x <= 0:
            raise ParseError(f"ctrs[{i}] must be positive, got {raw!r}")
        if ctrs and x < ctrs[-1]:
            raise ParseError(f"ctrs must be non-decreasing bottom-up; ctrs[{i}]={raw!r} breaks that")
        ctrs.append(x)

    bidders = []
    for i, raw in enumerate(raw_bidders):
        if not isinstance(raw, dict) or "value" not in raw or "class" not in raw:
            raise ParseError(f"bidders[{i}] needs 'value' and 'class'")
        value = parse_rational(raw["value"])
        if value <= 0:
            raise ParseError(f"bidders[{i}].value must be positive, got {raw['value']!r}")
        label = raw["class"]
        if label not in (BidderClass.UM.value, BidderClass.VM.value):
            raise ParseError(f"bidders[{i}].class must be 'UM' or 'VM', got {label!r}")
        bidders.append(BidderType(value, BidderClass(label)))
    if not bidders:
        raise ParseError("instance needs at least one bidder")

    seed = payload.get("seed")
    if seed is not None and not isinstance(seed, int):
        raise ParseError(f"seed must be an integer, got {seed!r}")
    return AuctionInstance(SlotLadder(tuple(ctrs)), tuple(bidders), seed=seed)


def load_instance(path: str) -> AuctionInstance:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_instance(handle.read())


def save_instance(instance: AuctionInstance, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(serialize_instance(instance))


# ---------------------------------------------------------------------------
# reports


def _allocation_json(allocation) -> dict:
    return {str(slot): bidder for slot, bidder in sorted(allocation.pi.items())}


def _outcome_json(outcome: Outcome, mechanism: Optional[MechanismId]) -> dict:
    payload = {
        "kind": "outcome",
        "allocation": _allocation_json(outcome.allocation),
        "slot_prices": {str(k): rational_json(p) for k, p in sorted(outcome.slot_prices.items())},
        "payments": {str(b): rational_json(p) for b, p in sorted(outcome.payments.items())},
    }
    if mechanism is not None:
        payload["mechanism"] = mechanism.value
    return payload


def _utility_json(utility) -> object:
    if isinstance(utility, Fraction):
        return rational_json(utility)
    return {
        "feasible": utility.feasible,
        "obtained_value": rational_json(utility.obtained_value),
        "total_payment": rational_json(utility.total_payment),
    }


def _deviation_json(report: DeviationReport) -> dict:
    return {
        "kind": "deviation",
        "bidder": report.bidder_id,
        "true_value": rational_json(report.true_type.value),
        "true_class": report.true_type.bidder_class.value,
        "misreport_value": rational_json(report.misreport.value),
        "misreport_class": report.misreport.bidder_class.value,
        "truthful": {
            "slot": report.truthful_slot,
            "price": rational_json(report.truthful_price),
        },
        "deviation": {
            "slot": report.deviation_slot,
            "price": rational_json(report.deviation_price),
        },
        "truthful_utility": _utility_json(report.truthful_utility),
        "deviation_utility": _utility_json(report.deviation_utility),
    }


def _ir_violation_json(violation: IrViolation) -> dict:
    return {
        "kind": "ir-violation",
        "bidder": violation.bidder_id,
        "slot": violation.slot,
        "price": rational_json(violation.price),
        "value": rational_json(violation.value),
    }


def _ratio_json(report: RatioReport) -> dict:
    return {
        "kind": "ratio",
        "lsw_mechanism": rational_json(report.lsw_mechanism),
        "lsw_optimal": rational_json(report.lsw_optimal),
        "ratio": rational_json(report.ratio),
    }


def _lemma_json(report: LemmaReport) -> dict:
    return {
        "kind": "lemma-report",
        "passed": report.passed,
        "checks": {name: list(failures) for name, failures in report.failures_by_check().items()},
    }


def _theorem6_json(report: Theorem6Report) -> dict:
    return {
        "kind": "lower-bound",
        "epsilon": rational_json(report.epsilon),
        "cases": [
            {
                "label": case.label,
                "probe_value": rational_json(case.probe_type.value),
                "probe_class": case.probe_type.bidder_class.value,
                "probe_slot": case.probe_slot,
                "probe_payment": rational_json(case.probe_payment),
                "allocation": _allocation_json(case.allocation),
            }
            for case in report.cases
        ],
        "p_h": rational_json(report.p_h),
        "p_l": rational_json(report.p_l),
        "constraint_lhs": rational_json(report.constraint_lhs),
        "ratio_case1": rational_json(report.ratio_case1),
    }


Report = Union[
    Outcome,
    RatioReport,
    Theorem6Report,
    LemmaReport,
    IrViolation,
    DeviationReport,
    Sequence,
]


def serialize_report(report: Report, *, mechanism: Optional[MechanismId] = None) -> str:
    """Render any verification report as deterministic JSON text.

    Sequences (for example the list returned by the deviation search)
    serialize as JSON arrays; an empty sequence becomes ``[]``.
    """
    return json.dumps(_report_payload(report, mechanism), indent=2, sort_keys=True) + "\n"


def _report_payload(report, mechanism: Optional[MechanismId]):
    if isinstance(report, Outcome):
        return _outcome_json(report, mechanism)
    if isinstance(report, RatioReport):
        return _ratio_json(report)
    if isinstance(report, Theorem6Report):
        return _theorem6_json(report)
    if isinstance(report, LemmaReport):
        return _lemma_json(report)
    if isinstance(report, DeviationReport):
        return _deviation_json(report)
    if isinstance(report, IrViolation):
        return _ir_violation_json(report)
    if isinstance(report, (list, tuple)):
        return [_report_payload(item, mechanism) for item in report]
    raise TypeError(f"cannot serialize report of type {type(report).__name__}")


SWEEP_CSV_HEADER = "seed,n,K,mechanism,lsw_mech,lsw_opt,ratio,ir_ok,ic_violations"


def sweep_csv(results: Iterable[InstanceCheckResult]) -> str:
    """Delimited tabular text for a sweep, one row per instance."""
    lines = [SWEEP_CSV_HEADER]
    for r in results:
        lines.append(
            ",".join(
                [
                    "" if r.seed is None else str(r.seed),
                    str(r.n),
                    str(r.slot_count),
                    r.mechanism.value,
                    "" if r.lsw_mechanism is None else format_rational(r.lsw_mechanism),
                    "" if r.lsw_optimal is None else format_rational(r.lsw_optimal),
                    "" if r.ratio is None else format_rational(r.ratio),
                    str(r.ir_ok).lower(),
                    str(len(r.ic_reports)),
                ]
            )
        )
    return "\n".join(lines) + "\n"
