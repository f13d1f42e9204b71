"""Position-auction mechanisms for mixed bidder populations, with an
exact-rational verification harness (truthfulness falsification, welfare
ratios, structural checks, and a lower-bound scenario)."""

from .core import (
    Allocation,
    AuctionError,
    AuctionInstance,
    BidderClass,
    BidderType,
    DegeneratePairError,
    GenerationError,
    InvalidConfigError,
    InvalidInstanceError,
    Outcome,
    ParseError,
    ProtocolError,
    Rational,
    SlotLadder,
    VmPreference,
    as_rational,
    lsw,
    marginal_payment_increase,
    optimal_allocation,
    um_utility,
    vm_preference,
)
from .mechanisms import (
    MechanismId,
    PartialState,
    best_slot_for_um,
    run_gsp,
    run_mechanism,
    run_mpr,
    run_mpu,
    run_vcg,
    slot_price,
)
from .verify import (
    DeviationReport,
    InstanceCheckResult,
    IrViolation,
    LemmaReport,
    RatioReport,
    Theorem6Case,
    Theorem6Report,
    approximation_ratio,
    check_ic,
    check_ir,
    check_lemmas,
    check_robustness,
    critical_values,
    run_checks,
    theorem6_scenario,
)
from .instances import (
    GeneratorConfig,
    SplitMix64,
    decimal_string,
    format_rational,
    generate,
    load_instance,
    parse_instance,
    parse_rational,
    reference_instance,
    save_instance,
    serialize_instance,
    serialize_report,
    sweep_csv,
    sweep_instance,
)

__version__ = "0.1.0"
