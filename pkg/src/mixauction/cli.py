"""Command-line driver for batch experimentation and result reproduction.

Exit codes form a stable contract for CI:

* 0 — success / no violations found,
* 1 — at least one violation found by a verification run,
* 2 — usage, configuration, or I/O error.
"""
from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from typing import Optional, Sequence

from .core import AuctionError, BidderClass
from .instances import (
    GeneratorConfig,
    generate,
    load_instance,
    parse_rational,
    reference_instance,
    save_instance,
    serialize_instance,
    serialize_report,
    sweep_csv,
    sweep_instance,
)
from .mechanisms import MechanismId, run_mechanism, run_mpr
from .verify import (
    KNOWN_CHECKS,
    InstanceCheckResult,
    check_ic,
    check_robustness,
    run_checks,
    theorem6_scenario,
)

__all__ = ["main"]


def _fraction_arg(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except AuctionError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _seed_range_arg(text: str) -> range:
    try:
        lo_text, hi_text = text.split("..", 1)
        lo, hi = int(lo_text), int(hi_text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"seed range must look like 0..1000, got {text!r}"
        ) from None
    if hi < lo:
        raise argparse.ArgumentTypeError(f"empty seed range {text!r}")
    return range(lo, hi)


def _value_range_arg(text: str) -> tuple[Fraction, Fraction]:
    try:
        lo_text, hi_text = text.split("..", 1)
        return parse_rational(lo_text), parse_rational(hi_text)
    except (ValueError, AuctionError):
        raise argparse.ArgumentTypeError(
            f"value range must look like 1..100, got {text!r}"
        ) from None


def _checks_arg(text: str) -> tuple[str, ...]:
    checks = tuple(part.strip() for part in text.split(",") if part.strip())
    unknown = set(checks) - set(KNOWN_CHECKS)
    if not checks or unknown:
        raise argparse.ArgumentTypeError(
            f"checks must be a comma list from {','.join(KNOWN_CHECKS)}, got {text!r}"
        )
    return checks


def _mechanism_arg(text: str) -> MechanismId:
    try:
        return MechanismId.from_label(text)
    except AuctionError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixauction",
        description="Position auctions for mixed utility-/value-maximizing bidders.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one mechanism on an instance file")
    run_p.add_argument("--mechanism", type=_mechanism_arg, required=True)
    run_p.add_argument("instance", help="path to an instance JSON file")

    verify_p = sub.add_parser("verify", help="run verification checks")
    verify_p.add_argument("instance", nargs="?", help="path to an instance JSON file")
    verify_p.add_argument("--seed-range", type=_seed_range_arg, help="e.g. 0..1000")
    verify_p.add_argument("--mechanism", type=_mechanism_arg, required=True)
    verify_p.add_argument("--checks", type=_checks_arg, required=True)
    verify_p.add_argument("--delta", type=_fraction_arg, default=None,
                          help="misreport probe offset (default: smallest gap / 1000)")
    verify_p.add_argument("--grid", type=int, default=64,
                          help="uniform misreport grid size (default 64)")
    verify_p.add_argument("--classes-private", action="store_true",
                          help="let the deviation search misreport classes too")
    verify_p.add_argument("--expect-mpu-class-violations", action="store_true",
                          help="treat found MPU class-deviation violations as the expected "
                               "result: exit 0 when present, 1 when absent")
    verify_p.add_argument("--n-max", type=int, default=8)
    verify_p.add_argument("--k-max", type=int, default=4)
    verify_p.add_argument("--vm-prob", type=_fraction_arg, default=Fraction(1, 2))
    verify_p.add_argument("--value-range", type=_value_range_arg, default=(Fraction(1), Fraction(100)))
    verify_p.add_argument("--csv", help="also write per-instance sweep rows to this path")

    lower_p = sub.add_parser("lowerbound", help="run the two-slot impossibility scenario")
    lower_p.add_argument("--epsilon", type=_fraction_arg, required=True)

    gen_p = sub.add_parser("generate", help="write a seeded instance file")
    gen_p.add_argument("--seed", type=int, required=True)
    gen_p.add_argument("--n", type=int, required=True)
    gen_p.add_argument("--k", type=int, required=True)
    gen_p.add_argument("--vm-prob", type=_fraction_arg, default=Fraction(1, 2))
    gen_p.add_argument("--value-range", type=_value_range_arg, default=(Fraction(1), Fraction(100)))
    gen_p.add_argument("--ctr-mode", choices=("strictly-increasing-uniform", "geometric"),
                       default="strictly-increasing-uniform")
    gen_p.add_argument("--out", help="output path (default: stdout)")

    repro_p = sub.add_parser(
        "reproduce-paper",
        help="chain the full reproduction: golden run, robustness, lemma/ratio sweeps, "
             "deviation search, lower-bound scenario",
    )
    repro_p.add_argument("--quick", action="store_true",
                         help="smoke-test sizes instead of the full sweep budgets")
    return parser


def _cmd_run(args) -> int:
    instance = load_instance(args.instance)
    outcome = run_mechanism(args.mechanism, instance)
    sys.stdout.write(serialize_report(outcome, mechanism=args.mechanism))
    return 0


def _violation_count(result: InstanceCheckResult) -> int:
    count = len(result.ir_violations) + len(result.ic_reports)
    if result.lemma_report is not None and not result.lemma_report.passed:
        count += 1
    if result.ratio is not None and result.ratio > 2:
        count += 1
    if result.robustness is not None and not all(result.robustness):
        count += 1
    return count


def _cmd_verify(args) -> int:
    if (args.instance is None) == (args.seed_range is None):
        print("verify needs exactly one of: an instance path, --seed-range", file=sys.stderr)
        return 2
    if "robustness" in args.checks and args.seed_range is not None:
        if args.vm_prob not in (Fraction(0), Fraction(1)):
            print("robustness sweeps need --vm-prob 0 (all UM) or 1 (all VM)", file=sys.stderr)
            return 2

    if args.instance is not None:
        instances = [load_instance(args.instance)]
    else:
        instances = (
            sweep_instance(
                seed,
                n_max=args.n_max,
                k_max=args.k_max,
                vm_probability=args.vm_prob,
                value_range=args.value_range,
            )
            for seed in args.seed_range
        )

    results: list[InstanceCheckResult] = []
    totals = {"ir": 0, "ic": 0, "lemmas": 0, "robustness": 0}
    max_ratio: Optional[Fraction] = None
    count = 0
    for instance in instances:
        if "robustness" in args.checks and instance.homogeneous_class() is None:
            print("robustness check needs a single-class instance", file=sys.stderr)
            return 2
        result = run_checks(
            args.mechanism,
            instance,
            args.checks,
            delta=args.delta,
            grid_points=args.grid,
            allow_class_misreport=args.classes_private,
        )
        results.append(result)
        count += 1
        totals["ir"] += len(result.ir_violations)
        totals["ic"] += len(result.ic_reports)
        if result.lemma_report is not None and not result.lemma_report.passed:
            totals["lemmas"] += 1
        if result.robustness is not None and not all(result.robustness):
            totals["robustness"] += 1
        if result.ratio is not None and (max_ratio is None or result.ratio > max_ratio):
            max_ratio = result.ratio

    for check in args.checks:
        if check == "ir":
            print(f"ir: {totals['ir']} violations")
        elif check == "ic":
            print(f"ic: {totals['ic']} violations")
        elif check == "lemmas":
            print(f"lemmas: {totals['lemmas']} failing instances")
        elif check == "robustness":
            print(f"robustness: {totals['robustness']} mismatching instances")
        elif check == "ratio":
            if max_ratio is None:
                print("ratio: no instances")
            else:
                verdict = "<= 2" if max_ratio <= 2 else "EXCEEDS 2"
                print(f"ratio: max {max_ratio} ({verdict}) over {count} instances")

    for result in results:
        for violation in result.ir_violations:
            sys.stdout.write(serialize_report(violation))
        if result.ic_reports:
            sys.stdout.write(serialize_report(list(result.ic_reports)))
        if result.lemma_report is not None and not result.lemma_report.passed:
            sys.stdout.write(serialize_report(result.lemma_report))

    violations = sum(_violation_count(r) for r in results)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as handle:
            handle.write(sweep_csv(results))

    if args.expect_mpu_class_violations:
        if args.mechanism is not MechanismId.MPU or not args.classes_private:
            print("--expect-mpu-class-violations needs --mechanism mpu --classes-private",
                  file=sys.stderr)
            return 2
        expected_found = totals["ic"] > 0
        other_violations = violations - totals["ic"]
        print(f"expected class-deviation violations {'found' if expected_found else 'MISSING'}")
        return 0 if expected_found and other_violations == 0 else 1

    return 1 if violations else 0


def _cmd_lowerbound(args) -> int:
    report = theorem6_scenario(args.epsilon)
    sys.stdout.write(serialize_report(report))
    return 0


def _cmd_generate(args) -> int:
    config = GeneratorConfig(
        seed=args.seed,
        n=args.n,
        k=args.k,
        value_range=args.value_range,
        vm_probability=args.vm_prob,
        ctr_mode=args.ctr_mode,
    )
    instance = generate(config)
    if args.out:
        save_instance(instance, args.out)
    else:
        sys.stdout.write(serialize_instance(instance))
    return 0


def _cmd_reproduce(args) -> int:
    quick = args.quick
    failures = 0

    def check(name: str, ok: bool, detail: str = "") -> None:
        nonlocal failures
        status = "PASS" if ok else "FAIL"
        suffix = f" — {detail}" if detail else ""
        print(f"[{status}] {name}{suffix}")
        if not ok:
            failures += 1

    # 1. golden run: exact slot prices on the reference instance
    ref = reference_instance()
    outcome = run_mpr(ref)
    expected_prices = {1: Fraction(6), 2: Fraction(7), 3: Fraction(23, 3), 4: Fraction(8)}
    expected_slots = {0: 0, 1: 1, 2: 3, 3: 2, 4: 4}
    check(
        "reference run (prices 6, 7, 23/3, 8)",
        outcome.slot_prices == expected_prices and outcome.allocation.pi == expected_slots,
        f"prices {[str(outcome.slot_prices[k]) for k in sorted(outcome.slot_prices)]}",
    )

    # 2. robustness against both homogeneous baselines
    robust_seeds = 50 if quick else 1000
    ok = True
    for vm_prob, label in ((Fraction(0), "all-UM"), (Fraction(1), "all-VM")):
        for seed in range(robust_seeds):
            inst = sweep_instance(seed, n_max=10, k_max=5, vm_probability=vm_prob)
            if check_robustness(inst) != (True, True):
                ok = False
                break
    check(f"robustness over {robust_seeds} seeds per class", ok)

    # 3-5. one pass over the mixed sweep: IR for both hybrid rules, lemma
    # checks on the private-class outcome, welfare ratio bound
    sweep_size = 200 if quick else 10_000
    ir_bad = lemma_bad = 0
    max_ratio = Fraction(0)
    for seed in range(sweep_size):
        inst = sweep_instance(seed, n_max=12, k_max=6)
        mpr = run_checks(MechanismId.MPR, inst, ("ir", "lemmas", "ratio"))
        mpu = run_checks(MechanismId.MPU, inst, ("ir",))
        ir_bad += len(mpr.ir_violations) + len(mpu.ir_violations)
        if not mpr.lemma_report.passed:
            lemma_bad += 1
        max_ratio = max(max_ratio, mpr.ratio)
    check(f"individual rationality over {sweep_size} instances", ir_bad == 0)
    check(f"structural checks over {sweep_size} instances", lemma_bad == 0)
    check(f"welfare ratio <= 2 over {sweep_size} instances", max_ratio <= 2,
          f"max ratio {max_ratio}")

    # 6. deviation search: private-class rule clean, public-class rule exploitable
    ic_size = 25 if quick else 2000
    ic_found = 0
    for seed in range(ic_size):
        inst = sweep_instance(seed, n_max=8, k_max=4)
        ic_found += len(check_ic(MechanismId.MPR, inst))
    check(f"no profitable deviations against the private-class rule "
          f"({ic_size} instances)", ic_found == 0)
    mpu_reports = check_ic(MechanismId.MPU, ref, allow_class_misreport=True)
    witness = [
        r for r in mpu_reports
        if r.bidder_id == 2 and r.misreport.bidder_class is BidderClass.UM
        and r.deviation_price == Fraction(13, 2)
    ]
    check("public-class rule admits the class-manipulation witness", bool(witness),
          f"{len(mpu_reports)} deviation(s) found")

    # 7. lower-bound scenario
    ok = True
    details = []
    for eps in (Fraction(1, 1000), Fraction(1, 100), Fraction(1, 20)):
        report = theorem6_scenario(eps)
        ok = ok and report.p_h == 2 + eps and report.p_l == eps
        ok = ok and report.constraint_lhs == 4 + eps
        details.append(f"eps={eps}: 2*p_h - p_l = {report.constraint_lhs}")
    ratio_report = theorem6_scenario(Fraction(1, 100))
    ok = ok and ratio_report.ratio_case1 == Fraction(1001, 802)
    check("lower-bound scenario payments and constraint", ok, "; ".join(details))

    print(f"{'ALL PASS' if failures == 0 else f'{failures} FAILURE(S)'}")
    return 0 if failures == 0 else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "verify": _cmd_verify,
        "lowerbound": _cmd_lowerbound,
        "generate": _cmd_generate,
        "reproduce-paper": _cmd_reproduce,
    }
    try:
        return handlers[args.command](args)
    except AuctionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
