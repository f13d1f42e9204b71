"""End-to-end CLI tests: subcommands, exit codes, output determinism."""
import json
import pathlib
from fractions import Fraction as F

import pytest

from mixauction.cli import main
from mixauction.instances import save_instance, sweep_instance

FIXTURE = str(
    pathlib.Path(__file__).resolve().parent.parent / "fixtures" / "reference_instance.json"
)


def write_instance(tmp_path, instance, name="instance.json"):
    path = tmp_path / name
    save_instance(instance, str(path))
    return str(path)


def test_run_reference_prints_exact_prices(capsys):
    assert main(["run", "--mechanism", "mpr", FIXTURE]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["slot_prices"]["3"]["exact"] == "23/3"
    assert payload["mechanism"] == "MPR"


def test_run_missing_file_exits_2(capsys):
    assert main(["run", "--mechanism", "mpr", "/nonexistent/file.json"]) == 2
    assert "error" in capsys.readouterr().err


def test_run_unknown_mechanism_usage_error(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["run", "--mechanism", "vickrey", FIXTURE])
    assert excinfo.value.code == 2


def test_run_vcg_equals_mpr_on_all_um_fixture(tmp_path, capsys):
    inst = sweep_instance(5, n_max=8, k_max=4, vm_probability=F(0))
    path = write_instance(tmp_path, inst)
    assert main(["run", "--mechanism", "vcg", path]) == 0
    vcg = json.loads(capsys.readouterr().out)
    assert main(["run", "--mechanism", "mpr", path]) == 0
    mpr = json.loads(capsys.readouterr().out)
    assert vcg["allocation"] == mpr["allocation"]
    assert vcg["payments"] == mpr["payments"]


def test_verify_single_instance_clean(tmp_path, capsys):
    path = write_instance(tmp_path, sweep_instance(2, n_max=7, k_max=4))
    code = main(
        ["verify", "--mechanism", "mpr", "--checks", "ir,ic,lemmas,ratio",
         "--grid", "16", path]
    )
    out = capsys.readouterr().out
    assert code == 0
    assert "ir: 0 violations" in out
    assert "ic: 0 violations" in out
    assert "lemmas: 0 failing instances" in out
    assert "ratio: max" in out


def test_verify_seed_range_sweep(capsys, tmp_path):
    csv_path = tmp_path / "sweep.csv"
    code = main(
        ["verify", "--mechanism", "mpr", "--checks", "ir,lemmas,ratio",
         "--seed-range", "0..25", "--csv", str(csv_path)]
    )
    assert code == 0
    text = csv_path.read_text()
    assert text.startswith("seed,n,K,mechanism,")
    assert len(text.strip().split("\n")) == 26


def test_verify_needs_exactly_one_input_source(capsys):
    assert main(["verify", "--mechanism", "mpr", "--checks", "ir"]) == 2
    assert (
        main(["verify", "--mechanism", "mpr", "--checks", "ir",
              "--seed-range", "0..5", FIXTURE]) == 2
    )


def test_verify_robustness_on_mixed_instance_usage_error(capsys):
    assert main(["verify", "--mechanism", "mpr", "--checks", "robustness", FIXTURE]) == 2
    assert (
        main(["verify", "--mechanism", "mpr", "--checks", "robustness",
              "--seed-range", "0..5"]) == 2
    )


def test_verify_robustness_sweep_all_um(capsys):
    code = main(
        ["verify", "--mechanism", "mpr", "--checks", "robustness",
         "--seed-range", "0..20", "--vm-prob", "0"]
    )
    assert code == 0
    assert "robustness: 0 mismatching" in capsys.readouterr().out


def test_verify_mpu_class_deviations_found(capsys):
    code = main(
        ["verify", "--mechanism", "mpu", "--checks", "ic", "--classes-private", FIXTURE]
    )
    out = capsys.readouterr().out
    assert code == 1  # violations found and not flagged as expected
    assert "ic:" in out and "0 violations" not in out.split("\n")[0]


def test_verify_mpu_expected_violations_flag(capsys):
    code = main(
        ["verify", "--mechanism", "mpu", "--checks", "ic", "--classes-private",
         "--expect-mpu-class-violations", FIXTURE]
    )
    assert code == 0
    assert "expected class-deviation violations found" in capsys.readouterr().out


def test_verify_mpu_value_only_clean(capsys):
    code = main(["verify", "--mechanism", "mpu", "--checks", "ic", FIXTURE])
    assert code == 0


def test_verify_bad_checks_usage_error():
    with pytest.raises(SystemExit) as excinfo:
        main(["verify", "--mechanism", "mpr", "--checks", "ir,bogus", FIXTURE])
    assert excinfo.value.code == 2


def test_verify_bad_seed_range_usage_error():
    with pytest.raises(SystemExit) as excinfo:
        main(["verify", "--mechanism", "mpr", "--checks", "ir", "--seed-range", "10"])
    assert excinfo.value.code == 2


def test_lowerbound_epsilon_hundredth(capsys):
    assert main(["lowerbound", "--epsilon", "1/100"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["constraint_lhs"]["exact"] == "401/100"
    assert payload["ratio_case1"]["exact"] == "1001/802"


def test_lowerbound_epsilon_thousandth(capsys):
    assert main(["lowerbound", "--epsilon", "1/1000"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["ratio_case1"]["exact"] == "10001/8002"


def test_lowerbound_epsilon_out_of_range(capsys):
    assert main(["lowerbound", "--epsilon", "1"]) == 2
    assert "epsilon" in capsys.readouterr().err


def test_generate_deterministic_files(tmp_path):
    out_a = tmp_path / "a.json"
    out_b = tmp_path / "b.json"
    args = ["generate", "--seed", "7", "--n", "6", "--k", "4", "--vm-prob", "1/2"]
    assert main(args + ["--out", str(out_a)]) == 0
    assert main(args + ["--out", str(out_b)]) == 0
    assert out_a.read_bytes() == out_b.read_bytes()


def test_generate_all_um_and_padding_case(tmp_path, capsys):
    out = tmp_path / "um.json"
    assert main(["generate", "--seed", "1", "--n", "4", "--k", "2",
                 "--vm-prob", "0", "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert {b["class"] for b in payload["bidders"]} == {"UM"}

    # fewer bidders than slots: generates fine and runs fine via padding
    small = tmp_path / "small.json"
    assert main(["generate", "--seed", "2", "--n", "3", "--k", "4",
                 "--out", str(small)]) == 0
    assert main(["run", "--mechanism", "mpr", str(small)]) == 0
    capsys.readouterr()


def test_generate_unwritable_path(capsys):
    assert main(["generate", "--seed", "1", "--n", "2", "--k", "1",
                 "--out", "/nonexistent-dir/x.json"]) == 2


def test_generate_stdout(capsys):
    assert main(["generate", "--seed", "3", "--n", "2", "--k", "2"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["schema_version"] == 1
    assert payload["seed"] == 3


def test_reproduce_paper_quick(capsys):
    assert main(["reproduce-paper", "--quick"]) == 0
    out = capsys.readouterr().out
    assert "[PASS] reference run (prices 6, 7, 23/3, 8)" in out
    assert "ALL PASS" in out
    assert "[FAIL]" not in out
