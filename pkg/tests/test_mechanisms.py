"""Mechanism tests: golden traces, pricing protocol, padding, robustness."""
from fractions import Fraction as F

import pytest

from mixauction.core import (
    AuctionInstance,
    BidderType,
    ProtocolError,
    SlotLadder,
)
from mixauction.instances import reference_instance, sweep_instance
from mixauction.mechanisms import (
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

from oracles import recompute_slot_prices


REF = reference_instance()


def test_vcg_reference():
    out = run_vcg(REF)
    assert out.allocation.pi == {0: 0, 1: 1, 2: 2, 3: 3, 4: 4}
    assert out.payments == {0: F(0), 1: F(6), 2: F(13, 2), 3: F(7), 4: F(15, 2)}


def test_vcg_degenerate_cases():
    single = AuctionInstance(SlotLadder((F(1, 2),)), (BidderType.um(9),))
    assert run_vcg(single).payments == {0: F(0)}
    pair = AuctionInstance(SlotLadder((F(2, 10),)), (BidderType.um(4), BidderType.um(1)))
    out = run_vcg(pair)
    assert out.allocation.pi == {0: 1, 1: 0}
    assert out.payments[0] == F(1)


def test_gsp_reference():
    out = run_gsp(REF)
    assert out.allocation.pi == {0: 0, 1: 1, 2: 2, 3: 3, 4: 4}
    assert out.payments == {0: F(0), 1: F(6), 2: F(7), 3: F(8), 4: F(9)}


def test_gsp_lower_bound_case2():
    eps = F(1, 100)
    inst = AuctionInstance(
        SlotLadder((F(1, 10), F(2, 10))),
        (BidderType.vm(eps), BidderType.vm(2 + eps), BidderType.vm(4)),
    )
    out = run_gsp(inst)
    assert out.payments[2] == 2 + eps
    assert out.payments[1] == eps
    single = AuctionInstance(SlotLadder((F(1, 2),)), (BidderType.vm(9),))
    assert run_gsp(single).payments == {0: F(0)}


def test_mpu_reference():
    out = run_mpu(REF)
    assert out.allocation.pi == {0: 0, 1: 1, 2: 2, 3: 3, 4: 4}
    assert out.payments == {0: F(0), 1: F(6), 2: F(7), 3: F(7), 4: F(15, 2)}


@pytest.mark.parametrize("seed", range(25))
def test_mpu_collapses_on_homogeneous_instances(seed):
    all_um = sweep_instance(seed, n_max=9, k_max=5, vm_probability=F(0))
    assert run_mpu(all_um) == run_vcg(all_um)
    all_vm = sweep_instance(seed, n_max=9, k_max=5, vm_probability=F(1))
    assert run_mpu(all_vm) == run_gsp(all_vm)


# --- slot pricing -------------------------------------------------------------

def test_slot_price_before_any_um_insertion():
    state = PartialState(assigned={0: 0, 1: 1, 2: 2}, slot_prices={})
    assert slot_price(state, REF, 1) == F(6)
    assert slot_price(state, REF, 2) == F(7)
    assert slot_price(state, REF, 3) == F(8)


def test_slot_price_after_first_um_insertion():
    state = PartialState(
        assigned={0: 0, 1: 1, 2: 3, 3: 2},
        slot_prices={1: F(6), 2: F(7)},
    )
    assert slot_price(state, REF, 3) == F(23, 3)
    state.slot_prices[3] = F(23, 3)
    assert slot_price(state, REF, 4) == F(8)


def test_slot_price_nothing_below():
    state = PartialState(assigned={}, slot_prices={})
    assert slot_price(state, REF, 1) == 0


def test_slot_price_protocol_errors():
    gap = PartialState(assigned={0: 0, 2: 2}, slot_prices={})
    with pytest.raises(ProtocolError):
        slot_price(gap, REF, 3)
    unpriced_um = PartialState(assigned={0: 0, 1: 3}, slot_prices={})
    with pytest.raises(ProtocolError):
        slot_price(unpriced_um, REF, 2)
    with pytest.raises(ProtocolError):
        slot_price(PartialState(assigned={}, slot_prices={}), REF, 9)


def test_best_slot_for_um_examples():
    ladder = REF.ladder
    assert best_slot_for_um(ladder, F(9), {1: F(6), 2: F(7), 3: F(8)}, 3) == 2
    prices = {1: F(6), 2: F(7), 3: F(23, 3), 4: F(8)}
    assert best_slot_for_um(ladder, F(10), prices, 4) == 4
    flat = {k: F(5) for k in range(1, 5)}
    assert best_slot_for_um(ladder, F(5), flat, 4) == 1  # all utilities 0: lowest wins
    with pytest.raises(ProtocolError):
        best_slot_for_um(ladder, F(5), {1: F(0)}, 3)


# --- the private-class mechanism ---------------------------------------------

def test_mpr_reference_golden():
    out = run_mpr(REF)
    assert out.allocation.pi == {0: 0, 1: 1, 2: 3, 3: 2, 4: 4}
    assert out.slot_prices == {1: F(6), 2: F(7), 3: F(23, 3), 4: F(8)}
    assert out.payments == {0: F(0), 1: F(6), 2: F(23, 3), 3: F(7), 4: F(8)}


def test_mpr_lower_bound_case3_trace():
    eps = F(1, 100)
    inst = AuctionInstance(
        SlotLadder((F(1, 10), F(2, 10))),
        (BidderType.vm(eps), BidderType.vm(2 + eps), BidderType.um(1)),
    )
    out = run_mpr(inst)
    # the UM prefers slot 1 (positive utility) over slot 2 (negative), so the
    # mid VM is displaced upward and slot 2 re-prices off the inserted UM
    assert out.allocation.pi == {0: 0, 1: 2, 2: 1}
    assert out.slot_prices[1] == eps
    assert out.slot_prices[2] == (1 + eps) / 2
    assert out.slot_prices == recompute_slot_prices(out, inst)


@pytest.mark.parametrize("seed", range(25))
def test_mpr_collapses_on_homogeneous_instances(seed):
    all_um = sweep_instance(seed, n_max=9, k_max=5, vm_probability=F(0))
    vcg = run_vcg(all_um)
    mpr = run_mpr(all_um)
    assert mpr.allocation == vcg.allocation
    assert mpr.payments == vcg.payments
    all_vm = sweep_instance(seed, n_max=9, k_max=5, vm_probability=F(1))
    gsp = run_gsp(all_vm)
    mpr = run_mpr(all_vm)
    assert mpr.allocation == gsp.allocation
    assert mpr.payments == gsp.payments


@pytest.mark.parametrize("seed", range(30))
def test_mpr_prices_match_structural_recomputation(seed):
    inst = sweep_instance(seed, n_max=6, k_max=3)
    out = run_mpr(inst)
    assert out.slot_prices == recompute_slot_prices(out, inst)


def test_mpr_fewer_bidders_than_slots():
    inst = AuctionInstance(
        SlotLadder((F(1, 10), F(2, 10), F(3, 10))),
        (BidderType.um(4), BidderType.um(2)),
    )
    out = run_mpr(inst)
    vcg = run_vcg(inst)
    assert out.allocation.pi == {2: 1, 3: 0} == vcg.allocation.pi
    assert out.payments == {0: F(2, 3), 1: F(0)} == vcg.payments
    assert out.slot_prices[1] == 0  # padding-anchored empty slot still priced
    assert 1 not in out.allocation.pi


def test_mpr_single_vm_gets_top_slot_free_ladder():
    inst = AuctionInstance(SlotLadder((F(1, 10), F(2, 10))), (BidderType.vm(2),))
    out = run_mpr(inst)
    assert out.allocation.pi == {2: 0}
    assert out.payments[0] == 0


def test_empty_ladder_yields_empty_outcome():
    inst = AuctionInstance(SlotLadder(()), (BidderType.um(3), BidderType.vm(1)))
    for mechanism in MechanismId:
        out = run_mechanism(mechanism, inst)
        assert out.allocation.pi == {}
        assert out.slot_prices == {}
        assert out.payments == {0: F(0), 1: F(0)}


def test_value_ties_rank_lower_id_higher():
    inst = AuctionInstance(
        SlotLadder((F(1, 10), F(2, 10))),
        (BidderType.um(5), BidderType.um(5), BidderType.um(5)),
    )
    for mechanism in MechanismId:
        out = run_mechanism(mechanism, inst)
        assert out.allocation.pi == {0: 2, 1: 1, 2: 0}
    # the private-class rule resolves the resulting slot-utility ties via the
    # perturbed re-run, landing on the same rank order as the baselines
    out = run_mpr(inst)
    assert out.payments == {0: F(5), 1: F(5), 2: F(0)}


def test_determinism_bit_identical_outcomes():
    inst = sweep_instance(1234, n_max=10, k_max=5)
    for mechanism in MechanismId:
        assert run_mechanism(mechanism, inst) == run_mechanism(mechanism, inst)


def test_mpr_slot_prices_cover_every_slot_and_are_monotone():
    for seed in range(50):
        inst = sweep_instance(seed, n_max=10, k_max=5)
        out = run_mpr(inst)
        K = inst.slot_count
        assert sorted(out.slot_prices) == list(range(1, K + 1))
        ladder = [out.slot_prices[k] for k in range(1, K + 1)]
        assert all(a <= b for a, b in zip(ladder, ladder[1:]))
