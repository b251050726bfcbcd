import csv
from fractions import Fraction

import pytest

from sfcsim.errors import CapacityError, SfcSimError
from sfcsim.ledger import EncodeContext, ResourceLedger, state_vector_size
from sfcsim.topology import generate_random_connected

from conftest import make_line3, make_service


def ctx_for(service, node=0, vm=None, i_f=0, elapsed=0.0, catalog_size=3):
    return EncodeContext(service=service, catalog_size=catalog_size, current_node=node,
                         current_vm=vm, next_function_index=i_f, elapsed_s=elapsed)


def test_charge_arithmetic():
    topo = make_line3(vm_capacity=1200.0)
    ledger = ResourceLedger(topo)
    ledger.charge(0, [(0, 200.0)], [], departure_slot=10)
    assert ledger.vm_available(0) == Fraction(1000)
    ledger.charge(1, [(0, 200.0)], [], departure_slot=10)
    assert ledger.vm_available(0) == Fraction(800)


def test_overcharge_rejected_atomically():
    topo = make_line3(vm_capacity=500.0, link_capacity=100.0)
    ledger = ResourceLedger(topo)
    before = ledger.snapshot()
    with pytest.raises(CapacityError):
        ledger.charge(0, [(0, 200.0)], [((0, 1), 200.0)], departure_slot=5)
    assert ledger.snapshot() == before
    with pytest.raises(CapacityError):
        ledger.charge(0, [(0, 600.0)], [], departure_slot=5)
    assert ledger.snapshot() == before


def test_duplicate_user_rejected():
    ledger = ResourceLedger(make_line3())
    ledger.charge(0, [(0, 1.0)], [], departure_slot=5)
    with pytest.raises(SfcSimError):
        ledger.charge(0, [(0, 1.0)], [], departure_slot=6)


def test_charge_release_round_trip_exact(rng):
    topo = generate_random_connected(6, target_degree=2.5, vm_count_range=(1, 3), seed=9)
    ledger = ResourceLedger(topo)
    baseline = ledger.snapshot()
    live = []
    for episode in range(10_000):
        if live and rng.random() < 0.5:
            user = live.pop(int(rng.integers(len(live))))
            assert ledger.release(user)
        else:
            user = episode
            vm = int(rng.integers(topo.num_vms))
            link = topo.links[int(rng.integers(topo.num_links))]
            amount = float(rng.uniform(0.001, 5.0))
            try:
                ledger.charge(user, [(vm, amount)], [(link, amount)], departure_slot=10**9)
                live.append(user)
            except CapacityError:
                pass
    for user in live:
        ledger.release(user)
    assert ledger.snapshot() == baseline
    assert ledger.is_fully_available()


def test_release_restores_full_capacity():
    topo = make_line3()
    ledger = ResourceLedger(topo)
    ledger.charge(5, [(0, 17.3), (1, 2.9)], [((0, 1), 0.064)], departure_slot=7)
    assert not ledger.is_fully_available()
    assert ledger.release(5)
    assert ledger.is_fully_available()


def test_release_unknown_user_is_warning_noop():
    ledger = ResourceLedger(make_line3())
    ledger.charge(1, [(0, 5.0)], [], departure_slot=3)
    assert ledger.release(1)
    before = ledger.snapshot()
    assert not ledger.release(1)
    assert ledger.snapshot() == before


def test_interleaved_users_conserved():
    topo = make_line3(vm_capacity=100.0)
    ledger = ResourceLedger(topo)
    ledger.charge("a", [(0, 30.0)], [((0, 1), 1.0)], departure_slot=9)
    ledger.charge("b", [(0, 20.0)], [((0, 1), 2.0)], departure_slot=9)
    ledger.release("a")
    ledger.check_conservation()
    assert ledger.vm_available(0) == Fraction(80)
    assert ledger.link_available((0, 1)) == Fraction(1600) - Fraction(2)


def test_apply_departures_empty():
    ledger = ResourceLedger(make_line3())
    assert ledger.apply_departures(5) == []


def test_apply_departures_releases_due_users():
    ledger = ResourceLedger(make_line3())
    ledger.charge(0, [(0, 5.0)], [], departure_slot=240, arrival_slot=0)
    ledger.charge(1, [(1, 5.0)], [], departure_slot=100, arrival_slot=0)
    assert ledger.apply_departures(99) == []
    assert ledger.apply_departures(100) == [1]
    assert ledger.apply_departures(240) == [0]
    assert ledger.is_fully_available()


def test_encode_levels_examples():
    topo = make_line3(link_capacity=6400.0)
    ledger = ResourceLedger(topo)
    service = make_service()
    vec = ledger.encode_state(ctx_for(service))
    assert vec[0] == 0.0  # untouched link
    ledger.charge(0, [], [((0, 1), 3200.0)], departure_slot=5)
    vec = ledger.encode_state(ctx_for(service))
    assert vec[0] == pytest.approx(0.5)
    ledger.charge(1, [], [((0, 1), 3200.0)], departure_slot=5)
    vec = ledger.encode_state(ctx_for(service))
    assert vec[0] == pytest.approx(1.0)


def test_encode_level_floor():
    topo = make_line3(link_capacity=1000.0)
    ledger = ResourceLedger(topo)
    ledger.charge(0, [], [((0, 1), 1.5)], departure_slot=5)
    level = ledger.utilization_level(Fraction(1000), Fraction(1000) - Fraction(3, 2), 1000)
    assert level == 1  # floor(1000 * 1.5/1000)


def test_encode_state_shape_and_bounds():
    topo = make_line3(vms_per_node=2)
    ledger = ResourceLedger(topo)
    service = make_service(chain_len=2)
    vec = ledger.encode_state(ctx_for(service, node=2, vm=3, i_f=1, elapsed=0.2))
    assert len(vec) == state_vector_size(topo) == topo.num_links + topo.num_vms + 5
    assert ((0.0 <= vec) & (vec <= 1.0)).all()


def test_encode_state_pure():
    topo = make_line3()
    ledger = ResourceLedger(topo)
    ledger.charge(0, [(0, 7.0)], [((0, 1), 11.0)], departure_slot=4)
    service = make_service()
    a = ledger.encode_state(ctx_for(service, node=1, vm=0, i_f=0, elapsed=0.1))
    b = ledger.encode_state(ctx_for(service, node=1, vm=0, i_f=0, elapsed=0.1))
    assert (a == b).all()


def test_encode_monotone_in_utilization():
    topo = make_line3(vm_capacity=1000.0)
    ledger = ResourceLedger(topo)
    service = make_service()
    prev = -1.0
    for user, amount in enumerate((100.0, 200.0, 300.0)):
        ledger.charge(user, [(0, amount)], [], departure_slot=9)
        idx = topo.num_links  # first VM entry
        cur = ledger.encode_state(ctx_for(service))[idx]
        assert cur > prev
        prev = cur


def test_conservation_checker_catches_tampering():
    ledger = ResourceLedger(make_line3())
    ledger.charge(0, [(0, 5.0)], [], departure_slot=3)
    ledger._vm_available[0] += Fraction(1)  # corrupt
    with pytest.raises(SfcSimError):
        ledger.check_conservation()


def test_snapshot_csv(tmp_path):
    topo = make_line3()
    ledger = ResourceLedger(topo)
    ledger.charge(0, [(0, 5.0)], [((0, 1), 1.0)], departure_slot=3)
    path = tmp_path / "snap.csv"
    ledger.snapshot_csv(path, slot=7)
    rows = list(csv.DictReader(open(path)))
    assert len(rows) == topo.num_vms + topo.num_links
    vm0 = next(r for r in rows if r["resource_kind"] == "vm" and r["resource_id"] == "0")
    assert float(vm0["capacity"]) - float(vm0["available"]) == pytest.approx(5.0)
    assert all(r["slot"] == "7" for r in rows)
