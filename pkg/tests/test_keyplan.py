import random

import pytest

from keyhop.bits import nonce, p2p_key, tf_key
from keyhop.keyplan import (
    Variant,
    check_compatible,
    cm_report,
    establish,
    key_oracle_text,
    parse_key_oracle,
    plan_keys,
)
from keyhop.topology import build_chain, build_multipath, build_reach_chain, build_ring6


def test_ring_v1_plan_has_only_relay_keys():
    plan = plan_keys(build_ring6(), Variant.RING_V1)
    assert set(plan.secret_ids) == {
        tf_key("A", "N2"),
        tf_key("N1", "B"),
        tf_key("A", "N4"),
        tf_key("N3", "B"),
    }


def test_ring_v2_plan_adds_endpoint_link_keys():
    plan = plan_keys(build_ring6(), Variant.RING_V2)
    assert len(plan.secret_ids) == 8
    assert set(plan.secret_ids) - set(plan_keys(build_ring6(), Variant.RING_V1).secret_ids) == {
        p2p_key("A", "N1"),
        p2p_key("N2", "B"),
        p2p_key("A", "N3"),
        p2p_key("N4", "B"),
    }


def test_chain2_plan():
    plan = plan_keys(build_chain(2), Variant.CHAIN2)
    assert set(plan.secret_ids) == {
        tf_key("A", "N2"),
        tf_key("N1", "B"),
        p2p_key("A", "N1"),
        p2p_key("N2", "B"),
    }


def test_chain_key_count_is_m_plus_two():
    for m in range(2, 8):
        plan = plan_keys(build_chain(m), Variant.CHAIN_M)
        assert len(plan.secret_ids) == m + 2


def test_reach_plan_spans_distances_up_to_t_plus_one():
    plan = plan_keys(build_reach_chain(3, 2), Variant.REACH_T)
    assert set(plan.secret_ids) == {
        tf_key("A", "N2"),
        tf_key("N1", "N3"),
        tf_key("N2", "B"),
        tf_key("A", "N3"),
        tf_key("N1", "B"),
        p2p_key("A", "N1"),
        p2p_key("N3", "B"),
    }


def test_multipath_plan_is_per_path_disjoint():
    plan = plan_keys(build_multipath([2, 2]), Variant.MULTIPATH)
    per_path = {0: set(), 1: set()}
    for sid in plan.secret_ids:
        suffixes = {lab.split(".")[-1] for lab in sid.ends if "." in lab}
        assert len(suffixes) <= 1
        if suffixes:
            per_path[int(suffixes.pop()) - 1].add(sid)
    assert len(per_path[0]) == len(per_path[1]) == 4


def test_keys_of_lists_only_holders():
    plan = plan_keys(build_ring6(), Variant.RING_V2)
    assert set(plan.keys_of("N1")) == {tf_key("N1", "B"), p2p_key("A", "N1")}
    assert set(plan.keys_of("A")) == {
        tf_key("A", "N2"),
        tf_key("A", "N4"),
        p2p_key("A", "N1"),
        p2p_key("A", "N3"),
    }


def test_variant_topology_compatibility():
    with pytest.raises(ValueError):
        check_compatible(build_chain(3), Variant.CHAIN2)
    with pytest.raises(ValueError):
        check_compatible(build_ring6(), Variant.CHAIN_M)
    check_compatible(build_chain(2), Variant.CHAIN2)


def test_establish_is_deterministic_and_plan_ordered():
    plan = plan_keys(build_chain(3), Variant.CHAIN_M)
    s1 = establish(plan, 32, random.Random(5))
    s2 = establish(plan, 32, random.Random(5))
    assert [sid.name for sid in s1.ids()] == [sid.name for sid in plan.secret_ids]
    assert all(s1[sid] == s2[sid] for sid in plan.secret_ids)


def test_hardware_report_ring():
    report = cm_report(plan_keys(build_ring6(), Variant.RING_V2))
    assert report.needs_source("A") and not report.needs_measurement("A")
    assert report.needs_source("B") and not report.needs_measurement("B")
    for lab in ("N1", "N2", "N3", "N4"):
        assert report.needs_source(lab) and report.needs_measurement(lab)


def test_hardware_report_reach_relays_measure():
    report = cm_report(plan_keys(build_reach_chain(3, 2), Variant.REACH_T))
    # N2 relays both A..B-spanning pairs; N1 and N3 each relay one and
    # also source toward their endpoint link
    for lab in ("N1", "N2", "N3"):
        assert report.needs_measurement(lab)
    assert not report.needs_measurement("A")
    assert not report.needs_measurement("B")


def test_oracle_text_round_trip_and_filtering():
    plan = plan_keys(build_ring6(), Variant.RING_V2)
    store = establish(plan, 16, random.Random(2))
    text = key_oracle_text(store)
    full = parse_key_oracle(text, 16)
    assert set(full) == set(store.ids())
    assert all(full[sid] == store[sid] for sid in store.ids())
    n1 = parse_key_oracle(text, 16, node_label="N1")
    assert set(n1) == {tf_key("N1", "B"), p2p_key("A", "N1")}


def test_oracle_parse_rejects_bad_lines():
    with pytest.raises(ValueError):
        parse_key_oracle("K[A,N2]\tzz\n", 8)
    with pytest.raises(ValueError):
        parse_key_oracle("K[A,N2] 00\n", 8)  # tab-separated, not space
    with pytest.raises(ValueError):
        parse_key_oracle("X[A@]\t00\n", 8)


def test_oracle_text_sorted_by_name():
    plan = plan_keys(build_ring6(), Variant.RING_V1)
    store = establish(plan, 8, random.Random(0))
    store.sample(nonce("A"), random.Random(1))
    names = [line.split("\t")[0] for line in key_oracle_text(store).splitlines()]
    assert names == sorted(names)
