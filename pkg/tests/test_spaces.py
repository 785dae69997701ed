import numpy as np
import pytest

from gasmld.channel import (PSK2, QPSK, SystemConfig, generate_instance,
                            objective_direct, random_payload_bits, received_slot)
from gasmld.errors import CapacityError
from gasmld.hubo import (HADAMARD_FULL, W_STATE_REDUCED, build_hubo, build_registry,
                         enumerate_search_space, evaluate)
from gasmld.spaces import from_channel, from_polynomial, poly_values_over_keys


def make(N=2, M=2, tau_max=1, modulation=PSK2, seed=3, t=0):
    cfg = SystemConfig(N=N, M=M, tau_max=tau_max, modulation=modulation,
                       T_P=64, T_D=4, snr_db=15.0, seed=seed)
    inst = generate_instance(cfg)
    bits = random_payload_bits(cfg, t)
    slot = received_slot(inst, cfg, t, bits)
    reg = build_registry(cfg)
    return cfg, inst, slot, reg


@pytest.mark.parametrize("modulation", [PSK2, QPSK])
@pytest.mark.parametrize("prep", [W_STATE_REDUCED, HADAMARD_FULL])
def test_space_matches_objective_direct(modulation, prep):
    cfg, inst, slot, reg = make(modulation=modulation)
    space = from_channel(inst, slot.r, 0, cfg, prep, reg)
    seen = set()
    for ordinal in range(space.n_states):
        x = space.assignment(ordinal)
        b, c, d = reg.split_assignment(x)
        expect = objective_direct(inst, slot.r, 0, b, d)
        assert space.value_of(ordinal) == pytest.approx(expect, rel=1e-10, abs=1e-12)
        seen.add(int(space.key_indices[ordinal]))
    # key indices enumerate exactly the preparation-consistent assignments
    expect_keys = set()
    for x in enumerate_search_space(reg, prep):
        expect_keys.add(int("".join(map(str, x)), 2))
    assert seen == expect_keys


def test_space_matches_polynomial_values():
    cfg, inst, slot, reg = make(seed=9)
    poly, _ = build_hubo(inst, slot.r, 0, cfg)
    ch = from_channel(inst, slot.r, 0, cfg, W_STATE_REDUCED, reg)
    po = from_polynomial(poly, reg, W_STATE_REDUCED)
    ch_map = {int(k): v for k, v in zip(ch.key_indices, ch.e_values)}
    po_map = {int(k): v for k, v in zip(po.key_indices, po.e_values)}
    assert set(ch_map) == set(po_map)
    for k, v in ch_map.items():
        assert v == pytest.approx(po_map[k], rel=1e-9, abs=1e-9)


def test_poly_values_over_keys_matches_evaluate():
    cfg, inst, slot, reg = make(seed=10, M=2, tau_max=1)
    poly, _ = build_hubo(inst, slot.r, 0, cfg)
    e = poly_values_over_keys(poly, reg.q_k)
    rng = np.random.default_rng(1)
    for _ in range(30):
        idx = int(rng.integers(1 << reg.q_k))
        x = [(idx >> (reg.q_k - 1 - i)) & 1 for i in range(reg.q_k)]
        assert e[idx] == pytest.approx(evaluate(poly, x), rel=1e-12)


def test_count_below_and_sampling():
    cfg, inst, slot, reg = make(seed=11)
    space = from_channel(inst, slot.r, 0, cfg, W_STATE_REDUCED, reg)
    y = float(np.median(space.e_values))
    ns = space.count_below(y)
    assert ns == int(np.sum(space.e_values < y))
    rng = np.random.default_rng(2)
    for _ in range(50):
        assert space.value_of(space.sample_marked(ns, rng)) < y
        assert space.value_of(space.sample_unmarked(ns, rng)) >= y


def test_capacity_guard():
    cfg = SystemConfig(N=2, M=16, tau_max=2, seed=0)
    inst = generate_instance(cfg)
    bits = random_payload_bits(cfg, 0)
    slot = received_slot(inst, cfg, 0, bits)
    reg = build_registry(cfg)
    with pytest.raises(CapacityError):
        from_channel(inst, slot.r, 0, cfg, W_STATE_REDUCED, reg)
