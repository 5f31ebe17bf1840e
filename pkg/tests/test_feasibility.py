import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partial_ia.errors import InvalidInputError, SizeLimitError
from partial_ia.feasibility import (ConstraintAssignment, FreedomConstraintInstance,
                                    brute_force_proper, constraint_surplus, flow_check,
                                    tree_check)
from partial_ia.stage1 import count_instance, design_subspaces, init_streams


def inst(v_t, v_r, c):
    return FreedomConstraintInstance(v_t, v_r, c)


def all_verdicts(x):
    return brute_force_proper(x).proper, tree_check(x).proper, flow_check(x)


def test_two_pairs_proper():
    x = inst([1, 1], [1, 1], [[0, 1], [1, 0]])
    assert all_verdicts(x) == (True, True, True)


def test_no_constraints_always_proper():
    x = inst([0, 3, 0], [2, 0, 0], np.zeros((3, 3), int))
    assert all_verdicts(x) == (True, True, True)
    assert flow_check(inst([0], [0], [[0]]))


def test_single_violation_witness():
    # one constraint on the link Tx 1 -> Rx 0 and no freedoms anywhere
    x = inst([0, 0], [0, 0], [[0, 1], [0, 0]])
    bf, tc = brute_force_proper(x), tree_check(x)
    assert not bf.proper and not tc.proper and not flow_check(x)
    assert bf.witness == (frozenset({1}), frozenset({0}))
    for G_T, G_R in (bf.witness, tc.witness):
        assert constraint_surplus(x, G_T, G_R) > 0
    assert bf.assignment is None and tc.assignment is None


def test_capacity_bound():
    x = inst([0, 1], [1, 0], [[0, 3], [0, 0]])
    assert not flow_check(x)


def test_instance_validation():
    with pytest.raises(InvalidInputError):
        inst([1], [1, 1], [[0]])
    with pytest.raises(InvalidInputError):
        inst([1, 1], [1, 1], [[1, 0], [0, 0]])
    with pytest.raises(InvalidInputError):
        inst([1, 1], [1, 1], [[0, -1], [0, 0]])
    with pytest.raises(SizeLimitError):
        brute_force_proper(inst(np.zeros(15, int), np.zeros(15, int), np.zeros((15, 15), int)))


def test_json_round_trip():
    x = inst([1, 2], [0, 1], [[0, 2], [1, 0]])
    y = FreedomConstraintInstance.from_json(json.dumps(x.to_dict()))
    assert np.array_equal(x.c, y.c) and np.array_equal(x.v_t, y.v_t)
    with pytest.raises(InvalidInputError):
        FreedomConstraintInstance.from_dict({"v_t": [1], "c": [[0]]})


def test_golden_counts(fig3):
    topo, real = fig3
    d = init_streams(topo, real, 1)
    s_t, s_r = design_subspaces(topo, d)
    x = count_instance(d, s_t, s_r, topo)
    assert all_verdicts(x) == (False, False, False)
    d[2] = 0
    s_t, s_r = design_subspaces(topo, d)
    y = count_instance(d, s_t, s_r, topo)
    verdict = tree_check(y)
    assert verdict.proper and brute_force_proper(y).proper and flow_check(y)
    P_t, P_r = verdict.assignment.pressures(y)
    assert (P_t >= 0).all() and (P_r >= 0).all()


def test_verbose_trace_lines():
    x = inst([2, 0], [0, 0], [[0, 0], [2, 0]])
    v = tree_check(x, verbose=True)
    assert v.proper
    assert v.trace and v.trace[0].startswith("root=R1 leaf=T0")
    assert "eps=2" in v.trace[0]


@st.composite
def instances(draw, max_k=4, max_entry=4):
    K = draw(st.integers(1, max_k))
    ent = st.integers(0, max_entry)
    v_t = draw(st.lists(ent, min_size=K, max_size=K))
    v_r = draw(st.lists(ent, min_size=K, max_size=K))
    c = np.array(draw(st.lists(ent, min_size=K * K, max_size=K * K))).reshape(K, K)
    np.fill_diagonal(c, 0)
    return inst(v_t, v_r, c)


@settings(max_examples=300, deadline=None)
@given(instances())
def test_three_way_agreement(x):
    bf, tc, fc = brute_force_proper(x), tree_check(x), flow_check(x)
    assert bf.proper == tc.proper == fc
    if tc.proper:
        a = tc.assignment
        assert isinstance(a, ConstraintAssignment) and a.is_partition_of(x)
        P_t, P_r = a.pressures(x)
        assert (P_t >= 0).all() and (P_r >= 0).all()
        assert tc.witness is None
    else:
        assert constraint_surplus(x, *tc.witness) > 0
        assert constraint_surplus(x, *bf.witness) > 0


@settings(max_examples=150, deadline=None)
@given(instances(), st.data())
def test_more_freedom_never_hurts(x, data):
    if not tree_check(x).proper:
        return
    k = data.draw(st.integers(0, x.K - 1))
    bump = data.draw(st.integers(1, 3))
    v_t, v_r = x.v_t.copy(), x.v_r.copy()
    if data.draw(st.booleans()):
        v_t[k] += bump
    else:
        v_r[k] += bump
    y = inst(v_t, v_r, x.c)
    assert all_verdicts(y) == (True, True, True)


def test_step_count_is_deterministic():
    rng = np.random.default_rng(0)
    c = rng.integers(0, 4, (12, 12))
    np.fill_diagonal(c, 0)
    x = inst(rng.integers(0, 20, 12), rng.integers(0, 20, 12), c)
    a, b = tree_check(x), tree_check(x)
    assert a.steps == b.steps and a.proper == b.proper
    if a.proper:
        assert np.array_equal(a.assignment.c_t, b.assignment.c_t)
