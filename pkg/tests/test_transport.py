import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from qshape_collapse.iit3 import analyze_system, qshape
from qshape_collapse.netcore import disconnected_dyad, swap_dyad
from qshape_collapse.transport import (
    TransportError,
    emd,
    emd_plan,
    emd_star,
    emd_star_xemd,
    hamming,
    min_cost_flow,
    qshape_distance,
)


def distributions(max_bits=3):
    def build(n):
        return st.lists(st.floats(0, 1), min_size=2**n, max_size=2**n).filter(lambda v: sum(v) > 1e-3).map(
            lambda v: np.array(v) / sum(v)
        )

    return st.integers(1, max_bits).flatmap(lambda n: st.tuples(build(n), build(n), build(n)))


@settings(max_examples=60, deadline=None)
@given(distributions())
def test_metric_properties(triple):
    p, q, r = triple
    assert emd(p, p) == 0.0
    assert emd(p, q) >= 0
    assert abs(emd(p, q) - emd(q, p)) < 1e-9
    assert emd(p, r) <= emd(p, q) + emd(q, r) + 1e-9


@settings(max_examples=40, deadline=None)
@given(distributions(), st.data())
def test_bit_permutation_equivariance(triple, data):
    p, q, _ = triple
    n = int(np.log2(p.size))
    perm = data.draw(st.permutations(range(n)))
    flip = data.draw(st.integers(0, 2**n - 1))

    def relabel(v):
        out = np.zeros_like(v)
        for s in range(v.size):
            t = sum(((s >> perm[k]) & 1) << k for k in range(n)) ^ flip
            out[t] = v[s]
        return out

    assert abs(emd(p, q) - emd(relabel(p), relabel(q))) < 1e-9


@settings(max_examples=40, deadline=None)
@given(distributions())
def test_matches_lp_oracle(triple):
    p, q, _ = triple
    assert abs(emd(p, q) - oracles.emd_lp(p, q)) < 1e-8


def test_examples():
    assert emd([1, 0, 0, 0], [0, 0, 1, 0]) == 1.0
    assert emd([0, 0.5, 0, 0.5], [0.25] * 4) == 0.5
    assert emd([1, 0], [0, 1]) == 1.0
    assert emd([1, 0, 0, 0], [0, 0, 0, 1]) == 2.0


def test_plan_conserves_mass():
    rng = np.random.default_rng(4)
    for _ in range(30):
        m = 2 ** int(rng.integers(1, 5))
        p, q = rng.dirichlet(np.ones(m)), rng.dirichlet(np.ones(m))
        plan = emd_plan(p, q)
        M = plan.as_matrix(m)
        assert np.allclose(M.sum(axis=1), p, atol=1e-10)
        assert np.allclose(M.sum(axis=0), q, atol=1e-10)
        cost = sum(mass * hamming(s, t) for s, t, mass in plan.flows)
        assert abs(cost - plan.cost) < 1e-12
        assert abs(plan.cost - emd(p, q)) < 1e-9


def test_min_cost_flow_directed():
    # asymmetric graph: 0 -> 1 -> 2 and an expensive 0 -> 2 shortcut
    adj = [[(1, 1.0), (2, 5.0)], [(2, 1.0)], []]
    cost, flow = min_cost_flow(adj, [1.0, 0.0, -1.0])
    assert cost == 2.0
    assert flow == {(0, 1): 1.0, (1, 2): 1.0}
    with pytest.raises(TransportError):
        min_cost_flow([[], []], [1.0, -1.0])


@pytest.mark.parametrize(
    "p, q",
    [([0.5, 0.5], [0.25] * 4), ([0.3, 0.3, 0.4], [0.3, 0.3, 0.4]), ([0.5, 0.6], [1, 0]), ([1.5, -0.5], [1, 0])],
)
def test_input_errors(p, q):
    with pytest.raises(TransportError):
        emd(p, q)


def test_emd_star_golden():
    a = analyze_system(swap_dyad(), "[10]")
    assert abs(emd_star(a.qshape, a.partitioned) - 1.0) < 1e-10
    q = qshape(swap_dyad(), "[10]")
    assert emd_star(q, q) == 0.0
    assert emd_star_xemd(q, q) == 0.0


def test_emd_star_states_10_vs_00():
    net = swap_dyad()
    q10, q00 = qshape(net, "[10]"), qshape(net, "[00]")
    # equal weights: the mechanism-by-mechanism form vanishes; the transport form does not
    assert emd_star(q10, q00) == 0.0
    oq10 = oracles.naive_qshape(oracles.on_table(net.tpm, 2), 2, 1)
    oq00 = oracles.naive_qshape(oracles.on_table(net.tpm, 2), 2, 0)
    expected = oracles.xemd_distance(oq10, oq00)
    assert expected > 0
    assert abs(emd_star_xemd(q10, q00) - expected) < 1e-10


def test_qshape_distance_dispatch():
    net = disconnected_dyad()
    q = qshape(net, 0)
    assert qshape_distance(q, q, "literal") == 0.0
    with pytest.raises(TransportError):
        qshape_distance(q, q, "bogus")
    with pytest.raises(TransportError):
        emd_star(q, qshape(swap_dyad(), 0, nodes="A"))


def test_xemd_against_oracle_random():
    from test_acceptance import _table_net

    rng = np.random.default_rng(8)
    for _ in range(6):
        net = _table_net(2, [np.round(rng.random(4), 2) for _ in range(2)])
        on = oracles.on_table(net.tpm, 2)
        for a, b in itertools.combinations(range(4), 2):
            ref = oracles.xemd_distance(oracles.naive_qshape(on, 2, a), oracles.naive_qshape(on, 2, b))
            assert abs(emd_star_xemd(qshape(net, a), qshape(net, b)) - ref) < 1e-9
