import numpy as np
import pytest

import oracles
from qshape_collapse.iit3 import (
    Cut,
    IITError,
    analyze_system,
    big_phi,
    cause_repertoire,
    effect_repertoire,
    mechanism_partitions,
    phi_max,
    qshape,
    qshape_table,
    small_phi,
    system_cuts,
    transition_irreducibility,
)
from qshape_collapse.netcore import and_dyad, build_network, disconnected_dyad, label_order, self_loop_dyad, swap_dyad


def ordered(rep):
    return rep.probs[label_order(len(rep.purview))]


def test_effect_repertoires_swap():
    net = swap_dyad()
    assert np.allclose(ordered(effect_repertoire(net, "[10]", "AB", "AB")), [0, 1, 0, 0])
    assert np.allclose(ordered(effect_repertoire(net, "[10]", "A", "AB")), [0, 0.5, 0, 0.5])
    assert np.allclose(effect_repertoire(net, "[10]", (), "AB").probs, 0.25)


def test_cause_repertoires_swap():
    net = swap_dyad()
    assert np.allclose(ordered(cause_repertoire(net, "[10]", "AB", "AB")), [0, 1, 0, 0])
    # B's previous value equals A's current value
    assert np.allclose(cause_repertoire(net, "[00]", "A", "B").probs, [1, 0])
    # no causal path from A's past to A's present
    assert np.allclose(cause_repertoire(net, "[10]", "A", "A").probs, [0.5, 0.5])


def test_repertoire_errors():
    with pytest.raises(IITError):
        effect_repertoire(swap_dyad(), "[10]", "A", ())


def test_small_phi_swap():
    net = swap_dyad()
    assert small_phi(net, "[10]", "A").phi == 0.5
    assert small_phi(net, "[10]", "B").phi == 0.5
    assert small_phi(net, "[10]", "AB").phi == 0.0
    phi, cause, effect = small_phi(net, "[10]", "A")
    assert phi == min(cause.phi, effect.phi)


def test_disconnected_dyad_is_empty():
    net = disconnected_dyad()
    for s in range(4):
        q = qshape(net, s)
        assert q.is_null
        assert big_phi(net, s) == 0.0
        assert phi_max(net, s) == 0.0
        for m in ("A", "B", "AB"):
            assert small_phi(net, s, m).phi == 0.0


def test_self_loops_without_interaction():
    # each unit specifies its own past and future, but the pair is reducible
    net = self_loop_dyad()
    for s in range(4):
        assert small_phi(net, s, "A").phi == 0.5
        assert small_phi(net, s, "AB").phi == 0.0
        assert big_phi(net, s) == 0.0
        assert phi_max(net, s) == 0.0


def test_qshape_locations_swap():
    net = swap_dyad()
    q = qshape(net, "[00]")
    locs = {net.subset_name(m.mechanism): (m.phi, m.location.tolist()) for m in q.mechanisms}
    # compared as a set: the assignment of these two locations to A and B is ambiguous under the swap wiring
    assert {tuple(locs["A"][1]), tuple(locs["B"][1])} == {
        (0.5, 0.5, 0, 0, 0.5, 0.5, 0, 0),
        (0.5, 0, 0.5, 0, 0.5, 0, 0.5, 0),
    }
    assert locs["A"][0] == locs["B"][0] == 0.5
    assert q.dimension == 3 * 9
    assert q.flat().size == q.dimension
    assert len(q.points) == 2


def test_big_phi_swap_states():
    net = swap_dyad()
    for s in range(4):
        assert abs(big_phi(net, s) - 1.0) < 1e-12
    assert phi_max(net, "[10]") == 1.0


def test_single_unit_subsystem():
    net = build_network([{"type": "copy", "input": "A"}], ["A"])
    assert big_phi(net, 0) == 0.0
    assert system_cuts((0,)) == []
    assert big_phi(swap_dyad(), "[10]", nodes="A") == 0.0


def test_partitions_and_cuts():
    parts = mechanism_partitions((0,), (0, 1))
    assert all(p.parts[0][0] or p.parts[0][1] for p in parts)
    assert len({frozenset(p.parts) for p in parts}) == len(parts)
    cuts = system_cuts((0, 1, 2))
    assert len(cuts) == 6
    with pytest.raises(IITError):
        Cut((), (1,))


def test_and_dyad_gate_values():
    net = and_dyad()
    assert transition_irreducibility(net, "[00]") == 0.0
    assert transition_irreducibility(net, "[11]") > 0
    assert analyze_system(net, "[11]", variant="xemd").phi == pytest.approx(0.1875)
    assert not qshape(net, "[11]").is_null


def test_qshape_table_rows():
    rows = qshape_table(swap_dyad(), qshape(swap_dyad(), "[10]"))
    assert [r["mechanism"] for r in rows] == ["A", "B", "AB"]
    assert rows[2]["location"] == [0, 1, 0, 0, 0, 1, 0, 0]


def test_against_naive_oracle_sample():
    rng = np.random.default_rng(31)
    for _ in range(3):
        rules = [{"type": "table", "inputs": ["A", "B", "C"], "p_on": rng.integers(0, 2, 8).tolist()} for _ in range(3)]
        net = build_network(rules, ["A", "B", "C"])
        s = int(rng.integers(0, 8))
        assert abs(big_phi(net, s) - oracles.naive_big_phi(net.tpm, 3, s)) < 1e-10
        assert abs(big_phi(net, s, variant="xemd") - oracles.naive_big_phi(net.tpm, 3, s, "xemd")) < 1e-9
