import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qshape_collapse.netcore import (
    MAX_UNITS,
    NetworkError,
    NetworkState,
    and_dyad,
    build_network,
    decode,
    disconnected_dyad,
    self_loop_dyad,
    encode,
    label,
    label_order,
    load_network,
    network_to_dict,
    next_state_distribution,
    swap_dyad,
)


@given(st.integers(1, 10).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, 2**n - 1))))
def test_bit_roundtrip(args):
    n, idx = args
    bits = decode(idx, n)
    assert encode(bits) == idx
    assert NetworkState.from_label(label(idx, n)).index == idx


def test_label_reads_unit_zero_first():
    # [10] means A=1, B=0 and unit 0 is the least-significant bit
    assert NetworkState.from_label("[10]").index == 1
    assert label(2, 2) == "[01]"
    assert list(label_order(2)) == [0, 2, 1, 3]


def test_swap_dyad_transition():
    net = swap_dyad()
    p = next_state_distribution(net, "[10]")
    assert p[NetworkState.from_label("[01]").index] == 1.0
    assert next_state_distribution(net, "[00]")[0] == 1.0


def test_and_dyad_transitions():
    net = and_dyad()
    assert next_state_distribution(net, "[11]")[3] == 1.0
    assert next_state_distribution(net, "[10]")[0] == 1.0


def test_self_copy_is_identity():
    net = build_network([{"type": "copy", "input": "A"}], ["A"])
    assert np.array_equal(net.tpm, np.eye(2))
    assert np.array_equal(self_loop_dyad().tpm, np.eye(4))
    assert np.allclose(disconnected_dyad().tpm, 0.25)


def test_tpm_rows_and_determinism():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(1, 5))
        names = "ABCD"[:n]
        rules = [{"type": "table", "inputs": list(names), "p_on": rng.random(2**n).tolist()} for _ in range(n)]
        net = build_network(rules, list(names))
        assert np.allclose(net.tpm.sum(axis=1), 1, atol=1e-12)
        det = build_network([{"type": "table", "inputs": list(names), "p_on": rng.integers(0, 2, 2**n).tolist()} for _ in range(n)], list(names))
        assert np.all((det.tpm == 1).sum(axis=1) == 1)


def test_noise_unit_uniform():
    net = build_network([{"type": "noise", "p_on": 0.5}], ["A"])
    assert np.allclose(next_state_distribution(net, 0), [0.5, 0.5])


@pytest.mark.parametrize(
    "rules",
    [
        [],
        [{"type": "copy", "input": "Z"}],
        [{"type": "copy", "input": 3}],
        [{"type": "frobnicate", "inputs": []}],
        [{"type": "table", "inputs": ["A"], "p_on": [0.5]}],
    ],
)
def test_construction_errors(rules):
    with pytest.raises(NetworkError):
        build_network(rules, ["A"][: max(1, len(rules))] if rules else None)


def test_unit_cap():
    rules = [{"type": "noise", "p_on": 0.5}] * (MAX_UNITS + 1)
    with pytest.raises(NetworkError):
        build_network(rules)


def test_load_roundtrip(tmp_path):
    doc = network_to_dict(and_dyad())
    path = tmp_path / "net.json"
    path.write_text(json.dumps({**doc, "state": "[11]"}))
    net, state = load_network(path)
    assert np.array_equal(net.tpm, and_dyad().tpm)
    assert state.index == 3


def test_connectivity():
    assert swap_dyad().connectivity().tolist() == [[0, 1], [1, 0]]
    assert self_loop_dyad().connectivity().tolist() == [[1, 0], [0, 1]]
    assert disconnected_dyad().connectivity().tolist() == [[0, 0], [0, 0]]
