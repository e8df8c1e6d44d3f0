"""Binary networks and their state-transition structure.

State indexing: unit 0 is the least-significant bit of a state index. Labels
are written left to right starting with unit 0, so for a dyad AB the label
``[10]`` means A=1, B=0 and has index 1.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

MAX_UNITS = 12
ROW_TOL = 1e-12


class NetworkError(ValueError):
    """Raised for malformed network definitions."""


@dataclass(frozen=True)
class UnitRule:
    """Update rule for one unit.

    ``kind`` is one of ``copy``, ``and``, ``or``, ``xor``, ``table`` or
    ``noise``. For ``table`` rules ``p_on[k]`` is the probability that the
    unit is ON given that the inputs encode ``k`` (first input = LSB).
    """

    kind: str
    inputs: tuple[int, ...] = ()
    p_on: tuple[float, ...] = ()

    def on_probability(self, prev_bits: Sequence[int]) -> float:
        vals = [prev_bits[i] for i in self.inputs]
        if self.kind == "copy":
            return float(vals[0])
        if self.kind == "and":
            return float(all(vals))
        if self.kind == "or":
            return float(any(vals))
        if self.kind == "xor":
            return float(sum(vals) % 2)
        if self.kind == "table":
            k = sum(v << j for j, v in enumerate(vals))
            return float(self.p_on[k])
        if self.kind == "noise":
            return float(self.p_on[0])
        raise NetworkError(f"unknown rule kind {self.kind!r}")


def encode(bits: Sequence[int]) -> int:
    return sum(int(b) << i for i, b in enumerate(bits))


def decode(index: int, n: int) -> tuple[int, ...]:
    return tuple((index >> i) & 1 for i in range(n))


def label(index: int, n: int) -> str:
    return "[" + "".join(str(b) for b in decode(index, n)) + "]"


def parse_label(text: str) -> tuple[int, ...]:
    s = text.strip().strip("[]|>⟩ ")
    if not s or any(c not in "01" for c in s):
        raise NetworkError(f"bad state label {text!r}")
    return tuple(int(c) for c in s)


def label_order(n: int) -> np.ndarray:
    """Indices of all states sorted by their left-to-right label string.

    ``vec[label_order(n)]`` rewrites an index-ordered vector in the
    ``[00], [01], [10], [11]`` ordering used when printing dyad vectors.
    """
    return np.array(sorted(range(2**n), key=lambda i: label(i, n)), dtype=int)


@dataclass(frozen=True)
class NetworkState:
    bits: tuple[int, ...]

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise NetworkError(f"state bits must be 0/1, got {self.bits}")

    @property
    def index(self) -> int:
        return encode(self.bits)

    @property
    def n(self) -> int:
        return len(self.bits)

    @classmethod
    def from_index(cls, index: int, n: int) -> "NetworkState":
        return cls(decode(index, n))

    @classmethod
    def from_label(cls, text: str) -> "NetworkState":
        return cls(parse_label(text))

    def __str__(self) -> str:
        return label(self.index, self.n)


@dataclass(frozen=True, eq=False)
class BinaryNetwork:
    """A network of binary units with conditionally independent updates.

    ``cpt[i]`` has shape ``(2,) * n_units``; entry ``cpt[i][s]`` is the
    probability that unit ``i`` is ON at the next step given previous state
    ``s`` (axis ``j`` is unit ``j``).
    """

    n_units: int
    unit_rules: tuple[UnitRule, ...]
    names: tuple[str, ...]
    cpt: np.ndarray = field(repr=False)
    tpm: np.ndarray = field(repr=False)

    @property
    def n_states(self) -> int:
        return 2**self.n_units

    def unit_index(self, name: str | int) -> int:
        if isinstance(name, (int, np.integer)):
            if not 0 <= int(name) < self.n_units:
                raise NetworkError(f"unit index {name} out of range")
            return int(name)
        try:
            return self.names.index(name)
        except ValueError:
            raise NetworkError(f"unknown unit {name!r}") from None

    def units(self, spec: str | Sequence[str | int]) -> tuple[int, ...]:
        """Resolve ``"AB"``, ``["A", "B"]`` or ``[0, 1]`` to sorted unit indices."""
        if isinstance(spec, str):
            if spec in self.names:
                items: Sequence[str | int] = [spec]
            else:
                items = list(spec)
        else:
            items = spec
        return tuple(sorted({self.unit_index(u) for u in items}))

    def subset_name(self, units: Sequence[int]) -> str:
        return "".join(self.names[u] for u in units) if units else "∅"

    def state(self, spec: str | int | Sequence[int] | NetworkState) -> NetworkState:
        if isinstance(spec, NetworkState):
            st = spec
        elif isinstance(spec, str):
            st = NetworkState.from_label(spec)
        elif isinstance(spec, (int, np.integer)):
            if not 0 <= int(spec) < self.n_states:
                raise NetworkError(f"state index {spec} out of range")
            st = NetworkState.from_index(int(spec), self.n_units)
        else:
            st = NetworkState(tuple(int(b) for b in spec))
        if st.n != self.n_units:
            raise NetworkError(f"state {st} has {st.n} units, network has {self.n_units}")
        return st

    def connectivity(self) -> np.ndarray:
        """``cm[i, j] = 1`` when unit ``j``'s update depends on unit ``i``."""
        n = self.n_units
        cm = np.zeros((n, n), dtype=int)
        for j in range(n):
            for i in range(n):
                lo = np.take(self.cpt[j], 0, axis=i)
                hi = np.take(self.cpt[j], 1, axis=i)
                cm[i, j] = int(not np.allclose(lo, hi, atol=1e-14))
        return cm


def _cpt_from_rule(rule: UnitRule, n: int) -> np.ndarray:
    out = np.empty((2,) * n)
    for bits in itertools.product((0, 1), repeat=n):
        out[bits] = rule.on_probability(bits)
    return out


def tpm_from_cpt(cpt: np.ndarray) -> np.ndarray:
    """Full state-by-state TPM (rows: current index, cols: next index)."""
    n = cpt.shape[0]
    ns = 2**n
    # row s of `on` is the ON-probability of every unit given state s
    on = np.stack([cpt[i].reshape(-1, order="F") for i in range(n)], axis=1)
    bits = (np.arange(ns)[:, None] >> np.arange(n)[None, :]) & 1
    tpm = np.ones((ns, ns))
    for i in range(n):
        tpm *= np.where(bits[None, :, i] == 1, on[:, i, None], 1.0 - on[:, i, None])
    return tpm


def _as_rule(raw: Any, names: Sequence[str], n: int) -> UnitRule:
    if isinstance(raw, UnitRule):
        rule = raw
    else:
        if not isinstance(raw, Mapping):
            raise NetworkError(f"rule must be an object, got {raw!r}")
        kind = str(raw.get("type", raw.get("kind", ""))).lower()
        refs = raw.get("inputs", raw.get("input", []))
        if isinstance(refs, (str, int)):
            refs = [refs]

        def idx(r):
            if isinstance(r, int):
                return r
            if r in names:
                return names.index(r)
            raise NetworkError(f"rule references unknown unit {r!r}")

        inputs = tuple(idx(r) for r in refs)
        p_on = raw.get("p_on", ())
        if isinstance(p_on, (int, float)):
            p_on = (float(p_on),)
        rule = UnitRule(kind, inputs, tuple(float(p) for p in p_on))
    if rule.kind not in {"copy", "and", "or", "xor", "table", "noise"}:
        raise NetworkError(f"unknown rule type {rule.kind!r}")
    for i in rule.inputs:
        if not 0 <= i < n:
            raise NetworkError(f"rule input {i} is not a unit of this {n}-unit network")
    if rule.kind == "copy" and len(rule.inputs) != 1:
        raise NetworkError("copy rule takes exactly one input")
    if rule.kind in {"and", "or", "xor"} and not rule.inputs:
        raise NetworkError(f"{rule.kind} rule needs at least one input")
    if rule.kind == "table" and len(rule.p_on) != 2 ** len(rule.inputs):
        raise NetworkError("table rule needs 2**len(inputs) probabilities")
    if rule.kind == "noise" and len(rule.p_on) != 1:
        raise NetworkError("noise rule takes a single p_on")
    if any(not 0.0 <= p <= 1.0 for p in rule.p_on):
        raise NetworkError("probabilities must lie in [0, 1]")
    return rule


def build_network(rules: Sequence[Any], names: Sequence[str] | None = None) -> BinaryNetwork:
    """Build a network from per-unit rules and derive its TPM.

    ``rules`` may hold :class:`UnitRule` objects or JSON-style dicts such as
    ``{"type": "copy", "input": "B"}``.
    """
    n = len(rules)
    if n == 0:
        raise NetworkError("network needs at least one unit")
    if n > MAX_UNITS:
        raise NetworkError(f"networks are capped at {MAX_UNITS} units, got {n}")
    if names is None:
        names = [chr(ord("A") + i) for i in range(n)] if n <= 26 else [f"u{i}" for i in range(n)]
    names = tuple(str(x) for x in names)
    if len(names) != n or len(set(names)) != n:
        raise NetworkError("unit names must be unique and match the rule count")
    parsed = tuple(_as_rule(r, names, n) for r in rules)
    cpt = np.stack([_cpt_from_rule(r, n) for r in parsed])
    tpm = tpm_from_cpt(cpt)
    assert np.allclose(tpm.sum(axis=1), 1.0, atol=ROW_TOL)
    return BinaryNetwork(n, parsed, names, cpt, tpm)


def network_from_cpt(cpt: np.ndarray, names: Sequence[str] | None = None) -> BinaryNetwork:
    """Wrap an explicit per-unit ON-probability array of shape ``(n,) + (2,)*n``."""
    cpt = np.asarray(cpt, dtype=float)
    n = cpt.shape[0]
    if cpt.shape != (n,) + (2,) * n:
        raise NetworkError(f"cpt must have shape (n, 2, ..., 2), got {cpt.shape}")
    if n > MAX_UNITS:
        raise NetworkError(f"networks are capped at {MAX_UNITS} units, got {n}")
    rules = []
    for i in range(n):
        flat = cpt[i].reshape(-1, order="F")
        rules.append(UnitRule("table", tuple(range(n)), tuple(float(p) for p in flat)))
    names = tuple(names) if names else tuple(chr(ord("A") + i) for i in range(n))
    return BinaryNetwork(n, tuple(rules), names, cpt.copy(), tpm_from_cpt(cpt))


def next_state_distribution(net: BinaryNetwork, s: NetworkState | str | int) -> np.ndarray:
    """TPM row of ``s``; index-ordered distribution over next states."""
    return net.tpm[net.state(s).index].copy()


def load_network(source: str | Path | Mapping[str, Any]) -> tuple[BinaryNetwork, NetworkState | None]:
    """Read a network spec (``units``, ``rules``, optional ``state``)."""
    if isinstance(source, Mapping):
        doc = source
    else:
        doc = json.loads(Path(source).read_text())
    if "units" not in doc or "rules" not in doc:
        raise NetworkError("network spec needs 'units' and 'rules'")
    units = doc["units"]
    rules = doc["rules"]
    if isinstance(rules, Mapping):
        missing = [u for u in units if u not in rules]
        if missing:
            raise NetworkError(f"no rule given for units {missing}")
        rules = [rules[u] for u in units]
    net = build_network(rules, units)
    state = net.state(doc["state"]) if doc.get("state") is not None else None
    return net, state


def network_to_dict(net: BinaryNetwork) -> dict[str, Any]:
    rules = []
    for r in net.unit_rules:
        d: dict[str, Any] = {"type": r.kind}
        if r.inputs:
            d["inputs"] = [net.names[i] for i in r.inputs]
        if r.p_on:
            d["p_on"] = list(r.p_on) if r.kind == "table" else r.p_on[0]
        rules.append(d)
    return {"units": list(net.names), "rules": rules}


# Reference networks used throughout tests and scenarios.

def swap_dyad() -> BinaryNetwork:
    return build_network([{"type": "copy", "input": "B"}, {"type": "copy", "input": "A"}], ["A", "B"])


def and_dyad() -> BinaryNetwork:
    """Two AND gates, each reading itself and the other unit."""
    return build_network(
        [{"type": "and", "inputs": ["A", "B"]}, {"type": "and", "inputs": ["A", "B"]}], ["A", "B"]
    )


def disconnected_dyad() -> BinaryNetwork:
    """Two units with no connections at all (each a fair coin)."""
    return build_network([{"type": "noise", "p_on": 0.5}, {"type": "noise", "p_on": 0.5}], ["A", "B"])


def self_loop_dyad() -> BinaryNetwork:
    """Two non-interacting units, each copying its own previous state."""
    return build_network([{"type": "copy", "input": "A"}, {"type": "copy", "input": "B"}], ["A", "B"])
