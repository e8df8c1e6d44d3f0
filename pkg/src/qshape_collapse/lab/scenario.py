"""Scenario files: parsing, validation and construction of the dynamical system."""

from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from ..dynamics import CollapseSystem, DynamicsConfig, make_system
from ..netcore import MAX_UNITS, BinaryNetwork, NetworkError, and_dyad, disconnected_dyad, load_network, parse_label, encode, self_loop_dyad, swap_dyad
from ..qcore import PAULI_X, PAULI_Y, PAULI_Z, HermitianOperator, QuantumState
from ..qiit import Gate, QuasiClassicalBasis, quasi_classical_basis

log = logging.getLogger(__name__)

KINDS = ("collapse", "superselection", "ensemble", "zeno", "ruin")
NORM_EXACT = 1e-9
NORM_REPAIR = 1e-3
BUILTIN_NETWORKS = {"swap_dyad": swap_dyad, "and_dyad": and_dyad, "disconnected_dyad": disconnected_dyad,
                    "self_loop_dyad": self_loop_dyad}
_PAULI = {"I": np.eye(2, dtype=complex), "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}
_CONFIG_FIELDS = set(DynamicsConfig.__dataclass_fields__) | {"lambda"}


class ScenarioError(ValueError):
    """Validation failure; ``field`` names the offending entry."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None, path: str | None = None):
        self.field = field
        self.line = line
        self.path = path
        self.message = message
        where = ""
        if path:
            where = f"{path}:{line}: " if line else f"{path}: "
        super().__init__(f"{where}{field + ': ' if field else ''}{message}")


@dataclass
class Scenario:
    name: str
    kind: str
    doc: dict
    config: DynamicsConfig
    network: BinaryNetwork | None = None
    amplitudes: np.ndarray | None = None
    hamiltonian: HermitianOperator | None = None
    trials: int = 1
    sweep: tuple[str, list] | None = None
    analysis: tuple[str, ...] = ("frequencies", "martingale", "collapse_times")
    source: Path | None = None
    notices: list[str] = field(default_factory=list)

    def basis(self) -> QuasiClassicalBasis:
        gate = Gate(self.doc.get("gate", Gate.FORWARD.value))
        return quasi_classical_basis(self.network, gate=gate)

    def system(self, config: DynamicsConfig | None = None, basis: QuasiClassicalBasis | None = None) -> CollapseSystem:
        if self.network is None:
            raise ScenarioError("scenario has no network", "network")
        basis = basis or self.basis()
        return make_system(basis, QuantumState(self.amplitudes), config or self.config, self.hamiltonian)

    def with_overrides(self, seed: int | None = None, trials: int | None = None) -> "Scenario":
        sc = copy.copy(self)
        sc.doc = copy.deepcopy(self.doc)
        if seed is not None:
            sc.config = sc.config.replace(seed=seed)
            sc.doc.setdefault("dynamics", {})["seed"] = seed
        if trials is not None:
            if trials < 1:
                raise ScenarioError("must be >= 1", "trials")
            sc.trials = trials
            sc.doc["trials"] = trials
        return sc


def _line_of(text: str | None, key: str) -> int | None:
    if not text:
        return None
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


def _resolve_network(spec: Any, base: Path | None) -> BinaryNetwork:
    if isinstance(spec, Mapping):
        net, _ = load_network(spec)
        return net
    if not isinstance(spec, str):
        raise NetworkError("network must be an inline object, a builtin name or a file path")
    if spec in BUILTIN_NETWORKS:
        return BUILTIN_NETWORKS[spec]()
    candidates = [Path(spec)]
    if base is not None:
        candidates.insert(0, base / spec)
    candidates.append(Path(str(resources.files("qshape_collapse.lab") / "networks" / spec)))
    for p in candidates:
        if p.is_file():
            net, _ = load_network(p)
            return net
    raise NetworkError(f"network {spec!r} is neither builtin nor an existing file")


def _amplitude(value: Any, where: str) -> complex:
    if isinstance(value, bool):
        raise ScenarioError(f"amplitude must be a number or [re, im], got {value!r}", where)
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2 and all(isinstance(v, (int, float)) for v in value):
        return complex(value[0], value[1])
    raise ScenarioError(f"amplitude must be a number or [re, im], got {value!r}", where)


def parse_amplitudes(raw: Any, net: BinaryNetwork, notices: list[str] | None = None) -> np.ndarray:
    """Amplitude map ``{"[10]": a, ...}`` or full list in index order -> normalized vector."""
    d = net.n_states
    amps = np.zeros(d, dtype=complex)
    if isinstance(raw, Mapping):
        if not raw:
            raise ScenarioError("no amplitudes given", "initial_state")
        for key, value in raw.items():
            where = f"initial_state[{key!r}]"
            try:
                bits = parse_label(key) if isinstance(key, str) and key.startswith("[") else None
                idx = encode(bits) if bits is not None else net.state(key).index
            except (NetworkError, ValueError) as exc:
                raise ScenarioError(f"not a basis state label ({exc})", where) from None
            if bits is not None and len(bits) != net.n_units:
                raise ScenarioError(f"label has {len(bits)} bits but the network has {net.n_units} units", where)
            amps[idx] += _amplitude(value, where)
    elif isinstance(raw, list):
        if len(raw) != d:
            raise ScenarioError(f"expected {d} amplitudes for {net.n_units} units, got {len(raw)}", "initial_state")
        for i, v in enumerate(raw):
            amps[i] = _amplitude(v, f"initial_state[{i}]")
    else:
        raise ScenarioError("must be a label->amplitude object or a list", "initial_state")
    norm = float(np.linalg.norm(amps))
    if abs(norm - 1.0) <= NORM_EXACT:
        return amps / norm
    if abs(norm - 1.0) <= NORM_REPAIR:
        msg = f"initial_state norm {norm:.9f} renormalized to 1"
        log.info(msg)
        if notices is not None:
            notices.append(msg)
        return amps / norm
    raise ScenarioError(f"amplitudes have norm {norm:.6g}; must be 1 within {NORM_REPAIR}", "initial_state")


def parse_hamiltonian(raw: Any, net: BinaryNetwork) -> HermitianOperator:
    """Sum of Pauli products, e.g. ``[{"coeff": 0.5, "paulis": {"A": "X"}}]``.

    The factor for unit k acts on bit k of the state index.
    """
    n = net.n_units
    H = np.zeros((2**n, 2**n), dtype=complex)
    if not isinstance(raw, list):
        raise ScenarioError("must be a list of Pauli terms", "hamiltonian")
    for t, term in enumerate(raw):
        where = f"hamiltonian[{t}]"
        if not isinstance(term, Mapping) or "coeff" not in term:
            raise ScenarioError("term needs 'coeff' and 'paulis'", where)
        factors = ["I"] * n
        for unit, p in dict(term.get("paulis", {})).items():
            try:
                k = net.unit_index(unit)
            except (NetworkError, ValueError) as exc:
                raise ScenarioError(str(exc), where) from None
            if str(p).upper() not in _PAULI:
                raise ScenarioError(f"unknown Pauli {p!r}", where)
            factors[k] = str(p).upper()
        op = np.ones((1, 1), dtype=complex)
        for k in reversed(range(n)):
            op = np.kron(op, _PAULI[factors[k]])
        H += float(term["coeff"]) * op
    return HermitianOperator(H)


def parse_config(raw: Any) -> DynamicsConfig:
    if raw is None:
        return DynamicsConfig()
    if not isinstance(raw, Mapping):
        raise ScenarioError("must be an object", "dynamics")
    unknown = set(raw) - _CONFIG_FIELDS
    if unknown:
        raise ScenarioError(f"unknown fields {sorted(unknown)}", "dynamics")
    kw = dict(raw)
    if "lambda" in kw:
        kw["lam"] = kw.pop("lambda")
    try:
        return DynamicsConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(str(exc), "dynamics") from None


def parse_scenario(doc: Mapping[str, Any], source: Path | None = None, text: str | None = None) -> Scenario:
    path = str(source) if source else None
    try:
        if not isinstance(doc, Mapping):
            raise ScenarioError("scenario must be a JSON object")
        name = doc.get("name")
        if not isinstance(name, str) or not name:
            raise ScenarioError("missing or empty", "name")
        kind = doc.get("kind", "ensemble")
        if kind not in KINDS:
            raise ScenarioError(f"must be one of {KINDS}", "kind")
        config = parse_config(doc.get("dynamics"))
        trials = doc.get("trials", 1 if kind in ("collapse", "superselection") else 1000)
        if not isinstance(trials, int) or isinstance(trials, bool) or trials < 1:
            raise ScenarioError("must be a positive integer", "trials")
        sc = Scenario(name, kind, dict(doc), config, trials=trials, source=source)
        if "analysis" in doc:
            sc.analysis = tuple(doc["analysis"])
        if kind in ("zeno", "ruin"):
            block = doc.get(kind)
            if not isinstance(block, Mapping):
                raise ScenarioError("missing settings object", kind)
            if kind == "ruin":
                stakes = block.get("stakes")
                if not (isinstance(stakes, list) and len(stakes) == 2 and all(isinstance(s, int) and s >= 0 for s in stakes) and sum(stakes) > 0):
                    raise ScenarioError("stakes must be two non-negative integers, not both zero", "ruin.stakes")
            else:
                meas = block.get("measurements")
                if not (isinstance(meas, list) and meas and all(isinstance(m, int) and m >= 1 for m in meas)):
                    raise ScenarioError("must be a list of positive integers", "zeno.measurements")
                for key in ("omega", "t_max"):
                    if not isinstance(block.get(key), (int, float)) or block[key] <= 0:
                        raise ScenarioError("must be a positive number", f"zeno.{key}")
            return sc
        if "network" not in doc:
            raise ScenarioError("missing", "network")
        try:
            net = _resolve_network(doc["network"], source.parent if source else None)
        except NetworkError as exc:
            raise ScenarioError(str(exc), "network") from None
        if net.n_units > MAX_UNITS:
            raise ScenarioError(f"{net.n_units} units exceeds the cap of {MAX_UNITS}", "network")
        sc.network = net
        if "gate" in doc:
            try:
                Gate(doc["gate"])
            except ValueError:
                raise ScenarioError(f"must be one of {[g.value for g in Gate]}", "gate") from None
        if "initial_state" not in doc:
            raise ScenarioError("missing", "initial_state")
        sc.amplitudes = parse_amplitudes(doc["initial_state"], net, sc.notices)
        if doc.get("hamiltonian") is not None:
            sc.hamiltonian = parse_hamiltonian(doc["hamiltonian"], net)
        if "sweep" in doc:
            sw = doc["sweep"]
            if not (isinstance(sw, Mapping) and len(sw) == 1):
                raise ScenarioError("must map one dynamics field to a list of values", "sweep")
            (key, values), = sw.items()
            if key not in _CONFIG_FIELDS or not isinstance(values, list) or not values:
                raise ScenarioError(f"cannot sweep {key!r}", "sweep")
            for v in values:
                parse_config({**doc.get("dynamics", {}), key: v})
            sc.sweep = ("lam" if key == "lambda" else key, values)
        return sc
    except ScenarioError as exc:
        if exc.path is not None or path is None:
            raise
        key = exc.field.split("[")[0].split(".")[-1] if exc.field else None
        raise ScenarioError(exc.message, exc.field, _line_of(text, key) if key else None, path) from None


def load_scenario(path: str | Path) -> Scenario:
    """Read and validate a scenario file; bundled names are accepted too."""
    p = Path(path)
    if not p.is_file():
        bundled = bundled_scenario_path(str(path))
        if bundled is None:
            raise ScenarioError("file not found", path=str(path))
        p = bundled
    text = p.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON ({exc.msg}, column {exc.colno})", line=exc.lineno, path=str(p)) from None
    return parse_scenario(doc, p, text)


def _bundled_dir() -> Path:
    return Path(str(resources.files("qshape_collapse.lab") / "scenarios"))


def bundled_scenario_path(name: str) -> Path | None:
    stem = name[:-5] if name.endswith(".json") else name
    p = _bundled_dir() / f"{stem}.json"
    return p if p.is_file() else None


def list_scenarios() -> list[dict]:
    out = []
    for p in sorted(_bundled_dir().glob("*.json")):
        doc = json.loads(p.read_text())
        out.append({"name": doc.get("name", p.stem), "kind": doc.get("kind"), "file": p.name,
                    "description": doc.get("description", "")})
    return out


def validate_scenario(path: str | Path) -> dict:
    """Validation report; raises :class:`ScenarioError` on failure."""
    sc = load_scenario(path)
    report = {"name": sc.name, "kind": sc.kind, "valid": True, "notices": sc.notices, "trials": sc.trials}
    if sc.network is not None:
        report["units"] = list(sc.network.names)
        report["dimension"] = sc.network.n_states
    return report
