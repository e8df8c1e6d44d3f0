"""Quasi-classical states, quantum Q-shapes and collapse operator ensembles.

Each computational-basis state of the n-qubit space is identified with the
classical network state of the same index. Its Q-shape has ``2N`` density
operator components (``N = 2**n - 1`` subsystems, effect then cause for
each), every component carrying its mechanism's phi. The collapse operator
for component ``k`` and matrix entry ``(i, j)`` is

    Q[k, i, j] = sum_psi phi_k(psi) * (c_k,ij(psi) + c_k,ji(psi)) |psi><psi|

summed over the quasi-classical states, which are joint eigenvectors of the
whole family by construction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .iit3 import QShape, big_phi, qshape, transition_irreducibility
from .netcore import BinaryNetwork, label
from .qcore import DensityOperator, HermitianOperator, QuantumError, QuantumState

EIG_TOL = 1e-9


class Gate(str, Enum):
    """When a basis state counts as having a (non-null) Q-shape.

    FORWARD: the actual transition from the state is changed by every system
    cut. PHI_MAX: the network is a maximum of Phi in that state. NONE: always
    use the conceptual structure as computed.
    """

    FORWARD = "forward"
    PHI_MAX = "phi_max"
    NONE = "none"


class Variant(str, Enum):
    COMBINED = "combined"
    SPLIT = "split"
    PHI_ONLY = "phi_only"


def classical_embedding(p) -> DensityOperator:
    """Diagonal density operator with the distribution on its diagonal."""
    probs = np.asarray(getattr(p, "probs", p), dtype=float).ravel()
    if np.any(probs < -1e-12) or abs(probs.sum() - 1.0) > 1e-10:
        raise QuantumError("embedding needs a normalized distribution")
    return DensityOperator(np.diag(probs.astype(complex)))


@dataclass(frozen=True, eq=False)
class QuasiClassicalBasis:
    network: BinaryNetwork
    states: tuple[int, ...]
    qshapes: tuple[QShape | None, ...]
    phis: tuple[float, ...]
    gate: Gate = Gate.FORWARD

    def __post_init__(self):
        if not self.states:
            raise QuantumError("quasi-classical basis is empty")
        if len(set(self.states)) != len(self.states):
            raise QuantumError("quasi-classical states must be orthogonal (distinct basis states)")

    @property
    def n(self) -> int:
        return self.network.n_units

    @property
    def dim(self) -> int:
        return self.network.n_states

    @property
    def n_subsystems(self) -> int:
        return 2**self.n - 1

    def vectors(self) -> np.ndarray:
        """Columns are the basis states as amplitude vectors."""
        out = np.zeros((self.dim, len(self.states)), dtype=complex)
        for c, s in enumerate(self.states):
            out[s, c] = 1.0
        return out

    def components(self, pos: int) -> list[tuple[float, np.ndarray | None]]:
        """``(phi_k, density matrix or None)`` for each of the 2N components.

        None marks a null component (zero coefficients).
        """
        q = self.qshapes[pos]
        out: list[tuple[float, np.ndarray | None]] = []
        if q is None:
            return [(0.0, None)] * (2 * self.n_subsystems)
        for m in q.mechanisms:
            if m.phi > 0:
                out.append((m.phi, np.diag(m.effect_full).astype(complex)))
                out.append((m.phi, np.diag(m.cause_full).astype(complex)))
            else:
                out.append((0.0, None))
                out.append((0.0, None))
        return out

    def describe(self) -> list[dict]:
        rows = []
        for s, q, phi in zip(self.states, self.qshapes, self.phis):
            rows.append(
                {
                    "state": label(s, self.n),
                    "index": s,
                    "Phi": phi,
                    "null_qshape": q is None or q.is_null,
                    "phi": {} if q is None else {self.network.subset_name(m.mechanism): m.phi for m in q.mechanisms},
                }
            )
        return rows


def _gate_passes(net: BinaryNetwork, s: int, gate: Gate) -> bool:
    if gate is Gate.NONE:
        return True
    if gate is Gate.FORWARD:
        return transition_irreducibility(net, s) > 0
    from .iit3 import phi_max

    return phi_max(net, s) > 0


def quasi_classical_basis(
    net: BinaryNetwork, states: Sequence[int | str] | None = None, gate: Gate | str = Gate.FORWARD
) -> QuasiClassicalBasis:
    """Compute the classical Q-shape of each designated basis state."""
    gate = Gate(gate)
    idx = tuple(range(net.n_states)) if states is None else tuple(net.state(s).index for s in states)
    shapes: list[QShape | None] = []
    phis = []
    for s in idx:
        q = qshape(net, s)
        ok = _gate_passes(net, s, gate) and not q.is_null
        shapes.append(q if ok else None)
        phis.append(big_phi(net, s) if ok else 0.0)
    return QuasiClassicalBasis(net, idx, tuple(shapes), tuple(phis), gate)


@dataclass(frozen=True, eq=False)
class QuantumQShape:
    """Formal superposition record of quasi-classical Q-shapes."""

    terms: tuple[tuple[int, float, QShape | None], ...]  # (basis index, |amp|^2, qshape)
    outside_weight: float

    @property
    def non_quasi_classical(self) -> bool:
        return self.outside_weight > 1e-12

    @property
    def is_quasi_classical(self) -> bool:
        return len(self.terms) == 1 and not self.non_quasi_classical

    @property
    def is_null(self) -> bool:
        return all(q is None or q.is_null for _, w, q in self.terms if w > 0)

    def components(self, basis: QuasiClassicalBasis) -> list[tuple[float, DensityOperator | None]]:
        """Embedded components for a quasi-classical state."""
        if not self.is_quasi_classical:
            raise QuantumError("components are only defined for quasi-classical states")
        pos = basis.states.index(self.terms[0][0])
        return [(phi, None if rho is None else DensityOperator(rho)) for phi, rho in basis.components(pos)]


def quantum_qshape(basis: QuasiClassicalBasis, psi: QuantumState) -> QuantumQShape:
    if psi.dim != basis.dim:
        raise QuantumError("state and basis dimensions differ")
    probs = psi.probabilities
    terms = []
    inside = 0.0
    for pos, s in enumerate(basis.states):
        w = float(probs[s])
        inside += w
        if w > 1e-15:
            terms.append((s, w, basis.qshapes[pos]))
    return QuantumQShape(tuple(terms), max(0.0, 1.0 - inside))


@dataclass(frozen=True, eq=False)
class CollapseOperatorSet:
    """Family of operators diagonal in a common orthonormal basis.

    ``eigenvalues[a, c]`` is the eigenvalue of operator ``a`` on basis column
    ``c``; the operator acts as zero on the orthogonal complement of the basis.
    """

    labels: tuple[tuple, ...]
    basis: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    variant: str = "custom"
    source: QuasiClassicalBasis | None = field(default=None, repr=False)

    def __post_init__(self):
        B = self.basis
        if self.eigenvalues.shape != (len(self.labels), B.shape[1]):
            raise QuantumError("eigenvalue table does not match labels/basis")
        if not np.allclose(B.conj().T @ B, np.eye(B.shape[1]), atol=1e-10):
            raise QuantumError("collapse operator basis is not orthonormal")

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def active(self) -> np.ndarray:
        """Indices of operators that are not identically zero."""
        return np.flatnonzero(np.any(np.abs(self.eigenvalues) > 1e-14, axis=1))

    def matrix(self, a: int) -> np.ndarray:
        B = self.basis
        return (B * self.eigenvalues[a]) @ B.conj().T

    def operator(self, a: int) -> HermitianOperator:
        return HermitianOperator(self.matrix(a))

    def active_matrices(self) -> np.ndarray:
        idx = self.active
        return np.stack([self.matrix(a) for a in idx]) if idx.size else np.zeros((0, self.dim, self.dim), complex)

    @property
    def is_computational(self) -> bool:
        """True when every basis column is a computational-basis vector."""
        B = np.abs(self.basis)
        return bool(np.all((B < 1e-14) | (np.abs(B - 1) < 1e-14)))

    def full_diagonals(self) -> np.ndarray:
        """Operator diagonals in the computational basis (only for computational bases)."""
        if not self.is_computational:
            raise QuantumError("operators are not diagonal in the computational basis")
        out = np.zeros((len(self.labels), self.dim))
        cols = np.argmax(np.abs(self.basis), axis=0)
        out[:, cols] = self.eigenvalues
        return out

    def joint_eigenspaces(self, active_only: bool = True) -> list[tuple[tuple[float, ...], np.ndarray]]:
        """Group basis columns (plus the complement) by their eigenvalue signature.

        Returns ``(signature, columns)`` pairs, the columns being an orthonormal
        basis of the joint eigenspace.
        """
        E = self.eigenvalues[self.active] if active_only else self.eigenvalues
        B = self.basis
        groups: dict[tuple, list[int]] = {}
        for c in range(B.shape[1]):
            sig = tuple(np.round(E[:, c] / EIG_TOL).astype(np.int64).tolist())
            groups.setdefault(sig, []).append(c)
        spaces = []
        for sig, cols in groups.items():
            spaces.append((sig, B[:, cols]))
        m = B.shape[1]
        if m < self.dim:
            # complement: every operator acts as 0 there
            Q, _ = np.linalg.qr(np.hstack([B, np.eye(self.dim, dtype=complex)]))
            comp = Q[:, m : self.dim]
            zero = tuple([0] * E.shape[0])
            for i, (sig, V) in enumerate(spaces):
                if sig == zero:
                    spaces[i] = (sig, np.hstack([V, comp]))
                    break
            else:
                spaces.append((zero, comp))
        return [(tuple(x * EIG_TOL for x in sig), V) for sig, V in spaces]

    def eigenvalue_table(self, active_only: bool = True) -> list[dict]:
        idx = self.active if active_only else np.arange(len(self.labels))
        return [{"label": list(self.labels[a]), "eigenvalues": self.eigenvalues[a].tolist()} for a in idx]

    # constructors

    @classmethod
    def from_diagonal(cls, eigenvalues, basis=None, labels=None, variant: str = "custom") -> "CollapseOperatorSet":
        E = np.atleast_2d(np.asarray(eigenvalues, dtype=float))
        B = np.eye(E.shape[1], dtype=complex) if basis is None else np.asarray(basis, dtype=complex)
        labels = tuple(labels) if labels is not None else tuple(("op", a) for a in range(E.shape[0]))
        return cls(labels, B, E, variant)

    @classmethod
    def from_operators(cls, ops: Sequence[HermitianOperator | np.ndarray], labels=None) -> "CollapseOperatorSet":
        """Jointly diagonalize a commuting family of Hermitian operators."""
        mats = [np.asarray(getattr(o, "matrix", o), dtype=complex) for o in ops]
        for m in mats:
            HermitianOperator(m)
        check_commuting(mats)
        d = mats[0].shape[0]
        rng = np.random.default_rng(12345)
        mix = sum(rng.normal() * m for m in mats)
        _, V = np.linalg.eigh(mix)
        E = np.array([np.real(np.einsum("ic,ij,jc->c", V.conj(), m, V)) for m in mats])
        recon = [(V * E[a]) @ V.conj().T for a in range(len(mats))]
        if any(not np.allclose(r, m, atol=1e-8) for r, m in zip(recon, mats)):
            raise QuantumError("could not find a joint eigenbasis")
        labels = tuple(labels) if labels is not None else tuple(("op", a) for a in range(len(mats)))
        return cls(labels, V, E, "custom")


def check_commuting(mats: Sequence[np.ndarray], tol: float = 1e-9) -> None:
    for a, b in itertools.combinations(mats, 2):
        if np.max(np.abs(a @ b - b @ a)) > tol:
            raise QuantumError("collapse operators do not commute")


def _coefficient_tables(basis: QuasiClassicalBasis):
    """phi[k, c] and symmetrized coefficients csym[k, i, j, c] for every column c."""
    K = 2 * basis.n_subsystems
    d = basis.dim
    m = len(basis.states)
    phi = np.zeros((K, m))
    csym = np.zeros((K, d, d, m))
    for c in range(m):
        for k, (w, rho) in enumerate(basis.components(c)):
            phi[k, c] = w
            if rho is not None:
                csym[k, :, :, c] = (rho + rho.T).real
    return phi, csym


def build_collapse_operators(basis: QuasiClassicalBasis) -> CollapseOperatorSet:
    """The full ``2N x 2^n x 2^n`` family weighted by phi (zero operators kept)."""
    phi, csym = _coefficient_tables(basis)
    K, d = csym.shape[0], csym.shape[1]
    labels = tuple(("Q", k, i, j) for k in range(K) for i in range(d) for j in range(d))
    E = (phi[:, None, None, :] * csym).reshape(K * d * d, -1)
    return CollapseOperatorSet(labels, basis.vectors(), E, Variant.COMBINED.value, basis)


def build_split_operators(basis: QuasiClassicalBasis) -> CollapseOperatorSet:
    """Unweighted coefficient operators plus one weight operator per subsystem."""
    phi, csym = _coefficient_tables(basis)
    K, d = csym.shape[0], csym.shape[1]
    labels = [("Q", k, i, j) for k in range(K) for i in range(d) for j in range(d)]
    E_q = csym.reshape(K * d * d, -1)
    # components 2l and 2l+1 share subsystem l's weight
    E_b = phi[0::2]
    labels += [("B", l) for l in range(E_b.shape[0])]
    return CollapseOperatorSet(tuple(labels), basis.vectors(), np.vstack([E_q, E_b]), Variant.SPLIT.value, basis)


def phi_only_operator(basis: QuasiClassicalBasis) -> HermitianOperator:
    """Sum of Phi(psi) |psi><psi| over the quasi-classical states."""
    B = basis.vectors()
    return HermitianOperator((B * np.array(basis.phis)) @ B.conj().T)


def phi_only_set(basis: QuasiClassicalBasis) -> CollapseOperatorSet:
    return CollapseOperatorSet((("Phi",),), basis.vectors(), np.array([basis.phis], dtype=float), Variant.PHI_ONLY.value, basis)


def operator_set(basis: QuasiClassicalBasis, variant: Variant | str = Variant.COMBINED) -> CollapseOperatorSet:
    variant = Variant(variant)
    if variant is Variant.COMBINED:
        return build_collapse_operators(basis)
    if variant is Variant.SPLIT:
        return build_split_operators(basis)
    return phi_only_set(basis)


def expected_operator_count(n: int) -> int:
    return 2 ** (2 * n + 1) * (2**n - 1)


def census(ops: CollapseOperatorSet) -> dict:
    """Counts, active operators and eigenvalue table (JSON-friendly)."""
    basis = ops.source
    spaces = ops.joint_eigenspaces()
    out = {
        "variant": ops.variant,
        "n_operators": len(ops),
        "n_active": int(ops.active.size),
        "n_inert": int(len(ops) - ops.active.size),
        "n_joint_eigenspaces": len(spaces),
        "active": ops.eigenvalue_table(),
    }
    if basis is not None:
        out["basis"] = [label(s, basis.n) for s in basis.states]
        out["expected_count"] = expected_operator_count(basis.n) if ops.variant == Variant.COMBINED.value else None
        out["quasi_classical"] = basis.describe()
    return out
