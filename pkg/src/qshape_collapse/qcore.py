"""Dense state-vector quantum mechanics for small systems (hbar = 1)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

MAX_DIM = 4096
HERMITIAN_TOL = 1e-12
NORM_TOL = 1e-9
DEGENERACY_TOL = 1e-9


class QuantumError(ValueError):
    pass


def _dim_ok(d: int) -> None:
    if d < 1 or d > MAX_DIM:
        raise QuantumError(f"dimension {d} outside 1..{MAX_DIM}")


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Normalized amplitudes over the computational basis (netcore indexing)."""

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex).ravel()
        _dim_ok(a.size)
        norm = np.linalg.norm(a)
        if abs(norm - 1.0) > NORM_TOL:
            raise QuantumError(f"state not normalized (norm={norm:.12g})")
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def normalized(cls, amps: Sequence[complex] | np.ndarray) -> "QuantumState":
        a = np.asarray(amps, dtype=complex).ravel()
        norm = np.linalg.norm(a)
        if norm == 0:
            raise QuantumError("zero vector cannot be normalized")
        return cls(a / norm)

    @classmethod
    def basis(cls, index: int, dim: int) -> "QuantumState":
        a = np.zeros(dim, dtype=complex)
        a[index] = 1.0
        return cls(a)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def overlap(self, other: "QuantumState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise QuantumError(f"operator must be square, got shape {m.shape}")
        _dim_ok(m.shape[0])
        dev = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
        if dev > HERMITIAN_TOL * max(1.0, np.max(np.abs(m))):
            raise QuantumError(f"operator is not Hermitian (deviation {dev:.3g})")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_zero(self) -> bool:
        return not np.any(np.abs(self.matrix) > 1e-14)

    @property
    def is_diagonal(self) -> bool:
        m = self.matrix
        return not np.any(np.abs(m - np.diag(np.diag(m))) > 1e-14)

    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.linalg.eigh(self.matrix)

    def spectral_projectors(self, tol: float = DEGENERACY_TOL) -> list[tuple[float, np.ndarray]]:
        """(eigenvalue, projector) pairs with degenerate eigenvalues grouped."""
        vals, vecs = self.eigh()
        groups: list[list[int]] = []
        for i, v in enumerate(vals):
            if groups and abs(v - vals[groups[-1][0]]) <= tol:
                groups[-1].append(i)
            else:
                groups.append([i])
        out = []
        for g in groups:
            V = vecs[:, g]
            out.append((float(np.mean(vals[g])), V @ V.conj().T))
        return out

    def __add__(self, other: "HermitianOperator") -> "HermitianOperator":
        return HermitianOperator(self.matrix + other.matrix)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        HermitianOperator(m)
        if abs(np.trace(m).real - 1.0) > 1e-10:
            raise QuantumError("density operator must have unit trace")
        if np.min(np.linalg.eigvalsh(m)) < -1e-10:
            raise QuantumError("density operator must be positive semidefinite")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def pure(cls, psi: QuantumState) -> "DensityOperator":
        a = psi.amplitudes
        return cls(np.outer(a, a.conj()))


def _check_dims(psi: QuantumState, op: HermitianOperator) -> None:
    if psi.dim != op.dim:
        raise QuantumError(f"dimension mismatch: state {psi.dim}, operator {op.dim}")


def propagator(H: HermitianOperator, dt: float) -> np.ndarray:
    """exp(-i H dt) from the eigendecomposition of H."""
    vals, vecs = H.eigh()
    return (vecs * np.exp(-1j * vals * dt)) @ vecs.conj().T


def unitary_step(psi: QuantumState, H: HermitianOperator, dt: float) -> QuantumState:
    if dt <= 0:
        raise QuantumError("dt must be positive")
    if not isinstance(H, HermitianOperator):
        H = HermitianOperator(H)
    _check_dims(psi, H)
    out = propagator(H, dt) @ psi.amplitudes
    return QuantumState(out / np.linalg.norm(out))


def expectation(psi: QuantumState, A: HermitianOperator) -> float:
    _check_dims(psi, A)
    val = np.vdot(psi.amplitudes, A.matrix @ psi.amplitudes)
    if abs(val.imag) > 1e-10:
        raise QuantumError(f"expectation has imaginary part {val.imag:.3g}")
    return float(val.real)


@dataclass(frozen=True)
class Measurement:
    eigenvalue: float
    state: QuantumState
    probability: float

    def __iter__(self):
        return iter((self.eigenvalue, self.state))


def project(psi: QuantumState, projectors: Sequence[tuple[float, np.ndarray]], rng: np.random.Generator) -> Measurement:
    """Born-rule sample over a complete set of orthogonal projectors."""
    amps = psi.amplitudes
    images = [P @ amps for _, P in projectors]
    probs = np.array([np.vdot(v, v).real for v in images])
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    k = int(rng.choice(len(projectors), p=probs))
    v = images[k]
    return Measurement(projectors[k][0], QuantumState(v / np.linalg.norm(v)), float(probs[k]))


def projective_measure(psi: QuantumState, A: HermitianOperator, rng: np.random.Generator) -> Measurement:
    """Measure ``A``: collapse onto one of its (possibly degenerate) eigenspaces."""
    _check_dims(psi, A)
    return project(psi, A.spectral_projectors(), rng)


# small fixtures

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def basis_projector(index: int, dim: int) -> HermitianOperator:
    m = np.zeros((dim, dim), dtype=complex)
    m[index, index] = 1.0
    return HermitianOperator(m)
