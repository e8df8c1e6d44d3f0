"""Collapse dynamics: discrete superselection, continuous Q-shape collapse, gambler's ruin.

The continuous model integrates

    dpsi = [-i H dt + sqrt(lam) sum_a (A_a - <A_a>) dW_a
            - (lam/2) sum_ab S_ab (A_a - <A_a>)(A_b - <A_b>) dt] psi

with Euler-Maruyama steps and explicit renormalization, where ``S`` is the
noise covariance (identity for independent noise). By default the
Hamiltonian part is applied with its exact propagator before the stochastic
update; ``integrator="euler"`` uses the plain first-order term instead.

Trajectories are vectorized in batches. Trajectory ``i`` always draws its
noise from ``SeedSequence(seed, spawn_key=(i,))`` in fixed-size blocks, so
results do not depend on batch size or worker count.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .qcore import HermitianOperator, QuantumError, QuantumState, propagator
from .qiit import CollapseOperatorSet, QuasiClassicalBasis, Variant, check_commuting, operator_set
from .transport import qshape_distance

log = logging.getLogger(__name__)

NOISE_BLOCK = 256
BATCH = 2048


class NoiseMode(str, Enum):
    INDEPENDENT = "independent"
    CORRELATED = "correlated"


class StepSizeError(RuntimeError):
    """Norm drift before renormalization exceeded the allowed bound."""


@dataclass(frozen=True)
class DynamicsConfig:
    lam: float = 1.0
    dt: float | None = None
    t_max: float = 10.0
    seed: int = 0
    noise_mode: NoiseMode = NoiseMode.INDEPENDENT
    operator_variant: Variant = Variant.COMBINED
    superselection_dt: float = 0.1
    emd_cutoff: float = 0.1
    emd_variant: str = "xemd"
    emd_scale: float = 1.0
    lock_in: float = 1e-6
    lock_steps: int = 100
    n_samples: int = 200
    integrator: str = "split"
    # mass-density smearing of the collapse operators is not modelled; must stay None
    smearing: None = None

    def __post_init__(self):
        object.__setattr__(self, "noise_mode", NoiseMode(self.noise_mode))
        object.__setattr__(self, "operator_variant", Variant(self.operator_variant))
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.t_max <= 0 or (self.dt is not None and self.t_max < self.dt):
            raise ValueError("t_max must be >= dt")
        if self.emd_cutoff <= 0:
            raise ValueError("emd_cutoff must be > 0")
        if self.superselection_dt <= 0:
            raise ValueError("superselection_dt must be > 0")
        if self.integrator not in ("split", "euler"):
            raise ValueError("integrator must be 'split' or 'euler'")
        if self.noise_mode is NoiseMode.CORRELATED and self.operator_variant is Variant.PHI_ONLY:
            raise ValueError("correlated noise needs Q-shape operators, not the Phi-only operator")
        if self.smearing is not None:
            raise ValueError("smearing functions are not supported")

    def replace(self, **kw) -> "DynamicsConfig":
        return dataclasses.replace(self, **kw)


@dataclass(frozen=True, eq=False)
class CollapseSystem:
    H: HermitianOperator
    Q_set: CollapseOperatorSet
    psi0: QuantumState

    def __post_init__(self):
        if not (self.H.dim == self.Q_set.dim == self.psi0.dim):
            raise QuantumError("H, operators and initial state must share a dimension")


# --- noise -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NoiseProcess:
    """Collapse channels with their Wiener-increment covariance.

    ``eigenvalues[a, c]`` gives channel ``a`` on column ``c`` of ``basis``;
    increments are ``sqrt(dt) * z @ factor.T`` with ``factor @ factor.T == cov``.
    """

    eigenvalues: np.ndarray
    basis: np.ndarray
    cov: np.ndarray
    factor: np.ndarray
    mode: NoiseMode
    warnings: tuple[str, ...] = ()
    labels: tuple = ()

    @property
    def n_channels(self) -> int:
        return self.eigenvalues.shape[0]

    def increments(self, z: np.ndarray, dt: float) -> np.ndarray:
        return math.sqrt(dt) * (z @ self.factor.T)


def _nearest_psd(G: np.ndarray) -> tuple[np.ndarray, float]:
    vals, vecs = np.linalg.eigh((G + G.T) / 2)
    clipped = np.clip(vals, 0.0, None)
    rel = np.max(np.abs(vals - clipped) / np.maximum(np.abs(vals).max(), 1e-300)) if vals.size else 0.0
    return (vecs * clipped) @ vecs.T, float(rel)


def _factor(cov: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(cov)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def _null_like(q):
    return dataclasses.replace(q, mechanisms=tuple(dataclasses.replace(m, phi=0.0) for m in q.mechanisms))


def correlation_matrix(basis: QuasiClassicalBasis, groups: Sequence[Sequence[int]], config: DynamicsConfig) -> np.ndarray:
    """G[x, y] = 1 / max(scale * EMD*(Q_x, Q_y), cutoff) between Q-shape groups."""
    from .iit3 import qshape as classical_qshape

    reps = []
    for cols in groups:
        q = basis.qshapes[cols[0]]
        if q is None:
            q = _null_like(classical_qshape(basis.network, basis.states[cols[0]]))
        reps.append(q)
    n = len(reps)
    G = np.empty((n, n))
    for x in range(n):
        for y in range(n):
            d = 0.0 if x == y else config.emd_scale * qshape_distance(reps[x], reps[y], config.emd_variant)
            G[x, y] = 1.0 / max(d, config.emd_cutoff)
    return G


def build_noise(Q_set: CollapseOperatorSet, basis: QuasiClassicalBasis | None, config: DynamicsConfig) -> NoiseProcess:
    """Channels and covariance for the configured noise mode.

    INDEPENDENT: one channel per nonzero operator, identity covariance.
    CORRELATED: one projector channel per distinct quasi-classical Q-shape,
    covariance ``emd_cutoff * G`` (unit diagonal) from inverse Q-shape
    distances, repaired to the nearest positive-semidefinite matrix when needed.
    """
    if config.noise_mode is NoiseMode.INDEPENDENT:
        idx = Q_set.active
        E = Q_set.eigenvalues[idx]
        cov = np.eye(len(idx))
        labels = tuple(Q_set.labels[a] for a in idx)
        return NoiseProcess(E, Q_set.basis, cov, cov.copy(), config.noise_mode, (), labels)
    basis = basis if basis is not None else Q_set.source
    if basis is None:
        raise ValueError("correlated noise needs the quasi-classical basis")
    # group basis columns by Q-shape (operator signature)
    spaces: dict[tuple, list[int]] = {}
    E_all = Q_set.eigenvalues[Q_set.active]
    for c in range(E_all.shape[1]):
        sig = tuple(np.round(E_all[:, c], 9).tolist())
        spaces.setdefault(sig, []).append(c)
    groups = list(spaces.values())
    E = np.zeros((len(groups), E_all.shape[1]))
    for g, cols in enumerate(groups):
        E[g, cols] = 1.0
    G = correlation_matrix(basis, groups, config)
    # unit diagonal keeps the per-channel rate equal to lam, as in the independent mode
    cov, rel = _nearest_psd(G * config.emd_cutoff)
    warns = []
    if rel > 0.10:
        msg = f"PSD projection of the 1/EMD* covariance moved an eigenvalue by {rel:.1%}"
        log.warning(msg)
        warns.append(msg)
    labels = tuple(("P", tuple(basis.states[c] for c in cols)) for cols in groups)
    return NoiseProcess(E, Q_set.basis, cov, _factor(cov), config.noise_mode, tuple(warns), labels)


def default_dt(noise: NoiseProcess, config: DynamicsConfig) -> float:
    """Largest step with lam * dt * sum_a S_aa * spread_a**2 <= 0.1, capped at t_max/100."""
    if config.dt is not None:
        return config.dt
    cap = config.t_max / 100
    if config.lam == 0 or noise.n_channels == 0:
        return min(cap, 0.01)
    spread = noise.eigenvalues.max(axis=1) - noise.eigenvalues.min(axis=1)
    spread = np.maximum(spread, np.abs(noise.eigenvalues).max(axis=1))
    load = config.lam * float(np.sum(np.diag(noise.cov) * spread**2))
    if load == 0:
        return min(cap, 0.01)
    return min(cap, 0.1 / load)


# --- batched engine ----------------------------------------------------------


def trajectory_generator(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


class _NoiseStream:
    def __init__(self, seed: int, indices: Sequence[int], k: int):
        self.gens = [trajectory_generator(seed, i) for i in indices]
        self.k = k
        self.buf: np.ndarray | None = None
        self.pos = NOISE_BLOCK

    def next(self) -> np.ndarray:
        if self.pos >= NOISE_BLOCK:
            self.buf = np.stack([g.standard_normal((NOISE_BLOCK, self.k)) for g in self.gens], axis=1)
            self.pos = 0
        z = self.buf[self.pos]
        self.pos += 1
        return z


class _Engine:
    """Euler-Maruyama integrator for a batch of trajectories."""

    def __init__(self, H: HermitianOperator, noise: NoiseProcess, config: DynamicsConfig, dt: float):
        self.config = config
        self.dt = dt
        self.noise = noise
        B = noise.basis
        self.basis = B
        d = H.dim
        self.lam = config.lam
        self.sqrt_lam = math.sqrt(config.lam)
        computational = bool(np.all((np.abs(B) < 1e-14) | (np.abs(np.abs(B) - 1) < 1e-14)))
        self.diag = computational and bool(np.allclose(B.imag, 0)) and bool(np.all(B.real >= -1e-14))
        self.h_zero = H.is_zero
        self.U = None if self.h_zero else propagator(H, dt)
        self.H = H.matrix
        if self.diag:
            cols = np.argmax(np.abs(B), axis=0)
            D = np.zeros((noise.n_channels, d))
            D[:, cols] = noise.eigenvalues
            self.D = D
        else:
            self.A = np.stack([(B * noise.eigenvalues[a]) @ B.conj().T for a in range(noise.n_channels)]) if noise.n_channels else np.zeros((0, d, d))
        self.identity_cov = bool(np.allclose(noise.cov, np.eye(noise.n_channels)))

    def step(self, psi: np.ndarray, z: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
        dt = self.dt
        if not self.h_zero:
            if self.config.integrator == "split":
                psi = psi @ self.U.T
            else:
                psi = psi - 1j * dt * (psi @ self.H.T)
        if self.lam > 0 and self.noise.n_channels and z is not None:
            dW = self.noise.increments(z, dt)
            if self.diag:
                w = np.abs(psi) ** 2
                ex = w @ self.D.T  # (T, K)
                delta = self.D[None, :, :] - ex[:, :, None]  # (T, K, d)
                stoch = np.einsum("tkd,tk->td", delta, dW)
                if self.identity_cov:
                    drift = np.einsum("tkd,tkd->td", delta, delta)
                else:
                    drift = np.einsum("tkd,kl,tld->td", delta, self.noise.cov, delta)
                psi = psi * (1.0 + self.sqrt_lam * stoch - 0.5 * self.lam * dt * drift)
            else:
                Apsi = np.einsum("kij,tj->tki", self.A, psi)
                ex = np.real(np.einsum("td,tkd->tk", psi.conj(), Apsi))
                dpsi = Apsi - ex[:, :, None] * psi[:, None, :]
                stoch = np.einsum("tkd,tk->td", dpsi, dW)
                v = np.einsum("kl,tld->tkd", self.noise.cov, dpsi)
                drift = np.einsum("kij,tkj->ti", self.A, v) - np.einsum("tk,tkd->td", ex, v)
                psi = psi + self.sqrt_lam * stoch - 0.5 * self.lam * dt * drift
        norms = np.linalg.norm(psi, axis=1)
        return psi / norms[:, None], norms

    def expectations(self, psi: np.ndarray) -> np.ndarray:
        if self.noise.n_channels == 0:
            return np.zeros((psi.shape[0], 0))
        if self.diag:
            return (np.abs(psi) ** 2) @ self.D.T
        return np.real(np.einsum("td,kde,te->tk", psi.conj(), self.A, psi))


def _eigenspace_projections(Q_set: CollapseOperatorSet) -> tuple[list[tuple], list[np.ndarray]]:
    spaces = Q_set.joint_eigenspaces()
    return [s for s, _ in spaces], [V for _, V in spaces]


@dataclass
class _BatchResult:
    indices: np.ndarray
    final: np.ndarray
    outcome: np.ndarray  # basis column or -1
    collapse_time: np.ndarray  # nan when never collapsed
    times: np.ndarray
    branch_sum: np.ndarray  # (S, E)
    branch_sq: np.ndarray
    expect_sum: np.ndarray  # (S, K)
    min_norm: np.ndarray
    max_norm: np.ndarray
    states: np.ndarray | None = None  # (S, T, d) only when recording
    expects: np.ndarray | None = None
    norms: np.ndarray | None = None


def _sample_steps(n_steps: int, n_samples: int) -> np.ndarray:
    k = max(1, min(n_samples, n_steps))
    return np.unique(np.round(np.linspace(0, n_steps, k + 1)).astype(int))


def _run_batch(system: CollapseSystem, noise: NoiseProcess, config: DynamicsConfig, dt: float,
               indices: Sequence[int], record: bool = False) -> _BatchResult:
    T = len(indices)
    eng = _Engine(system.H, noise, config, dt)
    n_steps = int(round(config.t_max / dt))
    samples = set(_sample_steps(n_steps, config.n_samples).tolist())
    psi = np.tile(system.psi0.amplitudes, (T, 1)).astype(complex)
    stream = _NoiseStream(config.seed, indices, noise.n_channels) if config.lam > 0 and noise.n_channels else None
    basisB = system.Q_set.basis
    _, spaces = _eigenspace_projections(system.Q_set)
    thr = 1.0 - config.lock_in
    streak = np.zeros(T, dtype=int)
    streak_start = np.full(T, np.nan)
    streak_col = np.full(T, -1)
    outcome = np.full(T, -1)
    ctime = np.full(T, np.nan)
    times, bsum, bsq, esum, st, ex_rec, nrm_rec = [], [], [], [], [], [], []
    min_norm = np.ones(T)
    max_norm = np.ones(T)
    step_norms = np.ones(T)

    def sample(k):
        times.append(k * dt)
        bw = np.stack([np.sum(np.abs(psi @ V.conj()) ** 2, axis=1) for V in spaces], axis=1)
        bsum.append(bw.sum(axis=0))
        bsq.append((bw**2).sum(axis=0))
        ex = eng.expectations(psi)
        esum.append(ex.sum(axis=0))
        if record:
            st.append(psi.copy())
            ex_rec.append(ex.copy())
            nrm_rec.append(step_norms.copy())

    def track(k):
        ov = np.abs(psi @ basisB.conj()) ** 2
        col = np.argmax(ov, axis=1)
        hit = ov[np.arange(T), col] > thr
        same = hit & (col == streak_col)
        new = hit & ~same
        streak[same] += 1
        streak[new] = 1
        streak_start[new] = k * dt
        streak_col[new] = col[new]
        streak[~hit] = 0
        streak_col[~hit] = -1
        locked = (streak >= config.lock_steps) & (outcome < 0)
        outcome[locked] = streak_col[locked]
        ctime[locked] = streak_start[locked]

    sample(0)
    track(0)
    bound = 10.0 * dt
    for k in range(1, n_steps + 1):
        z = stream.next() if stream is not None else None
        psi, step_norms = eng.step(psi, z)
        bad = np.abs(step_norms - 1.0) > bound
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise StepSizeError(
                f"trajectory {indices[i]}: norm {step_norms[i]:.6g} before renormalization at t={k * dt:.4g} "
                f"is outside 1 +/- {bound:.3g}; reduce dt (currently {dt:.3g})"
            )
        min_norm = np.minimum(min_norm, step_norms)
        max_norm = np.maximum(max_norm, step_norms)
        track(k)
        if k in samples:
            sample(k)
    res = _BatchResult(
        np.asarray(indices), psi, outcome, ctime, np.array(times), np.array(bsum), np.array(bsq),
        np.array(esum), min_norm, max_norm,
    )
    if record:
        res.states = np.array(st)
        res.expects = np.array(ex_rec)
        res.norms = np.array(nrm_rec)
    return res


# --- public operations -------------------------------------------------------


def superselection_step(psi: QuantumState, Q_set: CollapseOperatorSet | Sequence, rng: np.random.Generator) -> QuantumState:
    """Projectively measure the joint eigenbasis of a commuting operator family."""
    if not isinstance(Q_set, CollapseOperatorSet):
        Q_set = CollapseOperatorSet.from_operators(list(Q_set))
    from .qcore import project

    spaces = Q_set.joint_eigenspaces()
    projectors = [(0.0, V @ V.conj().T) for _, V in spaces]
    return project(psi, projectors, rng).state


def csl_step(psi: QuantumState, H: HermitianOperator, Q_set: CollapseOperatorSet, config: DynamicsConfig,
             noise: NoiseProcess | None = None, z: np.ndarray | None = None, dt: float | None = None) -> QuantumState:
    """One Euler-Maruyama step from ``psi``.

    ``z`` holds standard-normal draws, one per noise channel; increments are
    ``sqrt(dt) * factor @ z``.
    """
    noise = noise or build_noise(Q_set, Q_set.source, config)
    dt = dt or default_dt(noise, config)
    eng = _Engine(H, noise, config, dt)
    zz = None if z is None else np.asarray(z, dtype=float).reshape(1, -1)
    out, norms = eng.step(psi.amplitudes[None, :].astype(complex), zz)
    if abs(norms[0] - 1.0) > 10 * dt:
        raise StepSizeError(f"norm {norms[0]:.6g} before renormalization outside 1 +/- {10 * dt:.3g}")
    return QuantumState(out[0])


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    times: np.ndarray
    states: np.ndarray  # (S, d)
    operator_expectations: np.ndarray  # (S, K)
    norms: np.ndarray  # pre-renormalization norm of the step ending at each sample
    collapse_outcome: int | None  # basis state index
    collapse_time: float | None
    dt: float
    noise_warnings: tuple[str, ...] = ()
    channel_labels: tuple = ()

    @property
    def final_state(self) -> QuantumState:
        return QuantumState.normalized(self.states[-1])


def _prepare(config: DynamicsConfig, system: CollapseSystem) -> tuple[NoiseProcess, float]:
    noise = build_noise(system.Q_set, system.Q_set.source, config)
    return noise, default_dt(noise, config)


def _basis_index(Q_set: CollapseOperatorSet, col: int) -> int:
    return int(np.argmax(np.abs(Q_set.basis[:, col])))


def run_trajectory(config: DynamicsConfig, system: CollapseSystem, index: int = 0) -> TrajectoryRecord:
    """Single continuous-collapse trajectory; identical to ensemble member ``index``."""
    noise, dt = _prepare(config, system)
    r = _run_batch(system, noise, config, dt, [index], record=True)
    out = int(r.outcome[0])
    return TrajectoryRecord(
        times=r.times,
        states=r.states[:, 0, :],
        operator_expectations=r.expects[:, 0, :],
        norms=r.norms[:, 0],
        collapse_outcome=None if out < 0 else _basis_index(system.Q_set, out),
        collapse_time=None if out < 0 else float(r.collapse_time[0]),
        dt=dt,
        noise_warnings=noise.warnings,
        channel_labels=noise.labels,
    )


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    trials: int
    dt: float
    outcomes: dict  # basis index (or None) -> count
    collapse_times: np.ndarray  # per trajectory, nan when not collapsed
    times: np.ndarray
    branch_labels: list
    branch_mean: np.ndarray  # (S, E)
    branch_std: np.ndarray
    expectation_mean: np.ndarray  # (S, K)
    min_norm: float
    max_norm: float
    noise_warnings: tuple[str, ...] = ()

    def frequency(self, outcome) -> float:
        return self.outcomes.get(outcome, 0) / self.trials

    def interval(self, outcome, sigmas: float = 3.0) -> tuple[float, float]:
        p = self.frequency(outcome)
        se = math.sqrt(max(p * (1 - p), 1e-300) / self.trials)
        return p - sigmas * se, p + sigmas * se

    @property
    def collapsed_fraction(self) -> float:
        return float(np.mean(~np.isnan(self.collapse_times)))

    @property
    def median_collapse_time(self) -> float:
        ct = self.collapse_times
        return float(np.median(np.where(np.isnan(ct), np.inf, ct)))

    def martingale_deviation(self) -> np.ndarray:
        """|mean(t) - mean(0)| in units of the standard error at t (0 where the spread vanishes)."""
        se = self.branch_std / math.sqrt(self.trials)
        dev = np.abs(self.branch_mean - self.branch_mean[0])
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, dev / se, np.where(dev > 1e-12, np.inf, 0.0))
        return z

    def summary(self) -> dict:
        ct = self.collapse_times[~np.isnan(self.collapse_times)]
        return {
            "trials": self.trials,
            "dt": self.dt,
            "outcomes": {("none" if k is None else str(k)): v for k, v in sorted(self.outcomes.items(), key=lambda kv: (kv[0] is None, kv[0] or 0))},
            "frequencies": {("none" if k is None else str(k)): v / self.trials for k, v in self.outcomes.items()},
            "collapsed_fraction": self.collapsed_fraction,
            "collapse_time_median": float(np.median(ct)) if ct.size else None,
            "collapse_time_quartiles": [float(q) for q in np.quantile(ct, [0.25, 0.75])] if ct.size else None,
            "max_martingale_z": float(np.max(self.martingale_deviation())) if self.trials > 1 else 0.0,
            "norm_range": [self.min_norm, self.max_norm],
            "noise_warnings": list(self.noise_warnings),
        }


def _chunks(trials: int, size: int) -> list[list[int]]:
    return [list(range(a, min(trials, a + size))) for a in range(0, trials, size)]


def _batch_job(args):
    system, noise, config, dt, idx = args
    return _run_batch(system, noise, config, dt, idx)


def run_ensemble(config: DynamicsConfig, system: CollapseSystem, trials: int, workers: int = 1,
                 batch: int = BATCH) -> EnsembleResult:
    """Outcome frequencies, branch-weight martingale series and collapse times."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    noise, dt = _prepare(config, system)
    jobs = [(system, noise, config, dt, idx) for idx in _chunks(trials, batch)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_batch_job, jobs))
    else:
        parts = [_batch_job(j) for j in jobs]
    outcome = np.concatenate([p.outcome for p in parts])
    ctime = np.concatenate([p.collapse_time for p in parts])
    counts: dict = {}
    for col in outcome:
        key = None if col < 0 else _basis_index(system.Q_set, int(col))
        counts[key] = counts.get(key, 0) + 1
    bsum = sum(p.branch_sum for p in parts)
    bsq = sum(p.branch_sq for p in parts)
    mean = bsum / trials
    var = np.clip(bsq / trials - mean**2, 0.0, None) * (trials / max(trials - 1, 1))
    sigs, _ = _eigenspace_projections(system.Q_set)
    return EnsembleResult(
        trials=trials,
        dt=dt,
        outcomes=counts,
        collapse_times=ctime,
        times=parts[0].times,
        branch_labels=[list(s) for s in sigs],
        branch_mean=mean,
        branch_std=np.sqrt(var),
        expectation_mean=sum(p.expect_sum for p in parts) / trials,
        min_norm=float(min(p.min_norm.min() for p in parts)),
        max_norm=float(max(p.max_norm.max() for p in parts)),
        noise_warnings=noise.warnings,
    )


# --- discrete superselection and Zeno ---------------------------------------


@dataclass(frozen=True)
class ZenoResult:
    measurements: int
    interval: float
    survival: float  # never left the initial eigenspace
    final_occupancy: float  # in the initial eigenspace at t_max
    trials: int

    @property
    def stderr(self) -> float:
        return math.sqrt(max(self.survival * (1 - self.survival), 1e-300) / self.trials)


def zeno_run(H: HermitianOperator, Q_set: CollapseOperatorSet, psi0: QuantumState, interval: float, t_max: float,
             rng: np.random.Generator | int, trials: int = 10_000) -> ZenoResult:
    """Alternate exact unitary evolution over ``interval`` with superselection measurements.

    ``psi0`` must be a joint eigenvector. Survival counts trajectories that
    were found in the initial eigenspace at every measurement.
    """
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    spaces = [V for _, V in Q_set.joint_eigenspaces()]
    weights = [float(np.sum(np.abs(V.conj().T @ psi0.amplitudes) ** 2)) for V in spaces]
    home = int(np.argmax(weights))
    if weights[home] < 1 - 1e-9:
        raise QuantumError("initial state is not a joint eigenvector of the operator set")
    n_meas = max(1, int(round(t_max / interval)))
    U = propagator(H, t_max / n_meas)
    psi = np.tile(psi0.amplitudes, (trials, 1)).astype(complex)
    alive = np.ones(trials, dtype=bool)
    projs = [V @ V.conj().T for V in spaces]
    where = np.full(trials, home)
    for _ in range(n_meas):
        psi = psi @ U.T
        images = np.stack([psi @ P.T for P in projs], axis=1)  # (T, E, d)
        probs = np.sum(np.abs(images) ** 2, axis=2)
        probs /= probs.sum(axis=1, keepdims=True)
        u = rng.random(trials)
        where = np.minimum((probs.cumsum(axis=1) < u[:, None]).sum(axis=1), len(projs) - 1)
        psi = images[np.arange(trials), where]
        psi /= np.linalg.norm(psi, axis=1, keepdims=True)
        alive &= where == home
    return ZenoResult(n_meas, t_max / n_meas, float(alive.mean()), float(np.mean(where == home)), trials)


def zeno_survival_oracle(omega: float, interval: float, n_measurements: int) -> float:
    """Two-level Rabi survival under N equally spaced projective checks: cos(omega*dt)^(2N)."""
    return math.cos(omega * interval) ** (2 * n_measurements)


def run_superselection(config: DynamicsConfig, system: CollapseSystem, index: int = 0) -> TrajectoryRecord:
    """Discrete model: unitary evolution interrupted every ``superselection_dt`` by a measurement."""
    rng = trajectory_generator(config.seed, index)
    Q = system.Q_set
    n_meas = max(1, int(round(config.t_max / config.superselection_dt)))
    dt = config.t_max / n_meas
    U = propagator(system.H, dt)
    spaces = [V for _, V in Q.joint_eigenspaces()]
    psi = system.psi0
    states = [psi.amplitudes]
    times = [0.0]
    B = Q.basis
    thr = 1.0 - config.lock_in
    since = None
    col_hit = None
    for k in range(1, n_meas + 1):
        amps = U @ psi.amplitudes
        psi = superselection_step(QuantumState(amps / np.linalg.norm(amps)), Q, rng)
        states.append(psi.amplitudes)
        times.append(k * dt)
        ov = np.abs(B.conj().T @ psi.amplitudes) ** 2
        c = int(np.argmax(ov))
        if ov[c] > thr:
            if col_hit != c:
                since, col_hit = k * dt, c
        else:
            since, col_hit = None, None
    S = np.array(states)
    ex = np.array([[np.real(np.vdot(s, Q.matrix(a) @ s)) for a in Q.active] for s in S])
    return TrajectoryRecord(
        times=np.array(times), states=S, operator_expectations=ex, norms=np.ones(len(times)),
        collapse_outcome=None if col_hit is None else _basis_index(Q, col_hit),
        collapse_time=since, dt=dt,
    )


# --- gambler's ruin ----------------------------------------------------------


@dataclass(frozen=True)
class RuinResult:
    stake1: int
    stake2: int
    trials: int
    wins1: int
    mean_duration: float

    @property
    def p1(self) -> float:
        return self.wins1 / self.trials

    @property
    def p2(self) -> float:
        return 1.0 - self.p1


def gamblers_ruin(stake1: int, stake2: int, trials: int, rng: np.random.Generator | int) -> RuinResult:
    """Fair one-dollar coin game played until one gambler is broke."""
    if stake1 < 0 or stake2 < 0 or stake1 + stake2 == 0:
        raise ValueError("stakes must be non-negative and not both zero")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    total = stake1 + stake2
    wealth = np.full(trials, stake1, dtype=np.int64)
    steps = np.zeros(trials, dtype=np.int64)
    active = (wealth > 0) & (wealth < total)
    while np.any(active):
        idx = np.flatnonzero(active)
        wealth[idx] += np.where(rng.random(idx.size) < 0.5, 1, -1)
        steps[idx] += 1
        active[idx] = (wealth[idx] > 0) & (wealth[idx] < total)
    return RuinResult(stake1, stake2, trials, int(np.sum(wealth == total)), float(steps.mean()))


def make_system(basis: QuasiClassicalBasis, psi0: QuantumState, config: DynamicsConfig,
                H: HermitianOperator | None = None) -> CollapseSystem:
    Q = operator_set(basis, config.operator_variant)
    H = H if H is not None else HermitianOperator(np.zeros((basis.dim, basis.dim), dtype=complex))
    return CollapseSystem(H, Q, psi0)


__all__ = [
    "CollapseSystem",
    "DynamicsConfig",
    "EnsembleResult",
    "NoiseMode",
    "NoiseProcess",
    "RuinResult",
    "StepSizeError",
    "TrajectoryRecord",
    "ZenoResult",
    "build_noise",
    "correlation_matrix",
    "check_commuting",
    "csl_step",
    "default_dt",
    "gamblers_ruin",
    "make_system",
    "run_ensemble",
    "run_superselection",
    "run_trajectory",
    "superselection_step",
    "zeno_run",
    "zeno_survival_oracle",
]
