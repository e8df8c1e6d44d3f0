"""IIT 3.0 cause/effect repertoires, mechanism phi, Q-shapes and system Phi.

Repertoires are held internally as arrays of shape ``(2,)*k`` over the ``k``
units of the system under analysis, with singleton axes for units outside
the purview, so partitioned repertoires combine by broadcasting. Flattened
vectors use Fortran order, which matches the netcore convention (unit 0 is
the least-significant bit).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Sequence

import numpy as np

from .netcore import BinaryNetwork, NetworkState, label_order
from .transport import hamming_emd, qshape_distance

PHI_TOL = 1e-10


class Direction(str, Enum):
    CAUSE = "cause"
    EFFECT = "effect"


class IITError(ValueError):
    pass


@dataclass(frozen=True)
class Repertoire:
    """Distribution over the states of ``purview`` (index-ordered, first purview unit = LSB)."""

    probs: np.ndarray
    purview: tuple[int, ...]
    direction: Direction

    def __post_init__(self):
        p = self.probs
        if p.size != 2 ** len(self.purview):
            raise IITError("repertoire size does not match purview")
        if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-12:
            raise IITError(f"repertoire not normalized (sum={p.sum()!r})")


@dataclass(frozen=True)
class Cut:
    """Unidirectional cut: connections from ``severed_from`` into ``severed_to`` become noise."""

    severed_from: tuple[int, ...]
    severed_to: tuple[int, ...]

    def __post_init__(self):
        if not self.severed_from or not self.severed_to:
            raise IITError("a cut must sever at least one connection")

    def __str__(self) -> str:
        return f"{list(self.severed_from)} -/-> {list(self.severed_to)}"


@dataclass(frozen=True)
class Partition:
    """Bipartition of a mechanism-purview pair: ``(m1 / p1) x (m2 / p2)``."""

    parts: tuple[tuple[tuple[int, ...], tuple[int, ...]], tuple[tuple[int, ...], tuple[int, ...]]]

    def __str__(self) -> str:
        (m1, p1), (m2, p2) = self.parts
        return f"({list(m1)}/{list(p1)}) x ({list(m2)}/{list(p2)})"


@dataclass(frozen=True)
class Mice:
    """Maximally irreducible cause or effect of a mechanism."""

    direction: Direction
    phi: float
    repertoire: Repertoire
    partition: Partition | None
    partitioned: np.ndarray | None = field(default=None, repr=False)

    @property
    def purview(self) -> tuple[int, ...]:
        return self.repertoire.purview


@dataclass(frozen=True)
class MechanismPoint:
    """One subsystem of a Q-shape with its weight and location.

    ``effect_full`` and ``cause_full`` are index-ordered distributions over
    all states of the analysed system; ``location`` is their concatenation
    (effect first) in label order, the layout used when printing ``L(m)``.
    """

    mechanism: tuple[int, ...]
    phi: float
    cause: Mice
    effect: Mice
    effect_full: np.ndarray = field(repr=False)
    cause_full: np.ndarray = field(repr=False)

    @property
    def cause_rep(self) -> Repertoire:
        return self.cause.repertoire

    @property
    def effect_rep(self) -> Repertoire:
        return self.effect.repertoire

    @property
    def location(self) -> np.ndarray:
        k = int(np.log2(self.effect_full.size))
        order = label_order(k)
        return np.concatenate([self.effect_full[order], self.cause_full[order]])


@dataclass(frozen=True, eq=False)
class QShape:
    """Weighted mechanism points of a system in a given state.

    ``mechanisms`` keeps every nonempty subsystem (zero-weight ones included,
    so the flattened vector has a fixed layout); ``points`` lists only those
    with positive phi.
    """

    system: tuple[int, ...]
    system_state: NetworkState
    mechanisms: tuple[MechanismPoint, ...]
    uc_effect: np.ndarray = field(repr=False)
    uc_cause: np.ndarray = field(repr=False)
    cut: Cut | None = None

    @property
    def n(self) -> int:
        return len(self.system)

    @property
    def points(self) -> tuple[MechanismPoint, ...]:
        return tuple(m for m in self.mechanisms if m.phi > 0)

    @property
    def dimension(self) -> int:
        return (2**self.n - 1) * (2 ** (self.n + 1) + 1)

    @property
    def total_phi(self) -> float:
        return float(sum(m.phi for m in self.mechanisms))

    @property
    def is_null(self) -> bool:
        return not self.points

    def point(self, mechanism: Sequence[int]) -> MechanismPoint:
        key = tuple(sorted(mechanism))
        for m in self.mechanisms:
            if m.mechanism == key:
                return m
        raise KeyError(key)

    def located(self, m: MechanismPoint) -> tuple[np.ndarray, np.ndarray]:
        """Effect/cause distributions used for distances; null mechanisms sit at p_uc."""
        if m.phi > 0:
            return m.effect_full, m.cause_full
        return self.uc_effect, self.uc_cause

    def flat(self) -> np.ndarray:
        """Fixed-layout vector: per subsystem, phi followed by its label-ordered location.

        Zero-weight subsystems contribute a zero block.
        """
        blocks = []
        for m in self.mechanisms:
            if m.phi > 0:
                blocks.append(np.concatenate([[m.phi], m.location]))
            else:
                blocks.append(np.zeros(1 + 2 ** (self.n + 1)))
        return np.concatenate(blocks)

    def signature(self, decimals: int = 9) -> tuple:
        return tuple(np.round(self.flat(), decimals).tolist())


# --- candidate system ------------------------------------------------------


class _System:
    """A set of units in a fixed state, optionally cut.

    Units outside ``nodes`` are held at their current state.
    """

    def __init__(self, net: BinaryNetwork, state: NetworkState, nodes: Sequence[int], cut: Cut | None = None):
        self.net = net
        self.state = state
        self.nodes = tuple(sorted(nodes))
        if not self.nodes:
            raise IITError("system needs at least one unit")
        self.k = len(self.nodes)
        self.pos = {u: i for i, u in enumerate(self.nodes)}
        self.local_state = tuple(state.bits[u] for u in self.nodes)
        self.cut = cut
        n = net.n_units
        sel = tuple(slice(None) if u in self.pos else state.bits[u] for u in range(n))
        cpt = np.stack([net.cpt[u][sel] for u in self.nodes]) if n else net.cpt
        cpt = cpt.reshape((self.k,) + (2,) * self.k)
        if cut is not None:
            src = [self.pos[u] for u in cut.severed_from if u in self.pos]
            dst = [self.pos[u] for u in cut.severed_to if u in self.pos]
            cpt = cpt.copy()
            for j in dst:
                if src:
                    avg = cpt[j].mean(axis=tuple(src), keepdims=True)
                    cpt[j] = np.broadcast_to(avg, cpt[j].shape)
        self.cpt = cpt
        self._cache: dict = {}

    def local(self, units: Iterable[int]) -> tuple[int, ...]:
        try:
            return tuple(sorted(self.pos[u] for u in units))
        except KeyError as exc:
            raise IITError(f"unit {exc.args[0]} is not part of the system") from None

    # repertoires over local positions, shape (2,)*k with singleton non-purview axes

    def effect_rep(self, mech: tuple[int, ...], purview: tuple[int, ...]) -> np.ndarray:
        key = ("e", mech, purview)
        if key in self._cache:
            return self._cache[key]
        k = self.k
        out = np.ones((1,) * k)
        for j in purview:
            q = self.cpt[j]
            idx = tuple(self.local_state[a] if a in mech else slice(None) for a in range(k))
            p_on = float(np.mean(q[idx]))
            shape = [1] * k
            shape[j] = 2
            out = out * np.array([1.0 - p_on, p_on]).reshape(shape)
        self._cache[key] = out
        return out

    def cause_rep(self, mech: tuple[int, ...], purview: tuple[int, ...]) -> np.ndarray:
        key = ("c", mech, purview)
        if key in self._cache:
            return self._cache[key]
        k = self.k
        shape = [2 if a in purview else 1 for a in range(k)]
        out = np.ones(shape)
        if mech and purview:
            others = tuple(a for a in range(k) if a not in purview)
            for i in mech:
                like = self.cpt[i] if self.local_state[i] else 1.0 - self.cpt[i]
                if others:
                    like = like.mean(axis=others, keepdims=True)
                out = out * like
        total = out.sum()
        # unreachable mechanism state: no constraint can be placed on the past
        out = out / total if total > 0 else np.ones(shape) / np.prod(shape)
        if not mech:
            out = np.ones(shape) / np.prod(shape)
        self._cache[key] = out
        return out

    def rep(self, direction: Direction, mech, purview) -> np.ndarray:
        if direction is Direction.CAUSE:
            return self.cause_rep(mech, purview)
        return self.effect_rep(mech, purview)

    def unconstrained(self, direction: Direction, purview: tuple[int, ...]) -> np.ndarray:
        return self.rep(direction, (), purview)

    def expand(self, direction: Direction, rep: np.ndarray, purview: tuple[int, ...]) -> np.ndarray:
        """Full-system index-ordered vector: ``rep`` times p_uc over non-purview units."""
        rest = tuple(a for a in range(self.k) if a not in purview)
        full = rep * self.unconstrained(direction, rest) if rest else rep
        return np.broadcast_to(full, (2,) * self.k).reshape(-1, order="F").copy()


def _purview_vector(arr: np.ndarray, purview: tuple[int, ...]) -> np.ndarray:
    k = arr.ndim
    full = np.broadcast_to(arr, tuple(2 if a in purview else 1 for a in range(k)))
    return full.reshape(-1, order="F")


def _marginal_on(arr: np.ndarray, axis: int) -> float:
    others = tuple(a for a in range(arr.ndim) if a != axis)
    m = arr.sum(axis=others) if others else arr
    return float(m[1]) if m.size == 2 else 0.0


def _product_emd(a: np.ndarray, b: np.ndarray, purview: tuple[int, ...]) -> float:
    d = sum(abs(_marginal_on(a, j) - _marginal_on(b, j)) for j in purview)
    return 0.0 if d < PHI_TOL else d


def _subsets(items: Sequence[int], include_empty: bool = False) -> Iterator[tuple[int, ...]]:
    start = 0 if include_empty else 1
    for r in range(start, len(items) + 1):
        yield from itertools.combinations(items, r)


def mechanism_partitions(mech: tuple[int, ...], purview: tuple[int, ...]) -> list[Partition]:
    """All bipartitions of a mechanism-purview pair, each side nonempty."""
    seen = set()
    out = []
    for m1 in _subsets(mech, include_empty=True):
        m2 = tuple(a for a in mech if a not in m1)
        for p1 in _subsets(purview, include_empty=True):
            p2 = tuple(a for a in purview if a not in p1)
            if not (m1 or p1) or not (m2 or p2):
                continue
            key = frozenset([(m1, p1), (m2, p2)])
            if key in seen:
                continue
            seen.add(key)
            out.append(Partition(((m1, p1), (m2, p2))))
    return out


def _purview_key(purview: tuple[int, ...]):
    # larger purviews first, then lexicographically smallest
    return (-len(purview), purview)


def _mice(sys_: _System, direction: Direction, mech: tuple[int, ...]) -> tuple[Mice, tuple[int, ...]]:
    best: tuple | None = None
    for purview in sorted(_subsets(range(sys_.k)), key=_purview_key):
        whole = sys_.rep(direction, mech, purview)
        whole_vec = _purview_vector(whole, purview)
        mip_phi = np.inf
        mip = None
        mip_rep = None
        for part in mechanism_partitions(mech, purview):
            (m1, p1), (m2, p2) = part.parts
            prt = sys_.rep(direction, m1, p1) * sys_.rep(direction, m2, p2)
            prt_vec = _purview_vector(prt, purview)
            if direction is Direction.EFFECT:
                # both sides are products over purview units, for which the
                # Hamming EMD is the sum of per-unit marginal differences
                d = _product_emd(whole, prt, purview)
            else:
                d = hamming_emd(whole_vec, prt_vec, len(purview))
            if d < mip_phi:
                mip_phi, mip, mip_rep = d, part, prt_vec
                if d == 0.0:
                    break
        if mip_phi < PHI_TOL:
            mip_phi = 0.0
        if best is None or mip_phi > best[0] + PHI_TOL:
            best = (mip_phi, purview, whole_vec, mip, mip_rep, whole)
    phi, purview, vec, mip, mip_rep, whole = best
    glob = tuple(sys_.nodes[a] for a in purview)
    rep = Repertoire(vec, glob, direction)
    return Mice(direction, phi, rep, mip, mip_rep), purview


def _mechanism_point(sys_: _System, mech_local: tuple[int, ...]) -> MechanismPoint:
    cause, cpv = _mice(sys_, Direction.CAUSE, mech_local)
    effect, epv = _mice(sys_, Direction.EFFECT, mech_local)
    phi = min(cause.phi, effect.phi)
    e_arr = sys_.effect_rep(mech_local, epv)
    c_arr = sys_.cause_rep(mech_local, cpv)
    return MechanismPoint(
        mechanism=tuple(sys_.nodes[a] for a in mech_local),
        phi=phi,
        cause=cause,
        effect=effect,
        effect_full=sys_.expand(Direction.EFFECT, e_arr, epv),
        cause_full=sys_.expand(Direction.CAUSE, c_arr, cpv),
    )


def _resolve_nodes(net: BinaryNetwork, nodes) -> tuple[int, ...]:
    if nodes is None:
        return tuple(range(net.n_units))
    return net.units(nodes)


def _qshape(sys_: _System) -> QShape:
    mechs = tuple(_mechanism_point(sys_, m) for m in _subsets(range(sys_.k)))
    allp = tuple(range(sys_.k))
    return QShape(
        system=sys_.nodes,
        system_state=sys_.state,
        mechanisms=mechs,
        uc_effect=sys_.expand(Direction.EFFECT, sys_.unconstrained(Direction.EFFECT, allp), allp),
        uc_cause=sys_.expand(Direction.CAUSE, sys_.unconstrained(Direction.CAUSE, allp), allp),
        cut=sys_.cut,
    )


# --- public operations -----------------------------------------------------


def _repertoire(direction, net, state, mechanism, purview, nodes=None, cut=None) -> Repertoire:
    state = net.state(state)
    sys_ = _System(net, state, _resolve_nodes(net, nodes), cut)
    mech = sys_.local(net.units(mechanism) if mechanism else ())
    pv = sys_.local(net.units(purview) if purview else ())
    if not pv:
        raise IITError("purview must be nonempty")
    arr = sys_.rep(direction, mech, pv)
    return Repertoire(_purview_vector(arr, pv), tuple(sys_.nodes[a] for a in pv), direction)


def effect_repertoire(net: BinaryNetwork, state, mechanism, purview, nodes=None, cut: Cut | None = None) -> Repertoire:
    """Distribution of the purview's next state given the mechanism's current state.

    Inputs from outside the mechanism are marginalized uniformly and
    independently for each purview unit.
    """
    return _repertoire(Direction.EFFECT, net, state, mechanism, purview, nodes, cut)


def cause_repertoire(net: BinaryNetwork, state, mechanism, purview, nodes=None, cut: Cut | None = None) -> Repertoire:
    """Distribution of the purview's previous state given the mechanism's current state.

    Bayesian inversion of each mechanism unit's update rule under a uniform
    prior, multiplied across mechanism units and renormalized.
    """
    return _repertoire(Direction.CAUSE, net, state, mechanism, purview, nodes, cut)


@dataclass(frozen=True)
class SmallPhi:
    phi: float
    core_cause: Mice
    core_effect: Mice

    def __iter__(self):
        return iter((self.phi, self.core_cause, self.core_effect))


def small_phi(net: BinaryNetwork, state, mechanism, nodes=None, cut: Cut | None = None) -> SmallPhi:
    """Integrated information of one mechanism: min of core cause and core effect phi."""
    state = net.state(state)
    sys_ = _System(net, state, _resolve_nodes(net, nodes), cut)
    mech = sys_.local(net.units(mechanism))
    if not mech:
        raise IITError("mechanism must be nonempty")
    pt = _mechanism_point(sys_, mech)
    return SmallPhi(pt.phi, pt.cause, pt.effect)


def qshape(net: BinaryNetwork, state, nodes=None, cut: Cut | None = None) -> QShape:
    return _qshape(_System(net, net.state(state), _resolve_nodes(net, nodes), cut))


def system_cuts(nodes: Sequence[int]) -> list[Cut]:
    """Unidirectional bipartition cuts of a system, in a fixed order."""
    nodes = tuple(sorted(nodes))
    cuts = []
    for src in _subsets(nodes):
        if len(src) == len(nodes):
            continue
        dst = tuple(u for u in nodes if u not in src)
        cuts.append(Cut(src, dst))
    return cuts


@dataclass(frozen=True, eq=False)
class SystemAnalysis:
    phi: float
    cut: Cut | None
    qshape: QShape
    partitioned: QShape | None


def analyze_system(net: BinaryNetwork, state, nodes=None, variant: str = "literal") -> SystemAnalysis:
    """Phi of a system: least Q-shape distance over its unidirectional cuts."""
    state = net.state(state)
    nodes = _resolve_nodes(net, nodes)
    q = _qshape(_System(net, state, nodes))
    best: SystemAnalysis | None = None
    for cut in system_cuts(nodes):
        qc = _qshape(_System(net, state, nodes, cut))
        d = qshape_distance(q, qc, variant)
        if best is None or d < best.phi - PHI_TOL:
            best = SystemAnalysis(d, cut, q, qc)
            if d == 0.0:
                break
    if best is None:
        return SystemAnalysis(0.0, None, q, None)
    return best


def big_phi(net: BinaryNetwork, state, nodes=None, variant: str = "literal") -> float:
    return analyze_system(net, state, nodes, variant).phi


def phi_max(net: BinaryNetwork, state, variant: str = "literal") -> float:
    """Phi of the whole network if it beats every proper subsystem, else 0.

    The network is treated as causally isolated, so only its own subsystems
    (with the remaining units held at their current state) compete.
    """
    state = net.state(state)
    full = tuple(range(net.n_units))
    phi = big_phi(net, state, full, variant)
    if phi <= 0:
        return 0.0
    for sub in _subsets(full):
        if len(sub) == len(full):
            continue
        if big_phi(net, state, sub, variant) >= phi - PHI_TOL:
            return 0.0
    return phi


def _next_state(sys_: _System) -> np.ndarray:
    out = np.ones((1,) * sys_.k)
    for j in range(sys_.k):
        p_on = float(sys_.cpt[j][sys_.local_state])
        shape = [1] * sys_.k
        shape[j] = 2
        out = out * np.array([1.0 - p_on, p_on]).reshape(shape)
    return out.reshape(-1, order="F")


def transition_irreducibility(net: BinaryNetwork, state, nodes=None) -> float:
    """Least change in the actual next-state distribution over all system cuts.

    Compares the distribution of the system's next state, given its full
    current state, with the same distribution after each unidirectional cut
    (severed inputs replaced by uniform noise). Zero means some cut leaves the
    actual transition untouched.
    """
    state = net.state(state)
    nodes = _resolve_nodes(net, nodes)
    intact = _next_state(_System(net, state, nodes))
    best = None
    for cut in system_cuts(nodes):
        d = hamming_emd(intact, _next_state(_System(net, state, nodes, cut)), len(nodes))
        best = d if best is None else min(best, d)
    return 0.0 if best is None or best < PHI_TOL else best


def qshape_table(net: BinaryNetwork, q: QShape) -> list[dict]:
    """JSON-friendly per-mechanism summary with label-ordered locations."""
    rows = []
    for m in q.mechanisms:
        rows.append(
            {
                "mechanism": net.subset_name(m.mechanism),
                "phi": m.phi,
                "phi_cause": m.cause.phi,
                "phi_effect": m.effect.phi,
                "cause_purview": net.subset_name(m.cause.purview),
                "effect_purview": net.subset_name(m.effect.purview),
                "location": m.location.tolist(),
            }
        )
    return rows
