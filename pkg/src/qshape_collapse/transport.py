"""Exact Earth mover's distance under the Hamming metric, and Q-shape distances.

Distributions over ``2**n`` binary states are compared by an uncapacitated
min-cost flow on the hypercube graph (unit-cost edges between states one bit
apart). Shortest paths on the hypercube have length equal to the Hamming
distance, so the transshipment optimum is the Hamming EMD.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:
    from .iit3 import QShape

ZERO_TOL = 1e-10
_MASS_EPS = 1e-15


class TransportError(ValueError):
    pass


@dataclass(frozen=True)
class TransportPlan:
    flows: tuple[tuple[int, int, float], ...]
    cost: float

    def as_matrix(self, size: int) -> np.ndarray:
        out = np.zeros((size, size))
        for s, t, m in self.flows:
            out[s, t] += m
        return out


def hamming(a: int, b: int) -> int:
    return bin(a ^ b).count("1")


@lru_cache(maxsize=None)
def _hypercube_arcs(n_bits: int) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple(v ^ (1 << b) for b in range(n_bits)) for v in range(2**n_bits))


def min_cost_flow(adj: Sequence[Sequence[tuple[int, float]]], supply):
    """Uncapacitated min-cost transshipment by successive shortest paths.

    ``adj[u]`` lists ``(v, cost)`` arcs with non-negative cost. ``supply``
    must sum to zero (positive = source). Returns ``(cost, flow)`` where
    ``flow`` maps ``(u, v)`` to the mass on that arc.
    """
    n = len(adj)
    radj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    cost_of: dict[tuple[int, int], float] = {}
    for u, arcs in enumerate(adj):
        for v, c in arcs:
            radj[v].append((u, c))
            cost_of[(u, v)] = c
    excess = [float(x) for x in supply]
    scale = max(1.0, sum(abs(x) for x in excess))
    eps = _MASS_EPS * scale
    excess = [0.0 if abs(x) <= eps else x for x in excess]
    flow: dict[tuple[int, int], float] = {}
    potential = [0.0] * n
    inf = float("inf")
    total = 0.0
    while True:
        sources = [u for u in range(n) if excess[u] > eps]
        if not sources:
            break
        dist = [inf] * n
        prev: list[tuple[int, int] | None] = [None] * n  # (node, +1 forward | -1 backward)
        heap = [(0.0, s) for s in sources]
        for s in sources:
            dist[s] = 0.0
        done = [False] * n
        sink = -1
        while heap:
            d, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            if excess[u] < -eps:
                sink = u
                break
            pu = potential[u]
            for v, c in adj[u]:
                nd = d + c + pu - potential[v]
                if nd < dist[v] - 1e-14:
                    dist[v] = nd
                    prev[v] = (u, 1)
                    heapq.heappush(heap, (nd, v))
            # residual backward arcs: push back flow on (v, u)
            for v, c in radj[u]:
                if flow.get((v, u), 0.0) > eps:
                    nd = d - c + pu - potential[v]
                    if nd < dist[v] - 1e-14:
                        dist[v] = nd
                        prev[v] = (u, -1)
                        heapq.heappush(heap, (nd, v))
        if sink < 0:
            raise TransportError("supply cannot be routed; graph disconnected or unbalanced")
        # keep reduced costs non-negative
        dsink = dist[sink]
        for v in range(n):
            potential[v] += dist[v] if done[v] and dist[v] < dsink else dsink
        path = []
        v = sink
        while prev[v] is not None:
            u, sgn = prev[v]
            path.append((u, v, sgn))
            v = u
        src = v
        amount = min(excess[src], -excess[sink])
        for u, w, sgn in path:
            if sgn < 0:
                amount = min(amount, flow[(w, u)])
        for u, w, sgn in path:
            if sgn > 0:
                flow[(u, w)] = flow.get((u, w), 0.0) + amount
                total += cost_of[(u, w)] * amount
            else:
                flow[(w, u)] -= amount
                total -= cost_of[(w, u)] * amount
                if flow[(w, u)] <= eps:
                    del flow[(w, u)]
        excess[src] -= amount
        excess[sink] += amount
        if abs(excess[src]) <= eps:
            excess[src] = 0.0
        if abs(excess[sink]) <= eps:
            excess[sink] = 0.0
    return total, flow


def _decompose(flow: dict[tuple[int, int], float], supply: np.ndarray) -> list[tuple[int, int, float]]:
    """Split an acyclic arc flow into source-to-sink (src, dst, mass) legs."""
    out_arcs: dict[int, dict[int, float]] = {}
    for (u, v), f in flow.items():
        out_arcs.setdefault(u, {})[v] = f
    remaining = np.array(supply, dtype=float)
    legs: dict[tuple[int, int], float] = {}
    tol = 1e-13
    for s in range(len(supply)):
        while remaining[s] > tol:
            path = [s]
            amount = remaining[s]
            u = s
            # follow positive-flow arcs until mass can be absorbed
            while True:
                if remaining[u] < -tol:
                    amount = min(amount, -remaining[u])
                    break
                nxt = out_arcs.get(u)
                if not nxt:
                    break
                v, f = max(nxt.items(), key=lambda kv: kv[1])
                if f <= tol:
                    break
                amount = min(amount, f)
                path.append(v)
                u = v
            t = path[-1]
            if t == s:
                break
            for a, b in zip(path, path[1:]):
                out_arcs[a][b] -= amount
                if out_arcs[a][b] <= tol:
                    del out_arcs[a][b]
            remaining[s] -= amount
            remaining[t] += amount
            legs[(s, t)] = legs.get((s, t), 0.0) + amount
    return [(s, t, m) for (s, t), m in sorted(legs.items())]


def _check_pair(p1, p2) -> tuple[np.ndarray, np.ndarray, int]:
    a = np.asarray(getattr(p1, "probs", p1), dtype=float).ravel()
    b = np.asarray(getattr(p2, "probs", p2), dtype=float).ravel()
    if a.shape != b.shape:
        raise TransportError(f"distributions over different state spaces: {a.size} vs {b.size}")
    n_bits = int(round(np.log2(a.size))) if a.size else -1
    if a.size == 0 or 2**n_bits != a.size:
        raise TransportError(f"state space size {a.size} is not a power of two")
    for p in (a, b):
        if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-9:
            raise TransportError("inputs must be normalized probability vectors")
    return a, b, n_bits


def emd_plan(p1, p2) -> TransportPlan:
    """Optimal transport plan moving ``p1`` onto ``p2`` with Hamming costs."""
    a, b, n_bits = _check_pair(p1, p2)
    supply = a - b
    if n_bits == 0 or np.all(np.abs(supply) <= ZERO_TOL * 1e-3):
        return TransportPlan(tuple((i, i, float(m)) for i, m in enumerate(np.minimum(a, b)) if m > 0), 0.0)
    adj = [[(v, 1.0) for v in nbrs] for nbrs in _hypercube_arcs(n_bits)]
    cost, flow = min_cost_flow(adj, supply)
    legs = _decompose(flow, supply)
    stay = [(i, i, float(m)) for i, m in enumerate(np.minimum(a, b)) if m > _MASS_EPS]
    flows = tuple(sorted(stay + [(s, t, float(m)) for s, t, m in legs]))
    return TransportPlan(flows, float(sum(m * hamming(s, t) for s, t, m in flows)))


def emd(p1, p2) -> float:
    """Hamming Earth mover's distance between two distributions.

    Both arguments are index-ordered probability vectors (or objects with a
    ``probs`` attribute) over the same ``2**n`` states.
    """
    a, b, n_bits = _check_pair(p1, p2)
    return hamming_emd(a, b, n_bits)


def hamming_emd(a: np.ndarray, b: np.ndarray, n_bits: int) -> float:
    """:func:`emd` without input validation."""
    d = a - b
    if np.all(np.abs(d) <= 1e-15):
        return 0.0
    if n_bits == 1:
        val = abs(d[0])
    else:
        val, _ = min_cost_flow(_unit_adj(n_bits), d.tolist())
    return 0.0 if val < ZERO_TOL else float(val)


@lru_cache(maxsize=None)
def _unit_adj(n_bits: int):
    return tuple(tuple((v, 1.0) for v in nbrs) for nbrs in _hypercube_arcs(n_bits))


# --- Q-shape distances ---------------------------------------------------


def _aligned(q1: "QShape", q2: "QShape"):
    if q1.n != q2.n or [m.mechanism for m in q1.mechanisms] != [m.mechanism for m in q2.mechanisms]:
        raise TransportError("Q-shapes are defined over different systems")


def emd_star(q1: "QShape", q2: "QShape") -> float:
    """Extended EMD between Q-shapes, summed mechanism by mechanism.

    Each subsystem contributes ``|phi1 - phi2| * (EMD(effect) + EMD(cause))``.
    A subsystem with zero weight in one shape is located at that shape's
    unconstrained repertoires, which is where excess weight is sent.
    """
    _aligned(q1, q2)
    total = 0.0
    for m1, m2 in zip(q1.mechanisms, q2.mechanisms):
        dphi = abs(m1.phi - m2.phi)
        if dphi == 0.0:
            continue
        e1, c1 = q1.located(m1)
        e2, c2 = q2.located(m2)
        total += dphi * (emd(e1, e2) + emd(c1, c2))
    return 0.0 if total < ZERO_TOL else total


def concept_distance(e1, c1, e2, c2) -> float:
    return emd(e1, e2) + emd(c1, c2)


def emd_star_xemd(q1: "QShape", q2: "QShape") -> float:
    """Weight-transport distance between Q-shapes.

    phi-mass is moved between mechanism points of the two shapes, with ground
    cost equal to the sum of effect and cause EMDs between their locations.
    Whichever shape carries less total phi receives a null point at its
    unconstrained repertoires that absorbs the excess.
    """
    _aligned(q1, q2)
    pts1 = [(m.phi, *q1.located(m)) for m in q1.points]
    pts2 = [(m.phi, *q2.located(m)) for m in q2.points]
    w1 = sum(p[0] for p in pts1)
    w2 = sum(p[0] for p in pts2)
    if w1 < w2:
        pts1.append((w2 - w1, q1.uc_effect, q1.uc_cause))
    elif w2 < w1:
        pts2.append((w1 - w2, q2.uc_effect, q2.uc_cause))
    if not pts1 or not pts2:
        return 0.0
    n1 = len(pts1)
    supply = np.array([p[0] for p in pts1] + [-p[0] for p in pts2])
    adj: list[list[tuple[int, float]]] = [[] for _ in range(n1 + len(pts2))]
    for i, (_, e1, c1) in enumerate(pts1):
        for j, (_, e2, c2) in enumerate(pts2):
            adj[i].append((n1 + j, concept_distance(e1, c1, e2, c2)))
    cost, _ = min_cost_flow(adj, supply)
    return 0.0 if cost < ZERO_TOL else float(cost)


QSHAPE_DISTANCES = {"literal": emd_star, "xemd": emd_star_xemd}


def qshape_distance(q1: "QShape", q2: "QShape", variant: str = "literal") -> float:
    try:
        fn = QSHAPE_DISTANCES[variant]
    except KeyError:
        raise TransportError(f"unknown Q-shape distance {variant!r}") from None
    return fn(q1, q2)
