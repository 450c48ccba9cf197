"""Directed leader-following graphs, Laplacians and structural weight sampling.

An edge ``(j, i)`` means agent ``i`` exploits the state of agent ``j``; its
base weight is ``a_ij[0]``.  The leader is stored at index 0 and never has
incoming edges.  Only the nonzero weights vary over time; zeros stay zero.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import DeltaTooLarge, InvalidTopology, LeaderHasInEdge, NoSpanningTree

Edge = tuple[int, int]


@dataclass(frozen=True)
class Topology:
    n_agents: int
    leader: int
    edges: tuple[Edge, ...]
    base_weights: tuple[float, ...]
    delta: float
    names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.names:
            object.__setattr__(self, "names", tuple(str(i) for i in range(self.n_agents)))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def in_neighbors(self, i: int) -> list[int]:
        """Agents whose state agent ``i`` reads (the set N_i)."""
        return [src for src, dst in self.edges if dst == i]

    def out_neighbors(self, j: int) -> list[int]:
        """Agents that read the state of agent ``j``."""
        return [dst for src, dst in self.edges if src == j]

    def edge_index(self, src: int, dst: int) -> int:
        try:
            return self.edges.index((src, dst))
        except ValueError:
            raise KeyError(f"no edge {src}->{dst}") from None

    def base_adjacency(self) -> np.ndarray:
        """A[0] with entry (i, j) = a_ij[0]."""
        return adjacency(self, np.asarray(self.base_weights))

    def interval(self, e: int) -> tuple[float, float]:
        a0 = self.base_weights[e]
        return a0 - self.delta, a0 + self.delta

    def index_of(self, name: str | int) -> int:
        if isinstance(name, (int, np.integer)):
            return int(name)
        return self.names.index(name)

    def to_dict(self) -> dict[str, Any]:
        return {
            "agents": list(self.names),
            "leader": self.names[self.leader],
            "edges": [
                {"from": self.names[s], "to": self.names[d], "weight": w}
                for (s, d), w in zip(self.edges, self.base_weights)
            ],
            "delta": self.delta,
        }


@dataclass(frozen=True)
class WeightSchedule:
    """Realized weights, one row per step, columns aligned with ``topology.edges``."""

    topology: Topology
    weights: np.ndarray
    seed: int | None = None
    constant: bool = False

    @property
    def horizon(self) -> int:
        return self.weights.shape[0]

    @property
    def steps(self) -> list[dict[Edge, float]]:
        return [dict(zip(self.topology.edges, row.tolist())) for row in self.weights]

    def __getitem__(self, k: int) -> np.ndarray:
        return self.weights[k]


def has_spanning_tree(topology: Topology) -> bool:
    """True iff every agent is reachable from the leader along directed edges."""
    seen = {topology.leader}
    queue = deque([topology.leader])
    succ: dict[int, list[int]] = {}
    for src, dst in topology.edges:
        succ.setdefault(src, []).append(dst)
    while queue:
        node = queue.popleft()
        for nxt in succ.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return len(seen) == topology.n_agents


def build_topology(
    n_agents: int,
    leader: int,
    edges: Iterable[tuple[int, int, float]],
    delta: float,
    names: Sequence[str] | None = None,
) -> Topology:
    """Validate and build a topology; the leader is moved to index 0.

    Args:
        n_agents: number of agents N >= 2.
        leader: index of the leader in the caller's numbering.
        edges: ``(src, dst, base_weight)`` triples, ``dst`` reads ``src``.
        delta: half-width of the structural weight interval.
        names: optional agent labels in the caller's numbering.

    Raises:
        InvalidTopology: malformed input (self-loops, duplicates, bad indices).
        LeaderHasInEdge: some edge points into the leader.
        DeltaTooLarge: ``delta >= base_weight`` for some edge.
        NoSpanningTree: the leader cannot reach every agent.
    """
    edges = list(edges)
    if n_agents < 2:
        raise InvalidTopology("need at least two agents")
    if not 0 <= leader < n_agents:
        raise InvalidTopology(f"leader index {leader} out of range")
    if not edges:
        raise InvalidTopology("edge list is empty")
    if not delta > 0:
        raise InvalidTopology("delta must be positive")
    names = list(names) if names is not None else [str(i) for i in range(n_agents)]
    if len(names) != n_agents or len(set(names)) != n_agents:
        raise InvalidTopology("agent names must be unique, one per agent")

    order = [leader] + [i for i in range(n_agents) if i != leader]
    remap = {old: new for new, old in enumerate(order)}
    seen: set[Edge] = set()
    out_edges: list[Edge] = []
    out_weights: list[float] = []
    for src, dst, w in edges:
        if not (0 <= src < n_agents and 0 <= dst < n_agents):
            raise InvalidTopology(f"edge {src}->{dst} references an unknown agent")
        if src == dst:
            raise InvalidTopology(f"self-loop on agent {src}")
        if dst == leader:
            raise LeaderHasInEdge(f"edge {names[src]}->{names[dst]} points into the leader")
        w = float(w)
        if not w > 0:
            raise InvalidTopology(f"edge {names[src]}->{names[dst]} has non-positive weight")
        if delta >= w:
            raise DeltaTooLarge(f"delta={delta} >= weight {w} on edge {names[src]}->{names[dst]}")
        e = (remap[src], remap[dst])
        if e in seen:
            raise InvalidTopology(f"duplicate edge {names[src]}->{names[dst]}")
        seen.add(e)
        out_edges.append(e)
        out_weights.append(w)

    perm = sorted(range(len(out_edges)), key=lambda k: (out_edges[k][1], out_edges[k][0]))
    topo = Topology(
        n_agents=n_agents,
        leader=0,
        edges=tuple(out_edges[k] for k in perm),
        base_weights=tuple(out_weights[k] for k in perm),
        delta=float(delta),
        names=tuple(names[i] for i in order),
    )
    if not has_spanning_tree(topo):
        raise NoSpanningTree("leader does not reach every agent")
    return topo


def topology_from_dict(spec: Mapping[str, Any]) -> Topology:
    """Build from ``{agents, leader, edges: [{from, to, weight}], delta}``.

    ``agents`` is either a count or a list of names; endpoints may be given as
    indices or names.
    """
    agents = spec["agents"]
    if isinstance(agents, int):
        names = [str(i) for i in range(agents)]
    else:
        names = [str(a) for a in agents]

    def idx(ref: Any) -> int:
        if isinstance(ref, bool):
            raise InvalidTopology(f"bad agent reference {ref!r}")
        if isinstance(ref, int):
            return ref
        try:
            return names.index(str(ref))
        except ValueError:
            raise InvalidTopology(f"unknown agent {ref!r}") from None

    edges = [(idx(e["from"]), idx(e["to"]), float(e.get("weight", 1.0))) for e in spec["edges"]]
    return build_topology(len(names), idx(spec["leader"]), edges, float(spec["delta"]), names)


def load_topology(path: str | Path) -> Topology:
    return topology_from_dict(json.loads(Path(path).read_text()))


def adjacency(topology: Topology, weights: np.ndarray) -> np.ndarray:
    n = topology.n_agents
    A = np.zeros((n, n))
    for (src, dst), w in zip(topology.edges, np.asarray(weights, dtype=float)):
        A[dst, src] = w
    return A


def laplacian(topology: Topology, weights: np.ndarray) -> np.ndarray:
    """L with l_ij = -a_ij off the diagonal and l_ii the in-weight sum."""
    A = adjacency(topology, weights)
    return np.diag(A.sum(axis=1)) - A


def laplacian_stack(topology: Topology, weights: np.ndarray) -> np.ndarray:
    """Vectorized :func:`laplacian` over a ``(steps, n_edges)`` weight array."""
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    n = topology.n_agents
    src = np.array([e[0] for e in topology.edges])
    dst = np.array([e[1] for e in topology.edges])
    L = np.zeros((weights.shape[0], n, n))
    L[:, dst, src] = -weights
    for e in range(topology.n_edges):
        L[:, dst[e], dst[e]] += weights[:, e]
    return L


def edge_seeds(seed: int | None, n_edges: int) -> list[np.random.SeedSequence]:
    """One independent stream per edge; shared by plaintext and encrypted runs."""
    return np.random.SeedSequence(seed).spawn(n_edges)


def edge_weight_stream(topology: Topology, e: int, seed_seq: np.random.SeedSequence):
    """Infinite generator of admissible weights for edge ``e``."""
    rng = np.random.default_rng(seed_seq)
    lo, hi = topology.interval(e)
    while True:
        yield float(rng.uniform(lo, hi))


def sample_weights(topology: Topology, horizon: int, seed: int | None = None) -> WeightSchedule:
    """Independent uniform draws per edge per step from [a0 - delta, a0 + delta]."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    cols = []
    for e, ss in enumerate(edge_seeds(seed, topology.n_edges)):
        lo, hi = topology.interval(e)
        cols.append(np.random.default_rng(ss).uniform(lo, hi, size=horizon))
    weights = np.column_stack(cols) if cols else np.zeros((horizon, 0))
    return WeightSchedule(topology, weights, seed)


def constant_schedule(topology: Topology, horizon: int) -> WeightSchedule:
    """Weights frozen at their base values (the insecure baseline)."""
    weights = np.tile(np.asarray(topology.base_weights, dtype=float), (horizon, 1))
    return WeightSchedule(topology, weights, None, constant=True)


def canonical_topology(delta: float = 0.5) -> Topology:
    """Four agents L, A, B, C with unit weights: L->A, B->A, A->B, A->C."""
    return topology_from_dict(
        {
            "agents": ["L", "A", "B", "C"],
            "leader": "L",
            "edges": [
                {"from": "L", "to": "A", "weight": 1.0},
                {"from": "B", "to": "A", "weight": 1.0},
                {"from": "A", "to": "B", "weight": 1.0},
                {"from": "A", "to": "C", "weight": 1.0},
            ],
            "delta": delta,
        }
    )


def five_agent_topology(delta: float = 0.5) -> Topology:
    """Five agents L, A, B, C, E with unit weights: L->A, B->A, L->B, A->C, C->E.

    Acyclic among followers, so every nonzero Laplacian eigenvalue is a real
    in-weight sum in [0.5, 3] for delta = 0.5.
    """
    return topology_from_dict(
        {
            "agents": ["L", "A", "B", "C", "E"],
            "leader": "L",
            "edges": [
                {"from": "L", "to": "A", "weight": 1.0},
                {"from": "B", "to": "A", "weight": 1.0},
                {"from": "L", "to": "B", "weight": 1.0},
                {"from": "A", "to": "C", "weight": 1.0},
                {"from": "C", "to": "E", "weight": 1.0},
            ],
            "delta": delta,
        }
    )


def random_topology(
    rng: np.random.Generator,
    n_agents: int,
    extra_edge_prob: float = 0.3,
    weight_range: tuple[float, float] = (1.0, 2.0),
) -> Topology:
    """Random spanning-tree topology rooted at agent 0 plus extra follower edges."""
    edges: dict[Edge, float] = {}
    for i in range(1, n_agents):
        parent = int(rng.integers(0, i))
        edges[(parent, i)] = float(rng.uniform(*weight_range))
    for i in range(1, n_agents):
        for j in range(n_agents):
            if j != i and (j, i) not in edges and rng.random() < extra_edge_prob:
                edges[(j, i)] = float(rng.uniform(*weight_range))
    delta = float(rng.uniform(0.1, 0.9)) * min(edges.values())
    return build_topology(n_agents, 0, [(s, d, w) for (s, d), w in edges.items()], delta)
