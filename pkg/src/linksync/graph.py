"""Static undirected communication graphs over agent positions.

A graph is built once from the initial configuration and never changes
during a run: agents i and j share a link when their initial distance is
within the edge threshold.  Each undirected link also carries a fixed
orientation (tail -> head, head being the larger index) so that
incidence-based factorizations are well defined.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "CommGraph",
    "graph_from_positions",
    "incidence_matrix",
    "weighted_laplacian",
    "is_connected",
]


@dataclass(frozen=True)
class CommGraph:
    """Undirected graph with positive edge weights and a fixed orientation.

    Edges are stored as (tail, head) pairs with tail < head.  The neighbor
    relation is symmetric by construction.
    """

    n_agents: int
    edges: tuple[tuple[int, int], ...]
    weights: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.n_agents < 1:
            raise ValueError("graph needs at least one agent")
        if self.weights is None:
            object.__setattr__(self, "weights", (1.0,) * len(self.edges))
        if len(self.weights) != len(self.edges):
            raise ValueError("expected one weight per edge")
        seen = set()
        for a, b in self.edges:
            if a == b:
                raise ValueError(f"self-loop on agent {a}")
            if not (0 <= a < self.n_agents) or not (0 <= b < self.n_agents):
                raise ValueError(f"edge ({a}, {b}) out of range")
            if a > b:
                raise ValueError(f"edge ({a}, {b}) must be oriented tail < head")
            if (a, b) in seen:
                raise ValueError(f"duplicate edge ({a}, {b})")
            seen.add((a, b))
        for w in self.weights:
            if not w > 0.0:
                raise ValueError("edge weights must be strictly positive")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, i: int) -> tuple[int, ...]:
        """Agents adjacent to agent ``i``, in increasing index order."""
        out = []
        for a, b in self.edges:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return tuple(sorted(out))

    def directed_edges(self) -> tuple[tuple[int, int], ...]:
        """(receiver, sender) pairs, two per undirected edge.

        Undirected edge k expands to directed index 2k (tail receives from
        head) and 2k + 1 (head receives from tail).  This ordering is the
        canonical one used for per-edge delay channels.
        """
        out = []
        for a, b in self.edges:
            out.append((a, b))
            out.append((b, a))
        return tuple(out)


def _as_points(positions) -> np.ndarray:
    pos = np.asarray(positions, dtype=float)
    if pos.ndim == 1:
        pos = pos[:, None]
    if pos.ndim != 2:
        raise ValueError("positions must be an (n_agents, dim) array")
    if not np.all(np.isfinite(pos)):
        raise ValueError("positions must be finite")
    return pos


def graph_from_positions(positions, radius: float, threshold: float) -> CommGraph:
    """Link every agent pair whose distance is at most ``threshold``.

    ``threshold`` must lie in (0, radius]; a pair at distance exactly
    ``threshold`` is linked.  All weights are 1.
    """
    pos = _as_points(positions)
    if not radius > 0.0:
        raise ValueError("radius must be positive")
    if not 0.0 < threshold <= radius:
        raise ValueError(
            f"edge threshold must lie in (0, radius], got {threshold} with radius {radius}"
        )
    n = pos.shape[0]
    # relative slack absorbs representation noise so that pairs sitting
    # exactly on the threshold (in exact arithmetic) are linked
    cut = threshold * (1.0 + 1e-12)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if float(np.linalg.norm(pos[i] - pos[j])) <= cut:
                edges.append((i, j))
    return CommGraph(n_agents=n, edges=tuple(edges))


def incidence_matrix(g: CommGraph) -> np.ndarray:
    """N x M incidence matrix: +1 at the head of each edge, -1 at the tail."""
    d = np.zeros((g.n_agents, g.n_edges))
    for k, (tail, head) in enumerate(g.edges):
        d[tail, k] = -1.0
        d[head, k] = 1.0
    return d


def weighted_laplacian(g: CommGraph) -> np.ndarray:
    """Weighted graph Laplacian, identical to D W D^T for the incidence D."""
    lap = np.zeros((g.n_agents, g.n_agents))
    for (a, b), w in zip(g.edges, g.weights):
        lap[a, a] += w
        lap[b, b] += w
        lap[a, b] -= w
        lap[b, a] -= w
    return lap


def is_connected(g: CommGraph) -> bool:
    """True when a path joins every agent pair (breadth-first search)."""
    if g.n_agents == 1:
        return True
    adj: list[list[int]] = [[] for _ in range(g.n_agents)]
    for a, b in g.edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = [False] * g.n_agents
    seen[0] = True
    stack = [0]
    count = 1
    while stack:
        v = stack.pop()
        for u in adj[v]:
            if not seen[u]:
                seen[u] = True
                count += 1
                stack.append(u)
    return count == g.n_agents
