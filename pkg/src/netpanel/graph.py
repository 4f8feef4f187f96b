"""Fixed directed networks and multi-stage neighbourhood structure.

A network here is a simple directed graph: no self loops, at most one edge
per ordered node pair.  Time series live on both the nodes and the edges,
and the autoregressive model couples a series to the rest of the network
through *stage-r* neighbourhood sets:

* direction is ignored when measuring closeness — stage sets are level sets
  of shortest-path distance on the undirected skeleton;
* two distinct edges are adjacent when they share at least one endpoint, so
  the reciprocal edge (j, i) is a stage-1 neighbour of (i, j);
* stage sets are disjoint across r by construction (each node/edge appears
  at the stage equal to its distance from the source).

Nodes are integer indices ``0..n_nodes-1`` with parallel string labels.
Edges are identified by their position in the edge tuple; that position is
the canonical edge labelling used everywhere downstream (stacked vectors,
design matrices, CSV output), so edge order is part of the network's
identity and is never silently re-sorted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property


@dataclass(frozen=True)
class StaticNetwork:
    """A fixed directed graph with labelled nodes and ordered edges.

    Parameters
    ----------
    node_labels : tuple of str
        Distinct labels, one per node; node ``i`` is the i-th label.
    edges : tuple of (int, int)
        Ordered (source, target) index pairs.  Position in this tuple is
        the edge's identity everywhere else in the package.
    """

    node_labels: tuple[str, ...]
    edges: tuple[tuple[int, int], ...] = field(default=())

    def __post_init__(self):
        labels = tuple(str(s) for s in self.node_labels)
        edges = tuple((int(a), int(b)) for a, b in self.edges)
        object.__setattr__(self, "node_labels", labels)
        object.__setattr__(self, "edges", edges)
        n = len(labels)
        if n == 0:
            raise ValueError("network needs at least one node")
        if len(set(labels)) != n:
            raise ValueError("node labels must be distinct")
        seen = set()
        for a, b in edges:
            if not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"edge ({a}, {b}) references a missing node")
            if a == b:
                raise ValueError(f"self loop at node {a} is not allowed")
            if (a, b) in seen:
                raise ValueError(f"duplicate edge ({a}, {b})")
            seen.add((a, b))

    @property
    def n_nodes(self) -> int:
        return len(self.node_labels)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edge_id(self, source: int, target: int) -> int:
        """Position of the ordered edge (source, target); raises if absent."""
        try:
            return self._edge_lookup[(source, target)]
        except KeyError:
            raise ValueError(f"no edge ({source}, {target}) in network") from None

    def edge_label(self, e: int) -> str:
        a, b = self.edges[e]
        return f"{self.node_labels[a]}->{self.node_labels[b]}"

    @cached_property
    def _edge_lookup(self) -> dict[tuple[int, int], int]:
        return {pair: q for q, pair in enumerate(self.edges)}

    @cached_property
    def _node_adjacency(self) -> tuple[tuple[int, ...], ...]:
        # undirected skeleton: j is adjacent to i if either orientation exists
        nbrs: list[set[int]] = [set() for _ in range(self.n_nodes)]
        for a, b in self.edges:
            nbrs[a].add(b)
            nbrs[b].add(a)
        return tuple(tuple(sorted(s)) for s in nbrs)

    @cached_property
    def _incident(self) -> tuple[tuple[int, ...], ...]:
        inc: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for q, (a, b) in enumerate(self.edges):
            inc[a].append(q)
            inc[b].append(q)
        return tuple(tuple(sorted(qs)) for qs in inc)

    @cached_property
    def _edge_adjacency(self) -> tuple[tuple[int, ...], ...]:
        # two distinct edges are adjacent when they share an endpoint in the
        # undirected sense; (i, j) and (j, i) share both, hence adjacent
        adj: list[tuple[int, ...]] = []
        for q, (a, b) in enumerate(self.edges):
            s = set(self._incident[a]) | set(self._incident[b])
            s.discard(q)
            adj.append(tuple(sorted(s)))
        return tuple(adj)


def incident_edges(net: StaticNetwork, i: int) -> tuple[int, ...]:
    """Edge positions touching node ``i`` (either endpoint), sorted."""
    if not (0 <= i < net.n_nodes):
        raise ValueError(f"node index {i} out of range")
    return net._incident[i]


def _stage_sets(adjacency, start: int, max_stage: int) -> list[tuple[int, ...]]:
    """Level sets of BFS distance from ``start``, stages 1..max_stage.

    Implements the recursive definition directly: stage r+1 collects the
    immediate neighbours of stage r not seen at any earlier stage.
    """
    seen = {start}
    frontier = {start}
    out: list[tuple[int, ...]] = []
    for _ in range(max_stage):
        nxt = set()
        for u in frontier:
            nxt.update(adjacency[u])
        nxt -= seen
        out.append(tuple(sorted(nxt)))
        seen |= nxt
        frontier = nxt
    return out


def node_neighbors(net: StaticNetwork, i: int, r: int) -> tuple[int, ...]:
    """Stage-``r`` node neighbourhood of node ``i``.

    Nodes at undirected shortest-path distance exactly ``r`` from ``i``,
    sorted.  Empty when nothing sits at that distance.
    """
    if not (0 <= i < net.n_nodes):
        raise ValueError(f"node index {i} out of range")
    if r < 1:
        raise ValueError("stage must be >= 1")
    return _stage_sets(net._node_adjacency, i, r)[r - 1]


def edge_neighbors(net: StaticNetwork, e: int, r: int) -> tuple[int, ...]:
    """Stage-``r`` edge neighbourhood of edge position ``e``.

    Distance is measured on the edge-adjacency graph (edges adjacent when
    they share an endpoint); returns sorted edge positions at distance
    exactly ``r``.
    """
    if not (0 <= e < net.n_edges):
        raise ValueError(f"edge index {e} out of range")
    if r < 1:
        raise ValueError("stage must be >= 1")
    return _stage_sets(net._edge_adjacency, e, r)[r - 1]


@dataclass(frozen=True)
class NeighborhoodTables:
    """Precomputed stage sets for every node and edge up to ``max_stage``.

    ``node_stages[i][r-1]`` and ``edge_stages[e][r-1]`` hold the stage-r
    sets; ``incident[i]`` the edges touching node i.  Built once per
    network and shared by design construction, simulation and forecasting.
    """

    max_stage: int
    node_stages: tuple[tuple[tuple[int, ...], ...], ...]
    edge_stages: tuple[tuple[tuple[int, ...], ...], ...]
    incident: tuple[tuple[int, ...], ...]

    def nodes(self, i: int, r: int) -> tuple[int, ...]:
        if not (1 <= r <= self.max_stage):
            raise ValueError(f"stage {r} outside precomputed range 1..{self.max_stage}")
        return self.node_stages[i][r - 1]

    def edges(self, e: int, r: int) -> tuple[int, ...]:
        if not (1 <= r <= self.max_stage):
            raise ValueError(f"stage {r} outside precomputed range 1..{self.max_stage}")
        return self.edge_stages[e][r - 1]


def build_neighborhood_tables(net: StaticNetwork, max_stage: int) -> NeighborhoodTables:
    """Breadth-first distance labelling grouped into stage sets.

    Deliberately a different algorithm from :func:`node_neighbors` /
    :func:`edge_neighbors` (single BFS with distance labels versus literal
    stage recursion) so the two can be cross-checked.
    """
    if max_stage < 0:
        raise ValueError("max_stage must be >= 0")

    def distances(adjacency, start: int, n: int) -> list[int]:
        dist = [-1] * n
        dist[start] = 0
        queue = [start]
        head = 0
        while head < len(queue):
            u = queue[head]
            head += 1
            for v in adjacency[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist

    def grouped(adjacency, n: int):
        rows = []
        for s in range(n):
            dist = distances(adjacency, s, n)
            stages = [[] for _ in range(max_stage)]
            for v, d in enumerate(dist):
                if 1 <= d <= max_stage:
                    stages[d - 1].append(v)
            rows.append(tuple(tuple(st) for st in stages))
        return tuple(rows)

    return NeighborhoodTables(
        max_stage=max_stage,
        node_stages=grouped(net._node_adjacency, net.n_nodes),
        edge_stages=grouped(net._edge_adjacency, net.n_edges),
        incident=net._incident,
    )
