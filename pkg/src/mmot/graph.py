"""Pairwise cost graphs: unrolling cycles into trees and rooting the result.

Nodes are 0-based throughout the Python API.  The text graph format used by
the command line is 1-based and converted in :func:`parse_graph_spec`.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, DisconnectedGraph, InvalidRoot, NonpositiveWeight, NotATree


@dataclass(frozen=True)
class PairwiseCost:
    """Scaled quadratic cost ``c(x, y) = (w / 2) |x - y|^2``."""

    weight: float = 1.0

    def __post_init__(self):
        if not self.weight > 0:
            raise NonpositiveWeight(f"pairwise cost weight must be positive, got {self.weight}")

    def __call__(self, x, y):
        d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        return 0.5 * self.weight * np.sum(d * d, axis=-1)

    def grad_conjugate(self, p):
        """Gradient of the convex conjugate of ``h(z) = (w/2)|z|^2``."""
        return np.asarray(p) / self.weight


@dataclass(frozen=True)
class CostGraph:
    """Simple undirected graph whose nodes are marginals and edges pairwise costs.

    ``edges`` holds ``(i, j, PairwiseCost)`` with ``i < j``.
    """

    n_nodes: int
    edges: tuple = ()

    def __post_init__(self):
        norm = []
        seen = set()
        for edge in self.edges:
            i, j, cost = edge if len(edge) == 3 else (*edge, PairwiseCost())
            if not isinstance(cost, PairwiseCost):
                cost = PairwiseCost(float(cost))
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < self.n_nodes and 0 <= j < self.n_nodes):
                raise ValueError(f"edge ({i}, {j}) refers to a missing node")
            i, j = min(i, j), max(i, j)
            if (i, j) in seen:
                raise ValueError(f"parallel edge ({i}, {j})")
            seen.add((i, j))
            norm.append((i, j, cost))
        object.__setattr__(self, "edges", tuple(norm))

    @classmethod
    def chain(cls, m: int, weight: float = 1.0) -> "CostGraph":
        return cls(m, tuple((i, i + 1, PairwiseCost(weight)) for i in range(m - 1)))

    @classmethod
    def cycle(cls, m: int, weight: float = 1.0) -> "CostGraph":
        edges = [(i, i + 1, PairwiseCost(weight)) for i in range(m - 1)]
        edges.append((0, m - 1, PairwiseCost(weight)))
        return cls(m, tuple(edges))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def adjacency(self) -> list[list[int]]:
        adj = [[] for _ in range(self.n_nodes)]
        for i, j, _ in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        for nbrs in adj:
            nbrs.sort()
        return adj

    def weight(self, i: int, j: int) -> float:
        a, b = min(i, j), max(i, j)
        for u, v, cost in self.edges:
            if (u, v) == (a, b):
                return cost.weight
        raise KeyError(f"no edge between {i} and {j}")

    def is_connected(self) -> bool:
        if self.n_nodes == 0:
            return False
        return len(_bfs_order(self.adjacency(), 0)) == self.n_nodes

    def is_tree(self) -> bool:
        return self.n_edges == self.n_nodes - 1 and self.is_connected()

    def total_cost(self, points) -> np.ndarray:
        """Evaluate ``sum_e c_e(x_i, x_j)`` for tuples ``points[..., node, :]``."""
        points = np.asarray(points, dtype=float)
        total = np.zeros(points.shape[:-2])
        for i, j, cost in self.edges:
            total = total + cost(points[..., i, :], points[..., j, :])
        return total


def _bfs_order(adj, start):
    seen = {start}
    order = [start]
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                order.append(v)
                queue.append(v)
    return order


def unroll(graph: CostGraph) -> tuple[CostGraph, np.ndarray]:
    """Break every cycle by rerouting edges to duplicated marginals.

    A BFS spanning tree is grown from node 0; every remaining edge is attached
    to a fresh copy of the endpoint that the BFS reached later.  Returns the
    tree (``n_edges + 1`` nodes) and ``dup_map[tree_node] -> original node``,
    which is the identity on the first ``n_nodes`` entries.
    """
    if not graph.is_connected():
        raise DisconnectedGraph("cost graph must be connected; split it into independent problems")
    adj = graph.adjacency()
    order = _bfs_order(adj, 0)
    rank = {node: r for r, node in enumerate(order)}
    parent = {0: None}
    for u in order:
        for v in adj[u]:
            if v not in parent:
                parent[v] = u
    tree_edges = []
    extra = []
    for i, j, cost in graph.edges:
        if parent.get(j) == i or parent.get(i) == j:
            tree_edges.append((i, j, cost))
        else:
            early, late = (i, j) if rank[i] < rank[j] else (j, i)
            extra.append((rank[early], rank[late], early, late, cost))
    dup_map = list(range(graph.n_nodes))
    for _, _, early, late, cost in sorted(extra, key=lambda e: e[:2]):
        dup_map.append(late)
        tree_edges.append((early, len(dup_map) - 1, cost))
    tree = CostGraph(len(dup_map), tuple(tree_edges))
    return tree, np.asarray(dup_map, dtype=int)


@dataclass(frozen=True)
class RootedTree:
    """A tree with all edges directed towards ``root``.

    ``parent[root] == -1``; ``layer`` is the BFS depth; ``weight[i]`` is the
    cost weight on edge ``(i, parent[i])`` (unused for the root).
    """

    n_nodes: int
    root: int
    parent: np.ndarray
    children: tuple
    layer: np.ndarray
    weight: np.ndarray
    dup_map: np.ndarray = field(default=None)

    def non_root(self):
        return [i for i in range(self.n_nodes) if i != self.root]


def root_tree(tree: CostGraph, root: int, dup_map=None) -> RootedTree:
    if not 0 <= root < tree.n_nodes:
        raise InvalidRoot(f"root {root} is not a node of a {tree.n_nodes}-node tree")
    if not tree.is_tree():
        raise NotATree("graph has cycles or is disconnected; unroll it first")
    n = tree.n_nodes
    weights = {}
    for i, j, cost in tree.edges:
        weights[(i, j)] = weights[(j, i)] = cost.weight
    adj = tree.adjacency()
    parent = np.full(n, -1, dtype=int)
    layer = np.zeros(n, dtype=int)
    weight = np.zeros(n)
    children = [[] for _ in range(n)]
    seen = {root}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                parent[v] = u
                layer[v] = layer[u] + 1
                weight[v] = weights[(u, v)]
                children[u].append(v)
                queue.append(v)
    if dup_map is None:
        dup_map = np.arange(n)
    return RootedTree(n, root, parent, tuple(tuple(c) for c in children), layer, weight,
                      np.asarray(dup_map, dtype=int))


def run_order(rt: RootedTree) -> list[int]:
    """Nodes by non-increasing layer, ties by ascending index; the root comes last."""
    return sorted(range(rt.n_nodes), key=lambda i: (-rt.layer[i], i))


def recover_duals(tree_potentials, dup_map, n_original: int | None = None) -> list[np.ndarray]:
    """Sum the potentials of all tree copies of each original marginal."""
    dup_map = np.asarray(dup_map, dtype=int)
    if len(tree_potentials) != len(dup_map):
        raise ValueError("need exactly one potential per tree node")
    m = int(dup_map.max()) + 1 if n_original is None else n_original
    out = [np.zeros_like(np.asarray(tree_potentials[0], dtype=float)) for _ in range(m)]
    for j, f in enumerate(tree_potentials):
        out[dup_map[j]] = out[dup_map[j]] + f
    return out


def parse_graph_spec(text: str):
    """Parse ``edge i j w`` / ``marginal i path`` lines (1-based node ids).

    Returns ``(graph, marginal_paths)`` where ``marginal_paths[i]`` belongs to
    0-based node ``i``.
    """
    edges = []
    paths = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 2) if line.startswith("marginal") else line.split()
        try:
            if parts[0] == "edge" and len(parts) == 4:
                i, j, w = int(parts[1]), int(parts[2]), float(parts[3])
                edges.append((i - 1, j - 1, w))
            elif parts[0] == "marginal" and len(parts) == 3:
                paths[int(parts[1]) - 1] = parts[2].strip()
            else:
                raise ValueError(raw)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: cannot parse {raw.strip()!r}") from exc
    if not paths:
        raise ConfigError("graph spec declares no marginals")
    m = max(paths) + 1
    if sorted(paths) != list(range(m)):
        raise ConfigError(f"marginals must be numbered 1..{m} without gaps")
    for i, j, w in edges:
        if min(i, j) < 0 or max(i, j) >= m:
            raise ConfigError(f"edge ({i + 1}, {j + 1}) refers to an undeclared marginal")
        if w <= 0:
            raise ConfigError(f"edge ({i + 1}, {j + 1}) has nonpositive weight {w}")
    try:
        graph = CostGraph(m, tuple((i, j, PairwiseCost(w)) for i, j, w in edges))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return graph, [paths[i] for i in range(m)]
