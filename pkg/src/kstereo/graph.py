"""Edge-list graphs and unweighted all-pairs shortest paths."""

import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .errors import DisconnectedError, EmptyGraphError, ParseError

log = logging.getLogger(__name__)

FLOYD_WARSHALL_MAX_NODES = 1024


@dataclass
class Graph:
    """Undirected simple graph on dense indices ``0..node_count-1``."""

    node_count: int
    edges: np.ndarray
    labels: List[str] = field(default_factory=list)
    dropped_self_loops: int = 0

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if not self.labels:
            self.labels = [str(i) for i in range(self.node_count)]
        if len(self.labels) != self.node_count:
            raise ValueError("one label per node required")

    @classmethod
    def from_edges(cls, edges, node_count=None, labels=None):
        """Build a graph from index pairs, dropping self-loops and duplicates."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if node_count is None:
            node_count = int(edges.max()) + 1 if edges.size else 0
        if edges.size and (edges.min() < 0 or edges.max() >= node_count):
            raise ValueError("edge index out of range")
        loops = edges[:, 0] == edges[:, 1]
        edges = np.sort(edges[~loops], axis=1)
        # keep first-seen order while deduplicating
        _, first = np.unique(edges, axis=0, return_index=True)
        edges = edges[np.sort(first)]
        return cls(node_count, edges, list(labels or []), int(loops.sum()))

    def adjacency(self):
        n = self.node_count
        u, v = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * len(u))
        return csr_matrix((data, (np.concatenate([u, v]), np.concatenate([v, u]))), shape=(n, n))

    def neighbors(self):
        nbrs = [[] for _ in range(self.node_count)]
        for u, v in self.edges:
            nbrs[u].append(int(v))
            nbrs[v].append(int(u))
        return nbrs


def parse_edge_list(lines):
    """Parse whitespace-separated ``u v`` lines; ``#`` comments and blanks skipped."""
    index, labels, pairs = {}, [], []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise ParseError(f"expected two node tokens, got {len(tokens)}", lineno)
        ids = []
        for tok in tokens:
            if tok not in index:
                index[tok] = len(labels)
                labels.append(tok)
            ids.append(index[tok])
        pairs.append(ids)
    if not labels:
        raise EmptyGraphError("edge list contains no edges")
    graph = Graph.from_edges(pairs, node_count=len(labels), labels=labels)
    if graph.dropped_self_loops:
        log.warning("dropped %d self-loop(s)", graph.dropped_self_loops)
    return graph


def load_edge_list(path):
    with open(path, encoding="utf-8") as fh:
        return parse_edge_list(fh)


def subgraph(graph, nodes):
    """Induced subgraph on ``nodes`` (kept in ascending index order)."""
    nodes = np.sort(np.asarray(nodes, dtype=np.int64))
    remap = -np.ones(graph.node_count, dtype=np.int64)
    remap[nodes] = np.arange(len(nodes))
    keep = (remap[graph.edges[:, 0]] >= 0) & (remap[graph.edges[:, 1]] >= 0)
    edges = remap[graph.edges[keep]]
    labels = [graph.labels[i] for i in nodes]
    return Graph(len(nodes), edges, labels)


def largest_connected_component(graph):
    """Return ``(component, dropped_node_count)``.

    Ties between equally large components go to the one containing the
    smallest node index.
    """
    if graph.node_count == 0:
        raise EmptyGraphError("graph has no nodes")
    ncomp, labels = connected_components(graph.adjacency(), directed=False)
    if ncomp == 1:
        return graph, 0
    sizes = np.bincount(labels, minlength=ncomp)
    first = np.full(ncomp, graph.node_count)
    np.minimum.at(first, labels, np.arange(graph.node_count))
    candidates = np.flatnonzero(sizes == sizes.max())
    best = int(candidates[np.argmin(first[candidates])])
    nodes = np.flatnonzero(labels == best)
    dropped = graph.node_count - len(nodes)
    log.warning("kept largest component: dropped %d node(s)", dropped)
    return subgraph(graph, nodes), dropped


def floyd_warshall(graph):
    n = graph.node_count
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0.0)
    d[graph.edges[:, 0], graph.edges[:, 1]] = 1.0
    d[graph.edges[:, 1], graph.edges[:, 0]] = 1.0
    for k in range(n):
        np.minimum(d, d[:, k, None] + d[None, k, :], out=d)
    return d


def all_pairs_shortest_paths(graph):
    """Hop-count distance matrix of a connected graph.

    Floyd-Warshall up to ``FLOYD_WARSHALL_MAX_NODES`` nodes, breadth-first
    search from every source (scipy) above that.
    """
    if graph.node_count <= FLOYD_WARSHALL_MAX_NODES:
        d = floyd_warshall(graph)
    else:
        d = shortest_path(graph.adjacency(), method="D", directed=False, unweighted=True)
    if not np.all(np.isfinite(d)):
        raise DisconnectedError("graph is disconnected; reduce it to its largest component first")
    return d


def binary_tree(depth):
    """Complete binary tree with ``2**(depth+1) - 1`` nodes (root has depth 0)."""
    n = 2 ** (depth + 1) - 1
    edges = [((i - 1) // 2, i) for i in range(1, n)]
    return Graph.from_edges(edges, node_count=n)


def cycle(n):
    return Graph.from_edges([(i, (i + 1) % n) for i in range(n)], node_count=n)


def path(n):
    return Graph.from_edges([(i, i + 1) for i in range(n - 1)], node_count=n)
