"""Community networks: generators, transmission matrices and spectra."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionError, ParameterError


class Kind(str, Enum):
    STAR = "star"
    RING = "ring"
    LINE = "line"
    CYCLE_TREE = "cycle_tree"
    CUSTOM = "custom"


# Reconstructed from the drawing of the nine-community cycle-tree network.
# Accepted because it gives rho(A + I) = 3.2877 and makes communities 6 and 7
# twin leaves of community 4 (identical rows in the published tables).
CYCLE_TREE_EDGES: tuple[tuple[int, int], ...] = (
    (1, 2), (2, 3), (3, 4), (3, 5), (4, 6), (4, 7), (5, 8), (5, 9), (9, 1),
)


@dataclass(frozen=True, eq=False)
class NetworkTopology:
    """Undirected, connected community graph.

    ``adjacency`` is the symmetric 0/1 matrix with zero diagonal; node ids in
    :attr:`edges` are 1-based.
    """

    n: int
    adjacency: np.ndarray
    kind: Kind = Kind.CUSTOM

    def __post_init__(self):
        adj = np.array(self.adjacency, dtype=float)
        if adj.shape != (self.n, self.n):
            raise DimensionError(f"adjacency must be {self.n}x{self.n}, got {adj.shape}")
        if not np.array_equal(adj, adj.T):
            raise ParameterError("adjacency must be symmetric")
        if not np.all((adj == 0) | (adj == 1)):
            raise ParameterError("adjacency must be binary")
        if np.any(np.diag(adj) != 0):
            raise ParameterError("adjacency must have a zero diagonal")
        if self.n > 1 and not is_strongly_connected(adj):
            raise ParameterError("topology is not connected", code="IRREDUCIBILITY")
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "kind", Kind(self.kind))

    @property
    def edges(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.adjacency))
        return [(int(a) + 1, int(b) + 1) for a, b in zip(i, j)]

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1).astype(int)

    @property
    def adjacency_bar(self) -> np.ndarray:
        """Adjacency with self loops, ``A + I``."""
        return self.adjacency + np.eye(self.n)

    @classmethod
    def from_edges(cls, n: int, edges, kind: Kind = Kind.CUSTOM) -> "NetworkTopology":
        adj = np.zeros((n, n))
        for a, b in edges:
            a, b = int(a), int(b)
            if not (1 <= a <= n and 1 <= b <= n) or a == b:
                raise ParameterError(f"invalid edge ({a}, {b}) for n={n}")
            adj[a - 1, b - 1] = adj[b - 1, a - 1] = 1.0
        return cls(n, adj, kind)

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "edges": [list(e) for e in self.edges]})

    @classmethod
    def from_json(cls, text: str) -> "NetworkTopology":
        doc = json.loads(text)
        return cls.from_edges(doc["n"], doc["edges"])


def make_topology(kind: Kind | str, n: int = 9) -> NetworkTopology:
    """Build one of the named networks on ``n`` communities.

    Node 1 is the hub of the star; the ring is the cycle 1-2-...-n-1 and the
    line is the ring without the edge {1, n}. The cycle tree only exists for
    ``n = 9``.
    """
    kind = Kind(kind)
    if kind is Kind.STAR:
        if n < 2:
            raise ParameterError("star needs n >= 2", code="UNSUPPORTED_N")
        edges = [(1, j) for j in range(2, n + 1)]
    elif kind in (Kind.RING, Kind.LINE):
        if n < 3:
            raise ParameterError(f"{kind.value} needs n >= 3", code="UNSUPPORTED_N")
        edges = [(i, i + 1) for i in range(1, n)]
        if kind is Kind.RING:
            edges.append((n, 1))
    elif kind is Kind.CYCLE_TREE:
        if n != 9:
            raise ParameterError("cycle_tree is defined for n = 9 only", code="UNSUPPORTED_N")
        edges = list(CYCLE_TREE_EDGES)
    else:
        raise ParameterError("custom topologies are built with NetworkTopology.from_edges")
    return NetworkTopology.from_edges(n, edges, kind)


def is_strongly_connected(matrix) -> bool:
    """True iff the digraph of nonzero entries (arc i -> j for m[i, j] != 0)
    is strongly connected.

    Uses one forward and one backward reachability sweep from node 0.
    """
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    size = m.shape[0]
    if size <= 1:
        return True
    pattern = m != 0
    return _reaches_all(pattern) and _reaches_all(pattern.T)


def _reaches_all(pattern: np.ndarray) -> bool:
    seen = np.zeros(pattern.shape[0], dtype=bool)
    seen[0] = True
    stack = [0]
    while stack:
        node = stack.pop()
        for nxt in np.flatnonzero(pattern[node] & ~seen):
            seen[nxt] = True
            stack.append(int(nxt))
    return bool(seen.all())


def build_beta(topo: NetworkTopology, intra: float, inter: float) -> np.ndarray:
    """Transmission matrix with ``intra`` on the diagonal and ``inter`` on
    every edge of ``topo``."""
    if not intra > 0:
        raise ParameterError("intra-community rate must be positive")
    if inter < 0:
        raise ParameterError("inter-community rate must be nonnegative")
    return intra * np.eye(topo.n) + inter * topo.adjacency


def adjacency_spectral_radius(topo: NetworkTopology, include_self_loops: bool = False) -> float:
    """Spectral radius of the adjacency matrix, or of ``A + I`` when
    ``include_self_loops`` is set.

    Published network tables label rho(A + I) as rho(A); both are available
    here and the caller picks.
    """
    from .numerics import power_iteration

    m = topo.adjacency_bar if include_self_loops else topo.adjacency
    if topo.n == 1:
        return float(m[0, 0])
    return power_iteration(m, tol=1e-13).rho


def automorphic(topo: NetworkTopology, perm) -> bool:
    """Whether the 0-based node permutation ``perm`` preserves the graph."""
    p = np.asarray(perm)
    return bool(np.array_equal(topo.adjacency[np.ix_(p, p)], topo.adjacency))
