"""Network topologies and their incidence/Laplacian algebra.

A network is an undirected connected graph over nodes ``0..n-1``.  All
communication is bidirectional, so every unordered edge ``{i, j}`` is viewed
as the two directed edges ``(i, j)`` and ``(j, i)``.  Directed edges are
enumerated in lexicographic order of ``(i, j)``; this fixed convention makes
edge-indexed quantities (per-edge multipliers, incidence matrices)
reproducible across runs.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GraphError",
    "NetworkGraph",
    "GraphAlgebra",
    "build_graph",
    "random_geometric",
    "is_connected",
    "compute_algebra",
    "save_graph",
    "load_graph",
]

# eigenvalues below ZERO_EIGTOL * (largest unoriented eigenvalue) count as zero
ZERO_EIGTOL = 1e-8


class GraphError(ValueError):
    """Invalid topology input (self-loop, duplicate edge, bad index)."""


@dataclass(frozen=True)
class NetworkGraph:
    """Undirected graph with neighbor lists and a fixed directed-edge order.

    Attributes
    ----------
    n : int
        Node count.
    edges : tuple of (int, int)
        Unordered edges, normalized to ``i < j`` and sorted.
    neighbors : tuple of tuple of int
        Sorted adjacency list per node.
    positions : ndarray or None
        Node coordinates in the unit square (geometric graphs only).
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    neighbors: tuple[tuple[int, ...], ...]
    positions: np.ndarray | None = field(default=None, compare=False)

    @property
    def L(self) -> int:
        """Directed-edge count (twice the number of unordered edges)."""
        return 2 * len(self.edges)

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(nb) for nb in self.neighbors])

    @property
    def directed_edges(self) -> tuple[tuple[int, int], ...]:
        """All ordered pairs (i, j) with {i, j} an edge, lexicographic."""
        pairs = [(i, j) for (i, j) in self.edges] + [(j, i) for (i, j) in self.edges]
        return tuple(sorted(pairs))

    def edge_index(self) -> dict[tuple[int, int], int]:
        """Map each directed edge to its position in `directed_edges`."""
        return {e: k for k, e in enumerate(self.directed_edges)}


def build_graph(n: int, edges, positions: np.ndarray | None = None) -> NetworkGraph:
    """Construct a graph from an unordered edge list.

    Rejects self-loops, out-of-range indices, and edges that are duplicated
    after normalization to ``i < j``.
    """
    if n < 1:
        raise GraphError(f"node count must be >= 1, got {n}")
    normalized = []
    seen = set()
    for (i, j) in edges:
        i, j = int(i), int(j)
        if i == j:
            raise GraphError(f"self-loop ({i},{j}) not allowed")
        if not (0 <= i < n and 0 <= j < n):
            raise GraphError(f"edge ({i},{j}) out of range for n={n}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise GraphError(f"duplicate edge {key}")
        seen.add(key)
        normalized.append(key)
    normalized.sort()
    nbrs: list[list[int]] = [[] for _ in range(n)]
    for (i, j) in normalized:
        nbrs[i].append(j)
        nbrs[j].append(i)
    return NetworkGraph(
        n=n,
        edges=tuple(normalized),
        neighbors=tuple(tuple(sorted(b)) for b in nbrs),
        positions=positions,
    )


def random_geometric(n: int, radius: float, seed: int) -> NetworkGraph:
    """Random geometric graph: n uniform points in [0,1]^2, edge iff dist <= radius.

    Deterministic for a fixed seed.  The result may be disconnected; callers
    that require connectivity should check :func:`is_connected` and resample
    with a different seed.
    """
    if n < 2:
        raise GraphError(f"need n >= 2 nodes, got {n}")
    if not (0.0 < radius <= np.sqrt(2.0) + 1e-12):
        raise GraphError(f"radius must be in (0, sqrt(2)], got {radius}")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(size=(n, 2))
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if np.hypot(*(pts[i] - pts[j])) <= radius:
                edges.append((i, j))
    return build_graph(n, edges, positions=pts)


def connected_random_geometric(
    n: int, radius: float, seed: int, max_tries: int = 100
) -> NetworkGraph:
    """Resample :func:`random_geometric` (seed, seed+1, ...) until connected."""
    for k in range(max_tries):
        g = random_geometric(n, radius, seed + k)
        if is_connected(g):
            return g
    raise GraphError(
        f"no connected geometric graph in {max_tries} tries "
        f"(n={n}, radius={radius}, seed={seed}); increase the radius"
    )


def is_connected(graph: NetworkGraph) -> bool:
    """True iff the graph has a single connected component (BFS)."""
    if graph.n == 1:
        return True
    seen = {0}
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in graph.neighbors[i]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return len(seen) == graph.n


@dataclass(frozen=True)
class GraphAlgebra:
    """Incidence matrices and spectral constants of a connected graph.

    All matrices are stored at scalar granularity (one row per directed
    edge, one column per node); use :meth:`expand` for the block version
    acting on stacked p-vectors.  The extreme eigenvalues ``gamma_o``
    (smallest nonzero of the oriented Laplacian) and ``Gamma_u`` (largest
    of the unoriented Laplacian) are independent of the block size.
    """

    graph: NetworkGraph
    A_s: np.ndarray  # L x n, 1 where edge e originates at node i
    A_d: np.ndarray  # L x n, 1 where edge e terminates at node j
    E_o: np.ndarray  # oriented incidence, A_s - A_d
    E_u: np.ndarray  # unoriented incidence, A_s + A_d
    L_o: np.ndarray  # oriented Laplacian, (1/2) E_o^T E_o
    L_u: np.ndarray  # unoriented Laplacian, (1/2) E_u^T E_u
    D: np.ndarray    # degree matrix
    gamma_o: float
    Gamma_u: float

    @staticmethod
    def expand(mat: np.ndarray, p: int) -> np.ndarray:
        """Kronecker-expand a scalar-granularity matrix to block size p."""
        if p == 1:
            return mat
        return np.kron(mat, np.eye(p))


def compute_algebra(graph: NetworkGraph) -> GraphAlgebra:
    """Build incidence matrices, Laplacians, and spectral constants.

    Requires a connected graph: disconnectedness would make the smallest
    nonzero oriented-Laplacian eigenvalue ill-defined for consensus.
    """
    if not is_connected(graph):
        raise GraphError("graph is disconnected; spectral constants undefined")
    n = graph.n
    dedges = graph.directed_edges
    L = len(dedges)
    A_s = np.zeros((L, n))
    A_d = np.zeros((L, n))
    for e, (i, j) in enumerate(dedges):
        A_s[e, i] = 1.0
        A_d[e, j] = 1.0
    E_o = A_s - A_d
    E_u = A_s + A_d
    L_o = 0.5 * (E_o.T @ E_o)
    L_u = 0.5 * (E_u.T @ E_u)
    D = np.diag(graph.degrees.astype(float))

    evals_o = np.linalg.eigvalsh(L_o)
    evals_u = np.linalg.eigvalsh(L_u)
    Gamma_u = float(evals_u[-1])
    nonzero = evals_o[evals_o > ZERO_EIGTOL * max(Gamma_u, 1.0)]
    if nonzero.size == 0:
        raise GraphError("oriented Laplacian has no nonzero eigenvalue")
    gamma_o = float(nonzero[0])
    return GraphAlgebra(
        graph=graph, A_s=A_s, A_d=A_d, E_o=E_o, E_u=E_u,
        L_o=L_o, L_u=L_u, D=D, gamma_o=gamma_o, Gamma_u=Gamma_u,
    )


def save_graph(graph: NetworkGraph, path) -> None:
    """Write edge-list text format: header ``n=<count>``, one ``i j`` per line."""
    with open(path, "w") as fh:
        fh.write(f"n={graph.n}\n")
        for (i, j) in graph.edges:
            fh.write(f"{i} {j}\n")


def load_graph(path) -> NetworkGraph:
    """Read the edge-list text format written by :func:`save_graph`."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("n="):
        raise GraphError(f"{path}: missing 'n=<count>' header")
    try:
        n = int(lines[0][2:])
    except ValueError as exc:
        raise GraphError(f"{path}: bad node count {lines[0][2:]!r}") from exc
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise GraphError(f"{path}: bad edge line {ln!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return build_graph(n, edges)
