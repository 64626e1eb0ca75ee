"""Network topologies, Metropolis-Hastings consensus weights, and spectral quantities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RING = "ring"
CIRCULANT_EXPANDER = "circulant_expander"
CUSTOM = "custom"


@dataclass(frozen=True)
class Topology:
    """Undirected communication graph with self-loops on every node."""

    kind: str
    n: int
    adjacency: np.ndarray  # boolean n x n, symmetric, True diagonal
    degree: int | None = None

    def degrees(self) -> np.ndarray:
        """Neighbor counts excluding the self-loop."""
        return self.adjacency.sum(axis=1) - 1


@dataclass(frozen=True)
class Network:
    """Doubly stochastic consensus weights plus the spectral constants the rates depend on.

    rho  = ||W - (1/n) 11^T||_2, the mixing norm off the consensus subspace;
    beta = ||I - W||_2. Both are computed by dense symmetric eigendecomposition.
    """

    topology: Topology
    W: np.ndarray
    rho: float
    beta: float

    @property
    def n(self) -> int:
        return self.topology.n

    def rho_tilde(self, gamma: float) -> float:
        """Damped mixing norm (1 - gamma) + gamma * rho."""
        return (1.0 - gamma) + gamma * self.rho


def build_ring(n: int) -> Topology:
    """Cycle graph with self-loops; n=1 is a lone self-looped node, n=2 the 2-clique."""
    if n < 1:
        raise ValueError(f"ring needs n >= 1, got {n}")
    adj = np.eye(n, dtype=bool)
    for i in range(n):
        adj[i, (i + 1) % n] = True
        adj[i, (i - 1) % n] = True
    return Topology(kind=RING, n=n, adjacency=adj)


def build_circulant_expander(n: int, degree: int) -> Topology:
    """Circulant graph on n nodes: i adjacent to i +- 1 .. degree/2 (mod n), plus self-loops."""
    if n < 1:
        raise ValueError(f"expander needs n >= 1, got {n}")
    if degree % 2 != 0 or degree <= 0:
        raise ValueError(f"degree must be a positive even integer, got {degree}")
    if degree >= n:
        raise ValueError(f"degree must be < n, got degree={degree}, n={n}")
    adj = np.eye(n, dtype=bool)
    for off in range(1, degree // 2 + 1):
        for i in range(n):
            adj[i, (i + off) % n] = True
            adj[i, (i - off) % n] = True
    return Topology(kind=CIRCULANT_EXPANDER, n=n, adjacency=adj, degree=degree)


def build_custom(adjacency: np.ndarray) -> Topology:
    """Topology from an explicit boolean adjacency; diagonal is forced True."""
    adj = np.asarray(adjacency, dtype=bool).copy()
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {adj.shape}")
    if not np.array_equal(adj, adj.T):
        raise ValueError("adjacency must be symmetric")
    np.fill_diagonal(adj, True)
    return Topology(kind=CUSTOM, n=adj.shape[0], adjacency=adj)


def is_connected(t: Topology) -> bool:
    """BFS reachability over the adjacency."""
    n = t.n
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(t.adjacency[i]):
            if not seen[j]:
                seen[j] = True
                stack.append(int(j))
    return bool(seen.all())


def metropolis_hastings_weights(t: Topology) -> Network:
    """Consensus weights W_ij = 1 / (1 + max(deg_i, deg_j)) for neighbors, mass kept on the diagonal.

    Degrees exclude self-loops, so w_ii = 1 - sum_{j != i} w_ij >= 1/(1 + deg_i) > 0 and W is
    symmetric doubly stochastic by construction.
    """
    if not is_connected(t):
        raise ValueError("topology must be connected")
    n = t.n
    deg = t.degrees()
    W = np.zeros((n, n))
    for i in range(n):
        for j in np.flatnonzero(t.adjacency[i]):
            if j != i:
                W[i, j] = 1.0 / (1.0 + max(deg[i], deg[j]))
    np.fill_diagonal(W, 1.0 - W.sum(axis=1))
    rho = spectral_gap_norm(W)
    beta = float(np.max(np.abs(np.linalg.eigvalsh(np.eye(n) - W))))
    return Network(topology=t, W=W, rho=rho, beta=beta)


def spectral_gap_norm(W: np.ndarray) -> float:
    """||W - (1/n) 11^T||_2 for symmetric W, by dense eigendecomposition."""
    n = W.shape[0]
    M = W - np.ones((n, n)) / n
    return float(np.max(np.abs(np.linalg.eigvalsh(M))))
