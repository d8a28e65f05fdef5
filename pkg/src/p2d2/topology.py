"""
Network graphs, combination matrices and the consensus matrix.

Everything is stored at the agent level (K x K). Iterates are K x M arrays
whose rows are the agents' local copies, so the KM x KM operator
``B kron I_M`` is applied as ``B @ W`` and never materialized.
"""

from __future__ import annotations

import csv
import functools
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csgraph

from .errors import (
    DegenerateSpectrum,
    DisconnectedGraph,
    EmptyGraph,
    GenerationExhausted,
    InvalidCombinationMatrix,
    NumericalFailure,
)

ZERO_THRESHOLD = 1e-10
INVARIANT_TOL = 1e-12
MAX_GRAPH_ATTEMPTS = 1000


@dataclass(frozen=True)
class Graph:
    """Undirected graph on agents ``0..K-1``; self-loops are implicit."""

    num_agents: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.num_agents < 1:
            raise EmptyGraph("a graph needs at least one agent")
        normalized = set()
        for s, k in self.edges:
            s, k = int(s), int(k)
            if s == k:
                raise ValueError(f"self-loop on agent {s} must not be stored")
            if not (0 <= s < self.num_agents and 0 <= k < self.num_agents):
                raise ValueError(f"edge ({s}, {k}) out of range for K={self.num_agents}")
            normalized.add((min(s, k), max(s, k)))
        object.__setattr__(self, "edges", frozenset(normalized))

    def adjacency(self):
        adj = np.zeros((self.num_agents, self.num_agents), dtype=bool)
        for s, k in self.edges:
            adj[s, k] = adj[k, s] = True
        return adj

    def degrees(self):
        return self.adjacency().sum(axis=1)

    def neighbors(self, k):
        """Neighbors of agent `k` in ascending index order (excluding `k`)."""
        return [int(s) for s in np.flatnonzero(self.adjacency()[k])]

    def is_connected(self):
        if self.num_agents == 1:
            return True
        n_comp, _ = csgraph.connected_components(self.adjacency(), directed=False)
        return n_comp == 1

    def sorted_edges(self):
        return sorted(self.edges)


def graph_from_edges(K, edges):
    return Graph(int(K), frozenset(tuple(e) for e in edges))


def path_graph(K):
    return graph_from_edges(K, [(k, k + 1) for k in range(K - 1)])


def ring_graph(K):
    if K < 3:
        return path_graph(K)
    return graph_from_edges(K, [(k, (k + 1) % K) for k in range(K)])


def complete_graph(K):
    return graph_from_edges(K, [(s, k) for s in range(K) for k in range(s + 1, K)])


def random_connected_graph(K, edge_prob, seed):
    """
    Erdos-Renyi graph conditioned on connectivity.

    Attempt ``t`` draws from ``default_rng([seed, t])`` so the result depends
    only on ``(K, edge_prob, seed)``.
    """
    if K < 2:
        raise EmptyGraph("random graphs need K >= 2")
    if not 0.0 < edge_prob <= 1.0:
        raise ValueError("edge_prob must lie in (0, 1]")
    iu, ju = np.triu_indices(K, k=1)
    for attempt in range(MAX_GRAPH_ATTEMPTS):
        rng = np.random.default_rng([int(seed), attempt])
        keep = rng.random(iu.size) < edge_prob
        graph = graph_from_edges(K, zip(iu[keep].tolist(), ju[keep].tolist()))
        if graph.is_connected():
            return graph
    raise GenerationExhausted(
        f"no connected graph after {MAX_GRAPH_ATTEMPTS} draws (K={K}, p={edge_prob})"
    )


def graph_from_spec(spec, default_seed=0):
    """Build a graph from a run-config dictionary."""
    kind = spec.get("type")
    K = spec.get("K")
    if not isinstance(K, int) or K < 1:
        raise ValueError("graph.K must be a positive integer")
    if kind == "random":
        return random_connected_graph(K, float(spec.get("p", 0.2)), int(spec.get("seed", default_seed)))
    if kind == "path":
        return path_graph(K)
    if kind == "ring":
        return ring_graph(K)
    if kind == "complete":
        return complete_graph(K)
    if kind == "edges":
        return graph_from_edges(K, spec.get("edges", []))
    raise ValueError(f"graph.type {kind!r} is not one of random, path, ring, complete, edges")


@dataclass(frozen=True, eq=False)
class CombinationMatrix:
    """Symmetric, doubly stochastic, primitive weights matching a graph."""

    A: np.ndarray
    graph: Graph | None = None

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        A.setflags(write=False)
        object.__setattr__(self, "A", A)
        self.validate()

    @property
    def num_agents(self):
        return self.A.shape[0]

    def validate(self):
        A = self.A
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InvalidCombinationMatrix(f"expected a square matrix, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise InvalidCombinationMatrix("non-finite weights")
        if np.max(np.abs(A - A.T)) > INVARIANT_TOL:
            raise InvalidCombinationMatrix("matrix is not symmetric")
        if np.max(np.abs(A.sum(axis=0) - 1.0)) > INVARIANT_TOL:
            raise InvalidCombinationMatrix("columns do not sum to one")
        if np.max(np.abs(A.sum(axis=1) - 1.0)) > INVARIANT_TOL:
            raise InvalidCombinationMatrix("rows do not sum to one")
        if self.graph is not None:
            if self.graph.num_agents != A.shape[0]:
                raise InvalidCombinationMatrix("matrix size does not match graph")
            off_pattern = ~(self.graph.adjacency() | np.eye(A.shape[0], dtype=bool))
            if np.any(A[off_pattern] != 0.0):
                raise InvalidCombinationMatrix("nonzero weight on a non-edge")
        eig = np.linalg.eigvalsh(A)
        if eig[0] <= -1.0 + INVARIANT_TOL or eig[-1] > 1.0 + INVARIANT_TOL:
            raise InvalidCombinationMatrix(f"eigenvalues {eig[0]:.3g}..{eig[-1]:.3g} leave (-1, 1]")
        if self.primitivity_power() is None:
            raise InvalidCombinationMatrix("matrix is not primitive (graph disconnected?)")

    def primitivity_power(self):
        """Smallest ``p <= K`` with ``A^p`` entrywise positive, else ``None``."""
        pattern = self.A > 0
        power = pattern.copy()
        for p in range(1, self.num_agents + 1):
            if power.all():
                return p
            power = (power.astype(np.int64) @ pattern.astype(np.int64)) > 0
        return None


def metropolis_weights(graph):
    """
    Metropolis rule: ``a_sk = 1/(1 + max(deg s, deg k))`` on edges, with the
    diagonal absorbing the remaining mass.
    """
    if graph.num_agents < 2:
        raise EmptyGraph("Metropolis weights need K >= 2")
    if not graph.is_connected():
        raise DisconnectedGraph("graph is not connected")
    deg = graph.degrees()
    K = graph.num_agents
    A = np.zeros((K, K))
    for s, k in graph.sorted_edges():
        A[s, k] = A[k, s] = 1.0 / (1.0 + max(deg[s], deg[k]))
    for k in range(K):
        A[k, k] = 1.0 - (A[k].sum() - A[k, k])
    return CombinationMatrix(A, graph)


def load_combination_csv(path, graph=None):
    """Read a raw K x K combination matrix and validate it."""
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row and not row[0].startswith("#")]
    if graph is None:
        K = len(rows)
        off = np.array(rows) != 0
        np.fill_diagonal(off, False)
        graph = graph_from_edges(K, zip(*np.nonzero(np.triu(off))))
    return CombinationMatrix(np.array(rows), graph)


class ConsensusMatrix:
    """``B = (I - A)/2`` with a lazily computed symmetric square root."""

    def __init__(self, B):
        self.B = np.array(B, dtype=float)
        self.B.setflags(write=False)

    @property
    def num_agents(self):
        return self.B.shape[0]

    @functools.cached_property
    def eigh(self):
        try:
            vals, vecs = np.linalg.eigh(self.B)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(f"eigendecomposition of B failed: {exc}") from exc
        return np.clip(vals, 0.0, None), vecs

    @property
    def eigenvalues(self):
        return self.eigh[0]

    @functools.cached_property
    def B_sqrt(self):
        vals, vecs = self.eigh
        # roundoff in the null space would otherwise leak in as sqrt(1e-16) = 1e-8
        root = (vecs * np.where(vals > ZERO_THRESHOLD, np.sqrt(vals), 0.0)) @ vecs.T
        return 0.5 * (root + root.T)

    @functools.cached_property
    def B_sqrt_pinv(self):
        """Moore-Penrose inverse of ``B_sqrt`` (eigenvalues below threshold dropped)."""
        vals, vecs = self.eigh
        inv = np.zeros_like(vals)
        keep = vals > ZERO_THRESHOLD
        inv[keep] = 1.0 / np.sqrt(vals[keep])
        pinv = (vecs * inv) @ vecs.T
        return 0.5 * (pinv + pinv.T)

    def range_projector(self):
        vals, vecs = self.eigh
        V = vecs[:, vals > ZERO_THRESHOLD]
        return V @ V.T


def consensus_matrix(A):
    if isinstance(A, CombinationMatrix):
        A = A.A
    A = np.asarray(A, dtype=float)
    return ConsensusMatrix(0.5 * (np.eye(A.shape[0]) - A))


@dataclass(frozen=True)
class SpectralBounds:
    sigma_max: float
    sigma_under: float


def spectral_bounds(B):
    """Largest eigenvalue and smallest eigenvalue above ``ZERO_THRESHOLD``."""
    vals = B.eigenvalues
    nonzero = vals[vals > ZERO_THRESHOLD]
    if nonzero.size == 0:
        raise DegenerateSpectrum("B has no eigenvalue above the zero threshold")
    return SpectralBounds(float(vals[-1]), float(nonzero.min()))
