"""Connectivity graphs of polycrystals and their descriptor matrices.

Nodes are grains, edges join grains that share a face. Indices are 0-based.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

PAPER_LAPLACIAN = "paper_laplacian"
RENORMALIZED_ADJACENCY = "renormalized_adjacency"
PROPAGATION_MODES = (PAPER_LAPLACIAN, RENORMALIZED_ADJACENCY)


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class Graph:
    n_nodes: int
    edges: frozenset  # of (i, j) tuples with i < j

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


@dataclass(frozen=True)
class DescriptorMatrices:
    A: np.ndarray
    A_hat: np.ndarray
    D: np.ndarray
    D_hat: np.ndarray
    L: np.ndarray
    L_sym: np.ndarray


def build_graph(n_nodes: int, contacts: Iterable[tuple[int, int]]) -> Graph:
    """Normalize a contact list into a simple undirected graph.

    Repeated and reversed pairs collapse to one edge. Self-loops are rejected;
    they only enter through ``A_hat``.
    """
    if n_nodes < 1:
        raise GraphError(f"n_nodes must be positive, got {n_nodes}")
    edges = set()
    for i, j in contacts:
        i, j = int(i), int(j)
        if not (0 <= i < n_nodes and 0 <= j < n_nodes):
            raise GraphError(f"edge ({i}, {j}) out of range for {n_nodes} nodes")
        if i == j:
            raise GraphError(f"self-loop at node {i}")
        edges.add((min(i, j), max(i, j)))
    return Graph(n_nodes, frozenset(edges))


def adjacency(g: Graph) -> np.ndarray:
    A = np.zeros((g.n_nodes, g.n_nodes))
    for i, j in g.edges:
        A[i, j] = A[j, i] = 1.0
    return A


def _inv_sqrt_degree(deg: np.ndarray) -> np.ndarray:
    # zero-degree nodes get 0, matching the "0, otherwise" branch
    out = np.zeros_like(deg)
    nz = deg > 0
    out[nz] = 1.0 / np.sqrt(deg[nz])
    return out


def descriptor_matrices(g: Graph) -> DescriptorMatrices:
    A = adjacency(g)
    I = np.eye(g.n_nodes)
    A_hat = A + I
    deg = A.sum(axis=1)
    D = np.diag(deg)
    D_hat = np.diag(A_hat.sum(axis=1))
    L = D - A
    s = _inv_sqrt_degree(deg)
    L_sym = s[:, None] * L * s[None, :]
    return DescriptorMatrices(A=A, A_hat=A_hat, D=D, D_hat=D_hat, L=L, L_sym=L_sym)


def propagation_operator(g: Graph, mode: str = RENORMALIZED_ADJACENCY) -> np.ndarray:
    """Node-mixing operator for a GCN layer, built from the self-looped graph.

    ``renormalized_adjacency`` gives D̂^{-1/2} Â D̂^{-1/2}; ``paper_laplacian``
    gives I minus that.
    """
    if mode not in PROPAGATION_MODES:
        raise GraphError(f"unknown propagation mode {mode!r}")
    A_hat = adjacency(g) + np.eye(g.n_nodes)
    s = 1.0 / np.sqrt(A_hat.sum(axis=1))
    op = s[:, None] * A_hat * s[None, :]
    if mode == PAPER_LAPLACIAN:
        op = np.eye(g.n_nodes) - op
    return op


def permute_graph(g: Graph, perm: np.ndarray) -> Graph:
    """Relabel node ``i`` as ``perm[i]``."""
    perm = np.asarray(perm)
    return build_graph(g.n_nodes, [(perm[i], perm[j]) for i, j in g.edges])


def feature_matrix(p) -> np.ndarray:
    """N×4 node features: voxel-count volume fraction, then Bunge angles (rad)."""
    counts = np.bincount(p.labels.ravel(), minlength=p.n_grains).astype(float)
    if np.any(counts == 0):
        empty = np.flatnonzero(counts == 0).tolist()
        raise GraphError(f"grains with zero voxels: {empty}")
    X = np.empty((p.n_grains, 4))
    X[:, 0] = counts / counts.sum()
    X[:, 1:] = p.orientations
    return X
