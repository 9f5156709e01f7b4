"""Immutable node/edge container shared by every other module."""

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .sparse import SparseMatrix, build_csr, normalize_adjacency


@dataclass
class Graph:
    """An undirected graph with features, labels, and both the raw and the
    symmetrically normalized adjacency. Instances are read-only once built."""

    num_nodes: int
    num_edges: int
    adjacency: SparseMatrix
    norm_adjacency: SparseMatrix
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.features.shape[0] != self.num_nodes:
            raise InputError(
                f"features have {self.features.shape[0]} rows for {self.num_nodes} nodes"
            )
        if self.labels.shape != (self.num_nodes,):
            raise InputError("labels must be a vector with one entry per node")
        if len(self.labels) and (
            self.labels.min() < 0 or self.labels.max() >= self.num_classes
        ):
            bad = int(self.labels[(self.labels < 0) | (self.labels >= self.num_classes)][0])
            raise InputError(f"label {bad} outside [0, {self.num_classes})")
        self.features.flags.writeable = False
        self.labels.flags.writeable = False

    @property
    def num_features(self):
        return self.features.shape[1]

    @classmethod
    def build(cls, edge_list, features, labels, num_classes) -> "Graph":
        """Construct from an edge list; adjacency is symmetrized and
        deduplicated, and the normalized adjacency is computed eagerly."""
        features = np.asarray(features, dtype=np.float64)
        n = features.shape[0]
        adj = build_csr(edge_list, n)
        return cls(
            num_nodes=n,
            num_edges=adj.nnz // 2,
            adjacency=adj,
            norm_adjacency=normalize_adjacency(adj),
            features=features,
            labels=np.asarray(labels, dtype=np.int64),
            num_classes=int(num_classes),
        )

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.num_nodes == other.num_nodes
            and self.num_edges == other.num_edges
            and self.num_classes == other.num_classes
            and self.adjacency == other.adjacency
            and self.norm_adjacency == other.norm_adjacency
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )
