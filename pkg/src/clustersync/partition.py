"""Equitable partitions (balanced colorings) and quotient matrices."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

EQ_RTOL = 1e-9


def _eq_tol(At: np.ndarray, rtol: float = EQ_RTOL) -> float:
    scale = float(np.max(np.abs(At))) if At.size else 0.0
    return rtol * max(scale, 1.0)


@dataclass(frozen=True)
class Partition:
    """Assignment of nodes to clusters.

    Clusters are numbered so the nontrivial ones (two or more nodes) come
    first; within each group clusters are ordered by their smallest node.
    """

    cluster_of: tuple[int, ...]

    def __post_init__(self) -> None:
        labels = [int(c) for c in self.cluster_of]
        if not labels:
            raise ValueError("empty partition")
        object.__setattr__(self, "cluster_of", tuple(labels))
        K = max(labels) + 1
        if sorted(set(labels)) != list(range(K)):
            raise ValueError("cluster labels must be 0..K-1 with no gaps")

    @classmethod
    def from_labels(cls, labels: Sequence) -> "Partition":
        """Normalize arbitrary hashable labels into the canonical cluster order."""
        groups: dict = {}
        for node, lab in enumerate(labels):
            groups.setdefault(lab, []).append(node)
        return cls.from_clusters(groups.values(), len(labels))

    @classmethod
    def from_clusters(cls, clusters, n_nodes: int | None = None) -> "Partition":
        clusters = [sorted(int(i) for i in c) for c in clusters if len(c)]
        n = sum(len(c) for c in clusters) if n_nodes is None else n_nodes
        covered = sorted(i for c in clusters for i in c)
        if covered != list(range(n)):
            raise ValueError("clusters must be disjoint and cover every node exactly once")
        clusters.sort(key=lambda c: (len(c) == 1, c[0]))
        out = [0] * n
        for k, c in enumerate(clusters):
            for i in c:
                out[i] = k
        return cls(tuple(out))

    @property
    def n_nodes(self) -> int:
        return len(self.cluster_of)

    @property
    def K(self) -> int:
        return max(self.cluster_of) + 1

    @property
    def sizes(self) -> tuple[int, ...]:
        counts = [0] * self.K
        for c in self.cluster_of:
            counts[c] += 1
        return tuple(counts)

    @property
    def K_nontrivial(self) -> int:
        return sum(1 for n in self.sizes if n >= 2)

    @property
    def clusters(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.K)]
        for i, c in enumerate(self.cluster_of):
            out[c].append(i)
        return out

    def is_canonical(self) -> bool:
        return Partition.from_labels(self.cluster_of) == self


def indicator_matrix(p: Partition) -> np.ndarray:
    """N x K 0/1 matrix with ``Z[i, k] = 1`` iff node ``i`` is in cluster ``k``."""
    Z = np.zeros((p.n_nodes, p.K))
    Z[np.arange(p.n_nodes), p.cluster_of] = 1.0
    return Z


def _refine(At: np.ndarray, colors: np.ndarray, tol: float) -> np.ndarray:
    """One color-refinement pass; returns the new (possibly finer) coloring."""
    n = At.shape[0]
    ncol = int(colors.max()) + 1
    # row sums of the off-diagonal part into each color class
    off = At - np.diag(np.diag(At))
    S = np.zeros((n, ncol))
    for c in range(ncol):
        S[:, c] = off[:, colors == c].sum(axis=1)
    new = np.empty(n, dtype=int)
    nxt = 0
    for c in range(ncol):
        members = np.flatnonzero(colors == c)
        reps: list[tuple[int, np.ndarray]] = []
        for i in members:
            for label, sig in reps:
                if np.max(np.abs(S[i] - sig)) <= tol:
                    new[i] = label
                    break
            else:
                reps.append((nxt, S[i]))
                new[i] = nxt
                nxt += 1
    return new


def refine(At: np.ndarray, p: Partition) -> Partition:
    """Apply a single refinement pass to ``p``; a balanced coloring is a fixed point."""
    At = np.asarray(At, dtype=float)
    new = _refine(At, np.asarray(p.cluster_of), _eq_tol(At))
    return Partition.from_labels(new.tolist())


def minimum_balanced_coloring(At: np.ndarray, *, rtol: float = EQ_RTOL) -> Partition:
    """Coarsest equitable partition of ``At`` by iterative color refinement.

    Starting from a single color, nodes are split by their vector of summed
    coupling into each current color until nothing changes. The fixed point
    is the unique coarsest equitable partition, hence the one with the fewest
    clusters. The diagonal is ignored, so the result does not depend on the
    shift ``kappa``. Row sums equal within ``rtol * max|At|`` count as equal.
    """
    At = np.asarray(At, dtype=float)
    tol = _eq_tol(At, rtol)
    colors = np.zeros(At.shape[0], dtype=int)
    while True:
        new = _refine(At, colors, tol)
        if new.max() == colors.max():
            break
        colors = new
    return Partition.from_labels(colors.tolist())


@dataclass(frozen=True)
class EquitabilityCheck:
    ok: bool
    witness: tuple[int, int, int] | None = None  # (i, j, cluster) on failure

    def __bool__(self) -> bool:
        return self.ok


def is_equitable(At: np.ndarray, p: Partition, tol: float | None = None) -> EquitabilityCheck:
    """Check that all nodes of a cluster receive equal coupling from every cluster.

    On failure the witness ``(i, j, l)`` names two nodes of one cluster whose
    summed coupling from cluster ``l`` differ. Diagonal entries only shift
    every node's own-cluster sum by the same amount, so they are included.
    """
    At = np.asarray(At, dtype=float)
    if p.n_nodes != At.shape[0]:
        raise ValueError(f"partition has {p.n_nodes} nodes, matrix has {At.shape[0]}")
    tol = _eq_tol(At) if tol is None else tol
    S = At @ indicator_matrix(p)
    for members in p.clusters:
        ref = members[0]
        for j in members[1:]:
            diff = np.abs(S[j] - S[ref])
            bad = np.flatnonzero(diff > tol)
            if bad.size:
                return EquitabilityCheck(False, (ref, j, int(bad[0])))
    return EquitabilityCheck(True)


def quotient_matrix(At: np.ndarray, p: Partition) -> np.ndarray:
    """K x K quotient ``Z^+ At Z`` with ``Z^+ = (Z^T Z)^{-1} Z^T``.

    Row ``k`` holds the coupling any node of cluster ``k`` receives from each
    cluster. Raises ``ValueError`` if the partition is not equitable.
    """
    chk = is_equitable(At, p)
    if not chk:
        i, j, l = chk.witness
        raise ValueError(
            f"partition is not equitable: nodes {i} and {j} receive different "
            f"coupling from cluster {l}"
        )
    Z = indicator_matrix(p)
    sizes = np.asarray(p.sizes, dtype=float)
    Zpinv = Z.T / sizes[:, None]
    return Zpinv @ np.asarray(At, dtype=float) @ Z
