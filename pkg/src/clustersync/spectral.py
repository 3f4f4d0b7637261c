"""Quotient/transverse splitting of the coupling matrix.

The orthogonal transform ``T`` stacks the normalized cluster indicator
vectors on top of a transverse basis. The transverse part is then split into
its finest blocks by a random symmetric element of the commutant of
``{R, E_1, ..., E_K}``; clusters that share a block are intertwined.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .partition import Partition, indicator_matrix, is_equitable, quotient_matrix

log = logging.getLogger(__name__)

BLOCK_RTOL = 1e-9
DEFAULT_SEED = 20220901


class ScopeError(ValueError):
    """The partition is outside the range the stability analysis handles."""


class EigenError(RuntimeError):
    pass


def eig_sym(M: np.ndarray, *, check: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors (columns) of symmetric ``M``."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.allclose(M, M.T, rtol=0, atol=1e-12 * max(1.0, np.abs(M).max(initial=0.0))):
        raise ValueError("matrix is not symmetric")
    try:
        w, V = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise EigenError(f"symmetric eigensolver did not converge: {exc}") from exc
    if check and M.size:
        scale = max(np.linalg.norm(M, 2), 1.0)
        resid = np.linalg.norm(M @ V - V * w, axis=0).max()
        if resid > 1e-10 * scale:
            raise EigenError(f"eigenpair residual {resid:.2e} exceeds 1e-10*|M|")
    return w, V


def helmert_basis(n: int) -> np.ndarray:
    """``n x (n-1)`` orthonormal zero-sum columns (Helmert contrasts)."""
    H = np.zeros((n, n - 1))
    for j in range(1, n):
        H[:j, j - 1] = 1.0
        H[j, j - 1] = -float(j)
        H[:, j - 1] /= np.sqrt(j * (j + 1.0))
    return H


def cluster_transverse_basis(p: Partition, clusters=None) -> dict[int, np.ndarray]:
    """Per cluster, ``n_k - 1`` orthonormal zero-sum vectors supported on that cluster.

    Returns a mapping from cluster index to an ``N x (n_k - 1)`` array.
    Requesting a singleton cluster raises ``ValueError``.
    """
    members = p.clusters
    wanted = range(p.K_nontrivial) if clusters is None else clusters
    out = {}
    for k in wanted:
        nodes = members[k]
        if len(nodes) < 2:
            raise ValueError(f"cluster {k} is trivial (one node); it has no transverse directions")
        B = np.zeros((p.n_nodes, len(nodes) - 1))
        B[nodes, :] = helmert_basis(len(nodes))
        out[k] = B
    return out


@dataclass(frozen=True)
class TransverseBlock:
    """One block ``R_l`` of the transverse matrix.

    ``row_cluster[r]`` is the cluster whose transverse subspace basis vector
    ``r`` lives in; every basis vector is supported on a single cluster.
    """

    matrix: np.ndarray
    row_cluster: tuple[int, ...]
    columns: tuple[int, ...]  # column indices into the transverse basis

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def support(self) -> frozenset[int]:
        return frozenset(self.row_cluster)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Result of :func:`decompose`.

    ``T @ At @ T.T`` equals ``blockdiag(Q_block, R)`` where ``Q_block`` is the
    quotient written in the orthonormal indicator basis (similar to the
    quotient matrix ``Q``) and ``R`` is the direct sum of ``blocks``.
    """

    partition: Partition
    T: np.ndarray
    Q: np.ndarray
    Q_block: np.ndarray
    blocks: tuple[TransverseBlock, ...]
    lambda_Q: np.ndarray
    lambda_R: dict[int, np.ndarray]
    seed: int = DEFAULT_SEED
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def K(self) -> int:
        return self.partition.K

    @property
    def R(self) -> np.ndarray:
        n = sum(b.dim for b in self.blocks)
        R = np.zeros((n, n))
        for b in self.blocks:
            idx = np.asarray(b.columns)
            R[np.ix_(idx, idx)] = b.matrix
        return R

    @property
    def mu(self) -> dict[int, np.ndarray]:
        """Negated per-cluster transverse eigenvalues, ascending."""
        return {k: np.sort(-v) for k, v in self.lambda_R.items()}

    def mu_min(self, k: int) -> float:
        return float(np.min(-self.lambda_R[k]))

    def mu_max(self, k: int) -> float:
        return float(np.max(-self.lambda_R[k]))

    @property
    def multi_cluster_blocks(self) -> list[int]:
        return [i for i, b in enumerate(self.blocks) if len(b.support) > 1]

    @property
    def all_transverse_eigenvalues(self) -> np.ndarray:
        return np.sort(np.concatenate([b.eigenvalues for b in self.blocks]))

    @property
    def mu_min_R(self) -> float:
        """Smallest negated transverse eigenvalue over the whole network."""
        return float(-self.all_transverse_eigenvalues.max())

    def reconstruction_error(self, At: np.ndarray) -> float:
        K = self.K
        B = np.zeros_like(self.T)
        B[:K, :K] = self.Q_block
        B[K:, K:] = self.R
        return float(np.abs(self.T @ At @ self.T.T - B).max())


def _commutant_element(R0: np.ndarray, col_cluster: np.ndarray, rng, tol: float) -> np.ndarray:
    """Random symmetric ``X`` commuting with ``R0`` and every cluster projector.

    Commuting with the projectors forces ``X`` to be block diagonal by cluster,
    so only those symmetric blocks are unknowns in ``R0 X - X R0 = 0``.
    """
    n = R0.shape[0]
    unknowns: list[tuple[int, int]] = []
    for k in np.unique(col_cluster):
        idx = np.flatnonzero(col_cluster == k)
        for a_pos, a in enumerate(idx):
            for b in idx[a_pos:]:
                unknowns.append((a, b))
    M = np.zeros((n * n, len(unknowns)))
    for col, (a, b) in enumerate(unknowns):
        Bm = np.zeros((n, n))
        Bm[a, b] = Bm[b, a] = 1.0
        M[:, col] = (R0 @ Bm - Bm @ R0).ravel()
    # null space of M; identity is always in it
    _, s, Vt = np.linalg.svd(M, full_matrices=False)
    rank = int(np.sum(s > tol))
    null = Vt[rank:].T
    coeffs = null @ rng.standard_normal(null.shape[1])
    X = np.zeros((n, n))
    for c, (a, b) in zip(coeffs, unknowns):
        X[a, b] = X[b, a] = c
    return X


def decompose(At: np.ndarray, p: Partition, *, seed: int = DEFAULT_SEED) -> SpectralDecomposition:
    """Split ``At`` into quotient and finest transverse blocks.

    Requires ``1 < K < N``; raises :class:`ScopeError` otherwise. Eigenvalues
    are attributed to clusters through the subspace (block) that carries them,
    never by matching values.
    """
    At = np.asarray(At, dtype=float)
    N = At.shape[0]
    K = p.K
    if K <= 1 or K >= N:
        raise ScopeError(
            f"stability analysis needs 1 < K < N (got K={K}, N={N}); K=1 is complete "
            "synchronization and K=N has no nontrivial cluster"
        )
    Q = quotient_matrix(At, p)
    # the basis is built from At minus its mean diagonal, so a uniform shift
    # (the kappa term) leaves T bit-for-bit unchanged
    diag = np.diag(At)
    B = At - (diag[0] if np.all(diag == diag[0]) else diag.mean()) * np.eye(N)
    scale = max(float(np.abs(B).max()), 1.0)
    tol = BLOCK_RTOL * scale

    Z = indicator_matrix(p)
    U = Z / np.sqrt(np.asarray(p.sizes, dtype=float))
    bases = cluster_transverse_basis(p)
    V0 = np.hstack([bases[k] for k in sorted(bases)])
    col_cluster = np.concatenate([[k] * bases[k].shape[1] for k in sorted(bases)])
    R0 = V0.T @ B @ V0
    R0 = 0.5 * (R0 + R0.T)

    rng = np.random.default_rng(seed)
    X = _commutant_element(R0, col_cluster, rng, BLOCK_RTOL * max(1.0, np.abs(R0).max()))
    W = np.zeros_like(X)
    for k in np.unique(col_cluster):
        idx = np.flatnonzero(col_cluster == k)
        _, Wk = np.linalg.eigh(X[np.ix_(idx, idx)])
        W[np.ix_(idx, idx)] = Wk
    V = V0 @ W
    R1 = V.T @ B @ V
    R1 = 0.5 * (R1 + R1.T)

    adj = np.abs(R1) > tol
    np.fill_diagonal(adj, True)
    n_comp, labels = connected_components(csr_matrix(adj), directed=False)

    groups = [np.flatnonzero(labels == c) for c in range(n_comp)]
    # single-cluster blocks are further diagonalized: there the projectors act
    # as the identity, so R alone determines the (1x1) finest blocks
    final_cols: list[np.ndarray] = []
    for g in groups:
        if len(set(col_cluster[g])) == 1 and len(g) > 1:
            _, S = np.linalg.eigh(R1[np.ix_(g, g)])
            V[:, g] = V[:, g] @ S
            final_cols.extend([np.array([c]) for c in g])
        else:
            final_cols.append(g)
    RB = V.T @ B @ V

    # canonical order: by smallest cluster in support, then by eigenvalue
    def sort_key(g):
        return (min(col_cluster[g]), len(set(col_cluster[g])), float(np.min(np.diag(RB)[g])))

    final_cols.sort(key=sort_key)
    order = np.concatenate(final_cols)
    V = V[:, order]
    col_cluster = col_cluster[order]
    R1 = V.T @ At @ V
    R1 = 0.5 * (R1 + R1.T)
    blocks = []
    start = 0
    lambda_R: dict[int, list[float]] = {k: [] for k in range(p.K_nontrivial)}
    for g in final_cols:
        cols = tuple(range(start, start + len(g)))
        start += len(g)
        idx = np.asarray(cols)
        Rl = R1[np.ix_(idx, idx)].copy()
        Rl.setflags(write=False)
        rc = tuple(int(c) for c in col_cluster[idx])
        blk = TransverseBlock(Rl, rc, cols)
        blocks.append(blk)
        if len(blk.support) == 1:
            lambda_R[rc[0]].extend(np.linalg.eigvalsh(Rl).tolist())

    T = np.vstack([U.T, V.T])
    Qb = U.T @ At @ U
    Qb = 0.5 * (Qb + Qb.T)
    lam_Q = np.sort(np.linalg.eigvals(Q).real)
    dec = SpectralDecomposition(
        partition=p,
        T=T,
        Q=Q,
        Q_block=Qb,
        blocks=tuple(blocks),
        lambda_Q=lam_Q,
        lambda_R={k: np.sort(np.asarray(v)) for k, v in lambda_R.items()},
        seed=seed,
    )
    log.debug(
        "decomposed N=%d K=%d into %d transverse blocks (%d multi-cluster)",
        N, K, len(blocks), len(dec.multi_cluster_blocks),
    )
    return dec


def detect_intertwined(d: SpectralDecomposition) -> list[frozenset[int]]:
    """Cluster sets that share a transverse block; empty when none are intertwined."""
    out: list[frozenset[int]] = []
    for b in d.blocks:
        s = b.support
        if len(s) > 1 and s not in out:
            out.append(s)
    return out


@dataclass(frozen=True)
class CompleteSyncIndices:
    alpha_b: float
    alpha_u: float
    lambda2: float
    lambdaN: float


class DisconnectedGraphError(ValueError):
    pass


def complete_sync_indices(L: np.ndarray) -> CompleteSyncIndices:
    """Eigenratio ``lambda_2 / lambda_N`` and algebraic connectivity of a Laplacian."""
    L = np.asarray(L, dtype=float)
    if L.shape[0] < 2:
        raise ValueError("need at least two nodes")
    scale = max(np.linalg.norm(L, 2), 1.0)
    if np.abs(L.sum(axis=1)).max() > 1e-10 * scale:
        raise ValueError("matrix is not a Laplacian (row sums are not zero)")
    w, _ = eig_sym(L)
    lam2, lamN = float(w[1]), float(w[-1])
    if lam2 <= 1e-10 * scale:
        raise DisconnectedGraphError(
            f"graph is disconnected (lambda_2 = {lam2:.3g}); complete synchronization is impossible"
        )
    return CompleteSyncIndices(alpha_b=lam2 / lamN, alpha_u=lam2, lambda2=lam2, lambdaN=lamN)


def suggest_kappa(A: np.ndarray, p: Partition, target_mu_min: float, *, seed: int = DEFAULT_SEED) -> float:
    """Shift that makes the smallest negated transverse eigenvalue equal ``target_mu_min``.

    Transverse eigenvalues move by exactly ``-kappa`` under the shift, so the
    answer is the largest transverse eigenvalue of the unshifted matrix plus
    the target.
    """
    if not target_mu_min > 0:
        raise ValueError("target_mu_min must be positive")
    A = np.asarray(A, dtype=float)
    A0 = A - np.diag(np.diag(A))
    return float(largest_transverse_eigenvalue(A0, p, seed=seed) + target_mu_min)


def largest_transverse_eigenvalue(At: np.ndarray, p: Partition, *, seed: int = DEFAULT_SEED) -> float:
    """Largest eigenvalue of ``At`` restricted to the transverse subspace."""
    if not is_equitable(At, p):
        raise ValueError("partition is not equitable")
    bases = cluster_transverse_basis(p)
    if not bases:
        raise ScopeError("partition has no nontrivial cluster")
    V0 = np.hstack([bases[k] for k in sorted(bases)])
    R0 = V0.T @ np.asarray(At, dtype=float) @ V0
    return float(np.linalg.eigvalsh(0.5 * (R0 + R0.T)).max())
