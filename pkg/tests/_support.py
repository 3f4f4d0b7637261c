"""Shared test helpers: random equitable graphs and independent oracles."""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp

from clustersync.partition import Partition, indicator_matrix, is_equitable


def set_partitions(n: int):
    """All set partitions of range(n) as label lists (restricted growth strings)."""
    labels = [0] * n

    def rec(i, m):
        if i == n:
            yield list(labels)
            return
        for c in range(m + 1):
            labels[i] = c
            yield from rec(i + 1, max(m, c + 1))

    if n == 0:
        yield []
        return
    labels[0] = 0
    yield from rec(1, 1)


def brute_force_min_coloring(A: np.ndarray) -> tuple[int, list[Partition]]:
    """Minimum cluster count over all equitable partitions, plus every partition attaining it."""
    n = A.shape[0]
    best, winners = n + 1, []
    for lab in set_partitions(n):
        K = max(lab) + 1
        if K > best:
            continue
        p = Partition.from_labels(lab)
        if is_equitable(A, p):
            if K < best:
                best, winners = K, [p]
            else:
                winners.append(p)
    return best, winners


def random_equitable_graph(rng: np.random.Generator, sizes, *, permute=True, p_edge=0.6):
    """Weighted symmetric matrix with a planted equitable partition.

    Inside a cluster: a symmetric circulant. Between two clusters: complete
    bipartite, or a bipartite circulant when sizes are equal. Returns
    ``(A, labels)`` with zero diagonal.
    """
    sizes = list(sizes)
    N = sum(sizes)
    starts = np.cumsum([0] + sizes)
    A = np.zeros((N, N))
    for k, n in enumerate(sizes):
        if n > 1 and rng.random() < p_edge:
            w = float(rng.integers(1, 5))
            offs = rng.choice(np.arange(1, n // 2 + 1), size=rng.integers(1, n // 2 + 1), replace=False)
            for i in range(n):
                for o in offs:
                    j = (i + o) % n
                    A[starts[k] + i, starts[k] + j] = A[starts[k] + j, starts[k] + i] = w
    for k in range(len(sizes)):
        for l in range(k + 1, len(sizes)):
            if rng.random() > p_edge:
                continue
            w = float(rng.integers(1, 5))
            nk, nl = sizes[k], sizes[l]
            if nk == nl and rng.random() < 0.5:
                offs = rng.choice(nk, size=rng.integers(1, nk + 1), replace=False)
                for i in range(nk):
                    for o in offs:
                        j = (i + o) % nl
                        A[starts[k] + i, starts[l] + j] = A[starts[l] + j, starts[k] + i] = w
            else:
                A[starts[k] : starts[k + 1], starts[l] : starts[l + 1]] = w
                A[starts[l] : starts[l + 1], starts[k] : starts[k + 1]] = w
    labels = np.repeat(np.arange(len(sizes)), sizes)
    if permute:
        perm = rng.permutation(N)
        A = A[np.ix_(perm, perm)]
        labels = labels[perm]
    return A, labels.tolist()


def random_sizes(rng, n_clusters_max=4, size_max=5, nontrivial=True):
    K = int(rng.integers(2, n_clusters_max + 1))
    sizes = [int(rng.integers(1, size_max + 1)) for _ in range(K)]
    if nontrivial and max(sizes) < 2:
        sizes[0] = 2
    return sizes


def intertwined_toy():
    """Five nodes: clusters {0,1} and {2,3} linked by a matching, node 4 tied to 0 and 1.

    The two pair clusters share one transverse block.
    """
    A = np.zeros((5, 5))
    for i, j in [(0, 2), (1, 3), (0, 4), (1, 4)]:
        A[i, j] = A[j, i] = 1.0
    return A


def perturbation_growth_oracle(At, p: Partition, model, sigma, s0, *, t_transient, t_total, rng, rtol=1e-9):
    """Largest transverse growth rate of the untransformed variational network equation.

    The quotient flow and an ``N x m`` perturbation (projected off the
    synchronization manifold) are integrated with scipy's DOP853, the
    perturbation renormalized every time unit.
    """
    At = np.asarray(At, dtype=float)
    N, K, m = At.shape[0], p.K, model.dim
    Z = indicator_matrix(p)
    Q = (Z.T / Z.sum(axis=0)[:, None]) @ At @ Z
    P = np.eye(N) - Z @ np.linalg.pinv(Z)
    co = np.asarray(p.cluster_of)

    def rhs(t, z):
        s = z[: K * m].reshape(K, m)
        dx = z[K * m :].reshape(N, m)
        ds = model.F(s) + sigma * (Q @ model.H(s))
        xs = s[co]
        ddx = np.einsum("nij,nj->ni", model.DF(xs), dx) + sigma * (At @ np.einsum("nij,nj->ni", model.DH(xs), dx))
        return np.concatenate([ds.ravel(), ddx.ravel()])

    dx0 = P @ rng.standard_normal((N, m))
    dx0 /= np.linalg.norm(dx0)
    z = np.concatenate([np.ravel(s0), dx0.ravel()])
    acc, t = 0.0, 0.0
    n_win = int(round(t_total))
    for w in range(n_win):
        sol = solve_ivp(rhs, (t, t + 1.0), z, method="DOP853", rtol=rtol, atol=1e-12)
        z = sol.y[:, -1]
        t += 1.0
        dx = z[K * m :].reshape(N, m)
        dx = P @ dx  # strip numerical drift into the synchronous directions
        nrm = np.linalg.norm(dx)
        z[K * m :] = (dx / nrm).ravel()
        if t > t_transient:
            acc += np.log(nrm)
    return acc / (t_total - t_transient)
