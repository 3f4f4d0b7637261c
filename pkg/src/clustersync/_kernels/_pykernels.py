"""Pure numpy RK4 kernels; reference implementation for any OscillatorModel.

The compiled module provides the same two entry points specialized to Van der
Pol nodes. Arrays are laid out exactly as there: quotient state ``s`` is
``(K, m)``, tangent rows ``y`` are ``(D, m)`` grouped by block.
"""

from __future__ import annotations

import numpy as np


def _block_matrix(blk_start, blk_dim, rpack_off, Rpack) -> np.ndarray:
    D = int(np.sum(blk_dim))
    R = np.zeros((D, D))
    for s, d, o in zip(blk_start, blk_dim, rpack_off):
        R[s : s + d, s : s + d] = np.asarray(Rpack[o : o + d * d]).reshape(d, d)
    return R


def benettin(
    model,
    Q,
    sigma,
    s0,
    row_cluster,
    blk_start,
    blk_dim,
    rpack_off,
    Rpack,
    y0,
    dt,
    n_steps,
    n_transient,
    renorm_every,
    record_every,
    max_abs,
):
    """Joint RK4 of the quotient flow and block tangent systems.

    Returns ``(mle, running, s_final, diverged, steps_done, records)`` with
    ``s_final`` and ``records`` flattened to ``2K``-style rows (``K*m``).
    """
    Q = np.asarray(Q, dtype=float)
    K, m = Q.shape[0], model.dim
    rc = np.asarray(row_cluster, dtype=int)
    D, L = rc.size, len(blk_start)
    R = _block_matrix(blk_start, blk_dim, rpack_off, Rpack)
    bd = np.asarray(blk_dim, dtype=int)
    row_block = np.repeat(np.arange(L), bd)

    def rhs(s, y):
        ds = model.F(s) + sigma * (Q @ model.H(s))
        if D == 0:
            return ds, y
        sr = s[rc]
        dy = np.einsum("rij,rj->ri", model.DF(sr), y)
        dy += sigma * (R @ np.einsum("rij,rj->ri", model.DH(sr), y))
        return ds, dy

    s = np.array(s0, dtype=float).reshape(K, m)
    y = np.array(y0, dtype=float).reshape(D, m)
    n_win = (n_steps - n_transient) // renorm_every if renorm_every > 0 and n_steps > n_transient else 0
    acc = np.zeros(L)
    running = np.full((n_win, L), np.nan)
    records = [s.ravel().copy()] if record_every > 0 else []
    h = dt
    w = 0
    st = 0
    diverged = False
    while st < n_steps:
        a1, b1 = rhs(s, y)
        a2, b2 = rhs(s + 0.5 * h * a1, y + 0.5 * h * b1)
        a3, b3 = rhs(s + 0.5 * h * a2, y + 0.5 * h * b2)
        a4, b4 = rhs(s + h * a3, y + h * b3)
        s = s + (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        y = y + (h / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        st += 1
        if not np.all(np.isfinite(s)) or np.abs(s).max() > max_abs:
            diverged = True
            break
        if record_every > 0 and st % record_every == 0:
            records.append(s.ravel().copy())
        if renorm_every > 0 and st % renorm_every == 0:
            nrm = np.sqrt(np.bincount(row_block, weights=np.sum(y * y, axis=1), minlength=L))
            if not np.all(np.isfinite(nrm)) or np.any(nrm == 0.0):
                diverged = True
                break
            y = y / nrm[row_block][:, None]
            if st > n_transient:
                acc += np.log(nrm)
                if w < n_win:
                    running[w] = acc / ((st - n_transient) * dt)
                    w += 1
    mle = acc / (w * renorm_every * dt) if w > 0 else np.full(L, np.nan)
    rec = np.array(records).reshape(-1, K * m)
    return mle, running[:w], s.ravel().copy(), diverged, st, rec


def network(
    model,
    At,
    sigma,
    x0,
    dt,
    n_steps,
    win_start,
    cluster_of,
    ref_node,
    record_every,
    max_abs,
):
    """RK4 of the full network with per-cluster sync error averaged after ``win_start``.

    Returns ``(E, x_final, diverged, steps_done, records)``.
    """
    At = np.asarray(At, dtype=float)
    N, m = At.shape[0], model.dim
    co = np.asarray(cluster_of, dtype=int)
    ref = np.asarray(ref_node, dtype=int)
    K = ref.size

    def rhs(x):
        return model.F(x) + sigma * (At @ model.H(x))

    x = np.array(x0, dtype=float).reshape(N, m)
    E = np.zeros(K)
    count = 0
    records = [x.ravel().copy()] if record_every > 0 else []
    h = dt
    st = 0
    diverged = False
    while st < n_steps:
        k1 = rhs(x)
        k2 = rhs(x + 0.5 * h * k1)
        k3 = rhs(x + 0.5 * h * k2)
        k4 = rhs(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        st += 1
        if not np.all(np.isfinite(x)) or np.abs(x).max() > max_abs:
            diverged = True
            break
        if record_every > 0 and st % record_every == 0:
            records.append(x.ravel().copy())
        if st >= win_start:
            err = np.linalg.norm(x - x[ref[co]], axis=1)
            E += np.bincount(co, weights=err, minlength=K)
            count += 1
    E = E / count if count else np.full(K, np.nan)
    return E, x.ravel().copy(), diverged, st, np.array(records).reshape(-1, N * m)
