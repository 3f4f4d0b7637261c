# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled RK4 kernels for Van der Pol nodes with H(x) = (0, x2).

Node dynamics: x1' = x2, x2' = -x1 + eps (1 - x1^2) x2 + coupling.
Both kernels mirror ``_pykernels`` exactly in contract.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt, fabs, isfinite
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef inline void _tangent_quotient_rhs(
    const double* z, double* dz,
    int K, const double* Q, double sigma, double eps,
    int D, const int* row_cluster, const int* row_block,
    const int* blk_start, const int* blk_dim, const int* rpack_off, const double* Rpack,
) noexcept nogil:
    cdef int k, j, r, b, i, d, s
    cdef double x1, x2, c, y1, y2
    cdef const double* y = z + 2 * K
    cdef double* dy = dz + 2 * K
    for k in range(K):
        x1 = z[2 * k]
        x2 = z[2 * k + 1]
        c = 0.0
        for j in range(K):
            c += Q[k * K + j] * z[2 * j + 1]
        dz[2 * k] = x2
        dz[2 * k + 1] = -x1 + eps * (1.0 - x1 * x1) * x2 + sigma * c
    for r in range(D):
        k = row_cluster[r]
        x1 = z[2 * k]
        x2 = z[2 * k + 1]
        y1 = y[2 * r]
        y2 = y[2 * r + 1]
        b = row_block[r]
        s = blk_start[b]
        d = blk_dim[b]
        i = r - s
        c = 0.0
        for j in range(d):
            c += Rpack[rpack_off[b] + i * d + j] * y[2 * (s + j) + 1]
        dy[2 * r] = y2
        dy[2 * r + 1] = (-1.0 - 2.0 * eps * x1 * x2) * y1 + eps * (1.0 - x1 * x1) * y2 + sigma * c


def benettin_vdp(
    double eps,
    double[:, ::1] Q,
    double sigma,
    double[::1] s0,
    int[::1] row_cluster,
    int[::1] row_block,
    int[::1] blk_start,
    int[::1] blk_dim,
    int[::1] rpack_off,
    double[::1] Rpack,
    double[::1] y0,
    double dt,
    long n_steps,
    long n_transient,
    long renorm_every,
    long record_every,
    double max_abs,
):
    """Joint RK4 of quotient + block tangent systems with periodic renormalization.

    Returns ``(mle, running, s_final, diverged, steps_done, records)``.
    """
    cdef int K = Q.shape[0]
    cdef int D = row_cluster.shape[0]
    cdef int L = blk_start.shape[0]
    cdef int n = 2 * K + 2 * D
    cdef int q, l, r, rr
    cdef long st, w = 0, rec = 0
    cdef double nrm, h = dt, h2 = 0.5 * dt, h6 = dt / 6.0
    cdef bint diverged = False
    cdef long n_win = 0
    if renorm_every > 0 and n_steps > n_transient:
        n_win = (n_steps - n_transient) // renorm_every
    cdef long n_rec = 0
    if record_every > 0:
        n_rec = n_steps // record_every + 1

    acc_arr = np.zeros(L)
    running_arr = np.full((n_win, L), np.nan)
    rec_arr = np.zeros((n_rec, 2 * K))
    cdef double[::1] acc = acc_arr
    cdef double[:, ::1] running = running_arr
    cdef double[:, ::1] records = rec_arr

    cdef double* z = <double*> malloc(n * sizeof(double))
    cdef double* k1 = <double*> malloc(n * sizeof(double))
    cdef double* k2 = <double*> malloc(n * sizeof(double))
    cdef double* k3 = <double*> malloc(n * sizeof(double))
    cdef double* k4 = <double*> malloc(n * sizeof(double))
    cdef double* tmp = <double*> malloc(n * sizeof(double))
    cdef const double* Qp = &Q[0, 0]
    cdef const int* rc = &row_cluster[0] if D > 0 else NULL
    cdef const int* rb = &row_block[0] if D > 0 else NULL
    cdef const int* bs = &blk_start[0] if L > 0 else NULL
    cdef const int* bd = &blk_dim[0] if L > 0 else NULL
    cdef const int* ro = &rpack_off[0] if L > 0 else NULL
    cdef const double* Rp = &Rpack[0] if Rpack.shape[0] > 0 else NULL

    for q in range(2 * K):
        z[q] = s0[q]
    for q in range(2 * D):
        z[2 * K + q] = y0[q]
    if record_every > 0:
        for q in range(2 * K):
            records[0, q] = z[q]
        rec = 1

    st = 0
    with nogil:
        while st < n_steps:
            _tangent_quotient_rhs(z, k1, K, Qp, sigma, eps, D, rc, rb, bs, bd, ro, Rp)
            for q in range(n):
                tmp[q] = z[q] + h2 * k1[q]
            _tangent_quotient_rhs(tmp, k2, K, Qp, sigma, eps, D, rc, rb, bs, bd, ro, Rp)
            for q in range(n):
                tmp[q] = z[q] + h2 * k2[q]
            _tangent_quotient_rhs(tmp, k3, K, Qp, sigma, eps, D, rc, rb, bs, bd, ro, Rp)
            for q in range(n):
                tmp[q] = z[q] + h * k3[q]
            _tangent_quotient_rhs(tmp, k4, K, Qp, sigma, eps, D, rc, rb, bs, bd, ro, Rp)
            for q in range(n):
                z[q] += h6 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q])
            st += 1

            for q in range(2 * K):
                if not isfinite(z[q]) or fabs(z[q]) > max_abs:
                    diverged = True
            if diverged:
                break
            if record_every > 0 and st % record_every == 0:
                for q in range(2 * K):
                    records[rec, q] = z[q]
                rec += 1
            if renorm_every > 0 and st % renorm_every == 0:
                for l in range(L):
                    nrm = 0.0
                    for rr in range(bd[l]):
                        r = bs[l] + rr
                        nrm += z[2 * K + 2 * r] * z[2 * K + 2 * r] + z[2 * K + 2 * r + 1] * z[2 * K + 2 * r + 1]
                    nrm = sqrt(nrm)
                    if not isfinite(nrm) or nrm == 0.0:
                        diverged = True
                        break
                    for rr in range(bd[l]):
                        r = bs[l] + rr
                        z[2 * K + 2 * r] /= nrm
                        z[2 * K + 2 * r + 1] /= nrm
                    if st > n_transient:
                        acc[l] += log(nrm)
                if diverged:
                    break
                if st > n_transient and w < n_win:
                    for l in range(L):
                        running[w, l] = acc[l] / ((st - n_transient) * dt)
                    w += 1

    s_final = np.empty(2 * K)
    for q in range(2 * K):
        s_final[q] = z[q]
    free(z); free(k1); free(k2); free(k3); free(k4); free(tmp)

    if w > 0:
        mle = acc_arr / ((w * renorm_every) * dt)
    else:
        mle = np.full(L, np.nan)
    return mle, running_arr[:w], s_final, bool(diverged), int(st), rec_arr[:rec]


cdef inline void _network_rhs(const double* x, double* dx, int N, const double* A,
                              double sigma, double eps) noexcept nogil:
    cdef int i, j
    cdef double x1, x2, c
    for i in range(N):
        x1 = x[2 * i]
        x2 = x[2 * i + 1]
        c = 0.0
        for j in range(N):
            c += A[i * N + j] * x[2 * j + 1]
        dx[2 * i] = x2
        dx[2 * i + 1] = -x1 + eps * (1.0 - x1 * x1) * x2 + sigma * c


def network_vdp(
    double eps,
    double[:, ::1] At,
    double sigma,
    double[::1] x0,
    double dt,
    long n_steps,
    long win_start,
    int[::1] cluster_of,
    int[::1] ref_node,
    long record_every,
    double max_abs,
):
    """RK4 of the full network; time-averages per-cluster sync errors after ``win_start``.

    Returns ``(E, x_final, diverged, steps_done, records)``.
    """
    cdef int N = At.shape[0]
    cdef int K = ref_node.shape[0]
    cdef int n = 2 * N
    cdef int q, i, c, rnode
    cdef long st = 0, count = 0, rec = 0
    cdef double h = dt, h2 = 0.5 * dt, h6 = dt / 6.0, e1, e2
    cdef bint diverged = False
    cdef long n_rec = 0
    if record_every > 0:
        n_rec = n_steps // record_every + 1
    E_arr = np.zeros(K)
    rec_arr = np.zeros((n_rec, n))
    cdef double[::1] E = E_arr
    cdef double[:, ::1] records = rec_arr
    cdef double* x = <double*> malloc(n * sizeof(double))
    cdef double* k1 = <double*> malloc(n * sizeof(double))
    cdef double* k2 = <double*> malloc(n * sizeof(double))
    cdef double* k3 = <double*> malloc(n * sizeof(double))
    cdef double* k4 = <double*> malloc(n * sizeof(double))
    cdef double* tmp = <double*> malloc(n * sizeof(double))
    cdef const double* Ap = &At[0, 0]
    for q in range(n):
        x[q] = x0[q]
    if record_every > 0:
        for q in range(n):
            records[0, q] = x[q]
        rec = 1
    with nogil:
        while st < n_steps:
            _network_rhs(x, k1, N, Ap, sigma, eps)
            for q in range(n):
                tmp[q] = x[q] + h2 * k1[q]
            _network_rhs(tmp, k2, N, Ap, sigma, eps)
            for q in range(n):
                tmp[q] = x[q] + h2 * k2[q]
            _network_rhs(tmp, k3, N, Ap, sigma, eps)
            for q in range(n):
                tmp[q] = x[q] + h * k3[q]
            _network_rhs(tmp, k4, N, Ap, sigma, eps)
            for q in range(n):
                x[q] += h6 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q])
            st += 1
            for q in range(n):
                if not isfinite(x[q]) or fabs(x[q]) > max_abs:
                    diverged = True
            if diverged:
                break
            if record_every > 0 and st % record_every == 0:
                for q in range(n):
                    records[rec, q] = x[q]
                rec += 1
            if st >= win_start:
                for i in range(N):
                    c = cluster_of[i]
                    rnode = ref_node[c]
                    e1 = x[2 * i] - x[2 * rnode]
                    e2 = x[2 * i + 1] - x[2 * rnode + 1]
                    E[c] += sqrt(e1 * e1 + e2 * e2)
                count += 1
    x_final = np.empty(n)
    for q in range(n):
        x_final[q] = x[q]
    free(x); free(k1); free(k2); free(k3); free(k4); free(tmp)
    if count > 0:
        E_arr /= count
    else:
        E_arr[:] = np.nan
    return E_arr, x_final, bool(diverged), int(st), rec_arr[:rec]
