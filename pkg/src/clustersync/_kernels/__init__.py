"""Kernel dispatch: compiled Van der Pol kernels when built, numpy otherwise.

Set ``CLUSTERSYNC_PURE_PYTHON=1`` to force the numpy path. Models other than
the built-in Van der Pol always use numpy.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKEND = "cython" if _ckernels is not None and not os.environ.get("CLUSTERSYNC_PURE_PYTHON") else "python"


def _use_c(model, backend: str | None) -> bool:
    b = backend or BACKEND
    if b not in ("cython", "python"):
        raise ValueError(f"unknown backend {b!r}")
    if b == "cython" and _ckernels is None:
        raise RuntimeError("compiled kernels are not available in this build")
    return b == "cython" and getattr(model, "kernel", None) == "vdp"


def _i32(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.int32)


def _f64(a) -> np.ndarray:
    # the typed memoryviews need writable buffers, so read-only inputs are copied
    a = np.require(a, dtype=np.float64, requirements=["C", "W"])
    return a if a.ndim == 2 else a.ravel()


def benettin(model, Q, sigma, s0, layout, y0, dt, n_steps, n_transient, renorm_every,
             record_every=0, max_abs=1e6, backend=None):
    """Dispatch the joint quotient/tangent RK4 + Benettin kernel.

    ``layout`` is a :class:`clustersync.dynamics.TangentLayout`.
    """
    args = (
        float(sigma),
        _f64(np.ravel(s0)),
        _i32(layout.row_cluster),
        _i32(layout.row_block),
        _i32(layout.blk_start),
        _i32(layout.blk_dim),
        _i32(layout.rpack_off),
        _f64(np.ravel(layout.rpack)),
        _f64(np.ravel(y0)),
        float(dt),
        int(n_steps),
        int(n_transient),
        int(renorm_every),
        int(record_every),
        float(max_abs),
    )
    if _use_c(model, backend):
        return _ckernels.benettin_vdp(float(model.damping), _f64(np.atleast_2d(Q)), *args)
    (sig, s0_, rc, _rb, bs, bd, ro, rp, y0_, dt_, ns, nt, re, rec, ma) = args
    return _pykernels.benettin(model, Q, sig, s0_, rc, bs, bd, ro, rp, y0_, dt_, ns, nt, re, rec, ma)


def network(model, At, sigma, x0, dt, n_steps, win_start, cluster_of, ref_node,
            record_every=0, max_abs=1e6, backend=None):
    """Dispatch the full-network RK4 kernel."""
    if _use_c(model, backend):
        return _ckernels.network_vdp(
            float(model.damping),
            _f64(At),
            float(sigma),
            _f64(np.ravel(x0)),
            float(dt),
            int(n_steps),
            int(win_start),
            _i32(cluster_of),
            _i32(ref_node),
            int(record_every),
            float(max_abs),
        )
    return _pykernels.network(model, At, sigma, x0, dt, n_steps, win_start, cluster_of, ref_node,
                              record_every, max_abs)
