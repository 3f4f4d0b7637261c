"""Quotient and network integration, transverse Lyapunov exponents and stable sigma-intervals.

Nodes obey ``x_i' = F(x_i) + sigma * sum_j At_ij H(x_j)``. The cluster
synchronous solution follows the quotient flow ``s_k' = F(s_k) + sigma *
sum_j Q_kj H(s_j)``; perturbations in transverse block ``l`` obey

    y_r' = DF(s_c(r)) y_r + sigma * sum_r' R_l[r, r'] DH(s_c(r')) y_r'

which for a 1x1 block with eigenvalue ``-mu`` is ``[DF - sigma mu DH] y``.
Quotient and tangent systems are integrated jointly with fixed-step RK4 and
the maximum Lyapunov exponent is estimated by periodic renormalization.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .partition import Partition
from .spectral import SpectralDecomposition, TransverseBlock

log = logging.getLogger(__name__)

INF = math.inf


# ---------------------------------------------------------------- models


@dataclass(frozen=True)
class OscillatorModel:
    """Node dynamics. All callables act row-wise on arrays of shape ``(n, m)``.

    ``F`` and ``H`` return ``(n, m)``; ``DF`` and ``DH`` return ``(n, m, m)``.
    ``kernel`` names a compiled specialization (only ``"vdp"`` exists).
    """

    dim: int
    F: Callable[[np.ndarray], np.ndarray]
    DF: Callable[[np.ndarray], np.ndarray]
    H: Callable[[np.ndarray], np.ndarray]
    DH: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"
    kernel: str | None = None
    params: dict = field(default_factory=dict, compare=False)

    @property
    def damping(self) -> float:
        return self.params["damping"]


def van_der_pol(damping: float = 3.0) -> OscillatorModel:
    """Van der Pol nodes coupled through the velocity: ``H(x) = (0, x2)``."""
    eps = float(damping)

    def F(x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        out[..., 0] = x[..., 1]
        out[..., 1] = -x[..., 0] + eps * (1.0 - x[..., 0] ** 2) * x[..., 1]
        return out

    def DF(x):
        x = np.asarray(x, dtype=float)
        J = np.zeros(x.shape + (2,))
        J[..., 0, 1] = 1.0
        J[..., 1, 0] = -1.0 - 2.0 * eps * x[..., 0] * x[..., 1]
        J[..., 1, 1] = eps * (1.0 - x[..., 0] ** 2)
        return J

    def H(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[..., 1] = x[..., 1]
        return out

    def DH(x):
        x = np.asarray(x, dtype=float)
        J = np.zeros(x.shape + (2,))
        J[..., 1, 1] = 1.0
        return J

    return OscillatorModel(2, F, DF, H, DH, name=f"van-der-pol(eps={eps:g})", kernel="vdp",
                           params={"damping": eps})


# ---------------------------------------------------------------- numerics


@dataclass(frozen=True)
class Numerics:
    """Integration and stability-detection settings (times in model units)."""

    dt: float = 1e-3
    horizon: float = 500.0
    transient: float = 100.0
    renorm: float = 1.0
    window: tuple[float, float] = (450.0, 500.0)
    conv_tol: float = 5e-3
    conv_tail: int = 10
    sync_rtol: float = 1e-3
    delta: float = 1e-4
    max_abs: float = 1e6
    refine_tol: float = 1e-3
    unbounded_margin: float = 0.05
    attractor_time: float = 200.0
    widen_factor: float = 2.0  # one rerun with horizon * widen_factor if an estimate has not converged

    def __post_init__(self):
        if not (self.dt > 0 and self.horizon > 0 and self.renorm > 0):
            raise ValueError("dt, horizon and renorm must be positive")
        if not 0 <= self.transient < self.horizon:
            raise ValueError("transient must lie in [0, horizon)")
        lo, hi = self.window
        if not 0 <= lo < hi <= self.horizon:
            raise ValueError(f"window {self.window} is not inside [0, {self.horizon}]")
        for name in ("conv_tol", "sync_rtol", "delta", "refine_tol", "max_abs"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def steps(self, t: float) -> int:
        return int(round(t / self.dt))


# ---------------------------------------------------------------- generic RK4


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    diverged: bool


def rk4_step(rhs, y, h):
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * h * k1)
    k3 = rhs(y + 0.5 * h * k2)
    k4 = rhs(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(rhs, ic, t_span: tuple[float, float], dt: float, *, max_abs: float = 1e6,
              record_every: int = 1) -> Trajectory:
    """Fixed-step classical RK4 for the autonomous system ``y' = rhs(y)``.

    ``rhs`` may also be an :class:`OscillatorModel`, in which case its ``F``
    is integrated. Integration stops early, with ``diverged=True``, once any
    component is non-finite or exceeds ``max_abs``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    y = np.array(ic, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("initial condition is not finite")
    if isinstance(rhs, OscillatorModel):
        model = rhs
        rhs = lambda z: model.F(z)  # noqa: E731
    t0, t1 = t_span
    n = int(round((t1 - t0) / dt))
    times, states = [t0], [y.copy()]
    diverged = False
    for st in range(1, n + 1):
        y = rk4_step(rhs, y, dt)
        if not np.all(np.isfinite(y)) or np.abs(y).max() > max_abs:
            diverged = True
            break
        if st % record_every == 0:
            times.append(t0 + st * dt)
            states.append(y.copy())
    return Trajectory(np.array(times), np.array(states), diverged)


# ---------------------------------------------------------------- tangent layout


@dataclass(frozen=True)
class TangentLayout:
    """Packed description of a set of independent tangent blocks for the kernels."""

    row_cluster: np.ndarray
    row_block: np.ndarray
    blk_start: np.ndarray
    blk_dim: np.ndarray
    rpack_off: np.ndarray
    rpack: np.ndarray

    @classmethod
    def from_blocks(cls, blocks: Sequence[tuple[np.ndarray, Sequence[int]]]) -> "TangentLayout":
        rc, rb, bs, bd, ro, rp = [], [], [], [], [], []
        start = off = 0
        for b, (M, clusters) in enumerate(blocks):
            M = np.atleast_2d(np.asarray(M, dtype=float))
            d = M.shape[0]
            if len(clusters) != d:
                raise ValueError("row_cluster length does not match block size")
            rc.extend(int(c) for c in clusters)
            rb.extend([b] * d)
            bs.append(start)
            bd.append(d)
            ro.append(off)
            rp.extend(M.ravel().tolist())
            start += d
            off += d * d
        return cls(*(np.asarray(a, dtype=np.int32) for a in (rc, rb, bs, bd, ro)), np.asarray(rp, dtype=float))

    @property
    def n_blocks(self) -> int:
        return int(self.blk_start.size)

    @property
    def n_rows(self) -> int:
        return int(self.row_cluster.size)

    def initial_tangent(self, m: int) -> np.ndarray:
        """Deterministic unit start vector per block (all components equal).

        Using the same start for a block whether it runs alone or alongside
        others keeps per-block estimates identical across call paths.
        """
        y = np.ones((self.n_rows, m))
        for s, d in zip(self.blk_start, self.blk_dim):
            y[s : s + d] /= math.sqrt(d * m)
        return y


# ---------------------------------------------------------------- owners


@dataclass(frozen=True)
class Owner:
    """Something that gets its own sigma-interval: a cluster or an intertwined block.

    ``tangents`` lists the ``(matrix, row_cluster)`` tangent systems whose
    largest MLE decides stability. Repeated eigenvalues within a cluster are
    integrated once.
    """

    kind: str  # "cluster" or "block"
    index: int
    tangents: tuple[tuple[np.ndarray, tuple[int, ...]], ...]
    mu: tuple[float, ...]

    @property
    def label(self) -> str:
        return f"{'C' if self.kind == 'cluster' else 'B'}{self.index}"

    @property
    def mu_min(self) -> float:
        return min(self.mu)

    @property
    def mu_max(self) -> float:
        return max(self.mu)


def owners(d: SpectralDecomposition) -> list[Owner]:
    """Cluster owners (from single-cluster blocks) then one owner per multi-cluster block."""
    out: list[Owner] = []
    scale = max(1.0, float(np.abs(d.Q).max()), *(float(np.abs(b.matrix).max()) for b in d.blocks))
    for k, lam in sorted(d.lambda_R.items()):
        if len(lam) == 0:
            continue
        distinct: list[float] = []
        for v in np.sort(lam):
            if not distinct or abs(v - distinct[-1]) > 1e-9 * scale:
                distinct.append(float(v))
        tang = tuple((np.array([[v]]), (k,)) for v in distinct)
        out.append(Owner("cluster", k, tang, tuple(float(-v) for v in lam)))
    for l in d.multi_cluster_blocks:
        b = d.blocks[l]
        out.append(Owner("block", l, ((b.matrix, b.row_cluster),), tuple(float(v) for v in -b.eigenvalues)))
    return out


# ---------------------------------------------------------------- initial conditions


def attractor_samples(model: OscillatorModel, n: int, rng: np.random.Generator,
                      numerics: Numerics = Numerics(), backend: str | None = None) -> np.ndarray:
    """``n`` independent random points on the uncoupled node attractor.

    One trajectory from a random start is integrated for
    ``numerics.attractor_time``; the first half is discarded and points are
    drawn at random times from the rest.
    """
    x0 = rng.uniform(-1.0, 1.0, size=model.dim)
    n_steps = numerics.steps(numerics.attractor_time)
    rec_every = max(1, numerics.steps(0.01))
    lay = TangentLayout.from_blocks([])
    *_, diverged, _, rec = _kernels.benettin(
        model, np.zeros((1, 1)), 0.0, x0, lay, np.zeros(0), numerics.dt, n_steps, 0, 0,
        record_every=rec_every, max_abs=numerics.max_abs, backend=backend,
    )
    if diverged:
        raise RuntimeError("uncoupled node dynamics diverged; no attractor to sample")
    tail = rec[len(rec) // 2 :]
    return tail[rng.integers(0, len(tail), size=n)]


class ContinuationIC:
    """Initial-condition policy for a sweep in sigma.

    The first sigma starts every cluster at an independently drawn point of
    the uncoupled attractor; each later sigma starts from the final quotient
    state of the previous one. Divergent runs do not advance the chain.
    """

    def __init__(self, model: OscillatorModel, K: int, seed: int = 0, numerics: Numerics = Numerics(),
                 backend: str | None = None, s0: np.ndarray | None = None):
        self.model = model
        self.K = K
        self.rng = np.random.default_rng(seed)
        if s0 is None:
            s0 = attractor_samples(model, K, self.rng, numerics, backend)
        self._state = np.array(s0, dtype=float).reshape(K, model.dim)
        self.initial = self._state.copy()

    def current(self) -> np.ndarray:
        return self._state.copy()

    def advance(self, s_final: np.ndarray, diverged: bool = False) -> None:
        if not diverged:
            self._state = np.array(s_final, dtype=float).reshape(self.K, self.model.dim)


# ---------------------------------------------------------------- quotient + MLE


@dataclass(frozen=True)
class QuotientTrajectory:
    """Quotient flow at one sigma.

    ``s0`` is the start state; tangent integrations replay the flow from it
    with identical arithmetic, so the stored samples are for inspection only.
    """

    sigma: float
    Q: np.ndarray
    model: OscillatorModel
    s0: np.ndarray
    times: np.ndarray
    states: np.ndarray  # (n_times, K, m)
    diverged: bool
    numerics: Numerics
    attractor_sample_window: tuple[float, float]

    @property
    def s_final(self) -> np.ndarray:
        return self.states[-1]


def quotient_trajectory(Q, model: OscillatorModel, sigma: float, ic, numerics: Numerics = Numerics(),
                        *, sample_every: float = 0.1, backend: str | None = None) -> QuotientTrajectory:
    """Integrate the quotient flow over ``numerics.horizon``.

    ``ic`` is a :class:`ContinuationIC` (which is advanced with the final
    state) or an explicit ``(K, m)`` start state.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    K = Q.shape[0]
    s0 = ic.current() if isinstance(ic, ContinuationIC) else np.array(ic, dtype=float).reshape(K, model.dim)
    rec_every = max(1, numerics.steps(sample_every))
    lay = TangentLayout.from_blocks([])
    *_, diverged, done, rec = _kernels.benettin(
        model, Q, sigma, s0, lay, np.zeros(0), numerics.dt, numerics.steps(numerics.horizon), 0, 0,
        record_every=rec_every, max_abs=numerics.max_abs, backend=backend,
    )
    if diverged:
        log.warning("quotient flow diverged at sigma=%g: no coherent cluster state", sigma)
    if isinstance(ic, ContinuationIC):
        ic.advance(rec[-1], diverged)
    times = np.arange(len(rec)) * rec_every * numerics.dt
    return QuotientTrajectory(float(sigma), Q, model, s0, times, rec.reshape(-1, K, model.dim), diverged,
                              numerics, (numerics.transient, numerics.horizon))


@dataclass(frozen=True)
class MLEResult:
    value: float
    converged: bool
    window_estimates: np.ndarray
    diverged: bool = False

    @property
    def stable(self) -> bool:
        return (not self.diverged) and math.isfinite(self.value) and self.value < 0


@dataclass(frozen=True)
class _JointRun:
    mle: np.ndarray
    running: np.ndarray
    s_after_transient: np.ndarray
    s_final: np.ndarray
    diverged: bool


def _run_joint(Q, model, sigma, s0, layout: TangentLayout, numerics: Numerics, backend=None) -> _JointRun:
    n_tr = numerics.steps(numerics.transient)
    mle, running, s_final, diverged, _, rec = _kernels.benettin(
        model, Q, sigma, s0, layout, layout.initial_tangent(model.dim), numerics.dt,
        numerics.steps(numerics.horizon), n_tr, numerics.steps(numerics.renorm),
        record_every=max(n_tr, 1) if n_tr > 0 else 0, max_abs=numerics.max_abs, backend=backend,
    )
    s_tr = rec[1] if n_tr > 0 and len(rec) > 1 else np.asarray(s0, dtype=float).ravel()
    if diverged:
        mle = np.full(layout.n_blocks, np.nan)
    return _JointRun(np.asarray(mle), np.asarray(running), s_tr, np.asarray(s_final), bool(diverged))


def _mle_result(run: _JointRun, cols: Sequence[int], numerics: Numerics) -> MLEResult:
    if run.diverged or not len(cols):
        return MLEResult(math.nan, False, np.zeros(0), diverged=run.diverged)
    vals = run.mle[list(cols)]
    j = cols[int(np.argmax(vals))]
    tail = run.running[-numerics.conv_tail :, :][:, list(cols)]
    ok = len(tail) >= numerics.conv_tail and bool(np.all(np.ptp(tail, axis=0) < numerics.conv_tol))
    return MLEResult(float(run.mle[j]), ok, run.running[-numerics.conv_tail :, j].copy())


def block_mle(traj: QuotientTrajectory, block: TransverseBlock | tuple, *, backend: str | None = None) -> MLEResult:
    """MLE of one transverse block's variational system along ``traj``.

    ``block`` is a :class:`TransverseBlock` or a ``(matrix, row_cluster)`` pair.
    """
    M, rc = (block.matrix, block.row_cluster) if isinstance(block, TransverseBlock) else block
    lay = TangentLayout.from_blocks([(M, rc)])
    run = _run_joint(traj.Q, traj.model, traj.sigma, traj.s0, lay, traj.numerics, backend)
    return _mle_result(run, [0], traj.numerics)


def transverse_mle(traj: QuotientTrajectory, k: int, mu: float, *, backend: str | None = None) -> MLEResult:
    """MLE of ``y' = [DF(s_k) - sigma mu DH(s_k)] y`` along ``traj``."""
    if mu < 0:
        raise ValueError("mu must be non-negative (all transverse eigenvalues negative)")
    return block_mle(traj, (np.array([[-float(mu)]]), (int(k),)), backend=backend)


@dataclass(frozen=True)
class OwnerEvaluation:
    sigma: float
    results: tuple[MLEResult, ...]
    s_start: np.ndarray
    s_after_transient: np.ndarray
    s_final: np.ndarray
    diverged: bool

    @property
    def mle(self) -> np.ndarray:
        return np.array([r.value for r in self.results])


class OwnerEvaluator:
    """Evaluates every owner's MLE at a sigma with one joint integration."""

    def __init__(self, d: SpectralDecomposition, model: OscillatorModel, numerics: Numerics = Numerics(),
                 backend: str | None = None, owner_list: Sequence[Owner] | None = None):
        self.decomp = d
        self.model = model
        self.numerics = numerics
        self.backend = backend
        self.owners = list(owners(d) if owner_list is None else owner_list)
        blocks, self.cols = [], []
        for o in self.owners:
            start = len(blocks)
            blocks.extend(o.tangents)
            self.cols.append(list(range(start, len(blocks))))
        self.layout = TangentLayout.from_blocks(blocks)

    def __call__(self, sigma: float, s0) -> OwnerEvaluation:
        num = self.numerics
        run = _run_joint(self.decomp.Q, self.model, sigma, s0, self.layout, num, self.backend)
        res = tuple(_mle_result(run, c, num) for c in self.cols)
        if not run.diverged and num.widen_factor > 1 and not all(r.converged for r in res):
            num = replace(num, horizon=num.horizon * num.widen_factor)
            run = _run_joint(self.decomp.Q, self.model, sigma, s0, self.layout, num, self.backend)
            res = tuple(_mle_result(run, c, num) for c in self.cols)
        return OwnerEvaluation(float(sigma), res, np.asarray(s0, dtype=float).ravel(), run.s_after_transient,
                               run.s_final, run.diverged)


# ---------------------------------------------------------------- sigma intervals


@dataclass(frozen=True)
class SigmaInterval:
    """Stable coupling range of one owner.

    ``status`` is ``"bounded"`` (an upper crossing was found),
    ``"unbounded"`` (stable at the top of the grid with margin, ``hi=inf``),
    ``"scan-limited"`` (stable at the grid top without margin; ``hi`` is the
    grid top) or ``"empty"``. ``windows`` lists every stable window found.
    """

    lo: float
    hi: float
    owner: str = ""
    status: str = "bounded"
    windows: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.status != "empty" and not (0 <= self.lo <= self.hi):
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")

    @property
    def empty(self) -> bool:
        return self.status == "empty"

    @property
    def bounded(self) -> bool:
        return self.status != "unbounded"

    @classmethod
    def make_empty(cls, owner: str = "") -> "SigmaInterval":
        return cls(math.nan, math.nan, owner, "empty", ())

    def as_dict(self) -> dict:
        def num(x):
            return None if isinstance(x, float) and math.isnan(x) else ("inf" if x == INF else x)

        return {
            "owner": self.owner,
            "lo": num(self.lo),
            "hi": num(self.hi),
            "status": self.status,
            "windows": [[num(a), num(b)] for a, b in self.windows],
        }


def _bisect(a: float, b: float, stable_a: bool, is_stable: Callable[[float], bool], tol: float) -> float:
    while b - a > tol:
        mid = 0.5 * (a + b)
        if is_stable(mid) == stable_a:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def interval_from_values(grid, values, is_stable_at: Callable[[float, int], bool], *, refine_tol: float = 1e-3,
                         unbounded_margin: float = 0.05, owner: str = "") -> SigmaInterval:
    """Bracket stable windows from grid values and refine every crossing by bisection.

    ``values[i]`` is the owner's MLE at ``grid[i]`` (NaN marks divergence).
    ``is_stable_at(sigma, i_left)`` evaluates a point inside ``(grid[i_left],
    grid[i_left+1])``; ``i_left = -1`` means below the first grid point.
    Sigma = 0 is never stable (the neutral exponent is zero), so a window
    starting at the first grid point is refined down towards zero.
    """
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if grid.size == 0:
        return SigmaInterval.make_empty(owner)
    if np.any(np.diff(grid) <= 0) or grid[0] <= 0:
        raise ValueError("sigma grid must be positive and strictly ascending")
    stable = np.isfinite(values) & (values < 0)
    windows = []
    statuses = []
    i, n = 0, grid.size
    while i < n:
        if not stable[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and stable[j + 1]:
            j += 1
        if i == 0:
            lo = _bisect(0.0, grid[0], False, lambda s: is_stable_at(s, -1), refine_tol)
        else:
            lo = _bisect(grid[i - 1], grid[i], False, lambda s, _i=i - 1: is_stable_at(s, _i), refine_tol)
        if j == n - 1:
            if values[j] < -unbounded_margin:
                hi, status = INF, "unbounded"
            else:
                hi, status = float(grid[j]), "scan-limited"
        else:
            hi = _bisect(grid[j], grid[j + 1], True, lambda s, _j=j: is_stable_at(s, _j), refine_tol)
            status = "bounded"
        windows.append((float(lo), float(hi)))
        statuses.append(status)
        i = j + 1
    if not windows:
        return SigmaInterval.make_empty(owner)
    w = max(range(len(windows)), key=lambda q: windows[q][1] - windows[q][0])
    return SigmaInterval(windows[w][0], windows[w][1], owner, statuses[w], tuple(windows))


def sigma_interval(mle_fn: Callable[[float], float], sigma_grid, *, refine_tol: float = 1e-3,
                   unbounded_margin: float = 0.05, owner: str = "") -> SigmaInterval:
    """Stable interval of a scalar stability function ``mle_fn(sigma)`` (negative = stable)."""
    grid = np.asarray(sigma_grid, dtype=float)
    vals = np.array([mle_fn(s) for s in grid])

    def st(s, _):
        v = mle_fn(s)
        return math.isfinite(v) and v < 0

    return interval_from_values(grid, vals, st, refine_tol=refine_tol, unbounded_margin=unbounded_margin,
                                owner=owner)


@dataclass
class StabilityScan:
    """Owner MLEs along a sigma grid computed with continuation initial conditions."""

    owners: list[Owner]
    evaluations: list[OwnerEvaluation]
    s_initial: np.ndarray

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([e.sigma for e in self.evaluations])

    @property
    def mle(self) -> np.ndarray:
        """``(n_sigma, n_owners)`` array, NaN where the quotient flow diverged."""
        if not self.evaluations:
            return np.zeros((0, len(self.owners)))
        return np.array([e.mle for e in self.evaluations])

    @property
    def converged(self) -> np.ndarray:
        if not self.evaluations:
            return np.zeros((0, len(self.owners)), dtype=bool)
        return np.array([[r.converged for r in e.results] for e in self.evaluations])


def scan_owners(d: SpectralDecomposition, model: OscillatorModel, sigma_grid, *, numerics: Numerics = Numerics(),
                seed: int = 0, backend: str | None = None, ic: ContinuationIC | None = None,
                evaluator: OwnerEvaluator | None = None) -> StabilityScan:
    """MLE of every owner at each grid sigma, chaining quotient states along the grid."""
    ev = evaluator or OwnerEvaluator(d, model, numerics, backend)
    ic = ic or ContinuationIC(model, d.K, seed, numerics, backend)
    s_init = ic.current()
    evals = []
    for s in np.asarray(sigma_grid, dtype=float):
        e = ev(float(s), ic.current())
        ic.advance(e.s_final, e.diverged)
        evals.append(e)
    return StabilityScan(ev.owners, evals, s_init)


def owner_intervals(scan: StabilityScan, evaluator: OwnerEvaluator, *, refine_tol: float | None = None,
                    unbounded_margin: float | None = None) -> list[SigmaInterval]:
    """Refine every owner's stable interval from a grid scan.

    Bisection points start from the final quotient state of the grid point
    on their left, matching the continuation protocol of the scan.
    """
    num = evaluator.numerics
    tol = num.refine_tol if refine_tol is None else refine_tol
    margin = num.unbounded_margin if unbounded_margin is None else unbounded_margin
    grid = scan.sigmas
    cache: dict[tuple[float, int], OwnerEvaluation] = {}

    def evaluate(sigma: float, i_left: int) -> OwnerEvaluation:
        key = (round(sigma, 12), i_left)
        if key not in cache:
            s0 = scan.s_initial if i_left < 0 else scan.evaluations[i_left].s_final
            if i_left >= 0 and scan.evaluations[i_left].diverged:
                s0 = scan.evaluations[i_left].s_start
            cache[key] = evaluator(sigma, s0)
        return cache[key]

    out = []
    mle = scan.mle
    for o, owner in enumerate(scan.owners):
        out.append(
            interval_from_values(
                grid,
                mle[:, o] if len(grid) else np.zeros(0),
                lambda s, i, _o=o: evaluate(s, i).results[_o].stable,
                refine_tol=tol,
                unbounded_margin=margin,
                owner=owner.label,
            )
        )
    return out


# ---------------------------------------------------------------- network simulation


@dataclass(frozen=True)
class SyncErrors:
    sigma: float
    E: np.ndarray
    threshold: np.ndarray
    diverged: bool

    @property
    def synchronized(self) -> np.ndarray:
        return (~np.isnan(self.E)) & (self.E < self.threshold)


def perturbed_network_state(p: Partition, s: np.ndarray, delta: float, rng: np.random.Generator) -> np.ndarray:
    """Cluster-synchronous state ``x_i = s_c(i)`` plus ``+-delta`` on every component."""
    s = np.asarray(s, dtype=float).reshape(p.K, -1)
    x = s[np.asarray(p.cluster_of)]
    return x + delta * rng.choice([-1.0, 1.0], size=x.shape)


def simulate_network(At, p: Partition, model: OscillatorModel, sigma: float, x0, numerics: Numerics = Numerics(),
                     *, backend: str | None = None) -> SyncErrors:
    """Integrate the full network and average per-cluster sync errors over the window.

    The error of cluster ``k`` is ``sum_i |x_i - x_ref|`` over its nodes with
    ``x_ref`` its lowest-index node, averaged over ``numerics.window``.
    """
    At = np.asarray(At, dtype=float)
    ref = np.array([c[0] for c in p.clusters], dtype=np.int32)
    E, _, diverged, _, _ = _kernels.network(
        model, At, sigma, np.ravel(x0), numerics.dt, numerics.steps(numerics.window[1]),
        numerics.steps(numerics.window[0]), np.asarray(p.cluster_of, dtype=np.int32), ref,
        max_abs=numerics.max_abs, backend=backend,
    )
    if diverged:
        E = np.full(p.K, np.nan)
    thr = numerics.sync_rtol * np.asarray(p.sizes, dtype=float)
    return SyncErrors(float(sigma), np.asarray(E), thr, bool(diverged))


# ---------------------------------------------------------------- sweep


@dataclass
class SweepTable:
    K: int
    owner_labels: list[str]
    rows: list[dict]

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ["sigma"] + [f"E_{k + 1}" for k in range(self.K)] + [f"mle_{i + 1}" for i in range(len(self.owner_labels))]
        cols += ["diverged"]
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(cols)
        for r in self.rows:
            wr.writerow([_fmt(r["sigma"])] + [_fmt(v) for v in r["E"]] + [_fmt(v) for v in r["mle"]] + [int(r["diverged"])])
        return buf.getvalue()


def _fmt(v: float) -> str:
    return "nan" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def sweep(At, p: Partition, d: SpectralDecomposition, model: OscillatorModel, sigma_grid, *,
          numerics: Numerics = Numerics(), seed: int = 0, backend: str | None = None) -> SweepTable:
    """Sync errors and owner MLEs along a sigma grid with continuation initial conditions.

    At each sigma the quotient flow and tangent systems are integrated from
    the chained start state; the quotient state after the transient,
    perturbed by ``numerics.delta``, seeds the full-network run. Failures at
    one sigma are recorded and the sweep moves on.
    """
    ev = OwnerEvaluator(d, model, numerics, backend)
    ic = ContinuationIC(model, d.K, seed, numerics, backend)
    rng = np.random.default_rng([seed, 1])
    rows = []
    for s in np.asarray(sigma_grid, dtype=float):
        e = ev(float(s), ic.current())
        ic.advance(e.s_final, e.diverged)
        if e.diverged:
            E = np.full(p.K, np.nan)
        else:
            x0 = perturbed_network_state(p, e.s_after_transient, numerics.delta, rng)
            E = simulate_network(At, p, model, s, x0, numerics, backend=backend).E
        rows.append({"sigma": float(s), "E": E.tolist(), "mle": e.mle.tolist(), "diverged": e.diverged})
    return SweepTable(p.K, [o.label for o in ev.owners], rows)


def with_numerics(n: Numerics, **kw) -> Numerics:
    return replace(n, **kw)
