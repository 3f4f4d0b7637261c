"""Cluster-synchronization types and synchronizability indices from stable sigma-intervals."""

from __future__ import annotations

import csv
import enum
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dynamics import (
    Numerics,
    OscillatorModel,
    Owner,
    OwnerEvaluator,
    SigmaInterval,
    owner_intervals,
    scan_owners,
)
from .netio import Network, laplacian, shifted_adjacency
from .partition import Partition, minimum_balanced_coloring
from .spectral import DEFAULT_SEED, DisconnectedGraphError, complete_sync_indices, decompose

log = logging.getLogger(__name__)


class CSType(str, enum.Enum):
    MATRYOSHKA = "Matryoshka"
    PARTIALLY_DISJOINT = "PartiallyDisjoint"
    COMPLETE_DISJOINT = "CompleteDisjoint"


class UnboundedCaseError(ValueError):
    """Raised when an index for the bounded case is requested with unbounded owners (or vice versa)."""


@dataclass(frozen=True)
class PairClass:
    type: CSType
    identical: bool = False
    outer: int | None = None  # 0 or 1: which argument contains the other (Matryoshka only)

    @property
    def label(self) -> str:
        return "Identical" if self.identical else self.type.value


def _contains(outer: SigmaInterval, inner: SigmaInterval, tol: float) -> bool:
    return inner.lo >= outer.lo - tol and inner.hi <= outer.hi + tol


def _same(a: float, b: float, tol: float) -> bool:
    return a == b or abs(a - b) <= tol


def classify_pair(a: SigmaInterval, b: SigmaInterval, tol: float = 1e-3) -> PairClass:
    """Matryoshka if one interval lies inside the other (bounds equal within ``tol``
    count as equal), Complete Disjoint if they do not intersect, otherwise
    Partially Disjoint."""
    if a.empty or b.empty or max(a.lo, b.lo) > min(a.hi, b.hi):
        return PairClass(CSType.COMPLETE_DISJOINT)
    a_in_b = _contains(b, a, tol)
    b_in_a = _contains(a, b, tol)
    if a_in_b and b_in_a:
        identical = _same(a.lo, b.lo, tol) and _same(a.hi, b.hi, tol)
        return PairClass(CSType.MATRYOSHKA, identical=identical, outer=0)
    if b_in_a:
        return PairClass(CSType.MATRYOSHKA, outer=0)
    if a_in_b:
        return PairClass(CSType.MATRYOSHKA, outer=1)
    return PairClass(CSType.PARTIALLY_DISJOINT)


@dataclass(frozen=True)
class NetworkInterval:
    lo: float
    hi: float
    k1: int | None
    k2: int | None

    @property
    def empty(self) -> bool:
        return self.k1 is None or not (self.lo <= self.hi)


def network_interval(intervals: Sequence[SigmaInterval], tol: float = 1e-3) -> NetworkInterval:
    """``[max_k lo_k, min_k hi_k]`` with the critical owners ``k1`` (largest lower
    bound) and ``k2`` (smallest upper bound), as positions in ``intervals``.

    Bounds within ``tol`` of the extreme tie. Ties go to the lowest index,
    preferring an owner that is critical for both bounds when one exists.
    """
    if not intervals or any(iv.empty for iv in intervals):
        return NetworkInterval(math.nan, math.nan, None, None)
    los = [iv.lo for iv in intervals]
    his = [iv.hi for iv in intervals]
    lo, hi = max(los), min(his)
    c1 = [i for i, v in enumerate(los) if _same(v, lo, tol)]
    c2 = [i for i, v in enumerate(his) if _same(v, hi, tol)]
    both = sorted(set(c1) & set(c2))
    k1, k2 = (both[0], both[0]) if both else (c1[0], c2[0])
    if lo > hi:
        return NetworkInterval(lo, hi, None, None)
    return NetworkInterval(lo, hi, k1, k2)


def rho(ni: NetworkInterval) -> float | None:
    """Measured ratio ``sigma_max / sigma_min`` of the network interval; ``None`` if empty."""
    if ni.empty:
        return None
    if ni.lo <= 0:
        return math.inf
    return ni.hi / ni.lo


def eta_b(owner_list: Sequence[Owner], ni: NetworkInterval, intervals: Sequence[SigmaInterval] | None = None) -> float:
    """``mu_min(k1) / mu_max(k2)``, or 0 when the network interval is empty."""
    if intervals is not None and any(iv.status == "unbounded" for iv in intervals):
        raise UnboundedCaseError("unbounded owners present; use eta_u")
    if ni.empty:
        return 0.0
    return owner_list[ni.k1].mu_min / owner_list[ni.k2].mu_max


def eta_b_conditions(value: float) -> dict:
    """Type constraints implied by an ``eta_b`` value alone."""
    return {
        "matryoshka_possible": 0 < value <= 1,
        "partially_disjoint_implied": value > 1,
        "complete_disjoint": value == 0,
    }


def eta_u(intervals: Sequence[SigmaInterval], owner_list: Sequence[Owner]) -> float:
    """Unbounded-case index ``max_k b_c^k / mu_min^k`` with ``b_c^k`` measured as
    ``sigma_min^k * mu_min^k``, i.e. the largest onset coupling."""
    if any(iv.status != "unbounded" for iv in intervals):
        raise UnboundedCaseError("bounded or empty owners present; use eta_b")
    if not intervals:
        raise ValueError("no owners")
    return max((iv.lo * o.mu_min) / o.mu_min for iv, o in zip(intervals, owner_list))


def overall_type(pairs: dict[tuple[int, int], PairClass]) -> CSType | None:
    if not pairs:
        return None
    types = {p.type for p in pairs.values()}
    if CSType.COMPLETE_DISJOINT in types:
        return CSType.COMPLETE_DISJOINT
    if types == {CSType.MATRYOSHKA}:
        return CSType.MATRYOSHKA
    return CSType.PARTIALLY_DISJOINT


@dataclass
class CSReport:
    owners: list[Owner]
    intervals: list[SigmaInterval]
    pair_types: dict[tuple[int, int], PairClass]
    type: CSType | None
    network_interval: NetworkInterval
    rho: float | None
    eta_b: float | None
    eta_u: float | None
    alpha_b: float | None = None
    alpha_u: float | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def k1(self) -> int | None:
        return self.network_interval.k1

    @property
    def k2(self) -> int | None:
        return self.network_interval.k2

    @property
    def block_level(self) -> bool:
        return any(o.kind == "block" for o in self.owners)

    def label(self, i: int | None) -> str | None:
        return None if i is None else self.owners[i].label

    def as_dict(self) -> dict:
        def num(x):
            if x is None or (isinstance(x, float) and math.isnan(x)):
                return None
            return "inf" if x == math.inf else float(x)

        n = len(self.owners)
        matrix = [[None if i == j else self.pair_types[(min(i, j), max(i, j))].label for j in range(n)] for i in range(n)]
        ni = self.network_interval
        return {
            "type": None if self.type is None else self.type.value,
            "owners": [
                {
                    "label": o.label,
                    "kind": o.kind,
                    "index": o.index,
                    "mu_min": o.mu_min,
                    "mu_max": o.mu_max,
                    "eta_b_k": o.mu_min / o.mu_max,
                    "eta_u_k": o.mu_min,
                }
                for o in self.owners
            ],
            "intervals": [iv.as_dict() for iv in self.intervals],
            "pair_types": matrix,
            "network_interval": None if ni.empty else [num(ni.lo), num(ni.hi)],
            "k1": self.label(ni.k1),
            "k2": self.label(ni.k2),
            "rho": num(self.rho),
            "eta_b": num(self.eta_b),
            "eta_u": num(self.eta_u),
            "alpha_b": num(self.alpha_b),
            "alpha_u": num(self.alpha_u),
            "block_level": self.block_level,
            "notes": list(self.notes),
        }


def build_report(owner_list: Sequence[Owner], intervals: Sequence[SigmaInterval], *, tol: float = 1e-3,
                 L: np.ndarray | None = None) -> CSReport:
    """Combine owner intervals into pair types, the network interval and indices."""
    owner_list, intervals = list(owner_list), list(intervals)
    pairs = {(i, j): classify_pair(intervals[i], intervals[j], tol)
             for i in range(len(intervals)) for j in range(i + 1, len(intervals))}
    ni = network_interval(intervals, tol)
    notes: list[str] = []
    if intervals and all(iv.status == "unbounded" for iv in intervals):
        eb, eu = None, eta_u(intervals, owner_list)
    elif any(iv.status == "unbounded" for iv in intervals):
        eb, eu = None, None
        notes.append("mixed bounded and unbounded owners: neither eta_b nor eta_u applies")
    else:
        eb, eu = eta_b(owner_list, ni), None
    if any(iv.status == "scan-limited" for iv in intervals):
        notes.append("bounded within scan range: some owners stay stable up to the top of the sigma grid")
    t = overall_type(pairs)
    if eb is not None and t is not None:
        cond = eta_b_conditions(eb)
        if cond["partially_disjoint_implied"] and t is not CSType.PARTIALLY_DISJOINT:
            notes.append(f"eta_b={eb:.4g} > 1 suggests Partially Disjoint but measured type is {t.value}")
        if cond["complete_disjoint"] != (t is CSType.COMPLETE_DISJOINT):
            notes.append("eta_b = 0 and Complete Disjoint type disagree")
    for msg in notes:
        log.info(msg)
    ab = au = None
    if L is not None:
        try:
            csi = complete_sync_indices(L)
            ab, au = csi.alpha_b, csi.alpha_u
        except DisconnectedGraphError:
            notes.append("graph is disconnected: complete synchronization indices undefined")
    return CSReport(owner_list, intervals, pairs, t, ni, rho(ni), eb, eu, ab, au, notes)


@dataclass
class Analysis:
    partition: Partition
    report: CSReport
    scan: object
    decomposition: object


def analyze(net: Network, model: OscillatorModel, sigma_grid, *, numerics: Numerics = Numerics(),
            seed: int = DEFAULT_SEED, partition: Partition | None = None, backend: str | None = None) -> Analysis:
    """Full pipeline: coloring, decomposition, owner scans, interval refinement, report."""
    At = shifted_adjacency(net)
    p = partition or minimum_balanced_coloring(At)
    d = decompose(At, p, seed=seed)
    ev = OwnerEvaluator(d, model, numerics, backend)
    sc = scan_owners(d, model, sigma_grid, numerics=numerics, seed=seed, backend=backend, evaluator=ev)
    ivs = owner_intervals(sc, ev)
    rep = build_report(ev.owners, ivs, tol=numerics.refine_tol, L=laplacian(net))
    return Analysis(p, rep, sc, d)


@dataclass(frozen=True)
class ScanRow:
    w: float
    sigma_lo: float | None
    sigma_hi: float | None
    k1: str | None
    k2: str | None
    type: str | None
    eta_b: float | None
    error: str | None = None


def _scan_point(w, generator, model, grid, numerics, seed, backend) -> ScanRow:
    try:
        an = analyze(generator(w), model, grid, numerics=numerics, seed=seed, backend=backend)
    except Exception as exc:  # recorded, scan continues
        log.warning("scan point w=%g failed: %s", w, exc)
        return ScanRow(float(w), None, None, None, None, None, None, f"{type(exc).__name__}: {exc}")
    r = an.report
    ni = r.network_interval
    return ScanRow(
        float(w),
        None if ni.empty else ni.lo,
        None if ni.empty else ni.hi,
        r.label(ni.k1),
        r.label(ni.k2),
        None if r.type is None else r.type.value,
        r.eta_b,
    )


def eta_b_scan(generator: Callable[[float], Network], w_values, model: OscillatorModel, sigma_grid, *,
               numerics: Numerics = Numerics(), seed: int = DEFAULT_SEED, workers: int = 1,
               backend: str | None = None) -> list[ScanRow]:
    """Classification and ``eta_b`` for each parameter value ``w`` of a network family.

    Points are independent and may run on ``workers`` threads (the compiled
    kernels release the GIL).
    """
    ws = [float(w) for w in w_values]
    job = lambda w: _scan_point(w, generator, model, sigma_grid, numerics, seed, backend)  # noqa: E731
    if workers <= 1:
        return [job(w) for w in ws]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, ws))


def regime_key(row: ScanRow) -> tuple:
    return (row.type, row.k1, row.k2)


def regime_boundaries(generator: Callable[[float], Network], rows: Sequence[ScanRow], model: OscillatorModel,
                      sigma_grid, *, tol: float = 0.01, numerics: Numerics = Numerics(),
                      seed: int = DEFAULT_SEED, backend: str | None = None) -> list[tuple[float, ScanRow, ScanRow]]:
    """Bisect in ``w`` between consecutive scan rows whose regime (type and
    critical owners) differs; returns ``(w_boundary, left_row, right_row)``."""
    rows = sorted(rows, key=lambda r: r.w)
    out = []
    for left, right in zip(rows, rows[1:]):
        if regime_key(left) == regime_key(right):
            continue
        a, b = left.w, right.w
        ka = regime_key(left)
        while b - a > tol:
            mid = 0.5 * (a + b)
            r = _scan_point(mid, generator, model, sigma_grid, numerics, seed, backend)
            if regime_key(r) == ka:
                a = mid
            else:
                b = mid
        out.append((0.5 * (a + b), left, right))
    return out


def scan_rows_csv(rows: Sequence[ScanRow]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["w", "sigma_lo", "sigma_hi", "k1", "k2", "type", "eta_b", "error"])
    for r in rows:
        wr.writerow([repr(r.w), "" if r.sigma_lo is None else repr(r.sigma_lo),
                     "" if r.sigma_hi is None else repr(r.sigma_hi), r.k1 or "", r.k2 or "", r.type or "",
                     "" if r.eta_b is None else repr(r.eta_b), r.error or ""])
    return buf.getvalue()
