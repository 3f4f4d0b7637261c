"""Network loading, validation and the dense coupling matrices built from it."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

FORMATS = ("plain-edge-list", "matrix-market")


class NetworkFormatError(ValueError):
    """Raised for malformed or inconsistent network input."""

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Network:
    """Weighted undirected graph plus the diagonal shift ``kappa``.

    Edges are stored canonicalized (``i < j``, 0-based, sorted) with no
    duplicates. Self-loops are rejected; the only diagonal entry of the
    shifted adjacency matrix is ``-kappa``.
    """

    n_nodes: int
    edges: tuple[tuple[int, int, float], ...]
    kappa: float = 0.0
    node_labels: tuple[str, ...] | None = None
    _adjacency: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.n_nodes < 1:
            raise NetworkFormatError(f"network needs at least one node, got {self.n_nodes}")
        if self.node_labels is not None and len(self.node_labels) != self.n_nodes:
            raise NetworkFormatError("node_labels length does not match n_nodes")
        canon = _canonicalize(self.edges, self.n_nodes)
        object.__setattr__(self, "edges", canon)
        object.__setattr__(self, "kappa", float(self.kappa))
        A = np.zeros((self.n_nodes, self.n_nodes))
        for i, j, w in canon:
            A[i, j] = A[j, i] = w
        object.__setattr__(self, "_adjacency", _frozen(A))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def adjacency(self) -> np.ndarray:
        """Symmetric adjacency matrix ``A`` (read-only)."""
        return self._adjacency

    def with_kappa(self, kappa: float) -> "Network":
        return Network(self.n_nodes, self.edges, kappa, self.node_labels)

    @classmethod
    def from_matrix(cls, A: np.ndarray, kappa: float = 0.0) -> "Network":
        """Build a network from a symmetric matrix, ignoring its diagonal."""
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise NetworkFormatError(f"adjacency matrix must be square, got {A.shape}")
        if not np.array_equal(A, A.T):
            raise NetworkFormatError("adjacency matrix is not symmetric")
        iu, ju = np.triu_indices(A.shape[0], k=1)
        mask = A[iu, ju] != 0
        edges = tuple((int(i), int(j), float(A[i, j])) for i, j in zip(iu[mask], ju[mask]))
        return cls(A.shape[0], edges, kappa)


def _canonicalize(edges: Iterable[Sequence], n: int) -> tuple[tuple[int, int, float], ...]:
    seen: dict[tuple[int, int], float] = {}
    for e in edges:
        if len(e) == 2:
            i, j, w = int(e[0]), int(e[1]), 1.0
        else:
            i, j, w = int(e[0]), int(e[1]), float(e[2])
        if not (0 <= i < n and 0 <= j < n):
            raise NetworkFormatError(f"edge ({i}, {j}) out of range for {n} nodes")
        if i == j:
            raise NetworkFormatError(f"self-loop on node {i} is forbidden")
        if not math.isfinite(w):
            raise NetworkFormatError(f"non-finite weight on edge ({i}, {j})")
        key = (min(i, j), max(i, j))
        if key in seen and seen[key] != w:
            raise NetworkFormatError(
                f"conflicting weights {seen[key]} and {w} for edge {key}"
            )
        seen[key] = w
    return tuple((i, j, w) for (i, j), w in sorted(seen.items()))


def _parse_records(lines: Iterable[str], path: str, one_based: bool, comment: str):
    """Yield ``(lineno, i, j, w)`` from whitespace separated records."""
    offset = 1 if one_based else 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split(comment, 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise NetworkFormatError(
                f"expected 'i j [w]', got {len(parts)} fields", path=path, line=lineno
            )
        try:
            i = int(parts[0]) - offset
            j = int(parts[1]) - offset
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError as exc:
            raise NetworkFormatError(str(exc), path=path, line=lineno) from None
        yield lineno, i, j, w


def _build(records, path: str, n_nodes: int | None, kappa: float) -> Network:
    records = list(records)
    if n_nodes is None:
        n_nodes = 1 + max((max(i, j) for _, i, j, _ in records), default=-1)
    edges: dict[tuple[int, int], float] = {}
    for lineno, i, j, w in records:
        if i < 0 or j < 0 or i >= n_nodes or j >= n_nodes:
            raise NetworkFormatError(
                f"node index out of range (n={n_nodes})", path=path, line=lineno
            )
        if i == j:
            raise NetworkFormatError(f"self-loop on node {i} is forbidden", path=path, line=lineno)
        key = (min(i, j), max(i, j))
        if key in edges and edges[key] != w:
            raise NetworkFormatError(
                f"duplicate edge {key} with conflicting weights {edges[key]} and {w}",
                path=path,
                line=lineno,
            )
        edges[key] = w
    return Network(n_nodes, tuple((i, j, w) for (i, j), w in edges.items()), kappa)


def load_edge_list(
    path: str | Path,
    format: str = "plain-edge-list",
    *,
    one_based: bool = True,
    kappa: float = 0.0,
    n_nodes: int | None = None,
) -> Network:
    """Read a network from disk.

    ``plain-edge-list`` files hold one ``i j [w]`` record per line with ``#``
    comments; the node count is inferred from the largest index unless given.
    ``matrix-market`` reads coordinate ``real``/``integer``/``pattern`` files
    with ``general`` or ``symmetric`` storage (always 1-based).

    Duplicate edges with equal weights are merged; conflicting weights,
    self-loops and out-of-range indices raise :class:`NetworkFormatError`.
    """
    path = Path(path)
    if format not in FORMATS:
        raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")
    text = path.read_text().splitlines()
    if format == "plain-edge-list":
        net = _build(_parse_records(text, str(path), one_based, "#"), str(path), n_nodes, kappa)
    else:
        net = _load_matrix_market(text, str(path), kappa)
    log.info("loaded %s: N=%d S=%d", path, net.n_nodes, net.n_edges)
    return net


def _load_matrix_market(lines: list[str], path: str, kappa: float) -> Network:
    if not lines or not lines[0].lower().startswith("%%matrixmarket"):
        raise NetworkFormatError("missing %%MatrixMarket header", path=path, line=1)
    header = lines[0].lower().split()
    if len(header) < 5 or header[1] != "matrix" or header[2] != "coordinate":
        raise NetworkFormatError("only 'matrix coordinate' files are supported", path=path, line=1)
    field_, symmetry = header[3], header[4]
    if field_ not in ("real", "integer", "pattern"):
        raise NetworkFormatError(f"unsupported field {field_!r}", path=path, line=1)
    if symmetry not in ("symmetric", "general"):
        raise NetworkFormatError(f"unsupported symmetry {symmetry!r}", path=path, line=1)

    body = [(k, ln) for k, ln in enumerate(lines[1:], start=2) if ln.strip() and not ln.startswith("%")]
    if not body:
        raise NetworkFormatError("missing size line", path=path)
    size_line, size = body[0]
    try:
        nrows, ncols, nnz = (int(x) for x in size.split())
    except ValueError:
        raise NetworkFormatError("bad size line", path=path, line=size_line) from None
    if nrows != ncols:
        raise NetworkFormatError(f"matrix is not square ({nrows}x{ncols})", path=path, line=size_line)
    if len(body) - 1 != nnz:
        raise NetworkFormatError(f"expected {nnz} entries, found {len(body) - 1}", path=path)

    entries: dict[tuple[int, int], tuple[float, int]] = {}
    records = []
    for lineno, ln in body[1:]:
        parts = ln.split()
        want = 2 if field_ == "pattern" else 3
        if len(parts) != want:
            raise NetworkFormatError(f"expected {want} fields", path=path, line=lineno)
        try:
            i, j = int(parts[0]) - 1, int(parts[1]) - 1
            w = 1.0 if field_ == "pattern" else float(parts[2])
        except ValueError as exc:
            raise NetworkFormatError(str(exc), path=path, line=lineno) from None
        if i == j and w == 0.0:
            continue
        if symmetry == "general":
            entries[(i, j)] = (w, lineno)
        records.append((lineno, i, j, w))
    if symmetry == "general":
        # directed input is rejected: every (i, j) needs a matching (j, i)
        for (i, j), (w, lineno) in entries.items():
            back = entries.get((j, i))
            if back is None or back[0] != w:
                raise NetworkFormatError(
                    f"asymmetric entry ({i + 1}, {j + 1}); directed networks are not supported",
                    path=path,
                    line=lineno,
                )
    return _build(records, path, nrows, kappa)


def write_edge_list(net: Network, path: str | Path, *, one_based: bool = True) -> None:
    """Write ``net`` as a plain edge list that :func:`load_edge_list` reads back."""
    off = 1 if one_based else 0
    with open(path, "w") as fh:
        fh.write(f"# N={net.n_nodes} S={net.n_edges}\n")
        for i, j, w in net.edges:
            fh.write(f"{i + off} {j + off} {w!r}\n")


def shifted_adjacency(net: Network) -> np.ndarray:
    """``A - kappa * I`` as a read-only symmetric array."""
    At = net.adjacency - net.kappa * np.eye(net.n_nodes)
    return _frozen(At)


def laplacian(net: Network) -> np.ndarray:
    """Graph Laplacian ``D - A``; ``kappa`` plays no role here.

    The diagonal is the negated sum of the off-diagonal row entries, so every
    row sums to exactly zero.
    """
    L = -net.adjacency.copy()
    np.fill_diagonal(L, 0.0)
    np.fill_diagonal(L, -L.sum(axis=1))
    return _frozen(L)
