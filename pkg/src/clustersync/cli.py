"""Command-line front end: ``clustersync <subcommand> [options]``.

Every output file gets a ``<name>.manifest.json`` sibling recording the
resolved configuration, library versions, compute backend and input checksum.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import platform
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .classify import analyze, eta_b_scan, regime_boundaries, scan_rows_csv
from .config import RunConfig, make_config, read_config, write_config
from .dynamics import OwnerEvaluator, owner_intervals, scan_owners, sweep, van_der_pol
from .examples import example_names, generate_example, ring_clique_network, FIG4_FIXED
from .netio import FORMATS, Network, laplacian, load_edge_list, shifted_adjacency, write_edge_list
from .partition import minimum_balanced_coloring
from .spectral import complete_sync_indices, decompose, detect_intertwined, suggest_kappa

log = logging.getLogger("clustersync")

SUBCOMMANDS = ("coloring", "spectrum", "msf", "intervals", "sweep", "classify", "scan", "complete-sync", "example")


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"{stage}: {type(exc).__name__}: {exc}")
        self.stage = stage
        self.exc = exc


@dataclass
class Loaded:
    net: Network
    checksum: str | None
    source: str


def _stage(name):
    def deco(fn):
        def wrapped(*a, **kw):
            try:
                return fn(*a, **kw)
            except StageError:
                raise
            except Exception as exc:
                raise StageError(name, exc) from exc

        return wrapped

    return deco


@_stage("input")
def load_network(cfg: RunConfig) -> Loaded:
    if cfg.input and cfg.example:
        raise ValueError("give either --input or --example")
    if cfg.example:
        ex = generate_example(cfg.example)
        net, checksum, src = ex.network, None, f"example:{cfg.example}"
    elif cfg.input:
        net = load_edge_list(cfg.input, cfg.format, one_based=cfg.one_based)
        checksum = hashlib.sha256(Path(cfg.input).read_bytes()).hexdigest()
        src = str(cfg.input)
    else:
        raise ValueError("no network given (use --input or --example)")
    if cfg.target_mu_min is not None:
        p = minimum_balanced_coloring(net.adjacency, rtol=cfg.eq_rtol)
        net = net.with_kappa(suggest_kappa(net.adjacency, p, cfg.target_mu_min, seed=cfg.seed))
    elif cfg.kappa is not None:
        net = net.with_kappa(cfg.kappa)
    return Loaded(net, checksum, src)


def _num(x):
    if x is None:
        return None
    x = float(x)
    if np.isnan(x):
        return None
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


class Writer:
    def __init__(self, cfg: RunConfig, command: str, loaded: Loaded | None):
        self.cfg = cfg
        self.command = command
        self.loaded = loaded
        self.dir = Path(cfg.out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.written: list[Path] = []

    def text(self, name: str, content: str) -> Path:
        path = self.dir / name
        path.write_text(content)
        self._manifest(path)
        self.written.append(path)
        return path

    def json(self, name: str, obj) -> Path:
        return self.text(name, json.dumps(obj, indent=2, sort_keys=False) + "\n")

    def _manifest(self, path: Path) -> None:
        import scipy

        man = {
            "command": self.command,
            "output": path.name,
            "output_sha256": hashlib.sha256(path.read_bytes()).hexdigest(),
            "config": self.cfg.as_dict(),
            "input": None
            if self.loaded is None
            else {
                "source": self.loaded.source,
                "sha256": self.loaded.checksum,
                "n_nodes": self.loaded.net.n_nodes,
                "n_edges": self.loaded.net.n_edges,
                "kappa": self.loaded.net.kappa,
            },
            "versions": {
                "clustersync": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
            "backend": self.cfg.backend or _kernels.BACKEND,
        }
        (path.parent / f"{path.name}.manifest.json").write_text(json.dumps(man, indent=2) + "\n")


def _pipeline(loaded: Loaded, cfg: RunConfig):
    At = shifted_adjacency(loaded.net)
    p = _stage("coloring")(minimum_balanced_coloring)(At, rtol=cfg.eq_rtol)
    d = _stage("spectrum")(decompose)(At, p, seed=cfg.seed)
    return At, p, d


def cmd_coloring(cfg: RunConfig, w: Writer, loaded: Loaded) -> dict:
    At = shifted_adjacency(loaded.net)
    p = _stage("coloring")(minimum_balanced_coloring)(At, rtol=cfg.eq_rtol)
    off = 1 if cfg.one_based else 0
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["node", "cluster"])
    for i, c in enumerate(p.cluster_of):
        wr.writerow([i + off, c + off])
    w.text("coloring.csv", buf.getvalue())
    summary = {"N": p.n_nodes, "K": p.K, "K_nontrivial": p.K_nontrivial, "sizes": list(p.sizes)}
    w.json("coloring_summary.json", summary)
    return summary


def cmd_spectrum(cfg: RunConfig, w: Writer, loaded: Loaded) -> dict:
    At, p, d = _pipeline(loaded, cfg)
    out = {
        "kappa": loaded.net.kappa,
        "K": p.K,
        "sizes": list(p.sizes),
        "Q": d.Q.tolist(),
        "lambda_Q": [float(v) for v in d.lambda_Q],
        "lambda_R": {str(k): [float(v) for v in lam] for k, lam in sorted(d.lambda_R.items())},
        "mu_min": {str(k): d.mu_min(k) for k in sorted(d.lambda_R)},
        "mu_max": {str(k): d.mu_max(k) for k in sorted(d.lambda_R)},
        "mu_min_R": d.mu_min_R,
        "blocks": [{"dim": b.dim, "clusters": sorted(b.support), "eigenvalues": [float(v) for v in b.eigenvalues]}
                   for b in d.blocks],
        "intertwined": [sorted(s) for s in detect_intertwined(d)],
        "reconstruction_error": d.reconstruction_error(At),
    }
    w.json("spectrum.json", out)
    return out


def _scan(cfg, loaded):
    At, p, d = _pipeline(loaded, cfg)
    ev = OwnerEvaluator(d, van_der_pol(cfg.damping), cfg.numerics(), cfg.backend)
    sc = _stage("msf")(scan_owners)(d, ev.model, cfg.sigma_grid(), numerics=ev.numerics, seed=cfg.seed,
                                    backend=cfg.backend, evaluator=ev)
    return ev, sc


def cmd_msf(cfg: RunConfig, w: Writer, loaded: Loaded) -> dict:
    ev, sc = _scan(cfg, loaded)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    labels = [o.label for o in ev.owners]
    wr.writerow(["sigma"] + [f"mle_{l}" for l in labels] + [f"converged_{l}" for l in labels])
    conv = sc.converged
    for i, s in enumerate(sc.sigmas):
        row = sc.mle[i]
        wr.writerow([repr(float(s))] + ["nan" if np.isnan(v) else repr(float(v)) for v in row] +
                    [int(c) for c in conv[i]])
    w.text("msf.csv", buf.getvalue())
    return {"owners": labels, "n_sigma": len(sc.sigmas)}


def cmd_intervals(cfg: RunConfig, w: Writer, loaded: Loaded) -> dict:
    ev, sc = _scan(cfg, loaded)
    ivs = _stage("intervals")(owner_intervals)(sc, ev)
    out = {"intervals": [iv.as_dict() for iv in ivs]}
    w.json("intervals.json", out)
    return out


def cmd_sweep(cfg: RunConfig, w: Writer, loaded: Loaded) -> dict:
    At, p, d = _pipeline(loaded, cfg)
    tab = _stage("sweep")(sweep)(At, p, d, van_der_pol(cfg.damping), cfg.sigma_grid(), numerics=cfg.numerics(),
                                 seed=cfg.seed, backend=cfg.backend)
    w.text("sweep.csv", tab.to_csv())
    return {"owners": tab.owner_labels, "n_sigma": len(tab.rows)}


def cmd_classify(cfg: RunConfig, w: Writer, loaded: Loaded) -> dict:
    an = _stage("classify")(analyze)(loaded.net, van_der_pol(cfg.damping), cfg.sigma_grid(),
                                     numerics=cfg.numerics(), seed=cfg.seed, backend=cfg.backend)
    out = an.report.as_dict()
    w.json("classify.json", out)
    return out


def cmd_scan(cfg: RunConfig, w: Writer, loaded: Loaded | None) -> dict:
    gen = lambda wa: ring_clique_network(wa, FIG4_FIXED["w_b"], FIG4_FIXED["w_c"], FIG4_FIXED["kappa"])  # noqa: E731
    model = van_der_pol(cfg.damping)
    grid = cfg.sigma_grid()
    rows = _stage("scan")(eta_b_scan)(gen, cfg.w_grid(), model, grid, numerics=cfg.numerics(), seed=cfg.seed,
                                      workers=cfg.workers, backend=cfg.backend)
    w.text("scan.csv", scan_rows_csv(rows))
    out = {"n_points": len(rows)}
    if cfg.boundary_tol > 0:
        bds = _stage("scan")(regime_boundaries)(gen, rows, model, grid, tol=cfg.boundary_tol,
                                                numerics=cfg.numerics(), seed=cfg.seed, backend=cfg.backend)
        out["boundaries"] = [{"w": b, "left": [l.type, l.k1, l.k2], "right": [r.type, r.k1, r.k2]}
                             for b, l, r in bds]
        w.json("scan_boundaries.json", out)
    return out


def cmd_complete_sync(cfg: RunConfig, w: Writer, loaded: Loaded) -> dict:
    csi = _stage("complete-sync")(complete_sync_indices)(laplacian(loaded.net))
    out = {"alpha_b": csi.alpha_b, "alpha_u": csi.alpha_u, "lambda2": csi.lambda2, "lambdaN": csi.lambdaN}
    w.json("complete_sync.json", out)
    return out


def cmd_example(cfg: RunConfig, w: Writer, name: str) -> dict:
    ex = _stage("example")(generate_example)(name)
    safe = name.replace("(", "-").replace(")", "").replace("=", "")
    edges = w.dir / f"{safe}.edges"
    write_edge_list(ex.network, edges, one_based=True)
    w._manifest(edges)
    ini = w.dir / f"{safe}.ini"
    write_config({"input": edges.name, "format": "plain-edge-list", "one_based": True, "kappa": ex.params["kappa"]}, ini)
    w._manifest(ini)
    return {"edges": str(edges), "config": str(ini), "params": ex.params}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="clustersync", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, network=True):
        sp.add_argument("--config", help="INI file with a [clustersync] section")
        sp.add_argument("--out", help="output directory (default: out)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--eq-rtol", type=float, dest="eq_rtol")
        sp.add_argument("-v", "--verbose", action="count", default=0)
        if network:
            sp.add_argument("--input", help="network file")
            sp.add_argument("--example", help=f"built-in network: {', '.join(example_names())}")
            sp.add_argument("--format", choices=FORMATS)
            sp.add_argument("--one-based", dest="one_based", action="store_true", default=None,
                            help="node indices in the input start at 1 (default)")
            sp.add_argument("--zero-based", dest="one_based", action="store_false")
            g = sp.add_mutually_exclusive_group()
            g.add_argument("--kappa", type=float)
            g.add_argument("--target-mu-min", type=float, dest="target_mu_min")

    def dyn(sp):
        sp.add_argument("--damping", type=float)
        sp.add_argument("--sigma-lo", type=float, dest="sigma_lo")
        sp.add_argument("--sigma-hi", type=float, dest="sigma_hi")
        sp.add_argument("--sigma-step", type=float, dest="sigma_step")
        sp.add_argument("--dt", type=float)
        sp.add_argument("--horizon", type=float)
        sp.add_argument("--transient", type=float)
        sp.add_argument("--window-lo", type=float, dest="window_lo")
        sp.add_argument("--window-hi", type=float, dest="window_hi")
        sp.add_argument("--conv-tol", type=float, dest="conv_tol")
        sp.add_argument("--sync-rtol", type=float, dest="sync_rtol")
        sp.add_argument("--refine-tol", type=float, dest="refine_tol")
        sp.add_argument("--backend", choices=("cython", "python"))

    helps = {
        "coloring": "minimum balanced coloring as node,cluster CSV",
        "spectrum": "quotient and transverse spectra, blocks, intertwined clusters (JSON)",
        "msf": "largest transverse MLE per cluster/block along the sigma grid (CSV)",
        "intervals": "stable sigma-interval per cluster/block (JSON)",
        "sweep": "sync errors and MLEs along the sigma grid (CSV)",
        "classify": "CS type, network interval and synchronizability indices (JSON)",
        "scan": "type and eta_b across w_a for the ring/clique family (CSV)",
        "complete-sync": "eigenratio alpha_b and algebraic connectivity alpha_u (JSON)",
        "example": "write a built-in network as an edge list plus config",
    }
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, help=helps[name])
        if name == "example":
            sp.add_argument("name", help=", ".join(example_names()))
            common(sp, network=False)
            continue
        common(sp, network=name != "scan")
        if name in ("msf", "intervals", "sweep", "classify", "scan"):
            dyn(sp)
        if name == "scan":
            sp.add_argument("--w-values", dest="w_values", help="comma separated w_a values")
            sp.add_argument("--boundary-tol", type=float, dest="boundary_tol",
                            help="bisect regime boundaries in w_a to this width (0 = off)")
            sp.add_argument("--workers", type=int)
    return ap


HANDLERS = {
    "coloring": cmd_coloring,
    "spectrum": cmd_spectrum,
    "msf": cmd_msf,
    "intervals": cmd_intervals,
    "sweep": cmd_sweep,
    "classify": cmd_classify,
    "scan": cmd_scan,
    "complete-sync": cmd_complete_sync,
}

_NON_CONFIG = {"command", "config", "verbose", "name"}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        file_vals = {}
        if args.config:
            file_vals = read_config(args.config)
            base = Path(args.config).parent
            if file_vals.get("input") and not Path(file_vals["input"]).is_absolute():
                file_vals["input"] = str(base / file_vals["input"])
        over = {k: v for k, v in vars(args).items() if k not in _NON_CONFIG}
        if over.get("kappa") is not None or over.get("target_mu_min") is not None:
            file_vals.pop("kappa", None)
            file_vals.pop("target_mu_min", None)
        if over.get("input") is not None or over.get("example") is not None:
            file_vals.pop("input", None)
            file_vals.pop("example", None)
        cfg = make_config(file_vals, over)
    except (ValueError, FileNotFoundError, TypeError) as exc:
        print(json.dumps({"error": {"stage": "config", "message": str(exc)}}), file=sys.stderr)
        return 2
    try:
        if args.command == "example":
            w = Writer(cfg, args.command, None)
            res = cmd_example(cfg, w, args.name)
        else:
            loaded = None if args.command == "scan" else load_network(cfg)
            w = Writer(cfg, args.command, loaded)
            res = HANDLERS[args.command](cfg, w, loaded)
    except StageError as exc:
        print(json.dumps({"error": {"stage": exc.stage, "type": type(exc.exc).__name__, "message": str(exc.exc)}}),
              file=sys.stderr)
        return 2 if exc.stage in ("input", "config") else 3
    print(json.dumps(res, indent=2, default=_num))
    return 0


if __name__ == "__main__":
    sys.exit(main())
