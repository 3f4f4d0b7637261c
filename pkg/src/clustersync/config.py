"""Run configuration: INI file + command-line overrides."""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .dynamics import Numerics
from .partition import EQ_RTOL
from .spectral import DEFAULT_SEED

SECTION = "clustersync"


@dataclass(frozen=True)
class RunConfig:
    input: str | None = None
    format: str = "plain-edge-list"
    one_based: bool = True
    example: str | None = None
    kappa: float | None = None
    target_mu_min: float | None = None
    damping: float = 3.0
    sigma_lo: float = 0.005
    sigma_hi: float = 5.0
    sigma_step: float = 0.005
    dt: float = 1e-3
    horizon: float = 500.0
    transient: float = 100.0
    renorm: float = 1.0
    window_lo: float = 450.0
    window_hi: float = 500.0
    eq_rtol: float = EQ_RTOL
    conv_tol: float = 5e-3
    sync_rtol: float = 1e-3
    delta: float = 1e-4
    refine_tol: float = 1e-3
    unbounded_margin: float = 0.05
    w_values: str = "0.5,1.5,2.5,5"
    boundary_tol: float = 0.0
    workers: int = 1
    backend: str | None = None
    seed: int = DEFAULT_SEED
    out: str = "out"

    def __post_init__(self):
        if not self.sigma_lo < self.sigma_hi:
            raise ValueError(f"sigma grid needs lo < hi, got {self.sigma_lo} >= {self.sigma_hi}")
        if not self.sigma_step > 0 or not self.sigma_lo > 0:
            raise ValueError("sigma_lo and sigma_step must be positive")
        if self.kappa is not None and self.target_mu_min is not None:
            raise ValueError("give either kappa or target_mu_min, not both")
        if self.target_mu_min is not None and self.target_mu_min <= 0:
            raise ValueError("target_mu_min must be positive")
        for name in ("eq_rtol", "conv_tol", "sync_rtol", "refine_tol", "delta", "dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.backend not in (None, "cython", "python"):
            raise ValueError(f"unknown backend {self.backend!r}")
        self.numerics()  # window/horizon consistency

    def sigma_grid(self) -> np.ndarray:
        n = int(np.floor((self.sigma_hi - self.sigma_lo) / self.sigma_step + 1e-9)) + 1
        return np.round(self.sigma_lo + self.sigma_step * np.arange(n), 12)

    def w_grid(self) -> list[float]:
        return [float(x) for x in self.w_values.split(",") if x.strip()]

    def numerics(self) -> Numerics:
        return Numerics(
            dt=self.dt,
            horizon=self.horizon,
            transient=self.transient,
            renorm=self.renorm,
            window=(self.window_lo, self.window_hi),
            conv_tol=self.conv_tol,
            sync_rtol=self.sync_rtol,
            delta=self.delta,
            refine_tol=self.refine_tol,
            unbounded_margin=self.unbounded_margin,
        )

    def as_dict(self) -> dict:
        return asdict(self)


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(name: str, raw: str):
    t = _TYPES[name]
    raw = raw.strip()
    if "None" in t and raw.lower() in ("", "none"):
        return None
    if t.startswith("bool"):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: not a boolean: {raw!r}")
    if t.startswith("int"):
        return int(raw)
    if t.startswith("float"):
        return float(raw)
    return raw


def read_config(path: str | Path) -> dict:
    """Key/value pairs from the ``[clustersync]`` section of an INI file."""
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise FileNotFoundError(path)
    if SECTION not in cp:
        raise ValueError(f"{path}: missing [{SECTION}] section")
    out = {}
    for k, v in cp[SECTION].items():
        if k not in _TYPES:
            raise ValueError(f"{path}: unknown key {k!r}")
        out[k] = _convert(k, v)
    return out


def write_config(values: dict, path: str | Path) -> None:
    cp = configparser.ConfigParser()
    cp[SECTION] = {k: ("none" if v is None else str(v)) for k, v in values.items()}
    with open(path, "w") as fh:
        cp.write(fh)


def make_config(file_values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then file values, then non-``None`` overrides."""
    vals = dict(file_values or {})
    vals.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return RunConfig(**vals)
