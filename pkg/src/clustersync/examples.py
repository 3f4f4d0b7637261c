"""Reference networks: a 10-node ring cluster fully linked to a 5-node clique."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .netio import Network

# (w_a, w_b, w_c, kappa)
CASES = {
    "fig2-case-a": (2.0, 3.0, 0.1, 12.0),
    "fig2-case-b": (0.1, 3.0, 0.1, 12.0),
    "fig2-case-c": (0.1, 10.0, 0.1, 12.0),
}
FIG4_FIXED = {"w_b": 3.0, "w_c": 0.1, "kappa": 12.0}

N_A, N_B, RING_REACH = 10, 5, 3


@dataclass(frozen=True)
class Example:
    name: str
    network: Network
    params: dict


def ring_clique_network(w_a: float, w_b: float, w_c: float, kappa: float = 0.0) -> Network:
    """Nodes 0-9 form a ring where each node links to its six nearest neighbors
    (weight ``w_a``); nodes 10-14 form a clique (``w_b``); every ring node links to
    every clique node (``w_c``)."""
    edges = []
    for i in range(N_A):
        for r in range(1, RING_REACH + 1):
            j = (i + r) % N_A
            edges.append((min(i, j), max(i, j), w_a))
    for i in range(N_A, N_A + N_B):
        for j in range(i + 1, N_A + N_B):
            edges.append((i, j, w_b))
    for i in range(N_A):
        for j in range(N_A, N_A + N_B):
            edges.append((i, j, w_c))
    return Network(N_A + N_B, tuple(edges), kappa)


_FIG4 = re.compile(r"^fig4\((?:w_a=)?([-+0-9.eE]+)\)$")


def example_names() -> list[str]:
    return list(CASES) + ["fig4(<w_a>)"]


def generate_example(name: str) -> Example:
    """Build a named reference network with its parameters.

    Names: ``fig2-case-a``, ``fig2-case-b``, ``fig2-case-c`` and ``fig4(w_a)``
    (for instance ``fig4(5)`` or ``fig4(w_a=5)``), the latter with
    ``w_b=3, w_c=0.1, kappa=12``.
    """
    if name in CASES:
        w_a, w_b, w_c, kappa = CASES[name]
    else:
        m = _FIG4.match(name.replace(" ", ""))
        if not m:
            raise ValueError(f"unknown example {name!r}; expected one of {example_names()}")
        w_a = float(m.group(1))
        w_b, w_c, kappa = FIG4_FIXED["w_b"], FIG4_FIXED["w_c"], FIG4_FIXED["kappa"]
    params = {"w_a": w_a, "w_b": w_b, "w_c": w_c, "kappa": kappa}
    return Example(name, ring_clique_network(w_a, w_b, w_c, kappa), params)


def bundled_path(name: str) -> str:
    """Path of a bundled data file (``fig2-case-a.edges``, ``fig2-case-a.ini``, ...)."""
    from importlib.resources import files

    p = files("clustersync") / "data" / name
    if not p.is_file():
        raise FileNotFoundError(f"no bundled file {name!r}")
    return str(p)
