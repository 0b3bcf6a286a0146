"""Network topology, incidence matrices and the demand-feasible path-flow set.

The feasible set is ``D = {f >= 0 : Pi f = q}``. Because every path belongs to
exactly one OD pair, ``D`` is a product of scaled simplices and the Euclidean
projection onto it decomposes into one simplex projection per OD pair.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class NetworkError(ValueError):
    """Raised for malformed topologies, paths or demands."""


@dataclass(frozen=True)
class Arc:
    id: int
    tail: int
    head: int
    t0: float = 1.0
    b: float = 0.15
    n: float = 4.0


@dataclass(frozen=True)
class ODPair:
    origin: int
    destination: int
    demand: float


@dataclass(frozen=True)
class Path:
    arc_ids: tuple[int, ...]
    od_index: int

    def __post_init__(self):
        object.__setattr__(self, "arc_ids", tuple(int(a) for a in self.arc_ids))
        if not self.arc_ids:
            raise NetworkError("path must contain at least one arc")
        if len(set(self.arc_ids)) != len(self.arc_ids):
            raise NetworkError(f"path {self.arc_ids} repeats an arc")


@dataclass(frozen=True)
class Network:
    nodes: tuple[int, ...]
    arcs: tuple[Arc, ...]
    od_pairs: tuple[ODPair, ...]
    paths: tuple[Path, ...] = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "arcs", tuple(self.arcs))
        object.__setattr__(self, "od_pairs", tuple(self.od_pairs))
        object.__setattr__(self, "paths", tuple(self.paths))
        ids = [a.id for a in self.arcs]
        if len(set(ids)) != len(ids):
            raise NetworkError("duplicate arc ids")
        node_set = set(self.nodes)
        for a in self.arcs:
            if a.tail not in node_set or a.head not in node_set:
                raise NetworkError(f"arc {a.id} references an unknown node")
        for k, od in enumerate(self.od_pairs):
            if not np.isfinite(od.demand) or od.demand < 0:
                raise NetworkError(f"OD pair {k} has invalid demand {od.demand}")
        if self.paths:
            _check_paths(self)

    @property
    def n_arcs(self) -> int:
        return len(self.arcs)

    @property
    def n_paths(self) -> int:
        return len(self.paths)

    @property
    def n_od(self) -> int:
        return len(self.od_pairs)

    @property
    def demand(self) -> np.ndarray:
        return np.array([od.demand for od in self.od_pairs], dtype=float)

    @property
    def arc_position(self) -> dict[int, int]:
        """Map arc id -> row index in the incidence matrix."""
        return {a.id: i for i, a in enumerate(self.arcs)}

    @property
    def path_od(self) -> np.ndarray:
        return np.array([p.od_index for p in self.paths], dtype=int)

    def with_paths(self, paths: Sequence[Path]) -> "Network":
        return Network(self.nodes, self.arcs, self.od_pairs, tuple(paths), self.name)

    def with_demand(self, demand: Sequence[float]) -> "Network":
        ods = tuple(ODPair(od.origin, od.destination, float(q))
                    for od, q in zip(self.od_pairs, demand))
        return Network(self.nodes, self.arcs, ods, self.paths, self.name)


def _check_paths(net: Network) -> None:
    by_id = {a.id: a for a in net.arcs}
    counts = [0] * net.n_od
    for p in net.paths:
        if not 0 <= p.od_index < net.n_od:
            raise NetworkError(f"path {p.arc_ids} has OD index {p.od_index} out of range")
        od = net.od_pairs[p.od_index]
        node = od.origin
        for aid in p.arc_ids:
            if aid not in by_id:
                raise NetworkError(f"path {p.arc_ids} references unknown arc {aid}")
            arc = by_id[aid]
            if arc.tail != node:
                raise NetworkError(f"path {p.arc_ids} is disconnected at arc {aid}")
            node = arc.head
        if node != od.destination:
            raise NetworkError(f"path {p.arc_ids} does not end at node {od.destination}")
        counts[p.od_index] += 1
    empty = [k for k, c in enumerate(counts) if c == 0]
    if empty:
        raise NetworkError(f"OD pairs {empty} have no path")


@dataclass(frozen=True)
class IncidenceMatrices:
    """Arc-path matrix ``delta`` (A x N) and OD-path matrix ``pi`` (W x N)."""

    delta: np.ndarray
    pi: np.ndarray
    blocks: tuple[np.ndarray, ...] = field(default=(), repr=False)

    def __post_init__(self):
        self.delta.setflags(write=False)
        self.pi.setflags(write=False)
        if not self.blocks:
            blocks = tuple(np.flatnonzero(row) for row in self.pi)
            object.__setattr__(self, "blocks", blocks)


def build_incidence(network: Network) -> IncidenceMatrices:
    if not network.paths:
        raise NetworkError("network has no paths; enumerate or declare them first")
    _check_paths(network)
    pos = network.arc_position
    delta = np.zeros((network.n_arcs, network.n_paths))
    pi = np.zeros((network.n_od, network.n_paths))
    for r, p in enumerate(network.paths):
        for aid in p.arc_ids:
            delta[pos[aid], r] = 1.0
        pi[p.od_index, r] = 1.0
    return IncidenceMatrices(delta, pi)


def path_to_arc_flows(f, inc: IncidenceMatrices) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (inc.delta.shape[1],):
        raise ValueError(f"expected {inc.delta.shape[1]} path flows, got shape {f.shape}")
    return inc.delta @ f


def project_simplex(x, total: float) -> np.ndarray:
    """Euclidean projection of ``x`` onto ``{y >= 0, sum(y) = total}``.

    Sort-and-threshold: with ``u`` sorted descending, the threshold is
    ``(cumsum(u)[k] - total) / (k + 1)`` at the largest ``k`` where it stays
    below ``u[k]``.
    """
    if total < 0:
        raise ValueError(f"simplex total must be nonnegative, got {total}")
    x = np.asarray(x, dtype=float)
    if total == 0:
        return np.zeros_like(x)
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - total
    ks = np.arange(1, x.size + 1)
    hit = np.nonzero(u * ks > css)[0]
    k = hit[-1] if hit.size else 0          # k = 0 always qualifies in exact arithmetic
    theta = css[k] / (k + 1)
    y = np.maximum(x - theta, 0.0)
    # absorb rounding so that the block sums to total exactly (up to ulp)
    j = int(np.argmax(y)) if y.sum() > 0 else int(np.argmax(x))
    y[j] += total - y.sum()
    return y


def project_feasible(x, network: Network, inc: IncidenceMatrices) -> np.ndarray:
    """Euclidean projection of ``x`` onto ``D``, one scaled simplex per OD pair."""
    x = np.asarray(x, dtype=float)
    if x.shape != (network.n_paths,):
        raise ValueError(f"expected {network.n_paths} entries, got shape {x.shape}")
    out = np.empty_like(x)
    for k, idx in enumerate(inc.blocks):
        out[idx] = project_simplex(x[idx], network.od_pairs[k].demand)
    return out


def uniform_split(network: Network, inc: IncidenceMatrices) -> np.ndarray:
    f = np.empty(network.n_paths)
    for k, idx in enumerate(inc.blocks):
        f[idx] = network.od_pairs[k].demand / idx.size
    return f


def enumerate_simple_paths(network: Network, od_index: int,
                           max_paths: int = 1000) -> list[Path]:
    """All simple directed paths of one OD pair, ordered lexicographically by arc ids.

    Raises ``NetworkError`` if more than ``max_paths`` paths exist; explicit
    path lists should be supplied for such networks.
    """
    od = network.od_pairs[od_index]
    if od.origin == od.destination:
        return []
    out_arcs: dict[int, list[Arc]] = {}
    for a in sorted(network.arcs, key=lambda a: a.id):
        out_arcs.setdefault(a.tail, []).append(a)

    found: list[tuple[int, ...]] = []

    def walk(node, visited, arcs):
        if node == od.destination:
            found.append(tuple(arcs))
            if len(found) > max_paths:
                raise NetworkError(
                    f"OD pair {od_index} has more than {max_paths} simple paths")
            return
        for a in out_arcs.get(node, ()):
            if a.head not in visited:
                visited.add(a.head)
                arcs.append(a.id)
                walk(a.head, visited, arcs)
                arcs.pop()
                visited.discard(a.head)

    walk(od.origin, {od.origin}, [])
    found.sort()
    return [Path(p, od_index) for p in found]


def enumerate_all_paths(network: Network, max_paths: int = 1000) -> Network:
    paths = []
    for k in range(network.n_od):
        paths.extend(enumerate_simple_paths(network, k, max_paths))
    return network.with_paths(paths)
