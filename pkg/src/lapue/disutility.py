"""GBPR travel times under random capacity, lateness penalties and the path disutility field.

Shapes: ``f`` is (N,), arc flows ``v`` are (A,), a scenario set holds an
(M, A) capacity matrix. All SAA averages are taken over the scenario axis
with optional weights (uniform by default).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .network import IncidenceMatrices, Network, build_incidence

SMOOTH = "smooth"
MAX = "max"


@dataclass(frozen=True)
class GbprParams:
    t0: np.ndarray
    b: np.ndarray
    n: np.ndarray

    def __post_init__(self):
        for name in ("t0", "b", "n"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.t0 <= 0) or np.any(self.b < 0) or np.any(self.n < 1):
            raise ValueError("GBPR parameters need t0 > 0, b >= 0, n >= 1")

    @classmethod
    def from_network(cls, network: Network) -> "GbprParams":
        return cls(np.array([a.t0 for a in network.arcs]),
                   np.array([a.b for a in network.arcs]),
                   np.array([a.n for a in network.arcs]))


@dataclass(frozen=True)
class PenaltyConfig:
    theta0: float = 0.0
    theta1: float = 1.0
    theta2: float = 0.0
    tau: tuple[float, ...] = ()
    t: float = 0.01
    mode: str = SMOOTH
    d: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "tau", tuple(float(x) for x in self.tau))
        if self.d is not None:
            object.__setattr__(self, "d", tuple(float(x) for x in self.d))
        if self.mode not in (SMOOTH, MAX):
            raise ValueError(f"unknown penalty mode {self.mode!r}")
        if min(self.theta0, self.theta1, self.theta2) < 0:
            raise ValueError("theta weights must be nonnegative")
        if self.theta1 <= 0:
            raise ValueError("theta1 (value of time) must be positive")
        if self.mode == SMOOTH and not self.t > 0:
            raise ValueError("smoothing parameter t must be positive")

    def replace(self, **changes) -> "PenaltyConfig":
        from dataclasses import replace
        return replace(self, **changes)


@dataclass(frozen=True)
class ScenarioSet:
    """M capacity scenarios (rows) over A arcs, with optional probability weights."""

    capacities: np.ndarray
    seed: int = 0
    source: str = ""
    weights: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        caps = np.array(self.capacities, dtype=float, ndmin=2)
        if caps.size == 0:
            raise ValueError("scenario set is empty")
        if not np.all(caps > 0):
            raise ValueError("capacities must be positive")
        caps.setflags(write=False)
        object.__setattr__(self, "capacities", caps)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (caps.shape[0],) or np.any(w < 0) or not np.isclose(w.sum(), 1.0):
                raise ValueError("weights must be a nonnegative probability vector of length M")
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.capacities.shape[0]

    @property
    def n_arcs(self) -> int:
        return self.capacities.shape[1]

    def mean_capacity(self) -> np.ndarray:
        if self.weights is None:
            return self.capacities.mean(axis=0)
        return self.weights @ self.capacities

    def concat(self, other: "ScenarioSet") -> "ScenarioSet":
        """Pool two uniform sets; the result is the empirical measure of all rows."""
        return ScenarioSet(np.vstack([self.capacities, other.capacities]),
                           self.seed, f"{self.source}+{other.source}")

    def mixed_with(self, xi: np.ndarray, eps: float) -> "ScenarioSet":
        """``(1 - eps) * self + eps * delta_xi`` as a weighted scenario set."""
        base = self.weights if self.weights is not None else np.full(self.size, 1.0 / self.size)
        caps = np.vstack([self.capacities, np.asarray(xi, dtype=float)[None, :]])
        w = np.concatenate([(1.0 - eps) * base, [eps]])
        return ScenarioSet(caps, self.seed, f"{self.source}+point-mass", w)


def gbpr_time(v, cap, t0, b, n):
    """``t0 * (1 + b * (v / cap)**n)``; broadcasts."""
    cap = np.asarray(cap, dtype=float)
    if np.any(cap <= 0):
        raise ValueError("capacity must be positive")
    return t0 * (1.0 + b * (np.asarray(v, dtype=float) / cap) ** n)


def arc_times(v, caps, params: GbprParams) -> np.ndarray:
    """Arc travel times; ``caps`` may be one scenario (A,) or a stack (M, A)."""
    return gbpr_time(np.maximum(v, 0.0), caps, params.t0, params.b, params.n)


def arc_time_derivative(v, caps, params: GbprParams) -> np.ndarray:
    """Diagonal of the arc-time Jacobian, ``t0 n b v**(n-1) / cap**n``."""
    caps = np.asarray(caps, dtype=float)
    if np.any(caps <= 0):
        raise ValueError("capacity must be positive")
    v = np.maximum(np.asarray(v, dtype=float), 0.0)
    return params.t0 * params.n * params.b * v ** (params.n - 1.0) / caps ** params.n


def arc_time_jacobian(v, caps, params: GbprParams) -> np.ndarray:
    return np.diag(arc_time_derivative(v, caps, params))


def penalty(z, t: float):
    """Smoothed lateness penalty: 0 below -t, quadratic on [-t, t], identity above t."""
    if not t > 0:
        raise ValueError("smoothing parameter t must be positive")
    z = np.asarray(z, dtype=float)
    out = np.where(z > t, z, (z + t) ** 2 / (4.0 * t))
    return np.where(z < -t, 0.0, out)


def penalty_deriv(z, t: float):
    if not t > 0:
        raise ValueError("smoothing parameter t must be positive")
    z = np.asarray(z, dtype=float)
    out = np.where(z > t, 1.0, (z + t) / (2.0 * t))
    return np.where(z < -t, 0.0, out)


def max_penalty(z):
    return np.maximum(np.asarray(z, dtype=float), 0.0)


def max_penalty_deriv(z):
    # lower selection of the subdifferential at the kink
    return (np.asarray(z, dtype=float) > 0).astype(float)


class DisutilityField:
    """Path disutility map of one network and penalty configuration.

    Precomputes the incidence matrices and the path-level acceptable-time
    vector so that repeated evaluations inside the solver are cheap.
    """

    def __init__(self, network: Network, cfg: PenaltyConfig,
                 inc: Optional[IncidenceMatrices] = None):
        self.network = network
        self.cfg = cfg
        self.inc = inc if inc is not None else build_incidence(network)
        self.params = GbprParams.from_network(network)
        self.delta = np.asarray(self.inc.delta)
        od = network.path_od
        if cfg.theta2 > 0 or cfg.tau:
            if len(cfg.tau) != network.n_od:
                raise ValueError(f"tau needs {network.n_od} entries, got {len(cfg.tau)}")
            self.tau_path = np.asarray(cfg.tau)[od]
        else:
            self.tau_path = np.zeros(network.n_paths)
        if cfg.d is None:
            self.const = np.zeros(network.n_paths)
        else:
            if len(cfg.d) != network.n_paths:
                raise ValueError(f"d needs {network.n_paths} entries, got {len(cfg.d)}")
            self.const = cfg.theta0 * np.asarray(cfg.d)

    def path_costs(self, f, caps) -> np.ndarray:
        """``C = Delta^T T(Delta f, xi)``; (N,) for one scenario, (M, N) for a stack."""
        v = self.delta @ np.asarray(f, dtype=float)
        return arc_times(v, caps, self.params) @ self.delta

    def _penalty(self, z):
        if self.cfg.mode == SMOOTH:
            return penalty(z, self.cfg.t)
        return max_penalty(z)

    def _penalty_deriv(self, z):
        if self.cfg.mode == SMOOTH:
            return penalty_deriv(z, self.cfg.t)
        return max_penalty_deriv(z)

    def disutility(self, f, caps) -> np.ndarray:
        c = self.path_costs(f, caps)
        u = self.const + self.cfg.theta1 * c
        if self.cfg.theta2 > 0:
            u = u + self.cfg.theta2 * self._penalty(c - self.tau_path)
        return u

    def coefficients(self, f, caps) -> np.ndarray:
        """Row scalings ``b_r = theta1 + theta2 * h'(C_r - tau_k)``."""
        c = self.path_costs(f, caps)
        return self.cfg.theta1 + self.cfg.theta2 * self._penalty_deriv(c - self.tau_path)

    def jacobian(self, f, caps) -> np.ndarray:
        """``diag(b) Delta^T diag(T') Delta`` for a single scenario row."""
        caps = np.asarray(caps, dtype=float)
        v = self.delta @ np.asarray(f, dtype=float)
        tp = arc_time_derivative(v, caps, self.params)
        coef = self.coefficients(f, caps)
        return coef[:, None] * (self.delta.T * tp) @ self.delta

    # SAA versions -----------------------------------------------------------

    def saa_disutility(self, f, scenarios: ScenarioSet) -> np.ndarray:
        u = self.disutility(f, scenarios.capacities)
        if scenarios.weights is None:
            return u.mean(axis=0)
        return scenarios.weights @ u

    def saa_jacobian(self, f, scenarios: ScenarioSet) -> np.ndarray:
        caps = scenarios.capacities
        v = self.delta @ np.asarray(f, dtype=float)
        tp = arc_time_derivative(v, caps, self.params)            # (M, A)
        coef = self.coefficients(f, caps)                          # (M, N)
        w = (np.full(len(caps), 1.0 / len(caps)) if scenarios.weights is None
             else scenarios.weights)
        # sum_s w_s b_s[r] sum_a delta[a, r] T'_s[a] delta[a, c]
        inner = np.einsum("s,sr,sa->ra", w, coef, tp) * self.delta.T
        return inner @ self.delta


def path_costs(f, caps, network: Network) -> np.ndarray:
    return DisutilityField(network, PenaltyConfig()).path_costs(f, caps)


def disutility(f, caps, network: Network, cfg: PenaltyConfig) -> np.ndarray:
    return DisutilityField(network, cfg).disutility(f, caps)


def disutility_jacobian(f, caps, network: Network, cfg: PenaltyConfig) -> np.ndarray:
    return DisutilityField(network, cfg).jacobian(f, caps)


def saa_disutility(f, scenarios: ScenarioSet, network: Network, cfg: PenaltyConfig) -> np.ndarray:
    if scenarios.size < 1:
        raise ValueError("empty scenario set")
    return DisutilityField(network, cfg).saa_disutility(f, scenarios)


def saa_jacobian(f, scenarios: ScenarioSet, network: Network, cfg: PenaltyConfig) -> np.ndarray:
    return DisutilityField(network, cfg).saa_jacobian(f, scenarios)
