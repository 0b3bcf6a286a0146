"""Capacity distributions, seeded scenario sampling and the 1-D Kantorovich metric.

Sampling is inverse-CDF on counter-based Philox streams: the uniform used for
scenario ``i`` on arc ``a`` is the ``i``-th draw of a stream keyed by
``(seed, a)``, so a scenario set is reproducible at any thread count and its
first rows do not depend on ``M``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.special import ndtr, ndtri

from .disutility import ScenarioSet

DEFAULT_FLOOR = 0.01


def _stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def uniforms(seed: int, arc: int, m: int, channel: int = 0) -> np.ndarray:
    return _stream(seed, arc, channel).random(m)


@dataclass(frozen=True)
class Normal:
    mu: float
    sigma: float
    floor_fraction: float = DEFAULT_FLOOR

    def __post_init__(self):
        if not self.mu > 0 or self.sigma < 0:
            raise ValueError("normal capacity needs mu > 0 and sigma >= 0")

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if self.sigma == 0:
            x = np.full(u.shape, float(self.mu))
        else:
            x = self.mu + self.sigma * ndtri(u)
        return np.maximum(x, self.floor_fraction * self.mu)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.sigma == 0:
            return (x >= self.mu).astype(float)
        return ndtr((x - self.mu) / self.sigma)

    def sample(self, seed: int, arc: int, m: int) -> np.ndarray:
        return self.quantile(uniforms(seed, arc, m))


@dataclass(frozen=True)
class PerturbedTail:
    """Normal law whose upper ``1 - q`` tail is replaced by a uniform ramp of slope ``beta``."""

    mu: float
    sigma: float
    q: float = 0.9
    beta: float = 0.002
    floor_fraction: float = DEFAULT_FLOOR

    def __post_init__(self):
        if not self.mu > 0 or not self.sigma > 0:
            raise ValueError("perturbed-tail capacity needs mu > 0 and sigma > 0")
        if not 0 < self.q < 1 or not self.beta > 0:
            raise ValueError("perturbed-tail capacity needs q in (0, 1) and beta > 0")

    @property
    def x0(self) -> float:
        return self.mu + self.sigma * float(ndtri(self.q))

    @property
    def x1(self) -> float:
        return self.x0 + (1.0 - self.q) / self.beta

    def quantile(self, u):
        x = perturbed_quantile(u, self.mu, self.sigma, self.q, self.beta)
        return np.maximum(x, self.floor_fraction * self.mu)

    def cdf(self, x):
        return perturbed_cdf(x, self.mu, self.sigma, self.q, self.beta)

    def sample(self, seed: int, arc: int, m: int) -> np.ndarray:
        return self.quantile(uniforms(seed, arc, m))


@dataclass(frozen=True)
class PointMass:
    value: float

    def quantile(self, u):
        return np.full(np.shape(u), float(self.value))


@dataclass(frozen=True)
class Mixture:
    """``(1 - eps) * base + eps * contaminant``."""

    base: "CapacityModel"
    contaminant: Union[PointMass, Normal]
    eps: float

    def __post_init__(self):
        if not 0 <= self.eps <= 1:
            raise ValueError("mixture weight eps must lie in [0, 1]")

    def sample(self, seed: int, arc: int, m: int) -> np.ndarray:
        pick = uniforms(seed, arc, m, channel=1) < self.eps
        u = uniforms(seed, arc, m)
        return np.where(pick, self.contaminant.quantile(u), self.base.quantile(u))


CapacityModel = Union[Normal, PerturbedTail, Mixture]


def model_from_dict(d: dict) -> CapacityModel:
    """Parse ``{"kind": "normal" | "perturbed_tail" | "mixture", ...}``."""
    kind = d.get("kind", "normal")
    floor = d.get("floor_fraction", DEFAULT_FLOOR)
    if kind == "normal":
        return Normal(float(d["mu"]), float(d.get("sigma", 0.0)), floor)
    if kind == "perturbed_tail":
        return PerturbedTail(float(d["mu"]), float(d["sigma"]), float(d.get("q", 0.9)),
                             float(d.get("beta", 0.002)), floor)
    if kind == "mixture":
        base = model_from_dict(d["base"])
        out = d.get("outlier")
        if isinstance(out, dict):
            cont = Normal(float(out["mu"]), float(out.get("sigma", 0.0)), floor)
        else:
            cont = PointMass(float(out))
        return Mixture(base, cont, float(d["eps"]))
    raise ValueError(f"unknown capacity model kind {kind!r}")


def model_mean(model: CapacityModel) -> float:
    if isinstance(model, Mixture):
        c = model.contaminant
        cm = c.value if isinstance(c, PointMass) else c.mu
        return (1 - model.eps) * model_mean(model.base) + model.eps * cm
    return float(model.mu)


def sample_scenarios(models: Sequence[CapacityModel], m: int, seed: int,
                     source: str = "") -> ScenarioSet:
    if m < 1:
        raise ValueError("need at least one scenario")
    cols = [model.sample(seed, a, m) for a, model in enumerate(models)]
    return ScenarioSet(np.column_stack(cols), seed, source or "sampled")


def perturbed_cdf(x, mu: float, sigma: float, q: float, beta: float):
    if not 0 < q < 1 or not beta > 0:
        raise ValueError("need q in (0, 1) and beta > 0")
    x = np.asarray(x, dtype=float)
    x0 = mu + sigma * ndtri(q)
    x1 = x0 + (1.0 - q) / beta
    out = np.where(x <= x0, ndtr((x - mu) / sigma), q + beta * (x - x0))
    return np.where(x > x1, 1.0, out)


def perturbed_quantile(u, mu: float, sigma: float, q: float, beta: float):
    if not 0 < q < 1 or not beta > 0:
        raise ValueError("need q in (0, 1) and beta > 0")
    u = np.asarray(u, dtype=float)
    if np.any((u < 0) | (u > 1)):
        raise ValueError("quantile level must lie in [0, 1]")
    x0 = mu + sigma * ndtri(q)
    lower = mu + sigma * ndtri(np.minimum(u, q))
    return np.where(u <= q, lower, x0 + (u - q) / beta)


def contaminate(scenarios: ScenarioSet, arc: int, m: int, outlier_value: float,
                seed: int) -> ScenarioSet:
    """Overwrite arc ``arc`` in ``m`` seed-chosen scenarios with ``outlier_value``.

    The chosen rows are a prefix of one seeded permutation, so the outlier
    sets are nested in ``m``.
    """
    M = scenarios.size
    if not 0 <= m <= M:
        raise ValueError(f"cannot contaminate {m} of {M} scenarios")
    caps = scenarios.capacities.copy()
    rows = _stream(seed, 2**31 - 1).permutation(M)[:m]
    caps[rows, arc] = outlier_value
    return ScenarioSet(caps, scenarios.seed, f"{scenarios.source}+{m} outliers",
                       scenarios.weights)


@dataclass(frozen=True)
class EmpiricalDistribution:
    values: np.ndarray

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        if v.size == 0:
            raise ValueError("empirical distribution needs at least one sample")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def cdf(self, x):
        return np.searchsorted(self.values, x, side="right") / self.values.size


def kantorovich_1d(e1: EmpiricalDistribution, e2: EmpiricalDistribution) -> float:
    """Area between the two empirical CDFs over the merged breakpoints."""
    x = np.concatenate([e1.values, e2.values])
    x.sort(kind="mergesort")
    widths = np.diff(x)
    diff = np.abs(e1.cdf(x[:-1]) - e2.cdf(x[:-1]))
    return float(np.sum(diff * widths))


def kantorovich_equal_count(x, y) -> float:
    """``mean |x_(i) - y_(i)|`` over order statistics; samples must have equal size."""
    x = np.sort(np.asarray(x, dtype=float))
    y = np.sort(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise ValueError("equal-count formula needs samples of the same size")
    return float(np.mean(np.abs(x - y)))


def quantile_grid(model: CapacityModel, k: int = 1_000_000) -> np.ndarray:
    """``k`` midpoint quantiles; an equal-weight discretisation of the law."""
    u = (np.arange(k) + 0.5) / k
    return np.asarray(model.quantile(u))
