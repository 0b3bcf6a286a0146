"""Projected extragradient solver for the (SAA) path-flow variational inequality.

Finds ``f`` in ``D`` with ``0 in F(f) + N_D(f)`` where ``F`` is the scenario
average of the path disutility field. UE, LAPUE and MLAPUE differ only in the
penalty configuration (``theta2 = 0``, max penalty, smooth penalty).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .disutility import MAX, DisutilityField, PenaltyConfig, ScenarioSet
from .network import (IncidenceMatrices, Network, build_incidence, project_feasible,
                      uniform_split)

log = logging.getLogger(__name__)

I_PLUS, I_ZERO, I_MINUS = "I+", "I0", "I-"


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    max_iter: int = 200_000
    step0: float = 1.0
    backtrack: float = 0.5
    growth: float = 1.05
    nu: float = 0.9
    redecompose_every: int = 200

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")
        if self.growth < 1:
            raise ValueError("growth factor must be >= 1")
        if not 0 < self.nu < 1:
            raise ValueError("nu must lie in (0, 1)")
        if self.redecompose_every < 0:
            raise ValueError("redecompose_every must be >= 0")


@dataclass
class EquilibriumResult:
    f: np.ndarray
    v: np.ndarray
    expected_disutility: np.ndarray
    z_min: np.ndarray
    residual: float
    iterations: int
    converged: bool
    step: float = float("nan")
    history: list = field(default_factory=list, repr=False)


def natural_residual(f, operator: Callable[[np.ndarray], np.ndarray], network: Network,
                     inc: Optional[IncidenceMatrices] = None, Ff=None) -> float:
    """``||f - P_D(f - g F(f))||_inf`` with the scale-free probe step ``g = 1 / (1 + ||F(f)||_inf)``."""
    inc = inc if inc is not None else build_incidence(network)
    f = np.asarray(f, dtype=float)
    Ff = operator(f) if Ff is None else Ff
    g = 1.0 / (1.0 + np.max(np.abs(Ff)))
    return float(np.max(np.abs(f - project_feasible(f - g * Ff, network, inc))))


def min_od_disutilities(expected_disutility, inc: IncidenceMatrices) -> np.ndarray:
    u = np.asarray(expected_disutility, dtype=float)
    return np.array([u[idx].min() for idx in inc.blocks])


def redecompose(f, Ff, network: Network, inc: IncidenceMatrices) -> Optional[np.ndarray]:
    """Cheapest path decomposition of the arc flows ``Delta f`` under fixed path prices ``Ff``.

    Solves ``min Ff.g`` over ``g >= 0`` with ``Delta g = Delta f`` and
    ``Pi g = q``. When the operator depends on ``f`` only through ``Delta f``
    this leaves ``F`` unchanged and moves mass off dearer paths along the
    null space of ``Delta``, where the extragradient drifts slowly.
    """
    delta, pi = np.asarray(inc.delta), np.asarray(inc.pi)
    lp = linprog(Ff, A_eq=np.vstack([delta, pi]),
                 b_eq=np.concatenate([delta @ f, network.demand]),
                 bounds=(0, None), method="highs")
    if lp.status != 0:
        return None
    return project_feasible(lp.x, network, inc)


def solve_operator(operator: Callable[[np.ndarray], np.ndarray], network: Network,
                   inc: IncidenceMatrices, opts: SolverOptions = SolverOptions(),
                   f0=None, record_history: bool = False,
                   arc_based: bool = False) -> EquilibriumResult:
    """Korpelevich extragradient with Armijo-type step control on ``D``.

    ``arc_based=True`` declares that ``operator(f)`` depends only on
    ``Delta f``; with a rank-deficient ``Delta`` the iterate is then
    periodically re-decomposed (see :func:`redecompose`).
    """
    every = opts.redecompose_every if arc_based else 0
    if every and np.linalg.matrix_rank(np.asarray(inc.delta)) == network.n_paths:
        every = 0
    f = uniform_split(network, inc) if f0 is None else project_feasible(f0, network, inc)
    gamma = opts.step0
    Ff = operator(f)
    if not np.all(np.isfinite(Ff)):
        raise ValueError("operator returned non-finite values; check capacities")
    best_f, best_F = f, Ff
    best_res = res = natural_residual(f, operator, network, inc, Ff)
    history = [res] if record_history else []
    it = 0
    while res > opts.tol and it < opts.max_iter:
        it += 1
        while True:
            y = project_feasible(f - gamma * Ff, network, inc)
            Fy = operator(y)
            if not np.all(np.isfinite(Fy)):
                raise ValueError("operator returned non-finite values; check capacities")
            dy = np.linalg.norm(f - y)
            if dy == 0.0 or gamma * np.linalg.norm(Ff - Fy) <= opts.nu * dy:
                break
            gamma *= opts.backtrack
        f = project_feasible(f - gamma * Fy, network, inc)
        gamma *= opts.growth
        Ff = operator(f)
        res = natural_residual(f, operator, network, inc, Ff)
        if record_history:
            history.append(res)
        if every and it % every == 0 and res > opts.tol:
            g = redecompose(f, Ff, network, inc)
            if g is not None:
                Fg = operator(g)
                rg = natural_residual(g, operator, network, inc, Fg)
                if rg < res:
                    f, Ff, res = g, Fg, rg
        if res < best_res:
            best_f, best_F, best_res = f, Ff, res
    converged = best_res <= opts.tol
    if not converged:
        log.warning("extragradient stopped after %d iterations, residual %.3e", it, best_res)
    return EquilibriumResult(
        f=best_f, v=inc.delta @ best_f, expected_disutility=best_F,
        z_min=min_od_disutilities(best_F, inc), residual=best_res,
        iterations=it, converged=converged, step=gamma, history=history)


def solve(network: Network, scenarios: ScenarioSet, cfg: PenaltyConfig,
          opts: SolverOptions = SolverOptions(), f0=None,
          field_: Optional[DisutilityField] = None) -> EquilibriumResult:
    """Equilibrium of the scenario-averaged disutility over ``D``.

    Starts from the uniform demand split unless ``f0`` is given (it is
    projected onto ``D`` first). Non-convergence is reported through
    ``converged=False`` with the best iterate found.
    """
    fld = field_ if field_ is not None else DisutilityField(network, cfg)
    if scenarios.n_arcs != network.n_arcs:
        raise ValueError(f"scenarios cover {scenarios.n_arcs} arcs, network has {network.n_arcs}")
    return solve_operator(lambda f: fld.saa_disutility(f, scenarios), network, fld.inc,
                          opts, f0, arc_based=True)


def mean_scenario(scenarios: ScenarioSet) -> ScenarioSet:
    """Single deterministic scenario at the mean capacities (used for UE runs)."""
    return ScenarioSet(scenarios.mean_capacity()[None, :], scenarios.seed,
                       f"mean({scenarios.source})")


@dataclass(frozen=True)
class PathRecord:
    path: int
    od: int
    flow: float
    gap: float
    cls: str


@dataclass
class ComplementarityReport:
    records: list[PathRecord]
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations

    def classes(self) -> dict[str, list[int]]:
        out = {I_PLUS: [], I_ZERO: [], I_MINUS: []}
        for rec in self.records:
            out[rec.cls].append(rec.path)
        return out


def classify_path(flow: float, gap: float, tol_f: float, tol_g: float) -> str:
    if flow > tol_f and abs(gap) <= tol_g:
        return I_PLUS
    if flow <= tol_f and gap > tol_g:
        return I_MINUS
    return I_ZERO


def complementarity_report(result: EquilibriumResult, network: Network,
                           inc: IncidenceMatrices, tol_flow: float,
                           tol_gap: float) -> ComplementarityReport:
    """Per-path Wardrop complementarity check at a computed equilibrium.

    ``gap_r = E[u_r] - z_k`` must be nonnegative and ``f_r * gap_r`` must
    vanish (relative to the OD demand).
    """
    u = result.expected_disutility
    z = min_od_disutilities(u, inc)
    records, violations = [], []
    for r, p in enumerate(network.paths):
        k = p.od_index
        gap = float(u[r] - z[k])
        flow = float(result.f[r])
        records.append(PathRecord(r, k, flow, gap, classify_path(flow, gap, tol_flow, tol_gap)))
        q = network.od_pairs[k].demand
        if gap < -tol_gap:
            violations.append(f"path {r}: negative gap {gap:.3e}")
        if flow * gap > tol_gap * max(q, 1.0):
            violations.append(f"path {r}: flow {flow:.6g} on gap {gap:.3e}")
        if flow < -1e-12:
            violations.append(f"path {r}: negative flow {flow:.3e}")
    return ComplementarityReport(records, violations)


@dataclass
class ContinuationPoint:
    t: float
    result: EquilibriumResult
    distance: float


def t_continuation(network: Network, scenarios: ScenarioSet, cfg: PenaltyConfig,
                   t_list: Sequence[float], opts: SolverOptions = SolverOptions()
                   ) -> tuple[EquilibriumResult, list[ContinuationPoint]]:
    """Smooth-penalty equilibria along decreasing ``t`` against the max-penalty one.

    Distances are ``||v_t - v_max||_inf`` in arc-flow space, where the
    equilibrium is unique even when path flows are not.
    """
    ts = [float(t) for t in t_list]
    if any(t <= 0 for t in ts) or any(a < b for a, b in zip(ts, ts[1:])):
        raise ValueError("t_list must be positive and descending")
    ref = solve(network, scenarios, cfg.replace(mode=MAX), opts)
    out = []
    f0 = None
    for t in ts:
        res = solve(network, scenarios, cfg.replace(mode="smooth", t=t), opts, f0=f0)
        f0 = res.f
        out.append(ContinuationPoint(t, res, float(np.max(np.abs(res.v - ref.v)))))
    return ref, out
