"""Statistical-robustness instruments for the equilibrium estimator.

* generalized influence function from the active-set linearisation,
  with a finite-difference oracle on the weighted SAA measure;
* outlier (breakdown) sweeps;
* the distribution-shift experiment comparing Kantorovich distances of
  estimator laws against the distance of the input laws.
"""
from __future__ import annotations

import dataclasses
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .disutility import DisutilityField, PenaltyConfig, ScenarioSet
from .equilibrium import (I_MINUS, I_PLUS, I_ZERO, EquilibriumResult, SolverOptions,
                          classify_path, min_od_disutilities, solve)
from .network import Network
from .stochastics import (CapacityModel, EmpiricalDistribution, contaminate,
                          kantorovich_1d, quantile_grid, sample_scenarios)

log = logging.getLogger(__name__)

MAX_DEGENERATE = 12


class SingularActiveSetError(np.linalg.LinAlgError):
    """The linearised active-set system is singular (equilibrium not strongly regular)."""


class DegenerateActiveSetError(ValueError):
    """More degenerate paths than the branch enumeration is allowed to visit."""


@dataclass(frozen=True)
class ActiveSets:
    i_plus: tuple[int, ...]
    i_zero: tuple[int, ...]
    i_minus: tuple[int, ...]


def active_sets(result: EquilibriumResult, network: Network, tol_f: float,
                tol_g: float, z=None) -> ActiveSets:
    u = result.expected_disutility
    od = network.path_od
    if z is None:
        z = result.z_min
    groups = {I_PLUS: [], I_ZERO: [], I_MINUS: []}
    for r in range(network.n_paths):
        groups[classify_path(result.f[r], u[r] - z[od[r]], tol_f, tol_g)].append(r)
    return ActiveSets(tuple(groups[I_PLUS]), tuple(groups[I_ZERO]), tuple(groups[I_MINUS]))


@dataclass
class GifResult:
    direction: np.ndarray
    multiplier_direction: np.ndarray
    solved_by: str
    sets: Optional[ActiveSets] = None
    rhs: Optional[np.ndarray] = field(default=None, repr=False)
    condition: float = float("nan")


def _active_set_system(J, pi, od, b, active, fixed):
    """Assemble ``J df - Pi^T dz = b`` on active rows, ``df_r = 0`` on fixed rows, ``Pi df = 0``."""
    n, w = J.shape[0], pi.shape[0]
    K = np.zeros((n + w, n + w))
    rhs = np.zeros(n + w)
    for r in active:
        K[r, :n] = J[r]
        K[r, n + od[r]] = -1.0
        rhs[r] = b[r]
    for r in fixed:
        K[r, r] = 1.0
    K[n:, :n] = pi
    return K, rhs


def gif_solve(result: EquilibriumResult, network: Network, scenarios: ScenarioSet,
              cfg: PenaltyConfig, xi_tilde, tol_f: float = 1e-6, tol_g: float = 1e-5,
              field_: Optional[DisutilityField] = None,
              max_degenerate: int = MAX_DEGENERATE, cond_limit: float = 1e12) -> GifResult:
    """Influence of a point-mass contamination at ``xi_tilde`` on the path flows.

    Linearises the equilibrium at ``result.f`` with ``J`` the scenario-mean
    Jacobian and ``b = phi(f*) - u(f*, xi_tilde)``. Used paths satisfy
    ``J df - dz = b``, unused paths with a positive gap keep ``df = 0``, and
    degenerate paths are resolved by enumerating their complementarity
    branches.
    """
    fld = field_ if field_ is not None else DisutilityField(network, cfg)
    f = result.f
    phi = fld.saa_disutility(f, scenarios)
    J = fld.saa_jacobian(f, scenarios)
    b = phi - fld.disutility(f, np.asarray(xi_tilde, dtype=float))
    sets = active_sets(result, network, tol_f, tol_g, min_od_disutilities(phi, fld.inc))
    if len(sets.i_zero) > max_degenerate:
        raise DegenerateActiveSetError(
            f"{len(sets.i_zero)} degenerate paths exceed the cap of {max_degenerate}")
    pi = np.asarray(fld.inc.pi)
    od = network.path_od
    n = network.n_paths
    scale = 1.0 + np.max(np.abs(b))
    worst_cond = 0.0
    for k in range(len(sets.i_zero) + 1):
        for chosen in itertools.combinations(sets.i_zero, k):
            rest = [r for r in sets.i_zero if r not in chosen]
            K, rhs = _active_set_system(J, pi, od, b, sets.i_plus + chosen,
                                        sets.i_minus + tuple(rest))
            cond = np.linalg.cond(K)
            worst_cond = max(worst_cond, cond)
            if not np.isfinite(cond) or cond > cond_limit:
                continue
            sol = np.linalg.solve(K, rhs)
            df, dz = sol[:n], sol[n:]
            slack = J @ df - dz[od] - b
            tol = 1e-9 * scale * max(1.0, np.max(np.abs(sol)))
            if all(df[r] >= -tol for r in chosen) and all(slack[r] >= -tol for r in rest):
                df[list(sets.i_minus) + rest] = 0.0
                return GifResult(df, dz, "active-set-LCP", sets, b, cond)
    raise SingularActiveSetError(
        f"no consistent nonsingular active-set branch (worst condition {worst_cond:.3e}); "
        "the equilibrium is not strongly regular in path space")


def if_finite_difference(network: Network, scenarios: ScenarioSet, xi_tilde, eps: float,
                         cfg: PenaltyConfig, opts: SolverOptions = SolverOptions(),
                         base: Optional[EquilibriumResult] = None) -> np.ndarray:
    """``(f((1 - eps) P_M + eps delta_xi) - f(P_M)) / eps`` via a weighted SAA solve."""
    if not 0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 0.5)")
    fld = DisutilityField(network, cfg)
    if base is None:
        base = solve(network, scenarios, cfg, opts, field_=fld)
    mixed_sc = scenarios.mixed_with(xi_tilde, eps)
    # stay on the base support; re-decomposing could jump to another path split of equal arc flows
    first = dataclasses.replace(opts, redecompose_every=0, max_iter=min(opts.max_iter, 5000))
    mixed = solve(network, mixed_sc, cfg, first, f0=base.f, field_=fld)
    if not mixed.converged:
        mixed = solve(network, mixed_sc, cfg, opts, f0=base.f, field_=fld)
    if not (base.converged and mixed.converged):
        raise RuntimeError("equilibrium solve failed inside the finite-difference oracle")
    return (mixed.f - base.f) / eps


def degraded_scenario(scenarios: ScenarioSet, arc: int, value: float) -> np.ndarray:
    """Mean capacity vector with one arc replaced by ``value``."""
    xi = scenarios.mean_capacity().copy()
    xi[arc] = value
    return xi


@dataclass
class BreakdownRow:
    m: int
    seed: int
    f: np.ndarray
    v: np.ndarray
    z_min: np.ndarray
    residual: float
    converged: bool
    deviation: float


def breakdown_sweep(network: Network, scenarios: ScenarioSet, cfg: PenaltyConfig,
                    arc: int, m_list: Sequence[int], outlier_value: float, seed: int,
                    opts: SolverOptions = SolverOptions()) -> tuple[EquilibriumResult, list[BreakdownRow]]:
    """Solve with ``m`` outliers on ``arc`` for each ``m``; deviations are against the clean solve.

    A bounded feasible set keeps every deviation finite, so the sweep reports
    deviation curves rather than a breakdown fraction.
    """
    fld = DisutilityField(network, cfg)
    clean = solve(network, scenarios, cfg, opts, field_=fld)
    rows = []
    for m in m_list:
        if not 0 <= m <= scenarios.size:
            raise ValueError(f"m={m} outside [0, {scenarios.size}]")
        res = solve(network, contaminate(scenarios, arc, m, outlier_value, seed), cfg, opts,
                    field_=fld)
        rows.append(BreakdownRow(int(m), seed, res.f, res.v, res.z_min, res.residual,
                                 res.converged, float(np.linalg.norm(res.f - clean.f))))
    return clean, rows


@dataclass(frozen=True)
class ShiftExperimentConfig:
    L: int
    M: int
    t: float
    target_arc: int
    perturbed: CapacityModel
    master_seed: int = 0
    L_grid: tuple[int, ...] = ()
    quantile_points: int = 1_000_000

    def __post_init__(self):
        if self.L < 2 or self.M < 1:
            raise ValueError("need L >= 2 and M >= 1")
        grid = tuple(int(x) for x in self.L_grid) or (self.L,)
        if any(not 1 <= x <= self.L for x in grid):
            raise ValueError("L_grid entries must lie in [1, L]")
        object.__setattr__(self, "L_grid", grid)


def replication_seed(master: int, index: int) -> int:
    ss = np.random.SeedSequence(int(master), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


@dataclass
class ShiftResult:
    delta2: float
    L_grid: tuple[int, ...]
    delta1: np.ndarray
    ratio: np.ndarray
    v_base: np.ndarray
    v_perturbed: np.ndarray
    seeds: np.ndarray
    converged: np.ndarray

    @property
    def base_distribution(self) -> EmpiricalDistribution:
        return EmpiricalDistribution(self.v_base)

    @property
    def perturbed_distribution(self) -> EmpiricalDistribution:
        return EmpiricalDistribution(self.v_perturbed)


def _replicate(args):
    network, models, pert_models, cfg, M, arc, seed, opts = args
    fld = DisutilityField(network, cfg)
    p = solve(network, sample_scenarios(models, M, seed, "P"), cfg, opts, field_=fld)
    q = solve(network, sample_scenarios(pert_models, M, seed, "Q"), cfg, opts, field_=fld)
    return p.v[arc], q.v[arc], p.converged and q.converged


def shift_ratio_experiment(exp: ShiftExperimentConfig, network: Network,
                           models: Sequence[CapacityModel], cfg: PenaltyConfig,
                           opts: SolverOptions = SolverOptions(), threads: int = 1) -> ShiftResult:
    """Kantorovich ratio between estimator laws and input laws on one arc.

    Both scenario sets of a replication share its seed, so only the target
    arc's law differs between them (common random numbers).
    """
    cfg = cfg.replace(t=exp.t)
    arc = exp.target_arc
    pert_models = list(models)
    pert_models[arc] = exp.perturbed
    delta2 = kantorovich_1d(
        EmpiricalDistribution(quantile_grid(models[arc], exp.quantile_points)),
        EmpiricalDistribution(quantile_grid(exp.perturbed, exp.quantile_points)))
    seeds = [replication_seed(exp.master_seed, i) for i in range(exp.L)]
    jobs = [(network, list(models), pert_models, cfg, exp.M, arc, s, opts) for s in seeds]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(_replicate, jobs))
    else:
        out = [_replicate(j) for j in jobs]
    vp = np.array([o[0] for o in out])
    vq = np.array([o[1] for o in out])
    ok = np.array([o[2] for o in out])
    if not ok.all():
        log.warning("%d replications did not converge", int((~ok).sum()))
    d1 = np.array([kantorovich_1d(EmpiricalDistribution(vp[:L]), EmpiricalDistribution(vq[:L]))
                   for L in exp.L_grid])
    ratio = d1 / delta2 if delta2 > 0 else np.full(d1.shape, np.nan)
    return ShiftResult(delta2, exp.L_grid, d1, ratio, vp, vq, np.array(seeds, dtype=np.uint64), ok)
