"""Command-line front end.

    lapue solve --network network1 --mode mlapue --t 0.01 --out result.csv
    lapue shift --network network1 --L 200 --M 1000 --q 0.9 --beta 0.002
    lapue influence --network network1 --xi-tilde 1470,1480,1490 --eps 1e-3
    lapue breakdown --network network1 --m 10:100:10
    lapue continuation --network network1 --t 1,0.1,0.01
    lapue validate --network network1 --reference

Exit codes: 0 success, 2 configuration error, 3 non-convergence.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path as FsPath
from typing import Optional, Sequence

import numpy as np

from .config import ConfigError, ProblemConfig, load_config
from .disutility import MAX, SMOOTH, PenaltyConfig, ScenarioSet
from .equilibrium import (EquilibriumResult, SolverOptions, complementarity_report,
                          mean_scenario, solve, t_continuation)
from .network import build_incidence
from .robustness import (DegenerateActiveSetError, ShiftExperimentConfig, breakdown_sweep,
                         degraded_scenario, gif_solve, if_finite_difference,
                         shift_ratio_experiment)
from .stochastics import PerturbedTail, model_mean, sample_scenarios

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED = 0, 2, 3
OUT_ENV = "LAPUE_OUT_DIR"

log = logging.getLogger("lapue")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: FsPath, header: Sequence[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def output_path(args, default_name: str) -> FsPath:
    out = FsPath(args.out) if args.out else FsPath(default_name)
    env = os.environ.get(OUT_ENV)
    if env and not out.is_absolute():
        out = FsPath(env) / out
    if out.suffix != ".csv":
        out = out / default_name
    return out


def summary_path(main: FsPath) -> FsPath:
    return main.with_name(main.stem + "_summary.csv")


def arc_index(pc: ProblemConfig, arc_id: int) -> int:
    pos = pc.network.arc_position
    if arc_id not in pos:
        raise ConfigError(f"unknown arc id {arc_id}")
    return pos[arc_id]


def penalty_for(pc: ProblemConfig, mode: str, t: Optional[float]) -> PenaltyConfig:
    cfg = pc.penalty
    if t is not None:
        cfg = cfg.replace(t=t)
    if mode == "ue":
        return cfg.replace(theta2=0.0, mode=SMOOTH)
    if mode == "lapue":
        return cfg.replace(mode=MAX)
    return cfg.replace(mode=SMOOTH)


def scenarios_for(pc: ProblemConfig, args, mode: str = "mlapue") -> ScenarioSet:
    seed = args.seed if args.seed is not None else pc.seed
    m = args.samples if getattr(args, "samples", None) else pc.samples
    sc = sample_scenarios(pc.capacity_models, m, seed, pc.network.name)
    return mean_scenario(sc) if mode == "ue" else sc


def solver_options(args, default_tol: float = 1e-8) -> SolverOptions:
    return SolverOptions(tol=args.tol if args.tol is not None else default_tol,
                         max_iter=args.max_iter)


def parse_list(text: str, cast=float) -> list:
    """``"1,0.1,0.01"`` or ``"start:stop:step"`` (inclusive stop)."""
    if ":" in text:
        a, b, c = (cast(x) for x in text.split(":"))
        return list(np.arange(a, b + c / 2, c).astype(type(a)))
    return [cast(x) for x in text.split(",") if x.strip()]


# solve ----------------------------------------------------------------------

def write_result(path: FsPath, result: EquilibriumResult, pc: ProblemConfig, seed: int) -> None:
    od = pc.network.path_od
    gaps = result.expected_disutility - result.z_min[od]
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path_id", "od", "flow", "expected_disutility", "gap"])
        for r in range(pc.network.n_paths):
            w.writerow([r + 1, int(od[r]) + 1, fmt(result.f[r]),
                        fmt(result.expected_disutility[r]), fmt(gaps[r])])
        w.writerow([])
        w.writerow(["key", "od", "value"])
        for k, z in enumerate(result.z_min):
            w.writerow(["z_min", k + 1, fmt(z)])
        w.writerow(["residual", "", fmt(result.residual)])
        w.writerow(["iterations", "", result.iterations])
        w.writerow(["converged", "", fmt(result.converged)])
        w.writerow(["seed", "", seed])


def read_result(path) -> dict:
    """Parse a ``solve`` CSV back into arrays (inverse of :func:`write_result`)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    split = rows.index([])
    paths = rows[1:split]
    out = {
        "path_id": np.array([int(r[0]) for r in paths]),
        "od": np.array([int(r[1]) for r in paths]),
        "flow": np.array([float(r[2]) for r in paths]),
        "expected_disutility": np.array([float(r[3]) for r in paths]),
        "gap": np.array([float(r[4]) for r in paths]),
    }
    z = []
    for key, _od, value in rows[split + 2:]:
        if key == "z_min":
            z.append(float(value))
        elif key == "converged":
            out[key] = value == "true"
        elif key in ("iterations", "seed"):
            out[key] = int(value)
        else:
            out[key] = float(value)
    out["z_min"] = np.array(z)
    return out


def cmd_solve(args, pc: ProblemConfig) -> int:
    cfg = penalty_for(pc, args.mode, args.t)
    sc = scenarios_for(pc, args, args.mode)
    res = solve(pc.network, sc, cfg, solver_options(args))
    out = output_path(args, "result.csv")
    write_result(out, res, pc, sc.seed)
    print(f"mode={args.mode} residual={res.residual:.3e} iterations={res.iterations} "
          f"converged={res.converged}")
    print("z_min = " + ", ".join(f"{z:.6f}" for z in res.z_min))
    if res.converged:
        tol = solver_options(args).tol
        rep = complementarity_report(res, pc.network, build_incidence(pc.network), 1e-6,
                                     100 * tol * (1 + np.max(np.abs(res.expected_disutility))))
        for v in rep.violations:
            print(f"complementarity: {v}")
    print(f"wrote {out}")
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


# continuation ---------------------------------------------------------------

def cmd_continuation(args, pc: ProblemConfig) -> int:
    ts = parse_list(args.t) if args.t else pc.experiments.get("continuation", {}).get(
        "t", [1.0, 0.1, 0.01])
    sc = scenarios_for(pc, args)
    ref, pts = t_continuation(pc.network, sc, pc.penalty, ts, solver_options(args))
    out = output_path(args, "continuation.csv")
    header = ["t", "seed", "distance", "residual", "converged"] + [f"v{a.id}" for a in pc.network.arcs]
    rows = [[p.t, sc.seed, p.distance, p.result.residual, p.result.converged, *p.result.v]
            for p in pts]
    rows.append(["max", sc.seed, 0.0, ref.residual, ref.converged, *ref.v])
    write_csv(out, header, rows)
    for p in pts:
        print(f"t={p.t:g} distance={p.distance:.3e} residual={p.result.residual:.2e}")
    print(f"wrote {out}")
    ok = ref.converged and all(p.result.converged for p in pts)
    return EXIT_OK if ok else EXIT_NONCONVERGED


# influence ------------------------------------------------------------------

def cmd_influence(args, pc: ProblemConfig) -> int:
    ex = pc.experiments.get("influence", {})
    arc_id = args.arc if args.arc is not None else ex.get("arc", pc.network.arcs[0].id)
    a = arc_index(pc, arc_id)
    values = parse_list(args.xi_tilde) if args.xi_tilde else ex.get("xi_tilde")
    if not values:
        raise ConfigError("influence needs --xi-tilde")
    cfg = penalty_for(pc, "mlapue", args.t)
    sc = scenarios_for(pc, args)
    # finite differences divide solver error by eps, so solve tighter than usual
    opts = solver_options(args, default_tol=1e-11)
    base = solve(pc.network, sc, cfg, opts)
    if not base.converged:
        return EXIT_NONCONVERGED
    rows, summary = [], []
    for x in values:
        xi = degraded_scenario(sc, a, x)
        fd = if_finite_difference(pc.network, sc, xi, args.eps, cfg, opts, base=base)
        try:
            gif = gif_solve(base, pc.network, sc, cfg, xi)
            direction, sets, how = gif.direction, gif.sets, gif.solved_by
        except (np.linalg.LinAlgError, DegenerateActiveSetError) as exc:
            log.warning("active-set system unusable at xi=%g (%s); using the oracle", x, exc)
            direction, sets, how = fd, None, "finite-difference"
        for r in range(pc.network.n_paths):
            cls = "" if sets is None else ("I+" if r in sets.i_plus else
                                           "I0" if r in sets.i_zero else "I-")
            rows.append([x, sc.seed, r + 1, direction[r], fd[r], cls, how])
        used = np.abs(direction) > 1e-9
        rel = (float(np.max(np.abs(direction[used] - fd[used]) / np.abs(direction[used])))
               if used.any() else 0.0)
        summary.append([x, sc.seed, args.eps, how, rel])
        print(f"xi_tilde={x:g} gif={np.round(direction, 6)} fd={np.round(fd, 6)} rel.err={rel:.2e}")
    out = output_path(args, "influence.csv")
    write_csv(out, ["xi_tilde", "seed", "path_id", "gif", "finite_difference", "active_set",
                     "solved_by"], rows)
    write_csv(summary_path(out), ["xi_tilde", "seed", "eps", "solved_by", "max_rel_error"], summary)
    print(f"wrote {out}")
    return EXIT_OK


# breakdown ------------------------------------------------------------------

def cmd_breakdown(args, pc: ProblemConfig) -> int:
    ex = pc.experiments.get("breakdown", {})
    arc_id = args.arc if args.arc is not None else ex.get("arc", pc.network.arcs[0].id)
    a = arc_index(pc, arc_id)
    m_list = parse_list(args.m, int) if args.m else ex.get("m", [10, 20, 30])
    model = pc.capacity_models[a]
    outlier = args.outlier if args.outlier is not None else ex.get(
        "outlier", model.mu - 6 * getattr(model, "sigma", 0.0))
    cfg = penalty_for(pc, "mlapue", args.t)
    sc = scenarios_for(pc, args)
    seed = args.seed if args.seed is not None else pc.seed
    clean, rows = breakdown_sweep(pc.network, sc, cfg, a, m_list, outlier, seed,
                                  solver_options(args))
    net = pc.network
    header = (["m", "seed", "outlier", "converged", "residual", "deviation"]
              + [f"f{r + 1}" for r in range(net.n_paths)] + [f"z{k + 1}" for k in range(net.n_od)])
    out = output_path(args, "breakdown.csv")
    write_csv(out, header, [[r.m, r.seed, outlier, r.converged, r.residual, r.deviation,
                             *r.f, *r.z_min] for r in rows])
    write_csv(summary_path(out), ["m", "seed", "deviation", "f1", "z_min_total"],
              [[r.m, r.seed, r.deviation, r.f[0], float(np.sum(r.z_min))] for r in rows])
    for r in rows:
        print(f"m={r.m} f={np.round(r.f, 3)} z={np.round(r.z_min, 4)}")
    print(f"wrote {out}")
    ok = clean.converged and all(r.converged for r in rows)
    return EXIT_OK if ok else EXIT_NONCONVERGED


# shift ----------------------------------------------------------------------

def cmd_shift(args, pc: ProblemConfig) -> int:
    ex = pc.experiments.get("shift", {})
    arc_id = args.arc if args.arc is not None else ex.get("target_arc", pc.network.arcs[0].id)
    a = arc_index(pc, arc_id)
    base = pc.capacity_models[a]
    q = args.q if args.q is not None else ex.get("q", 0.9)
    beta = args.beta if args.beta is not None else ex.get("beta", 0.002)
    L = args.L if args.L is not None else ex.get("L", 200)
    M = args.M if args.M is not None else ex.get("M", pc.samples)
    grid = parse_list(args.L_grid, int) if args.L_grid else [x for x in ex.get("L_grid", [L]) if x <= L]
    if args.identical:
        pert = base
    else:
        pert = PerturbedTail(base.mu, base.sigma, q, beta)
    t = args.t if args.t is not None else pc.penalty.t
    seed = args.seed if args.seed is not None else pc.seed
    exp = ShiftExperimentConfig(L, M, t, a, pert, seed, tuple(grid))
    res = shift_ratio_experiment(exp, pc.network, pc.capacity_models,
                                 penalty_for(pc, "mlapue", t), solver_options(args), args.threads)
    out = output_path(args, "shift.csv")
    write_csv(out, ["replication", "seed", "v_base", "v_perturbed", "converged"],
              [[i + 1, int(s), vb, vp, ok] for i, (s, vb, vp, ok) in
               enumerate(zip(res.seeds, res.v_base, res.v_perturbed, res.converged))])
    write_csv(summary_path(out), ["L", "master_seed", "delta1", "delta2", "ratio"],
              [[L_, seed, d1, res.delta2, r] for L_, d1, r in zip(res.L_grid, res.delta1, res.ratio)])
    print(f"delta2={res.delta2:.6g}")
    for L_, d1, r in zip(res.L_grid, res.delta1, res.ratio):
        print(f"L={L_} delta1={d1:.6g} ratio={r:.6g}")
    print(f"wrote {out}")
    return EXIT_OK if res.converged.all() else EXIT_NONCONVERGED


# validate -------------------------------------------------------------------

def cmd_validate(args, pc: ProblemConfig) -> int:
    net = pc.network
    inc = build_incidence(net)
    print(f"{net.name or 'network'}: {len(net.nodes)} nodes, {net.n_arcs} arcs, "
          f"{net.n_od} OD pairs, {net.n_paths} paths")
    print("paths per OD: " + ", ".join(str(len(b)) for b in inc.blocks))
    print(f"arc-path incidence rank: {np.linalg.matrix_rank(inc.delta)}")
    print("mean capacities: " + ", ".join(f"{model_mean(m):g}" for m in pc.capacity_models))
    if args.reference:
        from .reference import network1_checks
        sc = scenarios_for(pc, args)
        checks = network1_checks(pc, sc, solver_options(args))
        for c in checks:
            print(c.line())
        bad = [c for c in checks if not c.ok]
        if bad:
            print(f"WARNING: {len(bad)} reference value(s) are not reproduced by the configured "
                  "parameters; the arc table and the reference equilibrium disagree.")
        out = output_path(args, "reference.csv")
        write_csv(out, ["check", "reference", "computed", "rel_error", "tolerance", "ok"],
                  [[c.name, " ".join(map(fmt, c.expected)), " ".join(map(fmt, c.computed)),
                    c.rel_error, c.tolerance, c.ok] for c in checks])
        print(f"wrote {out}")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve, "shift": cmd_shift, "influence": cmd_influence,
    "breakdown": cmd_breakdown, "continuation": cmd_continuation, "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--network", required=True,
                        help="config JSON path or bundled name (network1, nguyen_dupuis)")
    common.add_argument("--seed", type=int, default=None, help="master seed (default: config)")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--out", default=None, help=f"output CSV or directory (relative to ${OUT_ENV})")
    common.add_argument("--samples", "-M", dest="samples", type=int, default=None)
    common.add_argument("--tol", type=float, default=None,
                        help="natural-residual tolerance (default 1e-8; 1e-11 for influence)")
    common.add_argument("--max-iter", type=int, default=200_000)
    common.add_argument("--t", default=None, help="smoothing parameter")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="lapue", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common])
    s.add_argument("--mode", choices=["ue", "lapue", "mlapue"], default="mlapue")

    s = sub.add_parser("shift", parents=[common])
    s.add_argument("--L", type=int, default=None)
    s.add_argument("--M", type=int, default=None)
    s.add_argument("--q", type=float, default=None)
    s.add_argument("--beta", type=float, default=None)
    s.add_argument("--arc", type=int, default=None, help="target arc id")
    s.add_argument("--L-grid", default=None)
    s.add_argument("--identical", action="store_true", help="use the base law for Q as well")

    s = sub.add_parser("influence", parents=[common])
    s.add_argument("--xi-tilde", default=None, help="degraded capacity value(s) for the arc")
    s.add_argument("--eps", type=float, default=1e-3)
    s.add_argument("--arc", type=int, default=None)

    s = sub.add_parser("breakdown", parents=[common])
    s.add_argument("--m", default=None, help="outlier counts, e.g. 10:100:10 or 0,10,20")
    s.add_argument("--outlier", type=float, default=None)
    s.add_argument("--arc", type=int, default=None)

    sub.add_parser("continuation", parents=[common])

    s = sub.add_parser("validate", parents=[common])
    s.add_argument("--reference", action="store_true",
                   help="compare against the reference two-OD equilibria")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.t is not None and args.command != "continuation":
            args.t = float(args.t)
        pc = load_config(args.network)
        return COMMANDS[args.command](args, pc)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
