"""Acceptance gate: one PASS/FAIL line per criterion.

Run directly (``python tests/test_acceptance.py``) or through pytest; under
pytest the lines are collected and printed in the terminal summary.
"""
import os
import sys
import time

import numpy as np
import pytest
from scipy.optimize import linprog

sys.path.insert(0, os.path.dirname(__file__))

from lapue import load_config
from lapue.disutility import DisutilityField, ScenarioSet, gbpr_time, penalty, penalty_deriv
from lapue.equilibrium import (SolverOptions, complementarity_report, mean_scenario, solve,
                               t_continuation)
from lapue.network import build_incidence
from lapue.reference import network1_checks
from lapue.robustness import (ShiftExperimentConfig, breakdown_sweep, degraded_scenario,
                              gif_solve, if_finite_difference, shift_ratio_experiment)
from lapue.stochastics import (EmpiricalDistribution, PerturbedTail, kantorovich_1d,
                               kantorovich_equal_count, sample_scenarios)

RESULTS = []


def report(n, ok, detail, elapsed, limit):
    within = elapsed <= limit
    tag = "PASS" if ok and within else "FAIL"
    line = f"[{tag}] criterion {n}: {detail} ({elapsed:.2f}s, limit {limit:g}s)"
    RESULTS.append(line)
    print(line)
    return ok and within


def setup(name):
    pc = load_config(name)
    return pc, sample_scenarios(pc.capacity_models, 1000, pc.seed)


def criterion_1():
    t0 = time.perf_counter()
    worst_jump, worst_lo, worst_hi = 0.0, 0.0, -np.inf
    for t in (0.01, 0.1, 1.0):
        for k in (-t, t):
            left = penalty_deriv(np.nextafter(k, -np.inf), t)
            right = penalty_deriv(np.nextafter(k, np.inf), t)
            worst_jump = max(worst_jump, abs(float(right - left)))
        z = np.linspace(-5 * t, 5 * t, 10_000)
        gap = penalty(z, t) - np.maximum(z, 0.0)
        worst_lo = min(worst_lo, float(gap.min()))
        worst_hi = max(worst_hi, float((gap - t / 4).max()))
    ok = worst_jump <= 1e-12 and worst_lo >= 0.0 and worst_hi <= 0.0
    return report(1, ok, f"derivative jump {worst_jump:.1e}, min gap {worst_lo:.1e}, "
                  f"max gap - t/4 {worst_hi:.1e}", time.perf_counter() - t0, 1.0)


def criterion_2():
    t0 = time.perf_counter()
    pc = load_config("network1")
    net = pc.network
    sc = sample_scenarios(pc.capacity_models, 20, pc.seed)
    fld = DisutilityField(net, pc.penalty)
    inc = fld.inc
    rng = np.random.default_rng(2)
    worst, checked, skipped, h = 0.0, 0, 0, 1e-3
    while checked < 100:
        f = np.zeros(net.n_paths)
        for idx, q in zip(inc.blocks, net.demand):
            f[idx] = rng.dirichlet(np.ones(len(idx))) * q
        c = fld.path_costs(f, sc.capacities) - fld.tau_path
        J = fld.saa_jacobian(f, sc)
        band = 1e-6 + 10 * np.abs(J).sum(axis=1).max() * h
        if np.any(np.abs(np.abs(c) - pc.penalty.t) < band):
            skipped += 1
            continue
        fd = np.column_stack([(fld.saa_disutility(f + h * e, sc) - fld.saa_disutility(f - h * e, sc))
                              / (2 * h) for e in np.eye(net.n_paths)])
        worst = max(worst, float(np.max(np.abs(J - fd)) / np.max(np.abs(J))))
        checked += 1
    return report(2, worst <= 1e-5, f"max relative error {worst:.2e} at {checked} points "
                  f"({skipped} in kink bands skipped)", time.perf_counter() - t0, 10.0)


def criterion_3():
    ok_all = True
    for name in ("network1", "nguyen_dupuis"):
        t0 = time.perf_counter()
        pc, sc = setup(name)
        net = pc.network
        inc = build_incidence(net)
        a = solve(net, sc, pc.penalty)
        f0 = np.zeros(net.n_paths)
        for idx, q in zip(inc.blocks, net.demand):
            f0[idx[0]] = q
        b = solve(net, sc, pc.penalty, f0=f0)
        feas = float(np.max(np.abs(inc.pi @ a.f - net.demand)))
        tol_gap = 1e-4 * (1 + np.max(np.abs(a.expected_disutility)))
        rep = complementarity_report(a, net, inc, 1e-6, tol_gap)
        used_gap = max(abs(r.gap) for r in rep.records if r.flow > 1e-6)
        arc_dev = float(np.max(np.abs(a.v - b.v)) / np.max(np.abs(a.v)))
        ok = (a.converged and b.converged and a.residual <= 1e-8 and feas <= 1e-10
              and rep.ok and used_gap <= tol_gap and arc_dev <= 1e-4)
        ok_all &= report(3, ok, f"{name}: residual {a.residual:.1e}, feasibility {feas:.1e}, "
                         f"used-path gap {used_gap:.1e}, two-start arc deviation {arc_dev:.1e}",
                         time.perf_counter() - t0, 30.0)
    return ok_all


def criterion_4():
    t0 = time.perf_counter()
    pc, sc = setup("network1")
    hand = float(gbpr_time(2182.0, 1500.0, 16.0, 0.15, 4.0))
    checks = network1_checks(pc, sc)
    for c in checks:
        print("    " + c.line())
    flagged = [c for c in checks[1:] if not c.ok]
    # pass = hand value holds, and any failed reproduction is reported rather than hidden
    ok = abs(hand - 26.75) <= 0.01 and all("INCONSISTENT" in c.line() for c in flagged)
    status = (f"{len(flagged)} of {len(checks) - 1} reference equilibrium values flagged INCONSISTENT"
              if flagged else "reference equilibria reproduced within 2%")
    return report(4, ok, f"hand GBPR value {hand:.4f} vs 26.75; {status}",
                  time.perf_counter() - t0, 60.0)


def continuation_distances(pc, sc, tau=None):
    cfg = pc.penalty if tau is None else pc.penalty.replace(tau=tau)
    _, pts = t_continuation(pc.network, sc, cfg, [1.0, 0.01, 1e-3], SolverOptions(tol=1e-8))
    return {p.t: p.distance for p in pts}


def criterion_5():
    t0 = time.perf_counter()
    pc, sc = setup("network1")
    tol = 1e-8
    d = continuation_distances(pc, sc)
    ok = d[0.01] <= 10 * d[1.0] + 1e-12 and d[1e-3] <= 10 * tol
    elapsed = time.perf_counter() - t0
    res = report(5, ok, f"shipped config: |v_t - v_max| = {d[1.0]:.2e} (t=1), {d[0.01]:.2e} (t=0.01), "
                 f"{d[1e-3]:.2e} (t=1e-3)", elapsed, 60.0)
    # diagnostic only: acceptable times at the equilibrium costs make the penalty bind
    v = continuation_distances(pc, sc, tau=(18.2, 16.8))
    RESULTS.append(f"[INFO] criterion 5, binding-penalty variant tau=(18.2, 16.8): "
                   f"{v[1.0]:.2e} (t=1), {v[0.01]:.2e} (t=0.01), {v[1e-3]:.2e} (t=1e-3); "
                   f"ratio bound {'holds' if v[0.01] <= 10 * v[1.0] else 'fails'}, "
                   f"10*tol bound at t=1e-3 {'holds' if v[1e-3] <= 10 * tol else 'fails'}")
    print(RESULTS[-1])
    return res


def criterion_6():
    t0 = time.perf_counter()
    pc, sc = setup("network1")
    opts = SolverOptions(tol=1e-11)
    base = solve(pc.network, sc, pc.penalty, opts)
    worst, neg = 0.0, True
    for x in np.linspace(1470.0, 1490.0, 5):
        xi = degraded_scenario(sc, 0, x)
        gif = gif_solve(base, pc.network, sc, pc.penalty, xi)
        fd = if_finite_difference(pc.network, sc, xi, 1e-3, pc.penalty, opts, base=base)
        used = list(gif.sets.i_plus)
        worst = max(worst, float(np.max(np.abs(gif.direction[used] - fd[used])
                                        / np.abs(gif.direction[used]))))
        neg &= bool(gif.direction[0] < 0)
    return report(6, worst <= 0.05 and neg, f"max relative GIF/FD error on I+ {worst:.2e}; "
                  f"direction_1 < 0 on [1470, 1490]: {neg}", time.perf_counter() - t0, 60.0)


def monotone_with_slack(seq, increasing, slack):
    bad = 0
    for a, b in zip(seq, seq[1:]):
        step = b - a if increasing else a - b
        if step < 0:
            if -step > slack:
                return False
            bad += 1
    return bad <= 1


def criterion_7():
    t0 = time.perf_counter()
    pc, sc = setup("network1")
    model = pc.capacity_models[0]
    outlier = model.mu - 6 * model.sigma
    tol = 1e-8
    _, rows = breakdown_sweep(pc.network, sc, pc.penalty, 0, list(range(10, 101, 10)), outlier,
                              pc.seed, SolverOptions(tol=tol))
    f1 = [r.f[0] for r in rows]
    ok = all(r.converged for r in rows) and monotone_with_slack(f1, False, 2 * tol)
    for k in range(pc.network.n_od):
        ok &= monotone_with_slack([r.z_min[k] for r in rows], True, 2 * tol)
    return report(7, ok, f"path-1 flow {f1[0]:.3f} -> {f1[-1]:.3f}, z_min "
                  f"{np.round(rows[0].z_min, 4)} -> {np.round(rows[-1].z_min, 4)} over m = 10..100",
                  time.perf_counter() - t0, 300.0)


def criterion_8():
    t0 = time.perf_counter()
    pc = load_config("network1")
    m = pc.capacity_models[0]
    same = ShiftExperimentConfig(20, 1000, 0.01, 0, m, pc.seed, (10, 20))
    r0 = shift_ratio_experiment(same, pc.network, pc.capacity_models, pc.penalty)
    exp = ShiftExperimentConfig(200, 1000, 0.01, 0, PerturbedTail(m.mu, m.sigma, 0.9, 0.002),
                                pc.seed, tuple(range(20, 201, 20)))
    res = shift_ratio_experiment(exp, pc.network, pc.capacity_models, pc.penalty,
                                 threads=min(4, os.cpu_count() or 1))
    last = res.ratio[-3:]
    spread = float((last.max() - last.min()) / last.mean())
    ok = bool(np.all(r0.delta1 == 0.0)) and spread <= 0.25 and bool(res.converged.all())
    return report(8, ok, f"identical laws delta1 = {r0.delta1.max():g}; delta2 = {res.delta2:.4f}, "
                  f"ratio at L=200 {res.ratio[-1]:.4f}, spread of last three {spread:.2%}",
                  time.perf_counter() - t0, 900.0)


def lp_w1(x, y):
    n, k = len(x), len(y)
    a = np.zeros((n + k, n * k))
    for i in range(n):
        a[i, i * k:(i + 1) * k] = 1
    for j in range(k):
        a[n + j, j::k] = 1
    res = linprog(np.abs(np.subtract.outer(x, y)).ravel(), A_eq=a,
                  b_eq=np.concatenate([np.full(n, 1 / n), np.full(k, 1 / k)]), bounds=(0, None),
                  method="highs", options={"primal_feasibility_tolerance": 1e-10,
                                           "dual_feasibility_tolerance": 1e-10})
    return res.fun


def criterion_9():
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    worst_eq = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 50))
        x, y = rng.normal(size=n) * 10, rng.exponential(size=n) * 10
        worst_eq = max(worst_eq, abs(kantorovich_1d(EmpiricalDistribution(x), EmpiricalDistribution(y))
                                     - kantorovich_equal_count(x, y)))
    worst_lp = 0.0
    for _ in range(300):
        n, k = rng.integers(1, 5, size=2)
        x, y = rng.uniform(-3, 3, size=n), rng.uniform(-3, 3, size=k)
        worst_lp = max(worst_lp, abs(kantorovich_1d(EmpiricalDistribution(x),
                                                    EmpiricalDistribution(y)) - lp_w1(x, y)))
    return report(9, worst_eq <= 1e-12 and worst_lp <= 1e-9,
                  f"equal-count vs CDF-area {worst_eq:.1e}; coupling LP {worst_lp:.1e}",
                  time.perf_counter() - t0, 10.0)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9]


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 10)])
def test_acceptance(criterion):
    assert criterion()


if __name__ == "__main__":
    outcomes = [c() for c in CRITERIA]
    print(f"{sum(outcomes)}/{len(outcomes)} criteria passed")
    sys.exit(0 if all(outcomes) else 1)
