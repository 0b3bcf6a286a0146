"""Two-OD network: UE and MLAPUE solves, reference-value check, t-continuation.

    python scripts/reproduce_network1.py [--out results/network1]
"""
import argparse
from pathlib import Path

import numpy as np

from lapue import load_config
from lapue.cli import write_csv, write_result
from lapue.equilibrium import mean_scenario, solve, t_continuation
from lapue.reference import network1_checks
from lapue.stochastics import sample_scenarios


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/network1")
    ap.add_argument("--binding-tau", default="18.2,16.8",
                    help="acceptable times for a continuation run where the penalty binds")
    args = ap.parse_args()
    out = Path(args.out)
    pc = load_config("network1")
    sc = sample_scenarios(pc.capacity_models, pc.samples, pc.seed)

    ue = solve(pc.network, mean_scenario(sc), pc.penalty.replace(theta2=0.0))
    ml = solve(pc.network, sc, pc.penalty)
    write_result(out / "ue.csv", ue, pc, sc.seed)
    write_result(out / "mlapue.csv", ml, pc, sc.seed)
    for name, r in (("UE", ue), ("MLAPUE", ml)):
        print(f"{name:7s} f = {np.round(r.f, 2)}  u = {np.round(r.expected_disutility, 3)}")

    print("\nreference-value check")
    for c in network1_checks(pc, sc):
        print("  " + c.line())

    tau = tuple(float(x) for x in args.binding_tau.split(","))
    ts = pc.experiments["continuation"]["t"]
    rows = []
    for label, cfg in (("shipped", pc.penalty), ("binding", pc.penalty.replace(tau=tau))):
        _, pts = t_continuation(pc.network, sc, cfg, ts)
        print(f"\ncontinuation ({label}, tau={cfg.tau})")
        for p in pts:
            print(f"  t={p.t:<6g} |v_t - v_max| = {p.distance:.3e}")
            rows.append([label, p.t, sc.seed, p.distance, p.result.residual])
    write_csv(out / "continuation.csv", ["variant", "t", "seed", "distance", "residual"], rows)
    print(f"\nwrote {out}/")


if __name__ == "__main__":
    main()
