"""Monte Carlo comparison of the solved policy with widened and closed-form policies."""

import argparse

from common import IG, out_dir, single, write_csv

from mmquote import ClosedFormPolicy, MarketSimConfig, SolvedSurfacePolicy, WidenedPolicy, compare_strategies, solve_theta
from mmquote.simulator import as_multi


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/monte_carlo")
    ap.add_argument("--paths", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--dt-sim", type=float, default=1.0)
    args = ap.parse_args()
    out = out_dir(args.out)
    p = single(IG, 0.0)
    solved = SolvedSurfacePolicy(solve_theta(p, dt=1.0), (p.bid_context, p.ask_context))
    cfg = MarketSimConfig(p, n_paths=args.paths, base_seed=args.seed, dt_sim=args.dt_sim, S0=[1.0])
    rows = []
    for label, other in (("widened_20pct", WidenedPolicy(solved, 0.2)), ("closed_form", ClosedFormPolicy(as_multi(p)))):
        c = compare_strategies(cfg, solved, other)
        rows.append((label, c.report_a.model_b.mean, c.report_b.model_b.mean, c.model_b.mean, c.model_b.se))
        print(f"solved vs {label}: {c.model_b.mean:.4g} +/- {c.model_b.se:.3g} (paired se)")
    write_csv(out / "model_b_comparison.csv", ["policy", "solved_value", "other_value", "difference", "paired_se"], rows)


if __name__ == "__main__":
    main()
