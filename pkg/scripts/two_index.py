"""Two-index quoting: bid heatmaps from the solver and the correlation effect on the HY bid."""

import argparse

import numpy as np
from common import GAMMA, out_dir, two_index, write_csv

from mmquote import approx_quotes_multi, gamma_matrix, solve_theta_multi, svg
from mmquote.multi_asset import quote_grid_multi

RHOS = (0.0, 0.3, 0.6, 0.9)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/two_index")
    ap.add_argument("--dt", type=float, default=1.0)
    args = ap.parse_args()
    out = out_dir(args.out)
    rows = []
    series_solver, series_approx = [], []
    for rho in RHOS:
        p = two_index(rho)
        s = solve_theta_multi(p, dt=args.dt)
        bid, _ = quote_grid_multi(s, p.contexts(), 0.0)
        n1, n2 = (a / d for a, d in zip(p.axes, (a.delta_qty for a in p.assets)))
        if rho == 0.9:
            for i, name in enumerate(("IG", "HY")):
                doc = svg.heatmap(bid[i], n1, n2, f"{name} bid at t=0, rho={rho}", "q_IG / lot", "q_HY / lot")
                svg.write(out / f"bid_heatmap_{name}.svg", doc)
        gm = gamma_matrix(p.Sigma, p.contexts())
        j0 = int(np.argmin(np.abs(p.axes[1])))
        solver = bid[1][:, j0]
        approx = np.array([float(approx_quotes_multi(gm, GAMMA, [q, 0.0], 1)[0]) for q in p.axes[0]])
        series_solver.append((f"rho={rho}", n1, solver))
        series_approx.append((f"rho={rho} approx", n1, approx))
        rows.extend((rho, q, b, a) for q, b, a in zip(n1, solver, approx))
    write_csv(out / "hy_bid_vs_ig_inventory.csv", ["rho", "q_ig_over_delta", "hy_bid", "hy_bid_approx"], rows)
    svg.write(
        out / "hy_bid_vs_ig_inventory.svg",
        svg.line_chart(series_solver + series_approx, "HY bid against IG inventory (q_HY = 0)", "q_IG / lot", "HY bid offset"),
    )
    print("HY bid at the top IG inventory:", ", ".join(f"rho={r}: {s[2][-1]:.4e}" for r, s in zip(RHOS, series_solver)))


if __name__ == "__main__":
    main()
