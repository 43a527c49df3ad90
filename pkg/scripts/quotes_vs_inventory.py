"""Optimal quotes at t=0 against inventory, with the closed-form approximations overlaid.

Covers IG and HY under both objectives, plus IG with half its volatility.
"""

import argparse

from common import GAMMA, HY, IG, out_dir, single, write_csv

from mmquote import approx_quotes_single, solve_theta, svg
from mmquote.single_asset import quote_rows


def run(params, xi, label, out, dt, **changes):
    p = single(params, xi, **changes)
    s = solve_theta(p, dt=dt)
    bid, ask = quote_rows(s, p.bid_context, p.ask_context, s.at(0.0))
    q = p.inventory_grid
    ab, aa = approx_quotes_single(p.bid_context, p.sigma, GAMMA, q)
    ab[-1] = aa[0] = float("nan")
    n = q / p.delta_qty
    write_csv(out / f"{label}.csv", ["q_over_delta", "bid", "ask", "bid_approx", "ask_approx"], zip(n, bid, ask, ab, aa))
    doc = svg.line_chart(
        [("bid", n, bid), ("bid approx", n, ab), ("ask", n, ask), ("ask approx", n, aa)],
        f"{label}: quotes at t=0", "q / lot size", "offset",
    )
    svg.write(out / f"{label}.svg", doc)
    centre = len(q) // 2
    print(f"{label:>18}: bid(0) {bid[centre]:.4e}  approx {ab[centre]:.4e}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/quotes_vs_inventory")
    ap.add_argument("--dt", type=float, default=1.0)
    args = ap.parse_args()
    out = out_dir(args.out)
    for params in (IG, HY):
        run(params, GAMMA, f"{params['name']}_model_a", out, args.dt)
        run(params, 0.0, f"{params['name']}_model_b", out, args.dt)
    run(IG, GAMMA, "IG_model_a_half_sigma", out, args.dt, sigma=IG["sigma"] / 2)


if __name__ == "__main__":
    main()
