"""Bid quotes against time for each inventory level: the approach to the stationary regime."""

import argparse

import numpy as np
from common import GAMMA, IG, out_dir, single, write_csv

from mmquote import solve_theta, svg
from mmquote.single_asset import quote_rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/quotes_vs_time")
    ap.add_argument("--dt", type=float, default=1.0)
    args = ap.parse_args()
    out = out_dir(args.out)
    p = single(IG, GAMMA)
    s = solve_theta(p, dt=args.dt)
    bid, _ = quote_rows(s, p.bid_context, p.ask_context, s.values)
    n = p.inventory_grid / p.delta_qty
    keep = np.linspace(0, s.time_grid.size - 1, 241).round().astype(int)
    t = s.time_grid[keep]
    write_csv(out / "IG_bid_vs_time.csv", ["t"] + [f"bid_q{int(v):+d}" for v in n[:-1]], (row for row in np.column_stack([t, bid[keep, :-1]])))
    series = [(f"q={int(v):+d}", t, bid[keep, j]) for j, v in enumerate(n[:-1])]
    svg.write(out / "IG_bid_vs_time.svg", svg.line_chart(series, "IG bid quotes over time", "t (s)", "bid offset"))
    # first time after which every bid stays within 1e-9 of its t=0 value
    drift = np.nanmax(np.abs(bid[:, :-1] - bid[0, :-1]), axis=1)
    settled = s.time_grid[np.nonzero(drift > 1e-9)[0][0]] if np.any(drift > 1e-9) else s.T
    print(f"quotes within 1e-9 of their t=0 values up to t = {settled:.0f} s")
    print(f"max drift at t=1800 s: {drift[np.searchsorted(s.time_grid, 1800.0)]:.3e}")


if __name__ == "__main__":
    main()
