"""Fit (A, k) from simulated fills at constant offsets and compare with the generating values."""

import argparse

import numpy as np
from common import IG, out_dir, single

from mmquote import ConstantOffsetsPolicy, IntensityModel, MarketSimConfig, fit_exponential_intensity, simulate_paths
from mmquote.calibration import exposures_from_report, write_exposures


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/calibration")
    ap.add_argument("--paths", type=int, default=400)
    args = ap.parse_args()
    out = out_dir(args.out)
    A, k = IG["A"], IG["k"]
    p = single(IG, 0.0, sigma=0.0, delta_qty=1.0, Q=2000.0, bid_intensity=IntensityModel.exponential(A, k))
    obs = []
    for j, x in enumerate((0.0, 0.5, 1.0, 1.5, 2.0)):
        delta = x / k
        r = simulate_paths(MarketSimConfig(p, n_paths=args.paths, base_seed=100 + j, dt_sim=1.0), ConstantOffsetsPolicy([delta], [delta]))
        obs.extend(exposures_from_report(r, np.array([delta, delta])))
    write_exposures(out / "exposures.csv", obs)
    fit = fit_exponential_intensity(obs)
    print(f"A = {fit.A:.4e} (true {A:.4e}, {fit.A / A - 1:+.2%}), k = {fit.k:.4e} (true {k:.4e}, {fit.k / k - 1:+.2%})")


if __name__ == "__main__":
    main()
