"""Shared reference parameters for the experiment scripts."""

from pathlib import Path

import numpy as np

from mmquote import AssetSpec, IntensityModel, MultiAssetProblem, SingleAssetProblem

GAMMA = 6e-5
T = 7200.0
IG = dict(name="IG", sigma=5.83e-6, A=9.10e-4, k=1.79e4, delta_qty=5e7)
HY = dict(name="HY", sigma=2.15e-5, A=1.06e-3, k=5.47e3, delta_qty=1e7)
for _p in (IG, HY):
    _p["Q"] = 4 * _p["delta_qty"]


def single(params, xi, **changes) -> SingleAssetProblem:
    base = dict(
        sigma=params["sigma"], gamma=GAMMA, xi=xi, delta_qty=params["delta_qty"], Q=params["Q"], T=T,
        bid_intensity=IntensityModel.exponential(params["A"], params["k"]),
    )
    base.update(changes)
    return SingleAssetProblem(**base)


def two_index(rho, xi=GAMMA) -> MultiAssetProblem:
    assets = [
        AssetSpec(IntensityModel.exponential(p["A"], p["k"]), p["delta_qty"], p["Q"], name=p["name"]) for p in (IG, HY)
    ]
    return MultiAssetProblem.from_volatilities(
        [IG["sigma"], HY["sigma"]], np.array([[1.0, rho], [rho, 1.0]]), assets, GAMMA, xi, T
    )


def out_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if v is None or not np.isfinite(v):
        return ""
    return f"{v:.10g}"


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")
