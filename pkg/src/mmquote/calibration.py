"""Maximum-likelihood fit of ``Lambda(delta) = A exp(-k delta)`` from quote exposures.

Each observation is a quote held at offset ``delta`` for ``duration`` seconds
that collected ``fills`` executions; the log-likelihood is the Poisson one

    sum_i fills_i (log A - k delta_i) - A exp(-k delta_i) duration_i.

``A`` is profiled out in closed form and ``log k`` is found by golden-section
search.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConfigError, ContractError, IdentifiabilityError

GOLDEN_XTOL = 1e-10
BRACKET_EXPANSIONS = 60
MAX_LOG_K_SPAN = 40.0


@dataclass(frozen=True)
class QuoteExposure:
    delta: float
    duration: float
    fills: int

    def __post_init__(self):
        if not self.duration > 0:
            raise ContractError("exposure duration must be positive")
        if self.fills < 0:
            raise ContractError("fill count must be non-negative")


@dataclass(frozen=True)
class IntensityFit:
    A: float
    k: float
    log_likelihood: float


def _canonical(observations):
    # sorting makes every sum independent of the input order
    return sorted((float(o.delta), float(o.duration), int(o.fills)) for o in observations)


def log_likelihood(observations: Sequence[QuoteExposure], A: float, k: float) -> float:
    obs = _canonical(observations)
    log_a = math.log(A)
    return math.fsum(n * (log_a - k * d) - A * math.exp(-k * d) * tau for d, tau, n in obs)


def _profile(obs, k):
    """``A*(k)`` and the profiled log-likelihood."""
    fills = math.fsum(n for _, _, n in obs)
    exposure = math.fsum(math.exp(-k * d) * tau for d, tau, _ in obs)
    A = fills / exposure
    ll = math.fsum(n * (math.log(A) - k * d) for d, _, n in obs) - fills
    return A, ll


def fit_exponential_intensity(observations: Iterable[QuoteExposure]) -> IntensityFit:
    obs = _canonical(observations)
    distinct = {d for d, _, _ in obs}
    if len(distinct) < 2:
        raise IdentifiabilityError("need at least two distinct offsets to identify k")
    if sum(n for _, _, n in obs) < 1:
        raise IdentifiabilityError("need at least one fill")
    if len({d for d, _, n in obs if n > 0}) < 2:
        raise IdentifiabilityError("fills at a single offset leave k unidentified")

    mean_delta = math.fsum(d for d, _, _ in obs) / len(obs)
    if not mean_delta > 0:
        raise IdentifiabilityError("mean offset must be positive to seed the search for k")

    def neg(logk):
        return -_profile(obs, math.exp(logk))[1]

    # expand a bracket around log k0 until the middle point is lowest
    x0 = math.log(1.0 / mean_delta)
    lo, mid, hi = x0 - 1.0, x0, x0 + 1.0
    f_lo, f_mid, f_hi = neg(lo), neg(mid), neg(hi)
    for _ in range(BRACKET_EXPANSIONS):
        if f_mid < f_lo and f_mid < f_hi:
            break
        if abs(lo - x0) > MAX_LOG_K_SPAN or abs(hi - x0) > MAX_LOG_K_SPAN:
            raise IdentifiabilityError("likelihood has no interior maximum in k")
        if f_lo < f_hi:
            hi, f_hi, mid, f_mid = mid, f_mid, lo, f_lo
            lo = mid - 1.618 * (hi - mid)
            f_lo = neg(lo)
        else:
            lo, f_lo, mid, f_mid = mid, f_mid, hi, f_hi
            hi = mid + 1.618 * (mid - lo)
            f_hi = neg(hi)
    else:
        raise IdentifiabilityError("likelihood has no interior maximum in k")

    res = minimize_scalar(neg, bracket=(lo, mid, hi), method="golden", options={"xtol": GOLDEN_XTOL})
    k = math.exp(res.x)
    A, ll = _profile(obs, k)
    return IntensityFit(A, k, ll)


def read_exposures(path) -> list:
    """Parse a ``delta,duration,fills`` CSV."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["delta", "duration", "fills"]:
            raise ConfigError("expected header delta,duration,fills", (str(path),))
        out = []
        for line, row in enumerate(reader, start=2):
            try:
                out.append(QuoteExposure(float(row["delta"]), float(row["duration"]), int(row["fills"])))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad row: {exc}", (str(path), f"line {line}")) from None
        return out


def write_exposures(path, observations: Sequence[QuoteExposure]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("delta,duration,fills\n")
        for o in observations:
            fh.write(f"{o.delta:.17g},{o.duration:.17g},{int(o.fills)}\n")


def exposures_from_report(report, offsets: np.ndarray, asset: int = 0) -> list:
    """Turn a constant-offset simulation into per-offset exposures (bid and ask pooled)."""
    offsets = np.asarray(offsets, dtype=float)
    out = []
    for side, fills, expo in ((0, report.bid_fills, report.bid_exposure), (1, report.ask_fills, report.ask_exposure)):
        dur = float(np.sum(expo[:, asset]))
        if dur > 0:
            out.append(QuoteExposure(float(offsets[side]), dur, int(np.sum(fills[:, asset]))))
    return out
