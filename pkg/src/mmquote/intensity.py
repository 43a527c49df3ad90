"""Intensity functions and the Hamiltonian transforms built on them.

An intensity ``Lambda(delta)`` gives the arrival rate of trades when the market
maker quotes ``delta`` away from the reference price.  For a risk parameter
``xi >= 0`` and a trade size ``Delta`` the Hamiltonian is

    H_xi(p) = sup_delta Lambda(delta) / xi * (1 - exp(-xi * Delta * (delta - p)))    (xi > 0)
    H_0(p)  = Delta * sup_delta Lambda(delta) * (delta - p)

and ``delta_star(p)`` is the maximiser.  Everything here accepts scalar or
array ``p`` and returns the same shape.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .errors import (
    BracketingError,
    ContractError,
    CurvatureError,
    IntensityEvaluationError,
)

TAIL_EPS = 1e-6
DEFAULT_GRID_POINTS = 10_001
BRACKET_DOUBLINGS = 64
NEWTON_POLISH_STEPS = 10

# returns (Lambda, Lambda', Lambda'') evaluated elementwise
IntensityEval = Callable[[np.ndarray], tuple]


class IntensityKind(enum.Enum):
    EXPONENTIAL = "exponential"
    CUSTOM = "custom"


@dataclass(frozen=True)
class IntensityModel:
    """Arrival-rate curve ``Lambda(delta)``.

    Use :meth:`exponential` for ``A * exp(-k * delta)`` or :meth:`custom` for a
    user-supplied vectorised evaluator returning ``(L, L', L'')``.  ``k_est`` is
    the natural decay scale of a custom curve; it sets validation windows,
    root brackets and finite-difference steps.
    """

    kind: IntensityKind
    A: Optional[float] = None
    k: Optional[float] = None
    custom_eval: Optional[IntensityEval] = field(default=None, compare=False)
    k_est: Optional[float] = None

    def __post_init__(self):
        if self.kind is IntensityKind.EXPONENTIAL:
            if self.A is None or self.k is None or not (self.A > 0 and self.k > 0):
                raise ContractError(f"exponential intensity needs A>0 and k>0, got A={self.A}, k={self.k}")
        else:
            if self.custom_eval is None:
                raise ContractError("custom intensity needs an evaluator")
            if self.k_est is None or not self.k_est > 0:
                raise ContractError("custom intensity needs a positive decay scale k_est")

    @classmethod
    def exponential(cls, A: float, k: float) -> "IntensityModel":
        return cls(IntensityKind.EXPONENTIAL, A=float(A), k=float(k))

    @classmethod
    def custom(cls, evaluate: IntensityEval, k_est: float) -> "IntensityModel":
        return cls(IntensityKind.CUSTOM, custom_eval=evaluate, k_est=float(k_est))

    @property
    def is_exponential(self) -> bool:
        return self.kind is IntensityKind.EXPONENTIAL

    @property
    def decay_scale(self) -> float:
        return self.k if self.is_exponential else self.k_est

    def evaluate(self, delta):
        """Return ``(Lambda, Lambda', Lambda'')`` at ``delta``."""
        d = np.asarray(delta, dtype=float)
        if self.is_exponential:
            lam = self.A * np.exp(-self.k * d)
            return lam, -self.k * lam, self.k * self.k * lam
        lam, dlam, d2lam = (np.asarray(v, dtype=float) for v in self.custom_eval(d))
        lam, dlam, d2lam = np.broadcast_arrays(lam, dlam, d2lam)
        bad = ~(np.isfinite(lam) & np.isfinite(dlam) & np.isfinite(d2lam))
        if np.any(bad):
            where = np.broadcast_to(d, bad.shape)[bad]
            raise IntensityEvaluationError(where.flat[0])
        return lam, dlam, d2lam

    def rate(self, delta):
        """Intensity only; ``+inf`` offsets give exactly zero."""
        d = np.asarray(delta, dtype=float)
        if self.is_exponential:
            return self.A * np.exp(-self.k * d)
        out = np.zeros(d.shape)
        finite = np.isfinite(d)
        if np.any(finite):
            out[finite] = self.evaluate(d[finite])[0]
        return out

    def scaled(self, beta: float) -> "IntensityModel":
        """The intensity ``beta * Lambda``."""
        if not beta > 0:
            raise ContractError("scaling factor must be positive")
        if self.is_exponential:
            return IntensityModel.exponential(beta * self.A, self.k)
        inner = self.custom_eval

        def evaluate(d):
            lam, dlam, d2lam = inner(d)
            return beta * np.asarray(lam), beta * np.asarray(dlam), beta * np.asarray(d2lam)

        return IntensityModel.custom(evaluate, self.k_est)


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    violations: tuple = ()


def validate_intensity(model: IntensityModel, grid=None) -> ValidationReport:
    """Check the four standing hypotheses on an intensity.

    Exponential curves satisfy them identically and are accepted without
    sampling.  Custom curves are sampled on ``grid`` (an array, or a
    ``(lo, hi, n)`` triple); the default is ``[-5/k_est, 20/k_est]`` with
    10,001 points.  One violation is reported per failed hypothesis, located at
    its worst grid point.
    """
    if model.is_exponential:
        # Lambda > 0, Lambda' = -k Lambda < 0, tail -> 0, L L'' / L'^2 = 1 < 2
        return ValidationReport(True, ())

    k = model.k_est
    lo_req, hi_req = -5.0 / k, 20.0 / k
    if grid is None:
        deltas = np.linspace(lo_req, hi_req, DEFAULT_GRID_POINTS)
    elif isinstance(grid, tuple) and len(grid) == 3:
        deltas = np.linspace(grid[0], grid[1], int(grid[2]))
    else:
        deltas = np.sort(np.asarray(grid, dtype=float))
    span = hi_req - lo_req
    if deltas[0] > lo_req + 1e-12 * span or deltas[-1] < hi_req - 1e-12 * span:
        raise ContractError(
            f"validation grid [{deltas[0]:g}, {deltas[-1]:g}] must cover [{lo_req:g}, {hi_req:g}]"
        )

    lam, dlam, d2lam = model.evaluate(deltas)
    violations = []

    if np.any(lam <= 0):
        i = int(np.argmin(lam))
        violations.append(("positive", float(deltas[i]), float(lam[i])))
    if np.any(dlam >= 0):
        i = int(np.argmax(dlam))
        violations.append(("decreasing", float(deltas[i]), float(dlam[i])))

    lam0 = float(model.evaluate(np.array([0.0]))[0][0])
    tail = float(lam[-1])
    if not tail < TAIL_EPS * lam0:
        violations.append(("vanishing_tail", float(deltas[-1]), tail / lam0 if lam0 else math.inf))

    nz = dlam != 0
    ratio = np.full(deltas.shape, np.inf)
    ratio[nz] = lam[nz] * d2lam[nz] / dlam[nz] ** 2
    if np.any(ratio >= 2):
        i = int(np.argmax(ratio))
        violations.append(("curvature_ratio", float(deltas[i]), float(ratio[i])))

    return ValidationReport(not violations, tuple(violations))


@dataclass(frozen=True)
class HamiltonianContext:
    """One side of the book: an intensity with the risk parameter ``xi`` and trade size."""

    intensity: IntensityModel
    xi: float
    delta_qty: float

    def __post_init__(self):
        if not self.xi >= 0:
            raise ContractError(f"xi must be non-negative, got {self.xi}")
        if not self.delta_qty > 0:
            raise ContractError(f"trade size must be positive, got {self.delta_qty}")

    @property
    def xi_delta(self) -> float:
        return self.xi * self.delta_qty

    def c_xi(self) -> float:
        """Exponential-intensity constant ``C_xi``."""
        if not self.intensity.is_exponential:
            raise ContractError("C_xi is only defined for exponential intensities")
        if self.xi == 0:
            return math.exp(-1.0)
        r = self.xi_delta / self.intensity.k
        return math.exp(-(1.0 / r + 1.0) * math.log1p(r))

    def delta_star(self, p):
        return delta_star(self, p)

    @cached_property
    def fast_hamiltonian(self):
        """``p -> (H, H')`` for 1-D arrays, with the exponential constants folded in."""
        if self.intensity.is_exponential:
            k = self.intensity.k
            coef = self.intensity.A * self.delta_qty / k * self.c_xi()
            exp = np.exp

            def evaluate(p):
                h = coef * exp(-k * p)
                return h, -k * h

            return evaluate
        return lambda p: hamiltonian(self, p)

    def hamiltonian(self, p):
        return hamiltonian(self, p)

    def second_at_zero(self) -> float:
        return hamiltonian_second_at_zero(self)


def _j_and_slope(ctx: HamiltonianContext, d):
    """First-order-condition map ``j(delta)`` and its derivative."""
    lam, dlam, d2lam = ctx.intensity.evaluate(d)
    # flat curves give inf/NaN here; callers turn those into CurvatureError
    with np.errstate(divide="ignore", invalid="ignore"):
        u = lam / dlam
        w = lam * d2lam / dlam**2
    if ctx.xi == 0:
        return d + u, 2.0 - w
    xd = ctx.xi_delta
    g = 1.0 - xd * u
    return d - np.log(g) / xd, 1.0 + (1.0 - w) / g


def delta_star(ctx: HamiltonianContext, p):
    """Optimal offset ``delta_star_xi(p)`` maximising the Hamiltonian."""
    p_arr = np.asarray(p, dtype=float)
    intensity = ctx.intensity
    if intensity.is_exponential:
        k = intensity.k
        if ctx.xi == 0:
            out = p_arr + 1.0 / k
        else:
            xd = ctx.xi_delta
            out = p_arr + math.log1p(xd / k) / xd
        return out if out.ndim else float(out)

    scale = 1.0 / intensity.k_est
    flat = np.atleast_1d(p_arr).ravel()
    lo = flat.copy()
    width = np.full(flat.shape, scale)
    hi = flat + width
    j_hi, _ = _j_and_slope(ctx, hi)
    for _ in range(BRACKET_DOUBLINGS):
        short = j_hi < flat
        if not np.any(short):
            break
        lo = np.where(short, hi, lo)
        width = np.where(short, 2.0 * width, width)
        hi = np.where(short, flat + width, hi)
        j_hi[short] = _j_and_slope(ctx, hi[short])[0]
    else:
        if np.any(j_hi < flat):
            bad = flat[j_hi < flat][0]
            raise BracketingError(f"could not bracket delta_star at p={bad!r}")

    tol = 1e-7 * scale
    while np.max(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        below = _j_and_slope(ctx, mid)[0] < flat
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)

    d = 0.5 * (lo + hi)
    for _ in range(NEWTON_POLISH_STEPS):
        j, dj = _j_and_slope(ctx, d)
        nxt = d - (j - flat) / dj
        # keep the polish inside the bisection bracket
        d = np.where((nxt >= lo - tol) & (nxt <= hi + tol), nxt, d)
    out = d.reshape(p_arr.shape)
    return out if out.ndim else float(out)


def hamiltonian(ctx: HamiltonianContext, p):
    """Return ``(H_xi(p), H_xi'(p))``."""
    p_arr = np.asarray(p, dtype=float)
    intensity = ctx.intensity
    dq = ctx.delta_qty
    if intensity.is_exponential:
        k = intensity.k
        h = intensity.A * dq / k * ctx.c_xi() * np.exp(-k * p_arr)
        hp = -k * h
    else:
        d = np.asarray(delta_star(ctx, p_arr), dtype=float)
        lam = intensity.evaluate(d)[0]
        gap = d - p_arr
        if ctx.xi == 0:
            h = dq * lam * gap
            hp = -dq * lam
        else:
            xd = ctx.xi_delta
            h = lam / ctx.xi * -np.expm1(-xd * gap)
            hp = -lam * dq * np.exp(-xd * gap)
    if h.ndim == 0:
        return float(h), float(hp)
    return h, hp


def hamiltonian_second_at_zero(ctx: HamiltonianContext) -> float:
    """Curvature ``H_xi''(0)``; must be positive for the closed-form approximations."""
    intensity = ctx.intensity
    if intensity.is_exponential:
        value = intensity.A * ctx.delta_qty * intensity.k * ctx.c_xi()
    else:
        h = 1e-4 / intensity.k_est
        _, hp = hamiltonian(ctx, np.array([-h, h]))
        value = float((hp[1] - hp[0]) / (2.0 * h))
    if not value > 0:
        raise CurvatureError(f"H''(0) = {value!r} is not positive")
    return float(value)
