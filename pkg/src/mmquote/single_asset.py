"""Single-asset reduced value function ``theta(t, q)``.

The backward system

    0 = -d/dt theta(t,q) + gamma sigma^2 q^2 / 2
        - 1{q<Q}  H^b((theta(t,q) - theta(t,q+D)) / D)
        - 1{q>-Q} H^a((theta(t,q) - theta(t,q-D)) / D),    theta(T,q) = -l(|q|)

is integrated with implicit Euler and a Newton solve per step.  For
exponential intensities ``v = exp(k theta / D)`` solves a linear system that
serves as an exact reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg.lapack import dgtsv as _gtsv

from .errors import ContractError, DomainError, StepSizeError, UnsupportedModelError
from .intensity import HamiltonianContext, IntensityModel, delta_star

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50
# Newton aims for TARGET_ULPS of roundoff and accepts stagnation below ROUNDOFF_ULPS
TARGET_ULPS = 4
ROUNDOFF_ULPS = 64
EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class Penalty:
    """Terminal liquidation penalty ``l(|q|)``: zero, ``a|q|`` or ``a q^2``."""

    kind: str = "zero"
    a: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "linear", "quadratic"):
            raise ContractError(f"unknown penalty kind {self.kind!r}")
        if self.a < 0:
            raise ContractError("penalty coefficient must be non-negative")

    def __call__(self, q):
        aq = np.abs(np.asarray(q, dtype=float))
        if self.kind == "zero":
            return np.zeros_like(aq)
        if self.kind == "linear":
            return self.a * aq
        return self.a * aq * aq


@dataclass(frozen=True)
class SingleAssetProblem:
    sigma: float
    gamma: float
    xi: float
    delta_qty: float
    Q: float
    T: float
    bid_intensity: IntensityModel
    ask_intensity: Optional[IntensityModel] = None
    penalty: Penalty = field(default_factory=Penalty)

    def __post_init__(self):
        if self.ask_intensity is None:
            object.__setattr__(self, "ask_intensity", self.bid_intensity)
        if not (self.sigma >= 0 and self.gamma > 0 and self.T > 0 and self.delta_qty > 0):
            raise ContractError("need sigma >= 0, gamma > 0, T > 0 and delta_qty > 0")
        if not self.xi >= 0:
            raise ContractError("xi must be non-negative")
        ratio = self.Q / self.delta_qty
        if not (ratio >= 1 and abs(ratio - round(ratio)) < 1e-9):
            raise ContractError(f"Q/delta_qty must be a positive integer, got {ratio!r}")

    @property
    def n_side(self) -> int:
        return int(round(self.Q / self.delta_qty))

    @property
    def inventory_grid(self) -> np.ndarray:
        n = self.n_side
        return np.arange(-n, n + 1) * self.delta_qty

    @property
    def bid_context(self) -> HamiltonianContext:
        return HamiltonianContext(self.bid_intensity, self.xi, self.delta_qty)

    @property
    def ask_context(self) -> HamiltonianContext:
        return HamiltonianContext(self.ask_intensity, self.xi, self.delta_qty)

    @property
    def model(self) -> Optional[str]:
        if self.xi == 0:
            return "B"
        if self.xi == self.gamma:
            return "A"
        return None

    def replace(self, **changes) -> "SingleAssetProblem":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class ThetaSurface:
    """``theta`` sampled on ``time_grid x inventory_grid`` (values[i, j] = theta(t_i, q_j))."""

    time_grid: np.ndarray
    inventory_grid: np.ndarray
    values: np.ndarray
    gamma: float
    xi: float
    delta_qty: float

    def at(self, t: float) -> np.ndarray:
        """Row ``theta(t, .)``, linear in time between nodes."""
        tg = self.time_grid
        if not (tg[0] - 1e-9 <= t <= tg[-1] + 1e-9):
            raise DomainError(f"t={t!r} outside [{tg[0]}, {tg[-1]}]")
        i = int(np.searchsorted(tg, t, side="right")) - 1
        i = min(max(i, 0), len(tg) - 2)
        w = (t - tg[i]) / (tg[i + 1] - tg[i])
        w = min(max(w, 0.0), 1.0)
        if w == 0.0:
            return self.values[i].copy()
        if w == 1.0:
            return self.values[i + 1].copy()
        return (1.0 - w) * self.values[i] + w * self.values[i + 1]

    def index_of(self, q: float) -> int:
        grid = self.inventory_grid
        j = int(round((q - grid[0]) / self.delta_qty))
        if j < 0 or j >= len(grid) or abs(grid[j] - q) > 1e-9 * self.delta_qty:
            raise DomainError(f"inventory {q!r} is not on the grid")
        return j

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("t,q,theta\n")
            for i, t in enumerate(self.time_grid):
                for q, v in zip(self.inventory_grid, self.values[i]):
                    fh.write(f"{t:.17g},{q:.17g},{v:.17g}\n")


def time_grid(T: float, dt: float) -> np.ndarray:
    """Nodes ``0 = t_0 < ... < t_n = T`` spaced ``dt`` back from ``T``; the first gap may be shorter."""
    if not dt > 0:
        raise ContractError("dt must be positive")
    n = max(1, int(math.ceil(T / dt - 1e-9)))
    grid = T - dt * np.arange(n, -1, -1, dtype=float)
    grid[0] = 0.0
    return grid


def _residual(y, prev, h, running, hb_fn, ha_fn, dq):
    """Implicit-Euler residual and its tridiagonal Jacobian ``(lower, diag, upper)``."""
    gap = (y[:-1] - y[1:]) / dq
    hb, hbp = hb_fn(gap)
    ha, hap = ha_fn(-gap)
    total = np.zeros(y.shape[0])
    total[:-1] = hb
    total[1:] += ha
    slope = np.zeros(y.shape[0])
    slope[:-1] = hbp
    slope[1:] += hap
    c = h / dq
    # row j depends on theta[j+1] through the bid term and on theta[j-1] through the ask term
    return y - prev + h * (running - total), c * hap, 1.0 - c * slope, c * hbp


def _implicit_step(prev, h, running, hb_fn, ha_fn, dq, tol, max_iter, scale_hint=0.0, guess=None):
    scale = max(1.0, float(np.abs(prev).max()), scale_hint)
    target = max(tol, TARGET_ULPS * EPS * scale)
    floor = max(tol, ROUNDOFF_ULPS * EPS * scale)
    x = prev if guess is None else guess
    F, lower, diag, upper = _residual(x, prev, h, running, hb_fn, ha_fn, dq)
    norm = float(np.abs(F).max())
    for _ in range(max_iter):
        if norm <= target:
            return x
        step = _tridiag_solve(lower, diag, upper, -F)
        lam = 1.0
        while True:
            trial = x + lam * step
            F_t, lower_t, diag_t, upper_t = _residual(trial, prev, h, running, hb_fn, ha_fn, dq)
            norm_t = float(np.abs(F_t).max())
            if norm_t < norm or lam < 1e-3:
                break
            lam *= 0.5
        if norm_t >= norm and norm <= floor:
            return x
        x, F, lower, diag, upper, norm = trial, F_t, lower_t, diag_t, upper_t, norm_t
    if norm <= floor:
        return x
    raise StepSizeError(
        f"Newton did not converge in {max_iter} iterations (residual {norm:.3e}); try a smaller dt"
    )


def _tridiag_solve(lower, diag, upper, rhs):
    if diag.shape[0] == 1:
        return rhs / diag
    *_, x, info = _gtsv(lower, diag, upper, rhs)
    if info != 0:
        raise StepSizeError(f"singular Newton Jacobian (gtsv info={info})")
    return x


def solve_theta(
    problem: SingleAssetProblem,
    dt: float = 1.0,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
) -> ThetaSurface:
    """Backward implicit-Euler march for ``theta`` with a damped Newton solve per step."""
    times = time_grid(problem.T, dt)
    q = problem.inventory_grid
    dq = problem.delta_qty
    hb_fn = problem.bid_context.fast_hamiltonian
    ha_fn = problem.ask_context.fast_hamiltonian
    running = 0.5 * problem.gamma * problem.sigma**2 * q**2
    run_max = float(np.max(running))

    values = np.empty((times.size, q.size))
    values[-1] = -problem.penalty(q)
    for n in range(times.size - 2, -1, -1):
        h = times[n + 1] - times[n]
        guess = None
        if n + 2 < times.size:
            # linear extrapolation in t; exact once the surface drifts at a constant rate
            guess = values[n + 1] + (values[n + 1] - values[n + 2]) * (h / (times[n + 2] - times[n + 1]))
        values[n] = _implicit_step(values[n + 1], h, running, hb_fn, ha_fn, dq, tol, max_iter, h * run_max, guess)
    return ThetaSurface(times, q, values, problem.gamma, problem.xi, dq)


def exponential_oracle(problem: SingleAssetProblem, dt: float = 1.0, substeps: int = 10) -> ThetaSurface:
    """Reference ``theta`` for exponential intensities via the linear ``v`` system.

    Integrates ``v' = M v`` backward with classical RK4 at ``dt / substeps`` and
    reports ``theta = (D/k) log v`` on the same time nodes as :func:`solve_theta`.
    """
    bid, ask = problem.bid_intensity, problem.ask_intensity
    if not (bid.is_exponential and ask.is_exponential):
        raise UnsupportedModelError("the linear oracle needs exponential intensities on both sides")
    if bid.k != ask.k:
        raise UnsupportedModelError("the linear oracle needs a common decay k on both sides")
    k, dq = bid.k, problem.delta_qty
    c = problem.bid_context.c_xi()
    q = problem.inventory_grid
    m = q.size

    gen = np.diag(0.5 * k * problem.gamma * problem.sigma**2 * q**2 / dq)
    idx = np.arange(m - 1)
    gen[idx, idx + 1] = -bid.A * c  # bid fill moves q -> q + D
    gen[idx + 1, idx] = -ask.A * c

    times = time_grid(problem.T, dt)
    v = np.exp(-k / dq * problem.penalty(q))
    log_scale = 0.0
    theta = np.empty((times.size, m))
    theta[-1] = dq / k * np.log(v)
    eye = np.eye(m)
    propagators = {}
    for n in range(times.size - 2, -1, -1):
        h = times[n + 1] - times[n]
        key = round(h, 15)
        if key not in propagators:
            x = -(h / substeps) * gen  # backward step of v' = gen v
            x2 = x @ x
            rk4 = eye + x + x2 / 2.0 + x2 @ x / 6.0 + x2 @ x2 / 24.0
            # RK4 on a constant linear system is exactly this polynomial propagator
            propagators[key] = np.linalg.matrix_power(rk4, substeps)
        v = propagators[key] @ v
        top = float(np.max(v))
        v = v / top
        log_scale += math.log(top)
        theta[n] = dq / k * (np.log(v) + log_scale)
    return ThetaSurface(times, q, theta, problem.gamma, problem.xi, dq)


def quote_rows(surface: ThetaSurface, ctx_bid, ctx_ask, rows: np.ndarray):
    """Bid/ask offsets for every inventory node of ``rows`` (shape ``(..., m)``); NaN where absent."""
    dq = surface.delta_qty
    rows = np.asarray(rows, dtype=float)
    bid = np.full(rows.shape, np.nan)
    ask = np.full(rows.shape, np.nan)
    bid[..., :-1] = delta_star(ctx_bid, (rows[..., :-1] - rows[..., 1:]) / dq)
    ask[..., 1:] = delta_star(ctx_ask, (rows[..., 1:] - rows[..., :-1]) / dq)
    return bid, ask


def quotes_from_theta(surface: ThetaSurface, ctx_bid, ctx_ask, t: float, q: float):
    """Optimal ``(bid, ask)`` offsets at ``(t, q)``; a side is ``None`` at its inventory bound."""
    j = surface.index_of(q)
    row = surface.at(t)
    m = row.size
    dq = surface.delta_qty
    bid = float(delta_star(ctx_bid, (row[j] - row[j + 1]) / dq)) if j < m - 1 else None
    ask = float(delta_star(ctx_ask, (row[j] - row[j - 1]) / dq)) if j > 0 else None
    return bid, ask


def value_function(surface: ThetaSurface, model: str, t: float, x: float, q: float, S: float) -> float:
    """CARA utility (model ``"A"``) or expected mark-to-market value (model ``"B"``) at a state."""
    if model == "A":
        if surface.xi != surface.gamma:
            raise ContractError("model A needs a surface solved with xi == gamma")
    elif model == "B":
        if surface.xi != 0:
            raise ContractError("model B needs a surface solved with xi == 0")
    else:
        raise ContractError(f"unknown model {model!r}")
    theta = float(surface.at(t)[surface.index_of(q)])
    wealth = x + q * S + theta
    if model == "A":
        return -math.exp(-surface.gamma * wealth)
    return wealth
