"""Monte Carlo market simulator.

Reference prices follow correlated arithmetic Brownian motions; each quoted
side fills with probability ``Lambda(delta) dt`` per step (at most one fill per
side per step). Paths draw from their own Philox streams keyed by
``(base_seed, path, stream)``, so a path's randomness does not depend on how
many other paths run or in what order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, ContractError
from .multi_asset import AssetSpec, MultiAssetProblem
from .policies import QuotePolicy, check_policy
from .single_asset import SingleAssetProblem

MAX_FILL_PROB = 0.1
RANDOM_BLOCK = 256
PRICE_STREAM = 0


def as_multi(problem: SingleAssetProblem) -> MultiAssetProblem:
    """View a single-asset problem as a one-asset ``MultiAssetProblem``."""
    pen = problem.penalty
    if pen.kind == "linear" and pen.a > 0:
        raise ContractError("a linear terminal penalty has no quadratic-form equivalent")
    matrix = np.array([[pen.a]]) if pen.kind == "quadratic" else None
    asset = AssetSpec(problem.bid_intensity, problem.delta_qty, problem.Q, problem.ask_intensity)
    return MultiAssetProblem(
        np.array([[problem.sigma**2]]),
        (asset,),
        problem.gamma,
        problem.xi,
        problem.T,
        matrix,
        require_definite=problem.sigma > 0,
    )


def _factor(Sigma: np.ndarray) -> np.ndarray:
    """``L`` with ``L L' = Sigma``; Cholesky when definite, else a clipped eigen-factor."""
    try:
        return np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError:
        lam, V = np.linalg.eigh(Sigma)
        return V * np.sqrt(np.clip(lam, 0.0, None))


def _floor_for(intensity, dt: float) -> float:
    """Smallest offset with ``Lambda(delta) dt <= MAX_FILL_PROB``."""
    target = MAX_FILL_PROB / dt
    if intensity.is_exponential:
        return math.log(intensity.A / target) / intensity.k
    scale = 1.0 / intensity.k_est
    lo, hi = -scale, scale
    while float(intensity.rate(lo)) <= target:
        lo -= 2.0 * (hi - lo)
    while float(intensity.rate(hi)) > target:
        hi += 2.0 * (hi - lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(intensity.rate(mid)) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * scale:
            break
    return hi


@dataclass(frozen=True, eq=False)
class MarketSimConfig:
    problem: MultiAssetProblem
    n_paths: int
    base_seed: int = 0
    dt_sim: float = 0.05
    x0: float = 0.0
    q0: Optional[np.ndarray] = None
    S0: Optional[np.ndarray] = None
    delta_floor: Optional[np.ndarray] = None  # per asset; None derives the thinning limit
    record_events: bool = False
    terminal_penalty: Optional[Callable] = None  # (n, d) inventories -> (n,); default q' A q

    def __post_init__(self):
        p = self.problem
        if isinstance(p, SingleAssetProblem):
            object.__setattr__(self, "problem", as_multi(p))
            p = self.problem
        d = p.d
        if not (self.n_paths >= 1 and self.dt_sim > 0):
            raise ConfigError("need n_paths >= 1 and dt_sim > 0", ("simulation",))
        q0 = np.zeros(d) if self.q0 is None else np.atleast_1d(np.asarray(self.q0, dtype=float))
        S0 = np.zeros(d) if self.S0 is None else np.atleast_1d(np.asarray(self.S0, dtype=float))
        if q0.shape != (d,) or S0.shape != (d,):
            raise ConfigError(f"q0 and S0 need {d} entries", ("simulation",))
        idx0 = []
        for qi, a in zip(q0, p.assets):
            j = (qi + a.Q) / a.delta_qty
            if abs(j - round(j)) > 1e-9 or not (0 <= round(j) <= 2 * a.n_side):
                raise ConfigError(f"initial inventory {qi} is not on the grid", ("simulation", "q0"))
            idx0.append(int(round(j)))
        object.__setattr__(self, "q0", q0)
        object.__setattr__(self, "S0", S0)
        object.__setattr__(self, "_idx0", np.array(idx0, dtype=np.int64))

        derived = np.array(
            [max(_floor_for(a.bid_intensity, self.dt_sim), _floor_for(a.ask_intensity, self.dt_sim)) for a in p.assets]
        )
        if self.delta_floor is None:
            floor = derived
        else:
            floor = np.broadcast_to(np.asarray(self.delta_floor, dtype=float), (d,)).copy()
            for i, a in enumerate(p.assets):
                worst = max(float(a.bid_intensity.rate(floor[i])), float(a.ask_intensity.rate(floor[i]))) * self.dt_sim
                if worst > MAX_FILL_PROB * (1 + 1e-12):
                    raise ConfigError(
                        f"fill probability {worst:.3g} per step at the offset floor of asset {i + 1} exceeds "
                        f"{MAX_FILL_PROB}; reduce dt_sim or raise the floor",
                        ("simulation", "delta_floor"),
                    )
        object.__setattr__(self, "delta_floor", floor)

    @property
    def n_steps(self) -> int:
        return max(1, int(math.ceil(self.problem.T / self.dt_sim - 1e-9)))

    def step_times(self) -> np.ndarray:
        n = self.n_steps
        t = np.arange(n + 1) * self.dt_sim
        t[-1] = self.problem.T
        return t


@dataclass(frozen=True)
class Estimate:
    mean: float
    se: float


@dataclass(frozen=True, eq=False)
class SimulationReport:
    x_T: np.ndarray
    q_T: np.ndarray
    S_T: np.ndarray
    running_penalty: np.ndarray
    bid_fills: np.ndarray
    ask_fills: np.ndarray
    bid_exposure: np.ndarray  # seconds with a live bid, per path and asset
    ask_exposure: np.ndarray
    wealth: np.ndarray  # x_T + q_T . S_T - terminal penalty
    gamma: float
    events: Optional[dict] = field(default=None, repr=False)

    @property
    def n_paths(self) -> int:
        return self.x_T.shape[0]

    @property
    def model_a_samples(self) -> np.ndarray:
        return -np.exp(-self.gamma * self.wealth)

    @property
    def model_b_samples(self) -> np.ndarray:
        return self.wealth - self.running_penalty

    @property
    def model_a(self) -> Estimate:
        return _estimate(self.model_a_samples)

    @property
    def model_b(self) -> Estimate:
        return _estimate(self.model_b_samples)

    @property
    def certainty_equivalent(self) -> float:
        return -math.log(-self.model_a.mean) / self.gamma

    def write_events(self, path) -> None:
        if self.events is None:
            raise ContractError("simulation ran without record_events")
        ev = self.events
        with open(path, "w", newline="") as fh:
            fh.write("path,t,asset,side,S,delta,q_after,x_after\n")
            for k in range(ev["path"].size):
                fh.write(
                    f"{ev['path'][k]},{ev['t'][k]:.17g},{ev['asset'][k] + 1},{ev['side'][k]},"
                    f"{ev['S'][k]:.17g},{ev['delta'][k]:.17g},{ev['q_after'][k]:.17g},{ev['x_after'][k]:.17g}\n"
                )


def _estimate(samples: np.ndarray) -> Estimate:
    n = samples.size
    mean = float(np.mean(samples))
    se = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    return Estimate(mean, se)


class _Streams:
    """Per-path generators, drawn in blocks of steps."""

    def __init__(self, base_seed: int, n_paths: int, d: int):
        self.d = d
        self.gens = [
            [
                np.random.Generator(np.random.Philox(np.random.SeedSequence([base_seed, p, s])))
                for s in range(1 + 2 * d)
            ]
            for p in range(n_paths)
        ]

    def block(self, steps: int):
        n = len(self.gens)
        d = self.d
        z = np.empty((steps, n, d))
        u = np.empty((steps, 2 * d, n))
        for p, gens in enumerate(self.gens):
            z[:, p, :] = gens[PRICE_STREAM].standard_normal((steps, d))
            for s in range(2 * d):
                u[:, s, p] = gens[1 + s].random(steps)
        return z, u


def simulate_paths(config: MarketSimConfig, policy: QuotePolicy) -> SimulationReport:
    problem = config.problem
    check_policy(policy, problem)
    d = problem.d
    n = config.n_paths
    times = config.step_times()
    chol = _factor(problem.Sigma)
    deltas = np.array([a.delta_qty for a in problem.assets])
    top = np.array([2 * a.n_side for a in problem.assets], dtype=np.int64)
    half_gamma_sigma = 0.5 * problem.gamma * problem.Sigma
    floor = config.delta_floor

    idx = np.tile(config._idx0, (n, 1))
    q = np.tile(config.q0, (n, 1))
    S = np.tile(config.S0, (n, 1))
    X = np.full(n, float(config.x0))
    penalty = np.zeros(n)
    fills = np.zeros((2, n, d), dtype=np.int64)
    exposure = np.zeros((2, n, d))
    log = {k: [] for k in ("path", "t", "asset", "side", "S", "delta", "q_after", "x_after")} if config.record_events else None

    streams = _Streams(config.base_seed, n, d)
    z_blk = u_blk = None
    for step in range(times.size - 1):
        b = step % RANDOM_BLOCK
        if b == 0:
            z_blk, u_blk = streams.block(min(RANDOM_BLOCK, times.size - 1 - step))
        t = times[step]
        h = times[step + 1] - t
        penalty += np.einsum("pi,ij,pj->p", q, half_gamma_sigma, q) * h
        bid, ask = policy.offsets(t, idx)
        for i, a in enumerate(problem.assets):
            dq = deltas[i]
            for side, offs, allowed, intensity, sign in (
                (0, bid[:, i], idx[:, i] < top[i], a.bid_intensity, 1),
                (1, ask[:, i], idx[:, i] > 0, a.ask_intensity, -1),
            ):
                live = allowed & np.isfinite(offs)
                if not np.any(live):
                    continue
                off = np.where(live, np.maximum(offs, floor[i]), np.inf)
                prob = intensity.rate(off) * h
                exposure[side, :, i] += np.where(live, h, 0.0)
                hit = u_blk[b, 2 * i + side] < prob
                if not np.any(hit):
                    continue
                # bid fill buys at S - delta, ask fill sells at S + delta
                cash = np.where(hit, -sign * (S[:, i] - sign * off) * dq, 0.0)
                X = X + cash
                idx[:, i] += sign * hit
                q[:, i] = (idx[:, i] - a.n_side) * dq
                fills[side, :, i] += hit
                if log is not None:
                    where = np.nonzero(hit)[0]
                    log["path"].append(where)
                    log["t"].append(np.full(where.size, t))
                    log["asset"].append(np.full(where.size, i))
                    log["side"].append(np.full(where.size, "bid" if side == 0 else "ask", dtype=object))
                    log["S"].append(S[where, i].copy())
                    log["delta"].append(off[where])
                    log["q_after"].append(q[where, i].copy())
                    log["x_after"].append(X[where].copy())
        S = S + (z_blk[b] @ chol.T) * math.sqrt(h)

    if config.terminal_penalty is not None:
        terminal = np.asarray(config.terminal_penalty(q), dtype=float)
    elif problem.penalty_matrix is not None:
        terminal = np.einsum("pi,ij,pj->p", q, problem.penalty_matrix, q)
    else:
        terminal = np.zeros(n)
    wealth = X + np.einsum("pi,pi->p", q, S) - terminal

    events = None
    if log is not None:
        events = {k: (np.concatenate(v) if v else np.array([])) for k, v in log.items()}
        order = np.argsort(events["path"], kind="stable") if events["path"].size else np.array([], dtype=int)
        events = {k: v[order] for k, v in events.items()}
    return SimulationReport(
        x_T=X,
        q_T=q,
        S_T=S,
        running_penalty=penalty,
        bid_fills=fills[0],
        ask_fills=fills[1],
        bid_exposure=exposure[0],
        ask_exposure=exposure[1],
        wealth=wealth,
        gamma=problem.gamma,
        events=events,
    )


@dataclass(frozen=True)
class Comparison:
    model_a: Estimate  # mean and paired standard error of (a - b)
    model_b: Estimate
    report_a: SimulationReport = field(repr=False)
    report_b: SimulationReport = field(repr=False)


def compare_strategies(config: MarketSimConfig, policy_a: QuotePolicy, policy_b: QuotePolicy) -> Comparison:
    """Paired comparison of two policies on common random numbers."""
    check_policy(policy_a, config.problem, "policy_a")
    check_policy(policy_b, config.problem, "policy_b")
    ra = simulate_paths(config, policy_a)
    rb = simulate_paths(config, policy_b)
    return Comparison(
        _estimate(ra.model_a_samples - rb.model_a_samples),
        _estimate(ra.model_b_samples - rb.model_b_samples),
        ra,
        rb,
    )
