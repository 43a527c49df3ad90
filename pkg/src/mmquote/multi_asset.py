"""Multi-asset reduced value function on a tensor inventory grid.

Same implicit-Euler/Newton march as the single-asset solver, with the running
penalty ``gamma/2 q' Sigma q`` and one bid/ask Hamiltonian pair per asset.
Nodes are ordered lexicographically over ``(q^1, ..., q^d)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded
from scipy.sparse.linalg import bicgstab, spsolve

from .errors import ContractError, DomainError, GridSizeError, StepSizeError
from .intensity import HamiltonianContext, IntensityModel, delta_star
from .single_asset import EPS, NEWTON_MAX_ITER, NEWTON_TOL, ROUNDOFF_ULPS, TARGET_ULPS, time_grid

MAX_NODES = 100_000
# banded LU costs ~ N * bandwidth^2; above this use the sparse iterative path
BANDED_WORK_LIMIT = 5e7
KRYLOV_RTOL = 1e-13


@dataclass(frozen=True)
class AssetSpec:
    bid_intensity: IntensityModel
    delta_qty: float
    Q: float
    ask_intensity: Optional[IntensityModel] = None
    name: str = ""

    def __post_init__(self):
        if self.ask_intensity is None:
            object.__setattr__(self, "ask_intensity", self.bid_intensity)
        if not self.delta_qty > 0:
            raise ContractError("trade size must be positive")
        ratio = self.Q / self.delta_qty
        if not (ratio >= 1 and abs(ratio - round(ratio)) < 1e-9):
            raise ContractError(f"Q/delta_qty must be a positive integer, got {ratio!r}")

    @property
    def n_side(self) -> int:
        return int(round(self.Q / self.delta_qty))

    @property
    def grid(self) -> np.ndarray:
        return np.arange(-self.n_side, self.n_side + 1) * self.delta_qty


@dataclass(frozen=True, eq=False)
class MultiAssetProblem:
    Sigma: np.ndarray
    assets: tuple
    gamma: float
    xi: float
    T: float
    penalty_matrix: Optional[np.ndarray] = None
    # False admits a singular Sigma (for example sigma = 0 in simulation studies)
    require_definite: bool = True

    def __post_init__(self):
        Sigma = np.atleast_2d(np.asarray(self.Sigma, dtype=float))
        object.__setattr__(self, "Sigma", Sigma)
        object.__setattr__(self, "assets", tuple(self.assets))
        d = len(self.assets)
        if Sigma.shape != (d, d):
            raise ContractError(f"Sigma must be {d}x{d}, got {Sigma.shape}")
        if not np.allclose(Sigma, Sigma.T, rtol=1e-12, atol=0.0):
            raise ContractError("Sigma must be symmetric")
        if self.require_definite:
            try:
                np.linalg.cholesky(Sigma)
            except np.linalg.LinAlgError:
                raise ContractError("Sigma must be positive definite") from None
        elif np.min(np.linalg.eigvalsh(Sigma)) < -1e-12 * max(np.abs(Sigma).max(), np.finfo(float).tiny):
            raise ContractError("Sigma must be positive semi-definite")
        if self.penalty_matrix is not None:
            pen = np.atleast_2d(np.asarray(self.penalty_matrix, dtype=float))
            if pen.shape != (d, d) or not np.allclose(pen, pen.T):
                raise ContractError("penalty matrix must be symmetric d x d")
            if np.min(np.linalg.eigvalsh(pen)) < -1e-12 * max(1.0, np.abs(pen).max()):
                raise ContractError("penalty matrix must be positive semi-definite")
            object.__setattr__(self, "penalty_matrix", pen)
        if not (self.gamma > 0 and self.T > 0 and self.xi >= 0):
            raise ContractError("need gamma > 0, T > 0, xi >= 0")

    @classmethod
    def from_volatilities(cls, sigmas, correlation, assets, gamma, xi, T, penalty_matrix=None):
        sig = np.asarray(sigmas, dtype=float)
        corr = np.asarray(correlation, dtype=float)
        return cls(corr * np.outer(sig, sig), tuple(assets), gamma, xi, T, penalty_matrix)

    @property
    def d(self) -> int:
        return len(self.assets)

    @property
    def axes(self) -> tuple:
        return tuple(a.grid for a in self.assets)

    @property
    def shape(self) -> tuple:
        return tuple(2 * a.n_side + 1 for a in self.assets)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def contexts(self) -> list:
        return [
            (
                HamiltonianContext(a.bid_intensity, self.xi, a.delta_qty),
                HamiltonianContext(a.ask_intensity, self.xi, a.delta_qty),
            )
            for a in self.assets
        ]

    def mesh(self) -> list:
        return np.meshgrid(*self.axes, indexing="ij")

    def quadratic_form(self, M) -> np.ndarray:
        """``q' M q`` on every node."""
        mesh = self.mesh()
        out = np.zeros(self.shape)
        for i in range(self.d):
            for j in range(self.d):
                out += M[i, j] * mesh[i] * mesh[j]
        return out

    def terminal(self) -> np.ndarray:
        if self.penalty_matrix is None:
            return np.zeros(self.shape)
        return -self.quadratic_form(self.penalty_matrix)


@dataclass(frozen=True, eq=False)
class MultiThetaSurface:
    time_grid: np.ndarray
    axes: tuple
    values: np.ndarray  # shape (n_times, *grid_shape)
    gamma: float
    xi: float
    deltas: tuple

    @property
    def d(self) -> int:
        return len(self.axes)

    def at(self, t: float) -> np.ndarray:
        tg = self.time_grid
        if not (tg[0] - 1e-9 <= t <= tg[-1] + 1e-9):
            raise DomainError(f"t={t!r} outside [{tg[0]}, {tg[-1]}]")
        i = min(max(int(np.searchsorted(tg, t, side="right")) - 1, 0), len(tg) - 2)
        w = min(max((t - tg[i]) / (tg[i + 1] - tg[i]), 0.0), 1.0)
        if w == 0.0:
            return self.values[i].copy()
        if w == 1.0:
            return self.values[i + 1].copy()
        return (1.0 - w) * self.values[i] + w * self.values[i + 1]

    def index_of(self, q) -> tuple:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        if q.shape != (self.d,):
            raise DomainError(f"inventory vector must have {self.d} entries")
        idx = []
        for qi, axis, dq in zip(q, self.axes, self.deltas):
            j = int(round((qi - axis[0]) / dq))
            if j < 0 or j >= axis.size or abs(axis[j] - qi) > 1e-9 * dq:
                raise DomainError(f"inventory {tuple(q)} is not on the grid")
            idx.append(j)
        return tuple(idx)

    def to_csv(self, path) -> None:
        cols = ",".join(f"q{i + 1}" for i in range(self.d))
        mesh = [m.ravel() for m in np.meshgrid(*self.axes, indexing="ij")]
        with open(path, "w", newline="") as fh:
            fh.write(f"t,{cols},theta\n")
            for n, t in enumerate(self.time_grid):
                flat = self.values[n].ravel()
                for node in range(flat.size):
                    qs = ",".join(f"{m[node]:.17g}" for m in mesh)
                    fh.write(f"{t:.17g},{qs},{flat[node]:.17g}\n")


class _Stencil:
    """Index bookkeeping for the axis-neighbour Jacobian."""

    def __init__(self, shape):
        self.shape = shape
        self.N = int(np.prod(shape))
        idx = np.arange(self.N).reshape(shape)
        self.lo, self.hi, self.lo_idx, self.hi_idx, self.strides = [], [], [], [], []
        for axis in range(len(shape)):
            lo = tuple(slice(None, -1) if a == axis else slice(None) for a in range(len(shape)))
            hi = tuple(slice(1, None) if a == axis else slice(None) for a in range(len(shape)))
            self.lo.append(lo)
            self.hi.append(hi)
            self.lo_idx.append(idx[lo].ravel())
            self.hi_idx.append(idx[hi].ravel())
            self.strides.append(int(np.prod(shape[axis + 1 :])))
        self.bandwidth = max(self.strides) if shape else 0
        self.banded = self.N * max(self.bandwidth, 1) ** 2 <= BANDED_WORK_LIMIT
        diag = np.arange(self.N)
        self.rows = np.concatenate([diag] + self.lo_idx + self.hi_idx)
        self.cols = np.concatenate([diag] + self.hi_idx + self.lo_idx)


def _residual(X, prev, h, running, fns, deltas, st: _Stencil):
    total = np.zeros(st.shape)
    diag = np.ones(st.shape)
    uppers, lowers = [], []
    for axis, ((hb_fn, ha_fn), dq) in enumerate(zip(fns, deltas)):
        lo, hi = st.lo[axis], st.hi[axis]
        gap = (X[lo] - X[hi]) / dq
        flat = gap.ravel()
        hb, hbp = hb_fn(flat)
        ha, hap = ha_fn(-flat)
        hb, hbp = hb.reshape(gap.shape), hbp.reshape(gap.shape)
        ha, hap = ha.reshape(gap.shape), hap.reshape(gap.shape)
        total[lo] += hb
        total[hi] += ha
        c = h / dq
        diag[lo] -= c * hbp
        diag[hi] -= c * hap
        uppers.append(c * hbp.ravel())  # row lo -> column hi
        lowers.append(c * hap.ravel())  # row hi -> column lo
    F = X - prev + h * (running - total)
    return F, diag.ravel(), uppers, lowers


def _solve_linear(st: _Stencil, diag, uppers, lowers, rhs):
    N = st.N
    if st.banded:
        bw = st.bandwidth
        if bw == 0:
            return rhs / diag
        ab = np.zeros((2 * bw + 1, N))
        ab[bw] = diag
        for axis, s in enumerate(st.strides):
            ab[bw - s, st.hi_idx[axis]] = uppers[axis]
            ab[bw + s, st.lo_idx[axis]] = lowers[axis]
        return solve_banded((bw, bw), ab, rhs, check_finite=False)
    data = np.concatenate([diag] + uppers + lowers)
    J = sp.csr_matrix((data, (st.rows, st.cols)), shape=(N, N))
    precond = sp.diags(1.0 / diag)
    x, info = bicgstab(J, rhs, rtol=KRYLOV_RTOL, atol=0.0, M=precond, maxiter=10 * N)
    if info != 0:
        x = spsolve(J.tocsc(), rhs)
    return x


def solve_theta_multi(
    problem: MultiAssetProblem,
    dt: float = 1.0,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
    max_nodes: int = MAX_NODES,
) -> MultiThetaSurface:
    """Backward implicit-Euler march for the multi-asset ``theta``."""
    if problem.size > max_nodes:
        raise GridSizeError(
            f"inventory grid has {problem.size} nodes (cap {max_nodes}); "
            "use the closed-form approximation (closed_form.approx_quotes_multi) instead"
        )
    st = _Stencil(problem.shape)
    times = time_grid(problem.T, dt)
    fns = [(b.fast_hamiltonian, a.fast_hamiltonian) for b, a in problem.contexts()]
    deltas = tuple(a.delta_qty for a in problem.assets)
    running = 0.5 * problem.gamma * problem.quadratic_form(problem.Sigma)
    run_max = float(np.abs(running).max())

    values = np.empty((times.size,) + problem.shape)
    values[-1] = problem.terminal()
    for n in range(times.size - 2, -1, -1):
        h = times[n + 1] - times[n]
        prev = values[n + 1]
        scale = max(1.0, float(np.abs(prev).max()), h * run_max)
        target = max(tol, TARGET_ULPS * EPS * scale)
        floor = max(tol, ROUNDOFF_ULPS * EPS * scale)
        X = prev
        if n + 2 < times.size:
            X = prev + (prev - values[n + 2]) * (h / (times[n + 2] - times[n + 1]))
        F, diag, up, lw = _residual(X, prev, h, running, fns, deltas, st)
        norm = float(np.abs(F).max())
        it = 0
        while norm > target:
            if it == max_iter:
                if norm <= floor:
                    break
                raise StepSizeError(
                    f"Newton did not converge at t={times[n]:g} (residual {norm:.3e}); try a smaller dt"
                )
            step = _solve_linear(st, diag, up, lw, -F.ravel()).reshape(problem.shape)
            lam = 1.0
            while True:
                trial = X + lam * step
                F_t, diag_t, up_t, lw_t = _residual(trial, prev, h, running, fns, deltas, st)
                norm_t = float(np.abs(F_t).max())
                if norm_t < norm or lam < 1e-3:
                    break
                lam *= 0.5
            if norm_t >= norm and norm <= floor:
                break
            X, F, diag, up, lw, norm = trial, F_t, diag_t, up_t, lw_t, norm_t
            it += 1
        values[n] = X
    return MultiThetaSurface(times, problem.axes, values, problem.gamma, problem.xi, deltas)


def quote_grid_multi(surface: MultiThetaSurface, contexts: Sequence, t: float):
    """Bid and ask offsets on every node at time ``t``: two arrays of shape ``(d, *grid)``, NaN where absent."""
    row = surface.at(t)
    d = surface.d
    bid = np.full((d,) + row.shape, np.nan)
    ask = np.full((d,) + row.shape, np.nan)
    for i, ((ctx_b, ctx_a), dq) in enumerate(zip(contexts, surface.deltas)):
        lo = tuple(slice(None, -1) if a == i else slice(None) for a in range(d))
        hi = tuple(slice(1, None) if a == i else slice(None) for a in range(d))
        gap = (row[lo] - row[hi]) / dq
        bid[(i,) + lo] = delta_star(ctx_b, gap)
        ask[(i,) + hi] = delta_star(ctx_a, -gap)
    return bid, ask


def quotes_from_theta_multi(surface: MultiThetaSurface, contexts: Sequence, t: float, q) -> list:
    """Per-asset ``(bid, ask)`` offsets at ``(t, q)``; ``None`` on the side blocked by the bound."""
    idx = surface.index_of(q)
    row = surface.at(t)
    out = []
    for i, ((ctx_b, ctx_a), dq) in enumerate(zip(contexts, surface.deltas)):
        n = surface.axes[i].size
        j = idx[i]
        here = row[idx]
        bid = ask = None
        if j < n - 1:
            up = idx[:i] + (j + 1,) + idx[i + 1 :]
            bid = float(delta_star(ctx_b, (here - row[up]) / dq))
        if j > 0:
            dn = idx[:i] + (j - 1,) + idx[i + 1 :]
            ask = float(delta_star(ctx_a, (here - row[dn]) / dq))
        out.append((bid, ask))
    return out
