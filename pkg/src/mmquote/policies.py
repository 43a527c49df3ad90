"""Quoting policies consumed by the simulator.

Every policy answers ``offsets(t, idx)`` for a batch of lattice positions
``idx`` (integer array ``(n, d)``, ``0 .. 2 Q_i/D_i``) and returns bid and ask
offset arrays of shape ``(n, d)``. NaN or ``+inf`` means no quote.
"""

from __future__ import annotations

import enum
from typing import Optional, Sequence

import numpy as np

from .closed_form import approx_quote_grid_multi, gamma_matrix
from .errors import ContractError
from .multi_asset import MultiAssetProblem, MultiThetaSurface, quote_grid_multi
from .single_asset import ThetaSurface, quote_rows


class PolicySource(enum.Enum):
    SOLVED_SURFACE = "solved-surface"
    CLOSED_FORM = "closed-form"
    CONSTANT_OFFSETS = "constant-offsets"
    WIDENED = "widened"


class QuotePolicy:
    source: PolicySource
    shape: tuple  # lattice shape the policy was built for, or () if any

    def offsets(self, t: float, idx: np.ndarray):
        raise NotImplementedError

    def evaluate(self, t: float, q, problem: MultiAssetProblem) -> list:
        """Per-asset ``(bid or None, ask or None)`` at inventory vector ``q``."""
        q = np.atleast_1d(np.asarray(q, dtype=float))
        idx = np.array([[int(round((qi + a.Q) / a.delta_qty)) for qi, a in zip(q, problem.assets)]])
        bid, ask = self.offsets(t, idx)

        def opt(x):
            return float(x) if np.isfinite(x) else None

        return [(opt(b), opt(a)) for b, a in zip(bid[0], ask[0])]


def _mask_bounds(bid: np.ndarray, ask: np.ndarray) -> None:
    """Blank the bid on the top face and the ask on the bottom face of each asset axis."""
    d = bid.shape[0]
    for i in range(d):
        top = (i,) + tuple(-1 if a == i else slice(None) for a in range(d))
        bottom = (i,) + tuple(0 if a == i else slice(None) for a in range(d))
        bid[top] = np.nan
        ask[bottom] = np.nan


class _TablePolicy(QuotePolicy):
    """Quotes tabulated on the lattice at a set of times, interpolated linearly in ``t``."""

    def __init__(self, times: np.ndarray, bid: np.ndarray, ask: np.ndarray):
        # bid/ask: (n_times, d, *shape)
        self.times = np.asarray(times, dtype=float)
        self.shape = tuple(bid.shape[2:])
        d = bid.shape[1]
        n_t = bid.shape[0]
        self._bid = bid.reshape(n_t, d, -1).transpose(0, 2, 1).copy()  # (n_t, nodes, d)
        self._ask = ask.reshape(n_t, d, -1).transpose(0, 2, 1).copy()
        self._strides = np.array([int(np.prod(self.shape[i + 1 :])) for i in range(d)], dtype=np.int64)

    def _rows(self, t):
        tg = self.times
        if tg.size == 1:
            return 0, 0, 0.0
        i = min(max(int(np.searchsorted(tg, t, side="right")) - 1, 0), tg.size - 2)
        w = min(max((t - tg[i]) / (tg[i + 1] - tg[i]), 0.0), 1.0)
        return i, i + 1, w

    def offsets(self, t, idx):
        node = np.asarray(idx, dtype=np.int64) @ self._strides
        i, j, w = self._rows(t)
        if w == 0.0:
            return self._bid[i, node], self._ask[i, node]
        if w == 1.0:
            return self._bid[j, node], self._ask[j, node]
        bid = (1.0 - w) * self._bid[i, node] + w * self._bid[j, node]
        ask = (1.0 - w) * self._ask[i, node] + w * self._ask[j, node]
        return bid, ask


class SolvedSurfacePolicy(_TablePolicy):
    """Optimal quotes read off a solved ``theta`` surface."""

    source = PolicySource.SOLVED_SURFACE

    def __init__(self, surface, contexts: Sequence):
        if isinstance(surface, ThetaSurface):
            ctx_b, ctx_a = contexts[0] if isinstance(contexts[0], tuple) else contexts
            bid, ask = quote_rows(surface, ctx_b, ctx_a, surface.values)
            super().__init__(surface.time_grid, bid[:, None, :], ask[:, None, :])
        elif isinstance(surface, MultiThetaSurface):
            n_t = surface.time_grid.size
            grids = [quote_grid_multi(surface, contexts, t) for t in surface.time_grid]
            bid = np.stack([g[0] for g in grids]).reshape((n_t, surface.d) + surface.values.shape[1:])
            ask = np.stack([g[1] for g in grids]).reshape(bid.shape)
            super().__init__(surface.time_grid, bid, ask)
        else:
            raise ContractError("surface must be a ThetaSurface or MultiThetaSurface")


class ClosedFormPolicy(_TablePolicy):
    """Time-independent approximate quotes from the Gamma-matrix formulas."""

    source = PolicySource.CLOSED_FORM

    def __init__(self, problem: MultiAssetProblem):
        gm = gamma_matrix(problem.Sigma, problem.contexts())
        bid, ask = approx_quote_grid_multi(gm, problem.gamma, problem.axes)
        _mask_bounds(bid, ask)
        super().__init__(np.array([0.0]), bid[None], ask[None])
        self.gamma_matrix = gm


class ConstantOffsetsPolicy(QuotePolicy):
    """Fixed offsets per asset; ``+inf`` switches a side off."""

    source = PolicySource.CONSTANT_OFFSETS
    shape = ()

    def __init__(self, bid, ask):
        self.bid = np.atleast_1d(np.asarray(bid, dtype=float))
        self.ask = np.atleast_1d(np.asarray(ask, dtype=float))
        if self.bid.shape != self.ask.shape:
            raise ContractError("bid and ask offsets must have one entry per asset")

    def offsets(self, t, idx):
        n = np.asarray(idx).shape[0]
        return np.broadcast_to(self.bid, (n, self.bid.size)), np.broadcast_to(self.ask, (n, self.ask.size))


class WidenedPolicy(QuotePolicy):
    """Moves every quote of ``base`` away from the reference price by ``factor * |offset|``."""

    source = PolicySource.WIDENED

    def __init__(self, base: QuotePolicy, factor: float = 0.2):
        if not factor >= 0:
            raise ContractError("widening factor must be non-negative")
        self.base = base
        self.factor = float(factor)
        self.shape = base.shape

    def offsets(self, t, idx):
        bid, ask = self.base.offsets(t, idx)
        return bid + self.factor * np.abs(bid), ask + self.factor * np.abs(ask)


def check_policy(policy: QuotePolicy, problem: MultiAssetProblem, where: Optional[str] = None) -> None:
    if policy.shape and tuple(policy.shape) != problem.shape:
        raise ContractError(f"{where or 'policy'} was built for grid {policy.shape}, problem grid is {problem.shape}")
