"""Closed-form quote approximations (single and multi-asset) and the Gamma matrix."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractError, MarketMakingError
from .intensity import HamiltonianContext, delta_star, hamiltonian

JACOBI_TOL = 1e-14
JACOBI_MAX_SWEEPS = 100
EIG_CLAMP = 1e-12
SYMMETRY_TOL = 1e-12
FD_REL_STEP = 1e-6


@dataclass(frozen=True)
class ApproxCoefficient:
    """``c = sqrt(gamma sigma^2 / (2 H''(0)))`` with the intermediates ``alpha`` and ``eta``."""

    c: float
    alpha: float
    eta: float
    curvature: float


def _sides(ctx, ask_ctx=None):
    return ctx, (ctx if ask_ctx is None else ask_ctx)


def _curvature(ctx_b: HamiltonianContext, ctx_a: HamiltonianContext) -> float:
    hb = ctx_b.second_at_zero()
    return hb if ctx_a is ctx_b else 0.5 * (hb + ctx_a.second_at_zero())


def approx_coefficient(ctx: HamiltonianContext, sigma: float, gamma: float, ask_ctx=None) -> ApproxCoefficient:
    ctx_b, ctx_a = _sides(ctx, ask_ctx)
    h2 = _curvature(ctx_b, ctx_a)
    _, h1 = hamiltonian(ctx_b, 0.0)
    dq = ctx_b.delta_qty
    var = sigma * sigma
    return ApproxCoefficient(
        c=math.sqrt(gamma * var / (2.0 * h2)),
        alpha=-0.5 * h2 / (dq * h1) * gamma * var,
        eta=-dq * h1,
        curvature=h2,
    )


def approx_quotes_single(ctx: HamiltonianContext, sigma: float, gamma: float, q, ask_ctx=None):
    """Approximate ``(bid, ask)`` offsets at inventory ``q`` (scalar or array); independent of time."""
    ctx_b, ctx_a = _sides(ctx, ask_ctx)
    c = approx_coefficient(ctx_b, sigma, gamma, ctx_a).c
    q = np.asarray(q, dtype=float)
    dq = ctx_b.delta_qty
    bid = delta_star(ctx_b, 0.5 * (2.0 * q + dq) * c)
    ask = delta_star(ctx_a, -0.5 * (2.0 * q - dq) * c)
    return bid, ask


@dataclass(frozen=True)
class ExponentialQuotes:
    bid: float
    ask: float
    spread: float
    skew: float


def exponential_closed_form(A, k, Delta, gamma, xi, sigma, q) -> ExponentialQuotes:
    """Explicit approximate quotes for ``Lambda = A exp(-k delta)``."""
    if not (A > 0 and k > 0 and Delta > 0 and gamma > 0 and xi >= 0 and sigma >= 0):
        raise ContractError("need A, k, Delta, gamma > 0 and xi, sigma >= 0")
    base = gamma * sigma**2 / (2.0 * A * Delta * k)
    if xi == 0:
        static = 1.0 / k
        coef = math.sqrt(base * math.e)
    else:
        r = xi * Delta / k
        static = math.log1p(r) / (xi * Delta)
        coef = math.sqrt(base * math.exp((1.0 / r + 1.0) * math.log1p(r)))
    bid = static + (2.0 * q + Delta) / 2.0 * coef
    ask = static - (2.0 * q - Delta) / 2.0 * coef
    return ExponentialQuotes(bid, ask, 2.0 * static + Delta * coef, 2.0 * q * coef)


@dataclass(frozen=True)
class StaticsReport:
    q: float
    d_bid_dsigma: float
    d_ask_dsigma: float
    d_bid_dq: float
    d_ask_dq: float

    @property
    def sigma_signs(self) -> tuple:
        return int(np.sign(self.d_bid_dsigma)), int(np.sign(self.d_ask_dsigma))

    @property
    def q_signs(self) -> tuple:
        return int(np.sign(self.d_bid_dq)), int(np.sign(self.d_ask_dq))


def expected_sigma_signs(q: float, delta_qty: float):
    """Volatility sign table: ``(+,+)`` at 0, ``(+,-)`` for long, ``(-,+)`` for short; ``None`` in between."""
    if q == 0:
        return (1, 1)
    if q >= delta_qty:
        return (1, -1)
    if q <= -delta_qty:
        return (-1, 1)
    return None


def comparative_statics(ctx: HamiltonianContext, sigma: float, gamma: float, q: float, ask_ctx=None) -> StaticsReport:
    """Central-difference sensitivities of the approximate quotes to ``sigma`` and ``q``."""
    ctx_b, ctx_a = _sides(ctx, ask_ctx)
    if not sigma > 0:
        raise ContractError("sigma must be positive for volatility sensitivities")

    def quotes(s, qq):
        b, a = approx_quotes_single(ctx_b, s, gamma, qq, ctx_a)
        return float(b), float(a)

    hs = FD_REL_STEP * sigma
    b_up, a_up = quotes(sigma + hs, q)
    b_dn, a_dn = quotes(sigma - hs, q)
    hq = FD_REL_STEP * max(abs(q), ctx_b.delta_qty)
    bq_up, aq_up = quotes(sigma, q + hq)
    bq_dn, aq_dn = quotes(sigma, q - hq)
    return StaticsReport(
        q=float(q),
        d_bid_dsigma=(b_up - b_dn) / (2.0 * hs),
        d_ask_dsigma=(a_up - a_dn) / (2.0 * hs),
        d_bid_dq=(bq_up - bq_dn) / (2.0 * hq),
        d_ask_dq=(aq_up - aq_dn) / (2.0 * hq),
    )


def _off_norm(A) -> float:
    return float(np.linalg.norm(A - np.diag(np.diag(A))))


def jacobi_eigh(M, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Eigenvalues and eigenvectors of a symmetric matrix by cyclic Jacobi rotations."""
    A = np.array(M, dtype=float, copy=True)
    n = A.shape[0]
    V = np.eye(n)
    scale = np.linalg.norm(A) or 1.0
    for _ in range(max_sweeps):
        if _off_norm(A) <= tol * scale:
            break
        for p in range(n - 1):
            for r in range(p + 1, n):
                apr = A[p, r]
                if apr == 0.0:
                    continue
                diff = A[r, r] - A[p, p]
                if abs(diff) + 100.0 * abs(apr) == abs(diff):
                    t = apr / diff  # |tau| huge: t ~ 1 / (2 tau)
                else:
                    tau = diff / (2.0 * apr)
                    t = math.copysign(1.0, tau) / (abs(tau) + math.hypot(tau, 1.0))
                c = 1.0 / math.hypot(t, 1.0)
                s = t * c
                cp, cr = A[:, p].copy(), A[:, r].copy()
                A[:, p], A[:, r] = c * cp - s * cr, s * cp + c * cr
                rp, rr = A[p, :].copy(), A[r, :].copy()
                A[p, :], A[r, :] = c * rp - s * rr, s * rp + c * rr
                vp, vr = V[:, p].copy(), V[:, r].copy()
                V[:, p], V[:, r] = c * vp - s * vr, s * vp + c * vr
    else:
        if _off_norm(A) > tol * scale:
            raise MarketMakingError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    return np.diag(A).copy(), V


def symmetric_sqrt(M) -> np.ndarray:
    """Principal square root of a symmetric positive semi-definite matrix."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ContractError("matrix must be square")
    mag = float(np.abs(M).max()) if M.size else 0.0
    if np.abs(M - M.T).max(initial=0.0) > SYMMETRY_TOL * max(mag, np.finfo(float).tiny):
        raise ContractError("matrix is not symmetric")
    lam, V = jacobi_eigh(0.5 * (M + M.T))
    floor = -EIG_CLAMP * max(float(np.abs(lam).max(initial=0.0)), np.finfo(float).tiny)
    if np.any(lam < floor):
        raise ContractError(f"matrix is not positive semi-definite (eigenvalue {lam.min():.3e})")
    root = (V * np.sqrt(np.clip(lam, 0.0, None))) @ V.T
    return 0.5 * (root + root.T)


def _normalize_contexts(contexts: Sequence):
    out = []
    for entry in contexts:
        if isinstance(entry, HamiltonianContext):
            out.append((entry, entry))
        else:
            b, a = entry
            out.append((b, a))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class GammaMatrix:
    Gamma: np.ndarray
    D: np.ndarray  # curvatures H_i''(0)
    Sigma: np.ndarray
    contexts: tuple  # (bid, ask) context per asset

    @property
    def d(self) -> int:
        return self.Gamma.shape[0]

    def consistency_error(self) -> float:
        """Relative Frobenius error of ``(D^1/2 Gamma D^1/2)^2`` against ``D^1/2 Sigma D^1/2``."""
        r = np.sqrt(self.D)
        lhs = (r[:, None] * self.Gamma * r[None, :]) @ (r[:, None] * self.Gamma * r[None, :])
        rhs = r[:, None] * self.Sigma * r[None, :]
        return float(np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs))


def gamma_matrix(Sigma, contexts: Sequence) -> GammaMatrix:
    """``Gamma = D^-1/2 (D^1/2 Sigma D^1/2)^1/2 D^-1/2`` with ``D = diag(H_i''(0))``."""
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    ctxs = _normalize_contexts(contexts)
    d = len(ctxs)
    if Sigma.shape != (d, d):
        raise ContractError(f"Sigma must be {d}x{d}")
    try:
        np.linalg.cholesky(0.5 * (Sigma + Sigma.T))
    except np.linalg.LinAlgError:
        raise ContractError("Sigma must be positive definite") from None
    D = np.array([_curvature(b, a) for b, a in ctxs])
    r = np.sqrt(D)
    root = symmetric_sqrt(r[:, None] * Sigma * r[None, :])
    G = root / np.outer(r, r)
    return GammaMatrix(0.5 * (G + G.T), D, Sigma, ctxs)


def approx_quotes_multi(gm: GammaMatrix, gamma: float, q, i: int):
    """Approximate ``(bid, ask)`` offsets of asset ``i`` at inventory vector ``q``."""
    q = np.asarray(q, dtype=float)
    if q.shape != (gm.d,):
        raise ContractError(f"inventory vector must have {gm.d} entries")
    ctx_b, ctx_a = gm.contexts[i]
    dq = ctx_b.delta_qty
    G = gm.Gamma
    cross = float(G[i] @ q - G[i, i] * q[i])
    root = math.sqrt(gamma / 2.0)
    bid = delta_star(ctx_b, root * (G[i, i] * (2.0 * q[i] + dq) / 2.0 + cross))
    ask = delta_star(ctx_a, root * (-G[i, i] * (2.0 * q[i] - dq) / 2.0 - cross))
    return bid, ask


def approx_quote_grid_multi(gm: GammaMatrix, gamma: float, axes: Sequence):
    """Approximate offsets on a tensor grid: ``(bid, ask)`` arrays of shape ``(d, *grid)``."""
    mesh = np.meshgrid(*[np.asarray(a, dtype=float) for a in axes], indexing="ij")
    G = gm.Gamma
    root = math.sqrt(gamma / 2.0)
    bid = np.empty((gm.d,) + mesh[0].shape)
    ask = np.empty_like(bid)
    for i, (ctx_b, ctx_a) in enumerate(gm.contexts):
        dq = ctx_b.delta_qty
        cross = sum(G[i, j] * mesh[j] for j in range(gm.d) if j != i)
        bid[i] = delta_star(ctx_b, root * (G[i, i] * (2.0 * mesh[i] + dq) / 2.0 + cross))
        ask[i] = delta_star(ctx_a, root * (-G[i, i] * (2.0 * mesh[i] - dq) / 2.0 - cross))
    return bid, ask


def write_quote_table(path, axes: Sequence, bid: np.ndarray, ask: np.ndarray) -> None:
    """CSV ``q1,...,qd,asset,bid_offset,ask_offset``; absent quotes are written empty."""
    d = len(axes)
    mesh = [m.ravel() for m in np.meshgrid(*axes, indexing="ij")]
    bid = np.asarray(bid).reshape(d, -1)
    ask = np.asarray(ask).reshape(d, -1)

    def fmt(x):
        return "" if not np.isfinite(x) else f"{x:.17g}"

    with open(path, "w", newline="") as fh:
        fh.write(",".join(f"q{i + 1}" for i in range(d)) + ",asset,bid_offset,ask_offset\n")
        for node in range(mesh[0].size):
            qs = ",".join(f"{m[node]:.17g}" for m in mesh)
            for i in range(d):
                fh.write(f"{qs},{i + 1},{fmt(bid[i, node])},{fmt(ask[i, node])}\n")
