"""Durable-good monopoly over N harvesting rounds.

Cumulative past supply lowers the current price, so the objective is::

    G(alpha) = y0 * sum_n alpha_n (1 - sum_{i<=n} alpha_i) g_n prod_{i<n} (1 - alpha_i)

with per-round growth/discount factors ``g_n``. With increasing factors the
maximizer lies either in the interior of the simplex ``K`` or has a zero
prefix followed by strictly positive shares; :func:`solve_monopoly` tries
both structures and, for small ``N``, every other zero pattern as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import ConvergenceError, DomainError, ModelParams, ParameterError

_K_SLACK = 1e-12


@dataclass
class RoundShares:
    shares: np.ndarray
    growth_factors: np.ndarray
    y0: float = 1.0

    def __post_init__(self):
        self.shares = np.asarray(self.shares, dtype=float)
        self.growth_factors = np.asarray(self.growth_factors, dtype=float)
        if self.shares.shape != self.growth_factors.shape or self.shares.ndim != 1:
            raise ParameterError("shares and growth_factors must be 1-d and of equal length")
        if np.any(self.growth_factors <= 0):
            raise ParameterError("growth factors must be positive")
        if self.y0 < 0:
            raise ParameterError("y0 must be non-negative")

    @property
    def rounds(self) -> int:
        return len(self.shares)

    def in_simplex(self, slack: float = _K_SLACK) -> bool:
        return bool(np.all(self.shares >= -slack) and self.shares.sum() <= 1.0 + slack)


def growth_factors_from_params(params: ModelParams, rounds: int) -> np.ndarray:
    """Factors ``e^{(n-1) theta (r - rho)}`` for arrivals at a fixed location."""
    return np.exp(np.arange(rounds) * params.round_time * params.net_growth)


def payoff_terms(x, factors, y0=1.0, others_cum=None, others_round=None, scale=1.0):
    """Per-round payoff terms of one supplier.

    ``others_cum[n]`` is the rivals' cumulative supply up to round n and
    ``others_round[n]`` their round-n harvest entering the stock depletion.
    Both default to zero, which gives the monopoly objective. Prices and
    depletion are divided by ``scale`` (replica economies use the player
    count). Works for complex input (used for complex-step Hessians).
    """
    x = np.asarray(x)
    n = len(x)
    oc = np.zeros(n) if others_cum is None else np.asarray(others_cum)
    orr = np.zeros(n) if others_round is None else np.asarray(others_round)
    price = 1.0 - (np.cumsum(x) + oc) / scale
    keep = 1.0 - (x + orr) / scale
    survive = np.concatenate(([1.0], np.cumprod(keep)[:-1]))
    return y0 * x * price * np.asarray(factors) * survive


def payoff_gradient(x, factors, y0=1.0, others_cum=None, others_round=None, scale=1.0):
    """Gradient of ``sum(payoff_terms(...))`` with respect to the own shares."""
    x = np.asarray(x)
    n = len(x)
    f = np.asarray(factors)
    oc = np.zeros(n) if others_cum is None else np.asarray(others_cum)
    orr = np.zeros(n) if others_round is None else np.asarray(others_round)
    price = 1.0 - (np.cumsum(x) + oc) / scale
    keep = 1.0 - (x + orr) / scale
    grad = np.zeros(n, dtype=np.result_type(x, float))
    for m in range(n):
        g = 0.0
        for k in range(m, n):
            survive = np.prod(keep[:k])
            if k == m:
                g = g + (price[k] - x[k] / scale) * f[k] * survive
            else:
                survive_wo_m = np.prod(np.delete(keep[:k], m))
                g = g + x[k] * f[k] * (-survive / scale - price[k] * survive_wo_m / scale)
        grad[m] = y0 * g
    return grad


def complex_step_hessian(grad_fn, x: np.ndarray, h: float = 1e-30) -> np.ndarray:
    """Hessian of a real-analytic gradient by complex-step differentiation."""
    n = len(x)
    H = np.empty((n, n))
    for m in range(n):
        xc = x.astype(complex)
        xc[m] += 1j * h
        H[:, m] = np.imag(grad_fn(xc)) / h
    return 0.5 * (H + H.T)


def durable_objective(shares: RoundShares) -> float:
    if not shares.in_simplex():
        raise DomainError("shares must be non-negative and sum to at most 1")
    return float(np.sum(payoff_terms(shares.shares, shares.growth_factors, shares.y0)))


def durable_gradient(shares: RoundShares) -> np.ndarray:
    return payoff_gradient(shares.shares, shares.growth_factors, shares.y0).real.astype(float)


@dataclass
class MonopolySolution:
    shares: RoundShares
    objective: float
    case_tag: str
    gradient_residual: float
    zero_prefix: int = 0
    candidates: list = field(default_factory=list, repr=False)

    @property
    def alpha(self) -> np.ndarray:
        return self.shares.shares


def _interior_stationary_point(f: np.ndarray, y0: float, tol: float, max_iter: int = 200) -> np.ndarray | None:
    """Damped Newton on the reduced first-order system, inside the open simplex.

    Falls back to projected gradient ascent steps while the Hessian is not
    negative definite. Returns ``None`` when no interior stationary point is
    reached.
    """
    n = len(f)

    def obj(x):
        return float(np.sum(payoff_terms(x, f, y0)))

    def grad(x):
        return payoff_gradient(x, f, y0)

    def interior(x):
        return bool(np.all(x > 0) and x.sum() < 1)

    x = np.full(n, 1.0 / (n + 1))
    for _ in range(max_iter):
        g = grad(x).real
        if np.max(np.abs(g)) < tol:
            return x
        H = complex_step_hessian(grad, x)
        newton = None
        if np.all(np.linalg.eigvalsh(H) < 0):
            newton = np.linalg.solve(H, -g)
        direction = newton if newton is not None else g
        step = 1.0
        f0, g0 = obj(x), np.max(np.abs(g))
        while step > 1e-14:
            trial = x + step * direction
            if interior(trial):
                gt = np.max(np.abs(grad(trial).real))
                if obj(trial) >= f0 - 1e-15 * max(1.0, abs(f0)) or gt < g0:
                    break
            step *= 0.5
        else:
            return None
        x = trial
    return x if np.max(np.abs(grad(x).real)) < tol else None


def _solve_support(f: np.ndarray, y0: float, support: np.ndarray, tol: float, tag: str, prefix: int) -> MonopolySolution | None:
    # rounds with a zero share leave price and stock untouched, so the
    # restricted problem is the same objective on the remaining factors
    x = _interior_stationary_point(f[support], y0, tol)
    if x is None:
        return None
    alpha = np.zeros(len(f))
    alpha[support] = x
    shares = RoundShares(alpha, f, y0)
    g = durable_gradient(shares)
    return MonopolySolution(shares, durable_objective(shares), tag, float(np.max(np.abs(g[support]))), prefix)


def solve_case(factors: Sequence[float], y0: float = 1.0, zero_prefix: int = 0, tol: float = 1e-12) -> MonopolySolution | None:
    """Stationary point with the first ``zero_prefix`` shares pinned to zero."""
    f = np.asarray(factors, dtype=float)
    N = len(f)
    if not 0 <= zero_prefix < N:
        raise ParameterError("zero_prefix must lie in [0, N)")
    support = np.arange(zero_prefix, N)
    return _solve_support(f, y0, support, tol, "I" if zero_prefix == 0 else "II", zero_prefix)


def _supports(N: int, exhaustive: bool):
    yield from (np.arange(n, N) for n in range(N))
    if exhaustive:
        for mask in range(1, 2**N):
            support = np.flatnonzero([(mask >> n) & 1 for n in range(N)])
            # prefix patterns were already tried
            if support[0] + len(support) != N:
                yield support


def solve_monopoly(
    N: int, growth_factors: Sequence[float], y0: float = 1.0, tol: float = 1e-12, exhaustive_up_to: int = 10
) -> MonopolySolution:
    """Best stationary point over the interior and the boundary faces of ``K``.

    Zero-prefix faces are always tried. For ``N <= exhaustive_up_to`` every
    other zero pattern is tried too; such optima (tagged ``"boundary"``)
    arise when growth factors are not increasing. Ties within ``tol`` go to
    the earlier candidate, so an interior solution wins over a boundary one
    of equal value.
    """
    if N < 1:
        raise ParameterError("N must be >= 1")
    f = np.asarray(growth_factors, dtype=float)
    if len(f) != N:
        raise ParameterError("need one growth factor per round")
    candidates = []
    for support in _supports(N, N <= exhaustive_up_to):
        prefix = int(support[0]) if support[0] + len(support) == N else -1
        tag = "I" if prefix == 0 else ("II" if prefix > 0 else "boundary")
        c = _solve_support(f, y0, support, tol, tag, max(prefix, 0))
        if c is not None:
            candidates.append(c)
    if not candidates:
        raise ConvergenceError("no stationary candidate converged")
    best = candidates[0]
    for c in candidates[1:]:
        if c.objective > best.objective + tol:
            best = c
    best.candidates = candidates
    return best


def closed_form_two_round(f1: float, f2: float) -> tuple[float, float]:
    """Interior two-round optimum for growth factors ``f1``, ``f2``."""
    if f1 <= 0 or f2 <= 0:
        raise DomainError("growth factors must be positive")
    rad = f1 * (4.0 * f1 - 3.0 * f2)
    if rad < 0:
        raise DomainError("no real interior solution: need 4 f1 >= 3 f2")
    root = math.sqrt(rad)
    a1 = (-4.0 * f1 + 3.0 * f2 + 2.0 * root) / (3.0 * f2)
    a2 = (2.0 * f1 - root) / (3.0 * f2)
    return a1, a2


def slow_growth_share(N: int) -> float:
    if N < 1:
        raise ParameterError("N must be >= 1")
    return 1.0 / (N + 1)


def export_row(solution: MonopolySolution) -> tuple:
    """``(N, case, alpha_1..alpha_N, objective, residual)``."""
    return (solution.shares.rounds, solution.case_tag, *map(float, solution.alpha), solution.objective, solution.gradient_residual)
