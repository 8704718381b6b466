"""Aggregate revenue for constant harvesting shares of a non-durable good.

The closed form sums the per-round supplies ``E(n)`` as a geometric-type
series and adds the revenue of the incomplete final round. A spatial
brute-force simulator (``aggregate_revenue_oracle``) re-derives the same
number by walking every location through its arrivals.

Final-round term: one candidate form scales the incomplete round by
``alpha**N``. Simulating the stock shows the surviving stock after ``N``
harvests is ``(1 - alpha)**N`` times its grown value, and that variant is
the one the oracle reproduces. It is the default; ``final_term="alpha"``
keeps the other form for comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .model import TWO_PI, DomainError, ModelParams, ParameterError, grow, harvest_jump, round_schedule

FINAL_TERMS = ("one_minus_alpha", "alpha")

# below this |alpha + exp(-sigma theta) - 1| the closed form loses too many digits
_SINGULAR_GAP = 1e-3
_SERIES_CUTOFF = 1e-8


@dataclass(frozen=True)
class ConstantSharePlan:
    share: float
    round_time: float

    def __post_init__(self):
        if not 0.0 <= self.share <= 1.0:
            raise DomainError(f"share must lie in [0, 1], got {self.share}")
        if not self.round_time > 0:
            raise ParameterError("round_time must be positive")


@dataclass
class RevenueTable:
    """Rows of ``(theta, alpha, G)`` for one revenue variant."""

    rows: list[tuple[float, float, float]]
    params: ModelParams
    variant: str = "closed-form"
    header: tuple[str, ...] = field(default=("theta", "alpha", "G", "variant"), init=False)

    def __post_init__(self):
        seen = set()
        for theta, alpha, g in self.rows:
            if not math.isfinite(g):
                raise ValueError(f"non-finite revenue at theta={theta}, alpha={alpha}")
            if (theta, alpha) in seen:
                raise ValueError(f"duplicate row theta={theta}, alpha={alpha}")
            seen.add((theta, alpha))

    def records(self):
        for theta, alpha, g in self.rows:
            yield (theta, alpha, g, self.variant)

    def as_array(self) -> np.ndarray:
        return np.array(self.rows, dtype=float).reshape(-1, 3)


def _relative_growth(x: float) -> float:
    """(e^x - 1)/x with its limit 1 at x = 0."""
    if abs(x) < _SERIES_CUTOFF:
        return 1.0 + 0.5 * x
    return math.expm1(x) / x


def _with_theta(params: ModelParams, theta: float) -> ModelParams:
    if theta == params.round_time:
        return params
    return ModelParams(
        growth_rate=params.growth_rate,
        discount_rate=params.discount_rate,
        horizon=params.horizon,
        round_time=theta,
        initial_stock=params.initial_stock,
    )


def per_round_revenue(n: int, plan: ConstantSharePlan, params: ModelParams) -> float:
    """Discounted revenue ``E(n)`` booked over the n-th complete round."""
    if n < 1:
        raise ParameterError("round index n must be >= 1")
    a, theta = plan.share, plan.round_time
    st = params.net_growth * theta
    scale = TWO_PI * params.initial_stock * _relative_growth(st)
    return a * (1.0 - n * a) * (1.0 - a) ** (n - 1) * scale * math.exp((n - 1) * st)


def _final_round_revenue(plan: ConstantSharePlan, params: ModelParams, N: int, residual: float, final_term: str) -> float:
    if residual == 0.0:
        return 0.0
    a, theta = plan.share, plan.round_time
    sigma = params.net_growth
    base = (1.0 - a) ** N if final_term == "one_minus_alpha" else a ** N
    # 2 pi y0 (e^{sigma m} - 1)/(sigma theta) written without the 1/sigma singularity
    partial = TWO_PI * params.initial_stock * (residual / theta) * _relative_growth(sigma * residual)
    return a * (1.0 - (N + 1) * a) * base * partial * math.exp(N * sigma * theta)


def _complete_rounds_closed(a: float, theta: float, sigma: float, y0: float, N: int) -> float:
    """Sum of E(1..N) via the closed-form series."""
    st = sigma * theta
    q = math.exp(-st)
    d = a + q - 1.0
    bracket = (a - 1.0) * (2.0 * q - q * q - 1.0) + (
        (a - 1.0 + N * a) * math.exp(st * (N - 2))
        + (N * a * a - 2.0 * a + 2.0 - 2.0 * N * a) * math.exp(st * (N - 1))
        + (a - 1.0 - N * a * a + N * a) * math.exp(st * N)
    ) * (1.0 - a) ** N
    return a * TWO_PI * y0 / st * (bracket / -(d * d))


def aggregate_revenue_closed(
    plan: ConstantSharePlan, params: ModelParams, final_term: str = "one_minus_alpha"
) -> float:
    """Total discounted revenue ``G(theta, alpha)`` for a constant share.

    Falls back to summing ``E(n)`` term by term where the series
    denominator ``alpha + e^{-sigma theta} - 1`` (nearly) vanishes, and when
    ``sigma theta`` is too small for the ``1/(sigma theta)`` prefactor.
    """
    if final_term not in FINAL_TERMS:
        raise ParameterError(f"final_term must be one of {FINAL_TERMS}")
    p = _with_theta(params, plan.round_time)
    grid = round_schedule(p, 1)
    N, residual = grid.complete_rounds, grid.residual
    a, theta, sigma = plan.share, plan.round_time, p.net_growth
    st = sigma * theta
    if a == 0.0 or N == 0:
        head = 0.0
    elif abs(st) < _SERIES_CUTOFF or abs(a + math.exp(-st) - 1.0) < _SINGULAR_GAP:
        head = math.fsum(per_round_revenue(n, plan, p) for n in range(1, N + 1))
    else:
        head = _complete_rounds_closed(a, theta, sigma, p.initial_stock, N)
    return head + _final_round_revenue(plan, p, N, residual, final_term)


def aggregate_revenue_oracle(
    plan: ConstantSharePlan,
    params: ModelParams,
    locations: int = 4096,
    initial_stock: Sequence[float] | None = None,
) -> float:
    """Brute-force revenue by simulating every location on the circle.

    The circle is cut into ``locations`` equal cells evaluated at their
    midpoints. Each location grows, gets harvested at each arrival before
    the horizon and books ``alpha (1 - n alpha)`` per unit of standing
    stock, discounted to time zero. ``initial_stock`` optionally gives a
    per-location stock profile in place of the uniform level.
    """
    if locations < 1:
        raise ParameterError("locations must be >= 1")
    p = _with_theta(params, plan.round_time)
    a, theta, T = plan.share, plan.round_time, p.horizon
    x = (np.arange(locations) + 0.5) * (TWO_PI / locations)
    if initial_stock is None:
        stock0 = np.full(locations, p.initial_stock, dtype=float)
    else:
        stock0 = np.asarray(initial_stock, dtype=float)
        if stock0.shape != (locations,):
            raise ParameterError("initial_stock must have one entry per location")

    t_first = theta * x / TWO_PI
    stock = grow(stock0, t_first, p.growth_rate)
    total = 0.0
    n = 1
    t_n = t_first
    while True:
        live = t_n <= T
        if not live.any():
            break
        revenue = a * (1.0 - n * a) * stock * np.exp(-p.discount_rate * t_n)
        total += math.fsum(revenue[live])
        stock = grow(harvest_jump(stock, a).after, theta, p.growth_rate)
        t_n = t_n + theta
        n += 1
    return total * TWO_PI / locations


def golden_section_max(f, lo: float, hi: float, tol: float = 1e-8) -> float:
    """Maximize a unimodal ``f`` on ``[lo, hi]`` by golden-section search."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def optimize_constant_share(
    theta: float, params: ModelParams, resolution: float = 1e-3, tol: float = 1e-8, final_term: str = "one_minus_alpha"
) -> tuple[float, float]:
    """Global maximizer of ``G(theta, .)`` over shares in [0, 1].

    A grid scan locates the best cell (first one wins ties, i.e. the smaller
    share) and golden-section search polishes inside the neighbouring cells.
    """
    if not theta > 0:
        raise ParameterError("theta must be positive")
    p = _with_theta(params, theta)

    def G(a):
        return aggregate_revenue_closed(ConstantSharePlan(a, theta), p, final_term)

    n = int(round(1.0 / resolution))
    grid = np.linspace(0.0, 1.0, n + 1)
    values = np.array([G(a) for a in grid])
    i = int(np.argmax(values))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, n)]
    a_star = golden_section_max(G, lo, hi, tol)
    g_star = G(a_star)
    if values[i] > g_star:
        a_star, g_star = float(grid[i]), float(values[i])
    return float(a_star), float(g_star)


def sweep_objective(
    theta_grid: Iterable[float],
    alpha_grid: Iterable[float],
    params: ModelParams,
    variant: str = "closed-form",
    locations: int = 4096,
    threads: int = 1,
) -> RevenueTable:
    """Evaluate revenue on the product grid ``theta x alpha``."""
    thetas = [float(t) for t in theta_grid]
    alphas = [float(a) for a in alpha_grid]
    if not thetas or not alphas:
        raise ParameterError("theta and alpha grids must be non-empty")
    if variant not in ("closed-form", "oracle"):
        raise ParameterError("variant must be 'closed-form' or 'oracle'")

    cells = [(t, a) for t in thetas for a in alphas]

    def evaluate(cell):
        t, a = cell
        plan = ConstantSharePlan(a, t)
        if variant == "oracle":
            return aggregate_revenue_oracle(plan, params, locations)
        return aggregate_revenue_closed(plan, params)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(evaluate, cells))
    else:
        values = [evaluate(c) for c in cells]
    rows = [(t, a, g) for (t, a), g in zip(cells, values)]
    return RevenueTable(rows, params, variant)
