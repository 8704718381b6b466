"""I-player durable-good harvesting game.

Player ``i`` earns::

    u_i = y0 * sum_n a_{i,n} (1 - sum_j sum_{y<=n} a_{j,y}) g_n prod_{y<n} (1 - D_y)

The depletion factor ``D_y`` is ambiguous in the general payoff. With
``depletion="own"`` (default) it is the player's own round-y share, which is
the construction behind the two-round closed forms; ``depletion="aggregate"``
uses the total round-y harvest instead. ``scale`` divides both prices and
depletion by a constant (the player count in a replica economy).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .durable import complex_step_hessian, payoff_gradient, payoff_terms
from .model import DomainError, ParameterError

log = logging.getLogger(__name__)

_FEAS = 1e-12


@dataclass(frozen=True)
class GameConfig:
    players: int
    rounds: int
    growth_factors: tuple[float, ...]
    y0: float = 1.0
    depletion: str = "own"
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "growth_factors", tuple(float(g) for g in self.growth_factors))
        if self.players < 1 or self.rounds < 1:
            raise ParameterError("players and rounds must be >= 1")
        if len(self.growth_factors) != self.rounds:
            raise ParameterError("need one growth factor per round")
        if any(g <= 0 for g in self.growth_factors):
            raise ParameterError("growth factors must be positive")
        if self.depletion not in ("own", "aggregate"):
            raise ParameterError("depletion must be 'own' or 'aggregate'")
        if not self.scale > 0:
            raise ParameterError("scale must be positive")

    @classmethod
    def two_round_example(cls, players: int, **kw) -> "GameConfig":
        """Two rounds with growth factors (1, 11/9)."""
        return cls(players, 2, (1.0, 11.0 / 9.0), **kw)


@dataclass
class StrategyProfile:
    shares: np.ndarray

    def __post_init__(self):
        self.shares = np.atleast_2d(np.asarray(self.shares, dtype=float))

    @classmethod
    def symmetric(cls, row: Sequence[float], players: int) -> "StrategyProfile":
        return cls(np.tile(np.asarray(row, dtype=float), (players, 1)))

    @property
    def players(self) -> int:
        return self.shares.shape[0]

    def admissible(self, scale: float = 1.0) -> bool:
        s = self.shares
        return bool(
            np.all(s >= -_FEAS)
            and np.all(s.sum(axis=1) <= 1.0 + _FEAS)
            and s.sum() / scale <= 1.0 + _FEAS
        )


@dataclass
class BestResponse:
    shares: np.ndarray
    payoff: float
    boundary: bool


@dataclass
class EquilibriumResult:
    profile: StrategyProfile
    payoffs: np.ndarray
    limit_price: float
    foc_residual: float
    iterations: int
    converged: bool
    final_stock: float
    damping: float = 0.0
    history: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "shares": self.profile.shares.tolist(),
            "payoffs": [float(p) for p in self.payoffs],
            "limit_price": self.limit_price,
            "final_stock": self.final_stock,
            "foc_residual": self.foc_residual,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def _rivals(i: int, shares: np.ndarray, config: GameConfig):
    others = np.delete(shares, i, axis=0).sum(axis=0) if shares.shape[0] > 1 else np.zeros(shares.shape[1])
    others_cum = np.cumsum(others)
    others_round = others if config.depletion == "aggregate" else np.zeros_like(others)
    return others, others_cum, others_round


def _check_profile(profile: StrategyProfile, config: GameConfig):
    if profile.shares.shape != (config.players, config.rounds):
        raise ParameterError(f"profile must have shape ({config.players}, {config.rounds})")


def game_payoff(i: int, profile: StrategyProfile, config: GameConfig) -> float:
    _check_profile(profile, config)
    if not profile.admissible(config.scale):
        raise DomainError("inadmissible strategy profile")
    _, oc, orr = _rivals(i, profile.shares, config)
    return float(np.sum(payoff_terms(profile.shares[i], config.growth_factors, config.y0, oc, orr, config.scale)))


def project_capped(v: np.ndarray, cap: float) -> np.ndarray:
    """Euclidean projection onto ``{x >= 0, sum(x) <= cap}``."""
    x = np.maximum(v, 0.0)
    if x.sum() <= cap:
        return x
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - cap
    idx = np.arange(1, len(v) + 1)
    rho = np.count_nonzero(u - css / idx > 0)
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def kkt_residual(x: np.ndarray, g: np.ndarray, cap: float) -> float:
    return float(np.max(np.abs(x - project_capped(x + g, cap))))


def _maximize_row(x0, u, grad, cap, tol=1e-14, max_iter=2000):
    """Projected gradient ascent with Armijo backtracking."""
    x = project_capped(np.asarray(x0, dtype=float), cap)
    fx = u(x)
    step = 1.0
    for _ in range(max_iter):
        g = grad(x)
        if kkt_residual(x, g, cap) < tol:
            break
        while True:
            trial = project_capped(x + step * g, cap)
            ft = u(trial)
            if ft >= fx + 1e-4 * float(g @ (trial - x)) or step < 1e-16:
                break
            step *= 0.5
        moved = np.max(np.abs(trial - x))
        x, fx = trial, ft
        step = min(step * 2.0, 1.0)
        if moved < 1e-16:
            break
    return x


def best_response(
    i: int,
    profile: StrategyProfile,
    config: GameConfig,
    starts: int = 4,
    seed: int = 0,
) -> BestResponse:
    """Player ``i``'s payoff-maximizing row against the other rows of ``profile``.

    Feasible rows satisfy ``x >= 0`` and ``sum(x) <= min(1, scale - rivals)``.
    Several starts are refined by projected gradient ascent and a Newton
    polish; ``boundary`` flags a maximizer that touches a constraint.
    """
    _check_profile(profile, config)
    shares = profile.shares
    others, oc, orr = _rivals(i, shares, config)
    cap = min(1.0, config.scale - others.sum())
    f = np.asarray(config.growth_factors)
    N = config.rounds
    if cap <= 0:
        return BestResponse(np.zeros(N), 0.0, True)

    def u(x):
        return float(np.sum(payoff_terms(x, f, config.y0, oc, orr, config.scale)))

    def grad(x):
        return payoff_gradient(x, f, config.y0, oc, orr, config.scale)

    rng = np.random.default_rng(seed)
    seeds = [np.full(N, cap / (N + 1)), shares[i].copy()]
    seeds += [rng.dirichlet(np.ones(N + 1))[:N] * cap for _ in range(max(starts - 2, 0))]

    best_x, best_u = None, -np.inf
    for x0 in seeds:
        x = _maximize_row(x0, u, lambda y: grad(y).real, cap)
        x = _polish(x, u, grad, cap)
        ux = u(x)
        if ux > best_u + 1e-15:
            best_x, best_u = x, ux
    boundary = bool(np.any(best_x <= _FEAS) or best_x.sum() >= cap - _FEAS)
    return BestResponse(best_x, best_u, boundary)


def _polish(x, u, grad, cap, iters=30):
    for _ in range(iters):
        free = x > _FEAS
        if not free.any() or x.sum() >= cap - 1e-10:
            return x
        g = grad(x).real
        if np.max(np.abs(g[free])) < 1e-15:
            return x
        H = complex_step_hessian(grad, x)[np.ix_(free, free)]
        if not np.all(np.linalg.eigvalsh(H) < 0):
            return x
        d = np.zeros_like(x)
        d[free] = np.linalg.solve(H, -g[free])
        trial = x + d
        if np.any(trial < 0) or trial.sum() > cap:
            return x
        if u(trial) < u(x) - 1e-15 and np.max(np.abs(grad(trial).real[free])) >= np.max(np.abs(g[free])):
            return x
        x = trial
    return x


def player_kkt_residual(i: int, profile: StrategyProfile, config: GameConfig) -> float:
    shares = profile.shares
    others, oc, orr = _rivals(i, shares, config)
    cap = min(1.0, config.scale - others.sum())
    g = payoff_gradient(shares[i], config.growth_factors, config.y0, oc, orr, config.scale).real
    return kkt_residual(shares[i], g, cap)


def limit_price(profile: StrategyProfile, scale: float = 1.0) -> float:
    return float(1.0 - profile.shares.sum() / scale)


def final_stock(profile: StrategyProfile, scale: float = 1.0) -> float:
    """Fraction of the resource left after all rounds (growth excluded)."""
    return float(np.prod(1.0 - profile.shares.sum(axis=0) / scale))


def solve_nash(
    config: GameConfig,
    damping: float = 0.5,
    tol: float = 1e-12,
    max_iter: int = 5000,
    foc_tol: float = 1e-9,
    threads: int = 1,
    adaptive: bool = True,
) -> EquilibriumResult:
    """Damped simultaneous best-response iteration from the symmetric seed.

    Every player responds to the same frozen profile. The step is capped at
    ``2/(I+1)`` and halved whenever the update norm keeps growing, since
    undamped Cournot-type responses oscillate for many players.
    Non-convergence is reported through ``converged=False``.
    """
    if not 0 < damping <= 1:
        raise ParameterError("damping must lie in (0, 1]")
    I, N = config.players, config.rounds
    x = np.full((I, N), config.scale / (I * N + 1))
    d = min(damping, 2.0 / (I + 1)) if adaptive else damping
    history = []
    growing = 0
    change = np.inf
    it = 0

    def respond(i, frozen):
        return best_response(i, frozen, config).shares

    def respond_all(frozen):
        # players holding the same row face the same rivals, so one solve serves them all
        cache: dict[bytes, np.ndarray] = {}
        order = []
        for i in range(I):
            key = frozen.shares[i].tobytes()
            if key not in cache:
                cache[key] = None
                order.append((key, i))
        if pool is not None:
            solved = list(pool.map(lambda ki: respond(ki[1], frozen), order))
        else:
            solved = [respond(i, frozen) for _, i in order]
        for (key, _), row in zip(order, solved):
            cache[key] = row
        return [cache[frozen.shares[i].tobytes()] for i in range(I)]

    pool = None
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        pool = ThreadPoolExecutor(max_workers=threads)
    try:
        for it in range(1, max_iter + 1):
            frozen = StrategyProfile(x.copy())
            rows = respond_all(frozen)
            proposal = np.vstack(rows)
            new_change = float(np.max(np.abs(proposal - x)))
            if adaptive and new_change > change:
                growing += 1
                if growing >= 3:
                    d *= 0.5
                    growing = 0
            else:
                growing = 0
            change = new_change
            history.append(change)
            if change < tol:
                x = proposal
                break
            x = (1.0 - d) * x + d * proposal
    finally:
        if pool is not None:
            pool.shutdown()

    profile = StrategyProfile(x)
    payoffs = np.array([float(np.sum(payoff_terms(x[i], config.growth_factors, config.y0, *_rivals(i, x, config)[1:], config.scale))) for i in range(I)])
    foc = max(player_kkt_residual(i, profile, config) for i in range(I))
    converged = change < tol and foc <= foc_tol
    if not converged:
        log.warning("best-response iteration stopped: change %.3e, foc residual %.3e", change, foc)
    return EquilibriumResult(
        profile,
        payoffs,
        limit_price(profile, config.scale),
        foc,
        it,
        converged,
        final_stock(profile, config.scale),
        d,
        history,
    )


def two_round_equilibrium_closed(I: int) -> tuple[float, float]:
    """Symmetric two-round equilibrium for growth factors (1, 11/9).

    Uses ``A - sqrt(D) = (A^2 - D)/(A + sqrt(D))`` with
    ``A^2 - D = 18 (44 I + 22)`` to avoid cancellation for large ``I``.
    """
    if I < 1:
        raise DomainError("I must be >= 1")
    A = 9.0 * I * I + 7.0 * I + 20.0
    D = 81.0 * I**4 + 126.0 * I**3 + 409.0 * I * I - 512.0 * I + 4.0
    a2 = 18.0 / (A + math.sqrt(D))
    a1 = 1.0 / I - (I + 1.0) / I * a2
    return a1, a2


def symmetric_slow_growth_share(I: int, N: int) -> float:
    if I < 1 or N < 1:
        raise ParameterError("I and N must be >= 1")
    return 1.0 / (I * (N - 1) + 2)


def closed_form_sweep_rows(I_values: Sequence[int]):
    """Rows ``(I, alpha1, alpha2, payoff, limit_price, final_stock)`` from the closed form."""
    config_f = (1.0, 11.0 / 9.0)
    for I in I_values:
        a1, a2 = two_round_equilibrium_closed(I)
        profile = StrategyProfile.symmetric((a1, a2), I)
        cfg = GameConfig(I, 2, config_f)
        shares = profile.shares
        _, oc, orr = _rivals(0, shares, cfg)
        payoff = float(np.sum(payoff_terms(shares[0], config_f, 1.0, oc, orr)))
        yield (I, a1, a2, payoff, limit_price(profile), final_stock(profile))
