"""Collusion, grim punishment and noisy detection in the replica economy.

In the replica economy indexed by the player count ``I`` every firm's demand
is scaled by ``I``: the market price is ``1 - (1/I) * total supply`` and the
common stock is depleted by the average harvest. Firms collude on the
monopoly share ``1/(N+1)`` and punish with the scaled Cournot share
``I/(I(N-1)+2)`` forever after a detected deviation.

Repetition is over harvesting cycles of ``N`` rounds. A deviation happens
in round 1 of a cycle and is detected after that round, so the deviator
earns the deviation payoff in round 1 and punishment payoffs from round 2
on. Payoffs are discounted per round by ``exp(-rho * theta)``.

Noise draws use numpy's PCG64 generator; every Monte Carlo lane derives
its stream from the master seed through ``SeedSequence.spawn``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .durable import payoff_terms
from .game import GameConfig, StrategyProfile, best_response
from .model import ParameterError


class BracketError(ParameterError):
    """The bracket does not straddle a sign change."""


@dataclass(frozen=True)
class ReplicaConfig:
    players: int
    rounds: int
    discount_rate: float = 0.0
    noise_variance: float = 0.01
    trials: int = 10_000
    seed: int = 0
    round_time: float = 1.0

    def __post_init__(self):
        if self.players < 1 or self.rounds < 1:
            raise ParameterError("players and rounds must be >= 1")
        if self.discount_rate < 0:
            raise ParameterError("discount_rate must be >= 0")
        # zero variance is allowed for noiseless control runs
        if not 0.0 <= self.noise_variance < math.inf:
            raise ParameterError("noise_variance must be finite and >= 0")
        if self.trials < 1:
            raise ParameterError("trials must be >= 1")
        if not self.round_time > 0:
            raise ParameterError("round_time must be positive")

    def with_players(self, players: int) -> "ReplicaConfig":
        return ReplicaConfig(players, self.rounds, self.discount_rate, self.noise_variance, self.trials, self.seed, self.round_time)


def replica_collusive_share(N: int) -> float:
    if N < 1:
        raise ParameterError("N must be >= 1")
    return 1.0 / (N + 1)


def replica_cournot_share(I: int, N: int) -> float:
    if I < 1 or N < 1:
        raise ParameterError("I and N must be >= 1")
    return I / (I * (N - 1) + 2)


def _round_payoffs(shares: np.ndarray, i: int, factors, y0: float) -> np.ndarray:
    """Per-round replica payoffs of firm ``i``; no admissibility check."""
    I = shares.shape[0]
    others = shares.sum(axis=0) - shares[i]
    return payoff_terms(shares[i], factors, y0, np.cumsum(others), others, float(I))


@dataclass
class DeviationProfit:
    """Round-1 payoffs of a deviating, colluding and punishing firm.

    ``deviation``, ``collusive_per_round`` and ``punishment_per_round`` are
    round-1 payoffs. The ``*_cycle`` methods give discounted payoffs of a
    whole ``N``-round cycle, which drive the grim-trigger comparison.
    """

    deviation: float
    collusive_per_round: float
    punishment_per_round: float
    deviation_share: float
    collusive_share: float
    punishment_share: float
    players: int
    factors: tuple[float, ...] = field(repr=False)
    y0: float = field(default=1.0, repr=False)

    def _profile(self, deviator_first: float, rest: float, others_first: float) -> np.ndarray:
        N = len(self.factors)
        shares = np.full((self.players, N), rest)
        shares[:, 0] = others_first
        shares[0, 0] = deviator_first
        return shares

    def _discounted(self, shares: np.ndarray, delta: float) -> float:
        terms = _round_payoffs(shares, 0, self.factors, self.y0)
        return float(np.sum(terms * delta ** np.arange(len(terms))))

    def collusive_cycle(self, delta: float) -> float:
        m = self.collusive_share
        return self._discounted(self._profile(m, m, m), delta)

    def punishment_cycle(self, delta: float) -> float:
        s = self.punishment_share
        return self._discounted(self._profile(s, s, s), delta)

    def deviation_cycle(self, delta: float) -> float:
        return self._discounted(
            self._profile(self.deviation_share, self.punishment_share, self.collusive_share), delta
        )

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.deviation, self.collusive_per_round, self.punishment_per_round)


def deviation_profit(config: ReplicaConfig, game: GameConfig) -> DeviationProfit:
    """Best one-round deviation against colluding rivals, plus reference payoffs.

    The deviator's round-1 share maximizes its round-1 payoff with the rivals
    at the collusive share (a one-round best response, own share capped at
    1). Harvesting costs are zero. With a single firm there is no one to
    deviate from, so the deviation equals the collusive play.
    """
    I, N = config.players, config.rounds
    if game.rounds != N:
        raise ParameterError("game and replica configs disagree on the number of rounds")
    factors = tuple(game.growth_factors)
    m = replica_collusive_share(N)
    s = replica_cournot_share(I, N)
    if I == 1:
        a_dev = m
    else:
        one_round = GameConfig(I, 1, factors[:1], game.y0, "aggregate", float(I))
        rivals = StrategyProfile(np.full((I, 1), m))
        a_dev = float(best_response(0, rivals, one_round).shares[0])

    def first_round(shares):
        return float(_round_payoffs(shares, 0, factors[:1], game.y0)[0])

    col = np.full((I, 1), m)
    dev = col.copy()
    dev[0, 0] = a_dev
    pun = np.full((I, 1), s)
    return DeviationProfit(
        deviation=first_round(dev),
        collusive_per_round=first_round(col),
        punishment_per_round=first_round(pun),
        deviation_share=a_dev,
        collusive_share=m,
        punishment_share=s,
        players=I,
        factors=factors,
        y0=game.y0,
    )


def sustainability_gap(rho: float, profit: DeviationProfit, round_time: float = 1.0) -> float:
    """Value of colluding forever minus deviating once and being punished forever.

    Positive means collusion is self-enforcing at discount rate ``rho``.
    """
    if rho < 0:
        raise ParameterError("rho must be >= 0")
    N = len(profit.factors)
    delta = math.exp(-rho * round_time)
    C = profit.collusive_cycle(delta)
    P = profit.punishment_cycle(delta)
    D = profit.deviation_cycle(delta)
    cycle = delta**N
    if cycle >= 1.0:
        diff = C - P
        return math.inf if diff > 0 else (0.0 if diff == 0 and C == D else -math.inf)
    return ((C - D) + cycle * (D - P)) / (1.0 - cycle)


@dataclass
class CriticalDiscount:
    rho: float
    gap: float
    bracket: tuple[float, float]
    iterations: int

    def to_dict(self) -> dict:
        return {"rho": self.rho, "gap": self.gap, "bracket": list(self.bracket), "iterations": self.iterations}


def critical_discount(
    config: ReplicaConfig,
    game: GameConfig,
    bracket: tuple[float, float] = (1e-6, 50.0),
    tol: float = 1e-10,
    max_iter: int = 400,
) -> CriticalDiscount:
    """Discount rate at which grim-trigger collusion stops being self-enforcing.

    Bisection on the sustainability gap; collusion holds for every rate
    below the returned one.
    """
    lo, hi = map(float, bracket)
    if not 0 <= lo < hi:
        raise ParameterError("bracket must satisfy 0 <= lo < hi")
    profit = deviation_profit(config, game)

    def gap(r):
        return sustainability_gap(r, profit, config.round_time)

    g_lo, g_hi = gap(lo), gap(hi)
    if not (g_lo > 0 > g_hi or g_lo < 0 < g_hi):
        raise BracketError(f"no sign change on [{lo}, {hi}]: gap {g_lo:.3e}, {g_hi:.3e}")
    it = 0
    mid, g_mid = lo, g_lo
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        g_mid = gap(mid)
        if abs(g_mid) < tol or hi - lo < 1e-15 * max(1.0, hi):
            break
        if (g_mid > 0) == (g_lo > 0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    return CriticalDiscount(mid, g_mid, (float(bracket[0]), float(bracket[1])), it)


def noisy_price_sample(shares: Sequence[float], config: ReplicaConfig, rng: np.random.Generator) -> float:
    """Replica price ``1 - mean(alpha_i + eps_i)`` with Gaussian share noise."""
    a = np.asarray(shares, dtype=float)
    if a.shape != (config.players,):
        raise ParameterError("need one share per player")
    eps = rng.normal(0.0, math.sqrt(config.noise_variance), size=a.shape)
    return float(1.0 - np.mean(a + eps))


def _price_draws(mean_share: float, I: int, variance: float, trials: int, rng, chunk: int = 1000) -> np.ndarray:
    out = np.empty(trials)
    sd = math.sqrt(variance)
    for start in range(0, trials, chunk):
        n = min(chunk, trials - start)
        noise = rng.standard_normal((n, I)).mean(axis=1) * sd
        out[start:start + n] = 1.0 - mean_share - noise
    return out


@dataclass
class DetectionRecord:
    players: int
    shift: float
    noise_std: float
    power: float
    false_alarm: float
    power_se: float
    empirical_shift: float
    empirical_std: float


@dataclass
class DetectionReport:
    records: list[DetectionRecord]
    shift_slope: float
    std_slope: float
    analytic_shift_slope: float
    analytic_std_slope: float

    def rows(self):
        for r in self.records:
            yield (r.players, r.shift, r.noise_std, r.power)


def _slope(xs, ys) -> float:
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    if np.any(ys <= 0):
        return math.nan
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def detection_experiment(
    I_grid: Sequence[int], config: ReplicaConfig, game: GameConfig, threads: int = 1
) -> DetectionReport:
    """Monte Carlo power of spotting a single deviation from the noisy price.

    For each ``I`` the cartel price and the price with one firm at its
    best deviation are simulated ``trials`` times. The test flags a
    deviation when the price falls below the midpoint of the two means.
    Slopes are log-log fits of the simulated mean shift and price standard
    deviation against ``I``.
    """
    grid = [int(I) for I in I_grid]
    if len(grid) < 2 or len(set(grid)) != len(grid) or any(I < 2 for I in grid):
        raise ParameterError("I_grid needs at least two distinct player counts, all >= 2")
    streams = np.random.SeedSequence(config.seed).spawn(len(grid))

    def run(k):
        I = grid[k]
        rng = np.random.Generator(np.random.PCG64(streams[k]))
        profit = deviation_profit(config.with_players(I), game)
        m = profit.collusive_share
        shift = (profit.deviation_share - m) / I
        noise_std = math.sqrt(config.noise_variance / I)
        cartel = _price_draws(m, I, config.noise_variance, config.trials, rng)
        deviated = _price_draws(m + shift, I, config.noise_variance, config.trials, rng)
        threshold = 1.0 - m - 0.5 * shift
        power = float(np.mean(deviated < threshold))
        false_alarm = float(np.mean(cartel < threshold))
        return DetectionRecord(
            I,
            shift,
            noise_std,
            power,
            false_alarm,
            math.sqrt(max(power * (1 - power), 1e-300) / config.trials),
            float(cartel.mean() - deviated.mean()),
            float(cartel.std(ddof=1)) if config.trials > 1 else 0.0,
        )

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(run, range(len(grid))))
    else:
        records = [run(k) for k in range(len(grid))]
    Is = [r.players for r in records]
    return DetectionReport(
        records,
        _slope(Is, [r.empirical_shift for r in records]),
        _slope(Is, [r.empirical_std for r in records]),
        _slope(Is, [r.shift for r in records]),
        _slope(Is, [r.noise_std for r in records]),
    )


def last_round_collusion_unenforceable(shares: Sequence[float]) -> bool:
    """True when a collusive plan puts all its harvest in the final round.

    A deviation in the last round cannot be punished, so such a plan is not
    sustainable among several firms.
    """
    a = np.asarray(shares, dtype=float)
    return bool(a[-1] > 0 and np.all(a[:-1] == 0))
