"""Model parameters, round geometry on the circle and growth/harvest primitives."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# relative slack for snapping T/theta onto an integer round count
_ROUND_SNAP = 1e-9


class ParameterError(ValueError):
    """Invalid model or solver parameter."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class ConvergenceError(RuntimeError):
    """Iterative solver stopped without meeting its tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the harvesting model.

    ``round_time`` is the time needed to circle the periphery once; the
    speed is derived from it. ``initial_stock`` is the uniform stock level
    on the circle at time zero.
    """

    growth_rate: float
    discount_rate: float = 0.0
    horizon: float = 10.0
    round_time: float = 5.0
    initial_stock: float = 1.0

    def __post_init__(self):
        if not self.horizon > 0:
            raise ParameterError(f"horizon must be positive, got {self.horizon}")
        if not self.round_time > 0:
            raise ParameterError(f"round_time must be positive, got {self.round_time}")
        if not self.discount_rate >= 0:
            raise ParameterError(f"discount_rate must be >= 0, got {self.discount_rate}")
        if not self.initial_stock >= 0:
            raise ParameterError(f"initial_stock must be >= 0, got {self.initial_stock}")
        if not math.isfinite(self.growth_rate):
            raise ParameterError("growth_rate must be finite")

    @property
    def net_growth(self) -> float:
        return self.growth_rate - self.discount_rate

    @property
    def speed(self) -> float:
        return TWO_PI / self.round_time

    @classmethod
    def from_net_growth(cls, net_growth: float, discount_rate: float = 0.0, **kw) -> "ModelParams":
        """Build parameters from the net growth sigma = r - rho and a discount rate."""
        return cls(growth_rate=net_growth + discount_rate, discount_rate=discount_rate, **kw)


@dataclass(frozen=True)
class RoundGrid:
    """Complete rounds until the horizon plus a per-round time grid.

    Each round is sampled at ``steps_per_round + 1`` nodes ``t_j = j * step``
    covering ``[0, round_time]``. Round ``complete_rounds`` is the possibly
    incomplete last round; its nodes at ``t >= residual`` lie past the
    horizon, where the stock is zero by convention.
    """

    complete_rounds: int
    residual: float
    steps_per_round: int
    round_time: float

    @property
    def step(self) -> float:
        return self.round_time / self.steps_per_round

    @property
    def horizon(self) -> float:
        return self.complete_rounds * self.round_time + self.residual

    @property
    def n_rounds(self) -> int:
        """Number of round slots stored, including the final partial one."""
        return self.complete_rounds + 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps_per_round + 1) * self.step

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rounds, self.steps_per_round + 1)

    def round_start_times(self) -> np.ndarray:
        return np.arange(self.n_rounds) * self.round_time

    def absolute_times(self) -> np.ndarray:
        """Calendar time t + theta*l of every node, shape ``(n_rounds, M+1)``."""
        return self.round_start_times()[:, None] + self.times[None, :]

    def active_mask(self, extended: bool = True) -> np.ndarray:
        """Boolean mask of nodes before the horizon.

        With ``extended=True`` (the default) the final round is cut at the
        residual time and everything after it is inactive. With
        ``extended=False`` every stored node counts as active.
        """
        mask = np.ones(self.shape, dtype=bool)
        if extended:
            mask[-1] = self.times < self.residual
        return mask

    def quadrature_weights(self) -> np.ndarray:
        """Trapezoidal weights per node, zero on the inactive tail.

        Every complete round uses the same weights, which keeps the discrete
        adjoint identities exact.
        """
        w = np.full(self.steps_per_round + 1, self.step)
        w[0] = w[-1] = 0.5 * self.step
        weights = np.tile(w, (self.n_rounds, 1))
        return weights * self.active_mask()


def round_schedule(params: ModelParams, steps_per_round: int = 512) -> RoundGrid:
    """Count complete rounds ``k = floor(T/theta)`` and the residual time."""
    if steps_per_round < 1:
        raise ParameterError("steps_per_round must be >= 1")
    T, theta = params.horizon, params.round_time
    q = T / theta
    nearest = round(q)
    if abs(q - nearest) <= _ROUND_SNAP * max(1.0, q):
        k, residual = int(nearest), 0.0
    else:
        k = int(math.floor(q))
        residual = T - k * theta
        if residual < 0.0:
            k -= 1
            residual = T - k * theta
    return RoundGrid(k, residual, int(steps_per_round), theta)


def location_at(t, params: ModelParams):
    """Angular position ``mod(v t, 2 pi)`` of the harvester at time ``t``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ParameterError("time must be non-negative")
    # reduce in units of rounds so that t = n*theta maps to exactly 0
    frac = np.mod(t_arr / params.round_time, 1.0)
    out = TWO_PI * frac
    return float(out) if out.ndim == 0 else out


def arrival_time(n: int, x, params: ModelParams):
    """Time of the n-th arrival (n >= 1) at angle x."""
    return (n - 1) * params.round_time + params.round_time * np.asarray(x) / TWO_PI


def grow(stock, duration, rate: float):
    """Exponential growth of ``stock`` over ``duration`` at ``rate``."""
    if np.any(np.asarray(duration) < 0):
        raise ParameterError("duration must be non-negative")
    if np.any(np.asarray(stock) < 0):
        raise ParameterError("stock must be non-negative")
    return stock * np.exp(rate * np.asarray(duration))


@dataclass(frozen=True)
class StockState:
    before: float
    after: float

    @property
    def harvested(self):
        return self.before - self.after


def harvest_jump(before, share) -> StockState:
    """Remove the fraction ``share`` of the standing stock."""
    s = np.asarray(share, dtype=float)
    if np.any(s < 0) or np.any(s > 1) or np.any(np.isnan(s)):
        raise DomainError("harvest share must lie in [0, 1]")
    if np.any(np.asarray(before) < 0):
        raise ParameterError("stock must be non-negative")
    return StockState(before, (1.0 - share) * before)
