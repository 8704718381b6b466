"""Round-decomposed optimal harvesting control.

All trajectories live on a :class:`~circharvest.model.RoundGrid`: arrays of
shape ``(k + 1, M + 1)`` where row ``l`` holds round ``l`` sampled at
``t_j = j * step`` on ``[0, theta]``. Row ``k`` is the possibly incomplete
last round; its nodes at ``t >= T - k theta`` are inactive and excluded
from every integral.

The objective is the discounted revenue with per-unit price ``1 - alpha``::

    G(alpha) = sum_l int e^{-rho (t + theta l)} alpha (1 - alpha) f_l(t-) dt

and the solver iterates the adjoint recursion and the clamped first-order
rule ``alpha = (1 - e^{rho (t + theta l) + r theta} p_{l+1}) / 2`` until the
control stops moving.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .model import ConvergenceError, DomainError, ModelParams, ParameterError, RoundGrid, round_schedule

log = logging.getLogger(__name__)


@dataclass
class ControlPath:
    values: np.ndarray
    grid: RoundGrid

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ParameterError(f"control shape {self.values.shape} does not match grid {self.grid.shape}")
        if np.any(self.values < 0) or np.any(self.values > 1):
            raise DomainError("control samples must lie in [0, 1]")

    @classmethod
    def constant(cls, value: float, grid: RoundGrid) -> "ControlPath":
        return cls(np.full(grid.shape, float(value)), grid)

    @property
    def active(self) -> np.ndarray:
        return self.grid.active_mask()


@dataclass
class DensityTrajectory:
    before_harvest: np.ndarray
    grid: RoundGrid


@dataclass
class AdjointTrajectory:
    p: np.ndarray
    grid: RoundGrid


@dataclass
class SensitivityTrajectory:
    z: np.ndarray
    grid: RoundGrid


@dataclass
class SolverDiagnostics:
    iterations: int
    residual: float
    converged: bool
    damping: float
    tol: float


def _discount(grid: RoundGrid, params: ModelParams) -> np.ndarray:
    return np.exp(-params.discount_rate * grid.absolute_times())


def forward_density(control: ControlPath, params: ModelParams) -> DensityTrajectory:
    """Stock just before harvest in every round, from the uniform initial stock."""
    grid = control.grid
    a = control.values
    carry = np.exp(params.growth_rate * grid.round_time)
    f = np.empty(grid.shape)
    f[0] = params.initial_stock * np.exp(params.growth_rate * grid.times)
    for l in range(grid.n_rounds - 1):
        f[l + 1] = carry * (1.0 - a[l]) * f[l]
    f[~grid.active_mask()] = 0.0
    return DensityTrajectory(f, grid)


def sensitivity(control: ControlPath, perturbation: ControlPath | np.ndarray, params: ModelParams) -> SensitivityTrajectory:
    """Directional derivative of the densities along ``perturbation``.

    ``perturbation`` is a direction, so it may be any real array of the grid
    shape (it is not required to lie in [0, 1]).
    """
    grid = control.grid
    w = perturbation.values if isinstance(perturbation, ControlPath) else np.asarray(perturbation, dtype=float)
    if w.shape != grid.shape:
        raise ParameterError("perturbation does not match the control grid")
    a = control.values
    f = forward_density(control, params).before_harvest
    carry = np.exp(params.growth_rate * grid.round_time)
    z = np.zeros(grid.shape)
    for l in range(grid.n_rounds - 1):
        z[l + 1] = carry * (-w[l] * f[l] + (1.0 - a[l]) * z[l])
    z[~grid.active_mask()] = 0.0
    return SensitivityTrajectory(z, grid)


def backward_adjoint(control: ControlPath, params: ModelParams) -> AdjointTrajectory:
    """Adjoint state ``p_l`` from the terminal round back to round 0."""
    grid = control.grid
    a = control.values
    source = _discount(grid, params) * a * (1.0 - a)
    carry = np.exp(params.growth_rate * grid.round_time)
    p = np.empty(grid.shape)
    k = grid.n_rounds - 1
    p[k] = np.where(grid.active_mask()[k], source[k], 0.0)
    for l in range(k - 1, -1, -1):
        p[l] = carry * (1.0 - a[l]) * p[l + 1] + source[l]
    return AdjointTrajectory(p, grid)


def switching_function(adjoint: AdjointTrajectory, params: ModelParams) -> np.ndarray:
    """Unclamped first-order share ``a_l(t)`` for rounds ``0..k-1``."""
    grid = adjoint.grid
    shift = params.discount_rate * grid.absolute_times()[:-1] + params.growth_rate * grid.round_time
    return 0.5 * (1.0 - np.exp(shift) * adjoint.p[1:])


def control_update(adjoint: AdjointTrajectory, params: ModelParams) -> ControlPath:
    """Project the first-order rule onto [0, 1]; the last round harvests half."""
    grid = adjoint.grid
    alpha = np.empty(grid.shape)
    alpha[:-1] = np.clip(switching_function(adjoint, params), 0.0, 1.0)
    alpha[-1] = 0.5
    return ControlPath(alpha, grid)


def objective(control: ControlPath, params: ModelParams, density: DensityTrajectory | None = None) -> float:
    """Discounted revenue by trapezoidal quadrature over the active nodes."""
    grid = control.grid
    if density is None:
        density = forward_density(control, params)
    a = control.values
    integrand = _discount(grid, params) * a * (1.0 - a) * density.before_harvest
    return float(np.sum(grid.quadrature_weights() * integrand))


def gateaux_check(control: ControlPath, perturbation: ControlPath | np.ndarray, params: ModelParams) -> float:
    """First variation of the objective at ``control`` in direction ``perturbation``.

    At an optimal control the value is non-positive for every admissible
    direction.
    """
    grid = control.grid
    w = perturbation.values if isinstance(perturbation, ControlPath) else np.asarray(perturbation, dtype=float)
    a = control.values
    f = forward_density(control, params).before_harvest
    z = sensitivity(control, w, params).z
    integrand = _discount(grid, params) * (w * (1.0 - 2.0 * a) * f + a * (1.0 - a) * z)
    return float(np.sum(grid.quadrature_weights() * integrand))


def duality_sides(control: ControlPath, perturbation: np.ndarray, params: ModelParams) -> tuple[float, float]:
    """Both sides of the adjoint/sensitivity duality identity.

    Returns ``(sum_l int e^{-rho t} alpha (1-alpha) z_l,
    -sum_{l<k} int e^{r theta} w_l f_l p_{l+1})``; they agree for any
    control and direction.
    """
    grid = control.grid
    w = np.asarray(perturbation, dtype=float)
    a = control.values
    f = forward_density(control, params).before_harvest
    z = sensitivity(control, w, params).z
    p = backward_adjoint(control, params).p
    weights = grid.quadrature_weights()
    lhs = np.sum(weights * _discount(grid, params) * a * (1.0 - a) * z)
    carry = np.exp(params.growth_rate * grid.round_time)
    rhs = -np.sum(weights[:-1] * carry * w[:-1] * f[:-1] * p[1:])
    return float(lhs), float(rhs)


@dataclass
class ControlSolution:
    control: ControlPath
    objective: float
    adjoint: AdjointTrajectory
    density: DensityTrajectory
    diagnostics: SolverDiagnostics


def solve_optimal_control(
    params: ModelParams,
    grid: RoundGrid | None = None,
    damping: float = 0.5,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    initial: ControlPath | None = None,
    raise_on_failure: bool = True,
) -> ControlSolution:
    """Damped forward-backward sweep for the optimal harvesting control.

    Raises :class:`ConvergenceError` (carrying the diagnostics) when the
    sup-norm update does not drop below ``tol`` within ``max_iter`` sweeps,
    unless ``raise_on_failure`` is false.
    """
    if not 0.0 < damping <= 1.0:
        raise ParameterError("damping must lie in (0, 1]")
    if not tol > 0:
        raise ParameterError("tol must be positive")
    if grid is None:
        grid = round_schedule(params)
    alpha = initial.values.copy() if initial is not None else np.full(grid.shape, 0.5)
    residual = np.inf
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        current = ControlPath(alpha, grid)
        adjoint = backward_adjoint(current, params)
        proposal = control_update(adjoint, params).values
        residual = float(np.max(np.abs(proposal - alpha)))
        if residual < tol:
            # take the projected update itself so clamped nodes sit exactly on the bounds
            alpha = proposal
            converged = True
            break
        alpha = (1.0 - damping) * alpha + damping * proposal
        # the terminal-round rule is exact, not a relaxation target
        alpha[-1] = 0.5
    diag = SolverDiagnostics(it, residual, converged, damping, tol)
    control = ControlPath(alpha, grid)
    density = forward_density(control, params)
    solution = ControlSolution(control, objective(control, params, density), backward_adjoint(control, params), density, diag)
    log.debug("control sweep: %d iterations, residual %.3e", it, residual)
    if not converged and raise_on_failure:
        raise ConvergenceError(f"control sweep did not converge in {max_iter} iterations (residual {residual:.3e})", diag)
    return solution


def random_admissible_direction(control: ControlPath, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Random direction ``w`` with ``control + eps w`` in [0, 1] for small eps."""
    a = control.values
    w = rng.uniform(-scale, scale, size=a.shape)
    w = np.where(a <= 0.0, np.abs(w), w)
    w = np.where(a >= 1.0, -np.abs(w), w)
    return w


def export_rows(solution: ControlSolution):
    """Rows ``(round, t, alpha, p, f_before)`` for every stored node."""
    grid = solution.control.grid
    times = grid.times
    for l in range(grid.n_rounds):
        for j, t in enumerate(times):
            yield (l, float(t), float(solution.control.values[l, j]), float(solution.adjoint.p[l, j]), float(solution.density.before_harvest[l, j]))
