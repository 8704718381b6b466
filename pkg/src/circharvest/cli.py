"""Command-line entry point: ``circharvest <command> [options]``.

Every command reads a flat scenario (defaults below, then an optional
``--config`` TOML or JSON file, then command-line flags) and writes one
CSV or JSON table to ``--out`` or standard output. Exit status is 0 on
success, 1 on invalid input and 2 when a solver fails to converge.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from typing import Optional


from . import durable, game, limitp, nondurable, optctrl
from .io import csv_text, emit, json_text
from .model import ConvergenceError, DomainError, ModelParams, ParameterError, round_schedule

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("circharvest")

COMMANDS = (
    "nondurable-eval",
    "nondurable-optimize",
    "sweep",
    "control-solve",
    "durable-solve",
    "game-solve",
    "game-closed-form",
    "limit-detect",
    "limit-discount",
)


def _knob(default, help):
    if isinstance(default, (list, tuple)):
        return field(default=tuple(default), metadata={"help": help})
    return field(default=default, metadata={"help": help})


@dataclass
class Scenario:
    """All knobs of all commands, flat. ``None`` means derived from other knobs."""

    # model
    growth_rate: float = _knob(0.15, "intrinsic growth rate r")
    discount_rate: float = _knob(0.0, "discount rate rho")
    horizon: float = _knob(10.0, "time horizon T")
    round_time: float = _knob(5.0, "round time theta")
    initial_stock: float = _knob(1.0, "uniform initial stock y0")
    # non-durable revenue
    alpha: float = _knob(0.28, "constant harvesting share for nondurable-eval")
    theta_grid: Optional[tuple] = _knob(None, "round times for optimize/sweep (default: round_time)")
    alpha_grid: tuple = _knob(tuple(round(k / 100, 2) for k in range(101)), "shares for sweep")
    variant: str = _knob("closed-form", "revenue evaluator: closed-form or oracle")
    final_term: str = _knob("one_minus_alpha", "final-round term: one_minus_alpha or alpha")
    locations: int = _knob(4096, "spatial cells of the oracle")
    resolution: float = _knob(1e-3, "grid resolution of the share scan")
    optimize_tol: float = _knob(1e-8, "golden-section tolerance")
    # optimal control
    steps_per_round: int = _knob(512, "time steps per round")
    control_damping: float = _knob(0.5, "sweep relaxation factor")
    control_tol: float = _knob(1e-10, "sweep convergence tolerance")
    max_iter: int = _knob(10000, "iteration cap of the iterative solvers")
    # durable monopoly and game
    players: int = _knob(2, "number of players I")
    rounds: int = _knob(2, "number of rounds N")
    growth_factors: Optional[tuple] = _knob(None, "per-round factors (default: exp((n-1) theta (r - rho)))")
    depletion: str = _knob("own", "stock depletion in the game: own or aggregate")
    nash_damping: float = _knob(0.5, "best-response relaxation factor")
    nash_tol: float = _knob(1e-12, "best-response convergence tolerance")
    i_min: int = _knob(1, "first player count of game-closed-form")
    i_max: int = _knob(50, "last player count of game-closed-form")
    # replica economy
    i_grid: tuple = _knob((10, 30, 100, 300, 1000), "player counts of limit-detect")
    noise_variance: float = _knob(0.01, "variance of the share noise")
    trials: int = _knob(10000, "Monte Carlo trials per player count")
    seed: int = _knob(0, "master seed of the noise generator")
    bracket_lo: float = _knob(1e-6, "lower end of the discount-rate bracket")
    bracket_hi: float = _knob(50.0, "upper end of the discount-rate bracket")
    replica_round_time: float = _knob(1.0, "round time used for discounting in the replica game")
    threads: int = _knob(1, "worker threads")

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in dataclasses.asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        known = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, value in data.items():
            name = key.replace("-", "_")
            if name not in known:
                raise ParameterError(f"unknown configuration key {key!r}")
            kwargs[name] = _coerce(known[name], value)
        return cls(**kwargs)

    def model_params(self, round_time: float | None = None) -> ModelParams:
        return ModelParams(
            growth_rate=self.growth_rate,
            discount_rate=self.discount_rate,
            horizon=self.horizon,
            round_time=self.round_time if round_time is None else round_time,
            initial_stock=self.initial_stock,
        )

    def factors(self) -> tuple:
        if self.growth_factors is not None:
            if len(self.growth_factors) != self.rounds:
                raise ParameterError("growth_factors needs one entry per round")
            return tuple(self.growth_factors)
        return tuple(durable.growth_factors_from_params(self.model_params(), self.rounds))

    def game_config(self) -> game.GameConfig:
        return game.GameConfig(self.players, self.rounds, self.factors(), self.initial_stock, self.depletion)

    def replica_config(self) -> limitp.ReplicaConfig:
        return limitp.ReplicaConfig(
            self.players, self.rounds, self.discount_rate, self.noise_variance, self.trials, self.seed, self.replica_round_time
        )


def _coerce(f: dataclasses.Field, value):
    """Convert a config or flag value to the type of the field's default."""
    default = f.default
    if value is None:
        return None
    if f.name in ("theta_grid", "alpha_grid", "growth_factors", "i_grid"):
        if isinstance(value, str):
            value = [v for v in value.replace(" ", "").split(",") if v]
        cast = int if f.name == "i_grid" else float
        try:
            return tuple(cast(v) for v in value)
        except (TypeError, ValueError) as exc:
            raise ParameterError(f"{f.name}: {exc}") from None
    try:
        if isinstance(default, bool):
            return value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes")
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(f"expected an integer, got {value}")
            return int(value)
        if isinstance(default, float):
            return float(value)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ParameterError(f"{f.name}: {exc}") from None


def load_config(path: str) -> dict:
    with open(path, "rb") as fh:
        raw = fh.read()
    if path.endswith(".json"):
        return json.loads(raw.decode("utf-8"))
    return tomllib.loads(raw.decode("utf-8"))


# --- commands ---------------------------------------------------------------


def _thetas(sc: Scenario) -> list[float]:
    return list(sc.theta_grid) if sc.theta_grid is not None else [sc.round_time]


def cmd_nondurable_eval(sc: Scenario) -> str:
    params = sc.model_params()
    plan = nondurable.ConstantSharePlan(sc.alpha, sc.round_time)
    if sc.variant == "oracle":
        g = nondurable.aggregate_revenue_oracle(plan, params, sc.locations)
    elif sc.variant == "closed-form":
        g = nondurable.aggregate_revenue_closed(plan, params, sc.final_term)
    else:
        raise ParameterError("variant must be 'closed-form' or 'oracle'")
    return csv_text(("theta", "alpha", "G", "variant"), [(sc.round_time, sc.alpha, g, sc.variant)])


def cmd_nondurable_optimize(sc: Scenario) -> str:
    params = sc.model_params()
    rows = []
    for theta in _thetas(sc):
        a, g = nondurable.optimize_constant_share(theta, params, sc.resolution, sc.optimize_tol, sc.final_term)
        rows.append((theta, a, g, "optimum"))
    return csv_text(("theta", "alpha", "G", "variant"), rows)


def cmd_sweep(sc: Scenario) -> str:
    table = nondurable.sweep_objective(_thetas(sc), sc.alpha_grid, sc.model_params(), sc.variant, sc.locations, sc.threads)
    return csv_text(table.header, table.records())


def cmd_control_solve(sc: Scenario) -> str:
    params = sc.model_params()
    grid = round_schedule(params, sc.steps_per_round)
    sol = optctrl.solve_optimal_control(params, grid, sc.control_damping, sc.control_tol, sc.max_iter)
    return csv_text(("round", "t", "alpha", "p", "f_before"), optctrl.export_rows(sol))


def cmd_durable_solve(sc: Scenario) -> str:
    sol = durable.solve_monopoly(sc.rounds, sc.factors(), sc.initial_stock)
    header = ("N", "case", *(f"alpha_{n}" for n in range(1, sc.rounds + 1)), "objective", "residual")
    return csv_text(header, [durable.export_row(sol)])


def cmd_game_solve(sc: Scenario) -> str:
    result = game.solve_nash(sc.game_config(), sc.nash_damping, sc.nash_tol, sc.max_iter, threads=sc.threads)
    if not result.converged:
        raise ConvergenceError(
            f"best-response iteration did not converge (foc residual {result.foc_residual:.3e}, "
            f"{result.iterations} iterations)",
            result.to_dict(),
        )
    return json_text(result.to_dict())


def cmd_game_closed_form(sc: Scenario) -> str:
    if not 1 <= sc.i_min <= sc.i_max:
        raise ParameterError("need 1 <= i_min <= i_max")
    rows = game.closed_form_sweep_rows(range(sc.i_min, sc.i_max + 1))
    return csv_text(("I", "alpha1", "alpha2", "payoff", "limit_price", "final_stock"), rows)


def _replica_game(sc: Scenario) -> game.GameConfig:
    return game.GameConfig(sc.players, sc.rounds, sc.factors(), sc.initial_stock, "aggregate", float(sc.players))


def cmd_limit_detect(sc: Scenario) -> str:
    report = limitp.detection_experiment(sc.i_grid, sc.replica_config(), _replica_game(sc), sc.threads)
    log.info("shift slope %.4f, noise std slope %.4f", report.shift_slope, report.std_slope)
    return csv_text(("I", "shift", "noise_std", "power"), report.rows())


def cmd_limit_discount(sc: Scenario) -> str:
    res = limitp.critical_discount(sc.replica_config(), _replica_game(sc), (sc.bracket_lo, sc.bracket_hi))
    out = res.to_dict()
    out["residual"] = abs(res.gap)
    out["players"] = sc.players
    out["rounds"] = sc.rounds
    return json_text(out)


COMMAND_HELP = {
    "nondurable-eval": "revenue of one constant share",
    "nondurable-optimize": "best constant share for each round time",
    "sweep": "revenue table over round times and shares",
    "control-solve": "optimal harvesting control path",
    "durable-solve": "durable-good monopoly shares",
    "game-solve": "Nash equilibrium of the harvesting game (JSON)",
    "game-closed-form": "two-round symmetric equilibrium over player counts",
    "limit-detect": "Monte Carlo detection power in the replica economy",
    "limit-discount": "critical discount rate of grim-trigger collusion (JSON)",
}

HANDLERS = {name: globals()["cmd_" + name.replace("-", "_")] for name in COMMANDS}


# --- argument parsing -------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1 (status 2 is reserved for solver failures)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat TOML or JSON scenario file")
    common.add_argument("--out", help="output file (default: standard output)")
    common.add_argument("-v", "--verbose", action="store_true")
    for f in dataclasses.fields(Scenario):
        flag = "--" + f.name.replace("_", "-")
        common.add_argument(flag, dest=f.name, default=None, help=f.metadata["help"])
    parser = _Parser(prog="circharvest", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=COMMAND_HELP[name])
    return parser


def scenario_from_args(args: argparse.Namespace) -> Scenario:
    data = load_config(args.config) if args.config else {}
    sc = Scenario.from_dict(data)
    overrides = {}
    for f in dataclasses.fields(Scenario):
        value = getattr(args, f.name)
        if value is not None:
            overrides[f.name] = _coerce(f, value)
    return dataclasses.replace(sc, **overrides)


def run(command: str, scenario: Scenario, out: str | None = None) -> int:
    """Run one command; the artifact is written only after the solver succeeded."""
    if command not in HANDLERS:
        print(f"circharvest: unknown command {command!r}", file=sys.stderr)
        return 1
    try:
        text = HANDLERS[command](scenario)
    except ConvergenceError as exc:
        print(f"circharvest: {exc}", file=sys.stderr)
        if exc.diagnostics is not None:
            print(f"diagnostics: {exc.diagnostics}", file=sys.stderr)
        return 2
    except (ParameterError, DomainError, ValueError) as exc:
        print(f"circharvest: {exc}", file=sys.stderr)
        return 1
    emit(text, out)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        scenario = scenario_from_args(args)
    except (ParameterError, OSError, ValueError) as exc:
        print(f"circharvest: {exc}", file=sys.stderr)
        return 1
    return run(args.command, scenario, args.out)


if __name__ == "__main__":
    sys.exit(main())
