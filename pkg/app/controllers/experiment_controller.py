import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.controllers.workers import sweep_mapper
from app.core.energy import DecayModel, decay_measurement_simulation, spy_bound_experiment
from app.core.errors import ConfigError, IndistinguishableError
from app.core.estimation import (
    PRODUCT_BOUND,
    HypothesisPair,
    estimation_sweep,
    max_uncertainty_product,
    uncertainty_product_curve,
)
from app.core.hmetric import (
    HamiltonianSchedule,
    dist0,
    min_discrimination_time,
    norm0,
    spread,
    time_dependent_bound,
)
from app.core.protocol import integrated_speed_limit, run_protocol, saturation_protocol, speed_limit_check
from app.core.scenarios import (
    SCENARIO_NAMES,
    ScenarioResult,
    scenario_farhi_gutmann,
    scenario_phase_box,
    scenario_shared_eigenbasis,
    scenario_spin_fields,
)
from app.core.serialization import (
    TRAJECTORY_COLUMNS,
    Cell,
    load_json,
    load_operator,
    parse_layout,
    protocol_from_json,
    trajectory_rows,
    write_csv,
    write_json,
)
from app.core.spectral import HermitianOperator, SpaceLayout
from models import ExperimentConfig, SimParams, parse_dims, parse_floats
from summary_builder import build_summary

logger = logging.getLogger(__name__)

PAIR_PRESETS: Dict[str, Tuple[str, str]] = {
    "spin": ("pauli-z", "-1*pauli-z"),
    "xz": ("pauli-x", "pauli-z"),
    "constant-shift": ("diagonal:1", "diagonal:0"),
}

SCENARIO_KEYS: Dict[str, frozenset] = {
    "spin-fields": frozenset({"muB0"}),
    "phase-box": frozenset({"phi1", "phi2", "h1"}),
    "farhi-gutmann": frozenset({"E", "dims", "threshold"}),
    "shared-eigenbasis": frozenset({"e1", "e2", "k0", "trials"}),
}

SPEED_LIMIT_TOL = 1e-6
DECAY_SIGMAS = 4.0


@dataclass
class CommandOutcome:
    summary: str
    passed: Optional[bool] = None
    artifacts: List[Path] = field(default_factory=list)


class ExperimentController:
    def __init__(self, config: ExperimentConfig, sim: SimParams):
        self.config = config
        self.sim = sim
        self.out_dir = Path(config.output_path)
        self.artifacts: List[Path] = []
        self._handlers: Dict[str, Callable[[], CommandOutcome]] = {
            "dist": self.run_dist,
            "bound": self.run_bound,
            "protocol": self.run_protocol,
            "estimate": self.run_estimate,
            "product": self.run_product,
            "spy": self.run_spy,
            "decay": self.run_decay,
            "scenario": self.run_scenario,
        }

    def run(self) -> CommandOutcome:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        logger.info("%s: seed %d, output %s", self.config.command, self.config.seed, self.out_dir)
        outcome = self._handlers[self.config.command]()
        outcome.artifacts = list(self.artifacts)
        return outcome

    # parameter access

    def _operator(self, key: str, default: Optional[str] = None) -> HermitianOperator:
        text = self.config.get(key, default)
        if text is None:
            raise ConfigError(f"--{key} is required for {self.config.command}")
        return load_operator(str(text))

    def _float(self, key: str, default: float) -> float:
        value = self.config.get(key, default)
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"--{key} must be a number, got {value!r}") from None

    def _int(self, key: str, default: int) -> int:
        value = self.config.get(key, default)
        try:
            return int(value)
        except (TypeError, ValueError):
            raise ConfigError(f"--{key} must be an integer, got {value!r}") from None

    def _layout(self, H: HermitianOperator) -> SpaceLayout:
        text = self.config.get("layout")
        return SpaceLayout(H.dim, 1, 1) if text is None else parse_layout(str(text))

    def _mapper(self, desc: str) -> Callable:
        return sweep_mapper(self.sim.workers, self.sim.show_progress, desc)

    # artifacts

    def _write_json(self, name: str, obj: Any) -> Path:
        path = self.out_dir / name
        write_json(path, obj)
        self.artifacts.append(path)
        return path

    def _write_csv(self, name: str, header: Sequence[str], rows: Sequence[Sequence[Cell]]) -> Path:
        path = self.out_dir / name
        write_csv(path, header, rows)
        self.artifacts.append(path)
        return path

    # commands

    def run_dist(self) -> CommandOutcome:
        H1, H2 = self._operator("h1"), self._operator("h2")
        d0 = dist0(H1, H2)
        t_min = min_discrimination_time(H1, H2)
        self._write_json(
            "dist.json",
            {"d0": d0, "min_time": t_min, "spread": spread(H1 - H2), "norm0_h1": norm0(H1), "norm0_h2": norm0(H2)},
        )
        return CommandOutcome(build_summary("dist", [("D0", d0), ("pi/D0", t_min)], "T >= pi/D0"))

    def run_bound(self) -> CommandOutcome:
        H1, H2 = self._operator("h1"), self._operator("h2")
        d0 = dist0(H1, H2)
        t_ext = min_discrimination_time(H1, H2)
        try:
            t_restricted: Optional[float] = min_discrimination_time(H1, H2, use_box_extension=False)
        except IndistinguishableError:
            t_restricted = None
        report: Dict[str, Any] = {"d0": d0, "min_time": t_ext, "min_time_without_box_extension": t_restricted}
        passed = None
        values: List[Tuple[str, Any]] = [("D0", d0), ("pi/D0", t_ext), ("pi/spread", t_restricted)]
        if self.config.get("dt") is not None:
            dt = self._float("dt", 0.0)
            bound = time_dependent_bound(HamiltonianSchedule.from_triples([(dt, H1, H2)]))
            report.update(
                duration=dt,
                integral=bound.integral,
                certain_discrimination_possible=bound.certain_discrimination_possible,
            )
            values += [("dt", dt), ("int D0 dt", bound.integral)]
            passed = bound.certain_discrimination_possible
        self._write_json("bound.json", report)
        return CommandOutcome(build_summary("bound", values, "T >= pi/D0, int D0 dt >= pi", passed), passed)

    def run_protocol(self) -> CommandOutcome:
        H1, H2 = self._operator("h1"), self._operator("h2")
        if self.config.get("protocol") is not None:
            proto = protocol_from_json(load_json(str(self.config.get("protocol"))))
        else:
            duration = self._float("dt", 0.0) if self.config.get("dt") is not None else None
            proto = saturation_protocol(
                H1,
                H2,
                self._layout(H1),
                self._int("steps", self.sim.trotter_steps),
                nu=self._float("nu", 0.0),
                duration=duration,
            )
        traj = run_protocol(proto, H1, H2)
        d0 = dist0(H1, H2)
        violation = speed_limit_check(traj, d0)
        excess = integrated_speed_limit(traj, d0)
        passed = violation <= SPEED_LIMIT_TOL and excess <= SPEED_LIMIT_TOL

        self._write_csv("protocol_trajectory.csv", TRAJECTORY_COLUMNS, trajectory_rows(traj))
        self._write_json(
            "protocol.json",
            {
                "d0": d0,
                "bound_time": math.pi / d0 if d0 > 0 else None,
                "total_time": float(traj.times[-1]),
                "steps": len(proto.steps),
                "final_overlap_magnitude": abs(traj.final_overlap),
                "final_theta": traj.final_theta,
                "max_step_violation": violation,
                "integrated_excess": excess,
                "pass": passed,
            },
        )
        return CommandOutcome(
            build_summary(
                "protocol",
                [("|overlap(T)|", abs(traj.final_overlap)), ("theta(T)", traj.final_theta), ("max violation", violation)],
                "d theta/dt <= D0/2, T >= pi/D0",
                passed,
            ),
            passed,
        )

    def _pair(self) -> HypothesisPair:
        preset = self.config.get("pair")
        if preset is not None:
            if self.config.get("h1") is not None or self.config.get("h2") is not None:
                raise ConfigError("give either --pair or --h1/--h2, not both")
            if preset not in PAIR_PRESETS:
                raise ConfigError(f"unknown pair {preset!r} (known: {', '.join(sorted(PAIR_PRESETS))})")
            h1, h2 = PAIR_PRESETS[preset]
            return HypothesisPair(load_operator(h1), load_operator(h2))
        if self.config.get("h1") is None and self.config.get("h2") is None:
            h1, h2 = PAIR_PRESETS["spin"]
            return HypothesisPair(load_operator(h1), load_operator(h2))
        return HypothesisPair(self._operator("h1"), self._operator("h2"))

    def run_estimate(self) -> CommandOutcome:
        pair = self._pair()
        layout = self._layout(pair.H1) if self.config.get("layout") is not None else None
        rows = estimation_sweep(
            pair,
            self._int("grid", self.sim.grid),
            self._int("trials", self.sim.trials),
            self.config.seed,
            trotter_steps=self._int("steps", self.sim.trotter_steps),
            nu=self._float("nu", 0.0),
            layout=layout,
            map_fn=self._mapper("estimate"),
        )
        self._write_csv(
            "estimate.csv",
            ("delta_t", "delta_h_closed", "delta_h_empirical", "stderr", "product", "bound_025_ok"),
            [
                (r.delta_t, r.delta_h_closed, r.delta_h_empirical, r.stderr, r.product, r.bound_025_ok)
                for r in rows
            ],
        )
        within = sum(abs(r.delta_h_empirical - r.delta_h_closed) <= 3 * r.stderr + 1e-12 for r in rows)
        best = max(r.product for r in rows)
        passed = rows[0].bound_025_ok
        return CommandOutcome(
            build_summary(
                "estimate",
                [("D0", pair.d0), ("max product", best), ("points within 3 se", f"{within}/{len(rows)}")],
                "max dt*dH >= 1/4",
                passed,
            ),
            passed,
        )

    def run_product(self) -> CommandOutcome:
        d0 = self._float("d0", 1.0)
        grid = self._int("grid", self.sim.grid)
        dt_star, product_star = max_uncertainty_product(d0)
        reports = uncertainty_product_curve(d0, np.linspace(0.0, math.pi / d0, grid))
        self._write_csv(
            "product.csv", ("delta_t", "delta_h", "product"), [(r.delta_t, r.delta_H, r.product) for r in reports]
        )
        passed = product_star >= PRODUCT_BOUND
        self._write_json(
            "product.json",
            {
                "d0": d0,
                "delta_t_star": dt_star,
                "x_star": 0.5 * d0 * dt_star,
                "product_star": product_star,
                "bound": PRODUCT_BOUND,
                "pass": passed,
            },
        )
        return CommandOutcome(
            build_summary("product", [("x*", 0.5 * d0 * dt_star), ("dt*", dt_star), ("product*", product_star)], ">= 1/4", passed),
            passed,
        )

    def run_spy(self) -> CommandOutcome:
        H0 = self._operator("h1", "pauli-z")
        level = self._int("level", 0)
        reports = [spy_bound_experiment(H0, level, dt) for dt in parse_floats(self.config.get("dt", "0.1,1,10"), "--dt")]
        self._write_csv(
            "spy.csv",
            ("delta_t", "epsilon", "delta_e_spy", "delta_h_closed", "p_error", "product", "bound_ok"),
            [
                (
                    r.delta_t,
                    r.extras["epsilon"],
                    r.delta_H,
                    r.extras["delta_h_closed"],
                    r.extras["p_error"],
                    r.product,
                    r.bound_satisfied,
                )
                for r in reports
            ],
        )
        passed = all(r.bound_satisfied for r in reports)
        worst = min(r.product for r in reports)
        return CommandOutcome(
            build_summary("spy", [("level", level), ("min product", worst)], "dt*dE >= 1/4", passed), passed
        )

    def run_decay(self) -> CommandOutcome:
        model = DecayModel(gamma=self._float("gamma", 1.0), E0=self._float("e0", 0.0))
        report = decay_measurement_simulation(model, self._int("trials", self.sim.trials), self.config.seed)
        self._write_csv(
            "decay_stats.csv",
            ("mean_time", "mean_time_stderr", "fwhm", "lifetime_linewidth_product"),
            [(report.mean_time, report.mean_time_stderr, report.fwhm, report.lifetime_linewidth_product)],
        )
        self._write_csv(
            "decay_cutoffs.csv",
            ("lambda", "truncated_dE", "stderr", "closed_form"),
            [(row.cutoff, row.empirical, row.stderr, row.closed_form) for row in report.cutoff_table],
        )
        empirical = [row.empirical for row in report.cutoff_table]
        passed = (
            abs(report.mean_time - 1.0 / model.gamma) <= DECAY_SIGMAS * report.mean_time_stderr
            and abs(report.fwhm - 2.0 * model.gamma) <= 0.05 * 2.0 * model.gamma
            and all(abs(r.empirical - r.closed_form) <= DECAY_SIGMAS * r.stderr for r in report.cutoff_table)
            and all(a < b for a, b in zip(empirical, empirical[1:]))
        )
        self._write_json(
            "decay.json",
            {
                "gamma": model.gamma,
                "e0": model.E0,
                "trials": report.trials,
                "mean_time": report.mean_time,
                "fwhm": report.fwhm,
                "lifetime_linewidth_product": report.lifetime_linewidth_product,
                "empirical_lifetime_linewidth": report.empirical_lifetime_linewidth,
                "accuracy_divergent": True,
                "pass": passed,
            },
        )
        return CommandOutcome(
            build_summary(
                "decay",
                [("mean time", report.mean_time), ("fwhm", report.fwhm), ("dE(1000 gamma)", empirical[-1])],
                "lifetime*linewidth = 1, dt*dE unbounded",
                passed,
            ),
            passed,
        )

    def run_scenario(self) -> CommandOutcome:
        name = self.config.get("name")
        if name not in SCENARIO_NAMES:
            raise ConfigError(f"--name must be one of {', '.join(SCENARIO_NAMES)}, got {name!r}")
        extra = sorted(set(self.config.parameters) - {"name"} - SCENARIO_KEYS[name])
        if extra:
            raise ConfigError(f"scenario {name} does not accept: {', '.join(extra)}")

        if name == "spin-fields":
            result = scenario_spin_fields(self._float("muB0", 1.0))
            bound = "T = pi/D0"
        elif name == "phase-box":
            H0 = self._operator("h1") if self.config.get("h1") is not None else None
            result = scenario_phase_box(self._float("phi1", 1.0), self._float("phi2", 0.0), H0)
            bound = "T = pi/|phi1 - phi2|"
        elif name == "farhi-gutmann":
            result = scenario_farhi_gutmann(
                self._float("E", 1.0),
                parse_dims(str(self.config.get("dims", "4..256"))),
                self._float("threshold", 0.9),
                map_fn=self._mapper("farhi-gutmann"),
            )
            bound = "t ~ sqrt(d)/E"
        else:
            result = scenario_shared_eigenbasis(
                parse_floats(self.config.get("e1", "0,1,2,3"), "--e1"),
                parse_floats(self.config.get("e2", "0,1,4,3"), "--e2"),
                self._int("k0", 2),
                samples=self._int("trials", self.sim.trials),
                seed=self.config.seed,
            )
            bound = "pi/(dim |dE|)"
        return self._scenario_outcome(result, bound)

    def _scenario_outcome(self, result: ScenarioResult, bound: str) -> CommandOutcome:
        self._write_json(f"scenario_{result.name}.json", {"name": result.name, "metrics": result.metrics, "pass": result.passed})
        if result.sweep:
            header = list(result.sweep[0])
            self._write_csv(f"scenario_{result.name}.csv", header, [[row[k] for k in header] for row in result.sweep])
        shown = [(k, result.metrics[k]) for k in ("slope", "orthogonality_time", "bound_time", "expected_time") if k in result.metrics]
        return CommandOutcome(build_summary(f"scenario {result.name}", shown, bound, result.passed), result.passed)
