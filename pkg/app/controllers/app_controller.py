import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from app.controllers.experiment_controller import CommandOutcome, ExperimentController
from app.core.errors import ConfigError, DomainError
from config_store import load_config
from models import ExperimentConfig, SimParams

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DOMAIN = 3

# flags consumed here rather than passed on as command parameters
RUNNER_KEYS = frozenset({"command", "seed", "out", "workers", "verbose", "config_dir"})


class AppController:
    def __init__(self, base_dir: Optional[Path] = None):
        self.base_dir = base_dir or Path(__file__).resolve().parents[2]
        self.config = load_config(self.base_dir)
        self.last_outcome: Optional[CommandOutcome] = None

    @property
    def log_level(self) -> str:
        return str(self.config.get("log_level", "INFO")).upper()

    def build_experiment(self, args: Dict[str, Any]) -> Tuple[ExperimentConfig, SimParams]:
        parameters = {k: v for k, v in args.items() if k not in RUNNER_KEYS and v is not None}
        seed = args.get("seed")
        experiment = ExperimentConfig(
            command=args.get("command", ""),
            parameters=parameters,
            seed=self.config["seed"] if seed is None else seed,
            output_path=args.get("out") or self.config["output_dir"],
        )
        sim = SimParams.from_config(self.config)
        if args.get("workers") is not None:
            sim = SimParams(sim.trials, sim.grid, sim.trotter_steps, args["workers"], sim.show_progress)
        return experiment, sim

    def run(self, args: Dict[str, Any]) -> int:
        try:
            experiment, sim = self.build_experiment(args)
            outcome = ExperimentController(experiment, sim).run()
        except ConfigError as e:
            logger.error("configuration error: %s", e)
            return EXIT_CONFIG
        except DomainError as e:
            logger.error("%s", e)
            return EXIT_DOMAIN
        self.last_outcome = outcome
        for path in outcome.artifacts:
            logger.info("wrote %s", path)
        print(outcome.summary)
        return EXIT_OK
