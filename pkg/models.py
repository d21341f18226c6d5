from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, List

from app.core.errors import ConfigError

COMMANDS = ("dist", "bound", "protocol", "estimate", "product", "spy", "decay", "scenario")

COMMAND_KEYS: Dict[str, FrozenSet[str]] = {
    "dist": frozenset({"h1", "h2"}),
    "bound": frozenset({"h1", "h2", "dt"}),
    "protocol": frozenset({"h1", "h2", "layout", "steps", "nu", "dt", "protocol"}),
    "estimate": frozenset({"h1", "h2", "pair", "layout", "grid", "trials", "steps", "nu"}),
    "product": frozenset({"d0", "grid"}),
    "spy": frozenset({"h1", "level", "dt"}),
    "decay": frozenset({"gamma", "e0", "trials"}),
    "scenario": frozenset(
        {"name", "muB0", "phi1", "phi2", "h1", "E", "dims", "threshold", "e1", "e2", "k0", "trials"}
    ),
}

SEED_MAX = (1 << 64) - 1


@dataclass
class SimParams:
    trials: int = 100000
    grid: int = 20
    trotter_steps: int = 1000
    workers: int = 1
    show_progress: bool = False

    def __post_init__(self) -> None:
        for name in ("trials", "grid", "trotter_steps", "workers"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")

    @classmethod
    def from_config(cls, config: Dict[str, Any]) -> "SimParams":
        return cls(
            trials=config["trials"],
            grid=config["grid"],
            trotter_steps=config["trotter_steps"],
            workers=config["workers"],
            show_progress=bool(config["show_progress"]),
        )


@dataclass
class ExperimentConfig:
    command: str
    parameters: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    output_path: str = "results"

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r} (known: {', '.join(COMMANDS)})")
        unknown = sorted(set(self.parameters) - COMMAND_KEYS[self.command])
        if unknown:
            raise ConfigError(f"{self.command} does not accept: {', '.join(unknown)}")
        if not isinstance(self.seed, int) or not 0 <= self.seed <= SEED_MAX:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")

    def get(self, key: str, default: Any = None) -> Any:
        return self.parameters.get(key, default)


def parse_dims(text: str) -> List[int]:
    """'4..256' expands to powers of two; '3,5,7' is taken literally."""
    try:
        if ".." in text:
            low, high = (int(p) for p in text.split("..", 1))
            if low < 1 or high < low:
                raise ConfigError(f"bad dims range {text!r}")
            dims = []
            d = low
            while d <= high:
                dims.append(d)
                d *= 2
            return dims
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"dims must be 'LOW..HIGH' or a comma list, got {text!r}") from None


def parse_floats(text: str, what: str) -> List[float]:
    try:
        values = [float(p) for p in str(text).split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"{what} must be a number or a comma list of numbers, got {text!r}") from None
    if not values:
        raise ConfigError(f"{what} is empty")
    return values
