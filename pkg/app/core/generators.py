"""Named operator generators: ``[SCALE*]name[:arg[:arg]]``.

Examples: ``pauli-z``, ``-1*pauli-z``, ``shifted-identity:3:0.5``,
``random-hermitian:4:7``, ``diagonal:1,-1,0``.
"""

from typing import Callable, Dict, List

from app.core.errors import ConfigError
from app.core.sampling import stream_generator
from app.core.spectral import HermitianOperator, pauli, random_hermitian


def _pauli(axis: str) -> Callable[[List[str]], HermitianOperator]:
    def build(args: List[str]) -> HermitianOperator:
        if args:
            raise ConfigError(f"pauli-{axis} takes no arguments")
        return pauli(axis)

    return build


def _shifted_identity(args: List[str]) -> HermitianOperator:
    if len(args) != 2:
        raise ConfigError("shifted-identity needs dim and shift, e.g. shifted-identity:3:0.5")
    return HermitianOperator.identity(_int(args[0], "dim")) * _float(args[1], "shift")


def _random_hermitian(args: List[str]) -> HermitianOperator:
    if len(args) != 2:
        raise ConfigError("random-hermitian needs dim and seed, e.g. random-hermitian:4:7")
    return random_hermitian(_int(args[0], "dim"), stream_generator(_int(args[1], "seed")))


def _diagonal(args: List[str]) -> HermitianOperator:
    if len(args) != 1 or not args[0]:
        raise ConfigError("diagonal needs comma-separated values, e.g. diagonal:1,-1")
    return HermitianOperator.diagonal(_float(v, "diagonal value") for v in args[0].split(","))


GENERATORS: Dict[str, Callable[[List[str]], HermitianOperator]] = {
    "pauli-x": _pauli("x"),
    "pauli-y": _pauli("y"),
    "pauli-z": _pauli("z"),
    "shifted-identity": _shifted_identity,
    "random-hermitian": _random_hermitian,
    "diagonal": _diagonal,
}


def _int(text: str, what: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ConfigError(f"{what} must be an integer, got {text!r}") from None
    if what == "dim" and value < 1:
        raise ConfigError(f"dim must be >= 1, got {value}")
    return value


def _float(text: str, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{what} must be a number, got {text!r}") from None


def is_generator(text: str) -> bool:
    name = text.split("*", 1)[-1].split(":", 1)[0].strip()
    return name in GENERATORS


def build_operator(text: str) -> HermitianOperator:
    scale = 1.0
    body = text.strip()
    if "*" in body:
        head, body = body.split("*", 1)
        scale = _float(head.strip(), "scale")
    name, *args = body.strip().split(":")
    if name not in GENERATORS:
        raise ConfigError(f"unknown operator generator {name!r} (known: {', '.join(sorted(GENERATORS))})")
    operator = GENERATORS[name](args)
    return operator if scale == 1.0 else operator * scale
