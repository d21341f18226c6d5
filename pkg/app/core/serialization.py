"""JSON and CSV codecs.

Complex numbers are written as [re, im] pairs and matrices row-major. Floats
in CSV use 17 significant digits so that a rerun with the same seed gives a
byte-identical file.
"""

import csv
import io
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from app.core.errors import ConfigError, DomainError
from app.core.generators import build_operator, is_generator
from app.core.protocol import DiscriminationProtocol, ProtocolStep, Trajectory
from app.core.spectral import HermitianOperator, QuantumState, SpaceLayout

Cell = Union[float, int, bool, str]


def _complex_to_json(z: complex) -> List[float]:
    return [float(np.real(z)), float(np.imag(z))]


def _complex_from_json(value: Any) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ConfigError(f"expected a number or an [re, im] pair, got {value!r}")


def _matrix_from_json(entries: Any, dim: Any = None) -> np.ndarray:
    """Nested rows, or a flat row-major list when `dim` is given and the length is dim * dim."""
    if not isinstance(entries, list) or not entries:
        raise ConfigError("matrix entries must be a non-empty list")
    flat = dim is not None and len(entries) == dim * dim
    if flat and dim == 1 and isinstance(entries[0], list) and len(entries[0]) == 1:
        flat = False
    if flat:
        return np.array([_complex_from_json(v) for v in entries], dtype=complex).reshape(dim, dim)
    if not all(isinstance(row, list) for row in entries):
        raise ConfigError("matrix rows must be lists")
    rows = [[_complex_from_json(v) for v in row] for row in entries]
    if len({len(row) for row in rows}) != 1:
        raise ConfigError("matrix rows have different lengths")
    return np.array(rows, dtype=complex)


def operator_to_json(H: HermitianOperator) -> Dict[str, Any]:
    return {"dim": H.dim, "entries": [[_complex_to_json(z) for z in row] for row in H.entries]}


def operator_from_json(obj: Any) -> HermitianOperator:
    """Accepts a bare list of rows or {"dim", "entries"} with nested or flat entries."""
    if isinstance(obj, dict):
        if "entries" not in obj:
            raise ConfigError("operator object needs an 'entries' field")
        matrix = _matrix_from_json(obj["entries"], obj.get("dim"))
    else:
        matrix = _matrix_from_json(obj)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ConfigError(f"operator must be square, got shape {matrix.shape}")
    return HermitianOperator(matrix)


def load_operator(text: str) -> HermitianOperator:
    """A generator expression such as '-1*pauli-z', or the path of an operator JSON file."""
    if is_generator(text):
        return build_operator(text)
    return operator_from_json(load_json(text))


def layout_to_json(layout: SpaceLayout) -> Dict[str, int]:
    return {"box_dim": layout.box_dim, "nobox_dim": layout.nobox_dim, "ancilla_dim": layout.ancilla_dim}


def layout_from_json(obj: Any) -> SpaceLayout:
    if not isinstance(obj, dict) or "box_dim" not in obj:
        raise ConfigError("layout must be an object with box_dim, nobox_dim, ancilla_dim")
    return SpaceLayout(int(obj["box_dim"]), int(obj.get("nobox_dim", 0)), int(obj.get("ancilla_dim", 1)))


def parse_layout(text: str) -> SpaceLayout:
    """'b,n,a' as given on the command line."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ConfigError(f"layout must be 'box,nobox,ancilla', got {text!r}")
    try:
        dims = [int(p) for p in parts]
    except ValueError:
        raise ConfigError(f"layout entries must be integers, got {text!r}") from None
    try:
        return SpaceLayout(*dims)
    except DomainError as exc:
        raise ConfigError(f"invalid layout {text!r}: {exc}") from exc


def state_to_json(state: QuantumState) -> Dict[str, Any]:
    return {"layout": layout_to_json(state.layout), "amplitudes": [_complex_to_json(z) for z in state.amplitudes]}


def state_from_json(obj: Any, layout: Optional[SpaceLayout] = None) -> QuantumState:
    if isinstance(obj, dict):
        layout = layout_from_json(obj["layout"]) if "layout" in obj else layout
        amplitudes = obj.get("amplitudes")
    else:
        amplitudes = obj
    if layout is None:
        raise ConfigError("state needs a layout")
    if not isinstance(amplitudes, list):
        raise ConfigError("state amplitudes must be a list")
    return QuantumState(layout, [_complex_from_json(v) for v in amplitudes])


def protocol_to_json(proto: DiscriminationProtocol) -> Dict[str, Any]:
    return {
        "layout": layout_to_json(proto.layout),
        "initial": [_complex_to_json(z) for z in proto.initial.amplitudes],
        "steps": [
            {"dwell": step.dwell, "control": [[_complex_to_json(z) for z in row] for row in step.control]}
            for step in proto.steps
        ],
    }


def protocol_from_json(obj: Any) -> DiscriminationProtocol:
    if not isinstance(obj, dict) or not {"layout", "initial", "steps"} <= obj.keys():
        raise ConfigError("protocol must be an object with layout, initial and steps")
    layout = layout_from_json(obj["layout"])
    initial = state_from_json(obj["initial"], layout)
    steps = []
    for k, raw in enumerate(obj["steps"]):
        if not isinstance(raw, dict) or "dwell" not in raw:
            raise ConfigError(f"step {k} needs a dwell")
        control = raw.get("control")
        matrix = np.eye(layout.total_dim, dtype=complex) if control is None else _matrix_from_json(control, layout.total_dim)
        steps.append(ProtocolStep(dwell=float(raw["dwell"]), control=matrix))
    return DiscriminationProtocol(layout=layout, initial=initial, steps=tuple(steps))


def load_json(path: Union[str, Path]) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read JSON from {path}: {exc}") from None


def dump_json(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def write_json(path: Path, obj: Any) -> None:
    path.write_text(dump_json(obj), encoding="utf-8")


def format_cell(value: Cell) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Cell]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([format_cell(v) for v in row] for row in rows)
    return buffer.getvalue()


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Cell]]) -> None:
    path.write_text(csv_text(header, rows), encoding="utf-8")


TRAJECTORY_COLUMNS = ("time", "re_overlap", "im_overlap", "theta")


def trajectory_rows(traj: Trajectory) -> List[List[float]]:
    return [
        [float(t), float(ov.real), float(ov.imag), float(theta)]
        for t, ov, theta in zip(traj.times, traj.overlaps, traj.thetas)
    ]
