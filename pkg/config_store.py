import json
import logging
from pathlib import Path
from typing import Any, Dict

logger = logging.getLogger(__name__)

DEFAULT_CONFIG: Dict[str, Any] = {
    "seed": 0,
    "trials": 100000,
    "grid": 20,
    "trotter_steps": 1000,
    "workers": 1,
    "output_dir": "results",
    "log_level": "INFO",
    "show_progress": False,
}


def _coerce(key: str, value: Any) -> Any:
    """Value with the default's type, or the default when it does not fit."""
    default = DEFAULT_CONFIG[key]
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
    elif isinstance(default, int):
        if isinstance(value, int) and not isinstance(value, bool) and value >= 0:
            return value
    elif isinstance(value, type(default)):
        return value
    logger.warning("config key %s has invalid value %r; using %r", key, value, default)
    return default


def load_config(base_dir: Path) -> Dict[str, Any]:
    path = base_dir / "config.json"
    if not path.exists():
        save_config(path, DEFAULT_CONFIG)
        return DEFAULT_CONFIG.copy()

    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        logger.warning("config.json unreadable; rewriting defaults")
        save_config(path, DEFAULT_CONFIG)
        return DEFAULT_CONFIG.copy()

    if not isinstance(data, dict):
        save_config(path, DEFAULT_CONFIG)
        return DEFAULT_CONFIG.copy()

    merged = DEFAULT_CONFIG.copy()
    merged.update({k: _coerce(k, v) for k, v in data.items() if k in merged})
    if merged != data:
        save_config(path, merged)
    return merged


def save_config(path: Path, config: Dict[str, Any]) -> None:
    path.write_text(json.dumps(config, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
