from typing import Any, List, Optional, Sequence, Tuple


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def build_summary(
    command: str, values: Sequence[Tuple[str, Any]], bound: str, passed: Optional[bool] = None
) -> str:
    """One line: command, key=value pairs, the bound being checked and the verdict."""
    parts: List[str] = [f"[{command}]"]
    fields = ", ".join(f"{key}={_format_value(value)}" for key, value in values if value is not None)
    if fields:
        parts.append(fields)
    if bound.strip():
        parts.append(f"bound: {bound.strip()}")
    if passed is not None:
        parts.append("PASS" if passed else "FAIL")
    return " | ".join(parts)
