"""Canonical JSON for analysis, mitigation, assessment and phase-log reports."""

from __future__ import annotations

import hashlib
import json
import math
from enum import Enum
from fractions import Fraction
from typing import Any, Mapping

FLOAT_DIGITS = 6


def whole(value: float) -> float:
    """Return integral finite costs as ``int`` so reports print them without decimals."""
    if isinstance(value, float) and value.is_integer():
        return int(value)
    return value


def _normalize(value: Any) -> Any:
    if hasattr(value, "to_dict"):
        return _normalize(value.to_dict())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    if isinstance(value, Fraction):
        value = float(value)
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            return None
        return value
    if isinstance(value, Mapping):
        return {str(k): _normalize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_normalize(v) for v in value]
    if isinstance(value, (set, frozenset)):
        return sorted((_normalize(v) for v in value), key=_encode)
    return str(value)


def _encode(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.{FLOAT_DIGITS}f}"
    if isinstance(value, dict):
        return "{" + ",".join(f"{json.dumps(k)}:{_encode(value[k])}" for k in sorted(value)) + "}"
    if isinstance(value, list):
        return "[" + ",".join(_encode(v) for v in value) + "]"
    return json.dumps(value)


def write_report(report: Any) -> str:
    """Serialize a report object or mapping to canonical JSON.

    Keys are sorted, separators carry no whitespace, every float is written with
    six fixed decimals (``1.000000``), ints stay ints and infinite values
    (unrecoverable impacts) become ``null``.
    """
    return _encode(_normalize(report))


def read_report(text: str | bytes) -> dict[str, Any]:
    data = json.loads(text)
    if not isinstance(data, dict):
        raise ValueError("a report is a JSON object")
    return data


def digest(value: Any) -> str:
    return hashlib.sha256(write_report(value).encode("utf-8")).hexdigest()
