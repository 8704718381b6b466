"""CSV and JSON writers with 17-significant-digit numbers.

Every float is written with ``format(x, ".17g")`` so a value read back is
bit-identical to the one computed. Non-finite floats become ``nan``,
``inf`` or ``-inf`` in CSV and ``null`` in JSON.
"""

from __future__ import annotations

import io
import math
from typing import Iterable, Sequence

import numpy as np


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(header)]
    width = len(header)
    for row in rows:
        cells = [fmt(v) for v in row]
        if len(cells) != width:
            raise ValueError(f"row has {len(cells)} cells, header has {width}")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _json(value, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if value is None:
        return "null"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        x = float(value)
        return format(x, ".17g") if math.isfinite(x) else "null"
    if isinstance(value, str):
        import json

        return json.dumps(value)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{_json(str(k), indent, level + 1)}: {_json(v, indent, level + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        if all(not isinstance(v, (list, tuple, dict, np.ndarray)) for v in value):
            return "[" + ", ".join(_json(v, indent, level + 1) for v in value) + "]"
        items = [pad + _json(v, indent, level + 1) for v in value]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def json_text(obj, indent: int = 2) -> str:
    return _json(obj, indent, 0) + "\n"


def emit(text: str, path: str | None, stream: io.TextIOBase | None = None) -> None:
    """Write ``text`` to ``path``, or to ``stream`` when no path is given."""
    if path is None:
        import sys

        (stream or sys.stdout).write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
