"""Result files: CSV with a provenance header, canonical JSON and gnuplot scripts."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
from mpmath import mpf

if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping, Sequence

logger = logging.getLogger(__name__)


def format_value(x: Any) -> str:
    """17 significant digits for floats, exact hex mantissa/exponent for mpmath floats."""
    if isinstance(x, mpf):
        if not x:
            return "0x0p0"
        man, exp = x.man_exp
        sign = "-" if man < 0 else ""
        return f"{sign}0x{abs(man):x}p{exp}"
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.17g}"
    if x is None:
        return ""
    return str(x)


def canonical_json(obj: Any) -> str:
    """Sorted-key, indented JSON used for hashing and artifacts."""
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"


def _json_default(x: Any) -> Any:
    if isinstance(x, mpf):
        return format_value(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if hasattr(x, "as_dict"):
        return x.as_dict()
    raise TypeError(f"Object of type {type(x).__name__} is not JSON serializable")


def config_hash(config: Mapping[str, Any]) -> str:
    """SHA-256 of the canonical JSON form of a configuration."""
    return hashlib.sha256(canonical_json(dict(config)).encode("utf-8")).hexdigest()


def write_csv(
    path: str | Path,
    columns: Sequence[str],
    rows: Iterable[Sequence[Any]],
    *,
    meta: Mapping[str, Any] | None = None,
) -> Path:
    """Write a CSV whose leading ``# key=value`` comment lines carry provenance (config hash, precision, ...).

    Args:
        path: Output file.
        columns: Header row.
        rows: Data rows; values are formatted with :func:`format_value`.
        meta: Provenance entries written as comments before the header.

    Returns:
        Path written.
    """
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        for k, v in (meta or {}).items():
            f.write(f"# {k}={v}\n")
        writer = csv.writer(f)
        writer.writerow(columns)
        n = 0
        for row in rows:
            writer.writerow([format_value(x) for x in row])
            n += 1
    logger.info("Wrote %d rows to %s", n, path)
    return path


def read_csv(path: str | Path) -> tuple[dict[str, str], list[str], list[list[str]]]:
    """Inverse of :func:`write_csv`: (meta, columns, rows as strings)."""
    meta: dict[str, str] = {}
    with Path(path).open(encoding="utf-8") as f:
        lines = f.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("# ") and not body:
            key, _, value = line[2:].partition("=")
            meta[key] = value
        else:
            body.append(line)
    parsed = list(csv.reader(body))
    return meta, parsed[0], parsed[1:]


def write_json(path: str | Path, obj: Any) -> Path:
    path = Path(path)
    path.write_text(canonical_json(obj), encoding="utf-8")
    return path


def write_gnuplot(
    path: str | Path, data_file: str | Path, x: str, ys: Sequence[str], columns: Sequence[str], *, loglog: bool = False
) -> Path:
    """Emit a gnuplot script plotting ``ys`` against ``x`` from a CSV written by :func:`write_csv`."""
    path = Path(path)
    index = {name: i + 1 for i, name in enumerate(columns)}
    lines = [
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key autotitle columnhead",
        f"set xlabel '{x}'",
    ]
    if loglog:
        lines.append("set logscale xy")
    plots = [f"'{Path(data_file).name}' using {index[x]}:{index[y]} with linespoints title '{y}'" for y in ys]
    lines.append("plot " + ", \\\n     ".join(plots))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
