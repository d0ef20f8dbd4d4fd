from __future__ import annotations

import json
import math
from typing import TYPE_CHECKING

import numpy as np
import pytest
from mpmath import mpf

from qpcalc.output import canonical_json, config_hash, format_value, read_csv, write_csv, write_gnuplot, write_json

if TYPE_CHECKING:
    from pathlib import Path


@pytest.mark.parametrize(
    ("value", "expected"),
    [
        (0.1, "0.10000000000000001"),
        (np.float64(-2.5), "-2.5"),
        (math.nan, "nan"),
        (-math.inf, "-inf"),
        (np.int64(7), "7"),
        (True, "True"),
        (None, ""),
        ("bridge", "bridge"),
        (mpf(0), "0x0p0"),
        (mpf(3), "0x3p0"),
        (mpf(-0.75), "-0x3p-2"),
    ],
)
def test_format_value(value: object, expected: str) -> None:
    assert format_value(value) == expected


def test_csv(tmp_path: Path) -> None:
    data, provenance = [(1, 0.5), (2, math.inf)], {"config_hash": "abc", "bits": 256}
    path = write_csv(tmp_path / "x.csv", ("k", "value"), data, meta=provenance)
    meta, header, rows = read_csv(path)
    assert meta == {"config_hash": "abc", "bits": "256"}
    assert header == ["k", "value"]
    assert rows == [["1", "0.5"], ["2", "inf"]]
    # Byte-identical output for identical input.
    again = write_csv(tmp_path / "y.csv", ("k", "value"), data, meta=provenance)
    assert again.read_bytes() == path.read_bytes()


def test_json(tmp_path: Path) -> None:
    obj = {"b": np.arange(3), "a": mpf(2), "c": np.float64(1.5), "d": np.bool_(True)}
    text = canonical_json(obj)
    assert list(json.loads(text)) == ["a", "b", "c", "d"]
    assert json.loads(text)["b"] == [0, 1, 2]
    path = write_json(tmp_path / "x.json", obj)
    assert path.read_text() == text
    with pytest.raises(TypeError, match="not JSON serializable"):
        canonical_json({"x": object()})


def test_config_hash() -> None:
    h = config_hash({"a": 1, "b": [1, 2]})
    assert len(h) == 64
    assert h == config_hash({"b": [1, 2], "a": 1})
    assert h != config_hash({"a": 2, "b": [1, 2]})


def test_gnuplot(tmp_path: Path) -> None:
    path = write_gnuplot(tmp_path / "p.gp", tmp_path / "p.csv", "eps", ["mass"], ["eps", "mass", "bias"], loglog=True)
    text = path.read_text()
    assert "set logscale xy" in text
    assert "'p.csv' using 1:2" in text
