"""Calculators for spectral properties of quasi-periodic Schrodinger operators."""

from __future__ import annotations

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("qpcalc")
except PackageNotFoundError:
    pass  # package not installed
