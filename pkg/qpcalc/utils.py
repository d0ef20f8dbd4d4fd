"""Some utility methods, e.g., for getting frequencies and potentials from well-known names."""

from __future__ import annotations

import functools
import math
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .arithmetic import Frequency
    from .cocycle import PotentialSpec

# Quadratic irrationals with constant continued fractions [0; a, a, a, ...].
NAMED_FREQUENCIES = {"golden": 1, "silver": 2, "bronze": 3}

NAMED_POTENTIALS = ("free", "amo")


@functools.lru_cache
def get_named_frequency(name: str, precision_bits: int = 256) -> Frequency:
    """Helper method to get well-known Diophantine frequencies.

    Enough digits are used that the finite continued fraction agrees with the quadratic irrational to the requested
    precision: the truncation error is about r**(-2n) for digit ratio r = (a + sqrt(a^2 + 4)) / 2.

    Args:
        name (str): One of NAMED_FREQUENCIES.
        precision_bits (int): Working precision.

    Raises:
        ValueError: on unrecognized name.

    Returns:
        Frequency
    """
    from .arithmetic import Frequency

    key = name.lower()
    if key not in NAMED_FREQUENCIES:
        raise ValueError(f"Unrecognized {name=}, must be one of {tuple(NAMED_FREQUENCIES)}")
    a = NAMED_FREQUENCIES[key]
    ratio = (a + math.sqrt(a * a + 4)) / 2
    n_digits = math.ceil(precision_bits * math.log(2) / (2 * math.log(ratio))) + 8
    return Frequency((a,) * n_digits, precision_bits=precision_bits)


def get_potential(name: str | PotentialSpec, **kwargs: float) -> PotentialSpec:
    """Helper method to get named potentials.

    Args:
        name: "free" (v = 0) or "amo" (v = 2 coupling cos 2 pi x). PotentialSpec instances are returned as-is.
        **kwargs: Passthrough, e.g. coupling for "amo".

    Raises:
        ValueError: on unrecognized name.

    Returns:
        PotentialSpec
    """
    from .cocycle import PotentialSpec

    if not isinstance(name, str):
        return name
    if name.lower() == "free":
        return PotentialSpec.free()
    if name.lower() == "amo":
        return PotentialSpec.almost_mathieu(kwargs.get("coupling", 0.5))
    raise ValueError(f"Unrecognized {name=}, must be one of {NAMED_POTENTIALS}")
