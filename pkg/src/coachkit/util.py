"""Small shared helpers."""

from __future__ import annotations


def round_half_away(x: float, ndigits: int = 2) -> float:
    """Round half away from zero (report convention; Python's round() is
    banker's rounding)."""
    factor = 10**ndigits
    scaled = x * factor
    if scaled >= 0:
        return float(int(scaled + 0.5)) / factor
    return float(-int(-scaled + 0.5)) / factor
