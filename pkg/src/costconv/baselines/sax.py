"""SAX discretisation and state-interval abstraction."""
from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

# Gaussian quartiles: (-inf, -0.6745] -> a, (-0.6745, 0] -> b, (0, 0.6745] -> c, else d
BREAKPOINTS = (-0.6745, 0.0, 0.6745)
ALPHABET = "abcd"


def sax_discretize(series, bins: int = 4) -> list[str]:
    """Z-normalise a series over its own values and map each value to a symbol."""
    if bins != 4:
        raise ValueError("only the 4-symbol alphabet is supported")
    x = np.asarray(series, dtype=np.float64)
    if x.size == 0:
        return []
    sd = x.std()
    z = np.zeros_like(x) if sd == 0 else (x - x.mean()) / sd
    idx = np.searchsorted(BREAKPOINTS, z, side="left")
    return [ALPHABET[i] for i in idx]


class StateInterval(NamedTuple):
    feature: int
    symbol: str
    start: int
    end: int  # inclusive window index


def canonical_key(iv: StateInterval):
    """Start ascending, longer first on equal starts, then feature, then symbol."""
    return (iv.start, -iv.end, iv.feature, iv.symbol)


def canonicalize(intervals: Sequence[StateInterval]) -> list[StateInterval]:
    return sorted(intervals, key=canonical_key)


def extract_intervals(symbols: Sequence[str], feature: int = 0) -> list[StateInterval]:
    """Maximal runs of one symbol become inclusive [start, end] intervals."""
    out = []
    start = 0
    for i in range(1, len(symbols) + 1):
        if i == len(symbols) or symbols[i] != symbols[start]:
            out.append(StateInterval(feature, symbols[start], start, i - 1))
            start = i
    return out


def abstract_entity(matrix, features: Sequence[int], skip_empty: bool = True) -> list[StateInterval]:
    """Canonical state intervals of the chosen rows of one patient's matrix.

    With ``skip_empty`` an all-zero row (no events at all) contributes no
    intervals rather than a single full-length 'b' run.
    """
    out = []
    for f in features:
        row = matrix[f]
        if skip_empty and not np.any(row):
            continue
        out.extend(extract_intervals(sax_discretize(row), feature=int(f)))
    return canonicalize(out)
