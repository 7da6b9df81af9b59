"""Empirical quantiles with the inf-convention used by all tests."""

from __future__ import annotations

import math

import numpy as np


def inf_quantile(values: np.ndarray, level: float) -> float:
    """Smallest realized value u with ecdf(u) >= level.

    This is inf{u: (1/B) sum 1{v_b <= u} >= level} over the realized
    reference multiset, so the returned critical value is always one of
    the reference values.
    """
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("empty reference set")
    k = math.ceil(level * v.size)
    k = min(max(k, 1), v.size)
    return float(v[k - 1])
