"""Richardson extrapolation in powers of n^(-1/2)."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np


def limit_coeffs(n_values: Sequence[float], f_values: Sequence[float], order: int = 1) -> np.ndarray:
    """Solve f(n) = r + b_1 n^(-1/2) + ... + b_order n^(-order/2) on the last ``order + 1`` points.

    Args;
        n_values: Increasing sample sizes.
        f_values: Sequence values at those sizes.
        order: Number of correction terms.

    Returns;
        The coefficients, limit first.
    """
    if len(n_values) != len(f_values):
        raise ValueError(f"Got {len(n_values)} sizes but {len(f_values)} values")
    if len(n_values) < order + 1:
        raise ValueError(f"Need {order + 1} points for order {order}, got {len(n_values)}")
    eps = np.asarray(n_values[-(order + 1) :], dtype=np.float64) ** -0.5
    mat = np.vander(eps, order + 1, increasing=True)
    return np.linalg.solve(mat, np.asarray(f_values[-(order + 1) :], dtype=np.float64))


def richardson_limit(n_values: Sequence[float], f_values: Sequence[float]) -> float:
    """Limit of ``f`` under the model r + b n^(-1/2), from the two largest n.

    A single point is returned unchanged.
    """
    if len(f_values) == 1:
        return float(f_values[0])
    return float(limit_coeffs(n_values, f_values, order=1)[0])


def correction_term(n_values: Sequence[float], f_values: Sequence[float]) -> float:
    """The fitted b of r + b n^(-1/2); zero for a single point."""
    if len(f_values) == 1:
        return 0.0
    return float(limit_coeffs(n_values, f_values, order=1)[1])
