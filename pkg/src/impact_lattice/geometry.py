"""Lattice coordinates, distances and the distance-scaling function."""

from __future__ import annotations

import math

import numpy as np

# g(d) = 1 + d**alpha (default) or g(d) = (1 + d)**alpha
SCALING_FORMS = ("1+d^a", "(1+d)^a")
DEFAULT_SCALING = "1+d^a"


def coords(index: int, L: int) -> tuple[int, int]:
    """Row-major ``(row, col)`` of a lattice index."""
    if not 0 <= index < L * L:
        raise IndexError(f"lattice index {index} out of range for L={L}")
    return divmod(index, L)


def distance(i: int, j: int, L: int) -> float:
    """Euclidean distance between sites ``i`` and ``j`` (open boundaries)."""
    ri, ci = coords(i, L)
    rj, cj = coords(j, L)
    return math.hypot(ri - rj, ci - cj)


def scaling(d, alpha: float, form: str = DEFAULT_SCALING):
    """Distance-scaling function ``g(d)``.

    ``g(0) == 1`` in both forms, so an agent's own contribution enters with
    unit weight; for ``alpha == 0`` the ``1+d^a`` form gives ``g(d) = 2``
    away from the origin.
    """
    if form not in SCALING_FORMS:
        raise ValueError(f"unknown scaling form {form!r}; expected one of {SCALING_FORMS}")
    d_arr = np.asarray(d, dtype=float)
    if form == "1+d^a":
        g = 1.0 + np.power(d_arr, alpha)
    else:
        g = np.power(1.0 + d_arr, alpha)
    g = np.where(d_arr == 0.0, 1.0, g)
    return float(g) if g.ndim == 0 else g


def offset_distances(L: int) -> np.ndarray:
    """Distances for every offset ``(dr, dc)`` in ``[-(L-1), L-1]**2``."""
    r = np.arange(-(L - 1), L, dtype=float)
    return np.hypot(r[:, None], r[None, :])
