"""Composite Gauss-Legendre rules shared by the Abel-type integrals."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre


@lru_cache(maxsize=32)
def unit_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to [0, 1]."""
    nodes, weights = roots_legendre(order)
    unit_nodes = 0.5 * (nodes + 1.0)
    unit_weights = 0.5 * weights
    unit_nodes.setflags(write=False)
    unit_weights.setflags(write=False)
    return unit_nodes, unit_weights


def composite_rule(breaks: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of ``order``-point Gauss-Legendre on each panel [breaks[i], breaks[i+1]]."""
    breaks = np.asarray(breaks, dtype=np.float64)
    unit_nodes, unit_weights = unit_rule(order)
    lengths = np.diff(breaks)
    nodes = breaks[:-1, None] + lengths[:, None] * unit_nodes[None, :]
    weights = lengths[:, None] * unit_weights[None, :]
    return nodes.ravel(), weights.ravel()


def linear_interpolation_weights(
    positions: np.ndarray, step: float, count: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Indices and hat-function weights of the piecewise-linear interpolant on ``count`` uniform nodes.

    Positions outside [0, (count-1)·step] get zero weight.
    """
    scaled = np.asarray(positions, dtype=np.float64) / step
    valid = (scaled >= 0.0) & (scaled <= count - 1)
    clipped = np.clip(scaled, 0.0, count - 1)
    lower = np.minimum(np.floor(clipped).astype(np.int64), count - 2)
    frac = clipped - lower
    weight_lower = np.where(valid, 1.0 - frac, 0.0)
    weight_upper = np.where(valid, frac, 0.0)
    return lower, lower + 1, weight_lower, weight_upper
