"""Quadrature helpers.

Two flavours are used throughout the package:

* ``adaptive`` wraps QUADPACK's adaptive Gauss-Kronrod routine and is meant
  for validation work, where a function is integrated a handful of times.
* ``panel_rule`` builds composite Gauss-Legendre rules on caller-supplied
  panel edges.  The hot paths (boundary solver, value evaluation) integrate
  the same kind of integrand thousands of times, so the panels are placed
  where the integrand has kinks or changes scale and evaluated in one
  vectorised call.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate

EPSABS = 1e-9
EPSREL = 1e-8


@lru_cache(maxsize=16)
def _unit_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    nodes = 0.5 * (x + 1.0)
    weights = 0.5 * w
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


def unit_rule(n: int = 10) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    return _unit_rule(int(n))


def panel_rule(edges: np.ndarray, n: int = 10) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on consecutive ``edges``.

    Returns node and weight arrays of shape ``(len(edges) - 1, n)``.
    """
    edges = np.asarray(edges, dtype=float)
    s, w = unit_rule(n)
    a = edges[:-1, None]
    h = np.diff(edges)[:, None]
    return a + h * s, h * w


def sqrt_panel_rule(length: float, n: int = 10, levels: int = 8,
                    ratio: float = 0.25) -> tuple[np.ndarray, np.ndarray]:
    """Rule for ``int_0^length h(theta) d theta`` when ``h`` behaves like
    a function of ``sqrt(theta)`` near zero.

    The interval is split geometrically towards 0 and every sub-panel is
    integrated in the variable ``s = sqrt(theta)``.  Returns flat arrays of
    theta nodes and weights.
    """
    if length <= 0.0:
        return np.empty(0), np.empty(0)
    cuts = length * ratio ** np.arange(levels, -1, -1, dtype=float)
    cuts = np.concatenate(([0.0], cuts))
    roots = np.sqrt(cuts)
    s, w = panel_rule(roots, n)
    return (s * s).ravel(), (2.0 * s * w).ravel()


def adaptive(fun: Callable[[float], float], a: float, b: float, *,
             epsabs: float = EPSABS, epsrel: float = EPSREL,
             limit: int = 200, points=None) -> float:
    """Adaptive Gauss-Kronrod integral of a scalar function."""
    val, _ = integrate.quad(fun, a, b, epsabs=epsabs, epsrel=epsrel,
                            limit=limit, points=points)
    return float(val)
