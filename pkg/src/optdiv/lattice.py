"""Binomial lattice for the stopping problem (independent oracle).

The absorbed diffusion is replaced by a recombining walk on ``x = j dx`` with
``dx = sigma sqrt(dt)`` and up probability ``(1 + mu sqrt(dt) / sigma) / 2``,
so the first two moments of each step match.  Backward induction computes

    u(t, x) = max(f(t), p u(t + dt, x + dx) + (1 - p) u(t + dt, x - dx))

with ``u(t, 0) = m(t)`` and ``u(T, x) = g_x(T, x)``.  The boundary at a time
level is the first node at which continuing is worth no more than stopping.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .problem import ProblemData


@dataclass(frozen=True)
class LatticeResult:
    """Boundary on the lattice time levels (``nan`` where no node stops)."""

    times: np.ndarray
    boundary: np.ndarray
    dx: float
    u0: np.ndarray
    levels: np.ndarray

    @property
    def b0(self) -> float:
        return float(self.boundary[0])


def lattice_boundary(p: ProblemData, n_steps: int = 4000, x_max: float | None = None) -> LatticeResult:
    """Solve the stopping problem for ``p`` on a binomial lattice.

    Parameters
    ----------
    p : ProblemData
    n_steps : int
        Number of time steps on ``[0, T]``.
    x_max : float, optional
        Top of the lattice, where stopping is imposed.  Defaults to
        ``max(2, 8 sigma sqrt(T))``, far above the boundary for the case study.
    """
    if n_steps < 2:
        raise ValueError("n_steps must be at least 2")
    mu, sig = p.diff.mu, p.diff.sigma
    dt = p.T / n_steps
    dx = sig * math.sqrt(dt)
    q = 0.5 * (1.0 + mu * math.sqrt(dt) / sig)
    if not 0.0 < q < 1.0:
        raise ValueError("time step too coarse for the drift")
    if x_max is None:
        x_max = max(2.0, 8.0 * sig * math.sqrt(p.T))
    n_x = int(math.ceil(x_max / dx))
    levels = dx * np.arange(n_x + 1)
    times = dt * np.arange(n_steps + 1)
    u = np.asarray(p.g_x(p.T, levels), dtype=float).copy()
    u[0] = float(p.m(p.T))
    bnd = np.full(n_steps + 1, 0.0)
    for k in range(n_steps - 1, -1, -1):
        t = times[k]
        ft = float(p.f(t))
        cont = np.empty_like(u)
        cont[1:-1] = q * u[2:] + (1.0 - q) * u[:-2]
        cont[-1] = ft
        cont[0] = float(p.m(t))
        stop = cont[1:] <= ft
        j = int(np.argmax(stop)) + 1 if stop.any() else -1
        bnd[k] = levels[j] if j > 0 else math.nan
        u = np.maximum(cont, ft)
        u[0] = float(p.m(t))
    return LatticeResult(times, bnd, dx, u, levels)
