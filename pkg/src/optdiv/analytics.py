"""Closed-form laws of arithmetic Brownian motion ``x + mu*s + sigma*W_s``.

All functions broadcast over numpy arrays.  The public functions validate
their arguments and raise :class:`DomainError`; the underscore-prefixed
kernels skip validation and are what the solvers call in their inner loops.

The reflected-process density and the running-supremum law come in two
variants:

``"paper_exact"``
    the reference closed forms reproduced term by term.  The image terms of
    the reflected density enter with a minus sign, the correction term uses
    ``mu / (2 sigma)``, and the drift in the supremum law has the opposite
    sign.
``"consistent"``
    the laws of drifted Brownian motion reflected at zero (Skorokhod) and of
    the running maximum of a drifted Brownian motion.

The Monte Carlo oracle tests accept ``"consistent"`` and reject
``"paper_exact"``, so ``"consistent"`` is the default everywhere.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import isfinite, pi, sqrt
from typing import Literal

import numpy as np
from scipy.special import log_ndtr, ndtr

Variant = Literal["consistent", "paper_exact"]
VARIANTS: tuple[str, ...] = ("consistent", "paper_exact")
DEFAULT_VARIANT: Variant = "consistent"

# Durations below SMALL_TIME in the natural unit (distance / sigma)^2 of the
# quantity at hand return the analytic small-time limit.  Densities in y use
# the absolute duration.
SMALL_TIME = 1e-12

_SQRT2PI = sqrt(2.0 * pi)


class DomainError(ValueError):
    """An argument lies outside the domain of a closed-form law."""


@dataclass(frozen=True)
class Diffusion:
    """Drift ``mu`` and volatility ``sigma`` of ``x + mu*s + sigma*W_s``."""

    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if not (isfinite(self.mu) and isfinite(self.sigma)):
            raise DomainError("mu and sigma must be finite")
        if self.sigma <= 0.0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")


def _check(cond, message: str) -> None:
    if not np.all(cond):
        raise DomainError(message)


def _finite(a):
    a = np.asarray(a, dtype=float)
    _check(np.isfinite(a), "arguments must be finite")
    return a


def _out(a):
    a = np.asarray(a, dtype=float)
    return float(a) if a.ndim == 0 else a


def _check_variant(variant: str) -> None:
    if variant not in VARIANTS:
        raise DomainError(f"unknown formula variant {variant!r}; expected one of {VARIANTS}")


# ---------------------------------------------------------------------------
# unchecked kernels


def _survival(mu, sigma, x, beta, theta):
    theta = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)
    beta = np.asarray(beta, dtype=float)
    small = (sigma * sigma * theta < SMALL_TIME * (x - beta) ** 2) | (theta <= 0.0)
    th = np.where(small, 1.0, theta)
    st = np.sqrt(th)
    nu = mu / sigma
    first = ndtr(((x - beta) / sigma + nu * th) / st)
    second = np.exp(-2.0 * mu * x / sigma**2) * ndtr((-(beta + x) / sigma + nu * th) / st)
    limit = np.where(x > beta, 1.0, np.where(x == beta, 0.5, 0.0))
    return np.where(small, limit, first - second)


def _hitting_density(mu, sigma, x, t):
    t = np.asarray(t, dtype=float)
    small = (sigma * sigma * t < SMALL_TIME * np.square(x)) | (t <= 0.0)
    tt = np.where(small, 1.0, t)
    z = (x + mu * tt) / sigma
    val = x / (sigma * _SQRT2PI * tt * np.sqrt(tt)) * np.exp(-z * z / (2.0 * tt))
    return np.where(small, 0.0, val)


def _hitting_cdf(mu, sigma, x, t):
    t = np.asarray(t, dtype=float)
    small = (sigma * sigma * t < SMALL_TIME * np.square(x)) | (t <= 0.0)
    tt = np.where(small, 1.0, t)
    st = sigma * np.sqrt(tt)
    a = ndtr((-x - mu * tt) / st)
    # exp(-2 mu x / sigma^2) * N((-x + mu t)/(sigma sqrt t)) in log space
    b = np.exp(-2.0 * mu * x / sigma**2 + log_ndtr((-x + mu * tt) / st))
    return np.where(small, 0.0, a + b)


def _absorbed_density(mu, sigma, tau, x, y):
    tau = np.asarray(tau, dtype=float)
    small = tau < SMALL_TIME
    tt = np.where(small, 1.0, tau)
    v = sigma * sigma * tt
    pref = np.exp(-mu * (x - y) / sigma**2 - mu * mu * tt / (2.0 * sigma**2)) / np.sqrt(2.0 * pi * v)
    # exp(-(x-y)^2/2v) - exp(-(x+y)^2/2v) = exp(-(x-y)^2/2v) * (1 - exp(-2xy/v))
    body = np.exp(-(x - y) ** 2 / (2.0 * v)) * -np.expm1(-2.0 * x * y / v)
    return np.where(small, 0.0, pref * body)


def _reflected_density(mu, sigma, tau, x, y, variant: str):
    tau = np.asarray(tau, dtype=float)
    small = tau < SMALL_TIME
    tt = np.where(small, 1.0, tau)
    if variant == "paper_exact":
        v = sigma * sigma * tt
        pref = np.exp(-(mu / sigma) * ((x - y) / sigma) - mu * mu * tt / (2.0 * sigma**2)) / np.sqrt(2.0 * pi * v)
        body = np.exp(-(x - y) ** 2 / (2.0 * v)) - np.exp(-(x + y) ** 2 / (2.0 * v))
        val = pref * body - mu / (2.0 * sigma) * ndtr((x + y + mu * tt) / np.sqrt(2.0 * v))
    else:
        st = sigma * np.sqrt(tt)
        a = (y - x - mu * tt) / st
        c = (y + x + mu * tt) / st
        k = 2.0 * mu * y / sigma**2
        val = (np.exp(-0.5 * a * a) + np.exp(k - 0.5 * c * c)) / (_SQRT2PI * st)
        val = val - (2.0 * mu / sigma**2) * np.exp(k + log_ndtr(-c))
    return np.where(small, 0.0, val)


def _running_max_cdf(mu, sigma, z, s, variant: str):
    s = np.asarray(s, dtype=float)
    z = np.asarray(z, dtype=float)
    nu = mu / sigma
    ss = np.sqrt(s)
    if variant == "paper_exact":
        val = ndtr((z - nu * s) / ss) - np.exp(2.0 * nu * z + log_ndtr((-z - nu * s) / ss))
    else:
        val = ndtr((z + nu * s) / ss) - np.exp(-2.0 * nu * z + log_ndtr((-z + nu * s) / ss))
    return val


# ---------------------------------------------------------------------------
# public, validated API


def std_normal_cdf(z):
    """Standard Gaussian distribution function."""
    z = _finite(z)
    return _out(ndtr(z))


def survival_above_level(diff: Diffusion, x, beta, theta):
    """``P(x + mu*theta + sigma*W_theta >= beta, inf_{s<=theta} (x + mu*s + sigma*W_s) > 0)``."""
    x, beta, theta = _finite(x), _finite(beta), _finite(theta)
    _check(x > 0, "x must be positive")
    _check(beta > 0, "beta must be positive")
    _check(theta > 0, "theta must be positive")
    return _out(_survival(diff.mu, diff.sigma, x, beta, theta))


def hitting_time_density(diff: Diffusion, x, t):
    """Density of the first time ``x + mu*s + sigma*W_s`` reaches zero."""
    x, t = _finite(x), _finite(t)
    _check(x > 0, "x must be positive")
    _check(t > 0, "t must be positive")
    return _out(_hitting_density(diff.mu, diff.sigma, x, t))


def hitting_time_cdf(diff: Diffusion, x, t):
    """``P(S(x) <= t)`` for the hitting time of zero."""
    x, t = _finite(x), _finite(t)
    _check(x > 0, "x must be positive")
    _check(t > 0, "t must be positive")
    return _out(_hitting_cdf(diff.mu, diff.sigma, x, t))


def absorbed_density(diff: Diffusion, x, y, tau):
    """Transition density from ``x`` to ``y`` over ``tau`` of the process
    killed at zero (sub-probability density)."""
    x, y, tau = _finite(x), _finite(y), _finite(tau)
    _check(x > 0, "x must be positive")
    _check(y > 0, "y must be positive")
    _check(tau > 0, "tau must be positive")
    return _out(_absorbed_density(diff.mu, diff.sigma, tau, x, y))


def reflected_density(diff: Diffusion, x, y, tau, variant: Variant = DEFAULT_VARIANT):
    """Transition density of the process reflected at zero."""
    _check_variant(variant)
    x, y, tau = _finite(x), _finite(y), _finite(tau)
    _check(x >= 0, "x must be nonnegative")
    _check(y >= 0, "y must be nonnegative")
    _check(tau > 0, "tau must be positive")
    return _out(_reflected_density(diff.mu, diff.sigma, tau, x, y, variant))


def running_max_cdf(diff: Diffusion, z, s, variant: Variant = DEFAULT_VARIANT):
    """``P(xi_s <= z)`` with ``xi_s = sup_{theta<=s} (-(mu/sigma)*theta - W_theta)``.

    The capital injected by time ``s`` when the uncontrolled surplus starts
    at ``x`` is ``max(0, sigma*xi_s - x)``.
    """
    _check_variant(variant)
    z, s = _finite(z), _finite(s)
    _check(z >= 0, "z must be nonnegative")
    _check(s > 0, "s must be positive")
    val = _running_max_cdf(diff.mu, diff.sigma, z, s, variant)
    if variant == "consistent":
        # rounding can push the difference a few ulp outside [0, 1]
        val = np.clip(val, 0.0, 1.0)
    return _out(val)
