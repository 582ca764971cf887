"""Problem instances: payoff triple ``(f, m, g)`` on top of a diffusion."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from math import isfinite
from typing import Callable

import numpy as np

from .analytics import Diffusion, DomainError

TimeFn = Callable[[np.ndarray], np.ndarray]
SpaceTimeFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


class ValidationError(ValueError):
    """Problem parameters violate a standing assumption."""


@dataclass(frozen=True)
class CaseStudyParams:
    """Exponentially discounted proportional payoffs.

    Attributes
    ----------
    eta : float
        Net proportion of a dividend received by the shareholders.
    kappa : float
        Cost per unit of injected capital, ``kappa > eta``.
    r : float
        Discount rate.
    """

    eta: float = 1.0
    kappa: float = 1.5
    r: float = 0.05

    def __post_init__(self) -> None:
        for name in ("eta", "kappa", "r"):
            v = getattr(self, name)
            if not isfinite(v) or v < 0.0:
                raise ValidationError(f"{name} must be finite and nonnegative, got {v}")
        if not self.kappa > self.eta:
            raise ValidationError(
                f"kappa must exceed eta (got kappa={self.kappa}, eta={self.eta}); "
                "otherwise injecting and paying out at once is profitable and the value is unbounded")


@dataclass(frozen=True)
class ProblemData:
    """Model parameters and payoff functions.

    ``f``, ``f_prime`` and ``m`` map times to rates, ``g`` and ``g_x`` map
    ``(t, x)`` to values.  All callables must accept numpy arrays.
    ``m_prime`` is optional; when absent a central difference is used.
    """

    diff: Diffusion
    T: float
    f: TimeFn
    f_prime: TimeFn
    m: TimeFn
    g: SpaceTimeFn
    g_x: SpaceTimeFn
    m_prime: TimeFn | None = None
    case: CaseStudyParams | None = None
    label: str = "custom"
    _key: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self) -> None:
        if not (isfinite(self.T) and self.T > 0.0):
            raise ValidationError(f"horizon T must be positive and finite, got {self.T}")

    def dm(self, t):
        """Derivative of ``m``."""
        if self.m_prime is not None:
            return self.m_prime(t)
        t = np.asarray(t, dtype=float)
        h = 1e-6 * self.T
        return (self.m(t + h) - self.m(t - h)) / (2.0 * h)

    def fingerprint(self) -> str:
        """Stable short hash of the instance (only meaningful for case studies)."""
        payload = {"label": self.label, "mu": self.diff.mu, "sigma": self.diff.sigma,
                   "T": self.T, "key": list(self._key)}
        raw = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(raw).hexdigest()[:16]


def make_case_study(params: CaseStudyParams, diff: Diffusion, T: float) -> ProblemData:
    """``f = eta e^{-rt}``, ``m = kappa e^{-rt}``, ``g = eta e^{-rt} x``."""
    eta, kappa, r = params.eta, params.kappa, params.r

    def f(t):
        return eta * np.exp(-r * np.asarray(t, dtype=float))

    def f_prime(t):
        return -r * eta * np.exp(-r * np.asarray(t, dtype=float))

    def m(t):
        return kappa * np.exp(-r * np.asarray(t, dtype=float))

    def m_prime(t):
        return -r * kappa * np.exp(-r * np.asarray(t, dtype=float))

    def g(t, x):
        return eta * np.exp(-r * np.asarray(t, dtype=float)) * np.asarray(x, dtype=float)

    def g_x(t, x):
        t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
        return eta * np.exp(-r * t)

    return ProblemData(diff=diff, T=float(T), f=f, f_prime=f_prime, m=m, g=g, g_x=g_x,
                       m_prime=m_prime, case=params, label="case_study",
                       _key=(eta, kappa, r))


def default_problem(T: float = 1.0) -> ProblemData:
    """Case study with mu=0.03, sigma=0.25, r=0.05, eta=1, kappa=1.5."""
    return make_case_study(CaseStudyParams(1.0, 1.5, 0.05), Diffusion(0.03, 0.25), T)


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    passed: bool
    worst_margin: float
    worst_t: float
    worst_x: float | None = None


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[AssumptionCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]


def validate(p: ProblemData, n: int = 1024, x_max: float | None = None) -> ValidationReport:
    """Sampling check of the standing assumptions on a uniform grid.

    * ``m(t) > f(t)`` for every sampled ``t``;
    * ``g_x(T, x) >= f(T)`` for every sampled ``x > 0``;
    * ``f``, ``f_prime``, ``m`` and ``g_x`` finite on the samples.

    This is evidence, not proof: only the sampled points are inspected.
    """
    t = np.linspace(0.0, p.T, n)
    if x_max is None:
        x_max = max(1.0, 10.0 * p.diff.sigma * np.sqrt(p.T))
    x = np.linspace(0.0, x_max, n + 1)[1:]
    checks = []

    gap = np.asarray(p.m(t) - p.f(t), dtype=float)
    k = int(np.argmin(gap))
    checks.append(AssumptionCheck("injection_cost_exceeds_dividend", bool(np.all(gap > 0.0)),
                                  float(gap[k]), float(t[k])))

    fT = float(p.f(np.float64(p.T)))
    gap = np.asarray(p.g_x(np.full_like(x, p.T), x), dtype=float) - fT
    k = int(np.argmin(gap))
    checks.append(AssumptionCheck("terminal_marginal_reward", bool(np.all(gap >= 0.0)),
                                  float(gap[k]), p.T, float(x[k])))

    vals = [p.f(t), p.f_prime(t), p.m(t), p.g_x(np.full_like(x, p.T), x)]
    finite = all(np.all(np.isfinite(np.asarray(v, dtype=float))) for v in vals)
    checks.append(AssumptionCheck("finite_payoffs", bool(finite), 0.0 if finite else float("nan"), 0.0))
    return ValidationReport(tuple(checks))


def require_valid(p: ProblemData) -> None:
    rep = validate(p)
    if not rep.ok:
        raise ValidationError("problem violates: " + ", ".join(rep.failed()))


__all__ = ["CaseStudyParams", "ProblemData", "ValidationError", "ValidationReport",
           "AssumptionCheck", "make_case_study", "default_problem", "validate",
           "require_valid", "DomainError"]
