"""Free boundary of the stopping problem.

The boundary is found by marching backward over a time grid.  At every knot
``t_i`` the level ``beta = b(t_i)`` is the root of

    F(beta) = I_f(beta) + I_m(beta) + I_g(beta) - f(t_i),

    I_f = int_0^{T-t_i} -f'(t_i + th) P(beta + mu th + sigma W_th >= b(t_i + th), no ruin) dth
    I_m = int_0^{T-t_i} m(t_i + s) rho_S(beta, s) ds
    I_g = int_0^inf g_x(T, y) rho_A(T - t_i, beta, y) dy

with ``b`` on ``(t_i, T]`` taken from the knots already solved.
"""
from __future__ import annotations

import csv
import hashlib
import io
import warnings
from dataclasses import dataclass, field
from math import sqrt

import numpy as np
from scipy.optimize import brentq

from . import __version__
from .analytics import Diffusion, _absorbed_density, _hitting_density, _survival
from .problem import CaseStudyParams, ProblemData, ValidationError, require_valid
from .quadrature import panel_rule, unit_rule


class SolverError(RuntimeError):
    """The scalar equation at a knot could not be bracketed."""


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing knots ``0 = t_0 < ... < t_N = T``."""

    times: np.ndarray

    def __post_init__(self) -> None:
        t = np.array(self.times, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("a time grid needs at least two knots")
        if not np.all(np.diff(t) > 0.0):
            raise ValueError("time knots must be strictly increasing")
        t.flags.writeable = False
        object.__setattr__(self, "times", t)

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def n(self) -> int:
        """Number of intervals."""
        return self.times.size - 1

    @classmethod
    def geometric(cls, T: float, n: int, exponent: float = 2.5) -> "TimeGrid":
        """Knots with ``T - t_i`` in geometric progression.

        ``T - t_0 = T`` and the last interval has length ``T * n**-exponent``.
        """
        if n < 2:
            raise ValueError("need n >= 2")
        h_min = T * float(n) ** -exponent
        q = (h_min / T) ** (1.0 / (n - 1))
        gaps = T * q ** np.arange(n)
        t = T - gaps
        t[0] = 0.0
        return cls(np.append(t, T))

    @classmethod
    def uniform(cls, T: float, n: int) -> "TimeGrid":
        t = np.linspace(0.0, T, n + 1)
        t[-1] = T
        return cls(t)


def _sqrt_interp(T, t, ta, tb, ba, bb):
    # linear in sqrt(T - t): exact for the square-root decay of b near T
    ra, rb = np.sqrt(T - ta), np.sqrt(T - tb)
    rt = np.sqrt(np.maximum(T - t, 0.0))
    return ba + (bb - ba) * (ra - rt) / (ra - rb)


@dataclass(frozen=True)
class Boundary:
    """Boundary values on a time grid.

    Between knots ``b`` is linear in ``sqrt(T - t)``.  ``b(T) = 0``.

    Attributes
    ----------
    grid : TimeGrid
    values : ndarray
        ``b(t_i)``, last entry zero.
    flagged : tuple of int
        Knots where no sign change was found and the next value was copied.
    """

    grid: TimeGrid
    values: np.ndarray
    flagged: tuple[int, ...] = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.times.shape:
            raise ValueError("boundary values must match the grid")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def T(self) -> float:
        return self.grid.T

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        r = np.sqrt(np.clip(self.T - t, 0.0, self.T))
        rk = np.sqrt(self.T - self.times)
        out = np.interp(r, rk[::-1], self.values[::-1])
        return float(out) if out.ndim == 0 else out

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(self.times.tobytes())
        h.update(self.values.tobytes())
        return h.hexdigest()[:16]

    def to_csv(self, header: dict | None = None) -> str:
        buf = io.StringIO()
        for k, v in sorted((header or {}).items()):
            buf.write(f"# {k}={v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "b"])
        for t, b in zip(self.times, self.values):
            w.writerow([f"{t:.17g}", f"{b:.17g}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Boundary":
        rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        reader = csv.reader(rows)
        head = next(reader)
        if head[:2] != ["t", "b"]:
            raise ValueError(f"unexpected boundary header {head}")
        data = np.array([[float(a), float(b)] for a, b in reader])
        return cls(TimeGrid(data[:, 0]), data[:, 1])


@dataclass(frozen=True)
class SolverOptions:
    """Knobs of the backward march.

    ``n_gauss`` nodes per panel; ``n_tail`` panels for the hitting-time and
    terminal integrals; ``xtol`` is the absolute tolerance in ``beta``.
    """

    n_gauss: int = 10
    n_tail: int = 40
    xtol: float = 1e-10
    width: float = 12.0
    max_expand: int = 60


class _Equation:
    """Right-hand side of the knot equation for a fixed problem."""

    def __init__(self, p: ProblemData, opts: SolverOptions):
        self.p = p
        self.mu = p.diff.mu
        self.sigma = p.diff.sigma
        self.opts = opts
        self.s, self.w = unit_rule(opts.n_gauss)

    def rhs(self, ti: float, beta: float, tk: np.ndarray, bk: np.ndarray) -> float:
        """``I_f + I_m + I_g`` at time ``ti`` with ``b(ti) = beta``.

        ``tk`` holds ``ti`` followed by the knots in ``(ti, T]`` and ``bk`` the
        matching boundary values (``bk[0]`` is ignored and replaced by beta).
        """
        bk = bk.copy()
        bk[0] = beta
        return float(self.representation(ti, np.array([beta]), tk, bk)[0])

    def representation(self, ti: float, x: np.ndarray, tk: np.ndarray, bk: np.ndarray) -> np.ndarray:
        """Stopping value at ``(ti, x)`` for every ``x > 0`` given the boundary
        values ``bk`` at ``tk`` (``tk[0] = ti``, ``bk[0] = b(ti)``)."""
        p, mu, sig = self.p, self.mu, self.sigma
        s, w = self.s, self.w
        T = p.T
        x = np.asarray(x, dtype=float)[:, None]

        # first panel in th = d * s^2: the integrand behaves like a function of sqrt(th)
        d = tk[1] - ti
        th = d * s * s
        bb = _sqrt_interp(T, ti + th, ti, tk[1], bk[0], bk[1])
        wf = 2.0 * d * s * w * -p.f_prime(ti + th)
        total = _survival(mu, sig, x, bb, th) @ wf

        if tk.size > 2:
            a = tk[1:-1, None]
            b = tk[2:, None]
            tt = (a + (b - a) * s).ravel()
            bb = _sqrt_interp(T, tt, np.repeat(tk[1:-1], s.size), np.repeat(tk[2:], s.size),
                              np.repeat(bk[1:-1], s.size), np.repeat(bk[2:], s.size))
            wf = ((b - a) * w).ravel() * -p.f_prime(tt)
            total = total + _survival(mu, sig, x, bb, tt - ti) @ wf

        tau = T - ti
        # below x^2 / (80 sigma^2) the hitting density is below e^-40 of its peak
        lo = np.minimum(np.maximum(x[:, 0] ** 2 / (80.0 * sig * sig), 1e-300), tau)
        edges = np.geomspace(lo, np.full_like(lo, tau), self.opts.n_tail + 1, axis=-1)
        ss, ww = _rows_rule(edges, s, w)
        dens = _hitting_density(mu, sig, x[..., None], ss)
        total = total + np.sum(ww * p.m(ti + ss) * dens, axis=(1, 2))

        total = total + self.terminal(tau, x[:, 0])
        return total

    def terminal(self, tau: float, x) -> np.ndarray:
        """``int_0^inf g_x(T, y) rho_A(tau, x, y) dy`` for every ``x``."""
        p, mu, sig = self.p, self.mu, self.sigma
        x = np.atleast_1d(np.asarray(x, dtype=float))[:, None]
        spread = self.opts.width * sig * sqrt(tau)
        centre = x + mu * tau
        edges = np.linspace(np.maximum(0.0, centre - spread), centre + spread,
                            self.opts.n_tail + 1, axis=-1)[:, 0, :]
        yy, ww = _rows_rule(edges, self.s, self.w)
        dens = _absorbed_density(mu, sig, tau, x[..., None], yy)
        return np.sum(ww * p.g_x(p.T, yy) * dens, axis=(1, 2))


def _rows_rule(edges: np.ndarray, s: np.ndarray, w: np.ndarray):
    """Gauss-Legendre nodes and weights for each row of panel ``edges``:
    shape (rows, panels, n)."""
    a = edges[..., :-1, None]
    h = np.diff(edges, axis=-1)[..., None]
    return a + h * s, h * w


def solve_boundary(p: ProblemData, grid: TimeGrid, opts: SolverOptions | None = None) -> Boundary:
    """Backward march over ``grid``.

    Raises
    ------
    SolverError
        When no upper bracket is found at a knot.
    """
    opts = opts or SolverOptions()
    require_valid(p)
    if abs(grid.T - p.T) > 1e-12 * p.T:
        raise ValueError("grid horizon differs from the problem horizon")
    if grid.n < 16:
        raise ValueError("the solver needs at least 16 time intervals")
    eq = _Equation(p, opts)
    tk = grid.times
    n = grid.n
    b = np.zeros(n + 1)
    flagged = []
    sig = p.diff.sigma
    for i in range(n - 1, -1, -1):
        ti = float(tk[i])
        fi = float(p.f(ti))
        tsub, bsub = tk[i:], b[i:]

        def F(beta):
            return eq.rhs(ti, beta, tsub, bsub) - fi

        lo = 1e-12
        hi = b[i + 1] + 4.0 * sig * sqrt(tk[i + 1] - ti)
        f_hi = F(hi)
        k = 0
        while f_hi > -1e-14:
            if k >= opts.max_expand:
                raise SolverError(
                    f"knot {i} (t={ti:.6g}): no sign change in [{lo:.3g}, {hi:.3g}], "
                    f"F(lo)={F(lo):.3g}, F(hi)={f_hi:.3g}")
            hi *= 1.5
            f_hi = F(hi)
            k += 1
        f_lo = F(lo)
        if f_lo <= 0.0:
            b[i] = b[i + 1]
            flagged.append(i)
            continue
        b[i] = brentq(F, lo, hi, xtol=opts.xtol, rtol=4 * np.finfo(float).eps, maxiter=200)

    out = Boundary(grid, b, tuple(sorted(flagged)),
                   meta={"solver": "backward_march", "problem": p.fingerprint()})
    tol = 1e-8 * max(float(b.max()), 1e-300)
    if np.any(np.diff(b) > tol):
        warnings.warn("solved boundary is not nonincreasing within tolerance", RuntimeWarning,
                      stacklevel=2)
    return out


def residual(p: ProblemData, b: Boundary, t: float, opts: SolverOptions | None = None) -> float:
    """``RHS - f(t)`` of the knot equation at any ``t`` in ``[0, T)`` with ``b`` fixed."""
    if not 0.0 <= t < p.T:
        raise ValueError("t must lie in [0, T)")
    eq = _Equation(p, opts or SolverOptions())
    tk = b.times
    j = int(np.searchsorted(tk, t, side="right"))
    tsub = np.concatenate(([t], tk[j:]))
    bt = b(t)
    bsub = np.concatenate(([bt], b.values[j:]))
    return eq.rhs(float(t), bt, tsub, bsub) - float(p.f(t))


def residuals(p: ProblemData, b: Boundary, opts: SolverOptions | None = None) -> np.ndarray:
    """Residuals at every knot but the terminal one."""
    return np.array([residual(p, b, float(t), opts) for t in b.times[:-1]])


def perpetual_roots(params: CaseStudyParams, diff: Diffusion) -> tuple[float, float]:
    """Roots ``lambda_-, lambda_+`` of ``sigma^2 l^2 / 2 + mu l - r = 0``."""
    mu, sig, r = diff.mu, diff.sigma, params.r
    disc = sqrt(mu * mu + 2.0 * r * sig * sig)
    return (-mu - disc) / sig**2, (-mu + disc) / sig**2


def perpetual_boundary(params: CaseStudyParams, diff: Diffusion, b_max: float = 100.0) -> float:
    """Infinite-horizon boundary from smooth fit.

    With ``v = A e^{l+ x} + B e^{l- x}`` and ``v(0) = kappa``,
    ``v(b) = eta``, ``v'(b) = 0`` the level ``b`` solves

        e^{-l- b} + rho e^{-l+ b} = (1 + rho) kappa / eta,   rho = -l- / l+,

    whose left side increases strictly from ``1 + rho`` at ``b = 0``.
    """
    if params.r <= 0.0:
        raise ValidationError("the perpetual boundary needs r > 0")
    if not params.kappa > params.eta:
        raise ValidationError("the perpetual boundary needs kappa > eta")
    lm, lp = perpetual_roots(params, diff)
    rho = -lm / lp
    target = (1.0 + rho) * params.kappa / params.eta

    def F(x):
        with np.errstate(over="ignore"):  # +inf still brackets the root
            return np.exp(-lm * x) + rho * np.exp(-lp * x) - target

    if F(b_max) < 0.0:
        raise SolverError(f"perpetual boundary not bracketed in (0, {b_max}]; increase b_max")
    return float(brentq(F, 0.0, b_max, xtol=1e-14, rtol=4 * np.finfo(float).eps))


def perpetual_value(params: CaseStudyParams, diff: Diffusion, x, b_inf: float | None = None):
    """Undiscounted perpetual stopping value ``v(x)``, equal to ``eta`` beyond ``b_inf``."""
    if b_inf is None:
        b_inf = perpetual_boundary(params, diff)
    lm, lp = perpetual_roots(params, diff)
    rho = -lm / lp
    x = np.asarray(x, dtype=float)
    xc = np.minimum(x, b_inf)
    c = params.eta / (1.0 + rho)
    v = c * (rho * np.exp(lp * (xc - b_inf)) + np.exp(lm * (xc - b_inf)))
    return float(v) if v.ndim == 0 else v


def boundary_header(p: ProblemData, config_hash: str | None = None) -> dict:
    head = {"version": __version__, "problem": p.fingerprint()}
    if config_hash is not None:
        head["config_hash"] = config_hash
    return head
