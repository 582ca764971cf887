"""Stopping value ``u`` and control value ``V``.

``u`` is evaluated from its density representation with the boundary held
fixed.  ``V`` is rebuilt from ``V_x = u``:

    V(t, x) = N(t, b(t)) - int_x^{b(t)} u(t, y) dy          (x <= b(t))
    V(t, x) = N(t, b(t)) + (x - b(t)) f(t)                  (x >  b(t))

where the anchor ``N(t, b(t))`` is the expected payoff of the process
reflected at zero, penalised above the boundary:

    N(t, x) = E[ -int_0^{T-t} f'(t+s) (R_s - b(t+s))^+ ds
                 - int_0^{T-t} m(t+s) dI0_s + g(T, R_{T-t}) ].

It is computed either by Monte Carlo or by quadrature of the reflected
density and of the running-supremum law.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .analytics import DEFAULT_VARIANT, VARIANTS, _reflected_density, _running_max_cdf
from .boundary import Boundary, SolverOptions, _Equation, _rows_rule
from .problem import ProblemData
from .quadrature import sqrt_panel_rule, unit_rule
from .simulate import NoDividends, PathConfig, run_paths, _stderr, _fmean


class BoundaryMismatch(ValueError):
    """The boundary does not belong to the problem."""


def _check_boundary(p: ProblemData, b: Boundary) -> None:
    if abs(b.T - p.T) > 1e-12 * p.T:
        raise BoundaryMismatch(f"boundary horizon {b.T} differs from problem horizon {p.T}")
    owner = b.meta.get("problem")
    if owner is not None and owner != p.fingerprint():
        raise BoundaryMismatch("boundary was solved for a different problem")
    if not np.all(b.values[:-1] > 0.0):
        raise BoundaryMismatch("boundary is not solved (nonpositive values before T)")


def _tail(b: Boundary, t: float) -> tuple[np.ndarray, np.ndarray]:
    """``t`` followed by the knots after it, and the boundary there."""
    j = int(np.searchsorted(b.times, t, side="right"))
    return (np.concatenate(([t], b.times[j:])),
            np.concatenate(([b(t)], b.values[j:])))


class StoppingValue:
    """Evaluator of ``u(t, x)`` for a fixed problem and boundary."""

    def __init__(self, p: ProblemData, b: Boundary, opts: SolverOptions | None = None):
        _check_boundary(p, b)
        self.p = p
        self.b = b
        self.eq = _Equation(p, opts or SolverOptions())

    def row(self, t: float, xs) -> np.ndarray:
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        if t >= self.p.T:
            return np.asarray(np.broadcast_to(self.p.g_x(self.p.T, xs), xs.shape), dtype=float)
        tk, bk = _tail(self.b, float(t))
        return self.eq.representation(float(t), xs, tk, bk)

    def integral(self, t: float, lo, hi, n_panels: int = 8) -> np.ndarray:
        """``int_lo^hi u(t, y) dy`` for arrays ``lo``, ``hi`` (Gauss-Legendre)."""
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        edges = np.linspace(lo, hi, n_panels + 1, axis=-1)
        s, w = unit_rule(10)
        yy, ww = _rows_rule(edges, s, w)
        vals = self.row(t, yy.ravel()).reshape(yy.shape)
        return np.sum(ww * vals, axis=(1, 2))


def eval_u(p: ProblemData, b: Boundary, t: float, x, opts: SolverOptions | None = None):
    """Stopping value ``u(t, x)`` for ``x > 0`` and ``t`` in ``[0, T]``.

    At ``t = T`` the terminal value ``g_x(T, x)`` is returned.
    """
    if not 0.0 <= t <= p.T:
        raise ValueError("t must lie in [0, T]")
    xa = np.asarray(x, dtype=float)
    if np.any(~(xa > 0.0)) or not np.all(np.isfinite(xa)):
        raise ValueError("x must be positive and finite")
    out = StoppingValue(p, b, opts).row(t, xa.ravel()).reshape(xa.shape)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# anchor N(t, x)


class _AnchorQuadrature:
    """Quadrature of ``N(t, x)`` with the reflected density of ``variant``."""

    def __init__(self, p: ProblemData, b: Boundary, variant: str, width: float = 12.0,
                 n_inner: int = 24):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        self.p, self.b, self.variant = p, b, variant
        self.width = width
        self.n_inner = n_inner
        self.s, self.w = unit_rule(10)

    def _support(self, x, s):
        mu, sig = self.p.diff.mu, self.p.diff.sigma
        spread = self.width * sig * np.sqrt(s)
        return np.maximum(x + mu * s - spread, 0.0), x + abs(mu) * s + spread

    def excess(self, x: float, s: np.ndarray, level: np.ndarray) -> np.ndarray:
        """``E[(R_s(x) - level)^+]`` for arrays ``s``, ``level``."""
        mu, sig = self.p.diff.mu, self.p.diff.sigma
        lo, hi = self._support(x, s)
        lo = np.maximum(lo, level)
        hi = np.maximum(hi, lo)
        yy, ww = _rows_rule(np.linspace(lo, hi, self.n_inner + 1, axis=-1), self.s, self.w)
        dens = _reflected_density(mu, sig, s[:, None, None], x, yy, self.variant)
        return np.sum(ww * (yy - level[:, None, None]) * dens, axis=(1, 2))

    def injections(self, x: float, s: np.ndarray) -> np.ndarray:
        """``E[I0_s(x)] = sigma int_{x/sigma}^inf P(xi_s > z) dz``."""
        mu, sig = self.p.diff.mu, self.p.diff.sigma
        z0 = np.full_like(s, x / sig)
        z1 = z0 + abs(mu / sig) * s + self.width * np.sqrt(s)
        zz, ww = _rows_rule(np.linspace(z0, z1, self.n_inner + 1, axis=-1), self.s, self.w)
        cdf = _running_max_cdf(mu, sig, zz, s[:, None, None], self.variant)
        return sig * np.sum(ww * (1.0 - cdf), axis=(1, 2))

    def __call__(self, t: float, x: float) -> float:
        p, b = self.p, self.b
        T = p.T
        if t >= T:
            return float(p.g(T, x))
        tau = T - t
        s, w = self.s, self.w

        # penalty: panels aligned with the boundary knots, first one in sqrt form
        tk, _ = _tail(b, t)
        d = tk[1] - t
        uu = [t + d * s * s]
        wu = [2.0 * d * s * w]
        if tk.size > 2:
            a, c = tk[1:-1, None], tk[2:, None]
            uu.append((a + (c - a) * s).ravel())
            wu.append(((c - a) * w).ravel())
        uu = np.concatenate(uu)
        wu = np.concatenate(wu)
        pen = float(np.sum(wu * -p.f_prime(uu) * self.excess(x, uu - t, b(uu))))

        # injections, after integrating by parts in time
        ss, ws = sqrt_panel_rule(tau, 10, levels=12)
        inj = float(p.m(T)) * float(self.injections(x, np.array([tau]))[0])
        inj -= float(np.sum(ws * self.injections(x, ss) * p.dm(t + ss)))

        lo, hi = self._support(x, np.array([tau]))
        yy, ww = _rows_rule(np.linspace(lo, hi, 4 * self.n_inner + 1, axis=-1), s, w)
        dens = _reflected_density(p.diff.mu, p.diff.sigma, tau, x, yy, self.variant)
        term = float(np.sum(ww * p.g(T, yy) * dens))
        return math.fsum((pen, -inj, term))


def anchor_quadrature(p: ProblemData, b: Boundary, t: float, x: float,
                      variant: str = DEFAULT_VARIANT) -> float:
    """``N(t, x)`` by quadrature."""
    _check_boundary(p, b)
    return _AnchorQuadrature(p, b, variant)(float(t), float(x))


@dataclass(frozen=True)
class MCAnchor:
    value: float
    stderr: float


def anchor_mc(p: ProblemData, b: Boundary, t: float, xs, cfg: PathConfig) -> list[MCAnchor]:
    """``N(t, x)`` by Monte Carlo over the reflected process, for each ``x``."""
    _check_boundary(p, b)
    raw = run_paths(p, [NoDividends()], t, xs, cfg, pen_level=b)
    out = []
    for i in range(raw["x_T"].shape[2]):
        pen, inj, liq = raw["pen"][:, 0, i], raw["inj"][:, 0, i], raw["liq"][:, 0, i]
        val = math.fsum((_fmean(pen), -_fmean(inj), _fmean(liq)))
        se = _stderr(pen - inj + liq, cfg.antithetic)
        if not (math.isfinite(val) and math.isfinite(se)):
            raise FloatingPointError("Monte Carlo anchor is not finite")
        out.append(MCAnchor(val, se))
    return out


@dataclass(frozen=True)
class AnchorOptions:
    """How ``N(t, b(t))`` is obtained.

    ``method`` is ``"mc"`` or ``"quadrature"``; the Monte Carlo step is
    ``dt_fraction * T``.
    """

    method: str = "mc"
    variant: str = DEFAULT_VARIANT
    n_paths: int = 50_000
    dt_fraction: float = 1e-3
    seed: int = 7001

    def __post_init__(self) -> None:
        if self.method not in ("mc", "quadrature"):
            raise ValueError("anchor method must be 'mc' or 'quadrature'")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")

    def path_config(self, T: float) -> PathConfig:
        return PathConfig(dt=self.dt_fraction * T, n_paths=self.n_paths, seed=self.seed,
                          scheme="bridge", antithetic=True)


@dataclass(frozen=True)
class VEstimate:
    value: float
    stderr: float
    anchor: float
    method: str


def value_estimate(p: ProblemData, b: Boundary, t: float, x: float,
                   anchor: AnchorOptions | None = None,
                   u_eval: StoppingValue | None = None) -> VEstimate:
    """``V(t, x)`` with the standard error inherited from the anchor."""
    anchor = anchor or AnchorOptions()
    if not 0.0 <= t <= p.T:
        raise ValueError("t must lie in [0, T]")
    if not (x >= 0.0 and math.isfinite(x)):
        raise ValueError("x must be nonnegative")
    _check_boundary(p, b)
    if t >= p.T:
        return VEstimate(float(p.g(p.T, x)), 0.0, float(p.g(p.T, 0.0)), anchor.method)
    bt = b(t)
    if anchor.method == "mc":
        res = anchor_mc(p, b, t, [bt], anchor.path_config(p.T))[0]
        n_val, se = res.value, res.stderr
    else:
        n_val, se = anchor_quadrature(p, b, t, bt, anchor.variant), 0.0
    if x > bt:
        return VEstimate(n_val + (x - bt) * float(p.f(t)), se, n_val, anchor.method)
    u_eval = u_eval or StoppingValue(p, b)
    integral = float(u_eval.integral(t, x, bt)[0])
    return VEstimate(n_val - integral, se, n_val, anchor.method)


def eval_V(p: ProblemData, b: Boundary, t: float, x: float,
           anchor: AnchorOptions | None = None) -> float:
    """Control value ``V(t, x)``."""
    return value_estimate(p, b, t, x, anchor).value


# ---------------------------------------------------------------------------
# tabulation


@dataclass(frozen=True)
class ValueGrid:
    """``u`` and ``V`` on ``times x levels`` (levels exclude 0)."""

    times: np.ndarray
    levels: np.ndarray
    u: np.ndarray
    V: np.ndarray
    anchor: np.ndarray
    meta: dict = field(default_factory=dict)

    def to_csv(self, header: dict | None = None, per_time: dict | None = None) -> str:
        """Long-format rows ``t, x, u, V`` plus any per-time columns."""
        per_time = per_time or {}
        names = sorted(per_time)
        cols = [np.asarray(per_time[k], dtype=float) for k in names]
        buf = io.StringIO()
        for k, v in sorted({**self.meta, **(header or {})}.items()):
            buf.write(f"# {k}={v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "u", "V"] + names)
        for i, t in enumerate(self.times):
            extra = [f"{c[i]:.17g}" for c in cols]
            for j, x in enumerate(self.levels):
                w.writerow([f"{t:.17g}", f"{x:.17g}", f"{self.u[i, j]:.17g}",
                            f"{self.V[i, j]:.17g}"] + extra)
        return buf.getvalue()

    def to_json(self, header: dict | None = None, per_time: dict | None = None) -> str:
        payload = {"meta": {**self.meta, **(header or {})},
                   "times": self.times.tolist(),
                   "levels": self.levels.tolist(),
                   "anchor": self.anchor.tolist(),
                   "u": self.u.tolist(),
                   "V": self.V.tolist()}
        for k, v in (per_time or {}).items():
            payload[k] = [None if not math.isfinite(a) else a for a in np.asarray(v, float).tolist()]
        return json.dumps(payload, sort_keys=True, indent=1) + "\n"


def build_value_grid(p: ProblemData, b: Boundary, n_t: int = 64, n_x: int = 128,
                     x_max: float | None = None, anchor: AnchorOptions | None = None,
                     opts: SolverOptions | None = None) -> ValueGrid:
    """Tabulate ``u`` and ``V``.

    Times are uniform on ``[0, T]``, levels uniform on ``(0, x_max]`` with
    ``x_max = 1.5 b(0)`` by default.  The anchor defaults to quadrature.
    """
    anchor = anchor or AnchorOptions(method="quadrature")
    ev = StoppingValue(p, b, opts)
    if x_max is None:
        x_max = 1.5 * float(b.values[0])
    times = np.linspace(0.0, p.T, n_t)
    levels = x_max * np.arange(1, n_x + 1) / n_x
    U = np.empty((n_t, n_x))
    V = np.empty((n_t, n_x))
    N = np.empty(n_t)
    quad = _AnchorQuadrature(p, b, anchor.variant)
    s, w = unit_rule(10)
    for i, t in enumerate(times):
        U[i] = ev.row(t, levels)
        if i == n_t - 1:
            V[i] = np.asarray(p.g(p.T, levels), dtype=float)
            N[i] = float(p.g(p.T, 0.0))
            continue
        bt = b(t)
        if anchor.method == "mc":
            N[i] = anchor_mc(p, b, t, [bt], anchor.path_config(p.T))[0].value
        else:
            N[i] = quad(t, bt)
        below = levels <= bt
        # cumulative integral of u from each level up to b(t)
        pts = np.append(levels[below], bt)
        if pts.size > 1:
            yy, ww = _rows_rule(pts[None, :], s, w)
            vals = ev.row(t, yy.ravel()).reshape(yy.shape)
            seg = np.sum(ww * vals, axis=-1)[0]
            tail = np.cumsum(seg[::-1])[::-1]
            V[i, below] = N[i] - tail
        V[i, ~below] = N[i] + (levels[~below] - bt) * float(p.f(t))
    meta = {"version": __version__, "problem": p.fingerprint(), "boundary": b.fingerprint(),
            "anchor": anchor.method, "variant": anchor.variant}
    return ValueGrid(times, levels, U, V, N, meta)


# ---------------------------------------------------------------------------
# checks


def normalised(p: ProblemData, times: np.ndarray, u: np.ndarray) -> np.ndarray:
    """``e^{rt} u`` for the case study (so that ``eta <= . <= kappa``), else ``u``."""
    if p.case is None:
        return u
    return u * np.exp(p.case.r * np.asarray(times))[:, None]


@dataclass(frozen=True)
class GridReport:
    lower_margin: float
    upper_margin: float
    terminal_exact: bool
    max_increase_x: float
    max_increase_t: float


def grid_report(p: ProblemData, vg: ValueGrid) -> GridReport:
    """Bounds ``f <= u <= m``, terminal row, monotonicity (in normalised units)."""
    f = np.asarray(p.f(vg.times), dtype=float)[:, None]
    m = np.asarray(p.m(vg.times), dtype=float)[:, None]
    lower = float(np.min(normalised(p, vg.times, vg.u - f)))
    upper = float(np.min(normalised(p, vg.times, m - vg.u)))
    terminal = bool(np.all(vg.u[-1] == np.asarray(p.g_x(p.T, vg.levels), dtype=float)))
    un = normalised(p, vg.times, vg.u)
    inc_x = float(np.max(np.diff(un, axis=1)))
    inc_t = float(np.max(np.diff(un, axis=0)))
    return GridReport(lower, upper, terminal, inc_x, inc_t)


def smooth_fit(p: ProblemData, b: Boundary, ev: StoppingValue | None = None) -> np.ndarray:
    """``|u(t_i, b(t_i)) - f(t_i)|`` at every knot before ``T``."""
    ev = ev or StoppingValue(p, b)
    out = np.empty(b.times.size - 1)
    for i, (t, bt) in enumerate(zip(b.times[:-1], b.values[:-1])):
        out[i] = abs(ev.row(float(t), [bt])[0] - float(p.f(t)))
    return out


def neumann(p: ProblemData, b: Boundary, times, h: float | None = None,
            ev: StoppingValue | None = None) -> np.ndarray:
    """One-sided second-order ``V_x(t, 0+) - m(t)`` for each ``t < T``.

    ``V`` is differenced at ``0, h, 2h`` with ``h = 1e-4 b(0)``; the anchor
    cancels, so ``V(t, kh) - V(t, 0) = int_0^{kh} u(t, y) dy``.
    """
    ev = ev or StoppingValue(p, b)
    if h is None:
        h = 1e-4 * float(b.values[0])
    out = []
    for t in times:
        i1, i2 = ev.integral(float(t), [0.0, 0.0], [h, 2.0 * h], n_panels=2)
        vx = (4.0 * i1 - i2) / (2.0 * h)
        out.append(vx - float(p.m(t)))
    return np.array(out)


def pde_residual(p: ProblemData, b: Boundary, n_t: int, n_x: int, t_max: float,
                 x_max: float, margin: float, ev: StoppingValue | None = None) -> np.ndarray:
    """``u_t + sigma^2 u_xx / 2 + mu u_x`` by central differences.

    The stencil grid is uniform on ``[0, t_max] x [0, x_max]``; only nodes
    whose stencil lies at least ``margin`` below the boundary are kept
    (others are NaN).
    """
    ev = ev or StoppingValue(p, b)
    ht = t_max / (n_t - 1)
    hx = x_max / n_x
    times = np.linspace(0.0, t_max, n_t)
    levels = hx * np.arange(1, n_x + 1)
    U = np.stack([ev.row(t, levels) for t in times])
    mu, sig = p.diff.mu, p.diff.sigma
    ut = (U[2:, 1:-1] - U[:-2, 1:-1]) / (2.0 * ht)
    ux = (U[1:-1, 2:] - U[1:-1, :-2]) / (2.0 * hx)
    uxx = (U[1:-1, 2:] - 2.0 * U[1:-1, 1:-1] + U[1:-1, :-2]) / (hx * hx)
    res = ut + 0.5 * sig * sig * uxx + mu * ux
    ok = levels[None, 2:] <= np.asarray(b(times[2:]))[:, None] - margin
    return np.where(ok, res, np.nan)


@dataclass(frozen=True)
class StructureReport:
    """Down-set structure of ``{x : u(t, x) > f(t)}`` on the grid."""

    down_set_violations: int
    max_increase_x: float
    max_cells_off: float
    cells: float


def check_structure(p: ProblemData, b: Boundary, vg: ValueGrid,
                    tol: float | None = None) -> StructureReport:
    """Empirical threshold structure of the continuation region.

    A node is counted as continuation when ``u - f(t) > tol`` (default
    ``1e-6 f(0)``).  For every row before ``T`` the continuation nodes must
    form a prefix of the levels; the first stopping node ``c(t)`` is
    compared with ``b(t)`` in grid cells.
    """
    if tol is None:
        tol = 1e-6 * float(p.f(0.0))
    cell = float(vg.levels[1] - vg.levels[0])
    violations = 0
    worst = 0.0
    for i, t in enumerate(vg.times[:-1]):
        cont = vg.u[i] - float(p.f(t)) > tol
        n_prefix = int(np.argmin(cont)) if not cont.all() else cont.size
        violations += int(np.count_nonzero(cont[n_prefix:]))
        c = vg.levels[n_prefix] if n_prefix < cont.size else vg.levels[-1] + cell
        worst = max(worst, abs(c - b(t)) / cell)
    un = normalised(p, vg.times, vg.u)
    return StructureReport(violations, float(np.max(np.diff(un[:-1], axis=1))), worst, cell)


def grid_hash(vg: ValueGrid) -> str:
    h = hashlib.sha256()
    for a in (vg.times, vg.levels, vg.u, vg.V):
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:16]
