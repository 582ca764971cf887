"""Property and cross-check suite with a machine-readable report.

Checks run in a fixed order: problem validation, closed-form laws against
Monte Carlo, boundary properties, value-function properties, simulated
strategy values, and the agreement of the two anchoring routes for ``V``.
Every check yields a :class:`CheckResult` whose status follows from the
measured value and its tolerance alone.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .analytics import DEFAULT_VARIANT, VARIANTS, Diffusion
from .analytics import (_absorbed_density, _hitting_density, _reflected_density,
                        _running_max_cdf, _survival)
from .boundary import (Boundary, SolverError, TimeGrid, perpetual_boundary, residual,
                       solve_boundary)
from .lattice import lattice_boundary
from .problem import CaseStudyParams, ProblemData, ValidationError, make_case_study, validate
from .quadrature import adaptive
from .simulate import (ConstantBarrier, NoDividends, OptimalBarrier, PathConfig, ScaledBarrier,
                       estimate_many, killed_endpoints, reflected_endpoints)
from .value import (AnchorOptions, StoppingValue, anchor_mc, anchor_quadrature,
                    build_value_grid, check_structure, grid_report, neumann, pde_residual,
                    value_estimate)

STATUSES = ("pass", "warn", "fail")


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one check: ``measured`` is compared with ``tolerance``.

    ``provenance`` names the property or oracle behind the check.
    """

    name: str
    status: str
    measured: float
    tolerance: float
    provenance: str

    def __post_init__(self) -> None:
        if self.status not in STATUSES:
            raise ValueError(f"status must be one of {STATUSES}")


def judge(name: str, measured: float, tolerance: float, provenance: str,
          warn_factor: float | None = None) -> CheckResult:
    """``pass`` if ``measured <= tolerance``; ``warn`` up to ``warn_factor``
    times the tolerance; ``fail`` otherwise (and for NaN)."""
    measured = float(measured)
    if measured <= tolerance:
        status = "pass"
    elif warn_factor is not None and measured <= warn_factor * tolerance:
        status = "warn"
    else:
        status = "fail"
    return CheckResult(name, status, measured, float(tolerance), provenance)


def boolean(name: str, ok: bool, provenance: str) -> CheckResult:
    return CheckResult(name, "pass" if ok else "fail", 0.0 if ok else 1.0, 0.0, provenance)


# ---------------------------------------------------------------------------
# options


@dataclass(frozen=True)
class OraclePoint:
    mu: float
    sigma: float
    x: float
    horizon: float


ORACLE_POINTS: tuple[OraclePoint, ...] = (
    OraclePoint(0.1, 0.3, 1.0, 5.0),
    OraclePoint(0.03, 0.25, 0.5, 1.0),
    OraclePoint(-0.05, 0.4, 0.2, 0.5),
    OraclePoint(0.2, 0.5, 0.3, 2.0),
    OraclePoint(0.03, 0.25, 0.1, 0.25),
)


@dataclass(frozen=True)
class SuiteOptions:
    """Sizes and tolerances of the suite.

    The defaults are the full acceptance run; :meth:`quick` returns reduced
    path counts and grids with widened tolerances.
    """

    quick: bool = False
    seed: int = 20240611
    variant: str = DEFAULT_VARIANT
    # analytics oracles
    oracle_points: int = 5
    oracle_paths: int = 1_000_000
    oracle_steps: int = 64
    z_max: float = 3.0
    # boundary
    n_knots: int = 256
    residual_tol: float = 1e-5
    mono_rel: float = 1e-8
    perpetual_T: float = 20.0
    perpetual_rel: float = 0.01
    lattice_steps: int = 16000
    lattice_cells: float = 2.0
    # value grid
    n_t: int = 64
    n_x: int = 128
    bound_tol: float = 1e-6
    monotone_tol: float = 1e-6
    structure_tol: float = 1e-6
    smooth_fit_tol: float = 5e-4
    neumann_rel: float = 1e-3
    pde_ratio: float = 0.35
    pde_grid: tuple[int, int] = (17, 32)
    # simulation
    n_paths: int = 100_000
    dt: float = 1e-4
    x_fractions: tuple[float, ...] = (0.25, 0.5, 1.0)
    # anchoring routes
    anchor_paths: int = 50_000
    anchor_dt_fraction: float = 2.5e-4
    anchor_times: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 0.9)
    # negative control: multiply the solved boundary
    boundary_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if not 1 <= self.oracle_points <= len(ORACLE_POINTS):
            raise ValueError("oracle_points out of range")
        if not self.boundary_scale > 0.0:
            raise ValueError("boundary_scale must be positive")

    @classmethod
    def quick_profile(cls, **overrides) -> "SuiteOptions":
        base = dict(quick=True, oracle_points=3, oracle_paths=100_000, oracle_steps=32,
                    z_max=4.0, n_knots=64, residual_tol=1e-4, lattice_steps=2000,
                    lattice_cells=3.0, n_t=16, n_x=32, monotone_tol=1e-5, structure_tol=2e-5,
                    smooth_fit_tol=1e-3,
                    neumann_rel=2e-3, pde_ratio=0.45, pde_grid=(9, 16), n_paths=10_000,
                    dt=1e-3, anchor_paths=10_000, anchor_dt_fraction=1e-3,
                    anchor_times=(0.0, 0.5, 0.9))
        base.update(overrides)
        return cls(**base)


# ---------------------------------------------------------------------------
# analytics against Monte Carlo


def _z(est: float, exact: float, se: float) -> float:
    if se > 0.0:
        return abs(est - exact) / se
    return 0.0 if est == exact else math.inf


def _bin_prob(density, a: float, b: float) -> float:
    return adaptive(lambda y: float(density(y)), a, b)


def oracle_checks(opts: SuiteOptions) -> list[CheckResult]:
    """Closed-form laws against Monte Carlo at the oracle points.

    For each point (drift, volatility, start, horizon):

    * survival above a level: ``P(no absorption, X >= beta)``;
    * hitting-time density: ``P(S > horizon) = 1 - int rho_S``;
    * absorbed density: probability of a band around the mean end point;
    * reflected density: probability of the same band for the reflected path;
    * running supremum: ``P(I^0 <= c)`` with ``c = sigma sqrt(horizon) / 2``.
    """
    out = []
    prov = "closed form vs Monte Carlo (3-sigma)"
    for k, pt in enumerate(ORACLE_POINTS[:opts.oracle_points]):
        mu, sig, x, h = pt.mu, pt.sigma, pt.x, pt.horizon
        seed = opts.seed + 1000 * k
        ends, alive = killed_endpoints(Diffusion(mu, sig), x, h, opts.oracle_paths,
                                       opts.oracle_steps, seed)
        n = ends.size
        centre = x + mu * h
        half = 0.5 * sig * math.sqrt(h)
        lo, hi = max(centre - half, 0.05 * x), max(centre + half, 0.1 * x)
        beta = max(centre, 0.5 * x)

        def prop(hits):
            ph = float(np.count_nonzero(hits)) / n
            return ph, math.sqrt(max(ph * (1.0 - ph), 1.0 / n) / n)

        ph, se = prop(alive & (ends >= beta))
        exact = float(_survival(mu, sig, x, beta, h))
        out.append(judge(f"oracle.survival_above_level.p{k}", _z(ph, exact, se), opts.z_max, prov))

        ph, se = prop(alive)
        exact = 1.0 - adaptive(lambda t: float(_hitting_density(mu, sig, x, t)), 0.0, h)
        out.append(judge(f"oracle.hitting_time_density.p{k}", _z(ph, exact, se), opts.z_max, prov))

        ph, se = prop(alive & (ends >= lo) & (ends <= hi))
        exact = _bin_prob(lambda y: _absorbed_density(mu, sig, h, x, y), lo, hi)
        out.append(judge(f"oracle.absorbed_density.p{k}", _z(ph, exact, se), opts.z_max, prov))

        R, inj = reflected_endpoints(Diffusion(mu, sig), x, h, opts.oracle_paths,
                                     opts.oracle_steps, seed + 1)
        ph, se = prop((R >= lo) & (R <= hi))
        exact = _bin_prob(lambda y: _reflected_density(mu, sig, h, x, y, opts.variant), lo, hi)
        out.append(judge(f"oracle.reflected_density.p{k}", _z(ph, exact, se), opts.z_max, prov))

        c = half
        ph, se = prop(inj <= c)
        exact = float(_running_max_cdf(mu, sig, (x + c) / sig, h, opts.variant))
        out.append(judge(f"oracle.running_max_cdf.p{k}", _z(ph, exact, se), opts.z_max, prov))
    return out


# ---------------------------------------------------------------------------
# boundary


@dataclass
class _State:
    """Objects shared between the stages of one suite run."""

    p: ProblemData
    b: Boundary | None = None
    b_inf: float | None = None
    extra: dict = field(default_factory=dict)


def _scaled(b: Boundary, factor: float) -> Boundary:
    if factor == 1.0:
        return b
    return Boundary(b.grid, b.values * factor, b.flagged, dict(b.meta))


def boundary_checks(st: _State, opts: SuiteOptions) -> list[CheckResult]:
    p = st.p
    out = []
    solved = solve_boundary(p, TimeGrid.geometric(p.T, opts.n_knots))
    b = _scaled(solved, opts.boundary_scale)
    st.b = b
    b_inf = perpetual_boundary(p.case, p.diff) if p.case is not None and p.case.r > 0 else None
    st.b_inf = b_inf
    scale = b_inf if b_inf is not None else float(b.values.max())
    vals = b.values[:-1]
    out.append(boolean("boundary.positive", bool(np.all(vals > 0.0)), "boundary positive before T"))
    out.append(boolean("boundary.no_flagged_knots", not b.flagged, "every knot equation has a root"))
    inc = float(np.max(np.diff(b.values)))
    out.append(judge("boundary.nonincreasing", inc, opts.mono_rel * scale,
                     "boundary nonincreasing in t", warn_factor=10.0))
    if b_inf is not None:
        out.append(judge("boundary.below_perpetual", float(vals.max()) - b_inf, 1e-6,
                         "finite-horizon boundary below perpetual"))
        out.append(judge("boundary.last_knot", float(vals[-1]) / b_inf, 0.05,
                         "boundary tends to zero at T (last knot / b_inf)"))
    coarse = solve_boundary(p, TimeGrid.geometric(p.T, opts.n_knots // 2))
    drop = float(solved.values[-2]) - float(coarse.values[-2])
    out.append(CheckResult("boundary.last_knot_refinement", "pass" if drop < 0.0 else "fail",
                           drop, 0.0, "last knot decreases when the grid is refined"))
    # residual at the knots and halfway between them (in sqrt(T - t))
    tk = b.times
    rt = np.sqrt(p.T - tk)
    mids = p.T - (0.5 * (rt[:-1] + rt[1:])) ** 2
    stride = max(1, (tk.size - 1) // 64)
    pts = np.concatenate((tk[:-1:stride], mids[::stride]))
    res = max(abs(residual(p, b, float(t))) for t in pts)
    f_scale = float(p.case.eta) if p.case is not None else float(p.f(0.0))
    out.append(judge("boundary.residual", res, opts.residual_tol * f_scale,
                     "knot equation residual (knots and midpoints)"))
    if p.case is not None and b_inf is not None:
        pl = make_case_study(p.case, p.diff, opts.perpetual_T)
        bl = solve_boundary(pl, TimeGrid.geometric(opts.perpetual_T, opts.n_knots))
        out.append(judge("boundary.perpetual_limit", abs(float(bl.values[0]) / b_inf - 1.0),
                         opts.perpetual_rel, "long-horizon boundary vs perpetual boundary"))
    lat = lattice_boundary(p, opts.lattice_steps)
    out.append(judge("boundary.lattice_b0", abs(float(b.values[0]) - lat.b0) / lat.dx,
                     opts.lattice_cells, "binomial lattice oracle (cells)"))
    return out


# ---------------------------------------------------------------------------
# value function


def value_checks(st: _State, opts: SuiteOptions) -> list[CheckResult]:
    p, b = st.p, st.b
    out = []
    ev = StoppingValue(p, b)
    vg = build_value_grid(p, b, opts.n_t, opts.n_x,
                          anchor=AnchorOptions(method="quadrature", variant=opts.variant))
    st.extra["grid"] = vg
    rep = grid_report(p, vg)
    out.append(judge("value.lower_bound", -rep.lower_margin, opts.bound_tol, "u >= f"))
    out.append(judge("value.upper_bound", -rep.upper_margin, opts.bound_tol, "u <= m"))
    out.append(boolean("value.terminal", rep.terminal_exact, "u(T, x) = g_x(T, x) exactly"))
    out.append(judge("value.monotone_x", rep.max_increase_x, opts.monotone_tol,
                     "u nonincreasing in x", warn_factor=10.0))
    out.append(judge("value.monotone_t", rep.max_increase_t, opts.monotone_tol,
                     "normalised u nonincreasing in t", warn_factor=10.0))
    times = vg.times[:-1]
    sf = np.abs(np.array([ev.row(float(t), [b(float(t))])[0] for t in times]) - p.f(times))
    out.append(judge("value.smooth_fit", float(sf.max()), opts.smooth_fit_tol,
                     "u(t, b(t)) = f(t)"))
    nm = np.abs(neumann(p, b, times, ev=ev))
    out.append(judge("value.neumann", float(nm.max()), opts.neumann_rel * float(p.m(0.0)),
                     "V_x(t, 0+) = m(t)"))
    nt, nx = opts.pde_grid
    t_max = 0.5 * p.T
    x_max = 0.75 * float(b.values[0])
    margin = 0.1 * float(b.values[0])
    r1 = pde_residual(p, b, nt, nx, t_max, x_max, margin, ev)
    r2 = pde_residual(p, b, 2 * nt - 1, 2 * nx, t_max, x_max, margin, ev)
    ratio = float(np.nanmax(np.abs(r2)) / np.nanmax(np.abs(r1)))
    out.append(judge("value.pde_order", ratio, opts.pde_ratio,
                     "PDE residual ratio under one refinement (O(h^2) gives 0.25)"))
    sr = check_structure(p, b, vg, tol=opts.structure_tol * float(p.f(0.0)))
    out.append(judge("value.structure_violations", sr.down_set_violations, 0,
                     "continuation region is a down-set in x"))
    out.append(judge("value.structure_cells", sr.max_cells_off, 2.0,
                     "first stopping node within 2 cells of b(t)"))
    return out


# ---------------------------------------------------------------------------
# simulation


def simulation_checks(st: _State, opts: SuiteOptions) -> list[CheckResult]:
    p, b = st.p, st.b
    out = []
    b0 = float(b.values[0])
    xs = [f * b0 for f in opts.x_fractions]
    strategies = [OptimalBarrier(b), ScaledBarrier(b, 0.5), NoDividends()]
    if st.b_inf is not None:
        strategies.insert(1, ConstantBarrier(st.b_inf))
    cfg = PathConfig(dt=opts.dt * p.T, n_paths=opts.n_paths, seed=opts.seed)
    est = estimate_many(p, strategies, 0.0, xs, cfg)
    anchor = AnchorOptions(method="quadrature", variant=opts.variant)
    ev = StoppingValue(p, b)
    V = [value_estimate(p, b, 0.0, x, anchor, ev).value for x in xs]
    st.extra["sim"] = (xs, V, est)
    prov_opt = "J(optimal barrier) = V (3-sigma)"
    for i, x in enumerate(xs):
        e = est[0][i]
        out.append(judge(f"sim.optimal.x{i}", _z(e.j_mean, V[i], e.j_stderr), opts.z_max, prov_opt))
    gap_best = -math.inf
    for a, s in enumerate(strategies[1:], start=1):
        for i in range(len(xs)):
            e = est[a][i]
            out.append(judge(f"sim.dominance.{s.name}.x{i}", (e.j_mean - V[i]) / e.j_stderr,
                             opts.z_max, "J(strategy) <= V + 3 stderr"))
    for i in range(len(xs)):
        best_other = max(est[a][i].j_mean for a in range(1, len(strategies)))
        gap_best = max(gap_best, (est[0][i].j_mean - best_other) / est[0][i].j_stderr)
    out.append(CheckResult("sim.optimal_strictly_best", "pass" if gap_best >= 1.0 else "fail",
                           gap_best, 1.0, "optimal estimate largest by >= 1 stderr somewhere"))
    return out


# ---------------------------------------------------------------------------
# anchoring routes


def route_checks(st: _State, opts: SuiteOptions) -> list[CheckResult]:
    """``N(t, b(t))`` by Monte Carlo against reflected-density quadrature.

    ``V`` differs between the two routes only through this anchor, so the
    anchors are compared directly.
    """
    p, b = st.p, st.b
    out = []
    cfg = PathConfig(dt=opts.anchor_dt_fraction * p.T, n_paths=opts.anchor_paths,
                     seed=opts.seed + 7, scheme="bridge", antithetic=True)
    for k, frac in enumerate(opts.anchor_times):
        t = frac * p.T
        bt = float(b(t))
        mc = anchor_mc(p, b, t, [bt], cfg)[0]
        q = anchor_quadrature(p, b, t, bt, opts.variant)
        out.append(judge(f"route.anchor.t{k}", _z(mc.value, q, mc.stderr), opts.z_max,
                         "Monte Carlo anchor vs quadrature anchor (3-sigma)"))
    return out


# ---------------------------------------------------------------------------
# driver


@dataclass(frozen=True)
class SuiteReport:
    checks: tuple[CheckResult, ...]
    meta: dict

    @property
    def counts(self) -> dict:
        return {s: sum(c.status == s for c in self.checks) for s in STATUSES}

    @property
    def ok(self) -> bool:
        return self.counts["fail"] == 0

    def to_json(self) -> str:
        def clean(v):
            return None if isinstance(v, float) and not math.isfinite(v) else v

        checks = [{k: clean(v) for k, v in asdict(c).items()} for c in self.checks]
        doc = {"checks": checks, "counts": self.counts, "meta": self.meta,
               "status": "pass" if self.ok else "fail"}
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    def summary(self) -> str:
        lines = [f"{c.status.upper():4s}  {c.name}  measured={c.measured:.6g}  "
                 f"tolerance={c.tolerance:.6g}" for c in self.checks]
        n = self.counts
        lines.append(f"{len(self.checks)} checks: {n['pass']} pass, {n['warn']} warn, "
                     f"{n['fail']} fail")
        return "\n".join(lines) + "\n"


def _meta(opts: SuiteOptions, problem: str | None, extra: dict | None) -> dict:
    d = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(opts).items()}
    blob = json.dumps(d, sort_keys=True).encode()
    meta = {"version": __version__, "options_hash": hashlib.sha256(blob).hexdigest()[:16],
            "problem": problem, "profile": "quick" if opts.quick else "full"}
    meta.update(extra or {})
    return meta


def run_suite(p: ProblemData, options: SuiteOptions | None = None,
              meta: dict | None = None) -> SuiteReport:
    """Run every check in order; stops after problem validation if it fails."""
    opts = options or SuiteOptions()
    checks = [boolean(f"validation.{c.name}", c.passed, "standing assumptions (sampled)")
              for c in validate(p).checks]
    if not all(c.status == "pass" for c in checks):
        return SuiteReport(tuple(checks), _meta(opts, p.fingerprint(), meta))
    checks += oracle_checks(opts)
    st = _State(p)
    try:
        checks += boundary_checks(st, opts)
    except SolverError as exc:
        raise SolverError(f"boundary stage: {exc}") from exc
    checks += value_checks(st, opts)
    checks += simulation_checks(st, opts)
    checks += route_checks(st, opts)
    return SuiteReport(tuple(checks), _meta(opts, p.fingerprint(), meta))


def run_suite_params(mu: float, sigma: float, T: float, eta: float, kappa: float, r: float,
                     options: SuiteOptions | None = None, meta: dict | None = None) -> SuiteReport:
    """Build the case study and run the suite; invalid parameters yield a
    failed validation check instead of an exception."""
    opts = options or SuiteOptions()
    try:
        p = make_case_study(CaseStudyParams(eta, kappa, r), Diffusion(mu, sigma), T)
    except (ValidationError, ValueError) as exc:
        check = CheckResult("validation.parameters", "fail", 1.0, 0.0, f"parameter validation: {exc}")
        return SuiteReport((check,), _meta(opts, None, meta))
    return run_suite(p, opts, meta)


__all__ = ["CheckResult", "SuiteOptions", "SuiteReport", "ORACLE_POINTS", "OraclePoint",
           "judge", "run_suite", "run_suite_params", "oracle_checks", "boundary_checks",
           "value_checks", "simulation_checks", "route_checks"]
