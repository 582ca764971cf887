"""Monte Carlo simulation of the controlled surplus.

Within every time step the free increment ``mu dt + sigma dW`` is applied,
then the dividend barrier caps the surplus and the injection floor lifts it
back to zero.  Two step rules are available:

``"euler"``
    clamp the end point (cap, then floor);
``"bridge"``
    sample the extremum of the Brownian bridge between the end points and
    apply the one-sided Skorokhod map exactly.  When both barriers are
    within reach in the same step the rule falls back to clamping.

Random numbers come from a Philox4x32-10 stream keyed by the seed and
indexed by path, so results do not depend on chunking or ordering.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels_py
from .analytics import Diffusion
from .boundary import Boundary
from .kernels import SCHEMES, simulate_batch
from .problem import ProblemData


# ---------------------------------------------------------------------------
# strategies


@dataclass(frozen=True)
class OptimalBarrier:
    """Reflect at the solved boundary."""

    boundary: Boundary
    name: str = "optimal"

    def barrier(self, t):
        return np.asarray(self.boundary(t), dtype=float)


@dataclass(frozen=True)
class ScaledBarrier:
    """Reflect at ``factor * b(t)``."""

    boundary: Boundary
    factor: float
    name: str = "scaled"

    def __post_init__(self) -> None:
        if not self.factor > 0.0:
            raise ValueError("factor must be positive")

    def barrier(self, t):
        return self.factor * np.asarray(self.boundary(t), dtype=float)


@dataclass(frozen=True)
class ConstantBarrier:
    """Reflect at a fixed level."""

    level: float
    name: str = "constant"

    def __post_init__(self) -> None:
        if not self.level > 0.0:
            raise ValueError("barrier level must be positive")

    def barrier(self, t):
        return np.full(np.shape(t), float(self.level))


@dataclass(frozen=True)
class NoDividends:
    """Never pay dividends; only inject."""

    name: str = "none"

    def barrier(self, t):
        return np.full(np.shape(t), np.inf)


Strategy = OptimalBarrier | ScaledBarrier | ConstantBarrier | NoDividends


# ---------------------------------------------------------------------------
# configuration and results


@dataclass(frozen=True)
class PathConfig:
    """Discretisation and sampling parameters.

    ``n_paths`` must be even when ``antithetic`` is set; paths ``2j`` and
    ``2j+1`` then share a stream with opposite Gaussian increments.
    """

    dt: float = 1e-4
    n_paths: int = 100_000
    seed: int = 20240611
    scheme: str = "bridge"
    antithetic: bool = True
    chunk: int = 4096

    def __post_init__(self) -> None:
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.antithetic and (self.n_paths % 2 or self.chunk % 2):
            raise ValueError("antithetic sampling needs an even n_paths and chunk")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")


@dataclass(frozen=True)
class SimEstimate:
    """Monte Carlo estimate of ``J(D; t, x)``.

    ``j_mean`` equals ``math.fsum((dividends, -injections, liquidation))``.
    """

    j_mean: float
    j_stderr: float
    dividends: float
    injections: float
    liquidation: float
    mean_D: float
    mean_I: float
    frac_injected: float
    n_paths: int
    dt: float
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def components(self) -> tuple[float, float, float]:
        return (self.dividends, -self.injections, self.liquidation)

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in ("j_mean", "j_stderr", "dividends", "injections",
                                             "liquidation", "mean_D", "mean_I",
                                             "frac_injected", "n_paths", "dt")}
        out.update(self.extra)
        return out


def _fmean(a: np.ndarray) -> float:
    return math.fsum(a.tolist()) / a.size


def _stderr(samples: np.ndarray, antithetic: bool) -> float:
    if antithetic:
        samples = 0.5 * (samples[0::2] + samples[1::2])
    n = samples.size
    if n < 2:
        return float("nan")
    mean = _fmean(samples)
    var = math.fsum(((samples - mean) ** 2).tolist()) / (n - 1)
    return math.sqrt(var / n)


@dataclass(frozen=True)
class StepGrid:
    """Uniform step grid on ``[t, T]``."""

    t: float
    T: float
    n_steps: int

    @classmethod
    def make(cls, t: float, T: float, dt: float) -> "StepGrid":
        if not 0.0 <= t < T:
            raise ValueError("start time must lie in [0, T)")
        return cls(float(t), float(T), max(1, int(round((T - t) / dt))))

    @property
    def dt(self) -> float:
        return (self.T - self.t) / self.n_steps

    @property
    def times(self) -> np.ndarray:
        s = self.t + self.dt * np.arange(self.n_steps + 1)
        s[-1] = self.T
        return s


def _inputs(p: ProblemData, strategies, grid: StepGrid, pen_level=None):
    times = grid.times
    upper = np.vstack([np.broadcast_to(s.barrier(times), times.shape) for s in strategies])
    f_w = np.asarray(p.f(times[:-1]), dtype=float)
    m_w = np.asarray(p.m(times[:-1]), dtype=float)
    if pen_level is None:
        level = np.zeros_like(times)
        pen_w = np.zeros_like(times)
    else:
        level = np.asarray(pen_level(times), dtype=float)
        trap = np.full(times.shape, grid.dt)
        trap[0] = trap[-1] = 0.5 * grid.dt
        pen_w = -np.asarray(p.f_prime(times), dtype=float) * trap
    return upper, level, pen_w, f_w, m_w


def run_paths(p: ProblemData, strategies, t: float, xs, cfg: PathConfig, pen_level=None) -> dict:
    """Per-path outputs for every (strategy, start level) pair.

    Returns arrays of shape ``(n_paths, n_strategies, n_levels)``: the
    kernel fields plus ``liq`` (terminal reward ``g(T, X_T)``).
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if np.any(xs < 0.0) or not np.all(np.isfinite(xs)):
        raise ValueError("start levels must be finite and nonnegative")
    grid = StepGrid.make(t, p.T, cfg.dt)
    upper, level, pen_w, f_w, m_w = _inputs(p, strategies, grid, pen_level)
    parts = []
    for start in range(0, cfg.n_paths, cfg.chunk):
        n = min(cfg.chunk, cfg.n_paths - start)
        parts.append(simulate_batch(xs, upper, level, pen_w, f_w, m_w, p.diff.mu, p.diff.sigma,
                                    grid.dt, n, cfg.seed, start, cfg.scheme, cfg.antithetic))
    out = {k: np.concatenate([q[k] for q in parts]) for k in parts[0]}
    out["liq"] = np.asarray(p.g(p.T, out["x_T"]), dtype=float)
    out["dt"] = grid.dt
    return out


def _summarise(raw: dict, a: int, i: int, cfg: PathConfig) -> SimEstimate:
    div = raw["div"][:, a, i]
    inj = raw["inj"][:, a, i]
    liq = raw["liq"][:, a, i]
    j = div - inj + liq
    comps = (_fmean(div), _fmean(inj), _fmean(liq))
    return SimEstimate(
        j_mean=math.fsum((comps[0], -comps[1], comps[2])),
        j_stderr=_stderr(j, cfg.antithetic),
        dividends=comps[0], injections=comps[1], liquidation=comps[2],
        mean_D=_fmean(raw["d_T"][:, a, i]), mean_I=_fmean(raw["i_T"][:, a, i]),
        frac_injected=_fmean((raw["i_T"][:, a, i] > 0.0).astype(float)),
        n_paths=cfg.n_paths, dt=raw["dt"])


def estimate_many(p: ProblemData, strategies, t: float, xs, cfg: PathConfig) -> list[list[SimEstimate]]:
    """Estimates for every strategy (rows) and start level (columns).

    All pairs share the same random numbers.
    """
    raw = run_paths(p, strategies, t, xs, cfg)
    nx = raw["x_T"].shape[2]
    return [[_summarise(raw, a, i, cfg) for i in range(nx)] for a in range(len(strategies))]


def estimate_J(p: ProblemData, s, t: float, x: float, cfg: PathConfig) -> SimEstimate:
    """``J(D; t, x) = E[int f dD - int m dI + g(T, X_T)]``."""
    return estimate_many(p, [s], t, [x], cfg)[0][0]


@dataclass(frozen=True)
class PathRecord:
    """One simulated path: step times and post-adjustment ``X``, ``D``, ``I``."""

    s: np.ndarray
    X: np.ndarray
    D: np.ndarray
    I: np.ndarray
    dividends: float
    injections: float
    liquidation: float


def simulate_path(p: ProblemData, s, t: float, x: float, cfg: PathConfig,
                  path_index: int = 0) -> PathRecord:
    """Trace of path ``path_index`` (same stream as in ``estimate_J``)."""
    grid = StepGrid.make(t, p.T, cfg.dt)
    upper, level, pen_w, f_w, m_w = _inputs(p, [s], grid)
    out = _kernels_py.simulate_batch([x], upper, level, pen_w, f_w, m_w, p.diff.mu,
                                     p.diff.sigma, grid.dt, 1, cfg.seed, path_index,
                                     cfg.scheme, cfg.antithetic, record=True)
    xT = out["x_T"][0, 0, 0]
    return PathRecord(s=grid.times - t, X=out["X"][:, 0, 0, 0], D=out["D"][:, 0, 0, 0],
                      I=out["I"][:, 0, 0, 0], dividends=float(out["div"][0, 0, 0]),
                      injections=float(out["inj"][0, 0, 0]),
                      liquidation=float(p.g(p.T, xT)))


def paths_csv(p: ProblemData, s, t: float, x: float, cfg: PathConfig, n: int) -> str:
    """First ``n`` paths as CSV rows ``path, s, X, D, I``."""
    lines = ["path,s,X,D,I"]
    for j in range(n):
        rec = simulate_path(p, s, t, x, cfg, j)
        for row in zip(rec.s, rec.X, rec.D, rec.I):
            lines.append(f"{j}," + ",".join(f"{v:.17g}" for v in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# oracles for the closed-form laws


@dataclass(frozen=True)
class ProportionEstimate:
    p: float
    stderr: float
    n: int


def _proportion(hits: np.ndarray) -> ProportionEstimate:
    n = hits.size
    ph = float(np.count_nonzero(hits)) / n
    return ProportionEstimate(ph, math.sqrt(max(ph * (1.0 - ph), 0.0) / n), n)


def killed_endpoints(diff: Diffusion, x: float, horizon: float, n_paths: int, n_steps: int,
                     seed: int, chunk: int = 1 << 17) -> tuple[np.ndarray, np.ndarray]:
    """End points of ``x + mu s + sigma W_s`` and survival flags.

    Exact Gaussian increments on ``n_steps`` steps; between steps the path is
    killed with the Brownian-bridge crossing probability
    ``exp(-2 X_k X_{k+1} / (sigma^2 dt))``.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    dt = horizon / n_steps
    sdt = diff.sigma * math.sqrt(dt)
    ends, alive_all = [], []
    for start in range(0, n_paths, chunk):
        n = min(chunk, n_paths - start)
        X = np.full(n, float(x))
        alive = np.ones(n, dtype=bool)
        for _ in range(n_steps):
            Xn = X + diff.mu * dt + sdt * rng.standard_normal(n)
            u = rng.random(n)
            cross = np.exp(-2.0 * np.maximum(X, 0.0) * np.maximum(Xn, 0.0) / (sdt * sdt))
            alive &= (Xn > 0.0) & (u >= cross)
            X = Xn
        ends.append(X)
        alive_all.append(alive)
    return np.concatenate(ends), np.concatenate(alive_all)


def hitting_time_mc(diff: Diffusion, x: float, horizon: float, n_paths: int = 1_000_000,
                    n_steps: int = 64, seed: int = 1) -> ProportionEstimate:
    """Monte Carlo estimate of ``P(S(x) > horizon)`` (survival)."""
    if not x > 0.0:
        raise ValueError("x must be positive")
    _, alive = killed_endpoints(diff, x, horizon, n_paths, n_steps, seed)
    return _proportion(alive)


def reflected_endpoints(diff: Diffusion, x: float, horizon: float, n_paths: int,
                        n_steps: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """``R_horizon(x)`` and ``I^0_horizon(x)`` for the process reflected at zero."""
    cfg = PathConfig(dt=horizon / n_steps, n_paths=n_paths, seed=seed, scheme="bridge",
                     antithetic=False, chunk=1 << 15)
    grid = StepGrid(0.0, horizon, n_steps)
    upper = np.full((1, n_steps + 1), np.inf)
    zeros = np.zeros(n_steps + 1)
    ones = np.ones(n_steps)
    parts = [simulate_batch([x], upper, zeros, zeros, ones, ones, diff.mu, diff.sigma, grid.dt,
                            min(cfg.chunk, n_paths - s), seed, s, "bridge", False)
             for s in range(0, n_paths, cfg.chunk)]
    R = np.concatenate([q["x_T"][:, 0, 0] for q in parts])
    I = np.concatenate([q["i_T"][:, 0, 0] for q in parts])
    return R, I


__all__ = ["OptimalBarrier", "ScaledBarrier", "ConstantBarrier", "NoDividends", "PathConfig",
           "SimEstimate", "StepGrid", "run_paths", "estimate_many", "estimate_J",
           "simulate_path", "paths_csv", "PathRecord", "ProportionEstimate",
           "killed_endpoints", "hitting_time_mc", "reflected_endpoints"]
