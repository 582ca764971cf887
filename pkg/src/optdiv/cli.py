"""Command-line front end.

Configuration is a flat ``key = value`` file.  Values are resolved in the
order: built-in defaults, the ``--config`` file, ``OPTDIV_<KEY>`` environment
variables, then command-line flags (``--T 20``, ``--seed 5`` ...).  Every
output file carries the configuration hash and the package version, and the
same configuration reproduces byte-identical files.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analytics import DEFAULT_VARIANT, VARIANTS, Diffusion
from .boundary import (SolverError, TimeGrid, perpetual_boundary, residual, solve_boundary)
from .problem import CaseStudyParams, ValidationError, make_case_study
from .simulate import (ConstantBarrier, NoDividends, OptimalBarrier, PathConfig, ScaledBarrier,
                       estimate_J, paths_csv)
from .value import AnchorOptions, StoppingValue, build_value_grid, neumann
from .verify import SuiteOptions, run_suite_params

ENV_PREFIX = "OPTDIV_"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
STRATEGIES = ("optimal", "constant", "scaled", "none")


class ConfigError(ValueError):
    """Malformed configuration; the message names the source and field."""


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _choice(options):
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text
    return parse


# key -> (parser, default, description)
FIELDS: dict[str, tuple] = {
    "mu": (float, 0.03, "drift"),
    "sigma": (float, 0.25, "volatility"),
    "T": (float, 1.0, "horizon"),
    "eta": (float, 1.0, "dividend proportion"),
    "kappa": (float, 1.5, "injection cost proportion"),
    "r": (float, 0.05, "discount rate"),
    "n_time": (int, 256, "boundary knots"),
    "n_t": (int, 64, "value grid times"),
    "n_x": (int, 128, "value grid levels"),
    "x_max": (float, 0.0, "top value-grid level (0: 1.5 b(0))"),
    "refinement": (float, 2.5, "exponent of the geometric knot grid"),
    "dt": (float, 1e-4, "simulation step as a fraction of T"),
    "n_paths": (int, 100_000, "simulated paths"),
    "seed": (int, 20240611, "random seed"),
    "scheme": (_choice(("bridge", "euler")), "bridge", "simulation step rule"),
    "strategy": (_choice(STRATEGIES), "optimal", "strategy to simulate"),
    "level": (float, 0.0, "constant barrier level (0: perpetual boundary)"),
    "factor": (float, 0.5, "scaled barrier factor"),
    "x0": (float, 0.0, "start level for simulate (0: b(0) / 2)"),
    "path_dump": (int, 0, "number of paths written to paths.csv"),
    "anchor": (_choice(("quadrature", "mc")), "quadrature", "value-grid anchor"),
    "variant": (_choice(VARIANTS), DEFAULT_VARIANT, "closed-form variant"),
    "quick": (_bool, False, "reduced verify profile"),
    "out": (str, "out", "output directory"),
}
# keys that do not change file contents
_UNHASHED = ("out",)


@dataclass(frozen=True)
class RunConfig:
    values: dict
    sources: dict

    def __getitem__(self, key):
        return self.values[key]

    @property
    def hash(self) -> str:
        items = {k: v for k, v in self.values.items() if k not in _UNHASHED}
        blob = json.dumps(items, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def header(self) -> dict:
        return {"config_hash": self.hash, "version": __version__}


def _parse_value(key: str, text: str, where: str):
    if key not in FIELDS:
        raise ConfigError(f"{where}: unknown field {key!r}")
    try:
        return FIELDS[key][0](text.strip())
    except ValueError as exc:
        raise ConfigError(f"{where}: field {key!r}: {exc}") from None


def parse_config_text(text: str, name: str = "<config>") -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{name}:{n}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{name}:{n}: missing field name")
        if key in out:
            raise ConfigError(f"{name}:{n}: field {key!r} given twice")
        out[key] = _parse_value(key, val, f"{name}:{n}")
    return out


def _check_ranges(v: dict) -> None:
    def need(cond, key, msg):
        if not cond:
            raise ConfigError(f"field {key!r}: {msg}")

    for k in ("mu", "sigma", "T", "eta", "kappa", "r", "dt", "x_max", "level", "factor", "x0"):
        need(math.isfinite(v[k]), k, "must be finite")
    need(v["sigma"] > 0, "sigma", "must be positive")
    need(v["T"] > 0, "T", "must be positive")
    need(v["n_time"] >= 16, "n_time", "must be at least 16")
    need(v["n_t"] >= 2, "n_t", "must be at least 2")
    need(v["n_x"] >= 2, "n_x", "must be at least 2")
    need(v["refinement"] >= 1, "refinement", "must be at least 1")
    need(0 < v["dt"] < 1, "dt", "must lie in (0, 1)")
    need(v["n_paths"] >= 2 and v["n_paths"] % 2 == 0, "n_paths", "must be even and >= 2")
    need(0 <= v["seed"] < 2**63, "seed", "must be a nonnegative 63-bit integer")
    need(v["path_dump"] >= 0, "path_dump", "must be nonnegative")
    for k in ("x_max", "level", "x0"):
        need(v[k] >= 0, k, "must be nonnegative")
    need(v["factor"] > 0, "factor", "must be positive")


def load_config(path: str | None = None, env: dict | None = None,
                overrides: dict | None = None) -> RunConfig:
    """Resolve the run configuration (defaults, file, environment, flags)."""
    values = {k: spec[1] for k, spec in FIELDS.items()}
    sources = {k: "default" for k in FIELDS}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
        for k, v in parse_config_text(text, str(path)).items():
            values[k], sources[k] = v, "file"
    env = os.environ if env is None else env
    for k in FIELDS:
        name = ENV_PREFIX + k.upper()
        if name in env:
            values[k] = _parse_value(k, env[name], f"environment {name}")
            sources[k] = "env"
    for k, text in (overrides or {}).items():
        if text is not None:
            values[k] = _parse_value(k, str(text), f"flag --{k}")
            sources[k] = "flag"
    _check_ranges(values)
    return RunConfig(values, sources)


# ---------------------------------------------------------------------------
# helpers


def _problem(cfg: RunConfig):
    params = CaseStudyParams(cfg["eta"], cfg["kappa"], cfg["r"])
    return make_case_study(params, Diffusion(cfg["mu"], cfg["sigma"]), cfg["T"])


def _boundary(cfg: RunConfig, p):
    return solve_boundary(p, TimeGrid.geometric(cfg["T"], cfg["n_time"], cfg["refinement"]))


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    return path


def _json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _header_lines(head: dict) -> str:
    return "".join(f"# {k}={v}\n" for k, v in sorted(head.items()))


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve_boundary(cfg: RunConfig, stdout=None) -> int:
    """Write ``boundary.csv`` and ``residuals.csv``."""
    stdout = stdout or sys.stdout
    p = _problem(cfg)
    b = _boundary(cfg, p)
    out = Path(cfg["out"])
    head = {**cfg.header(), "problem": p.fingerprint(), "boundary": b.fingerprint(),
            "flagged": len(b.flagged)}
    _write(out, "boundary.csv", b.to_csv(head))
    tk = b.times
    rt = np.sqrt(p.T - tk)
    mids = p.T - (0.5 * (rt[:-1] + rt[1:])) ** 2
    lines = [_header_lines(head), "t,kind,residual\n"]
    for kind, pts in (("knot", tk[:-1]), ("mid", mids)):
        for t in pts:
            lines.append(f"{t:.17g},{kind},{residual(p, b, float(t)):.17g}\n")
    _write(out, "residuals.csv", "".join(lines))
    b0 = float(b.values[0])
    msg = f"b(0) = {b0:.10g}"
    if p.case.r > 0:
        b_inf = perpetual_boundary(p.case, p.diff)
        msg += f"  b_inf = {b_inf:.10g}  relative gap = {b0 / b_inf - 1.0:.3e}"
    print(msg, file=stdout)
    return EXIT_OK


def cmd_value(cfg: RunConfig, stdout=None) -> int:
    """Write ``value_grid.csv`` and ``value_grid.json`` (plus the boundary)."""
    stdout = stdout or sys.stdout
    p = _problem(cfg)
    b = _boundary(cfg, p)
    x_max = cfg["x_max"] or None
    anchor = AnchorOptions(method=cfg["anchor"], variant=cfg["variant"], seed=cfg["seed"])
    vg = build_value_grid(p, b, cfg["n_t"], cfg["n_x"], x_max=x_max, anchor=anchor)
    ev = StoppingValue(p, b)
    inner = vg.times[:-1]
    sf = [abs(ev.row(float(t), [b(float(t))])[0] - float(p.f(t))) for t in inner]
    nm = neumann(p, b, inner, ev=ev)
    per_time = {"b": b(vg.times), "smooth_fit": np.append(sf, np.nan),
                "neumann": np.append(nm, np.nan)}
    head = {**cfg.header(), "boundary": b.fingerprint()}
    out = Path(cfg["out"])
    _write(out, "boundary.csv", b.to_csv({**head, "problem": p.fingerprint(),
                                          "flagged": len(b.flagged)}))
    _write(out, "value_grid.csv", vg.to_csv(head, per_time))
    _write(out, "value_grid.json", vg.to_json(head, per_time))
    print(f"value grid {vg.u.shape[0]}x{vg.u.shape[1]}: max smooth-fit error {max(sf):.3e}, "
          f"max Neumann error {float(np.max(np.abs(nm))):.3e}", file=stdout)
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, stdout=None) -> int:
    """Write ``simulate.json`` (and ``paths.csv`` when ``path_dump > 0``)."""
    stdout = stdout or sys.stdout
    p = _problem(cfg)
    b = _boundary(cfg, p)
    name = cfg["strategy"]
    if name == "optimal":
        s = OptimalBarrier(b)
    elif name == "scaled":
        s = ScaledBarrier(b, cfg["factor"])
    elif name == "constant":
        s = ConstantBarrier(cfg["level"] or perpetual_boundary(p.case, p.diff))
    else:
        s = NoDividends()
    x0 = cfg["x0"] or 0.5 * float(b.values[0])
    pc = PathConfig(dt=cfg["dt"] * p.T, n_paths=cfg["n_paths"], seed=cfg["seed"],
                    scheme=cfg["scheme"])
    est = estimate_J(p, s, 0.0, x0, pc)
    doc = {**cfg.header(), "boundary": b.fingerprint(), "strategy": name, "x0": x0,
           "estimate": est.as_dict()}
    out = Path(cfg["out"])
    _write(out, "simulate.json", _json(doc))
    if cfg["path_dump"] > 0:
        _write(out, "paths.csv", _header_lines(cfg.header())
               + paths_csv(p, s, 0.0, x0, pc, cfg["path_dump"]))
    print(f"J({name}; 0, {x0:.6g}) = {est.j_mean:.8g} +- {est.j_stderr:.2g}", file=stdout)
    return EXIT_OK


def suite_options(cfg: RunConfig) -> SuiteOptions:
    common = dict(seed=cfg["seed"], variant=cfg["variant"])
    if cfg["quick"]:
        return SuiteOptions.quick_profile(**common)
    return SuiteOptions(n_knots=cfg["n_time"], n_t=cfg["n_t"], n_x=cfg["n_x"],
                        n_paths=cfg["n_paths"], dt=cfg["dt"], **common)


def cmd_verify(cfg: RunConfig, stdout=None) -> int:
    """Write ``report.json`` and ``report.txt``; exit 1 if any check fails."""
    stdout = stdout or sys.stdout
    rep = run_suite_params(cfg["mu"], cfg["sigma"], cfg["T"], cfg["eta"], cfg["kappa"], cfg["r"],
                           suite_options(cfg), meta=cfg.header())
    out = Path(cfg["out"])
    _write(out, "report.json", rep.to_json())
    text = _header_lines(cfg.header()) + rep.summary()
    _write(out, "report.txt", text)
    stdout.write(rep.summary())
    return EXIT_OK if rep.ok else EXIT_FAIL


COMMANDS = {"solve-boundary": cmd_solve_boundary, "value": cmd_value,
            "simulate": cmd_simulate, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="optdiv", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=COMMANDS[name].__doc__.splitlines()[0])
        sp.add_argument("--config", metavar="PATH", help="flat key = value file")
        for key, (_, default, desc) in FIELDS.items():
            if key == "quick":
                sp.add_argument("--quick", action="store_const", const="true", default=None,
                                help="reduced path counts and widened tolerances")
            else:
                sp.add_argument(f"--{key}", default=None, metavar=key.upper(),
                                help=f"{desc} (default {default})")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in FIELDS}
    try:
        cfg = load_config(args.config, overrides=overrides)
    except ConfigError as exc:
        print(f"optdiv: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    cmd = COMMANDS[args.command]
    if cmd is not cmd_verify:
        try:
            _problem(cfg)
        except (ValidationError, ValueError) as exc:
            print(f"optdiv: invalid problem: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    try:
        return cmd(cfg)
    except SolverError as exc:
        print(f"optdiv: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
