"""Command line front end: scenario files, batch runs and artifact emission.

Scenarios are TOML files.  Top-level keys select the system, the run mode
and the output directory; the ``[numerics]``, ``[data]`` and ``[verify]``
tables hold the numeric knobs, the data and the reference-solution options.
Unknown keys are rejected.  Command line flags override file values; the
``LDCONTROL_OUTPUT`` environment variable overrides the output directory.

Exit codes: 0 all checks passed, 2 a check failed or the horizon is too
short, 3 configuration error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import re
import sys as _sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli

from . import __version__, bvfun
from .bvfun import PiecewiseConstFn
from .control import (MODES, ControlSpec, PhaseFailed, RankCondition, TimeTooShort,
                      min_control_time, run_control)
from .systems import GALLERY, SystemDef, UnknownSystem, gallery, validate
from .tracker import (BallEscape, BudgetExceeded, EpsilonBudgetBlown, EventOverflow,
                      OutOfDomain, TrackerConfig, compliance, evolve, fronts_to_csv)

log = logging.getLogger("ldcontrol")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3, 4
RUN_MODES = ("simulate", "verify") + tuple(f"control:{m}" for m in MODES)
OUTPUT_ENV = "LDCONTROL_OUTPUT"

TOP_KEYS = {"system", "system_params", "mode", "seed", "output", "svg", "figures",
            "numerics", "data", "verify"}
NUMERIC_KEYS = {"eps", "mesh", "T", "L", "gen_cap", "rho_simp", "lambda_hat", "max_events",
                "force", "interface", "parallel", "resimulate", "final_tol"}
DATA_KEYS = {"ubar", "u1", "g1", "g2", "given"}
VERIFY_KEYS = {"oracle", "slices", "cells", "oracle_tol"}
DATA_FORMS = ({"value"}, {"breaks", "values"}, {"csv"}, {"jumps", "amplitude"})
ORACLES = ("auto", "exact", "fv", "none")


class ConfigError(ValueError):
    """Invalid scenario; ``line`` is 1-based when the offending key was located."""

    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line else msg)


# -- scenario ----------------------------------------------------------------------------------------
@dataclass
class Scenario:
    """Fully resolved run description."""

    system: str = "linear2"
    system_params: dict = field(default_factory=dict)
    mode: str = "simulate"
    seed: int = 0
    output: str = "out"
    svg: bool = False
    figures: bool = True
    eps: float = 1e-3
    mesh: float | None = None
    T: float = 1.0
    L: float = 1.0
    gen_cap: int = 3
    rho_simp: float = 1.0
    lambda_hat: float | None = None
    max_events: int = 10**6
    force: bool = False
    interface: float | None = None
    parallel: bool = True
    resimulate: bool = True
    final_tol: float | None = None
    data: dict = field(default_factory=dict)
    oracle: str = "auto"
    slices: int = 20
    cells: int = 4096
    oracle_tol: float | None = None
    source: str = ""

    @property
    def control_mode(self) -> str | None:
        return self.mode.split(":", 1)[1] if self.mode.startswith("control:") else None

    def tracker_config(self) -> TrackerConfig:
        return TrackerConfig(gen_cap=self.gen_cap, rho_simp=self.rho_simp,
                             lambda_hat=self.lambda_hat, max_events=self.max_events,
                             data_mesh=self.mesh)

    def resolved(self) -> list[str]:
        """``key = value`` lines of every knob, in a fixed order."""
        keys = ["system", "system_params", "mode", "seed", "output", "svg", "figures", "eps",
                "mesh", "T", "L", "gen_cap", "rho_simp", "lambda_hat", "max_events", "force",
                "interface", "parallel", "resimulate", "final_tol", "oracle", "slices", "cells",
                "oracle_tol"]
        out = [f"{k} = {getattr(self, k)!r}" for k in keys]
        out += [f"data.{k} = {self.data[k]!r}" for k in sorted(self.data)]
        return out


def _locate(text: str, key: str) -> int | None:
    pat = re.compile(rf"^\s*(\[+\s*)?{re.escape(key)}\s*(=|\])")
    for i, line in enumerate(text.splitlines(), 1):
        if pat.match(line):
            return i
    return None


def _check_keys(table: dict, allowed: set, where: str, text: str) -> None:
    for k in table:
        if k not in allowed:
            raise ConfigError(f"unknown key {k!r} in {where}; allowed: {sorted(allowed)}",
                              _locate(text, k))


def _number(v, name: str, lo: float = 0.0, hi: float = math.inf, integer: bool = False,
            strict: bool = True):
    ok_type = isinstance(v, int) if integer else isinstance(v, (int, float))
    if isinstance(v, bool) or not ok_type:
        raise ConfigError(f"{name} must be {'an integer' if integer else 'a number'}, got {v!r}")
    if not (lo < v if strict else lo <= v) or not v <= hi:
        raise ConfigError(f"{name}={v!r} outside {'(' if strict else '['}{lo}, {hi}]")
    return v


def _flag(v, name: str) -> bool:
    if not isinstance(v, bool):
        raise ConfigError(f"{name} must be true or false, got {v!r}")
    return v


def scenario_from_dict(raw: dict, text: str = "", source: str = "") -> Scenario:
    """Validate a parsed scenario table and fill in defaults."""
    _check_keys(raw, TOP_KEYS, "the top level", text)
    num = raw.get("numerics", {})
    data = raw.get("data", {})
    ver = raw.get("verify", {})
    for name, tab, allowed in (("numerics", num, NUMERIC_KEYS), ("data", data, DATA_KEYS),
                               ("verify", ver, VERIFY_KEYS)):
        if not isinstance(tab, dict):
            raise ConfigError(f"[{name}] must be a table", _locate(text, name))
        _check_keys(tab, allowed, f"[{name}]", text)
    sc = Scenario(source=source)
    sc.system = str(raw.get("system", sc.system))
    if sc.system not in GALLERY:
        raise ConfigError(f"unknown system {sc.system!r}; gallery: {', '.join(GALLERY)}",
                          _locate(text, "system"))
    sc.system_params = dict(raw.get("system_params", {}))
    sc.mode = str(raw.get("mode", sc.mode))
    if sc.mode not in RUN_MODES:
        raise ConfigError(f"mode must be one of {RUN_MODES}, got {sc.mode!r}",
                          _locate(text, "mode"))
    sc.seed = _number(raw.get("seed", 0), "seed", 0, strict=False, integer=True)
    sc.output = os.environ.get(OUTPUT_ENV) or str(raw.get("output", sc.output))
    sc.svg = _flag(raw.get("svg", sc.svg), "svg")
    sc.figures = _flag(raw.get("figures", sc.figures), "figures")
    sc.eps = _number(num.get("eps", sc.eps), "eps", 0.0, 0.5)
    if num.get("mesh") is not None:
        sc.mesh = _number(num["mesh"], "mesh", 0.0, 1.0)
    sc.T = _number(num.get("T", sc.T), "T", 0.0, 1e3)
    sc.L = _number(num.get("L", sc.L), "L", 0.0, 1e3)
    sc.gen_cap = _number(num.get("gen_cap", sc.gen_cap), "gen_cap", 0, 100, integer=True,
                         strict=False)
    sc.rho_simp = _number(num.get("rho_simp", sc.rho_simp), "rho_simp", 0.0)
    if num.get("lambda_hat") is not None:
        sc.lambda_hat = _number(num["lambda_hat"], "lambda_hat", 0.0)
    sc.max_events = _number(num.get("max_events", sc.max_events), "max_events", 0,
                            integer=True)
    for k in ("force", "parallel", "resimulate"):
        setattr(sc, k, _flag(num.get(k, getattr(sc, k)), k))
    if num.get("interface") is not None:
        sc.interface = _number(num["interface"], "interface", 0.0, sc.L, strict=False)
    if num.get("final_tol") is not None:
        sc.final_tol = _number(num["final_tol"], "final_tol", 0.0)
    for k, v in data.items():
        _check_data(k, v, text)
    sc.data = dict(data)
    sc.oracle = str(ver.get("oracle", sc.oracle))
    if sc.oracle not in ORACLES:
        raise ConfigError(f"oracle must be one of {ORACLES}", _locate(text, "oracle"))
    sc.slices = _number(ver.get("slices", sc.slices), "slices", 1, 10**4, integer=True)
    sc.cells = _number(ver.get("cells", sc.cells), "cells", 15, 10**6, integer=True)
    if ver.get("oracle_tol") is not None:
        sc.oracle_tol = _number(ver["oracle_tol"], "oracle_tol", 0.0)
    return sc


def _check_data(name: str, v, text: str) -> None:
    if isinstance(v, (int, float, list)) and not isinstance(v, bool):
        return
    if isinstance(v, dict) and set(v) in DATA_FORMS:
        return
    forms = ", ".join("{" + ", ".join(sorted(f)) + "}" for f in DATA_FORMS)
    raise ConfigError(f"data.{name} must be a number, a list or one of the tables {forms}",
                      _locate(text, name))


def load_scenario(path, overrides: dict | None = None) -> Scenario:
    """Parse a TOML scenario file; ``overrides`` use the same nested layout."""
    text = ""
    raw: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read scenario {path}: {exc.strerror}") from exc
        try:
            raw = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    for k, v in (overrides or {}).items():
        if isinstance(v, dict):
            raw.setdefault(k, {}).update(v)
        else:
            raw[k] = v
    return scenario_from_dict(raw, text, str(path or ""))


# -- data ----------------------------------------------------------------------------------------------
def build_data(spec, a: float, b: float, dim: int, rng: np.random.Generator,
               name: str, base: Path | None = None) -> PiecewiseConstFn:
    """Piecewise constant function on ``[a, b]`` from a scenario data entry.

    Accepted forms: a number or list (constant), ``{breaks, values}``,
    ``{csv}`` (a file in the piecewise-constant CSV format) and
    ``{jumps, amplitude}`` (random cells drawn from ``rng``).
    """
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        spec = [float(spec)] * dim
    if isinstance(spec, list):
        return PiecewiseConstFn.constant(a, b, _vector(spec, dim, name))
    if "value" in spec:
        return PiecewiseConstFn.constant(a, b, _vector(spec["value"], dim, name))
    if "csv" in spec:
        p = Path(spec["csv"])
        if base is not None and not p.is_absolute():
            p = base / p
        try:
            f = bvfun.from_csv(p)
        except OSError as exc:
            raise ConfigError(f"data.{name}: cannot read {p}") from exc
        if f.dim != dim or abs(f.a - a) > 1e-12 or abs(f.b - b) > 1e-12:
            raise ConfigError(f"data.{name}: expected {dim} components on [{a}, {b}]")
        return f
    if "breaks" in spec:
        vals = np.asarray(spec["values"], dtype=float)
        if vals.ndim != 2 or vals.shape[1] != dim:
            raise ConfigError(f"data.{name}: values must be rows of {dim} numbers")
        try:
            return PiecewiseConstFn(a, b, spec["breaks"], vals)
        except ValueError as exc:
            raise ConfigError(f"data.{name}: {exc}") from exc
    jumps = _number(spec["jumps"], f"data.{name}.jumps", 0, 10**5, integer=True, strict=False)
    amp = _number(spec["amplitude"], f"data.{name}.amplitude", 0.0, 1.0, strict=False)
    breaks = np.sort(rng.uniform(a, b, jumps))
    vals = rng.uniform(-amp, amp, (jumps + 1, dim))
    return PiecewiseConstFn.from_cells(a, b, breaks, vals)


def _vector(v, dim: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.shape != (dim,):
        raise ConfigError(f"data.{name}: expected {dim} components, got {arr.size}")
    return arr


# -- run -------------------------------------------------------------------------------------------------
@dataclass
class RunOutcome:
    status: int
    checks: dict
    report: list[str]
    files: list[Path]
    timings: list[str] = field(default_factory=list)


def thresholds(sysd: SystemDef, L: float) -> list[str]:
    """Control-time lines for every mode the system admits."""
    out = []
    for mode in MODES:
        try:
            ct = min_control_time(sysd, mode, L)
        except ValueError as exc:
            out.append(f"threshold.{mode} = n/a ({exc})")
            continue
        out.append(f"threshold.{mode}.at_origin = {ct.at_origin:.12g}")
        out.append(f"threshold.{mode}.over_ball = {ct.over_ball:.12g}")
    return out


def _write(path: Path, lines: list[str]) -> Path:
    path.write_text("\n".join(lines) + "\n")
    return path


def _manifest(sc: Scenario, sysd: SystemDef, outdir: Path, extra: list[str]) -> Path:
    lines = [f"package = ldcontrol {__version__}", f"scenario = {sc.source or '<flags>'}"]
    lines += sc.resolved()
    lines += thresholds(sysd, sc.L)
    lines += extra
    return _write(outdir / "manifest.txt", lines)


def _formats(sc: Scenario) -> tuple[str, ...]:
    return ("png", "svg") if sc.svg else ("png",)


def _simulate_data(sc: Scenario, sysd: SystemDef, rng, base):
    n, m = sysd.n, sysd.m
    ubar = build_data(sc.data.get("ubar", 0.0), 0.0, sc.L, n, rng, "ubar", base)
    g1 = sc.data.get("g1")
    g2 = sc.data.get("g2")
    g1 = (PiecewiseConstFn.constant(0.0, sc.T, sysd.b1(ubar.left_value())) if g1 is None
          else build_data(g1, 0.0, sc.T, n - m, rng, "g1", base))
    g2 = (PiecewiseConstFn.constant(0.0, sc.T, sysd.b2(ubar.right_value())) if g2 is None
          else build_data(g2, 0.0, sc.T, m, rng, "g2", base))
    return ubar, g1, g2


def _forward_run(sc, sysd, rng, base, outdir, files):
    ubar, g1, g2 = _simulate_data(sc, sysd, rng, base)
    sol = evolve(sysd, ubar, g1, g2, sc.T, sc.eps, sc.tracker_config())
    files.append(outdir / "fronts.csv")
    fronts_to_csv(sol, files[-1])
    final = sol.trace("final")
    files.append(outdir / "final.csv")
    bvfun.to_csv(final, files[-1], header_extra=f"u(T, x) at T={sc.T!r}")
    comp = compliance(sol, ubar, g1, g2)
    return sol, (ubar, g1, g2), comp


def run_simulate(sc: Scenario, sysd: SystemDef, outdir: Path) -> RunOutcome:
    from . import figures

    rng = np.random.default_rng(sc.seed)
    base = Path(sc.source).parent if sc.source else None
    files: list[Path] = []
    sol, (ubar, _, _), comp = _forward_run(sc, sysd, rng, base, outdir, files)
    checks = {"compliance": comp.ok}
    report = [f"segments = {len(sol.segments)}", f"events = {len(sol.events)}",
              f"fronts_at_T = {len(sol.fronts_at(sc.T))}", comp.summary()]
    if sc.figures:
        files += figures.front_diagram(sol, outdir / "diagram", _formats(sc))
        files += figures.pcf_plot({"u(0, x)": ubar, "u(T, x)": sol.trace("final")},
                                  outdir / "profiles", _formats(sc))
    return RunOutcome(EXIT_OK, checks, report, files)


def run_verify(sc: Scenario, sysd: SystemDef, outdir: Path) -> RunOutcome:
    from . import figures, verify

    rng = np.random.default_rng(sc.seed)
    base = Path(sc.source).parent if sc.source else None
    files: list[Path] = []
    sol, data, comp = _forward_run(sc, sysd, rng, base, outdir, files)
    rep = verify.residual_report(sol, *data, slices=sc.slices)
    wr = verify.weak_residual(sol)
    cl = verify.trace_clauses(sol, *data)
    checks = {"compliance": comp.ok, "weak_residual": wr.ok, "traces": cl.ok}
    report = [comp.summary(), *rep.to_text().splitlines()]
    norm = rep.normalization * sc.T
    if rep.entropy_residual is not None:
        checks["entropy_residual"] = rep.entropy_residual <= 1e-2 * norm
    oracle = sc.oracle
    if oracle == "auto":
        oracle = "exact" if sysd.linear is not None else "none"
    if oracle != "none":
        times = sc.T * np.arange(1, 11) / 10
        orc = verify.oracle_compare(sol, oracle, times, *data, cells=sc.cells)
        tv = max(f.tv() for f in data)
        mesh = sc.mesh or sc.eps
        tol = sc.oracle_tol if sc.oracle_tol is not None else (
            sc.eps + 2.0 * mesh * tv if oracle == "exact" else None)
        report.append(f"oracle = {oracle}")
        report += [f"oracle_l1[t={t:.6g}] = {e:.6e}" for t, e in zip(orc.times, orc.errors)]
        if tol is not None:
            report.append(f"oracle_tol = {tol:.6e}")
            checks["oracle"] = orc.max <= tol
    files.append(outdir / "profiles.csv")
    rep.to_csv(files[-1])
    if sc.figures:
        files += figures.front_diagram(sol, outdir / "diagram", _formats(sc))
        files += figures.profile_plot(rep.times, {"TV(u(t))": rep.tv_profile,
                                                  "L1 increment rate": rep.lipschitz_profile},
                                      outdir / "profiles", _formats(sc))
    return RunOutcome(EXIT_OK, checks, report, files)


def run_control_scenario(sc: Scenario, sysd: SystemDef, outdir: Path) -> RunOutcome:
    from . import figures

    rng = np.random.default_rng(sc.seed)
    base = Path(sc.source).parent if sc.source else None
    mode = sc.control_mode
    n, m = sysd.n, sysd.m
    ubar = build_data(sc.data.get("ubar", 0.0), 0.0, sc.L, n, rng, "ubar", base)
    u1 = build_data(sc.data.get("u1", 0.0), 0.0, sc.L, n, rng, "u1", base)
    given = None
    if "given" in sc.data:
        given = build_data(sc.data["given"], 0.0, sc.T, n - m, rng, "given", base)
    spec = ControlSpec(mode, ubar, sc.T, sc.eps, u1=u1, L=sc.L, given=given,
                       interface=sc.interface, mesh=sc.mesh, force=sc.force,
                       resimulate=sc.resimulate, parallel=sc.parallel,
                       cfg=sc.tracker_config())
    res = run_control(sysd, spec)
    rep = res.report
    files: list[Path] = []
    files.append(outdir / "fronts.csv")
    fronts_to_csv(res.certificate, files[-1])
    for name in sorted(res.controls):
        files.append(outdir / f"controls_{name}.csv")
        bvfun.to_csv(res.controls[name], files[-1], header_extra=f"control {name} on [0, T]")
    files.append(outdir / "interface.csv")
    bvfun.to_csv(res.interface, files[-1], header_extra="interface history a(t)")
    mesh = sc.mesh or sc.eps
    tol = sc.final_tol if sc.final_tol is not None else rep.tolerance(
        sc.eps, mesh, ubar.tv() + u1.tv())
    final = rep.resim_final_l1 if rep.resim_final_l1 is not None else rep.final_l1
    checks = {"final_state": final <= tol}
    if rep.given_l1 is not None:
        checks["given_data"] = rep.given_l1 <= sc.eps
    report = [res.times.summary(), f"final_tol = {tol:.6e}", *rep.lines(timings=False)]
    if sc.figures:
        sol = res.phases.get("resimulate", res.certificate)
        files += figures.front_diagram(sol, outdir / "diagram", _formats(sc))
        files += figures.pcf_plot({k: v for k, v in sorted(res.controls.items())
                                   if k in ("g1", "g2")}, outdir / "controls", _formats(sc),
                                  xlabel="t", title="boundary controls")
        files += figures.pcf_plot({"u(T, x)": sol.trace("final"), "target": u1},
                                  outdir / "final", _formats(sc), title="final state")
    return RunOutcome(EXIT_OK, checks, report, files, rep.timing_lines())


RUNNERS = {"simulate": run_simulate, "verify": run_verify}


def run(sc: Scenario) -> RunOutcome:
    """Execute a scenario, write all artifacts and return the outcome.

    The manifest and ``report.txt`` are written even when the run fails.
    """
    outdir = Path(sc.output)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        sysd = gallery(sc.system, **sc.system_params)
    except (UnknownSystem, TypeError) as exc:
        raise ConfigError(f"cannot build system {sc.system!r}: {exc}") from exc
    extra = []
    cm = sc.control_mode
    if cm is not None:
        ct = min_control_time(sysd, cm, sc.L)
        extra.append(f"chosen_T = {sc.T!r}")
        if ct.at_origin < sc.T <= ct.over_ball:
            msg = (f"T={sc.T:g} exceeds the equilibrium control time {ct.at_origin:.6g} "
                   f"but not the ball control time {ct.over_ball:.6g}")
            log.warning(msg)
            extra.append(f"warning = {msg}")
    files = [_manifest(sc, sysd, outdir, extra)]
    runner = RUNNERS.get(sc.mode, run_control_scenario)
    try:
        out = runner(sc, sysd, outdir)
    except (TimeTooShort, RankCondition) as exc:
        lines = ["status = refused", f"reason = {exc}"]
        files.append(_write(outdir / "report.txt", lines))
        return RunOutcome(EXIT_CHECK, {"admissible": False}, lines, files)
    except (PhaseFailed, ArithmeticError, BudgetExceeded, EventOverflow, OutOfDomain,
            EpsilonBudgetBlown, BallEscape) as exc:
        lines = ["status = numerical failure", f"reason = {type(exc).__name__}: {exc}"]
        files.append(_write(outdir / "report.txt", lines))
        return RunOutcome(EXIT_NUMERIC, {}, lines, files)
    status = EXIT_OK if all(out.checks.values()) else EXIT_CHECK
    lines = [f"status = {'ok' if status == EXIT_OK else 'check failed'}"]
    lines += [f"check.{k} = {'pass' if v else 'FAIL'}" for k, v in out.checks.items()]
    lines += out.report
    out.files.insert(0, _write(outdir / "report.txt", lines))
    if out.timings:
        # wall-clock figures go to the manifest so report.txt stays reproducible
        with open(files[0], "a") as fh:
            fh.write("\n".join(out.timings) + "\n")
    out.files = files + out.files
    out.status, out.report = status, lines
    return out


# -- argument parsing ------------------------------------------------------------------------------------
def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("config", nargs="?", help="TOML scenario file")
    p.add_argument("--system", help="gallery system name")
    p.add_argument("--out", dest="output", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--eps", type=float, help="front tracking accuracy")
    p.add_argument("--mesh", type=float, help="data sampling width (default eps)")
    p.add_argument("--T", type=float, help="time horizon")
    p.add_argument("--L", type=float, help="domain length")
    p.add_argument("--gen-cap", dest="gen_cap", type=int)
    p.add_argument("--svg", action="store_true", default=None, help="also write SVG figures")
    p.add_argument("--no-figures", dest="figures", action="store_false", default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ldcontrol", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"ldcontrol {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    g = sub.add_parser("gallery", help="list or describe gallery systems")
    g.add_argument("action", choices=("list", "show"))
    g.add_argument("name", nargs="?")
    g.add_argument("--samples", type=int, default=200)
    s = sub.add_parser("simulate", help="forward front tracking run")
    _add_common(s)
    c = sub.add_parser("control", help="synthesize boundary controls")
    _add_common(c)
    c.add_argument("--mode", choices=MODES)
    c.add_argument("--force", action="store_true", default=None,
                   help="run even when T does not exceed the control time")
    v = sub.add_parser("verify", help="forward run plus residual and reference checks")
    _add_common(v)
    v.add_argument("--oracle", choices=ORACLES)
    v.add_argument("--slices", type=int)
    return ap


def _overrides(args: argparse.Namespace) -> dict:
    top, num, ver = {}, {}, {}
    for k in ("system", "output", "seed", "svg", "figures"):
        if getattr(args, k, None) is not None:
            top[k] = getattr(args, k)
    for k in ("eps", "mesh", "T", "L", "gen_cap", "force"):
        if getattr(args, k, None) is not None:
            num[k] = getattr(args, k)
    for k in ("oracle", "slices"):
        if getattr(args, k, None) is not None:
            ver[k] = getattr(args, k)
    if args.command == "control":
        if args.mode is not None:
            top["mode"] = f"control:{args.mode}"
    else:
        top["mode"] = args.command
    out = dict(top)
    if num:
        out["numerics"] = num
    if ver:
        out["verify"] = ver
    return out


def _gallery(args) -> int:
    if args.action == "list":
        for name in GALLERY:
            s = gallery(name)
            print(f"{name}: n={s.n} negative={s.m} r_ball={s.r_ball:g}")
        return EXIT_OK
    if not args.name:
        print("gallery show needs a system name", file=_sys.stderr)
        return EXIT_CONFIG
    try:
        s = gallery(args.name)
    except UnknownSystem:
        print(f"unknown system {args.name!r}", file=_sys.stderr)
        return EXIT_CONFIG
    rep = validate(s, samples=args.samples, raise_on_failure=False)
    print(f"system = {s.name}\nn = {s.n}\nnegative = {s.m}\nmultiplicity = {s.mult}")
    print(f"r_ball = {s.r_ball:g}")
    print(rep.summary())
    print(f"lambda_hat = {rep.lambda_hat:.6g}")
    for line in thresholds(s, 1.0):
        print(line)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "gallery":
        return _gallery(args)
    try:
        sc = load_scenario(args.config, _overrides(args))
        if args.command == "control" and sc.control_mode is None:
            raise ConfigError("control needs --mode or mode = 'control:<name>' in the scenario")
        out = run(sc)
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    for line in out.report:
        print(line)
    return out.status


if __name__ == "__main__":
    raise SystemExit(main())
