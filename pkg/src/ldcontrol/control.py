"""Constructive boundary control by forward, backward and sideways solves.

Every pipeline follows the same pattern.  A forward solve from the initial
state and a backward solve from the target state (both with artificial
boundary data) are joined along a vertical line into an interface history
``a(t)``.  One or two sideways solves started from ``a(t)`` then produce a
solution of the mixed problem that reaches the target; the controls are the
boundary images of its traces.

Modes
-----
``two_sided``
    both boundary maps are controls; interface at the middle of the domain.
``one_sided``
    ``b1 = g1`` is prescribed at ``x = 0``; only ``g2`` is synthesized.
``two_sided_less``
    the first ``n - m`` components of ``b2`` are prescribed; ``g1`` and the
    remaining components of ``b2`` are synthesized.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import bvfun
from .bvfun import PiecewiseConstFn
from .directional import characteristic_forms, glue, oriented, solve_oriented
from .systems import DET_TOL, SystemDef, ball_samples, eigen, speed_range
from .tracker import FrontSolution, TrackerConfig, _as_pcf, evolve

MODES = ("two_sided", "one_sided", "two_sided_less")
PROJECT_TOL = 1e-13


class TimeTooShort(ValueError):
    pass


class RankCondition(ValueError):
    pass


class PhaseFailed(RuntimeError):
    """A pipeline phase raised; ``phase`` names it and ``original`` keeps the error."""

    def __init__(self, phase: str, original: BaseException):
        super().__init__(f"[{phase}] {type(original).__name__}: {original}")
        self.phase = phase
        self.original = original


# -- control times -------------------------------------------------------------------------------
@dataclass(frozen=True)
class ControlTimes:
    """Control-time thresholds of one mode.

    ``at_origin`` uses the speeds at the equilibrium; ``over_ball`` uses the
    slowest speeds over the whole admissible ball and is what the pipelines
    enforce.  ``forward`` and ``backward`` are the horizons of the two
    artificial phases.
    """

    mode: str
    L: float
    at_origin: float
    over_ball: float
    T1: float
    T2: float
    forward: float
    backward: float

    def summary(self) -> str:
        return (f"mode={self.mode} L={self.L:g} at_origin={self.at_origin:.6g} "
                f"over_ball={self.over_ball:.6g} T1={self.T1:.6g} T2={self.T2:.6g}")


def min_control_time(sys: SystemDef, mode: str, L: float = 1.0) -> ControlTimes:
    """Thresholds on the control horizon for ``mode`` on a domain of length ``L``.

    Examples
    --------
    >>> from ldcontrol.systems import gallery
    >>> min_control_time(gallery("linear2"), "one_sided").at_origin
    1.5
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    m = sys.m
    if m == 0 or m == sys.n:
        raise ValueError("control needs speeds of both signs")
    lam0 = sys._anchor.lambdas
    lo, hi = speed_range(sys)
    if hi[m - 1] >= 0 or lo[m] <= 0:
        raise ValueError("a characteristic speed vanishes inside the ball")
    neg0, pos0 = L / abs(lam0[m - 1]), L / lam0[m]
    neg, pos = L / abs(hi[m - 1]), L / lo[m]
    if mode == "two_sided":
        T1 = max(neg, pos)
        return ControlTimes(mode, L, max(neg0, pos0), T1, T1, T1, T1, T1)
    if mode == "one_sided":
        return ControlTimes(mode, L, neg0 + pos0, neg + pos, neg, pos, neg, pos)
    return ControlTimes(mode, L, neg0 + pos0, neg + pos, neg, pos, pos, neg)


def check_rank(sys: SystemDef, mode: str, samples: int = 16) -> None:
    """Raise :class:`RankCondition` unless the prescribed boundary part can be
    solved for the first ``n - m`` (one-sided) or the positive (reduced)
    families, at the origin and at sampled ball states."""
    if mode == "two_sided":
        return
    n, m = sys.n, sys.m
    mbar = n - m
    if mbar > m:
        raise RankCondition(f"{mode} needs n - m <= m, got n={n}, m={m}")
    for u in ball_samples(n, 0.9 * sys.r_ball, samples, seed=1):
        R = eigen(sys, u).right
        if mode == "one_sided":
            M = sys.jac_b1(u) @ R[:, :mbar]
            what = "Db1 on the first n-m families"
        else:
            M = sys.jac_b2(u)[:mbar] @ R[:, m:]
            what = "the prescribed rows of Db2 on the positive families"
        if abs(np.linalg.det(M)) < DET_TOL:
            raise RankCondition(f"{what} is singular at u={u.tolist()}")


# -- run description and result ---------------------------------------------------------------------------------
@dataclass
class ControlSpec:
    """Inputs of a control pipeline.

    ``ubar`` and ``u1`` are piecewise constant on ``(0, L)`` or callables
    sampled with ``mesh`` (default ``eps``); ``u1=None`` means the
    equilibrium.  ``given`` is ``g1`` (one-sided) or the prescribed part of
    ``b2`` (reduced mode) as a function on ``(0, T)``, callable or constant;
    ``None`` selects the equilibrium value.  ``g_forward`` and
    ``g_backward`` override the artificial phase data (pairs of constants or
    functions); ``force`` runs below the threshold.
    """

    mode: str
    ubar: object
    T: float
    eps: float
    u1: object = None
    L: float = 1.0
    given: object = None
    g_forward: tuple | None = None
    g_backward: tuple | None = None
    interface: float | None = None
    mesh: float | None = None
    force: bool = False
    resimulate: bool = True
    parallel: bool = True
    cfg: TrackerConfig | None = None


@dataclass
class ControlReport:
    final_l1: float
    initial_l1: float
    resim_final_l1: float | None
    given_l1: float | None
    tv_controls: float
    margin: float
    interface_tv: float
    phase_seconds: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def timing_lines(self) -> list[str]:
        return [f"phase {k} = {v:.3f} s" for k, v in self.phase_seconds.items()]

    def tolerance(self, eps: float, mesh: float, tv: float) -> float:
        return 10.0 * (eps + mesh * tv)

    def lines(self, timings: bool = True) -> list[str]:
        """``key = value`` lines; wall-clock timings are optional since they vary."""
        out = [f"final_l1 = {self.final_l1:.6e}",
               f"initial_l1 = {self.initial_l1:.6e}",
               f"resim_final_l1 = {'n/a' if self.resim_final_l1 is None else f'{self.resim_final_l1:.6e}'}",
               f"given_l1 = {'n/a' if self.given_l1 is None else f'{self.given_l1:.6e}'}",
               f"tv_controls = {self.tv_controls:.6e}",
               f"interface_tv = {self.interface_tv:.6e}",
               f"threshold_margin = {self.margin:.6g}"]
        if timings:
            out += self.timing_lines()
        out += [f"note: {s}" for s in self.notes]
        return out


@dataclass
class ControlResult:
    mode: str
    controls: dict
    certificate: FrontSolution
    phases: dict
    times: ControlTimes
    report: ControlReport
    interface: PiecewiseConstFn
    ubar: PiecewiseConstFn
    u1: PiecewiseConstFn
    T: float
    eps: float

    @property
    def g1(self) -> PiecewiseConstFn:
        return self.controls["g1"]

    @property
    def g2(self) -> PiecewiseConstFn:
        return self.controls["g2"]


# -- helpers -----------------------------------------------------------------------------------------
def _state_data(f, L: float, n: int, mesh: float, what: str) -> PiecewiseConstFn:
    if f is None:
        return PiecewiseConstFn.constant(0.0, L, np.zeros(n))
    if isinstance(f, PiecewiseConstFn):
        if abs(f.a) > 1e-12 or abs(f.b - L) > 1e-12:
            raise bvfun.DomainMismatch(f"{what} on [{f.a}, {f.b}], expected [0, {L}]")
        out = f
    elif callable(f):
        out = bvfun.sample_bv(f, mesh, (0.0, L))
    else:
        out = PiecewiseConstFn.constant(0.0, L, f)
    if out.dim != n:
        raise ValueError(f"{what} has {out.dim} components, expected {n}")
    return out


def _run(name: str, fn, *args, **kw):
    t0 = time.perf_counter()
    try:
        out = fn(*args, **kw)
    except PhaseFailed:
        raise
    except Exception as exc:
        raise PhaseFailed(name, exc) from exc
    return out, time.perf_counter() - t0


def _pair(jobs, parallel: bool):
    """Run two ``(name, fn, args, kwargs)`` jobs, concurrently if asked."""
    if not parallel:
        return [_run(nm, fn, *a, **k) for nm, fn, a, k in jobs]
    with ThreadPoolExecutor(max_workers=len(jobs)) as ex:
        futs = [ex.submit(_run, nm, fn, *a, **k) for nm, fn, a, k in jobs]
        return [f.result() for f in futs]


def _check_time(sys, spec: ControlSpec) -> ControlTimes:
    if spec.mode not in MODES:
        raise ValueError(f"unknown mode {spec.mode!r}; expected one of {MODES}")
    if not spec.T > 0 or not spec.eps > 0:
        raise ValueError("T and eps must be positive")
    times = min_control_time(sys, spec.mode, spec.L)
    if spec.T <= times.over_ball and not spec.force:
        kind = "two-sided" if spec.mode == "two_sided" else "one-sided"
        raise TimeTooShort(
            f"T={spec.T:g} does not exceed the {kind} control time {times.over_ball:.6g} "
            f"(speeds over the ball; {times.at_origin:.6g} at the equilibrium)")
    return times


def interface_history(early: PiecewiseConstFn, late: PiecewiseConstFn, T: float,
                      split: float, step: float) -> PiecewiseConstFn:
    """History on ``(0, T)`` equal to ``early`` then ``late``.

    Overlapping pieces switch at ``split``; a gap between them is bridged by
    the straight segment joining the facing end values, sampled piecewise
    constant with jumps of size at most ``step`` (its variation equals the
    end-value distance whatever the sampling).
    """
    tf, tb = early.b, late.a
    if tf >= tb:
        s = min(max(split, tb), tf)
        parts = [early.restrict(0.0, s), late.restrict(s, T)]
        parts = [p for p in parts if p.b > p.a]
        return bvfun.concat(parts)
    ua, ub = early.right_value(), late.left_value()
    k = max(1, int(math.ceil(float(np.linalg.norm(ub - ua)) / step - 1e-9)))
    theta = (np.arange(k) + 0.5) / k
    vals = ua[None, :] + theta[:, None] * (ub - ua)[None, :]
    bridge = PiecewiseConstFn(tf, tb, np.linspace(tf, tb, k + 1)[1:-1], vals)
    return bvfun.concat([early, bridge, late])


def _project_state(u, bmap, jac, target, maxit: int = 30) -> np.ndarray:
    u = np.asarray(u, dtype=float).copy()
    for _ in range(maxit):
        r = np.atleast_1d(bmap(u)) - target
        if np.linalg.norm(r) <= PROJECT_TOL:
            break
        J = np.atleast_2d(jac(u))
        u = u - J.T @ np.linalg.solve(J @ J.T, r)
    return u


def project_history(a: PiecewiseConstFn, bmap, jac, g: PiecewiseConstFn) -> PiecewiseConstFn:
    """Minimal-norm correction of ``a`` onto ``bmap(a(t)) = g(t)``."""
    def op(av, gv):
        return np.array([_project_state(u, bmap, jac, t) for u, t in zip(av, gv)])

    return bvfun.combine(a, g, op, check_dim=False)


def _artificial(pair, idx: int, default):
    if pair is None or pair[idx] is None:
        return default
    return pair[idx]


def _restrict_data(g, lo: float, hi: float):
    return g.restrict(lo, hi) if isinstance(g, PiecewiseConstFn) else g


def _controls_tv(controls: dict) -> float:
    keys = [k for k in ("g1", "g2") if k in controls]
    return float(sum(controls[k].tv() for k in keys))


def _finish(sys, spec, times, mesh, ubar, u1, cert, phases, secs, controls, a,
            given_l1) -> ControlResult:
    final = bvfun.l1_dist(cert.trace("final"), u1)
    init = bvfun.l1_dist(cert.trace("initial"), ubar)
    resim = None
    if spec.resimulate:
        (sol, dt) = _run("resimulate", evolve, sys, ubar, controls["g1"], controls["g2"],
                         spec.T, spec.eps, spec.cfg)
        secs["resimulate"] = dt
        phases["resimulate"] = sol
        resim = bvfun.l1_dist(sol.trace("final"), u1)
    notes = []
    if spec.T <= times.at_origin:
        notes.append(f"forced run below the equilibrium control time {times.at_origin:.6g}")
    elif spec.T <= times.over_ball:
        notes.append(f"forced run between the equilibrium control time {times.at_origin:.6g} "
                     f"and the ball control time {times.over_ball:.6g}")
    rep = ControlReport(final, init, resim, given_l1, _controls_tv(controls),
                        spec.T - times.over_ball, a.tv(), secs, notes)
    return ControlResult(spec.mode, controls, cert, phases, times, rep, a, ubar, u1, spec.T,
                         spec.eps)


# -- pipelines -----------------------------------------------------------------------------------------
def control_two_sided(sys: SystemDef, spec: ControlSpec) -> ControlResult:
    """Controls at both ends steering ``ubar`` to ``u1`` in time ``T``."""
    times = _check_time(sys, spec)
    n, m, L, T = sys.n, sys.m, spec.L, spec.T
    mesh = spec.mesh or spec.eps
    cfg = spec.cfg
    ubar = _state_data(spec.ubar, L, n, mesh, "initial state")
    u1 = _state_data(spec.u1, L, n, mesh, "target state")
    xm = L / 2 if spec.interface is None else float(spec.interface)
    if not 0 < xm < L:
        raise ValueError(f"interface {xm} outside (0, {L})")
    hf, hb = min(times.forward, T), min(times.backward, T)
    zero = np.zeros(n)
    gf1 = _artificial(spec.g_forward, 0, sys.b1(zero))
    gf2 = _artificial(spec.g_forward, 1, sys.b2(zero))
    pb = oriented(sys, "backward")
    gb1 = _artificial(spec.g_backward, 0, np.zeros(m))
    gb2 = _artificial(spec.g_backward, 1, np.zeros(n - m))
    (uf, tf), (ub, tb) = _pair([
        ("forward", evolve, (sys, ubar, gf1, gf2, hf, spec.eps, cfg), {}),
        ("backward", solve_oriented, (pb, u1, gb1, gb2, hb, spec.eps, cfg), {"at": T}),
    ], spec.parallel)
    secs = {"forward": tf, "backward": tb}
    split = T * times.forward / (times.forward + times.backward)
    a = interface_history(uf.column(xm, -1), ub.column(xm, -1), T, split, spec.eps)
    pl, pr = oriented(sys, "leftward"), oriented(sys, "rightward")
    el, er = pl.effective, pr.effective
    (ul, tl), (ur, tr) = _pair([
        ("leftward", solve_oriented,
         (pl, a, ubar.restrict(0.0, xm).map(el.b1), u1.restrict(0.0, xm).map(el.b2), xm,
          spec.eps, cfg), {"at": xm}),
        ("rightward", solve_oriented,
         (pr, a, ubar.restrict(xm, L).map(er.b1), u1.restrict(xm, L).map(er.b2), L - xm,
          spec.eps, cfg), {"at": xm}),
    ], spec.parallel)
    secs["leftward"], secs["rightward"] = tl, tr
    cert, secs["glue"] = _run("glue", glue, ul, ur)
    controls = {"g1": cert.trace("left").map(sys.b1), "g2": cert.trace("right").map(sys.b2)}
    phases = {"forward": uf, "backward": ub, "leftward": ul, "rightward": ur}
    return _finish(sys, spec, times, mesh, ubar, u1, cert, phases, secs, controls, a, None)


def control_one_sided(sys: SystemDef, spec: ControlSpec) -> ControlResult:
    """Control ``g2`` at ``x = L`` for prescribed ``b1 = g1`` at ``x = 0``."""
    times = _check_time(sys, spec)
    check_rank(sys, "one_sided")
    n, m, L, T = sys.n, sys.m, spec.L, spec.T
    mbar = n - m
    mesh = spec.mesh or spec.eps
    cfg = spec.cfg
    ubar = _state_data(spec.ubar, L, n, mesh, "initial state")
    u1 = _state_data(spec.u1, L, n, mesh, "target state")
    zero = np.zeros(n)
    g1 = _as_pcf(sys.b1(zero) if spec.given is None else spec.given, 0.0, T, mbar, mesh)
    hf, hb = min(times.forward, T), min(times.backward, T)
    gf2 = _artificial(spec.g_forward, 1, sys.b2(zero))
    # backward phase: b1 plus characteristic forms of the remaining negative families
    extra = characteristic_forms(sys, range(mbar, m))
    b_low = lambda u: np.concatenate([np.atleast_1d(sys.b1(u)), np.atleast_1d(extra(u))])
    pb = oriented(sys, "backward", b_low=b_low)
    pad = np.asarray(_artificial(spec.g_backward, 0, np.zeros(m - mbar)), dtype=float)
    gb_low = g1.restrict(T - hb, T).map(lambda v: np.concatenate([v, pad]))
    gb2 = _artificial(spec.g_backward, 1, np.zeros(n - m))
    (uf, tf), (ub, tb) = _pair([
        ("forward", evolve, (sys, ubar, g1.restrict(0.0, hf), gf2, hf, spec.eps, cfg), {}),
        ("backward", solve_oriented, (pb, u1, gb_low, gb2, hb, spec.eps, cfg), {"at": T}),
    ], spec.parallel)
    secs = {"forward": tf, "backward": tb}
    split = T * times.forward / (times.forward + times.backward)
    a = interface_history(uf.trace("left"), ub.trace("left"), T, split, spec.eps)
    a = project_history(a, sys.b1, sys.jac_b1, g1)
    pr = oriented(sys, "rightward")
    e = pr.effective
    cert, secs["rightward"] = _run("rightward", solve_oriented, pr, a, ubar.map(e.b1),
                                   u1.map(e.b2), L, spec.eps, cfg, at=0.0)
    controls = {"g1": g1, "g2": cert.trace("right").map(sys.b2)}
    given_l1 = bvfun.l1_dist(cert.trace("left").map(sys.b1), g1)
    phases = {"forward": uf, "backward": ub, "rightward": cert}
    return _finish(sys, spec, times, mesh, ubar, u1, cert, phases, secs, controls, a, given_l1)


def control_two_sided_less(sys: SystemDef, spec: ControlSpec) -> ControlResult:
    """Controls ``g1`` and the last ``2m - n`` components of ``g2`` for a
    prescribed first part of ``b2`` at ``x = L``."""
    times = _check_time(sys, spec)
    check_rank(sys, "two_sided_less")
    n, m, L, T = sys.n, sys.m, spec.L, spec.T
    mbar = n - m
    mesh = spec.mesh or spec.eps
    cfg = spec.cfg
    ubar = _state_data(spec.ubar, L, n, mesh, "initial state")
    u1 = _state_data(spec.u1, L, n, mesh, "target state")
    zero = np.zeros(n)
    b2z = np.atleast_1d(sys.b2(zero))
    gt = _as_pcf(b2z[:mbar] if spec.given is None else spec.given, 0.0, T, mbar, mesh)
    hf, hb = min(times.forward, T), min(times.backward, T)
    gf1 = _artificial(spec.g_forward, 0, sys.b1(zero))
    hat = np.asarray(_artificial(spec.g_forward, 1, b2z[mbar:]), dtype=float)
    gf2 = gt.restrict(0.0, hf).map(lambda v: np.concatenate([v, hat]))
    btilde = lambda u: np.atleast_1d(sys.b2(u))[:mbar]
    jtilde = lambda u: sys.jac_b2(u)[:mbar]
    pb = oriented(sys, "backward", b_high=btilde)
    gb1 = _artificial(spec.g_backward, 0, np.zeros(m))
    (uf, tf), (ub, tb) = _pair([
        ("forward", evolve, (sys, ubar, gf1, gf2, hf, spec.eps, cfg), {}),
        ("backward", solve_oriented, (pb, u1, gb1, gt.restrict(T - hb, T), hb, spec.eps, cfg),
         {"at": T}),
    ], spec.parallel)
    secs = {"forward": tf, "backward": tb}
    split = T * times.forward / (times.forward + times.backward)
    a = interface_history(uf.trace("right"), ub.trace("right"), T, split, spec.eps)
    a = project_history(a, btilde, jtilde, gt)
    pl = oriented(sys, "leftward")
    e = pl.effective
    cert, secs["leftward"] = _run("leftward", solve_oriented, pl, a, ubar.map(e.b1),
                                  u1.map(e.b2), L, spec.eps, cfg, at=L)
    g2 = cert.trace("right").map(sys.b2)
    controls = {"g1": cert.trace("left").map(sys.b1), "g2_hat": g2.map(lambda v: v[mbar:]),
                "g2": g2}
    given_l1 = bvfun.l1_dist(g2.map(lambda v: v[:mbar]), gt)
    phases = {"forward": uf, "backward": ub, "leftward": cert}
    return _finish(sys, spec, times, mesh, ubar, u1, cert, phases, secs, controls, a, given_l1)


PIPELINES = {"two_sided": control_two_sided, "one_sided": control_one_sided,
             "two_sided_less": control_two_sided_less}


def run_control(sys: SystemDef, spec: ControlSpec) -> ControlResult:
    """Dispatch on ``spec.mode``."""
    if spec.mode not in PIPELINES:
        raise ValueError(f"unknown mode {spec.mode!r}; expected one of {MODES}")
    return PIPELINES[spec.mode](sys, spec)


def resimulate(sys: SystemDef, result: ControlResult, eps: float | None = None,
               cfg: TrackerConfig | None = None) -> FrontSolution:
    """Forward solve from the initial state with the synthesized controls."""
    return evolve(sys, result.ubar, result.controls["g1"], result.controls["g2"], result.T,
                  eps or result.eps, cfg)
