"""Independent checks of front tracking solutions.

* weak and entropy residuals against a fixed basis of C1 bumps, evaluated
  exactly as line integrals along the fronts;
* the initial and boundary clauses, re-measured as one-sided limits from the
  interior;
* comparisons with reference solutions: exact characteristics for linear
  systems and a fine first-order finite-volume scheme for any system.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import bvfun
from .bvfun import PiecewiseConstFn
from .systems import SystemDef, speed_range
from .tracker import FrontSolution

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(6)
INTERIOR_OFFSET = 1e-9


class SupportViolation(ValueError):
    pass


class NoEntropyPair(ValueError):
    pass


class NoOracle(ValueError):
    pass


# -- test functions ---------------------------------------------------------------------------------
def cubic_bump(s) -> np.ndarray:
    """``B(s) = 1 - 3 s^2 + 2 |s|^3`` on ``|s| <= 1``, zero outside; C1 with peak 1."""
    a = np.abs(np.asarray(s, dtype=float))
    return np.where(a < 1.0, 1.0 - 3.0 * a * a + 2.0 * a ** 3, 0.0)


@dataclass(frozen=True)
class Bump:
    """Tensor bump ``B((t - tc)/ht) B((x - xc)/hx)``."""

    tc: float
    xc: float
    ht: float
    hx: float

    def __call__(self, t, x) -> np.ndarray:
        return cubic_bump((np.asarray(t) - self.tc) / self.ht) * cubic_bump(
            (np.asarray(x) - self.xc) / self.hx)

    @property
    def c0_norm(self) -> float:
        return 1.0

    @property
    def c1_norm(self) -> float:
        # max |B'| = 3/2, attained at |s| = 1/2
        return 1.0 + 1.5 / self.ht + 1.5 / self.hx

    def inside(self, t_range, x_range) -> bool:
        return (self.tc - self.ht >= t_range[0] - 1e-12 and self.tc + self.ht <= t_range[1] + 1e-12
                and self.xc - self.hx >= x_range[0] - 1e-12
                and self.xc + self.hx <= x_range[1] + 1e-12)


def standard_basis(t_range, x_range, grid: int = 5, levels: tuple[int, ...] = (1, 2)
                   ) -> list[Bump]:
    """Bumps centred on a ``grid x grid`` interior lattice at several scales.

    Level ``k`` uses half-widths ``spacing / k``; level 1 bumps touch the
    boundary of the rectangle only where they vanish to first order.
    """
    (ta, tb), (xa, xb) = t_range, x_range
    dt, dx = (tb - ta) / (grid + 1), (xb - xa) / (grid + 1)
    out = []
    for k in levels:
        for i in range(1, grid + 1):
            for j in range(1, grid + 1):
                out.append(Bump(ta + i * dt, xa + j * dx, dt / k, dx / k))
    return out


# -- line integrals along fronts ------------------------------------------------------------------
def _segment_arrays(sol: FrontSolution):
    segs = [s for s in sol.segments if s.t1 > s.t0]
    if not segs:
        return None
    t0 = np.array([s.t0 for s in segs])
    t1 = np.array([s.t1 for s in segs])
    x0 = np.array([s.x0 for s in segs])
    sp = np.array([s.speed for s in segs])
    uL = np.array([s.u_left for s in segs])
    uR = np.array([s.u_right for s in segs])
    return t0, t1, x0, sp, uL, uR


def _bump_line_integrals(arr, bump: Bump) -> np.ndarray:
    """``int phi(t, x(t)) dt`` along every segment, exact for the piecewise
    polynomial bump (split at its kinks, 6-point Gauss-Legendre)."""
    t0, t1, x0, sp, _, _ = arr
    lo = np.maximum(t0, bump.tc - bump.ht)
    hi = np.minimum(t1, bump.tc + bump.ht)
    live = hi > lo
    out = np.zeros(t0.size)
    if not np.any(live):
        return out
    lo, hi, t0l, x0l, spl = lo[live], hi[live], t0[live], x0[live], sp[live]
    cuts = [lo, hi, np.full_like(lo, bump.tc)]
    with np.errstate(divide="ignore", invalid="ignore"):
        for off in (-bump.hx, 0.0, bump.hx):
            cuts.append(np.where(spl != 0, t0l + (bump.xc + off - x0l) / spl, lo))
    P = np.sort(np.clip(np.stack(cuts, axis=1), lo[:, None], hi[:, None]), axis=1)
    a, b = P[:, :-1], P[:, 1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    tq = mid[..., None] + half[..., None] * GL_NODES
    xq = x0l[:, None, None] + spl[:, None, None] * (tq - t0l[:, None, None])
    vals = bump(tq, xq)
    out[live] = np.sum(half * np.sum(vals * GL_WEIGHTS, axis=-1), axis=1)
    return out


def _jumps(arr, dens, flux) -> np.ndarray:
    _, _, _, sp, uL, uR = arr
    dH = np.asarray(dens(uR)) - np.asarray(dens(uL))
    dG = np.asarray(flux(uR)) - np.asarray(flux(uL))
    if dH.ndim == 1:
        dH, dG = dH[:, None], dG[:, None]
    return sp[:, None] * dH - dG


def _residuals(sol: FrontSolution, basis, dens, flux) -> np.ndarray:
    arr = _segment_arrays(sol)
    if basis is None:
        basis = standard_basis(sol.t_range, sol.x_range)
    for bp in basis:
        if not bp.inside(sol.t_range, sol.x_range):
            raise SupportViolation(f"bump {bp} leaves the domain")
    if arr is None:
        return np.zeros(len(basis))
    J = _jumps(arr, dens, flux)
    res = [np.linalg.norm(_bump_line_integrals(arr, bp) @ J) for bp in basis]
    return np.array(res)


@dataclass(frozen=True)
class WeakResidual:
    """Per-bump residuals ``|int int phi_t H(u) + phi_x G(u)|`` and their maximum."""

    per_bump: np.ndarray
    c1_norms: np.ndarray
    bound: float

    @property
    def max(self) -> float:
        return float(self.per_bump.max()) if self.per_bump.size else 0.0

    @property
    def ok(self) -> bool:
        return self.max <= self.bound


def weak_residual(sol: FrontSolution, basis: list[Bump] | None = None,
                  rh_tol: float = 1e-9) -> WeakResidual:
    """Weak-form residual of ``sol`` for each bump.

    For piecewise constant states the area integral reduces to line
    integrals of the jump ``s [H] - [G]`` against ``phi`` along each front.
    The bound is ``(np strength + rh_tol * #fronts) * |phi|_C0 * T``.
    """
    basis = basis if basis is not None else standard_basis(sol.t_range, sol.x_range)
    res = _residuals(sol, basis, sol.sys.H, sol.sys.G)
    T = sol.t_range[1] - sol.t_range[0]
    bound = (sol.np_max + rh_tol * max(1, len(sol.segments))) * T
    return WeakResidual(res, np.array([b.c1_norm for b in basis]), bound)


def entropy_residual(sol: FrontSolution, pair=None, basis: list[Bump] | None = None) -> float:
    """Largest ``|int int phi_t eta(u) + phi_x q(u)|`` over the basis.

    Contact discontinuities conserve the entropy exactly, so this measures
    the equality (not just the inequality).
    """
    pair = pair or sol.sys.entropy
    if pair is None:
        raise NoEntropyPair(f"{sol.sys.name} carries no entropy pair")
    res = _residuals(sol, basis, pair.eta, pair.q)
    return float(res.max()) if res.size else 0.0


# -- initial and boundary clauses -------------------------------------------------------------------
@dataclass(frozen=True)
class ClauseReport:
    initial_l1: float
    left_l1: float
    right_l1: float
    epsilon: float
    margin: float = 0.0

    @property
    def ok(self) -> bool:
        tol = self.epsilon * (1.0 + self.margin)
        return max(self.initial_l1, self.left_l1, self.right_l1) <= tol


def trace_clauses(sol: FrontSolution, ubar: PiecewiseConstFn, g1, g2, b1=None, b2=None,
                  margin: float = 0.0) -> ClauseReport:
    """L1 errors of the initial and boundary clauses.

    Traces are measured as limits from the interior (rows and columns a tiny
    distance inside the rectangle), independently of the cached wall traces.
    """
    sys = sol.sys
    b1, b2 = b1 or sys.b1, b2 or sys.b2
    (ta, tb), (xa, xb) = sol.t_range, sol.x_range
    dt, dx = INTERIOR_OFFSET * (tb - ta), INTERIOR_OFFSET * (xb - xa)
    init = bvfun.l1_dist(sol.row(ta + dt, 1), ubar)

    def wall(x, g, bmap, dim):
        col = sol.column(x, 1).map(bmap)
        gp = g if isinstance(g, PiecewiseConstFn) else PiecewiseConstFn.constant(ta, tb, g)
        return bvfun.l1_dist(col, gp)

    left = wall(xa + dx, g1, b1, sys.n - sys.m)
    right = wall(xb - dx, g2, b2, sys.m)
    return ClauseReport(init, left, right, sol.epsilon, margin)


# -- reference solutions -------------------------------------------------------------------------------
@dataclass(frozen=True)
class OracleReport:
    oracle: str
    times: np.ndarray
    errors: np.ndarray

    @property
    def max(self) -> float:
        return float(self.errors.max()) if self.errors.size else 0.0


def _forward_data(sol: FrontSolution, ubar, g1, g2):
    if ubar is None:
        if "data" not in sol.meta:
            raise NoOracle("reference solutions need forward data; pass ubar, g1 and g2")
        ubar, g1, g2 = sol.meta["data"]
    ta, tb = sol.t_range

    def as_fn(g, dim):
        if isinstance(g, PiecewiseConstFn):
            return g
        return PiecewiseConstFn.constant(ta, tb, np.atleast_1d(np.asarray(g, dtype=float)))

    return ubar, as_fn(g1, sol.sys.n - sol.sys.m), as_fn(g2, sol.sys.m)


class ExactLinear:
    """Exact solution of a constant-coefficient system with affine boundary maps.

    Characteristic components ``w = L u`` are constant along ``x - lambda t``;
    at a wall the outgoing components follow from the boundary equation and
    the incoming ones, evaluated recursively.
    """

    def __init__(self, sys: SystemDef, ubar: PiecewiseConstFn, g1: PiecewiseConstFn,
                 g2: PiecewiseConstFn, t0: float = 0.0):
        if sys.linear is None:
            raise NoOracle(f"{sys.name} is not a constant-coefficient system")
        an = sys._anchor
        self.lam, self.R, self.L = an.lambdas, an.right, an.left
        self.m, self.n = sys.m, sys.n
        self.ubar, self.g1, self.g2, self.t0 = ubar, g1, g2, t0
        self.xa, self.xb = ubar.a, ubar.b
        z = np.zeros(sys.n)
        self.B1, self.c1 = sys.jac_b1(z), np.atleast_1d(sys.b1(z))
        self.B2, self.c2 = sys.jac_b2(z), np.atleast_1d(sys.b2(z))
        neg, pos = list(range(self.m)), list(range(self.m, self.n))
        self.neg, self.pos = neg, pos
        self.M1 = np.linalg.inv(self.B1 @ self.R[:, pos])
        self.M2 = np.linalg.inv(self.B2 @ self.R[:, neg])

    def components(self, t: np.ndarray, x: np.ndarray, fams) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        out = np.empty((t.size, len(fams)))
        for k, i in enumerate(fams):
            lam = self.lam[i]
            wall = self.xa if lam > 0 else self.xb
            tau = (x - wall) / lam
            hit = t - tau > self.t0
            w = np.empty(t.size)
            if np.any(~hit):
                xi = x[~hit] - lam * (t[~hit] - self.t0)
                w[~hit] = self.ubar(np.clip(xi, self.xa, self.xb)) @ self.L[i]
            if np.any(hit):
                s = t[hit] - tau[hit]
                w[hit] = self._wall(s, lam > 0)[:, self._slot(i, lam > 0)]
            out[:, k] = w
        return out

    def _slot(self, i: int, left: bool) -> int:
        return (self.pos if left else self.neg).index(i)

    def _wall(self, s: np.ndarray, left: bool) -> np.ndarray:
        if left:
            w_in = self.components(s, np.full(s.size, self.xa), self.neg)
            g = self.g1(s) - self.c1
            rhs = g - w_in @ (self.B1 @ self.R[:, self.neg]).T
            return rhs @ self.M1.T
        w_in = self.components(s, np.full(s.size, self.xb), self.pos)
        g = self.g2(s) - self.c2
        rhs = g - w_in @ (self.B2 @ self.R[:, self.pos]).T
        return rhs @ self.M2.T

    def __call__(self, t: float, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        w = self.components(np.full(x.size, float(t)), x, list(range(self.n)))
        return w @ self.R.T


def _exact_profile(ex: ExactLinear, sol: FrontSolution, t: float, cells: int
                   ) -> PiecewiseConstFn:
    xa, xb = sol.x_range
    num = sol.sample(t)
    pts = np.union1d(np.linspace(xa, xb, cells + 1), num.edges)
    cand = [ex.ubar.breaks + lam * (t - ex.t0) for lam in ex.lam]
    pts = np.union1d(pts, np.clip(np.concatenate(cand), xa, xb))
    pts = pts[np.concatenate([[True], np.diff(pts) > 1e-14])]
    mids = 0.5 * (pts[1:] + pts[:-1])
    return PiecewiseConstFn(xa, xb, pts[1:-1], ex(t, mids))


def cell_averages(f: PiecewiseConstFn, edges: np.ndarray) -> np.ndarray:
    """Exact averages of ``f`` over consecutive ``edges`` cells."""
    cum = np.concatenate([np.zeros((1, f.dim)),
                          np.cumsum(f.values * f.lengths[:, None], axis=0)])
    F = np.stack([np.interp(edges, f.edges, cum[:, j]) for j in range(f.dim)], axis=1)
    return np.diff(F, axis=0) / np.diff(edges)[:, None]


class FiniteVolume:
    """First-order finite volumes with the local Lax-Friedrichs flux.

    Conserved densities ``H(u)`` are advanced; states are recovered by a
    fixed-point inversion of ``H``.  Boundary ghost states satisfy the
    boundary map with the outgoing families adjusted along straight
    eigenvector lines at the equilibrium.
    """

    def __init__(self, sys: SystemDef, ubar: PiecewiseConstFn, g1: PiecewiseConstFn,
                 g2: PiecewiseConstFn, cells: int = 4096, cfl: float = 0.45):
        self.sys, self.g1, self.g2 = sys, g1, g2
        self.edges = np.linspace(ubar.a, ubar.b, cells + 1)
        self.h = (ubar.b - ubar.a) / cells
        self.u = cell_averages(ubar, self.edges)
        self.U = np.asarray(sys.H(self.u))
        lo, hi = speed_range(sys)
        self.a = float(max(np.max(np.abs(lo)), np.max(np.abs(hi))))
        self.dt_max = cfl * self.h / self.a
        z = np.zeros(sys.n)
        an = sys._anchor
        self.DH0inv = np.linalg.inv(sys.jac_H(z))
        self.identity_H = bool(sys.meta.get("identity_H"))
        self.R_out1 = an.right[:, sys.m:]
        self.R_out2 = an.right[:, :sys.m]
        self.K1 = np.linalg.inv(sys.jac_b1(z) @ self.R_out1)
        self.K2 = np.linalg.inv(sys.jac_b2(z) @ self.R_out2)
        self.t = 0.0

    def _states(self, U):
        if self.identity_H:
            return U
        u = U @ self.DH0inv.T
        for _ in range(60):
            r = np.asarray(self.sys.H(u)) - U
            if np.max(np.abs(r)) < 1e-15:
                break
            u = u - r @ self.DH0inv.T
        return u

    def _ghost(self, u_in, g, bmap, Rout, K):
        u = u_in.copy()
        for _ in range(8):
            r = np.atleast_1d(bmap(u)) - g
            if np.max(np.abs(r)) < 1e-15:
                break
            u = u - Rout @ (K @ r)
        return u

    def _flux(self, uL, uR):
        s = self.sys
        return 0.5 * (s.G(uL) + s.G(uR)) - 0.5 * self.a * (s.H(uR) - s.H(uL))

    def step(self, dt: float) -> None:
        s, u = self.sys, self.u
        tm = self.t + 0.5 * dt
        gl = self._ghost(u[0], self.g1.value_at(min(tm, self.g1.b)), s.b1, self.R_out1, self.K1)
        gr = self._ghost(u[-1], self.g2.value_at(min(tm, self.g2.b)), s.b2, self.R_out2, self.K2)
        ext = np.vstack([gl, u, gr])
        F = self._flux(ext[:-1], ext[1:])
        self.U = self.U - dt / self.h * (F[1:] - F[:-1])
        self.u = self._states(self.U)
        self.t += dt

    def advance(self, t: float) -> PiecewiseConstFn:
        while self.t < t - 1e-14:
            self.step(min(self.dt_max, t - self.t))
        return PiecewiseConstFn(self.edges[0], self.edges[-1], self.edges[1:-1], self.u.copy())


def oracle_compare(sol: FrontSolution, oracle: str = "exact", times=None, ubar=None, g1=None,
                   g2=None, cells: int = 4096, cfl: float = 0.45) -> OracleReport:
    """L1 distance to a reference solution at each requested time.

    ``oracle='exact'`` follows characteristics (constant-coefficient systems
    only); ``'godunov'`` runs the finite-volume reference.
    """
    ubar, g1, g2 = _forward_data(sol, ubar, g1, g2)
    ta, tb = sol.t_range
    if times is None:
        times = ta + (tb - ta) * np.arange(1, 11) / 10
    times = np.asarray(times, dtype=float)
    if oracle == "exact":
        ex = ExactLinear(sol.sys, ubar, g1, g2, ta)
        errs = [bvfun.l1_dist(sol.sample(t), _exact_profile(ex, sol, t, cells)) for t in times]
    elif oracle in ("godunov", "fv"):
        fv = FiniteVolume(sol.sys, ubar, g1, g2, cells, cfl)
        errs = [bvfun.l1_dist(sol.sample(t), fv.advance(t)) for t in np.sort(times)]
    else:
        raise NoOracle(f"unknown oracle {oracle!r}")
    return OracleReport(oracle, times, np.array(errs))


# -- profiles and the aggregate report -----------------------------------------------------------------
def tv_profile(sol: FrontSolution, times) -> np.ndarray:
    return np.array([sol.sample(t).tv() for t in times])


def lipschitz_profile(sol: FrontSolution, times) -> np.ndarray:
    """Difference quotients ``|u(t_k+1) - u(t_k)|_L1 / (t_k+1 - t_k)``."""
    times = np.asarray(times, dtype=float)
    prof = [sol.sample(t) for t in times]
    return np.array([bvfun.l1_dist(b, a) / (t1 - t0)
                     for a, b, t0, t1 in zip(prof, prof[1:], times, times[1:])])


@dataclass
class ResidualReport:
    weak_residual: float
    entropy_residual: float | None
    normalization: float
    trace_residuals: dict
    times: np.ndarray
    tv_profile: np.ndarray
    lipschitz_profile: np.ndarray
    extra: dict = field(default_factory=dict)

    def to_text(self) -> str:
        lines = [f"weak_residual = {self.weak_residual:.6e}",
                 f"entropy_residual = {'n/a' if self.entropy_residual is None else f'{self.entropy_residual:.6e}'}",
                 f"max_c1_norm = {self.normalization:.6g}"]
        lines += [f"{k}_l1 = {v:.6e}" for k, v in self.trace_residuals.items()]
        lines += [f"{k} = {v}" for k, v in self.extra.items()]
        lines.append(f"max_tv = {float(self.tv_profile.max()) if self.tv_profile.size else 0.0:.6e}")
        lip = float(self.lipschitz_profile.max()) if self.lipschitz_profile.size else 0.0
        lines.append(f"max_lipschitz = {lip:.6e}")
        return "\n".join(lines) + "\n"

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "tv", "lipschitz"])
        lip = np.concatenate([self.lipschitz_profile, [np.nan]])
        for t, v, lq in zip(self.times, self.tv_profile, lip):
            w.writerow([repr(float(t)), repr(float(v)), "" if np.isnan(lq) else repr(float(lq))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def residual_report(sol: FrontSolution, ubar=None, g1=None, g2=None, slices: int = 20,
                    basis: list[Bump] | None = None) -> ResidualReport:
    """All residuals of ``sol`` in one report (forward data from the run by default)."""
    basis = basis if basis is not None else standard_basis(sol.t_range, sol.x_range)
    wr = weak_residual(sol, basis)
    er = entropy_residual(sol, basis=basis) if sol.sys.entropy is not None else None
    traces = {}
    if ubar is not None or "data" in sol.meta:
        ubar, g1, g2 = _forward_data(sol, ubar, g1, g2)
        cl = trace_clauses(sol, ubar, g1, g2)
        traces = {"initial": cl.initial_l1, "left": cl.left_l1, "right": cl.right_l1}
    ta, tb = sol.t_range
    times = ta + (tb - ta) * np.arange(slices + 1) / slices
    return ResidualReport(wr.max, er, float(wr.c1_norms.max()), traces, times,
                          tv_profile(sol, times), lipschitz_profile(sol, times),
                          {"weak_bound": f"{wr.bound:.6e}"})
