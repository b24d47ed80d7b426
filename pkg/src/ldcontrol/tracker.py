"""Event-driven front tracking for the mixed initial-boundary value problem.

The engine advances a left-to-right arrangement of straight fronts between
events (front crossings, fronts reaching a wall, jumps of the boundary data)
and resolves every event with the Riemann solvers.  Interactions deep in
the generation tree are handled by a simplified solver that carries the
incoming waves through unchanged and dumps the leftover jump into a
non-physical front moving at a speed faster than every characteristic.
"""
from __future__ import annotations

import functools
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import bvfun
from .bvfun import PiecewiseConstFn
from .riemann import (WaveFan, group_flow, solve_boundary_left, solve_boundary_right,
                      solve_riemann, rh_residual)
from .systems import SystemDef, ball_samples, group_speed, lambdas


class BudgetExceeded(ValueError):
    pass


class BallEscape(ArithmeticError):
    pass


class EventOverflow(RuntimeError):
    pass


class EpsilonBudgetBlown(ArithmeticError):
    pass


class OutOfDomain(ValueError):
    pass


@dataclass(frozen=True)
class TrackerConfig:
    """Knobs of the front tracking engine.

    ``lambda_hat`` overrides the non-physical front speed; by default it is
    twice the largest characteristic speed found on samples of the ball.
    ``data_mesh`` is the sampling width used for data given as callables
    (default: ``epsilon``).
    """

    gen_cap: int = 3
    rho_simp: float = 1.0
    lambda_hat: float | None = None
    max_fronts: int = 10**6
    max_events: int = 10**6
    ball_frac: float = 0.9
    delta: float = 0.5
    drop_tol: float = 1e-13
    coincide_tol: float = 1e-11
    data_mesh: float | None = None
    ball_samples: int = 200


# -- engine-side fronts --------------------------------------------------------
@dataclass(eq=False)
class Front:
    id: int
    kind: str
    family: int
    t0: float
    x0: float
    speed: float
    amplitude: np.ndarray
    uL: np.ndarray
    uR: np.ndarray
    generation: int = 0

    @property
    def physical(self) -> bool:
        return self.kind == "physical"

    def x(self, t: float) -> float:
        return self.x0 + self.speed * (t - self.t0)

    def strength(self) -> float:
        return float(np.linalg.norm(self.amplitude))


@dataclass(frozen=True)
class Event:
    t: float
    x: float
    kind: str
    incoming: tuple[int, ...]
    outgoing: tuple[int, ...]


@dataclass(frozen=True)
class Candidate:
    """Next event proposal from :func:`next_event`."""

    t: float
    x: float
    kind: str
    lo: int = -1
    hi: int = -1


@dataclass(frozen=True, eq=False)
class Segment:
    """One straight front piece in physical (t, x) coordinates.

    ``u_left`` and ``u_right`` are the states at smaller and larger x.
    """

    id: int
    kind: str
    family: int
    generation: int
    t0: float
    x0: float
    t1: float
    x1: float
    speed: float
    u_left: np.ndarray
    u_right: np.ndarray


def lambda_hat_default(sys: SystemDef, samples: int = 200) -> float:
    pts = ball_samples(sys.n, sys.r_ball, samples)
    return 2.0 * max(float(np.max(np.abs(lambdas(sys, u)))) for u in pts)


SNAP_TOL = 1e-11


def _snap(v: np.ndarray, tol: float = SNAP_TOL) -> np.ndarray:
    """Replace values lying within ``tol`` of a smaller neighbour by the
    cluster minimum, so that ordering ties are decided by secondary keys."""
    if v.size < 2:
        return v
    o = np.argsort(v, kind="stable")
    sv = v[o]
    start = np.concatenate([[True], np.diff(sv) > tol])
    rep = sv[start][np.cumsum(start) - 1]
    out = np.empty_like(v)
    out[o] = rep
    return out


# -- solution object ----------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class FrontSolution:
    """Immutable front arrangement on ``[t_a, t_b] x [x_a, x_b]``.

    Segments are stored in physical coordinates whatever the orientation
    of the engine run; ``orientation`` records how the run was oriented.
    """

    sys: SystemDef
    t_range: tuple[float, float]
    x_range: tuple[float, float]
    segments: tuple[Segment, ...]
    epsilon: float
    events: tuple[Event, ...] = ()
    background: np.ndarray | None = None
    orientation: str = "forward"
    np_max: float = 0.0
    lambda_hat: float = 0.0
    meta: dict = field(default_factory=dict)

    @functools.cached_property
    def _arrays(self):
        segs = self.segments
        return (np.array([s.t0 for s in segs]), np.array([s.t1 for s in segs]),
                np.array([s.x0 for s in segs]), np.array([s.x1 for s in segs]),
                np.array([s.speed for s in segs]), np.array([s.id for s in segs]))

    def _bg(self) -> np.ndarray:
        if self.background is not None:
            return self.background
        return np.zeros(self.sys.n)

    def _row_items(self, t: float, side: int):
        if not self.segments:
            return [], []
        t0, t1, x0, _, sp, ids = self._arrays
        # fronts living only within the snap window on the sampled side are skipped
        tt = t + side * SNAP_TOL
        mask = (t0 <= tt) & (tt < t1) if side > 0 else (t0 < tt) & (tt <= t1)
        idx = np.nonzero(mask)[0]
        xs = x0[idx] + sp[idx] * (t - t0[idx])
        order = np.lexsort((ids[idx], side * sp[idx], _snap(xs)))
        return xs[order], idx[order]

    def _col_items(self, x: float, side: int):
        if not self.segments:
            return [], []
        t0, _, x0, x1, sp, ids = self._arrays
        lo, hi = np.minimum(x0, x1), np.maximum(x0, x1)
        xx = x + side * SNAP_TOL
        mask = (lo <= xx) & (xx < hi) if side > 0 else (lo < xx) & (xx <= hi)
        idx = np.nonzero(mask)[0]
        ts = t0[idx] + (x - x0[idx]) / sp[idx]
        order = np.lexsort((ids[idx], side / sp[idx], _snap(ts)))
        return ts[order], idx[order]

    def row(self, t: float, side: int = 1) -> PiecewiseConstFn:
        """Exact profile ``u(t+, .)`` (``side=+1``) or ``u(t-, .)``."""
        ta, tb = self.t_range
        if t < ta - 1e-12 or t > tb + 1e-12:
            raise OutOfDomain(f"t={t} outside [{ta}, {tb}]")
        xa, xb = self.x_range
        xs, idx = self._row_items(t, side)
        if len(idx) == 0:
            return PiecewiseConstFn.constant(xa, xb, self.value(t, xa, side, 1))
        states = [self.segments[idx[0]].u_left] + [self.segments[i].u_right for i in idx]
        return PiecewiseConstFn.from_cells(xa, xb, np.clip(xs, xa, xb), states)

    def column(self, x: float, side: int = 1) -> PiecewiseConstFn:
        """Exact time history ``u(., x+)`` (``side=+1``) or ``u(., x-)``."""
        xa, xb = self.x_range
        if x < xa - 1e-12 or x > xb + 1e-12:
            raise OutOfDomain(f"x={x} outside [{xa}, {xb}]")
        ta, tb = self.t_range
        ts, idx = self._col_items(x, side)
        if len(idx) == 0:
            return PiecewiseConstFn.constant(ta, tb, self.value(ta, x, 1, side))
        segs = [self.segments[i] for i in idx]
        first = segs[0]
        states = [first.u_right if first.speed > 0 else first.u_left]
        states += [s.u_left if s.speed > 0 else s.u_right for s in segs]
        return PiecewiseConstFn.from_cells(ta, tb, np.clip(ts, ta, tb), states)

    def value(self, t: float, x: float, tside: int = 1, xside: int = 1) -> np.ndarray:
        """State at a point, approached from the given time and space sides."""
        xs, idx = self._row_items(t, tside)
        if len(idx):
            xa, xb = self.x_range
            states = [self.segments[idx[0]].u_left] + [self.segments[i].u_right for i in idx]
            return PiecewiseConstFn.from_cells(xa, xb, np.clip(xs, xa, xb), states).value_at(x, xside)
        ts, idx = self._col_items(x, xside)
        if len(idx):
            return self.column(x, xside).value_at(t, tside)
        xa = self.x_range[0]
        ts, idx = self._col_items(xa, 1)
        if len(idx):
            return self.column(xa, 1).value_at(t, tside)
        return self._bg()

    def sample(self, t: float) -> PiecewiseConstFn:
        return self.row(t, -1 if t >= self.t_range[1] else 1)

    def trace(self, side: str) -> PiecewiseConstFn:
        cache = self.__dict__.setdefault("_trace_cache", {})
        if side not in cache:
            cache[side] = self._trace(side)
        return cache[side]

    def _trace(self, side: str) -> PiecewiseConstFn:
        if side == "initial":
            return self.row(self.t_range[0], 1)
        if side == "final":
            return self.row(self.t_range[1], -1)
        if side == "left":
            return self.column(self.x_range[0], 1)
        if side == "right":
            return self.column(self.x_range[1], -1)
        raise ValueError(f"unknown trace side {side!r}")

    def fronts_at(self, t: float) -> list[Segment]:
        _, idx = self._row_items(t, 1)
        return [self.segments[i] for i in idx]

    def nonphysical_profile(self) -> tuple[np.ndarray, np.ndarray]:
        """Total non-physical strength as a step function of time.

        Returns the breakpoints and the total on each interval between them.
        """
        nps = [s for s in self.segments if s.kind == "nonphysical" and s.t1 > s.t0]
        ta, tb = self.t_range
        if not nps:
            return np.array([ta, tb]), np.zeros(1)
        cuts = np.unique(np.concatenate([[ta, tb], [s.t0 for s in nps], [s.t1 for s in nps]]))
        mids = 0.5 * (cuts[1:] + cuts[:-1])
        tot = np.zeros(mids.size)
        for s in nps:
            tot[(mids > s.t0) & (mids < s.t1)] += np.linalg.norm(s.u_right - s.u_left)
        return cuts, tot


# -- event selection --------------------------------------------------------------------
def _same_family(a: Front, b: Front) -> bool:
    return a.physical and b.physical and a.family == b.family


def next_event(fronts: Sequence[Front], t: float, walls: tuple[float, float],
               data_breaks: tuple[float, float] = (math.inf, math.inf),
               tol: float = 1e-12) -> Candidate | None:
    """Earliest pending event of the arrangement.

    Wall events (fronts reaching a wall and boundary-data jumps) win ties
    against crossings; among crossings at equal times the leftmost wins,
    then the lowest front id.
    """
    xa, xb = walls
    cands: list[tuple[float, int, float, int, Candidate]] = []
    tl = data_breaks[0]
    if fronts and fronts[0].speed < 0:
        tl = min(tl, t + max(0.0, (xa - fronts[0].x(t)) / fronts[0].speed))
    if math.isfinite(tl):
        cands.append((tl, 0, xa, -1, Candidate(tl, xa, "wall_left")))
    tr = data_breaks[1]
    if fronts and fronts[-1].speed > 0:
        tr = min(tr, t + max(0.0, (xb - fronts[-1].x(t)) / fronts[-1].speed))
    if math.isfinite(tr):
        cands.append((tr, 0, xb, -1, Candidate(tr, xb, "wall_right")))
    xs = [f.x(t) for f in fronts]
    for i in range(len(fronts) - 1):
        a, b = fronts[i], fronts[i + 1]
        if a.speed <= b.speed or _same_family(a, b):
            continue
        tc = t + max(0.0, (xs[i + 1] - xs[i]) / (a.speed - b.speed))
        xc = a.x(tc)
        cands.append((tc, 1, xc, a.id, Candidate(tc, xc, "crossing", i, i + 1)))
    if not cands:
        return None
    tmin = min(c[0] for c in cands)
    near = [c for c in cands if c[0] <= tmin + tol]
    near.sort(key=lambda c: (c[1], c[2], c[3]))
    best = near[0]
    return replace(best[4], t=tmin) if best[1] == 0 else best[4]


# -- event handlers ---------------------------------------------------------------------
def _fronts_from_fan(fan: WaveFan, t: float, x: float, gens: dict[int, int],
                     new_gen: int) -> list[Front]:
    return [Front(-1, "physical", w.group, t, x, w.speed, w.amplitude, w.uL, w.uR,
                  gens.get(w.group, new_gen)) for w in fan]


def _np_front(uL, uR, t, x, lam_hat, gen) -> Front:
    return Front(-1, "nonphysical", -1, t, x, lam_hat, uR - uL, uL, uR, gen)


def handle_interaction(sys: SystemDef, incoming: Sequence[Front], t: float, x: float,
                       eps: float, cfg: TrackerConfig, lam_hat: float) -> tuple[list[Front], bool]:
    """Resolve a crossing of the adjacent fronts ``incoming`` at ``(t, x)``.

    Returns the outgoing fronts (ids unassigned) and whether the accurate
    solver was used.
    """
    uL, uR = incoming[0].uL, incoming[-1].uR
    gen_max = max(f.generation for f in incoming)
    if len(incoming) == 2:
        A, B = incoming
        if not A.physical and B.physical:
            # a non-physical front passes through unchanged physical waves
            u1 = group_flow(sys, B.family, uL, B.amplitude)
            Bn = Front(-1, "physical", B.family, t, x, group_speed(sys, B.family, uL),
                       B.amplitude, uL, u1, B.generation)
            out = [Bn]
            if np.linalg.norm(uR - u1) > 0:
                out.append(_np_front(u1, uR, t, x, lam_hat, A.generation))
            else:
                Bn.uR = uR
            return out, False
        if A.physical and B.physical and A.family != B.family:
            accurate = (gen_max < cfg.gen_cap
                        or A.strength() * B.strength() >= eps * eps * cfg.rho_simp)
            if not accurate:
                u1 = group_flow(sys, B.family, uL, B.amplitude)
                u2 = group_flow(sys, A.family, u1, A.amplitude)
                Bn = Front(-1, "physical", B.family, t, x, group_speed(sys, B.family, uL),
                           B.amplitude, uL, u1, B.generation)
                An = Front(-1, "physical", A.family, t, x, group_speed(sys, A.family, u1),
                           A.amplitude, u1, u2, A.generation)
                out = [Bn, An]
                if np.linalg.norm(uR - u2) > cfg.drop_tol:
                    out.append(_np_front(u2, uR, t, x, lam_hat, gen_max + 1))
                else:
                    An.uR = uR
                return out, False
    fan = solve_riemann(sys, uL, uR, min_amp=cfg.drop_tol)
    gens = {f.family: f.generation for f in incoming if f.physical}
    return _fronts_from_fan(fan, t, x, gens, gen_max + 1), True


def handle_boundary(sys: SystemDef, wall: str, u_inner, g, t: float, x: float,
                    incoming: Sequence[Front] = (), cfg: TrackerConfig = TrackerConfig()
                    ) -> tuple[list[Front], np.ndarray]:
    """Reflect at a wall: outgoing fan and the new wall state."""
    if wall == "left":
        fan = solve_boundary_left(sys, g, u_inner, min_amp=cfg.drop_tol)
    else:
        fan = solve_boundary_right(sys, g, u_inner, min_amp=cfg.drop_tol)
    gen = max((f.generation for f in incoming), default=-1) + 1
    return _fronts_from_fan(fan, t, x, {}, gen), fan.u_boundary


# -- the engine ---------------------------------------------------------------------------
_IDENTITY = (np.eye(2), np.zeros(2))


def _as_pcf(data, a: float, b: float, dim: int, mesh: float) -> PiecewiseConstFn:
    if isinstance(data, PiecewiseConstFn):
        if abs(data.a - a) > 1e-12 or abs(data.b - b) > 1e-12:
            raise bvfun.DomainMismatch(f"data on [{data.a}, {data.b}], expected [{a}, {b}]")
        return data
    if callable(data):
        return bvfun.sample_bv(data, mesh, (a, b))
    v = np.atleast_1d(np.asarray(data, dtype=float))
    if v.size != dim:
        raise ValueError(f"constant data has {v.size} components, expected {dim}")
    return PiecewiseConstFn.constant(a, b, v)


class _Engine:
    def __init__(self, sys, ubar, g1, g2, T, eps, cfg, lam_hat):
        self.sys, self.ubar, self.g1, self.g2 = sys, ubar, g1, g2
        self.T, self.eps, self.cfg, self.lam_hat = T, eps, cfg, lam_hat
        self.consumed = [-math.inf, -math.inf]
        self.xa, self.xb = ubar.a, ubar.b
        self.fronts: list[Front] = []
        self.segments: list[tuple] = []
        self.events: list[Event] = []
        self.next_id = 0
        self.np_max = 0.0
        self.left_state = ubar.left_value()
        self.right_state = ubar.right_value()
        self.r_max = cfg.ball_frac * sys.r_ball

    def _register(self, fronts: list[Front]) -> tuple[int, ...]:
        ids = []
        for f in fronts:
            f.id = self.next_id
            self.next_id += 1
            ids.append(f.id)
            for u in (f.uL, f.uR):
                if float(np.linalg.norm(u)) > self.r_max:
                    raise BallEscape(f"state {np.asarray(u).tolist()} left the "
                                     f"{self.cfg.ball_frac} ball at t={f.t0:.6g}")
        return tuple(ids)

    def _close(self, f: Front, t: float, x: float | None = None) -> None:
        self.segments.append((f, t, f.x(t) if x is None else x))

    def _check(self) -> None:
        if len(self.fronts) > self.cfg.max_fronts or len(self.events) > self.cfg.max_events:
            raise EventOverflow(f"{len(self.fronts)} fronts / {len(self.events)} events")
        tot = sum(float(np.linalg.norm(f.uR - f.uL)) for f in self.fronts if not f.physical)
        self.np_max = max(self.np_max, tot)
        if tot > self.eps:
            raise EpsilonBudgetBlown(f"non-physical strength {tot:.3g} exceeds eps={self.eps:g}")

    def _refresh_walls(self) -> None:
        if self.fronts:
            self.left_state = self.fronts[0].uL
            self.right_state = self.fronts[-1].uR

    def start(self) -> None:
        sys, ubar = self.sys, self.ubar
        interior: list[Front] = []
        for xj, (ul, ur) in zip(ubar.breaks, zip(ubar.values[:-1], ubar.values[1:])):
            fan = solve_riemann(sys, ul, ur, min_amp=self.cfg.drop_tol)
            interior += _fronts_from_fan(fan, 0.0, float(xj), {}, 0)
        left, ub_l = handle_boundary(sys, "left", ubar.left_value(), self.g1.value_at(0.0, 1),
                                     0.0, self.xa, cfg=self.cfg)
        right, ub_r = handle_boundary(sys, "right", ubar.right_value(), self.g2.value_at(0.0, 1),
                                      0.0, self.xb, cfg=self.cfg)
        self.fronts = left + interior + right
        new = self._register(self.fronts)
        self.left_state, self.right_state = ub_l, ub_r
        self._refresh_walls()
        self.events.append(Event(0.0, self.xa, "initial", (), new))
        self._check()

    def _g_after(self, k: int, t: float) -> np.ndarray:
        # a pending data jump within the coincidence window belongs to this event
        g = (self.g1, self.g2)[k]
        br = self._pending(k, t)
        if br - t <= self.cfg.coincide_tol:
            self.consumed[k] = br
            return g.value_at(br, 1)
        return g.value_at(t, 1)

    def _pending(self, k: int, t: float) -> float:
        # first unconsumed data jump, looking back over the coincidence window
        g = (self.g1, self.g2)[k]
        return g.next_break_after(max(t - self.cfg.coincide_tol, self.consumed[k]))

    def _wall(self, c: Candidate) -> None:
        t = c.t
        tol = self.cfg.coincide_tol
        if c.kind == "wall_left":
            k = 0
            while (k < len(self.fronts) and self.fronts[k].speed < 0
                   and self.fronts[k].x(t) <= self.xa + tol):
                k += 1
            gone, self.fronts = self.fronts[:k], self.fronts[k:]
            u_inner = gone[-1].uR if gone else self.left_state
            g = self._g_after(0, t)
            out, ub = handle_boundary(self.sys, "left", u_inner, g, t, self.xa, gone, self.cfg)
            self.fronts = out + self.fronts
            self.left_state = ub
        else:
            k = len(self.fronts)
            while (k > 0 and self.fronts[k - 1].speed > 0
                   and self.fronts[k - 1].x(t) >= self.xb - tol):
                k -= 1
            gone, self.fronts = self.fronts[k:], self.fronts[:k]
            u_inner = gone[0].uL if gone else self.right_state
            g = self._g_after(1, t)
            out, ub = handle_boundary(self.sys, "right", u_inner, g, t, self.xb, gone, self.cfg)
            self.fronts = self.fronts + out
            self.right_state = ub
        if not self.fronts:
            self.left_state = self.right_state = ub
        xw = self.xa if c.kind == "wall_left" else self.xb
        for f in gone:
            self._close(f, t, xw)
        new = self._register(out)
        self._refresh_walls()
        self.events.append(Event(t, c.x, c.kind, tuple(f.id for f in gone), new))

    def _crossing(self, c: Candidate) -> None:
        t = c.t
        tol = self.cfg.coincide_tol
        lo, hi = c.lo, c.hi
        x = c.x
        while lo > 0 and abs(self.fronts[lo - 1].x(t) - x) <= tol:
            lo -= 1
        while hi + 1 < len(self.fronts) and abs(self.fronts[hi + 1].x(t) - x) <= tol:
            hi += 1
        inc = self.fronts[lo:hi + 1]
        out, _ = handle_interaction(self.sys, inc, t, x, self.eps, self.cfg, self.lam_hat)
        for f in inc:
            self._close(f, t, x)
        self.fronts[lo:hi + 1] = out
        if not self.fronts:
            self.left_state = self.right_state = inc[0].uL
        new = self._register(out)
        self._refresh_walls()
        self.events.append(Event(t, x, "crossing", tuple(f.id for f in inc), new))

    def run(self) -> None:
        self.start()
        t = 0.0
        while True:
            breaks = (max(t, self._pending(0, t)), max(t, self._pending(1, t)))
            c = next_event(self.fronts, t, (self.xa, self.xb), breaks)
            if c is None or c.t >= self.T:
                break
            t = c.t
            if c.kind == "crossing":
                self._crossing(c)
            else:
                self._wall(c)
            self._check()
        for f in self.fronts:
            self._close(f, self.T)
        self.fronts = []


def _map_segments(sys_base: SystemDef, raw, transform, family_map) -> list[Segment]:
    A, c = transform
    out = []
    for f, t1, x1 in raw:
        p0 = A @ np.array([f.t0, f.x0]) + c
        p1 = A @ np.array([t1, x1]) + c
        d = A @ np.array([1.0, f.speed])
        if abs(d[0]) < 1e-300:
            raise ArithmeticError("front parallel to the time axis in physical frame")
        speed = float(d[1] / d[0])
        e = A @ np.array([0.0, -1.0])
        if e[1] - speed * e[0] < 0:
            ul, ur = f.uL, f.uR
        else:
            ul, ur = f.uR, f.uL
        if p1[0] < p0[0]:
            p0, p1 = p1, p0
        fam = family_map[f.family] if f.physical else -1
        out.append(Segment(f.id, f.kind, fam, f.generation, float(p0[0]), float(p0[1]),
                           float(p1[0]), float(p1[1]), speed, ul, ur))
    out.sort(key=lambda s: (s.t0, s.id))
    return out


def run_engine(sys: SystemDef, ubar, g1, g2, T: float, eps: float,
               cfg: TrackerConfig | None = None, *, base: SystemDef | None = None,
               transform=None, family_map=None, orientation: str = "forward",
               t_range=None, x_range=None) -> FrontSolution:
    """Run the engine on ``sys`` and express the result in physical coordinates.

    ``transform = (A, c)`` maps engine ``(tau, xi)`` to physical ``(t, x)``.
    """
    cfg = cfg or TrackerConfig()
    if not eps > 0:
        raise ValueError("epsilon must be positive")
    mesh = cfg.data_mesh or eps
    n, m = sys.n, sys.m
    if isinstance(ubar, PiecewiseConstFn):
        xa, xb = ubar.a, ubar.b
    else:
        raise TypeError("initial data must be a PiecewiseConstFn (sample callables first)")
    g1 = _as_pcf(g1, 0.0, T, n - m, mesh)
    g2 = _as_pcf(g2, 0.0, T, m, mesh)
    bud = bvfun.budget(ubar, g1, g2, sys.b1, sys.b2)
    if bud.total > cfg.delta:
        raise BudgetExceeded(f"smallness budget {bud.total:.4g} exceeds delta={cfg.delta:g}")
    lam_hat = cfg.lambda_hat or lambda_hat_default(sys, cfg.ball_samples)
    eng = _Engine(sys, ubar, g1, g2, T, eps, cfg, lam_hat)
    eng.run()
    transform = transform or _IDENTITY
    A, c = transform
    family_map = family_map or tuple(range(len(sys.groups)))
    segs = _map_segments(base or sys, eng.segments, transform, family_map)
    events = []
    for e in eng.events:
        p = A @ np.array([e.t, e.x]) + c
        events.append(Event(float(p[0]), float(p[1]), e.kind, e.incoming, e.outgoing))
    corners = {(0.0, xa): ubar.left_value(), (0.0, xb): ubar.right_value(),
               (T, xa): eng.left_state, (T, xb): eng.right_state}
    pts = {k: A @ np.array(k) + c for k in corners}
    t_range = t_range or (float(min(p[0] for p in pts.values())), float(max(p[0] for p in pts.values())))
    x_range = x_range or (float(min(p[1] for p in pts.values())), float(max(p[1] for p in pts.values())))
    bg = min(corners, key=lambda k: abs(pts[k][0] - t_range[0]) + abs(pts[k][1] - x_range[0]))
    d = A @ np.array([1.0, lam_hat])
    meta = {"budget": bud, "engine_data": (ubar, g1, g2), "engine_lambda_hat": lam_hat}
    if orientation == "forward" and np.array_equal(A, np.eye(2)) and not np.any(c):
        meta["data"] = (ubar, g1, g2)
    return FrontSolution(base or sys, t_range, x_range, tuple(segs), eps, tuple(events),
                         np.asarray(corners[bg], dtype=float), orientation, eng.np_max,
                         abs(float(d[1] / d[0])), meta)


def evolve(sys: SystemDef, ubar, g1, g2, T: float, eps: float,
           cfg: TrackerConfig | None = None) -> FrontSolution:
    """Front tracking epsilon-solution of the forward mixed problem on ``[0, T]``.

    ``ubar`` is piecewise constant initial data on ``[x_a, x_b]``; ``g1``
    and ``g2`` are boundary data on ``[0, T]`` given as piecewise constant
    functions, callables (sampled with the configured mesh) or constants.
    """
    return run_engine(sys, ubar, g1, g2, T, eps, cfg)


def sample(sol: FrontSolution, t: float) -> PiecewiseConstFn:
    return sol.sample(t)


def trace(sol: FrontSolution, side: str) -> PiecewiseConstFn:
    return sol.trace(side)


# -- compliance and export --------------------------------------------------------------------
@dataclass(frozen=True)
class ComplianceReport:
    rh_max: float
    speed_err_max: float
    np_max: float
    np_speed_err: float
    initial_l1: float
    left_l1: float
    right_l1: float
    epsilon: float
    tol_rh: float = 1e-9

    @property
    def ok(self) -> bool:
        e = self.epsilon
        return (self.rh_max <= self.tol_rh and self.np_max <= e and self.np_speed_err <= 1e-9
                and self.initial_l1 <= e and self.left_l1 <= e and self.right_l1 <= e)

    def summary(self) -> str:
        return (f"rh_max={self.rh_max:.3e} speed_err={self.speed_err_max:.3e} "
                f"np_max={self.np_max:.3e} initial_l1={self.initial_l1:.3e} "
                f"left_l1={self.left_l1:.3e} right_l1={self.right_l1:.3e} "
                f"eps={self.epsilon:g} ok={self.ok}")


def compliance(sol: FrontSolution, ubar: PiecewiseConstFn | None = None, g1=None, g2=None,
               b1: Callable | None = None, b2: Callable | None = None,
               tol_rh: float = 1e-9) -> ComplianceReport:
    """Check the defining clauses of an epsilon-solution on ``sol``.

    Per-front jump conditions and speeds, non-physical front speeds and total
    strength, and L1 errors of the initial and boundary traces.  Boundary
    data may be constants.  Data defaults to what the run consumed (forward
    runs only).
    """
    sys = sol.sys
    if ubar is None and "data" in sol.meta:
        ubar, g1, g2 = sol.meta["data"]
    b1 = b1 or sys.b1
    b2 = b2 or sys.b2
    rh, sp_err, np_sp = 0.0, 0.0, 0.0
    # glued solutions keep each half's non-physical speed
    hats = [sol.lambda_hat] + [h.lambda_hat for h in sol.meta.get("halves", ())]
    for s in sol.segments:
        if s.kind == "physical":
            rh = max(rh, rh_residual(sys, s.u_left, s.u_right, s.speed))
            lam = lambdas(sys, s.u_left)[list(sys.groups[s.family])].mean()
            sp_err = max(sp_err, abs(lam - s.speed))
        elif s.kind == "nonphysical":
            np_sp = max(np_sp, min(abs(abs(s.speed) - h) for h in hats))
    _, tot = sol.nonphysical_profile()
    ta, tb = sol.t_range
    if g1 is not None and not isinstance(g1, PiecewiseConstFn):
        g1 = PiecewiseConstFn.constant(ta, tb, g1)
    if g2 is not None and not isinstance(g2, PiecewiseConstFn):
        g2 = PiecewiseConstFn.constant(ta, tb, g2)
    init = bvfun.l1_dist(sol.trace("initial"), ubar) if ubar is not None else 0.0
    left = bvfun.l1_dist(sol.trace("left").map(b1), g1) if g1 is not None else 0.0
    right = bvfun.l1_dist(sol.trace("right").map(b2), g2) if g2 is not None else 0.0
    return ComplianceReport(rh, sp_err, float(tot.max(initial=0.0)), np_sp, init, left,
                            right, sol.epsilon, tol_rh)


def family_label(sys: SystemDef, group: int) -> int:
    """1-based index of the first family of a wave group; 0 for non-physical."""
    return 0 if group < 0 else sys.groups[group][0] + 1


def fronts_to_csv(sol: FrontSolution, path=None) -> str:
    """One row per segment, ordered by ``(t0, front_id)``."""
    buf = io.StringIO()
    n = sol.sys.n
    buf.write(f"# orientation {sol.orientation}\n")
    buf.write(f"# epsilon {sol.epsilon!r}\n")
    cols = (["front_id", "kind", "family", "t0", "x0", "t1", "x1"]
            + [f"uL{i + 1}" for i in range(n)] + [f"uR{i + 1}" for i in range(n)])
    buf.write(",".join(cols) + "\n")
    for s in sorted(sol.segments, key=lambda s: (s.t0, s.id)):
        vals = [s.t0, s.x0, s.t1, s.x1, *s.u_left, *s.u_right]
        buf.write(f"{s.id},{s.kind},{family_label(sol.sys, s.family)},"
                  + ",".join(repr(float(v)) for v in vals) + "\n")
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
