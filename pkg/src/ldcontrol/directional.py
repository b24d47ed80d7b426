"""Orientation changes: backward-in-time and sideways (x as evolution variable).

A sideways problem evolves ``d_x G(u) + d_t H(u) = 0`` in x, with ``t`` playing
the role of space.  Every orientation is run by the forward engine on an
effective system; the resulting fronts are mapped back to physical (t, x)
coordinates so that solutions of different orientations can be compared
and glued directly.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import bvfun
from .bvfun import PiecewiseConstFn
from .systems import EntropyPair, SystemDef, eigen, speed_range, DET_TOL
from .tracker import FrontSolution, Segment, TrackerConfig, run_engine

ORIENTATIONS = ("forward", "backward", "rightward", "leftward")


class SingularDG(ArithmeticError):
    pass


class InterfaceMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class OrientedProblem:
    """A base system seen in one orientation.

    ``perm[j]`` is the base family of effective family ``j``;
    ``family_map[g]`` is the base wave group of effective group ``g``.
    """

    orientation: str
    base: SystemDef
    effective: SystemDef
    perm: tuple[int, ...]
    family_map: tuple[int, ...]

    @property
    def sideways(self) -> bool:
        return self.orientation in ("rightward", "leftward")

    def wall_families(self) -> tuple[list[int], list[int]]:
        """Base families emitted from the low and the high wall of the engine."""
        m = self.effective.m
        return sorted(self.perm[m:]), sorted(self.perm[:m])


def _speed_map(orientation: str):
    return {"forward": lambda v: v, "backward": lambda v: -v,
            "rightward": lambda v: 1.0 / v, "leftward": lambda v: -1.0 / v}[orientation]


def characteristic_forms(base: SystemDef, families) -> callable:
    """Boundary map ``u -> (l_i(u) u)_i`` over the given base families."""
    idx = list(families)
    if base.linear is not None:
        Lsel = base._anchor.left[idx]
        return lambda u, Lsel=Lsel: np.asarray(u, dtype=float) @ Lsel.T

    def b(u):
        u = np.asarray(u, dtype=float)
        if u.ndim == 1:
            return eigen(base, u).left[idx] @ u
        return np.array([eigen(base, v).left[idx] @ v for v in u.reshape(-1, base.n)]
                        ).reshape(u.shape[:-1] + (len(idx),))

    return b


def _effective(base: SystemDef, orientation: str) -> tuple[SystemDef, tuple, tuple]:
    H, G, DH, DG = base.H, base.G, base.DH, base.DG
    jH, jG = base.jac_H, base.jac_G
    if orientation == "forward":
        return base, tuple(range(base.n)), tuple(range(len(base.groups)))
    if orientation == "backward":
        He, Ge, DHe, DGe = H, (lambda u: -G(u)), jH, (lambda u: -jG(u))
    elif orientation == "rightward":
        He, Ge, DHe, DGe = G, H, jG, jH
    elif orientation == "leftward":
        He, Ge, DHe, DGe = G, (lambda u: -H(u)), jG, (lambda u: -jH(u))
    else:
        raise ValueError(f"unknown orientation {orientation!r}")
    if orientation != "backward" and abs(np.linalg.det(jG(np.zeros(base.n)))) < DET_TOL:
        raise SingularDG("DG is singular at the origin; sideways orientation undefined")
    lam0 = base._anchor.lambdas
    mapped = _speed_map(orientation)(lam0)
    perm = tuple(int(i) for i in np.argsort(mapped, kind="stable"))
    k, p = base.mult
    block = set(range(k, k + p))
    pos = [j for j, i in enumerate(perm) if i in block]
    mult = (pos[0], p) if p > 1 else (0, 1)
    m_e = int(np.sum(mapped < 0))
    linear = None
    if base.linear is not None:
        Hc, Gc = base.linear
        linear = {"backward": (Hc, -Gc), "rightward": (Gc, Hc), "leftward": (Gc, -Hc)}[orientation]
    entropy = None
    if orientation == "backward" and base.entropy is not None:
        e = base.entropy
        entropy = EntropyPair(e.eta, lambda u: -e.q(u), e.grad_eta, lambda u: -e.grad_q(u))
    eff = SystemDef(
        name=f"{base.name}@{orientation}", n=base.n, H=He, G=Ge, r_ball=base.r_ball, m=m_e,
        mult=mult, b1=base.b1, b2=base.b2, DH=DHe, DG=DGe, entropy=entropy, linear=linear,
        origin=base.origin,
        meta={"identity_H": orientation == "backward" and bool(base.meta.get("identity_H")),
              "base": base.name, "orientation": orientation})
    # default wall maps: characteristic forms of the families each wall emits
    low = sorted(perm[m_e:])
    high = sorted(perm[:m_e])
    eff = replace(eff, b1=characteristic_forms(base, low), b2=characteristic_forms(base, high))
    fmap = tuple(base.group_of(perm[idx[0]]) for idx in eff.groups)
    return eff, perm, fmap


def transpose_system(sys: SystemDef, sign: int = 1) -> SystemDef:
    """System with the roles of t and x exchanged: time flux ``G``, flux ``sign*H``.

    Eigenvalues are reciprocals of the base ones (negated for ``sign=-1``);
    eigenvectors are inherited.  Default boundary maps are the characteristic
    forms ``l_i(u) u`` of the families leaving each wall.
    """
    eff, _, _ = _effective(sys, "rightward" if sign > 0 else "leftward")
    return eff


def oriented(base: SystemDef, orientation: str, b_low=None, b_high=None) -> OrientedProblem:
    """Build the problem for ``orientation``; wall maps default as in
    :func:`transpose_system` (forward keeps the base maps)."""
    eff, perm, fmap = _effective(base, orientation)
    eff = eff.with_boundary(b_low, b_high)
    return OrientedProblem(orientation, base, eff, perm, fmap)


def _transform(orientation: str, at: float):
    if orientation == "forward":
        return np.eye(2), np.array([at, 0.0])
    if orientation == "backward":
        return np.array([[-1.0, 0.0], [0.0, 1.0]]), np.array([at, 0.0])
    if orientation == "rightward":
        return np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([0.0, at])
    return np.array([[0.0, 1.0], [-1.0, 0.0]]), np.array([0.0, at])


def _to_engine(f, span: float, flip: bool, dim: int):
    if isinstance(f, PiecewiseConstFn):
        return f.affine(0.0, span, flip)
    return bvfun.PiecewiseConstFn.constant(0.0, span, np.atleast_1d(np.asarray(f, dtype=float)))


def solve_oriented(problem: OrientedProblem, initial: PiecewiseConstFn, g_low, g_high,
                   span: float, eps: float, cfg: TrackerConfig | None = None,
                   at: float = 0.0) -> FrontSolution:
    """Epsilon-solution of ``problem`` expressed in physical coordinates.

    ``initial`` lives on the engine's spatial axis: x for forward/backward,
    t for sideways runs.  ``at`` is where it is imposed (start time, final
    time, or the x-position of the initial line).  ``g_low``/``g_high`` are
    wall data as functions of the physical evolution coordinate over the
    ``span`` covered by the run (constants allowed); they are the values of
    the effective wall maps.
    """
    o = problem.orientation
    flip = o in ("backward", "leftward")
    e = problem.effective
    if flip:
        lo, hi = at - span, at
    else:
        lo, hi = at, at + span
    for g in (g_low, g_high):
        if isinstance(g, PiecewiseConstFn) and (abs(g.a - lo) > 1e-12 or abs(g.b - hi) > 1e-12):
            raise bvfun.DomainMismatch(f"wall data on [{g.a}, {g.b}], expected [{lo}, {hi}]")
    g1 = _to_engine(g_low, span, flip, e.n - e.m)
    g2 = _to_engine(g_high, span, flip, e.m)
    A, c = _transform(o, at)
    if problem.sideways:
        t_range, x_range = (initial.a, initial.b), (lo, hi)
    else:
        t_range, x_range = (lo, hi), (initial.a, initial.b)
    sol = run_engine(e, initial, g1, g2, span, eps, cfg, base=problem.base, transform=(A, c),
                     family_map=problem.family_map, orientation=o, t_range=t_range,
                     x_range=x_range)
    sol.meta["problem"] = problem
    sol.meta["oriented_data"] = (initial, g_low, g_high)
    return sol


def engine_traces(sol: FrontSolution, orientation: str) -> tuple[PiecewiseConstFn, ...]:
    """Initial line, low wall and high wall traces in the engine's sense."""
    if orientation == "forward":
        return sol.trace("initial"), sol.trace("left"), sol.trace("right")
    if orientation == "backward":
        return sol.trace("final"), sol.trace("left"), sol.trace("right")
    if orientation == "rightward":
        return sol.trace("left"), sol.trace("initial"), sol.trace("final")
    return sol.trace("right"), sol.trace("initial"), sol.trace("final")


@dataclass(frozen=True)
class OrientedCompliance:
    rh_max: float
    np_max: float
    initial_l1: float
    low_l1: float
    high_l1: float
    epsilon: float

    @property
    def ok(self) -> bool:
        e = self.epsilon
        return (self.rh_max <= 1e-9 and self.np_max <= e and self.initial_l1 <= e
                and self.low_l1 <= e and self.high_l1 <= e)


def oriented_compliance(sol: FrontSolution) -> OrientedCompliance:
    """Epsilon-solution clauses of an oriented run, checked against its own data."""
    from .tracker import compliance

    problem: OrientedProblem = sol.meta["problem"]
    initial, g_low, g_high = sol.meta["oriented_data"]
    e = problem.effective
    tr0, trl, trh = engine_traces(sol, problem.orientation)
    base_rep = compliance(sol, None, None, None)

    def wall_err(tr, bmap, g):
        if isinstance(g, PiecewiseConstFn):
            return bvfun.l1_dist(tr.map(bmap), g)
        gg = PiecewiseConstFn.constant(tr.a, tr.b, g)
        return bvfun.l1_dist(tr.map(bmap), gg)

    return OrientedCompliance(base_rep.rh_max, base_rep.np_max,
                              bvfun.l1_dist(tr0, initial), wall_err(trl, e.b1, g_low),
                              wall_err(trh, e.b2, g_high), sol.epsilon)


# -- gluing --------------------------------------------------------------------------------
def glue(u_l: FrontSolution, u_r: FrontSolution, glue_tol: float | None = None) -> FrontSolution:
    """Union of two solutions sharing the interface ``x = x_m``.

    Interface traces must agree to ``glue_tol`` (default five times the
    larger epsilon) in L1; residual mismatches are recorded as zero-speed
    ``weld`` segments carrying the two one-sided states.
    """
    xm = u_l.x_range[1]
    if abs(u_r.x_range[0] - xm) > 1e-12:
        raise InterfaceMismatch(f"halves do not meet: {u_l.x_range} and {u_r.x_range}")
    if u_l.t_range != u_r.t_range:
        raise InterfaceMismatch(f"time ranges differ: {u_l.t_range} vs {u_r.t_range}")
    eps = u_l.epsilon + u_r.epsilon
    tol = 5.0 * max(u_l.epsilon, u_r.epsilon) if glue_tol is None else glue_tol
    a_l = u_l.column(xm, -1)
    a_r = u_r.column(xm, 1)
    gap = bvfun.l1_dist(a_l, a_r)
    if gap > tol:
        raise InterfaceMismatch(f"interface traces differ by {gap:.3e} > {tol:.3e}")
    shift = max((s.id for s in u_l.segments), default=-1) + 1
    segs = list(u_l.segments) + [replace(s, id=s.id + shift) for s in u_r.segments]
    next_id = max((s.id for s in segs), default=-1) + 1
    br = np.union1d(a_l.breaks, a_r.breaks)
    lefts = np.concatenate([[a_l.a], br])
    rights = np.concatenate([br, [a_l.b]])
    vl = a_l.values[np.searchsorted(a_l.breaks, lefts, side="right")]
    vr = a_r.values[np.searchsorted(a_r.breaks, lefts, side="right")]
    welds = 0.0
    for lo_t, hi_t, ul, ur in zip(lefts, rights, vl, vr):
        jump = float(np.linalg.norm(ur - ul))
        if jump > 0:
            welds += jump * (hi_t - lo_t)
            segs.append(Segment(next_id, "weld", -1, 0, float(lo_t), xm, float(hi_t), xm, 0.0,
                                ul, ur))
            next_id += 1
    segs.sort(key=lambda s: (s.t0, s.id))
    meta = {"weld_mass": welds, "interface_gap": gap, "halves": (u_l, u_r)}
    return FrontSolution(u_l.sys, u_l.t_range, (u_l.x_range[0], u_r.x_range[1]), tuple(segs),
                         eps, tuple(sorted(u_l.events + u_r.events, key=lambda e: (e.t, e.x))),
                         u_l.background, "glued", max(u_l.np_max, u_r.np_max),
                         max(u_l.lambda_hat, u_r.lambda_hat), meta)


# -- determinate domains ------------------------------------------------------------------------
@dataclass(frozen=True)
class RegionReport:
    times: np.ndarray
    distances: np.ndarray

    @property
    def max(self) -> float:
        return float(self.distances.max(initial=0.0))


def region_distance(sol_a: FrontSolution, sol_b: FrontSolution, interval, times) -> RegionReport:
    """L1 distance of time slices restricted to ``interval(t) = (lo, hi)``."""
    out = []
    for t in times:
        lo, hi = interval(t)
        if not hi - lo > 1e-12:
            out.append(0.0)
            continue
        fa = sol_a.sample(t).restrict(lo, hi)
        fb = sol_b.sample(t).restrict(lo, hi)
        out.append(bvfun.l1_dist(fa, fb))
    return RegionReport(np.asarray(times, dtype=float), np.array(out))


def determinate_triangle(sol_a: FrontSolution, sol_b: FrontSolution, corner: str,
                         x_pt: float, tau_hat: float | None = None,
                         slices: int = 20) -> RegionReport:
    """Per-slice L1 distance on a determinate triangle.

    ``corner='left'``: the triangle over ``(x_a, x_pt)`` whose slanted side
    travels left at the fastest negative speed; ``'right'``: the triangle
    over ``(x_pt, x_b)`` closing at the fastest positive speed.
    """
    sys = sol_a.sys
    xa, xb = sol_a.x_range
    ta, tb = sol_a.t_range
    if not (xa <= x_pt <= xb):
        from .tracker import OutOfDomain
        raise OutOfDomain(f"x={x_pt} outside [{xa}, {xb}]")
    lo_s, hi_s = speed_range(sys)
    if corner == "left":
        tau = tau_hat if tau_hat is not None else (x_pt - xa) / abs(lo_s[0])
        interval = lambda t: (xa, xa + (x_pt - xa) * (tau - (t - ta)) / tau)
    elif corner == "right":
        tau = tau_hat if tau_hat is not None else (xb - x_pt) / hi_s[-1]
        interval = lambda t: (x_pt + (xb - x_pt) * (t - ta) / tau, xb)
    else:
        raise ValueError(f"corner must be 'left' or 'right', not {corner!r}")
    t_end = min(ta + tau, tb)
    times = ta + (t_end - ta) * (np.arange(slices) + 0.5) / slices
    return region_distance(sol_a, sol_b, interval, times)
