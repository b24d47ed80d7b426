"""End-to-end acceptance criteria; each test records one pass/fail line.

The lines are printed in the pytest terminal summary (see ``conftest.py``)
and by running this file directly.
"""
import time

import numpy as np
import pytest

from ldcontrol import bvfun
from ldcontrol.bvfun import PiecewiseConstFn
from ldcontrol.control import ControlSpec, TimeTooShort, min_control_time, run_control
from ldcontrol.directional import determinate_triangle, oriented, solve_oriented
from ldcontrol.riemann import contact_manifold, rh_residual, solve_riemann
from ldcontrol.systems import gallery, lambdas
from ldcontrol.tracker import compliance, evolve
from ldcontrol.verify import entropy_residual, oracle_compare, standard_basis

from conftest import random_pcf, step

RESULTS: dict[int, str] = {}
NOISE = 1e-12
GALLERY = ("linear2", "linear3_mult2", "triangular_ld", "chaplygin", "chaplygin_tracers2")
UBAR_STEP = np.full(2, 0.04 / np.sqrt(2))
U1_STEP = np.array([-1.0, 1.0]) * 0.03 / np.sqrt(2)


def record(k: int, ok: bool, detail: str) -> bool:
    RESULTS[k] = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    return ok


def small_data(sys, rng, size=0.05, jumps=4):
    """Random initial and boundary data whose smallness budget stays below ``size``."""
    n, m = sys.n, sys.m
    z = np.zeros(n)
    while True:
        ub = random_pcf(rng, n, jumps, 1.0)
        d1 = random_pcf(rng, n - m, 2, 1.0) if n - m else None
        d2 = random_pcf(rng, m, 2, 1.0) if m else None
        lam = ub.tv() + np.linalg.norm(ub.left_value())
        lam += (d1.tv() if d1 else 0) + (d2.tv() if d2 else 0)
        scale = rng.uniform(0.5, 0.95) * size / lam
        ub = ub.map(lambda v: v * scale)
        b1z, b2z = sys.b1(z), sys.b2(z)
        g1 = (d1.map(lambda v: b1z + v * scale) if d1
              else PiecewiseConstFn.constant(0, 1, b1z))
        g2 = (d2.map(lambda v: b2z + v * scale) if d2
              else PiecewiseConstFn.constant(0, 1, b2z))
        b = bvfun.budget(ub, g1, g2, sys.b1, sys.b2)
        if b.total <= size:
            return ub, g1, g2, b.total


def test_criterion_1_compliance():
    rng = np.random.default_rng(11)
    worst, slow, fails = 0.0, 0.0, []
    for name in GALLERY:
        sys = gallery(name)
        ub, g1, g2, lam = small_data(sys, rng)
        for eps in (1e-2, 1e-3):
            t0 = time.perf_counter()
            sol = evolve(sys, ub, g1, g2, 1.0, eps)
            rep = compliance(sol, ub, g1, g2)
            slow = max(slow, time.perf_counter() - t0)
            worst = max(worst, rep.rh_max)
            if not rep.ok:
                fails.append(f"{name}@{eps:g}")
    ok = not fails and slow <= 10.0
    assert record(1, ok, f"10 cases, max RH residual {worst:.1e}, slowest {slow:.1f} s"
                  + (f", failing {fails}" if fails else ""))


def test_criterion_2_linear_oracle():
    rng = np.random.default_rng(12)
    t0 = time.perf_counter()
    ratios = []
    for name in ("linear2", "linear3_mult2"):
        sys = gallery(name)
        eps = 1e-3
        ub, g1, g2, _ = small_data(sys, rng)
        sol = evolve(sys, ub, g1, g2, 1.0, eps)
        rep = oracle_compare(sol, "exact")
        tv = ub.tv() + g1.tv() + g2.tv()
        ratios.append(rep.max / (eps + 2 * eps * tv))
        assert rep.times.size == 10
    secs = time.perf_counter() - t0
    ok = max(ratios) <= 1.0 and secs <= 5.0
    assert record(2, ok, f"max error / (eps + 2 mesh TV) = {max(ratios):.1e}, {secs:.1f} s")


def _orientation_gap(name, eps):
    sys = gallery(name)
    rng = np.random.default_rng(3)
    u0 = PiecewiseConstFn.from_cells(0, 1, np.sort(rng.uniform(0.05, 0.95, 4)),
                                     rng.uniform(-1, 1, (5, 2)) * 0.02)
    z = np.zeros(2)
    uf = evolve(sys, u0, sys.b1(z), sys.b2(z), 1.0, eps)
    pr = oriented(sys, "rightward")
    ur = solve_oriented(pr, uf.trace("left"), u0.map(pr.effective.b1),
                        uf.trace("final").map(pr.effective.b2), 1.0, eps)
    return determinate_triangle(uf, ur, "left", 1.0).max


def test_criterion_3_orientation():
    t0 = time.perf_counter()
    parts, ok = [], True
    for name in ("linear2", "triangular_ld"):
        cs = []
        for eps in (1e-3, 5e-4):
            d = _orientation_gap(name, eps)
            ok &= d <= 2 * eps
            # constant in front of the mesh, measured above the round-off floor
            cs.append(max(d - NOISE, 0.0) / eps)
        hi = max(cs)
        ok &= hi == 0.0 or abs(cs[0] - cs[1]) <= 0.3 * hi
        parts.append(f"{name} C = {cs[0]:.2g}/{cs[1]:.2g}")
    secs = time.perf_counter() - t0
    ok &= secs <= 30.0
    assert record(3, ok, f"{', '.join(parts)} (noise floor {NOISE:g}), {secs:.1f} s")


def _sampled_step(x0, v):
    v = np.asarray(v, dtype=float)
    return lambda x: np.where(np.asarray(x)[:, None] < x0, v[None, :], 0.0 * v[None, :])


def test_criterion_4_two_sided():
    sys = gallery("linear2")
    t0 = time.perf_counter()
    ub = _sampled_step(1 / 3, UBAR_STEP)
    ok, parts = True, []
    for label, u1, exact in (("u1=0", None, PiecewiseConstFn.constant(0, 1, np.zeros(2))),
                             ("u1 step", _sampled_step(2 / 3, U1_STEP), step(2 / 3, U1_STEP))):
        errs = []
        for eps in (1e-3, 5e-4):
            res = run_control(sys, ControlSpec("two_sided", ub, 1.5, eps, u1=u1))
            errs.append(bvfun.l1_dist(res.phases["resimulate"].trace("final"), exact))
        ok &= errs[0] <= 1e-2
        if errs[0] > NOISE:
            ratio = errs[1] / errs[0]
            ok &= 0.35 <= ratio <= 0.65
            parts.append(f"{label} {errs[0]:.2e} -> {errs[1]:.2e} (ratio {ratio:.2f})")
        else:
            parts.append(f"{label} {errs[0]:.1e}, {errs[1]:.1e} (at noise floor)")
    secs = time.perf_counter() - t0
    ok &= secs <= 60.0
    assert record(4, ok, "; ".join(parts) + f", {secs:.1f} s")


def test_criterion_5_one_sided():
    sys = gallery("linear2")
    t0 = time.perf_counter()
    ub, target = step(1 / 3, UBAR_STEP), step(2 / 3, U1_STEP)
    assert min_control_time(sys, "one_sided").at_origin == pytest.approx(1.5)
    res = run_control(sys, ControlSpec("one_sided", ub, 2.0, 1e-3))
    good = run_control(sys, ControlSpec("one_sided", ub, 2.0, 1e-3, u1=target))
    with pytest.raises(TimeTooShort):
        run_control(sys, ControlSpec("one_sided", ub, 1.2, 1e-3, u1=target))
    bad = run_control(sys, ControlSpec("one_sided", ub, 1.2, 1e-3, u1=target, force=True))
    e0, e2, e12 = (r.report.resim_final_l1 for r in (res, good, bad))
    left = good.phases["resimulate"].trace("left").map(sys.b1)
    g_err = bvfun.l1_dist(left, PiecewiseConstFn.constant(0, 2.0, sys.b1(np.zeros(2))))
    secs = time.perf_counter() - t0
    ok = max(e0, e2) <= 1e-2 and g_err <= 1e-3 and e12 >= 10 * max(e2, NOISE) and secs <= 60
    assert record(5, ok, f"T=2 error {max(e0, e2):.1e}, left trace {g_err:.1e}, "
                         f"forced T=1.2 error {e12:.2e}, {secs:.1f} s")


def test_criterion_6_reduced():
    sys = gallery("linear3_mult2")
    t0 = time.perf_counter()
    T = 2.0
    assert T > min_control_time(sys, "two_sided_less").over_ball
    ub = step(0.4, [0.01, -0.02, 0.015])
    u1 = step(0.6, [-0.01, 0.01, 0.02])
    gt = sys.b2(np.zeros(3))[:1] + 0.005
    res = run_control(sys, ControlSpec("two_sided_less", ub, T, 1e-3, u1=u1, given=gt))
    right = res.phases["resimulate"].trace("right").map(lambda v: sys.b2(v)[:1])
    g_err = bvfun.l1_dist(right, PiecewiseConstFn.constant(0, T, gt))
    e = res.report.resim_final_l1
    secs = time.perf_counter() - t0
    ok = e <= 1e-2 and g_err <= 1e-3 and secs <= 90
    assert record(6, ok, f"final error {e:.1e}, given trace {g_err:.1e}, {secs:.1f} s")


def test_criterion_7_entropy():
    rng = np.random.default_rng(17)
    ok, worst = True, 0.0
    for name in GALLERY:
        sys = gallery(name)
        ub, g1, g2, _ = small_data(sys, rng, 0.03)
        res = [entropy_residual(evolve(sys, ub, g1, g2, 1.0, eps)) for eps in (1e-2, 1e-3, 1e-4)]
        # phi is normalized to sup 1, T = 1
        ok &= res[1] <= 1e-2
        ok &= all(b <= 1.2 * a + NOISE for a, b in zip(res, res[1:]))
        worst = max(worst, *res)
    assert record(7, ok, f"max entropy residual {worst:.1e} over 5 systems x 3 eps "
                         f"(monotone within 20% above noise floor {NOISE:g})")


def _well_posedness(eps, seeds):
    cs, lips, stabs = [], [], []
    times = np.linspace(0.0, 1.0, 11)
    for seed in seeds:
        rng = np.random.default_rng(seed)
        sys = gallery(("linear2", "triangular_ld", "chaplygin")[seed % 3])
        ub, g1, g2, lam = small_data(sys, rng, 0.04)
        sol = evolve(sys, ub, g1, g2, 1.0, eps)
        prof = [sol.sample(t) for t in times]
        cs.append(max(p.tv() for p in prof) / lam)
        lips.append(max(bvfun.l1_dist(b, a) / 0.1 for a, b in zip(prof, prof[1:])) / lam)
        if seed % 5 == 0:
            dv = random_pcf(rng, sys.n, 3, 2e-3)
            vb = bvfun.combine(ub, dv, np.add)
            other = evolve(sys, vb, g1, g2, 1.0, eps)
            gap = max(bvfun.l1_dist(sol.sample(t), other.sample(t)) for t in times)
            stabs.append(gap / bvfun.l1_dist(ub, vb))
    return max(cs), max(lips), max(stabs)


def test_criterion_8_well_posedness():
    t0 = time.perf_counter()
    seeds = range(100)
    a = _well_posedness(1e-2, seeds)
    b = _well_posedness(1e-3, seeds)
    stable = all(abs(x - y) <= 0.3 * max(x, y) for x, y in zip(a, b))
    secs = time.perf_counter() - t0
    ok = stable and all(np.isfinite(a + b))
    assert record(8, ok, "C_tv %.2f/%.2f, C_lip %.2f/%.2f, C_stab %.2f/%.2f (eps 1e-2/1e-3), "
                  "%.0f s" % (a[0], b[0], a[1], b[1], a[2], b[2], secs))


def test_criterion_9_manifold():
    sys = gallery("chaplygin_tracers2")
    k, p = sys.mult
    rng = np.random.default_rng(19)
    rh, rt = 0.0, 0.0
    for _ in range(50):
        uL = rng.uniform(-1, 1, sys.n) * 0.03
        sv = rng.uniform(-1, 1, p) * 0.02
        uR = contact_manifold(sys, uL, sv)
        rh = max(rh, rh_residual(sys, uL, uR, lambdas(sys, uL)[k]))
        amps = solve_riemann(sys, uL, uR).amplitudes(sys)
        expect = np.zeros(sys.n)
        expect[k:k + p] = sv
        rt = max(rt, float(np.abs(amps - expect).max()))
    ok = rh <= 1e-9 and rt <= 1e-8
    assert record(9, ok, f"50 jumps, max RH residual {rh:.1e}, round trip {rt:.1e}")


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                pass
    for k in sorted(RESULTS):
        print(RESULTS[k])
