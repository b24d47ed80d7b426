import numpy as np
import pytest

from ldcontrol import bvfun
from ldcontrol.bvfun import PiecewiseConstFn
from ldcontrol.control import (ControlSpec, PhaseFailed, RankCondition, TimeTooShort,
                               check_rank, interface_history, min_control_time, resimulate,
                               run_control)
from ldcontrol.directional import region_distance
from ldcontrol.systems import eigen, gallery
from ldcontrol.tracker import TrackerConfig, compliance

from conftest import step

EPS = 1e-3
UBAR2 = step(1 / 3, np.full(2, 0.04 / np.sqrt(2)))
U1_2 = step(2 / 3, np.array([-1.0, 1.0]) * 0.03 / np.sqrt(2))


def test_thresholds_linear2():
    sys = gallery("linear2")
    two = min_control_time(sys, "two_sided")
    assert two.at_origin == pytest.approx(1.0) and two.T1 == pytest.approx(1.0)
    one = min_control_time(sys, "one_sided")
    assert one.at_origin == pytest.approx(1.5) and one.over_ball == pytest.approx(1.5)
    assert min_control_time(sys, "two_sided", L=2.0).at_origin == pytest.approx(2.0)


def test_thresholds_chaplygin_ball():
    two = min_control_time(gallery("chaplygin"), "two_sided")
    assert two.at_origin == pytest.approx(1.0, abs=1e-9)
    assert two.over_ball > 1.0
    assert two.over_ball == pytest.approx(1.333, abs=0.01)
    with pytest.raises(ValueError):
        min_control_time(gallery("linear2"), "three_sided")


@pytest.mark.parametrize("mode,T", [("two_sided", 1.5), ("one_sided", 2.0)])
def test_equilibrium_controls(mode, T):
    sys = gallery("linear2")
    res = run_control(sys, ControlSpec(mode, None, T, EPS))
    assert len(res.certificate.segments) == 0
    for name, bmap in (("g1", sys.b1), ("g2", sys.b2)):
        g = res.controls[name]
        assert g.ncells == 1
        np.testing.assert_allclose(g.values[0], bmap(np.zeros(2)), atol=1e-15)
    assert res.report.final_l1 == 0.0 and res.report.resim_final_l1 == 0.0


def test_equilibrium_reduced_mode():
    sys = gallery("linear3_mult2")
    res = run_control(sys, ControlSpec("two_sided_less", None, 3.2, EPS))
    assert res.report.final_l1 == 0.0
    assert res.controls["g2_hat"].ncells == 1 and res.g1.ncells == 1


@pytest.mark.parametrize("target", [None, U1_2])
def test_two_sided_linear2(target):
    sys = gallery("linear2")
    res = run_control(sys, ControlSpec("two_sided", UBAR2, 1.5, EPS, u1=target))
    assert res.report.resim_final_l1 <= 1e-2
    assert res.report.initial_l1 <= EPS
    cert = res.certificate
    left = cert.trace("left").map(sys.b1)
    right = cert.trace("right").map(sys.b2)
    assert bvfun.l1_dist(left, res.g1) == 0.0 and bvfun.l1_dist(right, res.g2) == 0.0
    u1 = res.u1
    assert compliance(cert, res.ubar, res.g1, res.g2).ok
    assert bvfun.l1_dist(cert.trace("final"), u1) <= 1e-12


def test_two_sided_forward_phase_coincides_on_triangle():
    sys = gallery("linear2")
    res = run_control(sys, ControlSpec("two_sided", UBAR2, 1.5, EPS, u1=U1_2))
    uf = res.phases["forward"]
    T1 = res.times.T1
    times = np.linspace(0.01, T1 - 0.01, 15)
    rep = region_distance(uf, res.certificate, lambda t: (t / (2 * T1), 0.5), times)
    assert rep.max <= 2 * EPS


def test_two_sided_multiplicity():
    sys = gallery("linear3_mult2")
    ub = step(0.4, [0.01, -0.02, 0.015])
    u1 = step(0.6, [-0.01, 0.01, 0.02])
    res = run_control(sys, ControlSpec("two_sided", ub, 1.5, EPS, u1=u1))
    assert res.report.resim_final_l1 <= 1e-2
    groups = {s.family for s in res.certificate.segments if s.kind == "physical"}
    assert any(len(sys.groups[g]) == 2 for g in groups)


def test_one_sided_linear2():
    sys = gallery("linear2")
    res = run_control(sys, ControlSpec("one_sided", UBAR2, 2.0, EPS))
    assert res.report.resim_final_l1 <= 1e-2
    assert res.report.given_l1 <= EPS
    np.testing.assert_allclose(res.g1.values, [sys.b1(np.zeros(2))], atol=1e-15)
    with pytest.raises(TimeTooShort, match="1.5"):
        run_control(sys, ControlSpec("one_sided", UBAR2, 1.2, EPS))


def test_forced_short_horizon_misses_target():
    sys = gallery("linear2")
    good = run_control(sys, ControlSpec("one_sided", UBAR2, 2.0, EPS, u1=U1_2))
    bad = run_control(sys, ControlSpec("one_sided", UBAR2, 1.2, EPS, u1=U1_2, force=True))
    assert bad.report.resim_final_l1 >= 10 * good.report.resim_final_l1
    assert bad.report.resim_final_l1 > 1e-4
    assert any("forced" in n for n in bad.report.notes)


def test_reduced_mode_given_data():
    sys = gallery("linear3_mult2")
    ub = step(0.4, [0.01, -0.02, 0.015])
    u1 = step(0.6, [-0.01, 0.01, 0.02])
    gt = sys.b2(np.zeros(3))[:1] + 0.005
    res = run_control(sys, ControlSpec("two_sided_less", ub, 3.2, EPS, u1=u1, given=gt))
    assert res.report.resim_final_l1 <= 1e-2
    assert res.report.given_l1 <= EPS
    right = res.phases["resimulate"].trace("right").map(sys.b2)
    assert bvfun.l1_dist(right.map(lambda v: v[:1]),
                         PiecewiseConstFn.constant(0, 3.2, gt)) <= EPS


def test_rank_conditions():
    check_rank(gallery("linear2"), "one_sided")
    sys = gallery("linear3_mult2")
    L = eigen(sys, np.zeros(3)).left
    bad = sys.with_boundary(b2=lambda u: np.asarray(u, dtype=float) @ L[[0, 1]].T)
    with pytest.raises(RankCondition):
        check_rank(bad, "two_sided_less")
    with pytest.raises(RankCondition):
        run_control(bad, ControlSpec("two_sided_less", None, 3.2, EPS))


def test_phase_errors_are_tagged():
    sys = gallery("linear2")
    spec = ControlSpec("two_sided", UBAR2, 1.5, EPS, cfg=TrackerConfig(delta=1e-3),
                       parallel=False)
    with pytest.raises(PhaseFailed) as exc:
        run_control(sys, spec)
    assert exc.value.phase == "forward"


def test_interface_history_bridge():
    early = PiecewiseConstFn.constant(0, 1, [0.0, 0.0])
    late = PiecewiseConstFn.constant(2, 3, [0.01, -0.01])
    a = interface_history(early, late, 3.0, 1.5, 1e-3)
    assert (a.a, a.b) == (0.0, 3.0)
    jumps = np.linalg.norm(np.diff(a.values, axis=0), axis=1)
    assert jumps.max() <= 1e-3 * 1.0001
    assert a.tv() == pytest.approx(np.linalg.norm([0.01, -0.01]), rel=1e-9)
    np.testing.assert_allclose(a.value_at(0.5), 0.0)
    np.testing.assert_allclose(a.value_at(2.5), [0.01, -0.01])


def test_resimulate_matches_report():
    sys = gallery("triangular_ld")
    res = run_control(sys, ControlSpec("two_sided", UBAR2, 1.5, EPS, resimulate=False))
    assert res.report.resim_final_l1 is None
    sol = resimulate(sys, res)
    assert bvfun.l1_dist(sol.trace("final"), res.u1) <= 1e-2


def test_controls_tv_scales_with_data():
    sys = gallery("linear2")
    ratios = []
    for eps in (1e-3, 5e-4):
        res = run_control(sys, ControlSpec("two_sided", UBAR2, 1.5, eps, u1=U1_2))
        ratios.append(res.report.tv_controls / (UBAR2.tv() + U1_2.tv()))
    assert ratios[1] == pytest.approx(ratios[0], rel=0.3)
