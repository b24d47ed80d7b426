import numpy as np
import pytest
from hypothesis import given, strategies as st

from ldcontrol import verify
from ldcontrol.bvfun import PiecewiseConstFn
from ldcontrol.systems import gallery
from ldcontrol.tracker import evolve
from ldcontrol.verify import (Bump, NoEntropyPair, NoOracle, SupportViolation, cubic_bump,
                              entropy_residual, oracle_compare, residual_report,
                              standard_basis, trace_clauses, weak_residual)

from conftest import step


def _transport(eps=1e-3):
    sys = gallery("linear2")
    ub = step(0.4, [0.01, -0.02])
    g1, g2 = sys.b1(np.zeros(2)), sys.b2(np.zeros(2))
    return sys, evolve(sys, ub, g1, g2, 1.0, eps), ub, g1, g2


def _interaction(eps):
    sys = gallery("triangular_ld")
    ub = PiecewiseConstFn(0, 1, [0.3, 0.6], [[0.02, -0.03], [0.0, 0.0], [-0.01, 0.02]])
    g1, g2 = sys.b1(np.zeros(2)), sys.b2(np.zeros(2))
    return evolve(sys, ub, g1, g2, 1.0, eps)


def test_cubic_bump_shape():
    s = np.linspace(-1.2, 1.2, 241)
    b = cubic_bump(s)
    assert b.max() == pytest.approx(1.0) and b[0] == 0.0 and b[-1] == 0.0
    assert np.all(np.diff(b[s <= 0]) >= -1e-15)
    assert cubic_bump([0.5, -0.5]) == pytest.approx([0.5, 0.5])


def test_standard_basis_inside():
    basis = standard_basis((0, 1), (0, 1))
    assert len(basis) == 50
    assert all(b.inside((0, 1), (0, 1)) for b in basis)


@pytest.mark.parametrize("name", ["linear2", "chaplygin", "triangular_ld"])
def test_zero_solution_residuals(name):
    sys = gallery(name)
    z = np.zeros(sys.n)
    ub = PiecewiseConstFn.constant(0, 1, z)
    sol = evolve(sys, ub, sys.b1(z), sys.b2(z), 1.0, 1e-3)
    assert weak_residual(sol).max == 0.0
    assert entropy_residual(sol) == 0.0
    assert trace_clauses(sol, ub, sys.b1(z), sys.b2(z)).ok


def test_single_contact_is_weak_solution():
    sys, sol, ub, g1, g2 = _transport()
    wr = weak_residual(sol)
    assert wr.max <= 1e-12 and wr.ok


def test_interaction_weak_residual():
    sol = _interaction(1e-3)
    wr = weak_residual(sol)
    assert wr.max <= 5e-3
    assert np.all(np.isfinite(wr.per_bump)) and np.all(wr.per_bump >= 0)


def test_support_violation():
    sys, sol, *_ = _transport()
    with pytest.raises(SupportViolation):
        weak_residual(sol, [Bump(0.5, 0.95, 0.2, 0.2)])


def test_transport_entropy_equality():
    sys, sol, *_ = _transport()
    assert entropy_residual(sol) <= 1e-10


def test_entropy_residual_refines():
    coarse = entropy_residual(_interaction(1e-2))
    fine = entropy_residual(_interaction(1e-3))
    assert fine <= coarse * 1.2 + 1e-12


def test_missing_entropy_pair():
    sys, sol, *_ = _transport()
    from dataclasses import replace
    bare = replace(sol, sys=replace(sys, entropy=None))
    with pytest.raises(NoEntropyPair):
        entropy_residual(bare)


def test_trace_clauses_compliant_and_corrupted():
    sys, sol, ub, g1, g2 = _transport()
    assert trace_clauses(sol, ub, g1, g2).ok
    bad = PiecewiseConstFn(0, 1, [0.5], [g1, g1 + 0.1])
    rep = trace_clauses(sol, ub, bad, g2)
    assert not rep.ok and rep.left_l1 == pytest.approx(0.05, rel=1e-6)


def test_exact_oracle_transport():
    sys, sol, ub, g1, g2 = _transport()
    rep = oracle_compare(sol, "exact")
    assert rep.times.size == 10
    assert rep.max <= 1e-3 + 1e-3 * ub.tv()


def test_exact_oracle_equilibrium():
    sys = gallery("linear3_mult2")
    z = np.zeros(3)
    sol = evolve(sys, PiecewiseConstFn.constant(0, 1, z), sys.b1(z), sys.b2(z), 1.0, 1e-3)
    assert oracle_compare(sol, "exact").max == 0.0


def test_oracle_errors():
    sys, sol, *_ = _transport()
    with pytest.raises(NoOracle):
        oracle_compare(sol, "spectral")
    with pytest.raises(NoOracle):
        oracle_compare(_interaction(1e-2), "exact")


def test_chaplygin_against_finite_volume():
    sys = gallery("chaplygin")
    ub = step(0.5, [0.01, 0.005], [0.0, 0.0])
    u0 = np.zeros(2)
    sol = evolve(sys, ub, sys.b1(u0), sys.b2(u0), 0.8, 1e-3)
    rep = oracle_compare(sol, "fv", times=[0.4, 0.8])
    assert rep.max <= 5e-3


def test_residual_report_serialization(tmp_path):
    sys, sol, *_ = _transport()
    rep = residual_report(sol, slices=10)
    text = rep.to_text()
    assert "weak_residual" in text and "initial_l1" in text
    path = tmp_path / "profiles.csv"
    csv_text = rep.to_csv(path)
    assert path.read_text() == csv_text
    rows = csv_text.strip().splitlines()
    assert rows[0] == "t,tv,lipschitz" and len(rows) == 12
    assert rows[-1].endswith(",")
    assert rep.tv_profile.min() >= 0 and np.all(np.isfinite(rep.lipschitz_profile))


@given(st.floats(-0.02, 0.02), st.floats(-0.02, 0.02), st.floats(0.1, 0.9))
def test_weak_residual_property(a, b, x0):
    sys = gallery("linear2")
    ub = step(x0, [a, b])
    z = np.zeros(2)
    sol = evolve(sys, ub, sys.b1(z), sys.b2(z), 1.0, 1e-3)
    wr = weak_residual(sol)
    assert wr.ok
    assert verify.tv_profile(sol, [0.0, 0.5]).min() >= 0
