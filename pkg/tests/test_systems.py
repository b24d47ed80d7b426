import numpy as np
import pytest

from ldcontrol.systems import (CHECKS, GALLERY, ComplexSpectrum, HypothesisViolated,
                               SingularDH, SystemDef, UnknownSystem, ball_samples, eigen,
                               gallery, group_speed, lambdas, speed_range, validate)


def _linear(A, m=1):
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    return SystemDef("custom", n, lambda u: np.asarray(u, dtype=float),
                     lambda u: np.asarray(u, dtype=float) @ A.T, 0.5, m, (0, 1),
                     lambda u: np.asarray(u)[..., m:], lambda u: np.asarray(u)[..., :m])


def test_symmetric_linear_eigenpairs():
    sd = eigen(_linear([[0, 1], [1, 0]]), np.zeros(2))
    np.testing.assert_allclose(sd.lambdas, [-1.0, 1.0], atol=1e-14)
    r1, r2 = sd.right[:, 0], sd.right[:, 1]
    assert abs(abs(r1 @ np.array([1, -1])) / np.sqrt(2) - 1) < 1e-12
    assert abs(abs(r2 @ np.array([1, 1])) / np.sqrt(2) - 1) < 1e-12
    np.testing.assert_allclose(sd.left @ sd.right, np.eye(2), atol=1e-10)


def test_chaplygin_speeds_at_rest():
    np.testing.assert_allclose(lambdas(gallery("chaplygin"), np.zeros(2)), [-1.0, 1.0],
                               atol=1e-9)


def test_tracers_multiplicity_pattern():
    sys = gallery("chaplygin_tracers2")
    np.testing.assert_allclose(lambdas(sys, np.zeros(4)), [-0.7, 0.3, 0.3, 1.3], atol=1e-8)
    assert sys.groups == ((0,), (1, 2), (3,))
    for u in ball_samples(4, sys.r_ball, 40, seed=3):
        lam = lambdas(sys, u)
        assert lam[0] < lam[1] - 0.1 and lam[2] < lam[3] - 0.1
        assert abs(lam[1] - lam[2]) < 1e-7


def test_triangular_eigenvectors_vary():
    sys = gallery("triangular_ld")
    u = np.array([0.0, 0.3])
    sd = eigen(sys, u)
    np.testing.assert_allclose(sd.lambdas, [-1.0, 2.0], atol=1e-9)
    r2 = sd.right[:, 1]
    np.testing.assert_allclose(r2[0] / r2[1], np.cos(0.3) / 3, atol=1e-8)
    assert abs(eigen(sys, np.zeros(2)).right[0, 1] / eigen(sys, np.zeros(2)).right[1, 1]
               - r2[0] / r2[1]) > 1e-3


@pytest.mark.parametrize("name", GALLERY)
def test_gallery_validates(name):
    rep = validate(gallery(name))
    assert rep.ok
    assert set(rep.passed) == set(CHECKS)
    assert rep.gap_c > 0


def test_linear2_gap_near_one():
    assert abs(validate(gallery("linear2")).gap_c - 0.95) < 1e-12


@pytest.mark.parametrize("name", GALLERY)
def test_spectral_data_residuals(name):
    sys = gallery(name)
    for u in ball_samples(sys.n, sys.r_ball, 20, seed=5):
        sd = eigen(sys, u)
        np.testing.assert_allclose(sd.left @ sd.right, np.eye(sys.n), atol=1e-10)
        M = sys.char_matrix(u)
        for i in range(sys.n):
            r = sd.right[:, i]
            assert np.linalg.norm(M @ r - sd.lambdas[i] * r) <= 1e-8 * np.linalg.norm(r)


def test_eigenvectors_continuous_along_path():
    sys = gallery("chaplygin")
    prev = eigen(sys, np.zeros(2)).right
    for s in np.linspace(0, 1, 50):
        cur = eigen(sys, s * np.array([0.15, -0.1])).right
        assert np.all(np.sum(cur * prev, axis=0) > 0.9)
        prev = cur


def test_burgers_fails_linear_degeneracy():
    burgers = SystemDef("burgers", 1, lambda u: np.asarray(u, dtype=float),
                        lambda u: 0.5 * (1.0 + np.asarray(u, dtype=float)) ** 2, 0.2, 0,
                        (0, 1), lambda u: np.asarray(u)[..., :1], lambda u: np.zeros(0))
    rep = validate(burgers, raise_on_failure=False)
    assert not rep.passed["linear_degeneracy"]
    with pytest.raises(HypothesisViolated) as exc:
        validate(burgers)
    assert exc.value.check in CHECKS


def test_moving_background_loses_speed_gap():
    assert validate(gallery("chaplygin"), raise_on_failure=False).passed["speed_gap"]
    moving = gallery("chaplygin", v0=1.0)
    assert not validate(moving, raise_on_failure=False).passed["speed_gap"]


def test_singular_and_complex_errors():
    sing = SystemDef("sing", 2, lambda u: np.zeros_like(np.asarray(u, dtype=float)),
                     lambda u: np.asarray(u, dtype=float), 0.5, 1, (0, 1),
                     lambda u: np.asarray(u)[..., 1:], lambda u: np.asarray(u)[..., :1])
    with pytest.raises(SingularDH):
        sing.char_matrix(np.zeros(2))
    with pytest.raises(ComplexSpectrum):
        lambdas(_linear([[0, 1], [-1, 0]]), np.zeros(2))


def test_unknown_system():
    with pytest.raises(UnknownSystem):
        gallery("euler")


def test_speed_range_brackets_origin():
    sys = gallery("chaplygin")
    lo, hi = speed_range(sys)
    lam0 = lambdas(sys, np.zeros(2))
    assert np.all(lo <= lam0 + 1e-12) and np.all(lam0 <= hi + 1e-12)
    assert hi[0] < 0 < lo[1]
    assert group_speed(sys, 1, np.zeros(2)) == pytest.approx(1.0)


def test_ball_samples_deterministic():
    a = ball_samples(3, 0.5, 30, seed=2)
    np.testing.assert_array_equal(a, ball_samples(3, 0.5, 30, seed=2))
    assert np.all(np.linalg.norm(a, axis=1) <= 0.5 + 1e-15)
    np.testing.assert_array_equal(a[0], np.zeros(3))
