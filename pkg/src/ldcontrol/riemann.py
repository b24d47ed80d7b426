"""Wave curves and Riemann solvers for linearly degenerate systems.

Every wave is a contact discontinuity: states on a simple family's integral
curve, or on the contact manifold of the multiple eigenvalue, reached by
composing the flows of its eigenvectors.  Amplitudes are flow parameters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .systems import SystemDef, eigen, group_speed, IMAG_TOL, ComplexSpectrum

CURVE_RTOL = 1e-12
CURVE_ATOL = 1e-14
NEWTON_TOL = 1e-12
NEWTON_MAXIT = 40


class LeftBall(ArithmeticError):
    pass


class CurveStiff(ArithmeticError):
    pass


class NoConvergence(ArithmeticError):
    pass


class BadBoundaryMap(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class Wave:
    group: int
    amplitude: np.ndarray
    speed: float
    uL: np.ndarray
    uR: np.ndarray


@dataclass(frozen=True, eq=False)
class WaveFan:
    waves: tuple[Wave, ...] = ()
    nonphysical_strength: float = 0.0
    u_boundary: np.ndarray | None = field(default=None)

    def __len__(self):
        return len(self.waves)

    def __iter__(self):
        return iter(self.waves)

    def amplitudes(self, sys: SystemDef) -> np.ndarray:
        """Flat amplitude vector indexed by eigen-index (zeros if absent)."""
        out = np.zeros(sys.n)
        for w in self.waves:
            out[list(sys.groups[w.group])] = w.amplitude
        return out


def rh_residual(sys: SystemDef, uL, uR, s: float) -> float:
    return float(np.linalg.norm(sys.G(uR) - sys.G(uL) - s * (sys.H(uR) - sys.H(uL))))


# -- eigenvector fields -------------------------------------------------------
def _right_vector2(M: np.ndarray, i: int) -> np.ndarray:
    a, b, c, d = M[0, 0], M[0, 1], M[1, 0], M[1, 1]
    disc = 0.25 * (a - d) ** 2 + b * c
    if disc < 0:
        raise ComplexSpectrum(f"complex eigenvalues of {M.tolist()}")
    lam = 0.5 * (a + d) + (math.sqrt(disc) if i else -math.sqrt(disc))
    v1 = (b, lam - a)
    v2 = (lam - d, c)
    x, y = v1 if abs(v1[0]) + abs(v1[1]) >= abs(v2[0]) + abs(v2[1]) else v2
    nrm = math.hypot(x, y)
    return np.array([x / nrm, y / nrm])


def _right_vector(sys: SystemDef, u: np.ndarray, i: int) -> np.ndarray:
    M = sys.char_matrix(u)
    if sys.n == 2:
        r = _right_vector2(M, i)
        return r if r @ sys._anchor.right[:, i] >= 0 else -r
    w, V = np.linalg.eig(M)
    if np.max(np.abs(w.imag)) > IMAG_TOL * max(1.0, np.max(np.abs(w.real))):
        raise ComplexSpectrum(f"complex eigenvalues at {u.tolist()}")
    j = np.argsort(w.real, kind="stable")[i]
    r = V[:, j].real
    r = r / np.linalg.norm(r)
    return r if r @ sys._anchor.right[:, i] >= 0 else -r


def _field(sys: SystemDef, i: int):
    k, p = sys.mult
    if p > 1 and k <= i < k + p:
        return lambda u: eigen(sys, u).right[:, i]
    return lambda u: _right_vector(sys, u, i)


def _flow(sys: SystemDef, i: int, u0: np.ndarray, sigma: float, check_ball: bool) -> np.ndarray:
    if sigma == 0.0:
        return u0.copy()
    if sys.linear is not None:
        u = u0 + sigma * sys._anchor.right[:, i]
    else:
        f = _field(sys, i)
        sol = solve_ivp(lambda s, u: f(u), (0.0, sigma), u0, method="DOP853",
                        rtol=CURVE_RTOL, atol=CURVE_ATOL)
        if not sol.success:
            raise CurveStiff(sol.message)
        if check_ball and np.max(np.linalg.norm(sol.y, axis=0)) > sys.r_ball:
            raise LeftBall(f"family {i} curve from {u0.tolist()} leaves the ball")
        u = sol.y[:, -1]
    if check_ball and not sys.in_ball(u):
        raise LeftBall(f"family {i} curve from {u0.tolist()} leaves the ball")
    return u


def contact_curve(sys: SystemDef, i: int, u0, sigma: float, check_ball: bool = True) -> np.ndarray:
    """State reached from ``u0`` along the integral curve of ``r_i``."""
    return _flow(sys, i, np.asarray(u0, dtype=float), float(sigma), check_ball)


def contact_manifold(sys: SystemDef, u0, sigma_vec, check_ball: bool = True) -> np.ndarray:
    """Point of the contact manifold of the multiple eigenvalue through ``u0``.

    ``sigma_vec[j]`` pairs with ``r_{k+j}``; the flows are applied in
    descending index order (highest family first).
    """
    k, p = sys.mult
    sv = np.asarray(sigma_vec, dtype=float).reshape(-1)
    if sv.size != p:
        raise ValueError(f"expected {p} amplitudes")
    u = np.asarray(u0, dtype=float)
    for j in reversed(range(p)):
        u = _flow(sys, k + j, u, float(sv[j]), check_ball)
    return u


def group_flow(sys: SystemDef, g: int, u, amp, inverse: bool = False,
               check_ball: bool = True) -> np.ndarray:
    """Apply wave group ``g`` with amplitude ``amp`` (or undo it)."""
    idx = sys.groups[g]
    amp = np.atleast_1d(np.asarray(amp, dtype=float))
    u = np.asarray(u, dtype=float)
    order = list(reversed(range(len(idx))))
    if inverse:
        order = order[::-1]
        amp = -amp
    for j in order:
        u = _flow(sys, idx[j], u, float(amp[j]), check_ball)
    return u


def compose(sys: SystemDef, u, sigma, groups=None, inverse: bool = False,
            check_ball: bool = True) -> list[np.ndarray]:
    """Chain of states obtained by applying ``groups`` (default all) in order.

    ``sigma`` is indexed by eigen-index.  With ``inverse`` the groups are
    undone in reverse order, which maps the right end of a fan back to its
    left end.
    """
    groups = list(range(len(sys.groups))) if groups is None else list(groups)
    sigma = np.asarray(sigma, dtype=float)
    seq = groups[::-1] if inverse else groups
    states = [np.asarray(u, dtype=float)]
    for g in seq:
        states.append(group_flow(sys, g, states[-1], sigma[list(sys.groups[g])],
                                 inverse=inverse, check_ball=check_ball))
    return states


# -- Newton / Broyden -------------------------------------------------------------
def _broyden(F, x0: np.ndarray, J0: np.ndarray, tol: float, what: str):
    x = x0.copy()
    fx = F(x)
    J = J0.copy()
    nit = 0
    for nit in range(1, NEWTON_MAXIT + 1):
        nf = np.linalg.norm(fx)
        if nf <= tol:
            return x, fx, nit - 1
        try:
            d = -np.linalg.solve(J, fx)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(f"{what}: singular Jacobian") from exc
        step = 1.0
        while True:
            xn = x + step * d
            try:
                fn = F(xn)
                good = np.linalg.norm(fn) < (1 - 1e-4 * step) * nf
            except (ArithmeticError, ValueError):
                good = False
            if good or step < 1e-6:
                break
            step *= 0.5
        if not good:
            raise NoConvergence(f"{what}: line search failed at residual {nf:.3g}")
        s = xn - x
        J = J + np.outer((fn - fx) - J @ s, s) / (s @ s)
        x, fx = xn, fn
    if np.linalg.norm(fx) <= tol:
        return x, fx, nit
    raise NoConvergence(f"{what}: no convergence in {NEWTON_MAXIT} iterations")


def _fan(sys: SystemDef, states, groups, sigma, u_end, min_amp: float) -> WaveFan:
    waves = []
    states = list(states)
    states[-1] = np.asarray(u_end, dtype=float)
    for j, g in enumerate(groups):
        amp = sigma[list(sys.groups[g])]
        if np.max(np.abs(amp)) <= min_amp:
            continue
        uL, uR = states[j], states[j + 1]
        waves.append(Wave(g, amp.copy(), group_speed(sys, g, uL), uL, uR))
    # re-chain states across omitted waves
    for a, b in zip(waves, waves[1:]):
        if a.uR is not b.uL:
            object.__setattr__(b, "uL", a.uR)
    if waves:
        object.__setattr__(waves[0], "uL", states[0])
        object.__setattr__(waves[-1], "uR", np.asarray(u_end, dtype=float))
    return WaveFan(tuple(waves))


def solve_riemann(sys: SystemDef, uL, uR, tol: float = NEWTON_TOL,
                  min_amp: float = 1e-14) -> WaveFan:
    """Exact Riemann solver: contact waves of all families from ``uL`` to ``uR``."""
    uL = np.asarray(uL, dtype=float)
    uR = np.asarray(uR, dtype=float)
    if np.array_equal(uL, uR):
        return WaveFan()
    sd = eigen(sys, 0.5 * (uL + uR))
    sigma0 = sd.left @ (uR - uL)

    def F(s):
        return compose(sys, uL, s)[-1] - uR

    sigma, _, _ = _broyden(F, sigma0, sd.right, tol, "solve_riemann")
    groups = list(range(len(sys.groups)))
    return _fan(sys, compose(sys, uL, sigma), groups, sigma, uR, min_amp)


def _boundary_solve(sys, g, u_inner, groups, bmap, jac, side, tol, min_amp):
    u_inner = np.asarray(u_inner, dtype=float)
    g = np.atleast_1d(np.asarray(g, dtype=float))
    idx = [i for gr in groups for i in sys.groups[gr]]
    if not idx:
        return WaveFan(u_boundary=u_inner)
    sd = eigen(sys, u_inner)
    R = sd.right[:, idx]
    J0 = jac(u_inner) @ R
    if abs(np.linalg.det(J0)) < 1e-10:
        raise BadBoundaryMap(f"boundary determinant degenerate at {u_inner.tolist()}")
    full = np.zeros(sys.n)

    def ub(s):
        full[idx] = s
        if side == "left":
            return compose(sys, u_inner, full, groups, inverse=True)[-1]
        return compose(sys, u_inner, full, groups)[-1]

    def F(s):
        return np.atleast_1d(bmap(ub(s))) - g

    if side == "left":
        J0 = -J0
    s0 = np.zeros(len(idx))
    f0 = F(s0)
    if np.linalg.norm(f0) <= tol:
        return WaveFan(u_boundary=u_inner)
    s, _, _ = _broyden(F, s0 - np.linalg.solve(J0, f0), J0, tol, f"boundary {side}")
    sigma = np.zeros(sys.n)
    sigma[idx] = s
    u_b = ub(s)
    if side == "left":
        states = compose(sys, u_b, sigma, groups)
        fan = _fan(sys, states, groups, sigma, u_inner, min_amp)
    else:
        states = compose(sys, u_inner, sigma, groups)
        fan = _fan(sys, states, groups, sigma, u_b, min_amp)
    return WaveFan(fan.waves, 0.0, u_b)


def solve_boundary_left(sys: SystemDef, g, u_inner, tol: float = NEWTON_TOL,
                        min_amp: float = 1e-14) -> WaveFan:
    """Fan of positive families leaving x=0 so that ``b1(u_b) = g``.

    ``u_b`` (stored as ``fan.u_boundary``) is the wall state; composing the
    fan from ``u_b`` reaches ``u_inner``.
    """
    return _boundary_solve(sys, g, u_inner, sys.positive_groups, sys.b1, sys.jac_b1,
                           "left", tol, min_amp)


def solve_boundary_right(sys: SystemDef, g, u_inner, tol: float = NEWTON_TOL,
                         min_amp: float = 1e-14) -> WaveFan:
    """Fan of negative families leaving x=L so that ``b2(u_b) = g``."""
    return _boundary_solve(sys, g, u_inner, sys.negative_groups, sys.b2, sys.jac_b2,
                           "right", tol, min_amp)
