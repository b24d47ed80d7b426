"""Hyperbolic systems ``d_t H(u) + d_x G(u) = 0``: spectral data, structural
checks and a gallery of linearly degenerate test systems.

States are deviations from an equilibrium placed at the origin; all maps
are vectorized over leading axes (``u[..., n]``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.stats import qmc


class SingularDH(ArithmeticError):
    pass


class ComplexSpectrum(ArithmeticError):
    pass


class UnknownSystem(KeyError):
    pass


class HypothesisViolated(AssertionError):
    def __init__(self, check: str, u, margin: float, report=None):
        self.check, self.u, self.margin, self.report = check, np.asarray(u), margin, report
        super().__init__(f"structural check {check!r} failed at "
                         f"u={np.round(self.u, 6).tolist()} (margin {margin:.3g})")


DET_TOL = 1e-10
CHECKS = ("hyperbolicity", "constant_multiplicity", "speed_gap", "linear_degeneracy",
          "entropy_pair", "boundary_rank")
IMAG_TOL = 1e-8


def fd_jacobian(f: Callable, u: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order central-difference Jacobian of ``f`` at a single state."""
    u = np.asarray(u, dtype=float)
    f0 = np.atleast_1d(f(u))
    J = np.empty((f0.size, u.size))
    for j in range(u.size):
        e = np.zeros_like(u)
        e[j] = h
        J[:, j] = (-np.atleast_1d(f(u + 2 * e)) + 8 * np.atleast_1d(f(u + e))
                   - 8 * np.atleast_1d(f(u - e)) + np.atleast_1d(f(u - 2 * e))) / (12 * h)
    return J


@dataclass(frozen=True, eq=False)
class EntropyPair:
    """Convex entropy ``eta`` with flux ``q`` and their gradients."""

    eta: Callable
    q: Callable
    grad_eta: Callable | None = None
    grad_q: Callable | None = None


@dataclass(frozen=True, eq=False)
class SystemDef:
    """A system with boundary maps ``b1`` (at x=0) and ``b2`` (at x=L).

    ``mult = (k, p)``: the multiple eigenvalue occupies (0-based) indices
    ``k .. k+p-1``; ``p == 1`` means strictly hyperbolic.  ``m`` is the
    number of negative eigenvalues.
    """

    name: str
    n: int
    H: Callable
    G: Callable
    r_ball: float
    m: int
    mult: tuple[int, int]
    b1: Callable
    b2: Callable
    DH: Callable | None = None
    DG: Callable | None = None
    entropy: EntropyPair | None = None
    linear: tuple[np.ndarray, np.ndarray] | None = None
    origin: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    # -- Jacobians --------------------------------------------------------
    @property
    def fd_step(self) -> float:
        return 1e-5 * self.r_ball

    def jac_H(self, u) -> np.ndarray:
        if self.DH is not None:
            return np.asarray(self.DH(np.asarray(u, dtype=float)), dtype=float)
        return fd_jacobian(self.H, u, self.fd_step)

    def jac_G(self, u) -> np.ndarray:
        if self.DG is not None:
            return np.asarray(self.DG(np.asarray(u, dtype=float)), dtype=float)
        return fd_jacobian(self.G, u, self.fd_step)

    def jac_b1(self, u) -> np.ndarray:
        return fd_jacobian(self.b1, u, self.fd_step).reshape(self.n - self.m, self.n)

    def jac_b2(self, u) -> np.ndarray:
        return fd_jacobian(self.b2, u, self.fd_step).reshape(self.m, self.n)

    def char_matrix(self, u) -> np.ndarray:
        """``(DH)^{-1} DG`` at ``u``."""
        if self.meta.get("identity_H"):
            return self.jac_G(u)
        dh = self.jac_H(u)
        if abs(np.linalg.det(dh)) < DET_TOL:
            raise SingularDH(f"DH singular at {np.asarray(u).tolist()}")
        return np.linalg.solve(dh, self.jac_G(u))

    # -- family structure -------------------------------------------------
    @property
    def groups(self) -> tuple[tuple[int, ...], ...]:
        """Wave families as index groups, in ascending speed order."""
        k, p = self.mult
        out = [(i,) for i in range(k)]
        out.append(tuple(range(k, k + p)))
        out += [(i,) for i in range(k + p, self.n)]
        return tuple(out)

    def group_of(self, i: int) -> int:
        for g, idx in enumerate(self.groups):
            if i in idx:
                return g
        raise IndexError(i)

    @property
    def negative_groups(self) -> list[int]:
        return [g for g, idx in enumerate(self.groups) if idx[-1] < self.m]

    @property
    def positive_groups(self) -> list[int]:
        return [g for g, idx in enumerate(self.groups) if idx[0] >= self.m]

    def with_boundary(self, b1=None, b2=None) -> SystemDef:
        return replace(self, b1=b1 or self.b1, b2=b2 or self.b2)

    def in_ball(self, u, frac: float = 1.0) -> bool:
        return float(np.linalg.norm(u)) <= frac * self.r_ball

    @cached_property
    def _anchor(self):
        return _raw_eigen(self, np.zeros(self.n), None)

    def eigen(self, u) -> SpectralData:
        return eigen(self, u)

    def __repr__(self) -> str:
        return f"SystemDef({self.name!r}, n={self.n}, m={self.m}, mult={self.mult})"


@dataclass(frozen=True, eq=False)
class SpectralData:
    lambdas: np.ndarray
    left: np.ndarray   # rows l_i
    right: np.ndarray  # columns r_i


def _sign_fix(r: np.ndarray) -> np.ndarray:
    big = np.max(np.abs(r))
    j = int(np.argmax(np.abs(r) >= big - 1e-12))
    return r if r[j] >= 0 else -r


def _raw_eigen(sys: SystemDef, u: np.ndarray, anchor) -> SpectralData:
    M = sys.char_matrix(u)
    w, V = np.linalg.eig(M)
    if np.max(np.abs(w.imag)) > IMAG_TOL * max(1.0, np.max(np.abs(w.real))):
        raise ComplexSpectrum(f"complex eigenvalues {w} at {u.tolist()}")
    order = np.argsort(w.real, kind="stable")
    lam = w.real[order].copy()
    V = V[:, order].real
    k, p = sys.mult
    R = np.empty((sys.n, sys.n))
    for idx in sys.groups:
        if len(idx) == 1:
            i = idx[0]
            r = V[:, i] / np.linalg.norm(V[:, i])
            if anchor is None:
                r = _sign_fix(r)
            elif r @ anchor.right[:, i] < 0:
                r = -r
            R[:, i] = r
    blk = list(range(k, k + p))
    if p > 1:
        lam[blk] = lam[blk].mean()
        W = np.linalg.inv(V)
        if anchor is None:
            # orthonormal basis of the eigenspace, QR-fixed
            Q, Rq = np.linalg.qr(V[:, blk])
            Q = Q * np.sign(np.where(np.diag(Rq) == 0, 1.0, np.diag(Rq)))
            R[:, blk] = Q
        else:
            P = V[:, blk] @ W[blk, :]
            R[:, blk] = P @ anchor.right[:, blk]
    L = np.linalg.inv(R)
    return SpectralData(lam, L, R)


def eigen(sys: SystemDef, u) -> SpectralData:
    """Eigenvalues (ascending) with biorthonormal left/right eigenvectors.

    Simple right eigenvectors have unit length and a sign continuous with
    the frame at the origin; the multiple-eigenvalue block is the spectral
    projection of the origin's orthonormal block basis, which is smooth in
    ``u`` and independent of query order.
    """
    u = np.asarray(u, dtype=float)
    return _raw_eigen(sys, u, sys._anchor)


def lambdas(sys: SystemDef, u) -> np.ndarray:
    M = sys.char_matrix(np.asarray(u, dtype=float))
    w = np.linalg.eigvals(M)
    if np.max(np.abs(w.imag)) > IMAG_TOL * max(1.0, np.max(np.abs(w.real))):
        raise ComplexSpectrum(f"complex eigenvalues {w}")
    return np.sort(w.real)


def group_speed(sys: SystemDef, g: int, u) -> float:
    """Characteristic speed of wave group ``g`` at ``u``."""
    lam = lambdas(sys, u)
    return float(np.mean(lam[list(sys.groups[g])]))


# -- validation -------------------------------------------------------------
@dataclass
class ValidationReport:
    passed: dict[str, bool]
    margins: dict[str, float]
    worst_state: dict[str, np.ndarray]
    samples: int
    gap_c: float
    lambda_min: np.ndarray
    lambda_max: np.ndarray
    seed: int

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    @property
    def lambda_hat(self) -> float:
        """Non-physical front speed: twice the largest characteristic speed."""
        return 2.0 * float(max(np.max(np.abs(self.lambda_min)),
                               np.max(np.abs(self.lambda_max))))

    def summary(self) -> str:
        rows = [f"samples = {self.samples}", f"gap_c = {self.gap_c:.6g}"]
        for c in CHECKS:
            rows.append(f"{c} = {'pass' if self.passed[c] else 'FAIL'} "
                        f"(margin {self.margins[c]:.3g})")
        rows.append("lambda_min = " + " ".join(f"{x:.6g}" for x in self.lambda_min))
        rows.append("lambda_max = " + " ".join(f"{x:.6g}" for x in self.lambda_max))
        return "\n".join(rows)


def ball_samples(n: int, r: float, count: int, seed: int = 0) -> np.ndarray:
    """Deterministic scrambled-Sobol points in the closed ball, origin first."""
    sob = qmc.Sobol(d=n, scramble=True, seed=seed)
    pts = [np.zeros(n)]
    while len(pts) < count:
        cand = 2.0 * sob.random(64) - 1.0
        cand = cand[np.linalg.norm(cand, axis=1) <= 1.0]
        pts.extend(r * cand)
    return np.array(pts[:count])


def _dlam_along(sys: SystemDef, u: np.ndarray, group: tuple[int, ...], r: np.ndarray) -> float:
    h = sys.fd_step * 10
    def lam(v):
        return float(np.mean(lambdas(sys, v)[list(group)]))
    return (-lam(u + 2 * h * r) + 8 * lam(u + h * r) - 8 * lam(u - h * r)
            + lam(u - 2 * h * r)) / (12 * h)


def validate(sys: SystemDef, samples: int = 200, seed: int = 0, tol_ld: float = 1e-8,
             tol_entropy: float = 1e-8, raise_on_failure: bool = True) -> ValidationReport:
    """Run the structural checks in ``CHECKS`` on a low-discrepancy sample of the ball.

    Checks: invertible ``DH`` with real spectrum, constant multiplicity with
    separated groups, no vanishing speed, linear degeneracy of every family,
    a convex entropy pair, and invertibility of the boundary maps on the
    incoming families.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    pts = ball_samples(sys.n, sys.r_ball, samples, seed)
    passed = {c: True for c in CHECKS}
    margins = {c: math.inf for c in CHECKS}
    worst = {c: np.zeros(sys.n) for c in CHECKS}
    lam_min = np.full(sys.n, math.inf)
    lam_max = np.full(sys.n, -math.inf)
    gap = math.inf

    def note(c, ok, margin, u):
        if margin < margins[c]:
            margins[c], worst[c] = margin, u
        if not ok:
            passed[c] = False

    for u in pts:
        dh = sys.jac_H(u)
        det = abs(np.linalg.det(dh))
        note("hyperbolicity", det > DET_TOL, det, u)
        if det <= DET_TOL:
            continue
        w = np.linalg.eigvals(np.linalg.solve(dh, sys.jac_G(u)))
        im = float(np.max(np.abs(w.imag)))
        note("hyperbolicity", im <= IMAG_TOL, IMAG_TOL - im, u)
        if im > IMAG_TOL:
            continue
        lam = np.sort(w.real)
        lam_min = np.minimum(lam_min, lam)
        lam_max = np.maximum(lam_max, lam)
        spread, sep = 0.0, math.inf
        for gi, idx in enumerate(sys.groups):
            spread = max(spread, float(np.ptp(lam[list(idx)])))
            if gi:
                prev = sys.groups[gi - 1]
                sep = min(sep, float(lam[idx[0]] - lam[prev[-1]]))
        scale = max(1.0, float(np.max(np.abs(lam))))
        ok2 = spread <= 1e-7 * scale and sep > 1e-7 * scale
        note("constant_multiplicity", ok2, min(sep, 1e-7 * scale - spread), u)
        lm = lam[sys.m - 1] if sys.m >= 1 else -math.inf
        lp = lam[sys.m] if sys.m < sys.n else math.inf
        c_here = min(-lm, lp)
        note("speed_gap", c_here > 0, c_here, u)
        gap = min(gap, c_here)
        if not ok2:
            continue
        sd = eigen(sys, u)
        for idx in sys.groups:
            for j in idx:
                d = abs(_dlam_along(sys, u, idx, sd.right[:, j]))
                note("linear_degeneracy", d <= tol_ld, tol_ld - d, u)
        if sys.entropy is not None:
            ge = _grad(sys.entropy.eta, sys.entropy.grad_eta, u, sys.fd_step)
            gq = _grad(sys.entropy.q, sys.entropy.grad_q, u, sys.fd_step)
            res = float(np.max(np.abs(ge @ sys.char_matrix(u) - gq)))
            note("entropy_pair", res <= tol_entropy, tol_entropy - res, u)
            hess = fd_jacobian(lambda v: _grad(sys.entropy.eta, sys.entropy.grad_eta,
                                               v, sys.fd_step), u, sys.fd_step * 10)
            mineig = float(np.min(np.linalg.eigvalsh(0.5 * (hess + hess.T))))
            note("entropy_pair", mineig > 0, mineig, u)
        R = sd.right
        if sys.n - sys.m:
            d1 = abs(np.linalg.det(sys.jac_b1(u) @ R[:, sys.m:]))
            note("boundary_rank", d1 > DET_TOL, d1, u)
        if sys.m:
            d2 = abs(np.linalg.det(sys.jac_b2(u) @ R[:, :sys.m]))
            note("boundary_rank", d2 > DET_TOL, d2, u)
    if sys.entropy is None:
        passed["entropy_pair"] = False
        margins["entropy_pair"] = -math.inf
    rep = ValidationReport(passed, margins, worst, len(pts), 0.95 * gap if gap > 0 else gap,
                           lam_min, lam_max, seed)
    if raise_on_failure:
        for c in CHECKS:
            if not passed[c]:
                raise HypothesisViolated(c, worst[c], margins[c], rep)
    return rep


def _grad(f, g, u, h):
    if g is not None:
        return np.asarray(g(u), dtype=float)
    return fd_jacobian(lambda v: np.atleast_1d(f(v)), u, h)[0]


# -- gallery ----------------------------------------------------------------
def _linear_system(name: str, R: np.ndarray, lam: np.ndarray, m: int, mult, r_ball: float,
                   coupling: float = 0.5) -> SystemDef:
    A = R @ np.diag(lam) @ np.linalg.inv(R)
    n = A.shape[0]
    eye = np.eye(n)
    sys = SystemDef(
        name=name, n=n, H=lambda u: np.asarray(u, dtype=float),
        G=lambda u, A=A: np.asarray(u, dtype=float) @ A.T, r_ball=r_ball, m=m, mult=mult,
        b1=lambda u: np.zeros(n - m), b2=lambda u: np.zeros(m),
        DH=lambda u: eye, DG=lambda u, A=A: A, linear=(eye, A), meta={"identity_H": True})
    L = sys._anchor.left
    Q = L.T @ L
    LQ = L.T @ np.diag(sys._anchor.lambdas) @ L
    ent = EntropyPair(eta=lambda u: np.einsum("...i,ij,...j->...", u, Q, u),
                      q=lambda u: np.einsum("...i,ij,...j->...", u, LQ, u),
                      grad_eta=lambda u: 2 * Q @ u, grad_q=lambda u: 2 * LQ @ u)
    return replace(sys, entropy=ent, **_coupled_maps(L, m, coupling, sys.meta))


def _coupled_maps(L: np.ndarray, m: int, beta: float, meta: dict | None = None) -> dict:
    """Linear boundary maps: outgoing characteristic forms plus ``beta`` times
    the incoming ones, so that both the boundary solvability determinants and
    the one-sided rank conditions hold."""
    n = L.shape[0]
    B1 = L[m:].copy()
    if m:
        B1[0] += beta * L[0]
    B2 = L[:m].copy()
    if n - m and m:
        B2[0] += beta * L[m]
    return dict(b1=lambda u, B=B1: np.asarray(u, dtype=float) @ B.T,
                b2=lambda u, B=B2: np.asarray(u, dtype=float) @ B.T,
                meta={**(meta or {}), "B1": B1, "B2": B2})


def _triangular_ld() -> SystemDef:
    def G(u):
        u = np.asarray(u, dtype=float)
        return np.stack([-u[..., 0] + np.sin(u[..., 1]), 2 * u[..., 1]], axis=-1)

    def DG(u):
        return np.array([[-1.0, math.cos(u[1])], [0.0, 2.0]])

    def eta(u):
        z1 = u[..., 0] - np.sin(u[..., 1]) / 3
        return z1 ** 2 + u[..., 1] ** 2

    def q(u):
        z1 = u[..., 0] - np.sin(u[..., 1]) / 3
        return -z1 ** 2 + 2 * u[..., 1] ** 2

    def geta(u):
        z1 = u[0] - math.sin(u[1]) / 3
        return np.array([2 * z1, -2 * z1 * math.cos(u[1]) / 3 + 2 * u[1]])

    def gq(u):
        z1 = u[0] - math.sin(u[1]) / 3
        return np.array([-2 * z1, 2 * z1 * math.cos(u[1]) / 3 + 4 * u[1]])

    return SystemDef(
        name="triangular_ld", n=2, H=lambda u: np.asarray(u, dtype=float), G=G,
        r_ball=0.5, m=1, mult=(0, 1),
        b1=lambda u: (np.asarray(u)[..., 1] + 0.5 * np.asarray(u)[..., 0])[..., None],
        b2=lambda u: np.asarray(u)[..., :1],
        DH=lambda u: np.eye(2), DG=DG, entropy=EntropyPair(eta, q, geta, gq),
        meta={"identity_H": True})


def _chaplygin(A: float = 1.0, v0: float = 0.0, rho0: float = 1.0, tracers: int = 0,
               r_ball: float = 0.2) -> SystemDef:
    """Chaplygin gas ``p = -A/rho`` with optional passive tracers.

    State: deviations ``(rho, m, phi_1, ...)`` of density, momentum and tracer
    concentrations; ``H`` maps to conserved densities ``(rho, m, rho*phi)``.
    """
    m0 = rho0 * v0
    n = 2 + tracers
    base = np.array([rho0, m0] + [0.0] * tracers)

    def H(u):
        u = np.asarray(u, dtype=float)
        rho = rho0 + u[..., 0]
        cols = [u[..., 0], u[..., 1]] + [rho * u[..., 2 + j] for j in range(tracers)]
        return np.stack(cols, axis=-1)

    def G(u):
        u = np.asarray(u, dtype=float)
        rho = rho0 + u[..., 0]
        mom = m0 + u[..., 1]
        g1 = mom * mom / rho - A / rho - (m0 * m0 / rho0 - A / rho0)
        cols = [u[..., 1], g1] + [mom * u[..., 2 + j] for j in range(tracers)]
        return np.stack(cols, axis=-1)

    def DH(u):
        rho = rho0 + u[0]
        J = np.eye(n)
        for j in range(tracers):
            J[2 + j, 0] = u[2 + j]
            J[2 + j, 2 + j] = rho
        return J

    def DG(u):
        rho = rho0 + u[0]
        mom = m0 + u[1]
        J = np.zeros((n, n))
        J[0, 1] = 1.0
        J[1, 0] = -mom * mom / rho ** 2 + A / rho ** 2
        J[1, 1] = 2 * mom / rho
        for j in range(tracers):
            J[2 + j, 1] = u[2 + j]
            J[2 + j, 2 + j] = mom
        return J

    def eta(u):
        u = np.asarray(u, dtype=float)
        rho = rho0 + u[..., 0]
        mom = m0 + u[..., 1]
        e = (mom * mom + A) / (2 * rho)
        for j in range(tracers):
            e = e + 0.5 * rho * u[..., 2 + j] ** 2
        return e

    def q(u):
        u = np.asarray(u, dtype=float)
        rho = rho0 + u[..., 0]
        mom = m0 + u[..., 1]
        return mom / rho * (eta(u) - A / rho)

    def geta(u):
        rho = rho0 + u[0]
        mom = m0 + u[1]
        phi2 = float(np.sum(u[2:] ** 2))
        g = np.empty(n)
        g[0] = -(mom * mom + A) / (2 * rho ** 2) + 0.5 * phi2
        g[1] = mom / rho
        g[2:] = rho * u[2:]
        return g

    def gq(u):
        rho = rho0 + u[0]
        mom = m0 + u[1]
        e = float(eta(u))
        ge = geta(u)
        g = mom / rho * ge
        g[0] += -mom / rho ** 2 * (e - A / rho) + mom / rho * (A / rho ** 2)
        g[1] += (e - A / rho) / rho
        return g

    name = "chaplygin" if tracers == 0 else f"chaplygin_tracers{tracers}"
    # tracer speeds coincide with the fluid velocity: block of size `tracers`
    mult = (0, 1) if tracers == 0 else (1, tracers)
    c0 = math.sqrt(A) / rho0
    m_neg = sum(lam < 0 for lam in [v0 - c0] + [v0] * tracers + [v0 + c0])
    sys = SystemDef(name=name, n=n, H=H, G=G, r_ball=r_ball, m=int(m_neg), mult=mult,
                    b1=lambda u: np.zeros(n), b2=lambda u: np.zeros(1),
                    DH=DH, DG=DG, entropy=EntropyPair(eta, q, geta, gq), origin=base,
                    meta={"A": A, "v0": v0, "rho0": rho0, "identity_H": tracers == 0})
    L = sys._anchor.left
    return replace(sys, **_coupled_maps(L, sys.m, 0.5, sys.meta))


GALLERY = ("linear2", "linear3_mult2", "triangular_ld", "chaplygin", "chaplygin_tracers2")


def gallery(name: str, **params) -> SystemDef:
    """Named test systems; ``params`` tweak physical constants."""
    if name == "linear2":
        R = np.array([[1.0, 0.5], [-0.5, 1.0]])
        return _linear_system("linear2", R, np.array([-1.0, 2.0]), 1, (0, 1),
                              params.get("r_ball", 0.5))
    if name == "linear3_mult2":
        R = np.array([[1.0, 0.0, 0.5], [0.3, 1.0, 0.0], [0.0, 0.4, 1.0]])
        return _linear_system("linear3_mult2", R, np.array([-1.0, -1.0, 2.0]), 2, (0, 2),
                              params.get("r_ball", 0.5))
    if name == "triangular_ld":
        return _triangular_ld()
    if name == "chaplygin":
        return _chaplygin(A=params.get("A", 1.0), v0=params.get("v0", 0.0),
                          r_ball=params.get("r_ball", 0.2))
    if name == "chaplygin_tracers2":
        return _chaplygin(A=params.get("A", 1.0), v0=params.get("v0", 0.3), tracers=2,
                          r_ball=params.get("r_ball", 0.2))
    raise UnknownSystem(name)


def speed_range(sys: SystemDef, samples: int = 400, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Per-family minimum and maximum characteristic speed over the closed ball.

    Interior samples are complemented by their radial projections onto the
    sphere, where extremes of smooth speeds usually sit.
    """
    pts = ball_samples(sys.n, sys.r_ball, samples, seed)
    nrm = np.linalg.norm(pts[1:], axis=1, keepdims=True)
    pts = np.vstack([pts, sys.r_ball * pts[1:] / nrm])
    lam = np.array([lambdas(sys, u) for u in pts])
    return lam.min(axis=0), lam.max(axis=0)
