"""Piecewise-constant BV functions of one variable.

A :class:`PiecewiseConstFn` is the data carrier for initial data, boundary
data, traces and controls.  Values are vectors (shape ``(ncells, dim)``);
scalar functions are stored with ``dim == 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

MERGE_TOL = 1e-13


class DomainMismatch(ValueError):
    pass


class EmptyDomain(ValueError):
    pass


def _as_values(values, nbreaks: int) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        if v.shape[0] != nbreaks + 1:
            raise ValueError(
                f"expected {nbreaks + 1} cell values, got {v.shape[0]}")
        v = v[:, None]
    if v.ndim != 2 or v.shape[0] != nbreaks + 1:
        raise ValueError("values must have shape (len(breaks) + 1, dim)")
    return v


@dataclass(frozen=True, eq=False)
class PiecewiseConstFn:
    """Piecewise-constant function on ``[a, b]`` in canonical form.

    Construction merges adjacent cells whose values agree componentwise to
    ``MERGE_TOL``; breakpoints must be strictly increasing and interior.
    """

    a: float
    b: float
    breaks: np.ndarray
    values: np.ndarray
    _tv: float = field(init=False, repr=False)

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if not b > a:
            raise EmptyDomain(f"empty domain [{a}, {b}]")
        br = np.asarray(self.breaks, dtype=float).reshape(-1)
        vals = _as_values(self.values, br.size)
        if br.size and (np.any(np.diff(br) <= 0) or br[0] <= a or br[-1] >= b):
            raise ValueError("breaks must be strictly increasing inside (a, b)")
        keep = np.ones(br.size, dtype=bool)
        if br.size:
            same = np.all(np.abs(np.diff(vals, axis=0)) <= MERGE_TOL, axis=1)
            keep = ~same
        cells = np.concatenate([[True], keep])
        br = br[keep]
        vals = vals[cells]
        br.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "breaks", br)
        object.__setattr__(self, "values", vals)
        jumps = np.linalg.norm(np.diff(vals, axis=0), axis=1)
        object.__setattr__(self, "_tv", float(jumps.sum()))

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, a: float, b: float, value) -> PiecewiseConstFn:
        v = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(a, b, np.empty(0), v[None, :])

    @classmethod
    def from_cells(cls, a: float, b: float, positions, states) -> PiecewiseConstFn:
        """Build from non-decreasing jump positions and ``len + 1`` states.

        Jumps at coincident positions (zero-width cells) and jumps on or
        outside the domain boundary are collapsed, keeping the outermost
        states.
        """
        pos = np.asarray(positions, dtype=float).reshape(-1)
        st = np.asarray(states, dtype=float)
        if st.ndim == 1:
            st = st[:, None]
        if st.shape[0] != pos.size + 1:
            raise ValueError("need len(positions) + 1 states")
        breaks, vals = [], [st[0]]
        for x, right in zip(pos, st[1:]):
            if x <= a:
                vals[0] = right
                continue
            if x >= b:
                break
            if breaks and x <= breaks[-1]:
                vals[-1] = right
                continue
            breaks.append(x)
            vals.append(right)
        return cls(a, b, np.array(breaks), np.array(vals))

    # -- basic queries ----------------------------------------------------
    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def ncells(self) -> int:
        return self.values.shape[0]

    @property
    def edges(self) -> np.ndarray:
        return np.concatenate([[self.a], self.breaks, [self.b]])

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.edges)

    def tv(self) -> float:
        return self._tv

    def left_value(self) -> np.ndarray:
        return self.values[0]

    def right_value(self) -> np.ndarray:
        return self.values[-1]

    def cell_index(self, x, side: int = 1):
        """Index of the cell containing ``x``; at a breakpoint ``side``
        selects the right (+1) or left (-1) limit."""
        x = np.asarray(x, dtype=float)
        how = "right" if side >= 0 else "left"
        return np.searchsorted(self.breaks, x, side=how)

    def value_at(self, x: float, side: int = 1) -> np.ndarray:
        return self.values[int(self.cell_index(x, side))]

    def __call__(self, x):
        return self.values[self.cell_index(x)]

    def next_break_after(self, x: float) -> float:
        i = np.searchsorted(self.breaks, x, side="right")
        return float(self.breaks[i]) if i < self.breaks.size else math.inf

    # -- algebra ----------------------------------------------------------
    def map(self, func: Callable[[np.ndarray], np.ndarray]) -> PiecewiseConstFn:
        vals = np.array([np.atleast_1d(func(v)) for v in self.values], dtype=float)
        return PiecewiseConstFn(self.a, self.b, self.breaks.copy(), vals)

    def restrict(self, lo: float, hi: float) -> PiecewiseConstFn:
        if lo < self.a - 1e-14 or hi > self.b + 1e-14 or not hi > lo:
            raise DomainMismatch(f"[{lo}, {hi}] not inside [{self.a}, {self.b}]")
        i0 = int(self.cell_index(lo, 1))
        i1 = int(self.cell_index(hi, -1))
        inner = self.breaks[(self.breaks > lo) & (self.breaks < hi)]
        return PiecewiseConstFn(lo, hi, inner, self.values[i0:i1 + 1])

    def affine(self, a: float, b: float, flip: bool = False) -> PiecewiseConstFn:
        """Re-parametrize onto ``[a, b]``; ``flip`` reverses orientation."""
        s = (b - a) / (self.b - self.a)
        if flip:
            br = b - (self.breaks[::-1] - self.a) * s
            vals = self.values[::-1]
        else:
            br = a + (self.breaks - self.a) * s
            vals = self.values
        br = np.clip(br, a, b)
        return PiecewiseConstFn.from_cells(a, b, br, vals)

    def l1_norm(self) -> float:
        return float(np.sum(np.linalg.norm(self.values, axis=1) * self.lengths))

    def __sub__(self, other: PiecewiseConstFn) -> PiecewiseConstFn:
        return combine(self, other, np.subtract)

    def __repr__(self) -> str:
        return (f"PiecewiseConstFn([{self.a}, {self.b}], cells={self.ncells}, "
                f"dim={self.dim}, tv={self._tv:.3g})")


def _check_domain(f: PiecewiseConstFn, g: PiecewiseConstFn, check_dim: bool = True) -> None:
    scale = max(1.0, abs(f.a), abs(f.b))
    if abs(f.a - g.a) > 1e-12 * scale or abs(f.b - g.b) > 1e-12 * scale:
        raise DomainMismatch(f"[{f.a}, {f.b}] vs [{g.a}, {g.b}]")
    if check_dim and f.dim != g.dim:
        raise DomainMismatch(f"dimension {f.dim} vs {g.dim}")


def combine(f: PiecewiseConstFn, g: PiecewiseConstFn, op, check_dim: bool = True
            ) -> PiecewiseConstFn:
    """Pointwise ``op(f, g)`` on the common refinement.

    ``op`` receives the stacked cell values of both functions; with
    ``check_dim=False`` their dimensions may differ.
    """
    _check_domain(f, g, check_dim)
    br = np.union1d(f.breaks, g.breaks)
    # index by left edges so that sliver cells never round into a neighbour
    lefts = np.concatenate([[f.a], br])
    fv = f.values[np.searchsorted(f.breaks, lefts, side="right")]
    gv = g.values[np.searchsorted(g.breaks, lefts, side="right")]
    return PiecewiseConstFn(f.a, f.b, br, op(fv, gv))


def concat(parts: list[PiecewiseConstFn]) -> PiecewiseConstFn:
    """Join functions on adjacent intervals."""
    breaks, vals = [], []
    for i, p in enumerate(parts):
        if i:
            if abs(p.a - parts[i - 1].b) > 1e-12 * max(1.0, abs(p.a)):
                raise DomainMismatch("parts are not adjacent")
            breaks.append(p.a)
        breaks.extend(p.breaks)
        vals.extend(p.values)
    return PiecewiseConstFn.from_cells(parts[0].a, parts[-1].b, breaks, vals)


def l1_dist(f: PiecewiseConstFn, g: PiecewiseConstFn) -> float:
    """Exact ``int |f - g| dx`` with the Euclidean norm on values."""
    return (f - g).l1_norm()


def tv(f: PiecewiseConstFn) -> float:
    return f.tv()


def restrict(f: PiecewiseConstFn, lo: float, hi: float) -> PiecewiseConstFn:
    return f.restrict(lo, hi)


def sample_bv(f, h: float, domain: tuple[float, float] = (0.0, 1.0)) -> PiecewiseConstFn:
    """Cell-midpoint sampling of ``f`` on a uniform mesh of width at most ``h``.

    ``f`` is a callable mapping an array of points to an array of shape
    ``(N,)`` or ``(N, dim)``, or a dense table ``(xs, ys)`` interpolated
    linearly per component.
    """
    a, b = map(float, domain)
    if not b > a:
        raise EmptyDomain(f"empty domain [{a}, {b}]")
    if not h > 0:
        raise ValueError("mesh width must be positive")
    if not callable(f):
        xs, ys = (np.asarray(t, dtype=float) for t in f)
        ys2 = ys if ys.ndim == 2 else ys[:, None]

        def f(x, xs=xs, ys2=ys2):
            return np.stack([np.interp(x, xs, ys2[:, j])
                             for j in range(ys2.shape[1])], axis=-1)

    ncell = max(1, int(math.ceil((b - a) / h - 1e-9)))
    edges = np.linspace(a, b, ncell + 1)
    mids = 0.5 * (edges[1:] + edges[:-1])
    vals = np.asarray(f(mids), dtype=float)
    if vals.ndim == 0:
        vals = np.full(ncell, float(vals))
    if vals.ndim == 1:
        vals = vals[:, None]
    return PiecewiseConstFn(a, b, edges[1:-1], vals)


@dataclass(frozen=True)
class SmallnessBudget:
    """Parts of the data-size functional that gates well-posedness."""

    tv_data: float
    tv_bc: float
    compat: float

    @property
    def total(self) -> float:
        return self.tv_data + self.tv_bc + self.compat


def budget(ubar: PiecewiseConstFn, g1: PiecewiseConstFn, g2: PiecewiseConstFn,
           b1: Callable, b2: Callable) -> SmallnessBudget:
    tv_data = ubar.tv() + float(np.linalg.norm(ubar.left_value()))
    tv_bc = g1.tv() + g2.tv()
    compat = 0.0
    if g1.dim:
        compat += float(np.linalg.norm(b1(ubar.left_value()) - g1.left_value()))
    if g2.dim:
        compat += float(np.linalg.norm(b2(ubar.right_value()) - g2.left_value()))
    return SmallnessBudget(tv_data, tv_bc, compat)


# -- CSV --------------------------------------------------------------------
def to_csv(f: PiecewiseConstFn, path=None, header_extra: str = "") -> str:
    """Serialize as ``# domain a b`` followed by ``left_edge,v1,...`` rows.

    Floats use the shortest round-trip representation.
    """
    lines = [f"# domain {f.a!r} {f.b!r}"]
    if header_extra:
        lines.append(f"# {header_extra}")
    for x, v in zip(f.edges[:-1], f.values):
        lines.append(",".join([repr(float(x))] + [repr(float(c)) for c in v]))
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def from_csv(source) -> PiecewiseConstFn:
    text = source
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        text = Path(source).read_text()
    a = b = None
    edges, vals = [], []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts and parts[0] == "domain":
                a, b = float(parts[1]), float(parts[2])
            continue
        nums = [float(t) for t in line.split(",")]
        edges.append(nums[0])
        vals.append(nums[1:])
    if a is None:
        raise ValueError("missing '# domain a b' header")
    return PiecewiseConstFn(a, b, np.array(edges[1:]), np.array(vals))
