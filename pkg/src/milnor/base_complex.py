"""Catalog of small base spaces given as chart complexes.

Each base has charts with named coordinates, closed-form overlap transfers
(which also accept :class:`~milnor.exprlang.Dual` coordinates so Jacobians
come for free), a smooth partition of unity subordinate to the cover, and,
for surfaces, an oriented integration box per chart.

Points are numpy arrays with the coordinate axis last, so ``(..., d)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import simpson

from .exprlang import Dual, Expr, eval_dual, parse, substitute, to_text
from .smooth import bump

TWO_PI = 2.0 * math.pi


class BaseError(ValueError):
    pass


def _val(c):
    return c.value if isinstance(c, Dual) else np.asarray(c, dtype=float)


@dataclass(frozen=True)
class Chart:
    index: int
    coords: tuple[str, ...]

    @property
    def dim(self) -> int:
        return len(self.coords)


@dataclass(frozen=True)
class BasePoint:
    chart: int
    x: tuple[float, ...]

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.x, dtype=float)


class BaseComplex:
    name: str = ""
    dim: int = 0
    charts: tuple[Chart, ...] = ()

    def __init__(self, eps: float = 0.1):
        if not 0.0 < eps < 0.5:
            raise ValueError("partition eps must lie in (0, 1/2)")
        self.eps = float(eps)

    # -- geometry to be provided by subclasses ------------------------------
    def to_global(self, k: int, x) -> np.ndarray:
        raise NotImplementedError

    def from_global(self, k: int, g) -> np.ndarray:
        raise NotImplementedError

    def contains(self, k: int, x) -> np.ndarray:
        raise NotImplementedError

    def _partition_global(self, g) -> np.ndarray:
        raise NotImplementedError

    def _transfer(self, k: int, j: int, coords: list) -> list:
        raise NotImplementedError

    def random_global(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def integration_box(self, k: int):
        raise BaseError(f"{self.name} is not a surface")

    def orientation(self, k: int) -> float:
        return 1.0

    def global_distance(self, a, b) -> np.ndarray:
        raise NotImplementedError

    # -- derived API ---------------------------------------------------------
    @property
    def nchart(self) -> int:
        return len(self.charts)

    def chart(self, k: int) -> Chart:
        if not 0 <= k < self.nchart:
            raise BaseError(f"chart {k} out of range for {self.name}")
        return self.charts[k]

    def overlaps(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.nchart) for j in range(self.nchart) if i < j and self._charts_meet(i, j)]

    def _charts_meet(self, i: int, j: int) -> bool:
        return True

    def _check_inside(self, k: int, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dim,):
            raise BaseError(f"expected {self.dim} coordinates, got shape {x.shape}")
        if not np.all(self.contains(k, x)):
            raise BaseError(f"point outside chart {k} of {self.name}")
        return x

    def partition(self, k: int, x) -> np.ndarray:
        """Weights of every chart at a point given in chart ``k``; shape ``(..., M)``."""
        return self._partition_at(k, self._check_inside(k, x))

    def _partition_at(self, k: int, x) -> np.ndarray:
        w = self._partition_global(self.to_global(k, x))
        return w / np.sum(w, axis=-1, keepdims=True)

    def partition_eval(self, p: BasePoint) -> np.ndarray:
        return self.partition(p.chart, p.array)

    def in_overlap(self, k: int, j: int, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        ok = self.contains(k, x)
        if k == j:
            return ok
        g = self.to_global(k, x)
        return ok & self._global_in_chart(j, g)

    def _global_in_chart(self, j: int, g) -> np.ndarray:
        return self.contains(j, self.from_global(j, g))

    def transfer(self, k: int, j: int, x):
        """Coordinates of the same point in chart ``j``.

        ``x`` is either an array ``(..., d)`` or a list of per-axis values
        (floats, arrays or Duals); the result has the same form.
        """
        as_list = isinstance(x, (list, tuple))
        coords = list(x) if as_list else [np.asarray(x, dtype=float)[..., a] for a in range(self.dim)]
        vals = np.stack([np.broadcast_to(_val(c), np.shape(_val(coords[0]))) for c in coords], axis=-1)
        if not np.all(self.in_overlap(k, j, vals)):
            raise BaseError(f"point outside the overlap of charts {k} and {j}")
        out = coords if k == j else self._transfer(k, j, coords)
        if as_list:
            return out
        return np.stack([np.broadcast_to(np.asarray(c, dtype=float), vals.shape[:-1]) for c in out], axis=-1)

    def jacobian(self, k: int, j: int, x) -> np.ndarray:
        """d(chart j coords)/d(chart k coords), shape ``(..., d_j, d_k)``."""
        x = np.asarray(x, dtype=float)
        duals = [Dual.variable(x[..., a], a, self.dim) for a in range(self.dim)]
        out = self.transfer(k, j, duals)
        rows = []
        for c in out:
            d = c.deriv if isinstance(c, Dual) else np.zeros((self.dim,) + x.shape[:-1])
            rows.append(np.moveaxis(d, 0, -1))
        return np.stack(rows, axis=-2)

    def charts_at_global(self, g) -> np.ndarray:
        """Boolean mask ``(..., M)`` of charts containing each global point."""
        return np.stack([self._global_in_chart(j, g) for j in range(self.nchart)], axis=-1)

    def home_chart(self, g) -> np.ndarray:
        """Chart carrying the largest partition weight."""
        return np.argmax(self._partition_global(g), axis=-1)

    def random_points(self, rng: np.random.Generator, n: int) -> list[BasePoint]:
        g = self.random_global(rng, n)
        ks = self.home_chart(g)
        return [BasePoint(int(k), tuple(self.from_global(int(k), gi).tolist())) for k, gi in zip(ks, g)]

    def random_overlap(self, i: int, j: int, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` points of the overlap of charts i and j, in chart ``j`` coordinates."""
        out = []
        tries = 0
        while sum(len(o) for o in out) < n:
            tries += 1
            if tries > 200:
                raise BaseError(f"charts {i} and {j} do not overlap")
            g = self.random_global(rng, 4 * n)
            mask = self._global_in_chart(i, g) & self._global_in_chart(j, g)
            out.append(self.from_global(j, g[mask]))
        return np.concatenate(out)[:n]

    def same_point(self, k: int, x, j: int, y, tol: float = 1e-9) -> bool:
        a = self.to_global(k, np.asarray(x, dtype=float))
        b = self.to_global(j, np.asarray(y, dtype=float))
        return bool(np.all(self.global_distance(a, b) <= tol))

    def area_form(self, k: int, x, v, w) -> np.ndarray:
        raise BaseError(f"{self.name} has no area form")


# ---------------------------------------------------------------------------


def _wedge(v, w):
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    return v[..., 0] * w[..., 1] - v[..., 1] * w[..., 0]


class S2TwoDisks(BaseComplex):
    """Two stereographic disks in polar coordinates (rho, phi).

    Chart 0 projects from the south pole (rho = tan(theta/2)), chart 1 from
    the north pole.  On the overlap z -> z/|z|^2 reads rho' = 1/rho with the
    angle phi unchanged, which reverses orientation; the global orientation
    is that of chart 0.  The partition depends on the polar angle only:
    chart 1's weight rises across [pi/4, 3pi/4] and the two weights are
    exactly 1/2 on the equator.
    """

    name = "S2-two-disks"
    dim = 2
    charts = (Chart(0, ("rho", "phi")), Chart(1, ("rho", "phi")))
    box_radius = math.tan(3.0 * math.pi / 8.0)

    def to_global(self, k, x):
        x = np.asarray(x, dtype=float)
        theta = 2.0 * np.arctan(x[..., 0])
        if k == 1:
            theta = math.pi - theta
        return np.stack([theta, x[..., 1]], axis=-1)

    def from_global(self, k, g):
        g = np.asarray(g, dtype=float)
        theta = g[..., 0] if k == 0 else math.pi - g[..., 0]
        return np.stack([np.tan(0.5 * theta), g[..., 1]], axis=-1)

    def contains(self, k, x):
        x = np.asarray(x, dtype=float)
        return (x[..., 0] >= 0.0) & np.isfinite(x[..., 0]) & np.isfinite(x[..., 1])

    def _global_in_chart(self, j, g):
        g = np.asarray(g, dtype=float)
        return (g[..., 0] < math.pi) if j == 0 else (g[..., 0] > 0.0)

    def _partition_global(self, g):
        tau = (np.asarray(g, dtype=float)[..., 0] - math.pi / 4.0) / (math.pi / 2.0)
        w1 = np.asarray(bump(tau, self.eps))
        return np.stack([1.0 - w1, w1], axis=-1)

    def _transfer(self, k, j, coords):
        rho, phi = coords
        return [1.0 / rho, phi]

    def random_global(self, rng, n):
        theta = np.arccos(rng.uniform(-1.0, 1.0, size=n))
        phi = rng.uniform(0.0, TWO_PI, size=n)
        return np.stack([theta, phi], axis=-1)

    def random_overlap(self, i, j, rng, n):
        theta = rng.uniform(0.05, math.pi - 0.05, size=n)
        phi = rng.uniform(0.0, TWO_PI, size=n)
        return self.from_global(j, np.stack([theta, phi], axis=-1))

    def global_distance(self, a, b):
        a = np.asarray(a)
        b = np.asarray(b)
        # chordal distance on the unit sphere
        def xyz(g):
            s = np.sin(g[..., 0])
            return np.stack([s * np.cos(g[..., 1]), s * np.sin(g[..., 1]), np.cos(g[..., 0])], axis=-1)

        return np.linalg.norm(xyz(a) - xyz(b), axis=-1)

    def integration_box(self, k):
        return np.array([0.0, 0.0]), np.array([self.box_radius, TWO_PI]), (False, True)

    def orientation(self, k):
        return 1.0 if k == 0 else -1.0

    def area_density(self, rho):
        rho = np.asarray(rho, dtype=float)
        return 4.0 * rho / (1.0 + rho * rho) ** 2

    def area_form(self, k, x, v, w):
        x = np.asarray(x, dtype=float)
        return self.orientation(k) * self.area_density(x[..., 0]) * _wedge(v, w)


def _arc_shift(u, lo):
    """Integer shift putting u into [lo, lo + 1)."""
    return np.floor(u - lo)


class T2FourSquares(BaseComplex):
    """Unit torus covered by four half-overlapping squares.

    Each circle factor is covered by arcs A0 = (-3/8, 3/8) and A1 = (1/8, 7/8)
    (coordinates taken in that interval).  Chart ``2a + b`` is A_a x A_b.
    The 1-d weight of A1 rises across [0.15, 0.35] and falls across
    [0.65, 0.85] (for eps = 0.1); chart weights are products.
    """

    name = "T2-four-squares"
    dim = 2
    charts = tuple(Chart(c, ("u", "v")) for c in range(4))
    arcs = ((-0.375, 0.375), (0.125, 0.875))

    def _arc(self, k):
        return self.arcs[k // 2], self.arcs[k % 2]

    def contains(self, k, x):
        x = np.asarray(x, dtype=float)
        (ua, ub), (va, vb) = self._arc(k)
        return (x[..., 0] > ua) & (x[..., 0] < ub) & (x[..., 1] > va) & (x[..., 1] < vb)

    def to_global(self, k, x):
        return np.mod(np.asarray(x, dtype=float), 1.0)

    def from_global(self, k, g):
        g = np.asarray(g, dtype=float)
        (ua, _), (va, _) = self._arc(k)
        return np.stack([g[..., 0] - _arc_shift(g[..., 0], ua), g[..., 1] - _arc_shift(g[..., 1], va)], axis=-1)

    def _chi1(self, u):
        u = np.mod(np.asarray(u, dtype=float), 1.0)
        rise = bump((u - 0.125) / 0.25, self.eps)
        fall = bump((0.875 - u) / 0.25, self.eps)
        return np.where(u < 0.5, rise, fall)

    def _partition_global(self, g):
        g = np.asarray(g, dtype=float)
        cu1 = self._chi1(g[..., 0])
        cv1 = self._chi1(g[..., 1])
        cu = (1.0 - cu1, cu1)
        cv = (1.0 - cv1, cv1)
        return np.stack([cu[c // 2] * cv[c % 2] for c in range(4)], axis=-1)

    def _transfer(self, k, j, coords):
        u, v = coords
        (ua, _), (va, _) = self._arc(j)
        su = _arc_shift(_val(u), ua)
        sv = _arc_shift(_val(v), va)
        return [u - su, v - sv]

    def random_global(self, rng, n):
        return rng.uniform(0.0, 1.0, size=(n, 2))

    def global_distance(self, a, b):
        d = np.mod(np.asarray(a) - np.asarray(b) + 0.5, 1.0) - 0.5
        return np.max(np.abs(d), axis=-1)

    def integration_box(self, k):
        (ua, ub), (va, vb) = self._arc(k)
        return np.array([ua, va]), np.array([ub, vb]), (False, False)

    def area_form(self, k, x, v, w):
        return _wedge(v, w) * np.ones(np.shape(x)[:-1])


class S1TwoArcs(BaseComplex):
    """Circle covered by theta in (-pi, pi) and theta in (0, 2pi)."""

    name = "S1-two-arcs"
    dim = 1
    charts = (Chart(0, ("theta",)), Chart(1, ("theta",)))
    arcs = ((-math.pi, math.pi), (0.0, TWO_PI))

    def contains(self, k, x):
        x = np.asarray(x, dtype=float)[..., 0]
        lo, hi = self.arcs[k]
        return (x > lo) & (x < hi)

    def to_global(self, k, x):
        return np.mod(np.asarray(x, dtype=float), TWO_PI)

    def from_global(self, k, g):
        g = np.asarray(g, dtype=float)
        lo, _ = self.arcs[k]
        return g - TWO_PI * np.floor((g - lo) / TWO_PI)

    def _partition_global(self, g):
        t = np.asarray(g, dtype=float)[..., 0]
        ts = np.abs(np.mod(t + math.pi, TWO_PI) - math.pi)
        w1 = np.asarray(bump((ts - math.pi / 4.0) / (math.pi / 2.0), self.eps))
        return np.stack([1.0 - w1, w1], axis=-1)

    def _transfer(self, k, j, coords):
        (t,) = coords
        lo, _ = self.arcs[j]
        return [t - TWO_PI * np.floor((_val(t) - lo) / TWO_PI)]

    def random_global(self, rng, n):
        return rng.uniform(0.0, TWO_PI, size=(n, 1))

    def global_distance(self, a, b):
        d = np.mod(np.asarray(a) - np.asarray(b) + math.pi, TWO_PI) - math.pi
        return np.abs(d[..., 0])


class Interval(BaseComplex):
    """[0, 1] with a single chart."""

    name = "interval"
    dim = 1
    charts = (Chart(0, ("s",)),)

    def contains(self, k, x):
        x = np.asarray(x, dtype=float)[..., 0]
        return (x >= 0.0) & (x <= 1.0)

    def to_global(self, k, x):
        return np.asarray(x, dtype=float)

    def from_global(self, k, g):
        return np.asarray(g, dtype=float)

    def _partition_global(self, g):
        return np.ones(np.shape(g)[:-1] + (1,))

    def _transfer(self, k, j, coords):
        return coords

    def random_global(self, rng, n):
        return rng.uniform(0.0, 1.0, size=(n, 1))

    def global_distance(self, a, b):
        return np.abs(np.asarray(a) - np.asarray(b))[..., 0]


CATALOG = {cls.name: cls for cls in (S2TwoDisks, T2FourSquares, S1TwoArcs, Interval)}


def catalog(name: str, eps: float = 0.1) -> BaseComplex:
    if name not in CATALOG:
        raise BaseError(f"unknown base {name!r}; known: {sorted(CATALOG)}")
    return CATALOG[name](eps)


# ---------------------------------------------------------------------------
# Quadrature


def integrate_2form(
    base: BaseComplex,
    sampler: Callable,
    resolution: int = 256,
    vectorized: bool = True,
) -> float:
    """Oriented integral of a 2-form, glued with the partition of unity.

    ``sampler(k, X, v, w)`` evaluates the form in chart ``k`` on the grid
    ``X`` (shape ``(n, n, 2)``) against the constant vectors ``v``, ``w``.
    With ``vectorized=False`` it is called point by point instead.
    """
    if base.dim != 2:
        raise BaseError(f"{base.name} is not a surface")
    if resolution < 8:
        raise ValueError("resolution must be >= 8")
    n = resolution + (resolution % 2)
    e1, e2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    total = 0.0
    for k in range(base.nchart):
        lo, hi, _ = base.integration_box(k)
        a = np.linspace(lo[0], hi[0], n + 1)
        b = np.linspace(lo[1], hi[1], n + 1)
        X = np.stack(np.meshgrid(a, b, indexing="ij"), axis=-1)
        if vectorized:
            vals = np.asarray(sampler(k, X, e1, e2), dtype=float)
        else:
            vals = np.array([[sampler(k, X[i, j], e1, e2) for j in range(n + 1)] for i in range(n + 1)], dtype=float)
        if not np.all(np.isfinite(vals)):
            raise BaseError("non-finite sampler value")
        weights = base._partition_at(k, X)[..., k]
        total += base.orientation(k) * simpson(simpson(weights * vals, x=b, axis=1), x=a)
    return float(total)


# ---------------------------------------------------------------------------
# Charted curves


@dataclass(frozen=True)
class CurveSegment:
    chart: int
    exprs: tuple[Expr, ...]
    t0: float
    t1: float


@dataclass
class ChartedCurve:
    """Piecewise curve; segment ``i`` lives in one chart over ``[t0, t1]``.

    Coordinates are expressions in the variable ``t``.
    """

    segments: tuple[CurveSegment, ...]
    constants: dict = field(default_factory=dict)

    @classmethod
    def build(cls, pieces: Sequence, constants: dict | None = None) -> "ChartedCurve":
        segs = []
        for chart, exprs, t0, t1 in pieces:
            exprs = tuple(parse(e) if isinstance(e, str) else e for e in exprs)
            segs.append(CurveSegment(int(chart), exprs, float(t0), float(t1)))
        return cls(tuple(segs), dict(constants or {}))

    @property
    def t_start(self) -> float:
        return self.segments[0].t0

    @property
    def t_end(self) -> float:
        return self.segments[-1].t1

    def evaluate(self, seg: int, t) -> tuple[np.ndarray, np.ndarray]:
        """Point and velocity of segment ``seg`` at parameter(s) ``t``."""
        s = self.segments[seg]
        t = np.asarray(t, dtype=float)
        tt = Dual.variable(t, 0, 1)
        pts, vel = [], []
        for e in s.exprs:
            d = eval_dual(e, {"t": tt}, self.constants)
            pts.append(np.broadcast_to(d.value, t.shape))
            vel.append(np.broadcast_to(d.deriv[0], t.shape))
        return np.stack(pts, axis=-1), np.stack(vel, axis=-1)

    def validate(self, base: BaseComplex, samples: int = 64, tol: float = 1e-9) -> None:
        for i, s in enumerate(self.segments):
            if len(s.exprs) != base.dim:
                raise BaseError(f"segment {i} has {len(s.exprs)} coordinates, base needs {base.dim}")
            if not s.t1 > s.t0:
                raise BaseError(f"segment {i} has empty parameter range")
            x, _ = self.evaluate(i, np.linspace(s.t0, s.t1, samples))
            if not np.all(base.contains(s.chart, x)):
                raise BaseError(f"segment {i} leaves chart {s.chart}")
            if i + 1 < len(self.segments):
                nxt = self.segments[i + 1]
                if abs(nxt.t0 - s.t1) > 1e-12:
                    raise BaseError(f"segments {i} and {i + 1} are not contiguous in t")
                end, _ = self.evaluate(i, s.t1)
                start, _ = self.evaluate(i + 1, nxt.t0)
                moved = base.transfer(s.chart, nxt.chart, end)
                if np.max(np.abs(moved - start)) > tol:
                    raise BaseError(f"segments {i} and {i + 1} do not join")

    def is_closed(self, base: BaseComplex, tol: float = 1e-9) -> bool:
        a, _ = self.evaluate(0, self.t_start)
        b, _ = self.evaluate(len(self.segments) - 1, self.t_end)
        return base.same_point(self.segments[0].chart, a, self.segments[-1].chart, b, tol)

    def restrict(self, t0: float, t1: float) -> "ChartedCurve":
        """The same curve on the sub-interval [t0, t1]."""
        if not (self.t_start <= t0 < t1 <= self.t_end):
            raise BaseError("restriction interval outside the curve domain")
        segs = []
        for s in self.segments:
            a, b = max(s.t0, t0), min(s.t1, t1)
            if b > a:
                segs.append(CurveSegment(s.chart, s.exprs, a, b))
        return ChartedCurve(tuple(segs), dict(self.constants))

    def reparametrize(self, f: str | Expr, s0: float, s1: float) -> "ChartedCurve":
        """c o f for a smooth increasing f mapping [s0, s1] onto the curve domain."""
        from scipy.optimize import brentq

        f = parse(f) if isinstance(f, str) else f

        def fval(s):
            return float(eval_dual(f, {"t": Dual.constant(s, 1)}, self.constants).value)

        if abs(fval(s0) - self.t_start) > 1e-12 or abs(fval(s1) - self.t_end) > 1e-12:
            raise BaseError("reparametrisation must map the new interval onto the old one")
        segs = []
        lo = s0
        for i, s in enumerate(self.segments):
            hi = s1 if i == len(self.segments) - 1 else brentq(lambda u: fval(u) - s.t1, lo, s1, xtol=1e-15)
            exprs = tuple(substitute(e, {"t": f}) for e in s.exprs)
            segs.append(CurveSegment(s.chart, exprs, lo, hi))
            lo = hi
        return ChartedCurve(tuple(segs), dict(self.constants))

    def to_json(self) -> list:
        return [[s.chart, [to_text(e) for e in s.exprs], s.t0, s.t1] for s in self.segments]


def catalog_loop(base: BaseComplex, name: str = "equator") -> ChartedCurve:
    """Named loops on catalog bases, parameterised over [0, 1]."""
    if isinstance(base, S2TwoDisks):
        if name == "equator":
            return ChartedCurve.build([(0, ("1", "2*pi*t"), 0.0, 1.0)])
        if name.startswith("latitude:"):
            theta = float(name.split(":", 1)[1])
            if not 0.0 <= theta < math.pi:
                raise BaseError("latitude polar angle must lie in [0, pi)")
            return ChartedCurve.build([(0, (repr(math.tan(theta / 2.0)), "2*pi*t"), 0.0, 1.0)])
    if isinstance(base, S1TwoArcs) and name in ("circle", "equator"):
        return ChartedCurve.build([(0, ("2*pi*t - pi/2",), 0.0, 0.5), (1, ("2*pi*t - pi/2",), 0.5, 1.0)])
    if isinstance(base, T2FourSquares) and name in ("u-loop", "v-loop"):
        if name == "u-loop":
            return ChartedCurve.build([(0, ("t - 0.25", "0"), 0.0, 0.5), (2, ("t - 0.25", "0"), 0.5, 1.0)])
        return ChartedCurve.build([(0, ("0", "t - 0.25"), 0.0, 0.5), (1, ("0", "t - 0.25"), 0.5, 1.0)])
    if isinstance(base, Interval) and name in ("path", "equator"):
        return ChartedCurve.build([(0, ("t",), 0.0, 1.0)])
    raise BaseError(f"no loop named {name!r} on {base.name}")
