"""Local connection forms pulled back from the universal connection.

In chart k the pulled-back form is A_k = sum_i xi_i g_ik^-1 dg_ik, with the
transition derivatives taken by dual-number differentiation.  On the total
space, in the chart-k trivialisation, the connection reads
Ad(g^-1) A_k + g^-1 dg, so horizontal curves satisfy h' = -A_k(c') h and
sections of neighbouring charts are related by
A_j = Ad(g_ij^-1) A_i + g_ij^-1 dg_ij.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .base_complex import BaseError, BasePoint, ChartedCurve, integrate_2form
from .bundle_cocycle import CocycleBundle
from .lie_group import CircleU1, GroupSpec, IrrationalTorus
from .milnor_join import universal_connection_stencil

FD_STEP = 1e-4
_GAUSS = math.sqrt(3.0) / 6.0


class ConnectionFormError(ValueError):
    pass


def _alg_shape(group: GroupSpec) -> tuple:
    return np.shape(np.asarray(group.zero_algebra()))


# ---------------------------------------------------------------------------
# Local forms


def connection_basis(bundle: CocycleBundle, k: int, X) -> np.ndarray:
    """A_k on the coordinate basis at points ``X`` (shape ``(..., d)``).

    Returns shape ``(..., d) + E`` with ``E`` the algebra shape.
    """
    base, G = bundle.base, bundle.group
    X = np.asarray(X, dtype=float)
    d = base.dim
    flat = X.reshape(-1, d)
    w = base.partition(k, flat)
    E = _alg_shape(G)
    out = np.zeros((len(flat), d) + E)
    for i in range(base.nchart):
        if i == k:
            continue  # g_kk = e contributes nothing
        mask = w[:, i] > 0
        if not np.any(mask):
            continue
        jet = bundle.transition_jet(i, k, flat[mask])
        if G.matrix:
            mc = np.linalg.inv(jet.value)[None] @ jet.deriv
        else:
            mc = jet.deriv
        mc = np.moveaxis(mc, 0, 1)  # (m, d) + E
        wi = w[mask, i].reshape((-1,) + (1,) * (mc.ndim - 1))
        out[mask] += wi * mc
    return out.reshape(X.shape[:-1] + (d,) + E)


def _contract(basis: np.ndarray, v, E: tuple) -> np.ndarray:
    """Apply a basis-valued form to tangent vectors ``v`` (shape ``(..., d)``)."""
    v = np.asarray(v, dtype=float)
    vv = v.reshape(v.shape + (1,) * len(E))
    return np.sum(basis * vv, axis=v.ndim - 1)


@dataclass
class LocalConnectionValue:
    chart: int
    point: tuple
    basis: np.ndarray

    def __call__(self, v):
        E = self.basis.shape[1:]
        return _contract(self.basis, v, E)


def local_connection(bundle: CocycleBundle, k: int, x, v=None):
    """A_k(x)(v); with ``v=None`` returns the full :class:`LocalConnectionValue`."""
    if isinstance(x, BasePoint):
        if x.chart != k:
            x = bundle.base.transfer(x.chart, k, x.array)
        else:
            x = x.array
    x = np.asarray(x, dtype=float)
    try:
        basis = connection_basis(bundle, k, x[None])[0]
    except BaseError as exc:
        raise ConnectionFormError(str(exc)) from None
    val = LocalConnectionValue(k, tuple(x.tolist()), basis)
    return val if v is None else val(v)


def gauge_transform_check(bundle: CocycleBundle, samples: int = 1000, seed: int = 0) -> float:
    """Max deviation of A_j - Ad(g_ij^-1) A_i - g_ij^-1 dg_ij over overlap samples."""
    base, G = bundle.base, bundle.group
    rng = np.random.default_rng(seed)
    worst = 0.0
    E = _alg_shape(G)
    for i in range(base.nchart):
        for j in range(base.nchart):
            if i == j or not bundle.has_transition(i, j):
                continue
            try:
                xj = base.random_overlap(i, j, rng, samples)
            except BaseError:
                continue
            xi = base.transfer(j, i, xj)
            Aj = connection_basis(bundle, j, xj)  # (n, d) + E
            Ai = connection_basis(bundle, i, xi)
            J = base.jacobian(j, i, xj)  # (n, d_i, d_j): d x_i / d x_j
            # pushed basis: A_i(J e_a) for each chart-j basis vector a
            Ai_pushed = np.stack([_contract(Ai, J[..., :, a], E) for a in range(base.dim)], axis=1)
            jet = bundle.transition_jet(i, j, xj)
            if G.matrix:
                g = jet.value
                gi = np.linalg.inv(g)
                rhs = gi[:, None] @ Ai_pushed @ g[:, None] + np.moveaxis(gi[None] @ jet.deriv, 0, 1)
            else:
                rhs = Ai_pushed + np.moveaxis(jet.deriv, 0, 1)
            dev = np.max(np.abs(Aj - rhs)) if Aj.size else 0.0
            worst = max(worst, float(dev))
    return worst


# ---------------------------------------------------------------------------
# Horizontal lifts


@dataclass
class LiftSegment:
    chart: int
    times: np.ndarray
    points: np.ndarray
    fibers: np.ndarray  # (n+1,) + element shape; abelian kinds store lifts
    certificate: float


@dataclass
class HorizontalLift:
    curve: ChartedCurve
    start: object
    segments: list = field(default_factory=list)

    @property
    def final(self):
        return self.segments[-1].fibers[-1]

    @property
    def final_chart(self) -> int:
        return self.segments[-1].chart

    @property
    def certificate(self) -> float:
        return max(s.certificate for s in self.segments)

    def fiber_at(self, t: float):
        """Fibre element at a grid time (nearest grid point)."""
        for s in self.segments:
            if s.times[0] - 1e-12 <= t <= s.times[-1] + 1e-12:
                return s.fibers[int(np.argmin(np.abs(s.times - t)))]
        raise ValueError(f"t={t} outside the curve domain")


def _velocity_field(bundle, seg, curve, t):
    """-A_k(c(t))(c'(t)) at an array of times."""
    x, v = curve.evaluate(seg, t)
    k = curve.segments[seg].chart
    basis = connection_basis(bundle, k, x)
    return -_contract(basis, v, _alg_shape(bundle.group))


def _as_lift(group: GroupSpec, g):
    return np.asarray(g, dtype=float)


def horizontal_lift(bundle: CocycleBundle, curve: ChartedCurve, start=None, steps: int = 1000,
                    certify: bool = True) -> HorizontalLift:
    """Integrate h' = -A_k(c') h chart by chart.

    Abelian kinds accumulate the lift with Simpson's rule; matrix kinds use
    a fourth-order Magnus step per interval.  Crossing into the next chart
    multiplies the fibre by the transition g_{k'k}.  The certificate is the
    largest universal-connection value found on the lifted join curve.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    G, base = bundle.group, bundle.base
    curve = replace(curve, constants={**bundle.constants, **curve.constants})
    try:
        curve.validate(base)
    except BaseError as exc:
        raise ConnectionFormError(str(exc)) from None
    g = G.identity() if start is None else start
    cur = _as_lift(G, g)
    out = HorizontalLift(curve, g)
    for si, seg in enumerate(curve.segments):
        h = (seg.t1 - seg.t0) / steps
        times = np.linspace(seg.t0, seg.t1, steps + 1)
        points, _ = curve.evaluate(si, times)
        if G.abelian:
            nodes = np.linspace(seg.t0, seg.t1, 2 * steps + 1)
            y = _velocity_field(bundle, si, curve, nodes)
            incr = h / 6.0 * (y[0:-1:2] + 4.0 * y[1::2] + y[2::2])
            fib = cur + np.concatenate([np.zeros((1,) + np.shape(cur)), np.cumsum(incr, axis=0)])
        else:
            t1 = times[:-1] + (0.5 - _GAUSS) * h
            t2 = times[:-1] + (0.5 + _GAUSS) * h
            a1 = _velocity_field(bundle, si, curve, t1)
            a2 = _velocity_field(bundle, si, curve, t2)
            omega = 0.5 * h * (a1 + a2) + (math.sqrt(3.0) / 12.0) * h * h * (a2 @ a1 - a1 @ a2)
            expo = G.exp(omega)
            fib = np.empty((steps + 1,) + np.shape(cur))
            fib[0] = cur
            for n in range(steps):
                fib[n + 1] = expo[n] @ fib[n]
        if not np.all(np.isfinite(fib)):
            raise ConnectionFormError("non-finite lift step")
        cert = _certificate(bundle, seg.chart, points, fib, h) if certify else float("nan")
        out.segments.append(LiftSegment(seg.chart, times, points, fib, cert))
        cur = fib[-1]
        if si + 1 < len(curve.segments):
            nxt = curve.segments[si + 1].chart
            jet = bundle.transition_jet(nxt, seg.chart, points[-1][None])
            cur = (jet.value[0] @ cur) if G.matrix else cur + jet.value[0]
    return out


def _certificate(bundle: CocycleBundle, k: int, points: np.ndarray, fibers: np.ndarray, h: float) -> float:
    """Universal connection on the lifted join curve at stencil-interior grid times."""
    base, G = bundle.base, bundle.group
    n = len(points)
    if n < 5:
        return float("nan")
    w = base.partition(k, points)
    elements = []
    for i in range(base.nchart):
        if not np.any(w[:, i] > 0):
            elements.append(None)
            continue
        ok = base.in_overlap(k, i, points)
        el = np.broadcast_to(np.asarray(G.identity(), dtype=float), fibers.shape).copy()
        if np.any(ok):
            jet = bundle.transition_jet(i, k, points[ok])
            if G.matrix:
                el[ok] = jet.value @ fibers[ok]
            else:
                el[ok] = jet.value + fibers[ok]
        if not G.matrix and isinstance(G, CircleU1):
            el = np.mod(el, 2.0 * math.pi)
        elements.append(el)
    weights = w.T.copy()
    for i, el in enumerate(elements):
        if el is None:
            weights[i] = 0.0
            elements[i] = np.broadcast_to(np.asarray(G.identity(), dtype=float), fibers.shape)
    vals = universal_connection_stencil(G, weights, elements, h)
    if vals is None:
        return 0.0
    return float(np.max(G.alg_norm(vals)))


def holonomy(bundle: CocycleBundle, loop: ChartedCurve, steps: int = 1000, certify: bool = True):
    """Holonomy of a closed charted loop, expressed in the starting chart.

    Returns ``(element, lift)``; abelian kinds report the unreduced lift as
    ``lift.final`` and the group element as ``element``.
    """
    base, G = bundle.base, bundle.group
    loop = replace(loop, constants={**bundle.constants, **loop.constants})
    if not loop.is_closed(base):
        raise ConnectionFormError("loop is not closed")
    lift = horizontal_lift(bundle, loop, None, steps, certify)
    val = lift.final
    k0, k1 = loop.segments[0].chart, lift.final_chart
    if k1 != k0:
        end, _ = loop.evaluate(len(loop.segments) - 1, loop.t_end)
        jet = bundle.transition_jet(k0, k1, end[None])
        val = (jet.value[0] @ val) if G.matrix else val + jet.value[0]
    elem = G.element_from_lift(val) if G.abelian else val
    return elem, val, lift


def holonomy_quadrature(bundle: CocycleBundle, loop: ChartedCurve) -> float:
    """Abelian oracle: -integral of A(c') along the loop by adaptive quadrature, plus chart jumps."""
    from scipy.integrate import quad

    G = bundle.group
    if not G.abelian:
        raise ConnectionFormError("quadrature oracle is abelian-only")
    loop = replace(loop, constants={**bundle.constants, **loop.constants})
    total = 0.0
    for si, seg in enumerate(loop.segments):
        f = lambda t, si=si: float(np.squeeze(_velocity_field(bundle, si, loop, np.array([t]))))
        val, _ = quad(f, seg.t0, seg.t1, epsabs=1e-13, epsrel=1e-13, limit=200)
        total += val
        if si + 1 < len(loop.segments):
            end, _ = loop.evaluate(si, seg.t1)
            total += float(np.squeeze(bundle.transition_jet(loop.segments[si + 1].chart, seg.chart, end[None]).value))
    k0, k1 = loop.segments[0].chart, loop.segments[-1].chart
    if k0 != k1:
        end, _ = loop.evaluate(len(loop.segments) - 1, loop.t_end)
        total += float(np.squeeze(bundle.transition_jet(k0, k1, end[None]).value))
    return total


# ---------------------------------------------------------------------------
# Curvature


def _basis_with_fallback(bundle, k, X, a, h):
    """d/dx_a of the connection basis by central differences, one-sided where needed."""
    base = bundle.base
    e = np.zeros(base.dim)
    e[a] = h
    plus, minus = X + e, X - e
    inside = base.contains(k, minus) & base.contains(k, plus)
    out = None
    if np.all(inside):
        return (connection_basis(bundle, k, plus) - connection_basis(bundle, k, minus)) / (2.0 * h)
    fwd_ok = base.contains(k, X + 2 * e)
    bwd_ok = base.contains(k, X - 2 * e)
    if not np.all(inside | fwd_ok | bwd_ok):
        raise ConnectionFormError("finite-difference stencil leaves the chart")
    shape = X.shape[:-1]
    E = _alg_shape(bundle.group)
    out = np.zeros(shape + (base.dim,) + E)
    if np.any(inside):
        out[inside] = (connection_basis(bundle, k, plus[inside]) - connection_basis(bundle, k, minus[inside])) / (2.0 * h)
    fwd = ~inside & fwd_ok
    if np.any(fwd):
        f0 = connection_basis(bundle, k, X[fwd])
        f1 = connection_basis(bundle, k, X[fwd] + e)
        f2 = connection_basis(bundle, k, X[fwd] + 2 * e)
        out[fwd] = (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h)
    bwd = ~inside & ~fwd_ok
    if np.any(bwd):
        f0 = connection_basis(bundle, k, X[bwd])
        f1 = connection_basis(bundle, k, X[bwd] - e)
        f2 = connection_basis(bundle, k, X[bwd] - 2 * e)
        out[bwd] = (3.0 * f0 - 4.0 * f1 + f2) / (2.0 * h)
    return out


def curvature_basis(bundle: CocycleBundle, k: int, X, h: float = FD_STEP) -> np.ndarray:
    """F(e_0, e_1) at points ``X`` of a surface chart; shape ``(...) + E``."""
    if bundle.base.dim != 2:
        raise ConnectionFormError("curvature needs a two-dimensional base")
    X = np.asarray(X, dtype=float)
    d0 = _basis_with_fallback(bundle, k, X, 0, h)  # d/dx_0 of (A_0, A_1)
    d1 = _basis_with_fallback(bundle, k, X, 1, h)
    A = connection_basis(bundle, k, X)
    nd = X.ndim - 1
    take = lambda arr, b: np.take(arr, b, axis=nd)
    F = take(d0, 1) - take(d1, 0)
    if bundle.group.matrix:
        A0, A1 = take(A, 0), take(A, 1)
        F = F + A0 @ A1 - A1 @ A0
    return F


def curvature(bundle: CocycleBundle, k: int, x, v, w, h: float = FD_STEP):
    """F(v, w) = dA(v, w) + [A(v), A(w)] at a point of chart k."""
    x = np.asarray(x.array if isinstance(x, BasePoint) else x, dtype=float)
    if not np.all(bundle.base.contains(k, x)):
        raise ConnectionFormError(f"point outside chart {k}")
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    F01 = curvature_basis(bundle, k, x, h)
    area = v[..., 0] * w[..., 1] - v[..., 1] * w[..., 0]
    E = _alg_shape(bundle.group)
    return F01 * np.reshape(area, np.shape(area) + (1,) * len(E))


def period_unit(group: GroupSpec) -> float:
    if isinstance(group, CircleU1):
        return 2.0 * math.pi
    if isinstance(group, IrrationalTorus):
        return 1.0
    raise ConnectionFormError(f"Chern numbers need U1 or the irrational torus, not {group.kind}")


@dataclass
class ChernResult:
    value: float
    nearest: float
    residual: float
    lattice: tuple | None = None
    grid: list = field(default_factory=list)

    def to_json(self) -> dict:
        out = {"value": self.value, "nearest": self.nearest, "residual": self.residual}
        if self.lattice is not None:
            out["lattice"] = list(self.lattice)
        return out


def chern_number(bundle: CocycleBundle, resolution: int = 256, keep_grid: bool = False) -> ChernResult:
    """Integral of the curvature divided by the group's period unit.

    U1 periods are 2pi; irrational-torus lifts are measured in the lattice
    Z + alpha Z directly, so the result is an element of that lattice.
    """
    G = bundle.group
    unit = period_unit(G)
    grid = []

    def sampler(k, X, v, w):
        F = curvature(bundle, k, X, v, w)
        if keep_grid:
            grid.append((k, X, F))
        return F

    total = integrate_2form(bundle.base, sampler, resolution) / unit
    if isinstance(G, IrrationalTorus):
        best = None
        for n in range(-G.bound, G.bound + 1):
            for m in range(-G.bound, G.bound + 1):
                r = abs(total - m - n * G.alpha)
                if best is None or r < best[0]:
                    best = (r, m, n)
        r, m, n = best
        return ChernResult(total, m + n * G.alpha, r, (m, n), grid)
    nearest = float(round(total))
    return ChernResult(total, nearest, abs(total - nearest), None, grid)
