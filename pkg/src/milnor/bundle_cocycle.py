"""Principal bundles as transition-function data over a catalog base.

Convention: ``transitions[(i, j)]`` is the map g_ij on the overlap of charts
i and j, written in the coordinates of chart ``j``, so that a point with
fibre coordinate ``g`` in chart j has fibre coordinate ``g_ij(x) g`` in
chart i.  The cocycle identity reads g_ij g_jk = g_ik.

Group-valued functions come from a small catalog of families whose
parameters are expressions in the chart coordinates.  Every family
evaluates to a *jet*: the value (lift for abelian kinds, matrix otherwise)
together with its derivatives with respect to the dual-number slots of the
environment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .base_complex import BaseComplex, S2TwoDisks, catalog
from .exprlang import Dual, Expr, eval_dual, parse, substitute, to_text
from .lie_group import (
    GroupSpec,
    IrrationalTorus,
    SO3,
    CircleU1,
    axis_vector,
    group_from_json,
    hat,
    rotation,
    wrap_symmetric,
)


class BundleError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Jets


@dataclass
class Jet:
    """Group-valued function value with first derivatives.

    ``value`` has shape ``S + E`` (``E`` the element shape) and ``deriv``
    shape ``(nslots,) + S + E``.  Abelian kinds carry the unreduced lift.
    """

    value: np.ndarray
    deriv: np.ndarray


def jet_identity(group: GroupSpec, shape, nslots: int) -> Jet:
    e = np.asarray(group.identity(), dtype=float)
    v = np.broadcast_to(e, tuple(shape) + e.shape).copy()
    return Jet(v, np.zeros((nslots,) + v.shape))


def jet_mul(group: GroupSpec, a: Jet, b: Jet) -> Jet:
    if group.matrix:
        return Jet(a.value @ b.value, a.deriv @ b.value + a.value @ b.deriv)
    return Jet(a.value + b.value, a.deriv + b.deriv)


def jet_inv(group: GroupSpec, a: Jet) -> Jet:
    if group.matrix:
        ai = np.linalg.inv(a.value)
        return Jet(ai, -(ai @ a.deriv @ ai))
    return Jet(-a.value, -a.deriv)


def _dual_broadcast(d: Dual, shape) -> tuple[np.ndarray, np.ndarray]:
    v = np.broadcast_to(np.asarray(d.value, dtype=float), shape)
    dv = np.broadcast_to(d.deriv.reshape(d.deriv.shape + (1,) * (len(shape) - d.deriv.ndim + 1)), (d.nslots,) + tuple(shape))
    return v, dv


def _env_shape(env: Mapping[str, Dual]) -> tuple:
    shapes = [np.shape(d.value) for d in env.values()]
    return np.broadcast_shapes(*shapes) if shapes else ()


# ---------------------------------------------------------------------------
# Families


class Family:
    kinds: tuple[str, ...] = ()

    def jet(self, group: GroupSpec, env: Mapping[str, Dual], constants: Mapping | None) -> Jet:
        raise NotImplementedError

    def substitute(self, mapping: Mapping[str, Expr]) -> "Family":
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    def check_group(self, group: GroupSpec) -> None:
        if self.kinds and group.kind not in self.kinds:
            raise BundleError(f"family {self.to_json()['family']!r} does not fit group {group.kind}")


def _ex(e) -> Expr:
    return parse(e) if isinstance(e, str) else e


def _scalar(e: Expr, env, constants, shape) -> tuple[np.ndarray, np.ndarray]:
    return _dual_broadcast(eval_dual(e, env, constants), shape)


@dataclass(frozen=True)
class IdentityFamily(Family):
    def jet(self, group, env, constants):
        return jet_identity(group, _env_shape(env), next(iter(env.values())).nslots)

    def substitute(self, mapping):
        return self

    def to_json(self):
        return {"family": "identity"}


@dataclass(frozen=True)
class AngleFamily(Family):
    """U1 angle or irrational-torus lift given by one expression."""

    expr: Expr
    kinds = ("U1", "IrrationalTorus")

    def jet(self, group, env, constants):
        self.check_group(group)
        v, d = _scalar(self.expr, env, constants, _env_shape(env))
        return Jet(np.array(v), np.array(d))

    def substitute(self, mapping):
        return AngleFamily(substitute(self.expr, mapping))

    def to_json(self):
        return {"family": "angle", "expr": to_text(self.expr)}


@dataclass(frozen=True)
class AnglesFamily(Family):
    exprs: tuple[Expr, ...]
    kinds = ("TorusK",)

    def jet(self, group, env, constants):
        self.check_group(group)
        if len(self.exprs) != group.k:
            raise BundleError(f"angles family has {len(self.exprs)} entries for a {group.k}-torus")
        shape = _env_shape(env)
        parts = [_scalar(e, env, constants, shape) for e in self.exprs]
        return Jet(np.stack([p[0] for p in parts], axis=-1), np.stack([p[1] for p in parts], axis=-1))

    def substitute(self, mapping):
        return AnglesFamily(tuple(substitute(e, mapping) for e in self.exprs))

    def to_json(self):
        return {"family": "angles", "exprs": [to_text(e) for e in self.exprs]}


@dataclass(frozen=True)
class RotationFamily(Family):
    """SO3 rotation about a fixed axis by an expression-valued angle."""

    axis: tuple[float, float, float]
    angle: Expr
    kinds = ("SO3",)

    def jet(self, group, env, constants):
        self.check_group(group)
        th, dth = _scalar(self.angle, env, constants, _env_shape(env))
        R = rotation(self.axis, th)
        K = hat(axis_vector(self.axis))
        return Jet(R, (R @ K)[None] * dth[..., None, None])

    def substitute(self, mapping):
        return RotationFamily(self.axis, substitute(self.angle, mapping))

    def to_json(self):
        axis = next((k for k, v in {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}.items()
                     if tuple(axis_vector(self.axis)) == v), list(axis_vector(self.axis)))
        return {"family": "rotation", "axis": axis, "angle": to_text(self.angle)}


@dataclass(frozen=True)
class PlaneRotationFamily(Family):
    """GLn rotation in the (i, j) coordinate plane."""

    i: int
    j: int
    angle: Expr
    kinds = ("GLn",)

    def jet(self, group, env, constants):
        self.check_group(group)
        n = group.n
        if not (0 <= self.i < n and 0 <= self.j < n and self.i != self.j):
            raise BundleError(f"bad rotation plane ({self.i}, {self.j}) for n={n}")
        th, dth = _scalar(self.angle, env, constants, _env_shape(env))
        K = np.zeros((n, n))
        K[self.j, self.i] = 1.0
        K[self.i, self.j] = -1.0
        c, s = np.cos(th)[..., None, None], np.sin(th)[..., None, None]
        R = np.eye(n) + s * K + (1.0 - c) * (K @ K)
        dR = c * K + s * (K @ K)
        return Jet(R, dR[None] * dth[..., None, None])

    def substitute(self, mapping):
        return PlaneRotationFamily(self.i, self.j, substitute(self.angle, mapping))

    def to_json(self):
        return {"family": "plane_rotation", "i": self.i, "j": self.j, "angle": to_text(self.angle)}


@dataclass(frozen=True)
class DiagLogFamily(Family):
    """GLn diagonal matrix diag(exp(e_1), ..., exp(e_n))."""

    exprs: tuple[Expr, ...]
    kinds = ("GLn",)

    def jet(self, group, env, constants):
        self.check_group(group)
        if len(self.exprs) != group.n:
            raise BundleError(f"diag_log family has {len(self.exprs)} entries for n={group.n}")
        shape = _env_shape(env)
        n = group.n
        v = np.zeros(tuple(shape) + (n, n))
        d = np.zeros((next(iter(env.values())).nslots,) + tuple(shape) + (n, n))
        for a, e in enumerate(self.exprs):
            s, ds = _scalar(e, env, constants, shape)
            v[..., a, a] = np.exp(s)
            d[..., a, a] = np.exp(s) * ds
        return Jet(v, d)

    def substitute(self, mapping):
        return DiagLogFamily(tuple(substitute(e, mapping) for e in self.exprs))

    def to_json(self):
        return {"family": "diag_log", "exprs": [to_text(e) for e in self.exprs]}


@dataclass(frozen=True)
class ProductFamily(Family):
    factors: tuple[Family, ...]

    def jet(self, group, env, constants):
        out = self.factors[0].jet(group, env, constants)
        for f in self.factors[1:]:
            out = jet_mul(group, out, f.jet(group, env, constants))
        return out

    def substitute(self, mapping):
        return ProductFamily(tuple(f.substitute(mapping) for f in self.factors))

    def to_json(self):
        return {"family": "product", "factors": [f.to_json() for f in self.factors]}


@dataclass(frozen=True)
class InverseFamily(Family):
    inner: Family

    def jet(self, group, env, constants):
        return jet_inv(group, self.inner.jet(group, env, constants))

    def substitute(self, mapping):
        return InverseFamily(self.inner.substitute(mapping))

    def to_json(self):
        return {"family": "inverse", "of": self.inner.to_json()}


@dataclass(frozen=True)
class JetFamily(Family):
    """Escape hatch: any callable ``(group, env, constants) -> Jet``.  Not serialisable."""

    fn: Callable
    label: str = "callable"

    def jet(self, group, env, constants):
        return self.fn(group, env, constants)

    def substitute(self, mapping):
        raise BundleError("callable families cannot be substituted")

    def to_json(self):
        return {"family": self.label}


def family_from_json(data) -> Family:
    if not isinstance(data, dict) or "family" not in data:
        raise BundleError(f"family descriptor must be an object with a 'family' key, got {data!r}")
    kind = data["family"]
    if kind == "identity":
        return IdentityFamily()
    if kind in ("angle", "lift"):
        return AngleFamily(_ex(data["expr"]))
    if kind == "angles":
        return AnglesFamily(tuple(_ex(e) for e in data["exprs"]))
    if kind == "rotation":
        axis = data.get("axis", "z")
        return RotationFamily(tuple(axis_vector(axis)), _ex(data["angle"]))
    if kind == "plane_rotation":
        return PlaneRotationFamily(int(data["i"]), int(data["j"]), _ex(data["angle"]))
    if kind == "diag_log":
        return DiagLogFamily(tuple(_ex(e) for e in data["exprs"]))
    if kind == "product":
        return ProductFamily(tuple(family_from_json(f) for f in data["factors"]))
    if kind == "inverse":
        return InverseFamily(family_from_json(data["of"]))
    raise BundleError(f"unknown family {kind!r}")


# ---------------------------------------------------------------------------
# Bundles


@dataclass
class CocycleBundle:
    base: BaseComplex
    group: GroupSpec
    transitions: dict[tuple[int, int], Family] = field(default_factory=dict)

    def __post_init__(self):
        for (i, j), fam in self.transitions.items():
            self.base.chart(i)
            self.base.chart(j)
            fam.check_group(self.group)

    @property
    def constants(self) -> dict:
        if isinstance(self.group, IrrationalTorus):
            return {"alpha": self.group.alpha}
        return {}

    def env(self, k: int, coords) -> dict:
        names = self.base.chart(k).coords
        return dict(zip(names, coords))

    def _family_jet(self, i: int, k: int, coords: list) -> Jet | None:
        """Jet of g_ik at Dual coordinates of chart k, or None if not stored."""
        if i == k:
            shape = np.shape(coords[0].value)
            return jet_identity(self.group, shape, coords[0].nslots)
        if (i, k) in self.transitions:
            return self.transitions[(i, k)].jet(self.group, self.env(k, coords), self.constants)
        if (k, i) in self.transitions:
            y = self.base.transfer(k, i, coords)
            y = [c if isinstance(c, Dual) else Dual.constant(c, coords[0].nslots) for c in y]
            inner = self.transitions[(k, i)].jet(self.group, self.env(i, y), self.constants)
            return jet_inv(self.group, inner)
        return None

    def transition_jet(self, i: int, k: int, x) -> Jet:
        """g_ik at points ``x`` (chart k, shape ``(..., d)``) with chart-k derivatives."""
        x = np.asarray(x, dtype=float)
        d = self.base.dim
        coords = [Dual.variable(x[..., a], a, d) for a in range(d)]
        out = self._family_jet(i, k, coords)
        if out is None:
            raise BundleError(f"no transition between charts {i} and {k}")
        return out

    def has_transition(self, i: int, k: int) -> bool:
        return i == k or (i, k) in self.transitions or (k, i) in self.transitions

    def transition(self, i: int, k: int, x):
        """Group element g_ik(x), canonicalised."""
        v = self.transition_jet(i, k, x).value
        if self.group.abelian:
            return self.group.element_from_lift(v)
        return v

    def to_json(self) -> dict:
        return {
            "base": self.base.name,
            "group": self.group.to_json(),
            "transitions": {f"{i},{j}": fam.to_json() for (i, j), fam in sorted(self.transitions.items())},
            "partition": {"eps": self.base.eps},
        }


def bundle_from_json(data: dict) -> CocycleBundle:
    try:
        eps = float((data.get("partition") or {}).get("eps", 0.1))
        base = catalog(data["base"], eps)
        group = group_from_json(data["group"])
        transitions = {}
        for key, fam in (data.get("transitions") or {}).items():
            parts = key.split(",")
            if len(parts) != 2:
                raise BundleError(f"transition key must look like 'i,j', got {key!r}")
            transitions[(int(parts[0]), int(parts[1]))] = family_from_json(fam)
    except KeyError as exc:
        raise BundleError(f"missing field {exc}") from None
    return CocycleBundle(base, group, transitions)


# ---------------------------------------------------------------------------
# Validation


@dataclass
class ValidationReport:
    samples: int
    max_identity: float = 0.0
    max_inverse: float = 0.0
    max_cocycle: float = 0.0
    failures: list = field(default_factory=list)
    tol: float = 1e-9

    @property
    def ok(self) -> bool:
        return max(self.max_identity, self.max_inverse, self.max_cocycle) <= self.tol and not self.failures

    def to_json(self) -> dict:
        return {
            "samples": self.samples,
            "max_identity": self.max_identity,
            "max_inverse": self.max_inverse,
            "max_cocycle": self.max_cocycle,
            "failures": self.failures,
            "ok": self.ok,
        }


def _dist(group: GroupSpec, a, b) -> float:
    d = group.distance(a, b)
    return float(np.max(d)) if np.size(d) else 0.0


def _triple_points(base: BaseComplex, charts, rng, n):
    out = []
    for _ in range(50):
        g = base.random_global(rng, 8 * n)
        mask = np.all([base._global_in_chart(c, g) for c in charts], axis=0)
        out.append(g[mask])
        if sum(len(o) for o in out) >= n:
            break
    g = np.concatenate(out)[:n]
    return g


def validate(bundle: CocycleBundle, samples: int = 200, seed: int = 0, tol: float = 1e-9) -> ValidationReport:
    """Check g_ii = e, g_ji = g_ij^-1 and g_ij g_jk = g_ik at random points."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    base, G = bundle.base, bundle.group
    rep = ValidationReport(samples, tol=tol)
    M = base.nchart
    for i in range(M):
        if (i, i) in bundle.transitions:
            g = base.from_global(i, _triple_points(base, [i], rng, samples))
            v = bundle.transitions[(i, i)].jet(G, bundle.env(i, [Dual.constant(g[..., a], 1) for a in range(base.dim)]), bundle.constants).value
            v = G.element_from_lift(v) if G.abelian else v
            rep.max_identity = max(rep.max_identity, _dist(G, v, G.identity()))
    for i in range(M):
        for j in range(M):
            if i >= j:
                continue
            g = _triple_points(base, [i, j], rng, samples)
            if len(g) == 0:
                continue
            if not bundle.has_transition(i, j):
                rep.failures.append(f"missing transition between charts {i} and {j}")
                continue
            xj = base.from_global(j, g)
            xi = base.from_global(i, g)
            gij = bundle.transition(i, j, xj)
            gji = bundle.transition(j, i, xi)
            rep.max_inverse = max(rep.max_inverse, _dist(G, G.mul(gji, gij), G.identity()))
    for i in range(M):
        for j in range(M):
            for k in range(M):
                if len({i, j, k}) < 3:
                    continue
                g = _triple_points(base, [i, j, k], rng, samples)
                if len(g) == 0 or not (bundle.has_transition(i, j) and bundle.has_transition(j, k) and bundle.has_transition(i, k)):
                    continue
                xj, xk = base.from_global(j, g), base.from_global(k, g)
                lhs = G.mul(bundle.transition(i, j, xj), bundle.transition(j, k, xk))
                rhs = bundle.transition(i, k, xk)
                rep.max_cocycle = max(rep.max_cocycle, _dist(G, lhs, rhs))
    if rep.max_inverse > tol:
        rep.failures.append(f"inverse identity violated ({rep.max_inverse:.3e})")
    if rep.max_cocycle > tol:
        rep.failures.append(f"cocycle identity violated ({rep.max_cocycle:.3e})")
    if rep.max_identity > tol:
        rep.failures.append(f"identity g_ii = e violated ({rep.max_identity:.3e})")
    return rep


# ---------------------------------------------------------------------------
# Constructions


def trivial_bundle(base: BaseComplex | str, group: GroupSpec) -> CocycleBundle:
    base = catalog(base) if isinstance(base, str) else base
    trans = {(i, j): IdentityFamily() for (i, j) in base.overlaps()}
    return CocycleBundle(base, group, trans)


def clutching_bundle(group: GroupSpec, clutch, eps: float = 0.1) -> CocycleBundle:
    """Bundle over the two-disk sphere glued along the equatorial annulus.

    ``clutch``: winding n for U1, lattice pair (m, n) for the irrational
    torus (loop phi -> (m + n alpha) phi / 2pi), integer k for SO3 (loop
    phi -> rot_z(k phi)).  g_10 is the loop; g_01 its inverse.
    """
    base = S2TwoDisks(eps)
    if isinstance(group, CircleU1):
        n = int(clutch)
        fwd, back = AngleFamily(parse(f"{n}*phi")), AngleFamily(parse(f"{-n}*phi"))
    elif isinstance(group, IrrationalTorus):
        m, n = (int(c) for c in clutch)
        fwd = AngleFamily(parse(f"({m} + {n}*alpha)*phi/(2*pi)"))
        back = AngleFamily(parse(f"-({m} + {n}*alpha)*phi/(2*pi)"))
    elif isinstance(group, SO3):
        k = int(clutch)
        fwd = RotationFamily((0.0, 0.0, 1.0), parse(f"{k}*phi"))
        back = RotationFamily((0.0, 0.0, 1.0), parse(f"{-k}*phi"))
    else:
        raise BundleError(f"no clutching construction for {group.kind}")
    return CocycleBundle(base, group, {(1, 0): fwd, (0, 1): back})


def equator_winding(bundle: CocycleBundle, samples: int = 4096) -> float:
    """Total lift change of g_10 once around the equator, in group periods.

    U1 lifts are accumulated from wrapped increments; the irrational torus
    returns the raw lift change (an element of Z + alpha Z).
    """
    phi = np.linspace(0.0, 2.0 * math.pi, samples + 1)
    x = np.stack([np.ones_like(phi), phi], axis=-1)
    G = bundle.group
    if isinstance(G, CircleU1):
        g = bundle.transition(1, 0, x)
        return float(np.sum(wrap_symmetric(np.diff(g))) / (2.0 * math.pi))
    if isinstance(G, IrrationalTorus):
        lift = bundle.transition_jet(1, 0, x).value
        return float(lift[-1] - lift[0])
    raise BundleError(f"winding not defined for {G.kind}")


def coboundary(bundle: CocycleBundle, lambdas: Mapping[int, Family]) -> CocycleBundle:
    """Gauge-equivalent bundle with g'_ij = lambda_i g_ij lambda_j^-1.

    ``lambdas[i]`` is a family in chart-i coordinates; missing charts use e.
    """
    G, base = bundle.group, bundle.base

    def lam(i, coords):
        fam = lambdas.get(i, IdentityFamily())
        return fam.jet(G, bundle.env(i, coords), bundle.constants)

    def make(i, j):
        def fn(group, env, constants):
            xj = [env[n] for n in base.chart(j).coords]
            xi = base.transfer(j, i, xj)
            xi = [c if isinstance(c, Dual) else Dual.constant(c, xj[0].nslots) for c in xi]
            gij = bundle._family_jet(i, j, xj)
            return jet_mul(G, jet_mul(G, lam(i, xi), gij), jet_inv(G, lam(j, xj)))

        return JetFamily(fn, "coboundary")

    trans = {}
    for (i, j) in base.overlaps():
        trans[(i, j)] = make(i, j)
        trans[(j, i)] = make(j, i)
    return CocycleBundle(base, G, trans)


@dataclass(frozen=True)
class BaseMap:
    """Map between catalog bases: source chart k -> (target chart, coordinate exprs in chart k)."""

    source: BaseComplex
    target: BaseComplex
    charts: dict

    def apply(self, k: int, x) -> np.ndarray:
        tgt, exprs = self.charts[k]
        x = np.asarray(x, dtype=float)
        env = {n: Dual.constant(x[..., a], 1) for a, n in enumerate(self.source.chart(k).coords)}
        return np.stack([np.broadcast_to(eval_dual(e, env).value, x.shape[:-1]) for e in exprs], axis=-1)


def pullback(bundle: CocycleBundle, fmap: BaseMap, samples: int = 200, seed: int = 0) -> CocycleBundle:
    """Pull the cocycle back along a chart-wise base map and validate it."""
    if fmap.target.name != bundle.base.name:
        raise BundleError("base map target does not match the bundle base")
    src = fmap.source
    rng = np.random.default_rng(seed)
    # the chart assignment must be consistent on overlaps
    for k in range(src.nchart):
        if k not in fmap.charts:
            raise BundleError(f"no chart assignment for source chart {k}")
        fmap.charts[k] = (fmap.charts[k][0], tuple(_ex(e) for e in fmap.charts[k][1]))
    for k in range(src.nchart):
        tk = fmap.charts[k][0]
        pts = src.from_global(k, _triple_points(src, [k], rng, samples))
        if not np.all(fmap.target.contains(tk, fmap.apply(k, pts))):
            raise BundleError(f"source chart {k} is not mapped into target chart {tk}")
        for j in range(src.nchart):
            if j == k:
                continue
            g = _triple_points(src, [k, j], rng, samples)
            if len(g) == 0:
                continue
            yk = fmap.apply(k, src.from_global(k, g))
            yj = fmap.apply(j, src.from_global(j, g))
            tj = fmap.charts[j][0]
            if not fmap.target.same_point(tk, yk, tj, yj, 1e-8):
                raise BundleError(f"chart assignment inconsistent on the overlap of charts {k} and {j}")

    trans = {}
    for (i, j) in src.overlaps():
        for a, b in ((i, j), (j, i)):
            ta, (tb, exprs) = fmap.charts[a][0], fmap.charts[b]
            if ta == tb:
                trans[(a, b)] = IdentityFamily()
                continue
            mapping = dict(zip(fmap.target.chart(tb).coords, exprs))
            if (ta, tb) in bundle.transitions and not isinstance(bundle.transitions[(ta, tb)], JetFamily):
                trans[(a, b)] = bundle.transitions[(ta, tb)].substitute(mapping)
                continue

            def fn(group, env, constants, ta=ta, tb=tb, exprs=exprs):
                y = [eval_dual(e, env, constants) for e in exprs]
                return bundle._family_jet(ta, tb, y)

            trans[(a, b)] = JetFamily(fn, "pullback")
    out = CocycleBundle(src, bundle.group, trans)
    rep = validate(out, samples, seed)
    if not rep.ok:
        raise BundleError(f"pulled-back cocycle fails validation: {rep.failures}")
    return out
