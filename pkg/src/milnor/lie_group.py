"""Concrete structure groups.

Elements are plain numpy values with any number of leading batch axes:

* ``CircleU1``          angle in [0, 2pi)              shape ``(...)``
* ``TorusK(k)``         angle vector in [0, 2pi)^k      shape ``(..., k)``
* ``IrrationalTorus``   unreduced real lift             shape ``(...)``
* ``SO3`` / ``GLn(n)``  matrices                        shape ``(..., n, n)``

Algebra elements use the same layout (skew 3x3 for SO3, n x n for GLn).

Sign convention, used by every other module: a curve ``g(t)`` generated by an
algebra curve ``xi(t)`` solves ``g' = xi(t) g`` for matrix groups, i.e. the
right-trivialised derivative ``(R_{g^-1})_* g'`` equals ``xi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

TWO_PI = 2.0 * math.pi


class GroupKindError(ValueError):
    pass


def wrap_angle(x):
    """Reduce to [0, 2pi)."""
    r = np.mod(x, TWO_PI)
    # np.mod can return exactly 2pi for tiny negative inputs
    return np.where(r >= TWO_PI, 0.0, r) if np.ndim(r) else (0.0 if r >= TWO_PI else float(r))


def wrap_symmetric(x):
    """Reduce to [-pi, pi)."""
    return np.mod(np.asarray(x) + math.pi, TWO_PI) - math.pi


# ---------------------------------------------------------------------------
# SO(3) helpers


def hat(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    out = np.zeros(w.shape[:-1] + (3, 3))
    out[..., 0, 1] = -w[..., 2]
    out[..., 0, 2] = w[..., 1]
    out[..., 1, 0] = w[..., 2]
    out[..., 1, 2] = -w[..., 0]
    out[..., 2, 0] = -w[..., 1]
    out[..., 2, 1] = w[..., 0]
    return out


def vee(m) -> np.ndarray:
    m = np.asarray(m)
    return np.stack([m[..., 2, 1], m[..., 0, 2], m[..., 1, 0]], axis=-1)


AXES = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}


def axis_vector(axis) -> np.ndarray:
    if isinstance(axis, str):
        if axis not in AXES:
            raise ValueError(f"unknown axis {axis!r}")
        return np.array(AXES[axis])
    v = np.asarray(axis, dtype=float)
    n = np.linalg.norm(v)
    if v.shape != (3,) or n == 0:
        raise ValueError(f"bad rotation axis {axis!r}")
    return v / n


def rodrigues(omega_hat) -> np.ndarray:
    """Closed-form exponential of skew 3x3 matrices (batched)."""
    K = np.asarray(omega_hat, dtype=float)
    w = vee(K)
    theta2 = np.sum(w * w, axis=-1)
    theta = np.sqrt(theta2)
    small = theta2 < 1e-12
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0, (1.0 - np.cos(safe)) / (safe * safe))
    eye = np.broadcast_to(np.eye(3), K.shape)
    return eye + a[..., None, None] * K + b[..., None, None] * (K @ K)


def rotation(axis, angle) -> np.ndarray:
    """Rotation by ``angle`` (array allowed) about a fixed axis."""
    angle = np.asarray(angle, dtype=float)
    K = hat(axis_vector(axis))
    c = np.cos(angle)[..., None, None]
    s = np.sin(angle)[..., None, None]
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)


# ---------------------------------------------------------------------------
# Group specs


class GroupSpec:
    """Common interface; subclasses fix the element representation."""

    kind: str = ""
    abelian: bool = False
    matrix: bool = False
    tol: float = 1e-9

    # -- structure ---------------------------------------------------------
    def identity(self):
        raise NotImplementedError

    def mul(self, a, b):
        raise NotImplementedError

    def inv(self, a):
        raise NotImplementedError

    def canonical(self, g):
        return g

    def distance(self, a, b):
        raise NotImplementedError

    def equal(self, a, b, tol: float | None = None) -> bool:
        return bool(np.all(self.distance(a, b) <= (self.tol if tol is None else tol)))

    # -- infinitesimal -------------------------------------------------------
    def maurer_cartan(self, g, V):
        raise NotImplementedError

    def adjoint(self, g, xi):
        raise NotImplementedError

    def bracket(self, x, y):
        raise NotImplementedError

    def exp(self, xi):
        raise NotImplementedError

    def zero_algebra(self):
        raise NotImplementedError

    def alg_norm(self, xi):
        """Max-abs norm over the algebra axes (batched)."""
        raise NotImplementedError

    def tangent_difference(self, a, b):
        """``b - a`` in the ambient coordinates, unwrapped for angle kinds."""
        return np.asarray(b, dtype=float) - np.asarray(a, dtype=float)

    # -- bookkeeping ---------------------------------------------------------
    def check_element(self, g) -> None:
        pass

    def random_element(self, rng: np.random.Generator):
        raise NotImplementedError

    def random_algebra(self, rng: np.random.Generator):
        raise NotImplementedError

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": {}}

    def __eq__(self, other):
        return type(self) is type(other) and self.to_json() == other.to_json()

    def __hash__(self):
        return hash((self.kind, repr(sorted(self.to_json()["params"].items()))))

    def __repr__(self):
        params = ", ".join(f"{k}={v!r}" for k, v in self.to_json()["params"].items())
        return f"{type(self).__name__}({params})"


class _AbelianScalar(GroupSpec):
    abelian = True

    def identity(self):
        return 0.0

    def zero_algebra(self):
        return 0.0

    def maurer_cartan(self, g, V):
        return V

    def adjoint(self, g, xi):
        return xi

    def bracket(self, x, y):
        return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape) if np.ndim(x) or np.ndim(y) else 0.0

    def alg_norm(self, xi):
        return np.abs(xi)

    def random_algebra(self, rng):
        return float(rng.normal())


class CircleU1(_AbelianScalar):
    kind = "U1"
    period = TWO_PI

    def canonical(self, g):
        return wrap_angle(g)

    def mul(self, a, b):
        return wrap_angle(np.add(a, b))

    def inv(self, a):
        return wrap_angle(np.negative(a))

    def exp(self, xi):
        return wrap_angle(xi)

    def element_from_lift(self, lift):
        return wrap_angle(lift)

    def distance(self, a, b):
        return np.abs(wrap_symmetric(np.subtract(a, b)))

    def tangent_difference(self, a, b):
        return wrap_symmetric(np.subtract(b, a))

    def random_element(self, rng):
        return float(rng.uniform(0.0, TWO_PI))


class IrrationalTorus(_AbelianScalar):
    """R / (Z + alpha Z), elements stored as unreduced real lifts."""

    kind = "IrrationalTorus"
    period = 1.0

    def __init__(self, alpha: float, bound: int = 10):
        if bound < 1:
            raise ValueError("lattice bound must be >= 1")
        self.alpha = float(alpha)
        self.bound = int(bound)

    def mul(self, a, b):
        return np.add(a, b) if np.ndim(a) or np.ndim(b) else float(a) + float(b)

    def inv(self, a):
        return np.negative(a) if np.ndim(a) else -float(a)

    def exp(self, xi):
        return xi

    def element_from_lift(self, lift):
        return lift

    def distance(self, a, b):
        """Smallest |a - b - m - n alpha| over the bounded lattice."""
        d = np.asarray(np.subtract(a, b), dtype=float)
        r = np.arange(-self.bound, self.bound + 1, dtype=float)
        lattice = (r[:, None] + self.alpha * r[None, :]).ravel()
        out = np.min(np.abs(d[..., None] - lattice), axis=-1)
        return out if out.ndim else float(out)

    def random_element(self, rng):
        return float(rng.uniform(-2.0, 2.0))

    def to_json(self):
        return {"kind": self.kind, "params": {"alpha": self.alpha, "bound": self.bound}}


class TorusK(GroupSpec):
    kind = "TorusK"
    abelian = True
    period = TWO_PI

    def __init__(self, k: int):
        if k < 1:
            raise ValueError("torus dimension must be >= 1")
        self.k = int(k)

    def _check(self, a):
        a = np.asarray(a, dtype=float)
        if a.shape[-1:] != (self.k,):
            raise GroupKindError(f"expected trailing axis {self.k}, got shape {a.shape}")
        return a

    def identity(self):
        return np.zeros(self.k)

    def zero_algebra(self):
        return np.zeros(self.k)

    def canonical(self, g):
        return wrap_angle(self._check(g))

    def mul(self, a, b):
        return wrap_angle(self._check(a) + self._check(b))

    def inv(self, a):
        return wrap_angle(-self._check(a))

    def exp(self, xi):
        return wrap_angle(self._check(xi))

    def element_from_lift(self, lift):
        return wrap_angle(self._check(lift))

    def distance(self, a, b):
        return np.max(np.abs(wrap_symmetric(self._check(a) - self._check(b))), axis=-1)

    def tangent_difference(self, a, b):
        return wrap_symmetric(self._check(b) - self._check(a))

    def maurer_cartan(self, g, V):
        return self._check(V)

    def adjoint(self, g, xi):
        return self._check(xi)

    def bracket(self, x, y):
        return np.zeros(np.broadcast(self._check(x), self._check(y)).shape)

    def alg_norm(self, xi):
        return np.max(np.abs(self._check(xi)), axis=-1)

    def random_element(self, rng):
        return rng.uniform(0.0, TWO_PI, size=self.k)

    def random_algebra(self, rng):
        return rng.normal(size=self.k)

    def to_json(self):
        return {"kind": self.kind, "params": {"k": self.k}}


class _MatrixGroup(GroupSpec):
    matrix = True
    n = 0

    def _check(self, a):
        a = np.asarray(a, dtype=float)
        if a.shape[-2:] != (self.n, self.n):
            raise GroupKindError(f"expected {self.n}x{self.n} matrices, got shape {a.shape}")
        return a

    def identity(self):
        return np.eye(self.n)

    def zero_algebra(self):
        return np.zeros((self.n, self.n))

    def mul(self, a, b):
        return self._check(a) @ self._check(b)

    def inv(self, a):
        return np.linalg.inv(self._check(a))

    def distance(self, a, b):
        return np.max(np.abs(self._check(a) - self._check(b)), axis=(-2, -1))

    def maurer_cartan(self, g, V):
        return self.inv(g) @ self._check(V)

    def adjoint(self, g, xi):
        g = self._check(g)
        return g @ self._check(xi) @ self.inv(g)

    def bracket(self, x, y):
        x, y = self._check(x), self._check(y)
        return x @ y - y @ x

    def alg_norm(self, xi):
        return np.max(np.abs(self._check(xi)), axis=(-2, -1))


class SO3(_MatrixGroup):
    kind = "SO3"
    n = 3

    def inv(self, a):
        return np.swapaxes(self._check(a), -1, -2)

    def exp(self, xi):
        return rodrigues(self._check(xi))

    def check_element(self, g):
        g = self._check(g)
        orth = np.max(np.abs(np.swapaxes(g, -1, -2) @ g - np.eye(3)))
        det = np.linalg.det(g)
        if orth > 1e-9 or np.any(np.abs(det - 1.0) > 1e-9):
            raise GroupKindError(f"not a rotation (orthogonality defect {orth:.2e})")

    def check_algebra(self, xi):
        xi = self._check(xi)
        if np.max(np.abs(xi + np.swapaxes(xi, -1, -2))) > 1e-12:
            raise GroupKindError("not skew-symmetric")

    def random_element(self, rng):
        return rodrigues(hat(rng.normal(size=3) * 1.5))

    def random_algebra(self, rng):
        return hat(rng.normal(size=3))


class GLn(_MatrixGroup):
    kind = "GLn"

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("matrix dimension must be >= 1")
        self.n = int(n)

    def exp(self, xi):
        # scaling-and-squaring Pade
        return scipy.linalg.expm(self._check(xi))

    def check_element(self, g):
        if np.any(np.abs(np.linalg.det(self._check(g))) <= 1e-12):
            raise GroupKindError("singular matrix")

    def random_element(self, rng):
        return scipy.linalg.expm(0.5 * rng.normal(size=(self.n, self.n)))

    def random_algebra(self, rng):
        return rng.normal(size=(self.n, self.n))

    def to_json(self):
        return {"kind": self.kind, "params": {"n": self.n}}


def group_from_json(data: dict) -> GroupSpec:
    kind = data.get("kind")
    params = data.get("params", {}) or {}
    if kind in ("U1", "CircleU1"):
        return CircleU1()
    if kind == "TorusK":
        return TorusK(int(params["k"]))
    if kind == "IrrationalTorus":
        alpha = params["alpha"]
        if isinstance(alpha, str):
            from .exprlang import evaluate

            alpha = float(evaluate(alpha, {}))
        return IrrationalTorus(float(alpha), int(params.get("bound", 10)))
    if kind == "SO3":
        return SO3()
    if kind == "GLn":
        return GLn(int(params["n"]))
    raise ValueError(f"unknown group kind {kind!r}")


# ---------------------------------------------------------------------------
# Irrational torus equality


@dataclass(frozen=True)
class AlphaDecision:
    equal: bool
    m: int | None = None
    n: int | None = None


def torus_alpha_equal(x: float, y: float, spec: IrrationalTorus, tol: float = 1e-9) -> AlphaDecision:
    """Decide x ~ y in R/(Z + alpha Z) by exhaustive search over |m|, |n| <= B."""
    d = float(x) - float(y)
    best = None
    for n in range(-spec.bound, spec.bound + 1):
        for m in range(-spec.bound, spec.bound + 1):
            r = abs(d - m - n * spec.alpha)
            if r <= tol and (best is None or r < best[0]):
                best = (r, m, n)
    if best is None:
        return AlphaDecision(False)
    return AlphaDecision(True, best[1], best[2])


# ---------------------------------------------------------------------------
# Exponential ODE


_GAUSS_OFFSET = math.sqrt(3.0) / 6.0


@dataclass
class ExpCurve:
    """Solution of g(0) = e, (R_{g^-1})_* g' = xi(t) on the step grid."""

    group: GroupSpec
    xi: Callable
    times: np.ndarray
    values: list
    lifts: np.ndarray | None = None

    def __call__(self, t: float):
        h = self.times[1] - self.times[0]
        i = int(np.clip(np.floor(t / h + 1e-9), 0, len(self.times) - 1))
        if abs(self.times[i] - t) <= 1e-12:
            return self.values[i]
        if self.lifts is not None:
            lift = self.lifts[i] + _simpson_step(self.xi, self.times[i], t - self.times[i])
            return self.group.element_from_lift(lift)
        return _magnus_step(self.group, self.xi, self.times[i], t - self.times[i]) @ self.values[i]


def _sample(xi, t):
    v = np.asarray(xi(t), dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"non-finite algebra sample at t={t}")
    return v


def _simpson_step(xi, t, h):
    return h / 6.0 * (_sample(xi, t) + 4.0 * _sample(xi, t + 0.5 * h) + _sample(xi, t + h))


def _magnus_step(group, xi, t, h):
    """Fourth-order Magnus step: exp(h/2 (A1+A2) + sqrt(3)/12 h^2 [A2, A1])."""
    a1 = _sample(xi, t + (0.5 - _GAUSS_OFFSET) * h)
    a2 = _sample(xi, t + (0.5 + _GAUSS_OFFSET) * h)
    omega = 0.5 * h * (a1 + a2) + (math.sqrt(3.0) / 12.0) * h * h * (a2 @ a1 - a1 @ a2)
    return group.exp(omega)


def exp_curve(spec: GroupSpec, xi: Callable, steps: int) -> ExpCurve:
    """Integrate the regular-group exponential ODE on [0, 1].

    Matrix groups use a fourth-order Magnus step ``g <- exp(Omega) g``
    (Rodrigues for SO3, Pade for GLn); abelian groups accumulate the lift by
    Simpson's rule.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    times = np.linspace(0.0, 1.0, steps + 1)
    h = 1.0 / steps
    if spec.abelian:
        lift = np.asarray(spec.zero_algebra(), dtype=float)
        lifts = [lift]
        for t in times[:-1]:
            lift = lift + _simpson_step(xi, t, h)
            lifts.append(lift)
        lifts = np.array(lifts)
        values = [spec.element_from_lift(v) for v in lifts]
        return ExpCurve(spec, xi, times, values, lifts)
    g = spec.identity()
    values = [g]
    for t in times[:-1]:
        g = _magnus_step(spec, xi, t, h) @ g
        values.append(g)
    return ExpCurve(spec, xi, times, values)
