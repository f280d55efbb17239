"""Independent reference computations shared by the test modules."""

from __future__ import annotations

import math

import numpy as np

from milnor.exprlang import BinOp, Call, EvalDomainError, Neg, Num, Var, eval_dual, evaluate

VARS = ("u", "v", "w")


def random_expression(rng: np.random.Generator, depth: int):
    """Random AST of depth <= ``depth`` over u, v, w."""
    if depth <= 0 or rng.random() < 0.25:
        if rng.random() < 0.6:
            return Var(VARS[int(rng.integers(3))])
        return Num(float(np.round(rng.uniform(-2.0, 2.0), 3)))
    r = rng.random()
    if r < 0.45:
        op = "+-*/^"[int(rng.integers(5))]
        left = random_expression(rng, depth - 1)
        if op == "^":
            return BinOp("^", left, Num(float(rng.integers(2, 4))))
        return BinOp(op, left, random_expression(rng, depth - 1))
    if r < 0.55:
        return Neg(random_expression(rng, depth - 1))
    if r < 0.65:
        return Call("atan2", (random_expression(rng, depth - 1), random_expression(rng, depth - 1)))
    func = ("sin", "cos", "exp", "log", "sqrt", "tan", "abs")[int(rng.integers(7))]
    inner = random_expression(rng, depth - 1)
    if func in ("log", "sqrt"):
        inner = BinOp("+", Num(1.5), BinOp("^", inner, Num(2.0)))
    if func == "exp":
        inner = Call("sin", (inner,))
    return Call(func, (inner,))


def central_gradient(expr, point: dict, h: float) -> np.ndarray:
    out = []
    for name in VARS:
        hi = dict(point)
        lo = dict(point)
        hi[name] += h
        lo[name] -= h
        out.append((float(evaluate(expr, hi)) - float(evaluate(expr, lo))) / (2.0 * h))
    return np.array(out)


def dual_gradient(expr, point: dict) -> tuple[float, np.ndarray]:
    from milnor.exprlang import Dual

    env = {n: Dual.variable(point[n], a, 3) for a, n in enumerate(VARS)}
    d = eval_dual(expr, env)
    return float(d.value), np.asarray(d.deriv, dtype=float)


def well_conditioned_sample(rng, depth: int = 5):
    """(expr, point, ad, fd) where the finite difference itself is trustworthy.

    A sample is kept when the expression evaluates cleanly in a box around the
    point and the h = 1e-6 difference agrees with an h = 1e-4 Richardson
    estimate, so a disagreement with the dual derivative is the dual's fault.
    """
    while True:
        e = random_expression(rng, depth)
        p = {n: float(rng.uniform(-1.5, 1.5)) for n in VARS}
        try:
            val, ad = dual_gradient(e, p)
            fd = central_gradient(e, p, 1e-6)
            c1 = central_gradient(e, p, 1e-4)
            c2 = central_gradient(e, p, 5e-5)
        except (EvalDomainError, ZeroDivisionError, OverflowError, FloatingPointError):
            continue
        if not (np.all(np.isfinite(fd)) and abs(val) < 1e6 and np.all(np.abs(ad) < 1e6)):
            continue
        rich = (4.0 * c2 - c1) / 3.0
        scale = np.maximum(1.0, np.abs(rich))
        if np.max(np.abs(rich - fd) / scale) > 1e-7:
            continue
        return e, p, ad, fd


def rodrigues_reference(axis, angle: float) -> np.ndarray:
    """Rotation matrix from the axis-angle closed form, written out entrywise."""
    x, y, z = np.asarray(axis, dtype=float) / np.linalg.norm(axis)
    c, s = math.cos(angle), math.sin(angle)
    C = 1.0 - c
    return np.array([
        [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
        [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
        [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
    ])


def hopf_equator_holonomy() -> float:
    """Closed form for the n = 1 clutching: -2pi times xi_1 = 1/2 on the equator."""
    return -math.pi


# ---------------------------------------------------------------------------
# Horizontal-lift conditions


def random_sphere_curve(rng):
    """Smooth chart-0 curve on the sphere crossing the region where the partition varies."""
    from milnor.base_complex import ChartedCurve

    a, b = rng.uniform(0.5, 0.9), rng.uniform(0.1, 0.35)
    c, d = rng.uniform(1.0, 4.0), rng.uniform(0.0, 2 * math.pi)
    e, f = rng.uniform(0.0, 2 * math.pi), rng.uniform(-6.0, 6.0)
    return ChartedCurve.build([(0, (f"{a!r} + {b!r}*sin({c!r}*t + {d!r})", f"{e!r} + {f!r}*t"), 0.0, 1.0)])


def gauged_clutching(rng, group):
    """Clutching bundle; for U1 with a random gauge so A is not rotationally symmetric."""
    from milnor.bundle_cocycle import AngleFamily, clutching_bundle, coboundary
    from milnor.exprlang import parse

    if group.matrix:
        return clutching_bundle(group, 1)
    b = clutching_bundle(group, int(rng.integers(1, 4)))
    c = rng.uniform(0.1, 0.5)
    return coboundary(b, {0: AngleFamily(parse(f"{c!r}*rho*sin(phi)"))})


def right_mul(group, g, h):
    return group.mul(g, h) if group.matrix else g + h


def lift_condition_errors(bundle, curve, rng, steps: int = 400) -> dict:
    """Worst deviation for each lift condition on one random case.

    Conditions 1-3 (domain, projection, start value) are reported as 0 or
    inf; 4 is right equivariance, 5 reparametrisation by s -> s^2, 6 the
    restart of the lift from its own midpoint.
    """
    from milnor.connection import horizontal_lift

    G = bundle.group
    g = G.random_element(rng)
    lift = horizontal_lift(bundle, curve, g, steps=steps)
    seg = lift.segments[0]
    pts, _ = curve.evaluate(0, seg.times)
    out = {
        "domain": 0.0 if (seg.times[0] == curve.t_start and seg.times[-1] == curve.t_end) else math.inf,
        "projection": 0.0 if np.array_equal(seg.points, pts) else math.inf,
        "start": 0.0 if np.array_equal(seg.fibers[0], np.asarray(g, dtype=float)) else math.inf,
        "certificate": lift.certificate,
    }
    h = G.random_element(rng)
    moved = horizontal_lift(bundle, curve, right_mul(G, g, h), steps=steps)
    want = np.array([right_mul(G, f, h) for f in seg.fibers])
    out["equivariance"] = float(np.max(np.abs(moved.segments[0].fibers - want)))
    rep = 0.0
    for s in (0.4, 0.7, 1.0):
        a = horizontal_lift(bundle, curve.reparametrize("t^2", 0.0, 1.0).restrict(0.0, s), g, steps=steps)
        b = horizontal_lift(bundle, curve.restrict(0.0, s * s), g, steps=steps)
        rep = max(rep, float(np.max(np.abs(np.asarray(a.final) - np.asarray(b.final)))))
    out["reparametrisation"] = rep
    half = steps // 2
    again = horizontal_lift(bundle, curve.restrict(float(seg.times[half]), curve.t_end), seg.fibers[half],
                            steps=steps - half)
    out["idempotence"] = float(np.max(np.abs(again.segments[0].fibers - seg.fibers[half:])))
    return out


LIFT_TOLERANCES = {
    "domain": 0.0,
    "projection": 0.0,
    "start": 0.0,
    "certificate": 1e-5,
    "equivariance": 1e-8,
    "reparametrisation": 1e-6,
    "idempotence": 1e-8,
}


def lift_conditions_hold(errors: dict) -> bool:
    return all(errors[k] <= tol for k, tol in LIFT_TOLERANCES.items())
