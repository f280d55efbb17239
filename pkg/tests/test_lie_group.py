import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from milnor.lie_group import (
    GLn,
    SO3,
    CircleU1,
    GroupKindError,
    IrrationalTorus,
    TorusK,
    exp_curve,
    group_from_json,
    hat,
    rotation,
    torus_alpha_equal,
)
from oracles import rodrigues_reference

SQRT2 = math.sqrt(2.0)
KINDS = [CircleU1(), IrrationalTorus(SQRT2), TorusK(3), SO3(), GLn(3)]


@pytest.mark.parametrize("G", KINDS, ids=lambda g: g.kind)
def test_group_axioms(G):
    rng = np.random.default_rng(1)
    e = G.identity()
    for _ in range(1000):
        a, b, c = (G.random_element(rng) for _ in range(3))
        assert G.distance(G.mul(G.mul(a, b), c), G.mul(a, G.mul(b, c))) <= 1e-12 * max(1.0, float(np.max(np.abs(a))) ** 3)
        assert G.distance(G.mul(a, e), a) <= 1e-12
        assert G.distance(G.mul(e, a), a) <= 1e-12
        assert G.distance(G.mul(a, G.inv(a)), e) <= 1e-12 * max(1.0, float(np.linalg.cond(np.atleast_2d(a))))


def test_u1_angle_addition():
    assert CircleU1().equal(CircleU1().mul(1.5 * math.pi, 1.5 * math.pi), math.pi)


def test_so3_inverse():
    g = SO3().random_element(np.random.default_rng(0))
    np.testing.assert_allclose(SO3().mul(g, SO3().inv(g)), np.eye(3), atol=1e-12)


def test_irrational_torus_keeps_lifts():
    assert IrrationalTorus(SQRT2).mul(0.6, 0.9) == pytest.approx(1.5)


def test_maurer_cartan_examples():
    G = SO3()
    g = rotation("z", 0.7)
    V = (rotation("z", 0.7 + 1e-6) - rotation("z", 0.7 - 1e-6)) / 2e-6
    np.testing.assert_allclose(G.maurer_cartan(g, V), hat([0, 0, 1]), atol=1e-9)
    assert CircleU1().maurer_cartan(1.2, 0.5) == 0.5
    np.testing.assert_allclose(GLn(1).maurer_cartan(np.array([[2.0]]), np.array([[6.0]])), [[3.0]])


@pytest.mark.parametrize("G", [SO3(), GLn(3)], ids=lambda g: g.kind)
def test_maurer_cartan_left_invariant(G):
    rng = np.random.default_rng(2)
    for _ in range(50):
        g, v = G.random_element(rng), G.random_algebra(rng)
        h = 1e-6
        # push v to g by left translation, as a finite difference of t -> g exp(tv)
        V = (G.mul(g, G.exp(h * v)) - G.mul(g, G.exp(-h * v))) / (2 * h)
        np.testing.assert_allclose(G.maurer_cartan(g, V), G.maurer_cartan(G.identity(), v), atol=1e-6)


def test_adjoint_examples():
    rng = np.random.default_rng(3)
    for G in (CircleU1(), IrrationalTorus(SQRT2)):
        assert G.adjoint(G.random_element(rng), 0.7) == 0.7
    G = SO3()
    np.testing.assert_allclose(G.adjoint(rotation("z", math.pi / 2), hat([1, 0, 0])), hat([0, 1, 0]), atol=1e-12)
    for G in KINDS:
        xi = G.random_algebra(rng)
        np.testing.assert_allclose(G.adjoint(G.identity(), xi), xi, atol=1e-15)


@pytest.mark.parametrize("G", [SO3(), GLn(3)], ids=lambda g: g.kind)
def test_adjoint_is_homomorphism(G):
    rng = np.random.default_rng(4)
    for _ in range(200):
        g, h, xi = G.random_element(rng), G.random_element(rng), G.random_algebra(rng)
        lhs = G.adjoint(G.mul(g, h), xi)
        rhs = G.adjoint(g, G.adjoint(h, xi))
        assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(1.0, float(np.max(np.abs(lhs))))


def test_exp_curve_zero_field():
    for G in KINDS:
        c = exp_curve(G, lambda t, G=G: G.zero_algebra(), 10)
        for t in (0.0, 0.37, 1.0):
            assert G.equal(c(t), G.identity())


def test_exp_curve_u1_constant():
    c = exp_curve(CircleU1(), lambda t: 2 * math.pi, 50)
    assert CircleU1().equal(c(1.0), 0.0)
    assert c.lifts[-1] == pytest.approx(2 * math.pi, abs=1e-12)


def test_exp_curve_so3_matches_rodrigues():
    axis = np.array([1.0, 2.0, -0.5])
    axis /= np.linalg.norm(axis)
    c = exp_curve(SO3(), lambda t: hat(axis), 1000)
    assert np.max(np.abs(c(1.0) - rodrigues_reference(axis, 1.0))) < 1e-8


def _product_field():
    B, D = hat([0.3, -1.1, 0.7]), hat([1.4, 0.2, -0.6])
    G = SO3()
    field = lambda t: B + G.adjoint(G.exp(t * B), D)
    exact = G.exp(B) @ G.exp(D)
    return field, exact


def test_exp_curve_fourth_order():
    field, exact = _product_field()
    errs = [np.max(np.abs(exp_curve(SO3(), field, n)(1.0) - exact)) for n in (8, 16, 32)]
    for a, b in zip(errs, errs[1:]):
        assert 12 <= a / b <= 20


def test_torus_alpha_equal_examples():
    d = torus_alpha_equal(0.3, 0.3 + 1 + 2 * SQRT2, IrrationalTorus(SQRT2, 3))
    assert (d.equal, d.m, d.n) == (True, -1, -2)
    assert torus_alpha_equal(0.7, 0.7, IrrationalTorus(SQRT2)).equal
    G = IrrationalTorus(SQRT2, 10)
    assert not torus_alpha_equal(0.0, 0.5, G).equal
    brute = min(abs(0.5 - m - n * SQRT2) for m in range(-10, 11) for n in range(-10, 11))
    assert brute > 1e-9


@settings(max_examples=200, deadline=None)
@given(st.integers(-10, 10), st.integers(-10, 10), st.floats(-5, 5))
def test_torus_alpha_equal_finds_witness(m, n, x):
    d = torus_alpha_equal(x + m + n * SQRT2, x, IrrationalTorus(SQRT2, 10))
    assert d.equal and (d.m, d.n) == (m, n)


def test_group_from_json_round_trip():
    for G in KINDS:
        assert group_from_json(G.to_json()) == G
    assert group_from_json({"kind": "IrrationalTorus", "params": {"alpha": "sqrt(2)"}}).alpha == pytest.approx(SQRT2)
    with pytest.raises(ValueError):
        group_from_json({"kind": "Diff"})


def test_so3_check_element_rejects_non_rotation():
    with pytest.raises(GroupKindError):
        SO3().check_element(np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(GroupKindError):
        SO3().mul(np.eye(2), np.eye(3))
