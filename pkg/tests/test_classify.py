import math

import numpy as np
import pytest

from milnor.base_complex import BasePoint, catalog_loop
from milnor.bundle_cocycle import AngleFamily, clutching_bundle, coboundary, trivial_bundle
from milnor.classify import (
    chart_independence,
    classifying_lift,
    classifying_point,
    contract,
    join_homotopy,
    reconstruct_cocycle,
    restage,
)
from milnor.connection import holonomy
from milnor.exprlang import parse
from milnor.lie_group import SO3, CircleU1, IrrationalTorus
from milnor.milnor_join import JoinError, act, join_equiv, make_join, random_join

U1 = CircleU1()
SQRT2 = math.sqrt(2.0)
GROUPS = [U1, IrrationalTorus(SQRT2), SO3()]


def _bundles():
    return [
        trivial_bundle("S2-two-disks", U1),
        trivial_bundle("T2-four-squares", SO3()),
        clutching_bundle(U1, 1),
        clutching_bundle(U1, -3),
        clutching_bundle(SO3(), 1),
        clutching_bundle(IrrationalTorus(SQRT2), (1, 1)),
    ]


# ---------------------------------------------------------------------------
# Classifying map


def test_classifying_point_examples():
    hopf = clutching_bundle(U1, 1)
    north = classifying_point(hopf, BasePoint(0, (0.0, 0.0)))
    assert join_equiv(north, make_join([1.0], [0.0], north.stage, U1), 0.0, 0.0)
    eq = classifying_point(hopf, BasePoint(0, (1.0, 0.8)))
    want = make_join([0.5, 0.5], [0.0, 0.8], eq.stage, U1)
    assert join_equiv(eq, want, 1e-12, 1e-12)
    triv = classifying_point(trivial_bundle("S2-two-disks", U1), BasePoint(0, (1.0, 0.8)))
    assert join_equiv(triv, make_join([0.5, 0.5], [0.0, 0.0], triv.stage, U1), 1e-12, 1e-12)


def test_single_chart_lift_is_the_fibre_point():
    b = trivial_bundle("interval", SO3())
    g = SO3().random_element(np.random.default_rng(1))
    p = classifying_lift(b, BasePoint(0, (0.3,)), g=g)
    assert p.support == (0,)
    assert p.entries[0].weight == 1.0
    assert np.allclose(p.entries[0].element, g)


def test_classifying_lift_equivariance():
    rng = np.random.default_rng(2)
    for bundle in (clutching_bundle(U1, 2), clutching_bundle(SO3(), 1)):
        G = bundle.group
        pts = bundle.base.random_points(rng, 500)
        for x in pts:
            g, h = G.random_element(rng), G.random_element(rng)
            left = classifying_lift(bundle, x, g=G.mul(g, G.inv(h)))
            right = act(h, classifying_lift(bundle, x, g=g))
            assert join_equiv(left, right, 1e-12, 1e-10)


def test_chart_independence_on_catalog_bundles():
    rng = np.random.default_rng(3)
    for bundle in _bundles():
        for x in bundle.base.random_points(rng, 100):
            ok, gap = chart_independence(bundle, x)
            assert ok and gap < 1e-12


def test_stage_too_small():
    with pytest.raises(JoinError):
        classifying_point(trivial_bundle("T2-four-squares", U1), BasePoint(0, (0.05, 0.05)), stage=2)


# ---------------------------------------------------------------------------
# Cocycle reconstruction


def test_reconstruct_examples():
    assert reconstruct_cocycle(trivial_bundle("S2-two-disks", U1), samples=200).max_deviation == 0.0
    assert reconstruct_cocycle(clutching_bundle(U1, 3), samples=200).max_deviation < 1e-9
    assert reconstruct_cocycle(clutching_bundle(SO3(), 1), samples=200).max_deviation < 1e-9
    rep = reconstruct_cocycle(trivial_bundle("T2-four-squares", SO3()), samples=50)
    assert len(rep.per_pair) == 12 and rep.max_deviation < 1e-12


def test_coboundary_bundle_reconstructs_and_keeps_holonomy():
    hopf = clutching_bundle(U1, 1)
    gauged = coboundary(hopf, {0: AngleFamily(parse("0.3*rho*sin(phi)")), 1: AngleFamily(parse("0.2*rho^2"))})
    assert reconstruct_cocycle(gauged, samples=200).max_deviation < 1e-9
    loop = catalog_loop(hopf.base, "equator")
    a = holonomy(hopf, loop, steps=2000)[1]
    b = holonomy(gauged, loop, steps=2000)[1]
    # gauge changes conjugate the holonomy; for U1 it is unchanged mod 2 pi
    d = (float(a) - float(b) + math.pi) % (2 * math.pi) - math.pi
    assert abs(d) < 1e-6


# ---------------------------------------------------------------------------
# Homotopies


def _pair(G, N, rng):
    return random_join(G, N, rng), random_join(G, N, rng)


def test_join_homotopy_endpoints():
    rng = np.random.default_rng(4)
    for G in GROUPS:
        for N in (1, 2, 5):
            for _ in range(50):
                f, h = _pair(G, N, rng)
                assert join_equiv(join_homotopy(f, h, 0.0), restage(f, 2 * N + 2), 0.0, 0.0)
                assert join_equiv(join_homotopy(f, h, 1.0), restage(h, 2 * N + 2), 0.0, 0.0)


def test_join_homotopy_midpoint_interleaves():
    rng = np.random.default_rng(5)
    f, h = _pair(U1, 4, rng)
    mid = join_homotopy(f, h, 0.5)
    b = 0.5  # bump at the centre of the middle third
    want = {}
    for e in f.entries:
        want[2 * e.index] = ((1 - b) * e.weight, e.element)
    for e in h.entries:
        want[2 * e.index + 1] = (b * e.weight, e.element)
    assert mid.support == tuple(sorted(want))
    for e in mid.entries:
        w, g = want[e.index]
        assert abs(e.weight - w) < 1e-12 and e.element == g


def test_join_homotopy_degenerate_and_errors():
    rng = np.random.default_rng(6)
    f = random_join(SO3(), 3, rng)
    for tau in (0.0, 1.0):
        assert join_equiv(join_homotopy(f, f, tau), restage(f, 8), 0.0, 0.0)
    with pytest.raises(ValueError):
        join_homotopy(f, f, 1.5)
    with pytest.raises(JoinError):
        join_homotopy(f, random_join(SO3(), 4, rng), 0.2)


def test_join_homotopy_equivariance_and_weights():
    rng = np.random.default_rng(7)
    for G in GROUPS:
        for _ in range(100):
            f, h = _pair(G, 4, rng)
            k = G.random_element(rng)
            tau = float(rng.uniform())
            left = join_homotopy(act(k, f), act(k, h), tau)
            right = act(k, join_homotopy(f, h, tau))
            assert join_equiv(left, right, 1e-12, 1e-10)
            assert abs(float(np.sum(right.weights)) - 1.0) < 1e-12


def test_join_homotopy_is_continuous():
    rng = np.random.default_rng(8)
    f, h = _pair(U1, 4, rng)
    taus = np.concatenate([np.linspace(0.0, 1.0, 601), [1 / 3, 2 / 3]])
    d = 1e-7
    for tau in taus:
        a = join_homotopy(f, h, float(max(tau - d, 0.0))).weight_vector()
        b = join_homotopy(f, h, float(min(tau + d, 1.0))).weight_vector()
        n = max(len(a), len(b))
        gap = np.max(np.abs(np.pad(a, (0, n - len(a))) - np.pad(b, (0, n - len(b)))))
        assert gap < 1e-4, tau


def _free_top(G, N, rng):
    m = int(rng.integers(1, N))
    idx = sorted(rng.choice(N - 1, size=m, replace=False).tolist())
    w = rng.uniform(0.05, 1.0, size=m)
    return make_join(w / w.sum(), [G.random_element(rng) for _ in idx], N, G, idx)


def test_contract_endpoints():
    rng = np.random.default_rng(9)
    for G in GROUPS:
        for _ in range(1000 // len(GROUPS) + 1):
            N = int(rng.integers(2, 9))
            p = _free_top(G, N, rng)
            assert join_equiv(contract(p, 0.0), p, 0.0, 0.0)
            end = contract(p, 1.0)
            assert end.support == (1,)
            assert end.entries[0].weight == 1.0
            assert G.distance(end.entries[0].element, G.identity()) == 0.0


def test_contract_weights_and_continuity():
    rng = np.random.default_rng(10)
    p = _free_top(SO3(), 6, rng)
    taus = np.linspace(0.0, 1.0, 401)
    prev = None
    for tau in taus:
        q = contract(p, float(tau))
        assert abs(float(np.sum(q.weights)) - 1.0) < 1e-12
        v = q.weight_vector()
        if prev is not None:
            assert np.max(np.abs(v - prev)) < 0.2
        prev = v
    d = 1e-7
    for tau in (0.25, 0.5, 0.75, 1 / 3):
        a = contract(p, tau - d).weight_vector()
        b = contract(p, tau + d).weight_vector()
        assert np.max(np.abs(a - b)) < 1e-4


def test_contract_slide_is_equivariant():
    rng = np.random.default_rng(11)
    for G in GROUPS:
        p = _free_top(G, 6, rng)
        k = G.random_element(rng)
        for tau in (0.1, 0.3, 0.5):  # the fade to {(1, 1, e)} is not equivariant
            assert join_equiv(contract(act(k, p), tau), act(k, contract(p, tau)), 1e-12, 1e-10)


def test_contract_overflow():
    p = make_join([0.5, 0.5], [0.0, 0.1], 3, U1, [0, 2])
    with pytest.raises(JoinError):
        contract(p, 0.3)
