"""Finite-stage Milnor join E_N G and its quotient B_N G.

A point stores only its positive-weight slots: the zero-weight entries are
exactly the freedom forgotten by the join relation, so two points are equal
iff their supports, weights and (positive-weight) elements agree.

G acts on the right, ``h . (t_i g_i) = (t_i g_i h^-1)``.  The canonical
representative of the orbit has the identity in its lowest occupied slot.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .lie_group import GroupSpec, IrrationalTorus, torus_alpha_equal

WEIGHT_TOL = 1e-9


class JoinError(ValueError):
    pass


@dataclass(frozen=True)
class JoinEntry:
    index: int
    weight: float
    element: object


@dataclass(frozen=True)
class JoinPoint:
    group: GroupSpec
    stage: int
    entries: tuple[JoinEntry, ...]

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(e.index for e in self.entries)

    @property
    def weights(self) -> np.ndarray:
        return np.array([e.weight for e in self.entries])

    def entry(self, index: int) -> JoinEntry | None:
        for e in self.entries:
            if e.index == index:
                return e
        return None

    def weight_vector(self) -> np.ndarray:
        w = np.zeros(self.stage)
        for e in self.entries:
            w[e.index] = e.weight
        return w

    def to_json(self) -> dict:
        return {
            "stage": self.stage,
            "entries": [
                {"index": e.index, "weight": float(e.weight), "element": np.asarray(e.element, dtype=float).tolist()}
                for e in self.entries
            ],
        }


# BG points are join points in canonical form; the alias keeps signatures readable.
BGPoint = JoinPoint


def make_join(weights: Sequence[float], elements: Sequence, stage: int, group: GroupSpec,
              indices: Sequence[int] | None = None) -> JoinPoint:
    """Build a join point, dropping zero weights and renormalising to sum 1."""
    w = np.asarray(weights, dtype=float)
    idx = list(range(len(w))) if indices is None else [int(i) for i in indices]
    if len(idx) != len(w) or len(elements) != len(w):
        raise JoinError("weights, elements and indices must have equal length")
    if np.any(w < 0):
        raise JoinError("negative weight")
    if len(set(idx)) != len(idx):
        raise JoinError("repeated slot index")
    total = float(np.sum(w))
    if total <= 0:
        raise JoinError("empty support")
    if abs(total - 1.0) > WEIGHT_TOL:
        raise JoinError(f"weights sum to {total}, not 1")
    order = np.argsort(idx)
    entries = []
    for o in order:
        i = idx[o]
        if i < 0 or i >= stage:
            raise JoinError(f"slot index {i} outside stage {stage}")
        if w[o] > 0:
            entries.append(JoinEntry(i, float(w[o]), group.canonical(elements[o])))
    return _normalised(group, stage, entries)


def _normalised(group, stage, entries) -> JoinPoint:
    s = sum(e.weight for e in entries)
    if abs(s - 1.0) <= 8 * np.finfo(float).eps * max(len(entries), 1):
        # already normalised up to rounding; leave the weights bit-for-bit
        return JoinPoint(group, stage, tuple(entries))
    entries = [JoinEntry(e.index, e.weight / s, e.element) for e in entries]
    # make the sum exactly 1 by absorbing rounding into the heaviest slot
    resid = 1.0 - sum(e.weight for e in entries)
    if resid != 0.0 and entries:
        k = max(range(len(entries)), key=lambda i: entries[i].weight)
        entries[k] = JoinEntry(entries[k].index, entries[k].weight + resid, entries[k].element)
    return JoinPoint(group, stage, tuple(entries))


def _check_same(p: JoinPoint, q: JoinPoint) -> None:
    if p.group != q.group:
        raise JoinError(f"group mismatch: {p.group} vs {q.group}")
    if p.stage != q.stage:
        raise JoinError(f"stage mismatch: {p.stage} vs {q.stage}")


def elements_equal(group: GroupSpec, a, b, tol: float | None = None) -> bool:
    if isinstance(group, IrrationalTorus):
        return torus_alpha_equal(float(a), float(b), group, 1e-9 if tol is None else tol).equal
    return group.equal(a, b, tol)


def join_equiv(p: JoinPoint, q: JoinPoint, weight_tol: float = WEIGHT_TOL, tol: float | None = None) -> bool:
    _check_same(p, q)
    if p.support != q.support:
        return False
    for a, b in zip(p.entries, q.entries):
        if abs(a.weight - b.weight) > weight_tol:
            return False
        if not elements_equal(p.group, a.element, b.element, tol):
            return False
    return True


def act(h, p: JoinPoint) -> JoinPoint:
    """Right action: every element multiplied on the right by h^-1."""
    G = p.group
    hi = G.inv(h)
    return JoinPoint(G, p.stage, tuple(JoinEntry(e.index, e.weight, G.mul(e.element, hi)) for e in p.entries))


def s_j(p: JoinPoint, j: int) -> float:
    e = p.entry(j)
    return 0.0 if e is None else e.weight


def zeta_j(b: BGPoint, j: int) -> float:
    return s_j(b, j)


def to_bg(p: JoinPoint) -> BGPoint:
    """Canonical orbit representative: identity in the lowest occupied slot."""
    if not p.entries:
        raise JoinError("empty join point")
    return act(p.entries[0].element, p)


def phi_j(p: JoinPoint, j: int):
    """Local trivialisation over the chart where slot j is occupied."""
    e = p.entry(j)
    if e is None:
        raise JoinError(f"slot {j} has zero weight; point outside chart {j}")
    return e.element, to_bg(act(e.element, p))


def phi_j_inverse(k, b: BGPoint, j: int) -> JoinPoint:
    """Point with slot-j element k lying over b."""
    e = b.entry(j)
    if e is None:
        raise JoinError(f"slot {j} has zero weight in the base point")
    G = b.group
    rep = act(e.element, b)  # slot j now carries the identity
    kinv = G.inv(k)
    return act(kinv, rep)


def random_join(group: GroupSpec, stage: int, rng: np.random.Generator, max_support: int | None = None) -> JoinPoint:
    m = int(rng.integers(1, (max_support or stage) + 1))
    idx = sorted(rng.choice(stage, size=m, replace=False).tolist())
    w = rng.uniform(0.05, 1.0, size=m)
    w /= w.sum()
    return make_join(w, [group.random_element(rng) for _ in idx], stage, group, idx)


# ---------------------------------------------------------------------------
# Universal connection on curves


@dataclass(frozen=True)
class JoinCurveSample:
    """Full coordinates of a curve in the pre-quotient join at one time."""

    weights: np.ndarray
    elements: list


def universal_connection(group: GroupSpec, gamma: Callable[[float], JoinCurveSample], t0: float, h: float = 1e-4):
    """Sum_i t_i(t0) * MC(g_i(t0), g_i'(t0)), with g_i' by central differences."""
    if h <= 0:
        raise ValueError("step must be positive")
    try:
        mid, lo, hi = gamma(t0), gamma(t0 - h), gamma(t0 + h)
    except Exception as exc:
        raise JoinError(f"curve not evaluable at {t0} +- {h}: {exc}") from exc
    out = np.asarray(group.zero_algebra(), dtype=float) * 0.0
    for i, t in enumerate(mid.weights):
        if t == 0:
            continue
        vel = group.tangent_difference(lo.elements[i], hi.elements[i]) / (2.0 * h)
        out = out + t * np.asarray(group.maurer_cartan(mid.elements[i], vel))
    return out


def universal_connection_stencil(group: GroupSpec, weights, elements, h: float):
    """Connection along a sampled join curve, batched over the time grid.

    ``weights`` has shape ``(M, n)`` and ``elements[i]`` is an array of the
    slot-i elements at the ``n`` grid times (ignored where the weight is 0).
    Velocities use the fourth-order five-point stencil, so values are
    returned for the interior times ``2 .. n-3``.
    """
    weights = np.asarray(weights, dtype=float)
    n = weights.shape[1]
    if n < 5:
        raise JoinError("need at least five samples for the stencil")
    out = None
    for i in range(weights.shape[0]):
        t = weights[i, 2 : n - 2]
        if not np.any(t > 0):
            continue
        e = np.asarray(elements[i], dtype=float)
        d1 = group.tangent_difference(e[1 : n - 3], e[3 : n - 1])
        d2 = group.tangent_difference(e[0 : n - 4], e[4:n])
        vel = (8.0 * d1 - d2) / (12.0 * h)
        mc = np.asarray(group.maurer_cartan(e[2 : n - 2], vel))
        tt = t.reshape(t.shape + (1,) * (mc.ndim - 1))
        term = np.where(tt > 0, tt * np.nan_to_num(mc), 0.0)
        out = term if out is None else out + term
    return out
