"""Classifying maps into the finite join and the explicit homotopies on it.

A bundle point ``(x, g)`` in the chart-k trivialisation goes to the join
point with weights xi_i(x) and elements g_ik(x) g.  Descending to the base
gives the classifying point in BG.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .base_complex import BasePoint
from .bundle_cocycle import CocycleBundle
from .milnor_join import (
    JoinEntry,
    JoinError,
    JoinPoint,
    _normalised,
    join_equiv,
    make_join,
    phi_j,
    to_bg,
)
from .smooth import bump

__all__ = [
    "bump",
    "classifying_point",
    "classifying_lift",
    "chart_independence",
    "reconstruct_cocycle",
    "join_homotopy",
    "contract",
    "restage",
]

DEFAULT_STAGE = 8


def _stage(bundle: CocycleBundle, stage: int | None) -> int:
    n = bundle.base.nchart
    stage = max(DEFAULT_STAGE, n) if stage is None else int(stage)
    if stage < n:
        raise JoinError(f"stage {stage} too small for {n} charts")
    return stage


def _lift_arrays(bundle: CocycleBundle, k: int, x: np.ndarray):
    """Weights (..., M) and per-chart elements g_ik(x) on a batch of chart-k points."""
    w = bundle.base.partition(k, x)
    elems = {}
    for i in range(bundle.base.nchart):
        if np.any(w[..., i] > 0):
            if not bundle.has_transition(i, k):
                raise JoinError(f"no transition g_{i}{k} although both weights are positive")
            # only evaluate where the weight is positive; elsewhere the overlap may be empty
            mask = w[..., i] > 0
            vals = bundle.transition(i, k, x[mask])
            elems[i] = (mask, vals)
    return w, elems


def classifying_lift(bundle: CocycleBundle, x: BasePoint, k: int | None = None, g=None,
                     stage: int | None = None) -> JoinPoint:
    """Image of the total-space point (x, g) (chart-k trivialisation) in the join."""
    k = x.chart if k is None else k
    G = bundle.group
    g = G.identity() if g is None else g
    pt = x.array if k == x.chart else bundle.base.transfer(x.chart, k, x.array)
    w, elems = _lift_arrays(bundle, k, pt[None, :])
    idx = [i for i in range(bundle.base.nchart) if w[0, i] > 0]
    elements = [G.mul(elems[i][1][0], g) for i in idx]
    return make_join(w[0, idx], elements, _stage(bundle, stage), G, idx)


def classifying_point(bundle: CocycleBundle, x: BasePoint, k: int | None = None,
                      stage: int | None = None) -> JoinPoint:
    """Classifying map evaluated at x through the chart-k trivialisation."""
    return to_bg(classifying_lift(bundle, x, k, None, stage))


def chart_independence(bundle: CocycleBundle, x: BasePoint, stage: int | None = None) -> tuple[bool, float]:
    """Evaluate via every chart containing x; return (all equivalent, max weight gap)."""
    base = bundle.base
    g = base.to_global(x.chart, x.array)
    ks = [k for k in range(base.nchart) if bool(base._global_in_chart(k, g))]
    pts = [classifying_point(bundle, x, k, stage) for k in ks]
    ok = all(join_equiv(pts[0], p) for p in pts[1:])
    gap = max((float(np.max(np.abs(p.weight_vector() - pts[0].weight_vector()))) for p in pts[1:]), default=0.0)
    return ok, gap


@dataclass
class ReconstructionReport:
    samples: int
    max_deviation: float = 0.0
    per_pair: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "samples": self.samples,
            "max_deviation": self.max_deviation,
            "per_pair": {f"{i},{j}": v for (i, j), v in sorted(self.per_pair.items())},
        }


def _points_with_weights(bundle: CocycleBundle, i: int, j: int, rng, n: int) -> np.ndarray:
    """n points (chart j coordinates) where both xi_i and xi_j are positive."""
    base = bundle.base
    out, have = [], 0
    for _ in range(200):
        x = base.random_overlap(i, j, rng, 4 * n)
        w = base.partition(j, x)
        keep = x[(w[:, i] > 0) & (w[:, j] > 0)]
        out.append(keep)
        have += len(keep)
        if have >= n:
            break
    if have == 0:
        return np.zeros((0, base.dim))
    return np.concatenate(out)[:n]


def reconstruct_cocycle(bundle: CocycleBundle, samples: int = 1000, seed: int = 0,
                        stage: int | None = None) -> ReconstructionReport:
    """Recover g'_ij = g_i g_j^-1 from the join trivialisations of the classifying lift.

    At each sample a random fibre element g is lifted through chart j; the
    slot-i and slot-j trivialisations of the resulting join point give
    g_i and g_j, and g_i g_j^-1 is compared with the stored g_ij.
    """
    rng = np.random.default_rng(seed)
    G, base = bundle.group, bundle.base
    rep = ReconstructionReport(samples)
    st = _stage(bundle, stage)
    for i in range(base.nchart):
        for j in range(base.nchart):
            if i == j or not bundle.has_transition(i, j):
                continue
            xs = _points_with_weights(bundle, i, j, rng, samples)
            if len(xs) == 0:
                continue
            w, elems = _lift_arrays(bundle, j, xs)
            original = bundle.transition(i, j, xs)
            dev = 0.0
            where = {m: np.cumsum(mask) - 1 for m, (mask, _) in elems.items()}
            for n in range(len(xs)):
                g = G.random_element(rng)
                idx = [m for m in range(base.nchart) if w[n, m] > 0]
                lifted = make_join(w[n, idx], [G.mul(elems[m][1][where[m][n]], g) for m in idx], st, G, idx)
                gi, _ = phi_j(lifted, i)
                gj, _ = phi_j(lifted, j)
                recovered = G.mul(gi, G.inv(gj))
                dev = max(dev, float(G.distance(recovered, original[n])))
            rep.per_pair[(i, j)] = dev
            rep.max_deviation = max(rep.max_deviation, dev)
    return rep


# ---------------------------------------------------------------------------
# Homotopies


def restage(p: JoinPoint, stage: int) -> JoinPoint:
    """Same point viewed in a larger truncation."""
    if p.entries and p.entries[-1].index >= stage:
        raise JoinError("stage overflow")
    return JoinPoint(p.group, stage, p.entries)


def _assemble(group, stage, slots: dict) -> JoinPoint:
    """slots: index -> (weight, element); zero weights dropped."""
    entries = [JoinEntry(i, w, g) for i, (w, g) in sorted(slots.items()) if w > 0]
    return _normalised(group, stage, entries)


def _vec(p: JoinPoint, N: int):
    """Dense weights and elements for slots 0..N-1 (identity where empty)."""
    w = [0.0] * N
    g = [p.group.identity()] * N
    for e in p.entries:
        w[e.index] = e.weight
        g[e.index] = e.element
    return w, g


def _shift_F(w, g, n: int, b: float) -> dict:
    """Stage-n shift homotopy (1-based n) on dense data; returns 0-based slot map.

    Slots 1..n keep their entries; entry m > n is split between positions
    2m - n - 1 (weight b) and 2m - n (weight 1 - b).
    """
    out: dict = {}
    N = len(w)
    for m in range(1, N + 1):
        if w[m - 1] == 0:
            continue
        if m <= n:
            _put(out, m - 1, w[m - 1], g[m - 1])
        else:
            _put(out, 2 * m - n - 2, b * w[m - 1], g[m - 1])
            _put(out, 2 * m - n - 1, (1.0 - b) * w[m - 1], g[m - 1])
    return out


def _shift_S(w, g, n: int, b: float) -> dict:
    """Stage-n homotopy moving odd-position entries back to the front."""
    out: dict = {}
    N = len(w)
    for m in range(1, N + 1):
        if w[m - 1] == 0:
            continue
        if m < n:
            _put(out, m - 1, w[m - 1], g[m - 1])
        else:
            _put(out, 2 * m - n - 1, b * w[m - 1], g[m - 1])
            _put(out, 2 * m - n, (1.0 - b) * w[m - 1], g[m - 1])
    return out


def _put(out: dict, idx: int, weight: float, element) -> None:
    if weight <= 0:
        return
    if idx in out:
        raise JoinError(f"slot {idx} assigned twice")
    out[idx] = (weight, element)


def _concat(pieces: int, sigma: float) -> tuple[int, float]:
    """Which of ``pieces`` equal sub-intervals sigma falls in, and the local time."""
    if pieces <= 0:
        return 0, 0.0
    s = min(max(sigma, 0.0), 1.0) * pieces
    n = min(int(math.floor(s)), pieces - 1)
    return n + 1, s - n


def _F_prime(w, g, sigma: float, eps: float) -> dict:
    N = len(w)
    if N <= 1:
        return _shift_F(w, g, 1, 1.0)
    n, local = _concat(N - 1, sigma)
    return _shift_F(w, g, n, bump(local, eps))


def _S_prime(w, g, sigma: float, eps: float) -> dict:
    N = len(w)
    n, local = _concat(N, sigma)
    return _shift_S(w, g, n, bump(local, eps))


def _T(wf, gf, wh, gh, b: float) -> dict:
    out: dict = {}
    for k in range(len(wf)):
        if wf[k] > 0:
            _put(out, 2 * k, (1.0 - b) * wf[k], gf[k])
        if wh[k] > 0:
            _put(out, 2 * k + 1, b * wh[k], gh[k])
    return out


def join_homotopy(f_pt: JoinPoint, h_pt: JoinPoint, tau: float, eps: float = 0.1) -> JoinPoint:
    """Equivariant homotopy from f_pt (tau = 0) to h_pt (tau = 1) in stage 2N + 2.

    Spread f over odd positions, cross-fade into h on the even positions,
    then gather h back to the front.  The infinite shift concatenations
    stop after N stages because every later stage acts trivially.
    """
    if f_pt.group != h_pt.group or f_pt.stage != h_pt.stage:
        raise JoinError("join_homotopy needs points of the same group and stage")
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    G, N = f_pt.group, f_pt.stage
    out_stage = 2 * N + 2
    wf, gf = _vec(f_pt, N)
    wh, gh = _vec(h_pt, N)
    if tau <= 1.0 / 3.0:
        slots = _F_prime(wf, gf, 1.0 - bump(3.0 * tau, eps), eps)
    elif tau <= 2.0 / 3.0:
        slots = _T(wf, gf, wh, gh, bump(3.0 * tau - 1.0, eps))
    else:
        slots = _S_prime(wh, gh, bump(3.0 * tau - 2.0, eps), eps)
    if slots and max(slots) >= out_stage:
        raise JoinError("stage overflow")
    return _assemble(G, out_stage, slots)


def contract(p: JoinPoint, tau: float, eps: float = 0.1) -> JoinPoint:
    """Contraction of the join onto the point {(1, 1, e)}.

    For tau in [0, 1/2] the entries in slots 1, 2, ... slide up by one slot,
    highest first, freeing slot 1; for tau in [1/2, 1] everything fades out
    while the identity fades in at slot 1.  Needs the top slot empty.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    G, N = p.group, p.stage
    if p.entries and p.entries[-1].index >= N - 1:
        raise JoinError("stage overflow: contract needs the top slot free")
    w, g = _vec(p, N)
    top = max((e.index for e in p.entries), default=0)
    movers = list(range(top, 0, -1))  # slots to move, highest first
    if tau <= 0.5:
        slots: dict = {}
        sigma = 2.0 * tau
        if movers:
            piece, local = _concat(len(movers), sigma)
            b = bump(local, eps)
        for r, m in enumerate(movers, start=1):
            if w[m] == 0:
                continue
            if r < piece:
                _put(slots, m + 1, w[m], g[m])
            elif r == piece:
                _put(slots, m, (1.0 - b) * w[m], g[m])
                _put(slots, m + 1, b * w[m], g[m])
            else:
                _put(slots, m, w[m], g[m])
        if w[0] > 0:
            _put(slots, 0, w[0], g[0])
        return _assemble(G, N, slots)
    b = bump(2.0 * tau - 1.0, eps)
    shifted = {0: (w[0], g[0])}
    for m in movers:
        shifted[m + 1] = (w[m], g[m])
    slots = {}
    for i, (wi, gi) in shifted.items():
        _put(slots, i, (1.0 - b) * wi, gi)
    _put(slots, 1, b, G.identity())
    return _assemble(G, N, slots)
