"""Flat-ended smooth step built from exp(-1/t)."""

from __future__ import annotations

import numpy as np


def psi(t):
    """exp(-1/t) for t > 0, glued to 0; safe on arrays."""
    t = np.asarray(t, dtype=float)
    pos = t > 0
    out = np.zeros_like(t)
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def bump(tau, eps: float = 0.1):
    """Smooth monotone step: 0 for tau <= eps, 1 for tau >= 1 - eps."""
    if not 0.0 < eps < 0.5:
        raise ValueError(f"eps must lie in (0, 1/2), got {eps}")
    tau = np.asarray(tau, dtype=float)
    a = psi(tau - eps)
    b = psi(1.0 - eps - tau)
    out = a / (a + b)
    return out if out.ndim else float(out)
