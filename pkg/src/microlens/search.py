"""Bracketed one-dimensional minimization."""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

INV_PHI = (math.sqrt(5) - 1) / 2
INV_PHI2 = (3 - math.sqrt(5)) / 2


class BracketError(ValueError):
    """The minimum does not lie strictly inside the supplied bracket."""


def golden_section(f: Callable[[float], float], a: float, b: float, tol: float = 1e-3) -> tuple[float, float]:
    """Golden-section search for the minimum of a unimodal ``f`` on ``[a, b]``.

    Returns ``(x_min, f(x_min))``. Raises :class:`BracketError` when the
    search collapses onto either end of the bracket, which is how a minimum
    lying outside ``[a, b]`` shows up.
    """
    a, b = min(a, b), max(a, b)
    lo, hi = a, b
    h = hi - lo
    if h <= tol:
        x = 0.5 * (lo + hi)
        return x, f(x)
    n = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))
    c = lo + INV_PHI2 * h
    d = lo + INV_PHI * h
    fc, fd = f(c), f(d)
    for _ in range(n - 1):
        if fc < fd:
            hi, d, fd = d, c, fc
            h *= INV_PHI
            c = lo + INV_PHI2 * h
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            h *= INV_PHI
            d = lo + INV_PHI * h
            fd = f(d)
    x, fx = (c, fc) if fc < fd else (d, fd)
    if x - a <= tol or b - x <= tol:
        raise BracketError(f"minimum at {x:.6g} sits on the bracket edge [{a:.6g}, {b:.6g}]")
    return x, fx


def golden_section_batch(f: Callable, a, b, tol: float = 1e-3):
    """Independent golden-section searches run in lockstep.

    ``f`` maps an array of abscissae (one per problem) to an array of values.
    Each problem stops after the iteration count its own bracket needs, so
    its result matches :func:`golden_section` whatever else is in the batch.
    Returns ``(x_min, f_min, on_edge)`` where ``on_edge`` marks problems whose
    minimum collapsed onto a bracket end.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.minimum(a, b), np.maximum(a, b)
    lo = a.copy()
    h = b - a
    with np.errstate(divide="ignore", invalid="ignore"):
        steps = np.ceil(np.log(tol / h) / math.log(INV_PHI))
    steps = np.where(h > tol, steps, 1).astype(int)
    c = lo + INV_PHI2 * h
    d = lo + INV_PHI * h
    fc, fd = f(c), f(d)
    for it in range(int(steps.max(initial=1)) - 1):
        active = it < steps - 1
        left = fc < fd
        h = np.where(active, h * INV_PHI, h)
        # left: keep [lo, d]; right: keep [c, hi]
        new_lo = np.where(left, lo, c)
        new_c = np.where(left, new_lo + INV_PHI2 * h, d)
        new_d = np.where(left, c, new_lo + INV_PHI * h)
        probe = np.where(left, new_c, new_d)
        fp = f(probe)
        new_fc = np.where(left, fp, fd)
        new_fd = np.where(left, fc, fp)
        lo = np.where(active, new_lo, lo)
        c = np.where(active, new_c, c)
        d = np.where(active, new_d, d)
        fc = np.where(active, new_fc, fc)
        fd = np.where(active, new_fd, fd)
    x = np.where(fc < fd, c, d)
    fx = np.where(fc < fd, fc, fd)
    narrow = b - a <= tol
    if narrow.any():
        mid = 0.5 * (a + b)
        x = np.where(narrow, mid, x)
        fx = np.where(narrow, f(mid), fx)
    on_edge = ~narrow & ((x - a <= tol) | (b - x <= tol))
    return x, fx, on_edge
