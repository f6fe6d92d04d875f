"""Shared low-level numerics: adaptive quadrature, golden-section search,
monotone bisection, and the seeded counter-based RNG used for reproducible
searches.

Everything here is deliberately boring.  The quadrature splits panels at
caller-supplied knots because the integrands in this library (step transfers
against kinked densities) are only piecewise smooth, and a naive adaptive rule
loses an order of accuracy when a discontinuity sits inside a panel.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable

import numpy as np

INV_PHI = 2.0 / (1.0 + math.sqrt(5.0))  # 1/golden ratio


def _simpson(f, a, fa, b, fb, m, fm):
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def _adaptive_panel(f, a, fa, b, fb, m, fm, whole, tol, depth):
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = f(lm)
    frm = f(rm)
    left = _simpson(f, a, fa, m, fm, lm, flm)
    right = _simpson(f, m, fm, b, fb, rm, frm)
    err = left + right - whole
    if depth <= 0 or abs(err) <= 15.0 * tol:
        return left + right + err / 15.0
    return _adaptive_panel(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) + _adaptive_panel(
        f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1
    )


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-10,
    knots: Iterable[float] = (),
    max_depth: int = 48,
) -> float:
    """Integrate ``f`` over [a, b] with adaptive Simpson panels.

    ``knots`` are interior points where the integrand may be non-smooth
    (kinks, jumps); the integration starts with a panel break at each.
    ``tol`` is an absolute tolerance per initial panel.
    """
    if b <= a:
        return 0.0
    pts = [a] + sorted({float(k) for k in knots if a < k < b}) + [b]
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        flo, fhi = f(lo), f(hi)
        m = 0.5 * (lo + hi)
        fm = f(m)
        whole = _simpson(f, lo, flo, hi, fhi, m, fm)
        total += _adaptive_panel(f, lo, flo, hi, fhi, m, fm, whole, tol, max_depth)
    return total


def golden_max(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> tuple[float, float]:
    """Golden-section maximization of ``f`` on [lo, hi].

    Assumes unimodality on the bracket; on plateaus it converges to a point
    of the plateau.  Returns ``(argmax, value)`` including the bracket
    endpoints as candidates.
    """
    a, b = float(lo), float(hi)
    fa0, fb0 = f(a), f(b)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while abs(b - a) > tol and it < max_iter:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
        it += 1
    xm = 0.5 * (a + b)
    cands = [(xm, f(xm)), (c, fc), (d, fd), (lo, fa0), (hi, fb0)]
    return max(cands, key=lambda p: p[1])


def golden_max_batch(
    f: Callable[[np.ndarray], np.ndarray],
    lo: np.ndarray,
    hi: np.ndarray,
    iters: int = 80,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized golden-section maximization over a batch of brackets.

    ``f`` maps an array of abscissae to an array of values; each row gets its
    own bracket.  All brackets shrink in lockstep for ``iters`` rounds.
    """
    a = np.asarray(lo, dtype=float).copy()
    b = np.asarray(hi, dtype=float).copy()
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc = f(c)
    fd = f(d)
    for _ in range(iters):
        left = fc >= fd  # keep [a, d] where True, [c, b] where False
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new = np.where(left, b - INV_PHI * (b - a), d)
        d_new = np.where(left, c, a + INV_PHI * (b - a))
        carry_fc = np.where(left, np.nan, fd)  # reused value when keeping [c, b]
        carry_fd = np.where(left, fc, np.nan)  # reused value when keeping [a, d]
        fresh = f(np.where(left, c_new, d_new))
        fc = np.where(left, fresh, carry_fc)
        fd = np.where(left, carry_fd, fresh)
        c, d = c_new, d_new
    xm = 0.5 * (a + b)
    fm = f(xm)
    best = np.maximum(np.maximum(fc, fd), fm)
    xs = np.where(fm >= best, xm, np.where(fc >= fd, c, d))
    return xs, f(xs)


def bisect_first_true(
    pred: Callable[[float], bool],
    lo: float,
    hi: float,
    tol: float = 1e-9,
    max_iter: int = 200,
) -> float:
    """Smallest x in (lo, hi] with pred(x) true, assuming a single switch.

    Requires ``pred(lo)`` false and ``pred(hi)`` true; bisects to ``tol``.
    """
    a, b = float(lo), float(hi)
    it = 0
    while b - a > tol and it < max_iter:
        m = 0.5 * (a + b)
        if pred(m):
            b = m
        else:
            a = m
        it += 1
    return b


def solve_increasing(
    f: Callable[[float], float],
    target: float,
    lo: float,
    hi: float,
    tol: float = 1e-9,
    max_iter: int = 200,
) -> float:
    """Solve f(x) = target for nondecreasing f by bisection on [lo, hi]."""
    a, b = float(lo), float(hi)
    it = 0
    while b - a > tol and it < max_iter:
        m = 0.5 * (a + b)
        if f(m) < target:
            a = m
        else:
            b = m
        it += 1
    return 0.5 * (a + b)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox generator; reproducible across platforms."""
    return np.random.Generator(np.random.Philox(seed))
