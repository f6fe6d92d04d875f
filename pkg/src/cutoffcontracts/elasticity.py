"""Elasticity of the signal density and the shape conditions built on it.

The elasticity at x > 0 is ``eta(x) = -x * phi'(x) / phi(x)``, with
``eta = +inf`` where phi vanishes and at the boundary of a compact support.
It measures how fast the density decays in percentage terms and controls
whether a wider prize region raises or lowers the marginal return to
precision.  The key threshold is ``eta_inverse(n) = inf{x : eta(x) > n}``.

Conditions checked here, all on a log-spaced scan refined by bisection:

* increasing elasticity above n (IEA-n): once eta exceeds n it never falls
  back below any earlier value;
* global MLRP: eta nondecreasing everywhere (equivalently, likelihood ratios
  of more- vs less-accurate signals rise with precision);
* strong unimodality: -log(phi) convex.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .densities import SignalDensity
from .numerics import bisect_first_true

__all__ = [
    "elasticity",
    "eta_inverse",
    "check_iea",
    "check_global_mlrp",
    "check_strong_unimodality",
    "elasticity_profile",
    "ElasticityProfile",
]

SCAN_POINTS = 4096
MONOTONE_TOL = 1e-7
ETA_INV_TOL = 1e-9


def elasticity(density: SignalDensity, x):
    """eta(x) = -x * phi'(x) / phi(x) for x > 0; +inf outside the support.

    Kinks use the right derivative, matching the single-crossing-from-below
    framing.  Raises for x <= 0, where the elasticity is undefined.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise ValueError("elasticity is defined for x > 0")
    hw = density.support_halfwidth
    inside = x < hw
    p = np.where(inside, density.pdf(np.where(inside, x, 0.0)), 0.0)
    dp = np.where(inside, density.dpdf(np.where(inside, x, 0.0)), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        eta = np.where(p > 0.0, -x * dp / p, np.inf)
    eta = np.where(inside, eta, np.inf)
    return eta if eta.ndim else float(eta)


def _scan_grid(density: SignalDensity) -> np.ndarray:
    x_max = min(density.support_halfwidth, density.tail_cutoff)
    x_min = 1e-6 * density.scale
    grid = np.geomspace(x_min, x_max, SCAN_POINTS)
    grid[-1] = x_max
    return grid


def eta_inverse(density: SignalDensity, n: float) -> tuple[float, bool]:
    """inf{x > 0 : eta(x) > n}, found by scan plus bisection.

    Returns ``(value, overflow)``; ``overflow`` is True when eta never
    exceeds n inside the truncated scan domain, in which case the scan upper
    bound is returned.
    """
    if n <= 0:
        raise ValueError("threshold n must be positive")
    xs = _scan_grid(density)
    etas = elasticity(density, xs)
    above = etas > n
    if not above.any():
        return float(xs[-1]), True
    i = int(np.argmax(above))
    if i == 0:
        return float(xs[0]), False
    val = bisect_first_true(
        lambda x: elasticity(density, x) > n, xs[i - 1], xs[i], tol=ETA_INV_TOL
    )
    return float(val), False


@dataclass(frozen=True)
class ElasticityProfile:
    """Scan summary of eta for a density at threshold n."""

    eta: Callable
    n: float
    eta_inverse_n: float
    crossing_point: float
    iea_holds: bool
    global_mlrp: bool
    strongly_unimodal: bool
    overflow: bool
    witness: Optional[tuple[float, float]]
    scan_x: np.ndarray
    scan_eta: np.ndarray


def _suffix_min(a: np.ndarray) -> np.ndarray:
    return np.minimum.accumulate(a[::-1])[::-1]


def check_iea(density: SignalDensity, n: float) -> tuple[bool, Optional[tuple[float, float]]]:
    """Does eta, once above n, stay above every earlier such value?

    Scans the domain; a violation is a pair x < y with eta(x) > n and
    eta(y) < eta(x) - tol, returned as the witness.
    """
    xs = _scan_grid(density)
    etas = elasticity(density, xs)
    suf = _suffix_min(np.append(etas[1:], np.inf))
    bad = (etas > n) & (suf < etas - MONOTONE_TOL)
    if not bad.any():
        return True, None
    i = int(np.argmax(bad))
    j = i + 1 + int(np.argmin(etas[i + 1 :]))
    return False, (float(xs[i]), float(xs[j]))


def check_global_mlrp(density: SignalDensity) -> bool:
    """Is eta nondecreasing on the whole scanned domain (within tolerance)?

    By the log-derivative identity this certifies that the likelihood ratio
    of a more-accurate to a less-accurate signal increases with precision.
    """
    xs = _scan_grid(density)
    etas = elasticity(density, xs)
    suf = _suffix_min(np.append(etas[1:], np.inf))
    return bool(np.all(suf >= etas - MONOTONE_TOL))


def check_strong_unimodality(density: SignalDensity) -> bool:
    """Is -log(phi) convex (nondecreasing slopes on the scan grid)?"""
    xs = _scan_grid(density)
    p = density.pdf(xs)
    mask = p > 0.0
    xs, p = xs[mask], p[mask]
    if xs.size < 3:
        return True
    g = -np.log(p)
    slopes = np.diff(g) / np.diff(xs)
    tol = MONOTONE_TOL * np.maximum(1.0, np.abs(slopes[:-1]))
    return bool(np.all(np.diff(slopes) >= -tol))


def elasticity_profile(density: SignalDensity, n: float | None = None) -> ElasticityProfile:
    """Assemble the full profile: threshold, crossing, and condition flags."""
    if n is None:
        n = float(density.dimension)
    xs = _scan_grid(density)
    etas = elasticity(density, xs)
    inv, overflow = eta_inverse(density, n)
    iea, witness = check_iea(density, n)

    below = etas <= n
    up = np.nonzero(below[:-1] & ~below[1:])[0]
    if up.size:
        i = int(up[-1])
        crossing = bisect_first_true(
            lambda x: elasticity(density, x) > n, xs[i], xs[i + 1], tol=ETA_INV_TOL
        )
    else:
        crossing = inv

    return ElasticityProfile(
        eta=lambda x: elasticity(density, x),
        n=float(n),
        eta_inverse_n=inv,
        crossing_point=float(crossing),
        iea_holds=iea,
        global_mlrp=check_global_mlrp(density),
        strongly_unimodal=check_strong_unimodality(density),
        overflow=overflow,
        witness=witness,
        scan_x=xs,
        scan_eta=np.asarray(etas),
    )
