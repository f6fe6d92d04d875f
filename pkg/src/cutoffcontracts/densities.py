"""Standardized symmetric single-peaked signal densities.

A density here is a radial profile ``phi`` on the real line (or, in dimension
n > 1, on the radius), normalized so that its n-ball integral is one.  The
scaled family is ``phi(x; theta, lam) = lam**n * phi(lam * |x - theta|)``:
``lam`` is the precision, the inverse of the noise scale.

Built-in families: gaussian, laplace, logistic, uniform, triangular,
truncated_exp_inverse (flat top, then ``k * exp(1/x)`` out to 1), and a
tabulated family interpolated from (x, phi) samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.interpolate import PchipInterpolator

from .numerics import adaptive_simpson

__all__ = [
    "SignalDensity",
    "GaussianDensity",
    "LaplaceDensity",
    "LogisticDensity",
    "UniformDensity",
    "TriangularDensity",
    "TruncatedExpInverseDensity",
    "TabulatedDensity",
    "DensityEval",
    "DensityValidationError",
    "OutsideGridError",
    "make_density",
    "ball_volume",
]

NORMALIZATION_TOL = 1e-8
SYMMETRY_TOL = 1e-10
TAIL_MASS = 1e-12


class DensityValidationError(ValueError):
    """A constructed density violates symmetry, single-peakedness, or normalization."""


class OutsideGridError(ValueError):
    """A tabulated density was queried beyond its grid hull."""


def ball_volume(n: int) -> float:
    """Volume of the unit n-ball, pi^(n/2) / Gamma(n/2 + 1)."""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


@dataclass(frozen=True)
class DensityEval:
    pdf: float
    cdf: float
    dpdf: float


class SignalDensity:
    """Base class: radial profile plus the scaling family and ball masses.

    Subclasses set ``family``, ``support_halfwidth``, ``kinks`` (radii where
    phi' jumps), and implement ``_profile`` / ``_dprofile`` for the
    *unnormalized* radial shape.  The base class computes the n-dimensional
    normalizer, the tail truncation point for quadrature, and generic ball
    masses; subclasses override with closed forms where available.
    """

    family = "abstract"
    piecewise_differentiable = False  # True when phi' has jump points

    def __init__(self, dimension: int = 1):
        if dimension < 1 or int(dimension) != dimension:
            raise DensityValidationError(f"dimension must be a positive integer, got {dimension}")
        self.dimension = int(dimension)
        self.volume_coefficient = ball_volume(self.dimension)
        self.kinks: tuple[float, ...] = ()
        self.scale = 1.0

    # -- subclass surface ---------------------------------------------------

    def _profile(self, r):
        raise NotImplementedError

    def _dprofile(self, r):
        raise NotImplementedError

    @property
    def support_halfwidth(self) -> float:
        raise NotImplementedError

    # -- construction helpers ----------------------------------------------

    def _finish_init(self):
        """Compute normalizer and tail cutoff; then validate."""
        self._ball_cache = None
        self._norm = self._compute_normalizer()
        self.tail_cutoff = self._compute_tail_cutoff()
        self._validate()

    def _compute_normalizer(self) -> float:
        n = self.dimension
        hi = self._raw_tail_cutoff()
        coeff = n * self.volume_coefficient

        def integrand(r):
            return coeff * self._profile(r) * r ** (n - 1) if n > 1 else 2.0 * self._profile(r)

        total = adaptive_simpson(integrand, 0.0, hi, tol=1e-12, knots=self.kinks)
        return 1.0 / total

    def _raw_tail_cutoff(self) -> float:
        """Upper integration bound before the normalizer is known."""
        hw = self.support_halfwidth
        if math.isfinite(hw):
            return hw
        # expand until the unnormalized shape is negligible
        hi = 1.0
        while self._profile(hi) > 1e-18 and hi < 1e6:
            hi *= 2.0
        return hi

    def _compute_tail_cutoff(self) -> float:
        hw = self.support_halfwidth
        if math.isfinite(hw):
            return hw
        lo, hi = 1.0, self._raw_tail_cutoff()
        # smallest radius beyond which the remaining mass is below TAIL_MASS
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if 1.0 - self.ball_mass(mid) < TAIL_MASS:
                hi = mid
            else:
                lo = mid
            if hi - lo < 1e-9 * max(1.0, hi):
                break
        return hi

    def _validate(self):
        hw = min(self.support_halfwidth, self._raw_tail_cutoff())
        xs = np.linspace(0.0, hw * (1.0 - 1e-12), 201)
        p = self.pdf(xs)
        if np.any(p < -SYMMETRY_TOL):
            raise DensityValidationError(f"{self.family}: negative density values")
        if not np.allclose(p, self.pdf(-xs), atol=SYMMETRY_TOL):
            raise DensityValidationError(f"{self.family}: symmetry violated beyond 1e-10")
        diffs = np.diff(p)
        if np.any(diffs > 1e-9 * max(1.0, float(p.max()))):
            raise DensityValidationError(f"{self.family}: not single-peaked (increasing on x > 0)")
        total = self._normalization_integral()
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise DensityValidationError(
                f"{self.family}: normalization off by {total - 1.0:.3e} (tol {NORMALIZATION_TOL})"
            )

    def _normalization_integral(self) -> float:
        n = self.dimension
        hi = min(self.support_halfwidth, self.tail_cutoff)
        coeff = n * self.volume_coefficient

        def integrand(r):
            return coeff * self.pdf(r) * r ** (n - 1) if n > 1 else 2.0 * self.pdf(r)

        return adaptive_simpson(integrand, 0.0, hi, tol=1e-12, knots=self.kinks)

    # -- public surface -----------------------------------------------------

    def pdf(self, x):
        """Radial profile at |x| (normalized)."""
        r = np.abs(np.asarray(x, dtype=float))
        out = np.where(r <= self.support_halfwidth, self._profile(r) * self._norm, 0.0)
        return out if out.ndim else float(out)

    def dpdf(self, x):
        """Signed derivative of pdf; right limits at kink points."""
        x = np.asarray(x, dtype=float)
        r = np.abs(x)
        inside = r < self.support_halfwidth
        d = np.where(inside, self._dprofile(r) * self._norm, 0.0)
        out = np.where(x >= 0.0, d, -d)
        return out if out.ndim else float(out)

    def cdf(self, x):
        """One-dimensional cdf of the profile; only defined for dimension 1."""
        if self.dimension != 1:
            raise NotImplementedError("cdf is one-dimensional; use ball_mass for n > 1")
        return self._cdf1(x)

    def _cdf1(self, x):
        x = np.asarray(x, dtype=float)
        out = 0.5 + 0.5 * np.sign(x) * self.ball_mass(np.abs(x))
        return out if out.ndim else float(out)

    def ball_mass(self, u):
        """Probability that the standardized noise has radius at most u."""
        u = np.asarray(u, dtype=float)
        out = self._ball_mass_impl(np.clip(u, 0.0, None))
        out = np.clip(out, 0.0, 1.0)
        return out if out.ndim else float(out)

    def _ball_mass_impl(self, u):
        # generic path: cached monotone interpolant of the cumulative integral
        if self._ball_cache is None:
            self._ball_cache = self._build_ball_cache()
        hi_r, interp = self._ball_cache
        u = np.minimum(u, hi_r)
        return interp(u)

    def _build_ball_cache(self):
        n = self.dimension
        hi = min(self.support_halfwidth, self._raw_tail_cutoff())
        nodes = np.unique(
            np.concatenate(
                [np.linspace(0.0, hi, 4097), np.asarray(self.kinks, dtype=float)]
            )
        )
        nodes = nodes[(nodes >= 0.0) & (nodes <= hi)]
        coeff = n * self.volume_coefficient

        def integrand(r):
            return coeff * self.pdf(r) * r ** (n - 1) if n > 1 else 2.0 * self.pdf(r)

        masses = np.zeros(nodes.size)
        for i in range(1, nodes.size):
            masses[i] = masses[i - 1] + adaptive_simpson(
                integrand, nodes[i - 1], nodes[i], tol=1e-13
            )
        masses = np.minimum(masses, 1.0)
        interp = PchipInterpolator(nodes, masses, extrapolate=False)

        def query(u):
            vals = interp(np.clip(u, 0.0, nodes[-1]))
            return np.nan_to_num(vals, nan=1.0)

        return nodes[-1], query

    def scaled_pdf(self, x, theta, lam):
        """Density of the signal at x given state theta and precision lam."""
        if lam <= 0:
            raise ValueError(f"precision must be positive, got {lam}")
        x = np.asarray(x, dtype=float)
        out = lam**self.dimension * self.pdf(lam * (x - theta))
        return out if np.ndim(out) else float(out)

    def evaluate(self, x: float) -> DensityEval:
        """pdf, cdf, and (one-sided) pdf derivative at a point."""
        return DensityEval(pdf=float(self.pdf(x)), cdf=float(self.cdf(x)), dpdf=float(self.dpdf(x)))

    def quantile_radius(self, mass: float) -> float:
        """Radius containing the given probability mass (inverse ball_mass)."""
        lo, hi = 0.0, min(self.support_halfwidth, self.tail_cutoff)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.ball_mass(mid) < mass:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-12 * max(1.0, hi):
                break
        return hi

    def __repr__(self):
        return f"{type(self).__name__}(dimension={self.dimension})"


class GaussianDensity(SignalDensity):
    family = "gaussian"

    def __init__(self, dimension: int = 1):
        super().__init__(dimension)
        self._finish_init()

    def _profile(self, r):
        return np.exp(-0.5 * r * r)

    def _dprofile(self, r):
        return -r * np.exp(-0.5 * r * r)

    @property
    def support_halfwidth(self):
        return math.inf

    def _compute_normalizer(self):
        return (2.0 * math.pi) ** (-self.dimension / 2.0)

    def _compute_tail_cutoff(self):
        # radius where the ball mass deficit drops below TAIL_MASS
        n = self.dimension
        return float(np.sqrt(2.0 * special.gammainccinv(n / 2.0, TAIL_MASS)))

    def _cdf1(self, x):
        out = special.ndtr(np.asarray(x, dtype=float))
        return out if out.ndim else float(out)

    def _ball_mass_impl(self, u):
        return special.gammainc(self.dimension / 2.0, 0.5 * u * u)


class LaplaceDensity(SignalDensity):
    family = "laplace"
    piecewise_differentiable = True  # kink at the origin

    def __init__(self, dimension: int = 1):
        super().__init__(dimension)
        self.kinks = (0.0,)
        self._finish_init()

    def _profile(self, r):
        return np.exp(-r)

    def _dprofile(self, r):
        return -np.exp(-r)

    @property
    def support_halfwidth(self):
        return math.inf

    def _compute_normalizer(self):
        n = self.dimension
        return 1.0 / (n * self.volume_coefficient * math.gamma(n))

    def _compute_tail_cutoff(self):
        n = self.dimension
        return float(special.gammainccinv(n, TAIL_MASS))

    def _ball_mass_impl(self, u):
        return special.gammainc(self.dimension, u)


class LogisticDensity(SignalDensity):
    family = "logistic"

    def __init__(self, dimension: int = 1):
        super().__init__(dimension)
        self._finish_init()

    def _profile(self, r):
        # exp(-r) / (1 + exp(-r))^2, stable for large r
        e = np.exp(-np.abs(r))
        return e / (1.0 + e) ** 2

    def _dprofile(self, r):
        e = np.exp(-np.abs(r))
        return -self._profile(r) * (1.0 - e) / (1.0 + e)

    @property
    def support_halfwidth(self):
        return math.inf

    def _compute_normalizer(self):
        if self.dimension == 1:
            return 1.0
        return super()._compute_normalizer()

    def _compute_tail_cutoff(self):
        if self.dimension == 1:
            return float(math.log((1.0 - 0.5 * TAIL_MASS) / (0.5 * TAIL_MASS)))
        return super()._compute_tail_cutoff()

    def _cdf1(self, x):
        out = special.expit(np.asarray(x, dtype=float))
        return out if out.ndim else float(out)

    def _ball_mass_impl(self, u):
        if self.dimension == 1:
            return special.expit(u) - special.expit(-u)
        return super()._ball_mass_impl(u)


class UniformDensity(SignalDensity):
    family = "uniform"
    piecewise_differentiable = True  # jump at the support edge

    def __init__(self, dimension: int = 1):
        super().__init__(dimension)
        self.kinks = (1.0,)
        self._finish_init()

    def _profile(self, r):
        return np.where(np.asarray(r) <= 1.0, 1.0, 0.0)

    def _dprofile(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    @property
    def support_halfwidth(self):
        return 1.0

    def _compute_normalizer(self):
        return 1.0 / self.volume_coefficient

    def _ball_mass_impl(self, u):
        return np.minimum(u, 1.0) ** self.dimension


class TriangularDensity(SignalDensity):
    family = "triangular"
    piecewise_differentiable = True  # kinks at 0 and the edge

    def __init__(self, dimension: int = 1):
        super().__init__(dimension)
        self.kinks = (0.0, 1.0)
        self._finish_init()

    def _profile(self, r):
        r = np.asarray(r, dtype=float)
        return np.clip(1.0 - r, 0.0, None)

    def _dprofile(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r < 1.0, -1.0, 0.0)

    @property
    def support_halfwidth(self):
        return 1.0

    def _compute_normalizer(self):
        n = self.dimension
        # n * V_n * integral_0^1 (1 - r) r^(n-1) dr = V_n / (n + 1)
        return (n + 1.0) / self.volume_coefficient

    def _ball_mass_impl(self, u):
        n = self.dimension
        u = np.minimum(u, 1.0)
        return (n + 1.0) * u**n - n * u ** (n + 1.0)


class TruncatedExpInverseDensity(SignalDensity):
    """Flat top k*exp(1/eps) on [0, eps), then k*exp(1/x) out to 1, zero beyond.

    The normalizer k is fixed at construction by quadrature (the 1-d cdf uses
    the closed antiderivative x*exp(1/x) - Ei(1/x)).  Elasticity is 0 on the
    flat top and 1/x on [eps, 1], so it decreases there: the family exists to
    violate increasing elasticity.
    """

    family = "truncated_exp_inverse"
    piecewise_differentiable = True  # kink at eps, jump at 1

    def __init__(self, eps: float = 0.1, dimension: int = 1):
        if not 0.0 < eps < 1.0:
            raise DensityValidationError(f"truncation eps must lie in (0, 1), got {eps}")
        super().__init__(dimension)
        self.eps = float(eps)
        self.kinks = (self.eps, 1.0)
        self._finish_init()

    def _profile(self, r):
        r = np.asarray(r, dtype=float)
        rc = np.clip(r, self.eps, None)
        with np.errstate(over="ignore"):
            vals = np.exp(1.0 / rc)
        return np.where(r <= 1.0, vals, 0.0)

    def _dprofile(self, r):
        r = np.asarray(r, dtype=float)
        inside = (r >= self.eps) & (r < 1.0)
        rc = np.clip(r, self.eps, 1.0)
        return np.where(inside, -np.exp(1.0 / rc) / rc**2, 0.0)

    @property
    def support_halfwidth(self):
        return 1.0

    def _compute_normalizer(self):
        if self.dimension == 1:
            total = 2.0 * (self.eps * math.exp(1.0 / self.eps) + self._exp_inv_integral(self.eps, 1.0))
            return 1.0 / total
        return super()._compute_normalizer()

    @staticmethod
    def _exp_inv_integral(a, b):
        """Integral of exp(1/x) on [a, b] via x*exp(1/x) - Ei(1/x)."""

        def anti(x):
            return x * math.exp(1.0 / x) - special.expi(1.0 / x)

        return anti(b) - anti(a)

    @property
    def normalizer(self) -> float:
        return self._norm

    def _ball_mass_impl(self, u):
        if self.dimension != 1:
            return super()._ball_mass_impl(u)
        u = np.minimum(np.asarray(u, dtype=float), 1.0)
        flat = 2.0 * self._norm * np.minimum(u, self.eps) * math.exp(1.0 / self.eps)
        ucl = np.clip(u, self.eps, 1.0)
        anti = lambda x: x * np.exp(1.0 / x) - special.expi(1.0 / x)
        curved = 2.0 * self._norm * np.where(u > self.eps, anti(ucl) - anti(self.eps), 0.0)
        return flat + curved


class TabulatedDensity(SignalDensity):
    """Density interpolated from (x, phi) samples on a symmetric grid.

    Uses monotone piecewise-cubic (PCHIP) interpolation of the radial profile,
    which preserves single-peakedness, and the interpolant's exact
    antiderivative for the cumulative mass (cached at the grid nodes).
    Queries beyond the grid hull raise ``OutsideGridError``.  Values are
    renormalized at construction so the ball integral is one.
    """

    family = "tabulated"

    def __init__(self, xs, phis, dimension: int = 1):
        super().__init__(dimension)
        xs = np.asarray(xs, dtype=float)
        phis = np.asarray(phis, dtype=float)
        if xs.ndim != 1 or xs.shape != phis.shape or xs.size < 4:
            raise DensityValidationError("tabulated density needs matching 1-d arrays, >= 4 points")
        order = np.argsort(xs)
        xs, phis = xs[order], phis[order]
        if np.any(phis < 0):
            raise DensityValidationError("tabulated density has negative values")
        # fold onto the radial half-grid, checking symmetry of supplied pairs
        if xs[0] < 0:
            pos = xs >= 0
            xp, pp = xs[pos], phis[pos]
            for x, p in zip(xs[~pos], phis[~pos]):
                j = np.searchsorted(xp, -x)
                if j < xp.size and abs(xp[j] + x) < 1e-12 and abs(pp[j] - p) > SYMMETRY_TOL:
                    raise DensityValidationError(f"tabulated density asymmetric at x={x}")
            xs, phis = xp, pp
        if xs[0] > 0:
            xs = np.concatenate([[0.0], xs])
            phis = np.concatenate([[phis[0]], phis])
        if np.any(np.diff(phis) > 1e-9 * max(1.0, float(phis.max()))):
            raise DensityValidationError("tabulated density not single-peaked")
        self._hw = float(xs[-1])
        self.kinks = tuple(xs[1:-1])
        self._interp = PchipInterpolator(xs, phis, extrapolate=False)
        self._dinterp = self._interp.derivative()
        self._anti = self._interp.antiderivative()
        self.scale = self._hw / 2.0
        self._finish_init()

    def _profile(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r > self._hw * (1.0 + 1e-12)):
            raise OutsideGridError(
                f"tabulated density queried at radius {float(np.max(r)):.6g} "
                f"beyond grid hull {self._hw:.6g}"
            )
        vals = self._interp(np.minimum(r, self._hw))
        return np.clip(vals, 0.0, None)

    def _dprofile(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r > self._hw * (1.0 + 1e-12)):
            raise OutsideGridError("tabulated density queried beyond grid hull")
        return self._dinterp(np.minimum(r, self._hw))

    @property
    def support_halfwidth(self):
        return self._hw

    def _compute_normalizer(self):
        if self.dimension == 1:
            return 1.0 / (2.0 * float(self._anti(self._hw) - self._anti(0.0)))
        return super()._compute_normalizer()

    def _ball_mass_impl(self, u):
        if self.dimension != 1:
            return super()._ball_mass_impl(u)
        u = np.minimum(np.asarray(u, dtype=float), self._hw)
        return 2.0 * self._norm * (self._anti(u) - self._anti(0.0))

    def pdf(self, x):
        r = np.abs(np.asarray(x, dtype=float))
        out = self._profile(r) * self._norm
        return out if out.ndim else float(out)

    def dpdf(self, x):
        x = np.asarray(x, dtype=float)
        d = self._dprofile(np.abs(x)) * self._norm
        out = np.where(x >= 0.0, d, -d)
        return out if out.ndim else float(out)


_FAMILIES = {
    "gaussian": GaussianDensity,
    "laplace": LaplaceDensity,
    "logistic": LogisticDensity,
    "uniform": UniformDensity,
    "triangular": TriangularDensity,
}


def make_density(family: str, dimension: int = 1, **params) -> SignalDensity:
    """Construct a density by family name (CLI and config entry point)."""
    family = family.lower()
    if family in _FAMILIES:
        if params:
            raise DensityValidationError(f"family {family!r} takes no parameters, got {params}")
        return _FAMILIES[family](dimension=dimension)
    if family == "truncated_exp_inverse":
        eps = params.pop("eps", 0.1)
        if params:
            raise DensityValidationError(f"unknown parameters for truncated_exp_inverse: {params}")
        return TruncatedExpInverseDensity(eps=eps, dimension=dimension)
    if family == "tabulated":
        try:
            xs, phis = params.pop("xs"), params.pop("phis")
        except KeyError as exc:
            raise DensityValidationError("tabulated family needs xs and phis arrays") from exc
        if params:
            raise DensityValidationError(f"unknown parameters for tabulated: {params}")
        return TabulatedDensity(xs, phis, dimension=dimension)
    raise DensityValidationError(f"unknown density family: {family!r}")
