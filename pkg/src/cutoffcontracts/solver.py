"""The principal's problem: participation threshold, optimal cutoff, model
variants, comparative statics, and the classic output-based reduction.

The optimal cutoff follows the two-case boundary rule.  Let eta_inv be the
elasticity threshold for the problem dimension and lam(d) the agent's best
response to the cutoff d.  If the participation cutoff d_bar already sits at
or past the boundary (lam(d_bar) * d_bar >= eta_inv), raising d only
substitutes away from precision, so d* = d_bar and the agent keeps no
surplus.  Otherwise precision and cutoff are complements until the product
lam(d) * d first reaches the boundary, and d* is that first hitting point.

The scan over cutoffs is grid-then-refine rather than bisection because
lam(d) can jump at cost kinks, making the product non-continuous.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal, Optional

import numpy as np

from .agent import (
    AgentSettings,
    CostFunction,
    best_response_cutoff,
    cutoff_response_curve,
    participation_payoff,
)
from .densities import GaussianDensity, SignalDensity
from .elasticity import check_iea, eta_inverse
from .numerics import golden_max

__all__ = [
    "SolverSettings",
    "SolveResult",
    "NoFeasibleContractError",
    "min_participation_cutoff",
    "optimal_cutoff",
    "solve_gaussian_prior",
    "solve_unobserved_state",
    "comparative_statics",
    "ComparativeStaticsReport",
    "OutputModel",
    "ExponentialOutputModel",
    "LognormalOutputModel",
    "TabulatedOutputModel",
    "check_output_mlrp",
    "solve_classic_pa",
    "ClassicPAResult",
]


class NoFeasibleContractError(RuntimeError):
    """No cutoff within the search window gives the agent nonnegative payoff."""


@dataclass(frozen=True)
class SolverSettings:
    """Scan windows and tolerances for the principal's search."""

    d_max: Optional[float] = None  # default 50 * density scale
    d_scan: int = 512
    refine_rounds: int = 2
    refine_points: int = 64
    product_tol: float = 1e-6
    dbar_tol: float = 1e-8
    agent: AgentSettings = AgentSettings()

    def d_ceiling(self, density: SignalDensity) -> float:
        return self.d_max if self.d_max is not None else 50.0 * density.scale


@dataclass(frozen=True)
class SolveResult:
    """The principal's answer for one model configuration."""

    d_bar: float
    d_star: float
    lambda_star: float
    region: Literal["substitute_at_dbar", "complement_to_boundary", "best_cutoff_only"]
    ir_binding: bool
    boundary_product: float
    eta_threshold: float
    payoff: float
    posterior_precision: Optional[float] = None
    iea_holds: bool = True
    boundary_reached: bool = True
    warning: Optional[str] = None


def min_participation_cutoff(
    density: SignalDensity,
    cost: CostFunction,
    settings: SolverSettings = SolverSettings(),
    precision_map: Optional[Callable] = None,
) -> float:
    """Smallest cutoff at which the agent's best payoff is nonnegative.

    Bisection on the nondecreasing map d -> pi(d).  Costs without a fixed
    component have pi(d) >= 0 for every d (vanishing effort is free), so the
    threshold is zero; a genuine bisection only happens under fixed costs.
    """
    agent = settings.agent

    def pi(d):
        return participation_payoff(density, d, cost, agent, precision_map)

    if pi(0.0) >= -agent.ir_tol:
        return 0.0
    d_hi = settings.d_ceiling(density)
    if pi(d_hi) < -agent.ir_tol:
        raise NoFeasibleContractError(
            f"no participating cutoff within d <= {d_hi:.6g} (budget too small for this cost)"
        )
    lo, hi = 0.0, d_hi
    while hi - lo > settings.dbar_tol:
        mid = 0.5 * (lo + hi)
        if pi(mid) >= -agent.ir_tol:
            hi = mid
        else:
            lo = mid
    return hi


def _scan_first_hit(product_fn, d_lo, d_hi, threshold, settings):
    """First d in [d_lo, d_hi] with product(d) >= threshold, grid + refinement.

    Returns (d, reached).  ``product_fn`` maps an array of cutoffs to
    lam(d) * d products (with the variant's posterior precision applied).
    """
    lo, hi = d_lo, d_hi
    npts = settings.d_scan
    for round_idx in range(settings.refine_rounds + 1):
        ds = np.linspace(lo, hi, npts)
        prods = product_fn(ds)
        hit = prods >= threshold - settings.product_tol
        if not hit.any():
            if round_idx == 0:
                return float(ds[int(np.argmax(prods))]), False
            return float(hi), True
        i = int(np.argmax(hit))
        if i == 0:
            return float(ds[0]), True
        lo, hi = ds[i - 1], ds[i]
        npts = settings.refine_points
    return float(hi), True


def _solve_pipeline(
    density: SignalDensity,
    cost: CostFunction,
    dim: int,
    settings: SolverSettings,
    precision_map: Optional[Callable] = None,
    variant_posterior: bool = False,
) -> SolveResult:
    agent = settings.agent
    pmap = precision_map or (lambda lam: lam)
    eta_inv, overflow = eta_inverse(density, float(dim))
    iea, _ = check_iea(density, float(dim))

    warning = None
    if overflow:
        warning = "elasticity never exceeded the dimension inside the scan window"
    d_bar = min_participation_cutoff(density, cost, settings, precision_map)

    def response(d):
        return best_response_cutoff(density, d, cost, agent, precision_map)

    def products(ds):
        lams, _, _ = cutoff_response_curve(density, ds, cost, agent, precision_map)
        return np.asarray(pmap(lams)) * ds

    if not iea:
        # no optimality guarantee: report the best cutoff over the scan
        d_hi = settings.d_ceiling(density)
        ds = np.linspace(d_bar, d_hi, settings.d_scan)
        lams, _, _ = cutoff_response_curve(density, ds, cost, agent, precision_map)
        j = int(np.argmax(lams))
        lo = ds[max(j - 1, 0)]
        hi = ds[min(j + 1, ds.size - 1)]
        d_best, _ = golden_max(lambda d: response(d).lambda_star, lo, hi, tol=1e-10)
        cands = [(d_best, response(d_best).lambda_star), (float(ds[j]), float(lams[j]))]
        d_best = max(cands, key=lambda p: p[1])[0]
        resp = response(d_best)
        eff = float(pmap(resp.lambda_star)) if resp.lambda_star > 0 else 0.0
        return SolveResult(
            d_bar=d_bar,
            d_star=float(d_best),
            lambda_star=resp.lambda_star,
            region="best_cutoff_only",
            ir_binding=abs(resp.payoff) <= 1e-6,
            boundary_product=eff * d_best,
            eta_threshold=eta_inv,
            payoff=resp.payoff,
            posterior_precision=eff if variant_posterior else None,
            iea_holds=False,
            warning="increasing elasticity fails: cutoff optimality is not guaranteed, "
            "returning the best cutoff found",
        )

    resp_bar = response(d_bar)
    prod_bar = float(pmap(resp_bar.lambda_star)) * d_bar if resp_bar.lambda_star > 0 else 0.0
    if prod_bar >= eta_inv - settings.product_tol:
        eff = float(pmap(resp_bar.lambda_star))
        return SolveResult(
            d_bar=d_bar,
            d_star=d_bar,
            lambda_star=resp_bar.lambda_star,
            region="substitute_at_dbar",
            ir_binding=True,
            boundary_product=prod_bar,
            eta_threshold=eta_inv,
            payoff=resp_bar.payoff,
            posterior_precision=eff if variant_posterior else None,
            iea_holds=True,
            warning=warning,
        )

    d_hi = settings.d_ceiling(density)
    d_star, reached = _scan_first_hit(products, d_bar, d_hi, eta_inv, settings)
    resp = response(d_star)
    eff = float(pmap(resp.lambda_star)) if resp.lambda_star > 0 else 0.0
    if not reached:
        warning = (
            "lam(d) * d never reached the elasticity threshold inside the scan window; "
            "returning the cutoff with the highest scanned product"
        )
    return SolveResult(
        d_bar=d_bar,
        d_star=float(d_star),
        lambda_star=resp.lambda_star,
        region="complement_to_boundary",
        ir_binding=False,
        boundary_product=eff * d_star,
        eta_threshold=eta_inv,
        payoff=resp.payoff,
        posterior_precision=eff if variant_posterior else None,
        iea_holds=True,
        boundary_reached=reached,
        warning=warning,
    )


def optimal_cutoff(
    density: SignalDensity,
    cost: CostFunction,
    dim: Optional[int] = None,
    settings: SolverSettings = SolverSettings(),
) -> SolveResult:
    """Optimal cutoff for the baseline model (state observed ex post)."""
    if dim is not None and dim != density.dimension:
        raise ValueError(f"dim={dim} does not match density dimension {density.dimension}")
    return _solve_pipeline(density, cost, density.dimension, settings)


def solve_gaussian_prior(
    density: SignalDensity,
    lambda0: float,
    cost: CostFunction,
    settings: SolverSettings = SolverSettings(),
) -> SolveResult:
    """Proper Gaussian prior with precision lambda0 and Gaussian signal.

    The agent's posterior precision is sqrt(lambda0^2 + lam^2); the boundary
    rule applies to that posterior precision.
    """
    if not isinstance(density, GaussianDensity):
        raise ValueError("the Gaussian-prior variant requires a gaussian signal density")
    if lambda0 <= 0:
        raise ValueError("prior precision lambda0 must be positive")

    def pmap(lam):
        return np.sqrt(lambda0**2 + np.asarray(lam, dtype=float) ** 2)

    return _solve_pipeline(
        density, cost, density.dimension, settings, precision_map=pmap, variant_posterior=True
    )


def solve_unobserved_state(
    density: SignalDensity,
    prior: Literal["uniform", "gaussian"],
    lambda_p: float,
    cost: CostFunction,
    lambda0: Optional[float] = None,
    settings: SolverSettings = SolverSettings(),
) -> SolveResult:
    """State unobserved: the principal disciplines with her own Gaussian signal.

    The cutoff applies to |s_p - a|.  The agent's effective precision about
    the principal's signal is (1/lambda_p^2 + 1/lam^2)^(-1/2) under a uniform
    prior, with lam^2 + lambda0^2 replacing lam^2 under a Gaussian prior.
    """
    if not isinstance(density, GaussianDensity):
        raise ValueError("the unobserved-state variant requires a gaussian signal density")
    if lambda_p <= 0:
        raise ValueError("principal signal precision lambda_p must be positive")
    if prior == "gaussian":
        if lambda0 is None or lambda0 <= 0:
            raise ValueError("gaussian prior requires a positive lambda0")

        def pmap(lam):
            lam = np.asarray(lam, dtype=float)
            return (1.0 / lambda_p**2 + 1.0 / (lam**2 + lambda0**2)) ** -0.5

    elif prior == "uniform":
        if lambda0 is not None:
            raise ValueError("lambda0 only applies to the gaussian prior")

        def pmap(lam):
            lam = np.asarray(lam, dtype=float)
            with np.errstate(divide="ignore"):
                return (1.0 / lambda_p**2 + 1.0 / lam**2) ** -0.5

    else:
        raise ValueError(f"unknown prior {prior!r}")
    return _solve_pipeline(
        density, cost, density.dimension, settings, precision_map=pmap, variant_posterior=True
    )


# ---------------------------------------------------------------------------
# Comparative statics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComparativeStaticsReport:
    hypothesis_holds: bool
    message: str
    result_low: Optional[SolveResult]
    result_high: Optional[SolveResult]
    d_ordering_holds: Optional[bool]
    lambda_ordering_holds: Optional[bool]


def comparative_statics(
    density: SignalDensity,
    cost_low: CostFunction,
    cost_high: CostFunction,
    settings: SolverSettings = SolverSettings(),
    tol: float = 1e-6,
) -> ComparativeStaticsReport:
    """Cost comparison: a uniformly higher cost with a nondecreasing
    difference raises the optimal cutoff and lowers the induced precision.

    When the hypothesis fails the comparison can go either way, so the
    report declines to predict instead of asserting.
    """
    lams = settings.agent.lambda_grid_points()
    c1 = np.asarray(cost_low(lams), dtype=float)
    c2 = np.asarray(cost_high(lams), dtype=float)
    if np.any(c2 < c1 - 1e-12):
        return ComparativeStaticsReport(
            False, "hypothesis violated: cost_high is not pointwise above cost_low", None, None, None, None
        )
    diff = c2 - c1
    if np.any(np.diff(diff) < -1e-9 * np.maximum(1.0, np.abs(diff[:-1]))):
        return ComparativeStaticsReport(
            False,
            "hypothesis violated: the cost difference is not nondecreasing, no prediction",
            None,
            None,
            None,
            None,
        )
    r1 = optimal_cutoff(density, cost_low, settings=settings)
    r2 = optimal_cutoff(density, cost_high, settings=settings)
    d_ok = r1.d_star <= r2.d_star + tol
    l_ok = r2.lambda_star <= r1.lambda_star + tol
    return ComparativeStaticsReport(
        True,
        "ordering verified" if (d_ok and l_ok) else "ordering violated",
        r1,
        r2,
        bool(d_ok),
        bool(l_ok),
    )


# ---------------------------------------------------------------------------
# Classic principal-agent reduction (observable output, quota contracts)
# ---------------------------------------------------------------------------


class OutputModel:
    """Output distribution g(y; e) on [0, inf) indexed by effort."""

    family = "abstract"
    e_min = 1e-3
    e_max = 5.0
    y_max = 20.0

    def g(self, y, e):
        raise NotImplementedError

    def G(self, y, e):
        raise NotImplementedError


class ExponentialOutputModel(OutputModel):
    """Exponential output with mean equal to effort."""

    family = "exponential_mean_e"

    def __init__(self, e_min=1e-3, e_max=5.0, y_max=20.0):
        self.e_min, self.e_max, self.y_max = float(e_min), float(e_max), float(y_max)

    def g(self, y, e):
        y = np.asarray(y, dtype=float)
        e = np.asarray(e, dtype=float)
        return np.where(y >= 0, np.exp(-y / e) / e, 0.0)

    def G(self, y, e):
        y = np.asarray(y, dtype=float)
        e = np.asarray(e, dtype=float)
        return np.where(y >= 0, 1.0 - np.exp(-y / e), 0.0)


class LognormalOutputModel(OutputModel):
    """Lognormal output with scale (median) equal to effort."""

    family = "lognormal_scale_e"

    def __init__(self, sigma=1.0, e_min=1e-3, e_max=5.0, y_max=50.0):
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        self.sigma = float(sigma)
        self.e_min, self.e_max, self.y_max = float(e_min), float(e_max), float(y_max)

    def g(self, y, e):
        from scipy.stats import lognorm

        return lognorm.pdf(np.asarray(y, dtype=float), self.sigma, scale=e)

    def G(self, y, e):
        from scipy.stats import lognorm

        return lognorm.cdf(np.asarray(y, dtype=float), self.sigma, scale=e)


class TabulatedOutputModel(OutputModel):
    """Output densities tabulated on a (y, e) grid, linearly interpolated."""

    family = "tabulated"

    def __init__(self, y_grid, e_grid, g_values):
        self.y_grid = np.asarray(y_grid, dtype=float)
        self.e_grid = np.asarray(e_grid, dtype=float)
        self.g_values = np.asarray(g_values, dtype=float)  # shape (n_e, n_y)
        if self.g_values.shape != (self.e_grid.size, self.y_grid.size):
            raise ValueError("g_values must have shape (len(e_grid), len(y_grid))")
        if np.any(self.g_values < 0):
            raise ValueError("output densities must be nonnegative")
        self.e_min = float(self.e_grid[0])
        self.e_max = float(self.e_grid[-1])
        self.y_max = float(self.y_grid[-1])
        # cumulative trapezoid per effort row
        dy = np.diff(self.y_grid)
        mids = 0.5 * (self.g_values[:, 1:] + self.g_values[:, :-1])
        self._G_rows = np.concatenate(
            [np.zeros((self.e_grid.size, 1)), np.cumsum(mids * dy, axis=1)], axis=1
        )

    def _interp_rows(self, rows, y, e):
        y = np.asarray(y, dtype=float)
        e = np.asarray(e, dtype=float)
        ei = np.clip(np.searchsorted(self.e_grid, e) - 1, 0, self.e_grid.size - 2)
        w = np.clip((e - self.e_grid[ei]) / (self.e_grid[ei + 1] - self.e_grid[ei]), 0.0, 1.0)
        lo = np.array([np.interp(y, self.y_grid, rows[i]) for i in np.atleast_1d(ei)])
        hi = np.array([np.interp(y, self.y_grid, rows[i + 1]) for i in np.atleast_1d(ei)])
        out = (1.0 - w) * lo.squeeze() + w * hi.squeeze()
        return out

    def g(self, y, e):
        return self._interp_rows(self.g_values, y, e)

    def G(self, y, e):
        return self._interp_rows(self._G_rows, y, e)


def check_output_mlrp(model: OutputModel, tol: float = 1e-7):
    """Grid check that g(y2; e) / g(y1; e) weakly increases in effort.

    Equivalent to supermodularity of log g in (y, e); checked on consecutive
    grid cells, which implies the property for all quadruples on the grid.
    Cells where the density underflows are skipped (log ratios there are not
    representable).  Returns (holds, witness) with a violating quadruple on
    failure.
    """
    ys = np.linspace(model.y_max * 1e-3, model.y_max, 65)
    es = np.linspace(model.e_min, model.e_max, 17)
    gv = np.asarray([model.g(ys, e) for e in es])  # (n_e, n_y)
    ok = gv > 1e-280
    with np.errstate(divide="ignore"):
        lg = np.where(ok, np.log(np.maximum(gv, 1e-300)), np.nan)
    inc = lg[1:, 1:] - lg[1:, :-1] - lg[:-1, 1:] + lg[:-1, :-1]
    corners = ok[1:, 1:] & ok[1:, :-1] & ok[:-1, 1:] & ok[:-1, :-1]
    bad = corners & (inc < -tol)
    if not bad.any():
        return True, None
    i, j = np.unravel_index(int(np.argmax(bad)), bad.shape)
    witness = (float(ys[j]), float(ys[j + 1]), float(es[i]), float(es[i + 1]))
    return False, witness


@dataclass(frozen=True)
class ClassicPAResult:
    d_star: float
    e_star: float
    payoff: float
    mlrp_holds: bool
    warning: Optional[str] = None


def _effort_response(model, d, cost, settings):
    """Largest-argmax effort best response to the output quota d."""
    agent = settings.agent
    es = np.linspace(model.e_min, model.e_max, agent.lambda_grid)
    pay = 1.0 - model.G(d, es) - cost(es)
    j = int(np.argmax(pay))
    lo, hi = es[max(j - 1, 0)], es[min(j + 1, es.size - 1)]
    e_ref, p_ref = golden_max(lambda e: 1.0 - float(model.G(d, e)) - float(cost(e)), lo, hi, tol=1e-12)
    cands_e = np.append(es, e_ref)
    cands_p = np.append(pay, p_ref)
    pmax = float(cands_p.max())
    e_star = float(cands_e[cands_p >= pmax - agent.tie_tol].max())
    zero_pay = (1.0 - float(model.G(d, max(model.e_min * 1e-3, 1e-9)))) - cost.zero_limit()
    if pmax < zero_pay - agent.tie_tol:
        e_star, pmax = 0.0, zero_pay
    if pmax < -agent.ir_tol:
        return 0.0, 0.0, False
    return e_star, max(pmax, 0.0), True


def solve_classic_pa(
    model: OutputModel,
    cost: CostFunction,
    settings: SolverSettings = SolverSettings(),
) -> ClassicPAResult:
    """Pick the output quota maximizing induced effort, smallest d on ties.

    The transfer pays the whole budget when output reaches the quota.  Under
    the output MLRP condition this family contains an optimal transfer.
    """
    mlrp, _ = check_output_mlrp(model)
    warning = None if mlrp else "output MLRP fails: quota optimality is not guaranteed"

    ds = np.linspace(0.0, model.y_max, settings.d_scan)
    best = None
    any_participation = False
    for _ in range(settings.refine_rounds + 1):
        rows = [(d,) + _effort_response(model, d, cost, settings) for d in ds]
        any_participation = any_participation or any(r[3] for r in rows)
        efforts = np.array([r[1] for r in rows])
        j = int(np.argmax(efforts))
        tied = efforts >= efforts[j] - settings.agent.tie_tol
        j_small = int(np.argmax(tied))  # smallest d among ties
        d_j, e_j, pay_j, part_j = rows[j_small]
        if best is None or e_j > best[1] + settings.agent.tie_tol or (
            abs(e_j - best[1]) <= settings.agent.tie_tol and d_j < best[0]
        ):
            best = (d_j, e_j, pay_j, part_j)
        lo = ds[max(j_small - 1, 0)]
        hi = ds[min(j_small + 1, ds.size - 1)]
        ds = np.linspace(lo, hi, settings.refine_points)
    d_star, e_star, payoff, participated = best
    if not any_participation:
        raise NoFeasibleContractError("no output quota induces participation")
    return ClassicPAResult(
        d_star=float(d_star), e_star=float(e_star), payoff=float(payoff), mlrp_holds=mlrp, warning=warning
    )
