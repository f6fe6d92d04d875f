"""The agent's side: effort costs, expected transfers under truthful and
strategic reporting, and the precision best response.

The expected transfer of a step transfer is computed exactly from the
density's cdf (the integral of a step function needs no quadrature), so the
only searches are over the report offset and the precision.  The precision
best response follows the contract convention: maximize over a log-spaced
window, refine the best basins by golden section, break payoff ties toward
the *largest* precision, and fall back to non-participation when even the
best payoff is negative.

One boundary case matters for participation.  Costs that are continuous at
zero (no fixed component) let the agent accept the contract and exert
vanishing effort at vanishing cost, so the participation payoff is never
strictly negative; the minimum participation cutoff is then zero.  The
best-response routine therefore compares the window optimum against this
zero-effort limit ``-c(0+)`` explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .densities import SignalDensity
from .numerics import golden_max, golden_max_batch
from .transfers import StepTransfer

__all__ = [
    "CostFunction",
    "PowerCost",
    "AffinePowerCost",
    "TabulatedCost",
    "AgentSettings",
    "AgentResponse",
    "SignalModel",
    "expected_transfer_cutoff",
    "expected_transfer_truthful",
    "expected_transfer_strategic",
    "best_response",
    "best_response_cutoff",
    "cutoff_response_curve",
    "participation_payoff",
    "verify_truthful_report",
]


# ---------------------------------------------------------------------------
# Cost functions
# ---------------------------------------------------------------------------


class CostFunction:
    """Lower semicontinuous effort cost on [0, inf) with c(0) = 0."""

    def __call__(self, lam):
        raise NotImplementedError

    def knots(self) -> tuple[float, ...]:
        """Interior precisions where the cost is kinked (grid enrichment)."""
        return ()

    def zero_limit(self) -> float:
        """c(0+): the limiting cost of vanishing effort."""
        return float(self(1e-12))


class PowerCost(CostFunction):
    """c(lam) = a * lam**p."""

    def __init__(self, a: float, p: float):
        if a < 0 or p <= 0:
            raise ValueError("power cost needs a >= 0 and p > 0")
        self.a, self.p = float(a), float(p)

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        out = self.a * lam**self.p
        return out if out.ndim else float(out)

    def __repr__(self):
        return f"PowerCost(a={self.a}, p={self.p})"


class AffinePowerCost(CostFunction):
    """c(lam) = c0 * 1{lam > 0} + a * lam**p (fixed cost plus power term)."""

    def __init__(self, c0: float, a: float, p: float):
        if c0 < 0 or a < 0 or p <= 0:
            raise ValueError("affine power cost needs c0, a >= 0 and p > 0")
        self.c0, self.a, self.p = float(c0), float(a), float(p)

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        out = np.where(lam > 0.0, self.c0 + self.a * lam**self.p, 0.0)
        return out if out.ndim else float(out)

    def __repr__(self):
        return f"AffinePowerCost(c0={self.c0}, a={self.a}, p={self.p})"


class TabulatedCost(CostFunction):
    """Piecewise-linear cost through (lam, cost) knots, extended linearly.

    The first knot must be (0, 0); beyond the last knot the final slope
    continues, keeping the cost evaluable on any window.
    """

    def __init__(self, lams, costs):
        lams = np.asarray(lams, dtype=float)
        costs = np.asarray(costs, dtype=float)
        if lams.ndim != 1 or lams.shape != costs.shape or lams.size < 2:
            raise ValueError("tabulated cost needs matching 1-d arrays, >= 2 points")
        order = np.argsort(lams)
        lams, costs = lams[order], costs[order]
        if lams[0] != 0.0 or costs[0] != 0.0:
            raise ValueError("tabulated cost must start at (0, 0)")
        if np.any(costs < 0):
            raise ValueError("costs must be nonnegative")
        self._lams, self._costs = lams, costs
        self._end_slope = (costs[-1] - costs[-2]) / max(lams[-1] - lams[-2], 1e-300)

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        out = np.interp(lam, self._lams, self._costs)
        over = lam > self._lams[-1]
        out = np.where(over, self._costs[-1] + self._end_slope * (lam - self._lams[-1]), out)
        return out if out.ndim else float(out)

    def knots(self):
        return tuple(self._lams[1:-1])

    def __repr__(self):
        return f"TabulatedCost({self._lams.size} knots)"


# ---------------------------------------------------------------------------
# Settings / result records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AgentSettings:
    """Numerical conventions for the agent's optimization problems."""

    lambda_min: float = 1e-3
    lambda_max: float = 1e3
    lambda_grid: int = 1024
    tie_tol: float = 1e-9  # payoff ties resolved toward the largest precision
    ir_tol: float = 1e-10  # participation slack for float noise
    offset_tol: float = 1e-6  # |offset| below this counts as truthful
    value_gap_tol: float = 1e-8  # strategic gain below this counts as truthful
    refine_basins: int = 3
    golden_iters: int = 120

    def lambda_grid_points(self, cost: Optional[CostFunction] = None) -> np.ndarray:
        grid = np.geomspace(self.lambda_min, self.lambda_max, self.lambda_grid)
        if cost is not None:
            ks = [k for k in cost.knots() if self.lambda_min < k < self.lambda_max]
            if ks:
                grid = np.unique(np.concatenate([grid, np.asarray(ks, dtype=float)]))
        return grid


@dataclass(frozen=True)
class AgentResponse:
    """Outcome of the agent's precision choice against a transfer."""

    lambda_star: float
    payoff: float
    expected_transfer: float
    report_offset: float
    participated: bool
    raw_payoff: float = 0.0  # unclipped window payoff, used for IR bisection
    hit_upper_bound: bool = False


@dataclass(frozen=True)
class SignalModel:
    """One simulated signal draw: s = theta + eps / lam."""

    theta: float
    lam: float
    eps: float
    s: float
    a: float

    @classmethod
    def simulate(
        cls,
        density: SignalDensity,
        theta: float,
        lam: float,
        rng: np.random.Generator,
        report_offset: float = 0.0,
    ) -> "SignalModel":
        if lam <= 0:
            raise ValueError("precision must be positive")
        u = rng.uniform()
        lo = -min(density.support_halfwidth, density.tail_cutoff)
        hi = -lo
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if density.cdf(mid) < u:
                lo = mid
            else:
                hi = mid
        eps = 0.5 * (lo + hi)
        s = theta + eps / lam
        return cls(theta=theta, lam=lam, eps=eps, s=s, a=s + report_offset)


# ---------------------------------------------------------------------------
# Expected transfers
# ---------------------------------------------------------------------------


def expected_transfer_cutoff(density: SignalDensity, lam: float, d: float, dim: int | None = None):
    """E(lam; d) for a cutoff prize region of radius d.

    In one dimension this is 2*Phi(lam*d) - 1; generally the mass of the
    lam*d ball under the standardized noise.  ``lam`` may be an array.
    """
    if dim is not None and dim != density.dimension:
        raise ValueError(f"dim={dim} does not match density dimension {density.dimension}")
    if np.any(np.asarray(lam) <= 0.0):
        raise ValueError("precision must be positive")
    if d < 0:
        raise ValueError("cutoff must be nonnegative")
    return density.ball_mass(np.asarray(lam, dtype=float) * d)


def expected_transfer_truthful(density: SignalDensity, lam: float, transfer: StepTransfer) -> float:
    """Expected transfer when the agent must report the signal itself."""
    if density.dimension != 1:
        raise ValueError("truthful step-transfer values are one-dimensional")
    if lam <= 0:
        raise ValueError("precision must be positive")
    return transfer.truthful_value(density, lam)


def _edge_weights(transfer: StepTransfer) -> tuple[np.ndarray, np.ndarray]:
    """Edges and jump weights so value(b) = sum_j w_j * cdf(lam*(e_j + b))."""
    v = transfer.values
    w = np.concatenate([[-v[0]], v[:-1] - v[1:], [v[-1]]])
    keep = np.abs(w) > 0.0
    return transfer.edges[keep], w[keep]


def _offset_values(density, lam, transfer, bs):
    """Expected transfer at precision lam for each report offset in bs."""
    edges, w = _edge_weights(transfer)
    args = lam * (edges[None, :] + np.asarray(bs, dtype=float)[:, None])
    return density.cdf(args) @ w


def _offset_grid(transfer: StepTransfer, max_points: int = 2049) -> np.ndarray:
    span = 2.0 * transfer.x_max
    if span <= 0:
        return np.array([0.0])
    # tabulation step, but never coarser than ~128 points across the span
    step = min(transfer.min_step, span / 64.0)
    step = max(step, 2.0 * span / (max_points - 1))
    grid = np.arange(-span, span + 0.5 * step, step)
    return np.union1d(grid, [0.0])


def _value_matrix(density, lams, bs, edges, w):
    """Expected-transfer matrix over (precision, offset), accumulated per edge."""
    lams = np.asarray(lams, dtype=float)
    bs = np.asarray(bs, dtype=float)
    out = np.zeros((lams.size, bs.size))
    for e, wj in zip(edges, w):
        out += wj * density.cdf(lams[:, None] * (e + bs)[None, :])
    return out


def expected_transfer_strategic(
    density: SignalDensity,
    lam: float,
    transfer: StepTransfer,
    settings: AgentSettings = AgentSettings(),
    max_points: int = 2049,
) -> tuple[float, float]:
    """Expected transfer maximized over the report offset b = a - s.

    Grid search over offsets at the tabulation step, then golden-section
    refinement around the best basin.  Exact ties (within 1e-12) resolve
    toward the truthful offset 0.  Returns ``(value, offset)``.
    """
    if density.dimension != 1:
        raise ValueError("strategic reporting is one-dimensional")
    if lam <= 0:
        raise ValueError("precision must be positive")
    nz = transfer.values > 1e-12
    if not nz.any():
        return 0.0, 0.0
    first = int(np.argmax(nz))
    last = int(len(nz) - 1 - np.argmax(nz[::-1]))
    flat_block = bool(np.all(nz[first : last + 1])) and (
        float(np.ptp(transfer.values[first : last + 1])) < 1e-12
    )
    if flat_block:
        # single constant paying interval: the optimum centers the noise on it
        b = -0.5 * (transfer.edges[first] + transfer.edges[last + 1])
        vb = float(_offset_values(density, lam, transfer, [b])[0])
        v0 = float(_offset_values(density, lam, transfer, [0.0])[0])
        return (v0, 0.0) if v0 >= vb - 1e-12 else (vb, b)
    bs = _offset_grid(transfer, max_points=max_points)
    vals = _offset_values(density, lam, transfer, bs)
    j = int(np.argmax(vals))
    lo = bs[max(j - 1, 0)]
    hi = bs[min(j + 1, bs.size - 1)]
    b_star, v_star = golden_max(
        lambda b: float(_offset_values(density, lam, transfer, [b])[0]),
        lo,
        hi,
        tol=1e-12,
        max_iter=settings.golden_iters,
    )
    v0 = float(_offset_values(density, lam, transfer, [0.0])[0])
    if v0 >= v_star - 1e-12:
        return v0, 0.0
    return float(v_star), float(b_star)


# ---------------------------------------------------------------------------
# Precision best response
# ---------------------------------------------------------------------------


def _pick_largest_argmax(lams, payoffs, tie_tol):
    lams = np.asarray(lams, dtype=float)
    payoffs = np.asarray(payoffs, dtype=float)
    pmax = float(payoffs.max())
    return float(lams[payoffs >= pmax - tie_tol].max()), pmax


def _maximize_over_lambda(value_vec, value_scalar, cost, settings):
    """Shared grid + golden argmax with the largest-precision tie-break.

    ``value_vec`` maps a precision array to expected transfers;
    ``value_scalar`` is its scalar counterpart used inside refinement.
    Returns (lambda_star, payoff, expected_transfer).
    """
    grid = settings.lambda_grid_points(cost)
    pay = value_vec(grid) - cost(grid)
    order = np.argsort(pay)[::-1]
    brackets = []
    for i in order[: settings.refine_basins]:
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, grid.size - 1)]
        brackets.append((lo, hi))

    def pay_scalar(lam):
        return value_scalar(lam) - float(cost(lam))

    cand_l = list(grid)
    cand_p = list(pay)
    for lo, hi in brackets:
        x, fx = golden_max(pay_scalar, lo, hi, tol=1e-12, max_iter=settings.golden_iters)
        cand_l.append(x)
        cand_p.append(fx)
    cand_l = np.asarray(cand_l)
    cand_p = np.asarray(cand_p)
    lam_star, pmax = _pick_largest_argmax(cand_l, cand_p, settings.tie_tol)
    return lam_star, pmax


def _finish_response(lam_star, pmax, cost, settings, value_at, offset_at=0.0):
    """Apply the zero-effort comparison and the participation rule."""
    zero_pay = -cost.zero_limit()
    if pmax < zero_pay - settings.tie_tol:
        lam_star, pmax = 0.0, zero_pay
    raw = float(pmax)
    if raw < -settings.ir_tol:
        return AgentResponse(0.0, 0.0, 0.0, 0.0, False, raw_payoff=raw)
    payoff = max(raw, 0.0)
    if lam_star == 0.0:
        return AgentResponse(0.0, payoff, 0.0, 0.0, True, raw_payoff=raw)
    ev = float(value_at(lam_star))
    hit = lam_star >= settings.lambda_max * (1.0 - 1e-9)
    return AgentResponse(
        lambda_star=float(lam_star),
        payoff=float(payoff),
        expected_transfer=ev,
        report_offset=float(offset_at),
        participated=True,
        raw_payoff=raw,
        hit_upper_bound=bool(hit),
    )


def best_response_cutoff(
    density: SignalDensity,
    d: float,
    cost: CostFunction,
    settings: AgentSettings = AgentSettings(),
    precision_map=None,
) -> AgentResponse:
    """Best response to a cutoff transfer (any dimension).

    ``precision_map`` optionally maps the chosen precision to the effective
    posterior precision entering the expected transfer (identity for the
    baseline model).
    """
    if d < 0:
        raise ValueError("cutoff must be nonnegative")
    pmap = precision_map or (lambda lam: lam)

    def value_vec(lams):
        return density.ball_mass(np.asarray(pmap(lams)) * d)

    def value_scalar(lam):
        return float(density.ball_mass(float(pmap(lam)) * d))

    lam_star, pmax = _maximize_over_lambda(value_vec, value_scalar, cost, settings)
    return _finish_response(lam_star, pmax, cost, settings, value_scalar)


def best_response(
    density: SignalDensity,
    transfer: StepTransfer,
    cost: CostFunction,
    settings: AgentSettings = AgentSettings(),
) -> AgentResponse:
    """Best response to an arbitrary step transfer under strategic reporting.

    The expected transfer at each precision is itself a maximum over the
    report offset, so the payoff curve is evaluated on a coarse
    (precision x offset) matrix first and then refined.
    """
    if transfer.is_cutoff:
        return best_response_cutoff(density, transfer.cutoff_level, cost, settings)
    if density.dimension != 1:
        raise ValueError("general transfers require a one-dimensional density")

    bs = _offset_grid(transfer, max_points=257)  # coarse pass; refinement is exact
    edges, w = _edge_weights(transfer)

    def value_vec(lams):
        return _value_matrix(density, lams, bs, edges, w).max(axis=1)

    def value_scalar(lam):
        return expected_transfer_strategic(density, lam, transfer, settings, max_points=257)[0]

    lam_star, pmax = _maximize_over_lambda(value_vec, value_scalar, cost, settings)
    resp = _finish_response(lam_star, pmax, cost, settings, value_scalar)
    if resp.participated and resp.lambda_star > 0:
        val, off = expected_transfer_strategic(density, resp.lambda_star, transfer, settings)
        return AgentResponse(
            lambda_star=resp.lambda_star,
            payoff=resp.payoff,
            expected_transfer=val,
            report_offset=off,
            participated=True,
            raw_payoff=resp.raw_payoff,
            hit_upper_bound=resp.hit_upper_bound,
        )
    return resp


def truthful_value_curve(density: SignalDensity, transfer: StepTransfer, lams) -> np.ndarray:
    """Vectorized truthful expected transfer over an array of precisions."""
    edges, w = _edge_weights(transfer)
    if edges.size == 0:
        return np.zeros(np.asarray(lams, dtype=float).shape)
    return density.cdf(np.asarray(lams, dtype=float)[:, None] * edges[None, :]) @ w


def best_response_truthful(
    density: SignalDensity,
    transfer: StepTransfer,
    cost: CostFunction,
    settings: AgentSettings = AgentSettings(),
) -> AgentResponse:
    """Best response when the agent is constrained to report the signal."""
    if density.dimension != 1:
        raise ValueError("truthful step-transfer values are one-dimensional")

    def value_vec(lams):
        return truthful_value_curve(density, transfer, lams)

    def value_scalar(lam):
        return transfer.truthful_value(density, lam)

    lam_star, pmax = _maximize_over_lambda(value_vec, value_scalar, cost, settings)
    return _finish_response(lam_star, pmax, cost, settings, value_scalar)


def cutoff_response_curve(
    density: SignalDensity,
    ds: np.ndarray,
    cost: CostFunction,
    settings: AgentSettings = AgentSettings(),
    precision_map=None,
):
    """Vectorized lam(d) and payoff(d) over an array of cutoffs.

    Coarse grid argmax per cutoff (largest precision on payoff ties), then a
    batched golden-section refinement of each cutoff's bracket.
    """
    pmap = precision_map or (lambda lam: lam)
    ds = np.asarray(ds, dtype=float)
    grid = settings.lambda_grid_points(cost)
    eff = np.asarray(pmap(grid), dtype=float)
    pay = density.ball_mass(eff[None, :] * ds[:, None]) - cost(grid)[None, :]

    pmax_grid = pay.max(axis=1)
    tied = pay >= pmax_grid[:, None] - settings.tie_tol
    idx = tied.shape[1] - 1 - np.argmax(tied[:, ::-1], axis=1)

    lo = grid[np.maximum(idx - 1, 0)]
    hi = grid[np.minimum(idx + 1, grid.size - 1)]

    def pay_rows(lams):
        lams = np.asarray(lams, dtype=float)
        return density.ball_mass(np.asarray(pmap(lams)) * ds) - cost(lams)

    lam_ref, pay_ref = golden_max_batch(pay_rows, lo, hi, iters=90)
    prefer_grid = (pmax_grid >= pay_ref - settings.tie_tol) & (grid[idx] > lam_ref)
    lam_star = np.where(prefer_grid, grid[idx], lam_ref)
    pmax = np.maximum(pmax_grid, pay_ref)

    zero_pay = -cost.zero_limit()
    dominated = pmax < zero_pay - settings.tie_tol
    lam_star = np.where(dominated, 0.0, lam_star)
    pmax = np.where(dominated, zero_pay, pmax)

    out = pmax < -settings.ir_tol
    lam_star = np.where(out, 0.0, lam_star)
    payoff = np.where(out, 0.0, np.maximum(pmax, 0.0))
    return lam_star, payoff, pmax


def participation_payoff(
    density: SignalDensity,
    d: float,
    cost: CostFunction,
    settings: AgentSettings = AgentSettings(),
    precision_map=None,
) -> float:
    """pi(d): the agent's maximal payoff against the cutoff d (may be negative)."""
    resp = best_response_cutoff(density, d, cost, settings, precision_map)
    return resp.raw_payoff


def verify_truthful_report(
    density: SignalDensity,
    transfer: StepTransfer,
    lam: float,
    settings: AgentSettings = AgentSettings(),
) -> bool:
    """Is truthful reporting optimal for this transfer at precision lam?

    True when the strategic-report maximizer is within ``offset_tol`` of
    zero, or when misreporting gains less than ``value_gap_tol``.
    """
    value, offset = expected_transfer_strategic(density, lam, transfer, settings)
    if abs(offset) <= settings.offset_tol:
        return True
    truthful = expected_transfer_truthful(density, lam, transfer)
    return value - truthful <= settings.value_gap_tol
