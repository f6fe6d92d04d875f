"""Verification engine for cutoff optimality.

Three independent routes either certify or refute that cutoff transfers are
the best contracts for a given density and cost:

* the constructive improvement pipeline (shift the report offset away,
  symmetrize, pay the full budget inside the elasticity threshold, then
  match a cutoff with equal expected transfer), which turns any transfer
  into a cutoff inducing weakly higher precision whenever increasing
  elasticity holds;
* a brute-force search over quantized symmetric step transfers, exhaustive
  on small grids and coordinate ascent from seeded restarts on larger ones;
* the tangent-cost counterexample: when the elasticity ordering fails, a
  mass-matched swap of an interior band for an exterior band strictly
  raises the marginal return to precision at the incumbent optimum.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .agent import (
    AgentResponse,
    AgentSettings,
    CostFunction,
    best_response,
    best_response_cutoff,
    best_response_truthful,
    cutoff_response_curve,
    expected_transfer_strategic,
    truthful_value_curve,
)
from .densities import SignalDensity
from .elasticity import check_iea, elasticity, eta_inverse
from .numerics import golden_max, make_rng
from .solver import SolverSettings
from .transfers import StepTransfer

__all__ = [
    "IEAViolationError",
    "ElasticityOrderError",
    "TangentCost",
    "augment_transfer",
    "match_cutoff",
    "improve_to_cutoff",
    "PipelineResult",
    "brute_force_best_transfer",
    "BruteForceResult",
    "brute_force_best_output_transfer",
    "OutputBruteForceResult",
    "build_counterexample",
    "CounterexampleResult",
    "cross_derivative_check",
    "best_cutoff_precision",
    "certify_cutoff_optimality",
    "CertificationReport",
    "refute_cutoff_optimality",
    "RefutationReport",
]


class IEAViolationError(RuntimeError):
    """The pipeline's improvement guarantee requires increasing elasticity."""


class ElasticityOrderError(ValueError):
    """Counterexample construction needs a strictly reversed elasticity pair."""


class TangentCost(CostFunction):
    """Cost tangent to the cutoff's expected-transfer curve at a target point.

    c(lam) = E(lam; d_ref) + kappa * (lam - lambda_ref)^2, so the cutoff
    d_ref earns exactly zero surplus at lambda_ref and every other
    (cutoff, precision) pair earns less.  Used to expose a point of the
    substitute region as the unique cutoff optimum.  Unlike the standard
    cost kinds this one has c(0+) > 0 by design: the tangency anchors the
    participation constraint at the target cutoff.
    """

    def __init__(self, density: SignalDensity, d_ref: float, lambda_ref: float, kappa: float = 0.05):
        if d_ref <= 0 or lambda_ref <= 0 or kappa <= 0:
            raise ValueError("tangent cost needs positive d_ref, lambda_ref, kappa")
        self.density = density
        self.d_ref = float(d_ref)
        self.lambda_ref = float(lambda_ref)
        self.kappa = float(kappa)

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        out = self.density.ball_mass(lam * self.d_ref) + self.kappa * (lam - self.lambda_ref) ** 2
        return out if out.ndim else float(out)

    def __repr__(self):
        return f"TangentCost(d_ref={self.d_ref}, lambda_ref={self.lambda_ref}, kappa={self.kappa})"


# ---------------------------------------------------------------------------
# Improvement pipeline
# ---------------------------------------------------------------------------


def augment_transfer(
    density: SignalDensity, transfer: StepTransfer, lambda_ref: float
) -> StepTransfer:
    """Pay the full budget inside the elasticity threshold.

    Sets the transfer to 1 wherever lambda_ref * |x| is below the threshold
    radius; in the complement region this can only raise the marginal return
    to precision, so the induced precision weakly increases.
    """
    if lambda_ref <= 0:
        raise ValueError("lambda_ref must be positive")
    iea, witness = check_iea(density, 1.0)
    if not iea:
        raise IEAViolationError(f"increasing elasticity fails (witness {witness})")
    if not transfer.is_symmetric():
        raise ValueError("augmentation applies to symmetric transfers")
    inv, _ = eta_inverse(density, 1.0)
    return transfer.with_unit_interior(inv / lambda_ref)


def match_cutoff(
    density: SignalDensity,
    lambda_ref: float,
    target: float,
    d_hi: Optional[float] = None,
    tol: float = 1e-9,
) -> float:
    """Cutoff whose expected transfer at lambda_ref equals the target value.

    Bisection on the continuous nondecreasing map d -> E(lambda_ref; d).
    Raises if the target is not reachable below ``d_hi``.
    """
    if not 0.0 <= target <= 1.0:
        raise ValueError("target expected transfer must lie in [0, 1]")
    if lambda_ref <= 0:
        raise ValueError("lambda_ref must be positive")
    if target == 0.0:
        return 0.0
    hi = d_hi if d_hi is not None else 50.0 * density.scale
    if density.ball_mass(lambda_ref * hi) < target - 1e-12:
        raise ValueError(
            f"target {target:.6g} unreachable: E({lambda_ref:.4g}; d) tops out at "
            f"{density.ball_mass(lambda_ref * hi):.6g} for d <= {hi:.4g}"
        )
    lo_d, hi_d = 0.0, hi
    while hi_d - lo_d > tol:
        mid = 0.5 * (lo_d + hi_d)
        if density.ball_mass(lambda_ref * mid) < target:
            lo_d = mid
        else:
            hi_d = mid
    return 0.5 * (lo_d + hi_d)


@dataclass(frozen=True)
class PipelineResult:
    """Cutoff produced by the improvement pipeline, with its audit trail."""

    d: float
    response: AgentResponse  # best response to the final cutoff
    original: AgentResponse  # best response to the input transfer
    shifted: StepTransfer
    symmetrized: StepTransfer
    augmented: StepTransfer
    lambda_truthful_augmented: float
    lambda_grid: np.ndarray
    strategic_shifted: np.ndarray  # E(lam; t*) on the grid
    truthful_shifted: np.ndarray  # E_hat(lam; t*) on the grid
    truthful_symmetrized: np.ndarray  # E_hat(lam; t~) on the grid
    guarantee_margin: float  # lam(d) - lam(t)

    @property
    def symmetrization_gap(self) -> float:
        return float(np.max(np.abs(self.truthful_symmetrized - self.truthful_shifted)))


def improve_to_cutoff(
    density: SignalDensity,
    transfer: StepTransfer,
    cost: CostFunction,
    settings: AgentSettings = AgentSettings(),
    check_grid: int = 32,
) -> PipelineResult:
    """Turn an arbitrary transfer into a cutoff inducing weakly higher precision.

    Follows the constructive proof: remove the report offset, symmetrize
    (which leaves truthful values unchanged), augment inside the elasticity
    threshold, then pick the cutoff with the same expected transfer at the
    original precision.  Requires increasing elasticity; refuses otherwise
    since the guarantee genuinely fails there.

    The returned trace carries the strategic-vs-truthful value curves of the
    shifted transfer on a precision grid: truthful values never exceed
    strategic ones, with equality at the original best response.
    """
    iea, witness = check_iea(density, 1.0)
    if not iea:
        raise IEAViolationError(f"increasing elasticity fails (witness {witness})")
    original = best_response(density, transfer, cost, settings)

    if original.lambda_star <= 0.0:
        # nothing to improve on: the zero cutoff trivially matches
        zero = StepTransfer.cutoff(0.0)
        resp = best_response_cutoff(density, 0.0, cost, settings)
        grid = np.geomspace(settings.lambda_min, settings.lambda_max, check_grid)
        flat = np.zeros(check_grid)
        return PipelineResult(
            d=0.0,
            response=resp,
            original=original,
            shifted=zero,
            symmetrized=zero,
            augmented=zero,
            lambda_truthful_augmented=0.0,
            lambda_grid=grid,
            strategic_shifted=flat,
            truthful_shifted=flat,
            truthful_symmetrized=flat,
            guarantee_margin=resp.lambda_star - original.lambda_star,
        )

    lam_t = original.lambda_star
    t_star = transfer.shifted(original.report_offset)
    t_sym = t_star.symmetrized()
    t_aug = augment_transfer(density, t_sym, lam_t)

    # audit curves on a log-spaced precision grid around the action
    lo = max(settings.lambda_min, lam_t / 8.0)
    hi = min(settings.lambda_max, lam_t * 8.0)
    grid = np.geomspace(lo, hi, check_grid)
    grid = np.unique(np.append(grid, lam_t))
    strategic = np.array(
        [expected_transfer_strategic(density, g, t_star, settings, max_points=257)[0] for g in grid]
    )
    truthful = truthful_value_curve(density, t_star, grid)
    truthful_sym = truthful_value_curve(density, t_sym, grid)

    aug_resp = best_response_truthful(density, t_aug, cost, settings)
    target = t_aug.truthful_value(density, lam_t)
    d_hi = max(50.0 * density.scale, 2.0 * t_aug.x_max)
    d = match_cutoff(density, lam_t, target, d_hi=d_hi)
    resp = best_response_cutoff(density, d, cost, settings)
    return PipelineResult(
        d=float(d),
        response=resp,
        original=original,
        shifted=t_star,
        symmetrized=t_sym,
        augmented=t_aug,
        lambda_truthful_augmented=aug_resp.lambda_star,
        lambda_grid=grid,
        strategic_shifted=strategic,
        truthful_shifted=np.asarray(truthful),
        truthful_symmetrized=np.asarray(truthful_sym),
        guarantee_margin=resp.lambda_star - original.lambda_star,
    )


# ---------------------------------------------------------------------------
# Brute force over quantized step transfers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BruteForceResult:
    transfer: StepTransfer
    cell_values: np.ndarray
    response: AgentResponse
    n_evaluated: int
    exhaustive: bool
    x_max: float


class _CellEvaluator:
    """Fast coarse scorer for symmetric step transfers on a shared cell grid.

    Precomputes the cdf tensor over (edge, precision, offset) once; scoring a
    batch of candidates is then one tensordot.  The coarse score ranks
    candidates and drives coordinate ascent; exact refinement runs only on
    the transfers that matter.
    """

    def __init__(self, density, cost, cells, x_max, settings):
        self.density, self.cost, self.settings = density, cost, settings
        self.cells, self.x_max = cells, x_max
        pos = np.linspace(0.0, x_max, cells + 1)
        self.edges = np.concatenate([-pos[:0:-1], pos])  # 2*cells + 1 edges
        self.lams = settings.lambda_grid_points(cost)
        step = 0.5 * x_max / cells
        self.offsets = np.arange(-2.0 * x_max, 2.0 * x_max + 0.5 * step, step)
        # cdf tensor: (n_edges, n_lam * n_off)
        args = self.lams[:, None, None] * (self.edges[None, None, :] + self.offsets[None, :, None])
        flat = density.cdf(args.reshape(-1, self.edges.size))
        self._tensor = flat.T.reshape(self.edges.size, -1)
        self._costs = np.asarray(cost(self.lams), dtype=float)
        self._zero_pay = -cost.zero_limit()

    def edge_weights(self, cell_matrix: np.ndarray) -> np.ndarray:
        """Jump weights at each edge for mirrored cell values (batch)."""
        full = np.concatenate([cell_matrix[:, ::-1], cell_matrix], axis=1)
        zero = np.zeros((cell_matrix.shape[0], 1))
        # weight at edge j is v_{j-1} - v_j with zero values outside
        return np.concatenate([zero, full], axis=1) - np.concatenate([full, zero], axis=1)

    def coarse_lambda(self, cell_matrix: np.ndarray, chunk: int = 64):
        """Raw coarse argmax precision and payoff per candidate row.

        Participation is deliberately NOT applied here: payoffs that peak at
        exactly zero between grid points (tangent costs) must survive to the
        refinement stage, which settles participation properly.
        """
        n = cell_matrix.shape[0]
        lam_out = np.zeros(n)
        pay_out = np.zeros(n)
        w = self.edge_weights(cell_matrix)
        for s in range(0, n, chunk):
            ww = w[s : s + chunk]
            vals = (ww @ self._tensor).reshape(ww.shape[0], self.lams.size, self.offsets.size)
            e_best = vals.max(axis=2)
            pay = e_best - self._costs[None, :]
            pmax = pay.max(axis=1)
            tied = pay >= pmax[:, None] - self.settings.tie_tol
            idx = tied.shape[1] - 1 - np.argmax(tied[:, ::-1], axis=1)
            lam_out[s : s + chunk] = self.lams[idx]
            pay_out[s : s + chunk] = pmax
        return lam_out, pay_out

    def transfer(self, cell_values) -> StepTransfer:
        return StepTransfer.from_cells(np.asarray(cell_values, dtype=float), self.x_max)

    def refine(self, cell_values) -> AgentResponse:
        return best_response(self.density, self.transfer(cell_values), self.cost, self.settings)

    def _payoff_patch(self, w, lams, bs):
        """Payoff on a small (precision x offset) grid for one candidate."""
        args = lams[:, None, None] * (self.edges[None, None, :] + bs[None, :, None])
        vals = self.density.cdf(args) @ w
        return vals - np.asarray(self.cost(lams), dtype=float)[:, None]

    def fast_lambda(self, cell_values, zoom_rounds: int = 3, patch: int = 17) -> tuple[float, float]:
        """Induced precision by zooming (precision, offset) patches.

        Each refinement round evaluates one vectorized payoff patch around
        the incumbent argmax and shrinks both brackets; this keeps the
        per-candidate cost at a handful of array operations while resolving
        the precision far below the coarse grid step.  Participation and the
        zero-effort convention match the full best response.
        """
        w = self.edge_weights(np.asarray(cell_values, dtype=float)[None, :])[0]
        vals = (w @ self._tensor).reshape(self.lams.size, self.offsets.size)
        pay = vals - self._costs[:, None]
        rows = pay.max(axis=1)
        # top local basins on the coarse grid
        interior = np.zeros(rows.size, dtype=bool)
        interior[1:-1] = (rows[1:-1] >= rows[:-2]) & (rows[1:-1] >= rows[2:])
        interior[0] = rows[0] >= rows[1]
        interior[-1] = rows[-1] >= rows[-2]
        basin_idx = np.nonzero(interior)[0]
        basin_idx = basin_idx[np.argsort(rows[basin_idx])[::-1][:3]]

        cand_l = [float(self.lams[i]) for i in np.argsort(rows)[::-1][:1]]
        cand_p = [float(rows.max())]
        db = self.offsets[1] - self.offsets[0]
        for i in basin_idx:
            lo_l = self.lams[max(i - 1, 0)]
            hi_l = self.lams[min(i + 1, self.lams.size - 1)]
            j = int(np.argmax(pay[i]))
            lo_b = self.offsets[j] - 2.0 * db
            hi_b = self.offsets[j] + 2.0 * db
            for _ in range(zoom_rounds):
                ls = np.linspace(lo_l, hi_l, patch)
                bs = np.linspace(lo_b, hi_b, patch)
                m = self._payoff_patch(w, ls, bs)
                ki, kj = np.unravel_index(int(np.argmax(m)), m.shape)
                lo_l, hi_l = ls[max(ki - 1, 0)], ls[min(ki + 1, patch - 1)]
                lo_b, hi_b = bs[max(kj - 1, 0)], bs[min(kj + 1, patch - 1)]
                cand_l.append(float(ls[ki]))
                cand_p.append(float(m[ki, kj]))
        cand_l = np.asarray(cand_l)
        cand_p = np.asarray(cand_p)
        pmax = float(cand_p.max())
        lam = float(cand_l[cand_p >= pmax - self.settings.tie_tol].max())
        if pmax < self._zero_pay - self.settings.tie_tol:
            lam, pmax = 0.0, self._zero_pay
        if pmax < -self.settings.ir_tol:
            return 0.0, 0.0
        return lam, max(pmax, 0.0)


def _better(lam_a, pay_a, vals_a, lam_b, pay_b, vals_b, tie_tol=1e-6):
    """Candidate ordering: precision, then payoff, then lexicographic values.

    The tie tolerance is deliberately coarser than the best-response
    tolerance: strategically shifted copies of a cutoff induce the same
    precision up to refinement noise, and the lexicographic step should
    settle those ties deterministically (it favors the centered shape).
    """
    if lam_a > lam_b + tie_tol:
        return True
    if lam_a < lam_b - tie_tol:
        return False
    if pay_a > pay_b + tie_tol:
        return True
    if pay_a < pay_b - tie_tol:
        return False
    return tuple(vals_a) > tuple(vals_b)


def brute_force_best_transfer(
    density: SignalDensity,
    cost: CostFunction,
    grid_cells: int,
    value_levels: int,
    x_max: Optional[float] = None,
    settings: AgentSettings = AgentSettings(),
    seed: int = 0,
    restarts: int = 8,
    exhaustive_limit: int = 2**16,
    refine_top: int = 4096,
) -> BruteForceResult:
    """Search symmetric quantized step transfers for the highest induced precision.

    Exhaustive when the candidate count fits under ``exhaustive_limit``
    (grids beyond 16 binary cells fall back to coordinate ascent from seeded
    random restarts).  Ties break toward higher agent payoff, then
    lexicographically larger cell values.  The top coarse candidates are
    re-scored exactly before the winner is declared.
    """
    if grid_cells < 1 or value_levels < 2:
        raise ValueError("need at least one cell and two value levels")
    x_max = x_max if x_max is not None else 3.0 * density.scale
    ev = _CellEvaluator(density, cost, grid_cells, x_max, settings)
    levels = np.linspace(0.0, 1.0, value_levels)

    n_total = value_levels**grid_cells
    exhaustive = n_total <= exhaustive_limit
    if exhaustive:
        combos = np.array(list(itertools.product(range(value_levels), repeat=grid_cells)))
        cand = levels[combos]
        n_evaluated = n_total
    else:
        rng = make_rng(seed)
        cand = _coordinate_ascent(ev, levels, grid_cells, rng, restarts)
        n_evaluated = cand.shape[0]

    lam_c, pay_c = ev.coarse_lambda(cand)
    n = cand.shape[0]
    if n <= refine_top:
        top = np.arange(n)
    else:
        # split the refinement budget between the highest coarse precisions
        # and the highest coarse payoffs (feasibility is settled only when
        # refined, so neither ranking alone is safe)
        by_lam = np.lexsort((pay_c, lam_c))[::-1][: refine_top // 2]
        by_pay = np.lexsort((lam_c, pay_c))[::-1][: refine_top // 2]
        top = np.unique(np.concatenate([by_lam, by_pay]))

    best = None
    for i in top:
        lam_r, pay_r = ev.fast_lambda(cand[i])
        entry = (lam_r, pay_r, cand[i])
        if best is None or _better(entry[0], entry[1], entry[2], best[0], best[1], best[2]):
            best = entry
    _, _, vals_b = best
    resp_b = ev.refine(vals_b)  # exact re-score of the winner
    return BruteForceResult(
        transfer=ev.transfer(vals_b),
        cell_values=np.asarray(vals_b),
        response=resp_b,
        n_evaluated=n_evaluated,
        exhaustive=exhaustive,
        x_max=x_max,
    )


def _coordinate_ascent(ev, levels, cells, rng, restarts, max_passes: int = 6):
    """Cell-by-cell ascent on the coarse score from random starts."""
    seen = {}
    for _ in range(restarts):
        vals = levels[rng.integers(0, levels.size, size=cells)]
        lam0, pay0 = ev.coarse_lambda(vals[None, :])
        lam, pay = float(lam0[0]), float(pay0[0])
        for _ in range(max_passes):
            improved = False
            for j in range(cells):
                trial = np.repeat(vals[None, :], levels.size, axis=0)
                trial[:, j] = levels
                lam_t, pay_t = ev.coarse_lambda(trial)
                k_best = None
                for k in range(levels.size):
                    if trial[k, j] == vals[j]:
                        continue
                    if _better(lam_t[k], pay_t[k], trial[k], lam, pay, vals, 1e-9):
                        if k_best is None or _better(
                            lam_t[k], pay_t[k], trial[k], lam_t[k_best], pay_t[k_best], trial[k_best], 1e-9
                        ):
                            k_best = k
                if k_best is not None:
                    vals = trial[k_best].copy()
                    lam, pay = float(lam_t[k_best]), float(pay_t[k_best])
                    improved = True
            if not improved:
                break
        seen[tuple(vals)] = True
    return np.array(list(seen.keys()), dtype=float)


@dataclass(frozen=True)
class OutputBruteForceResult:
    cell_values: np.ndarray
    y_edges: np.ndarray
    effort: float
    payoff: float
    n_evaluated: int


def brute_force_best_output_transfer(
    model,
    cost: CostFunction,
    grid_cells: int = 8,
    value_levels: int = 2,
    y_span: Optional[float] = None,
    settings: AgentSettings = AgentSettings(),
    exhaustive_limit: int = 2**16,
) -> OutputBruteForceResult:
    """Exhaustive search over quantized output transfers for maximal effort.

    Output is observable, so there is no reporting layer: a candidate's
    value at effort e is its integral against the output density, and the
    induced effort is the largest argmax of value minus cost.  Used to
    check that no step transfer beats the best output quota.
    """
    if value_levels**grid_cells > exhaustive_limit:
        raise ValueError("output brute force is exhaustive only; reduce the grid")
    levels = np.linspace(0.0, 1.0, value_levels)
    combos = np.array(list(itertools.product(range(value_levels), repeat=grid_cells)))
    cand = levels[combos]
    edges = np.linspace(0.0, y_span if y_span is not None else model.y_max, grid_cells + 1)
    es = np.linspace(model.e_min, model.e_max, settings.lambda_grid)
    # G at every (edge, effort): candidate value is a weighted difference
    G = np.array([model.G(edges, e) for e in es])  # (n_e, n_edges)
    cell_mass = np.diff(G, axis=1)  # (n_e, n_cells)
    pay = cand @ cell_mass.T - np.asarray(cost(es), dtype=float)[None, :]  # (n_cand, n_e)

    pmax = pay.max(axis=1)
    tied = pay >= pmax[:, None] - settings.tie_tol
    idx = tied.shape[1] - 1 - np.argmax(tied[:, ::-1], axis=1)

    e_tiny = max(model.e_min * 1e-3, 1e-9)
    best = None
    for i in range(cand.shape[0]):
        w = cand[i]

        def value(e):
            return float(np.dot(w, np.diff(np.asarray(model.G(edges, e), dtype=float))))

        lo = es[max(idx[i] - 1, 0)]
        hi = es[min(idx[i] + 1, es.size - 1)]
        e_ref, p_ref = golden_max(lambda e: value(e) - float(cost(e)), lo, hi, tol=1e-10)
        if pmax[i] >= p_ref - settings.tie_tol and es[idx[i]] > e_ref:
            e_star, p_star = es[idx[i]], pmax[i]
        else:
            e_star, p_star = e_ref, p_ref
        zero_pay = value(e_tiny) - cost.zero_limit()
        if p_star < zero_pay - settings.tie_tol:
            e_star, p_star = 0.0, zero_pay
        if p_star < -settings.ir_tol:
            e_star, p_star = 0.0, 0.0
        entry = (float(e_star), max(float(p_star), 0.0), w)
        if best is None or _better(entry[0], entry[1], entry[2], best[0], best[1], best[2]):
            best = entry
    e_b, p_b, vals_b = best
    return OutputBruteForceResult(
        cell_values=np.asarray(vals_b),
        y_edges=edges,
        effort=e_b,
        payoff=p_b,
        n_evaluated=cand.shape[0],
    )


# ---------------------------------------------------------------------------
# Counterexample construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CounterexampleResult:
    transfer: StepTransfer
    delta1: float
    delta2: float
    mass_gap: float  # band-mass mismatch, should be ~0
    slope_gap: float  # d/dlam of the value difference at lambda_ref, > 0
    band1: tuple[float, float]
    band2: tuple[float, float]


def build_counterexample(
    density: SignalDensity,
    lambda_ref: float,
    d_ref: float,
    x1: float,
    x2: float,
    delta1: Optional[float] = None,
    margin: float = 1e-3,
    mass_tol: float = 1e-10,
    max_retries: int = 8,
) -> CounterexampleResult:
    """Mass-matched band swap that strictly beats the cutoff d_ref.

    Requires eta(x1) > eta(x2) with x1 inside and x2 outside the rescaled
    cutoff.  Zeroes a thin band around x1/lambda_ref (inside the prize
    region) and pays 1 on a band around x2/lambda_ref (outside) with equal
    probability mass at lambda_ref, so the expected transfer at lambda_ref
    is unchanged while its slope in precision strictly rises.
    """
    if lambda_ref <= 0 or d_ref <= 0:
        raise ValueError("lambda_ref and d_ref must be positive")
    e1 = float(elasticity(density, x1))
    e2 = float(elasticity(density, x2))
    if not e1 > e2 + margin:
        raise ElasticityOrderError(
            f"need eta(x1) > eta(x2) + {margin}; got eta({x1}) = {e1:.4g}, eta({x2}) = {e2:.4g}"
        )
    if not x1 < lambda_ref * d_ref <= x2:
        raise ValueError("placement requires x1 < lambda_ref * d_ref <= x2")
    hw = min(density.support_halfwidth, density.tail_cutoff)
    c1 = x1 / lambda_ref
    c2 = x2 / lambda_ref
    if c2 >= hw:
        raise ValueError("x2 / lambda_ref must lie inside the support")

    d1 = delta1 if delta1 is not None else 0.01 * c1
    for _ in range(max_retries):
        lo1, hi1 = c1 - d1, c1 + d1
        if lo1 <= 0.0 or hi1 >= d_ref:
            d1 *= 0.5
            continue
        m1 = float(density.ball_mass(lambda_ref * hi1) - density.ball_mass(lambda_ref * lo1))
        d2_max = min(c2 - d_ref, hw - c2)
        if d2_max <= 0:
            raise ValueError("no room for the exterior band outside the cutoff")
        m_max = float(
            density.ball_mass(lambda_ref * (c2 + d2_max)) - density.ball_mass(lambda_ref * (c2 - d2_max))
        )
        if m_max < m1:
            d1 *= 0.5
            continue
        lo_d, hi_d = 0.0, d2_max
        for _ in range(200):
            mid = 0.5 * (lo_d + hi_d)
            m = float(
                density.ball_mass(lambda_ref * (c2 + mid)) - density.ball_mass(lambda_ref * (c2 - mid))
            )
            if m < m1:
                lo_d = mid
            else:
                hi_d = mid
        d2 = 0.5 * (lo_d + hi_d)
        m2 = float(
            density.ball_mass(lambda_ref * (c2 + d2)) - density.ball_mass(lambda_ref * (c2 - d2))
        )
        if abs(m2 - m1) > mass_tol:
            d1 *= 0.5
            continue

        base = StepTransfer.cutoff(d_ref)
        # the overlay must only remove budget inside the prize region and
        # add it outside, so clipping never actually triggers
        assert base(0.5 * (lo1 + hi1)) == 1.0 and base(c2) == 0.0
        t = base.with_band_value(lo1, hi1, 0.0).with_band_value(c2 - d2, c2 + d2, 1.0)
        h = 1e-4 * lambda_ref
        diff = lambda lam: t.truthful_value(density, lam) - float(
            density.ball_mass(lam * d_ref)
        )
        slope = (diff(lambda_ref + h) - diff(lambda_ref - h)) / (2.0 * h)
        if slope <= 0:
            raise ValueError(
                f"band swap failed to raise the precision slope (got {slope:.3e}); "
                "the elasticity gap is too small at this placement"
            )
        return CounterexampleResult(
            transfer=t,
            delta1=float(d1),
            delta2=float(d2),
            mass_gap=float(m2 - m1),
            slope_gap=float(slope),
            band1=(float(lo1), float(hi1)),
            band2=(float(c2 - d2), float(c2 + d2)),
        )
    raise ValueError("could not mass-match the bands; the interior band never fit")


# ---------------------------------------------------------------------------
# Cross-derivative diagnostics
# ---------------------------------------------------------------------------


def cross_derivative_check(
    density: SignalDensity,
    lam: float,
    d: float,
    dim: Optional[int] = None,
    step: float = 1e-4,
):
    """Finite-difference vs closed-form mixed derivative of E(lam; d).

    Returns ``(fd, closed_form, kink_flagged)``; near profile kinks the
    difference rectangle is shifted to one side and flagged.
    """
    if dim is not None and dim != density.dimension:
        raise ValueError(f"dim={dim} does not match density dimension {density.dimension}")
    if lam <= 0 or d <= 0:
        raise ValueError("lam and d must be positive")
    n = density.dimension
    u = lam * d
    if u >= min(density.support_halfwidth, density.tail_cutoff):
        raise ValueError("lam * d must be interior to the support")
    kinks = np.asarray(density.kinks, dtype=float)
    guard = step * (lam + d + 2.0) * max(lam, d)
    near_kink = bool(kinks.size and np.any(np.abs(kinks - u) < guard))

    def E(ll, dd):
        return float(density.ball_mass(ll * dd))

    h = step
    if near_kink:
        # one-sided rectangle away from the kink
        k = float(kinks[np.argmin(np.abs(kinks - u))])
        sgn = 1.0 if u >= k else -1.0
        fd = (
            E(lam + sgn * 2 * h, d + sgn * 2 * h)
            - E(lam + sgn * 2 * h, d)
            - E(lam, d + sgn * 2 * h)
            + E(lam, d)
        ) / (4.0 * h * h)
    else:
        fd = (
            E(lam + h, d + h) - E(lam + h, d - h) - E(lam - h, d + h) + E(lam - h, d - h)
        ) / (4.0 * h * h)

    eta_u = float(elasticity(density, u))
    coeff = n * density.volume_coefficient * float(density.pdf(u)) * u ** (n - 1)
    closed = coeff * (n - eta_u)
    return float(fd), float(closed), near_kink


# ---------------------------------------------------------------------------
# Certification / refutation reports
# ---------------------------------------------------------------------------


def best_cutoff_precision(
    density: SignalDensity,
    cost: CostFunction,
    solver_settings: SolverSettings = SolverSettings(),
) -> tuple[float, float]:
    """max_d lam(d) over the cutoff family, by scan plus golden refinement."""
    agent = solver_settings.agent
    d_hi = solver_settings.d_ceiling(density)
    ds = np.linspace(0.0, d_hi, solver_settings.d_scan)
    lams, _, _ = cutoff_response_curve(density, ds, cost, agent)
    j = int(np.argmax(lams))
    lo = ds[max(j - 1, 0)]
    hi = ds[min(j + 1, ds.size - 1)]
    d_ref, lam_ref = golden_max(
        lambda d: best_response_cutoff(density, d, cost, agent).lambda_star, lo, hi, tol=1e-10
    )
    if lams[j] > lam_ref:
        return float(ds[j]), float(lams[j])
    return float(d_ref), float(lam_ref)


@dataclass(frozen=True)
class CertificationReport:
    certified: bool
    margin: float  # best candidate precision minus best cutoff precision
    tolerance: float
    best_cutoff_d: float
    best_cutoff_lambda: float
    brute_force: BruteForceResult
    n_candidates: int


def certify_cutoff_optimality(
    density: SignalDensity,
    cost: CostFunction,
    grid_cells: int = 8,
    value_levels: int = 2,
    x_max: Optional[float] = None,
    tolerance: float = 1e-3,
    settings: SolverSettings = SolverSettings(),
    seed: int = 0,
) -> CertificationReport:
    """Check that no quantized step transfer beats the best cutoff.

    The allowed slack is one coarse precision-grid step plus ``tolerance``,
    since candidate precisions are resolved against that grid.
    """
    d_best, lam_best = best_cutoff_precision(density, cost, settings)
    bf = brute_force_best_transfer(
        density, cost, grid_cells, value_levels, x_max, settings.agent, seed=seed
    )
    agent = settings.agent
    grid_step = lam_best * (
        (agent.lambda_max / agent.lambda_min) ** (1.0 / (agent.lambda_grid - 1)) - 1.0
    )
    margin = bf.response.lambda_star - lam_best
    return CertificationReport(
        certified=bool(margin <= grid_step + tolerance),
        margin=float(margin),
        tolerance=float(grid_step + tolerance),
        best_cutoff_d=d_best,
        best_cutoff_lambda=lam_best,
        brute_force=bf,
        n_candidates=bf.n_evaluated,
    )


@dataclass(frozen=True)
class RefutationReport:
    refuted: bool
    best_cutoff_d: float
    best_cutoff_lambda: float
    counterexample: CounterexampleResult
    counterexample_lambda: float
    counterexample_margin: float
    brute_force: BruteForceResult
    brute_force_margin: float
    truthful_at_reference: bool


def refute_cutoff_optimality(
    density: SignalDensity,
    lambda_ref: float,
    d_ref: float,
    x1: float,
    x2: float,
    kappa: float = 0.05,
    grid_cells: int = 8,
    value_levels: int = 2,
    x_max: Optional[float] = None,
    settings: SolverSettings = SolverSettings(),
    seed: int = 0,
) -> RefutationReport:
    """Exhibit transfers strictly beating every cutoff under the tangent cost.

    Builds the tangent cost at (lambda_ref, d_ref), the band-swap
    counterexample, and an independent brute-force search; reports the
    precision margins of both over the best cutoff.
    """
    cost = TangentCost(density, d_ref, lambda_ref, kappa)
    d_best, lam_best = best_cutoff_precision(density, cost, settings)
    # the band swap only helps locally: shrink the bands until the global
    # best response actually moves above the incumbent precision
    delta1 = 0.01 * x1 / lambda_ref
    ce = None
    ce_resp = None
    for _ in range(8):
        trial = build_counterexample(density, lambda_ref, d_ref, x1, x2, delta1=delta1)
        resp = best_response(density, trial.transfer, cost, settings.agent)
        if ce is None or resp.lambda_star > ce_resp.lambda_star:
            ce, ce_resp = trial, resp
        if resp.lambda_star > lam_best:
            ce, ce_resp = trial, resp
            break
        delta1 *= 0.25
    bf_x_max = x_max if x_max is not None else min(3.0 * density.scale, density.support_halfwidth)
    bf = brute_force_best_transfer(
        density, cost, grid_cells, value_levels, bf_x_max, settings.agent, seed=seed
    )
    truthful = abs(ce_resp.report_offset) <= settings.agent.offset_tol
    ce_margin = ce_resp.lambda_star - lam_best
    bf_margin = bf.response.lambda_star - lam_best
    return RefutationReport(
        refuted=bool(ce_margin > 0 and bf_margin > 0),
        best_cutoff_d=d_best,
        best_cutoff_lambda=lam_best,
        counterexample=ce,
        counterexample_lambda=ce_resp.lambda_star,
        counterexample_margin=float(ce_margin),
        brute_force=bf,
        brute_force_margin=float(bf_margin),
        truthful_at_reference=bool(truthful),
    )
