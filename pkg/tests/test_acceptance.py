"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines.  Expected values are either closed forms derived in-line or
independent brute-force/grid oracles computed here, never the library's own
search path.
"""

import math
import time

import numpy as np
import pytest

from cutoffcontracts.agent import (
    PowerCost,
    best_response_cutoff,
    expected_transfer_strategic,
)
from cutoffcontracts.densities import GaussianDensity, TruncatedExpInverseDensity, UniformDensity
from cutoffcontracts.elasticity import elasticity
from cutoffcontracts.numerics import make_rng
from cutoffcontracts.oracle import (
    brute_force_best_output_transfer,
    certify_cutoff_optimality,
    improve_to_cutoff,
    refute_cutoff_optimality,
)
from cutoffcontracts.solver import (
    ExponentialOutputModel,
    check_output_mlrp,
    comparative_statics,
    optimal_cutoff,
    solve_classic_pa,
    solve_gaussian_prior,
    solve_unobserved_state,
)
from cutoffcontracts.transfers import StepTransfer

GAUSSIAN = GaussianDensity()
UNIFORM = UniformDensity()
TRUNC = TruncatedExpInverseDensity(0.1)
QUAD_COST = PowerCost(0.125, 2.0)


def report(number, name, ok, started, budget):
    elapsed = time.time() - started
    status = "PASS" if ok else "FAIL"
    print(f"[acceptance] criterion {number} ({name}): {status} ({elapsed:.1f}s / budget {budget:.0f}s)")
    assert ok, f"criterion {number} ({name}) failed"
    assert elapsed < budget, f"criterion {number} exceeded its {budget:.0f}s budget ({elapsed:.1f}s)"


def test_criterion_1_elasticity_closed_forms():
    t0 = time.time()
    xs = np.linspace(0.025, 5.0, 200)
    err_gauss = np.max(np.abs(elasticity(GAUSSIAN, xs) - xs**2))
    laplace_xs = xs[xs < 25.0]
    from cutoffcontracts.densities import LaplaceDensity

    err_lap = np.max(np.abs(elasticity(LaplaceDensity(), laplace_xs) - laplace_xs))
    ok = err_gauss < 1e-9 and err_lap < 1e-9
    report(1, "elasticity closed forms", ok, t0, 1.0)


def test_criterion_2_cross_derivative_sign_law():
    t0 = time.time()
    rng = make_rng(2)
    h = 1e-4
    ok = True
    for n in (1, 2, 3):
        den = GaussianDensity(dimension=n)
        vol = den.volume_coefficient
        count = 0
        while count < 500:
            lam = float(rng.uniform(0.3, 2.0))
            d = float(rng.uniform(0.1, 1.8))
            u = lam * d
            if abs(n - u * u) <= 1e-2:
                continue
            count += 1
            E = lambda ll, dd: float(den.ball_mass(ll * dd))
            fd = (
                E(lam + h, d + h) - E(lam + h, d - h) - E(lam - h, d + h) + E(lam - h, d - h)
            ) / (4 * h * h)
            phi = (2 * math.pi) ** (-n / 2.0) * math.exp(-0.5 * u * u)
            closed = n * vol * phi * u ** (n - 1) * (n - u * u)
            ok = ok and math.copysign(1, fd) == math.copysign(1, n - u * u)
            ok = ok and abs(fd - closed) < 1e-4
            if not ok:
                break
    report(2, "complement/substitute sign law", ok, t0, 30.0)


def test_criterion_3_boundary_rule_reproduction():
    t0 = time.time()
    res = optimal_cutoff(GAUSSIAN, QUAD_COST)
    d_closed = math.sqrt(1.0 / (8.0 * GAUSSIAN.pdf(1.0)))

    # independent 2-d grid search at resolution 1e-3
    ds = np.arange(1e-3, 1.5, 1e-3)
    lams = np.arange(1e-3, 3.0, 1e-3)
    pay = GAUSSIAN.ball_mass(np.outer(ds, lams)) - (0.125 * lams**2)[None, :]
    idx = pay.shape[1] - 1 - np.argmax(pay[:, ::-1] >= pay.max(axis=1)[:, None] - 1e-12, axis=1)
    lam_of_d = lams[idx]
    hits = lam_of_d * ds >= 1.0  # gaussian threshold: eta(x) = x^2 crosses 1 at x = 1
    d_grid = float(ds[int(np.argmax(hits))])
    lam_grid = float(lam_of_d[int(np.argmax(hits))])

    ok = (
        abs(res.d_star - d_closed) < 1e-3
        and abs(res.lambda_star - 1.0 / d_closed) < 1e-3
        and abs(res.boundary_product - 1.0) < 1e-3
        and abs(res.d_star - d_grid) < 1e-3
        and abs(res.lambda_star - lam_grid) < 1e-3
    )
    if not ok:
        print("   solver:", res.d_star, res.lambda_star, res.boundary_product)
        print("   closed:", d_closed, 1.0 / d_closed)
        print("   grid:  ", d_grid, lam_grid)
    report(3, "optimal cutoff vs closed form and grid oracle", ok, t0, 60.0)


def test_criterion_4_certification_sufficiency():
    t0 = time.time()
    ok = True
    for den in (GAUSSIAN, UNIFORM):
        rep = certify_cutoff_optimality(den, QUAD_COST, grid_cells=8, value_levels=2, tolerance=1e-3)
        ok = ok and rep.certified and rep.margin <= rep.tolerance
    report(4, "no 8-cell binary transfer beats the best cutoff", ok, t0, 300.0)


def test_criterion_5_refutation_necessity():
    t0 = time.time()
    # curvature 0.5 rather than the 0.05 default: this density's extreme
    # central spike otherwise rewards coarse candidates for collapsing to
    # very low precision, hiding the local improvement the test targets
    rep = refute_cutoff_optimality(
        TRUNC, 1.0, 0.5, 0.2, 0.8, kappa=0.5, grid_cells=8, value_levels=2
    )
    ok = (
        rep.refuted
        and rep.counterexample_margin > 0
        and rep.brute_force_margin > 0
        and abs(rep.best_cutoff_lambda - 1.0) < 1e-4
        and abs(rep.counterexample.mass_gap) < 1e-10
    )
    if not ok:
        print("   margins:", rep.counterexample_margin, rep.brute_force_margin)
    report(5, "transfers strictly beat every cutoff when elasticity decreases", ok, t0, 300.0)


def test_criterion_6_improvement_pipeline():
    t0 = time.time()
    rng = make_rng(6)
    ok = True
    worst_margin = math.inf
    worst_gap = 0.0
    for _ in range(50):
        t = StepTransfer.from_cells(rng.uniform(size=64), 3.0)
        pr = improve_to_cutoff(GAUSSIAN, t, QUAD_COST, check_grid=32)
        worst_margin = min(worst_margin, pr.guarantee_margin)
        worst_gap = max(worst_gap, pr.symmetrization_gap)
        ok = ok and pr.guarantee_margin >= -1e-6 and pr.symmetrization_gap <= 1e-9
    if not ok:
        print("   worst margin:", worst_margin, "worst symmetrization gap:", worst_gap)
    report(6, "pipeline weakly improves 50 random transfers", ok, t0, 120.0)


def test_criterion_7_comparative_statics():
    t0 = time.time()
    ok = True
    for k in (1.5, 2.0, 4.0):
        rep = comparative_statics(GAUSSIAN, QUAD_COST, PowerCost(0.125 * k, 2.0))
        ok = ok and rep.hypothesis_holds
        ok = ok and rep.result_high.d_star >= rep.result_low.d_star - 1e-6
        ok = ok and rep.result_high.lambda_star <= rep.result_low.lambda_star + 1e-6
    report(7, "costlier effort raises the cutoff and lowers precision", ok, t0, 60.0)


def test_criterion_8_variant_consistency():
    t0 = time.time()
    base = optimal_cutoff(GAUSSIAN, QUAD_COST)
    prior = solve_gaussian_prior(GAUSSIAN, 1e-3, QUAD_COST)
    unobs = solve_unobserved_state(GAUSSIAN, "uniform", 1e3, QUAD_COST)
    ok = (
        abs(prior.d_star - base.d_star) < 1e-3
        and abs(prior.lambda_star - base.lambda_star) < 1e-3
        and abs(unobs.d_star - base.d_star) < 1e-3
        and abs(unobs.lambda_star - base.lambda_star) < 1e-3
    )
    report(8, "prior/unobserved variants collapse to the base model", ok, t0, 60.0)


def test_criterion_9_truthful_reporting():
    t0 = time.time()
    rng = make_rng(9)
    ok = True
    for _ in range(20):
        d = float(rng.uniform(0.1, 2.5))
        t = StepTransfer.cutoff(d)
        for _ in range(20):
            lam = float(rng.uniform(0.2, 4.0))
            _, offset = expected_transfer_strategic(GAUSSIAN, lam, t)
            ok = ok and abs(offset) <= 1e-6
    report(9, "cutoff transfers induce truthful reports", ok, t0, 60.0)


def test_criterion_10_classic_principal_agent():
    t0 = time.time()
    model = ExponentialOutputModel()
    cost = PowerCost(0.5, 2.0)
    mlrp, _ = check_output_mlrp(model)
    res = solve_classic_pa(model, cost)
    bf = brute_force_best_output_transfer(model, cost, 8, 2, y_span=4.0)
    effort_step = (model.e_max - model.e_min) / 1023  # effort grid resolution
    ok = mlrp and bf.effort <= res.e_star + effort_step + 1e-6
    if not ok:
        print("   quota effort:", res.e_star, "brute force effort:", bf.effort)
    report(10, "output quotas survive brute force under MLRP", ok, t0, 300.0)
