import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import brentq

from cutoffcontracts.agent import (
    AffinePowerCost,
    AgentSettings,
    PowerCost,
    SignalModel,
    TabulatedCost,
    best_response,
    best_response_cutoff,
    best_response_truthful,
    cutoff_response_curve,
    expected_transfer_cutoff,
    expected_transfer_strategic,
    expected_transfer_truthful,
    participation_payoff,
    verify_truthful_report,
)
from cutoffcontracts.densities import GaussianDensity
from cutoffcontracts.transfers import StepTransfer


class TestCosts:
    def test_power(self):
        c = PowerCost(0.125, 2.0)
        assert c(2.0) == 0.5
        assert c(0.0) == 0.0
        assert c.zero_limit() == pytest.approx(0.0, abs=1e-20)

    def test_affine_power(self):
        c = AffinePowerCost(0.5, 0.125, 2.0)
        assert c(0.0) == 0.0
        assert c(2.0) == 1.0
        assert c.zero_limit() == pytest.approx(0.5, abs=1e-12)

    def test_tabulated(self):
        c = TabulatedCost([0.0, 1.0, 2.0], [0.0, 1.0, 3.0])
        assert c(0.5) == 0.5
        assert c(1.5) == 2.0
        assert c(3.0) == 5.0  # extended with the last slope
        assert c.knots() == (1.0,)
        with pytest.raises(ValueError):
            TabulatedCost([0.5, 1.0], [0.1, 0.2])


class TestExpectedTransferCutoff:
    def test_gaussian_unit(self, gaussian):
        ref, _ = quad(lambda x: gaussian.pdf(x), -1, 1)
        got = expected_transfer_cutoff(gaussian, 1.0, 1.0, dim=1)
        assert got == pytest.approx(ref, abs=1e-8)
        assert got == pytest.approx(0.682689492137, abs=1e-6)

    def test_zero_cutoff(self, gaussian, laplace):
        for den in (gaussian, laplace):
            assert expected_transfer_cutoff(den, 2.0, 0.0) == 0.0

    def test_uniform_rectangle(self, uniform):
        assert expected_transfer_cutoff(uniform, 2.0, 0.25) == pytest.approx(0.5, abs=1e-12)

    def test_monotone_in_lambda_and_d(self, gaussian):
        lams = np.linspace(0.2, 3.0, 30)
        vals = expected_transfer_cutoff(gaussian, lams, 0.7)
        assert np.all(np.diff(vals) >= -1e-12)
        ds = np.linspace(0.1, 2.0, 20)
        vals_d = [expected_transfer_cutoff(gaussian, 1.3, d) for d in ds]
        assert np.all(np.diff(vals_d) >= -1e-12)

    def test_dim_mismatch(self, gaussian):
        with pytest.raises(ValueError):
            expected_transfer_cutoff(gaussian, 1.0, 1.0, dim=2)


class TestExpectedTransferTruthful:
    def test_agrees_with_cutoff(self, gaussian):
        for lam, d in [(0.7, 0.5), (1.0, 1.0), (2.1, 0.3)]:
            t = StepTransfer.cutoff(d)
            assert expected_transfer_truthful(gaussian, lam, t) == pytest.approx(
                expected_transfer_cutoff(gaussian, lam, d), abs=1e-12
            )

    def test_full_budget(self, gaussian):
        t = StepTransfer(np.array([-8.0, 8.0]), np.array([1.0]))
        got = expected_transfer_truthful(gaussian, 1.0, t)
        assert got == pytest.approx(1.0 - 2 * (1 - gaussian.cdf(8.0)), abs=1e-12)

    def test_half_value_step(self, gaussian):
        t = StepTransfer(np.array([-1.0, 1.0]), np.array([0.5]))
        assert expected_transfer_truthful(gaussian, 1.0, t) == pytest.approx(
            0.341344746069, abs=1e-6
        )


class TestStrategic:
    def test_symmetric_single_peaked_truthful(self, gaussian, laplace):
        for den in (gaussian, laplace):
            t = StepTransfer.cutoff(0.8)
            value, offset = expected_transfer_strategic(den, 1.2, t)
            assert offset == 0.0
            assert value == pytest.approx(expected_transfer_truthful(den, 1.2, t), abs=1e-12)

    def test_shifted_cutoff_recovers_shift(self, gaussian):
        t = StepTransfer.cutoff(0.8).shifted(0.3)
        value, offset = expected_transfer_strategic(gaussian, 1.0, t)
        assert offset == pytest.approx(-0.3, abs=1e-9)
        assert value == pytest.approx(expected_transfer_cutoff(gaussian, 1.0, 0.8), abs=1e-12)

    def test_one_sided_block(self, gaussian):
        t = StepTransfer(np.array([0.0, 1.0]), np.array([1.0]))
        value, offset = expected_transfer_strategic(gaussian, 1.0, t)
        # grid oracle over offsets
        bs = np.linspace(-2.0, 2.0, 4001)
        vals = gaussian.cdf(1.0 * (1.0 + bs)) - gaussian.cdf(1.0 * bs)
        assert value >= vals.max() - 1e-9
        assert value == pytest.approx(2 * gaussian.cdf(0.5) - 1, abs=1e-9)
        assert offset == pytest.approx(-0.5, abs=1e-6)
        assert value >= gaussian.cdf(1.0) - gaussian.cdf(0.0)  # beats truthful

    def test_strategic_dominates_truthful(self, gaussian, rng):
        for _ in range(10):
            t = StepTransfer.from_cells(rng.uniform(size=16), 3.0)
            lam = float(rng.uniform(0.3, 2.5))
            v_strat, _ = expected_transfer_strategic(gaussian, lam, t)
            v_truth = expected_transfer_truthful(gaussian, lam, t)
            assert v_strat >= v_truth - 1e-9


class TestBestResponse:
    def test_foc_oracle(self, gaussian, quad_cost):
        # stationarity: 2 d phi(lam d) = c'(lam) at d = 1
        lam_foc = brentq(lambda u: 8.0 * gaussian.pdf(u) - u, 0.5, 3.0, xtol=1e-12)
        resp = best_response_cutoff(gaussian, 1.0, quad_cost)
        assert resp.participated
        assert resp.lambda_star == pytest.approx(lam_foc, abs=1e-6)
        payoff_oracle = 2 * gaussian.cdf(lam_foc) - 1 - lam_foc**2 / 8
        assert resp.payoff == pytest.approx(payoff_oracle, abs=1e-9)
        assert resp.lambda_star == pytest.approx(1.326, abs=2e-3)
        assert resp.payoff == pytest.approx(0.595, abs=2e-3)

    def test_grid_dominance(self, gaussian, quad_cost):
        resp = best_response_cutoff(gaussian, 1.0, quad_cost)
        lams = np.geomspace(1e-3, 1e3, 512)
        pays = expected_transfer_cutoff(gaussian, lams, 1.0) - quad_cost(lams)
        assert resp.payoff >= pays.max() - 1e-9

    def test_never_participates(self, gaussian):
        c = AffinePowerCost(10.0, 0.0, 1.0)  # c = 10 for lam > 0
        c = AffinePowerCost(10.0, 1e-12, 1.0)
        resp = best_response_cutoff(gaussian, 1.0, c)
        assert not resp.participated
        assert resp.lambda_star == 0.0
        assert resp.payoff == 0.0

    def test_zero_transfer(self, gaussian, quad_cost):
        resp = best_response_cutoff(gaussian, 0.0, quad_cost)
        assert resp.lambda_star == 0.0
        assert resp.payoff == 0.0

    def test_saturating_budget_hits_window_top(self, uniform):
        # free effort, compact support: payoff plateaus at 1, tie-break at the top
        c = PowerCost(0.0, 1.0)
        resp = best_response_cutoff(uniform, 1.0, c)
        assert resp.participated
        assert resp.hit_upper_bound
        assert resp.lambda_star == pytest.approx(1e3, rel=1e-6)

    def test_general_transfer_agrees_with_cutoff_path(self, gaussian, quad_cost):
        t = StepTransfer.cutoff(1.0)
        r1 = best_response(gaussian, t, quad_cost)
        r2 = best_response_cutoff(gaussian, 1.0, quad_cost)
        assert r1.lambda_star == pytest.approx(r2.lambda_star, abs=1e-9)

    def test_shifted_transfer_same_lambda(self, gaussian, quad_cost):
        t = StepTransfer.cutoff(1.0).shifted(0.4)
        r = best_response(gaussian, t, quad_cost)
        r0 = best_response_cutoff(gaussian, 1.0, quad_cost)
        assert r.lambda_star == pytest.approx(r0.lambda_star, abs=1e-5)
        assert r.report_offset == pytest.approx(-0.4, abs=1e-6)

    def test_truthful_response_below_strategic(self, gaussian, quad_cost, rng):
        t = StepTransfer.from_cells(rng.uniform(size=16), 3.0)
        r_truth = best_response_truthful(gaussian, t, quad_cost)
        r_strat = best_response(gaussian, t, quad_cost)
        # strategic payoff dominates the truthful payoff
        assert r_strat.payoff >= r_truth.payoff - 1e-9

    def test_monotone_response_in_substitute_region(self, gaussian, quad_cost):
        """Past the elasticity threshold, wider cutoffs induce weakly less precision."""
        ds = np.linspace(0.8, 2.0, 13)
        lams = [best_response_cutoff(gaussian, d, quad_cost).lambda_star for d in ds]
        prods = np.array(lams) * ds
        assert np.all(prods > 1.0 + 1e-3)  # all in the substitute region
        assert np.all(np.diff(lams) <= 1e-6)


class TestResponseCurve:
    def test_matches_pointwise(self, gaussian, quad_cost):
        ds = np.linspace(0.1, 2.0, 9)
        lams, payoffs, raw = cutoff_response_curve(gaussian, ds, quad_cost)
        for d, lam, pay in zip(ds, lams, payoffs):
            resp = best_response_cutoff(gaussian, d, quad_cost)
            assert lam == pytest.approx(resp.lambda_star, abs=2e-5)
            assert pay == pytest.approx(resp.payoff, abs=1e-8)

    def test_participation_payoff_sign(self, gaussian, quad_cost):
        assert participation_payoff(gaussian, 1.0, quad_cost) > 0
        c = AffinePowerCost(0.5, 0.125, 2.0)
        assert participation_payoff(gaussian, 0.3, c) < 0


class TestVerifyTruthful:
    def test_cutoffs_truthful(self, gaussian, rng):
        for _ in range(5):
            d = float(rng.uniform(0.2, 2.0))
            lam = float(rng.uniform(0.3, 3.0))
            assert verify_truthful_report(gaussian, StepTransfer.cutoff(d), lam)

    def test_shifted_not_truthful(self, gaussian):
        t = StepTransfer.cutoff(1.0).shifted(0.3)
        assert not verify_truthful_report(gaussian, t, 1.0)


class TestSignalModel:
    def test_simulation_invariant(self, gaussian, rng):
        for _ in range(20):
            lam = float(rng.uniform(0.5, 3.0))
            theta = float(rng.uniform(-2, 2))
            m = SignalModel.simulate(gaussian, theta, lam, rng)
            assert m.s == pytest.approx(m.theta + m.eps / m.lam, abs=1e-12)
            assert m.a == m.s

    def test_draws_follow_the_density(self, gaussian, rng):
        lam, theta = 2.0, 0.5
        draws = np.array(
            [SignalModel.simulate(gaussian, theta, lam, rng).s for _ in range(400)]
        )
        # crude distribution check: empirical cdf near the model cdf
        for q in (-0.5, 0.0, 0.5):
            emp = float(np.mean(draws <= theta + q))
            assert emp == pytest.approx(float(gaussian.cdf(lam * q)), abs=0.08)

    def test_rejects_bad_precision(self, gaussian, rng):
        with pytest.raises(ValueError):
            SignalModel.simulate(gaussian, 0.0, 0.0, rng)
