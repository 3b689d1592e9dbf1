import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qedmodel import ModelParams, RegimeKind, classify_regime, tp1
from qedmodel.calibrate import (CalibConfig, barrier_region_penalty, calibrate, compare_models,
                                gbm_mle, kappa_reparam, kramers_penalty, nll_gbm, nll_qed,
                                nll_qed_grad, profile_mle)
from qedmodel.dynamics import simulate_sde
from qedmodel.errors import ConfigError, DataError
from qedmodel.potentials import barrier, log_potential_d1
from qedmodel.rates import hazard_to_spread, kramers_rate

DT = 1.0 / 252.0


@pytest.fixture(scope="module")
def synthetic():
    p = tp1(0.02)
    ens = simulate_sde(1.0, p, 2000 * DT, DT, 1, seed=3, space="y")
    return p, ens.values[0]


def test_single_zero_residual_transition():
    p = tp1(0.02)
    y0 = -0.2
    y1 = y0 - log_potential_d1(y0, p) * DT
    assert nll_qed([y0, y1], p, DT) == pytest.approx(0.5 * math.log(2 * math.pi * 0.02 * DT), abs=1e-12)


@given(st.lists(st.floats(-1, 1), min_size=2, max_size=30), st.floats(-2, 2), st.floats(0.05, 1))
def test_gbm_nesting_identity(ys, theta, sigma):
    p = ModelParams(theta, 0.0, 0.0, sigma)
    assert nll_qed(ys, p, DT) == pytest.approx(nll_gbm(ys, p.theta_bar, sigma, DT), rel=1e-12, abs=1e-9)


def test_nll_prefers_truth(synthetic):
    p, y = synthetic
    assert nll_qed(y, p, DT) <= nll_qed(y, p.with_(theta=p.theta + 0.5), DT)


def test_nll_rejects_bad_input():
    with pytest.raises(DataError):
        nll_qed([0.0, math.nan], tp1(), DT)
    with pytest.raises(DataError):
        nll_qed([0.0], tp1(), DT)


def test_gbm_mle_recovery():
    m, s = 0.08, 0.25
    rng = np.random.default_rng(1)
    inc = m * DT + s * math.sqrt(DT) * rng.standard_normal(100_000)
    fit = gbm_mle(np.concatenate([[0.0], np.cumsum(inc)]), DT)
    se_m = s / math.sqrt(DT * inc.size)
    assert abs(fit.drift - m) < 3 * se_m
    assert abs(fit.sigma - s) < 3 * s / math.sqrt(2 * inc.size)


def test_gbm_two_points():
    fit = gbm_mle([0.0, 0.01], DT)
    assert fit.drift == pytest.approx(0.01 / DT)
    assert fit.sigma == 0.0 and fit.degenerate


def test_gbm_constant_series_degenerate():
    assert gbm_mle(np.zeros(10), DT).degenerate


@given(st.floats(-3, 3), st.floats(0.05, 0.6), st.floats(-5, 5), st.floats(0.01, 5),
       st.integers(0, 10_000))
def test_gradient_matches_differences(theta, sigma, kappa, g, seed):
    rng = np.random.default_rng(seed)
    y = np.cumsum(np.concatenate([[rng.uniform(-0.5, 0.5)], 0.02 * rng.standard_normal(60)]))
    p = ModelParams(theta, kappa, g, sigma)
    _, grad = nll_qed_grad(y, p, DT)
    base = np.array([theta, sigma, kappa, g])
    for i in range(4):
        h = 1e-6 * max(1.0, abs(base[i]))
        up, dn = base.copy(), base.copy()
        up[i] += h
        dn[i] -= h
        fd = (nll_qed(y, ModelParams(*up[[0, 2, 3, 1]]), DT)
              - nll_qed(y, ModelParams(*dn[[0, 2, 3, 1]]), DT)) / (2 * h)
        assert abs(grad[i] - fd) <= 1e-5 * max(abs(fd), 1.0)


def test_kramers_penalty_examples(axp):
    model = hazard_to_spread(kramers_rate(axp, warn=False).rate, 0.4)
    assert kramers_penalty(axp, model, 10.0) == pytest.approx(0.0, abs=1e-12)
    assert kramers_penalty(axp, 93.883, 0.0) == 0.0
    pen = kramers_penalty(axp, 93.883, 10.0)
    assert pen == pytest.approx(10 * (93.883 - model) ** 2)
    # close to the minimum: far below lambda1 * observed^2
    assert pen < 1e-4 * 10 * 93.883**2


def test_kramers_penalty_surrogate_is_finite():
    p = ModelParams(0.5, 0.3, 0.1, 0.1)
    pen = kramers_penalty(p, 50.0, 1.0)
    assert math.isfinite(pen) and pen >= 50.0**2


def test_barrier_penalty_examples():
    p = tp1(0.02)
    b = barrier(p)
    assert barrier_region_penalty([0.0, 0.1, -0.2], p, 1e5) == 0.0
    assert barrier_region_penalty([b.y_max - 0.01, 0.0], p, 1e5) == pytest.approx(1e3)
    assert barrier_region_penalty([0.0, 0.1], ModelParams(0.5, 0.1, 0.1, 0.1), 1e5) > 0


def test_kappa_reparam():
    k = kappa_reparam(1.0, 2.0, -1.0)
    assert k == pytest.approx(-(2 * math.sqrt(2) + 1))
    assert k * k == pytest.approx(14.657, abs=1e-3) and k * k >= 8
    assert kappa_reparam(0.0, 0.0, -1.0) == 0.0
    k2 = kappa_reparam(k, 2.0, -1.0)
    assert abs(k2) - abs(k) == pytest.approx(2 * math.sqrt(2))


@given(st.floats(-5, 5), st.floats(0, 5), st.floats(-3, 3))
def test_kappa_reparam_gives_real_extrema(kappa, g, tb):
    k = kappa_reparam(kappa, g, tb)
    assert k <= 0
    assert k * k >= 4 * g * abs(tb) * (1 - 1e-12)


@given(st.floats(0, 10), st.floats(0, 10), st.floats(0, 1e5), st.floats(0, 1e5))
def test_penalty_monotone_in_weights(l1a, l1b, l2a, l2b):
    p = tp1(0.02).with_(sigma=0.15)
    y = [-0.8, -0.5, 0.0]
    lo1, hi1 = sorted((l1a, l1b))
    lo2, hi2 = sorted((l2a, l2b))
    assert kramers_penalty(p, 80.0, lo1) <= kramers_penalty(p, 80.0, hi1)
    assert barrier_region_penalty(y, p, lo2) <= barrier_region_penalty(y, p, hi2)


def test_config_validation():
    with pytest.raises(ConfigError):
        CalibConfig(lambda1=-1)
    with pytest.raises(ConfigError):
        CalibConfig(recovery=1.0)
    with pytest.raises(ConfigError):
        CalibConfig(dt=0.0)


def test_profile_mle_is_stationary(synthetic):
    _, y = synthetic
    tb, k, g, s = profile_mle(y, DT)
    p = ModelParams.from_theta_bar(tb, k, g, s)
    _, grad = nll_qed_grad(y, p, DT)
    assert np.all(np.abs(grad) < 1e-6 * len(y))


def test_synthetic_recovery(synthetic):
    p, y = synthetic
    res = calibrate(y, config=CalibConfig(restarts=2))
    assert abs(res.params.sigma - p.sigma) / p.sigma <= 0.05
    assert res.loss <= nll_qed(y, p, DT) + 1e-3
    assert res.loss == res.nll + res.penalty_cds + res.penalty_barrier


@pytest.mark.parametrize("seed", range(5))
def test_unconstrained_nests_gbm(seed):
    rng = np.random.default_rng(seed)
    y = np.cumsum(0.01 * rng.standard_normal(300)) + rng.uniform(-0.3, 0.3)
    res = calibrate(y, config=CalibConfig(restarts=1, max_iters=200))
    assert res.nll <= gbm_mle(y, DT).nll + 1e-6


def test_constrained_fit(synthetic):
    p, y = synthetic
    obs = hazard_to_spread(kramers_rate(p).rate, 0.4)
    cfg = CalibConfig(restarts=2)
    lls = []
    for lam in (0.1, 1.0, 10.0):
        res = calibrate(y, obs, replace(cfg, lambda1=lam))
        assert classify_regime(res.params).kind is RegimeKind.METASTABLE
        assert res.constrained
        lls.append(-res.nll)
    assert abs(res.model_spread_bps - obs) / obs <= 0.20
    free = calibrate(y, config=cfg)
    assert -free.nll >= max(lls) - 1e-6
    assert lls[0] >= lls[1] - 1e-3 and lls[1] >= lls[2] - 1e-3


def test_calibrate_deterministic(synthetic):
    _, y = synthetic
    cfg = CalibConfig(lambda1=1.0, restarts=1, max_iters=300, seed=9)
    assert calibrate(y[:400], 3.0, cfg) == calibrate(y[:400], 3.0, cfg)


def test_calibrate_reports_non_convergence(synthetic):
    _, y = synthetic
    res = calibrate(y, 3.0, CalibConfig(lambda1=1.0, restarts=0, max_iters=3))
    assert not res.converged
    assert math.isfinite(res.loss)


def test_compare_models_schema(synthetic):
    _, y = synthetic
    cfg = CalibConfig(restarts=0, max_iters=300)
    rows = compare_models({2010: y[:300], 2011: y[300:600]}, {2010: 2.3}, cfg, lambdas=(1.0,))
    assert [r.year for r in rows] == [2010, 2011]
    assert set(rows[0].ll_qed_constrained) == {1.0}
    assert rows[1].ll_qed_constrained == {} and rows[1].observed_spread_bps is None
    assert all(r.ll_qed_unconstrained >= r.ll_gbm - 1e-6 for r in rows)
    only = compare_models({2010: y[:300]}, None, cfg)
    assert only[0].ll_qed_constrained == {}
