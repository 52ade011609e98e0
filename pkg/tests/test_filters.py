"""Covariance recursions, Kalman gains, and the step-level filter."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from dilqg import filters, model
from dilqg._linalg import NumericalError

from conftest import make_identical_filter_spec

SCALAR_S1P = [0.09, 0.1129, 0.097252249059, 0.093647708096, 0.095053534836]
SCALAR_S2P = [0.09, 0.062430769231, 0.059747551817, 0.059407199912,
              0.059362714963]
SCALAR_G2_V2 = [0.692307692308, 0.609492340042, 0.598987651614, 0.597614659348]


def test_scalar_schedule_matches_frozen_values(scalar_pipeline):
    sched = scalar_pipeline.sched
    assert sched.Sigma1_pred.shape == (5, 1, 1)
    assert sched.G1.shape == (4, 1, 1)
    assert sched.G2.shape == (4, 1, 2)
    assert_allclose(sched.Sigma1_pred[:, 0, 0], SCALAR_S1P, rtol=1e-9)
    assert_allclose(sched.Sigma2_pred[:, 0, 0], SCALAR_S2P, rtol=1e-9)
    # C1 = 0 makes estimator 1 blind: G1 identically zero
    assert np.all(sched.G1 == 0.0)
    # estimator 2 weighs only its informative sensor
    assert_allclose(sched.G2[:, 0, 0], np.zeros(4), atol=1e-15)
    assert_allclose(sched.G2[:, 0, 1], SCALAR_G2_V2, rtol=1e-9)


def test_benchmark_trace_values(benchmark_pipeline):
    sched = benchmark_pipeline.sched
    assert_allclose(np.trace(sched.Sigma1_pred[51]), 0.39791490641171245,
                    rtol=1e-10)
    assert_allclose(np.trace(sched.Sigma2_pred[51]), 0.13620006723134656,
                    rtol=1e-10)


def test_covariances_stay_psd_and_ordered(benchmark_pipeline):
    sched = benchmark_pipeline.sched
    for k in range(52):
        for S in (sched.Sigma1_pred[k], sched.Sigma2_pred[k]):
            assert np.linalg.eigvalsh(S).min() >= -1e-12
        gap = sched.Sigma1_pred[k] - sched.Sigma2_pred[k]
        assert np.linalg.eigvalsh(gap).min() >= -1e-10


def test_covariance_gap_rows(benchmark_pipeline):
    rows = filters.covariance_gap(benchmark_pipeline.sched)
    assert len(rows) == 52
    ks = [r[0] for r in rows]
    assert ks == list(range(52))
    # the information advantage is strictly positive after the first update
    for k, min_eig, tr1, tr2 in rows[1:]:
        assert tr1 - tr2 > 0.1
    assert rows[0][1] == 0.0  # both start from the same prior


def test_filtered_covariance_below_predicted(scalar_pipeline):
    sched = scalar_pipeline.sched
    assert np.all(sched.Sigma2_filt[:, 0, 0] <= sched.Sigma2_pred[:4, 0, 0] + 1e-15)
    # estimator 1 never updates (G1 = 0), so filtering changes nothing
    assert_allclose(sched.Sigma1_filt, sched.Sigma1_pred[:4], rtol=1e-12)


def test_estimator2_schedule_ignores_private_gain(benchmark_pipeline):
    # Sigma2 and G2 do not depend on K2
    spec = benchmark_pipeline.spec
    aug = benchmark_pipeline.aug
    zero = filters.covariance_forward(aug, spec.system,
                                      np.zeros_like(benchmark_pipeline.rt.K2),
                                      spec.horizon)
    assert_allclose(zero.Sigma2_pred, benchmark_pipeline.sched.Sigma2_pred,
                    rtol=1e-12)
    assert_allclose(zero.G2, benchmark_pipeline.sched.G2, rtol=1e-12)
    # Sigma1 does depend on it
    assert not np.allclose(zero.Sigma1_pred[2:], benchmark_pipeline.sched.Sigma1_pred[2:])


def test_identical_filter_spec_collapses_gap():
    spec = make_identical_filter_spec()
    aug = model.augment(spec)
    from dilqg import riccati
    rt = riccati.backward(spec.system.A, aug, spec.weights, spec.horizon)
    sched = filters.covariance_forward(aug, spec.system, rt.K2, spec.horizon)
    assert_allclose(sched.Sigma1_pred, sched.Sigma2_pred, atol=1e-12)
    for k, min_eig, tr1, tr2 in filters.covariance_gap(sched):
        assert abs(tr1 - tr2) <= 1e-12


def test_filter_step_advances_both_estimators(scalar_pipeline):
    spec = scalar_pipeline.spec
    aug = scalar_pipeline.aug
    sched = scalar_pipeline.sched
    state = filters.FilterState(xhat1_pred=np.array([0.4]),
                                xhat2_pred=np.array([0.4]),
                                xhat1_filt=np.array([0.4]),
                                xhat2_filt=np.array([0.4]), k=0)
    uhat = np.array([-0.1, -0.1])
    ut2 = np.array([0.05])
    nxt = filters.filter_step(state, y1=[0.7], y2=[0.2], uhat=uhat,
                              utilde2=ut2, G1=sched.G1[0], G2=sched.G2[0],
                              aug=aug, sys=spec.system)
    assert nxt.k == 1
    A = spec.system.A
    B = aug.B
    B2 = B[:, 1:]
    y = np.array([0.7, 0.2])
    x2f = state.xhat2_pred + sched.G2[0] @ (y - aug.C @ state.xhat2_pred)
    assert_allclose(nxt.xhat2_filt, x2f, rtol=1e-12)
    assert_allclose(nxt.xhat2_pred, A @ x2f + B @ uhat + B2 @ ut2, rtol=1e-12)
    # estimator 1 is blind here: measurement update is a no-op
    assert_allclose(nxt.xhat1_filt, state.xhat1_pred, rtol=1e-12)
    assert_allclose(nxt.xhat1_pred, A @ state.xhat1_pred + B @ uhat, rtol=1e-12)


def test_steady_covariances_match_long_recursion(benchmark_pipeline):
    spec = benchmark_pipeline.spec
    aug = benchmark_pipeline.aug
    K2_ss = benchmark_pipeline.rt.K2[0]
    S1, S2, G1, G2 = filters.steady_covariances(aug, spec.system, K2_ss)
    assert_allclose(np.trace(S1), 0.29383538545983395, rtol=1e-8)
    assert_allclose(np.trace(S2), 0.13620006723135478, rtol=1e-8)
    assert np.linalg.eigvalsh(S1 - S2).min() >= 0.05
    # agreeing with a long finite-horizon pass under the same constant gain
    K2_seq = np.tile(K2_ss, (400, 1, 1))
    sched = filters.covariance_forward(aug, spec.system, K2_seq, 399)
    assert np.linalg.norm(sched.Sigma1_pred[-1] - S1) < 1e-8
    assert np.linalg.norm(sched.Sigma2_pred[-1] - S2) < 1e-8
    assert np.linalg.norm(sched.G1[-1] - G1) < 1e-8
    assert np.linalg.norm(sched.G2[-1] - G2) < 1e-8


def test_singular_innovation_reports_time_index():
    # no measurement noise and no state uncertainty: innovation is singular
    sysm = model.SystemModel(A=[[0.9]], B1=[[1.0]], B2=[[1.0]], C1=[[1.0]],
                             C2=[[1.0]], Qw=np.zeros((1, 1)),
                             Qv1=np.zeros((1, 1)), Qv2=[[0.1]],
                             mu=[0.0], sigma=np.zeros((1, 1)))
    wts = model.CostWeights(Q1=[[1.0]], Q2=[[1.0]], S1=[[1.0]], S2=[[1.0]],
                            R1=[[1.0]], R2=[[1.0]])
    spec = model.ProblemSpec(system=sysm, weights=wts, horizon=3)
    aug = model.augment(spec)
    with pytest.raises(NumericalError, match="k=0"):
        filters.covariance_forward(aug, sysm, np.zeros((4, 1, 1)), 3)


def test_covariance_forward_requires_enough_gains(scalar_pipeline):
    spec = scalar_pipeline.spec
    with pytest.raises(ValueError, match="K2_seq"):
        filters.covariance_forward(scalar_pipeline.aug, spec.system,
                                   scalar_pipeline.rt.K2[:2], spec.horizon)