"""Simulation engine, sample statistics, and the best-response certificate."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from dilqg import montecarlo
from dilqg.equilibrium import ProfileKind, StrategyProfile
from dilqg.montecarlo import (best_response_certificate, estimate_costs,
                              moment_oracle, orthogonality_stats, simulate,
                              trajectory_table)

from conftest import make_noiseless_spec, make_unstable_spec

SCALAR_MC_J1 = 0.7258816300898049          # M=4000, seed 0
SCALAR_CERT_WORST_DELTA = -4.509490016168563e-05
SCALAR_CERT_WORST_STDERR = 5.50492932748643e-05


def test_noise_streams_are_keyed_per_run(scalar_pipeline):
    spec = scalar_pipeline.spec
    one = montecarlo._noise_batch(spec, 1, seed=7)
    two = montecarlo._noise_batch(spec, 3, seed=7)
    # run r draws the same disturbances regardless of batch size
    for a, b in zip(one, two):
        assert np.array_equal(a[0], b[0])
    # different seeds decorrelate
    other = montecarlo._noise_batch(spec, 1, seed=8)
    assert not np.array_equal(one[0], other[0])


def test_estimate_costs_is_deterministic(scalar_pipeline):
    p = scalar_pipeline
    a = estimate_costs(p.spec, p.nash, M=500, seed=3, schedule=p.sched)
    b = estimate_costs(p.spec, p.nash, M=500, seed=3, schedule=p.sched)
    assert a.J1 == b.J1 and a.J2 == b.J2
    assert a.stderr1 == b.stderr1
    assert a.runs == 500
    assert a.stderr1 > 0.0 and a.stderr2 > 0.0


def test_sample_mean_matches_oracle(scalar_pipeline):
    p = scalar_pipeline
    est = estimate_costs(p.spec, p.nash, M=4000, seed=0, schedule=p.sched)
    assert_allclose(est.J1, SCALAR_MC_J1, rtol=1e-12)
    o1, o2 = moment_oracle(p.spec, p.nash, p.sched)
    assert abs(est.J1 - o1) <= 3.0 * est.stderr1
    assert abs(est.J2 - o2) <= 3.0 * est.stderr2


def test_simulate_agrees_with_batch_engine(benchmark_pipeline):
    p = benchmark_pipeline
    traj = simulate(p.spec, p.nash, seed=11, schedule=p.sched)
    noise = montecarlo._noise_batch(p.spec, 1, seed=11)
    J1, J2, _ = montecarlo._run_batch(p.spec, p.nash, p.sched, noise)
    assert_allclose(traj.J1, J1[0], rtol=1e-10)
    assert_allclose(traj.J2, J2[0], rtol=1e-10)
    assert traj.x.shape == (52, 2)
    assert traj.u1.shape == (51, 2)


def test_error_accounting_identity(benchmark_pipeline):
    # e1 = e2 + d pointwise along any sample path
    p = benchmark_pipeline
    traj = simulate(p.spec, p.nash, seed=5, schedule=p.sched)
    e1 = traj.x - traj.xhat1
    e2 = traj.x - traj.xhat2
    d = traj.xhat2 - traj.xhat1
    assert_allclose(e1, e2 + d, atol=1e-12)


def test_simulate_symmetric_profile_keeps_estimators_synced(benchmark_pipeline):
    p = benchmark_pipeline
    traj = simulate(p.spec, p.symmetric, seed=5)
    assert_allclose(traj.xhat1, traj.xhat2, atol=0.0)
    assert np.all(traj.utilde2 == 0.0)


def test_quiescent_noiseless_path_is_identically_zero():
    spec = make_noiseless_spec()
    from dilqg.equilibrium import nash_profile
    prof = nash_profile(spec)
    traj = simulate(spec, prof, seed=0)
    assert np.all(traj.x == 0.0)
    assert traj.J1 == 0.0 and traj.J2 == 0.0
    assert moment_oracle(spec, prof) == (0.0, 0.0)


def test_empirical_error_sizes_track_covariance_traces(benchmark_pipeline):
    p = benchmark_pipeline
    noise = montecarlo._noise_batch(p.spec, 4000, seed=2)
    _, _, series = montecarlo._run_batch(p.spec, p.nash, p.sched, noise,
                                         collect=True)
    e2 = series["e2"]
    e1 = e2 + series["d"]
    emp1 = float((e1 ** 2).sum(axis=2).mean())
    emp2 = float((e2 ** 2).sum(axis=2).mean())
    pred1 = float(np.trace(p.sched.Sigma1_pred, axis1=1, axis2=2).mean())
    pred2 = float(np.trace(p.sched.Sigma2_pred, axis1=1, axis2=2).mean())
    assert emp2 < emp1   # the better-informed estimator wins
    assert_allclose(emp1, pred1, rtol=0.05)
    assert_allclose(emp2, pred2, rtol=0.05)


def test_orthogonality_passes_on_scalar_instance(scalar_pipeline):
    # estimator 1 is deterministic here (C1 = 0), which exercises the
    # zero-spread fallback in the normalization
    stats = orthogonality_stats(scalar_pipeline.spec, scalar_pipeline.nash,
                                M=5000, seed=0)
    assert [s.name for s in stats] == ["estimate1_vs_error2",
                                       "disagreement_vs_error2",
                                       "estimate1_vs_disagreement"]
    for s in stats:
        assert s.threshold == pytest.approx(5.0 / np.sqrt(5000))
        assert s.max_normalized < 1.0   # the degenerate factor must not blow up
        assert s.passed, s


def test_orthogonality_on_benchmark_flags_estimate_disagreement_moment(
        benchmark_pipeline):
    stats = orthogonality_stats(benchmark_pipeline.spec,
                                benchmark_pipeline.nash, M=10000, seed=0)
    by_name = {s.name: s for s in stats}
    assert by_name["estimate1_vs_error2"].passed
    assert by_name["disagreement_vs_error2"].passed
    cross = by_name["estimate1_vs_disagreement"]
    # the common estimate and the disagreement are genuinely correlated on
    # this instance; the statistic sits well above the sampling threshold
    assert not cross.passed
    assert_allclose(cross.max_normalized, 0.13611, atol=2e-3)
    assert cross.threshold == pytest.approx(0.05)


def test_certificate_accepts_scalar_equilibrium(scalar_pipeline):
    p = scalar_pipeline
    cert = best_response_certificate(p.spec, p.nash, M=4000, seed=0)
    assert cert.passed
    assert cert.runs == 4000
    assert cert.worst.label == "K2[0,0]-"
    assert_allclose(cert.worst.delta_j, SCALAR_CERT_WORST_DELTA, rtol=1e-9)
    assert_allclose(cert.worst.stderr, SCALAR_CERT_WORST_STDERR, rtol=1e-9)
    assert any("inconclusive" in note for note in cert.notes)
    # player 1: one gain coordinate plus a random direction; player 2: one
    # K1 row, one K2 coordinate, and a random direction; two signs each
    assert len(cert.results) == 2 * (2 + 3)


def test_certificate_rejects_zero_gains_on_unstable_system():
    spec = make_unstable_spec()
    N = spec.horizon
    prof = StrategyProfile(K1=np.zeros((N + 1, 2, 1)),
                           K2=np.zeros((N + 1, 1, 1)), m1=1,
                           kind=ProfileKind.NASH)
    cert = best_response_certificate(spec, prof, M=2000, seed=0)
    assert not cert.passed
    assert cert.worst.delta_j < -3.0 * cert.worst.stderr
    # stabilizing feedback is available, so the improvement is enormous
    assert cert.worst.delta_j < -0.1


def test_certificate_skips_private_deviations_for_symmetric_profile(
        scalar_pipeline):
    p = scalar_pipeline
    cert = best_response_certificate(p.spec, p.symmetric, M=200, seed=0)
    labels = {r.label for r in cert.results}
    assert not any(lbl.startswith("K2[") for lbl in labels)
    assert len(cert.results) == 2 * (2 + 2)


def test_deviation_directions_are_normalized(scalar_pipeline):
    rng = np.random.default_rng(0)
    dirs = list(montecarlo._deviation_directions(scalar_pipeline.nash, 2, rng))
    label, dK1, dK2 = dirs[-1]
    assert label == "random"
    assert_allclose(np.sum(dK1 ** 2) + np.sum(dK2 ** 2), 1.0, rtol=1e-12)
    assert np.all(dK1[:1] == 0.0)   # player 2 never touches player 1's rows


def test_trajectory_table_layout(benchmark_pipeline):
    p = benchmark_pipeline
    traj = simulate(p.spec, p.nash, seed=0, schedule=p.sched)
    header, rows = trajectory_table(traj)
    assert header == ["k", "x_1", "x_2", "xhat1_1", "xhat1_2", "xhat2_1",
                      "xhat2_2", "u1_1", "u1_2", "u2_1", "u2_2"]
    assert len(rows) == 52
    assert rows[0][0] == 0
    assert rows[-1][0] == 51
    # no action is taken at the terminal time
    assert rows[-1][7:] == [""] * 4
    assert all(isinstance(v, float) for v in rows[0][1:])