"""Shared fixtures: reference systems and precomputed solution pipelines."""

from types import SimpleNamespace

import numpy as np
import pytest

from dilqg import equilibrium, filters, model, riccati


def make_scalar_spec() -> model.ProblemSpec:
    """Scalar system, horizon 3, built so the gain construction is exactly
    optimal for both players: symmetric weights, matching terminal weights,
    and a blind first sensor (C1 = 0) so estimator 1 is deterministic."""
    sysm = model.SystemModel(
        A=[[0.9]], B1=[[1.0]], B2=[[1.0]], C1=[[0.0]], C2=[[1.0]],
        Qw=[[0.04]], Qv1=[[0.25]], Qv2=[[0.04]], mu=[0.4], sigma=[[0.09]])
    wts = model.CostWeights(
        Q1=[[1.0]], Q2=[[1.0]], S1=[[1.0]], S2=[[1.0]], R1=[[1.0]], R2=[[1.0]],
        P2_term=[[1.0]])
    return model.ProblemSpec(system=sysm, weights=wts, horizon=3)


def make_identical_filter_spec() -> model.ProblemSpec:
    """Benchmark variant whose second sensor carries no state information
    (C2 = 0), so both estimators coincide and the information advantage
    disappears."""
    bench = model.benchmark_example()
    sysm = model.SystemModel(
        A=bench.system.A, B1=bench.system.B1, B2=bench.system.B2,
        C1=bench.system.C1, C2=np.zeros((2, 2)),
        Qw=bench.system.Qw, Qv1=bench.system.Qv1, Qv2=bench.system.Qv2,
        mu=bench.system.mu, sigma=bench.system.sigma)
    return model.ProblemSpec(system=sysm, weights=bench.weights, horizon=20)


def make_noiseless_spec() -> model.ProblemSpec:
    """Zero initial state, zero process noise: the loop stays at the origin."""
    sysm = model.SystemModel(
        A=[[0.8, 0.1], [0.0, 0.7]], B1=[[1.0], [0.0]], B2=[[0.0], [1.0]],
        C1=[[1.0, 0.0]], C2=[[0.0, 1.0]],
        Qw=np.zeros((2, 2)), Qv1=[[0.1]], Qv2=[[0.1]],
        mu=[0.0, 0.0], sigma=np.zeros((2, 2)))
    wts = model.CostWeights(Q1=np.eye(2), Q2=np.eye(2), S1=[[1.0]], S2=[[1.0]],
                            R1=[[1.0]], R2=[[1.0]])
    return model.ProblemSpec(system=sysm, weights=wts, horizon=8)


def make_unstable_spec(horizon: int = 20) -> model.ProblemSpec:
    """Open-loop unstable scalar plant used to show the certificate rejects
    a do-nothing profile."""
    sysm = model.SystemModel(
        A=[[1.05]], B1=[[1.0]], B2=[[1.0]], C1=[[1.0]], C2=[[1.0]],
        Qw=[[0.04]], Qv1=[[0.04]], Qv2=[[0.04]], mu=[0.5], sigma=[[0.09]])
    wts = model.CostWeights(Q1=[[1.0]], Q2=[[1.0]], S1=[[1.0]], S2=[[1.0]],
                            R1=[[1.0]], R2=[[1.0]])
    return model.ProblemSpec(system=sysm, weights=wts, horizon=horizon)


def random_instance(rng) -> model.ProblemSpec:
    """One random well-posed instance (n <= 4, stable-ish A, PD noise)."""
    n = int(rng.integers(1, 5))
    m1, m2 = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    p1, p2 = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    A = rng.normal(size=(n, n))
    rad = max(abs(np.linalg.eigvals(A)))
    A *= rng.uniform(0.3, 1.15) / max(rad, 1e-9)

    def pd(d, floor):
        G = rng.normal(size=(d, d))
        return G @ G.T / d + floor * np.eye(d)

    sysm = model.SystemModel(
        A=A, B1=rng.normal(size=(n, m1)), B2=rng.normal(size=(n, m2)),
        C1=rng.normal(size=(p1, n)), C2=rng.normal(size=(p2, n)),
        Qw=pd(n, 0.05), Qv1=pd(p1, 0.1), Qv2=pd(p2, 0.1),
        mu=0.5 * rng.normal(size=n), sigma=pd(n, 0.05))
    wts = model.CostWeights(
        Q1=pd(n, 0.2), Q2=pd(n, 0.2), S1=pd(m1, 0.2), S2=pd(m1, 0.2),
        R1=pd(m2, 0.2), R2=pd(m2, 0.2))
    return model.ProblemSpec(system=sysm, weights=wts, horizon=40)


def _pipeline(spec):
    aug = model.augment(spec)
    rt = riccati.backward(spec.system.A, aug, spec.weights, spec.horizon)
    sched = filters.covariance_forward(aug, spec.system, rt.K2, spec.horizon)
    nash = equilibrium.StrategyProfile(K1=rt.K1, K2=rt.K2, m1=aug.m1)
    symmetric = equilibrium.StrategyProfile(
        K1=rt.K1, K2=np.zeros_like(rt.K2), m1=aug.m1,
        kind=equilibrium.ProfileKind.SYMMETRIC)
    return SimpleNamespace(spec=spec, aug=aug, rt=rt, sched=sched,
                           nash=nash, symmetric=symmetric)


@pytest.fixture(scope="session")
def scalar_spec():
    return make_scalar_spec()


@pytest.fixture(scope="session")
def benchmark_spec():
    return model.benchmark_example()


@pytest.fixture(scope="session")
def scalar_pipeline(scalar_spec):
    return _pipeline(scalar_spec)


@pytest.fixture(scope="session")
def benchmark_pipeline(benchmark_spec):
    return _pipeline(benchmark_spec)


@pytest.fixture(scope="session")
def random_pipelines():
    """100 random instances with solved pipelines, fixed generator seed."""
    rng = np.random.default_rng(20260816)
    return [_pipeline(random_instance(rng)) for _ in range(100)]
