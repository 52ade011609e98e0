"""Simulation, exact moment propagation, and equilibrium certification.

Every run draws its noise from a counter-based stream keyed by (seed, run),
so run r sees identical disturbances no matter which strategy profile is
being simulated.  The best-response certificate exploits this: candidate and
deviation are evaluated on common random numbers and only the paired cost
differences are averaged, which removes almost all of the between-run
variance.

moment_oracle provides exact expected costs by propagating the joint first
and second moments of the stacked vector (x, xhat1, xhat2) — the closed loop
is linear and the noise is additive, so the expectations are available in
closed form without sampling error.  It is the reference the closed-form
cost expressions and the Monte Carlo engine are both judged against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import filters
from ._linalg import chol_psd, frozen
from .equilibrium import ProfileKind, StrategyProfile, apply_strategy
from .model import ProblemSpec, augment


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One closed-loop sample path with realized quadratic costs."""

    x: np.ndarray         # (N+2, n) true states
    xhat1: np.ndarray     # (N+2, n) estimator-1 predicted means
    xhat2: np.ndarray     # (N+2, n) estimator-2 predicted means
    y1: np.ndarray        # (N+1, p1)
    y2: np.ndarray        # (N+1, p2)
    u1: np.ndarray        # (N+1, m1)
    u2: np.ndarray        # (N+1, m2)
    uhat: np.ndarray      # (N+1, m1+m2) common action
    utilde2: np.ndarray   # (N+1, m2) private correction
    J1: float
    J2: float


@dataclass(frozen=True)
class CostEstimate:
    J1: float
    J2: float
    stderr1: float
    stderr2: float
    runs: int


@dataclass(frozen=True)
class OrthogonalityStat:
    name: str
    max_normalized: float
    threshold: float
    passed: bool


@dataclass(frozen=True)
class DeviationResult:
    """Paired cost change when one player perturbs one gain direction."""

    player: int
    label: str
    epsilon: float
    delta_j: float
    stderr: float
    passed: bool


@dataclass(frozen=True)
class NashCertificate:
    passed: bool
    results: tuple
    worst: DeviationResult
    notes: tuple
    runs: int


def _noise_batch(spec: ProblemSpec, M: int, seed: int):
    """Per-run disturbances, keyed by (seed, run) so profiles share noise."""
    sys = spec.system
    N = spec.horizon
    n, p1, p2 = sys.n, sys.p1, sys.p2
    Lx = chol_psd(sys.sigma)
    Lw = chol_psd(sys.Qw)
    Lv1 = chol_psd(sys.Qv1)
    Lv2 = chol_psd(sys.Qv2)
    x0 = np.empty((M, n))
    w = np.empty((M, N + 1, n))
    v1 = np.empty((M, N + 1, p1))
    v2 = np.empty((M, N + 1, p2))
    for run in range(M):
        seq = np.random.SeedSequence(entropy=seed, spawn_key=(run,))
        g = np.random.Generator(np.random.Philox(seq))
        x0[run] = sys.mu + Lx @ g.standard_normal(n)
        w[run] = g.standard_normal((N + 1, n)) @ Lw.T
        v1[run] = g.standard_normal((N + 1, p1)) @ Lv1.T
        v2[run] = g.standard_normal((N + 1, p2)) @ Lv2.T
    return x0, w, v1, v2


def _schedule_for(spec, profile, sched):
    if sched is not None:
        return sched
    aug = augment(spec)
    K2_cov = (np.zeros_like(profile.K2)
              if profile.kind is ProfileKind.SYMMETRIC else profile.K2)
    return filters.covariance_forward(aug, spec.system, K2_cov, spec.horizon)


def _quad(z, W):
    return np.einsum("ri,ij,rj->r", z, W, z)


def _run_batch(spec, profile, sched, noise, collect=False):
    """Vectorized closed-loop simulation of all runs at once.

    Returns per-run cost arrays (J1, J2); with collect=True also the stacked
    per-step samples needed by the orthogonality checks.
    """
    aug = augment(spec)
    sys = spec.system
    wts = spec.weights
    N = spec.horizon
    A, C1, C2, C = sys.A, sys.C1, sys.C2, aug.C
    B = aug.B
    B2 = B[:, aug.m1:]
    m1 = aug.m1
    is_sym = profile.kind is ProfileKind.SYMMETRIC

    x0, w, v1, v2 = noise
    M = x0.shape[0]
    x = np.array(x0)
    xh1 = np.tile(sys.mu, (M, 1))
    xh2 = np.tile(sys.mu, (M, 1))
    J1 = np.zeros(M)
    J2 = np.zeros(M)
    series = {"e2": [], "d": [], "xh1": [], "xh2": []} if collect else None

    for k in range(N + 1):
        if collect:
            series["e2"].append(x - xh2)
            series["d"].append(xh2 - xh1)
            series["xh1"].append(np.array(xh1))
            series["xh2"].append(np.array(xh2))
        if is_sym:
            uhat = xh2 @ profile.K1[k].T
            ut2 = np.zeros((M, B2.shape[1]))
        else:
            uhat = xh1 @ profile.K1[k].T
            ut2 = (xh2 - xh1) @ profile.K2[k].T
        u1 = uhat[:, :m1]
        u2 = uhat[:, m1:] + ut2
        J1 += _quad(x, wts.Q1) + _quad(u1, wts.S1) + _quad(u2, wts.R1)
        J2 += _quad(x, wts.Q2) + _quad(u1, wts.S2) + _quad(u2, wts.R2)

        y1 = x @ C1.T + v1[:, k]
        y2 = x @ C2.T + v2[:, k]
        y = np.hstack([y1, y2])
        if not is_sym:
            x1f = xh1 + (y1 - xh1 @ C1.T) @ sched.G1[k].T
            xh1 = x1f @ A.T + uhat @ B.T
        x2f = xh2 + (y - xh2 @ C.T) @ sched.G2[k].T
        xh2 = x2f @ A.T + uhat @ B.T + ut2 @ B2.T
        if is_sym:
            xh1 = xh2
        x = x @ A.T + uhat @ B.T + ut2 @ B2.T + w[:, k]

    J1 += _quad(x, wts.P1_term)
    J2 += _quad(x, wts.Phi2_term)
    if collect:
        series["e2"].append(x - xh2)
        series["d"].append(xh2 - xh1)
        series["xh1"].append(np.array(xh1))
        series["xh2"].append(np.array(xh2))
        series = {key: np.stack(val) for key, val in series.items()}
    return J1, J2, series


def simulate(spec: ProblemSpec, profile: StrategyProfile, seed: int,
             schedule=None) -> Trajectory:
    """One full sample path via the step-level filter and strategy calls."""
    aug = augment(spec)
    sys = spec.system
    wts = spec.weights
    N = spec.horizon
    sched = _schedule_for(spec, profile, schedule)
    x0, w, v1, v2 = _noise_batch(spec, 1, seed)

    n = sys.n
    x = np.empty((N + 2, n))
    xh1 = np.empty((N + 2, n))
    xh2 = np.empty((N + 2, n))
    y1 = np.empty((N + 1, sys.p1))
    y2 = np.empty((N + 1, sys.p2))
    u1 = np.empty((N + 1, aug.m1))
    u2 = np.empty((N + 1, aug.m2))
    uhat = np.empty((N + 1, aug.m1 + aug.m2))
    ut2 = np.empty((N + 1, aug.m2))

    x[0] = x0[0]
    state = filters.FilterState(xhat1_pred=frozen(sys.mu), xhat2_pred=frozen(sys.mu),
                                xhat1_filt=frozen(sys.mu), xhat2_filt=frozen(sys.mu),
                                k=0)
    J1 = 0.0
    J2 = 0.0
    for k in range(N + 1):
        xh1[k] = state.xhat1_pred
        xh2[k] = state.xhat2_pred
        if profile.kind is ProfileKind.SYMMETRIC:
            a1, a2, uh, ut = apply_strategy(profile, k, state.xhat2_pred,
                                            state.xhat2_pred)
        else:
            a1, a2, uh, ut = apply_strategy(profile, k, state.xhat1_pred,
                                            state.xhat2_pred)
        u1[k], u2[k], uhat[k], ut2[k] = a1, a2, uh, ut
        J1 += float(x[k] @ wts.Q1 @ x[k] + a1 @ wts.S1 @ a1 + a2 @ wts.R1 @ a2)
        J2 += float(x[k] @ wts.Q2 @ x[k] + a1 @ wts.S2 @ a1 + a2 @ wts.R2 @ a2)
        y1[k] = sys.C1 @ x[k] + v1[0, k]
        y2[k] = sys.C2 @ x[k] + v2[0, k]
        state = filters.filter_step(state, y1[k], y2[k], uh, ut,
                                    sched.G1[k], sched.G2[k], aug, sys)
        if profile.kind is ProfileKind.SYMMETRIC:
            state = filters.FilterState(
                xhat1_pred=state.xhat2_pred, xhat2_pred=state.xhat2_pred,
                xhat1_filt=state.xhat2_filt, xhat2_filt=state.xhat2_filt,
                k=state.k)
        x[k + 1] = sys.A @ x[k] + aug.B @ uh + aug.B[:, aug.m1:] @ ut + w[0, k]
    xh1[N + 1] = state.xhat1_pred
    xh2[N + 1] = state.xhat2_pred
    J1 += float(x[N + 1] @ wts.P1_term @ x[N + 1])
    J2 += float(x[N + 1] @ wts.Phi2_term @ x[N + 1])

    return Trajectory(x=frozen(x), xhat1=frozen(xh1), xhat2=frozen(xh2),
                      y1=frozen(y1), y2=frozen(y2), u1=frozen(u1), u2=frozen(u2),
                      uhat=frozen(uhat), utilde2=frozen(ut2),
                      J1=J1, J2=J2)


def estimate_costs(spec: ProblemSpec, profile: StrategyProfile, M: int,
                   seed: int, schedule=None) -> CostEstimate:
    """Sample-mean costs over M runs with standard errors."""
    sched = _schedule_for(spec, profile, schedule)
    noise = _noise_batch(spec, M, seed)
    J1, J2, _ = _run_batch(spec, profile, sched, noise)
    return CostEstimate(
        J1=float(J1.mean()), J2=float(J2.mean()),
        stderr1=float(J1.std(ddof=1) / np.sqrt(M)),
        stderr2=float(J2.std(ddof=1) / np.sqrt(M)),
        runs=M,
    )


def _max_normalized_moment(a, b):
    """max over time/entries of |mean(a_i b_j)| scaled by the sample stds.

    A factor whose sample spread is negligible relative to its magnitude is
    effectively deterministic (its std is rounding noise), so entries
    involving it are judged on the raw moment instead of blowing up the
    ratio.
    """
    worst = 0.0
    for k in range(a.shape[0]):
        ak, bk = a[k], b[k]
        moment = np.abs(ak.T @ bk / ak.shape[0])
        std_a = ak.std(axis=0)
        std_b = bk.std(axis=0)
        flat_a = std_a <= 1e-9 * (1.0 + np.abs(ak.mean(axis=0)))
        flat_b = std_b <= 1e-9 * (1.0 + np.abs(bk.mean(axis=0)))
        degenerate = flat_a[:, None] | flat_b[None, :]
        scale = np.where(degenerate, 1.0, np.outer(std_a, std_b))
        worst = max(worst, float((moment / scale).max()))
    return worst


def orthogonality_stats(spec: ProblemSpec, profile: StrategyProfile, M: int,
                        seed: int):
    """Sample checks of the cross-moment structure of the two estimators.

    Checked pairs: estimator-1's estimate against estimator-2's error,
    the estimate disagreement d = xhat2 - xhat1 against estimator-2's
    error, and estimator-1's estimate against d.  Each statistic is the
    largest correlation-normalized sample moment over all times and
    entries; entries whose scale is zero fall back to the raw moment.  The
    pass threshold is 5/sqrt(M).
    """
    sched = _schedule_for(spec, profile, None)
    noise = _noise_batch(spec, M, seed)
    _, _, series = _run_batch(spec, profile, sched, noise, collect=True)
    threshold = 5.0 / np.sqrt(M)
    pairs = (
        ("estimate1_vs_error2", series["xh1"], series["e2"]),
        ("disagreement_vs_error2", series["d"], series["e2"]),
        ("estimate1_vs_disagreement", series["xh1"], series["d"]),
    )
    out = []
    for name, a, b in pairs:
        stat = _max_normalized_moment(a, b)
        out.append(OrthogonalityStat(name=name, max_normalized=stat,
                                     threshold=threshold,
                                     passed=stat <= threshold))
    return out


def _deviation_directions(profile: StrategyProfile, player: int, rng):
    """Yield (label, dK1, dK2) unit directions for one player's deviations.

    Player 1 owns the first m1 rows of K1.  Player 2 owns the remaining
    rows of K1 and all of K2.  Each coordinate direction is emitted once;
    one normalized random direction over the player's full block follows.
    """
    m_all, n = profile.K1.shape[1], profile.K1.shape[2]
    m2 = profile.K2.shape[1]
    m1 = profile.m1
    rows = range(m1) if player == 1 else range(m1, m_all)
    for i in rows:
        for j in range(n):
            dK1 = np.zeros((m_all, n))
            dK1[i, j] = 1.0
            yield f"K1[{i},{j}]", dK1, np.zeros((m2, n))
    if player == 2 and profile.kind is not ProfileKind.SYMMETRIC:
        for i in range(m2):
            for j in range(n):
                dK2 = np.zeros((m2, n))
                dK2[i, j] = 1.0
                yield f"K2[{i},{j}]", np.zeros((m_all, n)), dK2
    dK1 = np.zeros((m_all, n))
    dK2 = np.zeros((m2, n))
    for i in rows:
        dK1[i] = rng.standard_normal(n)
    if player == 2 and profile.kind is not ProfileKind.SYMMETRIC:
        dK2[:] = rng.standard_normal((m2, n))
    norm = np.sqrt(np.sum(dK1 ** 2) + np.sum(dK2 ** 2))
    yield "random", dK1 / norm, dK2 / norm


def _perturbed(profile, dK1, dK2, eps):
    return StrategyProfile(K1=profile.K1 + eps * dK1, K2=profile.K2 + eps * dK2,
                           m1=profile.m1, kind=profile.kind)


def best_response_certificate(spec: ProblemSpec, profile: StrategyProfile,
                              epsilons=(1e-2,), M: int = 2000,
                              seed: int = 0) -> NashCertificate:
    """Paired-sample test that no local gain deviation lowers a player's cost.

    The candidate and every deviation run on identical noise, with the
    filter gain schedules frozen at the candidate profile, so the paired
    difference deltaJ = J_dev - J_cand is estimated with a small standard
    error.  A deviation fails when deltaJ < -3 stderr; differences in
    (-stderr, 0) are flagged as statistically inconclusive rather than
    failed.
    """
    sched = _schedule_for(spec, profile, None)
    noise = _noise_batch(spec, M, seed)
    J1_base, J2_base, _ = _run_batch(spec, profile, sched, noise)
    base = {1: J1_base, 2: J2_base}
    rng = np.random.Generator(np.random.Philox(
        np.random.SeedSequence(entropy=seed, spawn_key=(1, 0))))

    results = []
    notes = []
    for player in (1, 2):
        for label, dK1, dK2 in _deviation_directions(profile, player, rng):
            for eps in epsilons:
                for sign, tag in ((1.0, "+"), (-1.0, "-")):
                    dev = _perturbed(profile, dK1, dK2, sign * eps)
                    J1_dev, J2_dev, _ = _run_batch(spec, dev, sched, noise)
                    own = (J1_dev if player == 1 else J2_dev) - base[player]
                    delta = float(own.mean())
                    stderr = float(own.std(ddof=1) / np.sqrt(M))
                    passed = delta >= -3.0 * stderr
                    full_label = f"{label}{tag}"
                    results.append(DeviationResult(
                        player=player, label=full_label, epsilon=eps,
                        delta_j=delta, stderr=stderr, passed=passed))
                    if passed and -stderr < delta < 0.0:
                        notes.append(
                            f"player {player} {full_label}: deltaJ="
                            f"{delta:.3e} within one stderr of zero (inconclusive)")

    worst = min(results, key=lambda r: (r.delta_j + 3.0 * r.stderr, r.delta_j))
    return NashCertificate(
        passed=all(r.passed for r in results),
        results=tuple(results), worst=worst, notes=tuple(notes), runs=M,
    )


def moment_oracle(spec: ProblemSpec, profile: StrategyProfile, sched=None):
    """Exact expected costs of a profile via joint moment propagation.

    Stacks s = (x, xhat1, xhat2) (or (x, xhat2) under the symmetric
    pattern), propagates mean and covariance of s through the linear closed
    loop, and accumulates the exact expectation of each quadratic cost term.
    Sampling-free ground truth for both the closed forms and the simulator.
    """
    aug = augment(spec)
    sys = spec.system
    wts = spec.weights
    N = spec.horizon
    sched = _schedule_for(spec, profile, sched)
    A, C1, C = sys.A, sys.C1, aug.C
    B = aug.B
    B2 = B[:, aug.m1:]
    n, m1, p1 = sys.n, aug.m1, sys.p1
    is_sym = profile.kind is ProfileKind.SYMMETRIC
    blocks = 2 if is_sym else 3
    dim = blocks * n

    mean = np.concatenate([sys.mu] * blocks)
    cov = np.zeros((dim, dim))
    cov[:n, :n] = sys.sigma
    J1 = 0.0
    J2 = 0.0
    for k in range(N + 1):
        K1k = profile.K1[k]
        K2k = profile.K2[k]
        second = cov + np.outer(mean, mean)

        L_u1 = np.zeros((m1, dim))
        L_u2 = np.zeros((aug.m2, dim))
        if is_sym:
            L_u1[:, n:] = K1k[:m1]
            L_u2[:, n:] = K1k[m1:]
        else:
            L_u1[:, n:2 * n] = K1k[:m1]
            L_u2[:, n:2 * n] = K1k[m1:] - K2k
            L_u2[:, 2 * n:] = K2k
        Mxx = second[:n, :n]
        J1 += float(np.trace(wts.Q1 @ Mxx) + np.trace(wts.S1 @ L_u1 @ second @ L_u1.T)
                    + np.trace(wts.R1 @ L_u2 @ second @ L_u2.T))
        J2 += float(np.trace(wts.Q2 @ Mxx) + np.trace(wts.S2 @ L_u1 @ second @ L_u1.T)
                    + np.trace(wts.R2 @ L_u2 @ second @ L_u2.T))

        F = np.zeros((dim, dim))
        noise_cov = np.zeros((dim, dim))
        if is_sym:
            AG2C = A @ sched.G2[k] @ C
            F[:n, :n] = A
            F[:n, n:] = B @ K1k
            F[n:, :n] = AG2C
            F[n:, n:] = A - AG2C + B @ K1k
            Nv = np.zeros((dim, C.shape[0]))
            Nv[n:] = A @ sched.G2[k]
            noise_cov += Nv @ aug.Qv @ Nv.T
        else:
            AG1C1 = A @ sched.G1[k] @ C1
            AG2C = A @ sched.G2[k] @ C
            F[:n, :n] = A
            F[:n, n:2 * n] = B @ K1k - B2 @ K2k
            F[:n, 2 * n:] = B2 @ K2k
            F[n:2 * n, :n] = AG1C1
            F[n:2 * n, n:2 * n] = A - AG1C1 + B @ K1k
            F[2 * n:, :n] = AG2C
            F[2 * n:, n:2 * n] = B @ K1k - B2 @ K2k
            F[2 * n:, 2 * n:] = A - AG2C + B2 @ K2k
            Nv1 = np.zeros((dim, p1))
            Nv1[n:2 * n] = A @ sched.G1[k]
            Nv1[2 * n:] = A @ sched.G2[k][:, :p1]
            Nv2 = np.zeros((dim, sys.p2))
            Nv2[2 * n:] = A @ sched.G2[k][:, p1:]
            noise_cov += Nv1 @ sys.Qv1 @ Nv1.T + Nv2 @ sys.Qv2 @ Nv2.T
        noise_cov[:n, :n] += sys.Qw
        mean = F @ mean
        cov = F @ cov @ F.T + noise_cov

    Mxx = cov[:n, :n] + np.outer(mean[:n], mean[:n])
    J1 += float(np.trace(wts.P1_term @ Mxx))
    J2 += float(np.trace(wts.Phi2_term @ Mxx))
    return J1, J2


def trajectory_table(traj: Trajectory):
    """Wide CSV table (header, rows): k, x_*, xhat1_*, xhat2_*, u1_*, u2_*.

    Action columns are blank on the terminal row, where no action is taken.
    """
    n = traj.x.shape[1]
    m1 = traj.u1.shape[1]
    m2 = traj.u2.shape[1]
    header = (["k"]
              + [f"x_{i + 1}" for i in range(n)]
              + [f"xhat1_{i + 1}" for i in range(n)]
              + [f"xhat2_{i + 1}" for i in range(n)]
              + [f"u1_{i + 1}" for i in range(m1)]
              + [f"u2_{i + 1}" for i in range(m2)])
    rows = []
    for k in range(traj.x.shape[0]):
        row = [k] + [float(v) for v in traj.x[k]]
        row += [float(v) for v in traj.xhat1[k]]
        row += [float(v) for v in traj.xhat2[k]]
        if k < traj.u1.shape[0]:
            row += [float(v) for v in traj.u1[k]]
            row += [float(v) for v in traj.u2[k]]
        else:
            row += [""] * (m1 + m2)
        rows.append(row)
    return header, rows
