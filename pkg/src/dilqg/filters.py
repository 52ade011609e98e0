"""Dual Kalman filters with the control-coupled covariance recursion.

Estimator 1 updates on the delayed local measurement y1 only; estimator 2
updates on the stacked measurement y = [y1; y2].  Because controller 2's
private action utilde2 is invisible to estimator 1, the error covariance of
estimator 1 picks up a feedback-dependent term: its prediction step

    Sigma1_{k+1|k} = (A(I - G1 C1) + B2 K2_k) (Sigma1 - Sigma2) (...)'
                   + A(I - G1 C1) Sigma2 (I - G1 C1)' A'
                   + A G1 Qv1 G1' A' + Qw

depends on the private feedback gain K2_k, so the Riccati pass must run
before the covariance pass.  Estimator 2's recursion is the standard one.
Measurement updates use the Joseph form throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import ConvergenceError, frozen, solve_spd, sym
from .model import AugmentedModel, SystemModel


@dataclass(frozen=True, eq=False)
class CovarianceSchedule:
    """Predicted/filtered covariances and Kalman gains over the horizon."""

    Sigma1_pred: np.ndarray   # (N+2, n, n), entry k is Sigma1_{k|k-1}
    Sigma2_pred: np.ndarray   # (N+2, n, n)
    Sigma1_filt: np.ndarray   # (N+1, n, n), entry k is Sigma1_{k|k}
    Sigma2_filt: np.ndarray   # (N+1, n, n)
    G1: np.ndarray            # (N+1, n, p1)
    G2: np.ndarray            # (N+1, n, p1+p2)

    @property
    def horizon(self) -> int:
        return self.G1.shape[0] - 1


@dataclass(frozen=True, eq=False)
class FilterState:
    """Both estimators' predicted and filtered means at one time index."""

    xhat1_pred: np.ndarray
    xhat2_pred: np.ndarray
    xhat1_filt: np.ndarray
    xhat2_filt: np.ndarray
    k: int


def _gain(Sigma, Cmat, Qv, k, label):
    innovation = Cmat @ Sigma @ Cmat.T + Qv
    try:
        # G = Sigma C' (C Sigma C' + Qv)^{-1}, via an SPD solve
        return solve_spd(innovation, Cmat @ Sigma, context=label).T
    except Exception as exc:
        raise type(exc)(f"innovation covariance singular at k={k}: {exc}") from None


def _joseph(Sigma, G, Cmat, Qv):
    n = Sigma.shape[0]
    closed = np.eye(n) - G @ Cmat
    return sym(closed @ Sigma @ closed.T + G @ Qv @ G.T)


def covariance_forward(aug: AugmentedModel, sys: SystemModel,
                       K2_seq, N: int) -> CovarianceSchedule:
    """Propagate both error covariances forward over horizon N.

    K2_seq must provide the private feedback gain for k = 0..N (the coupled
    Sigma1 prediction consumes it).  Both predicted covariances start at
    sigma, the initial-state covariance.
    """
    K2_seq = np.asarray(K2_seq, dtype=float)
    if K2_seq.shape[0] < N + 1:
        raise ValueError(f"K2_seq: expected at least {N + 1} gains, got {K2_seq.shape[0]}")
    A, C1 = sys.A, sys.C1
    C, Qv = aug.C, aug.Qv
    B2 = aug.B[:, aug.m1:]
    n, p1, p = sys.n, sys.p1, aug.C.shape[0]

    S1p = np.empty((N + 2, n, n))
    S2p = np.empty((N + 2, n, n))
    S1f = np.empty((N + 1, n, n))
    S2f = np.empty((N + 1, n, n))
    G1 = np.empty((N + 1, n, p1))
    G2 = np.empty((N + 1, n, p))
    S1p[0] = sys.sigma
    S2p[0] = sys.sigma
    for k in range(N + 1):
        G1[k] = _gain(S1p[k], C1, sys.Qv1, k, "estimator-1 innovation")
        G2[k] = _gain(S2p[k], C, Qv, k, "estimator-2 innovation")
        S1f[k] = _joseph(S1p[k], G1[k], C1, sys.Qv1)
        S2f[k] = _joseph(S2p[k], G2[k], C, Qv)
        S2p[k + 1] = sym(A @ S2f[k] @ A.T + sys.Qw)
        closed1 = A @ (np.eye(n) - G1[k] @ C1)
        coupled = closed1 + B2 @ K2_seq[k]
        gap = S1p[k] - S2p[k]
        S1p[k + 1] = sym(
            coupled @ gap @ coupled.T
            + closed1 @ S2p[k] @ closed1.T
            + A @ G1[k] @ sys.Qv1 @ G1[k].T @ A.T
            + sys.Qw
        )
    return CovarianceSchedule(
        Sigma1_pred=frozen(S1p), Sigma2_pred=frozen(S2p),
        Sigma1_filt=frozen(S1f), Sigma2_filt=frozen(S2f),
        G1=frozen(G1), G2=frozen(G2),
    )


def filter_step(state: FilterState, y1, y2, uhat, utilde2,
                G1, G2, aug: AugmentedModel, sys: SystemModel) -> FilterState:
    """Advance both estimators one step: measurement update, then prediction.

    Estimator 1's prediction uses the common action uhat only; estimator 2
    additionally feeds its own private action utilde2 through B2.
    """
    A, C1, C = sys.A, sys.C1, aug.C
    B = aug.B
    B2 = B[:, aug.m1:]
    y1 = np.asarray(y1, dtype=float).reshape(-1)
    y = np.concatenate([y1, np.asarray(y2, dtype=float).reshape(-1)])
    uhat = np.asarray(uhat, dtype=float).reshape(-1)
    utilde2 = np.asarray(utilde2, dtype=float).reshape(-1)

    x1f = state.xhat1_pred + G1 @ (y1 - C1 @ state.xhat1_pred)
    x2f = state.xhat2_pred + G2 @ (y - C @ state.xhat2_pred)
    x1p = A @ x1f + B @ uhat
    x2p = A @ x2f + B @ uhat + B2 @ utilde2
    return FilterState(xhat1_pred=frozen(x1p), xhat2_pred=frozen(x2p),
                       xhat1_filt=frozen(x1f), xhat2_filt=frozen(x2f),
                       k=state.k + 1)


def steady_covariances(aug: AugmentedModel, sys: SystemModel, K2_ss,
                       tol: float = 1e-12, max_iter: int = 10000):
    """Fixed points of both covariance recursions under a stationary K2.

    Returns (Sigma1, Sigma2, G1, G2).  Sigma2 solves the standard filter
    fixed point; Sigma1 then solves the coupled recursion jointly with its
    gain G1.  Raises ConvergenceError when either iteration stalls.
    """
    K2_ss = np.asarray(K2_ss, dtype=float)
    A, C1, C = sys.A, sys.C1, aug.C
    B2 = aug.B[:, aug.m1:]
    n = sys.n

    S2 = np.array(sys.sigma, dtype=float)
    for _ in range(max_iter):
        G2 = _gain(S2, C, aug.Qv, -1, "estimator-2 innovation")
        nxt = sym(A @ _joseph(S2, G2, C, aug.Qv) @ A.T + sys.Qw)
        change = np.linalg.norm(nxt - S2) / (1.0 + np.linalg.norm(S2))
        S2 = nxt
        if change < tol:
            break
    else:
        raise ConvergenceError(f"estimator-2 covariance: no convergence after {max_iter} iterations")

    S1 = np.array(S2)
    for _ in range(max_iter):
        G1 = _gain(S1, C1, sys.Qv1, -1, "estimator-1 innovation")
        closed1 = A @ (np.eye(n) - G1 @ C1)
        coupled = closed1 + B2 @ K2_ss
        nxt = sym(
            coupled @ (S1 - S2) @ coupled.T
            + closed1 @ S2 @ closed1.T
            + A @ G1 @ sys.Qv1 @ G1.T @ A.T
            + sys.Qw
        )
        change = np.linalg.norm(nxt - S1) / (1.0 + np.linalg.norm(S1))
        S1 = nxt
        if change < tol:
            break
    else:
        raise ConvergenceError(f"estimator-1 covariance: no convergence after {max_iter} iterations")

    G1 = _gain(S1, C1, sys.Qv1, -1, "estimator-1 innovation")
    G2 = _gain(S2, C, aug.Qv, -1, "estimator-2 innovation")
    return frozen(S1), frozen(S2), frozen(G1), frozen(G2)


def covariance_gap(sched: CovarianceSchedule):
    """Per-k report rows (k, min_eig(Sigma1 - Sigma2), tr Sigma1, tr Sigma2)."""
    rows = []
    for k in range(sched.Sigma1_pred.shape[0]):
        gap = sched.Sigma1_pred[k] - sched.Sigma2_pred[k]
        rows.append((
            k,
            float(np.linalg.eigvalsh(sym(gap)).min()),
            float(np.trace(sched.Sigma1_pred[k])),
            float(np.trace(sched.Sigma2_pred[k])),
        ))
    return rows
