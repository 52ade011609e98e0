"""Coupled backward Riccati recursions and the forward fixed-point iteration.

Four matrix sequences are propagated backward from their terminal weights:

    P1_k   = (A + B K1_k)' P1_{k+1} (A + B K1_k)  + Q1 + K1_k' Gamma1 K1_k
    Phi1_k = (A + B2 K2_k)' Phi1_{k+1} (A + B2 K2_k) + K2_k' R1 K2_k
    P2_k   = (A + B2 K2_k)' P2_{k+1} (A + B2 K2_k) + Q2 + K2_k' R2 K2_k
    Phi2_k = (A + B K1_k)' Phi2_{k+1} (A + B K1_k)  + K1_k' Gamma2 K1_k + Q2

with the stacked gain K1 acting through B = [B1 B2] and the private gain
K2 acting through B2 alone:

    K1_k = -(Gamma1 + B' P1_{k+1} B)^{-1} B' P1_{k+1} A
    K2_k = -(R2 + B2' P2_{k+1} B2)^{-1} B2' P2_{k+1} A

The steady-state solver iterates the same right-hand sides forward from
a * I until the four matrices stop moving.

Note: the operation contracts state their formulas in terms of A, so A is
taken as an explicit first argument alongside the augmented blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import ConvergenceError, NumericalError, frozen, spectral_radius, sym
from .model import AugmentedModel, CostWeights


@dataclass(frozen=True, eq=False)
class RiccatiTrajectory:
    """Backward solution: P1/Phi1/P2/Phi2 indexed k=0..N+1, gains k=0..N."""

    P1: np.ndarray      # (N+2, n, n)
    Phi1: np.ndarray    # (N+2, n, n)
    P2: np.ndarray      # (N+2, n, n)
    Phi2: np.ndarray    # (N+2, n, n)
    K1: np.ndarray      # (N+1, m1+m2, n)
    K2: np.ndarray      # (N+1, m2, n)
    H1: np.ndarray      # (N+1, m1+m2, m1+m2)
    H2: np.ndarray      # (N+1, m2, m2)

    @property
    def horizon(self) -> int:
        return self.K1.shape[0] - 1


@dataclass(frozen=True, eq=False)
class SteadyRiccati:
    """Fixed point of the coupled recursions with convergence diagnostics."""

    P1: np.ndarray
    Phi1: np.ndarray
    P2: np.ndarray
    Phi2: np.ndarray
    K1: np.ndarray
    K2: np.ndarray
    iterations: int
    residual: float
    residual_history: tuple[float, ...] = ()


def _solve_gain(H, rhs, player: int):
    w = np.linalg.eigvalsh(sym(H))
    if w[0] <= 0.0 or w[-1] / w[0] > 1e12:
        raise NumericalError(
            f"gain Hessian singular for player {player} "
            f"(eig range [{w[0]:.3e}, {w[-1]:.3e}])"
        )
    return -np.linalg.solve(sym(H), rhs)


def gains_from(A, P1_next, P2_next, aug: AugmentedModel):
    """One gain evaluation from next-step Riccati matrices.

    Returns (K1, K2, H1, H2) with K1 = -H1^{-1} B' P1_next A and
    K2 = -H2^{-1} B2' P2_next A.  Raises NumericalError naming the player
    when a gain Hessian is numerically singular.
    """
    B = aug.B
    B2 = B[:, aug.m1:]
    R2 = aug.Gamma2[aug.m1:, aug.m1:]
    H1 = aug.Gamma1 + B.T @ P1_next @ B
    H2 = R2 + B2.T @ P2_next @ B2
    K1 = _solve_gain(H1, B.T @ P1_next @ A, player=1)
    K2 = _solve_gain(H2, B2.T @ P2_next @ A, player=2)
    return K1, K2, sym(H1), sym(H2)


def _step(A, aug, weights, P1n, Phi1n, P2n, Phi2n):
    """One evaluation of the four right-hand sides given next-step matrices."""
    B = aug.B
    B2 = B[:, aug.m1:]
    K1, K2, H1, H2 = gains_from(A, P1n, P2n, aug)
    Acl1 = A + B @ K1
    Acl2 = A + B2 @ K2
    P1 = sym(Acl1.T @ P1n @ Acl1 + weights.Q1 + K1.T @ aug.Gamma1 @ K1)
    Phi1 = sym(Acl2.T @ Phi1n @ Acl2 + K2.T @ weights.R1 @ K2)
    P2 = sym(Acl2.T @ P2n @ Acl2 + weights.Q2 + K2.T @ weights.R2 @ K2)
    Phi2 = sym(Acl1.T @ Phi2n @ Acl1 + K1.T @ aug.Gamma2 @ K1 + weights.Q2)
    return P1, Phi1, P2, Phi2, K1, K2, H1, H2


def backward(A, aug: AugmentedModel, weights: CostWeights, N: int) -> RiccatiTrajectory:
    """Solve the coupled recursions backward over horizon N.

    Index k runs 0..N+1 for the matrices (entry N+1 holds the terminal
    weights) and 0..N for the gains.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    m1, m2 = aug.m1, aug.m2
    mm = m1 + m2
    P1 = np.empty((N + 2, n, n))
    Phi1 = np.empty((N + 2, n, n))
    P2 = np.empty((N + 2, n, n))
    Phi2 = np.empty((N + 2, n, n))
    K1 = np.empty((N + 1, mm, n))
    K2 = np.empty((N + 1, m2, n))
    H1 = np.empty((N + 1, mm, mm))
    H2 = np.empty((N + 1, m2, m2))
    P1[N + 1] = weights.P1_term
    Phi1[N + 1] = weights.Phi1_term
    P2[N + 1] = weights.P2_term
    Phi2[N + 1] = weights.Phi2_term
    for k in range(N, -1, -1):
        try:
            (P1[k], Phi1[k], P2[k], Phi2[k],
             K1[k], K2[k], H1[k], H2[k]) = _step(
                A, aug, weights, P1[k + 1], Phi1[k + 1], P2[k + 1], Phi2[k + 1])
        except NumericalError as exc:
            raise NumericalError(f"backward step k={k}: {exc}") from None
    return RiccatiTrajectory(P1=frozen(P1), Phi1=frozen(Phi1), P2=frozen(P2),
                             Phi2=frozen(Phi2), K1=frozen(K1), K2=frozen(K2),
                             H1=frozen(H1), H2=frozen(H2))


def _rel_change(new, old):
    return max(
        np.linalg.norm(a - b) / (1.0 + np.linalg.norm(b))
        for a, b in zip(new, old)
    )


def forward_steady(A, aug: AugmentedModel, weights: CostWeights,
                   a: float = 1.0, tol: float = 1e-10,
                   max_iter: int = 2000) -> SteadyRiccati:
    """Iterate the coupled right-hand sides forward from a*I to a fixed point.

    Convergence is declared when the relative Frobenius change over all four
    matrices drops below tol.  The reported residual re-substitutes the fixed
    point into the right-hand sides.  Raises ConvergenceError when the budget
    is exhausted and NumericalError when the converged closed loop is not
    Schur stable.
    """
    if a <= 0:
        raise ValueError(f"a: expected a positive initializer, got {a}")
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    B = aug.B
    B2 = B[:, aug.m1:]
    mats = (a * np.eye(n),) * 4
    history: list[float] = []
    for it in range(1, max_iter + 1):
        out = _step(A, aug, weights, *mats)
        new = out[:4]
        change = _rel_change(new, mats)
        history.append(change)
        mats = new
        if change < tol:
            K1, K2 = out[4], out[5]
            resub = _step(A, aug, weights, *mats)[:4]
            residual = _rel_change(resub, mats)
            rho1 = spectral_radius(A + B @ K1)
            rho2 = spectral_radius(A + B2 @ K2)
            if rho1 >= 1.0 or rho2 >= 1.0:
                raise NumericalError(
                    f"non-stabilizing solution: closed-loop spectral radii "
                    f"{rho1:.6f}, {rho2:.6f}"
                )
            return SteadyRiccati(
                P1=frozen(mats[0]), Phi1=frozen(mats[1]), P2=frozen(mats[2]),
                Phi2=frozen(mats[3]), K1=frozen(K1), K2=frozen(K2),
                iterations=it, residual=residual,
                residual_history=tuple(history),
            )
    raise ConvergenceError(
        f"no convergence after {max_iter} iterations; "
        f"last residuals {[f'{r:.3e}' for r in history[-5:]]}"
    )


def closed_loop_spectra(A, sr: SteadyRiccati, aug: AugmentedModel) -> tuple[float, float]:
    """Spectral radii of A + B K1 and A + B2 K2 at the steady solution."""
    A = np.asarray(A, dtype=float)
    B = aug.B
    B2 = B[:, aug.m1:]
    return spectral_radius(A + B @ sr.K1), spectral_radius(A + B2 @ sr.K2)


def trajectory_rows(rt: RiccatiTrajectory):
    """Yield CSV rows (k, matrix, i, j, value) for the six sequences."""
    for name in ("P1", "Phi1", "P2", "Phi2", "K1", "K2"):
        seq = getattr(rt, name)
        for k in range(seq.shape[0]):
            M = seq[k]
            for i in range(M.shape[0]):
                for j in range(M.shape[1]):
                    yield k, name, i, j, M[i, j]
