"""Game-instance definition, validation, augmentation, and (de)serialization.

The plant is a discrete-time LTI system driven by two controllers::

    x_{k+1} = A x_k + B1 u1_k + B2 u2_k + w_k
    y1_k    = C1 x_k + v1_k          (sensor of controller 1)
    y2_k    = C2 x_k + v2_k          (sensor of controller 2)

Controller 1 sees its own measurements with a one-step delay; controller 2
sees both measurement streams with a one-step delay, so the information
pattern is nested and asymmetric.  Each controller pays a quadratic cost
with weights (Qi, Si, Ri) and a terminal weight.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._linalg import asmatrix, frozen, is_pd, is_psd, min_symmetric_eig, psd_sqrt


class SpecFormatError(ValueError):
    """A problem-specification document failed to parse or type-check."""


class InfoStructure(Enum):
    ASYMMETRIC = "asymmetric"
    SYMMETRIC = "symmetric"


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Plant, sensor, and noise description.

    Shapes: A is n x n, B1 is n x m1, B2 is n x m2, C1 is p1 x n,
    C2 is p2 x n; Qw and sigma are n x n, Qv1 is p1 x p1, Qv2 is p2 x p2,
    mu is length n.
    """

    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    Qw: np.ndarray
    Qv1: np.ndarray
    Qv2: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
            raise ValueError(f"A: expected a nonempty square matrix, got shape {A.shape}")
        n = A.shape[0]
        B1 = np.asarray(self.B1, dtype=float)
        B2 = np.asarray(self.B2, dtype=float)
        if B1.ndim != 2 or B1.shape[0] != n or B1.shape[1] == 0:
            raise ValueError(f"B1: expected shape ({n}, m1>0), got {B1.shape}")
        if B2.ndim != 2 or B2.shape[0] != n or B2.shape[1] == 0:
            raise ValueError(f"B2: expected shape ({n}, m2>0), got {B2.shape}")
        C1 = np.asarray(self.C1, dtype=float)
        C2 = np.asarray(self.C2, dtype=float)
        if C1.ndim != 2 or C1.shape[1] != n or C1.shape[0] == 0:
            raise ValueError(f"C1: expected shape (p1>0, {n}), got {C1.shape}")
        if C2.ndim != 2 or C2.shape[1] != n or C2.shape[0] == 0:
            raise ValueError(f"C2: expected shape (p2>0, {n}), got {C2.shape}")
        p1, p2 = C1.shape[0], C2.shape[0]
        mu = np.zeros(n) if self.mu is None else np.asarray(self.mu, dtype=float).reshape(-1)
        if mu.shape != (n,):
            raise ValueError(f"mu: expected length {n}, got shape {np.shape(self.mu)}")
        object.__setattr__(self, "A", frozen(A))
        object.__setattr__(self, "B1", frozen(B1))
        object.__setattr__(self, "B2", frozen(B2))
        object.__setattr__(self, "C1", frozen(C1))
        object.__setattr__(self, "C2", frozen(C2))
        object.__setattr__(self, "Qw", frozen(asmatrix(self.Qw, n, n, "Qw")))
        object.__setattr__(self, "Qv1", frozen(asmatrix(self.Qv1, p1, p1, "Qv1")))
        object.__setattr__(self, "Qv2", frozen(asmatrix(self.Qv2, p2, p2, "Qv2")))
        object.__setattr__(self, "mu", frozen(mu))
        object.__setattr__(self, "sigma", frozen(asmatrix(self.sigma, n, n, "sigma")))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m1(self) -> int:
        return self.B1.shape[1]

    @property
    def m2(self) -> int:
        return self.B2.shape[1]

    @property
    def p1(self) -> int:
        return self.C1.shape[0]

    @property
    def p2(self) -> int:
        return self.C2.shape[0]


@dataclass(frozen=True, eq=False)
class CostWeights:
    """Per-player quadratic weights and the four recursion terminal weights.

    Q1/Q2 weight the state (n x n), S1/S2 weight u1 (m1 x m1), R1/R2 weight
    u2 (m2 x m2).  Omitted terminal weights default to P1_term = I,
    Phi1_term = 0, P2_term = 0, Phi2_term = I, matching the terminal
    conditions of the four backward recursions.
    """

    Q1: np.ndarray
    Q2: np.ndarray
    S1: np.ndarray
    S2: np.ndarray
    R1: np.ndarray
    R2: np.ndarray
    P1_term: np.ndarray | None = None
    Phi1_term: np.ndarray | None = None
    P2_term: np.ndarray | None = None
    Phi2_term: np.ndarray | None = None

    def __post_init__(self):
        Q1 = np.asarray(self.Q1, dtype=float)
        if Q1.ndim != 2 or Q1.shape[0] != Q1.shape[1]:
            raise ValueError(f"Q1: expected a square matrix, got shape {Q1.shape}")
        n = Q1.shape[0]
        S1 = np.asarray(self.S1, dtype=float)
        if S1.ndim != 2 or S1.shape[0] != S1.shape[1]:
            raise ValueError(f"S1: expected a square matrix, got shape {S1.shape}")
        m1 = S1.shape[0]
        R1 = np.asarray(self.R1, dtype=float)
        if R1.ndim != 2 or R1.shape[0] != R1.shape[1]:
            raise ValueError(f"R1: expected a square matrix, got shape {R1.shape}")
        m2 = R1.shape[0]
        object.__setattr__(self, "Q1", frozen(Q1))
        object.__setattr__(self, "Q2", frozen(asmatrix(self.Q2, n, n, "Q2")))
        object.__setattr__(self, "S1", frozen(S1))
        object.__setattr__(self, "S2", frozen(asmatrix(self.S2, m1, m1, "S2")))
        object.__setattr__(self, "R1", frozen(R1))
        object.__setattr__(self, "R2", frozen(asmatrix(self.R2, m2, m2, "R2")))
        defaults = {
            "P1_term": np.eye(n),
            "Phi1_term": np.zeros((n, n)),
            "P2_term": np.zeros((n, n)),
            "Phi2_term": np.eye(n),
        }
        for name, default in defaults.items():
            value = getattr(self, name)
            arr = default if value is None else asmatrix(value, n, n, name)
            object.__setattr__(self, name, frozen(arr))

    @property
    def n(self) -> int:
        return self.Q1.shape[0]


@dataclass(frozen=True, eq=False)
class AugmentedModel:
    """Stacked-input composition used throughout the solver.

    B = [B1 B2] maps the stacked action, C = [C1; C2] stacks the two
    sensors, Qv = blockdiag(Qv1, Qv2), and Gamma_i = diag(S_i, R_i) weights
    the stacked action in player i's cost.
    """

    B: np.ndarray
    C: np.ndarray
    Qv: np.ndarray
    Gamma1: np.ndarray
    Gamma2: np.ndarray
    m1: int
    m2: int
    p1: int
    p2: int


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """A complete game instance: plant, weights, horizon, information mode."""

    system: SystemModel
    weights: CostWeights
    horizon: int
    info: InfoStructure = InfoStructure.ASYMMETRIC

    def __post_init__(self):
        if not isinstance(self.horizon, (int, np.integer)) or self.horizon < 0:
            raise ValueError(f"horizon: expected a nonnegative integer, got {self.horizon!r}")
        object.__setattr__(self, "horizon", int(self.horizon))
        sy, w = self.system, self.weights
        if w.n != sy.n:
            raise ValueError(f"weights dimension {w.n} does not match system dimension {sy.n}")
        if w.S1.shape[0] != sy.m1:
            raise ValueError(f"S1: expected shape ({sy.m1}, {sy.m1}), got {w.S1.shape}")
        if w.R1.shape[0] != sy.m2:
            raise ValueError(f"R1: expected shape ({sy.m2}, {sy.m2}), got {w.R1.shape}")
        if not isinstance(self.info, InfoStructure):
            object.__setattr__(self, "info", InfoStructure(str(self.info).lower()))


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    severity: str  # "fatal" or "warning"
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[CheckResult, ...]

    @property
    def fatal_failures(self) -> tuple[CheckResult, ...]:
        return tuple(c for c in self.checks if not c.passed and c.severity == "fatal")

    @property
    def warnings(self) -> tuple[CheckResult, ...]:
        return tuple(c for c in self.checks if not c.passed and c.severity == "warning")

    @property
    def ok(self) -> bool:
        """True when every check passed (fatal and warning alike)."""
        return all(c.passed for c in self.checks)

    @property
    def solvable(self) -> bool:
        """True when no fatal check failed (finite-horizon solve permitted)."""
        return not self.fatal_failures


def _pbh_rank_ok(A, M, stacked_below, eigenvalues):
    n = A.shape[0]
    for lam in eigenvalues:
        shifted = lam * np.eye(n) - A
        pencil = np.vstack([shifted, M]) if stacked_below else np.hstack([shifted, M])
        if np.linalg.matrix_rank(pencil) < n:
            return False, lam
    return True, None


def _pbh_checks(sys: SystemModel, weights: CostWeights):
    """PBH-style structural checks: stabilizability, detectability, observability."""
    A = sys.A
    eigs = np.linalg.eigvals(A)
    unstable = [lam for lam in eigs if abs(lam) >= 1.0 - 1e-9]
    B = np.hstack([sys.B1, sys.B2])
    C = np.vstack([sys.C1, sys.C2])
    results = []
    for name, M, below, lams in [
        ("stabilizable (A,[B1 B2])", B, False, unstable),
        ("stabilizable (A,B2)", sys.B2, False, unstable),
        ("detectable (A, Q1^{1/2})", psd_sqrt(weights.Q1), True, unstable),
        ("detectable (A, Q2^{1/2})", psd_sqrt(weights.Q2), True, unstable),
        ("observable (A,C1)", sys.C1, True, eigs),
        ("observable (A,C2)", sys.C2, True, eigs),
        ("observable (A,[C1;C2])", C, True, eigs),
    ]:
        ok, lam = _pbh_rank_ok(A, M, below, lams)
        detail = "rank condition holds at every tested eigenvalue" if ok else (
            f"rank deficient at eigenvalue {lam:.6g}"
        )
        results.append(CheckResult(name, ok, "warning", detail))
    return results


def validate(spec: ProblemSpec) -> ValidationReport:
    """Run dimension, symmetry/PSD, and structural checks on a game instance.

    Dimension and (semi)definiteness problems are fatal; stabilizability,
    detectability, and observability failures are warnings (a finite-horizon
    solve is still meaningful, a steady-state solve is refused).
    """
    sys, w = spec.system, spec.weights
    checks: list[CheckResult] = [
        CheckResult(
            "dimensions",
            True,
            "fatal",
            f"n={sys.n} m1={sys.m1} m2={sys.m2} p1={sys.p1} p2={sys.p2} N={spec.horizon}",
        )
    ]

    psd_fields = [
        ("Qw", sys.Qw), ("sigma", sys.sigma),
        ("Q1", w.Q1), ("Q2", w.Q2), ("S1", w.S1), ("S2", w.S2),
        ("R1", w.R1), ("R2", w.R2),
        ("P1_term", w.P1_term), ("Phi1_term", w.Phi1_term),
        ("P2_term", w.P2_term), ("Phi2_term", w.Phi2_term),
    ]
    for name, M in psd_fields:
        symmetric = bool(np.allclose(M, M.T, atol=1e-12 * (1.0 + np.linalg.norm(M))))
        passed = symmetric and is_psd(M)
        detail = f"min eig {min_symmetric_eig(M):.3e}" if symmetric else "not symmetric"
        checks.append(CheckResult(f"{name} symmetric PSD", passed, "fatal", detail))

    for name, M in [("Qv1", sys.Qv1), ("Qv2", sys.Qv2)]:
        passed = bool(np.allclose(M, M.T, atol=1e-12 * (1.0 + np.linalg.norm(M)))) and is_pd(M)
        detail = (
            f"min eig {min_symmetric_eig(M):.3e}"
            if passed
            else f"innovation covariance singular: {name} must be positive definite"
        )
        checks.append(CheckResult(f"{name} symmetric PD", passed, "fatal", detail))

    checks.extend(_pbh_checks(sys, w))
    return ValidationReport(tuple(checks))


def augment(spec: ProblemSpec) -> AugmentedModel:
    """Build the exact block compositions B, C, Qv, Gamma1, Gamma2."""
    sys, w = spec.system, spec.weights
    m1, m2, p1, p2 = sys.m1, sys.m2, sys.p1, sys.p2
    Qv = np.zeros((p1 + p2, p1 + p2))
    Qv[:p1, :p1] = sys.Qv1
    Qv[p1:, p1:] = sys.Qv2

    def stacked_gamma(S, R):
        G = np.zeros((m1 + m2, m1 + m2))
        G[:m1, :m1] = S
        G[m1:, m1:] = R
        return G

    return AugmentedModel(
        B=frozen(np.hstack([sys.B1, sys.B2])),
        C=frozen(np.vstack([sys.C1, sys.C2])),
        Qv=frozen(Qv),
        Gamma1=frozen(stacked_gamma(w.S1, w.R1)),
        Gamma2=frozen(stacked_gamma(w.S2, w.R2)),
        m1=m1, m2=m2, p1=p1, p2=p2,
    )


# ---------------------------------------------------------------------------
# Serialization: a small JSON schema with row-major nested-array matrices.
# ---------------------------------------------------------------------------

_SYSTEM_KEYS = ("A", "B1", "B2", "C1", "C2", "Qw", "Qv1", "Qv2", "sigma")
_WEIGHT_KEYS = ("Q1", "Q2", "S1", "S2", "R1", "R2")
_TERMINAL_KEYS = ("P1_term", "Phi1_term", "P2_term", "Phi2_term")


def _parse_matrix(obj, path):
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise SpecFormatError(f"{path}: expected a nonempty list of rows")
    width = len(obj[0])
    if width == 0 or any(len(r) != width for r in obj):
        raise SpecFormatError(f"{path}: rows must be nonempty and of equal length")
    try:
        return np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SpecFormatError(f"{path}: non-numeric entry ({exc})") from None


def load_spec(text: str) -> ProblemSpec:
    """Parse a JSON problem document into a ProblemSpec.

    Schema: top-level keys ``system`` (A, B1, B2, C1, C2, Qw, Qv1, Qv2,
    optional mu, sigma), ``weights`` (Q1, Q2, S1, S2, R1, R2, optional
    terminal weights), ``horizon``, ``info`` ("asymmetric" | "symmetric").
    Matrices are nested arrays of rows; vectors are flat arrays.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecFormatError(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SpecFormatError("top level: expected an object")
    for key in ("system", "weights", "horizon"):
        if key not in doc:
            raise SpecFormatError(f"missing required key: {key}")

    sys_doc, w_doc = doc["system"], doc["weights"]
    if not isinstance(sys_doc, dict):
        raise SpecFormatError("system: expected an object")
    if not isinstance(w_doc, dict):
        raise SpecFormatError("weights: expected an object")

    sys_kwargs = {}
    for key in _SYSTEM_KEYS:
        if key not in sys_doc:
            raise SpecFormatError(f"missing required key: system.{key}")
        sys_kwargs[key] = _parse_matrix(sys_doc[key], f"system.{key}")
    if "mu" in sys_doc and sys_doc["mu"] is not None:
        mu = sys_doc["mu"]
        if not isinstance(mu, list) or any(isinstance(v, list) for v in mu):
            raise SpecFormatError("system.mu: expected a flat array")
        sys_kwargs["mu"] = np.array(mu, dtype=float)
    else:
        sys_kwargs["mu"] = None

    w_kwargs = {}
    for key in _WEIGHT_KEYS:
        if key not in w_doc:
            raise SpecFormatError(f"missing required key: weights.{key}")
        w_kwargs[key] = _parse_matrix(w_doc[key], f"weights.{key}")
    for key in _TERMINAL_KEYS:
        if key in w_doc and w_doc[key] is not None:
            w_kwargs[key] = _parse_matrix(w_doc[key], f"weights.{key}")

    info_raw = doc.get("info", "asymmetric")
    try:
        info = InfoStructure(str(info_raw).lower())
    except ValueError:
        raise SpecFormatError(
            f"info: expected 'asymmetric' or 'symmetric', got {info_raw!r}"
        ) from None

    horizon = doc["horizon"]
    if not isinstance(horizon, int) or isinstance(horizon, bool) or horizon < 0:
        raise SpecFormatError(f"horizon: expected a nonnegative integer, got {horizon!r}")

    try:
        system = SystemModel(**sys_kwargs)
        weights = CostWeights(**w_kwargs)
        return ProblemSpec(system=system, weights=weights, horizon=horizon, info=info)
    except ValueError as exc:
        raise SpecFormatError(str(exc)) from None


def serialize_spec(spec: ProblemSpec) -> str:
    """Serialize a ProblemSpec to the JSON document format of load_spec."""
    sys, w = spec.system, spec.weights
    doc = {
        "system": {
            **{key: getattr(sys, key).tolist() for key in _SYSTEM_KEYS},
            "mu": sys.mu.tolist(),
        },
        "weights": {
            **{key: getattr(w, key).tolist() for key in _WEIGHT_KEYS},
            **{key: getattr(w, key).tolist() for key in _TERMINAL_KEYS},
        },
        "horizon": spec.horizon,
        "info": spec.info.value,
    }
    return json.dumps(doc, indent=2)


def benchmark_example() -> ProblemSpec:
    """The built-in two-sensor benchmark instance (n = m1 = m2 = p1 = p2 = 2).

    Controller 1 measures only the first state coordinate (second sensor row
    zero, relatively noisy); controller 2 has an accurate full-state sensor,
    so the information asymmetry is pronounced.  Horizon N = 50.
    """
    system = SystemModel(
        A=[[0.98, 0.05], [0.02, 0.96]],
        B1=[[0.40, 0.0], [0.0, 0.30]],
        B2=[[0.35, 0.0], [0.0, 0.40]],
        C1=[[1.0, 0.0], [0.0, 0.0]],
        C2=[[1.0, 0.0], [0.0, 1.0]],
        Qw=[[0.06, 0.0], [0.0, 0.06]],
        Qv1=[[0.3, 0.0], [0.0, 0.3]],
        Qv2=[[0.01, 0.0], [0.0, 0.01]],
        mu=[0.0, 0.0],
        sigma=[[0.1, 0.0], [0.0, 0.1]],
    )
    weights = CostWeights(
        Q1=2.0 * np.eye(2), Q2=2.0 * np.eye(2),
        S1=1.0 * np.eye(2), S2=1.0 * np.eye(2),
        R1=2.0 * np.eye(2), R2=2.0 * np.eye(2),
    )
    return ProblemSpec(system=system, weights=weights, horizon=50)
