"""Command-line front end: solve, steady, compare, verify, figures.

Every subcommand loads a problem description (JSON via --config, or the
built-in benchmark), runs one pipeline, writes CSV artifacts atomically
(temp file + rename), and exits with a contract code:

    0  success
    1  the problem description failed validation
    2  an iteration failed to converge or a linear solve was ill-conditioned
    3  a verification gate failed (certificate, ordering, or property check)
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import os
import sys
import tempfile

import numpy as np

from . import equilibrium, filters, model, montecarlo, riccati
from ._linalg import ConvergenceError, NumericalError
from .equilibrium import ProfileKind, StrategyProfile
from .model import SpecFormatError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_VERIFICATION = 3

# Published costs the compare artifact is reported against, in the order
# (J1 symmetric, J2 symmetric, J1 asymmetric, J2 asymmetric).  Report-only:
# deltas are printed, never gated on.
REFERENCE_COSTS = (24.4764, 25.1805, 27.3403, 28.6230)

_EPILOG = """exit codes:
  0  success
  1  validation failure (bad dimensions, indefinite weights, singular noise)
  2  numerical failure (no convergence, ill-conditioned solve)
  3  verification failure (certificate, cost ordering, or property gate)
"""


def _write_csv(path, header, rows):
    """Write atomically so a crash never leaves a truncated artifact."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _load_spec(args):
    if args.config is not None:
        with open(args.config, "r", encoding="utf-8") as fh:
            spec = model.load_spec(fh.read())
    else:
        spec = model.benchmark_example()
    if getattr(args, "horizon", None) is not None:
        spec = dataclasses.replace(spec, horizon=args.horizon)
    return spec


def _gate_validation(spec, escalate_warnings=False):
    """Print validation findings; return an exit code to stop with, or None."""
    report = model.validate(spec)
    for check in report.checks:
        if not check.passed:
            print(f"validation {check.severity}: {check.name}: {check.detail}",
                  file=sys.stderr)
    if report.fatal_failures:
        return EXIT_VALIDATION
    if escalate_warnings and report.warnings:
        print("validation warnings escalated to failure", file=sys.stderr)
        return EXIT_VALIDATION
    return None


def _out(args, name):
    return os.path.join(args.out, name)


def _fmt(x) -> str:
    """Full-precision decimal form of a scalar, safe for any numpy type."""
    return repr(float(x))


def _matrix_rows(name, matrix):
    for i in range(matrix.shape[0]):
        for j in range(matrix.shape[1]):
            yield (name, i, j, _fmt(matrix[i, j]))


def cmd_solve(args) -> int:
    spec = _load_spec(args)
    code = _gate_validation(spec)
    if code is not None:
        return code
    aug = model.augment(spec)
    rt = riccati.backward(spec.system.A, aug, spec.weights, spec.horizon)
    sched = filters.covariance_forward(aug, spec.system, rt.K2, spec.horizon)
    profile = StrategyProfile(K1=rt.K1, K2=rt.K2, m1=aug.m1)
    report = equilibrium.analytic_cost_asym(spec, rt, sched)
    j1_oracle, j2_oracle = montecarlo.moment_oracle(spec, profile, sched)

    written = []
    written.append(_write_csv(
        _out(args, "riccati.csv"), ["k", "matrix", "i", "j", "value"],
        ((k, name, i, j, _fmt(v)) for k, name, i, j, v in riccati.trajectory_rows(rt))))
    gain_rows = []
    for k in range(spec.horizon + 1):
        for name, gain in (("K1", rt.K1[k]), ("K2", rt.K2[k])):
            for i in range(gain.shape[0]):
                for j in range(gain.shape[1]):
                    gain_rows.append((k, name, i, j, _fmt(gain[i, j])))
    written.append(_write_csv(
        _out(args, "gains.csv"), ["k", "gain", "i", "j", "value"], gain_rows))
    written.append(_write_csv(
        _out(args, "covariances.csv"),
        ["k", "tr_sigma1_pred", "tr_sigma2_pred", "min_eig_gap"],
        ((k, _fmt(tr1), _fmt(tr2), _fmt(eig))
         for k, eig, tr1, tr2 in filters.covariance_gap(sched))))
    written.append(_write_csv(
        _out(args, "costs.csv"), ["quantity", "value"],
        [("j1_analytic", _fmt(report.J1)),
         ("j2_analytic", _fmt(report.J2)),
         ("j2_displayed", _fmt(report.terms["j2_displayed"])),
         ("j1_oracle", _fmt(j1_oracle)),
         ("j2_oracle", _fmt(j2_oracle))]))
    for path in written:
        print(f"wrote {path}")
    print(f"J1={report.J1:.6f} J2={report.J2:.6f} "
          f"(oracle {j1_oracle:.6f}, {j2_oracle:.6f})")
    return EXIT_OK


def cmd_steady(args) -> int:
    spec = _load_spec(args)
    code = _gate_validation(spec, escalate_warnings=True)
    if code is not None:
        return code
    aug = model.augment(spec)
    sr = riccati.forward_steady(spec.system.A, aug, spec.weights,
                                tol=args.tol, max_iter=args.max_iter)
    S1, S2, G1, G2 = filters.steady_covariances(aug, spec.system, sr.K2,
                                                tol=args.tol,
                                                max_iter=max(args.max_iter, 10000))
    rho_full, rho_private = riccati.closed_loop_spectra(spec.system.A, sr, aug)

    rows = []
    for name, matrix in (("P1", sr.P1), ("Phi1", sr.Phi1), ("P2", sr.P2),
                         ("Phi2", sr.Phi2), ("K1", sr.K1), ("K2", sr.K2),
                         ("Sigma1", S1), ("Sigma2", S2), ("G1", G1), ("G2", G2)):
        rows.extend(_matrix_rows(name, matrix))
    rows.append(("iterations", 0, 0, _fmt(sr.iterations)))
    rows.append(("residual", 0, 0, _fmt(sr.residual)))
    rows.append(("spectral_radius_full", 0, 0, _fmt(rho_full)))
    rows.append(("spectral_radius_private", 0, 0, _fmt(rho_private)))
    path = _write_csv(_out(args, "steady.csv"),
                      ["name", "i", "j", "value"], rows)
    print(f"wrote {path}")
    print(f"converged in {sr.iterations} iterations, residual {sr.residual:.3e}, "
          f"spectral radii {rho_full:.4f} / {rho_private:.4f}")
    return EXIT_OK


def cmd_compare(args) -> int:
    spec = _load_spec(args)
    code = _gate_validation(spec)
    if code is not None:
        return code
    aug = model.augment(spec)
    rt = riccati.backward(spec.system.A, aug, spec.weights, spec.horizon)
    sched = filters.covariance_forward(aug, spec.system, rt.K2, spec.horizon)
    nash = StrategyProfile(K1=rt.K1, K2=rt.K2, m1=aug.m1)
    symmetric = StrategyProfile(K1=rt.K1, K2=np.zeros_like(rt.K2), m1=aug.m1,
                                kind=ProfileKind.SYMMETRIC)

    asym_report = equilibrium.analytic_cost_asym(spec, rt, sched)
    sym_sched = filters.covariance_forward(aug, spec.system,
                                           np.zeros_like(rt.K2), spec.horizon)
    sym_report = equilibrium.analytic_cost_sym(spec, rt, sym_sched)
    oracle_asym = montecarlo.moment_oracle(spec, nash, sched)
    oracle_sym = montecarlo.moment_oracle(spec, symmetric, sym_sched)
    mc_asym = montecarlo.estimate_costs(spec, nash, args.runs, args.seed,
                                        schedule=sched)
    mc_sym = montecarlo.estimate_costs(spec, symmetric, args.runs, args.seed,
                                       schedule=sym_sched)
    gap = equilibrium.gap_decomposition(spec, rt, sched)

    quantities = (
        ("j1_symmetric", sym_report.J1, oracle_sym[0], mc_sym.J1, mc_sym.stderr1),
        ("j2_symmetric", sym_report.J2, oracle_sym[1], mc_sym.J2, mc_sym.stderr2),
        ("j1_asymmetric", asym_report.J1, oracle_asym[0], mc_asym.J1, mc_asym.stderr1),
        ("j2_asymmetric", asym_report.J2, oracle_asym[1], mc_asym.J2, mc_asym.stderr2),
    )
    table_rows = []
    for (name, analytic, oracle, mc_mean, mc_stderr), ref in zip(quantities,
                                                                 REFERENCE_COSTS):
        table_rows.append((name, _fmt(analytic), _fmt(oracle), _fmt(mc_mean),
                           _fmt(mc_stderr), _fmt(ref), _fmt(oracle - ref)))
    written = [_write_csv(
        _out(args, "cost_table.csv"),
        ["quantity", "analytic", "oracle", "mc_mean", "mc_stderr",
         "reference", "delta_vs_reference"],
        table_rows)]
    written.append(_write_csv(
        _out(args, "gap.csv"), ["term", "value"],
        [(f.name, _fmt(getattr(gap, f.name))) for f in dataclasses.fields(gap)]))
    for path in written:
        print(f"wrote {path}")

    violations = []
    for label, asym_cost, sym_cost in (("J1", oracle_asym[0], oracle_sym[0]),
                                       ("J2", oracle_asym[1], oracle_sym[1])):
        margin = asym_cost - sym_cost
        if margin < -1e-6 * (1.0 + abs(asym_cost)):
            violations.append(f"{label}: asymmetric {asym_cost:.6f} < "
                              f"symmetric {sym_cost:.6f}")
    print(f"cost of asymmetry: J1 {oracle_asym[0] - oracle_sym[0]:+.6f}, "
          f"J2 {oracle_asym[1] - oracle_sym[1]:+.6f}; "
          f"gap split residual {gap.residual:+.6f}")
    if violations:
        for v in violations:
            print(f"ordering violation: {v}", file=sys.stderr)
        return EXIT_VERIFICATION
    return EXIT_OK


def _verify_profile(spec, aug, rt, kind):
    if kind == "nash":
        return StrategyProfile(K1=rt.K1, K2=rt.K2, m1=aug.m1)
    if kind == "symmetric":
        return StrategyProfile(K1=rt.K1, K2=np.zeros_like(rt.K2), m1=aug.m1,
                               kind=ProfileKind.SYMMETRIC)
    if kind == "zero":
        return StrategyProfile(K1=np.zeros_like(rt.K1),
                               K2=np.zeros_like(rt.K2), m1=aug.m1)
    raise ValueError(f"unknown profile kind: {kind}")


def cmd_verify(args) -> int:
    spec = _load_spec(args)
    code = _gate_validation(spec)
    if code is not None:
        return code
    aug = model.augment(spec)
    rt = riccati.backward(spec.system.A, aug, spec.weights, spec.horizon)
    profile = _verify_profile(spec, aug, rt, args.profile)
    is_sym = profile.kind is ProfileKind.SYMMETRIC
    K2_cov = np.zeros_like(profile.K2) if is_sym else profile.K2
    sched = filters.covariance_forward(aug, spec.system, K2_cov, spec.horizon)

    rows = []  # (check, detail, value, threshold, passed)

    if not is_sym:
        gap_rows = filters.covariance_gap(sched)
        k_min, eig_min, _, _ = min(gap_rows, key=lambda r: r[1])
        rows.append(("covariance_min_eig", f"k={k_min}", eig_min, -1e-8,
                     eig_min >= -1e-8))
        for stat in montecarlo.orthogonality_stats(spec, profile, args.runs,
                                                   args.seed):
            rows.append(("orthogonality", stat.name, stat.max_normalized,
                         stat.threshold, stat.passed))

    oracle = montecarlo.moment_oracle(spec, profile, sched)
    if args.profile == "nash":
        report = equilibrium.analytic_cost_asym(spec, rt, sched)
    elif args.profile == "symmetric":
        report = equilibrium.analytic_cost_sym(spec, rt, sched)
    else:
        report = None
    if report is not None:
        for label, analytic, exact in (("J1", report.J1, oracle[0]),
                                       ("J2", report.J2, oracle[1])):
            rel = abs(analytic - exact) / (1.0 + abs(exact))
            rows.append(("oracle_agreement", f"{label}_rel_err", rel, 1e-6,
                         rel <= 1e-6))

    mc = montecarlo.estimate_costs(spec, profile, args.runs, args.seed,
                                   schedule=sched)
    for label, mean, stderr, exact in (("J1", mc.J1, mc.stderr1, oracle[0]),
                                       ("J2", mc.J2, mc.stderr2, oracle[1])):
        z = abs(mean - exact) / stderr if stderr > 0 else 0.0
        rows.append(("mc_agreement", f"{label}_zscore", z, 3.0, z <= 3.0))

    cert = montecarlo.best_response_certificate(
        spec, profile, epsilons=(args.epsilon,), M=args.runs, seed=args.seed)
    for res in cert.results:
        rows.append(("certificate", f"player{res.player} {res.label}",
                     res.delta_j, -3.0 * res.stderr, res.passed))
    for note in cert.notes:
        print(f"note: {note}")

    path = _write_csv(_out(args, "verify.csv"),
                      ["check", "detail", "value", "threshold", "passed"],
                      ((c, d, _fmt(v), _fmt(t), p) for c, d, v, t, p in rows))
    print(f"wrote {path}")
    failures = [(c, d, v, t) for c, d, v, t, p in rows if not p]
    for c, d, v, t in failures:
        print(f"FAILED {c} [{d}]: value {v:.6e} vs threshold {t:.6e}",
              file=sys.stderr)
    print(f"{len(rows) - len(failures)}/{len(rows)} checks passed")
    return EXIT_VERIFICATION if failures else EXIT_OK


def cmd_figures(args) -> int:
    spec = _load_spec(args)
    code = _gate_validation(spec)
    if code is not None:
        return code
    aug = model.augment(spec)
    rt = riccati.backward(spec.system.A, aug, spec.weights, spec.horizon)
    sched = filters.covariance_forward(aug, spec.system, rt.K2, spec.horizon)
    profile = StrategyProfile(K1=rt.K1, K2=rt.K2, m1=aug.m1)
    traj = montecarlo.simulate(spec, profile, args.seed, schedule=sched)

    written = []
    for fname, names in (("fig_riccati1.csv", ("P1", "Phi1")),
                         ("fig_riccati2.csv", ("P2", "Phi2"))):
        rows = []
        for name in names:
            arr = getattr(rt, name)
            for k in range(arr.shape[0]):
                for i in range(arr.shape[1]):
                    for j in range(arr.shape[2]):
                        rows.append((k, name, i, j, _fmt(arr[k, i, j])))
        written.append(_write_csv(_out(args, fname),
                                  ["k", "matrix", "i", "j", "value"], rows))
    gain_rows = []
    for k in range(spec.horizon + 1):
        for name in ("K1", "K2"):
            arr = getattr(rt, name)[k]
            for i in range(arr.shape[0]):
                for j in range(arr.shape[1]):
                    gain_rows.append((k, name, i, j, _fmt(arr[i, j])))
    written.append(_write_csv(_out(args, "fig_gains.csv"),
                              ["k", "gain", "i", "j", "value"], gain_rows))
    header, rows = montecarlo.trajectory_table(traj)
    written.append(_write_csv(_out(args, "fig_trajectory.csv"), header, rows))
    written.append(_write_csv(
        _out(args, "fig_sigma_trace.csv"),
        ["k", "tr_sigma1_pred", "tr_sigma2_pred"],
        ((k, _fmt(tr1), _fmt(tr2))
         for k, _, tr1, tr2 in filters.covariance_gap(sched))))
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def _add_common(sub):
    sub.add_argument("--config", metavar="PATH", default=None,
                     help="JSON problem description (default: built-in benchmark)")
    sub.add_argument("--out", metavar="DIR", default=".",
                     help="directory for CSV artifacts (default: cwd)")
    sub.add_argument("--horizon", type=int, default=None, metavar="N",
                     help="override the horizon from the config")
    sub.add_argument("--seed", type=int, default=0, metavar="S",
                     help="base seed for all sampling (default: 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dilqg",
        description="Solve, verify, and export a two-controller LQG game "
                    "with one-step-delayed, nested measurement sharing.",
        epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("solve", epilog=_EPILOG,
                          formatter_class=argparse.RawDescriptionHelpFormatter,
                          help="finite-horizon gains, covariances, and costs")
    _add_common(sub)
    sub.set_defaults(func=cmd_solve)

    sub = subs.add_parser("steady", epilog=_EPILOG,
                          formatter_class=argparse.RawDescriptionHelpFormatter,
                          help="stationary gains and covariances by fixed-point iteration")
    _add_common(sub)
    sub.add_argument("--tol", type=float, default=1e-10,
                     help="relative fixed-point tolerance (default: 1e-10)")
    sub.add_argument("--max-iter", type=int, default=2000,
                     help="iteration budget (default: 2000)")
    sub.set_defaults(func=cmd_steady)

    sub = subs.add_parser("compare", epilog=_EPILOG,
                          formatter_class=argparse.RawDescriptionHelpFormatter,
                          help="cost comparison across information patterns")
    _add_common(sub)
    sub.add_argument("--runs", type=int, default=2000, metavar="M",
                     help="Monte Carlo sample size (default: 2000)")
    sub.set_defaults(func=cmd_compare)

    sub = subs.add_parser("verify", epilog=_EPILOG,
                          formatter_class=argparse.RawDescriptionHelpFormatter,
                          help="property suite: covariances, orthogonality, "
                               "certificate, oracle agreement")
    _add_common(sub)
    sub.add_argument("--runs", type=int, default=5000, metavar="M",
                     help="Monte Carlo sample size (default: 5000)")
    sub.add_argument("--profile", choices=("nash", "symmetric", "zero"),
                     default="nash",
                     help="candidate profile to certify (default: nash)")
    sub.add_argument("--epsilon", type=float, default=1e-2,
                     help="gain perturbation size for the certificate")
    sub.set_defaults(func=cmd_verify)

    sub = subs.add_parser("figures", epilog=_EPILOG,
                          formatter_class=argparse.RawDescriptionHelpFormatter,
                          help="plottable CSV exports of the solution")
    _add_common(sub)
    sub.set_defaults(func=cmd_figures)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpecFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ConvergenceError, NumericalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
