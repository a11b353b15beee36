"""Command-line front end.

Exit codes: 0 success, 1 negative verdict (infeasible, rank-deficient data,
failed verification), 2 usage error, 3 solver or numerical failure.  Every
subcommand writes its JSON result to ``--out`` when given and prints a short
summary.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import adversarial, certificates, experiments
from . import data as data_api
from . import io
from .fixtures import bench_data, bench_system, example1
from .lti import ClosedLoopSystem, frequency_response_norm, rho_to_delta, spectral_radius
from .sdp import SolverOptions

OK, NEGATIVE, USAGE, NUMERICAL = 0, 1, 2, 3
EXAMPLE1_K = (0.0, 1.0, 1e3, 1e6)


class UsageError(Exception):
    pass


def _options(args):
    return SolverOptions(eps_margin=args.eps_margin, tol_feas=args.tol)


def _load(args):
    if args.input is None:
        raise UsageError("--in is required for this subcommand")
    path = Path(args.input)
    if not path.exists():
        raise UsageError(f"input file not found: {path}")
    try:
        return io.read_json(path)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from exc


def _problem(args):
    try:
        data, B, bound, A = io.load_problem(_load(args))
    except (KeyError, ValueError) as exc:
        raise UsageError(f"malformed data document: {exc}") from exc
    return data, B, bound, A, data_api.build_ellipsoid(data, B, bound)


def _read_cert(path):
    """Certificate document, either bare or nested under ``certificate`` as ``coarsest`` writes it."""
    path = Path(path)
    if not path.exists():
        raise UsageError(f"certificate file not found: {path}")
    try:
        doc = io.read_json(path)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from exc
    doc = doc.get("certificate", doc)
    if "K" not in doc:
        raise UsageError(f"{path}: no certificate found")
    return doc


def _verification(cert, ell, B, args):
    if data_api.center_and_radius(ell) is None:
        return {"passed": None, "reason": "uncertainty set is unbounded"}
    return certificates.verify_certificate(cert, ell, B, count=args.samples, seed=args.seed,
                                           method=args.method)


def cmd_simulate(args):
    doc = _load(args) if args.input else {}
    if "A" in doc:
        system = io.system_from_dict(doc)
    else:
        system = bench_system(corrected=args.corrected)
    T = int(doc.get("T", args.horizon))
    omega = float(doc.get("omega", args.omega))
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 0]))
    noise = experiments.sample_ball_noise(system.n, omega, T, rng)
    data = bench_data(system, T=T, seed=args.seed, noise=noise)
    out = {**io.system_to_dict(system), **io.data_to_dict(data),
           "noise_bound": {"ball_squared_radius": omega, "T": T}}
    return OK, out, f"simulated T={T} samples, omega={omega:g}"


def cmd_check_data(args):
    data, B, bound, _, ell = _problem(args)
    report = adversarial.informativity_report(data, ell)
    report["kernel_inclusion"] = data_api.kernel_inclusion(ell)
    good = report["rank_condition"] and report["slater"] and report["sigma_bounded"]
    return (OK if good else NEGATIVE), report, (
        f"rank {report['rank']} of {report['n']}, slater {report['slater']}, "
        f"bounded {report['sigma_bounded']}")


def cmd_stabilize(args):
    if args.delta is None and args.rho is None:
        raise UsageError("stabilize needs --delta or --rho")
    delta = args.delta if args.delta is not None else rho_to_delta(args.rho)
    if not 0.0 < delta < 1.0:
        raise UsageError(f"sector radius must lie in (0, 1), got {delta}")
    data, B, bound, _, ell = _problem(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        cert = certificates.solve_fixed_density(ell, B, delta, _options(args))
    out = io.certificate_to_dict(cert, _verification(cert, ell, B, args))
    out["warnings"] = [str(w.message) for w in caught]
    return OK, out, f"certificate at delta={delta:.6g}, K={np.array2string(cert.K[0], precision=6)}"


def cmd_coarsest(args):
    data, B, bound, A, ell = _problem(args)
    res = certificates.maximize_density(ell, B, _options(args), check_slater=False)
    out = {
        "delta_sq": res.delta_sq,
        "delta_star": res.delta_star,
        "rho_star": res.rho_star,
        "slater": data_api.slater_check(ell),
        "solver_stats": io.stable_stats(res.solver_stats),
        "certificate": io.certificate_to_dict(res.certificate,
                                              _verification(res.certificate, ell, B, args)),
    }
    if A is not None:
        out["mahler_bound"] = 1.0 / certificates.mahler_measure(A)
    return OK, out, f"delta*={res.delta_star:.6g} (delta^2={res.delta_sq:.6g}), rho*={res.rho_star:.6g}"


def _gain(args, doc):
    if "K" in doc:
        return np.array(doc["K"], dtype=float)
    if args.cert:
        return np.array(_read_cert(args.cert)["K"], dtype=float)
    raise UsageError("hinf needs a gain: K in the input document or --cert")


def cmd_hinf(args):
    doc = _load(args)
    system = io.system_from_dict(doc)
    K = _gain(args, doc).reshape(1, -1)
    rho_cl = spectral_radius(system.A + system.B @ K)
    out = {"spectral_radius": rho_cl, "mahler": certificates.mahler_measure(system.A)}
    if rho_cl >= 1.0 - 1e-9:
        out.update(stable=False, bisection=None, frequency=None)
        return NEGATIVE, out, "closed loop is not Schur stable: H-infinity norm undefined"
    out["stable"] = True
    out["bisection"] = certificates.hinf_norm_bisection(system.A, system.B, K, options=_options(args))
    out["frequency"] = frequency_response_norm(ClosedLoopSystem(system, K))
    return OK, out, f"H-infinity norm {out['bisection']:.6g} (frequency grid {out['frequency']:.6g})"


def cmd_verify(args):
    if not args.cert:
        raise UsageError("verify needs --cert")
    data, B, bound, _, ell = _problem(args)
    try:
        cert = io.certificate_from_dict(_read_cert(args.cert))
    except KeyError as exc:
        raise UsageError(f"{args.cert}: certificate is missing {exc}") from exc
    report = _verification(cert, ell, B, args)
    report["synthesis_residual"] = certificates.synthesis_residual(cert, ell, B)
    passed = bool(report.get("passed"))
    return (OK if passed else NEGATIVE), report, f"verification {'passed' if passed else 'FAILED'}"


def _witness_doc(w, ell):
    return {
        "rank": w.rank,
        "construction": w.construction,
        "k": w.k_scale,
        "E": w.E,
        "Lambda": w.Lambda,
        "A0": w.A0,
        "A_bar": w.matrix(),
        "spectral_radius": w.spectral_radius,
        "member": data_api.membership(ell, w.matrix()),
    }


def cmd_witness(args):
    data, B, bound, _, ell = _problem(args)
    try:
        w = adversarial.build_witness(ell, data, args.k)
    except ValueError as exc:
        return NEGATIVE, {"witness": None, "message": str(exc)}, str(exc)
    if w == adversarial.FULL_RANK:
        return NEGATIVE, {"witness": adversarial.FULL_RANK}, "data have full rank: no witness"
    return OK, {"witness": _witness_doc(w, ell)}, (
        f"witness at k={w.k_scale:g}: spectral radius {w.spectral_radius:.6g}")


def cmd_example1(args):
    data, B, bound = example1()
    ell = data_api.build_ellipsoid(data, B, bound)
    members = {repr(k): data_api.membership(ell, np.array([[0.0, k], [0.0, 0.0]])) for k in EXAMPLE1_K}
    w = adversarial.build_witness(ell, data, args.k)
    out = {
        "N": ell.N,
        "membership": members,
        "rank_condition": data_api.rank_condition(data),
        "sigma_bounded": data_api.center_and_radius(ell) is not None,
        "witness": _witness_doc(w, ell),
    }
    return NEGATIVE, out, (f"nilpotent family consistent for k in {list(EXAMPLE1_K)}: "
                           f"{all(members.values())}; rank condition fails; "
                           f"witness spectral radius {w.spectral_radius:.6g}")


def _sweep_config(args):
    doc = _load(args) if args.input else {}
    try:
        base = experiments.ExperimentConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad sweep config: {exc}") from exc
    overrides = {"master_seed": args.seed, "workers": args.workers}
    if args.paper_scale:
        overrides["trials"] = 1000
    elif args.trials is not None:
        overrides["trials"] = args.trials
    if args.source:
        overrides["system_source"] = args.source
    cfg = experiments.ExperimentConfig.from_dict({**base.to_dict(), **overrides})
    return cfg


def _sweep(args, runner, label):
    cfg = _sweep_config(args)
    records = runner(cfg)
    summary = [{"grid_value": r.grid_value, "feasible_fraction": r.feasible_fraction,
                "mean_delta_sq": r.mean_delta_sq, "slater_pass_fraction": r.slater_pass_fraction,
                "trials": r.trials} for r in records]
    out = {"config": cfg.to_dict(), "records": summary}
    if args.out:
        csv_path = Path(args.out).with_suffix(".csv")
        experiments.emit_plot_data(records, csv_path.with_name(csv_path.stem + ".plot.csv"), cfg.to_dict())
    lines = [f"{label}={s['grid_value']:<10.4g} feasible={s['feasible_fraction']:.2f} "
             f"mean_d={'-' if s['mean_delta_sq'] is None else format(s['mean_delta_sq'], '.4g')}"
             for s in summary]
    return OK, out, "\n".join(lines)


def cmd_sweep_noise(args):
    return _sweep(args, experiments.run_noise_sweep, "omega")


def cmd_sweep_prior(args):
    return _sweep(args, experiments.run_prior_sweep, "zeta")


COMMANDS = {
    "simulate": (cmd_simulate, "simulate an open-loop experiment"),
    "check-data": (cmd_check_data, "rank, Slater and boundedness diagnostics"),
    "stabilize": (cmd_stabilize, "certificate at a fixed density"),
    "coarsest": (cmd_coarsest, "coarsest density admitting a common stabilizer"),
    "hinf": (cmd_hinf, "H-infinity norm of a closed loop"),
    "verify": (cmd_verify, "re-check a saved certificate against saved data"),
    "witness": (cmd_witness, "unstable consistent plants for rank-deficient data"),
    "sweep-noise": (cmd_sweep_noise, "Monte Carlo sweep over the noise level"),
    "sweep-prior": (cmd_sweep_prior, "Monte Carlo sweep over the prior inflation"),
    "example1": (cmd_example1, "two-state rank-deficient data set"),
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--in", dest="input", help="input JSON document")
    common.add_argument("--out", help="write the JSON result here")
    common.add_argument("--seed", type=int, default=None,
                        help="master seed (default: $QUANTSTAB_SEED or 0)")
    common.add_argument("--eps-margin", type=float, default=1e-6, help="margin for strict LMIs")
    common.add_argument("--tol", type=float, default=1e-8, help="feasibility re-check tolerance")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="quantstab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    p = {name: sub.add_parser(name, parents=[common], help=text, description=text)
         for name, (_, text) in COMMANDS.items()}

    p["simulate"].add_argument("--omega", type=float, default=0.0, help="squared noise radius")
    p["simulate"].add_argument("--horizon", type=int, default=20)
    p["simulate"].add_argument("--corrected", action="store_true",
                               help="use the corrected benchmark matrix")
    group = p["stabilize"].add_mutually_exclusive_group()
    group.add_argument("--delta", type=float)
    group.add_argument("--rho", type=float)
    for name in ("stabilize", "coarsest", "verify"):
        p[name].add_argument("--samples", type=int, default=50, help="sampled plants to verify on")
        p[name].add_argument("--method", choices=("frequency", "bisection"), default="frequency")
    for name in ("hinf", "verify"):
        p[name].add_argument("--cert", help="certificate JSON")
    for name in ("witness", "example1"):
        p[name].add_argument("--k", type=float, default=adversarial.WITNESS_K)
    for name in ("sweep-noise", "sweep-prior"):
        p[name].add_argument("--trials", type=int)
        p[name].add_argument("--paper-scale", "--full-scale", dest="paper_scale", action="store_true",
                             help="1000 trials per grid point")
        p[name].add_argument("--source", choices=experiments.SOURCES)
        p[name].add_argument("--workers", type=int, default=1)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code not in (0, None) else OK
    if args.seed is None:
        args.seed = experiments.seed_from_env()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    handler = COMMANDS[args.command][0]
    try:
        code, result, summary = handler(args)
    except UsageError as exc:
        print(f"quantstab {args.command}: {exc}", file=sys.stderr)
        return USAGE
    except certificates.Infeasible as exc:
        code, result, summary = NEGATIVE, {"status": "infeasible", "message": str(exc),
                                           "solver_stats": io.stable_stats(exc.stats)}, str(exc)
    except certificates.SynthesisError as exc:
        code, result, summary = NUMERICAL, {"status": "numerical-failure", "message": str(exc),
                                            "solver_stats": io.stable_stats(exc.stats)}, str(exc)
    except (np.linalg.LinAlgError, RuntimeError) as exc:
        code, result, summary = NUMERICAL, {"status": "numerical-failure", "message": str(exc)}, str(exc)
    except ValueError as exc:
        print(f"quantstab {args.command}: {exc}", file=sys.stderr)
        return USAGE

    if args.out:
        io.write_json(result, args.out)
    else:
        sys.stdout.write(io.dumps(result))
    print(summary, file=sys.stderr if not args.out else sys.stdout)
    return code


if __name__ == "__main__":
    sys.exit(main())
