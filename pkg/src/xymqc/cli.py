"""Command-line front end.

Subcommands: rdm, sweep, fit, factorize, boundscan, fidelity, verify.
CSV/JSON outputs are written atomically and start with a metadata header
carrying the tool version, the full canonical config, and a timestamp
(SOURCE_DATE_EPOCH is honored so runs can be made bit-reproducible).

Exit codes: 0 success, 1 computational failure, 2 usage, 3 I/O.
"""

import argparse
import json
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__, analysis, edsim
from .xychain import (
    ModelParams,
    SpinGeometry,
    factorization_lambda,
    rdm3,
    correlation_table,
)

EXIT_OK = 0
EXIT_COMPUTE = 1
EXIT_USAGE = 2
EXIT_IO = 3

CSV_FIELDS = [
    "lambda", "gamma", "alpha", "beta", "L",
    "n3", "t3", "tau_ub", "tau_lb",
    "neg_i", "neg_j", "neg_k", "c_alpha", "status",
]


class UsageError(ValueError):
    pass


def _timestamp():
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch else time.time()
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


def _canonical_config(args):
    skip = {"func", "output"}
    items = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    return json.dumps(items, default=str, sort_keys=True)


def _header_lines(args):
    return [
        f"# xymqc {__version__}",
        f"# config {_canonical_config(args)}",
        f"# generated {_timestamp()}",
    ]


def _write_atomic(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".xymqc-")
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise IOError(f"cannot write {path}: {exc}") from exc


def _emit(args, text):
    if getattr(args, "output", None):
        _write_atomic(args.output, text)
        print(f"wrote {args.output}")
    else:
        sys.stdout.write(text)


def _model_params(args, require_chain=True):
    length = None
    if getattr(args, "length", None) is not None and args.infinite:
        raise UsageError("--L and --infinite are mutually exclusive")
    if getattr(args, "length", None) is not None:
        if args.length % 2 == 0 or args.length < 5:
            raise UsageError(f"--L must be odd and >= 5, got {args.length}")
        length = args.length
    elif not args.infinite and require_chain:
        raise UsageError("specify either --L <odd int> or --infinite")
    return length


def _fmt(x):
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    return repr(float(x))


def _csv_text(args, rows):
    lines = _header_lines(args)
    lines.append(",".join(CSV_FIELDS))
    for r in rows:
        lines.append(",".join(
            r[f] if f == "status" else _fmt(r[f]) for f in CSV_FIELDS
        ))
    return "\n".join(lines) + "\n"


def _sweep_rows(args, gamma, alpha, beta, lambdas, length, with_sdp, workers):
    table = analysis.sweep(gamma, alpha, beta, lambdas, length=length,
                           with_sdp=with_sdp, workers=workers)
    rows = []
    for k, lam in enumerate(table.lambdas):
        row = {
            "lambda": lam, "gamma": gamma, "alpha": alpha, "beta": beta,
            "L": length if length is not None else "inf",
            "status": table.columns["status"][k],
        }
        for col in ("n3", "t3", "tau_ub", "tau_lb",
                    "neg_i", "neg_j", "neg_k", "c_alpha"):
            row[col] = table.columns[col][k]
        rows.append(row)
    return rows, table


def _validated_setup(args, length):
    """Domain validation of params/geometry; violations are usage errors."""
    try:
        params = ModelParams(args.lam if hasattr(args, "lam") else 0.0,
                             args.gamma, length)
        geom = SpinGeometry(args.alpha, args.beta)
        geom.validate_for(params)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return params, geom


def cmd_rdm(args):
    length = _model_params(args)
    params, geom = _validated_setup(args, length)
    rho = rdm3(geom, params)
    table = correlation_table(params)
    span = geom.span
    g_vals = {r: table.g(r) for r in range(-span, span + 1)}
    eigs = np.linalg.eigvalsh(rho.matrix)[::-1]
    lines = _header_lines(args)
    lines.append(
        f"# lambda={args.lam} gamma={args.gamma} "
        f"L={'inf' if length is None else length} alpha={args.alpha} beta={args.beta}"
    )
    lines.append("# g_r: " + " ".join(f"g({r})={v:.12f}" for r, v in g_vals.items()))
    for i in range(8):
        lines.append(" ".join(f"{rho.matrix[i, j].real:+.12f}" for j in range(8)))
    lines.append("eigenvalues: " + " ".join(f"{e:.12e}" for e in eigs))
    _emit(args, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_sweep(args):
    length = _model_params(args)
    _validated_setup(args, length)
    lambdas = np.arange(args.lambda_min, args.lambda_max + args.step / 2, args.step)
    rows, _ = _sweep_rows(args, args.gamma, args.alpha, args.beta, lambdas,
                          length, not args.no_sdp, args.workers)
    _emit(args, _csv_text(args, rows))
    return EXIT_OK


def cmd_fit(args):
    length = _model_params(args)
    _validated_setup(args, length)
    column = args.measure
    step = args.step
    side = args.side
    lo = 1.0 - args.window_max - 2 * step
    hi = 1.0 + args.window_max + 2 * step
    if side == "below":
        hi = 1.0 - args.window_min / 3
    elif side == "above":
        lo = 1.0 + args.window_min / 3
    lambdas = np.arange(lo, hi + step / 2, step)
    table = analysis.sweep(args.gamma, args.alpha, args.beta, lambdas,
                           length=length, with_sdp=column in analysis.SDP_COLUMNS,
                           workers=args.workers)
    fit = analysis.fit_log_divergence(
        table, column, window=(args.window_min, args.window_max), side=side
    )
    payload = {
        "measure": column, "gamma": args.gamma,
        "alpha": args.alpha, "beta": args.beta,
        "L": length if length is not None else "inf",
        "slope": fit.slope, "intercept": fit.intercept,
        "rms_residual": fit.rms_residual, "window": list(fit.window),
        "n_points": fit.n_points, "r_squared": fit.r_squared,
    }
    text = "\n".join(_header_lines(args)) + "\n" + json.dumps(payload, indent=2) + "\n"
    _emit(args, text)
    return EXIT_OK


def cmd_factorize(args):
    length = _model_params(args)
    _validated_setup(args, length)
    det = analysis.detect_factorization_measure(
        args.measure, args.gamma, args.alpha, args.beta, length=length,
        grid_step=args.step,
    )
    lam_f = factorization_lambda(args.gamma)
    payload = {
        "measure": args.measure, "gamma": args.gamma,
        "alpha": args.alpha, "beta": args.beta,
        "lambda_detected": det.lambda_detected,
        "dip_value": det.dip_value,
        "lambda_f_analytic": lam_f,
        "deviation": det.lambda_detected - lam_f,
    }
    text = "\n".join(_header_lines(args)) + "\n" + json.dumps(payload, indent=2) + "\n"
    _emit(args, text)
    print(f"lambda_f detected {det.lambda_detected:.6f} "
          f"(analytic {lam_f:.6f}, deviation {det.lambda_detected - lam_f:+.2e})")
    return EXIT_OK


def cmd_boundscan(args):
    length = _model_params(args)
    _validated_setup(args, length)
    lambdas = np.arange(args.lambda_min, args.lambda_max + args.step / 2, args.step)
    windows = analysis.bound_entanglement_scan(
        args.gamma, args.alpha, args.beta, lambdas, length=length,
        tau_threshold=args.tau_threshold, workers=args.workers,
    )
    payload = [
        {
            "lo": w.lo, "hi": w.hi,
            "max_tau_ub": w.max_tau_ub, "min_tau_ub": w.min_tau_ub,
            "max_neg_outer": w.max_neg_outer,
        }
        for w in windows
    ]
    text = "\n".join(_header_lines(args)) + "\n" + json.dumps(payload, indent=2) + "\n"
    _emit(args, text)
    for w in windows:
        print(f"window ({w.lo:.4f}, {w.hi:.4f}) max tau_ub {w.max_tau_ub:.3e}")
    if not windows:
        print("no bound-entanglement windows in the scanned range")
    return EXIT_OK


def cmd_fidelity(args):
    if args.length % 2 == 0 or args.length < 5:
        raise UsageError(f"--L must be odd and >= 5, got {args.length}")
    params, geom = _validated_setup(args, args.length)
    rho_fin = rdm3(geom, params)
    rho_inf = rdm3(geom, ModelParams(args.lam, args.gamma, None))
    f = analysis.fidelity(rho_fin.matrix, rho_inf.matrix)
    if args.output:
        payload = {
            "lambda": args.lam, "gamma": args.gamma,
            "alpha": args.alpha, "beta": args.beta, "L": args.length,
            "fidelity": f,
        }
        _emit(args, "\n".join(_header_lines(args)) + "\n"
              + json.dumps(payload, indent=2) + "\n")
    print(f"F(rho_L={args.length}, rho_inf) = {f:.10f} "
          f"at lambda={args.lam} gamma={args.gamma} m=({args.alpha},{args.beta})")
    return EXIT_OK


def cmd_verify(args):
    if args.length % 2 == 0 or not 5 <= args.length <= 14:
        raise UsageError(f"--L must be odd in [5, 14], got {args.length}")
    params = ModelParams(args.lam, args.gamma, args.length)
    ham = edsim.build_hamiltonian(args.length, params)
    energy, state = edsim.reference_state(ham)
    worst = 0.0
    worst_geom = None
    for alpha in range(1, args.length):
        for beta in range(1, args.length - alpha):
            rho_a = rdm3(SpinGeometry(alpha, beta), params)
            rho_e = edsim.reduced_state(state, [0, alpha, alpha + beta],
                                        args.length)
            dev = float(np.max(np.abs(rho_a.matrix - rho_e.matrix)))
            if dev > worst:
                worst, worst_geom = dev, (alpha, beta)
    e_disp = edsim.dispersion_ground_energy(args.length, params)
    e_dev = abs(energy - e_disp)
    print(f"L={args.length} lambda={args.lam} gamma={args.gamma}")
    print(f"  sector ground energy  {energy:.12f}")
    print(f"  dispersion sum        {e_disp:.12f}  (|diff| {e_dev:.3e})")
    print(f"  worst rdm3 deviation  {worst:.3e} at m={worst_geom}")
    ok = worst <= args.tolerance and e_dev <= 1e-9
    print("verify:", "PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_COMPUTE


def _add_common(p, chain=True, geometry=True, workers=True):
    if geometry:
        p.add_argument("--alpha", type=int, required=True, help="left spin offset")
        p.add_argument("--beta", type=int, required=True, help="right spin offset")
    p.add_argument("--gamma", type=float, required=True, help="anisotropy in [0,1]")
    if chain:
        p.add_argument("--L", dest="length", type=int, default=None,
                       help="finite chain length (odd, >= 5)")
        p.add_argument("--infinite", action="store_true",
                       help="thermodynamic limit (explicit, never a default)")
    if workers:
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes (default $XYMQC_WORKERS or 1)")
    p.add_argument("--output", default=None, help="output file (default stdout)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="xymqc",
        description="Tripartite quantum correlations in the transverse-field XY chain",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rdm", help="print one three-spin reduced density matrix")
    _add_common(p, workers=False)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.set_defaults(func=cmd_rdm)

    p = sub.add_parser("sweep", help="measure columns over a lambda grid (CSV)")
    _add_common(p)
    p.add_argument("--lambda-min", type=float, default=0.0)
    p.add_argument("--lambda-max", type=float, default=2.0)
    p.add_argument("--step", type=float, default=1e-2)
    p.add_argument("--no-sdp", action="store_true",
                   help="skip the SDP-backed tau_ub column")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", help="log-divergence fit of a measure derivative")
    _add_common(p)
    p.add_argument("--measure", choices=analysis.MEASURE_COLUMNS, required=True)
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--window-min", type=float, default=3e-4)
    p.add_argument("--window-max", type=float, default=3e-2)
    p.add_argument("--side", choices=("below", "above", "both"), default="below")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("factorize", help="detect the factorization point")
    _add_common(p)
    p.add_argument("--measure", choices=analysis.SUDDEN_CHANGE_COLUMNS,
                   default="n3")
    p.add_argument("--step", type=float, default=2e-3)
    p.set_defaults(func=cmd_factorize)

    p = sub.add_parser("boundscan", help="scan for bound-entanglement windows")
    _add_common(p)
    p.add_argument("--lambda-min", type=float, default=0.9)
    p.add_argument("--lambda-max", type=float, default=1.3)
    p.add_argument("--step", type=float, default=2e-3)
    p.add_argument("--tau-threshold", type=float, default=1e-12)
    p.set_defaults(func=cmd_boundscan)

    p = sub.add_parser("fidelity", help="finite vs infinite reduced-state fidelity")
    _add_common(p, chain=False, workers=False)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--L", dest="length", type=int, required=True)
    p.set_defaults(func=cmd_fidelity)

    p = sub.add_parser("verify", help="cross-validate analytic RDMs against ED")
    p.add_argument("--L", dest="length", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--tolerance", type=float, default=1e-8)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, analysis.FactorizationNotFound, analysis.WindowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except IOError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
