"""Command-line driver: validation, runs, steady solves, diagnostics,
parameter sweeps.

Exit codes: 0 on success, 1 on validation or semantic failure, 2 on
runtime failure (non-convergence, failed solve, I/O).  The final stdout
line is always machine readable: ``RESULT key=value ...``.

The output directory resolves as --out, then the MULTIFLOW_OUT
environment variable, then the config's [output] directory.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import os
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import output as outmod
from . import spectral as spec
from .model import ViscosityMatrices, validate_viscosity
from .solver import StepFailure, run_steady, run_unsteady

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INVALID)


def _build_parser() -> _Parser:
    p = _Parser(prog="multiflow", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", help="suppress progress lines")
    sub = p.add_subparsers(dest="command", required=True)

    def add_config(sp):
        sp.add_argument("--config", required=True, help="path to a run config")
        sp.add_argument("--out", default=None, help="output directory")

    sp = sub.add_parser("validate", parents=[common],
                        help="check a config and its viscosity matrices")
    sp.add_argument("--config", required=True)

    sp = sub.add_parser("run", parents=[common], help="integrate the unsteady system")
    add_config(sp)

    sp = sub.add_parser("steady", parents=[common],
                        help="pseudo-time march to a steady state")
    add_config(sp)

    sp = sub.add_parser("diag", help="spectral identity diagnostics")
    dsub = sp.add_subparsers(dest="diag_command", required=True)
    for name, helptext in [
        ("identity", "stress divergence identity residuals"),
        ("comm", "commutator expansions and self-adjointness"),
        ("weaklimit", "oscillatory weak-limit gap table"),
    ]:
        dp = dsub.add_parser(name, parents=[common], help=helptext)
        dp.add_argument("--n", type=int, default=128, help="diagnostics grid size")
        dp.add_argument("--seed", type=int, default=0)
        dp.add_argument("--samples", type=int, default=5)
        dp.add_argument("--out", default=None)

    sp = sub.add_parser("sweep", parents=[common],
                        help="run one config across parameter values")
    add_config(sp)
    sp.add_argument("--param", required=True, help="config path like pressure.gamma")
    sp.add_argument("--values", required=True, help="comma-separated values")
    sp.add_argument("--jobs", type=int, default=1)
    return p


def _result(status, **kv) -> str:
    parts = [f"status={status}"]
    for key, value in kv.items():
        if isinstance(value, float):
            parts.append(f"{key}={value:.6g}")
        else:
            parts.append(f"{key}={value}")
    return "RESULT " + " ".join(parts)


def _say(quiet, *lines):
    if not quiet:
        for line in lines:
            print(line)


def _outdir(args, cfg) -> Path:
    out = getattr(args, "out", None) or os.environ.get("MULTIFLOW_OUT") or (
        cfg.directory if cfg is not None else "out"
    )
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise StepFailure(f"cannot read config '{path}': {exc}") from exc
    return text, cfgmod.parse_config(text)


def _cmd_validate(args) -> int:
    try:
        _, cfg = _load_config(args.config)
    except cfgmod.ConfigError as exc:
        for err in exc.errors:
            print(f"error: {err}")
        print(_result("invalid", command="validate", errors=len(exc.errors)))
        return EXIT_INVALID
    n = cfg.n_constituents
    visc = ViscosityMatrices(
        np.array(cfg.mu).reshape(n, n), np.array(cfg.lam).reshape(n, n)
    )
    report = validate_viscosity(visc)
    _say(args.quiet,
         f"constituents: {n}",
         f"admissible: {'yes' if report.admissible else 'no'}",
         f"min eig sym(mu): {report.min_eig_sym_mu:.12g}",
         f"min eig sym(h):  {report.min_eig_sym_h:.12g}",
         f"mu asymmetry: {report.mu_asymmetry:.3g}",
         f"lam asymmetry: {report.lam_asymmetry:.3g}")
    for w in cfg.warnings:
        print(f"warning: {w}")
    status = "ok" if report.admissible else "inadmissible"
    print(_result(status, command="validate",
                  admissible=str(report.admissible).lower(),
                  min_eig_sym_mu=report.min_eig_sym_mu,
                  min_eig_sym_h=report.min_eig_sym_h,
                  warnings=len(cfg.warnings)))
    return EXIT_OK if report.admissible else EXIT_INVALID


def _run_summary(traj):
    mass0 = traj.masses[0]
    drift = np.abs(traj.masses - mass0).max(axis=0) / np.abs(mass0)
    return {
        "t_final": float(traj.times[-1]),
        "steps": int(traj.times.size - 1),
        "energy_final": float(traj.energy[-1]),
        "mass_drift": float(drift.max()),
        "dissipation_time_integral": float(np.sum(traj.dissipation[1:] * traj.dts[1:])),
        "floor_events": int(traj.floor_events[-1]),
    }


def _cmd_run(args) -> int:
    text, cfg = _load_config(args.config)
    for w in cfg.warnings:
        print(f"warning: {w}")
    outdir = _outdir(args, cfg)
    state = cfgmod.build_state(cfg)
    params = cfgmod.build_params(cfg)
    solver_cfg = cfgmod.build_solver_config(cfg)
    traj = run_unsteady(state, params, solver_cfg)
    outmod.write_timeseries(traj, outdir / "timeseries.csv", every=cfg.cadence)
    outmod.write_snapshot(traj.snapshots[0], outdir / "snapshot_initial.csv")
    outmod.write_snapshot(traj.snapshots[-1], outdir / "snapshot_final.csv")
    summary = _run_summary(traj)
    _say(args.quiet, *(f"{k}: {v}" for k, v in summary.items()),
         f"wrote {outdir / 'timeseries.csv'}")
    print(_result("ok", command="run", **summary))
    return EXIT_OK


def _cmd_steady(args) -> int:
    text, cfg = _load_config(args.config)
    for w in cfg.warnings:
        print(f"warning: {w}")
    outdir = _outdir(args, cfg)
    state = cfgmod.build_state(cfg)
    params = cfgmod.build_params(cfg)
    solver_cfg = cfgmod.build_solver_config(cfg)
    result = run_steady(state, params, solver_cfg)
    outmod.write_snapshot(result.state, outdir / "snapshot_steady.csv")
    with open(outdir / "residuals.csv", "w", newline="\n") as fh:
        fh.write("step,residual\n")
        for i, r in enumerate(result.residuals):
            fh.write(f"{i + 1},{r:.17g}\n")
    rho_div_v = float(np.abs(result.rho_div_v).max())
    _say(args.quiet,
         f"converged: {result.converged}",
         f"pseudo-steps: {result.residuals.size}",
         f"final residual: {result.residuals[-1]:.6g}",
         f"max |int rho_i div v|: {rho_div_v:.6g}")
    status = "ok" if result.converged else "not_converged"
    print(_result(status, command="steady",
                  converged=str(result.converged).lower(),
                  residual=float(result.residuals[-1]),
                  rho_div_v=rho_div_v,
                  floor_events=result.floor_events))
    return EXIT_OK if result.converged else EXIT_RUNTIME


def _diag_fields(n, rng):
    S = spec.smooth_tensor_field(n, rng)
    rho = spec.smooth_field(n, rng)
    tau = spec.smooth_field(n, rng)
    return S, rho, tau


def _cmd_diag(args) -> int:
    n = args.n
    entries = []
    if args.diag_command == "identity":
        worst = 0.0
        for k in range(args.samples):
            rng = np.random.default_rng(args.seed + k)
            S, rho, tau = _diag_fields(n, rng)
            scale = max(
                spec.norm(S[a, b]) for a in range(2) for b in range(2)
            ) * spec.norm(rho) * spec.norm(tau)
            rel = spec.div_identity_residual(S, rho, tau) / scale
            worst = max(worst, rel)
            entries.append((f"sample_{k}_relative_residual", rel))
        report = spec.EvfReport("divergence-identity", tuple(entries))
        _say(args.quiet, report.as_text().rstrip())
        print(_result("ok", command="diag-identity", n=n, residual=worst))
        return EXIT_OK
    if args.diag_command == "comm":
        rng = np.random.default_rng(args.seed)
        w = spec.smooth_vector_field(n, rng)
        u = spec.smooth_vector_field(n, rng)
        rho_i = spec.smooth_field(n, rng)
        rho_j = spec.smooth_field(n, rng)
        scale = (
            max(spec.norm(w[0]), spec.norm(w[1]))
            * max(spec.norm(u[0]), spec.norm(u[1]))
            * spec.norm(rho_i) * spec.norm(rho_j)
        )
        steady, unsteady = spec.comm_expansion_residual(w, u, rho_i, rho_j)
        gap = spec.check_selfadjoint(rho_i, rho_j).max() / (
            spec.norm(rho_i) * spec.norm(rho_j)
        )
        entries = [
            ("steady_expansion_residual", steady / scale),
            ("unsteady_expansion_residual", unsteady / scale),
            ("selfadjoint_gap", gap),
        ]
        report = spec.EvfReport("commutator-expansions", tuple(entries))
        _say(args.quiet, report.as_text().rstrip())
        print(_result("ok", command="diag-comm", n=n,
                      steady=steady / scale, unsteady=unsteady / scale,
                      selfadjoint_gap=gap))
        return EXIT_OK
    # weaklimit
    rng = np.random.default_rng(args.seed)
    phi = 1.0 + 0.5 * spec.band_limited_field(n, rng, max_mode=2)
    seq = spec.OscillatorySequenceSpec()
    report = spec.weak_limit_experiment(seq, phi)
    entries = [("analytic_product_limit", report.analytic_product_limit)]
    for idx, pg, cg in zip(report.indices, report.product_gap, report.comm_gap):
        entries.append((f"product_gap_n{idx}", pg))
        entries.append((f"comm_gap_n{idx}", cg))
    text_report = spec.EvfReport("weak-limit", tuple(entries))
    _say(args.quiet, text_report.as_text().rstrip())
    print(_result("ok", command="diag-weaklimit", n=n,
                  product_gap_final=float(report.product_gap[-1]),
                  analytic_limit=report.analytic_product_limit,
                  comm_gap_final=float(report.comm_gap[-1])))
    return EXIT_OK


def _sweep_worker(text, param, value, outdir_str):
    """Run one sweep point; returns the summary row dict."""
    cfg = cfgmod.with_override(text, param, value)
    outdir = Path(outdir_str)
    outdir.mkdir(parents=True, exist_ok=True)
    state = cfgmod.build_state(cfg)
    params = cfgmod.build_params(cfg)
    solver_cfg = cfgmod.build_solver_config(cfg)
    traj = run_unsteady(state, params, solver_cfg)
    outmod.write_timeseries(traj, outdir / "timeseries.csv", every=cfg.cadence)
    outmod.write_snapshot(traj.snapshots[-1], outdir / "snapshot_final.csv")
    summary = _run_summary(traj)
    summary["warn"] = int(bool(cfg.warnings))
    return summary


def _cmd_sweep(args) -> int:
    text, base_cfg = _load_config(args.config)
    values = [v for v in (tok.strip() for tok in args.values.split(",")) if v]
    outroot = _outdir(args, base_cfg) / f"sweep_{args.param.replace('.', '_')}"
    outroot.mkdir(parents=True, exist_ok=True)
    # resolve the path eagerly so a typo fails before any run starts
    if values:
        cfgmod.with_override(text, args.param, values[0])

    jobs = max(1, args.jobs)
    results = [None] * len(values)

    def submit_all(pool):
        futs = {
            pool.submit(_sweep_worker, text, args.param, v,
                        str(outroot / f"{args.param.split('.')[-1]}={v}")): i
            for i, v in enumerate(values)
        }
        for fut in concurrent.futures.as_completed(futs):
            i = futs[fut]
            try:
                results[i] = ("ok", fut.result())
            except Exception as exc:  # one failed row must not sink the rest
                results[i] = ("failed", str(exc))

    if jobs == 1:
        for i, v in enumerate(values):
            try:
                row = _sweep_worker(text, args.param, v,
                                    str(outroot / f"{args.param.split('.')[-1]}={v}"))
                results[i] = ("ok", row)
            except Exception as exc:
                results[i] = ("failed", str(exc))
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            submit_all(pool)

    header = f"{'value':>12} {'status':>8} {'warn':>5} {'energy_final':>16} " \
             f"{'mass_drift':>12} {'dissipation':>12}"
    table = [header]
    failed = 0
    for v, res in zip(values, results):
        status, payload = res
        if status == "ok":
            table.append(
                f"{v:>12} {status:>8} {payload['warn']:>5} "
                f"{payload['energy_final']:>16.9g} {payload['mass_drift']:>12.3g} "
                f"{payload['dissipation_time_integral']:>12.5g}"
            )
        else:
            failed += 1
            table.append(f"{v:>12} {status:>8} {'-':>5} {'-':>16} {'-':>12} {'-':>12}")
    summary_text = "\n".join(table) + "\n"
    with open(outroot / "summary.txt", "w", newline="\n") as fh:
        fh.write(summary_text)
    _say(args.quiet, summary_text.rstrip())
    print(_result("ok" if failed == 0 else "partial", command="sweep",
                  parameter=args.param, rows=len(values), failed=failed))
    return EXIT_OK if failed == 0 else EXIT_RUNTIME


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "steady":
            return _cmd_steady(args)
        if args.command == "diag":
            return _cmd_diag(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        parser.error(f"unknown command {args.command}")
    except cfgmod.ConfigError as exc:
        for err in exc.errors:
            print(f"error: {err}")
        print(_result("invalid", command=args.command, errors=len(exc.errors)))
        return EXIT_INVALID
    except ValueError as exc:
        print(f"error: {exc}")
        print(_result("invalid", command=args.command))
        return EXIT_INVALID
    except (StepFailure, OSError) as exc:
        print(f"error: {exc}")
        print(_result("error", command=args.command))
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
