"""Command-line front end: run / sweep / certify / gradcheck / verify-lemma1 / repro.

Flag names mirror the math symbols (--alpha, --beta, --gamma, --kappa,
--p) so configurations can be cross-read directly.  Exit codes: 0
success, 1 usage error, 2 configuration error, 3 runtime or numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .certificates import (
    CertificateError,
    check_admissibility,
    select_epsilon_sigma,
    verify_power_bound,
)
from .experiments import (
    ExperimentError,
    PRESET_NAMES,
    expand,
    export_trajectory,
    load_config,
    preset,
    run as run_experiment,
    write_summary,
)
from .flow import FlowError, FlowParams, conservative_params
from .integrate import IntegrationError
from .objectives import (
    ObjectiveError,
    estimate_dominance,
    estimate_smoothness,
    fd_gradient,
    hessian_definiteness,
    make_objective,
    shell_samples,
)

USAGE_EXIT = 1
CONFIG_EXIT = 2
RUNTIME_EXIT = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _build_parser() -> _Parser:
    parser = _Parser(prog="ftflow", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_flow_flags(p):
        p.add_argument("--alpha", type=float, help="scaling exponent in [-1, 0]")
        p.add_argument("--beta", type=float, help="gradient/momentum mix in (0, 1]")
        p.add_argument("--gamma", type=float, help="momentum damping weight in (0, 1]")
        p.add_argument("--kappa", type=float, help="momentum time-scaling factor > 0")

    def add_objective_flags(p):
        p.add_argument("--objective", help="rosenbrock | ppower | quadratic")
        p.add_argument("--p", type=float, help="p-power order (ppower objective)")
        p.add_argument("--dim", type=int, help="objective dimension (ppower)")

    def add_run_flags(p):
        p.add_argument("--config", type=Path, help="JSON experiment config")
        p.add_argument("--preset", choices=PRESET_NAMES, help="named preset")
        add_objective_flags(p)
        add_flow_flags(p)
        p.add_argument("--t-max", type=float, help="integration horizon")
        p.add_argument("--settle-tol", type=float, help="settling threshold on ||z||")
        p.add_argument("--theta0", type=float, nargs="+", help="initial position")
        p.add_argument(
            "--output-dir", type=Path, default=Path("out"), help="artifact directory"
        )

    add_run_flags(sub.add_parser("run", help="integrate one configuration"))
    add_run_flags(sub.add_parser("sweep", help="run a parameter sweep"))

    cert = sub.add_parser("certify", help="admissibility + Schur reports")
    add_objective_flags(cert)
    add_flow_flags(cert)
    cert.add_argument("--output-dir", type=Path, default=Path("out"))

    grad = sub.add_parser("gradcheck", help="analytic vs finite-difference gradients")
    add_objective_flags(grad)
    grad.add_argument("--samples", type=int, default=100)
    grad.add_argument("--seed", type=int, default=0)
    grad.add_argument("--output-dir", type=Path, default=Path("out"))

    lem = sub.add_parser("verify-lemma1", help="brute-force local power bound")
    lem.add_argument("--a", type=float, required=True)
    lem.add_argument("--delta", type=float, required=True)
    lem.add_argument("--grid", type=int, default=200)

    rep = sub.add_parser("repro", help="reproduction sweeps")
    rep.add_argument("figure", choices=["fig1", "fig2"])
    rep.add_argument("--output-dir", type=Path, default=Path("out"))

    return parser


def _objective_from_args(args):
    if not args.objective:
        raise ObjectiveError("an --objective is required")
    params = {}
    if args.p is not None:
        params["p"] = args.p
    if getattr(args, "dim", None) is not None:
        params["dim"] = args.dim
    return make_objective(args.objective, params)


def _flow_from_args(args, base: FlowParams | None = None):
    d = base.to_dict() if base is not None else {"alpha": -0.5, "beta": 0.5, "gamma": 0.5, "kappa": 1.0}
    for key in ("alpha", "beta", "gamma", "kappa"):
        val = getattr(args, key, None)
        if val is not None:
            d[key] = val
    if d["beta"] == 1.0 and d["gamma"] == 1.0:
        return conservative_params(alpha=d["alpha"], kappa=d["kappa"])
    return FlowParams(**d)


def _config_from_args(args):
    if args.config is not None:
        cfg = load_config(args.config)
    elif args.preset is not None:
        cfg = preset(args.preset)
    else:
        objective = _objective_from_args(args)
        theta0 = args.theta0 or [1.0] + [0.0] * (objective.dim - 1)
        from .experiments import ExperimentConfig

        params = {}
        if args.p is not None:
            params["p"] = args.p
        if args.dim is not None:
            params["dim"] = args.dim
        cfg = ExperimentConfig(
            objective_name=args.objective,
            objective_params=params,
            theta0=tuple(theta0),
            flow=FlowParams(alpha=-0.5, beta=0.5, gamma=0.5, kappa=1.0),
            label=args.objective,
        )
    # flag overrides take precedence over config file values
    cfg = replace(cfg, flow=_flow_from_args(args, cfg.flow))
    integ = cfg.integrator
    if args.t_max is not None:
        integ = replace(integ, t_max=args.t_max)
    if args.settle_tol is not None:
        integ = replace(integ, settle_tol=args.settle_tol)
    return replace(cfg, integrator=integ)


def _export_run(traj, summary, outdir: Path):
    outdir.mkdir(parents=True, exist_ok=True)
    export_trajectory(traj, outdir / f"{summary.label}.csv")
    write_summary(summary, outdir / f"{summary.label}.summary.json")


def _cmd_run(args) -> int:
    cfg = _config_from_args(args)
    traj, summary = run_experiment(cfg)
    _export_run(traj, summary, args.output_dir)
    settled = f"settled_at={summary.settled_at:.6g}" if summary.settled_at is not None else "no settling"
    print(
        f"run {summary.label}: {settled}, final f-gap {summary.final_f_gap:.3e} "
        f"-> {args.output_dir}/{summary.label}.csv"
    )
    return 0


def _cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    members = expand(cfg)
    summaries = []
    for member in members:
        traj, summary = run_experiment(member)
        _export_run(traj, summary, args.output_dir)
        summaries.append(summary)
    combined = args.output_dir / f"{cfg.label}.sweep.json"
    combined.write_text(json.dumps([s.to_dict() for s in summaries], indent=2) + "\n")
    settled = sum(1 for s in summaries if s.settled_at is not None)
    print(f"sweep {cfg.label}: {len(summaries)} members, {settled} settled -> {combined}")
    return 0


def _cmd_certify(args) -> int:
    objective = _objective_from_args(args)
    flow = _flow_from_args(args)
    samples = shell_samples(objective, count=64, seed=0)
    dominance = estimate_dominance(objective, samples)
    evidence = hessian_definiteness(objective, samples)
    report = check_admissibility(flow, dominance, evidence)
    L = estimate_smoothness(
        objective, [(samples[i], samples[i + 1]) for i in range(len(samples) - 1)]
    ).L
    payload = {"admissibility": report.to_dict(), "schur": []}
    try:
        m = evidence[0] if evidence[0] > 0 else None
        eps, sigma, schur_reports = select_epsilon_sigma(flow, L=L, m=m)
        payload["schur"] = [r.to_dict() for r in schur_reports]
        payload["epsilon"] = eps
        payload["sigma"] = sigma
    except CertificateError as exc:
        payload["schur_error"] = str(exc)
    args.output_dir.mkdir(parents=True, exist_ok=True)
    out = args.output_dir / "certify.json"
    out.write_text(json.dumps(payload, indent=2) + "\n")
    lo, hi = report.alpha_interval
    print(
        f"certify: verdict {report.verdict} (p={dominance.p:.3f}, "
        f"alpha interval [{lo:.4g}, {hi:.4g})) -> {out}"
    )
    return 0


def _cmd_gradcheck(args) -> int:
    objective = _objective_from_args(args)
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.samples):
        theta = rng.uniform(-2.0, 2.0, objective.dim)
        h = 1e-6 * max(1.0, float(np.linalg.norm(theta)))
        g_fd = fd_gradient(objective, theta, h)
        g_an = objective.grad(theta)
        denom = max(float(np.linalg.norm(g_an)), 1e-12)
        worst = max(worst, float(np.linalg.norm(g_fd - g_an)) / denom)
    ok = worst <= 1e-5
    args.output_dir.mkdir(parents=True, exist_ok=True)
    out = args.output_dir / "gradcheck.json"
    out.write_text(
        json.dumps(
            {
                "objective": objective.name,
                "samples": args.samples,
                "worst_relative_error": worst,
                "pass": ok,
                "tolerance": 1e-5,
            },
            indent=2,
        )
        + "\n"
    )
    print(f"gradcheck {objective.name}: worst relative error {worst:.3e} ({'ok' if ok else 'FAIL'})")
    if not ok:
        raise IntegrationError("gradient check failed")
    return 0


def _cmd_verify_lemma1(args) -> int:
    C, worst = verify_power_bound(args.a, args.delta, args.grid)
    ok = worst <= 0.0
    print(
        f"verify-lemma1: a={args.a}, delta={args.delta}, C={C:.6g}, "
        f"max slack {worst:.3e} ({'no violation' if ok else 'VIOLATION'})"
    )
    if not ok:
        raise IntegrationError("power bound violated on the grid")
    return 0


def _cmd_repro(args) -> int:
    names = {"fig1": ("fig1-left", "fig1-right"), "fig2": ("fig2",)}[args.figure]
    for name in names:
        cfg = preset(name)
        summaries = []
        for member in expand(cfg):
            traj, summary = run_experiment(member)
            _export_run(traj, summary, args.output_dir)
            summaries.append(summary)
        combined = args.output_dir / f"{cfg.label}.sweep.json"
        combined.write_text(json.dumps([s.to_dict() for s in summaries], indent=2) + "\n")
        times = ", ".join(
            f"{s.label}: {s.settled_at:.4g}" if s.settled_at is not None else f"{s.label}: -"
            for s in summaries
        )
        print(f"repro {name}: settling times {{{times}}} -> {args.output_dir}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "certify": _cmd_certify,
    "gradcheck": _cmd_gradcheck,
    "verify-lemma1": _cmd_verify_lemma1,
    "repro": _cmd_repro,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else USAGE_EXIT
    try:
        return _COMMANDS[args.subcommand](args)
    except (IntegrationError, CertificateError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT
    except (ExperimentError, ObjectiveError, FlowError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CONFIG_EXIT


if __name__ == "__main__":
    sys.exit(main())
