"""Declarative experiment runner with sweeps, presets, and CSV export.

Configs are plain dataclasses (JSON-serializable with a schema version).
Presets named after the reproduction studies ("fig1-left", "fig1-right",
"fig2") fix their own initial conditions, documented here as artifact
choices: theta0 = (-1.5, 2.0) on Rosenbrock and theta0 = e1 for the
p-power family, v0 = 0 everywhere.  Only qualitative orderings are
claimed, not curve-level reproduction.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .certificates import (
    AdmissibilityReport,
    CertificateFit,
    check_admissibility,
    fit_certificate,
)
from .flow import FlowParams, FlowState, conservative_params
from .integrate import IntegratorConfig, Trajectory, integrate
from .objectives import (
    Objective,
    estimate_dominance,
    hessian_definiteness,
    make_objective,
    shell_samples,
)

SCHEMA_VERSION = 1
DOMINANCE_SEED = 20240

CSV_FLOAT = repr  # full round-trip decimal precision


class ExperimentError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    objective_name: str
    theta0: tuple
    flow: FlowParams
    integrator: IntegratorConfig = IntegratorConfig()
    objective_params: dict = field(default_factory=dict)
    v0: Optional[tuple] = None  # defaults to zero momentum
    sweep: tuple = ()  # per-member override dicts
    label: str = "run"

    def objective(self) -> Objective:
        return make_objective(self.objective_name, self.objective_params)

    def initial_state(self) -> FlowState:
        theta0 = np.asarray(self.theta0, dtype=float)
        v0 = (
            np.zeros_like(theta0)
            if self.v0 is None
            else np.asarray(self.v0, dtype=float)
        )
        return FlowState(theta=theta0, v=v0)

    def to_dict(self) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "label": self.label,
            "objective": {"name": self.objective_name, "params": dict(self.objective_params)},
            "theta0": list(np.asarray(self.theta0, dtype=float)),
            "flow": self.flow.to_dict(),
            "integrator": {
                "rel_tol": self.integrator.rel_tol,
                "abs_tol": self.integrator.abs_tol,
                "initial_step": self.integrator.initial_step,
                "min_step": self.integrator.min_step,
                "max_step": self.integrator.max_step,
                "t_max": self.integrator.t_max,
                "settle_tol": self.integrator.settle_tol,
                "record_stride": self.integrator.record_stride,
            },
        }
        if self.v0 is not None:
            d["v0"] = list(np.asarray(self.v0, dtype=float))
        if self.sweep:
            d["sweep"] = [dict(o) for o in self.sweep]
        return d


def _flow_from_dict(d: dict) -> FlowParams:
    alpha = float(d["alpha"])
    beta = float(d.get("beta", 0.5))
    gamma = float(d.get("gamma", 0.5))
    kappa = float(d.get("kappa", 1.0))
    if beta == 1.0 and gamma == 1.0:
        return conservative_params(alpha=alpha, kappa=kappa)
    return FlowParams(alpha=alpha, beta=beta, gamma=gamma, kappa=kappa)


def config_from_dict(d: dict) -> ExperimentConfig:
    if int(d.get("schema_version", SCHEMA_VERSION)) != SCHEMA_VERSION:
        raise ExperimentError(f"unsupported schema_version {d.get('schema_version')}")
    integ = d.get("integrator", {})
    return ExperimentConfig(
        objective_name=d["objective"]["name"],
        objective_params=dict(d["objective"].get("params", {})),
        theta0=tuple(d["theta0"]),
        v0=tuple(d["v0"]) if "v0" in d else None,
        flow=_flow_from_dict(d["flow"]),
        integrator=IntegratorConfig(**integ),
        sweep=tuple(d.get("sweep", ())),
        label=d.get("label", "run"),
    )


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))


@dataclass(frozen=True)
class RunSummary:
    label: str
    settled_at: Optional[float]
    terminated_reason: str
    final_f_gap: float
    final_state_error: float
    certificate: Optional[CertificateFit]
    admissibility: Optional[AdmissibilityReport]
    dominance_seed: int = DOMINANCE_SEED
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "settled_at": self.settled_at,
            "terminated_reason": self.terminated_reason,
            "final_f_gap": self.final_f_gap,
            "final_state_error": self.final_state_error,
            "certificate": self.certificate.to_dict() if self.certificate else None,
            "admissibility": self.admissibility.to_dict() if self.admissibility else None,
            "dominance_seed": self.dominance_seed,
            "error": self.error,
        }


def run(config: ExperimentConfig) -> tuple[Trajectory, RunSummary]:
    """Integrate one config and summarize it.

    The certificate fit and admissibility check are best-effort: a
    trajectory without a usable fit window (e.g. a conservative run)
    yields a summary without a certificate.
    """
    objective = config.objective()
    traj = integrate(config.initial_state(), config.flow, objective, config.integrator)

    theta_final = traj.thetas[-1]
    f_final = traj.f[-1]
    if objective.optimum is not None:
        f_gap = max(f_final - objective.f_star, 0.0)
        state_err = float(np.linalg.norm(theta_final - objective.theta_star))
    else:
        f_gap = float(f_final - np.min(traj.f))
        state_err = float("nan")

    certificate = None
    try:
        certificate = fit_certificate(traj)
    except Exception:
        pass

    admissibility = None
    try:
        samples = shell_samples(objective, count=64, seed=DOMINANCE_SEED)
        dominance = estimate_dominance(objective, samples)
        evidence = hessian_definiteness(objective, samples)
        admissibility = check_admissibility(config.flow, dominance, evidence)
    except Exception:
        pass

    summary = RunSummary(
        label=config.label,
        settled_at=traj.settled_at,
        terminated_reason=traj.terminated_reason,
        final_f_gap=f_gap,
        final_state_error=state_err,
        certificate=certificate,
        admissibility=admissibility,
    )
    return traj, summary


def expand(config: ExperimentConfig) -> list[ExperimentConfig]:
    """Materialize one config per sweep override (flow fields, objective
    params, and label may be overridden per member)."""
    if not config.sweep:
        raise ExperimentError("config has no sweep overrides")
    members = []
    for i, override in enumerate(config.sweep):
        override = dict(override)
        label = override.pop("label", f"{config.label}-{i}")
        obj_params = dict(config.objective_params)
        obj_params.update(override.pop("objective_params", {}))
        flow_dict = config.flow.to_dict()
        for key in ("alpha", "beta", "gamma", "kappa"):
            if key in override:
                flow_dict[key] = override.pop(key)
        if override:
            raise ExperimentError(f"unknown override keys {sorted(override)}")
        members.append(
            replace(
                config,
                flow=_flow_from_dict(flow_dict),
                objective_params=obj_params,
                sweep=(),
                label=label,
            )
        )
    return members


def sweep(config: ExperimentConfig, max_workers: int = 4) -> list[RunSummary]:
    """Run every sweep member; summaries come back in input order.

    A failing member contributes a summary carrying its error message
    instead of aborting the sweep.
    """
    members = expand(config)

    def one(member):
        try:
            return run(member)[1]
        except Exception as exc:  # attach, don't abort the sweep
            return RunSummary(
                label=member.label,
                settled_at=None,
                terminated_reason="error",
                final_f_gap=float("nan"),
                final_state_error=float("nan"),
                certificate=None,
                admissibility=None,
                error=f"{type(exc).__name__}: {exc}",
            )

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(one, members))


# ---------------------------------------------------------------------------
# Serialization


def export_trajectory(traj: Trajectory, destination) -> None:
    """Write the trajectory as CSV.

    Header is exactly `t,theta_0..theta_{n-1},v_0..v_{n-1},f,V,Vdot,znorm`;
    floats are printed in round-trip precision so re-parsing is
    bit-identical.
    """
    if len(traj) == 0:
        raise ExperimentError("trajectory is empty")
    n = traj.dim
    header = (
        ["t"]
        + [f"theta_{i}" for i in range(n)]
        + [f"v_{i}" for i in range(n)]
        + ["f", "V", "Vdot", "znorm"]
    )
    lines = [",".join(header)]
    for i in range(len(traj)):
        row = (
            [traj.times[i]]
            + list(traj.states[i])
            + [traj.f[i], traj.V[i], traj.Vdot[i], traj.z_norm[i]]
        )
        lines.append(",".join(CSV_FLOAT(float(x)) for x in row))
    text = "\n".join(lines) + "\n"
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        Path(destination).write_text(text)


def read_trajectory_csv(path) -> dict:
    """Parse an exported CSV back into column arrays keyed by header name."""
    lines = Path(path).read_text().strip().split("\n")
    header = lines[0].split(",")
    data = np.array([[float(x) for x in line.split(",")] for line in lines[1:]])
    return {name: data[:, j] for j, name in enumerate(header)}


def write_summary(summary: RunSummary, path) -> None:
    Path(path).write_text(json.dumps(summary.to_dict(), indent=2) + "\n")


# ---------------------------------------------------------------------------
# Reproduction presets


def _fig1_base(**kw) -> ExperimentConfig:
    return ExperimentConfig(
        objective_name="rosenbrock",
        theta0=(-1.5, 2.0),
        flow=FlowParams(alpha=-0.5, beta=0.5, gamma=0.5, kappa=1.0),
        integrator=IntegratorConfig(
            rel_tol=1e-8, abs_tol=1e-12, t_max=50.0, settle_tol=1e-9, record_stride=0.02
        ),
        **kw,
    )


def _fig2_base(p: float, **kw) -> ExperimentConfig:
    return ExperimentConfig(
        objective_name="ppower",
        objective_params={"p": p, "dim": 2},
        theta0=(1.0, 0.0),
        flow=FlowParams(alpha=-0.8, beta=0.5, gamma=0.5, kappa=1.0),
        integrator=IntegratorConfig(
            rel_tol=1e-10, abs_tol=1e-13, t_max=50.0, settle_tol=1e-9, record_stride=0.02
        ),
        **kw,
    )


def preset(name: str) -> ExperimentConfig:
    """Look up a named reproduction preset."""
    key = name.lower()
    if key == "fig1-left":
        return _fig1_base(
            label="fig1-left",
            sweep=tuple(
                {"alpha": a, "label": f"fig1-left-a{str(abs(a)).replace('0.', '0')}"}
                for a in (-0.25, -0.5, -0.75)
            ),
        )
    if key in ("fig1-left-a025", "fig1-left-a05", "fig1-left-a075"):
        alpha = {"fig1-left-a025": -0.25, "fig1-left-a05": -0.5, "fig1-left-a075": -0.75}[key]
        cfg = _fig1_base(label=key)
        return replace(cfg, flow=replace(cfg.flow, alpha=alpha))
    if key == "fig1-right":
        return _fig1_base(
            label="fig1-right",
            sweep=(
                {"beta": 1.0, "gamma": 0.5, "label": "fig1-right-heavyball"},
                {"beta": 0.5, "gamma": 1.0, "label": "fig1-right-pi"},
                {"beta": 0.5, "gamma": 0.5, "label": "fig1-right-interior"},
            ),
        )
    if key == "fig2":
        return _fig2_base(
            p=2.0,
            label="fig2",
            sweep=tuple(
                {"objective_params": {"p": p}, "label": f"fig2-p{p:g}"}
                for p in (1.5, 2.0, 3.0)
            ),
        )
    if key in ("fig2-p1.5", "fig2-p2", "fig2-p3"):
        p = float(key.split("fig2-p")[1])
        return _fig2_base(p=p, label=key)
    if key == "conservative":
        return ExperimentConfig(
            objective_name="quadratic",
            objective_params={"diag": [1.0, 1.0]},
            theta0=(1.0, 0.0),
            flow=conservative_params(alpha=0.0, kappa=1.0),
            integrator=IntegratorConfig(
                rel_tol=1e-10, abs_tol=1e-13, t_max=50.0, settle_tol=1e-9, record_stride=0.05
            ),
            label="conservative",
        )
    raise ExperimentError(f"unknown preset {name!r}")


PRESET_NAMES = (
    "fig1-left",
    "fig1-left-a025",
    "fig1-left-a05",
    "fig1-left-a075",
    "fig1-right",
    "fig2",
    "fig2-p1.5",
    "fig2-p2",
    "fig2-p3",
    "conservative",
)
