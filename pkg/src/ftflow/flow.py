"""Scaled gradient-momentum vector field and its special cases.

The flow couples a decision variable theta and a momentum variable v:

    theta' = ||z||^alpha * (-(1-beta) grad f(theta) + beta v)
    v'     = -kappa ||z||^alpha * (gamma grad f(theta) + (1-gamma) v)

where z stacks the gradient and the momentum.  With alpha < 0 the field
is non-Lipschitz at the equilibrium; it is continuously extended by zero
inside a small ball ||z|| <= singular_tol.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .objectives import Objective

DEFAULT_SINGULAR_TOL = 1e-13


class FlowError(ValueError):
    pass


def _as_vector(x) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise FlowError(f"expected a vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class FlowParams:
    """Parameters (alpha, beta, gamma, kappa) of the flow.

    beta weighs gradient vs momentum in the position update, gamma
    regulates momentum damping, kappa time-scales the momentum dynamics,
    and alpha is the state-dependent scaling exponent.  beta = gamma = 1
    is the conservative (energy-preserving) configuration: constructible,
    but carries no convergence claim.
    """

    alpha: float
    beta: float
    gamma: float
    kappa: float
    non_dissipative: bool = field(default=False, compare=False)

    def __post_init__(self):
        if not (0.0 < self.beta <= 1.0):
            raise FlowError(f"beta must lie in (0, 1], got {self.beta}")
        if not (0.0 < self.gamma <= 1.0):
            raise FlowError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not self.kappa > 0.0:
            raise FlowError(f"kappa must be positive, got {self.kappa}")
        if not (-1.0 <= self.alpha <= 0.0):
            raise FlowError(
                f"alpha must lie in [-1, 0] (0 = unscaled baseline), got {self.alpha}"
            )
        if self.beta == 1.0 and self.gamma == 1.0 and not self.non_dissipative:
            raise FlowError(
                "beta = gamma = 1 is conservative; build it explicitly via "
                "conservative_params()"
            )

    @property
    def conservative(self) -> bool:
        return self.beta == 1.0 and self.gamma == 1.0

    @property
    def dissipative(self) -> bool:
        return self.beta * self.gamma < 1.0

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "kappa": self.kappa,
        }


@dataclass(frozen=True)
class FlowState:
    """Position theta and momentum v, both of dimension n."""

    theta: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        theta = _as_vector(self.theta)
        v = _as_vector(self.v)
        if theta.shape != v.shape:
            raise FlowError(
                f"theta and v must share a dimension, got {theta.shape} vs {v.shape}"
            )
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(v))):
            raise FlowError("state entries must be finite")
        theta = theta.copy()
        v = v.copy()
        theta.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "v", v)

    @property
    def dim(self) -> int:
        return self.theta.shape[0]


@dataclass(frozen=True)
class StackedGradientMomentum:
    """The stacked vector z = [grad f(theta); v] and its Euclidean norm."""

    grad: np.ndarray
    momentum: np.ndarray
    norm: float


def stacked(state: FlowState, objective: Objective) -> StackedGradientMomentum:
    grad = objective.grad(state.theta)
    if not np.all(np.isfinite(grad)):
        raise FlowError(f"objective returned a non-finite gradient at theta={state.theta}")
    norm = float(np.sqrt(np.dot(grad, grad) + np.dot(state.v, state.v)))
    return StackedGradientMomentum(grad=grad, momentum=np.asarray(state.v), norm=norm)


def vector_field(
    state: FlowState,
    params: FlowParams,
    objective: Objective,
    singular_tol: float = DEFAULT_SINGULAR_TOL,
) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate (theta', v') at the given state.

    Returns the exact zero field whenever ||z|| <= singular_tol: for
    alpha > -1 this is the continuous extension at the equilibrium, and
    it makes the equilibrium an exact fixed point of any integrator.
    """
    if singular_tol <= 0.0:
        raise FlowError("singular_tol must be positive")
    if state.dim != objective.dim:
        raise FlowError(
            f"state dimension {state.dim} does not match objective dimension "
            f"{objective.dim}"
        )
    z = stacked(state, objective)
    n = state.dim
    if z.norm <= singular_tol:
        return np.zeros(n), np.zeros(n)
    scale = z.norm ** params.alpha
    dtheta = scale * (-(1.0 - params.beta) * z.grad + params.beta * state.v)
    dv = -params.kappa * scale * (
        params.gamma * z.grad + (1.0 - params.gamma) * state.v
    )
    return dtheta, dv


def heavy_ball_params(alpha: float, gamma: float, kappa: float) -> FlowParams:
    """Heavy-ball structure: beta = 1, so theta' = ||z||^alpha v."""
    if not (0.0 < gamma < 1.0):
        raise FlowError(
            "heavy-ball structure needs gamma in (0, 1); gamma = 1 is the "
            "conservative case (use conservative_params)"
        )
    return FlowParams(alpha=alpha, beta=1.0, gamma=gamma, kappa=kappa)


def pi_params(alpha: float, beta: float, kappa: float) -> FlowParams:
    """PI structure: gamma = 1, so v' = -kappa ||z||^alpha grad f(theta)."""
    if not (0.0 < beta < 1.0):
        raise FlowError(
            "PI structure needs beta in (0, 1); beta = 1 is the conservative "
            "case (use conservative_params)"
        )
    return FlowParams(alpha=alpha, beta=beta, gamma=1.0, kappa=kappa)


def conservative_params(alpha: float, kappa: float) -> FlowParams:
    """The non-dissipative beta = gamma = 1 configuration.

    Energy H = ||v||^2/2 + kappa (f - f*) is invariant along trajectories,
    so the flow cannot converge; the returned params are tagged
    non_dissipative.
    """
    return FlowParams(alpha=alpha, beta=1.0, gamma=1.0, kappa=kappa, non_dissipative=True)


def energy(state: FlowState, objective: Objective, kappa: float) -> float:
    """H = ||v||^2 / 2 + kappa (f(theta) - f*).

    Uses the objective's registered optimal value when available so that
    H >= 0 and H = 0 exactly at the equilibrium; otherwise reports the
    raw kappa * f(theta) offsetless value.
    """
    if kappa <= 0.0:
        raise FlowError("kappa must be positive")
    f_val = objective.f(state.theta)
    if not np.isfinite(f_val):
        raise FlowError(f"objective value is non-finite at theta={state.theta}")
    f_star = objective.f_star if objective.optimum is not None else 0.0
    return 0.5 * float(np.dot(state.v, state.v)) + kappa * (f_val - f_star)
