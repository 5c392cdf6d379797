"""End-to-end acceptance suite: twelve numbered criteria.

Each `test_criterion_*` records exactly one PASS/FAIL line (printed by
the conftest terminal-summary hook) and asserts the criterion exactly as
stated, at the stated tolerances.  Three criteria encode qualitative
orderings that the measured dynamics contradict; those assertions are
kept as stated and fail honestly, and the companion `*_clause` tests pin
down which parts do hold.
"""

from functools import lru_cache

import numpy as np
import pytest

from ftflow import (
    DominanceEstimate,
    FlowParams,
    FlowState,
    IntegratorConfig,
    Trajectory,
    check_admissibility,
    conservative_params,
    estimate_dominance,
    fd_gradient,
    fit_certificate,
    integrate,
    make_objective,
    p_power,
    quadratic,
    rosenbrock,
    settling_envelope,
    shell_samples,
    verify_power_bound,
)
from ftflow.certificates import alpha_interval, schur_w
from ftflow.experiments import DOMINANCE_SEED

from acceptance_report import record


def check(criterion: int, ok: bool, detail: str) -> None:
    record(criterion, ok, detail)
    assert ok, f"criterion {criterion}: {detail}"


# ---------------------------------------------------------------------------
# Cached runs (several criteria share trajectories)

ROSEN_INTEG = IntegratorConfig(
    rel_tol=1e-8, abs_tol=1e-12, t_max=50.0, settle_tol=1e-9, record_stride=0.02
)
PPOWER_INTEG = IntegratorConfig(
    rel_tol=1e-10, abs_tol=1e-13, t_max=50.0, settle_tol=1e-9, record_stride=0.02
)


@lru_cache(maxsize=None)
def rosen_run(alpha: float, beta: float, gamma: float, stride: float = 0.02) -> Trajectory:
    state = FlowState(theta=np.array([-1.5, 2.0]), v=np.zeros(2))
    params = FlowParams(alpha=alpha, beta=beta, gamma=gamma, kappa=1.0)
    cfg = ROSEN_INTEG if stride == 0.02 else IntegratorConfig(
        rel_tol=1e-8, abs_tol=1e-12, t_max=50.0, settle_tol=1e-9, record_stride=stride
    )
    return integrate(state, params, rosenbrock(), cfg)


@lru_cache(maxsize=None)
def ppower_run(p: float, alpha: float, stride: float = 0.02) -> Trajectory:
    state = FlowState(theta=np.array([1.0, 0.0]), v=np.zeros(2))
    params = FlowParams(alpha=alpha, beta=0.5, gamma=0.5, kappa=1.0)
    cfg = PPOWER_INTEG if stride == 0.02 else IntegratorConfig(
        rel_tol=1e-10, abs_tol=1e-13, t_max=50.0, settle_tol=1e-9, record_stride=stride
    )
    return integrate(state, params, p_power(p, dim=2), cfg)


# ---------------------------------------------------------------------------
# 1. Finite-time settling of the scaled flow vs the unscaled baseline


def test_criterion_1_finite_time_settling():
    scaled = ppower_run(2.0, -0.8)
    baseline = ppower_run(2.0, 0.0)
    clause_scaled = scaled.settled_at is not None and scaled.settled_at < 50.0
    clause_baseline = baseline.settled_at is None
    detail = (
        f"alpha=-0.8 settles at {scaled.settled_at}; alpha=0 baseline "
        f"settled_at={baseline.settled_at} (required: no settling by t=50)"
    )
    check(1, clause_scaled and clause_baseline, detail)


def test_criterion_1_clause_scaled_flow_settles():
    traj = ppower_run(2.0, -0.8)
    assert traj.settled_at is not None
    assert traj.settled_at < 50.0
    assert traj.z_norm[-1] <= 1e-9


# ---------------------------------------------------------------------------
# 2. Settling time strictly decreasing in |alpha|


def test_criterion_2_alpha_ordering():
    times = [rosen_run(a, 0.5, 0.5).settled_at for a in (-0.25, -0.5, -0.75)]
    ok = all(t is not None for t in times) and times[0] > times[1] > times[2]
    check(2, ok, f"settling times for alpha -0.25/-0.5/-0.75: {times} (strictly decreasing)")


# ---------------------------------------------------------------------------
# 3. Structural failure modes at beta = 1 and gamma = 1


def test_criterion_3_structural_failure_modes():
    interior = rosen_run(-0.5, 0.5, 0.5)
    heavy = rosen_run(-0.5, 1.0, 0.5)
    pi = rosen_run(-0.5, 0.5, 1.0)
    theta_star = rosenbrock().theta_star
    err_h = float(np.linalg.norm(heavy.thetas[-1] - theta_star))
    err_p = float(np.linalg.norm(pi.thetas[-1] - theta_star))
    floor = 1e3 * ROSEN_INTEG.settle_tol
    ok = interior.settled_at is not None and err_h >= floor and err_p >= floor
    detail = (
        f"interior settles at {interior.settled_at}; final position errors "
        f"beta=1: {err_h:.3e}, gamma=1: {err_p:.3e} (required >= {floor:.0e})"
    )
    check(3, ok, detail)


def test_criterion_3_clause_interior_and_heavy_ball():
    interior = rosen_run(-0.5, 0.5, 0.5)
    heavy = rosen_run(-0.5, 1.0, 0.5)
    theta_star = rosenbrock().theta_star
    assert interior.settled_at is not None
    assert heavy.settled_at is None
    assert float(np.linalg.norm(heavy.thetas[-1] - theta_star)) >= 1e-6


# ---------------------------------------------------------------------------
# 4. Settling time ordering in the dominance order p


def test_criterion_4_p_ordering():
    times = [ppower_run(p, -0.8).settled_at for p in (1.5, 2.0, 3.0)]
    ok = all(t is not None for t in times) and times[0] < times[1] < times[2]
    check(4, ok, f"settling times for p 1.5/2/3: {times} (strictly increasing)")


def test_criterion_4_clause_sublinear_pair_ordered():
    t15 = ppower_run(1.5, -0.8).settled_at
    t20 = ppower_run(2.0, -0.8).settled_at
    assert t15 is not None and t20 is not None
    assert t15 < t20


# ---------------------------------------------------------------------------
# 5. Energy conservation of the non-dissipative structure


def test_criterion_5_energy_conservation():
    drifts = []
    settled = []
    for alpha in (0.0, -0.5):
        state = FlowState(theta=np.array([1.0, 0.0]), v=np.zeros(2))
        cfg = IntegratorConfig(
            rel_tol=1e-10, abs_tol=1e-13, t_max=50.0, settle_tol=1e-9, record_stride=0.05
        )
        traj = integrate(state, conservative_params(alpha=alpha, kappa=1.0), quadratic([1.0, 1.0]), cfg)
        assert traj.energy is not None
        e0 = traj.energy[0]
        drifts.append(float(np.max(np.abs(traj.energy - e0)) / e0))
        settled.append(traj.settled_at)
    ok = max(drifts) <= 1e-6 and all(s is None for s in settled)
    check(5, ok, f"relative energy drift {drifts} (<= 1e-6), settled_at {settled} (never)")


# ---------------------------------------------------------------------------
# 6. Analytic Lyapunov derivative vs finite differences; V monotone

FINE_STRIDE = 0.002

FINE_RUNS = (
    ("rosen-a025", lambda: rosen_run(-0.25, 0.5, 0.5, FINE_STRIDE)),
    ("rosen-a05", lambda: rosen_run(-0.5, 0.5, 0.5, FINE_STRIDE)),
    ("rosen-a075", lambda: rosen_run(-0.75, 0.5, 0.5, FINE_STRIDE)),
    ("rosen-heavyball", lambda: rosen_run(-0.5, 1.0, 0.5, FINE_STRIDE)),
    ("rosen-pi", lambda: rosen_run(-0.5, 0.5, 1.0, FINE_STRIDE)),
    ("ppower-p1.5", lambda: ppower_run(1.5, -0.8, FINE_STRIDE)),
    ("ppower-p2", lambda: ppower_run(2.0, -0.8, FINE_STRIDE)),
    ("ppower-p3", lambda: ppower_run(3.0, -0.8, FINE_STRIDE)),
    ("ppower-a0", lambda: ppower_run(2.0, 0.0, FINE_STRIDE)),
    ("ppower-a04", lambda: ppower_run(2.0, -0.4, FINE_STRIDE)),
    ("ppower-a05", lambda: ppower_run(2.0, -0.5, FINE_STRIDE)),
)


def _stencil(arr: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """(len(idx), 5) view of arr at offsets -2..2 around each index."""
    return np.stack([arr[idx + o] for o in (-2, -1, 0, 1, 2)], axis=1)


def _quartic_derivative(dt: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """Derivative at the center of each 5-point stencil via Lagrange
    differentiation weights (exact for quartics, handles nonuniform grids).

    dt, vals: (k, 5) arrays of node offsets (center column zero) and values.
    """
    w = np.empty_like(dt)
    for j in range(5):
        if j == 2:
            others = [0, 1, 3, 4]
            w[:, j] = -np.sum(1.0 / dt[:, others], axis=1)
        else:
            num = np.ones(dt.shape[0])
            den = np.ones(dt.shape[0])
            for m in range(5):
                if m == j:
                    continue
                den *= dt[:, j] - dt[:, m]
                if m != 2:
                    num *= -dt[:, m]
            w[:, j] = num / den
    return np.sum(w * vals, axis=1)


def _centered_derivative(dt: np.ndarray, vals: np.ndarray, k: int) -> np.ndarray:
    """Three-point first derivative at the stencil center using offsets
    +-k (second-order accurate on nonuniform grids)."""
    h1 = -dt[:, 2 - k]
    h2 = dt[:, 2 + k]
    return (
        -(h2 / (h1 * (h1 + h2))) * vals[:, 2 - k]
        + ((h2 - h1) / (h1 * h2)) * vals[:, 2]
        + (h1 / (h2 * (h1 + h2))) * vals[:, 2 + k]
    )


def _thin_to_stride(times: np.ndarray, stride: float) -> np.ndarray:
    """Indices of a subsample whose spacing is at least 0.9 * stride.

    Recording keeps every accepted step, so dense phases are sampled much
    finer than the nominal stride; differentiating on the finer grid
    amplifies the integrator's own noise in V, so the stencils are built
    on stride-spaced samples instead.
    """
    kept = [0]
    for i in range(1, times.size):
        if times[i] - times[kept[-1]] >= 0.9 * stride:
            kept.append(i)
    return np.asarray(kept)


def _vdot_fd_error(traj: Trajectory) -> tuple[float, int]:
    """Worst relative error between analytic Vdot and the local quartic
    slope of V, over samples where the stencil can resolve the slope.

    The mask keeps samples with near-uniform stencil spacing, ||z|| > 1e-3
    across the stencil, per-sample ||z|| change <= 5%, both stacked
    components carrying >= 5% of ||z|| (excludes gradient kinks and the
    degenerate directions of the boundary structures), and a Richardson
    consistency check on two centered differences so that only
    stencil-resolvable slopes are judged.
    """
    sub = _thin_to_stride(traj.times, FINE_STRIDE)
    ts = traj.times[sub]
    V = traj.V[sub]
    z = traj.z_norm[sub]
    vnorm = np.linalg.norm(traj.vs[sub], axis=1)
    gnorm = np.sqrt(np.clip(z**2 - vnorm**2, 0.0, None))
    m = ts.size
    idx = np.arange(2, m - 2)

    zs = _stencil(z, idx)
    vs = _stencil(vnorm, idx)
    gs = _stencil(gnorm, idx)
    dt = _stencil(ts, idx) - ts[idx][:, None]
    Vs = _stencil(V, idx)
    vdot = traj.Vdot[sub][idx]

    spacing = np.diff(dt, axis=1)
    mask = np.max(spacing, axis=1) <= 1.25 * np.min(spacing, axis=1)
    mask &= np.all(zs > 1e-3, axis=1)
    mask &= np.all(np.abs(np.diff(zs, axis=1)) <= 0.05 * zs[:, :-1], axis=1)
    mask &= np.all(vs >= 0.05 * zs, axis=1) & np.all(gs >= 0.05 * zs, axis=1)
    mask &= vdot != 0.0
    fd1 = _centered_derivative(dt, Vs, 1)
    fd2 = _centered_derivative(dt, Vs, 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        mask &= np.abs(fd1 - fd2) <= 0.5e-4 * np.abs(vdot)

    if not np.any(mask):
        return 0.0, 0
    fd = _quartic_derivative(dt[mask], Vs[mask])
    rel = np.abs(fd - vdot[mask]) / np.abs(vdot[mask])
    return float(np.max(rel)), int(np.count_nonzero(mask))


def test_criterion_6_lyapunov_identity_and_monotonicity():
    worst = 0.0
    worst_run = ""
    judged = 0
    monotone = True
    for name, make in FINE_RUNS:
        traj = make()
        err, count = _vdot_fd_error(traj)
        judged += count
        if err > worst:
            worst, worst_run = err, name
        slack = 1e-9 * max(float(traj.V[0]), 1.0)
        if np.any(np.diff(traj.V) > slack):
            monotone = False
    ok = worst <= 1e-4 and judged > 0 and monotone
    detail = (
        f"worst |Vdot - dV/dt|/|Vdot| = {worst:.3e} ({worst_run}, {judged} samples "
        f"judged, tol 1e-4); V non-increasing on all runs: {monotone}"
    )
    check(6, ok, detail)


# ---------------------------------------------------------------------------
# 7. Fitted certificate exponent a = alpha/2 + 1


def test_criterion_7_certificate_exponent():
    fits = {}
    ok = True
    for alpha in (-0.4, -0.8):
        fit = fit_certificate(ppower_run(2.0, alpha))
        fits[alpha] = (fit.c, fit.a)
        ok &= abs(fit.a - (alpha / 2.0 + 1.0)) <= 0.05

    # synthetic closed-form check: V(t) solving dV/dt = -c V^a exactly
    c_true, a_true, v0 = 0.7, 0.65, 1.0
    times = np.linspace(0.0, 3.5, 2001)
    V = (v0 ** (1.0 - a_true) - c_true * (1.0 - a_true) * times) ** (1.0 / (1.0 - a_true))
    synthetic = Trajectory(
        times=times,
        states=np.zeros((times.size, 2)),
        dim=1,
        f=V,
        V=V,
        Vdot=-c_true * V**a_true,
        z_norm=np.sqrt(V),
        energy=None,
        settled_at=None,
        terminated_reason="horizon",
    )
    fit = fit_certificate(synthetic, window=(0.0, 3.5))
    ok &= abs(fit.c - c_true) / c_true <= 0.02 and abs(fit.a - a_true) / a_true <= 0.02
    detail = (
        f"fitted (c, a) at alpha=-0.4: {fits[-0.4]}, alpha=-0.8: {fits[-0.8]} "
        f"(a within 0.05 of alpha/2+1); synthetic recovery (c, a) = "
        f"({fit.c:.4f}, {fit.a:.4f}) vs ({c_true}, {a_true}) within 2%"
    )
    check(7, ok, detail)


# ---------------------------------------------------------------------------
# 8. Brute-force local power bound


def test_criterion_8_power_bound():
    cases = [(1.0, 1.0), (1.5, 1.0), (2.0, 1.0), (2.0, 2.0), (3.0, 0.5)]
    results = []
    ok = True
    for a, delta in cases:
        C, slack = verify_power_bound(a, delta, grid=200)
        expected_C = 2.0 ** (a - 1.0) * max(1.0, delta ** (a - 1.0))
        results.append(slack)
        ok &= slack <= 0.0 and C == expected_C
    check(8, ok, f"max slacks over (a, delta) grid {cases}: {results} (all <= 0)")


# ---------------------------------------------------------------------------
# 9. Positive-definiteness threshold of the block matrix W


def test_criterion_9_schur_threshold():
    ok = True
    details = []
    for L, beta, gamma, kappa in [(1.0, 0.5, 0.5, 1.0), (4.0, 0.8, 0.2, 2.0)]:
        params = FlowParams(alpha=-0.5, beta=beta, gamma=gamma, kappa=kappa)
        threshold = np.sqrt(beta / (gamma * kappa * L))
        below = schur_w(params, L, 0.99 * threshold)
        above = schur_w(params, L, 1.01 * threshold)
        for report in (below, above):
            e = report.block_entries
            direct = np.linalg.eigvalsh(np.array([[e[0], e[1]], [e[2], e[3]]]))
            ok &= report.pd == bool(direct[0] > 0.0)
            ok &= abs(report.min_eig - direct[0]) <= 1e-14 * max(1.0, abs(direct[0]))
        ok &= below.pd and not above.pd
        details.append(f"L={L}: pd@0.99thr={below.pd}, pd@1.01thr={above.pd}")
    check(9, ok, "; ".join(details))


# ---------------------------------------------------------------------------
# 10. Admissibility intervals and verdicts


def test_criterion_10_admissibility():
    ok = True
    intervals = {}
    for p in (1.5, 2.0, 3.0):
        dom = DominanceEstimate(p=p, mu=1.0, sample_count=64, residual=0.0)
        report = check_admissibility(
            FlowParams(alpha=-0.8, beta=0.5, gamma=0.5, kappa=1.0), dom
        )
        intervals[p] = report.alpha_interval
    ok &= intervals[1.5] == (-1.0, 0.0) and intervals[2.0] == (-1.0, 0.0)
    ok &= intervals[3.0][0] == -1.0 and abs(intervals[3.0][1] - (-2.0 / 3.0)) <= 1e-12

    dom3 = DominanceEstimate(p=3.0, mu=4.0, sample_count=64, residual=0.0)
    good = check_admissibility(FlowParams(alpha=-0.8, beta=0.5, gamma=0.5, kappa=1.0), dom3)
    bad = check_admissibility(FlowParams(alpha=-0.5, beta=0.5, gamma=0.5, kappa=1.0), dom3)
    ok &= good.verdict == "certified" and bad.verdict == "not_certified"
    detail = (
        f"alpha intervals {intervals}; p=3 verdicts: alpha=-0.8 {good.verdict}, "
        f"alpha=-0.5 {bad.verdict}"
    )
    check(10, ok, detail)


def test_alpha_interval_closed_form():
    assert alpha_interval(1.5) == (-1.0, 0.0)
    assert alpha_interval(2.0) == (-1.0, 0.0)
    assert alpha_interval(3.0)[1] == pytest.approx(-2.0 / 3.0)


# ---------------------------------------------------------------------------
# 11. Gradient oracle and dominance estimator


def test_criterion_11_gradient_oracle_and_dominance():
    objectives = [
        rosenbrock(),
        p_power(1.5),
        p_power(2.0),
        p_power(3.0),
        quadratic([1.0, 3.0]),
    ]
    rng = np.random.default_rng(0)
    worst = 0.0
    for objective in objectives:
        for _ in range(100):
            theta = rng.uniform(-2.0, 2.0, objective.dim)
            h = 1e-6 * max(1.0, float(np.linalg.norm(theta)))
            g_fd = fd_gradient(objective, theta, h)
            g_an = objective.grad(theta)
            denom = max(float(np.linalg.norm(g_an)), 1e-12)
            worst = max(worst, float(np.linalg.norm(g_fd - g_an)) / denom)
    grad_ok = worst <= 1e-5

    dom_ok = True
    estimates = {}
    for p in (1.5, 2.0, 3.0):
        objective = p_power(p)
        dom = estimate_dominance(
            objective, shell_samples(objective, count=64, seed=DOMINANCE_SEED)
        )
        mu_true = (p - 1.0) ** (p - 1.0)
        estimates[p] = (dom.p, dom.mu)
        dom_ok &= abs(dom.p - p) / p <= 0.02
        dom_ok &= abs(dom.mu - mu_true) / mu_true <= 0.05
    detail = (
        f"worst FD gradient relative error {worst:.3e} (<= 1e-5); "
        f"dominance estimates (p, mu) {estimates}"
    )
    check(11, grad_ok and dom_ok, detail)


# ---------------------------------------------------------------------------
# 12. Settling time vs the certificate envelope bound


def test_criterion_12_settling_envelope():
    traj = ppower_run(2.0, -0.5)
    fit = fit_certificate(traj)
    f0_gap = float(traj.f[0])  # f* = 0 for the power objective
    t_s, _ = settling_envelope(f0_gap, alpha=-0.5, rho=fit.c, C=1.0)
    ok = traj.settled_at is not None and traj.settled_at <= 1.5 * t_s
    detail = (
        f"settled at {traj.settled_at} vs envelope bound T_s = {t_s:.6f} "
        f"(rho = fitted c = {fit.c:.6f}), slack factor 1.5"
    )
    check(12, ok, detail)
