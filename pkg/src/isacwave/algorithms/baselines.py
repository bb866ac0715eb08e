"""Reference designs the trade-off front is measured against.

Two families.  The normalized weighted sum reuses the trade-off solver's
subproblem machinery but scores a plain convex combination of the two
normalized objectives, with no max and no augmentation, so it inherits the
usual weighted-sum blind spots on non-convex fronts.  The single-objective
boundary tracers optimize one objective subject to a hard threshold on the
other and mark out the attainable region's edges.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from ..convex import (
    AffineEq,
    AffineIneq,
    ConvexProblem,
    ConvexQuadIneq,
    LogAffine,
    PsdCone,
    SolverConfig,
    Status,
    solve,
)
from ..metrics import evaluate_waveform
from ..model import ScenarioDraw
from .moop import ParetoPoint, _amplitude_matched
from .operators import ScenarioOperators
from .scalarization import ScalarizationWeights, Utopia
from .soop import (
    LOG2E,
    IterationTrace,
    WaveformDesign,
    _aligned_start,
    _power_min_start,
    extract_waveform,
    solve_soop1,
    solve_soop2,
)

MSE_MIN_RATE_CONSTRAINED = "mse_min_rate_constrained"
RATE_MAX_MSE_CONSTRAINED = "rate_max_mse_constrained"


class _CommLayout:
    """Index bookkeeping for per-user amplitudes and optional rate terms."""

    def __init__(self, n_users: int, with_mu: bool = True):
        self.k = n_users
        self.with_mu = with_mu
        self.n = (3 if with_mu else 2) * n_users

    def cr(self, k: int) -> int:
        return k

    def ci(self, k: int) -> int:
        return self.k + k

    def mu(self, k: int) -> int:
        return 2 * self.k + k

    def split(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
        k = self.k
        c = u[:k] + 1j * u[k:2 * k]
        mu = u[2 * k:3 * k] if self.with_mu else None
        return c, mu


def _add_comm_blocks(p: ConvexProblem, ops: ScenarioOperators,
                     lay: _CommLayout, cbar: np.ndarray | None = None) -> None:
    """Symbol-region cones, powering caps, and (with mu) linearized rate bounds."""
    noise = ops.noise
    for k in range(lay.k):
        if lay.with_mu:
            a = np.zeros(lay.n)
            a[lay.cr(k)] = 2.0 * cbar[k].real / noise
            a[lay.ci(k)] = 2.0 * cbar[k].imag / noise
            b = 1.0 - abs(cbar[k]) ** 2 / noise
            p.add(LogAffine(mu_index=lay.mu(k), a=a, b=b))
        geom = ops.ci_rows_amplitude(k)
        for row in geom.rows:
            full = np.zeros(lay.n)
            full[lay.cr(k)] = row[0]
            full[lay.ci(k)] = row[1]
            p.add(AffineIneq(a=full, b=geom.rhs))
        q = np.zeros((lay.n, lay.n))
        q[lay.cr(k), lay.cr(k)] = 1.0
        q[lay.ci(k), lay.ci(k)] = 1.0
        p.add(ConvexQuadIneq(q_vec=q, mat_lin=-ops.channel_outers[k], rhs=0.0))


def _comm_resume(ops: ScenarioOperators, lay: _CommLayout, u_prev: np.ndarray,
                 r_prev: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
    """Previous solution as a start, if still strictly interior."""
    c, mu = lay.split(u_prev)
    tiny = 1e-12
    margins = (c.real - ops.amp_floor) * ops.tan_phi - np.abs(c.imag)
    if margins.min() <= tiny:
        return None
    noise = ops.noise
    for k in range(lay.k):
        cap = float((ops.scenario.channels[k].conj()
                     @ r_prev @ ops.scenario.channels[k]).real)
        if cap - abs(c[k]) ** 2 <= tiny * (1.0 + abs(c[k]) ** 2):
            return None
        if mu is not None \
                and np.log1p(abs(c[k]) ** 2 / noise) - mu[k] <= tiny:
            return None
    if float(np.linalg.eigvalsh(r_prev)[0]) <= 0.0:
        return None
    return u_prev.copy(), r_prev


def _comm_start(ops: ScenarioOperators, lay: _CommLayout, cbar: np.ndarray,
                r_start: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
    """Strictly feasible warm start around the linearization point."""
    noise = ops.noise
    caps = np.array([float((h.conj() @ r_start @ h).real)
                     for h in ops.scenario.channels])
    need = np.abs(cbar) ** 2
    if np.any(caps <= 0.0):
        return None
    # shrink the amplitudes only when the covariance cannot power them as is;
    # shrinking eats into the symbol-region margins, so it is a last resort
    s = 1.0
    if float(np.min(caps - need)) <= 1e-9 * (1.0 + float(need.max())):
        s = float(np.sqrt(0.95 * np.min(caps / np.maximum(need, 1e-300))))
    if not np.isfinite(s) or s <= 0.0:
        return None
    s = min(s, 1.0)
    c0 = s * cbar
    margins = (c0.real - ops.amp_floor) * ops.tan_phi - np.abs(c0.imag)
    if margins.min() <= 1e-10:
        return None
    u = np.zeros(lay.n)
    u[:lay.k] = c0.real
    u[lay.k:2 * lay.k] = c0.imag
    if lay.with_mu:
        for k in range(lay.k):
            lin = 2.0 * (cbar[k].conjugate() * c0[k]).real - abs(cbar[k]) ** 2
            arg = (lin + noise) / noise
            if arg <= 1.0e-12:
                return None
            u[lay.mu(k)] = np.log(arg) - 1e-6
    return u, r_start


def _embedded_covariance(ops: ScenarioOperators, x0: np.ndarray) -> np.ndarray:
    """Rank-one embedding of a waveform, padded to full power and full rank."""
    m = ops.n_tx
    gamma = (ops.p_max - float(np.vdot(x0, x0).real)) / m
    return (np.outer(x0, x0.conj())
            + max(gamma, 1e-12 * ops.p_max / m) * np.eye(m, dtype=complex))


def _failed_point(weights: ScalarizationWeights, status: str) -> ParetoPoint:
    return ParetoPoint(weights=weights, design=None, f1=float("nan"),
                       f2=float("nan"), f1_relaxed=float("nan"),
                       f2_relaxed=float("nan"), alpha=float("nan"),
                       iterations=0, converged=False, status=status)


# -- normalized weighted sum ------------------------------------------------------


def weighted_sum_baseline(scenario: ScenarioDraw, utopia: Utopia,
                          weights: ScalarizationWeights,
                          solver_config: SolverConfig | None = None,
                          eps: float | None = None,
                          max_iters: int | None = None,
                          n_draws: int = 100,
                          rng: np.random.Generator | None = None,
                          ops: ScenarioOperators | None = None) -> ParetoPoint:
    """One comparison point: minimize w1*f1/|f1*| + w2*f2/f2* by SCA.

    Same constraints and linearization as the trade-off solver; only the
    scoring differs (plain weighted sum, no max over objectives and no
    augmentation).  The returned point's ``alpha`` holds the achieved
    weighted-sum value of the relaxed solution.  At an extreme weight the
    surviving term is the corresponding single objective rescaled, so the
    matching single-objective solver runs directly.
    """
    cfg = scenario.config
    ops = ops or ScenarioOperators(scenario)
    scfg = solver_config or SolverConfig(tol=1e-7)
    eps = cfg.eps_moop if eps is None else float(eps)
    max_iters = cfg.max_iters_moop if max_iters is None else int(max_iters)
    kappa = cfg.bandwidth_hz * LOG2E
    w1, w2 = weights.omega1, weights.omega2

    def ws_value(f1: float, f2: float) -> float:
        return w1 * f1 / abs(utopia.f1_star) + w2 * f2 / utopia.f2_star

    if w2 == 0.0:
        s1 = solve_soop1(scenario, solver_config=solver_config, ops=ops)
        if s1.x is None:
            return _failed_point(weights, s1.status)
        r = np.outer(s1.x, s1.x.conj())
        f2 = ops.sensing_objective(r)
        design = WaveformDesign(x=s1.x, r=r,
                                report=evaluate_waveform(scenario, x=s1.x, r=r))
        return ParetoPoint(weights=weights, design=design, f1=s1.f1, f2=f2,
                           f1_relaxed=s1.f1, f2_relaxed=f2,
                           alpha=ws_value(s1.f1, f2),
                           iterations=s1.iterations, converged=s1.converged,
                           status=s1.status, trajectory=s1.trajectory)
    if w1 == 0.0:
        s2 = solve_soop2(scenario, solver_config=solver_config,
                         n_draws=n_draws, rng=rng, ops=ops)
        if s2.r is None or s2.x is None:
            return _failed_point(weights, s2.status)
        f1 = -kappa * ops.sum_mu(s2.x)
        design = WaveformDesign(x=s2.x, r=s2.r,
                                report=evaluate_waveform(scenario, x=s2.x, r=s2.r),
                                extraction_fallback=s2.fallback)
        return ParetoPoint(weights=weights, design=design, f1=f1,
                           f2=s2.mse_extracted, f1_relaxed=f1,
                           f2_relaxed=s2.f2, alpha=ws_value(f1, s2.f2),
                           iterations=s2.iterations, converged=s2.converged,
                           status=s2.status, fallback=s2.fallback,
                           trajectory=s2.trajectory)

    x0 = _aligned_start(ops)
    if x0 is None:
        x0, why = _power_min_start(ops, scfg)
        if x0 is None:
            return _failed_point(weights, why)

    m = ops.n_tx
    eye = np.eye(m, dtype=complex)
    cbar = np.array([u.rotated_channel.conj() @ x0 for u in ops.users])
    r_prev = _embedded_covariance(ops, x0)
    interior = (ops.p_max / m) * eye
    mse_q = ops.mse_quad_eta_opt

    status = Status.MAX_ITERS.value
    converged = False
    iterations = 0
    value = float("nan")
    step = float("nan")
    mu_star: np.ndarray | None = None
    traj: list[IterationTrace] = []
    t_hint: float | None = None
    u_prev: np.ndarray | None = None
    lay = _CommLayout(len(ops.users))

    for it in range(1, max_iters + 1):
        p = ConvexProblem(vector_dim=lay.n, matrix_dim=m)
        cost = np.zeros(lay.n)
        for k in range(lay.k):
            cost[lay.mu(k)] = -w1 * kappa / abs(utopia.f1_star)
        p.add_linear_cost(cost)
        p.add_matrix_quad_cost(mse_q.scaled(w2 / utopia.f2_star))
        _add_comm_blocks(p, ops, lay, cbar)
        p.add(AffineEq(f=eye, b=ops.p_max))
        p.add(PsdCone())
        start = None
        if u_prev is not None:
            start = _comm_resume(ops, lay, u_prev, r_prev)
        if start is not None:
            p.set_start(u=start[0], mat=start[1], start_t=t_hint)
        else:
            start = _comm_start(ops, lay, cbar,
                                0.995 * r_prev + 0.005 * interior)
            if start is not None:
                p.set_start(u=start[0], mat=start[1])
        sol = solve(p, scfg)
        accept = sol.status is Status.OPTIMAL and sol.u is not None
        if not accept and sol.u is not None and np.all(np.isfinite(sol.u)) \
                and sol.matrix is not None:
            # keep a certificate-less but sound point while it still descends
            _, mu_try = lay.split(sol.u)
            v_try = ws_value(-kappa * float(mu_try.sum()),
                             ops.sensing_objective(sol.matrix))
            accept = (sol.kkt.primal <= 1e-7 * max(1.0, ops.p_max)
                      and sol.kkt.dual <= 1e-5
                      and (not np.isfinite(value)
                           or v_try <= value + 1e-8 * (1.0 + abs(value))))
        if not accept:
            status = sol.status.value
            break
        tf = sol.info.get("t_final")
        if tf:
            t_hint = min(1e4, tf / scfg.barrier_growth ** 2)
        iterations = it
        value_prev = value
        step_prev = step
        c_new, mu_star = lay.split(sol.u)
        u_prev = sol.u
        r_prev = 0.5 * (sol.matrix + sol.matrix.conj().T)
        value = ws_value(-kappa * float(mu_star.sum()),
                         ops.sensing_objective(r_prev))
        step = float(np.abs(c_new - cbar).max())
        traj.append(IterationTrace(it, value, step))
        cbar = c_new
        if step <= eps:
            status = Status.OPTIMAL.value
            converged = True
            break
        stalled = (np.isfinite(value_prev)
                   and abs(value - value_prev) <= 1e-9 * (1.0 + abs(value))
                   and np.isfinite(step_prev) and step > 0.9 * step_prev)
        if stalled and scfg.tol > 1e-9:
            # solver noise dominates movement on a flat valley; finish tighter
            scfg = dataclasses.replace(scfg, tol=max(scfg.tol * 1e-2, 1e-9))

    f1_relaxed = -kappa * float(mu_star.sum()) if mu_star is not None else float("nan")
    f2_relaxed = ops.sensing_objective(r_prev)

    def selector(x: np.ndarray) -> float:
        return ws_value(-kappa * ops.sum_mu(x),
                        ops.sensing_objective(np.outer(x, x.conj())))

    x, _, fallback = extract_waveform(r_prev, scenario, n_draws=n_draws,
                                      selector=selector, rng=rng, ops=ops)
    candidates = [] if fallback else [x]
    candidates.extend(_amplitude_matched(ops, cbar))
    feasible = [c for c in candidates
                if ops.waveform_margins(c).min() >= -1e-6]
    pool = feasible or candidates
    if pool:
        x = min(pool, key=selector)
        fallback = False
    f1 = -kappa * ops.sum_mu(x)
    f2 = ops.sensing_objective(np.outer(x, x.conj()))
    report = evaluate_waveform(scenario, x=x, r=r_prev)
    design = WaveformDesign(x=x, r=r_prev, report=report,
                            extraction_fallback=fallback)
    power_ok = float(np.vdot(x, x).real) <= ops.p_max * (1.0 + 1e-8)
    margins_ok = ops.waveform_margins(x).min() >= -1e-6
    return ParetoPoint(weights=weights, design=design, f1=f1, f2=f2,
                       f1_relaxed=f1_relaxed, f2_relaxed=f2_relaxed,
                       alpha=value, iterations=iterations,
                       converged=converged and power_ok and margins_ok,
                       status=status, fallback=fallback, trajectory=tuple(traj))


# -- single-objective boundary tracers --------------------------------------------


def _rate_floor_scenario(scenario: ScenarioDraw, rate_bps: float) -> ScenarioDraw:
    """Scenario whose symbol-region floor encodes a per-user rate threshold.

    A rate floor r maps to the receive-SNR floor 2**(r/B) - 1; amplitudes in
    the shifted symbol region then guarantee at least that rate.
    """
    cfg = scenario.config
    snr_floor = 2.0 ** (rate_bps / cfg.bandwidth_hz) - 1.0
    eff = cfg.replace(gamma_db=10.0 * math.log10(snr_floor))
    return dataclasses.replace(scenario, config=eff)


def _min_mse_covariance(ops: ScenarioOperators,
                        scfg: SolverConfig) -> tuple[np.ndarray, float]:
    """Unconstrained-communication template fit; anchors attainability checks."""
    m = ops.n_tx
    eye = np.eye(m, dtype=complex)
    p = ConvexProblem(matrix_dim=m)
    p.add_matrix_quad_cost(ops.mse_quad_eta_opt)
    p.add(AffineEq(f=eye, b=ops.p_max))
    p.add(PsdCone())
    p.set_start(mat=(ops.p_max / m) * eye)
    sol = solve(p, scfg)
    if sol.status is not Status.OPTIMAL or sol.matrix is None:
        raise ValueError(f"template-fit anchor solve failed: {sol.status.value}")
    r = 0.5 * (sol.matrix + sol.matrix.conj().T)
    return r, ops.sensing_objective(r)


def _solve_mse_min(scenario: ScenarioDraw, rate_bps: float,
                   scfg: SolverConfig, n_draws: int,
                   rng: np.random.Generator | None) -> WaveformDesign:
    eff = _rate_floor_scenario(scenario, rate_bps)
    ops = ScenarioOperators(eff)
    m = ops.n_tx
    eye = np.eye(m, dtype=complex)
    lay = _CommLayout(len(ops.users), with_mu=False)

    p = ConvexProblem(vector_dim=lay.n, matrix_dim=m)
    p.add_matrix_quad_cost(ops.mse_quad_eta_opt)
    _add_comm_blocks(p, ops, lay)
    p.add(AffineEq(f=eye, b=ops.p_max))
    p.add(PsdCone())
    c0 = 1.05 * ops.amp_floor.astype(complex)
    for r0 in ((ops.p_max / m) * eye,
               0.5 * (ops.p_max / m) * eye + 0.5 * _spread_covariance(ops)):
        start = _comm_start(ops, lay, c0, r0)
        if start is not None:
            p.set_start(u=start[0], mat=start[1])
            break
    sol = solve(p, scfg)
    if sol.status is not Status.OPTIMAL or sol.matrix is None:
        raise ValueError(
            f"rate floor {rate_bps} bps unattainable: {sol.status.value}")
    r = 0.5 * (sol.matrix + sol.matrix.conj().T)
    x, _, fallback = extract_waveform(r, eff, n_draws=n_draws, rng=rng, ops=ops)
    report = evaluate_waveform(scenario, x=x, r=r)
    return WaveformDesign(x=x, r=r, report=report, extraction_fallback=fallback)


def _spread_covariance(ops: ScenarioOperators) -> np.ndarray:
    """Full-power covariance spread across the user channels."""
    m = ops.n_tx
    w = np.zeros((m, m), dtype=complex)
    for h in ops.scenario.channels:
        n2 = float(np.vdot(h, h).real)
        if n2 > 0.0:
            w += np.outer(h, h.conj()) / n2
    w += 1e-3 * np.eye(m)
    return ops.p_max * w / float(np.trace(w).real)


def _solve_rate_max(scenario: ScenarioDraw, mse_cap: float,
                    scfg: SolverConfig, eps: float, max_iters: int,
                    n_draws: int,
                    rng: np.random.Generator | None) -> WaveformDesign:
    ops = ScenarioOperators(scenario)
    cfg = scenario.config
    kappa = cfg.bandwidth_hz * LOG2E
    m = ops.n_tx
    eye = np.eye(m, dtype=complex)

    r_sense, mse_floor = _min_mse_covariance(ops, scfg)
    if mse_cap <= mse_floor * (1.0 - 1e-6):
        raise ValueError(f"template-fit cap {mse_cap} below the attainable "
                         f"minimum {mse_floor}")
    # ridge keeps the fit anchor usable as a strictly interior blend target
    r_sense = r_sense + 1e-6 * (ops.p_max / m) * eye
    r_sense *= ops.p_max / float(np.trace(r_sense).real)

    x0 = _aligned_start(ops)
    if x0 is None:
        x0, why = _power_min_start(ops, scfg)
        if x0 is None:
            raise ValueError(f"symbol-region constraints infeasible: {why}")
    cbar = np.array([u.rotated_channel.conj() @ x0 for u in ops.users])
    r_prev = _embedded_covariance(ops, x0)

    # a tight cap rules out the rate-aligned embedding; walk the covariance
    # toward the fit anchor and re-center the linearization on amplitudes
    # the capped covariance can actually power
    target = mse_floor + 0.9 * (mse_cap - mse_floor)
    if ops.sensing_objective(r_prev) >= target:
        for tau in (0.1, 0.3, 0.6, 0.9, 1.0):
            r_try = (1.0 - tau) * r_prev + tau * r_sense
            if ops.sensing_objective(r_try) < target \
                    and float(np.linalg.eigvalsh(r_try)[0]) > 0.0:
                r_prev = r_try
                break
        else:
            raise ValueError(f"no strictly interior start under template-fit "
                             f"cap {mse_cap}")
        caps = np.array([float((h.conj() @ r_prev @ h).real)
                         for h in ops.scenario.channels])
        room = np.sqrt(0.8 * np.maximum(caps, 0.0))
        cbar = np.where(np.abs(cbar) > room,
                        np.maximum(room, 1.02 * ops.amp_floor) + 0j, cbar)

    lay = _CommLayout(len(ops.users))
    status = Status.MAX_ITERS.value
    sum_mu_prev = float("nan")
    u_prev: np.ndarray | None = None
    t_hint: float | None = None

    for it in range(1, max_iters + 1):
        p = ConvexProblem(vector_dim=lay.n, matrix_dim=m)
        cost = np.zeros(lay.n)
        for k in range(lay.k):
            cost[lay.mu(k)] = -kappa
        p.add_linear_cost(cost)
        _add_comm_blocks(p, ops, lay, cbar)
        p.add(ConvexQuadIneq(mat_quad=ops.mse_quad_eta_opt, rhs=mse_cap))
        p.add(AffineEq(f=eye, b=ops.p_max))
        p.add(PsdCone())
        start = None
        if u_prev is not None and ops.sensing_objective(r_prev) < mse_cap:
            start = _comm_resume(ops, lay, u_prev, r_prev)
        if start is not None:
            p.set_start(u=start[0], mat=start[1], start_t=t_hint)
        else:
            # blending toward the fit anchor keeps the cap strictly slack
            start = _comm_start(ops, lay, cbar,
                                0.995 * r_prev + 0.005 * r_sense)
            if start is not None:
                p.set_start(u=start[0], mat=start[1])
        sol = solve(p, scfg)
        if sol.status is not Status.OPTIMAL or sol.u is None:
            status = sol.status.value
            break
        c_new, mu_star = lay.split(sol.u)
        u_prev = sol.u
        r_prev = 0.5 * (sol.matrix + sol.matrix.conj().T)
        tf = sol.info.get("t_final")
        if tf:
            t_hint = min(1e4, tf / scfg.barrier_growth ** 2)
        step = float(np.abs(c_new - cbar).max())
        cbar = c_new
        sum_mu = float(mu_star.sum())
        delta = abs(sum_mu - sum_mu_prev)
        sum_mu_prev = sum_mu
        if step <= eps or delta <= eps:
            status = Status.OPTIMAL.value
            break

    if u_prev is None:
        raise ValueError(
            f"template-fit cap {mse_cap} unattainable with the symbol-region "
            f"constraints: {status}")

    def selector(x: np.ndarray) -> float:
        return -ops.sum_mu(x)

    x, _, fallback = extract_waveform(r_prev, scenario, n_draws=n_draws,
                                      selector=selector, rng=rng, ops=ops)
    candidates = [] if fallback else [x]
    candidates.extend(_amplitude_matched(ops, cbar))
    feasible = [c for c in candidates
                if ops.waveform_margins(c).min() >= -1e-6]
    pool = feasible or candidates
    if pool:
        x = min(pool, key=selector)
        fallback = False
    report = evaluate_waveform(scenario, x=x, r=r_prev)
    return WaveformDesign(x=x, r=r_prev, report=report,
                          extraction_fallback=fallback)


def soo_baselines(scenario: ScenarioDraw, threshold: float, mode: str,
                  solver_config: SolverConfig | None = None,
                  eps: float | None = None,
                  max_iters: int | None = None,
                  n_draws: int = 100,
                  rng: np.random.Generator | None = None) -> WaveformDesign:
    """Boundary tracer: one objective optimized under a cap on the other.

    ``mse_min_rate_constrained`` minimizes the template-fit error subject to
    a per-user rate of at least ``threshold`` (bps); the rate floor tightens
    the symbol-region amplitude floor, so the program stays convex and is
    solved in one shot.  ``rate_max_mse_constrained`` maximizes the sum rate
    subject to a template-fit error of at most ``threshold``, by the same
    received-power linearization the trade-off solver uses.  Degenerate
    thresholds delegate: a zero rate floor is the plain template fit, an
    infinite error cap is the plain rate maximization.

    Raises ValueError when the threshold is unattainable.
    """
    cfg = scenario.config
    scfg = solver_config or SolverConfig(tol=1e-7)
    if mode == MSE_MIN_RATE_CONSTRAINED:
        if not (threshold >= 0.0) or math.isinf(threshold):
            raise ValueError(
                f"rate floor must be finite and >= 0, got {threshold!r}")
        if threshold == 0.0:
            s2 = solve_soop2(scenario, solver_config=solver_config,
                             n_draws=n_draws, rng=rng)
            if s2.r is None or s2.x is None:
                raise ValueError(f"template fit failed: {s2.status}")
            report = evaluate_waveform(scenario, x=s2.x, r=s2.r)
            return WaveformDesign(x=s2.x, r=s2.r, report=report,
                                  extraction_fallback=s2.fallback)
        return _solve_mse_min(scenario, threshold, scfg, n_draws, rng)
    if mode == RATE_MAX_MSE_CONSTRAINED:
        if not (threshold > 0.0):
            raise ValueError(
                f"template-fit cap must be > 0, got {threshold!r}")
        if math.isinf(threshold):
            s1 = solve_soop1(scenario, solver_config=solver_config)
            if s1.x is None:
                raise ValueError(f"rate maximization failed: {s1.status}")
            r = np.outer(s1.x, s1.x.conj())
            report = evaluate_waveform(scenario, x=s1.x, r=r)
            return WaveformDesign(x=s1.x, r=r, report=report)
        eps = cfg.eps_rate if eps is None else float(eps)
        max_iters = cfg.max_iters_soop1 if max_iters is None else int(max_iters)
        return _solve_rate_max(scenario, threshold, scfg, eps, max_iters,
                               n_draws, rng)
    raise ValueError(f"mode must be one of {MSE_MIN_RATE_CONSTRAINED!r}, "
                     f"{RATE_MAX_MSE_CONSTRAINED!r}; got {mode!r}")
