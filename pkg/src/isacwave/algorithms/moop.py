"""Joint waveform design trading communication rate against template fit.

The multi-objective problem is scalarized by the max of two augmented,
weighted degradation terms (relative loss versus each objective's own
optimum) and solved by successive convex approximation: per-user auxiliary
received amplitudes carry the communication constraints, a shared covariance
carries power and sensing, and only the rate bound's received power is
linearized.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

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
from .operators import ScenarioOperators
from .scalarization import (
    ScalarizationWeights,
    Utopia,
    degradation_alpha,
    degradation_terms,
    dominance_filter,
    weight_grid,
)
from .soop import (
    LOG2E,
    IterationTrace,
    Soop1Result,
    Soop2Result,
    WaveformDesign,
    _aligned_start,
    _power_min_start,
    extract_waveform,
    solve_soop1,
    solve_soop2,
)


@dataclass
class ParetoPoint:
    weights: ScalarizationWeights
    design: WaveformDesign | None
    f1: float
    f2: float
    f1_relaxed: float
    f2_relaxed: float
    alpha: float
    iterations: int
    converged: bool
    status: str
    fallback: bool = False
    trajectory: tuple[IterationTrace, ...] = field(default_factory=tuple)

    @property
    def sum_rate_bps(self) -> float:
        return -self.f1

    @property
    def mse(self) -> float:
        return self.f2


@dataclass
class ParetoFront:
    utopia: Utopia
    points: tuple[ParetoPoint, ...]
    filtered: tuple[ParetoPoint, ...]
    rate_anchor: Soop1Result | None = None
    mse_anchor: Soop2Result | None = None


def compute_utopia(scenario: ScenarioDraw,
                   solver_config: SolverConfig | None = None,
                   n_draws: int = 100,
                   rng: np.random.Generator | None = None,
                   ops: ScenarioOperators | None = None
                   ) -> tuple[Utopia, Soop1Result, Soop2Result]:
    """Anchor solves for both objectives; raises if either anchor is invalid."""
    ops = ops or ScenarioOperators(scenario)
    rate = solve_soop1(scenario, solver_config=solver_config, ops=ops)
    sense = solve_soop2(scenario, solver_config=solver_config, ops=ops,
                        n_draws=n_draws, rng=rng)
    return Utopia(f1_star=rate.f1, f2_star=sense.f2), rate, sense


# -- subproblem assembly --------------------------------------------------------


class _MoopLayout:
    """Index bookkeeping for the subproblem's vector block."""

    def __init__(self, n_users: int):
        self.k = n_users
        self.n = 3 * n_users + 1
        self.alpha = 3 * n_users

    def cr(self, k: int) -> int:
        return k

    def ci(self, k: int) -> int:
        return self.k + k

    def mu(self, k: int) -> int:
        return 2 * self.k + k

    def split(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
        k = self.k
        c = u[:k] + 1j * u[k:2 * k]
        mu = u[2 * k:3 * k]
        return c, mu, float(u[self.alpha])


def _build_subproblem(ops: ScenarioOperators, utopia: Utopia,
                      weights: ScalarizationWeights, cbar: np.ndarray,
                      kappa: float) -> tuple[ConvexProblem, _MoopLayout]:
    lay = _MoopLayout(len(ops.users))
    noise = ops.noise
    p = ConvexProblem(vector_dim=lay.n, matrix_dim=ops.n_tx)

    cost = np.zeros(lay.n)
    cost[lay.alpha] = 1.0
    p.add_linear_cost(cost)

    for k in range(lay.k):
        # rate bound through the linearized received power
        a = np.zeros(lay.n)
        a[lay.cr(k)] = 2.0 * cbar[k].real / noise
        a[lay.ci(k)] = 2.0 * cbar[k].imag / noise
        b = 1.0 - abs(cbar[k]) ** 2 / noise
        p.add(LogAffine(mu_index=lay.mu(k), a=a, b=b))
        # symbol-region cone on the auxiliary amplitude
        geom = ops.ci_rows_amplitude(k)
        for row in geom.rows:
            full = np.zeros(lay.n)
            full[lay.cr(k)] = row[0]
            full[lay.ci(k)] = row[1]
            p.add(AffineIneq(a=full, b=geom.rhs))
        # the amplitude must be powered by the covariance
        q = np.zeros((lay.n, lay.n))
        q[lay.cr(k), lay.cr(k)] = 1.0
        q[lay.ci(k), lay.ci(k)] = 1.0
        p.add(ConvexQuadIneq(q_vec=q, mat_lin=-ops.channel_outers[k], rhs=0.0))

    # max of the two augmented degradation terms, epigraph form
    mse_q = ops.mse_quad_eta_opt
    f1_scale = kappa / abs(utopia.f1_star)
    w1, w2, xi = weights.omega1, weights.omega2, weights.xi
    terms = (
        (-w1 * (1.0 + xi) * f1_scale, w1 * xi / utopia.f2_star, -w1),
        (-w2 * xi * f1_scale, w2 * (1.0 + xi) / utopia.f2_star, w2),
    )
    for mu_coeff, quad_scale, rhs in terms:
        lin = np.zeros(lay.n)
        lin[lay.alpha] = -1.0
        for k in range(lay.k):
            lin[lay.mu(k)] = mu_coeff
        p.add(ConvexQuadIneq(lin_vec=lin, mat_quad=mse_q.scaled(quad_scale),
                             rhs=rhs))

    p.add(AffineEq(f=np.eye(ops.n_tx, dtype=complex), b=ops.p_max))
    p.add(PsdCone())
    return p, lay


def _resume_start(ops: ScenarioOperators, utopia: Utopia,
                  weights: ScalarizationWeights, lay: _MoopLayout,
                  u_prev: np.ndarray, r_prev: np.ndarray, kappa: float
                  ) -> tuple[np.ndarray, np.ndarray] | None:
    """Previous subproblem solution as a start, if still strictly interior.

    Re-linearizing the rate bound around its own amplitudes only widens that
    bound, so the last solution usually stays feasible; tightness of any
    other constraint at the optimum is what this check guards against.
    """
    c, mu, alpha = lay.split(u_prev)
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
        if np.log1p(abs(c[k]) ** 2 / noise) - mu[k] <= tiny:
            return None
    if float(np.linalg.eigvalsh(r_prev)[0]) <= 0.0:
        return None
    f1_rel = -kappa * float(mu.sum())
    f2_rel = ops.sensing_objective(r_prev)
    d1, d2 = degradation_terms(f1_rel, f2_rel, utopia)
    t1 = weights.omega1 * ((1 + weights.xi) * d1 + weights.xi * d2)
    t2 = weights.omega2 * ((1 + weights.xi) * d2 + weights.xi * d1)
    if alpha - max(t1, t2) <= tiny * (1.0 + abs(alpha)):
        return None
    return u_prev.copy(), r_prev


def _subproblem_start(ops: ScenarioOperators, utopia: Utopia,
                      weights: ScalarizationWeights, lay: _MoopLayout,
                      cbar: np.ndarray, r_start: np.ndarray, kappa: float
                      ) -> tuple[np.ndarray, np.ndarray] | None:
    """Strictly feasible warm start for the current subproblem, if one exists."""
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
    mu0 = np.empty(lay.k)
    for k in range(lay.k):
        lin = 2.0 * (cbar[k].conjugate() * c0[k]).real - abs(cbar[k]) ** 2
        arg = (lin + noise) / noise
        if arg <= 1.0e-12:
            return None
        mu0[k] = np.log(arg) - 1e-6
    f1_0 = -kappa * float(mu0.sum())
    rv = r_start
    f2_0 = ops.sensing_objective(rv)
    d1, d2 = degradation_terms(f1_0, f2_0, utopia)
    t1 = weights.omega1 * ((1 + weights.xi) * d1 + weights.xi * d2)
    t2 = weights.omega2 * ((1 + weights.xi) * d2 + weights.xi * d1)
    alpha0 = max(t1, t2)
    alpha0 += 0.05 * (1.0 + abs(alpha0))
    u = np.zeros(lay.n)
    u[:lay.k] = c0.real
    u[lay.k:2 * lay.k] = c0.imag
    u[2 * lay.k:3 * lay.k] = mu0
    u[lay.alpha] = alpha0
    return u, r_start


def _amplitude_matched(ops: ScenarioOperators, c: np.ndarray) -> list[np.ndarray]:
    """Least-power waveform realizing the auxiliary amplitudes exactly.

    Its symbol-region margins equal those of ``c`` (feasible by construction)
    and scaling up to the power budget only widens them, so this gives the
    extraction a deterministic candidate that never loses the communication
    constraints.
    """
    rows = np.stack([u.rotated_channel.conj() for u in ops.users])
    x, *_ = np.linalg.lstsq(rows, c, rcond=None)
    power = float(np.vdot(x, x).real)
    if not np.isfinite(power) or power <= 1e-15:
        return []
    out = []
    for cand in (x, x * np.sqrt(ops.p_max / power)):
        p = float(np.vdot(cand, cand).real)
        if p <= ops.p_max * (1.0 + 1e-12) \
                and ops.waveform_margins(cand).min() >= -1e-9:
            out.append(cand)
    return out


def solve_moop(scenario: ScenarioDraw, utopia: Utopia,
               weights: ScalarizationWeights,
               solver_config: SolverConfig | None = None,
               eps: float | None = None,
               max_iters: int | None = None,
               n_draws: int = 100,
               rng: np.random.Generator | None = None,
               ops: ScenarioOperators | None = None) -> ParetoPoint:
    """One trade-off point: minimize the scalarized degradation by SCA.

    Subproblems default to a slightly looser KKT target than the raw solver
    default; the outer loop stops at 1e-4 amplitude movement, so tighter
    inner accuracy buys nothing but Newton steps.
    """
    cfg = scenario.config
    ops = ops or ScenarioOperators(scenario)
    scfg = solver_config or SolverConfig(tol=1e-7)
    eps = cfg.eps_moop if eps is None else float(eps)
    max_iters = cfg.max_iters_moop if max_iters is None else int(max_iters)
    kappa = cfg.bandwidth_hz * LOG2E
    m = ops.n_tx
    eye = np.eye(m, dtype=complex)

    x0 = _aligned_start(ops)
    if x0 is None:
        x0, why = _power_min_start(ops, scfg)
        if x0 is None:
            return ParetoPoint(weights=weights, design=None, f1=float("nan"),
                               f2=float("nan"), f1_relaxed=float("nan"),
                               f2_relaxed=float("nan"), alpha=float("nan"),
                               iterations=0, converged=False, status=why)

    cbar = np.array([u.rotated_channel.conj() @ x0 for u in ops.users])
    # embed the starting waveform: rank-one part realizes the amplitudes,
    # the excess-power identity keeps the covariance strictly positive and
    # the per-user powering caps strictly slack
    gamma = (ops.p_max - float(np.vdot(x0, x0).real)) / m
    r_prev = np.outer(x0, x0.conj()) + max(gamma, 1e-12 * ops.p_max / m) * eye
    interior = (ops.p_max / m) * eye

    status = Status.MAX_ITERS.value
    converged = False
    iterations = 0
    alpha = float("nan")
    step = float("nan")
    mu_star: np.ndarray | None = None
    traj: list[IterationTrace] = []
    t_hint: float | None = None
    u_prev: np.ndarray | None = None

    for it in range(1, max_iters + 1):
        p, lay = _build_subproblem(ops, utopia, weights, cbar, kappa)
        start = None
        if u_prev is not None:
            start = _resume_start(ops, utopia, weights, lay, u_prev, r_prev,
                                  kappa)
        if start is not None:
            p.set_start(u=start[0], mat=start[1], start_t=t_hint)
        else:
            r_start = 0.995 * r_prev + 0.005 * interior
            start = _subproblem_start(ops, utopia, weights, lay, cbar,
                                      r_start, kappa)
            if start is not None:
                p.set_start(u=start[0], mat=start[1])
        sol = solve(p, scfg)
        accept = sol.status is Status.OPTIMAL and sol.u is not None
        if not accept and sol.u is not None and np.all(np.isfinite(sol.u)):
            # a tight solve can miss its certificate while the point itself
            # is sound; keep it as long as it preserves the descent
            _, _, a_try = lay.split(sol.u)
            accept = (sol.kkt.primal <= 1e-7 * max(1.0, ops.p_max)
                      and sol.kkt.dual <= 1e-5
                      and (not np.isfinite(alpha)
                           or a_try <= alpha + 1e-8 * (1.0 + abs(alpha))))
        if not accept:
            status = sol.status.value
            break
        tf = sol.info.get("t_final")
        if tf:
            # modest resume: a warm point far from the center tolerates only
            # a slightly raised starting barrier weight
            t_hint = min(1e4, tf / scfg.barrier_growth ** 2)
        iterations = it
        alpha_prev = alpha
        step_prev = step
        c_new, mu_star, alpha = lay.split(sol.u)
        u_prev = sol.u
        r_prev = 0.5 * (sol.matrix + sol.matrix.conj().T)
        step = float(np.abs(c_new - cbar).max())
        traj.append(IterationTrace(it, alpha, step))
        cbar = c_new
        if step <= eps:
            status = Status.OPTIMAL.value
            converged = True
            break
        stalled = (np.isfinite(alpha_prev)
                   and abs(alpha - alpha_prev) <= 1e-9 * (1.0 + abs(alpha))
                   and np.isfinite(step_prev) and step > 0.9 * step_prev)
        if stalled and scfg.tol > 1e-9:
            # on a nearly flat optimal valley the movement can be dominated
            # by solver noise; finish the stalled run two decades tighter so
            # the wobble drops below the movement tolerance
            scfg = replace(scfg, tol=max(scfg.tol * 1e-2, 1e-9))

    f1_relaxed = -kappa * float(mu_star.sum()) if mu_star is not None else float("nan")
    f2_relaxed = ops.sensing_objective(r_prev)

    def selector(x: np.ndarray) -> float:
        f1x = -kappa * ops.sum_mu(x)
        f2x = ops.sensing_objective(np.outer(x, x.conj()))
        return degradation_alpha(f1x, f2x, utopia, weights)

    x, ratio, fallback = extract_waveform(r_prev, scenario, n_draws=n_draws,
                                          selector=selector, rng=rng, ops=ops)
    candidates = [] if fallback else [x]
    candidates.extend(_amplitude_matched(ops, cbar))
    # the rank-one shortcut skips the symbol-region screen, so prefer
    # candidates that actually satisfy it
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
                       alpha=alpha, iterations=iterations,
                       converged=converged and power_ok and margins_ok,
                       status=status, fallback=fallback, trajectory=tuple(traj))


def pareto_sweep(scenario: ScenarioDraw,
                 weights_list: tuple[ScalarizationWeights, ...] | None = None,
                 solver_config: SolverConfig | None = None,
                 n_draws: int = 100,
                 rng_seed: int | None = None,
                 ops: ScenarioOperators | None = None) -> ParetoFront:
    """Sweep the preference weight, reusing one utopia per scenario."""
    cfg = scenario.config
    ops = ops or ScenarioOperators(scenario)
    if weights_list is None:
        weights_list = weight_grid(cfg.delta_omega, xi=cfg.xi)
    utopia, rate_anchor, mse_anchor = compute_utopia(
        scenario, solver_config=solver_config, n_draws=n_draws, ops=ops)
    points = []
    for i, w in enumerate(weights_list):
        rng = None
        if rng_seed is not None:
            rng = np.random.default_rng(
                np.random.SeedSequence([0x6A55, rng_seed, i]))
        try:
            points.append(solve_moop(scenario, utopia, w,
                                     solver_config=solver_config,
                                     n_draws=n_draws, rng=rng, ops=ops))
        except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
            points.append(ParetoPoint(weights=w, design=None, f1=float("nan"),
                                      f2=float("nan"), f1_relaxed=float("nan"),
                                      f2_relaxed=float("nan"),
                                      alpha=float("nan"), iterations=0,
                                      converged=False,
                                      status=f"error: {exc}"))
    usable = [p for p in points
              if p.design is not None and np.isfinite(p.f1) and np.isfinite(p.f2)]
    filtered = tuple(dominance_filter(usable))
    return ParetoFront(utopia=utopia, points=tuple(points), filtered=filtered,
                       rate_anchor=rate_anchor, mse_anchor=mse_anchor)
