"""Single-objective waveform designs: rate maximization and template fitting."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..convex import (
    AffineEq,
    AffineIneq,
    Ball,
    ConvexProblem,
    PsdCone,
    Solution,
    SolverConfig,
    Status,
    solve,
)
from ..metrics import WaveformReport, evaluate_waveform
from ..model import ScenarioDraw, stack_waveform, unstack_waveform
from .operators import ScenarioOperators

LOG2E = float(np.log2(np.e))

RANK_ONE_TOL = 1e-6


@dataclass(frozen=True)
class IterationTrace:
    iteration: int
    objective: float
    residual: float

    def to_dict(self) -> dict:
        return {"iteration": self.iteration, "objective": self.objective,
                "residual": self.residual}


@dataclass
class WaveformDesign:
    """A designed transmit solution: waveform and/or covariance plus metrics."""

    x: np.ndarray | None
    r: np.ndarray | None
    report: WaveformReport
    extraction_fallback: bool = False


@dataclass
class RandomizationResult:
    x: np.ndarray
    fallback: bool
    n_feasible: int
    selector_value: float


@dataclass
class Soop1Result:
    x: np.ndarray | None
    f1: float
    sum_rate_bps: float
    per_user_mu: np.ndarray | None
    margins: np.ndarray | None
    iterations: int
    converged: bool
    status: str
    trajectory: tuple[IterationTrace, ...] = field(default_factory=tuple)

    def __iter__(self):
        yield self.x
        yield self.f1


@dataclass
class Soop2Result:
    r: np.ndarray | None
    x: np.ndarray | None
    f2: float
    eta: float
    mse_extracted: float
    rank_ratio: float
    fallback: bool
    iterations: int
    converged: bool
    status: str
    trajectory: tuple[IterationTrace, ...] = field(default_factory=tuple)

    def __iter__(self):
        yield self.r
        yield self.x
        yield self.f2


# -- shared helpers ------------------------------------------------------------


def _align_phase(x: np.ndarray, ops: ScenarioOperators, n_grid: int = 720) -> np.ndarray:
    """Rotate a waveform by the unit phase that maximizes its worst CI margin.

    A covariance determines its principal direction only up to a global
    phase, which the symbol-region constraints are not invariant to.
    """
    amps = np.array([u.rotated_channel.conj() @ x for u in ops.users])
    if amps.size == 0:
        return x
    theta = np.linspace(0.0, 2.0 * np.pi, n_grid, endpoint=False)
    rot = np.exp(1j * theta)[:, None] * amps[None, :]
    margins = (rot.real - ops.amp_floor[None, :]) * ops.tan_phi - np.abs(rot.imag)
    best = int(np.argmax(margins.min(axis=1)))
    return np.exp(1j * theta[best]) * x


def _principal_component(r: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Unit principal eigenvector (deterministic phase) and top two eigenvalues."""
    w, v = np.linalg.eigh(r)
    lam1 = float(max(w[-1], 0.0))
    lam2 = float(max(w[-2], 0.0)) if w.size > 1 else 0.0
    vec = v[:, -1]
    pivot = int(np.argmax(np.abs(vec)))
    phase = vec[pivot] / abs(vec[pivot]) if abs(vec[pivot]) > 0 else 1.0
    return vec / phase, lam1, lam2


def gaussian_randomization(r: np.ndarray, scenario: ScenarioDraw,
                           n_draws: int = 100, selector=None,
                           rng: np.random.Generator | None = None,
                           ops: ScenarioOperators | None = None) -> RandomizationResult:
    """Draw CI-screened waveform candidates from a covariance solution.

    Candidates are circular Gaussian with covariance ``r``, each rescaled to
    transmit power min(Tr r, P_max).  Candidates whose worst CI margin drops
    below -1e-9 are discarded; the survivor minimizing ``selector`` wins.
    With no survivor the power-scaled principal eigenvector is returned and
    flagged as a fallback.
    """
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    ops = ops or ScenarioOperators(scenario)
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence([0x6A55, scenario.seed]))
    if selector is None:
        selector = lambda x: ops.sensing_objective(np.outer(x, x.conj()))

    r = 0.5 * (np.asarray(r, dtype=complex) + np.asarray(r, dtype=complex).conj().T)
    w, v = np.linalg.eigh(r)
    w = np.maximum(w, 0.0)
    root = v * np.sqrt(w)
    target = min(float(np.trace(r).real), ops.p_max)

    m = r.shape[0]
    best_x = None
    best_val = np.inf
    n_feasible = 0
    for _ in range(n_draws):
        g = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / np.sqrt(2.0)
        x = root @ g
        norm_sq = float(np.vdot(x, x).real)
        x = x * np.sqrt(target / norm_sq) if norm_sq > 0 else np.zeros(m, complex)
        if ops.waveform_margins(x).min() < -1e-9:
            continue
        n_feasible += 1
        val = float(selector(x))
        if val < best_val:
            best_val = val
            best_x = x
    if best_x is not None:
        return RandomizationResult(x=best_x, fallback=False,
                                   n_feasible=n_feasible, selector_value=best_val)
    vec, lam1, _ = _principal_component(r)
    x = np.sqrt(target) * vec if lam1 > 0 else np.zeros(m, complex)
    x = _align_phase(x, ops)
    return RandomizationResult(x=x, fallback=True, n_feasible=0,
                               selector_value=float(selector(x)))


def extract_waveform(r: np.ndarray, scenario: ScenarioDraw,
                     n_draws: int = 100, selector=None,
                     rng: np.random.Generator | None = None,
                     ops: ScenarioOperators | None = None
                     ) -> tuple[np.ndarray, float, bool]:
    """Rank-1 extraction: eigenvector when numerically rank-1, else draws.

    Returns (x, lambda2/lambda1, fallback_used).
    """
    ops = ops or ScenarioOperators(scenario)
    vec, lam1, lam2 = _principal_component(r)
    if lam1 <= 0.0:
        return np.zeros(r.shape[0], complex), 0.0, True
    ratio = lam2 / lam1
    if ratio <= RANK_ONE_TOL:
        target = min(float(np.trace(r).real), ops.p_max)
        return _align_phase(np.sqrt(target) * vec, ops), ratio, False
    rand = gaussian_randomization(r, scenario, n_draws=n_draws,
                                  selector=selector, rng=rng, ops=ops)
    return rand.x, ratio, rand.fallback


# -- communication rate maximization -------------------------------------------


def _strict_ci_start(ops: ScenarioOperators, xt: np.ndarray,
                     log_terms: list[tuple[np.ndarray, float]]) -> bool:
    """Strict feasibility of a stacked candidate for the current subproblem."""
    if float(xt @ xt) >= ops.p_max * (1.0 - 1e-12):
        return False
    x = unstack_waveform(xt)
    if ops.waveform_margins(x).min() <= 1e-12:
        return False
    for a, b in log_terms:
        if float(a @ xt + b) <= 0.0:
            return False
    return True


def _aligned_start(ops: ScenarioOperators) -> np.ndarray | None:
    """Power-scaled sum of symbol-rotated channels, if strictly CI-feasible."""
    v = np.sum([u.rotated_channel for u in ops.users], axis=0)
    norm = float(np.linalg.norm(v))
    if norm < 1e-12:
        return None
    x = np.sqrt(0.9 * ops.p_max) * v / norm
    margins = ops.waveform_margins(x)
    if margins.min() > 1e-7 * (1.0 + ops.amp_floor.max()):
        return x
    return None


def _power_min_start(ops: ScenarioOperators,
                     solver_config: SolverConfig) -> tuple[np.ndarray | None, str]:
    """Minimum-power CI-feasible waveform, scaled inward; None if infeasible."""
    n = 2 * ops.n_tx
    p = ConvexProblem(vector_dim=n)
    p.add_vector_quad_cost(np.eye(n))
    for k in range(len(ops.users)):
        geom = ops.ci_rows_waveform(k)
        for row in geom.rows:
            p.add(AffineIneq(a=row, b=geom.rhs))
    sol = solve(p, solver_config)
    if sol.status is not Status.OPTIMAL or sol.u is None:
        return None, sol.status.value
    xt = sol.u
    power = float(xt @ xt)
    if power > ops.p_max:
        return None, Status.INFEASIBLE.value
    if power < 1e-15:
        return None, Status.NUMERICAL_FAILURE.value
    # any scale-up strictly improves every margin; stay inside the power ball
    if power <= 0.81 * ops.p_max:
        beta = np.sqrt(0.81 * ops.p_max / power)
    else:
        beta = 0.5 * (1.0 + np.sqrt(ops.p_max / power))
    return unstack_waveform(beta * xt), "ok"


def solve_soop1(scenario: ScenarioDraw,
                solver_config: SolverConfig | None = None,
                eps: float | None = None,
                max_iters: int | None = None,
                ops: ScenarioOperators | None = None) -> Soop1Result:
    """Sum-rate maximization under symbol-region and power constraints.

    Each outer pass replaces every user's received power with its first-order
    lower bound around the current iterate, solves the resulting concave
    log-sum subproblem, and stops once the sum of the per-user log terms
    changes by at most ``eps``.
    """
    cfg = scenario.config
    ops = ops or ScenarioOperators(scenario)
    scfg = solver_config or SolverConfig()
    eps = cfg.eps_rate if eps is None else float(eps)
    max_iters = cfg.max_iters_soop1 if max_iters is None else int(max_iters)
    bandwidth = cfg.bandwidth_hz
    noise = ops.noise

    x0 = _aligned_start(ops)
    if x0 is None:
        x0, why = _power_min_start(ops, scfg)
        if x0 is None:
            return Soop1Result(x=None, f1=float("nan"), sum_rate_bps=float("nan"),
                               per_user_mu=None, margins=None, iterations=0,
                               converged=False, status=why)

    n = 2 * ops.n_tx
    ci_geoms = [ops.ci_rows_waveform(k) for k in range(len(ops.users))]
    stacks = [u.stack for u in ops.users]

    xt = stack_waveform(x0)
    x_interior = xt.copy()
    sum_mu_prev = ops.sum_mu(x0)
    traj = [IterationTrace(0, bandwidth * LOG2E * sum_mu_prev, float("inf"))]
    status = Status.MAX_ITERS.value
    converged = False
    iterations = 0

    for it in range(1, max_iters + 1):
        log_terms = []
        p = ConvexProblem(vector_dim=n)
        for k, h_stack in enumerate(stacks):
            y = h_stack.T @ xt
            a = 2.0 * (h_stack @ y)
            b = noise - float(y @ y)
            log_terms.append((a, b))
            p.add_neg_log_cost(a, b)
            for row in ci_geoms[k].rows:
                p.add(AffineIneq(a=row, b=ci_geoms[k].rhs))
        p.add(Ball(radius_sq=ops.p_max))
        for tau in (0.0, 1e-3, 1e-2, 1e-1, 1.0):
            cand = (1.0 - tau) * xt + tau * x_interior
            if _strict_ci_start(ops, cand, log_terms):
                p.set_start(u=cand)
                break
        sol = solve(p, scfg)
        if sol.status is not Status.OPTIMAL or sol.u is None:
            status = sol.status.value
            break
        iterations = it
        xt_new = sol.u
        sum_mu = ops.sum_mu(unstack_waveform(xt_new))
        delta = abs(sum_mu - sum_mu_prev)
        traj.append(IterationTrace(it, bandwidth * LOG2E * sum_mu, delta))
        xt = xt_new
        sum_mu_prev = sum_mu
        if delta <= eps:
            status = Status.OPTIMAL.value
            converged = True
            break

    x = unstack_waveform(xt)
    mu = np.array([float(np.log1p(abs(u.rotated_channel.conj() @ x) ** 2 / noise))
                   for u in ops.users])
    sum_rate = bandwidth * LOG2E * float(mu.sum())
    return Soop1Result(x=x, f1=-sum_rate, sum_rate_bps=sum_rate,
                       per_user_mu=mu, margins=ops.waveform_margins(x),
                       iterations=iterations, converged=converged, status=status,
                       trajectory=tuple(traj))


# -- beampattern template fitting -----------------------------------------------


def solve_soop2(scenario: ScenarioDraw,
                solver_config: SolverConfig | None = None,
                eps: float | None = None,
                max_iters: int | None = None,
                n_draws: int = 100,
                rng: np.random.Generator | None = None,
                ops: ScenarioOperators | None = None) -> Soop2Result:
    """Template-fit MSE minimization over the transmit covariance.

    Alternates the closed-form template scale with the convex covariance
    subproblem at full transmit power, then extracts a waveform from the
    relaxed covariance.
    """
    cfg = scenario.config
    ops = ops or ScenarioOperators(scenario)
    scfg = solver_config or SolverConfig()
    eps = cfg.eps_mse if eps is None else float(eps)
    max_iters = cfg.max_iters_soop2 if max_iters is None else int(max_iters)

    m = ops.n_tx
    p_max = ops.p_max
    eye = np.eye(m, dtype=complex)
    r = (p_max / m) * eye
    interior = r.copy()

    mse_prev = ops.sensing_objective(r)
    traj = [IterationTrace(0, mse_prev, float("inf"))]
    status = Status.MAX_ITERS.value
    converged = False
    iterations = 0
    eta = ops.eta_for(r)

    for it in range(1, max_iters + 1):
        eta = ops.eta_for(r)
        p = ConvexProblem(matrix_dim=m)
        p.add_matrix_quad_cost(ops.mse_quad(eta))
        p.add(PsdCone())
        p.add(AffineEq(f=eye, b=p_max))
        p.set_start(mat=0.99 * r + 0.01 * interior)
        sol = solve(p, scfg)
        if sol.status is not Status.OPTIMAL or sol.matrix is None:
            status = sol.status.value
            break
        iterations = it
        r = 0.5 * (sol.matrix + sol.matrix.conj().T)
        mse_t = ops.mse_value(eta, r)  # M_s at the (eta_t, R_t) pair just produced
        delta = abs(mse_t - mse_prev)
        traj.append(IterationTrace(it, mse_t, delta))
        if delta <= eps:
            status = Status.OPTIMAL.value
            converged = True
            mse_prev = mse_t
            break
        mse_prev = mse_t

    f2 = ops.sensing_objective(r)
    eta = ops.eta_for(r)
    x, ratio, fallback = extract_waveform(r, scenario, n_draws=n_draws,
                                          rng=rng, ops=ops)
    mse_extracted = ops.sensing_objective(np.outer(x, x.conj()))
    return Soop2Result(r=r, x=x, f2=f2, eta=eta, mse_extracted=mse_extracted,
                       rank_ratio=ratio, fallback=fallback, iterations=iterations,
                       converged=converged, status=status, trajectory=tuple(traj))


def design_report(scenario: ScenarioDraw, x: np.ndarray | None,
                  r: np.ndarray | None) -> WaveformReport:
    return evaluate_waveform(scenario, x=x, r=r)
