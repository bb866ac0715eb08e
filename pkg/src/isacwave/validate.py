"""Runtime invariant suite behind the ``validate`` CLI subcommand.

Each check re-verifies one module's contract on small deterministic inputs:
worked examples with known answers, structural identities, and monotonicity
of the iterative solvers.  Failures raise AssertionError with a reason; the
runner turns them into per-check pass/fail lines and an overall verdict.
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

import numpy as np

from .algorithms import (
    MSE_MIN_RATE_CONSTRAINED,
    RATE_MAX_MSE_CONSTRAINED,
    ScalarizationWeights,
    ScenarioOperators,
    Utopia,
    compute_utopia,
    degradation_alpha,
    degradation_terms,
    dominance_filter,
    extract_waveform,
    solve_moop,
    solve_soop1,
    solve_soop2,
    soo_baselines,
    weight_grid,
    weighted_sum_baseline,
)
from .convex import (
    AffineEq,
    Ball,
    ConvexProblem,
    LogAffine,
    MatQuad,
    PsdCone,
    SolverConfig,
    Status,
    kkt_residuals,
    mat_to_rvec,
    psd_project,
    psd_trace_project,
    rvec_dim,
    solve,
)
from .harness import (
    TRIAL_CSV_HEADER,
    RunConfig,
    aggregate,
    config_from_dict,
    export_records,
    load_records,
    run_montecarlo,
)
from .metrics import (
    REPORT_CSV_HEADER,
    beampattern_gain,
    beampattern_mse,
    ci_margin,
    eta_star,
    evaluate_waveform,
    rank_one_metrics,
    sum_rate,
)
from .model import (
    PskSymbolSet,
    SystemConfig,
    build_grid,
    draw_scenario,
    load_scenario,
    realify,
    save_scenario,
    stack_waveform,
    steering_vector,
    unstack_waveform,
)

_TINY = SystemConfig(n_tx=4, n_users=2, n_targets=2,
                     target_angles_deg=(-45.0, 30.0), grid_size=60,
                     delta_omega=0.25, rng_seed=11)


def _ok(cond: bool, why: str) -> None:
    if not cond:
        raise AssertionError(why)


def check_model() -> None:
    for n in (1, 4, 9):
        for ang in (-1.2, 0.0, 0.7):
            v = steering_vector(ang, n)
            _ok(abs(np.linalg.norm(v) - 1.0) < 1e-12,
                f"steering vector not unit norm (n={n}, angle={ang})")
    grid = build_grid(64)
    diffs = np.diff(grid.angles_rad)
    _ok(len(grid.angles_rad) == 64, "grid size mismatch")
    _ok(np.all(diffs > 0), "grid not strictly increasing")
    _ok(np.ptp(diffs) < 1e-12, "grid spacing not uniform")
    sym = PskSymbolSet(4).points
    _ok(np.allclose(np.abs(sym), 1.0, atol=1e-12), "PSK symbols not unit modulus")

    a = draw_scenario(_TINY, 3)
    b = draw_scenario(_TINY, 3)
    c = draw_scenario(_TINY, 4)
    _ok(np.array_equal(a.channels, b.channels), "scenario draw not deterministic")
    _ok(not np.array_equal(a.channels, c.channels),
        "distinct seeds gave identical channels")

    rng = np.random.default_rng(5)
    h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    s = np.exp(1j * np.pi / 4)
    x = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    user = realify(h, s)
    xt = stack_waveform(x)
    amp = (h * s).conj() @ x
    _ok(abs(user.z @ xt - amp.imag) < 1e-12, "realified imag identity broken")
    _ok(abs(user.z_perp @ xt - amp.real) < 1e-12, "realified real identity broken")
    _ok(abs(np.linalg.norm(user.stack.T @ xt) ** 2 - abs(amp) ** 2) < 1e-10,
        "realified power identity broken")
    _ok(np.allclose(unstack_waveform(xt), x), "stack/unstack not inverse")

    with tempfile.TemporaryDirectory() as td:
        path = Path(td) / "scenario.json"
        save_scenario(a, path)
        back = load_scenario(path)
        _ok(np.array_equal(back.channels, a.channels)
            and np.array_equal(back.symbols, a.symbols)
            and back.config == a.config, "scenario save/load round-trip broken")


def check_metrics() -> None:
    scn = draw_scenario(_TINY, 3)
    rng = np.random.default_rng(7)
    g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    r = g @ g.conj().T
    gains = beampattern_gain(r, scn.grid)
    _ok(np.all(gains >= 0.0), "beampattern gains negative for PSD input")
    eta = eta_star(r, scn.desired_gain, scn.grid)
    m0 = beampattern_mse(eta, r, scn.desired_gain, scn.grid)
    for delta in (-1e-3, 1e-3):
        _ok(beampattern_mse(eta * (1 + delta), r, scn.desired_gain, scn.grid)
            >= m0 - 1e-12, "template scale is not the MSE minimizer")

    total, rates = sum_rate(np.zeros(4, complex), scn.channels,
                            _TINY.noise_mw, _TINY.bandwidth_hz)
    _ok(total == 0.0 and np.all(rates == 0.0), "zero waveform has nonzero rate")

    x = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    margins = ci_margin(x, scn.channels, scn.symbols, _TINY.gamma_linear(),
                        _TINY.noise_mw, _TINY.half_angle_rad)
    _ok(len(margins) == _TINY.n_users, "margin count mismatch")
    report = evaluate_waveform(scn, x=x)
    row = report.csv_row(seed=scn.seed, omega1=0.5)
    _ok(len(row) == len(REPORT_CSV_HEADER), "report CSV row width mismatch")

    v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    _, ratio = rank_one_metrics(np.outer(v, v.conj()))
    _ok(ratio < 1e-12, "rank-one covariance not detected as rank one")


def check_convex() -> None:
    cfg = SolverConfig()

    p = ConvexProblem(vector_dim=2)
    p.add_vector_quad_cost(np.eye(2))
    p.add_linear_cost(np.array([-6.0, -8.0]))
    p.add(Ball(radius_sq=1.0))
    sol = solve(p, cfg)
    _ok(sol.status is Status.OPTIMAL, "ball projection solve failed")
    _ok(np.abs(sol.u - np.array([0.6, 0.8])).max() < 1e-6,
        "ball projection answer wrong")
    res = kkt_residuals(p, sol.u, None)
    _ok(max(res.primal, res.dual) <= cfg.tol * 10,
        "KKT residuals inconsistent at the ball optimum")

    p = ConvexProblem(vector_dim=2)
    cost = np.zeros(2)
    cost[1] = -1.0
    p.add_linear_cost(cost)
    p.add(LogAffine(mu_index=1, a=np.array([1.0, 0.0]), b=1.0))
    p.add(Ball(radius_sq=16.0, indices=np.array([0])))
    sol = solve(p, cfg)
    _ok(sol.status is Status.OPTIMAL
        and abs(sol.u[1] - np.log(5.0)) < 1e-6, "log-affine maximum wrong")

    rng = np.random.default_rng(11)
    g = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    a = 0.5 * (g + g.conj().T)
    p = ConvexProblem(matrix_dim=3)
    d = rvec_dim(3)
    p.add_matrix_quad_cost(MatQuad(hess=np.zeros((d, d)),
                                   lin=-mat_to_rvec(a), const=0.0))
    p.add(AffineEq(f=np.eye(3, dtype=complex), b=1.0))
    p.add(PsdCone())
    sol = solve(p, cfg)
    lam_max = float(np.linalg.eigvalsh(a)[-1])
    _ok(sol.status is Status.OPTIMAL
        and abs(-sol.objective - lam_max) < 1e-6 * max(1.0, abs(lam_max)),
        "largest-eigenvalue SDP wrong")

    b = a + 2.5 * np.eye(3)
    proj = psd_project(b)
    _ok(float(np.linalg.eigvalsh(proj)[0]) >= -1e-12, "psd_project not PSD")
    _ok(np.abs(psd_project(proj) - proj).max() < 1e-10,
        "psd_project not idempotent")
    capped = psd_trace_project(b, 1.0)
    _ok(float(np.trace(capped).real) <= 1.0 + 1e-10,
        "psd_trace_project exceeds cap")
    # projections are nonexpansive
    g2 = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    c = 0.5 * (g2 + g2.conj().T)
    _ok(np.linalg.norm(psd_project(b) - psd_project(c))
        <= np.linalg.norm(b - c) + 1e-10, "psd_project expansive")

    p1 = ConvexProblem(vector_dim=2)
    p1.add_vector_quad_cost(np.eye(2))
    p1.add_linear_cost(np.array([-6.0, -8.0]))
    p1.add(Ball(radius_sq=1.0))
    s1 = solve(p1, cfg)
    p2 = ConvexProblem(vector_dim=2)
    p2.add_vector_quad_cost(np.eye(2))
    p2.add_linear_cost(np.array([-6.0, -8.0]))
    p2.add(Ball(radius_sq=1.0))
    s2 = solve(p2, cfg)
    _ok(np.array_equal(s1.u, s2.u), "solver is not deterministic")


def check_scalarization() -> None:
    w = ScalarizationWeights.of(0.5, xi=0.001)
    utopia = Utopia(f1_star=-8.0, f2_star=0.1)
    # degradations 0.5 and 1.0 -> max(0.25, 0.5) + 0.001 * (0.25 + 0.5)
    alpha = degradation_alpha(-4.0, 0.2, utopia, w)
    _ok(abs(alpha - 0.50075) < 1e-12, "worked scalarization example wrong")
    d1, d2 = degradation_terms(-4.0, 0.2, utopia)
    _ok(abs(d1 - 0.5) < 1e-12 and abs(d2 - 1.0) < 1e-12,
        "degradation terms wrong")
    d1, d2 = degradation_terms(-8.0, 0.1, utopia)
    _ok(d1 == 0.0 and d2 == 0.0, "degradations nonzero at the utopia point")
    grid = weight_grid(0.05)
    _ok(len(grid) == 19, "weight grid size wrong for step 0.05")
    kept = dominance_filter([(1.0, 1.0), (2.0, 2.0), (1.5, 0.5)])
    _ok(sorted(kept) == [(1.0, 1.0), (1.5, 0.5)], "dominance filter wrong")
    for p in kept:
        for q in kept:
            strictly_better = q[0] <= p[0] and q[1] <= p[1] and q != p
            _ok(not strictly_better, "filtered set is not mutually non-dominated")


def check_algorithms() -> None:
    scn = draw_scenario(_TINY, 3)
    ops = ScenarioOperators(scn)

    s1 = solve_soop1(scn, ops=ops)
    _ok(s1.converged, f"rate solve did not converge: {s1.status}")
    objs = [t.objective for t in s1.trajectory]
    _ok(all(b >= a - 1e-9 * (1 + abs(a)) for a, b in zip(objs, objs[1:])),
        "rate objective not monotone non-decreasing")
    _ok(ops.waveform_margins(s1.x).min() >= -1e-6, "rate solution breaks margins")
    _ok(float(np.vdot(s1.x, s1.x).real) <= ops.p_max * (1 + 1e-8),
        "rate solution exceeds the power budget")

    s2 = solve_soop2(scn, ops=ops)
    _ok(s2.converged, f"template fit did not converge: {s2.status}")
    fit = [t.objective for t in s2.trajectory[1:]]
    _ok(all(b <= a + 1e-6 * (1 + abs(a)) for a, b in zip(fit, fit[1:])),
        "template fit not monotone non-increasing")
    _ok(abs(float(np.trace(s2.r).real) - ops.p_max) < 1e-6 * ops.p_max,
        "template fit covariance off the power budget")

    utopia, _, _ = compute_utopia(scn, ops=ops)
    _ok(utopia.f1_star < 0 and utopia.f2_star > 0, "utopia signs wrong")
    pt = solve_moop(scn, utopia, ScalarizationWeights.of(0.5), ops=ops)
    _ok(pt.converged, f"trade-off solve did not converge: {pt.status}")
    alphas = [t.objective for t in pt.trajectory]
    _ok(all(b <= a + 1e-9 * (1 + abs(a)) for a, b in zip(alphas, alphas[1:])),
        "trade-off objective not monotone non-increasing")
    _ok(pt.f1 >= utopia.f1_star - 1e-6 * abs(utopia.f1_star),
        "trade-off point beats the rate anchor")
    _ok(pt.f2_relaxed >= utopia.f2_star - 1e-6 * utopia.f2_star,
        "trade-off point beats the sensing anchor")

    rng = np.random.default_rng(9)
    v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    r1 = np.outer(v, v.conj())
    x, ratio, _ = extract_waveform(r1, scn, ops=ops)
    tr = float(np.trace(r1).real)
    m_rel = ops.sensing_objective(min(tr, ops.p_max) / tr * r1)
    m_ext = ops.sensing_objective(np.outer(x, x.conj()))
    _ok(ratio <= 1e-6 and abs(m_ext - m_rel) <= 1e-6 * (1 + abs(m_rel)),
        "rank-one extraction is inconsistent with the covariance")

    ws = weighted_sum_baseline(scn, utopia, ScalarizationWeights.of(0.5),
                               ops=ops)
    _ok(ws.converged, f"weighted-sum baseline did not converge: {ws.status}")
    fit0 = soo_baselines(scn, 0.0, MSE_MIN_RATE_CONSTRAINED)
    _ok(abs(fit0.report.mse - utopia.f2_star) <= 1e-6 * utopia.f2_star,
        "zero rate floor does not reduce to the template fit")
    free = soo_baselines(scn, float("inf"), RATE_MAX_MSE_CONSTRAINED)
    _ok(abs(free.report.sum_rate_bps + utopia.f1_star)
        <= 1e-6 * abs(utopia.f1_star),
        "infinite error cap does not reduce to rate maximization")


def check_harness() -> None:
    _ok(",".join(TRIAL_CSV_HEADER) ==
        "seed,omega1,p_max_dbm,n_tx,sum_rate,mse_relaxed,mse_extracted,"
        "min_ci_margin,tx_power,iters,status", "trial CSV header drifted")
    _ok(config_from_dict({}) == RunConfig(), "empty config is not the defaults")
    _ok(len(config_from_dict({"delta_omega": 0.05}).grid()) == 19,
        "weight grid from config wrong")
    try:
        config_from_dict({"n_users": 0})
    except ValueError as exc:
        _ok("n_users" in str(exc), "validation error does not name the field")
    else:
        raise AssertionError("invalid config accepted")

    cfg = RunConfig(system=_TINY, n_trials=1, sweep="omega", sweep_grid=(0.5,))
    recs1 = run_montecarlo(cfg)
    recs2 = run_montecarlo(cfg)
    _ok(recs1 == recs2, "Monte-Carlo batch not deterministic")
    _ok(len(recs1) == 1 and np.isfinite(recs1[0].sum_rate),
        "tiny batch did not produce a usable record")
    rows = aggregate(recs1, ("omega1",))
    _ok(rows[0]["count"] == 1 and rows[0]["sum_rate_std"] == 0.0,
        "single-record aggregate wrong")
    with tempfile.TemporaryDirectory() as td:
        csv_path = export_records(recs1, Path(td) / "records.csv")
        header = csv_path.read_text().splitlines()[0]
        _ok(header == ",".join(TRIAL_CSV_HEADER), "exported CSV header drifted")
        json_path = export_records(recs1, Path(td) / "records.json", fmt="json")
        _ok(load_records(json_path) == recs1, "JSON export does not round-trip")


CHECKS = (
    ("model", check_model),
    ("metrics", check_metrics),
    ("convex", check_convex),
    ("scalarization", check_scalarization),
    ("algorithms", check_algorithms),
    ("harness", check_harness),
)


def run_all(stream=None) -> bool:
    stream = stream or sys.stdout
    passed = True
    for name, func in CHECKS:
        try:
            func()
        except AssertionError as exc:
            print(f"FAIL {name}: {exc}", file=stream)
            passed = False
        else:
            print(f"PASS {name}", file=stream)
    return passed
