"""Independent reference solvers the production code is checked against.

Two oracles live here, written against the public problem description but
sharing no solver machinery with the package:

* ``pg_solve`` minimizes a compiled convex program by accelerated projected
  gradient, with the feasible set handled by Dykstra's alternating
  projections.  Linear objectives go through a vanishing Tikhonov homotopy
  so the method still converges to the constrained minimum.
* ``qp_psd_project`` / ``qp_psd_trace_project`` compute Euclidean
  projections onto the PSD cone (optionally trace-capped) by cutting-plane
  quadratic programming: eigenvector cuts are added until the solution of
  the polyhedral QP is itself positive semidefinite.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize
from scipy.special import lambertw

from isacwave.convex import (
    AffineEq,
    AffineIneq,
    Ball,
    ConvexProblem,
    ConvexQuadIneq,
    LogAffine,
    MatQuad,
    PsdCone,
    TraceCap,
    mat_to_rvec,
    rvec_dim,
    rvec_to_mat,
)

# ---------------------------------------------------------------------------
# projected-gradient oracle


class _Halfspace:
    def __init__(self, c: np.ndarray, b: float):
        self.c = c
        self.b = float(b)
        self.nsq = float(c @ c)

    def violation(self, z):
        return float(self.c @ z - self.b)

    def project(self, z):
        v = self.violation(z)
        if v <= 0.0:
            return z
        return z - (v / self.nsq) * self.c


class _Hyperplanes:
    """Joint projection onto all equality rows."""

    def __init__(self, rows: np.ndarray, rhs: np.ndarray):
        self.rows = rows
        self.rhs = rhs
        self.gram = rows @ rows.T

    def violation(self, z):
        return float(np.abs(self.rows @ z - self.rhs).max())

    def project(self, z):
        resid = self.rows @ z - self.rhs
        lam = np.linalg.solve(self.gram, resid)
        return z - self.rows.T @ lam


class _BallSet:
    def __init__(self, idx: np.ndarray, radius_sq: float):
        self.idx = idx
        self.radius = np.sqrt(radius_sq)

    def violation(self, z):
        return float(np.linalg.norm(z[self.idx]) - self.radius)

    def project(self, z):
        norm = float(np.linalg.norm(z[self.idx]))
        if norm <= self.radius:
            return z
        out = z.copy()
        out[self.idx] *= self.radius / norm
        return out


class _QuadSet:
    """{z : z' Q z + l . z <= rhs} with Q PSD."""

    def __init__(self, q: np.ndarray, lin: np.ndarray, rhs: float):
        self.q = q
        self.lin = lin
        self.rhs = float(rhs)

    def violation(self, z):
        return float(z @ (self.q @ z) + self.lin @ z - self.rhs)

    def project(self, z0):
        if self.violation(z0) <= 0.0:
            return z0
        eye = np.eye(z0.size)

        def point(lam):
            return np.linalg.solve(eye + 2.0 * lam * self.q,
                                   z0 - lam * self.lin)

        lo, hi = 0.0, 1.0
        while self.violation(point(hi)) > 0.0:
            hi *= 2.0
            if hi > 1e12:
                raise RuntimeError("quad projection bracket failed")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.violation(point(mid)) > 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-15 * (1.0 + hi):
                break
        return point(hi)


def _lambertw_exp(logx: float) -> float:
    """W(exp(logx)), stable for any magnitude of logx."""
    if logx < 20.0:
        return float(lambertw(np.exp(logx)).real)
    w = logx - np.log(logx)
    for _ in range(50):
        step = (w + np.log(w) - logx) / (1.0 + 1.0 / w)
        w -= step
        if abs(step) < 1e-14 * (1.0 + abs(w)):
            break
    return float(w)


class _LogSet:
    """{z : z[mu] <= log(a . z + b)}; a[mu] == 0."""

    def __init__(self, mu: int, a: np.ndarray, b: float):
        self.mu = mu
        self.a = a
        self.b = float(b)

    def violation(self, z):
        arg = float(self.a @ z + self.b)
        mu = float(z[self.mu])
        if arg <= 0.0:
            return np.exp(min(mu, 50.0)) - arg
        return mu - np.log(arg)

    def project(self, z0):
        if self.violation(z0) <= 0.0:
            return z0
        mu0 = float(z0[self.mu])

        def point(lam):
            out = z0 + lam * self.a
            out[self.mu] = mu0 - _lambertw_exp(np.log(lam) + mu0)
            return out

        lo, hi = 1e-300, 1.0
        while self.violation(point(hi)) > 0.0:
            hi *= 2.0
            if hi > 1e12:
                raise RuntimeError("log projection bracket failed")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.violation(point(mid)) > 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-15 * (1.0 + hi):
                break
        return point(hi)


class _PsdSet:
    def __init__(self, n: int, m: int):
        self.n = n
        self.m = m

    def violation(self, z):
        mat = rvec_to_mat(z[self.n:], self.m)
        return float(-np.linalg.eigvalsh(mat)[0])

    def project(self, z):
        mat = rvec_to_mat(z[self.n:], self.m)
        w, v = np.linalg.eigh(mat)
        if w[0] >= 0.0:
            return z
        clipped = (v * np.maximum(w, 0.0)) @ v.conj().T
        out = z.copy()
        out[self.n:] = mat_to_rvec(clipped)
        return out


class _Objective:
    """value/gradient of the compiled cost in [u; rvec(R)] coordinates."""

    def __init__(self, p: ConvexProblem):
        n, m = p.vector_dim, p.matrix_dim
        self.dim = n + rvec_dim(m)
        self.quad = np.zeros((self.dim, self.dim))
        self.lin = np.zeros(self.dim)
        self.const = 0.0
        if p.quad_cost is not None:
            self.quad[:n, :n] += p.quad_cost
        if p.lin_cost is not None:
            self.lin[:n] += p.lin_cost
        if p.mat_quad_cost is not None:
            self.quad[n:, n:] += p.mat_quad_cost.hess
            self.lin[n:] += p.mat_quad_cost.lin
            self.const += p.mat_quad_cost.const
        self.logs = []
        for a, b, w in p.neg_log_costs:
            pad = np.zeros(self.dim)
            pad[:n] = a
            self.logs.append((pad, float(b), float(w)))

    def value(self, z):
        val = float(self.lin @ z + z @ (self.quad @ z) + self.const)
        for a, b, w in self.logs:
            arg = float(a @ z + b)
            if arg <= 0.0:
                return np.inf
            val -= w * np.log(arg)
        return val

    def grad(self, z):
        g = self.lin + 2.0 * (self.quad @ z)
        for a, b, w in self.logs:
            g -= (w / float(a @ z + b)) * a
        return g

    def lipschitz(self, z):
        l = 2.0 * float(np.linalg.eigvalsh(0.5 * (self.quad + self.quad.T))[-1]) \
            if self.quad.any() else 0.0
        for a, b, w in self.logs:
            arg = float(a @ z + b)
            l += w * float(a @ a) / max(arg, 1e-3) ** 2
        return max(l, 1e-12)


def _compile_sets(p: ConvexProblem) -> list:
    n, m = p.vector_dim, p.matrix_dim
    dim = n + rvec_dim(m)
    sets = []
    eq_rows, eq_rhs = [], []

    def pad(a, f):
        out = np.zeros(dim)
        if a is not None:
            out[:n] = np.asarray(a, dtype=float).ravel()
        if f is not None:
            out[n:] = mat_to_rvec(f)
        return out

    for atom in p.constraints:
        if isinstance(atom, AffineIneq):
            sets.append(_Halfspace(pad(atom.a, atom.f), atom.b))
        elif isinstance(atom, AffineEq):
            eq_rows.append(pad(atom.a, atom.f))
            eq_rhs.append(float(atom.b))
        elif isinstance(atom, Ball):
            idx = np.arange(n) if atom.indices is None \
                else np.asarray(atom.indices, dtype=int)
            sets.append(_BallSet(idx, atom.radius_sq))
        elif isinstance(atom, ConvexQuadIneq):
            q = np.zeros((dim, dim))
            lin = np.zeros(dim)
            rhs = float(atom.rhs)
            if atom.q_vec is not None:
                qv = np.asarray(atom.q_vec, dtype=float)
                q[:n, :n] += 0.5 * (qv + qv.T)
            if atom.lin_vec is not None:
                lin[:n] += np.asarray(atom.lin_vec, dtype=float)
            if atom.mat_quad is not None:
                q[n:, n:] += atom.mat_quad.hess
                lin[n:] += atom.mat_quad.lin
                rhs -= atom.mat_quad.const
            if atom.mat_lin is not None:
                lin[n:] += mat_to_rvec(atom.mat_lin)
            sets.append(_QuadSet(q, lin, rhs))
        elif isinstance(atom, LogAffine):
            a = pad(atom.a, None)
            sets.append(_LogSet(atom.mu_index, a, atom.b))
        elif isinstance(atom, PsdCone):
            sets.append(_PsdSet(n, m))
        elif isinstance(atom, TraceCap):
            row = np.zeros(dim)
            row[n:n + m] = 1.0
            sets.append(_Halfspace(row, atom.limit))
        else:
            raise TypeError(f"oracle cannot handle {atom!r}")
    if eq_rows:
        sets.append(_Hyperplanes(np.stack(eq_rows), np.asarray(eq_rhs)))
    return sets


def _dykstra(sets, z, iters=10, tol=1e-12, mem=None):
    """Projection onto the intersection by Dykstra's algorithm.

    ``mem`` carries the correction vectors; reusing them across nearby
    projection problems makes the loop settle in a couple of sweeps.
    """
    if mem is None:
        mem = [np.zeros_like(z) for _ in sets]
    for _ in range(iters):
        worst = 0.0
        for i, s in enumerate(sets):
            y = z + mem[i]
            z_new = s.project(y)
            mem[i] = y - z_new
            z = z_new
        for s in sets:
            worst = max(worst, s.violation(z))
        if worst <= tol:
            break
    return z, mem


def _fista(obj, sets, z0, extra_quad=0.0, center=None, outer=1500, tol=1e-12):
    """Accelerated projected gradient on obj + extra_quad*||z-center||^2."""
    center = z0 if center is None else center

    def val(z):
        v = obj.value(z)
        if extra_quad:
            v += extra_quad * float((z - center) @ (z - center))
        return v

    def grad(z):
        g = obj.grad(z)
        if extra_quad:
            g = g + 2.0 * extra_quad * (z - center)
        return g

    z, mem = _dykstra(sets, z0, iters=200)
    y = z.copy()
    t = 1.0
    lip = max(obj.lipschitz(z) + 2.0 * extra_quad, 0.5)
    fz = val(z)
    for _ in range(outer):
        step = 1.0 / lip
        g = grad(y)
        fy = val(y)
        cand, mem = _dykstra(sets, y - step * g, iters=8, mem=mem)
        fc = val(cand)
        shrink = 0
        while not np.all(np.isfinite(cand)) or not np.isfinite(fc) \
                or fc > fy + float(g @ (cand - y)) \
                + float((cand - y) @ (cand - y)) / (2.0 * step) + 1e-14:
            step *= 0.5
            shrink += 1
            if shrink > 60:
                cand, fc = z, fz
                break
            cand, mem = _dykstra(sets, y - step * g, iters=8, mem=mem)
            fc = val(cand)
        if fc > fz + 1e-13 * (1.0 + abs(fz)):
            # momentum overshoot: restart from the best point
            y, t = z.copy(), 1.0
            lip = min(lip * 2.0, 1e13)
            continue
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = cand + ((t - 1.0) / t_new) * (cand - z)
        move = float(np.linalg.norm(cand - z))
        z, fz, t = cand, fc, t_new
        if move <= tol * (1.0 + float(np.linalg.norm(z))):
            break
    z, _ = _dykstra(sets, z, iters=300, tol=1e-13)
    return z


def pg_solve(p: ConvexProblem, z0: np.ndarray) -> tuple[np.ndarray, float]:
    """Constrained minimum by projected gradient from a feasible start.

    Returns (z, objective value).  For objectives without curvature a
    Tikhonov homotopy (eps ||z - z_k||^2 with eps -> 0) supplies the
    strong convexity projected gradient needs.
    """
    obj = _Objective(p)
    sets = _compile_sets(p)
    z, _ = _dykstra(sets, np.asarray(z0, dtype=float).copy(), iters=200)
    curved = obj.quad.any() or obj.logs
    if curved:
        z = _fista(obj, sets, z, outer=12000, tol=1e-13)
    else:
        for eps in (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6):
            z = _fista(obj, sets, z, extra_quad=eps, center=z, outer=500)
    return z, obj.value(z)


def oracle_feasibility(p: ConvexProblem, z: np.ndarray) -> float:
    """Worst constraint violation at z under the oracle's compilation."""
    return max(s.violation(z) for s in _compile_sets(p))


def pack(u: np.ndarray | None, mat: np.ndarray | None, n: int, m: int) -> np.ndarray:
    z = np.zeros(n + rvec_dim(m))
    if u is not None:
        z[:n] = u
    if mat is not None:
        z[n:] = mat_to_rvec(mat)
    return z


# ---------------------------------------------------------------------------
# random tiny instances shaped like the three production subproblems


def make_rate_instance(rng) -> tuple[ConvexProblem, np.ndarray]:
    """Vector program: sum of neg-logs, wedge halfspaces, power ball."""
    n = 2 * int(rng.integers(2, 4))
    k = int(rng.integers(1, 3))
    z0 = 0.5 * rng.standard_normal(n)
    p = ConvexProblem(vector_dim=n)
    for _ in range(k):
        a = rng.standard_normal(n)
        b = float(0.3 + rng.uniform(0.0, 0.5) + max(0.0, -(a @ z0)))
        p.add_neg_log_cost(a, b, weight=float(rng.uniform(0.5, 2.0)))
        for _ in range(2):
            c = rng.standard_normal(n)
            p.add(AffineIneq(a=c, b=float(c @ z0 + rng.uniform(0.2, 1.0))))
    p.add(Ball(radius_sq=float(z0 @ z0 + rng.uniform(0.5, 2.0))))
    return p, pack(z0, None, n, 0)


def make_fit_instance(rng) -> tuple[ConvexProblem, np.ndarray]:
    """Matrix program: quadratic template fit over the trace-pinned PSD set."""
    m = int(rng.integers(2, 5))
    g = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    r0 = g @ g.conj().T + 0.2 * np.eye(m)
    budget = float(rng.uniform(0.5, 2.0) * np.trace(r0).real)
    r0 *= budget / float(np.trace(r0).real)
    gt = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    target = gt @ gt.conj().T
    target *= budget / float(np.trace(target).real)
    coeffs, offsets, weights = [], [], []
    for _ in range(2 * rvec_dim(m)):
        gg = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        c = 0.5 * (gg + gg.conj().T)
        coeffs.append(c)
        offsets.append(float(-np.real(np.vdot(c, target))
                             + 0.1 * rng.standard_normal()))
        weights.append(float(rng.uniform(0.2, 2.0)))
    p = ConvexProblem(matrix_dim=m)
    p.add_matrix_quad_cost(MatQuad.from_terms(coeffs, np.array(offsets),
                                              np.array(weights)))
    p.add(AffineEq(f=np.eye(m, dtype=complex), b=budget))
    p.add(PsdCone())
    return p, pack(None, r0, 0, m)


def make_tradeoff_instance(rng) -> tuple[ConvexProblem, np.ndarray]:
    """Joint program: epigraph variable over log, wedge, powering and
    template-fit constraints tied to a trace-pinned PSD block."""
    m = 2 if rng.uniform() < 0.7 else 3
    n = 4  # symbol re/im, rate auxiliary, epigraph head
    g = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    r0 = g @ g.conj().T + 0.3 * np.eye(m)
    budget = float(np.trace(r0).real)
    h = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    outer = np.outer(h, h.conj())
    room = float(np.real(np.vdot(outer, r0)))
    c0 = rng.standard_normal(2)
    c0 *= np.sqrt(0.4 * room) / max(np.linalg.norm(c0), 1e-9)

    p = ConvexProblem(vector_dim=n, matrix_dim=m)
    cost = np.zeros(n)
    cost[3] = 1.0
    p.add_linear_cost(cost)

    a = np.zeros(n)
    a[:2] = rng.standard_normal(2)
    b = float(0.3 + rng.uniform(0.0, 0.5) + max(0.0, -(a[:2] @ c0)))
    mu0 = float(np.log(a[:2] @ c0 + b) - rng.uniform(0.2, 0.6))
    p.add(LogAffine(mu_index=2, a=a, b=b))

    for _ in range(2):
        c = np.zeros(n)
        c[:2] = rng.standard_normal(2)
        p.add(AffineIneq(a=c, b=float(c[:2] @ c0 + rng.uniform(0.2, 1.0))))

    q = np.zeros((n, n))
    q[0, 0] = q[1, 1] = 1.0
    p.add(ConvexQuadIneq(q_vec=q, mat_lin=-outer, rhs=0.0))

    z_part = np.concatenate([c0, [mu0, 0.0]])
    alpha0 = -np.inf
    for _ in range(2):
        coeffs, offsets = [], []
        for _ in range(3):
            gg = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
            coeffs.append(0.5 * (gg + gg.conj().T))
            offsets.append(float(rng.standard_normal()))
        mq = MatQuad.from_terms(coeffs, np.array(offsets),
                                float(rng.uniform(0.1, 0.5)))
        lin = np.zeros(n)
        lin[:2] = 0.3 * rng.standard_normal(2)
        lin[2] = -float(rng.uniform(0.2, 1.0))
        lin[3] = -float(rng.uniform(0.5, 1.5))
        rhs = float(rng.uniform(0.0, 0.5))
        p.add(ConvexQuadIneq(lin_vec=lin, mat_quad=mq, rhs=rhs))
        fixed = _QuadSet(*_quad_parts(mq, lin, rhs, n, m)).violation(
            np.concatenate([z_part, mat_to_rvec(r0)]))
        # violation at alpha=0 equals the alpha floor times |lin[3]|
        alpha0 = max(alpha0, fixed / (-lin[3]))
    z_part[3] = alpha0 + 0.5
    p.add(AffineEq(f=np.eye(m, dtype=complex), b=budget))
    p.add(PsdCone())
    return p, pack(z_part, r0, n, m)


def _quad_parts(mq: MatQuad, lin_vec: np.ndarray, rhs: float,
                n: int, m: int):
    dim = n + rvec_dim(m)
    q = np.zeros((dim, dim))
    lin = np.zeros(dim)
    q[n:, n:] = mq.hess
    lin[:n] = lin_vec
    lin[n:] = mq.lin
    return q, lin, rhs - mq.const


INSTANCE_MAKERS = (
    ("rate", make_rate_instance),
    ("fit", make_fit_instance),
    ("tradeoff", make_tradeoff_instance),
)


# ---------------------------------------------------------------------------
# cutting-plane QP oracle for the PSD projections


def _herm_basis_vec(a: np.ndarray) -> np.ndarray:
    """Orthonormal real coordinates of a Hermitian matrix (independent copy)."""
    m = a.shape[0]
    rows, cols = np.triu_indices(m, k=1)
    upper = np.sqrt(2.0) * a[rows, cols]
    return np.concatenate([np.diag(a).real, upper.real, upper.imag])


def _vec_to_herm(x: np.ndarray, m: int) -> np.ndarray:
    rows, cols = np.triu_indices(m, k=1)
    k = rows.size
    out = np.zeros((m, m), dtype=complex)
    out[np.arange(m), np.arange(m)] = x[:m]
    upper = (x[m:m + k] + 1j * x[m + k:]) / np.sqrt(2.0)
    out[rows, cols] = upper
    out[cols, rows] = upper.conj()
    return out


def _qp_halfspaces(b_vec: np.ndarray, g_rows: np.ndarray,
                   h: np.ndarray) -> np.ndarray:
    """argmin ||x - b||^2 s.t. G x <= h, solved through the bound dual."""
    if g_rows.size == 0:
        return b_vec.copy()
    gram = g_rows @ g_rows.T
    gb_h = g_rows @ b_vec - h

    def negdual(lam):
        glam = g_rows.T @ lam
        val = 0.5 * float(glam @ glam) - float(lam @ gb_h)
        grad = gram @ lam - gb_h
        return val, grad

    lam0 = np.zeros(g_rows.shape[0])
    res = minimize(negdual, lam0, jac=True, method="L-BFGS-B",
                   bounds=[(0.0, None)] * lam0.size,
                   options={"maxiter": 4000, "ftol": 1e-18, "gtol": 1e-14})
    return _active_set_polish(b_vec, g_rows, h, res.x)


def _active_set_polish(b_vec, g_rows, h, lam) -> np.ndarray:
    """Exact KKT solve on the active set guessed from the dual iterate."""
    active = set(np.nonzero(lam > 1e-9)[0].tolist())
    x = b_vec - g_rows.T @ lam
    for _ in range(60):
        if active:
            idx = sorted(active)
            ga = g_rows[idx]
            mults = np.linalg.lstsq(ga @ ga.T, ga @ b_vec - h[idx],
                                    rcond=None)[0]
            x = b_vec - ga.T @ mults
            neg = [i for i, v in zip(idx, mults) if v < -1e-12]
            if neg:
                active.remove(neg[int(np.argmin([mults[idx.index(i)] for i in neg]))])
                continue
        else:
            x = b_vec.copy()
        slack = g_rows @ x - h
        worst = int(np.argmax(slack)) if slack.size else -1
        if worst < 0 or slack[worst] <= 1e-13 * (1.0 + np.abs(h).max()):
            return x
        if worst in active:
            return x
        active.add(worst)
    return x


def _qp_project(b: np.ndarray, trace_cap: float | None) -> np.ndarray:
    m = b.shape[0]
    b_vec = _herm_basis_vec(b)
    scale = max(1.0, float(np.abs(np.linalg.eigvalsh(b)).max()))
    trace_row = np.zeros(b_vec.size)
    trace_row[:m] = 1.0

    cuts: list[np.ndarray] = []
    x = b_vec.copy()
    for _ in range(200):
        rows = [-np.stack(cuts)] if cuts else []
        rhs = [np.zeros(len(cuts))] if cuts else []
        if trace_cap is not None:
            rows.append(trace_row[None, :])
            rhs.append(np.array([trace_cap]))
        g_rows = np.vstack(rows) if rows else np.empty((0, b_vec.size))
        h = np.concatenate(rhs) if rhs else np.empty(0)
        x = _qp_halfspaces(b_vec, g_rows, h)
        mat = _vec_to_herm(x, m)
        w, v = np.linalg.eigh(mat)
        if w[0] >= -1e-12 * scale:
            return mat
        for i in range(m):
            if w[i] < -1e-12 * scale:
                vi = v[:, i]
                cuts.append(_herm_basis_vec(np.outer(vi, vi.conj())))
    raise RuntimeError("cutting-plane projection did not converge")


def qp_psd_project(b: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the PSD cone by cutting-plane QP."""
    return _qp_project(np.asarray(b, dtype=complex), None)


def qp_psd_trace_project(b: np.ndarray, cap: float) -> np.ndarray:
    """Euclidean projection onto {X psd, Tr X <= cap} by cutting-plane QP."""
    return _qp_project(np.asarray(b, dtype=complex), float(cap))
