"""Primal barrier interior-point solver for the convex problem IR.

The solver works on one flat real vector ``z = [u, rvec(R)]``.  Equality
constraints are eliminated through an orthonormal null-space basis, scalar
inequalities and the PSD cone enter through logarithmic barriers, and a
phase-I relaxation finds a strictly feasible start when none is supplied.

Reported residuals: ``primal`` is the absolute worst constraint violation;
``dual`` is the stationarity residual scaled by (1 + |grad f|); ``gap`` is
the complementarity sum scaled by (1 + |f|).  Dual multipliers are refined
with a bounded least-squares fit so the residuals are meaningful
certificates rather than barrier by-products.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg
from scipy.optimize import lsq_linear

from .problem import (
    AffineEq,
    AffineIneq,
    Ball,
    ConvexProblem,
    ConvexQuadIneq,
    LogAffine,
    PsdCone,
    TraceCap,
    mat_to_rvec,
    rvec_dim,
    rvec_identity,
    rvec_to_mat,
)


class Status(str, Enum):
    OPTIMAL = "optimal"
    MAX_ITERS = "max_iters"
    INFEASIBLE = "infeasible"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class KktResiduals:
    primal: float
    dual: float
    gap: float

    def __iter__(self):
        yield self.primal
        yield self.dual
        yield self.gap

    @property
    def worst(self) -> float:
        return max(self.primal, self.dual, self.gap)


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-8            # dual/gap target for the Optimal status
    feas_tol: float = 1e-8       # primal violation target (relative to scale)
    max_iters: int = 500         # outer barrier stages
    max_newton: int = 60         # Newton steps per stage
    backtrack: float = 0.5
    barrier_growth: float = 20.0
    newton_tol: float = 1e-10    # half squared Newton decrement


@dataclass
class Solution:
    status: Status
    u: np.ndarray | None
    matrix: np.ndarray | None
    objective: float
    kkt: KktResiduals
    iterations: int
    info: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


class _NumericalError(RuntimeError):
    pass


# -- scalar inequality representations ---------------------------------------


class _AffineCon:
    def __init__(self, a: np.ndarray, b: float):
        self.a = a
        self.b = float(b)
        self.scale = 1.0 + abs(self.b)

    def value(self, z: np.ndarray) -> float:
        return float(self.a @ z - self.b)

    def grad(self, z: np.ndarray) -> np.ndarray:
        return self.a

    def add_hess(self, z: np.ndarray, weight: float, out: np.ndarray) -> None:
        pass


class _BallCon:
    def __init__(self, idx: np.ndarray, radius_sq: float):
        self.idx = idx
        self.r2 = float(radius_sq)
        self.scale = 1.0 + self.r2

    def value(self, z: np.ndarray) -> float:
        zi = z[self.idx]
        return float(zi @ zi - self.r2)

    def grad(self, z: np.ndarray) -> np.ndarray:
        g = np.zeros_like(z)
        g[self.idx] = 2.0 * z[self.idx]
        return g

    def add_hess(self, z: np.ndarray, weight: float, out: np.ndarray) -> None:
        out[self.idx, self.idx] += 2.0 * weight


class _QuadCon:
    """Quadratic constraint evaluated on its nonzero coordinate block."""

    def __init__(self, q: np.ndarray, lin: np.ndarray, rhs: float, scale: float):
        self.q = q
        self.lin = lin
        self.rhs = float(rhs)
        self.scale = 1.0 + abs(scale)
        idx = np.flatnonzero(np.abs(q).sum(axis=0) + np.abs(q).sum(axis=1))
        self.idx = idx
        self.sub = np.ascontiguousarray(q[np.ix_(idx, idx)])

    def value(self, z: np.ndarray) -> float:
        zi = z[self.idx]
        return float(zi @ (self.sub @ zi) + self.lin @ z - self.rhs)

    def grad(self, z: np.ndarray) -> np.ndarray:
        g = self.lin.copy()
        g[self.idx] += 2.0 * (self.sub @ z[self.idx])
        return g

    def add_hess(self, z: np.ndarray, weight: float, out: np.ndarray) -> None:
        out[np.ix_(self.idx, self.idx)] += (2.0 * weight) * self.sub


class _LogArgCon:
    """u[mu] - log(a @ z + b) <= 0."""

    def __init__(self, mu: int, a: np.ndarray, b: float):
        self.mu = mu
        self.a = a
        self.b = float(b)
        self.scale = 1.0

    def arg(self, z: np.ndarray) -> float:
        return float(self.a @ z + self.b)

    def value(self, z: np.ndarray) -> float:
        arg = self.arg(z)
        if arg <= 0.0:
            return np.inf
        return float(z[self.mu] - np.log(arg))

    def grad(self, z: np.ndarray) -> np.ndarray:
        g = -self.a / self.arg(z)
        g[self.mu] += 1.0
        return g

    def add_hess(self, z: np.ndarray, weight: float, out: np.ndarray) -> None:
        arg = self.arg(z)
        out += (weight / arg ** 2) * np.outer(self.a, self.a)


# -- compiled problem ---------------------------------------------------------


_BASIS_STACK_CACHE: dict[int, np.ndarray] = {}


def _basis_stack(m: int) -> np.ndarray:
    """Stack of the orthonormal Hermitian basis matrices, shape (m^2, m, m)."""
    if m not in _BASIS_STACK_CACHE:
        d = rvec_dim(m)
        stack = np.empty((d, m, m), dtype=complex)
        coords = np.zeros(d)
        for alpha in range(d):
            coords[alpha] = 1.0
            stack[alpha] = rvec_to_mat(coords, m)
            coords[alpha] = 0.0
        _BASIS_STACK_CACHE[m] = stack
    return _BASIS_STACK_CACHE[m]


def _psd_barrier_hess(minv: np.ndarray) -> np.ndarray:
    """Hessian of -log det on the rvec coordinates, given the inverse matrix."""
    m = minv.shape[0]
    estack = _basis_stack(m)
    inner = minv[None, :, :] @ estack @ minv[None, :, :]
    d = estack.shape[0]
    h = (estack.conj().reshape(d, m * m) @ inner.reshape(d, m * m).T).real
    return 0.5 * (h + h.T)


class _Compiled:
    def __init__(self, p: ConvexProblem):
        self.n = p.vector_dim
        self.m = p.matrix_dim
        self.msz = rvec_dim(self.m)
        self.dim = self.n + self.msz

        self.quad = np.zeros((self.dim, self.dim))
        self.lin = np.zeros(self.dim)
        self.const = 0.0
        if p.quad_cost is not None:
            self.quad[:self.n, :self.n] += p.quad_cost
        if p.lin_cost is not None:
            self.lin[:self.n] += p.lin_cost
        if p.mat_quad_cost is not None:
            self.quad[self.n:, self.n:] += p.mat_quad_cost.hess
            self.lin[self.n:] += p.mat_quad_cost.lin
            self.const += p.mat_quad_cost.const
        self.logs = [(self._pad_vec(a), b, w) for a, b, w in p.neg_log_costs]

        self.cons: list = []
        eq_rows: list[np.ndarray] = []
        eq_rhs: list[float] = []
        self.psd = False
        for atom in p.constraints:
            if isinstance(atom, AffineIneq):
                self.cons.append(_AffineCon(self._pad(atom.a, atom.f), atom.b))
            elif isinstance(atom, AffineEq):
                eq_rows.append(self._pad(atom.a, atom.f))
                eq_rhs.append(float(atom.b))
            elif isinstance(atom, Ball):
                idx = np.arange(self.n) if atom.indices is None \
                    else np.asarray(atom.indices, dtype=int)
                self.cons.append(_BallCon(idx, atom.radius_sq))
            elif isinstance(atom, ConvexQuadIneq):
                q = np.zeros((self.dim, self.dim))
                lin = np.zeros(self.dim)
                rhs = float(atom.rhs)
                if atom.q_vec is not None:
                    q[:self.n, :self.n] += 0.5 * (np.asarray(atom.q_vec)
                                                  + np.asarray(atom.q_vec).T)
                if atom.lin_vec is not None:
                    lin[:self.n] += np.asarray(atom.lin_vec, dtype=float)
                if atom.mat_quad is not None:
                    q[self.n:, self.n:] += atom.mat_quad.hess
                    lin[self.n:] += atom.mat_quad.lin
                    rhs -= atom.mat_quad.const
                if atom.mat_lin is not None:
                    lin[self.n:] += mat_to_rvec(atom.mat_lin)
                self.cons.append(_QuadCon(q, lin, rhs, atom.rhs))
            elif isinstance(atom, LogAffine):
                a = self._pad_vec(atom.a) if atom.a is not None else np.zeros(self.dim)
                self.cons.append(_LogArgCon(atom.mu_index, a, atom.b))
            elif isinstance(atom, PsdCone):
                self.psd = True
            elif isinstance(atom, TraceCap):
                row = np.zeros(self.dim)
                row[self.n:self.n + self.m] = 1.0
                self.cons.append(_AffineCon(row, atom.limit))
            else:  # pragma: no cover - guarded by the builder
                raise TypeError(f"unsupported atom {atom!r}")
        self.eq_a = np.stack(eq_rows) if eq_rows else None
        self.eq_b = np.asarray(eq_rhs) if eq_rhs else None

        scales = [c.scale for c in self.cons]
        if self.eq_b is not None:
            scales.extend(1.0 + np.abs(self.eq_b))
        self.scale = max(scales) if scales else 1.0
        self.nu = len(self.cons) + (self.m if self.psd else 0)

        # affine rows batched for the barrier hot path
        aff = [c for c in self.cons if isinstance(c, _AffineCon)]
        self.aff_a = np.stack([c.a for c in aff]) if aff else None
        self.aff_b = np.array([c.b for c in aff]) if aff else None
        self.loop_cons = [c for c in self.cons if not isinstance(c, _AffineCon)]

    # coefficient padding helpers

    def _pad_vec(self, a) -> np.ndarray:
        out = np.zeros(self.dim)
        if a is not None:
            out[:self.n] = np.asarray(a, dtype=float).ravel()
        return out

    def _pad(self, a, f) -> np.ndarray:
        out = self._pad_vec(a)
        if f is not None:
            out[self.n:] = mat_to_rvec(f)
        return out

    def matrix_of(self, z: np.ndarray) -> np.ndarray | None:
        if self.m == 0:
            return None
        return rvec_to_mat(z[self.n:], self.m)

    # objective

    def f_value(self, z: np.ndarray) -> float:
        val = float(self.lin @ z + z @ (self.quad @ z) + self.const)
        for a, b, w in self.logs:
            arg = float(a @ z + b)
            if arg <= 0.0:
                return np.inf
            val -= w * np.log(arg)
        return val

    def f_grad(self, z: np.ndarray) -> np.ndarray:
        g = self.lin + 2.0 * (self.quad @ z)
        for a, b, w in self.logs:
            g -= (w / float(a @ z + b)) * a
        return g

    def f_hess(self, z: np.ndarray) -> np.ndarray:
        h = 2.0 * self.quad.copy()
        for a, b, w in self.logs:
            arg = float(a @ z + b)
            h += (w / arg ** 2) * np.outer(a, a)
        return h

    # strict feasibility and barrier evaluation

    def strictly_feasible(self, z: np.ndarray) -> bool:
        for con in self.cons:
            v = con.value(z)
            if not np.isfinite(v) or v >= 0.0:
                return False
        for a, b, _ in self.logs:
            if float(a @ z + b) <= 0.0:
                return False
        if self.psd:
            try:
                np.linalg.cholesky(self.matrix_of(z))
            except np.linalg.LinAlgError:
                return False
        return True

    def barrier(self, z: np.ndarray, t: float, need_hess: bool):
        """Value, gradient and (optionally) Hessian of t*f + barriers."""
        val = t * self.f_value(z)
        if not np.isfinite(val):
            return np.inf, None, None
        g = t * self.f_grad(z)
        h = t * self.f_hess(z) if need_hess else None
        if self.aff_a is not None:
            margins = self.aff_b - self.aff_a @ z
            if margins.min() <= 0.0:
                return np.inf, None, None
            val -= float(np.log(margins).sum())
            inv = 1.0 / margins
            g += self.aff_a.T @ inv
            if need_hess:
                rows = self.aff_a * inv[:, None]
                h += rows.T @ rows
        for con in self.loop_cons:
            margin = -con.value(z)
            if margin <= 0.0:
                return np.inf, None, None
            val -= np.log(margin)
            cg = con.grad(z)
            g += cg / margin
            if need_hess:
                h += np.outer(cg, cg) / margin ** 2
                con.add_hess(z, 1.0 / margin, h)
        if self.psd:
            r = self.matrix_of(z)
            try:
                chol = np.linalg.cholesky(r)
            except np.linalg.LinAlgError:
                return np.inf, None, None
            val -= 2.0 * float(np.log(np.diag(chol).real).sum())
            rinv = scipy.linalg.cho_solve((chol, True), np.eye(self.m, dtype=complex))
            rinv = 0.5 * (rinv + rinv.conj().T)
            g[self.n:] -= mat_to_rvec(rinv)
            if need_hess:
                h[self.n:, self.n:] += _psd_barrier_hess(rinv)
        return val, g, h

    def max_step(self, z: np.ndarray, d: np.ndarray) -> float:
        """Largest ray step keeping every barrier term strictly in domain."""
        tmax = np.inf
        if self.aff_a is not None:
            dv = self.aff_a @ d
            pos = dv > 0.0
            if pos.any():
                margins = self.aff_b[pos] - self.aff_a[pos] @ z
                tmax = float((margins / dv[pos]).min())
        for con in self.loop_cons:
            if isinstance(con, _BallCon):
                zi, di = z[con.idx], d[con.idx]
                tmax = min(tmax, _positive_root(float(di @ di),
                                                2.0 * float(zi @ di),
                                                con.value(z)))
            elif isinstance(con, _QuadCon):
                di = d[con.idx]
                tmax = min(tmax, _positive_root(float(di @ (con.sub @ di)),
                                                float(con.grad(z) @ d),
                                                con.value(z)))
            elif isinstance(con, _LogArgCon):
                tmax = min(tmax, _log_slack_root(z[con.mu], float(d[con.mu]),
                                                 con.arg(z), float(con.a @ d)))
        if self.psd and np.any(d[self.n:]):
            r = self.matrix_of(z)
            dm = rvec_to_mat(d[self.n:], self.m)
            try:
                # positive definiteness at both ray ends covers the segment
                np.linalg.cholesky(r + 1.05 * dm)
            except np.linalg.LinAlgError:
                try:
                    chol = np.linalg.cholesky(r)
                except np.linalg.LinAlgError:
                    return tmax
                half = scipy.linalg.solve_triangular(chol, dm, lower=True)
                mid = scipy.linalg.solve_triangular(chol, half.conj().T,
                                                    lower=True)
                wmin = float(np.linalg.eigvalsh(0.5 * (mid + mid.conj().T))[0])
                if wmin < 0.0:
                    tmax = min(tmax, -1.0 / wmin)
        return tmax


def _positive_root(c2: float, c1: float, c0: float) -> float:
    """Smallest positive root of c2 t^2 + c1 t + c0 with c0 < 0, c2 >= 0."""
    if c2 <= 1e-300:
        return -c0 / c1 if c1 > 0.0 else np.inf
    disc = c1 * c1 - 4.0 * c2 * c0
    return (-c1 + np.sqrt(max(disc, 0.0))) / (2.0 * c2)


def _log_slack_root(mu0: float, dmu: float, arg0: float, darg: float,
                    cap: float = 1.05) -> float:
    """End of the interval where log(arg0 + t darg) - (mu0 + t dmu) > 0.

    The slack is concave in t, so a sign change past any strictly feasible
    origin can be bisected once an upper bracket is known.  Roots beyond
    ``cap`` are reported as unbounded since unit steps are never exceeded.
    """
    def slack(t: float) -> float:
        a = arg0 + t * darg
        if a <= 0.0:
            return -np.inf
        return np.log(a) - (mu0 + t * dmu)

    if slack(cap) > 0.0:
        return np.inf
    hi = arg0 / -darg if darg < 0.0 else np.inf
    hi = min(hi, cap)
    lo = 0.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if slack(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return lo


# -- Newton machinery ---------------------------------------------------------


def _newton_direction(hr: np.ndarray, gr: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(hr)) or not np.all(np.isfinite(gr)):
        raise _NumericalError("non-finite Newton system")
    base = max(float(np.trace(hr)) / max(hr.shape[0], 1), 1e-8)
    reg = 0.0
    eye = np.eye(hr.shape[0])
    for _ in range(10):
        try:
            cf = scipy.linalg.cho_factor(hr + reg * eye, lower=True)
            return scipy.linalg.cho_solve(cf, -gr)
        except scipy.linalg.LinAlgError:
            reg = base * 1e-12 if reg == 0.0 else reg * 100.0
    raise _NumericalError("Newton system not positive definite")


def _center(comp: _Compiled, z: np.ndarray, t: float, zbasis: np.ndarray | None,
            cfg: SolverConfig, dec2_tol: float | None = None
            ) -> tuple[np.ndarray, int]:
    """Newton minimization of the barrier at fixed t; returns (z, steps).

    ``dec2_tol`` bounds the squared Newton decrement at exit; loose values
    suffice on interior barrier stages, the final stage uses ``newton_tol``.
    """
    if dec2_tol is None:
        dec2_tol = 2.0 * cfg.newton_tol
    steps = 0
    for _ in range(cfg.max_newton):
        val, g, h = comp.barrier(z, t, need_hess=True)
        if not np.isfinite(val):
            raise _NumericalError("barrier evaluated at infeasible point")
        if zbasis is None:
            gr, hr = g, h
        else:
            gr = zbasis.T @ g
            hr = zbasis.T @ h @ zbasis
        dy = _newton_direction(hr, gr)
        dec2 = float(-gr @ dy)
        if dec2 <= dec2_tol:
            break
        d = dy if zbasis is None else zbasis @ dy
        # open at the full Newton step: the damped 1/(1+lambda) step crawls
        # when a warm start hugs the boundary, while backtracking from the
        # fraction-to-boundary cap recenters in a handful of iterations
        step = min(1.0, 0.99 * comp.max_step(z, d))
        accepted = False
        while step >= 1e-13:
            znew = z + step * d
            new_val, _, _ = comp.barrier(znew, t, need_hess=False)
            if np.isfinite(new_val) and new_val <= val - 1e-4 * step * dec2:
                z = znew
                accepted = True
                break
            if np.isfinite(new_val):
                # quadratic interpolation through phi(0), phi'(0), phi(step)
                denom = new_val - val + step * dec2
                guess = 0.5 * dec2 * step * step / denom if denom > 0 else step
                step = min(max(guess, 0.1 * step), cfg.backtrack * step)
            else:
                step *= cfg.backtrack
        steps += 1
        if not accepted:
            break
    return z, steps


# -- phase-I ------------------------------------------------------------------


class _PhaseOne:
    """min s subject to relaxed constraints; s < 0 certifies strict interior."""

    def __init__(self, comp: _Compiled):
        self.comp = comp
        self.dim = comp.dim + 1  # trailing coordinate is s

    def required_s(self, z: np.ndarray) -> float:
        comp = self.comp
        need = -0.5
        for con in comp.cons:
            if isinstance(con, _LogArgCon):
                mu = z[con.mu]
                val = np.inf if mu > 500.0 else float(np.exp(mu) - con.arg(z))
            else:
                val = con.value(z)
            need = max(need, val)
        for a, b, _ in comp.logs:
            need = max(need, -(float(a @ z + b)))
        if comp.psd:
            w = np.linalg.eigvalsh(comp.matrix_of(z))
            need = max(need, float(-w[0]))
        return need

    def feasible(self, w: np.ndarray) -> bool:
        z, s = w[:-1], w[-1]
        if s <= -1.0:
            return False
        comp = self.comp
        for con in comp.cons:
            if isinstance(con, _LogArgCon):
                mu = z[con.mu]
                val = np.inf if mu > 500.0 else float(np.exp(mu) - con.arg(z))
            else:
                val = con.value(z)
            if not np.isfinite(val) or val >= s:
                return False
        for a, b, _ in comp.logs:
            if -(float(a @ z + b)) >= s:
                return False
        if comp.psd:
            try:
                np.linalg.cholesky(comp.matrix_of(z)
                                   + s * np.eye(comp.m, dtype=complex))
            except np.linalg.LinAlgError:
                return False
        return True

    def barrier(self, w: np.ndarray, t: float, need_hess: bool):
        comp = self.comp
        z, s = w[:-1], w[-1]
        val = t * s
        g = np.zeros(self.dim)
        g[-1] = t
        h = np.zeros((self.dim, self.dim)) if need_hess else None

        def add_relaxed(con_val: float, con_grad_z: np.ndarray,
                        hess_cb=None) -> bool:
            nonlocal val
            margin = s - con_val
            if not np.isfinite(con_val) or margin <= 0.0:
                return False
            val -= np.log(margin)
            full = np.concatenate([con_grad_z, [-1.0]])
            g[:] += full / margin
            if need_hess:
                h[:] += np.outer(full, full) / margin ** 2
                if hess_cb is not None:
                    hess_cb(1.0 / margin)
            return True

        for con in comp.cons:
            if isinstance(con, _LogArgCon):
                mu = z[con.mu]
                if mu > 500.0:
                    return np.inf, None, None
                emu = float(np.exp(mu))
                cv = emu - con.arg(z)
                cg = -con.a[:].copy()
                cg[con.mu] += emu

                def cb(weight, emu=emu, mu_idx=con.mu):
                    h[mu_idx, mu_idx] += weight * emu

                if not add_relaxed(cv, cg, cb):
                    return np.inf, None, None
            else:
                cv = con.value(z)
                cg = con.grad(z)

                def cb(weight, con=con):
                    con.add_hess(z, weight, h[:comp.dim, :comp.dim])

                if not add_relaxed(cv, cg, cb):
                    return np.inf, None, None
        for a, b, _ in comp.logs:
            if not add_relaxed(-(float(a @ z + b)), -a):
                return np.inf, None, None

        if s + 1.0 <= 0.0:
            return np.inf, None, None
        val -= np.log(s + 1.0)
        g[-1] -= 1.0 / (s + 1.0)
        if need_hess:
            h[-1, -1] += 1.0 / (s + 1.0) ** 2

        if comp.psd:
            mat = comp.matrix_of(z) + s * np.eye(comp.m, dtype=complex)
            try:
                chol = np.linalg.cholesky(mat)
            except np.linalg.LinAlgError:
                return np.inf, None, None
            val -= 2.0 * float(np.log(np.diag(chol).real).sum())
            minv = scipy.linalg.cho_solve((chol, True), np.eye(comp.m, dtype=complex))
            minv = 0.5 * (minv + minv.conj().T)
            sl = slice(comp.n, comp.dim)
            g[sl] -= mat_to_rvec(minv)
            g[-1] -= float(np.trace(minv).real)
            if need_hess:
                minv2 = minv @ minv
                h[sl, sl] += _psd_barrier_hess(minv)
                cross = mat_to_rvec(minv2)
                h[sl, -1] += cross
                h[-1, sl] += cross
                h[-1, -1] += float(np.trace(minv2).real)
        return val, g, h


def _run_phase1(comp: _Compiled, z0: np.ndarray, zbasis: np.ndarray | None,
                cfg: SolverConfig) -> tuple[np.ndarray | None, float, int]:
    """Returns (strictly feasible z or None, best s, newton steps)."""
    ph = _PhaseOne(comp)
    s0 = ph.required_s(z0) + 1.0
    if not np.isfinite(s0):
        z0 = _project_eq(comp, np.zeros_like(z0))
        s0 = ph.required_s(z0) + 1.0
        if not np.isfinite(s0):
            raise _NumericalError("phase-I initialization failed")
    w = np.concatenate([z0, [s0]])
    if not ph.feasible(w):
        raise _NumericalError("phase-I initialization failed")

    if zbasis is None:
        basis = None
    else:
        basis = np.zeros((ph.dim, zbasis.shape[1] + 1))
        basis[:-1, :-1] = zbasis
        basis[-1, -1] = 1.0

    # every scalar relaxation plus the s >= -1 bound contributes to centrality
    nu = len(comp.cons) + len(comp.logs) + 1 + (comp.m if comp.psd else 0)
    t = 1.0
    steps = 0
    for _ in range(80):
        w, used = _center_generic(ph, w, t, basis, cfg)
        steps += used
        s = w[-1]
        if s <= -1e-5:
            return w[:-1], float(s), steps
        if nu / t <= 1e-11:
            break
        t *= cfg.barrier_growth
    s = float(w[-1])
    if s <= -1e-9 and comp.strictly_feasible(w[:-1]):
        return w[:-1], s, steps
    return None, s, steps


def _center_generic(obj, w: np.ndarray, t: float, basis: np.ndarray | None,
                    cfg: SolverConfig) -> tuple[np.ndarray, int]:
    steps = 0
    for _ in range(cfg.max_newton):
        val, g, h = obj.barrier(w, t, need_hess=True)
        if not np.isfinite(val):
            raise _NumericalError("phase-I barrier infeasible")
        if basis is None:
            gr, hr = g, h
        else:
            gr = basis.T @ g
            hr = basis.T @ h @ basis
        dy = _newton_direction(hr, gr)
        dec2 = float(-gr @ dy)
        if dec2 <= 2.0 * cfg.newton_tol:
            break
        d = dy if basis is None else basis @ dy
        step = 1.0
        accepted = False
        while step >= 1e-13:
            wnew = w + step * d
            if obj.feasible(wnew):
                new_val, _, _ = obj.barrier(wnew, t, need_hess=False)
                if np.isfinite(new_val) and new_val <= val - 1e-4 * step * dec2:
                    w = wnew
                    accepted = True
                    break
            step *= cfg.backtrack
        steps += 1
        if not accepted:
            break
    return w, steps


# -- dual estimation ----------------------------------------------------------


def _estimate_duals(comp: _Compiled, z: np.ndarray, act_rel: float):
    """Bounded least-squares multiplier fit; returns residual pieces."""
    fg = comp.f_grad(z)
    gvals = [con.value(z) for con in comp.cons]
    active = [i for i, gv in enumerate(gvals)
              if np.isfinite(gv) and gv >= -act_rel * comp.cons[i].scale]
    cols: list[np.ndarray] = []
    lower: list[float] = []
    for i in active:
        cols.append(comp.cons[i].grad(z))
        lower.append(0.0)
    n_eq = 0
    if comp.eq_a is not None:
        for row in comp.eq_a:
            cols.append(row)
            lower.append(-np.inf)
        n_eq = comp.eq_a.shape[0]

    psd_mats: list[np.ndarray] = []
    if comp.psd:
        r = comp.matrix_of(z)
        w, v = np.linalg.eigh(r)
        # sqrt-of-gap scaling: degenerate primal-dual pairs approach the
        # boundary only as sqrt(1/t), so the near-null cut must sit above that
        mask = w <= 1e-4 * max(1.0, float(w[-1]))
        v0 = v[:, mask]
        q = v0.shape[1]
        for alpha in range(rvec_dim(q)):
            coords = np.zeros(rvec_dim(q))
            coords[alpha] = 1.0
            smat = v0 @ rvec_to_mat(coords, q) @ v0.conj().T
            psd_mats.append(smat)
            col = np.zeros(comp.dim)
            col[comp.n:] = -mat_to_rvec(smat)
            cols.append(col)
            lower.append(-np.inf)

    if not cols:
        lam = np.zeros(0)
        nu_eq = np.zeros(0)
        s_dual = None
        resid = fg
    else:
        d = np.stack(cols, axis=1)
        norms = np.linalg.norm(d, axis=0)
        norms[norms == 0] = 1.0
        dn = d / norms
        res = lsq_linear(dn, -fg, bounds=(np.asarray(lower),
                                          np.full(len(cols), np.inf)),
                         tol=1e-12)
        x = res.x / norms
        k = len(active)
        lam = x[:k]
        nu_eq = x[k:k + n_eq]
        sigma = x[k + n_eq:]
        s_dual = None
        if psd_mats:
            s_raw = sum(sig * mat for sig, mat in zip(sigma, psd_mats))
            sw, sv = np.linalg.eigh(s_raw)
            s_dual = (sv * np.maximum(sw, 0.0)) @ sv.conj().T
        resid = fg.copy()
        for lam_i, i in zip(lam, active):
            resid += lam_i * comp.cons[i].grad(z)
        if n_eq:
            resid += nu_eq @ comp.eq_a
        if s_dual is not None:
            resid[comp.n:] -= mat_to_rvec(s_dual)

    gap = 0.0
    for lam_i, i in zip(lam, active):
        gap += lam_i * abs(gvals[i]) if np.isfinite(gvals[i]) else 0.0
    if comp.psd and s_dual is not None:
        gap += abs(float(np.trace(s_dual @ comp.matrix_of(z)).real))
    return fg, resid, gap, active, lam


def _residuals_at(comp: _Compiled, z: np.ndarray, act_rel: float) -> KktResiduals:
    violation = 0.0
    for con in comp.cons:
        v = con.value(z)
        if isinstance(con, _LogArgCon) and not np.isfinite(v):
            v = -con.arg(z)  # report the domain violation itself
        violation = max(violation, v if np.isfinite(v) else 1.0)
    for a, b, _ in comp.logs:
        violation = max(violation, -(float(a @ z + b)))
    if comp.eq_a is not None:
        violation = max(violation, float(np.abs(comp.eq_a @ z - comp.eq_b).max()))
    if comp.psd:
        w = np.linalg.eigvalsh(comp.matrix_of(z))
        violation = max(violation, float(-w[0]))
    fg, resid, gap, _, _ = _estimate_duals(comp, z, act_rel)
    fval = comp.f_value(z)
    fscale = 1.0 + float(np.linalg.norm(fg))
    gscale = 1.0 + (abs(fval) if np.isfinite(fval) else 0.0)
    return KktResiduals(primal=float(max(violation, 0.0)),
                        dual=float(np.linalg.norm(resid)) / fscale,
                        gap=float(gap) / gscale)


# -- public entry points -------------------------------------------------------


def _equality_basis(comp: _Compiled):
    """Particular solution and orthonormal null basis for the equalities."""
    if comp.eq_a is None:
        return np.zeros(comp.dim), None, True
    a, b = comp.eq_a, comp.eq_b
    zhat, *_ = np.linalg.lstsq(a, b, rcond=None)
    if np.abs(a @ zhat - b).max() > 1e-8 * comp.scale:
        return zhat, None, False
    basis = scipy.linalg.null_space(a)
    return zhat, basis, True


def _project_eq(comp: _Compiled, z: np.ndarray) -> np.ndarray:
    if comp.eq_a is None:
        return z
    corr, *_ = np.linalg.lstsq(comp.eq_a, comp.eq_a @ z - comp.eq_b, rcond=None)
    return z - corr


def solve(problem: ConvexProblem, config: SolverConfig | None = None) -> Solution:
    cfg = config or SolverConfig()
    comp = _Compiled(problem)

    def finish(z: np.ndarray, status: Status, iters: int, info: dict) -> Solution:
        # generous activity cut: constraints a couple of orders from binding
        # still carry small central-path multipliers with large gradients, and
        # leaving them out floors the stationarity fit above the tolerance
        kkt = _residuals_at(comp, z, act_rel=1e-2)
        fval = comp.f_value(z)
        if status is Status.OPTIMAL:
            ok = (kkt.primal <= cfg.feas_tol * comp.scale
                  and kkt.dual <= cfg.tol and kkt.gap <= cfg.tol)
            if not ok:
                status = Status.MAX_ITERS
        return Solution(status=status,
                        u=z[:comp.n].copy() if comp.n else None,
                        matrix=comp.matrix_of(z),
                        objective=float(fval) if np.isfinite(fval) else float("nan"),
                        kkt=kkt, iterations=iters, info=info)

    info: dict = {"phase1": False}
    total_steps = 0
    try:
        zhat, zbasis, consistent = _equality_basis(comp)
        if not consistent:
            return finish(zhat, Status.INFEASIBLE, 0, {"reason": "inconsistent equalities"})
        if zbasis is not None and zbasis.shape[1] == 0:
            # equalities pin the point entirely
            sol = finish(zhat, Status.OPTIMAL, 0,
                         {"reason": "fully determined by equalities"})
            if sol.kkt.primal > cfg.feas_tol * comp.scale:
                sol.status = Status.INFEASIBLE
            return sol

        z = None
        zhat_try = zhat
        from_start = False
        if problem.start_u is not None or problem.start_mat is not None:
            cand = np.zeros(comp.dim)
            if problem.start_u is not None:
                cand[:comp.n] = problem.start_u
            if problem.start_mat is not None:
                cand[comp.n:] = mat_to_rvec(problem.start_mat)
            cand = _project_eq(comp, cand)
            if comp.strictly_feasible(cand):
                z = cand
                from_start = True
            else:
                zhat_try = cand
        if z is None:
            if comp.strictly_feasible(zhat):
                z = zhat
            else:
                info["phase1"] = True
                zf, best_s, steps = _run_phase1(comp, _project_eq(comp, zhat_try),
                                                zbasis, cfg)
                total_steps += steps
                info["phase1_slack"] = best_s
                if zf is None:
                    return finish(_project_eq(comp, zhat_try), Status.INFEASIBLE,
                                  total_steps, info)
                z = zf

        if comp.nu == 0:
            z, steps = _center(comp, z, 1.0, zbasis, cfg)
            total_steps += steps
            info["stages"] = 1
            return finish(z, Status.OPTIMAL, total_steps, info)

        fval0 = comp.f_value(z)
        t = max(1e-3, comp.nu / max(1.0, abs(fval0) if np.isfinite(fval0) else 1.0))
        if from_start and problem.start_t is not None:
            t = max(t, float(problem.start_t))
        stages = 0
        status = Status.MAX_ITERS
        while stages < cfg.max_iters:
            fguess = comp.f_value(z)
            target = 0.05 * cfg.tol * (1.0 + (abs(fguess) if np.isfinite(fguess)
                                              else 0.0))
            # interior stages only need approximate centering
            tight = comp.nu / t <= target
            z, steps = _center(comp, z, t, zbasis, cfg,
                               dec2_tol=None if tight else 0.05)
            total_steps += steps
            stages += 1
            fval = comp.f_value(z)
            gap_target = 0.05 * cfg.tol * (1.0 + abs(fval))
            post_ok = comp.nu / t <= gap_target
            if tight and post_ok:
                status = Status.OPTIMAL
                break
            if not post_ok:
                t *= cfg.barrier_growth
        info["stages"] = stages
        info["t_final"] = t
        return finish(z, status, total_steps, info)
    except _NumericalError as exc:
        kkt = KktResiduals(primal=np.inf, dual=np.inf, gap=np.inf)
        return Solution(status=Status.NUMERICAL_FAILURE, u=None, matrix=None,
                        objective=float("nan"), kkt=kkt, iterations=total_steps,
                        info={**info, "error": str(exc)})


def kkt_residuals(problem: ConvexProblem, u: np.ndarray | None = None,
                  matrix: np.ndarray | None = None) -> KktResiduals:
    """Primal violation, scaled stationarity residual, and scaled gap."""
    comp = _Compiled(problem)
    z = np.zeros(comp.dim)
    if u is not None:
        u = np.asarray(u, dtype=float).ravel()
        if u.size != comp.n:
            raise ValueError("vector block length mismatch")
        z[:comp.n] = u
    if matrix is not None:
        mat = np.asarray(matrix, dtype=complex)
        if mat.shape != (comp.m, comp.m):
            raise ValueError("matrix block shape mismatch")
        z[comp.n:] = mat_to_rvec(0.5 * (mat + mat.conj().T))
    return _residuals_at(comp, z, act_rel=1e-6)
