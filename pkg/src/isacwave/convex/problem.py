"""Intermediate representation for the convex subproblems.

A problem has one real vector block ``u`` (length ``vector_dim``) and one
Hermitian matrix block ``R`` (``matrix_dim`` x ``matrix_dim``).  The matrix
block is handled through an orthonormal real vectorization ``rvec`` so that
``<A, B> = rvec(A) @ rvec(B)`` and ``Tr(R)`` is the sum of the first
``matrix_dim`` coordinates; no trace double counting can occur.

The objective is a sum of linear, positive-semidefinite quadratic, and
negative-log-of-affine terms.  Constraints are built from a small set of
atoms; every quadratic coefficient matrix is validated PSD to -1e-8.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

_PSD_CHECK_TOL = 1e-8

_TRIU_CACHE: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _triu(m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if m not in _TRIU_CACHE:
        rows, cols = np.triu_indices(m, k=1)
        _TRIU_CACHE[m] = (rows, cols, np.arange(m))
    return _TRIU_CACHE[m]


def rvec_dim(m: int) -> int:
    return m * m


def mat_to_rvec(a: np.ndarray) -> np.ndarray:
    """Orthonormal real coordinates of a Hermitian matrix.

    Layout: diagonal (m), then sqrt(2)*Re of the upper triangle row-major,
    then sqrt(2)*Im of the upper triangle.
    """
    a = np.asarray(a, dtype=complex)
    m = a.shape[0]
    rows, cols, diag = _triu(m)
    upper = np.sqrt(2.0) * a[rows, cols]
    return np.concatenate([a[diag, diag].real, upper.real, upper.imag])


def rvec_to_mat(r: np.ndarray, m: int) -> np.ndarray:
    """Inverse of :func:`mat_to_rvec`."""
    r = np.asarray(r, dtype=float)
    rows, cols, diag = _triu(m)
    k = rows.size
    out = np.zeros((m, m), dtype=complex)
    out[diag, diag] = r[:m]
    upper = (r[m:m + k] + 1j * r[m + k:m + 2 * k]) / np.sqrt(2.0)
    out[rows, cols] = upper
    out[cols, rows] = upper.conj()
    return out


def rvec_identity(m: int) -> np.ndarray:
    """rvec of the identity; its dot with rvec(R) is Tr(R)."""
    out = np.zeros(rvec_dim(m))
    out[:m] = 1.0
    return out


_BASIS_CACHE: dict[int, np.ndarray] = {}


def rvec_basis(m: int) -> np.ndarray:
    """Columns are column-major vec() of the orthonormal Hermitian basis."""
    if m not in _BASIS_CACHE:
        d = rvec_dim(m)
        b = np.zeros((m * m, d), dtype=complex)
        for alpha in range(d):
            coords = np.zeros(d)
            coords[alpha] = 1.0
            b[:, alpha] = rvec_to_mat(coords, m).flatten(order="F")
        _BASIS_CACHE[m] = b
    return _BASIS_CACHE[m]


def _check_psd(mat: np.ndarray, what: str) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    mat = 0.5 * (mat + mat.T)
    if mat.size:
        w = np.linalg.eigvalsh(mat)
        scale = max(1.0, float(abs(w).max()))
        if w.min() < -_PSD_CHECK_TOL * scale:
            raise ValueError(f"{what}: coefficient matrix is not PSD "
                             f"(min eigenvalue {w.min():.3e})")
    return mat


@dataclass(frozen=True)
class MatQuad:
    """Sum of weighted squared affine functionals of the matrix block.

    Represents ``sum_l w_l * (<C_l, R> + d_l)^2`` compiled to rvec
    coordinates: ``r' H r + g' r + const``.
    """

    hess: np.ndarray   # (m^2, m^2), PSD
    lin: np.ndarray    # (m^2,)
    const: float

    @classmethod
    def from_terms(cls, coeffs: list[np.ndarray], offsets: np.ndarray,
                   weights: np.ndarray | float = 1.0) -> "MatQuad":
        rows = np.stack([mat_to_rvec(c) for c in coeffs])
        offsets = np.asarray(offsets, dtype=float).ravel()
        w = np.broadcast_to(np.asarray(weights, dtype=float), offsets.shape)
        hess = (rows * w[:, None]).T @ rows
        lin = 2.0 * (w * offsets) @ rows
        const = float(w @ offsets ** 2)
        return cls(hess=_check_psd(hess, "matrix quadratic"), lin=lin, const=const)

    def scaled(self, factor: float) -> "MatQuad":
        if factor < 0:
            raise ValueError("scale factor must be >= 0 to preserve convexity")
        return MatQuad(hess=factor * self.hess, lin=factor * self.lin,
                       const=factor * self.const)


@dataclass(frozen=True)
class AffineIneq:
    """a @ u + <F, R> <= b."""

    a: np.ndarray | None = None
    f: np.ndarray | None = None
    b: float = 0.0


@dataclass(frozen=True)
class AffineEq:
    """a @ u + <F, R> == b."""

    a: np.ndarray | None = None
    f: np.ndarray | None = None
    b: float = 0.0


@dataclass(frozen=True)
class Ball:
    """sum(u[indices]^2) <= radius_sq."""

    radius_sq: float
    indices: tuple[int, ...] | None = None


@dataclass(frozen=True)
class ConvexQuadIneq:
    """u' Q u + q @ u + mat_quad(R) + <F, R> <= rhs."""

    q_vec: np.ndarray | None = None
    lin_vec: np.ndarray | None = None
    mat_quad: MatQuad | None = None
    mat_lin: np.ndarray | None = None
    rhs: float = 0.0


@dataclass(frozen=True)
class LogAffine:
    """u[mu_index] <= log(a @ u + b); encodes exp(mu) <= affine."""

    mu_index: int
    a: np.ndarray | None = None
    b: float = 0.0


@dataclass(frozen=True)
class PsdCone:
    """R is positive semidefinite."""


@dataclass(frozen=True)
class TraceCap:
    """Tr(R) <= limit."""

    limit: float


ConstraintAtom = AffineIneq | AffineEq | Ball | ConvexQuadIneq | LogAffine | PsdCone | TraceCap


@dataclass
class ConvexProblem:
    """Convex program over one real vector and one Hermitian matrix block."""

    vector_dim: int = 0
    matrix_dim: int = 0
    lin_cost: np.ndarray | None = None
    quad_cost: np.ndarray | None = None
    mat_quad_cost: MatQuad | None = None
    neg_log_costs: list[tuple[np.ndarray, float, float]] = field(default_factory=list)
    constraints: list[ConstraintAtom] = field(default_factory=list)
    start_u: np.ndarray | None = None
    start_mat: np.ndarray | None = None
    start_t: float | None = None

    def __post_init__(self) -> None:
        if self.vector_dim < 0 or self.matrix_dim < 0:
            raise ValueError("block dimensions must be >= 0")
        if self.vector_dim == 0 and self.matrix_dim == 0:
            raise ValueError("problem needs at least one variable block")

    # -- objective builders -------------------------------------------------

    def add_linear_cost(self, c: np.ndarray) -> None:
        c = np.asarray(c, dtype=float).ravel()
        if c.size != self.vector_dim:
            raise ValueError("linear cost length mismatch")
        self.lin_cost = c if self.lin_cost is None else self.lin_cost + c

    def add_vector_quad_cost(self, q: np.ndarray) -> None:
        q = _check_psd(q, "vector quadratic cost")
        if q.shape != (self.vector_dim, self.vector_dim):
            raise ValueError("quadratic cost shape mismatch")
        self.quad_cost = q if self.quad_cost is None else self.quad_cost + q

    def add_matrix_quad_cost(self, mq: MatQuad) -> None:
        if mq.hess.shape[0] != rvec_dim(self.matrix_dim):
            raise ValueError("matrix quadratic dimension mismatch")
        if self.mat_quad_cost is None:
            self.mat_quad_cost = mq
        else:
            prev = self.mat_quad_cost
            self.mat_quad_cost = MatQuad(hess=prev.hess + mq.hess, lin=prev.lin + mq.lin,
                                         const=prev.const + mq.const)

    def add_neg_log_cost(self, a: np.ndarray, b: float, weight: float = 1.0) -> None:
        """Adds ``-weight * log(a @ u + b)`` to the objective."""
        a = np.asarray(a, dtype=float).ravel()
        if a.size != self.vector_dim:
            raise ValueError("log cost length mismatch")
        if weight <= 0:
            raise ValueError("log cost weight must be > 0")
        self.neg_log_costs.append((a, float(b), float(weight)))

    # -- constraint builders ------------------------------------------------

    def add(self, atom: ConstraintAtom) -> None:
        self._validate_atom(atom)
        self.constraints.append(atom)

    def _expect_vec(self, a, what: str) -> np.ndarray | None:
        if a is None:
            return None
        a = np.asarray(a, dtype=float).ravel()
        if a.size != self.vector_dim:
            raise ValueError(f"{what}: vector coefficient length {a.size} "
                             f"!= vector_dim {self.vector_dim}")
        return a

    def _expect_herm(self, f, what: str) -> np.ndarray | None:
        if f is None:
            return None
        f = np.asarray(f, dtype=complex)
        m = self.matrix_dim
        if f.shape != (m, m):
            raise ValueError(f"{what}: matrix coefficient shape {f.shape} != ({m}, {m})")
        if np.abs(f - f.conj().T).max() > 1e-10 * max(1.0, float(np.abs(f).max())):
            raise ValueError(f"{what}: matrix coefficient must be Hermitian")
        return 0.5 * (f + f.conj().T)

    def _validate_atom(self, atom: ConstraintAtom) -> None:
        if isinstance(atom, (AffineIneq, AffineEq)):
            a = self._expect_vec(atom.a, type(atom).__name__)
            f = self._expect_herm(atom.f, type(atom).__name__)
            if a is None and f is None:
                raise ValueError("affine atom needs at least one coefficient block")
        elif isinstance(atom, Ball):
            if atom.radius_sq <= 0:
                raise ValueError("Ball radius_sq must be > 0")
            if atom.indices is not None:
                idx = np.asarray(atom.indices, dtype=int)
                if idx.size == 0 or idx.min() < 0 or idx.max() >= self.vector_dim:
                    raise ValueError("Ball indices out of range")
        elif isinstance(atom, ConvexQuadIneq):
            if atom.q_vec is not None:
                q = _check_psd(atom.q_vec, "ConvexQuadIneq")
                if q.shape != (self.vector_dim, self.vector_dim):
                    raise ValueError("ConvexQuadIneq q_vec shape mismatch")
            self._expect_vec(atom.lin_vec, "ConvexQuadIneq")
            self._expect_herm(atom.mat_lin, "ConvexQuadIneq")
            if atom.mat_quad is not None and \
                    atom.mat_quad.hess.shape[0] != rvec_dim(self.matrix_dim):
                raise ValueError("ConvexQuadIneq mat_quad dimension mismatch")
        elif isinstance(atom, LogAffine):
            if not (0 <= atom.mu_index < self.vector_dim):
                raise ValueError("LogAffine mu_index out of range")
            self._expect_vec(atom.a, "LogAffine")
        elif isinstance(atom, PsdCone):
            if self.matrix_dim == 0:
                raise ValueError("PsdCone needs a matrix block")
        elif isinstance(atom, TraceCap):
            if self.matrix_dim == 0:
                raise ValueError("TraceCap needs a matrix block")
            if atom.limit <= 0:
                raise ValueError("TraceCap limit must be > 0")
        else:
            raise TypeError(f"unknown constraint atom {atom!r}")

    def set_start(self, u: np.ndarray | None = None, mat: np.ndarray | None = None,
                  start_t: float | None = None) -> None:
        """Strictly feasible warm start; ``start_t`` hints the barrier scale.

        ``start_t`` is used only when the start point itself is accepted, so a
        stale hint can cost extra Newton steps but never changes the solution.
        """
        if u is not None:
            u = np.asarray(u, dtype=float).ravel()
            if u.size != self.vector_dim:
                raise ValueError("start vector length mismatch")
        if mat is not None:
            mat = self._expect_herm(mat, "start matrix")
        if start_t is not None and not (start_t > 0 and np.isfinite(start_t)):
            raise ValueError("start_t must be positive and finite")
        self.start_u = u
        self.start_mat = mat
        self.start_t = None if start_t is None else float(start_t)

    # -- debugging aid ------------------------------------------------------

    def to_json(self) -> str:
        def describe(atom: ConstraintAtom) -> dict:
            d: dict = {"atom": type(atom).__name__}
            for name, val in vars(atom).items():
                if isinstance(val, np.ndarray):
                    d[name] = val.tolist() if val.size <= 64 else f"array{val.shape}"
                elif isinstance(val, MatQuad):
                    d[name] = f"MatQuad(dim={val.hess.shape[0]})"
                else:
                    d[name] = val
            return d

        payload = {
            "schema": "isacwave.problem/1",
            "vector_dim": self.vector_dim,
            "matrix_dim": self.matrix_dim,
            "objective": {
                "linear": self.lin_cost is not None,
                "vector_quad": self.quad_cost is not None,
                "matrix_quad": self.mat_quad_cost is not None,
                "neg_logs": len(self.neg_log_costs),
            },
            "constraints": [describe(a) for a in self.constraints],
            "has_start": self.start_u is not None or self.start_mat is not None,
        }
        return json.dumps(payload, default=str)
