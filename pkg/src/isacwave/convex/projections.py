"""Projections onto the PSD cone and the trace-capped PSD cone."""

from __future__ import annotations

import numpy as np


def _eig_herm(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(1.0, float(np.abs(a).max()))
    if np.abs(a - a.conj().T).max() > 1e-8 * scale:
        raise ValueError("matrix is not Hermitian")
    return np.linalg.eigh(0.5 * (a + a.conj().T))


def psd_project(a: np.ndarray) -> np.ndarray:
    """Nearest (Frobenius) PSD matrix: clip negative eigenvalues to zero."""
    w, v = _eig_herm(a)
    w = np.maximum(w, 0.0)
    return (v * w) @ v.conj().T


def psd_trace_project(a: np.ndarray, trace_cap: float) -> np.ndarray:
    """Nearest PSD matrix with trace at most ``trace_cap``.

    Clip eigenvalues to be nonnegative; if their sum still exceeds the cap,
    shift all eigenvalues down uniformly (re-clipping at zero) until the
    positive part sums exactly to the cap.
    """
    if trace_cap < 0:
        raise ValueError("trace_cap must be >= 0")
    w, v = _eig_herm(a)
    w = np.maximum(w, 0.0)
    total = w.sum()
    if total > trace_cap:
        if trace_cap == 0.0:
            w[:] = 0.0
        else:
            # Simplex projection of the eigenvalues: find the uniform shift
            # tau with sum(max(w - tau, 0)) == trace_cap.
            ws = np.sort(w)[::-1]
            cum = np.cumsum(ws)
            k = np.arange(1, ws.size + 1)
            keep = np.nonzero(ws - (cum - trace_cap) / k > 0.0)[0].max()
            tau = (cum[keep] - trace_cap) / (keep + 1)
            w = np.maximum(w - tau, 0.0)
    return (v * w) @ v.conj().T
