"""Diagnostics for candidate waveforms: rates, wedge margins, beam pattern fit.

Everything here is evaluation-only and independent of the optimizers, so the
same numbers can be recomputed on relaxed covariances and on extracted
waveforms alike.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import AngleGrid, ScenarioDraw, SystemConfig, steering_matrix

REPORT_CSV_HEADER = ("seed", "omega1", "sum_rate", "mse", "tx_power", "min_margin", "rank_ratio")

_HERMITIAN_TOL = 1e-10
_PSD_EIG_TOL = -1e-8


@dataclass(frozen=True)
class CiMargin:
    """Slack of one user's constructive-interference wedge; >= 0 is feasible."""

    user: int
    value: float

    @property
    def feasible(self) -> bool:
        return self.value >= 0.0


def _check_hermitian(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=complex)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError(f"covariance must be square, got shape {r.shape}")
    scale = max(1.0, float(np.abs(r).max()))
    if np.abs(r - r.conj().T).max() > _HERMITIAN_TOL * scale:
        raise ValueError("covariance is not Hermitian within 1e-10")
    return 0.5 * (r + r.conj().T)


def beampattern_gain(r: np.ndarray, grid: AngleGrid) -> np.ndarray:
    """Transmit gain a(theta)^H R a(theta) on every grid angle.

    ``r`` must be Hermitian; for a PSD input the result is non-negative up
    to roundoff (tiny negatives are clipped).
    """
    r = _check_hermitian(r)
    a = steering_matrix(grid.array, r.shape[0])
    gains = np.einsum("il,ij,jl->l", a.conj(), r, a)
    return np.maximum(gains.real, 0.0)


def received_amplitudes(x: np.ndarray, channels: np.ndarray) -> np.ndarray:
    """Noise-free receive samples h_k^H x for all users."""
    x = np.asarray(x, dtype=complex).ravel()
    h = np.atleast_2d(np.asarray(channels, dtype=complex))
    return h.conj() @ x


def sum_rate(x: np.ndarray, channels: np.ndarray, noise_mw: float,
             bandwidth_hz: float = 1.0) -> tuple[float, np.ndarray]:
    """Achievable per-user rates and their sum for a single waveform.

    Rate of user k is ``B * log2(1 + |h_k^H x|^2 / N0)``.
    """
    if noise_mw <= 0:
        raise ValueError(f"noise power must be > 0, got {noise_mw}")
    amps = received_amplitudes(x, channels)
    rates = bandwidth_hz * np.log2(1.0 + np.abs(amps) ** 2 / noise_mw)
    return float(rates.sum()), rates


def eta_star(r: np.ndarray, desired_gain: np.ndarray, grid: AngleGrid) -> float:
    """Least-squares optimal scaling of the desired template against R's pattern."""
    ghat = np.asarray(desired_gain, dtype=float).ravel()
    denom = float(ghat @ ghat)
    if denom <= 0.0:
        raise ValueError("desired beampattern is identically zero")
    gains = beampattern_gain(r, grid)
    return float((ghat * gains).sum() / denom)


def beampattern_mse(eta: float, r: np.ndarray, desired_gain: np.ndarray,
                    grid: AngleGrid) -> float:
    """Mean squared mismatch between ``eta * template`` and R's pattern."""
    ghat = np.asarray(desired_gain, dtype=float).ravel()
    gains = beampattern_gain(r, grid)
    if ghat.shape != gains.shape:
        raise ValueError(f"template length {ghat.shape} does not match grid {gains.shape}")
    diff = eta * ghat - gains
    return float(diff @ diff / diff.size)


def ci_margin(x: np.ndarray, channels: np.ndarray, symbols: np.ndarray,
              gamma_lin: np.ndarray, noise_mw: float, half_angle_rad: float) -> list[CiMargin]:
    """Wedge slack per user for the symbol-rotated receive sample.

    value = (Re(h_rot^H x) - sqrt(N0 * Gamma)) * tan(phi) - |Im(h_rot^H x)|.
    """
    x = np.asarray(x, dtype=complex).ravel()
    h = np.atleast_2d(np.asarray(channels, dtype=complex))
    s = np.asarray(symbols, dtype=complex).ravel()
    g = np.asarray(gamma_lin, dtype=float).ravel()
    if not (h.shape[0] == s.size == g.size):
        raise ValueError("channels, symbols and gamma vectors disagree on user count")
    tan_phi = np.tan(half_angle_rad)
    rotated = (h * s[:, None]).conj() @ x
    values = (rotated.real - np.sqrt(noise_mw * g)) * tan_phi - np.abs(rotated.imag)
    return [CiMargin(user=k, value=float(v)) for k, v in enumerate(values)]


def min_ci_margin(margins: list[CiMargin]) -> float:
    return min(m.value for m in margins)


@dataclass
class WaveformReport:
    """Bundle of diagnostics for one design.

    When only a covariance is supplied the rate and wedge numbers come from
    its principal rank-one component and ``approximate_comm`` is set.
    """

    sum_rate_bps: float
    per_user_rate: np.ndarray
    mse: float
    eta: float
    margins: list[CiMargin]
    tx_power: float
    beam_gains: np.ndarray
    rank_ratio: float
    covariance_gap: float | None
    approximate_comm: bool

    @property
    def min_margin(self) -> float:
        return min_ci_margin(self.margins)

    def to_dict(self) -> dict:
        return {
            "schema": "isacwave.report/1",
            "sum_rate_bps": self.sum_rate_bps,
            "per_user_rate": self.per_user_rate.tolist(),
            "mse": self.mse,
            "eta": self.eta,
            "margins": [{"user": m.user, "value": m.value} for m in self.margins],
            "tx_power": self.tx_power,
            "beam_gains": self.beam_gains.tolist(),
            "rank_ratio": self.rank_ratio,
            "covariance_gap": self.covariance_gap,
            "approximate_comm": self.approximate_comm,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def csv_row(self, seed: int | None = None, omega1: float | None = None) -> list:
        """Row matching REPORT_CSV_HEADER; caller supplies run coordinates."""
        return [
            "" if seed is None else seed,
            "" if omega1 is None else omega1,
            self.sum_rate_bps,
            self.mse,
            self.tx_power,
            self.min_margin,
            self.rank_ratio,
        ]


def rank_one_metrics(r: np.ndarray) -> tuple[np.ndarray, float]:
    """Principal component of a covariance and its lambda2/lambda1 ratio."""
    r = _check_hermitian(r)
    vals, vecs = np.linalg.eigh(r)
    lam1 = float(vals[-1])
    if lam1 <= 0.0:
        return np.zeros(r.shape[0], dtype=complex), 0.0
    lam2 = float(max(vals[-2], 0.0)) if vals.size > 1 else 0.0
    x = np.sqrt(lam1) * vecs[:, -1]
    return x, lam2 / lam1


def evaluate_waveform(scenario: ScenarioDraw, x: np.ndarray | None = None,
                      r: np.ndarray | None = None,
                      cfg: SystemConfig | None = None) -> WaveformReport:
    """Full diagnostic report for a waveform, a covariance, or both."""
    if x is None and r is None:
        raise ValueError("need a waveform, a covariance, or both")
    cfg = cfg or scenario.config

    approximate = False
    covariance_gap = None
    if r is not None:
        r = _check_hermitian(r)
        eigs = np.linalg.eigvalsh(r)
        if eigs.min() < _PSD_EIG_TOL * max(1.0, abs(float(eigs.max()))):
            raise ValueError("covariance is not positive semidefinite within tolerance")
        _, rank_ratio = rank_one_metrics(r)
        if x is None:
            x, _ = rank_one_metrics(r)
            approximate = True
        else:
            x = np.asarray(x, dtype=complex).ravel()
            covariance_gap = float(np.linalg.norm(r - np.outer(x, x.conj())))
        pattern_source = r
    else:
        x = np.asarray(x, dtype=complex).ravel()
        pattern_source = np.outer(x, x.conj())
        rank_ratio = 0.0

    gains = beampattern_gain(pattern_source, scenario.grid)
    eta = eta_star(pattern_source, scenario.desired_gain, scenario.grid)
    mse = beampattern_mse(eta, pattern_source, scenario.desired_gain, scenario.grid)
    total_rate, rates = sum_rate(x, scenario.channels, cfg.noise_mw, cfg.bandwidth_hz)
    margins = ci_margin(x, scenario.channels, scenario.symbols, cfg.gamma_linear(),
                        cfg.noise_mw, cfg.half_angle_rad)
    return WaveformReport(
        sum_rate_bps=total_rate,
        per_user_rate=rates,
        mse=mse,
        eta=eta,
        margins=margins,
        tx_power=float(np.vdot(x, x).real),
        beam_gains=gains,
        rank_ratio=rank_ratio,
        covariance_gap=covariance_gap,
        approximate_comm=approximate,
    )
