"""Per-scenario precomputations shared by the design algorithms."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..convex import MatQuad, mat_to_rvec
from ..metrics import eta_star
from ..model import RealifiedUser, ScenarioDraw, realify, steering_matrix


@dataclass(frozen=True)
class CiGeometry:
    """Affine half-space pair whose intersection is one user's symbol cone.

    Acting on the realified waveform coordinates, both rows constrain
    ``row @ x_stacked <= rhs``; the margin of the cone is the minimum of
    ``rhs - row @ x_stacked`` over the pair, scaled back by cos of the
    half-angle kept implicit (the sign is all the algorithms need).
    """

    rows: np.ndarray  # (2, 2*n_tx)
    rhs: float


class ScenarioOperators:
    """Realified users, beampattern linear maps, and template quadratics."""

    def __init__(self, scenario: ScenarioDraw):
        self.scenario = scenario
        cfg = scenario.config
        self.n_tx = cfg.n_tx
        self.p_max = cfg.p_max_mw
        self.noise = cfg.noise_mw
        self.tan_phi = float(np.tan(cfg.half_angle_rad))
        gammas = np.asarray(cfg.gamma_linear(), dtype=float)
        if gammas.size == 1:
            gammas = np.repeat(gammas, cfg.n_users)
        self.gammas = gammas
        self.amp_floor = np.sqrt(self.noise * self.gammas)  # sqrt(N0*Gamma_k)

        self.users: list[RealifiedUser] = [
            realify(scenario.channels[k], scenario.symbols[k])
            for k in range(cfg.n_users)
        ]
        self.channel_outers = [
            np.outer(scenario.channels[k], scenario.channels[k].conj())
            for k in range(cfg.n_users)
        ]

        self.grid = scenario.grid
        self.desired = np.asarray(scenario.desired_gain, dtype=float)
        steer = steering_matrix(self.grid.array, cfg.n_tx)  # (n_tx, L)
        self.steer_outers = [
            np.outer(steer[:, l], steer[:, l].conj())
            for l in range(steer.shape[1])
        ]
        self.gain_rows = np.stack([mat_to_rvec(a) for a in self.steer_outers])
        self.ghat_norm_sq = float(self.desired @ self.desired)
        if self.ghat_norm_sq <= 0.0:
            raise ValueError("desired beampattern template is identically zero")

    # -- communication-side geometry ----------------------------------------

    def ci_rows_waveform(self, k: int) -> CiGeometry:
        """Symbol-cone half-spaces on the stacked waveform [Im x; Re x]."""
        user = self.users[k]
        z, zp = user.z, user.z_perp
        rows = np.stack([z - self.tan_phi * zp, -z - self.tan_phi * zp])
        return CiGeometry(rows=rows, rhs=-self.amp_floor[k] * self.tan_phi)

    def ci_rows_amplitude(self, k: int) -> CiGeometry:
        """Same cone on a single received amplitude laid out as (Re, Im)."""
        rows = np.array([[-self.tan_phi, 1.0], [-self.tan_phi, -1.0]])
        return CiGeometry(rows=rows, rhs=-self.amp_floor[k] * self.tan_phi)

    # -- sensing-side quadratics ---------------------------------------------

    def mse_quad(self, eta: float) -> MatQuad:
        """(1/L) sum_l (<A_l,R> - eta*Ghat_l)^2 as a quadratic in rvec(R)."""
        n_grid = len(self.steer_outers)
        return MatQuad.from_terms(self.steer_outers, -eta * self.desired,
                                  1.0 / n_grid)

    @cached_property
    def mse_quad_eta_opt(self) -> MatQuad:
        """The template-fit MSE with the scale factor already minimized out.

        Substituting the closed-form optimal scaling turns the fit residual
        at angle l into <Ghat_l*T - A_l, R> with T the template-weighted
        average of the steering outers; the result stays a PSD quadratic.
        """
        n_grid = len(self.steer_outers)
        t_mat = sum(g * a for g, a in zip(self.desired, self.steer_outers))
        t_mat = t_mat / self.ghat_norm_sq
        resid = [g * t_mat - a for g, a in zip(self.desired, self.steer_outers)]
        return MatQuad.from_terms(resid, np.zeros(n_grid), 1.0 / n_grid)

    def eta_for(self, r: np.ndarray) -> float:
        return eta_star(r, self.desired, self.grid)

    def mse_value(self, eta: float, r: np.ndarray) -> float:
        """Template-fit MSE at a fixed scale factor."""
        gains = (self.gain_rows @ mat_to_rvec(r)).real
        resid = eta * self.desired - gains
        return float(resid @ resid) / self.desired.size

    def sensing_objective(self, r: np.ndarray) -> float:
        """min_eta MSE(eta, R), evaluated directly from the quadratic."""
        rv = mat_to_rvec(r)
        mq = self.mse_quad_eta_opt
        return float(rv @ (mq.hess @ rv) + mq.lin @ rv + mq.const)

    # -- diagnostics ----------------------------------------------------------

    def waveform_margins(self, x: np.ndarray) -> np.ndarray:
        """CI margins of a complex waveform, one entry per user."""
        out = np.empty(len(self.users))
        for k, user in enumerate(self.users):
            amp = user.rotated_channel.conj() @ x
            out[k] = (amp.real - self.amp_floor[k]) * self.tan_phi - abs(amp.imag)
        return out

    def sum_mu(self, x: np.ndarray) -> float:
        """Sum over users of ln(1 + SNR) for a concrete waveform."""
        total = 0.0
        for k, user in enumerate(self.users):
            amp = user.rotated_channel.conj() @ x
            total += float(np.log1p(abs(amp) ** 2 / self.noise))
        return total
