"""System model: array geometry, channels, symbols, and scenario draws.

The transmitter is a half-wavelength uniform linear array with ``n_tx``
elements serving ``n_users`` single-antenna receivers while illuminating
``n_targets`` point directions.  Angles are measured from broadside, so the
visible region is [-pi/2, pi/2).
"""

from __future__ import annotations

import dataclasses
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


def dbm_to_mw(dbm: float) -> float:
    """Convert a dBm level to linear milliwatts."""
    return float(10.0 ** (dbm / 10.0))


@dataclass(frozen=True)
class SystemConfig:
    """Static parameters of one design problem.

    Power-like quantities are stored in dBm and converted to linear
    milliwatts by the accessors, so every downstream formula works on a
    linear scale.
    """

    n_tx: int = 8
    n_rx: int = 8
    n_users: int = 3
    n_targets: int = 3
    p_max_dbm: float = 25.0
    noise_dbm: float = -60.0
    psk_order: int = 4
    gamma_db: float | tuple[float, ...] = 10.0
    rician_factor: float = 1.0
    bandwidth_hz: float = 1.0
    grid_size: int = 180
    beam_width_deg: float = 3.0
    target_angles_deg: tuple[float, ...] = (-60.0, 0.0, 60.0)
    xi: float = 0.001
    delta_omega: float = 0.01
    eps_rate: float = 1e-4
    eps_mse: float = 1e-4
    eps_moop: float = 1e-4
    max_iters_soop1: int = 50
    max_iters_soop2: int = 50
    max_iters_moop: int = 50
    rng_seed: int = 2024

    def __post_init__(self) -> None:
        errors = []
        for name in ("n_tx", "n_rx", "n_users", "n_targets"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                errors.append(f"{name}: expected integer >= 1, got {value!r}")
        if not (isinstance(self.psk_order, (int, np.integer)) and self.psk_order >= 2
                and (self.psk_order & (self.psk_order - 1)) == 0):
            errors.append(f"psk_order: expected a power of two >= 2, got {self.psk_order!r}")
        if not self.rician_factor >= 0:
            errors.append(f"rician_factor: expected >= 0, got {self.rician_factor!r}")
        if not self.bandwidth_hz > 0:
            errors.append(f"bandwidth_hz: expected > 0, got {self.bandwidth_hz!r}")
        if not (isinstance(self.grid_size, (int, np.integer)) and self.grid_size >= 2):
            errors.append(f"grid_size: expected integer >= 2, got {self.grid_size!r}")
        if not self.beam_width_deg > 0:
            errors.append(f"beam_width_deg: expected > 0, got {self.beam_width_deg!r}")
        if not (0.0 < self.delta_omega <= 0.5):
            errors.append(f"delta_omega: expected in (0, 0.5], got {self.delta_omega!r}")
        for name in ("eps_rate", "eps_mse", "eps_moop"):
            if not getattr(self, name) > 0:
                errors.append(f"{name}: expected > 0, got {getattr(self, name)!r}")
        for name in ("max_iters_soop1", "max_iters_soop2", "max_iters_moop"):
            if not getattr(self, name) >= 1:
                errors.append(f"{name}: expected >= 1, got {getattr(self, name)!r}")
        gammas = self.gamma_db if isinstance(self.gamma_db, tuple) else (self.gamma_db,)
        if isinstance(self.gamma_db, tuple) and len(gammas) != self.n_users:
            errors.append(
                f"gamma_db: vector length {len(gammas)} does not match n_users {self.n_users}")
        if len(self.target_angles_deg) != self.n_targets:
            errors.append(
                "target_angles_deg: length "
                f"{len(self.target_angles_deg)} does not match n_targets {self.n_targets}")
        for ang in self.target_angles_deg:
            if not (-90.0 <= ang < 90.0):
                errors.append(f"target_angles_deg: {ang!r} outside [-90, 90)")
        if errors:
            raise ValueError("invalid SystemConfig: " + "; ".join(errors))
        if not (0.001 <= self.xi <= 0.01):
            warnings.warn(
                f"xi={self.xi} outside the recommended [0.001, 0.01] range",
                stacklevel=2,
            )

    @property
    def p_max_mw(self) -> float:
        return dbm_to_mw(self.p_max_dbm)

    @property
    def noise_mw(self) -> float:
        return dbm_to_mw(self.noise_dbm)

    @property
    def half_angle_rad(self) -> float:
        """Half-opening of the constructive-interference wedge."""
        return np.pi / self.psk_order

    def gamma_linear(self) -> np.ndarray:
        """Per-user SNR floors on a linear scale, shape (n_users,)."""
        if isinstance(self.gamma_db, tuple):
            vals = np.asarray(self.gamma_db, dtype=float)
        else:
            vals = np.full(self.n_users, float(self.gamma_db))
        return 10.0 ** (vals / 10.0)

    def target_angles_rad(self) -> np.ndarray:
        return np.deg2rad(np.asarray(self.target_angles_deg, dtype=float))

    def replace(self, **kwargs) -> "SystemConfig":
        return dataclasses.replace(self, **kwargs)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["gamma_db"] = list(self.gamma_db) if isinstance(self.gamma_db, tuple) else self.gamma_db
        out["target_angles_deg"] = list(self.target_angles_deg)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SystemConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"invalid SystemConfig: unknown fields {sorted(unknown)}")
        kwargs = dict(data)
        if isinstance(kwargs.get("gamma_db"), list):
            kwargs["gamma_db"] = tuple(float(g) for g in kwargs["gamma_db"])
        if isinstance(kwargs.get("target_angles_deg"), list):
            kwargs["target_angles_deg"] = tuple(float(a) for a in kwargs["target_angles_deg"])
        return cls(**kwargs)


@dataclass(frozen=True)
class AngleGrid:
    """Uniform angle grid over the visible region.

    Angles are radians from broadside, strictly increasing, with spacing
    uniform to 1e-12.  A single-angle grid is allowed for toy problems.
    """

    angles_rad: tuple[float, ...]

    def __post_init__(self) -> None:
        a = np.asarray(self.angles_rad, dtype=float)
        if a.size < 1:
            raise ValueError("AngleGrid needs at least one angle")
        if np.any(a < -np.pi / 2 - 1e-12) or np.any(a >= np.pi / 2):
            raise ValueError("AngleGrid angles must lie in [-pi/2, pi/2)")
        if a.size > 1:
            d = np.diff(a)
            if np.any(d <= 0):
                raise ValueError("AngleGrid angles must be strictly increasing")
            if np.max(np.abs(d - d[0])) > 1e-12:
                raise ValueError("AngleGrid spacing must be uniform within 1e-12")
        object.__setattr__(self, "angles_rad", tuple(float(x) for x in a))

    def __len__(self) -> int:
        return len(self.angles_rad)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.angles_rad, dtype=float)

    @property
    def spacing(self) -> float:
        if len(self.angles_rad) < 2:
            return 0.0
        return self.angles_rad[1] - self.angles_rad[0]


@dataclass(frozen=True)
class PskSymbolSet:
    """Unit-modulus PSK constellation with points midway between wedge edges."""

    order: int

    def __post_init__(self) -> None:
        m = self.order
        if not (isinstance(m, (int, np.integer)) and m >= 2 and (m & (m - 1)) == 0):
            raise ValueError(f"PSK order must be a power of two >= 2, got {m!r}")

    @property
    def half_angle(self) -> float:
        return np.pi / self.order

    @property
    def points(self) -> np.ndarray:
        k = np.arange(self.order)
        return np.exp(1j * (2 * k + 1) * np.pi / self.order)


@dataclass
class ScenarioDraw:
    """One random realization: channels, symbols, and the sensing template."""

    config: SystemConfig
    grid: AngleGrid
    channels: np.ndarray          # (n_users, n_tx) complex
    symbols: np.ndarray           # (n_users,) complex, unit modulus
    user_angles_rad: np.ndarray   # (n_users,)
    target_angles_rad: np.ndarray  # (n_targets,)
    desired_gain: np.ndarray      # (len(grid),) binary template
    seed: int


@dataclass
class RealifiedUser:
    """Real-valued view of one user's rotated channel.

    With ``x_stack = [Im(x); Re(x)]`` the following identities hold:
    ``z @ x_stack == Im(h_rot^H x)``, ``z_perp @ x_stack == Re(h_rot^H x)``
    and ``norm(H.T @ x_stack)^2 == abs(h_rot^H x)^2``.
    """

    rotated_channel: np.ndarray   # (n_tx,) complex, channel * symbol
    z: np.ndarray                 # (2 n_tx,)
    z_perp: np.ndarray            # (2 n_tx,)
    stack: np.ndarray             # (2 n_tx, 2), columns [z, z_perp]


def steering_vector(angle_rad: float, n_tx: int) -> np.ndarray:
    """Unit-norm steering vector of a half-wavelength ULA toward ``angle_rad``."""
    if n_tx < 1:
        raise ValueError(f"n_tx must be >= 1, got {n_tx}")
    n = np.arange(n_tx)
    return np.exp(-1j * np.pi * n * np.sin(angle_rad)) / np.sqrt(n_tx)


def steering_matrix(angles_rad: np.ndarray, n_tx: int) -> np.ndarray:
    """Column-stacked steering vectors, shape (n_tx, len(angles))."""
    angles = np.atleast_1d(np.asarray(angles_rad, dtype=float))
    n = np.arange(n_tx)[:, None]
    return np.exp(-1j * np.pi * n * np.sin(angles)[None, :]) / np.sqrt(n_tx)


def build_grid(grid_size: int) -> AngleGrid:
    """Uniform grid of ``grid_size`` angles starting at -pi/2, spacing pi/L."""
    if grid_size < 2:
        raise ValueError(f"grid_size must be >= 2, got {grid_size}")
    ell = np.arange(grid_size)
    return AngleGrid(tuple(-np.pi / 2 + ell * np.pi / grid_size))


def desired_beampattern(grid: AngleGrid, target_angles_rad: np.ndarray,
                        beam_width_rad: float) -> np.ndarray:
    """Binary sensing template: 1 on bins strictly inside a half-width of a target."""
    if beam_width_rad <= 0:
        raise ValueError(f"beam width must be > 0, got {beam_width_rad}")
    targets = np.atleast_1d(np.asarray(target_angles_rad, dtype=float))
    angles = grid.array
    hits = np.abs(angles[:, None] - targets[None, :]) < beam_width_rad / 2.0
    return hits.any(axis=1).astype(float)


def trial_generator(rng_seed: int, trial: int) -> np.random.Generator:
    """Deterministic per-trial RNG; distinct trials give independent streams."""
    return np.random.default_rng(np.random.SeedSequence([int(rng_seed), int(trial)]))


def draw_scenario(cfg: SystemConfig, seed: int) -> ScenarioDraw:
    """Draw one Rician multi-user scenario with the configured sensing targets.

    Channels are ``sqrt(v/(1+v)) * a(theta_user) + sqrt(1/(1+v)) * g`` with
    ``g`` having unit-variance complex-normal entries.  User angles are
    i.i.d. uniform over the grid span; symbols are uniform over the PSK set.
    """
    rng = np.random.default_rng(np.random.SeedSequence([0x5CE7A210, int(seed)]))
    grid = build_grid(cfg.grid_size)
    k, n_tx = cfg.n_users, cfg.n_tx
    v = cfg.rician_factor

    user_angles = rng.uniform(-np.pi / 2, np.pi / 2, size=k)
    los = steering_matrix(user_angles, n_tx).T            # (k, n_tx)
    scatter = (rng.standard_normal((k, n_tx)) + 1j * rng.standard_normal((k, n_tx))) / np.sqrt(2)
    channels = np.sqrt(v / (1 + v)) * los + np.sqrt(1 / (1 + v)) * scatter

    symbols = PskSymbolSet(cfg.psk_order).points[rng.integers(0, cfg.psk_order, size=k)]

    targets = cfg.target_angles_rad()
    ghat = desired_beampattern(grid, targets, np.deg2rad(cfg.beam_width_deg))
    return ScenarioDraw(
        config=cfg,
        grid=grid,
        channels=channels,
        symbols=symbols,
        user_angles_rad=user_angles,
        target_angles_rad=targets,
        desired_gain=ghat,
        seed=int(seed),
    )


def realify(channel: np.ndarray, symbol: complex) -> RealifiedUser:
    """Rotate a channel by its symbol and expose the real-valued functionals."""
    h = np.asarray(channel, dtype=complex).ravel()
    s = complex(symbol)
    if abs(abs(s) - 1.0) > 1e-9:
        raise ValueError(f"symbol must have unit modulus, got |s|={abs(s)!r}")
    h_rot = h * s
    z = np.concatenate([h_rot.real, -h_rot.imag])
    z_perp = np.concatenate([h_rot.imag, h_rot.real])
    stack = np.stack([z, z_perp], axis=1)
    return RealifiedUser(rotated_channel=h_rot, z=z, z_perp=z_perp, stack=stack)


def stack_waveform(x: np.ndarray) -> np.ndarray:
    """Real stacking [Im(x); Re(x)] matching the RealifiedUser functionals."""
    x = np.asarray(x, dtype=complex).ravel()
    return np.concatenate([x.imag, x.real])


def unstack_waveform(x_stack: np.ndarray) -> np.ndarray:
    """Inverse of :func:`stack_waveform`."""
    x_stack = np.asarray(x_stack, dtype=float).ravel()
    if x_stack.size % 2:
        raise ValueError("stacked waveform length must be even")
    n = x_stack.size // 2
    return x_stack[n:] + 1j * x_stack[:n]


def _complex_to_pairs(arr: np.ndarray) -> list:
    a = np.asarray(arr, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _pairs_to_complex(data) -> np.ndarray:
    a = np.asarray(data, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def scenario_to_dict(sc: ScenarioDraw) -> dict:
    """JSON-ready form of a scenario; complex entries become [re, im] pairs."""
    return {
        "schema": "isacwave.scenario/1",
        "config": sc.config.to_dict(),
        "seed": sc.seed,
        "channels": _complex_to_pairs(sc.channels),
        "symbols": _complex_to_pairs(sc.symbols),
        "user_angles_rad": sc.user_angles_rad.tolist(),
        "target_angles_rad": sc.target_angles_rad.tolist(),
        "desired_gain": sc.desired_gain.tolist(),
        "grid_angles_rad": list(sc.grid.angles_rad),
    }


def scenario_from_dict(data: dict) -> ScenarioDraw:
    cfg = SystemConfig.from_dict(data["config"])
    grid = AngleGrid(tuple(data["grid_angles_rad"]))
    return ScenarioDraw(
        config=cfg,
        grid=grid,
        channels=_pairs_to_complex(data["channels"]),
        symbols=_pairs_to_complex(data["symbols"]),
        user_angles_rad=np.asarray(data["user_angles_rad"], dtype=float),
        target_angles_rad=np.asarray(data["target_angles_rad"], dtype=float),
        desired_gain=np.asarray(data["desired_gain"], dtype=float),
        seed=int(data["seed"]),
    )


def save_scenario(sc: ScenarioDraw, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(sc), fh, indent=1)


def load_scenario(path) -> ScenarioDraw:
    with open(path, "r", encoding="utf-8") as fh:
        return scenario_from_dict(json.load(fh))
