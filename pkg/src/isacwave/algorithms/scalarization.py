"""Weighted-Tchebycheff scalarization pieces and Pareto dominance tools."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class ScalarizationWeights:
    """Preference weights for the two objectives plus the augmentation term."""

    omega1: float
    omega2: float
    xi: float = 0.001

    def __post_init__(self) -> None:
        if not (0.0 <= self.omega1 <= 1.0 and 0.0 <= self.omega2 <= 1.0):
            raise ValueError("weights must lie in [0, 1]")
        if abs(self.omega1 + self.omega2 - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1 within 1e-12")
        if not (0.0 <= self.xi < 1.0):
            raise ValueError("augmentation coefficient must lie in [0, 1)")
        if self.xi != 0.0 and not (0.001 <= self.xi <= 0.01):
            warnings.warn("augmentation coefficient outside the usual "
                          "[0.001, 0.01] range", stacklevel=2)

    @classmethod
    def of(cls, omega1: float, xi: float = 0.001) -> "ScalarizationWeights":
        return cls(omega1=float(omega1), omega2=1.0 - float(omega1), xi=xi)


@dataclass(frozen=True)
class Utopia:
    """Best attainable value of each objective, solved separately.

    The communication objective is a negated sum rate, so its optimum is
    negative; the sensing objective is a mean squared error, so positive.
    Both serve as normalization denominators and must be nonzero.
    """

    f1_star: float
    f2_star: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.f1_star) or self.f1_star >= 0.0:
            raise ValueError("f1_star must be finite and < 0")
        if not np.isfinite(self.f2_star) or self.f2_star <= 0.0:
            raise ValueError("f2_star must be finite and > 0")


class ScalarizedValues(NamedTuple):
    f1_term: float
    f2_term: float
    alpha: float


def scalarize_tchebycheff(f1: float, f2: float, utopia: Utopia,
                          weights: ScalarizationWeights) -> ScalarizedValues:
    """Augmented weighted-Tchebycheff terms in their textbook ratio form.

    Each reformulated objective is the weighted relative offset from its own
    optimum plus a small multiple of the summed offsets; the scalar value is
    their max.  Note the communication denominator is negative, which makes
    this form sign-indefinite; the optimizer uses degradation_alpha instead.
    """
    r1 = (f1 - utopia.f1_star) / utopia.f1_star
    r2 = (f2 - utopia.f2_star) / utopia.f2_star
    common = weights.xi * (r1 + r2)
    f1_term = weights.omega1 * (r1 + common)
    f2_term = weights.omega2 * (r2 + common)
    return ScalarizedValues(f1_term=float(f1_term), f2_term=float(f2_term),
                            alpha=float(max(f1_term, f2_term)))


def degradation_terms(f1: float, f2: float, utopia: Utopia) -> tuple[float, float]:
    """Nonnegative-at-optimum relative losses against the utopia point."""
    d1 = (f1 - utopia.f1_star) / abs(utopia.f1_star)
    d2 = (f2 - utopia.f2_star) / utopia.f2_star
    return float(d1), float(d2)


def degradation_alpha(f1: float, f2: float, utopia: Utopia,
                      weights: ScalarizationWeights) -> float:
    """Max of the augmented, weighted degradation terms (minimized by MOOP)."""
    d1, d2 = degradation_terms(f1, f2, utopia)
    t1 = weights.omega1 * ((1.0 + weights.xi) * d1 + weights.xi * d2)
    t2 = weights.omega2 * ((1.0 + weights.xi) * d2 + weights.xi * d1)
    return float(max(t1, t2))


def weight_grid(delta_omega: float, xi: float = 0.001) -> tuple[ScalarizationWeights, ...]:
    """Interior sweep omega1 in {delta, 2*delta, ..., 1 - delta}."""
    if not (0.0 < delta_omega <= 0.5):
        raise ValueError("delta_omega must lie in (0, 0.5]")
    steps = round(1.0 / delta_omega)
    if abs(steps * delta_omega - 1.0) > 1e-9 or steps < 2:
        raise ValueError("delta_omega must divide 1 into >= 2 steps")
    return tuple(ScalarizationWeights.of(k * delta_omega, xi=xi)
                 for k in range(1, steps))


def _objective_pair(point) -> tuple[float, float]:
    if hasattr(point, "f1") and hasattr(point, "f2"):
        return float(point.f1), float(point.f2)
    pair = tuple(point)
    if len(pair) < 2:
        raise ValueError("dominance_filter needs (f1, f2) pairs or objects "
                         "with f1/f2 attributes")
    return float(pair[0]), float(pair[1])


def dominance_filter(points, key=None):
    """Keep the mutually non-dominated points (both objectives minimized).

    A point falls only to another point that is no worse in both objectives
    and strictly better in at least one.
    """
    items = list(points)
    get = key or _objective_pair
    pairs = [get(p) for p in items]
    for f1, f2 in pairs:
        if not (np.isfinite(f1) and np.isfinite(f2)):
            raise ValueError("dominance_filter requires finite objectives")
    kept = []
    for i, (f1_i, f2_i) in enumerate(pairs):
        dominated = any(
            j != i
            and f1_j <= f1_i and f2_j <= f2_i
            and (f1_j < f1_i or f2_j < f2_i)
            for j, (f1_j, f2_j) in enumerate(pairs)
        )
        if not dominated:
            kept.append(items[i])
    return kept
